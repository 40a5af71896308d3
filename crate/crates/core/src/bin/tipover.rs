use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use tipover_core::force_angle::{analyze_trace, geometry_sweep};
use tipover_core::geometry::{default_ft_lever, LayoutMode, WheelLayout};
use tipover_core::io;
use tipover_core::scenario::{
    emit_matrix, emit_outputs, emit_recovery, run_matrix, run_recovery, run_scenario, RunSummary, ScenarioConfig,
};
use tipover_core::uncertainty::identify_series;
use tipover_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tipover",
    version,
    about = "Tip-over analysis and contact-aware sliding simulations"
)]
struct Cli {
    /// Default output directory.
    #[arg(long, global = true, env = "TIPOVER_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Simulate { config: PathBuf },
    /// Run the 4×3 scenario/approach grid.
    Matrix {
        /// Base scenario (defaults are used otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rerun a scenario for several initial contact angles (degrees).
    Recover {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        angles: Vec<f64>,
        config: PathBuf,
    },
    /// Force-angle analysis of a wrench trace.
    Analyze {
        trace: PathBuf,
        #[arg(long)]
        layout: PathBuf,
    },
    /// Force-angle analysis over scaled wheel distances and tip offsets.
    Sweep {
        trace: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        rd: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        h: Vec<f64>,
        /// Layout file; the reference three-wheel layout otherwise.
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// Identify an uncertainty trace from FT-sensor and estimator logs.
    Identify { measured: PathBuf },
}

#[derive(Deserialize)]
#[serde(default)]
struct LayoutFile {
    mode: LayoutMode,
    wheel_distance: f64,
    tip_offset: f64,
    wheel_radius: Option<f64>,
}

impl Default for LayoutFile {
    fn default() -> Self {
        let r = WheelLayout::reference_three_wheel();
        Self {
            mode: r.mode,
            wheel_distance: r.wheel_distance,
            tip_offset: r.tip_offset,
            wheel_radius: None,
        }
    }
}

fn load_layout(path: &Path) -> Result<WheelLayout> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let f: LayoutFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut layout = match f.mode {
        LayoutMode::TwoWheel => WheelLayout::two_wheel(f.wheel_distance, f.tip_offset),
        LayoutMode::ThreeWheel => WheelLayout::three_wheel(f.wheel_distance, f.tip_offset),
    };
    if let Some(r) = f.wheel_radius {
        layout = layout.with_wheel_radius(r);
    }
    layout.validate()?;
    Ok(layout)
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn print_summary(s: &RunSummary) {
    let m = &s.metrics;
    let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!(
        "{:<24} tipovers={:<3} tipover_s={:<7.3} max|e_n|={:<7.3} recovery_s={:<7} min_alpha={:<8} {}",
        s.name,
        m.tipover_events,
        m.tipover_duration,
        m.max_abs_e_n,
        show(m.recovery_time),
        show(m.min_alpha),
        if m.unstable { "UNSTABLE" } else { "" }
    );
}

fn run(cli: Cli) -> Result<()> {
    let default_out = |name: &str| {
        cli.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("tipover_out"))
            .join(name)
    };
    match cli.command {
        Command::Simulate { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            let dir = cli
                .out
                .clone()
                .or(cfg.output.dir.clone())
                .unwrap_or_else(|| default_out(&cfg.name));
            let res = run_scenario(&cfg)?;
            emit_outputs(&res, &dir)?;
            print_summary(&RunSummary::new(&res));
            if let Some(reason) = &res.metrics.instability {
                return Err(Error::Divergence {
                    time: res.rows.last().map_or(0.0, |r| r.t),
                    reason: reason.clone(),
                });
            }
            println!("outputs in {}", dir.display());
        }
        Command::Matrix { config } => {
            let base = match config {
                Some(p) => ScenarioConfig::load(&p)?,
                None => ScenarioConfig::default(),
            };
            let dir = cli.out.clone().unwrap_or_else(|| default_out("matrix"));
            let cells = run_matrix(&base)?;
            emit_matrix(&cells, &dir)?;
            for c in &cells {
                match &c.result {
                    Ok(r) => print_summary(&RunSummary::new(r)),
                    Err(e) => println!("{}_{:<22} failed: {e}", c.scenario, c.variant.name()),
                }
            }
            println!("outputs in {}", dir.display());
        }
        Command::Recover { angles, config } => {
            if angles.is_empty() {
                return Err(Error::Config("--angles needs at least one value".into()));
            }
            let cfg = ScenarioConfig::load(&config)?;
            let dir = cli.out.clone().unwrap_or_else(|| default_out("recovery"));
            let runs = run_recovery(&cfg, &angles)?;
            emit_recovery(&runs, &dir)?;
            for (a, r) in &runs {
                let m = &r.metrics;
                println!(
                    "dbeta={a:>5}°  recovery_s={}  peak_impact|e_n|={:.3}",
                    m.recovery_time.map_or("-".into(), |v| format!("{v:.3}")),
                    m.peak_impact_e_n
                );
            }
            println!("outputs in {}", dir.display());
        }
        Command::Analyze { trace, layout } => {
            let tr = io::read_wrench_trace(&trace)?;
            let layout = load_layout(&layout)?;
            let dir = cli.out.clone().unwrap_or_else(|| default_out("analysis"));
            mkdir(&dir)?;
            let a = analyze_trace(&tr, &layout)?;
            io::write_stability_report(&dir.join("report.csv"), &a)?;
            io::write_windows(&dir.join("windows.csv"), &a.windows)?;
            let gaps = a.reports.iter().filter(|r| r.is_none()).count();
            println!(
                "{} samples, {} tip-over windows, {} indeterminate, min alpha {}",
                a.time.len(),
                a.windows.len(),
                gaps,
                a.min_alpha().map_or("-".into(), |v| format!("{v:.5}"))
            );
            println!("outputs in {}", dir.display());
        }
        Command::Sweep { trace, rd, h, layout } => {
            let tr = io::read_wrench_trace(&trace)?;
            let layout = match layout {
                Some(p) => load_layout(&p)?,
                None => WheelLayout::reference_three_wheel(),
            };
            let dir = cli.out.clone().unwrap_or_else(|| default_out("sweep"));
            mkdir(&dir)?;
            let rows = geometry_sweep(&tr, &layout, &rd, &h)?;
            io::write_table(
                &dir.join("sweep_summary.csv"),
                &["r_scale", "h_scale", "min_alpha", "windows"],
                rows.iter().map(|r| {
                    vec![
                        io::fmt(r.r_scale),
                        io::fmt(r.h_scale),
                        r.min_alpha().map(io::fmt).unwrap_or_default(),
                        r.analysis.windows.len().to_string(),
                    ]
                }),
            )?;
            for r in &rows {
                let name = format!("alpha_r{}_h{}.csv", r.r_scale, r.h_scale);
                io::write_stability_report(&dir.join(name), &r.analysis)?;
                println!(
                    "r x{:<4} h x{:<4} min alpha {:>10}  windows {}",
                    r.r_scale,
                    r.h_scale,
                    r.min_alpha().map_or("-".into(), |v| format!("{v:.5}")),
                    r.analysis.windows.len()
                );
            }
            println!("outputs in {}", dir.display());
        }
        Command::Identify { measured } => {
            let rows = io::read_measured_input(&measured)?;
            let trace = identify_series(&rows, &default_ft_lever())?;
            let dir = cli.out.clone().unwrap_or_else(|| default_out("identify"));
            mkdir(&dir)?;
            io::write_uncertainty(&dir.join("uncertainty.csv"), &trace)?;
            println!("{} samples identified; outputs in {}", trace.len(), dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
