//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails when a criterion fails, except for those listed in
//! `KNOWN_RED`, which are still reported as FAIL. `TIPOVER_STRICT=1` makes
//! every failure fatal.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tipover_core::contact::{classify_contact, step_planar, ContactCode, SimConfig};
use tipover_core::control::{
    motion_force_wrench, normal_force_torque_3w, normal_force_torque_planar, plane_errors_3w, Gains,
};
use tipover_core::force_angle::{geometry_sweep, net_tipover_wrench, stability_measure, support_pattern};
use tipover_core::geometry::{PlanarState, PlanarWrench, Vec3, WheelLayout};
use tipover_core::scenario::{
    bundled_wrench_trace, emit_outputs, run_matrix, run_recovery, run_scenario, run_three_wheel, ScenarioConfig,
    UncertaintySource, Variant,
};

/// Criteria expected to fail with the shipped defaults; see the README.
const KNOWN_RED: &[u8] = &[8];

struct Outcome {
    id: u8,
    pass: bool,
    detail: String,
}

fn config(name: &str) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{e}"))
}

fn run(id: u8, limit_s: Option<f64>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (ok, mut detail) = f();
    let dt = start.elapsed().as_secs_f64();
    let in_time = limit_s.is_none_or(|l| dt < l);
    match limit_s {
        Some(l) => detail.push_str(&format!("; {dt:.2} s (limit {l} s)")),
        None => detail.push_str(&format!("; {dt:.2} s")),
    }
    Outcome {
        id,
        pass: ok && in_time,
        detail,
    }
}

// ---------------------------------------------------------------------------
// independent force-angle oracle on plain arrays

type V = [f64; 3];

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn add(a: V, b: V) -> V {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn mul(a: V, c: f64) -> V {
    [a[0] * c, a[1] * c, a[2] * c]
}
fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: V, b: V) -> V {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
fn norm(a: V) -> f64 {
    dot(a, a).sqrt()
}
fn unit(a: V) -> V {
    mul(a, 1.0 / norm(a))
}

/// Minimum over axes of `θ ‖l‖ |sin θ| ‖f*‖`, with θ from `atan2` and the
/// couple member written as `(l × m) / ‖l‖²`.
fn oracle_alpha(points: &[V], f: V, m: V) -> f64 {
    let n = points.len();
    let axes = if n == 2 { 1 } else { n };
    (0..axes)
        .map(|i| {
            let p0 = points[i];
            let p1 = points[(i + 1) % n];
            let a = unit(sub(p1, p0));
            let l = sub(p1, mul(a, dot(a, p1)));
            let f_perp = sub(f, mul(a, dot(a, f)));
            let m_par = mul(a, dot(a, m));
            let f_star = add(f_perp, mul(cross(l, m_par), 1.0 / dot(l, l)));
            let c = cross(unit(f_star), unit(l));
            let theta = dot(c, a).atan2(dot(unit(f_star), unit(l)));
            theta * norm(l) * theta.sin().abs() * norm(f_star)
        })
        .fold(f64::INFINITY, f64::min)
}

fn random_layout(rng: &mut ChaCha8Rng) -> WheelLayout {
    let r = rng.random_range(0.03..0.4);
    let h = rng.random_range(0.05..0.8);
    if rng.random_bool(0.2) {
        WheelLayout::two_wheel(r, h)
    } else {
        WheelLayout::three_wheel(r, h)
    }
}

fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

fn as_array(v: &Vec3) -> V {
    [v.x, v.y, v.z]
}

fn criterion_1() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for _ in 0..1000 {
        let layout = random_layout(&mut rng);
        let f = random_vec(&mut rng, 20.0) + Vec3::new(0.0, 0.0, 15.0);
        let m = random_vec(&mut rng, 1.0);
        let axes = support_pattern(&layout).unwrap();
        let Ok(report) = stability_measure(&net_tipover_wrench(&f, &m, &Vec3::zeros()), &axes) else {
            continue;
        };
        let points: Vec<V> = layout.wheel_positions.iter().map(as_array).collect();
        let expect = oracle_alpha(&points, as_array(&f), as_array(&m));
        worst = worst.max((report.alpha - expect).abs() / expect.abs());
        checked += 1;
    }
    (
        checked == 1000 && worst <= 1e-9,
        format!("{checked} samples, max relative deviation {worst:.2e} (tolerance 1e-9)"),
    )
}

fn criterion_2() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut hom, mut rot) = (0.0_f64, 0.0_f64);
    let mut argmin_same = true;
    for _ in 0..1000 {
        let layout = random_layout(&mut rng);
        let f = random_vec(&mut rng, 20.0) + Vec3::new(0.0, 0.0, 15.0);
        let m = random_vec(&mut rng, 1.0);
        let axes = support_pattern(&layout).unwrap();
        let base = stability_measure(&net_tipover_wrench(&f, &m, &Vec3::zeros()), &axes).unwrap();

        let c = rng.random_range(0.05..20.0);
        let scaled = stability_measure(&net_tipover_wrench(&(f * c), &(m * c), &Vec3::zeros()), &axes).unwrap();
        hom = hom.max((scaled.alpha - c * base.alpha).abs() / (c * base.alpha).abs());
        argmin_same &= scaled.argmin_axis == base.argmin_axis;

        let axis = Vector3::new(
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
            rng.random::<f64>() - 0.5,
        );
        let q = UnitQuaternion::from_scaled_axis(axis * rng.random_range(0.0..6.0));
        let mut turned = layout.clone();
        turned.wheel_positions = layout.wheel_positions.iter().map(|p| q * p).collect();
        let turned_axes = support_pattern(&turned).unwrap();
        let r = stability_measure(&net_tipover_wrench(&(q * f), &(q * m), &Vec3::zeros()), &turned_axes).unwrap();
        rot = rot.max((r.alpha - base.alpha).abs());
        for (a, b) in r.per_axis.iter().zip(&base.per_axis) {
            rot = rot.max((a.theta - b.theta).abs());
        }
    }
    (
        hom <= 1e-10 && rot <= 1e-10 && argmin_same,
        format!(
            "homogeneity max rel {hom:.2e}, argmin unchanged {argmin_same}; rotation max |Δθ|,|Δalpha| {rot:.2e} (tolerance 1e-10)"
        ),
    )
}

fn criterion_3() -> (bool, String) {
    let layout = WheelLayout::reference_three_wheel();
    let axes = support_pattern(&layout).unwrap();
    let w = net_tipover_wrench(&Vec3::new(0.0, 0.0, 15.0), &Vec3::zeros(), &Vec3::zeros());
    let report = stability_measure(&w, &axes).unwrap();
    let expect = (0.042f64 / 0.3).atan();
    let dev = report
        .per_axis
        .iter()
        .map(|a| (a.theta - expect).abs())
        .fold(0.0, f64::max);
    (
        report.per_axis.len() == 3 && dev <= 1e-9,
        format!("theta = atan(0.042/0.3) = {expect:.9} rad on 3 axes, max deviation {dev:.2e} (tolerance 1e-9)"),
    )
}

fn criterion_4() -> (bool, String) {
    let trace = bundled_wrench_trace().unwrap();
    let rows = geometry_sweep(
        &trace,
        &WheelLayout::reference_three_wheel(),
        &[1.0, 2.0, 5.0],
        &[1.0, 0.5, 0.2],
    )
    .unwrap();
    let min = |r: f64, h: f64| {
        rows.iter()
            .find(|row| row.r_scale == r && row.h_scale == h)
            .and_then(|row| row.min_alpha())
            .unwrap()
    };
    let r_series = [min(1.0, 1.0), min(2.0, 1.0), min(5.0, 1.0)];
    let h_series = [min(1.0, 1.0), min(1.0, 0.5), min(1.0, 0.2)];
    let nondecreasing = |s: &[f64; 3]| s[0] <= s[1] && s[1] <= s[2];
    let alpha = |r: f64| {
        rows.iter()
            .find(|row| row.r_scale == r && row.h_scale == 1.0)
            .unwrap()
            .analysis
            .alpha_series()
    };
    let dominates = alpha(5.0).iter().zip(alpha(2.0)).all(|(a, b)| match (a, b) {
        (Some(a), Some(b)) => *a >= b,
        _ => true,
    });
    (
        nondecreasing(&r_series) && nondecreasing(&h_series),
        format!(
            "min alpha r_d x1,2,5 = {:.4}, {:.4}, {:.4}; h x1,1/2,1/5 = {:.4}, {:.4}, {:.4}; 5r_d dominates 2r_d pointwise: {dominates}",
            r_series[0], r_series[1], r_series[2], h_series[0], h_series[1], h_series[2]
        ),
    )
}

/// Open-loop planar plant on the stiff reference contact, held for 3 s.
fn settle_planar(push: f64, tau: f64) -> Vec<f64> {
    let cfg = SimConfig::planar_default();
    let mut s = PlanarState::at_rest(0.0, cfg.layout.tip_offset, 0.0);
    let w = PlanarWrench::new(0.0, push, tau);
    let mut forces = Vec::new();
    for _ in 0..3000 {
        let (next, report) = step_planar(&s, &w, &cfg).unwrap();
        s = next;
        forces = report.normal_forces;
    }
    forces
}

fn criterion_5() -> Vec<Outcome> {
    let even = run(5, Some(5.0), || {
        let f = settle_planar(15.0, 0.0);
        let dev = f.iter().map(|f| (f - 7.5).abs() / 7.5).fold(0.0, f64::max);
        (
            dev <= 0.01,
            format!(
                "15 N push: f_n = {:.4}, {:.4} N, max deviation {:.3}% (tolerance 1%)",
                f[0],
                f[1],
                dev * 100.0
            ),
        )
    });
    let torque = run(5, Some(5.0), || {
        let tau = 0.3;
        let r_w = WheelLayout::reference_planar().wheel_distance;
        // moment balance about the CoM: r_w (f_n2 - f_n1) = tau
        let expect = -tau / r_w;
        let f = settle_planar(15.0, tau);
        let e_n = f[0] - f[1];
        let dev = (e_n - expect).abs() / expect.abs();
        (
            dev <= 0.02,
            format!(
                "tau = {tau} N·m: e_n = {e_n:.4} N, oracle -tau/r_w = {expect:.4} N, deviation {:.3}% (tolerance 2%)",
                dev * 100.0
            ),
        )
    });
    vec![even, torque]
}

fn criterion_6() -> (bool, String) {
    let base = ScenarioConfig::default();
    let cells = run_matrix(&base).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &cells {
        let r = match &c.result {
            Ok(r) => r,
            Err(e) => {
                ok = false;
                parts.push(format!("{}/{} error {e}", c.scenario, c.variant.name()));
                continue;
            }
        };
        let m = &r.metrics;
        let f_d = r.config.references.push_force;
        let tipped = m.tipover_events > 0;
        let expect_tip = match c.variant {
            Variant::NormalForce => false,
            Variant::Enlarged => matches!(c.scenario, 'c' | 'd'),
            Variant::Baseline => true,
        };
        let mut cell_ok = tipped == expect_tip && !m.unstable;
        if c.variant == Variant::NormalForce {
            cell_ok &= m.max_abs_e_n < 0.2 * f_d;
            parts.push(format!(
                "{}/nf tips {} max|e_n| {:.2}<{:.1}",
                c.scenario,
                m.tipover_events,
                m.max_abs_e_n,
                0.2 * f_d
            ));
        } else {
            parts.push(format!("{}/{} tips {}", c.scenario, c.variant.name(), m.tipover_events));
        }
        ok &= cell_ok;
    }
    (ok && cells.len() == 12, parts.join(", "))
}

fn criterion_7() -> (bool, String) {
    let cfg = config("recovery_d.toml");
    let runs = run_recovery(&cfg, &[0.0, 10.0, 20.0]).unwrap();
    let rec: Vec<Option<f64>> = runs.iter().map(|(_, r)| r.metrics.recovery_time).collect();
    let peaks: Vec<f64> = runs.iter().map(|(_, r)| r.metrics.peak_impact_e_n).collect();
    let recovered = rec.iter().all(|t| t.is_some_and(|t| t < 5.0));
    let monotone = peaks.windows(2).all(|w| w[0] <= w[1]);
    let show = |t: &Option<f64>| t.map_or("none".into(), |t| format!("{t:.2} s"));
    (
        recovered && monotone,
        format!(
            "dbeta 0/10/20°: recovery {}, {}, {} (limit 5 s); peak impact |e_n| {:.2}, {:.2}, {:.2} N (monotone {monotone})",
            show(&rec[0]),
            show(&rec[1]),
            show(&rec[2]),
            peaks[0],
            peaks[1],
            peaks[2]
        ),
    )
}

fn criterion_8() -> (bool, String) {
    let cfg = config("three_wheel.toml");
    let r = run_three_wheel(&cfg, 15.0, -5.0).unwrap();
    let m = &r.metrics;
    let identity = r
        .rows
        .iter()
        .map(|row| row.e_n.iter().sum::<f64>().abs())
        .fold(0.0, f64::max);
    let after = m.first_contact_time.unwrap_or(0.0) + m.recovery_time.unwrap_or(0.0);
    let tail: Vec<&[f64; 3]> = r.rows.iter().filter(|row| row.t >= after).map(|row| &row.e_n).collect();
    let mean = |k: usize| tail.iter().map(|e| e[k]).sum::<f64>() / tail.len().max(1) as f64;
    let show = |t: Option<f64>| t.map_or("none".into(), |t| format!("{t:.2} s"));
    // diagnostic only: the same approach without sensor noise and injected uncertainty
    let mut clean = cfg.clone();
    clean.noise.relative_sigma = 0.0;
    clean.uncertainty = UncertaintySource::None;
    let clean = run_three_wheel(&clean, 15.0, -5.0).unwrap().metrics.convergence_time;
    (
        m.recovery_time.is_some() && m.convergence_time.is_some() && identity <= 1e-12,
        format!(
            "full contact after {}; all |e_ni| < {:.3} N held 1 s: {} (noise- and uncertainty-free: {}); mean e_n after full contact {:.2}, {:.2}, {:.2} N; max |e_n1+e_n2+e_n3| {identity:.1e} (tolerance 1e-12)",
            show(m.recovery_time),
            m.convergence_threshold,
            show(m.convergence_time),
            show(clean),
            mean(0),
            mean(1),
            mean(2)
        ),
    )
}

fn criterion_9() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let gains = Gains::default();
    let mut worst = 0.0_f64;
    let mut note = |v: f64| worst = worst.max(v.abs());
    for _ in 0..1000 {
        let mut u = || rng.random_range(-10.0..10.0_f64);
        let (e_p, e_d, e_f, i_f, acc, fd, mass) = (u(), u(), u(), u(), u(), u().abs() + 1.0, u().abs() + 0.5);
        let (e_p2, e_d2, e_f2, i_f2) = (u(), u(), u(), u());
        let (fx, fz) = motion_force_wrench(e_p, e_d, e_f, i_f, acc, fd, mass, &gains);
        let (fx0, fz0) = motion_force_wrench(0.0, 0.0, 0.0, 0.0, acc, fd, mass, &gains);
        // zero at nominal: only the feedforward remains
        note(fx0 - mass * acc);
        note(fz0 - fd);
        // the error part is linear
        let (fx2, fz2) = motion_force_wrench(e_p2, e_d2, e_f2, i_f2, acc, fd, mass, &gains);
        let (fxs, fzs) = motion_force_wrench(e_p + e_p2, e_d + e_d2, e_f + e_f2, i_f + i_f2, acc, fd, mass, &gains);
        note((fxs - fx0) - ((fx - fx0) + (fx2 - fx0)));
        note((fzs - fz0) - ((fz - fz0) + (fz2 - fz0)));
        note(fx - (mass * acc - gains.k_p * e_p - gains.k_d * e_d));
        note(fz - (fd - gains.k_f * e_f - gains.k_i * i_f));

        let (f1, f2, k) = (u().abs(), u().abs(), u().abs());
        note(normal_force_torque_planar(f1, f2, k) + normal_force_torque_planar(f2, f1, k));
        note(normal_force_torque_planar(f1, f1, k));
        note(normal_force_torque_planar(f1, f2, k) - k * (f1 - f2));

        let f3 = [u().abs(), u().abs(), u().abs()];
        let e = plane_errors_3w(f3);
        note(e.iter().sum::<f64>());
        let normals = [0, 1, 2].map(|_| {
            let v = Vec3::new(u(), u(), u());
            v / v.norm()
        });
        let kn = [u().abs(), u().abs(), u().abs()];
        let t1 = normal_force_torque_3w(e, &normals, kn).unwrap();
        let g = [u(), u(), u()];
        let t2 = normal_force_torque_3w(g, &normals, kn).unwrap();
        let sum = normal_force_torque_3w([e[0] + g[0], e[1] + g[1], e[2] + g[2]], &normals, kn).unwrap();
        note((sum - t1 - t2).norm() / (1.0 + sum.norm()));
        let neg = normal_force_torque_3w(e.map(|v| -v), &normals, kn).unwrap();
        note((neg + t1).norm());
        let level = u().abs();
        note(
            normal_force_torque_3w(plane_errors_3w([level; 3]), &normals, kn)
                .unwrap()
                .norm(),
        );
    }
    let d = 0.5;
    let levels = [0.0, d / 2.0, d, 2.0 * d];
    let mut table_ok = true;
    for &f1 in &levels {
        for &f2 in &levels {
            let expect = match (f1 >= d, f2 >= d) {
                (false, false) => -2,
                (true, false) => -1,
                (false, true) => 1,
                (true, true) => 0,
            };
            let code = classify_contact(&[f1, f2], d).unwrap();
            table_ok &= code.code() == expect;
            table_ok &= code.is_full_contact() == (expect == 0) && (code == ContactCode::FreeFlight) == (expect == -2);
        }
    }
    (
        worst <= 1e-12 && table_ok,
        format!("laws: max residual {worst:.1e} over 1000 draws (tolerance 1e-12); classifier 16/16 grid cells match: {table_ok}"),
    )
}

/// Emits two runs of `cfg` into fresh directories and compares every file.
fn identical_reruns(cfg: &ScenarioConfig) -> (usize, bool) {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        emit_outputs(&run_scenario(cfg).unwrap(), d.path()).unwrap();
    }
    let list = |sub: &str| -> Vec<std::path::PathBuf> {
        match std::fs::read_dir(dirs[0].path().join(sub)) {
            Ok(entries) => entries.map(|e| Path::new(sub).join(e.unwrap().file_name())).collect(),
            Err(_) => Vec::new(),
        }
    };
    let mut files: Vec<_> = list("")
        .into_iter()
        .chain(list("plots"))
        .filter(|p| p.extension().is_some())
        .collect();
    files.sort();
    let same = files
        .iter()
        .all(|n| std::fs::read(dirs[0].path().join(n)).unwrap() == std::fs::read(dirs[1].path().join(n)).unwrap());
    (files.len(), same)
}

fn criterion_10() -> (bool, String) {
    let mut planar = ScenarioConfig {
        name: "determinism".into(),
        ..ScenarioConfig::default()
    };
    planar.output.plots = true;
    let mut spatial = config("three_wheel.toml");
    spatial.output.plots = false;
    let (n1, same1) = identical_reruns(&planar);
    let (n2, same2) = identical_reruns(&spatial);
    (
        n1 > 0 && n2 > 0 && same1 && same2,
        format!(
            "planar run ({n1} files incl. plots) identical: {same1}; three-wheel run ({n2} files) identical: {same2}"
        ),
    )
}

fn main() -> ExitCode {
    let strict = std::env::var_os("TIPOVER_STRICT").is_some_and(|v| v != "0");
    let mut outcomes = vec![
        run(1, Some(5.0), criterion_1),
        run(2, Some(5.0), criterion_2),
        run(3, None, criterion_3),
        run(4, Some(10.0), criterion_4),
    ];
    outcomes.extend(criterion_5());
    outcomes.push(run(6, Some(60.0), criterion_6));
    outcomes.push(run(7, Some(30.0), criterion_7));
    outcomes.push(run(8, Some(30.0), criterion_8));
    outcomes.push(run(9, None, criterion_9));
    outcomes.push(run(10, None, criterion_10));

    let mut fatal = 0;
    for o in &outcomes {
        let known = KNOWN_RED.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {:>2}  {tag:<12}  {}", o.id, o.detail);
        if !o.pass && (strict || !known) {
            fatal += 1;
        }
    }
    let stale: Vec<u8> = KNOWN_RED
        .iter()
        .copied()
        .filter(|id| outcomes.iter().filter(|o| o.id == *id).all(|o| o.pass))
        .collect();
    if !stale.is_empty() {
        println!("criteria {stale:?} are listed as known failures but passed; update KNOWN_RED");
        fatal += 1;
    }
    if fatal > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
