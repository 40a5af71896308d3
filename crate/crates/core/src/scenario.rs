//! Scenario configuration, closed-loop runs, metrics and artifact emission.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{
    contact_forces, step_planar, step_spatial, ContactParams, MomentumObserver, SimConfig, SurfaceModel,
};
use crate::control::{
    classify_contact, ActiveLaw, BaselineGains, ControlMode, Controller, Gains, Measurements, PoseReference,
    References, WrenchLimits,
};
use crate::error::{Error, Result};
use crate::force_angle::{net_tipover_wrench, stability_measure, support_pattern, TipoverAxes, WrenchTrace};
use crate::geometry::{InertiaParams, PlanarState, RigidPose, SpatialState, SpatialWrench, Vec3, WheelLayout};
use crate::io::{self, fmt};
use crate::plot::{line_plot, Series};
use crate::uncertainty::{
    inject_planar, inject_spatial, resample, sensor_noise, synthesize, NoiseModel, Provenance, SynthesisSpec,
    UncertaintySample, UncertaintyTrace,
};

/// Bundled synthetic uncertainty trace (100 Hz, 60 s).
pub const BUNDLED_UNCERTAINTY_CSV: &str = include_str!("../data/synthetic_uncertainty.csv");
pub const BUNDLED_UNCERTAINTY_SEED: u64 = 2024;
pub const BUNDLED_UNCERTAINTY_DURATION: f64 = 60.0;
pub const BUNDLED_UNCERTAINTY_DT: f64 = 0.01;

/// Regenerates the bundled uncertainty trace from its generator settings.
pub fn bundled_uncertainty_generator() -> Result<UncertaintyTrace> {
    synthesize(
        BUNDLED_UNCERTAINTY_DURATION,
        BUNDLED_UNCERTAINTY_DT,
        &SynthesisSpec::reference(),
        BUNDLED_UNCERTAINTY_SEED,
    )
}

pub fn bundled_uncertainty() -> Result<UncertaintyTrace> {
    let path = Path::new("<bundled>/synthetic_uncertainty.csv");
    io::parse_uncertainty(BUNDLED_UNCERTAINTY_CSV.as_bytes(), path, Provenance::Synthetic)
}

/// Bundled synthetic actuation-wrench trace, see [`bundled_wrench_generator`].
pub const BUNDLED_WRENCH_CSV: &str = include_str!("../data/synthetic_wrench_trace.csv");

/// Actuation wrench of a vehicle pushing with `profile.push_force` while
/// sliding along `x_B`: inertial force `m·a`, a viscous drag `c·v` and the
/// uncertainty sample added on top. Gravity is taken as compensated, so the
/// trace carries no gravity columns.
pub fn synthetic_wrench_trace(
    profile: &ReferenceProfile,
    mass: f64,
    drag: f64,
    uncertainty: &UncertaintyTrace,
    duration: f64,
) -> Result<WrenchTrace> {
    if !(mass > 0.0) || !(drag >= 0.0) || !(duration > 0.0) {
        return Err(Error::Config(
            "wrench trace needs mass > 0, drag >= 0 and duration > 0".into(),
        ));
    }
    let stroke = StrokeProfile::new(profile);
    let mut trace = WrenchTrace::default();
    for k in (0..uncertainty.len()).take_while(|&k| uncertainty.time[k] <= duration) {
        let u = uncertainty.sample(k);
        let t = uncertainty.time[k];
        let (_, v, a) = stroke.eval(t);
        trace.time.push(t);
        trace
            .force
            .push(Vec3::new(mass * a + drag * v, 0.0, profile.push_force) + u.force);
        trace.torque.push(u.torque);
        trace.gravity.push(Vec3::zeros());
    }
    Ok(trace)
}

/// Generator settings of the bundled wrench trace: 20 s of back-and-forth
/// sliding at 0.5 m/s² with a 12.5 N push.
pub fn bundled_wrench_generator() -> Result<WrenchTrace> {
    let profile = ReferenceProfile {
        a_max: 0.5,
        push_force: 12.5,
        strokes: 100,
        ..ReferenceProfile::default()
    };
    synthetic_wrench_trace(
        &profile,
        PlantConfig::default().mass,
        2.0,
        &bundled_uncertainty()?,
        20.0,
    )
}

pub fn bundled_wrench_trace() -> Result<WrenchTrace> {
    io::parse_wrench_trace(
        BUNDLED_WRENCH_CSV.as_bytes(),
        Path::new("<bundled>/synthetic_wrench_trace.csv"),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantMode {
    Planar,
    Spatial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub physics_dt: f64,
    pub control_dt: f64,
    /// Hard cap on simulated time (s).
    pub max_duration: f64,
    pub mass: f64,
    pub planar_inertia: f64,
    /// Diagonal of the body inertia tensor (kg·m²).
    pub spatial_inertia: [f64; 3],
}

impl Default for PlantConfig {
    /// Heavier than the bare-model inertia defaults: the vehicle carries the
    /// arm and end-effector, which sets the pitch response of the sliding runs.
    fn default() -> Self {
        Self {
            physics_dt: 1e-3,
            control_dt: 1e-2,
            max_duration: 40.0,
            mass: InertiaParams::default().mass,
            planar_inertia: 0.4,
            spatial_inertia: [0.4, 0.4, 0.6],
        }
    }
}

/// Compliant tyre/surface contact used by the scenario runs. The stiff
/// model defaults settle well in open loop but, with `k_n / r` near 6 at
/// 100 Hz, turn 10% wheel-sensor noise into several newtons of `e_n`.
pub fn scenario_contact() -> ContactParams {
    ContactParams {
        stiffness: 1.0e3,
        damping: 50.0,
        rolling_resistance: 0.2,
        ..ContactParams::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutScales {
    pub r_scale: f64,
    pub h_scale: f64,
}

impl Default for LayoutScales {
    fn default() -> Self {
        Self {
            r_scale: 1.0,
            h_scale: 1.0,
        }
    }
}

/// Approach, sliding and settling references.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceProfile {
    /// Peak sliding acceleration (m/s²).
    pub a_max: f64,
    /// Desired push along `z_B` (N).
    pub push_force: f64,
    /// Length of one sliding stroke (m).
    pub stroke: f64,
    /// Number of strokes, alternating direction.
    pub strokes: usize,
    /// Optional cruise-speed cap; without it each stroke is triangular.
    pub v_max: Option<f64>,
    pub approach_speed: f64,
    pub standoff: f64,
    /// Continuous full contact required before sliding starts (s).
    pub hold_time: f64,
    /// Sliding starts regardless this long after contact (s).
    pub contact_timeout: f64,
    /// Time simulated after the last stroke (s).
    pub settle_time: f64,
}

impl Default for ReferenceProfile {
    fn default() -> Self {
        Self {
            a_max: 0.5,
            push_force: 15.0,
            stroke: 1.0,
            strokes: 4,
            v_max: None,
            approach_speed: 0.1,
            standoff: 0.2,
            hold_time: 0.5,
            contact_timeout: 3.0,
            settle_time: 1.0,
        }
    }
}

/// Initial misalignment between the end-effector tip and the surface.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialAngles {
    /// Planar contact angle `δβ`, clockwise positive (deg).
    pub contact_angle_deg: f64,
    /// Spatial tilt about `x_B` (deg).
    pub roll_deg: f64,
    /// Spatial tilt about `y_B` (deg).
    pub pitch_deg: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum UncertaintySource {
    None,
    #[default]
    Bundled,
    File {
        path: PathBuf,
    },
    Synthetic {
        seed: u64,
        #[serde(default = "default_synthetic_duration")]
        duration: f64,
        #[serde(default)]
        spec: Option<SynthesisSpec>,
    },
}

fn default_synthetic_duration() -> f64 {
    BUNDLED_UNCERTAINTY_DURATION
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceEstimateSource {
    /// True interaction force with the sensor-noise model applied.
    Truth,
    /// Momentum observer fed with the commanded wrench.
    Observer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForceEstimateConfig {
    pub source: ForceEstimateSource,
    pub observer_gain: f64,
}

impl Default for ForceEstimateConfig {
    fn default() -> Self {
        Self {
            source: ForceEstimateSource::Truth,
            observer_gain: 25.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub plots: bool,
    /// Log the force-angle measure of the actuation wrench.
    pub alpha: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            plots: true,
            alpha: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Full contact must hold this long to count as recovered (s).
    pub recovery_hold: f64,
    /// Window after first contact searched for the impact peak (s).
    pub impact_window: f64,
    /// Three-wheel convergence threshold as a fraction of `f_d / wheels`.
    pub convergence_ratio: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            recovery_hold: 1.0,
            impact_window: 0.5,
            convergence_ratio: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantMode,
    pub controller: ControlMode,
    pub sim: PlantConfig,
    pub contact: ContactParams,
    pub layout: LayoutScales,
    pub references: ReferenceProfile,
    pub initial: InitialAngles,
    pub gains: Gains,
    pub baseline: BaselineGains,
    pub limits: WrenchLimits,
    pub uncertainty: UncertaintySource,
    /// Per-axis gains on the injected uncertainty; the matrix halves `force[2]`
    /// together with the push in the low-force scenarios.
    pub uncertainty_gain: UncertaintyGain,
    pub noise: NoiseModel,
    pub force_estimate: ForceEstimateConfig,
    pub metrics: MetricsConfig,
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            plant: PlantMode::Planar,
            controller: ControlMode::NormalForce,
            sim: PlantConfig::default(),
            contact: scenario_contact(),
            layout: LayoutScales::default(),
            references: ReferenceProfile::default(),
            initial: InitialAngles::default(),
            gains: Gains::default(),
            baseline: BaselineGains::default(),
            limits: WrenchLimits::default(),
            uncertainty: UncertaintySource::default(),
            uncertainty_gain: UncertaintyGain::default(),
            noise: NoiseModel::default(),
            force_estimate: ForceEstimateConfig::default(),
            metrics: MetricsConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Recursive merge; the tagged `uncertainty` table is replaced as a whole.
fn merge_tables(base: &mut toml::Table, patch: toml::Table) {
    for (k, v) in patch {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) if k != "uncertainty" => merge_tables(b, p),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl ScenarioConfig {
    /// Parses a scenario file. Tables and keys it leaves out keep the
    /// scenario defaults, including the fields of partially given tables.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::default().with_overrides(text)
    }

    /// Copy of `self` with the TOML `fragment` merged over it.
    pub fn with_overrides(&self, fragment: &str) -> Result<Self> {
        let bad = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        let mut base = toml::Table::try_from(self).map_err(|e| bad(&e))?;
        let patch: toml::Table = toml::from_str(fragment).map_err(|e| bad(&e))?;
        merge_tables(&mut base, patch);
        let cfg: Self = base.try_into().map_err(|e: toml::de::Error| bad(&e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative uncertainty paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
        if let UncertaintySource::File { path: p } = &mut cfg.uncertainty {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config()?.validate()?;
        self.gains.validate()?;
        self.baseline.validate()?;
        self.noise.validate()?;
        let r = &self.references;
        let positive = [r.a_max, r.push_force, r.approach_speed, r.standoff, r.contact_timeout];
        if positive.iter().any(|v| !(*v > 0.0))
            || !(r.stroke >= 0.0)
            || !(r.hold_time >= 0.0)
            || !(r.settle_time >= 0.0)
        {
            return Err(Error::Config(format!("invalid reference profile {r:?}")));
        }
        if r.v_max.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::Config("v_max must be positive".into()));
        }
        if !(self.layout.r_scale > 0.0) || !(self.layout.h_scale > 0.0) {
            return Err(Error::Config("layout multipliers must be positive".into()));
        }
        let i = &self.initial;
        if [i.contact_angle_deg, i.roll_deg, i.pitch_deg]
            .iter()
            .any(|a| !(a.abs() < 45.0))
        {
            return Err(Error::Config("initial contact angles must lie within ±45°".into()));
        }
        let g = &self.uncertainty_gain;
        if g.force.iter().chain(&g.torque).any(|v| !v.is_finite()) {
            return Err(Error::Config("uncertainty gains must be finite".into()));
        }
        if !(self.force_estimate.observer_gain > 0.0) {
            return Err(Error::Config("observer gain must be positive".into()));
        }
        let m = &self.metrics;
        if !(m.recovery_hold > 0.0) || !(m.impact_window > 0.0) || !(m.convergence_ratio > 0.0) {
            return Err(Error::Config("metric windows and ratios must be positive".into()));
        }
        if let UncertaintySource::File { path } = &self.uncertainty {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "uncertainty file {} does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> WheelLayout {
        let base = match self.plant {
            PlantMode::Planar => WheelLayout::reference_planar(),
            PlantMode::Spatial => WheelLayout::reference_three_wheel(),
        };
        base.scaled(self.layout.r_scale, self.layout.h_scale)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let s = &self.sim;
        let base = match self.plant {
            PlantMode::Planar => SimConfig::planar_default(),
            PlantMode::Spatial => SimConfig::spatial_default(),
        };
        Ok(SimConfig {
            physics_dt: s.physics_dt,
            control_dt: s.control_dt,
            duration: s.max_duration,
            inertia: InertiaParams {
                mass: s.mass,
                planar_inertia: s.planar_inertia,
                spatial_inertia: Matrix3::from_diagonal(&Vector3::from(s.spatial_inertia)),
            },
            layout: self.layout(),
            surface: SurfaceModel {
                contact_angle_offset: self.initial.contact_angle_deg.to_radians(),
                ..base.surface
            },
            contact: self.contact.clone(),
            gravity: false,
            rng_seed: self.noise.rng_seed,
        })
    }

    /// Normal-force error threshold used by the convergence metric (N).
    pub fn convergence_threshold(&self) -> f64 {
        let wheels = self.layout().wheel_count() as f64;
        self.metrics.convergence_ratio * self.references.push_force / wheels
    }

    pub fn uncertainty_trace(&self) -> Result<Option<UncertaintyTrace>> {
        let g = &self.uncertainty_gain;
        let trace = match &self.uncertainty {
            UncertaintySource::None => None,
            UncertaintySource::Bundled => Some(bundled_uncertainty()?),
            UncertaintySource::File { path } => Some(io::read_uncertainty(path, Provenance::Measured)?),
            UncertaintySource::Synthetic { seed, duration, spec } => Some(synthesize(
                *duration,
                BUNDLED_UNCERTAINTY_DT,
                &spec.clone().unwrap_or_else(SynthesisSpec::reference),
                *seed,
            )?),
        };
        Ok(trace.map(|t| t.scaled(&Vec3::from(g.force), &Vec3::from(g.torque))))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyGain {
    pub force: [f64; 3],
    pub torque: [f64; 3],
}

impl Default for UncertaintyGain {
    fn default() -> Self {
        Self {
            force: [1.0; 3],
            torque: [1.0; 3],
        }
    }
}

/// The four rows of the scenario table: acceleration and push multipliers.
pub const SCENARIOS: [(char, f64, f64); 4] = [('a', 1.0, 1.0), ('b', 5.0, 1.0), ('c', 1.0, 0.5), ('d', 5.0, 0.5)];

/// Controller/hardware combinations compared in the matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Enlarged,
    NormalForce,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Baseline, Variant::Enlarged, Variant::NormalForce];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Enlarged => "enlarged",
            Variant::NormalForce => "normal_force",
        }
    }
}

/// Derives one matrix cell from `base`: scenario multipliers on `a_max` and
/// the push, and the variant's controller and wheel spacing.
pub fn matrix_cell_config(base: &ScenarioConfig, scenario: char, variant: Variant) -> Result<ScenarioConfig> {
    let (_, a_mult, f_mult) = SCENARIOS
        .iter()
        .find(|s| s.0 == scenario)
        .copied()
        .ok_or_else(|| Error::Config(format!("unknown scenario `{scenario}`")))?;
    let mut cfg = base.clone();
    cfg.name = format!("{scenario}_{}", variant.name());
    cfg.references.a_max *= a_mult;
    cfg.references.push_force *= f_mult;
    cfg.uncertainty_gain.force[2] *= f_mult;
    cfg.controller = match variant {
        Variant::NormalForce => ControlMode::NormalForce,
        _ => ControlMode::Baseline,
    };
    if variant == Variant::Enlarged {
        cfg.layout.r_scale *= 2.0;
    }
    cfg.output.dir = None;
    Ok(cfg)
}

/// Position, velocity and acceleration along one alternating stroke sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrokeProfile {
    pub stroke: f64,
    pub a_max: f64,
    pub v_peak: f64,
    pub t_acc: f64,
    pub t_stroke: f64,
    pub strokes: usize,
}

impl StrokeProfile {
    pub fn new(r: &ReferenceProfile) -> Self {
        let v_tri = (r.stroke * r.a_max).sqrt();
        let v_peak = r.v_max.map_or(v_tri, |v| v.min(v_tri));
        let t_acc = if v_peak > 0.0 { v_peak / r.a_max } else { 0.0 };
        let cruise = if v_peak > 0.0 {
            (r.stroke - v_peak * t_acc) / v_peak
        } else {
            0.0
        };
        Self {
            stroke: r.stroke,
            a_max: r.a_max,
            v_peak,
            t_acc,
            t_stroke: 2.0 * t_acc + cruise,
            strokes: if r.stroke > 0.0 { r.strokes } else { 0 },
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_stroke * self.strokes as f64
    }

    /// `(offset, velocity, acceleration)` at time `t` after sliding starts.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if self.strokes == 0 || t <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if t >= self.duration() {
            let end = if self.strokes % 2 == 1 { self.stroke } else { 0.0 };
            return (end, 0.0, 0.0);
        }
        let k = ((t / self.t_stroke).floor() as usize).min(self.strokes - 1);
        let tau = t - k as f64 * self.t_stroke;
        let (a, v) = (self.a_max, self.v_peak);
        let cruise_end = self.t_stroke - self.t_acc;
        let (p, vel, acc) = if tau < self.t_acc {
            (0.5 * a * tau * tau, a * tau, a)
        } else if tau < cruise_end {
            (0.5 * a * self.t_acc * self.t_acc + v * (tau - self.t_acc), v, 0.0)
        } else {
            let rem = self.t_stroke - tau;
            (self.stroke - 0.5 * a * rem * rem, a * rem, -a)
        };
        if k.is_multiple_of(2) {
            (p, vel, acc)
        } else {
            (self.stroke - p, -vel, -acc)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach = 0,
    Contact = 1,
    Sliding = 2,
    Settle = 3,
}

impl Phase {
    fn from_code(c: f64) -> Option<Self> {
        Some(match c as i64 {
            0 => Phase::Approach,
            1 => Phase::Contact,
            2 => Phase::Sliding,
            3 => Phase::Settle,
            _ => return None,
        })
    }
}

/// One control-rate log sample. Forces and errors are the plant's true
/// values; `e_n_meas` is what the controller saw.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub phase: Phase,
    pub position: Vec3,
    /// Planar `β`, or the spatial tilt between `z_B` and the surface normal.
    pub beta: f64,
    /// Spatial roll, pitch, yaw (zero for planar runs).
    pub euler: Vec3,
    pub normal_forces: Vec<f64>,
    pub code: i32,
    pub e_n: [f64; 3],
    pub e_n_meas: [f64; 3],
    pub e_p: f64,
    pub e_d: f64,
    pub e_f: f64,
    pub command: SpatialWrench,
    pub saturated: bool,
    pub law: ActiveLaw,
    pub alpha: Option<f64>,
}

/// Run-level metrics, recomputable from the logged series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    /// Runs of non-full-contact samples during sliding.
    pub tipover_events: usize,
    pub tipover_duration: f64,
    /// Largest true `|e_n|` (max over planes) during sliding.
    pub max_abs_e_n: f64,
    pub first_contact_time: Option<f64>,
    /// From first contact to the start of the first sustained full contact.
    pub recovery_time: Option<f64>,
    /// Largest `|e_n|` within the impact window after first contact.
    pub peak_impact_e_n: f64,
    /// From first contact until full contact with all `|e_n|` below threshold is sustained.
    pub convergence_time: Option<f64>,
    pub convergence_threshold: f64,
    pub sliding_start: Option<f64>,
    pub sliding_end: Option<f64>,
    pub unstable: bool,
    pub instability: Option<String>,
    pub min_alpha: Option<f64>,
}

/// The subset of a log row that metrics depend on.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub t: f64,
    pub phase: Phase,
    pub code: i32,
    pub e_n: [f64; 3],
    pub alpha: Option<f64>,
}

impl From<&LogRow> for MetricRow {
    fn from(r: &LogRow) -> Self {
        Self {
            t: r.t,
            phase: r.phase,
            code: r.code,
            e_n: r.e_n,
            alpha: r.alpha,
        }
    }
}

fn max_abs(e: &[f64; 3]) -> f64 {
    e.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// First index whose row starts a stretch of at least `hold` seconds in
/// which `ok` holds on every row.
fn first_sustained(rows: &[MetricRow], from: usize, hold: f64, ok: impl Fn(&MetricRow) -> bool) -> Option<usize> {
    let mut start = None;
    for (i, r) in rows.iter().enumerate().skip(from) {
        if ok(r) {
            let s = *start.get_or_insert(i);
            if r.t - rows[s].t >= hold - 1e-9 {
                return Some(s);
            }
        } else {
            start = None;
        }
    }
    None
}

impl SummaryMetrics {
    pub fn compute(
        rows: &[MetricRow],
        control_dt: f64,
        cfg: &MetricsConfig,
        threshold: f64,
        instability: Option<String>,
    ) -> Self {
        let sliding: Vec<&MetricRow> = rows.iter().filter(|r| r.phase == Phase::Sliding).collect();
        let mut events = 0;
        let mut prev_full = true;
        let mut off = 0usize;
        for r in &sliding {
            let full = r.code == 0;
            if !full {
                off += 1;
                if prev_full {
                    events += 1;
                }
            }
            prev_full = full;
        }
        let max_abs_e_n = sliding.iter().fold(0.0_f64, |m, r| m.max(max_abs(&r.e_n)));
        let first = rows.iter().position(|r| r.code != -2);
        let first_t = first.map(|i| rows[i].t);
        let recovery = first
            .and_then(|i| first_sustained(rows, i, cfg.recovery_hold, |r| r.code == 0))
            .map(|s| rows[s].t - rows[first.unwrap_or(0)].t);
        let convergence = first
            .and_then(|i| {
                first_sustained(rows, i, cfg.recovery_hold, |r| {
                    r.code == 0 && max_abs(&r.e_n) < threshold
                })
            })
            .map(|s| rows[s].t - rows[first.unwrap_or(0)].t);
        let peak = first_t.map_or(0.0, |t0| {
            rows.iter()
                .filter(|r| r.t >= t0 && r.t <= t0 + cfg.impact_window + 1e-9)
                .fold(0.0_f64, |m, r| m.max(max_abs(&r.e_n)))
        });
        let min_alpha = rows
            .iter()
            .filter_map(|r| r.alpha)
            .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))));
        SummaryMetrics {
            tipover_events: events,
            tipover_duration: off as f64 * control_dt,
            max_abs_e_n,
            first_contact_time: first_t,
            recovery_time: recovery,
            peak_impact_e_n: peak,
            convergence_time: convergence,
            convergence_threshold: threshold,
            sliding_start: sliding.first().map(|r| r.t),
            sliding_end: sliding.last().map(|r| r.t),
            unstable: instability.is_some(),
            instability,
            min_alpha,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: ScenarioConfig,
    pub rows: Vec<LogRow>,
    pub metrics: SummaryMetrics,
    pub provenance: Option<Provenance>,
}

impl RunResult {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        self.rows.iter().map(MetricRow::from).collect()
    }
}

/// Phase bookkeeping shared by both plants.
struct Timeline {
    profile: StrokeProfile,
    hold_time: f64,
    contact_timeout: f64,
    settle_time: f64,
    approach_done: f64,
    phase: Phase,
    first_contact: Option<f64>,
    full_since: Option<f64>,
    sliding_start: f64,
    settle_start: f64,
    x_base: f64,
}

impl Timeline {
    fn new(r: &ReferenceProfile, approach_distance: f64) -> Self {
        Self {
            profile: StrokeProfile::new(r),
            hold_time: r.hold_time,
            contact_timeout: r.contact_timeout,
            settle_time: r.settle_time,
            approach_done: approach_distance / r.approach_speed,
            phase: Phase::Approach,
            first_contact: None,
            full_since: None,
            sliding_start: f64::NAN,
            settle_start: f64::NAN,
            x_base: 0.0,
        }
    }

    /// Advances the phase machine; returns `false` once the run is over.
    fn update(&mut self, t: f64, true_contact: bool, measured_full: bool, x: f64) -> bool {
        if true_contact && self.first_contact.is_none() {
            self.first_contact = Some(t);
        }
        self.full_since = if measured_full {
            self.full_since.or(Some(t))
        } else {
            None
        };
        if self.phase == Phase::Approach && self.first_contact.is_some() {
            self.phase = Phase::Contact;
        }
        if self.phase <= Phase::Contact && t >= self.approach_done - 1e-9 {
            let held = self.full_since.is_some_and(|s| t - s >= self.hold_time - 1e-9);
            let timeout =
                self.first_contact.unwrap_or(self.approach_done).max(self.approach_done) + self.contact_timeout;
            if held || t >= timeout - 1e-9 {
                self.phase = Phase::Sliding;
                self.sliding_start = t;
                self.x_base = x;
            }
        }
        if self.phase == Phase::Sliding && t - self.sliding_start >= self.profile.duration() - 1e-9 {
            self.phase = Phase::Settle;
            self.settle_start = t;
        }
        !(self.phase == Phase::Settle && t - self.settle_start > self.settle_time + 1e-9)
    }

    /// Sliding `(x, v, a)` reference at `t`.
    fn slide(&self, t: f64) -> (f64, f64, f64) {
        match self.phase {
            Phase::Approach | Phase::Contact => (self.x_base, 0.0, 0.0),
            Phase::Sliding | Phase::Settle => {
                let (p, v, a) = self.profile.eval(t - self.sliding_start);
                (self.x_base + p, v, a)
            }
        }
    }
}

fn noisy_estimate(value: f64, noise: &NoiseModel, step: u64) -> f64 {
    if noise.relative_sigma == 0.0 {
        return value;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed ^ 0x5eed_f0ce);
    rng.set_stream(step);
    let xi: f64 = rng.sample(StandardNormal);
    value + noise.relative_sigma * value.abs() * xi
}

struct Prepared {
    sim: SimConfig,
    controller: Controller,
    uncertainty: Option<UncertaintyTrace>,
    provenance: Option<Provenance>,
    alpha_axes: Option<TipoverAxes>,
    n_control: usize,
    ratio: usize,
}

fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let sim = cfg.sim_config()?;
    let mut controller = Controller::new(
        cfg.controller,
        cfg.gains.clone(),
        cfg.baseline.clone(),
        cfg.limits,
        cfg.contact.margin,
        cfg.sim.mass,
        sim.inertia.spatial_inertia,
    )?;
    if cfg.plant == PlantMode::Spatial {
        controller = controller.with_plane_normals(sim.layout.plane_normals()?);
    }
    let raw = cfg.uncertainty_trace()?;
    let provenance = raw.as_ref().map(|t| t.provenance);
    let uncertainty = raw
        .filter(|t| !t.is_empty())
        .map(|t| resample(&t, sim.physics_dt))
        .transpose()?;
    let alpha_axes = if cfg.output.alpha {
        // planar runs are scored on the three-wheel pattern of the same size
        let layout = match cfg.plant {
            PlantMode::Planar => WheelLayout::reference_three_wheel().scaled(cfg.layout.r_scale, cfg.layout.h_scale),
            PlantMode::Spatial => sim.layout.clone(),
        };
        Some(support_pattern(&layout)?)
    } else {
        None
    };
    Ok(Prepared {
        n_control: (cfg.sim.max_duration / cfg.sim.control_dt).round() as usize,
        ratio: sim.control_ratio(),
        sim,
        controller,
        uncertainty,
        provenance,
        alpha_axes,
    })
}

fn unc_at(trace: &Option<UncertaintyTrace>, idx: usize) -> UncertaintySample {
    match trace {
        Some(t) => t.sample(idx.min(t.len() - 1)),
        None => UncertaintySample::default(),
    }
}

fn alpha_of(axes: &Option<TipoverAxes>, w: &SpatialWrench) -> Option<f64> {
    let axes = axes.as_ref()?;
    let net = net_tipover_wrench(&w.force, &w.torque, &Vec3::zeros());
    stability_measure(&net, axes).ok().map(|r| r.alpha)
}

fn padded(e: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..e.len()].copy_from_slice(e);
    out
}

/// Runs one closed-loop scenario on the plant selected by `cfg.plant`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    match cfg.plant {
        PlantMode::Planar => run_planar(cfg),
        PlantMode::Spatial => run_spatial(cfg),
    }
}

fn run_planar(cfg: &ScenarioConfig) -> Result<RunResult> {
    let Prepared {
        sim,
        mut controller,
        uncertainty,
        provenance,
        alpha_axes,
        n_control,
        ratio,
    } = prepare(cfg)?;
    let r = &cfg.references;
    let h = sim.layout.tip_offset;
    let beta_ref = cfg.initial.contact_angle_deg.to_radians();
    let z0 = h + r.standoff;
    let z_push = h - r.push_force / cfg.baseline.position_stiffness.z;
    let mut timeline = Timeline::new(r, z0 - z_push);
    let mut state = PlanarState::at_rest(0.0, z0, beta_ref);
    let mut observer = MomentumObserver::new(cfg.force_estimate.observer_gain)?;
    let mut observed = 0.0;
    let mut rows = Vec::new();
    let mut instability = None;

    'run: for k in 0..=n_control {
        let t = k as f64 * cfg.sim.control_dt;
        let report = contact_forces(&state, &sim.layout, &sim.surface, &sim.contact);
        let measured = sensor_noise(&report.normal_forces, &cfg.noise, k as u64);
        let measured_code = classify_contact(&measured, cfg.contact.margin)?;
        let true_code = report.code;
        if !timeline.update(t, !true_code.is_free_flight(), measured_code.is_full_contact(), state.x) {
            break;
        }
        let force_estimate = match cfg.force_estimate.source {
            ForceEstimateSource::Truth => noisy_estimate(report.interaction_force(), &cfg.noise, k as u64),
            ForceEstimateSource::Observer => observed,
        };
        let (x_ref, v_ref, a_ref) = timeline.slide(t);
        let refs = References {
            x: x_ref,
            x_rate: v_ref,
            x_acc: a_ref,
            force: r.push_force,
            ..Default::default()
        };
        let z_ref = (z0 - r.approach_speed * t).max(z_push);
        let pose_ref = PoseReference::planar(x_ref, z_ref, beta_ref, v_ref, 0.0);
        let meas = Measurements {
            state: &state,
            normal_forces: &measured,
            force_estimate,
        };
        let out = controller.step_planar(&meas, &refs, &pose_ref, cfg.sim.control_dt)?;
        let first_sim = inject_planar(&out.wrench, &unc_at(&uncertainty, k * ratio));
        let f = &report.normal_forces;
        rows.push(LogRow {
            t,
            phase: timeline.phase,
            position: state.position(),
            beta: state.beta,
            euler: Vec3::zeros(),
            normal_forces: f.clone(),
            code: true_code.code(),
            e_n: [f[0] - f[1], 0.0, 0.0],
            e_n_meas: out.terms.e_n,
            e_p: out.terms.e_p,
            e_d: out.terms.e_d,
            e_f: out.terms.e_f,
            command: out.wrench.to_spatial(),
            saturated: out.saturated,
            law: out.law,
            alpha: alpha_of(&alpha_axes, &first_sim.to_spatial()),
        });
        for j in 0..ratio {
            let applied = inject_planar(&out.wrench, &unc_at(&uncertainty, k * ratio + j));
            match step_planar(&state, &applied, &sim) {
                Ok((next, _)) => state = next,
                Err(Error::Divergence { reason, .. }) => {
                    instability = Some(format!("t = {t:.3} s: {reason}"));
                    break 'run;
                }
                Err(e) => return Err(e),
            }
            if cfg.force_estimate.source == ForceEstimateSource::Observer {
                observed = -observer
                    .update_planar(&state, &applied, &sim.inertia, sim.physics_dt)
                    .fz;
            }
        }
        if state.beta.abs() > std::f64::consts::FRAC_PI_2 {
            instability = Some(format!("t = {t:.3} s: overturned (|beta| > 90°)"));
            break;
        }
    }
    finish(cfg, rows, instability, provenance)
}

fn run_spatial(cfg: &ScenarioConfig) -> Result<RunResult> {
    let Prepared {
        sim,
        mut controller,
        uncertainty,
        provenance,
        alpha_axes,
        n_control,
        ratio,
    } = prepare(cfg)?;
    let r = &cfg.references;
    let h = sim.layout.tip_offset;
    let tilt = initial_tilt(&cfg.initial);
    let z0 = -h - r.standoff;
    let z_push = -h + r.push_force / cfg.baseline.position_stiffness.z;
    let mut timeline = Timeline::new(r, z_push - z0);
    let mut state = SpatialState::at_rest(Vec3::new(0.0, 0.0, z0), tilt);
    let mut observer = MomentumObserver::new(cfg.force_estimate.observer_gain)?;
    let mut observed = 0.0;
    let mut rows = Vec::new();
    let mut instability = None;

    'run: for k in 0..=n_control {
        let t = k as f64 * cfg.sim.control_dt;
        let report = contact_forces(&state, &sim.layout, &sim.surface, &sim.contact);
        let measured = sensor_noise(&report.normal_forces, &cfg.noise, k as u64);
        let measured_code = classify_contact(&measured, cfg.contact.margin)?;
        let true_code = report.code;
        if !timeline.update(
            t,
            !true_code.is_free_flight(),
            measured_code.is_full_contact(),
            state.position.x,
        ) {
            break;
        }
        let force_estimate = match cfg.force_estimate.source {
            ForceEstimateSource::Truth => noisy_estimate(report.interaction_force(), &cfg.noise, k as u64),
            ForceEstimateSource::Observer => observed,
        };
        let (x_ref, v_ref, a_ref) = timeline.slide(t);
        let refs = References {
            x: x_ref,
            x_rate: v_ref,
            x_acc: a_ref,
            force: r.push_force,
            ..Default::default()
        };
        let pose_ref = PoseReference {
            position: Vec3::new(x_ref, 0.0, (z0 + r.approach_speed * t).min(z_push)),
            velocity: Vec3::new(v_ref, 0.0, 0.0),
            orientation: tilt,
        };
        let meas = Measurements {
            state: &state,
            normal_forces: &measured,
            force_estimate,
        };
        let out = controller.step_spatial(&meas, &refs, &pose_ref, cfg.sim.control_dt)?;
        let f = &report.normal_forces;
        let first_sim = inject_spatial(&out.wrench, &unc_at(&uncertainty, k * ratio));
        let rot = state.rotation();
        let (roll, pitch, yaw) = state.orientation.euler_angles();
        rows.push(LogRow {
            t,
            phase: timeline.phase,
            position: state.position,
            beta: rot[(2, 2)].clamp(-1.0, 1.0).acos(),
            euler: Vec3::new(roll, pitch, yaw),
            normal_forces: f.clone(),
            code: true_code.code(),
            e_n: crate::control::plane_errors_3w([f[0], f[1], f[2]]),
            e_n_meas: padded(&out.terms.e_n),
            e_p: out.terms.e_p,
            e_d: out.terms.e_d,
            e_f: out.terms.e_f,
            command: out.wrench,
            saturated: out.saturated,
            law: out.law,
            alpha: alpha_of(&alpha_axes, &first_sim),
        });
        for j in 0..ratio {
            let applied = inject_spatial(&out.wrench, &unc_at(&uncertainty, k * ratio + j));
            match step_spatial(&state, &applied, &sim) {
                Ok((next, _)) => state = next,
                Err(Error::Divergence { reason, .. }) => {
                    instability = Some(format!("t = {t:.3} s: {reason}"));
                    break 'run;
                }
                Err(e) => return Err(e),
            }
            if cfg.force_estimate.source == ForceEstimateSource::Observer {
                observed = -observer
                    .update_spatial(&state, &applied, &sim.inertia, sim.physics_dt)
                    .force
                    .z;
            }
        }
        if state.rotation()[(2, 2)] < 0.0 {
            instability = Some(format!("t = {t:.3} s: overturned (tilt > 90°)"));
            break;
        }
    }
    finish(cfg, rows, instability, provenance)
}

/// Initial attitude: tilt about `x_B` followed by tilt about the new `y_B`.
pub fn initial_tilt(a: &InitialAngles) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), a.roll_deg.to_radians())
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), a.pitch_deg.to_radians())
}

fn finish(
    cfg: &ScenarioConfig,
    rows: Vec<LogRow>,
    instability: Option<String>,
    provenance: Option<Provenance>,
) -> Result<RunResult> {
    let metric_rows: Vec<MetricRow> = rows.iter().map(MetricRow::from).collect();
    let metrics = SummaryMetrics::compute(
        &metric_rows,
        cfg.sim.control_dt,
        &cfg.metrics,
        cfg.convergence_threshold(),
        instability,
    );
    Ok(RunResult {
        config: cfg.clone(),
        rows,
        metrics,
        provenance,
    })
}

/// One cell of the scenario matrix; failures are kept rather than aborting the grid.
#[derive(Clone, Debug)]
pub struct MatrixCell {
    pub scenario: char,
    pub variant: Variant,
    pub result: std::result::Result<RunResult, String>,
}

/// Runs the 4×3 grid in parallel; cells are returned in scenario-major order.
pub fn run_matrix(base: &ScenarioConfig) -> Result<Vec<MatrixCell>> {
    let jobs: Vec<(char, Variant, ScenarioConfig)> = SCENARIOS
        .iter()
        .flat_map(|(s, _, _)| Variant::ALL.iter().map(move |v| (*s, *v)))
        .map(|(s, v)| matrix_cell_config(base, s, v).map(|c| (s, v, c)))
        .collect::<Result<_>>()?;
    Ok(jobs
        .into_par_iter()
        .map(|(scenario, variant, cfg)| MatrixCell {
            scenario,
            variant,
            result: run_scenario(&cfg).map_err(|e| e.to_string()),
        })
        .collect())
}

/// Runs `base` once per contact angle (degrees), in parallel.
pub fn run_recovery(base: &ScenarioConfig, angles_deg: &[f64]) -> Result<Vec<(f64, RunResult)>> {
    if let Some(bad) = angles_deg.iter().find(|a| !(a.abs() < 45.0)) {
        return Err(Error::Config(format!("contact angle {bad}° outside ±45°")));
    }
    angles_deg
        .par_iter()
        .map(|a| {
            let mut cfg = base.clone();
            cfg.plant = PlantMode::Planar;
            cfg.initial.contact_angle_deg = *a;
            cfg.name = format!("{}_dbeta_{a}", base.name);
            cfg.output.dir = None;
            run_scenario(&cfg).map(|r| (*a, r))
        })
        .collect()
}

/// Spatial three-wheel run with the given roll/pitch misalignment (degrees).
pub fn run_three_wheel(base: &ScenarioConfig, roll_deg: f64, pitch_deg: f64) -> Result<RunResult> {
    let mut cfg = base.clone();
    cfg.plant = PlantMode::Spatial;
    cfg.initial.roll_deg = roll_deg;
    cfg.initial.pitch_deg = pitch_deg;
    run_scenario(&cfg)
}

fn law_name(l: ActiveLaw) -> &'static str {
    match l {
        ActiveLaw::FullPose => "full_pose",
        ActiveLaw::NormalForce => "normal_force",
    }
}

fn state_headers(plant: PlantMode) -> Vec<&'static str> {
    match plant {
        PlantMode::Planar => vec![
            "t",
            "x",
            "z",
            "beta",
            "fn1",
            "fn2",
            "beta_code",
            "phase",
            "e_n",
            "e_n_meas",
            "e_p",
            "e_d",
            "e_f",
            "fx",
            "fz",
            "tau",
            "saturated",
            "law",
            "alpha",
        ],
        PlantMode::Spatial => vec![
            "t",
            "x",
            "z",
            "beta",
            "fn1",
            "fn2",
            "fn3",
            "beta_code",
            "phase",
            "y",
            "roll",
            "pitch",
            "yaw",
            "e_n1",
            "e_n2",
            "e_n3",
            "e_n1_meas",
            "e_n2_meas",
            "e_n3_meas",
            "e_p",
            "e_d",
            "e_f",
            "fx",
            "fy",
            "fz",
            "tx",
            "ty",
            "tz",
            "saturated",
            "law",
            "alpha",
        ],
    }
}

fn state_row(plant: PlantMode, r: &LogRow) -> Vec<String> {
    let mut row = vec![fmt(r.t), fmt(r.position.x), fmt(r.position.z), fmt(r.beta)];
    row.extend(r.normal_forces.iter().map(|f| fmt(*f)));
    row.push(r.code.to_string());
    row.push((r.phase as u8).to_string());
    let tail = |row: &mut Vec<String>| {
        row.extend([fmt(r.e_p), fmt(r.e_d), fmt(r.e_f)]);
    };
    match plant {
        PlantMode::Planar => {
            let w = r.command.to_planar();
            row.extend([fmt(r.e_n[0]), fmt(r.e_n_meas[0])]);
            tail(&mut row);
            row.extend([fmt(w.fx), fmt(w.fz), fmt(w.tau)]);
        }
        PlantMode::Spatial => {
            row.push(fmt(r.position.y));
            row.extend(r.euler.iter().map(|v| fmt(*v)));
            row.extend(r.e_n.iter().map(|v| fmt(*v)));
            row.extend(r.e_n_meas.iter().map(|v| fmt(*v)));
            tail(&mut row);
            row.extend(r.command.force.iter().chain(r.command.torque.iter()).map(|v| fmt(*v)));
        }
    }
    row.push(u8::from(r.saturated).to_string());
    row.push(law_name(r.law).into());
    row.push(r.alpha.map(fmt).unwrap_or_default());
    row
}

/// Reads the metric columns back from an emitted `state.csv`.
pub fn read_metric_rows(path: &Path, plant: PlantMode) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Data {
            path: path.into(),
            message: format!("missing column `{name}`"),
        })
    };
    let e_cols: Vec<usize> = match plant {
        PlantMode::Planar => vec![col("e_n")?],
        PlantMode::Spatial => vec![col("e_n1")?, col("e_n2")?, col("e_n3")?],
    };
    let (ti, pi, ci, ai) = (col("t")?, col("phase")?, col("beta_code")?, col("alpha")?);
    let bad = |m: String| Error::Data {
        path: path.into(),
        message: m,
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(format!("{e} in `{}`", &rec[i])));
        let mut e_n = [0.0; 3];
        for (k, i) in e_cols.iter().enumerate() {
            e_n[k] = num(*i)?;
        }
        rows.push(MetricRow {
            t: num(ti)?,
            phase: Phase::from_code(num(pi)?).ok_or_else(|| bad("unknown phase".into()))?,
            code: num(ci)? as i32,
            e_n,
            alpha: if rec[ai].is_empty() { None } else { Some(num(ai)?) },
        });
    }
    Ok(rows)
}

/// Machine-readable run summary.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub plant: PlantMode,
    pub controller: ControlMode,
    pub r_scale: f64,
    pub h_scale: f64,
    pub a_max: f64,
    pub push_force: f64,
    pub contact_angle_deg: f64,
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub uncertainty: Option<Provenance>,
    pub samples: usize,
    pub metrics: SummaryMetrics,
}

impl RunSummary {
    pub fn new(r: &RunResult) -> Self {
        let c = &r.config;
        Self {
            name: c.name.clone(),
            plant: c.plant,
            controller: c.controller,
            r_scale: c.layout.r_scale,
            h_scale: c.layout.h_scale,
            a_max: c.references.a_max,
            push_force: c.references.push_force,
            contact_angle_deg: c.initial.contact_angle_deg,
            roll_deg: c.initial.roll_deg,
            pitch_deg: c.initial.pitch_deg,
            uncertainty: r.provenance,
            samples: r.rows.len(),
            metrics: r.metrics.clone(),
        }
    }
}

/// Writes `state.csv`, `summary.json`, `config.toml` and, if enabled, SVG plots.
pub fn emit_outputs(result: &RunResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let plant = result.config.plant;
    io::write_table(
        &dir.join("state.csv"),
        &state_headers(plant),
        result.rows.iter().map(|r| state_row(plant, r)),
    )?;
    io::write_json(&dir.join("summary.json"), &RunSummary::new(result))?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, result.config.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;
    if result.config.output.plots {
        let plots = dir.join("plots");
        std::fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
        let planes = if plant == PlantMode::Planar { 1 } else { 3 };
        let e_series: Vec<Series> = (0..planes)
            .map(|i| Series {
                points: result.rows.iter().map(|r| (r.t, Some(r.e_n[i]))).collect(),
            })
            .collect();
        line_plot(&plots.join("e_n.svg"), &e_series)?;
        let code = Series {
            points: result.rows.iter().map(|r| (r.t, Some(f64::from(r.code)))).collect(),
        };
        line_plot(&plots.join("beta_code.svg"), &[code])?;
        if result.config.output.alpha {
            let alpha = Series {
                points: result.rows.iter().map(|r| (r.t, r.alpha)).collect(),
            };
            line_plot(&plots.join("alpha.svg"), &[alpha])?;
        }
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

const MATRIX_HEADERS: [&str; 10] = [
    "scenario",
    "variant",
    "tipover_events",
    "tipover_duration",
    "max_abs_e_n",
    "recovery_time",
    "unstable",
    "min_alpha",
    "push_force",
    "error",
];

/// Emits every cell under `dir/<scenario>_<variant>/` plus `matrix_summary.csv`.
pub fn emit_matrix(cells: &[MatrixCell], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rows = Vec::new();
    for c in cells {
        let mut row = vec![c.scenario.to_string(), c.variant.name().to_string()];
        match &c.result {
            Ok(r) => {
                emit_outputs(r, &dir.join(&r.config.name))?;
                let m = &r.metrics;
                row.extend([
                    m.tipover_events.to_string(),
                    fmt(m.tipover_duration),
                    fmt(m.max_abs_e_n),
                    opt(m.recovery_time),
                    m.unstable.to_string(),
                    opt(m.min_alpha),
                    fmt(r.config.references.push_force),
                    String::new(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 7));
                row.push(e.clone());
            }
        }
        rows.push(row);
    }
    io::write_table(&dir.join("matrix_summary.csv"), &MATRIX_HEADERS, rows)
}

/// Emits each recovery run and a `recovery_summary.csv` table.
pub fn emit_recovery(runs: &[(f64, RunResult)], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (_, r) in runs {
        emit_outputs(r, &dir.join(&r.config.name))?;
    }
    io::write_table(
        &dir.join("recovery_summary.csv"),
        &[
            "contact_angle_deg",
            "first_contact_time",
            "recovery_time",
            "peak_impact_e_n",
            "tipover_events",
            "unstable",
        ],
        runs.iter().map(|(a, r)| {
            let m = &r.metrics;
            vec![
                fmt(*a),
                opt(m.first_contact_time),
                opt(m.recovery_time),
                fmt(m.peak_impact_e_n),
                m.tipover_events.to_string(),
                m.unstable.to_string(),
            ]
        }),
    )
}
