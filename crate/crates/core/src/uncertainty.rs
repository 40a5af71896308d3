//! Systematic force/torque uncertainties and pressure-sensor noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ft_to_com_torque, PlanarWrench, SpatialWrench, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Measured,
    Synthetic,
}

/// One body-frame uncertainty sample.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UncertaintySample {
    pub force: Vec3,
    pub torque: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyTrace {
    pub time: Vec<f64>,
    pub force: Vec<Vec3>,
    pub torque: Vec<Vec3>,
    pub provenance: Provenance,
}

impl UncertaintyTrace {
    pub fn new(time: Vec<f64>, force: Vec<Vec3>, torque: Vec<Vec3>, provenance: Provenance) -> Result<Self> {
        if force.len() != time.len() || torque.len() != time.len() {
            return Err(Error::Contract("uncertainty series lengths differ".into()));
        }
        if time.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract("uncertainty time must be strictly increasing".into()));
        }
        let finite = time.iter().all(|t| t.is_finite())
            && force
                .iter()
                .chain(torque.iter())
                .all(|v| v.iter().all(|c| c.is_finite()));
        if !finite {
            return Err(Error::Contract("uncertainty trace has non-finite values".into()));
        }
        Ok(Self {
            time,
            force,
            torque,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn sample(&self, i: usize) -> UncertaintySample {
        UncertaintySample {
            force: self.force[i],
            torque: self.torque[i],
        }
    }

    /// Zero-order hold lookup. Times before the first sample read the first
    /// sample and times past the end hold the last one.
    pub fn sample_at(&self, t: f64) -> UncertaintySample {
        if self.is_empty() {
            return UncertaintySample::default();
        }
        // tolerate grid times that land a rounding error below a sample
        let idx = self.time.partition_point(|s| *s <= t + 1e-9);
        self.sample(idx.saturating_sub(1))
    }

    /// Per-axis gains applied to every sample.
    pub fn scaled(mut self, force: &Vec3, torque: &Vec3) -> Self {
        for f in &mut self.force {
            *f = f.component_mul(force);
        }
        for t in &mut self.torque {
            *t = t.component_mul(torque);
        }
        self
    }
}

/// Uncertainty sample from FT-sensor and estimator readings, all in the body frame.
pub fn identify(f_meas: &Vec3, tau_meas: &Vec3, f_est: &Vec3, tau_est: &Vec3, p_ft: &Vec3) -> UncertaintySample {
    UncertaintySample {
        force: f_meas - f_est,
        torque: ft_to_com_torque(f_meas, tau_meas, p_ft) - tau_est,
    }
}

/// One row of the identification input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasuredRow {
    pub t: f64,
    pub f_meas: Vec3,
    pub tau_meas: Vec3,
    pub f_est: Vec3,
    pub tau_est: Vec3,
}

pub fn identify_series(rows: &[MeasuredRow], p_ft: &Vec3) -> Result<UncertaintyTrace> {
    let samples: Vec<_> = rows
        .iter()
        .map(|r| identify(&r.f_meas, &r.tau_meas, &r.f_est, &r.tau_est, p_ft))
        .collect();
    UncertaintyTrace::new(
        rows.iter().map(|r| r.t).collect(),
        samples.iter().map(|s| s.force).collect(),
        samples.iter().map(|s| s.torque).collect(),
        Provenance::Measured,
    )
}

/// First-order-filtered noise on one axis, offset by a constant bias.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AxisProcess {
    pub std: f64,
    pub correlation_time: f64,
    pub bias: f64,
}

impl Default for AxisProcess {
    fn default() -> Self {
        Self::new(0.0, 1.0, 0.0)
    }
}

impl AxisProcess {
    pub fn new(std: f64, correlation_time: f64, bias: f64) -> Self {
        Self {
            std,
            correlation_time,
            bias,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSpec {
    pub force: [AxisProcess; 3],
    pub torque: [AxisProcess; 3],
}

impl SynthesisSpec {
    /// Magnitudes of the bundled synthetic trace: a z-force error close to
    /// the commanded push with slow drift, a few newtons laterally and a
    /// torque offset about `x_B` of a few tenths of a newton-metre.
    pub fn reference() -> Self {
        Self {
            force: [
                AxisProcess::new(1.5, 1.0, 0.3),
                AxisProcess::new(1.0, 1.0, 0.0),
                AxisProcess::new(0.75, 3.0, 10.0),
            ],
            torque: [
                AxisProcess::new(0.05, 0.8, 0.33),
                AxisProcess::new(0.1, 0.8, 0.0),
                AxisProcess::new(0.05, 1.0, 0.0),
            ],
        }
    }

    fn axes(&self) -> impl Iterator<Item = &AxisProcess> {
        self.force.iter().chain(self.torque.iter())
    }
}

/// Draws a synthetic trace on a uniform grid `0, dt, …` covering `duration`.
///
/// Each axis is an exact discretisation of an Ornstein-Uhlenbeck process
/// started from its stationary distribution, on its own ChaCha stream.
pub fn synthesize(duration: f64, dt: f64, spec: &SynthesisSpec, seed: u64) -> Result<UncertaintyTrace> {
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(Error::Contract("duration and dt must be positive".into()));
    }
    if spec
        .axes()
        .any(|a| !(a.std >= 0.0) || !(a.correlation_time > 0.0) || !a.bias.is_finite())
    {
        return Err(Error::Contract("axis std must be >= 0 and correlation time > 0".into()));
    }
    let n = (duration / dt).round() as usize + 1;
    let time: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let mut columns = Vec::with_capacity(6);
    for (axis, p) in spec.axes().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(axis as u64);
        let decay = (-dt / p.correlation_time).exp();
        let drive = p.std * (1.0 - decay * decay).sqrt();
        let mut x = p.std * rng.sample::<f64, _>(StandardNormal);
        let mut col = Vec::with_capacity(n);
        for _ in 0..n {
            col.push(p.bias + x);
            x = decay * x + drive * rng.sample::<f64, _>(StandardNormal);
        }
        columns.push(col);
    }
    let vec_at = |base: usize, k: usize| Vec3::new(columns[base][k], columns[base + 1][k], columns[base + 2][k]);
    UncertaintyTrace::new(
        time,
        (0..n).map(|k| vec_at(0, k)).collect(),
        (0..n).map(|k| vec_at(3, k)).collect(),
        Provenance::Synthetic,
    )
}

/// Zero-order hold onto a uniform grid from the first sample time to the last.
pub fn resample(trace: &UncertaintyTrace, dt: f64) -> Result<UncertaintyTrace> {
    if trace.is_empty() {
        return Err(Error::Contract("cannot resample an empty uncertainty trace".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Contract("resample dt must be positive".into()));
    }
    let t0 = trace.time[0];
    let span = trace.time[trace.len() - 1] - t0;
    let n = (span / dt + 1e-9).floor() as usize + 1;
    let time: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    let samples: Vec<_> = time.iter().map(|t| trace.sample_at(*t)).collect();
    let mut out = UncertaintyTrace::new(
        time,
        samples.iter().map(|s| s.force).collect(),
        samples.iter().map(|s| s.torque).collect(),
        trace.provenance,
    )?;
    // a grid that does not land on the final time still ends on its value
    let last = trace.len() - 1;
    out.force[n - 1] = trace.force[last];
    out.torque[n - 1] = trace.torque[last];
    Ok(out)
}

/// Planar injection: only `F_unc.x`, `F_unc.z` and `τ_unc.x` act.
pub fn inject_planar(w: &PlanarWrench, s: &UncertaintySample) -> PlanarWrench {
    PlanarWrench::new(w.fx - s.force.x, w.fz - s.force.z, w.tau - s.torque.x)
}

/// Spatial injection subtracts all six components.
pub fn inject_spatial(w: &SpatialWrench, s: &UncertaintySample) -> SpatialWrench {
    SpatialWrench::new(w.force - s.force, w.torque - s.torque)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub relative_sigma: f64,
    pub rng_seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            relative_sigma: 0.10,
            rng_seed: 7,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_sigma >= 0.0) {
            return Err(Error::Config("relative_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Magnitude-proportional Gaussian noise, clamped at zero.
///
/// The draw depends only on `(model.rng_seed, step)`.
pub fn sensor_noise(f_n: &[f64], model: &NoiseModel, step: u64) -> Vec<f64> {
    if model.relative_sigma == 0.0 {
        return f_n.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
    rng.set_stream(step);
    f_n.iter()
        .map(|f| {
            let xi: f64 = rng.sample(StandardNormal);
            (f + model.relative_sigma * f * xi).max(0.0)
        })
        .collect()
}
