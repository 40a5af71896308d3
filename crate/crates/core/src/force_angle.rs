//! Force-angle tip-over stability measure.
//!
//! All vectors are body-frame quantities. Wheel contact points `p_i` define
//! tip-over axes `a_i = p_{i+1} - p_i` (wrapping around), and the axis normals
//! `l_i = (I - â_i â_iᵀ) p_{i+1}` which pass through the centre of mass.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{hat, Vec3, WheelLayout};

/// Tip-over axes and their normals through the centre of mass.
#[derive(Clone, Debug, PartialEq)]
pub struct TipoverAxes {
    pub axes: Vec<Vec3>,
    pub normals: Vec<Vec3>,
}

impl TipoverAxes {
    pub fn len(&self) -> usize {
        self.axes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axes.is_empty()
    }
}

/// Net force and moment at the CoM that take part in tip-over.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetTipoverWrench {
    pub force: Vec3,
    pub moment: Vec3,
}

impl NetTipoverWrench {
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            force: self.force * c,
            moment: self.moment * c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisStability {
    pub resultant: Vec3,
    pub theta: f64,
    pub sigma: i8,
    pub d: Vec3,
    /// `theta · ‖d‖ · ‖f*‖` for this axis.
    pub product: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub per_axis: Vec<AxisStability>,
    pub alpha: f64,
    pub argmin_axis: usize,
}

/// Sampled actuation wrench with optional per-sample gravity in body frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WrenchTrace {
    pub time: Vec<f64>,
    pub force: Vec<Vec3>,
    pub torque: Vec<Vec3>,
    pub gravity: Vec<Vec3>,
}

impl WrenchTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.time.len();
        if self.force.len() != n || self.torque.len() != n || self.gravity.len() != n {
            return Err(Error::Contract("wrench trace columns differ in length".into()));
        }
        if self.time.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Contract(
                "wrench trace timestamps must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Tip-over axes of the wheel layout.
///
/// Layouts with three or more wheels use the closed polygon of contact points.
/// A two-wheel layout has the single axis joining its contact points.
pub fn support_pattern(layout: &WheelLayout) -> Result<TipoverAxes> {
    let p = &layout.wheel_positions;
    let n = p.len();
    if n < 2 {
        return Err(Error::Degenerate("support pattern needs at least two wheels".into()));
    }
    let count = if n == 2 { 1 } else { n };
    let mut axes = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for i in 0..count {
        let next = &p[(i + 1) % n];
        let a = next - p[i];
        let a_hat =
            hat(&a).map_err(|_| Error::Degenerate(format!("wheels {} and {} coincide", i + 1, (i + 1) % n + 1)))?;
        let l = projector_perp(&a_hat) * next;
        if !(l.norm() > 0.0) {
            return Err(Error::Degenerate(format!("axis {} passes through the CoM", i + 1)));
        }
        axes.push(a);
        normals.push(l);
    }
    Ok(TipoverAxes { axes, normals })
}

fn projector_perp(u: &Vec3) -> Matrix3<f64> {
    Matrix3::identity() - u * u.transpose()
}

pub fn net_tipover_wrench(f_a: &Vec3, tau_a: &Vec3, g_body: &Vec3) -> NetTipoverWrench {
    NetTipoverWrench {
        force: f_a - g_body,
        moment: *tau_a,
    }
}

/// Components of the net force and moment acting about axis `i`.
pub fn axis_components(w: &NetTipoverWrench, axes: &TipoverAxes, i: usize) -> Result<(Vec3, Vec3)> {
    let a = axes
        .axes
        .get(i)
        .ok_or_else(|| Error::Contract(format!("axis index {i} out of range")))?;
    let a_hat = hat(a)?;
    let along = a_hat * a_hat.transpose();
    Ok(((Matrix3::identity() - along) * w.force, along * w.moment))
}

/// Member of the equivalent force couple acting at the CoM.
pub fn force_couple_member(m_i: &Vec3, l_i: &Vec3) -> Result<Vec3> {
    let l_hat = hat(l_i).map_err(|_| Error::Degenerate("axis normal has zero length".into()))?;
    Ok(l_hat.cross(m_i) / l_i.norm())
}

/// Signed candidate angle between the resultant `f*` and the axis normal.
pub fn candidate_angle(f_star: &Vec3, l_i: &Vec3, a_i: &Vec3) -> Result<(f64, i8)> {
    let f_hat =
        hat(f_star).map_err(|_| Error::Degenerate("zero resultant force: candidate angle is indeterminate".into()))?;
    let l_hat = hat(l_i)?;
    let a_hat = hat(a_i)?;
    let sigma: i8 = if f_hat.cross(&l_hat).dot(&a_hat) > 0.0 { 1 } else { -1 };
    let cos = f_hat.dot(&l_hat).clamp(-1.0, 1.0);
    Ok((f64::from(sigma) * cos.acos(), sigma))
}

pub fn axis_stability(w: &NetTipoverWrench, axes: &TipoverAxes, i: usize) -> Result<AxisStability> {
    let (f_i, m_i) = axis_components(w, axes, i)?;
    let l = &axes.normals[i];
    let resultant = f_i + force_couple_member(&m_i, l)?;
    let (theta, sigma) = candidate_angle(&resultant, l, &axes.axes[i])?;
    let f_hat = resultant / resultant.norm();
    let d = -l + l.dot(&f_hat) * f_hat;
    Ok(AxisStability {
        resultant,
        theta,
        sigma,
        d,
        product: theta * d.norm() * resultant.norm(),
    })
}

/// Force-angle measure: the minimum over axes of `theta_i · ‖d_i‖ · ‖f_i*‖`.
pub fn stability_measure(w: &NetTipoverWrench, axes: &TipoverAxes) -> Result<StabilityReport> {
    if axes.is_empty() {
        return Err(Error::Degenerate("no tip-over axes".into()));
    }
    let per_axis = (0..axes.len())
        .map(|i| axis_stability(w, axes, i))
        .collect::<Result<Vec<_>>>()?;
    let (argmin_axis, alpha) = per_axis.iter().map(|a| a.product).enumerate().fold(
        (0, f64::INFINITY),
        |best, (i, v)| if v < best.1 { (i, v) } else { best },
    );
    Ok(StabilityReport {
        per_axis,
        alpha,
        argmin_axis,
    })
}

/// Contiguous interval of negative measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TipoverWindow {
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceAnalysis {
    pub time: Vec<f64>,
    /// `None` where the measure is indeterminate (zero resultant on some axis).
    pub reports: Vec<Option<StabilityReport>>,
    pub windows: Vec<TipoverWindow>,
}

impl TraceAnalysis {
    pub fn alpha_series(&self) -> Vec<Option<f64>> {
        self.reports.iter().map(|r| r.as_ref().map(|r| r.alpha)).collect()
    }

    pub fn min_alpha(&self) -> Option<f64> {
        self.reports
            .iter()
            .flatten()
            .map(|r| r.alpha)
            .fold(None, |acc, a| Some(acc.map_or(a, |m: f64| m.min(a))))
    }
}

/// Evaluates the measure on every sample and merges runs of `alpha < 0`.
pub fn analyze_trace(trace: &WrenchTrace, layout: &WheelLayout) -> Result<TraceAnalysis> {
    trace.validate()?;
    let axes = support_pattern(layout)?;
    let reports: Vec<Option<StabilityReport>> = (0..trace.len())
        .into_par_iter()
        .map(|k| {
            let w = net_tipover_wrench(&trace.force[k], &trace.torque[k], &trace.gravity[k]);
            stability_measure(&w, &axes).ok()
        })
        .collect();
    let windows = tipover_windows(&trace.time, &reports);
    Ok(TraceAnalysis {
        time: trace.time.clone(),
        reports,
        windows,
    })
}

fn tipover_windows(time: &[f64], reports: &[Option<StabilityReport>]) -> Vec<TipoverWindow> {
    let mut windows = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for (t, r) in time.iter().zip(reports) {
        let negative = r.as_ref().is_some_and(|r| r.alpha < 0.0);
        open = match (open, negative) {
            (None, true) => Some((*t, *t)),
            (Some((s, _)), true) => Some((s, *t)),
            (Some((s, e)), false) => {
                windows.push(TipoverWindow { t_start: s, t_end: e });
                None
            }
            (None, false) => None,
        };
    }
    if let Some((s, e)) = open {
        windows.push(TipoverWindow { t_start: s, t_end: e });
    }
    windows
}

/// One row of a geometry sweep: scaled layout and its analysis.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub r_scale: f64,
    pub h_scale: f64,
    pub analysis: TraceAnalysis,
}

impl SweepRow {
    pub fn min_alpha(&self) -> Option<f64> {
        self.analysis.min_alpha()
    }
}

/// Re-evaluates the trace with `r_d` scaled by each of `r_scales` (at nominal
/// `h`) and `h` scaled by each of `h_scales` (at nominal `r_d`).
pub fn geometry_sweep(
    trace: &WrenchTrace,
    layout: &WheelLayout,
    r_scales: &[f64],
    h_scales: &[f64],
) -> Result<Vec<SweepRow>> {
    let mut combos: Vec<(f64, f64)> = Vec::new();
    for &r in r_scales {
        combos.push((r, 1.0));
    }
    for &h in h_scales {
        if !combos.contains(&(1.0, h)) {
            combos.push((1.0, h));
        }
    }
    if let Some(&(r, h)) = combos.iter().find(|(r, h)| !(*r > 0.0) || !(*h > 0.0)) {
        return Err(Error::Contract(format!(
            "scale factors must be positive (r = {r}, h = {h})"
        )));
    }
    combos
        .into_iter()
        .map(|(r, h)| {
            let scaled = if r == 1.0 && h == 1.0 {
                layout.clone()
            } else {
                layout.scaled(r, h)
            };
            Ok(SweepRow {
                r_scale: r,
                h_scale: h,
                analysis: analyze_trace(trace, &scaled)?,
            })
        })
        .collect()
}
