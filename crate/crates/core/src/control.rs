//! Contact-aware interaction control.
//!
//! The normal-force controller is a hybrid motion/force law: sliding motion
//! along the surface tangent is tracked with a PD law plus acceleration
//! feedforward, the push along `z_B` is force-controlled with a PI law on the
//! interaction force, and the tip-over torque is proportional to the
//! difference of wheel normal forces. The baseline is a full-pose PD law.

use nalgebra::{Matrix3, UnitQuaternion};
use serde::{Deserialize, Serialize};

pub use crate::contact::{classify_contact, ContactCode};
use crate::error::{Error, Result};
use crate::geometry::{rotation_log, PlanarState, PlanarWrench, RigidPose, SpatialState, SpatialWrench, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    pub k_p: f64,
    pub k_d: f64,
    pub k_f: f64,
    pub k_i: f64,
    /// Normal-force torque gains; the planar law uses the first entry.
    pub k_n: [f64; 3],
    /// Yaw attitude stiffness and damping (spatial plant).
    pub k_yaw: f64,
    pub d_yaw: f64,
    /// Bound on `k_i · ∫e_f` (N).
    pub integral_limit: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            k_p: 25.0,
            k_d: 10.0,
            k_f: 1.0,
            k_i: 2.0,
            k_n: [0.5; 3],
            k_yaw: 2.0,
            d_yaw: 0.4,
            integral_limit: 10.0,
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k_p,
            self.k_d,
            self.k_f,
            self.k_i,
            self.k_yaw,
            self.d_yaw,
            self.integral_limit,
        ];
        if all.iter().chain(self.k_n.iter()).any(|g| !(*g > 0.0)) {
            return Err(Error::Config(format!("controller gains must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Diagonal stiffness and damping of the full-pose PD law.
///
/// Position gains act along world axes, attitude gains along body axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineGains {
    pub position_stiffness: Vec3,
    pub position_damping: Vec3,
    pub attitude_stiffness: Vec3,
    pub attitude_damping: Vec3,
}

impl Default for BaselineGains {
    fn default() -> Self {
        Self {
            position_stiffness: Vec3::new(25.0, 25.0, 100.0),
            position_damping: Vec3::new(10.0, 10.0, 20.0),
            attitude_stiffness: Vec3::new(5.0, 5.0, 5.0),
            attitude_damping: Vec3::new(1.5, 1.5, 1.5),
        }
    }
}

impl BaselineGains {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .position_stiffness
            .iter()
            .chain(self.position_damping.iter())
            .chain(self.attitude_stiffness.iter())
            .chain(self.attitude_damping.iter());
        if all.into_iter().any(|g| !(*g > 0.0)) {
            return Err(Error::Config("baseline stiffness and damping must be positive".into()));
        }
        Ok(())
    }
}

/// Symmetric saturation bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WrenchLimits {
    pub force: f64,
    pub torque: f64,
}

impl Default for WrenchLimits {
    fn default() -> Self {
        Self {
            force: 60.0,
            torque: 5.0,
        }
    }
}

/// Sliding and force references. Tangential axes are the work-frame `x`/`y`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub x: f64,
    pub x_rate: f64,
    pub x_acc: f64,
    pub y: f64,
    pub y_rate: f64,
    pub y_acc: f64,
    /// Desired push along `z_B` (N).
    pub force: f64,
    pub yaw: f64,
}

/// Target pose for the full-pose law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseReference {
    pub position: Vec3,
    pub velocity: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl PoseReference {
    /// Planar pose `(x, z, beta)` with optional velocity feedforward.
    pub fn planar(x: f64, z: f64, beta: f64, vx: f64, vz: f64) -> Self {
        let rot = PlanarState::at_rest(x, z, beta).rotation();
        Self {
            position: Vec3::new(x, 0.0, z),
            velocity: Vec3::new(vx, 0.0, vz),
            orientation: UnitQuaternion::from_matrix(&rot),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    Baseline,
    NormalForce,
}

/// Which law produced the last command.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveLaw {
    FullPose,
    NormalForce,
}

/// Memory owned by one controller instance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControllerState {
    pub integral_force_error: f64,
    pub last_code: Option<ContactCode>,
    pub gated: bool,
}

/// Freezes sliding references while a tip-over is in progress.
///
/// On a tip-over code the position references are held at `hold` (the
/// current tangential position) with zero rate and acceleration. The force
/// and yaw references pass through, as does everything during free flight or
/// full contact.
pub fn gate_references(code: ContactCode, refs: &References, hold: (f64, f64)) -> References {
    if !code.is_tip_over() {
        return *refs;
    }
    References {
        x: hold.0,
        x_rate: 0.0,
        x_acc: 0.0,
        y: hold.1,
        y_rate: 0.0,
        y_acc: 0.0,
        ..*refs
    }
}

/// Sliding-force and push-force laws, returning `(f_x, f_z)`.
#[allow(clippy::too_many_arguments)]
pub fn motion_force_wrench(
    e_p: f64,
    e_d: f64,
    e_f: f64,
    integral_e_f: f64,
    acc_ref: f64,
    force_ref: f64,
    mass: f64,
    gains: &Gains,
) -> (f64, f64) {
    let f_x = mass * acc_ref - gains.k_p * e_p - gains.k_d * e_d;
    let f_z = force_ref - gains.k_f * e_f - gains.k_i * integral_e_f;
    (f_x, f_z)
}

/// Clockwise-positive tip-over torque `k_n (f_n1 - f_n2)`.
pub fn normal_force_torque_planar(f_n1: f64, f_n2: f64, k_n: f64) -> f64 {
    k_n * (f_n1 - f_n2)
}

/// Force-difference errors of the side planes `S23`, `S31`, `S12`.
pub fn plane_errors_3w(f_n: [f64; 3]) -> [f64; 3] {
    [f_n[2] - f_n[1], f_n[0] - f_n[2], f_n[1] - f_n[0]]
}

/// Sum of the per-plane torques `k_ni e_ni n_i`.
pub fn normal_force_torque_3w(errors: [f64; 3], normals: &[Vec3; 3], k_n: [f64; 3]) -> Result<Vec3> {
    let mut tau = Vec3::zeros();
    for i in 0..3 {
        if (normals[i].norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Contract(format!("plane normal {} is not a unit vector", i + 1)));
        }
        tau += k_n[i] * errors[i] * normals[i];
    }
    Ok(tau)
}

/// Full-pose PD wrench in body coordinates.
pub fn baseline_fullpose_wrench<P: RigidPose>(
    pose: &P,
    reference: &PoseReference,
    gains: &BaselineGains,
) -> SpatialWrench {
    let rot = pose.rotation();
    let pos_err = pose.position() - reference.position;
    let vel_err = pose.linear_velocity() - reference.velocity;
    let force_world =
        -gains.position_stiffness.component_mul(&pos_err) - gains.position_damping.component_mul(&vel_err);
    let current = UnitQuaternion::from_matrix(&rot);
    let att_err = rotation_log(&(reference.orientation.inverse() * current));
    let omega_body = rot.transpose() * pose.angular_velocity_world();
    let torque = -gains.attitude_stiffness.component_mul(&att_err) - gains.attitude_damping.component_mul(&omega_body);
    SpatialWrench::new(rot.transpose() * force_world, torque)
}

/// Componentwise clamp; flags are `[fx, fz, tau]`.
pub fn saturate_planar(w: &PlanarWrench, limits: &WrenchLimits) -> (PlanarWrench, [bool; 3]) {
    let (fx, sx) = clamp_flag(w.fx, limits.force);
    let (fz, sz) = clamp_flag(w.fz, limits.force);
    let (tau, st) = clamp_flag(w.tau, limits.torque);
    (PlanarWrench::new(fx, fz, tau), [sx, sz, st])
}

/// Componentwise clamp; flags are forces then torques.
pub fn saturate_spatial(w: &SpatialWrench, limits: &WrenchLimits) -> (SpatialWrench, [bool; 6]) {
    let mut flags = [false; 6];
    let mut out = *w;
    for i in 0..3 {
        (out.force[i], flags[i]) = clamp_flag(w.force[i], limits.force);
        (out.torque[i], flags[i + 3]) = clamp_flag(w.torque[i], limits.torque);
    }
    (out, flags)
}

fn clamp_flag(v: f64, limit: f64) -> (f64, bool) {
    if v > limit {
        (limit, true)
    } else if v < -limit {
        (-limit, true)
    } else {
        (v, false)
    }
}

/// Coriolis term `C_S v_S` of the planar body-frame dynamics.
pub fn coriolis_planar(state: &PlanarState, mass: f64) -> PlanarWrench {
    let (vbx, vbz) = state.body_velocity();
    PlanarWrench::new(-mass * state.beta_rate * vbz, mass * state.beta_rate * vbx, 0.0)
}

/// Coriolis and gyroscopic term of the spatial body-frame dynamics.
pub fn coriolis_spatial(state: &SpatialState, mass: f64, inertia: &Matrix3<f64>) -> SpatialWrench {
    let w = state.angular_velocity;
    let v_body = state.rotation().transpose() * state.velocity;
    SpatialWrench::new(mass * w.cross(&v_body), w.cross(&(inertia * w)))
}

/// Per-step diagnostic terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ControlTerms {
    pub e_p: f64,
    pub e_d: f64,
    pub e_f: f64,
    /// Measured force-difference errors; planar uses the first entry.
    pub e_n: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlOutput<W> {
    pub wrench: W,
    pub code: ContactCode,
    pub law: ActiveLaw,
    pub terms: ControlTerms,
    pub saturated: bool,
}

/// Controller configuration shared by both plants.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    pub mode: ControlMode,
    pub gains: Gains,
    pub baseline: BaselineGains,
    pub limits: WrenchLimits,
    pub margin: f64,
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    /// Side-plane normals for the three-wheel law.
    pub plane_normals: Option<[Vec3; 3]>,
    pub state: ControllerState,
}

/// Plant outputs available to the controller at one control instant.
#[derive(Clone, Copy, Debug)]
pub struct Measurements<'a, S> {
    pub state: &'a S,
    /// Pressure-sensor readings (possibly noisy).
    pub normal_forces: &'a [f64],
    /// Estimated interaction force along `z_B` (N).
    pub force_estimate: f64,
}

impl Controller {
    pub fn new(
        mode: ControlMode,
        gains: Gains,
        baseline: BaselineGains,
        limits: WrenchLimits,
        margin: f64,
        mass: f64,
        inertia: Matrix3<f64>,
    ) -> Result<Self> {
        gains.validate()?;
        baseline.validate()?;
        if !(limits.force > 0.0) || !(limits.torque > 0.0) || !(margin > 0.0) {
            return Err(Error::Config("limits and contact margin must be positive".into()));
        }
        Ok(Self {
            mode,
            gains,
            baseline,
            limits,
            margin,
            mass,
            inertia,
            plane_normals: None,
            state: ControllerState::default(),
        })
    }

    pub fn with_plane_normals(mut self, normals: [Vec3; 3]) -> Self {
        self.plane_normals = Some(normals);
        self
    }

    fn integrate_force_error(&mut self, e_f: f64, dt: f64) -> f64 {
        let bound = self.gains.integral_limit / self.gains.k_i;
        let s = &mut self.state;
        s.integral_force_error = (s.integral_force_error + e_f * dt).clamp(-bound, bound);
        s.integral_force_error
    }

    /// One planar control update.
    ///
    /// `pose_ref` drives the full-pose law, used throughout in baseline mode
    /// and during free flight in normal-force mode.
    pub fn step_planar(
        &mut self,
        meas: &Measurements<'_, PlanarState>,
        refs: &References,
        pose_ref: &PoseReference,
        dt: f64,
    ) -> Result<ControlOutput<PlanarWrench>> {
        let s = meas.state;
        let code = classify_contact(meas.normal_forces, self.margin)?;
        let e_n = meas.normal_forces[0] - meas.normal_forces[1];
        self.state.last_code = Some(code);
        if self.mode == ControlMode::Baseline || code.is_free_flight() {
            self.state.gated = false;
            let raw = baseline_fullpose_wrench(s, pose_ref, &self.baseline).to_planar();
            let (wrench, flags) = saturate_planar(&raw, &self.limits);
            return Ok(ControlOutput {
                wrench,
                code,
                law: ActiveLaw::FullPose,
                terms: ControlTerms {
                    e_n: [e_n, 0.0, 0.0],
                    ..Default::default()
                },
                saturated: flags.iter().any(|f| *f),
            });
        }
        let gated = gate_references(code, refs, (s.x, 0.0));
        self.state.gated = code.is_tip_over();
        let e_p = s.x - gated.x;
        let e_d = s.vx - gated.x_rate;
        let e_f = meas.force_estimate - gated.force;
        let integral = self.integrate_force_error(e_f, dt);
        let (fx, fz) = motion_force_wrench(
            e_p,
            e_d,
            e_f,
            integral,
            gated.x_acc,
            gated.force,
            self.mass,
            &self.gains,
        );
        let tau = normal_force_torque_planar(meas.normal_forces[0], meas.normal_forces[1], self.gains.k_n[0]);
        let raw = PlanarWrench::new(fx, fz, tau) + coriolis_planar(s, self.mass);
        let (wrench, flags) = saturate_planar(&raw, &self.limits);
        Ok(ControlOutput {
            wrench,
            code,
            law: ActiveLaw::NormalForce,
            terms: ControlTerms {
                e_p,
                e_d,
                e_f,
                e_n: [e_n, 0.0, 0.0],
            },
            saturated: flags.iter().any(|f| *f),
        })
    }

    /// One spatial (three-wheel) control update.
    pub fn step_spatial(
        &mut self,
        meas: &Measurements<'_, SpatialState>,
        refs: &References,
        pose_ref: &PoseReference,
        dt: f64,
    ) -> Result<ControlOutput<SpatialWrench>> {
        let s = meas.state;
        if meas.normal_forces.len() != 3 {
            return Err(Error::Contract("spatial controller expects three wheels".into()));
        }
        let code = classify_contact(meas.normal_forces, self.margin)?;
        let f = [meas.normal_forces[0], meas.normal_forces[1], meas.normal_forces[2]];
        let e_n = plane_errors_3w(f);
        self.state.last_code = Some(code);
        if self.mode == ControlMode::Baseline || code.is_free_flight() {
            self.state.gated = false;
            let raw = baseline_fullpose_wrench(s, pose_ref, &self.baseline);
            let (wrench, flags) = saturate_spatial(&raw, &self.limits);
            return Ok(ControlOutput {
                wrench,
                code,
                law: ActiveLaw::FullPose,
                terms: ControlTerms {
                    e_n,
                    ..Default::default()
                },
                saturated: flags.iter().any(|f| *f),
            });
        }
        let normals = self
            .plane_normals
            .ok_or_else(|| Error::Contract("three-wheel control needs plane normals".into()))?;
        let gated = gate_references(code, refs, (s.position.x, s.position.y));
        self.state.gated = code.is_tip_over();
        let (e_px, e_py) = (s.position.x - gated.x, s.position.y - gated.y);
        let (e_dx, e_dy) = (s.velocity.x - gated.x_rate, s.velocity.y - gated.y_rate);
        let e_f = meas.force_estimate - gated.force;
        let integral = self.integrate_force_error(e_f, dt);
        let (fx, fz) = motion_force_wrench(
            e_px,
            e_dx,
            e_f,
            integral,
            gated.x_acc,
            gated.force,
            self.mass,
            &self.gains,
        );
        let (fy, _) = motion_force_wrench(
            e_py,
            e_dy,
            e_f,
            integral,
            gated.y_acc,
            gated.force,
            self.mass,
            &self.gains,
        );
        let tilt = normal_force_torque_3w(e_n, &normals, self.gains.k_n)?;
        let yaw = s.orientation.euler_angles().2;
        let yaw_err = wrap_angle(yaw - gated.yaw);
        let tau_z = -self.gains.k_yaw * yaw_err - self.gains.d_yaw * s.angular_velocity.z;
        let raw = SpatialWrench::new(Vec3::new(fx, fy, fz), Vec3::new(tilt.x, tilt.y, tau_z))
            + coriolis_spatial(s, self.mass, &self.inertia);
        let (wrench, flags) = saturate_spatial(&raw, &self.limits);
        Ok(ControlOutput {
            wrench,
            code,
            law: ActiveLaw::NormalForce,
            terms: ControlTerms {
                e_p: e_px,
                e_d: e_dx,
                e_f,
                e_n,
            },
            saturated: flags.iter().any(|f| *f),
        })
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    a - two_pi * ((a + std::f64::consts::PI) / two_pi).floor()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{step_planar, SimConfig};
    use crate::geometry::WheelLayout;
    use approx::assert_relative_eq;

    #[test]
    fn gating_examples() {
        let refs = References {
            x: 0.4,
            x_rate: 0.3,
            x_acc: 0.5,
            force: 15.0,
            ..Default::default()
        };
        assert_eq!(gate_references(ContactCode::FullContact, &refs, (0.1, 0.0)), refs);
        let tip = classify_contact(&[0.1, 5.0], 0.5).unwrap();
        let g = gate_references(tip, &refs, (0.1, 0.0));
        assert_eq!((g.x, g.x_rate, g.x_acc, g.force), (0.1, 0.0, 0.0, 15.0));
        assert_eq!(gate_references(ContactCode::FreeFlight, &refs, (0.1, 0.0)), refs);
        assert_eq!(gate_references(tip, &g, (0.1, 0.0)), g);
    }

    #[test]
    fn motion_force_examples() {
        let g = Gains {
            k_p: 10.0,
            k_f: 1.0,
            k_i: 1.0,
            ..Default::default()
        };
        assert_eq!(motion_force_wrench(0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 4.0, &g), (0.0, 10.0));
        assert_eq!(motion_force_wrench(0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0, &g).0, -1.0);
        assert_eq!(motion_force_wrench(0.0, 0.0, -5.0, 0.0, 0.0, 10.0, 4.0, &g).1, 15.0);
    }

    #[test]
    fn planar_torque_examples() {
        assert_eq!(normal_force_torque_planar(4.0, 4.0, 0.5), 0.0);
        assert_eq!(normal_force_torque_planar(7.0, 3.0, 0.5), 2.0);
        assert_eq!(normal_force_torque_planar(3.0, 7.0, 0.5), -2.0);
    }

    #[test]
    fn plane_error_examples() {
        assert_eq!(plane_errors_3w([5.0, 5.0, 5.0]), [0.0, 0.0, 0.0]);
        assert_eq!(plane_errors_3w([3.0, 4.0, 5.0]), [1.0, -2.0, 1.0]);
    }

    #[test]
    fn three_wheel_torque_examples() {
        let normals = WheelLayout::reference_three_wheel().plane_normals().unwrap();
        assert_eq!(
            normal_force_torque_3w([0.0; 3], &normals, [0.5; 3]).unwrap(),
            Vec3::zeros()
        );
        let tau = normal_force_torque_3w([1.0, -2.0, 1.0], &normals, [0.5; 3]).unwrap();
        let hand = (normals[0] - normals[1] * 2.0 + normals[2]) * 0.5;
        assert_relative_eq!(tau, hand, epsilon = 1e-15);
        assert_eq!(tau.z, 0.0);
        let bad = [normals[0] * 2.0, normals[1], normals[2]];
        assert!(normal_force_torque_3w([1.0, 0.0, 0.0], &bad, [0.5; 3]).is_err());
    }

    #[test]
    fn baseline_examples() {
        let g = BaselineGains {
            position_stiffness: Vec3::new(20.0, 20.0, 20.0),
            ..Default::default()
        };
        let s = PlanarState::default();
        let at = PoseReference::planar(0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(baseline_fullpose_wrench(&s, &at, &g).to_planar().fx.abs() < 1e-12);
        let off = PoseReference::planar(-0.05, 0.0, 0.0, 0.0, 0.0);
        let w = baseline_fullpose_wrench(&s, &off, &g).to_planar();
        assert_relative_eq!(w.fx, -20.0 * 0.05, epsilon = 1e-12);
        // a clockwise attitude error yields a counter-clockwise torque
        let tilted = PlanarState::at_rest(0.0, 0.0, 0.1);
        let w = baseline_fullpose_wrench(&tilted, &at, &g).to_planar();
        assert_relative_eq!(w.tau, -0.1 * g.attitude_stiffness.y, epsilon = 1e-9);
    }

    #[test]
    fn saturation_examples() {
        let l = WrenchLimits::default();
        let (w, f) = saturate_planar(&PlanarWrench::new(0.0, 0.0, 7.0), &l);
        assert_eq!((w.tau, f[2]), (5.0, true));
        let (w, f) = saturate_planar(&PlanarWrench::new(0.0, 0.0, -7.0), &l);
        assert_eq!((w.tau, f[2]), (-5.0, true));
        let (w, f) = saturate_planar(&PlanarWrench::new(0.0, 0.0, 3.0), &l);
        assert_eq!((w.tau, f[2]), (3.0, false));
    }

    #[test]
    fn coriolis_compensation_gives_body_acceleration() {
        // With C_S v_S added, the body-frame velocity follows M v̇ = w_n.
        let cfg = SimConfig::planar_default();
        let mut s = PlanarState::at_rest(0.0, 5.0, 0.0);
        s.beta_rate = 0.8;
        s.vx = 0.3;
        s.vz = -0.2;
        let w_n = PlanarWrench::new(2.0, -1.0, 0.0);
        let (b0x, b0z) = s.body_velocity();
        let n = 200;
        for _ in 0..n {
            let w = w_n + coriolis_planar(&s, cfg.inertia.mass);
            s = step_planar(&s, &w, &cfg).unwrap().0;
        }
        let (bx, bz) = s.body_velocity();
        let t = n as f64 * cfg.physics_dt;
        assert!((bx - b0x - 2.0 / 4.0 * t).abs() < 2e-3);
        assert!((bz - b0z + 1.0 / 4.0 * t).abs() < 2e-3);
    }

    fn controller(mode: ControlMode) -> Controller {
        Controller::new(
            mode,
            Gains::default(),
            BaselineGains::default(),
            WrenchLimits::default(),
            0.5,
            4.0,
            Matrix3::identity() * 0.1,
        )
        .unwrap()
    }

    #[test]
    fn nominal_full_contact_step() {
        let mut c = controller(ControlMode::NormalForce);
        let s = PlanarState::at_rest(0.0, 0.3, 0.0);
        let refs = References {
            force: 15.0,
            ..Default::default()
        };
        let meas = Measurements {
            state: &s,
            normal_forces: &[7.5, 7.5],
            force_estimate: 15.0,
        };
        let pose = PoseReference::planar(0.0, 0.3, 0.0, 0.0, 0.0);
        let out = c.step_planar(&meas, &refs, &pose, 0.01).unwrap();
        assert_eq!(out.law, ActiveLaw::NormalForce);
        assert_eq!(out.wrench, PlanarWrench::new(0.0, 15.0, 0.0));
    }

    #[test]
    fn tip_over_step_gates_and_pushes_back() {
        let mut c = controller(ControlMode::NormalForce);
        let mut s = PlanarState::at_rest(0.2, 0.3, 0.05);
        s.vx = 0.1;
        let refs = References {
            x: 0.5,
            x_rate: 0.3,
            x_acc: 0.5,
            force: 7.5,
            ..Default::default()
        };
        let meas = Measurements {
            state: &s,
            normal_forces: &[0.1, 7.0],
            force_estimate: 7.1,
        };
        let pose = PoseReference::planar(0.0, 0.3, 0.0, 0.0, 0.0);
        let out = c.step_planar(&meas, &refs, &pose, 0.01).unwrap();
        assert_eq!(out.code.code(), 1);
        assert!(c.state.gated);
        assert_eq!(out.terms.e_p, 0.0);
        assert!(out.wrench.tau < 0.0);
    }

    #[test]
    fn baseline_ignores_normal_forces() {
        let s = PlanarState::at_rest(0.1, 0.31, 0.02);
        let refs = References {
            force: 15.0,
            ..Default::default()
        };
        let pose = PoseReference::planar(0.0, 0.28, 0.0, 0.0, 0.0);
        let mut a = controller(ControlMode::Baseline);
        let mut b = controller(ControlMode::Baseline);
        let m1 = Measurements {
            state: &s,
            normal_forces: &[7.5, 7.5],
            force_estimate: 15.0,
        };
        let m2 = Measurements {
            state: &s,
            normal_forces: &[0.0, 3.0],
            force_estimate: 2.0,
        };
        let o1 = a.step_planar(&m1, &refs, &pose, 0.01).unwrap();
        let o2 = b.step_planar(&m2, &refs, &pose, 0.01).unwrap();
        assert_eq!(o1.wrench, o2.wrench);
    }

    #[test]
    fn integrator_is_clamped() {
        let mut c = controller(ControlMode::NormalForce);
        let s = PlanarState::at_rest(0.0, 0.3, 0.0);
        let refs = References {
            force: 15.0,
            ..Default::default()
        };
        let meas = Measurements {
            state: &s,
            normal_forces: &[1.0, 1.0],
            force_estimate: 0.0,
        };
        let pose = PoseReference::planar(0.0, 0.3, 0.0, 0.0, 0.0);
        for _ in 0..10_000 {
            c.step_planar(&meas, &refs, &pose, 0.01).unwrap();
        }
        assert_relative_eq!(c.state.integral_force_error * c.gains.k_i, -10.0, epsilon = 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(
            wrap_angle(3.0 * std::f64::consts::PI),
            -std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert_relative_eq!(wrap_angle(0.2), 0.2);
    }

    proptest::proptest! {
        #[test]
        fn planar_torque_antisymmetric(a in 0.0..50.0f64, b in 0.0..50.0f64, k in 0.01..5.0f64) {
            proptest::prop_assert_eq!(normal_force_torque_planar(a, b, k), -normal_force_torque_planar(b, a, k));
            proptest::prop_assert_eq!(normal_force_torque_planar(a, a, k), 0.0);
        }

        #[test]
        fn plane_errors_sum_to_zero(f in proptest::array::uniform3(0.0..50.0f64)) {
            let e = plane_errors_3w(f);
            proptest::prop_assert!((e[0] + e[1] + e[2]).abs() < 1e-12);
            if f[0] == f[1] && f[1] == f[2] {
                proptest::prop_assert_eq!(e, [0.0; 3]);
            }
        }

        #[test]
        fn gating_idempotent(f in proptest::array::uniform2(0.0..20.0f64), x in -1.0..1.0f64, hold in -1.0..1.0f64) {
            let code = classify_contact(&f, 0.5).unwrap();
            let refs = References { x, x_rate: 0.2, x_acc: 0.5, force: 15.0, ..Default::default() };
            let once = gate_references(code, &refs, (hold, 0.0));
            proptest::prop_assert_eq!(gate_references(code, &once, (hold, 0.0)), once);
            if code.is_tip_over() {
                proptest::prop_assert_eq!((once.x_rate, once.x_acc), (0.0, 0.0));
            } else {
                proptest::prop_assert_eq!(once, refs);
            }
        }

        #[test]
        fn saturation_bounds(fx in -200.0..200.0f64, fz in -200.0..200.0f64, t in -20.0..20.0f64) {
            let l = WrenchLimits::default();
            let (w, flags) = saturate_planar(&PlanarWrench::new(fx, fz, t), &l);
            proptest::prop_assert!(w.tau.abs() <= l.torque && w.fx.abs() <= l.force && w.fz.abs() <= l.force);
            proptest::prop_assert_eq!(flags[2], t.abs() > l.torque);
        }
    }
}
