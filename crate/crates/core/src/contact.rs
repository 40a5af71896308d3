//! Penalty contact between the wheeled end-effector and a flat surface, the
//! fixed-step planar and spatial plants, and a momentum-based external wrench
//! observer.

use nalgebra::{Matrix3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    planar_surface_normal, wheel_contact_points, InertiaParams, PlanarState, PlanarWrench, RigidPose, SpatialState,
    SpatialWrench, Vec3, WheelLayout,
};

pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceModel {
    pub point_on_plane: Vec3,
    /// Unit normal pointing from the surface towards the vehicle.
    pub normal: Vec3,
    /// Initial tip misalignment used by approach scenarios (rad).
    #[serde(default)]
    pub contact_angle_offset: f64,
}

impl SurfaceModel {
    /// The line `z = 0` of the planar world, vehicle above it.
    pub fn planar() -> Self {
        Self {
            point_on_plane: Vec3::zeros(),
            normal: planar_surface_normal(),
            contact_angle_offset: 0.0,
        }
    }

    /// The plane `z = 0` of the spatial work frame, whose `z` axis points into
    /// the surface so that an aligned vehicle has identity orientation.
    pub fn spatial() -> Self {
        Self {
            point_on_plane: Vec3::zeros(),
            normal: -Vec3::z(),
            contact_angle_offset: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if (self.normal.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("surface normal must be a unit vector".into()));
        }
        Ok(())
    }

    /// Signed penetration of a world point (positive when below the surface).
    pub fn penetration(&self, p: &Vec3) -> f64 {
        -(p - self.point_on_plane).dot(&self.normal)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactParams {
    /// Normal spring stiffness per wheel (N/m).
    pub stiffness: f64,
    /// Normal damping per wheel (N·s/m).
    pub damping: f64,
    /// Viscous tangential resistance per wheel (N·s/m).
    pub rolling_resistance: f64,
    /// Normal-force margin `delta_F` for contact classification (N).
    pub margin: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self {
            stiffness: 2.0e4,
            damping: 200.0,
            rolling_resistance: 0.5,
            margin: 0.5,
        }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness > 0.0)
            || !(self.damping >= 0.0)
            || !(self.rolling_resistance >= 0.0)
            || !(self.margin > 0.0)
        {
            return Err(Error::Config(format!("invalid contact parameters {self:?}")));
        }
        Ok(())
    }
}

/// Discrete contact condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContactCode {
    FreeFlight,
    FullContact,
    /// Some but not all wheels at or above the margin; bit `i` marks wheel `i + 1`.
    TipOver {
        in_contact: u8,
        wheels: u8,
    },
}

impl ContactCode {
    /// Integer label: `-2` free flight, `0` full contact; planar tip-overs are
    /// `-1` (only wheel 1 in contact) and `+1` (only wheel 2 in contact); other
    /// layouts encode a partial contact as `10 + mask`.
    pub fn code(&self) -> i32 {
        match *self {
            ContactCode::FreeFlight => -2,
            ContactCode::FullContact => 0,
            ContactCode::TipOver { in_contact, wheels: 2 } => {
                if in_contact == 0b01 {
                    -1
                } else {
                    1
                }
            }
            ContactCode::TipOver { in_contact, .. } => 10 + i32::from(in_contact),
        }
    }

    pub fn is_tip_over(&self) -> bool {
        matches!(self, ContactCode::TipOver { .. })
    }

    pub fn is_free_flight(&self) -> bool {
        matches!(self, ContactCode::FreeFlight)
    }

    pub fn is_full_contact(&self) -> bool {
        matches!(self, ContactCode::FullContact)
    }
}

/// Classifies per-wheel normal forces against the margin `delta_f`.
pub fn classify_contact(f_n: &[f64], delta_f: f64) -> Result<ContactCode> {
    if f_n.is_empty() || f_n.len() > 8 {
        return Err(Error::Contract(format!("unsupported wheel count {}", f_n.len())));
    }
    if let Some(bad) = f_n.iter().find(|f| !(**f >= 0.0)) {
        return Err(Error::Contract(format!("normal force {bad} is negative or NaN")));
    }
    let mask = f_n
        .iter()
        .enumerate()
        .filter(|(_, f)| **f >= delta_f)
        .fold(0u8, |m, (i, _)| m | (1 << i));
    let all = ((1u16 << f_n.len()) - 1) as u8;
    Ok(match mask {
        0 => ContactCode::FreeFlight,
        m if m == all => ContactCode::FullContact,
        m => ContactCode::TipOver {
            in_contact: m,
            wheels: f_n.len() as u8,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactReport {
    /// Normal force per wheel (N), never negative.
    pub normal_forces: Vec<f64>,
    pub code: ContactCode,
    /// Resultant contact wrench on the body about the CoM, body frame.
    pub wrench: SpatialWrench,
    /// Per-wheel world-frame force applied to the body.
    pub wheel_forces: Vec<Vec3>,
    /// World-frame contact points.
    pub contact_points: Vec<Vec3>,
    pub penetrations: Vec<f64>,
}

impl ContactReport {
    pub fn planar_wrench(&self) -> PlanarWrench {
        self.wrench.to_planar()
    }

    /// Push-back force of the surface along `-z_B`, i.e. the interaction force.
    pub fn interaction_force(&self) -> f64 {
        -self.wrench.force.z
    }

    pub fn force_difference(&self) -> f64 {
        self.normal_forces[0] - self.normal_forces[1]
    }
}

/// Spring-damper contact forces for every wheel.
pub fn contact_forces<P: RigidPose>(
    pose: &P,
    layout: &WheelLayout,
    surface: &SurfaceModel,
    params: &ContactParams,
) -> ContactReport {
    let n = &surface.normal;
    let com = pose.position();
    let rot = pose.rotation();
    let points = wheel_contact_points(layout, pose, n);
    let count = points.len();
    let mut normal_forces = Vec::with_capacity(count);
    let mut wheel_forces = Vec::with_capacity(count);
    let mut penetrations = Vec::with_capacity(count);
    let mut force = Vec3::zeros();
    let mut torque = Vec3::zeros();
    for p in &points {
        let depth = surface.penetration(p);
        let (f_n, f_world) = if depth > 0.0 {
            let v = pose.point_velocity(p);
            let depth_rate = -v.dot(n);
            let f_n = (params.stiffness * depth + params.damping * depth_rate).max(0.0);
            let v_t = v - v.dot(n) * n;
            (f_n, f_n * n - params.rolling_resistance * v_t)
        } else {
            (0.0, Vec3::zeros())
        };
        force += f_world;
        torque += (p - com).cross(&f_world);
        normal_forces.push(f_n);
        wheel_forces.push(f_world);
        penetrations.push(depth.max(0.0));
    }
    let rt = rot.transpose();
    let code = classify_contact(&normal_forces, params.margin).unwrap_or(ContactCode::FreeFlight);
    ContactReport {
        normal_forces,
        code,
        wrench: SpatialWrench::new(rt * force, rt * torque),
        wheel_forces,
        contact_points: points,
        penetrations,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub physics_dt: f64,
    pub control_dt: f64,
    pub duration: f64,
    pub inertia: InertiaParams,
    pub layout: WheelLayout,
    pub surface: SurfaceModel,
    pub contact: ContactParams,
    #[serde(default)]
    pub gravity: bool,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SimConfig {
    pub fn planar_default() -> Self {
        Self {
            physics_dt: 1e-3,
            control_dt: 1e-2,
            duration: 10.0,
            inertia: InertiaParams::default(),
            layout: WheelLayout::reference_planar(),
            surface: SurfaceModel::planar(),
            contact: ContactParams::default(),
            gravity: false,
            rng_seed: 0,
        }
    }

    pub fn spatial_default() -> Self {
        Self {
            layout: WheelLayout::reference_three_wheel(),
            surface: SurfaceModel::spatial(),
            ..Self::planar_default()
        }
    }

    /// Physics steps per control period.
    pub fn control_ratio(&self) -> usize {
        (self.control_dt / self.physics_dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.physics_dt > 0.0) || !(self.duration > 0.0) {
            return Err(Error::Config("physics_dt and duration must be positive".into()));
        }
        let ratio = self.control_dt / self.physics_dt;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "control_dt {} is not an integer multiple of physics_dt {}",
                self.control_dt, self.physics_dt
            )));
        }
        self.inertia.validate()?;
        self.layout.validate()?;
        self.surface.validate()?;
        self.contact.validate()
    }
}

fn diverged(time: f64, what: &str) -> Error {
    Error::Divergence {
        time,
        reason: format!("non-finite {what}"),
    }
}

/// One semi-implicit Euler step of the planar two-wheel plant.
///
/// Returns the new state together with the contact report evaluated at the
/// start of the step. Gravity is only applied when `cfg.gravity` is set.
pub fn step_planar(
    state: &PlanarState,
    applied: &PlanarWrench,
    cfg: &SimConfig,
) -> Result<(PlanarState, ContactReport)> {
    if !state.is_finite() || !applied.is_finite() {
        return Err(diverged(f64::NAN, "planar state or wrench"));
    }
    let contact = contact_forces(state, &cfg.layout, &cfg.surface, &cfg.contact);
    let total = *applied + contact.planar_wrench();
    let (mut fx, mut fz) = state.body_to_world_dir(total.fx, total.fz);
    // contact tangential forces are in the plane; drop the out-of-plane part
    let m = cfg.inertia.mass;
    if cfg.gravity {
        fz -= m * GRAVITY;
    }
    fx /= m;
    fz /= m;
    let beta_acc = total.tau / cfg.inertia.planar_inertia;
    let dt = cfg.physics_dt;
    let mut next = *state;
    next.vx += fx * dt;
    next.vz += fz * dt;
    next.beta_rate += beta_acc * dt;
    next.x += next.vx * dt;
    next.z += next.vz * dt;
    next.beta += next.beta_rate * dt;
    if !next.is_finite() {
        return Err(diverged(f64::NAN, "planar state"));
    }
    Ok((next, contact))
}

/// One semi-implicit step of the spatial plant.
///
/// Linear motion uses semi-implicit Euler. Rotation advances the world-frame
/// angular momentum first, which carries the gyroscopic term `ω × Jω`
/// implicitly, then rotates the attitude with the updated body rate and
/// renormalizes the quaternion.
pub fn step_spatial(
    state: &SpatialState,
    applied: &SpatialWrench,
    cfg: &SimConfig,
) -> Result<(SpatialState, ContactReport)> {
    if !state.is_finite() || !applied.is_finite() {
        return Err(diverged(f64::NAN, "spatial state or wrench"));
    }
    let contact = contact_forces(state, &cfg.layout, &cfg.surface, &cfg.contact);
    let total = *applied + contact.wrench;
    let dt = cfg.physics_dt;
    let m = cfg.inertia.mass;
    let j = &cfg.inertia.spatial_inertia;
    let j_inv = j
        .try_inverse()
        .ok_or_else(|| Error::Config("singular inertia".into()))?;
    let rot = state.rotation();

    let mut force = rot * total.force;
    if cfg.gravity {
        force += cfg.surface.normal * (-m * GRAVITY);
    }
    let velocity = state.velocity + force / m * dt;
    let position = state.position + velocity * dt;

    let momentum = rot * (j * state.angular_velocity) + rot * total.torque * dt;
    let omega_world = rot * (j_inv * (rot.transpose() * momentum));
    let mut orientation = UnitQuaternion::from_scaled_axis(omega_world * dt) * state.orientation;
    orientation.renormalize();
    let new_rot = orientation.to_rotation_matrix().into_inner();
    let angular_velocity = j_inv * (new_rot.transpose() * momentum);

    let next = SpatialState {
        position,
        orientation,
        velocity,
        angular_velocity,
    };
    if !next.is_finite() {
        return Err(diverged(f64::NAN, "spatial state"));
    }
    Ok((next, contact))
}

/// Body-frame spatial inertia rotated into the world frame.
pub fn world_inertia<P: RigidPose>(pose: &P, body_inertia: &Matrix3<f64>) -> Matrix3<f64> {
    let r = pose.rotation();
    r * body_inertia * r.transpose()
}

/// Residual observer of the external wrench from linear and angular momentum.
///
/// `r = K (p - p0 - ∫(w_applied + r) dt)`; for a constant external wrench the
/// estimate converges with time constant `1 / K`.
#[derive(Clone, Debug)]
pub struct MomentumObserver {
    gain: f64,
    initial: Option<(Vec3, Vec3)>,
    integral: (Vec3, Vec3),
    residual: (Vec3, Vec3),
}

impl MomentumObserver {
    pub fn new(gain: f64) -> Result<Self> {
        if !(gain > 0.0) {
            return Err(Error::Config("observer gain must be positive".into()));
        }
        Ok(Self {
            gain,
            initial: None,
            integral: (Vec3::zeros(), Vec3::zeros()),
            residual: (Vec3::zeros(), Vec3::zeros()),
        })
    }

    /// Feeds one sample. `applied_*` are the known world-frame force and
    /// torque acting over the interval that ends at this sample; returns the
    /// external wrench estimate in world coordinates.
    pub fn update(
        &mut self,
        momentum: Vec3,
        angular_momentum: Vec3,
        applied_force: Vec3,
        applied_torque: Vec3,
        dt: f64,
    ) -> (Vec3, Vec3) {
        let (p0, l0) = *self.initial.get_or_insert((momentum, angular_momentum));
        self.integral.0 += (applied_force + self.residual.0) * dt;
        self.integral.1 += (applied_torque + self.residual.1) * dt;
        self.residual = (
            (momentum - p0 - self.integral.0) * self.gain,
            (angular_momentum - l0 - self.integral.1) * self.gain,
        );
        self.residual
    }

    pub fn estimate_world(&self) -> (Vec3, Vec3) {
        self.residual
    }

    /// Planar convenience wrapper; returns the estimate in body coordinates.
    pub fn update_planar(
        &mut self,
        state: &PlanarState,
        applied: &PlanarWrench,
        inertia: &InertiaParams,
        dt: f64,
    ) -> PlanarWrench {
        let rot = state.rotation();
        let m = inertia.mass;
        let lin = state.linear_velocity() * m;
        let ang = state.angular_velocity_world() * inertia.planar_inertia;
        let body = applied.to_spatial();
        let (f, t) = self.update(lin, ang, rot * body.force, rot * body.torque, dt);
        SpatialWrench::new(rot.transpose() * f, rot.transpose() * t).to_planar()
    }

    /// Spatial convenience wrapper; returns the estimate in body coordinates.
    pub fn update_spatial(
        &mut self,
        state: &SpatialState,
        applied: &SpatialWrench,
        inertia: &InertiaParams,
        dt: f64,
    ) -> SpatialWrench {
        let rot = state.rotation();
        let lin = state.velocity * inertia.mass;
        let ang = rot * (inertia.spatial_inertia * state.angular_velocity);
        let (f, t) = self.update(lin, ang, rot * applied.force, rot * applied.torque, dt);
        SpatialWrench::new(rot.transpose() * f, rot.transpose() * t)
    }
}
