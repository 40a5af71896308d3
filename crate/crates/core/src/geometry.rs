//! Shared geometric types, frame conventions and wrench algebra.
//!
//! Body frame: origin at the centre of mass, `z_B` is the interaction axis and
//! points from the vehicle towards the work surface, so the end-effector tip
//! (and every wheel contact point) sits at `z = +h` in body coordinates.
//!
//! Planar plant: the world frame is `(x, z)` with `z` pointing up, the surface
//! is the line `z = 0` and the vehicle hovers above it. The body angle `beta`
//! is positive clockwise when drawn with `x` to the right and `z` up, which is
//! a positive rotation about world `+y`. At `beta = 0` the body axes are
//! `x_B = +x`, `y_B = -y`, `z_B = -z`. Planar torques are clockwise-positive,
//! i.e. the component along world `+y` (equivalently along `-y_B`).

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Offset between the FT-sensor mounting point and the centre of mass along `z_B`.
pub const FT_SENSOR_OFFSET: f64 = 0.12;
/// Wheel distance of the reference end-effector.
pub const WHEEL_DISTANCE: f64 = 0.084;
/// Centre-of-mass to end-effector-tip distance of the reference platform.
pub const TIP_OFFSET: f64 = 0.3;
pub const DEFAULT_WHEEL_RADIUS: f64 = 0.015;

/// Unit vector along `v`.
pub fn hat(v: &Vec3) -> Result<Vec3> {
    let n = v.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Degenerate(format!("cannot normalize vector with norm {n}")));
    }
    Ok(v / n)
}

/// Torque at the centre of mass from a wrench measured at the FT sensor.
///
/// `p_ft` points from the sensor mounting point to the centre of mass, in body
/// coordinates.
pub fn ft_to_com_torque(f_meas: &Vec3, tau_meas: &Vec3, p_ft: &Vec3) -> Vec3 {
    tau_meas + f_meas.cross(p_ft)
}

/// Sensor-to-CoM lever of the reference hardware, `(0, 0, -h_ft)`.
pub fn default_ft_lever() -> Vec3 {
    Vec3::new(0.0, 0.0, -FT_SENSOR_OFFSET)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarWrench {
    /// Force along `x_B` (N).
    pub fx: f64,
    /// Force along `z_B` (N).
    pub fz: f64,
    /// Clockwise-positive torque (N·m).
    pub tau: f64,
}

impl PlanarWrench {
    pub fn new(fx: f64, fz: f64, tau: f64) -> Self {
        Self { fx, fz, tau }
    }

    pub fn is_finite(&self) -> bool {
        self.fx.is_finite() && self.fz.is_finite() && self.tau.is_finite()
    }

    /// Embeds the planar wrench in the 3-D body frame.
    pub fn to_spatial(&self) -> SpatialWrench {
        SpatialWrench {
            force: Vec3::new(self.fx, 0.0, self.fz),
            torque: Vec3::new(0.0, -self.tau, 0.0),
        }
    }
}

impl Add for PlanarWrench {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.fx + o.fx, self.fz + o.fz, self.tau + o.tau)
    }
}

impl Sub for PlanarWrench {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.fx - o.fx, self.fz - o.fz, self.tau - o.tau)
    }
}

impl Neg for PlanarWrench {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.fx, -self.fz, -self.tau)
    }
}

impl Mul<f64> for PlanarWrench {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self::new(self.fx * c, self.fz * c, self.tau * c)
    }
}

impl AddAssign for PlanarWrench {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialWrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Default for SpatialWrench {
    fn default() -> Self {
        Self::zero()
    }
}

impl SpatialWrench {
    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::new(Vec3::zeros(), Vec3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.torque.iter()).all(|v| v.is_finite())
    }

    /// Projection onto the planar `(x_B, z_B)` plane.
    pub fn to_planar(&self) -> PlanarWrench {
        PlanarWrench::new(self.force.x, self.force.z, -self.torque.y)
    }
}

impl Add for SpatialWrench {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.force + o.force, self.torque + o.torque)
    }
}

impl Sub for SpatialWrench {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.force - o.force, self.torque - o.torque)
    }
}

impl Neg for SpatialWrench {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.force, -self.torque)
    }
}

impl Mul<f64> for SpatialWrench {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self::new(self.force * c, self.torque * c)
    }
}

/// Pose and twist of a rigid body, expressed for kinematic queries.
pub trait RigidPose {
    /// Centre-of-mass position in the world frame.
    fn position(&self) -> Vec3;
    /// Body-to-world rotation.
    fn rotation(&self) -> Matrix3<f64>;
    fn linear_velocity(&self) -> Vec3;
    fn angular_velocity_world(&self) -> Vec3;

    fn body_to_world(&self, p: &Vec3) -> Vec3 {
        self.position() + self.rotation() * p
    }

    /// World velocity of a point rigidly attached to the body at world position `p`.
    fn point_velocity(&self, p: &Vec3) -> Vec3 {
        self.linear_velocity() + self.angular_velocity_world().cross(&(p - self.position()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    /// CoM position along the surface tangent (m).
    pub x: f64,
    /// CoM height above the surface (m).
    pub z: f64,
    /// Body angle relative to the surface, clockwise positive (rad).
    pub beta: f64,
    pub vx: f64,
    pub vz: f64,
    pub beta_rate: f64,
}

impl PlanarState {
    pub fn at_rest(x: f64, z: f64, beta: f64) -> Self {
        Self {
            x,
            z,
            beta,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.z, self.beta, self.vx, self.vz, self.beta_rate]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Linear velocity in body coordinates `(along x_B, along z_B)`.
    pub fn body_velocity(&self) -> (f64, f64) {
        let (s, c) = self.beta.sin_cos();
        (c * self.vx - s * self.vz, -s * self.vx - c * self.vz)
    }

    /// Maps a body-frame planar vector `(x_B, z_B)` to world `(x, z)`.
    pub fn body_to_world_dir(&self, bx: f64, bz: f64) -> (f64, f64) {
        let (s, c) = self.beta.sin_cos();
        (c * bx - s * bz, -s * bx - c * bz)
    }
}

impl RigidPose for PlanarState {
    fn position(&self) -> Vec3 {
        Vec3::new(self.x, 0.0, self.z)
    }

    fn rotation(&self) -> Matrix3<f64> {
        let (s, c) = self.beta.sin_cos();
        Matrix3::new(c, 0.0, -s, 0.0, -1.0, 0.0, -s, 0.0, -c)
    }

    fn linear_velocity(&self) -> Vec3 {
        Vec3::new(self.vx, 0.0, self.vz)
    }

    fn angular_velocity_world(&self) -> Vec3 {
        Vec3::new(0.0, self.beta_rate, 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialState {
    pub position: Vec3,
    /// Body-to-world orientation.
    pub orientation: UnitQuaternion<f64>,
    /// World-frame linear velocity.
    pub velocity: Vec3,
    /// Body-frame angular velocity.
    pub angular_velocity: Vec3,
}

impl Default for SpatialState {
    fn default() -> Self {
        Self::at_rest(Vec3::zeros(), UnitQuaternion::identity())
    }
}

impl SpatialState {
    pub fn at_rest(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.velocity.iter())
            .chain(self.angular_velocity.iter())
            .chain(self.orientation.coords.iter())
            .all(|v| v.is_finite())
    }
}

impl RigidPose for SpatialState {
    fn position(&self) -> Vec3 {
        self.position
    }

    fn rotation(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    fn linear_velocity(&self) -> Vec3 {
        self.velocity
    }

    fn angular_velocity_world(&self) -> Vec3 {
        self.orientation * self.angular_velocity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutMode {
    TwoWheel,
    ThreeWheel,
}

/// Contact geometry of the wheeled end-effector.
///
/// `wheel_positions` are the contact points `p_i` in the body frame, at
/// `z = tip_offset`. Wheel centres sit `wheel_radius` closer to the CoM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WheelLayout {
    pub mode: LayoutMode,
    /// Circumradius of the wheel pattern; half the wheel spacing for two wheels.
    pub wheel_distance: f64,
    /// CoM-to-tip offset `h` along `z_B`.
    pub tip_offset: f64,
    pub wheel_radius: f64,
    pub wheel_positions: Vec<Vec3>,
}

impl WheelLayout {
    /// Planar pair: wheel 1 at `-x_B`, wheel 2 at `+x_B`.
    pub fn two_wheel(half_spacing: f64, tip_offset: f64) -> Self {
        Self {
            mode: LayoutMode::TwoWheel,
            wheel_distance: half_spacing,
            tip_offset,
            wheel_radius: DEFAULT_WHEEL_RADIUS,
            wheel_positions: vec![
                Vec3::new(-half_spacing, 0.0, tip_offset),
                Vec3::new(half_spacing, 0.0, tip_offset),
            ],
        }
    }

    /// Three wheels at 120°, numbered counter-clockwise about `z_B`, wheel 1 on `+x_B`.
    pub fn three_wheel(wheel_distance: f64, tip_offset: f64) -> Self {
        let wheel_positions = (0..3)
            .map(|i| {
                let phi = i as f64 * 2.0 * std::f64::consts::PI / 3.0;
                Vec3::new(wheel_distance * phi.cos(), wheel_distance * phi.sin(), tip_offset)
            })
            .collect();
        Self {
            mode: LayoutMode::ThreeWheel,
            wheel_distance,
            tip_offset,
            wheel_radius: DEFAULT_WHEEL_RADIUS,
            wheel_positions,
        }
    }

    pub fn reference_planar() -> Self {
        Self::two_wheel(WHEEL_DISTANCE, TIP_OFFSET)
    }

    pub fn reference_three_wheel() -> Self {
        Self::three_wheel(WHEEL_DISTANCE, TIP_OFFSET)
    }

    pub fn with_wheel_radius(mut self, wheel_radius: f64) -> Self {
        self.wheel_radius = wheel_radius;
        self
    }

    /// Rebuilds the layout with `r_d` and `h` multiplied by the given factors.
    pub fn scaled(&self, r_scale: f64, h_scale: f64) -> Self {
        let r = self.wheel_distance * r_scale;
        let h = self.tip_offset * h_scale;
        let mut out = Self {
            mode: self.mode,
            wheel_distance: r,
            tip_offset: h,
            wheel_radius: self.wheel_radius,
            wheel_positions: self
                .wheel_positions
                .iter()
                .map(|p| Vec3::new(p.x * r_scale, p.y * r_scale, p.z * h_scale))
                .collect(),
        };
        out.wheel_radius = out.wheel_radius.min(0.5 * h);
        out
    }

    pub fn wheel_count(&self) -> usize {
        self.wheel_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.mode {
            LayoutMode::TwoWheel => 2,
            LayoutMode::ThreeWheel => 3,
        };
        if self.wheel_positions.len() != expected {
            return Err(Error::Config(format!(
                "{:?} layout needs {expected} wheels, got {}",
                self.mode,
                self.wheel_positions.len()
            )));
        }
        if !(self.wheel_distance > 0.0) || !(self.tip_offset > 0.0) {
            return Err(Error::Config(format!(
                "wheel distance and tip offset must be positive (r_d = {}, h = {})",
                self.wheel_distance, self.tip_offset
            )));
        }
        if !(self.wheel_radius >= 0.0) || self.wheel_radius >= self.tip_offset {
            return Err(Error::Config(format!(
                "wheel radius {} must lie in [0, h)",
                self.wheel_radius
            )));
        }
        Ok(())
    }

    /// Centre of wheel `i` in body coordinates.
    pub fn wheel_center(&self, i: usize) -> Vec3 {
        self.wheel_positions[i] - Vec3::new(0.0, 0.0, self.wheel_radius)
    }

    /// Unit normals `n_1, n_2, n_3` of the side planes `S23`, `S31`, `S12`.
    ///
    /// `n_i` is oriented so that a positive torque along it shifts load from
    /// the right wheel of the plane to its left wheel, which is the direction
    /// that reduces a positive plane error `e_ni = f_right - f_left`.
    pub fn plane_normals(&self) -> Result<[Vec3; 3]> {
        if self.wheel_positions.len() != 3 {
            return Err(Error::Contract(
                "plane normals are defined for three-wheel layouts".into(),
            ));
        }
        let p = &self.wheel_positions;
        let z = Vec3::z();
        // (left, right) per plane: S23 -> (2, 3), S31 -> (3, 1), S12 -> (1, 2)
        let pairs = [(1, 2), (2, 0), (0, 1)];
        let mut out = [Vec3::zeros(); 3];
        for (k, (l, r)) in pairs.into_iter().enumerate() {
            let mut d = p[l] - p[r];
            d.z = 0.0;
            out[k] = hat(&d.cross(&z))?;
        }
        Ok(out)
    }
}

/// Rigid-body parameters of the vehicle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InertiaParams {
    pub mass: f64,
    /// Moment of inertia about the axis normal to the planar plane.
    pub planar_inertia: f64,
    /// Body-frame inertia tensor for the spatial plant.
    pub spatial_inertia: Matrix3<f64>,
}

impl Default for InertiaParams {
    fn default() -> Self {
        Self {
            mass: 4.0,
            planar_inertia: 0.1,
            spatial_inertia: Matrix3::from_diagonal(&Vec3::new(0.1, 0.1, 0.15)),
        }
    }
}

impl InertiaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !(self.planar_inertia > 0.0) {
            return Err(Error::Config("mass and planar inertia must be positive".into()));
        }
        let j = &self.spatial_inertia;
        if (j - j.transpose()).abs().max() > 1e-12 || j.cholesky().is_none() {
            return Err(Error::Config(
                "spatial inertia must be symmetric positive definite".into(),
            ));
        }
        Ok(())
    }
}

/// World positions of the lowest point of each wheel, in wheel order.
///
/// `surface_normal` is the unit outward normal of the work surface (pointing
/// from the surface towards the vehicle side); the lowest point of a wheel is
/// its centre shifted by one wheel radius against it.
pub fn wheel_contact_points<P: RigidPose>(layout: &WheelLayout, pose: &P, surface_normal: &Vec3) -> Vec<Vec3> {
    (0..layout.wheel_count())
        .map(|i| pose.body_to_world(&layout.wheel_center(i)) - layout.wheel_radius * surface_normal)
        .collect()
}

/// Outward normal of the planar work surface (`z` up).
pub fn planar_surface_normal() -> Vec3 {
    Vec3::z()
}

/// Rotation vector (axis · angle) of `r`, with angle in `[0, π]`.
pub fn rotation_log(r: &UnitQuaternion<f64>) -> Vec3 {
    r.scaled_axis()
}
