//! Six-dimensional spatial algebra.
//!
//! Every 6-vector is stacked as (angular; linear): twists are (ω; v), wrenches
//! are (τ; f). Poses map coordinates of the source frame into the target
//! frame, `x_target = R x_source + p`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, Rotation3, Vector3, Vector6};

/// Rigid transform in SE(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// The rotation must be orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        debug_assert!(
            (rotation.transpose() * rotation - Matrix3::identity()).amax() < 1e-9,
            "rotation is not orthonormal"
        );
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// URDF convention: fixed-axis roll, pitch, yaw, i.e. `Rz(yaw) Ry(pitch) Rx(roll)`.
    pub fn from_xyz_rpy(xyz: Vector3<f64>, rpy: Vector3<f64>) -> Self {
        let rotation = Rotation3::from_euler_angles(rpy.x, rpy.y, rpy.z).into_inner();
        Self::new(rotation, xyz)
    }

    /// Roll, pitch, yaw such that `from_xyz_rpy(translation, rpy)` rebuilds this pose.
    pub fn rpy(&self) -> Vector3<f64> {
        let (r, p, y) = Rotation3::from_matrix_unchecked(self.rotation).euler_angles();
        Vector3::new(r, p, y)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn transform_point(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Max-abs entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }

    /// Exponential of the screw motion `axis` scaled by `angle`.
    pub fn exp(axis: &ScrewAxis, angle: f64) -> Self {
        let w = axis.angular();
        let v = axis.linear();
        if w.norm() < 1e-12 {
            return Self::from_translation(v * angle);
        }
        let wx = skew(&w);
        let wx2 = wx * wx;
        let (s, c) = angle.sin_cos();
        let rotation = Matrix3::identity() + wx * s + wx2 * (1.0 - c);
        let g = Matrix3::identity() * angle + wx * (1.0 - c) + wx2 * (angle - s);
        Self {
            rotation,
            translation: g * v,
        }
    }

    pub fn adjoint(&self) -> Matrix6<f64> {
        big_adjoint(self)
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;

    fn mul(self, rhs: &'a Pose) -> Pose {
        self.compose(rhs)
    }
}

macro_rules! spatial_vector {
    ($(#[$meta:meta])* $name:ident, $top:ident, $bottom:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct $name {
            pub $top: Vector3<f64>,
            pub $bottom: Vector3<f64>,
        }

        impl $name {
            pub fn new($top: Vector3<f64>, $bottom: Vector3<f64>) -> Self {
                Self { $top, $bottom }
            }

            pub fn zero() -> Self {
                Self::default()
            }

            pub fn from_vector(v: &Vector6<f64>) -> Self {
                Self {
                    $top: v.fixed_rows::<3>(0).into_owned(),
                    $bottom: v.fixed_rows::<3>(3).into_owned(),
                }
            }

            pub fn to_vector(&self) -> Vector6<f64> {
                let mut v = Vector6::zeros();
                v.fixed_rows_mut::<3>(0).copy_from(&self.$top);
                v.fixed_rows_mut::<3>(3).copy_from(&self.$bottom);
                v
            }

            pub fn is_finite(&self) -> bool {
                self.$top.iter().chain(self.$bottom.iter()).all(|x| x.is_finite())
            }
        }

        impl From<$name> for Vector6<f64> {
            fn from(value: $name) -> Self {
                value.to_vector()
            }
        }

        impl From<Vector6<f64>> for $name {
            fn from(value: Vector6<f64>) -> Self {
                Self::from_vector(&value)
            }
        }
    };
}

spatial_vector!(
    /// Body twist (ω; v).
    Twist,
    angular,
    linear
);
spatial_vector!(
    /// Body acceleration (ω̇; v̇), the time derivative of the body twist.
    Accel,
    angular,
    linear
);
spatial_vector!(
    /// Body wrench (τ; f).
    Wrench,
    moment,
    force
);

/// Skew-symmetric matrix with `skew(w) * b == w.cross(b)`.
pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Adjoint of a pose, `[[R, 0], [skew(p) R, R]]`. Maps twists from the source
/// frame of `t` into its target frame; its transpose maps wrenches back.
pub fn big_adjoint(t: &Pose) -> Matrix6<f64> {
    let r = t.rotation;
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    ad.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(skew(&t.translation) * r));
    ad
}

/// Lie bracket matrix `[[skew(ω), 0], [skew(v), skew(ω)]]`.
pub fn little_adjoint(v: &Twist) -> Matrix6<f64> {
    let w = skew(&v.angular);
    let mut ad = Matrix6::zeros();
    ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&w);
    ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    ad.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&skew(&v.linear));
    ad
}

/// Mass and rotational inertia about the center of mass, in a body frame
/// located at the center of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialInertia {
    mass: f64,
    rotational: Matrix3<f64>,
}

impl SpatialInertia {
    pub fn new(mass: f64, rotational: Matrix3<f64>) -> Result<Self, &'static str> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err("mass must be positive");
        }
        if (rotational - rotational.transpose()).amax() > 1e-12 {
            return Err("rotational inertia is not symmetric");
        }
        if rotational.cholesky().is_none() {
            return Err("rotational inertia is not positive definite");
        }
        Ok(Self { mass, rotational })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn rotational(&self) -> &Matrix3<f64> {
        &self.rotational
    }

    /// The 6×6 matrix `diag(ℐ, m I₃)`.
    pub fn matrix(&self) -> Matrix6<f64> {
        let mut g = Matrix6::zeros();
        g.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotational);
        g.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Matrix3::identity() * self.mass));
        g
    }
}

/// Joint screw axis (ω̂; v̂) expressed in the child link frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScrewAxis(Vector6<f64>);

impl ScrewAxis {
    /// Rotation about the unit `direction` through `point`.
    pub fn revolute(direction: Vector3<f64>, point: Vector3<f64>) -> Self {
        let w = direction.normalize();
        let v = point.cross(&w);
        let mut s = Vector6::zeros();
        s.fixed_rows_mut::<3>(0).copy_from(&w);
        s.fixed_rows_mut::<3>(3).copy_from(&v);
        Self(s)
    }

    pub fn from_vector(v: Vector6<f64>) -> Self {
        Self(v)
    }

    pub fn as_vector(&self) -> &Vector6<f64> {
        &self.0
    }

    pub fn angular(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn linear(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    /// Re-express the axis in another frame: `Ad_T A`.
    pub fn transformed(&self, t: &Pose) -> Self {
        Self(big_adjoint(t) * self.0)
    }
}

/// Child-frame-from-parent-frame transform of a joint at `angle`.
///
/// `rest_offset` is the child frame expressed in the parent frame at zero
/// angle. A `None` axis denotes a fixed joint.
pub fn joint_transform(rest_offset: &Pose, axis: Option<&ScrewAxis>, angle: f64) -> Pose {
    match axis {
        Some(a) => Pose::exp(a, -angle).compose(&rest_offset.inverse()),
        None => rest_offset.inverse(),
    }
}
