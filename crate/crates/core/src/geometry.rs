//! Surface poses, rotation matrices and placement constraints.
//!
//! Every movable surface has a centre `q` in the global frame (origin at the
//! base-station reference point) and three Euler angles `u = [α, β, γ]`
//! describing rotations about the x, y and z axes. Antenna positions and the
//! surface normal are obtained by rotating the surface's local description.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Rotation matrix for Euler angles `[α, β, γ]`.
///
/// The composed matrix is written out entry by entry; it is a proper
/// rotation for every finite input.
pub fn rotation_matrix(rotation: &Vec3) -> Matrix3<f64> {
    let (sa, ca) = rotation[0].sin_cos();
    let (sb, cb) = rotation[1].sin_cos();
    let (sg, cg) = rotation[2].sin_cos();
    Matrix3::new(
        ca * cg,
        ca * sg,
        -sa,
        sb * sa * cg - cb * sg,
        sb * sa * sg + cb * cg,
        ca * sb,
        cb * sa * cg + sb * sg,
        cb * sa * sg - sb * cg,
        ca * cb,
    )
}

/// Position and orientation of one movable surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePose {
    /// Centre of the surface in the global frame, meters.
    pub position: Vec3,
    /// Euler angles `[α, β, γ]` in radians.
    pub rotation: Vec3,
}

impl SurfacePose {
    pub fn new(position: Vec3, rotation: Vec3) -> Self {
        Self { position, rotation }
    }

    /// Same pose with every rotation angle wrapped into `[0, 2π)`.
    pub fn canonicalized(&self) -> Self {
        Self {
            position: self.position,
            rotation: self.rotation.map(wrap_angle),
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rotation_matrix(&self.rotation)
    }
}

/// Antenna offsets and outward normal of a surface in its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalArray {
    offsets: Vec<Vec3>,
    normal: Vec3,
}

impl LocalArray {
    pub fn new(offsets: Vec<Vec3>, normal: Vec3) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidParameter("a surface needs at least one antenna".into()));
        }
        if offsets.iter().any(|o| !o.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter("non-finite antenna offset".into()));
        }
        if (normal.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "local normal must have unit norm, got {}",
                normal.norm()
            )));
        }
        Ok(Self { offsets, normal })
    }

    /// Uniform linear array of `n` antennas centred on the origin along the
    /// local y axis, facing the local x axis.
    ///
    /// The normal coincides with the radiation-pattern boresight so that the
    /// placement constraints and the gain model agree on which side is the
    /// front of the surface.
    pub fn ula(n: usize, spacing: f64) -> Result<Self> {
        if n == 0 || !(spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ULA needs n >= 1 and spacing > 0 (n = {n}, spacing = {spacing})"
            )));
        }
        let mid = (n as f64 - 1.0) / 2.0;
        let offsets = (0..n)
            .map(|i| Vec3::new(0.0, (i as f64 - mid) * spacing, 0.0))
            .collect();
        Self::new(offsets, Vec3::x())
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// `r = q + R(u) r̄` for every antenna of the surface.
pub fn global_antenna_positions(pose: &SurfacePose, local: &LocalArray) -> Vec<Vec3> {
    let r = pose.rotation_matrix();
    local.offsets.iter().map(|o| pose.position + r * o).collect()
}

/// Outward normal of the surface in the global frame, `R(u) n̄`.
pub fn surface_normal(pose: &SurfacePose, local: &LocalArray) -> Vec3 {
    pose.rotation_matrix() * local.normal
}

/// One surface of an [`ArrayLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub pose: SurfacePose,
    pub local: LocalArray,
}

/// The full antenna configuration at the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    surfaces: Vec<Surface>,
}

impl ArrayLayout {
    pub fn new(surfaces: Vec<Surface>) -> Result<Self> {
        if surfaces.is_empty() {
            return Err(Error::InvalidParameter("layout needs at least one surface".into()));
        }
        Ok(Self { surfaces })
    }

    /// All surfaces share the same local array.
    pub fn uniform(poses: &[SurfacePose], local: &LocalArray) -> Result<Self> {
        Self::new(
            poses
                .iter()
                .map(|&pose| Surface {
                    pose,
                    local: local.clone(),
                })
                .collect(),
        )
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn surfaces_mut(&mut self) -> &mut [Surface] {
        &mut self.surfaces
    }

    pub fn num_surfaces(&self) -> usize {
        self.surfaces.len()
    }

    /// Total antenna count `NB`.
    pub fn num_antennas(&self) -> usize {
        self.surfaces.iter().map(|s| s.local.len()).sum()
    }

    pub fn poses(&self) -> impl Iterator<Item = &SurfacePose> {
        self.surfaces.iter().map(|s| &s.pose)
    }

    pub fn normals(&self) -> Vec<Vec3> {
        self.surfaces
            .iter()
            .map(|s| surface_normal(&s.pose, &s.local))
            .collect()
    }

    /// Rigid translation of every surface by `t`.
    pub fn translated(&self, t: &Vec3) -> Self {
        let mut out = self.clone();
        for s in &mut out.surfaces {
            s.pose.position += t;
        }
        out
    }
}

/// Cubic movement region `[-A/2, A/2]³` centred on the reference origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteSpace {
    side: f64,
}

impl SiteSpace {
    pub fn new(side: f64) -> Result<Self> {
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::InvalidParameter(format!("site side must be > 0, got {side}")));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn half_side(&self) -> f64 {
        self.side / 2.0
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let h = self.half_side();
        p.iter().all(|&c| (-h..=h).contains(&c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementConstraints {
    d_min: f64,
}

impl MovementConstraints {
    pub fn new(d_min: f64) -> Result<Self> {
        if !(d_min > 0.0) || !d_min.is_finite() {
            return Err(Error::InvalidParameter(format!("d_min must be > 0, got {d_min}")));
        }
        Ok(Self { d_min })
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }
}

/// A single violated placement constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Violation {
    /// Surface `other` lies in front of surface `surface`:
    /// `n(u_i)ᵀ(q_j − q_i) > 0`.
    Reflection { surface: usize, other: usize },
    /// Surface faces the central processing unit: `n(u_i)ᵀ q_i < 0`.
    Blockage { surface: usize },
    /// Centres closer than `d_min`; `first < second`.
    Distance { first: usize, second: usize },
    /// Centre outside the site cube.
    OutsideSite { surface: usize },
}

impl Violation {
    /// Whether the violation belongs to the pairwise/rotation set that the
    /// optimizer penalizes (the box is enforced by projection instead).
    pub fn is_penalized(&self) -> bool {
        !matches!(self, Violation::OutsideSite { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn penalized(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.is_penalized())
    }
}

/// Evaluates the non-reflection, non-blockage, minimum-distance and site-box
/// constraints on surface centres.
pub fn check_constraints(layout: &ArrayLayout, site: &SiteSpace, cons: &MovementConstraints) -> ConstraintReport {
    let normals = layout.normals();
    let centres: Vec<Vec3> = layout.poses().map(|p| p.position).collect();
    let b = centres.len();
    let mut violations = Vec::new();

    for i in 0..b {
        for j in 0..b {
            if i != j && !(normals[i].dot(&(centres[j] - centres[i])) <= 0.0) {
                violations.push(Violation::Reflection { surface: i, other: j });
            }
        }
    }
    for i in 0..b {
        if !(normals[i].dot(&centres[i]) >= 0.0) {
            violations.push(Violation::Blockage { surface: i });
        }
    }
    for i in 0..b {
        for j in i + 1..b {
            if !((centres[i] - centres[j]).norm() >= cons.d_min()) {
                violations.push(Violation::Distance { first: i, second: j });
            }
        }
    }
    for (i, c) in centres.iter().enumerate() {
        if !site.contains(c) {
            violations.push(Violation::OutsideSite { surface: i });
        }
    }
    ConstraintReport { violations }
}
