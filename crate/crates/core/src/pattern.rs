//! Surface radiation patterns: the 3GPP sector pattern and a half-space
//! isotropic pattern.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::geometry::{rotation_matrix, Vec3};

/// Below this value of `x̃² + ỹ²` the azimuth in the local frame is
/// undefined and taken as zero.
const DEGENERATE_AZIMUTH: f64 = 1e-12;

/// Parameters of the 3GPP sector pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectivePatternParams {
    /// Boresight gain, dBi.
    pub g_max: f64,
    /// Overall (and horizontal) attenuation clamp, dB.
    pub g_s: f64,
    /// Vertical attenuation clamp, dB.
    pub g_v: f64,
    /// Horizontal 3 dB beamwidth, radians.
    pub phi_3db: f64,
    /// Vertical 3 dB beamwidth, radians.
    pub theta_3db: f64,
}

impl Default for DirectivePatternParams {
    fn default() -> Self {
        Self {
            g_max: 8.0,
            g_s: 25.0,
            g_v: 25.0,
            phi_3db: 65f64.to_radians(),
            theta_3db: 65f64.to_radians(),
        }
    }
}

impl DirectivePatternParams {
    pub fn validate(&self) -> Result<()> {
        let beam_ok = |b: f64| b > 0.0 && b < std::f64::consts::PI;
        if !(self.g_s > 0.0 && self.g_v > 0.0) {
            return Err(Error::InvalidParameter(
                "pattern clamps g_s and g_v must be positive".into(),
            ));
        }
        if !(beam_ok(self.phi_3db) && beam_ok(self.theta_3db)) {
            return Err(Error::InvalidParameter("3 dB beamwidths must lie in (0, π)".into()));
        }
        if !self.g_max.is_finite() {
            return Err(Error::InvalidParameter("g_max must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatternKind {
    Directive(DirectivePatternParams),
    /// `10·log10(2)` dBi over the front half-space, nothing behind.
    HalfSpaceIsotropic,
}

impl PatternKind {
    pub fn directive() -> Self {
        PatternKind::Directive(DirectivePatternParams::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            PatternKind::Directive(_) => "directive",
            PatternKind::HalfSpaceIsotropic => "isotropic",
        }
    }
}

/// Elevation `θ̃` and azimuth `φ̃` of a global direction, measured in the
/// surface's local frame.
pub fn local_direction_angles(rotation: &Vec3, pointing: &Vec3) -> (f64, f64) {
    let local = rotation_matrix(rotation).transpose() * pointing;
    let (x, y, z) = (local[0], local[1], local[2]);
    let theta = FRAC_PI_2 - z.clamp(-1.0, 1.0).acos();
    let rho2 = x * x + y * y;
    let phi = if rho2 < DEGENERATE_AZIMUTH {
        0.0
    } else {
        let c = (x / rho2.sqrt()).clamp(-1.0, 1.0);
        let sign = if y >= 0.0 { 1.0 } else { -1.0 };
        c.acos() * sign
    };
    (theta, phi)
}

/// Gain in dBi at local angles; `-∞` behind an isotropic half-space surface.
pub fn gain_dbi(kind: &PatternKind, theta: f64, phi: f64) -> f64 {
    match kind {
        PatternKind::Directive(p) => {
            let a_h = -(12.0 * (phi / p.phi_3db).powi(2)).min(p.g_s);
            let a_v = -(12.0 * (theta / p.theta_3db).powi(2)).min(p.g_v);
            p.g_max - (-(a_h + a_v)).min(p.g_s)
        }
        PatternKind::HalfSpaceIsotropic => {
            if phi.abs() <= FRAC_PI_2 {
                2f64.log10() * 10.0
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Linear effective gain of a surface with the given rotation towards a
/// global pointing direction. Never negative, never infinite.
pub fn gain_linear(kind: &PatternKind, rotation: &Vec3, pointing: &Vec3) -> f64 {
    let (theta, phi) = local_direction_angles(rotation, pointing);
    match kind {
        PatternKind::HalfSpaceIsotropic => {
            if phi.abs() <= FRAC_PI_2 {
                2.0
            } else {
                0.0
            }
        }
        PatternKind::Directive(_) => 10f64.powf(gain_dbi(kind, theta, phi) / 10.0),
    }
}
