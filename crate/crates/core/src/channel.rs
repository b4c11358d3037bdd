//! Far-field line-of-sight channel: pointing vectors, steering vectors,
//! stacked per-surface channels and their derivatives with respect to the
//! target azimuth.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{global_antenna_positions, ArrayLayout, LocalArray, SurfacePose, Vec3};
use crate::pattern::{gain_linear, PatternKind};
use crate::scenario::Target;

/// Propagation speed used to turn carrier frequency into wavelength.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Step of the central difference used for the pattern amplitude term.
pub const AMPLITUDE_FD_STEP: f64 = 1e-5;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavelength(f64);

impl Wavelength {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("wavelength must be > 0, got {lambda}")));
        }
        Ok(Self(lambda))
    }

    pub fn from_frequency(hz: f64) -> Result<Self> {
        if !(hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "carrier frequency must be > 0, got {hz}"
            )));
        }
        Self::new(SPEED_OF_LIGHT / hz)
    }

    pub fn meters(&self) -> f64 {
        self.0
    }

    pub fn wavenumber(&self) -> f64 {
        std::f64::consts::TAU / self.0
    }
}

/// Everything needed to turn a layout and an azimuth into a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub pattern: PatternKind,
    pub wavelength: Wavelength,
    /// Include `d√g/dφ` in the channel derivative. Turning it off keeps only
    /// the steering-phase term.
    pub amplitude_derivative: bool,
}

impl ChannelModel {
    pub fn new(pattern: PatternKind, wavelength: Wavelength) -> Self {
        Self {
            pattern,
            wavelength,
            amplitude_derivative: true,
        }
    }

    fn amplitude(&self, pose: &SurfacePose, phi: f64) -> f64 {
        gain_linear(&self.pattern, &pose.rotation, &pointing_vector(phi)).sqrt()
    }

    fn amplitude_slope(&self, pose: &SurfacePose, phi: f64) -> f64 {
        if !self.amplitude_derivative {
            return 0.0;
        }
        match self.pattern {
            // piecewise constant; at the front/back edge the one-sided slope
            // from the front is zero as well
            PatternKind::HalfSpaceIsotropic => 0.0,
            PatternKind::Directive(_) => {
                let up = self.amplitude(pose, phi + AMPLITUDE_FD_STEP);
                let down = self.amplitude(pose, phi - AMPLITUDE_FD_STEP);
                (up - down) / (2.0 * AMPLITUDE_FD_STEP)
            }
        }
    }
}

/// Unit vector of the horizontal direction `φ`.
pub fn pointing_vector(phi: f64) -> Vec3 {
    Vec3::new(phi.cos(), phi.sin(), 0.0)
}

/// `d f / dφ`.
pub fn pointing_derivative(phi: f64) -> Vec3 {
    Vec3::new(-phi.sin(), phi.cos(), 0.0)
}

/// Per-antenna phase response `exp(-j k fᵀ r)` of one surface.
pub fn steering_vector(pose: &SurfacePose, local: &LocalArray, phi: f64, lambda: Wavelength) -> CVector {
    let k = lambda.wavenumber();
    let f = pointing_vector(phi);
    let pos = global_antenna_positions(pose, local);
    CVector::from_iterator(pos.len(), pos.iter().map(|r| Complex64::from_polar(1.0, -k * f.dot(r))))
}

/// Stacked channel `h(φ)` over all surfaces.
pub fn channel_vector(layout: &ArrayLayout, model: &ChannelModel, phi: f64) -> CVector {
    let mut h = CVector::zeros(layout.num_antennas());
    let mut row = 0;
    for s in layout.surfaces() {
        let amp = model.amplitude(&s.pose, phi);
        let a = steering_vector(&s.pose, &s.local, phi, model.wavelength);
        for (i, v) in a.iter().enumerate() {
            h[row + i] = v * amp;
        }
        row += a.len();
    }
    h
}

/// `(h(φ), ∂h/∂φ)` in one pass.
pub fn channel_and_derivative(layout: &ArrayLayout, model: &ChannelModel, phi: f64) -> (CVector, CVector) {
    let nb = layout.num_antennas();
    let k = model.wavelength.wavenumber();
    let f = pointing_vector(phi);
    let df = pointing_derivative(phi);
    let mut h = CVector::zeros(nb);
    let mut dh = CVector::zeros(nb);
    let mut row = 0;
    for s in layout.surfaces() {
        let amp = model.amplitude(&s.pose, phi);
        let slope = model.amplitude_slope(&s.pose, phi);
        for r in global_antenna_positions(&s.pose, &s.local) {
            let a = Complex64::from_polar(1.0, -k * f.dot(&r));
            let phase_rate = Complex64::new(0.0, -k * df.dot(&r));
            h[row] = a * amp;
            dh[row] = a * (phase_rate * amp + slope);
            row += 1;
        }
    }
    (h, dh)
}

pub fn channel_derivative(layout: &ArrayLayout, model: &ChannelModel, phi: f64) -> CVector {
    channel_and_derivative(layout, model, phi).1
}

/// Two-way channel `G = H diag(ρ) Hᴴ`.
pub fn two_way_channel(layout: &ArrayLayout, model: &ChannelModel, targets: &[Target]) -> CMatrix {
    let nb = layout.num_antennas();
    let mut g = CMatrix::zeros(nb, nb);
    for t in targets {
        let h = channel_vector(layout, model, t.phi());
        g += (&h * t.rho()) * h.adjoint();
    }
    g
}

/// Received echo `Y = H Z Hᴴ X + N` with i.i.d. circularly-symmetric complex
/// Gaussian noise of per-entry variance `noise_var`.
pub fn simulate_echo(
    layout: &ArrayLayout,
    model: &ChannelModel,
    targets: &[Target],
    probe: &CMatrix,
    noise_var: f64,
    seed: u64,
) -> Result<CMatrix> {
    let nb = layout.num_antennas();
    if probe.nrows() != nb {
        return Err(Error::DimensionMismatch(format!(
            "probe has {} rows, layout has {} antennas",
            probe.nrows(),
            nb
        )));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be >= 0, got {noise_var}"
        )));
    }
    let mut y = two_way_channel(layout, model, targets) * probe;
    if noise_var > 0.0 {
        let normal = Normal::new(0.0, (noise_var / 2.0).sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // column-major fill order keeps the stream layout-independent
        for v in y.iter_mut() {
            *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(y)
}
