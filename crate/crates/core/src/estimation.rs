//! Fisher information and Cramér-Rao bounds for horizontal DoA estimation.
//!
//! With `G(φ) = Σ_k ρ_k h_k h_kᴴ` the two-way channel and `Ġ_k` its
//! derivative with respect to `φ_k`, the information matrix of the echo
//! `Y = G X + N` (noise variance `σ²` per entry, reflection coefficients
//! known) is
//!
//! ```text
//! F_ij = (2L/σ²) · Re tr(Ġ_i S_X Ġ_jᴴ),   Ġ_k = ρ_k (ḣ_k h_kᴴ + h_k ḣ_kᴴ)
//! ```
//!
//! `Ġ_k` has rank two, so each entry reduces to a trace of a product of two
//! 2×2 matrices built from inner products of `h`, `ḣ` and `S_X`-weighted
//! vectors; no `NB×NB` product is formed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::channel::{channel_and_derivative, CMatrix, CVector, ChannelModel};
use crate::error::{Error, Result};
use crate::geometry::ArrayLayout;
use crate::scenario::Target;

/// Largest acceptable condition number of the FIM.
pub const MAX_CONDITION: f64 = 1e12;

/// Objective value reported for geometries whose FIM is unusable, rad².
pub const SENTINEL_CRB: f64 = 1e12;

/// Sample covariance `S_X = X Xᴴ / L` of the probe.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    ScaledIdentity { dim: usize, scale: f64 },
    Full(CMatrix),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::ScaledIdentity { dim, .. } => *dim,
            Covariance::Full(s) => s.nrows(),
        }
    }

    /// `S v`.
    pub fn apply(&self, v: &CVector) -> CVector {
        match self {
            Covariance::ScaledIdentity { scale, .. } => v * Complex64::from(*scale),
            Covariance::Full(s) => s * v,
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Covariance::ScaledIdentity { dim, scale } => *dim as f64 * scale,
            Covariance::Full(s) => s.trace().re,
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        match self {
            Covariance::ScaledIdentity { dim, scale } => CMatrix::identity(*dim, *dim) * Complex64::from(*scale),
            Covariance::Full(s) => s.clone(),
        }
    }

    fn scaled(&self, c: f64) -> Self {
        match self {
            Covariance::ScaledIdentity { dim, scale } => Covariance::ScaledIdentity {
                dim: *dim,
                scale: scale * c,
            },
            Covariance::Full(s) => Covariance::Full(s * Complex64::from(c)),
        }
    }
}

/// Transmitted probing waveform. In ideal mode only the covariance exists.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSignal {
    matrix: Option<CMatrix>,
    snapshots: usize,
    power: f64,
    covariance: Covariance,
}

impl ProbeSignal {
    /// Realized waveform `X` (`NB × L`).
    pub fn from_matrix(x: CMatrix, power: f64) -> Result<Self> {
        let (nb, l) = x.shape();
        if l <= nb {
            return Err(Error::InvalidParameter(format!(
                "probe needs more snapshots than antennas ({l} <= {nb})"
            )));
        }
        let s = (&x * x.adjoint()) / Complex64::from(l as f64);
        Ok(Self {
            matrix: Some(x),
            snapshots: l,
            power,
            covariance: Covariance::Full(s),
        })
    }

    /// `S_X = (P/NB)·I`.
    pub fn ideal(power: f64, snapshots: usize, nb: usize) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidParameter(format!("power must be > 0, got {power}")));
        }
        if nb == 0 || snapshots <= nb {
            return Err(Error::InvalidParameter(format!(
                "probe needs more snapshots than antennas ({snapshots} <= {nb})"
            )));
        }
        Ok(Self {
            matrix: None,
            snapshots,
            power,
            covariance: Covariance::ScaledIdentity {
                dim: nb,
                scale: power / nb as f64,
            },
        })
    }

    pub fn matrix(&self) -> Option<&CMatrix> {
        self.matrix.as_ref()
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn dim(&self) -> usize {
        self.covariance.dim()
    }

    pub fn covariance(&self) -> &Covariance {
        &self.covariance
    }

    pub fn covariance_trace(&self) -> f64 {
        self.covariance.trace()
    }

    /// Same waveform with power multiplied by `c` (`X → √c X`).
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrix: self.matrix.as_ref().map(|x| x * Complex64::from(c.sqrt())),
            snapshots: self.snapshots,
            power: self.power * c,
            covariance: self.covariance.scaled(c),
        }
    }

    /// `‖vᴴ X‖²`, i.e. `L · vᴴ S_X v`.
    fn frame_energy(&self, v: &CVector) -> f64 {
        match &self.matrix {
            Some(x) => (v.adjoint() * x).norm_squared(),
            None => self.snapshots as f64 * inner(v, &self.covariance.apply(v)).re,
        }
    }
}

/// `aᴴ b`.
fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn check_inputs(layout: &ArrayLayout, probe: &ProbeSignal, noise_var: f64) -> Result<()> {
    if probe.dim() != layout.num_antennas() {
        return Err(Error::DimensionMismatch(format!(
            "probe has {} antennas, layout has {}",
            probe.dim(),
            layout.num_antennas()
        )));
    }
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be > 0, got {noise_var}"
        )));
    }
    Ok(())
}

/// Fisher information matrix of the target azimuths (`K × K`).
pub fn fisher_information(
    layout: &ArrayLayout,
    model: &ChannelModel,
    targets: &[Target],
    probe: &ProbeSignal,
    noise_var: f64,
) -> Result<DMatrix<f64>> {
    check_inputs(layout, probe, noise_var)?;
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no targets".into()));
    }
    let k = targets.len();
    let chans: Vec<(CVector, CVector)> = targets
        .iter()
        .map(|t| channel_and_derivative(layout, model, t.phi()))
        .collect();
    let cov = probe.covariance();
    let weighted: Vec<(CVector, CVector)> = chans.iter().map(|(h, dh)| (cov.apply(h), cov.apply(dh))).collect();

    let scale = 2.0 * probe.snapshots() as f64 / noise_var;
    let mut f = DMatrix::zeros(k, k);
    for i in 0..k {
        let (hi, dhi) = &chans[i];
        for j in i..k {
            let (hj, dhj) = &chans[j];
            let (shj, sdhj) = &weighted[j];
            // D = U_jᴴ U_i with U = ρ[ḣ, h]
            let d = [[inner(dhj, dhi), inner(dhj, hi)], [inner(hj, dhi), inner(hj, hi)]];
            // C = V_iᴴ S V_j with V = [h, ḣ]
            let c = [[inner(hi, shj), inner(hi, sdhj)], [inner(dhi, shj), inner(dhi, sdhj)]];
            let mut tr = Complex64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    tr += d[a][b] * c[b][a];
                }
            }
            let rho = targets[j].rho().conj() * targets[i].rho();
            let v = scale * (rho * tr).re;
            f[(i, j)] = v;
            f[(j, i)] = v;
        }
    }
    Ok(f)
}

/// `diag(F⁻¹)`: the per-target CRBs, rad².
pub fn crb_per_target(fim: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !fim.is_square() || fim.nrows() == 0 {
        return Err(Error::DimensionMismatch("FIM must be square and non-empty".into()));
    }
    let sym = (fim + fim.transpose()) * 0.5;
    if !sym.iter().all(|v| v.is_finite()) {
        return Err(Error::Unidentifiable {
            condition: f64::INFINITY,
        });
    }
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Unidentifiable { condition });
    }
    let k = fim.nrows();
    let v = &eig.eigenvectors;
    Ok(DVector::from_fn(k, |r, _| {
        (0..k).map(|m| v[(r, m)] * v[(r, m)] / eig.eigenvalues[m]).sum()
    }))
}

/// `tr(F⁻¹)`, rad².
pub fn crb_total(fim: &DMatrix<f64>) -> Result<f64> {
    Ok(crb_per_target(fim)?.sum())
}

/// Total CRB, or [`SENTINEL_CRB`] when the geometry is unidentifiable.
pub fn crb_or_sentinel(
    layout: &ArrayLayout,
    model: &ChannelModel,
    targets: &[Target],
    probe: &ProbeSignal,
    noise_var: f64,
) -> f64 {
    fisher_information(layout, model, targets, probe, noise_var)
        .and_then(|f| crb_total(&f))
        .unwrap_or(SENTINEL_CRB)
}

/// Power gain `‖h_kᴴ X‖²` and geometric gain `‖ḣ_k‖` of every target.
pub fn gain_decomposition(
    layout: &ArrayLayout,
    model: &ChannelModel,
    targets: &[Target],
    probe: &ProbeSignal,
) -> (Vec<f64>, Vec<f64>) {
    targets
        .iter()
        .map(|t| {
            let (h, dh) = channel_and_derivative(layout, model, t.phi());
            (probe.frame_energy(&h), dh.norm())
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport {
    pub total: f64,
    pub per_target: Vec<f64>,
    pub power_gain: Vec<f64>,
    pub geometric_gain: Vec<f64>,
}

pub fn crb_report(
    layout: &ArrayLayout,
    model: &ChannelModel,
    targets: &[Target],
    probe: &ProbeSignal,
    noise_var: f64,
) -> Result<CrbReport> {
    let fim = fisher_information(layout, model, targets, probe, noise_var)?;
    let per_target = crb_per_target(&fim)?;
    let (power_gain, geometric_gain) = gain_decomposition(layout, model, targets, probe);
    Ok(CrbReport {
        total: per_target.sum(),
        per_target: per_target.iter().copied().collect(),
        power_gain,
        geometric_gain,
    })
}

/// How the single-surface closed form treats the geometric gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// `σ²/(2|ρ|²L) · [p · ‖ḣ‖]⁻¹`, the bare power/geometric product with a
    /// first-power geometric gain.
    Printed,
    /// `σ²/(2|ρ|²L) · [p‖ḣ‖² + ‖h‖² ḣᴴSḣ − ‖h‖² |hᴴSḣ|² / p]⁻¹`; for a white
    /// probe this is `σ²/(4|ρ|²L · p · ‖ḣ‖²)`.
    Resolved,
}

struct SingleSurface {
    h: CVector,
    dh: CVector,
    rho: Complex64,
}

fn single_surface_channel(
    layout: &ArrayLayout,
    model: &ChannelModel,
    targets: &[Target],
    probe: &ProbeSignal,
    noise_var: f64,
) -> Result<SingleSurface> {
    check_inputs(layout, probe, noise_var)?;
    if layout.num_surfaces() != 1 {
        return Err(Error::Precondition(format!(
            "closed form needs exactly one surface, got {}",
            layout.num_surfaces()
        )));
    }
    if layout.surfaces()[0].pose.position.norm() > 1e-12 {
        return Err(Error::Precondition(
            "surface centre must be the reference origin".into(),
        ));
    }
    let [target] = targets else {
        return Err(Error::Precondition(format!(
            "closed form needs exactly one target, got {}",
            targets.len()
        )));
    };
    let (h, dh) = channel_and_derivative(layout, model, target.phi());
    if h.norm() == 0.0 {
        return Err(Error::Unidentifiable {
            condition: f64::INFINITY,
        });
    }
    if inner(&h, &dh).norm() > 1e-9 * h.norm() * dh.norm() {
        return Err(Error::Precondition(
            "channel and its derivative are not orthogonal (hᴴḣ ≠ 0)".into(),
        ));
    }
    Ok(SingleSurface {
        h,
        dh,
        rho: target.rho(),
    })
}

/// Single-target CRB with the reflection coefficient treated as a nuisance,
/// written with `A = hhᴴ` and `Ȧ = ḣhᴴ + hḣᴴ`:
///
/// ```text
/// σ² tr(AᴴA S) / (2|ρ|²L (tr(ȦᴴȦ S) tr(AᴴA S) − |tr(ȦᴴA S)|²))
/// ```
///
/// Evaluated with explicit `NB×NB` products.
pub fn crb_single_surface_full(
    layout: &ArrayLayout,
    model: &ChannelModel,
    target: &Target,
    probe: &ProbeSignal,
    noise_var: f64,
) -> Result<f64> {
    check_inputs(layout, probe, noise_var)?;
    let (h, dh) = channel_and_derivative(layout, model, target.phi());
    let s = probe.covariance().to_matrix();
    let a = &h * h.adjoint();
    let da = &dh * h.adjoint() + &h * dh.adjoint();
    let t_aa = (a.adjoint() * &a * &s).trace().re;
    let t_dd = (da.adjoint() * &da * &s).trace().re;
    let t_da = (da.adjoint() * &a * &s).trace();
    let denom = 2.0 * target.rho().norm_sqr() * probe.snapshots() as f64 * (t_dd * t_aa - t_da.norm_sqr());
    if !(denom > 0.0) {
        return Err(Error::Unidentifiable {
            condition: f64::INFINITY,
        });
    }
    Ok(noise_var * t_aa / denom)
}

/// Closed-form CRB of a single surface centred on the reference origin
/// observing one target, in terms of the power gain per snapshot
/// `p = hᴴ S_X h` and the geometric gain `‖ḣ‖`.
pub fn crb_closed_form_single(
    layout: &ArrayLayout,
    model: &ChannelModel,
    target: &Target,
    probe: &ProbeSignal,
    noise_var: f64,
    form: ClosedForm,
) -> Result<f64> {
    let SingleSurface { h, dh, rho } =
        single_surface_channel(layout, model, std::slice::from_ref(target), probe, noise_var)?;
    let cov = probe.covariance();
    let sh = cov.apply(&h);
    let sdh = cov.apply(&dh);
    let power = inner(&h, &sh).re;
    let geometric = dh.norm();
    let bracket = match form {
        ClosedForm::Printed => power * geometric,
        ClosedForm::Resolved => {
            power * geometric * geometric + h.norm_squared() * inner(&dh, &sdh).re
                - h.norm_squared() * inner(&h, &sdh).norm_sqr() / power
        }
    };
    if !(bracket > 0.0) {
        return Err(Error::Unidentifiable {
            condition: f64::INFINITY,
        });
    }
    Ok(noise_var / (2.0 * rho.norm_sqr() * probe.snapshots() as f64) / bracket)
}
