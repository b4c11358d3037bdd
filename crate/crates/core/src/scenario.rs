//! Sensing regions, their equal-area partition into subregions, the typical
//! targets placed at subregion centroids, and probe-signal construction.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{CMatrix, ChannelModel, Wavelength};
use crate::error::{Error, Result};
use crate::estimation::{crb_or_sentinel, crb_report, CrbReport, ProbeSignal};
use crate::geometry::{ArrayLayout, MovementConstraints, SiteSpace};

/// A point target as seen from the base-station reference origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    phi: f64,
    range: f64,
    rho: Complex64,
}

impl Target {
    pub fn new(phi: f64, range: f64, rho: Complex64) -> Result<Self> {
        if !(-PI..=PI).contains(&phi) {
            return Err(Error::InvalidParameter(format!("target azimuth {phi} outside [-π, π]")));
        }
        if !(range >= 0.0) || !range.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "target range must be >= 0, got {range}"
            )));
        }
        if !(rho.norm() > 0.0) || !rho.norm().is_finite() {
            return Err(Error::InvalidParameter(format!(
                "reflection coefficient must be non-zero, got {rho}"
            )));
        }
        Ok(Self { phi, range, rho })
    }

    /// Horizontal direction of arrival, radians.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn rho(&self) -> Complex64 {
        self.rho
    }

    pub fn with_rho(&self, rho: Complex64) -> Result<Self> {
        Self::new(self.phi, self.range, rho)
    }
}

/// A circular region on the ground plane, split into `subregions` cells of
/// equal area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingRegion {
    pub center: [f64; 2],
    pub radius: f64,
    pub subregions: usize,
}

impl SensingRegion {
    pub fn new(center: [f64; 2], radius: f64, subregions: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "region radius must be > 0, got {radius}"
            )));
        }
        if subregions == 0 {
            return Err(Error::InvalidParameter("a region needs at least one subregion".into()));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("region centre must be finite".into()));
        }
        Ok(Self {
            center,
            radius,
            subregions,
        })
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// An annular sector `[inner, outer] × [start, start + span)` in the
/// region's local polar coordinates. A full ring has `span = 2π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub inner: f64,
    pub outer: f64,
    pub start: f64,
    pub span: f64,
}

impl Cell {
    pub fn area(&self) -> f64 {
        0.5 * self.span * (self.outer * self.outer - self.inner * self.inner)
    }

    /// Area centroid relative to the region centre.
    pub fn centroid(&self) -> [f64; 2] {
        if self.span >= TAU {
            return [0.0, 0.0];
        }
        let (a, b) = (self.inner, self.outer);
        let half = self.span / 2.0;
        let radial = 2.0 / 3.0 * (b.powi(3) - a.powi(3)) / (b * b - a * a) * half.sin() / half;
        let mid = self.start + half;
        [radial * mid.cos(), radial * mid.sin()]
    }

    /// Whether a point relative to the region centre lies inside the cell.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let r = p[0].hypot(p[1]);
        if r < self.inner || r > self.outer {
            return false;
        }
        if self.span >= TAU || r == 0.0 {
            return true;
        }
        let rel = (p[1].atan2(p[0]) - self.start).rem_euclid(TAU);
        rel <= self.span
    }

    /// Ratio of radial extent to arc length at the mid radius, folded so
    /// that 1 is a square-ish cell and larger is worse.
    fn elongation(&self) -> f64 {
        if self.span >= TAU {
            // full disk around the centre is round; a full ring is not a
            // usable cell shape
            return if self.inner == 0.0 { 1.0 } else { f64::INFINITY };
        }
        let radial = self.outer - self.inner;
        let arc = 0.5 * (self.inner + self.outer) * self.span;
        let r = radial / arc;
        r.max(1.0 / r)
    }
}

/// Cell counts per ring, largest-remainder rounding of weights `w` to a
/// total of `total`, at least `floor` per ring.
fn apportion(total: usize, weights: &[f64], floor: usize) -> Option<Vec<usize>> {
    if total < floor * weights.len() {
        return None;
    }
    let spare = total - floor * weights.len();
    let wsum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / wsum * spare as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = spare - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = exact[i] - exact[i].floor();
        let rj = exact[j] - exact[j].floor();
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    Some(counts.into_iter().map(|c| c + floor).collect())
}

fn cells_for_counts(radius: f64, total: usize, counts: &[usize]) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(total);
    let mut cumulative = 0usize;
    let mut inner = 0.0;
    for (ring, &n) in counts.iter().enumerate() {
        cumulative += n;
        let outer = if cumulative == total {
            radius
        } else {
            radius * (cumulative as f64 / total as f64).sqrt()
        };
        let span = TAU / n as f64;
        // stagger alternate rings by half a sector
        let offset = if ring % 2 == 1 { span / 2.0 } else { 0.0 };
        for s in 0..n {
            cells.push(Cell {
                inner,
                outer,
                start: offset + s as f64 * span,
                span: if n == 1 { TAU } else { span },
            });
        }
        inner = outer;
    }
    cells
}

/// Splits a disk of the given radius into `k` equal-area annular sectors.
///
/// Ring boundaries sit at `r·sqrt(C_i / k)` where `C_i` is the cumulative
/// cell count, which makes every cell exactly `πr²/k`. The number of rings and
/// their cell counts are picked among a small family of candidates so that
/// the worst cell elongation is minimal and every centroid stays inside its
/// own cell.
pub fn partition_cells(radius: f64, k: usize) -> Vec<Cell> {
    if k == 1 {
        return vec![Cell {
            inner: 0.0,
            outer: radius,
            start: 0.0,
            span: TAU,
        }];
    }
    let max_rings = ((k as f64).sqrt().ceil() as usize + 1).min(k);
    let mut best: Option<(f64, Vec<Cell>)> = None;
    for rings in 1..=max_rings {
        for central in [false, true] {
            let counts = if central {
                if rings < 2 {
                    continue;
                }
                let weights: Vec<f64> = (1..rings).map(|i| (2 * i + 1) as f64).collect();
                match apportion(k - 1, &weights, 3) {
                    Some(mut c) => {
                        c.insert(0, 1);
                        c
                    }
                    None => continue,
                }
            } else {
                let weights: Vec<f64> = (0..rings).map(|i| (2 * i + 1) as f64).collect();
                match apportion(k, &weights, 2) {
                    Some(c) => c,
                    None => continue,
                }
            };
            let cells = cells_for_counts(radius, k, &counts);
            if !cells.iter().all(|c| c.contains(c.centroid())) {
                continue;
            }
            let cost = cells.iter().map(Cell::elongation).fold(0.0, f64::max);
            if best.as_ref().is_none_or(|(b, _)| cost < *b - 1e-12) {
                best = Some((cost, cells));
            }
        }
    }
    // a single pie of k slices always qualifies
    best.map(|(_, c)| c).expect("pie partition is always valid")
}

/// Typical target locations (cell centroids) of a region, in global ground
/// coordinates.
pub fn partition_region(region: &SensingRegion) -> Vec<[f64; 2]> {
    partition_cells(region.radius, region.subregions)
        .iter()
        .map(|c| {
            let p = c.centroid();
            [region.center[0] + p[0], region.center[1] + p[1]]
        })
        .collect()
}

/// Two-way free-space reflection coefficient of a target with radar cross
/// section `rcs` at distance `range`.
pub fn reflection_coefficient(rcs: f64, lambda: Wavelength, range: f64) -> Complex64 {
    let l = lambda.meters();
    let four_pi_cubed = (4.0 * PI).powi(3);
    Complex64::new((rcs * l * l / (four_pi_cubed * range.powi(4))).sqrt(), 0.0)
}

/// Typical targets of all regions in region order.
pub fn build_targets(
    regions: &[SensingRegion],
    bs_origin: [f64; 2],
    rcs: f64,
    lambda: Wavelength,
) -> Result<Vec<Target>> {
    if regions.is_empty() {
        return Err(Error::InvalidParameter("no sensing regions".into()));
    }
    let mut out = Vec::new();
    for region in regions {
        for p in partition_region(region) {
            let dx = p[0] - bs_origin[0];
            let dy = p[1] - bs_origin[1];
            let range = dx.hypot(dy);
            if range == 0.0 {
                return Err(Error::InvalidParameter(
                    "typical target coincides with the base-station origin".into(),
                ));
            }
            let phi = dy.atan2(dx);
            out.push(Target::new(phi, range, reflection_coefficient(rcs, lambda, range))?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMode {
    /// i.i.d. circularly-symmetric Gaussian columns drawn from a seeded RNG.
    Gaussian { seed: u64 },
    /// Covariance fixed to `(P/NB)·I` without realizing the waveform.
    IdealIdentity,
}

/// Probe of total power `power` over `snapshots` columns on `nb` antennas.
pub fn make_probe(power: f64, snapshots: usize, nb: usize, mode: ProbeMode) -> Result<ProbeSignal> {
    if snapshots <= nb {
        return Err(Error::InvalidParameter(format!(
            "probe needs more snapshots than antennas ({snapshots} <= {nb})"
        )));
    }
    match mode {
        ProbeMode::IdealIdentity => ProbeSignal::ideal(power, snapshots, nb),
        ProbeMode::Gaussian { seed } => {
            if !(power > 0.0) {
                return Err(Error::InvalidParameter(format!("power must be > 0, got {power}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // unit-variance draws scaled afterwards, so one seed gives the
            // same waveform direction at every power level
            let unit = CMatrix::from_fn(nb, snapshots, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            });
            let x = unit * Complex64::from((power / nb as f64).sqrt());
            ProbeSignal::from_matrix(x, power)
        }
    }
}

/// Everything needed to score a layout: channel model, typical targets,
/// probe, noise level and the placement constraints.
#[derive(Debug, Clone)]
pub struct SensingProblem {
    pub model: ChannelModel,
    pub targets: Vec<Target>,
    pub probe: ProbeSignal,
    pub noise_var: f64,
    pub site: SiteSpace,
    pub cons: MovementConstraints,
}

impl SensingProblem {
    /// Total CRB, or the sentinel when the FIM is unusable.
    pub fn crb(&self, layout: &ArrayLayout) -> f64 {
        crb_or_sentinel(layout, &self.model, &self.targets, &self.probe, self.noise_var)
    }

    pub fn report(&self, layout: &ArrayLayout) -> Result<CrbReport> {
        crb_report(layout, &self.model, &self.targets, &self.probe, self.noise_var)
    }

    /// Same problem with the probe power scaled by `c`.
    pub fn with_power_scaled(&self, c: f64) -> Self {
        Self {
            probe: self.probe.scaled(c),
            ..self.clone()
        }
    }
}
