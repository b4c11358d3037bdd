//! The three compared antenna schemes: fully movable surfaces (6DMA), a
//! fixed three-sector array (FPA), and the same sectors with antennas free
//! to slide inside their panels (FA/MA).

use std::fmt;
use std::str::FromStr;

use crate::channel::Wavelength;
use crate::error::{Error, Result};
use crate::geometry::{
    check_constraints, global_antenna_positions, ArrayLayout, LocalArray, SiteSpace, Surface, SurfacePose, Vec3,
};
use crate::pso::{encode_poses, optimize, Dim, Evaluation, Objective, PoseObjective, PsoParams};
use crate::scenario::SensingProblem;

/// Sector boresight azimuths of the fixed three-sector array, degrees.
pub const SECTOR_AZIMUTHS_DEG: [f64; 3] = [90.0, 210.0, 330.0];

/// Relative slack on the antenna spacing check, so that a grid laid out at
/// exactly the minimum spacing is not flagged by rounding.
const SPACING_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    SixDma,
    Fpa,
    FaMa,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::SixDma, SchemeKind::FaMa, SchemeKind::Fpa];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::SixDma => "6dma",
            SchemeKind::Fpa => "fpa",
            SchemeKind::FaMa => "fa-ma",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "6dma" => Ok(SchemeKind::SixDma),
            "fpa" => Ok(SchemeKind::Fpa),
            "fa-ma" => Ok(SchemeKind::FaMa),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme '{other}' (expected 6dma, fpa or fa-ma)"
            ))),
        }
    }
}

/// `n` antennas on a sector panel at `spacing` in `rows` centred rows along
/// the local y axis, stacked along local z; the last row may be shorter.
pub fn sector_panel(n: usize, spacing: f64, rows: usize) -> Result<LocalArray> {
    if n == 0 || rows == 0 || rows > n {
        return Err(Error::InvalidParameter(format!(
            "cannot lay {n} antennas in {rows} rows"
        )));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidParameter("spacing must be > 0".into()));
    }
    let cols = n.div_ceil(rows);
    let rows = n.div_ceil(cols);
    let mut offsets = Vec::with_capacity(n);
    for r in 0..rows {
        let in_row = cols.min(n - r * cols);
        let z = (r as f64 - (rows - 1) as f64 / 2.0) * spacing;
        for c in 0..in_row {
            let y = (c as f64 - (in_row - 1) as f64 / 2.0) * spacing;
            offsets.push(Vec3::new(0.0, y, z));
        }
    }
    LocalArray::new(offsets, Vec3::x())
}

/// Rows needed so that no row is wider than `extent`.
fn min_rows(n: usize, spacing: f64, extent: f64) -> usize {
    let per_row = ((extent / spacing) * (1.0 + SPACING_SLACK)).floor() as usize + 1;
    n.div_ceil(per_row)
}

/// Antennas per sector: `⌈NB/3⌉` on the first two, the remainder on the last.
pub fn sector_sizes(nb: usize) -> Result<[usize; 3]> {
    let per = nb.div_ceil(3);
    if nb < 3 || nb <= 2 * per {
        return Err(Error::InvalidParameter(format!(
            "{nb} antennas cannot fill three sectors of ⌈NB/3⌉"
        )));
    }
    Ok([per, per, nb - 2 * per])
}

/// Fixed three-sector array: sector centres on a horizontal circle of radius
/// `A/4`, boresights radially outward, half-wavelength panels using the
/// fewest rows that keep every antenna inside both the panel and the site.
pub fn build_fpa(nb: usize, lambda: Wavelength, site: &SiteSpace, panel_extent: f64) -> Result<ArrayLayout> {
    let sizes = sector_sizes(nb)?;
    let radius = site.side() / 4.0;
    let spacing = lambda.meters() / 2.0;
    let surfaces = SECTOR_AZIMUTHS_DEG
        .iter()
        .zip(sizes)
        .map(|(deg, n)| {
            let psi = deg.to_radians();
            let pose = SurfacePose::new(
                Vec3::new(radius * psi.cos(), radius * psi.sin(), 0.0),
                Vec3::new(0.0, 0.0, -psi),
            )
            .canonicalized();
            for rows in min_rows(n, spacing, panel_extent)..=n {
                let local = sector_panel(n, spacing, rows)?;
                if global_antenna_positions(&pose, &local).iter().all(|p| site.contains(p)) {
                    return Ok(Surface { pose, local });
                }
            }
            Err(Error::InvalidParameter(format!(
                "a {n}-antenna sector panel does not fit in the site"
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    ArrayLayout::new(surfaces)
}

fn antenna_positions(layout: &ArrayLayout) -> Vec<Vec3> {
    layout
        .surfaces()
        .iter()
        .flat_map(|s| global_antenna_positions(&s.pose, &s.local))
        .collect()
}

/// Feasible starting layout for `b` surfaces: rings on the vertical
/// cylinder inscribed in the site cube, boresights radially outward, using
/// the fewest rings whose neighbours respect `d_min`. Alternate rings are
/// staggered by half a step. Every centre lies behind every other
/// surface's plane because the cylinder is convex.
pub fn cylinder_layout(b: usize, site: &SiteSpace, d_min: f64) -> Result<Vec<SurfacePose>> {
    if b == 0 {
        return Err(Error::InvalidParameter("need at least one surface".into()));
    }
    let r = site.half_side();
    let need = d_min * (1.0 + SPACING_SLACK);
    for rings in 1..=b {
        let per = b.div_ceil(rings);
        let chord = if per > 1 {
            2.0 * r * (std::f64::consts::PI / per as f64).sin()
        } else {
            f64::INFINITY
        };
        let dz = site.side() / rings as f64;
        if chord < need || (rings > 1 && dz < need) {
            continue;
        }
        let mut poses = Vec::with_capacity(b);
        for k in 0..b {
            let (ring, slot) = (k / per, k % per);
            let stagger = if ring % 2 == 1 { 0.5 } else { 0.0 };
            let psi = (slot as f64 + stagger) * std::f64::consts::TAU / per as f64;
            let z = (ring as f64 + 0.5) * dz - r;
            poses.push(
                SurfacePose::new(Vec3::new(r * psi.cos(), r * psi.sin(), z), Vec3::new(0.0, 0.0, -psi)).canonicalized(),
            );
        }
        return Ok(poses);
    }
    Err(Error::InvalidParameter(format!(
        "{b} surfaces at spacing {d_min} do not fit on the site cylinder"
    )))
}

/// Result of building or optimizing one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub layout: ArrayLayout,
    /// Best penalized fitness per iteration; a single entry for fixed layouts.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub evaluation: Evaluation,
    pub penalty: f64,
}

impl SchemeOutcome {
    pub fn is_feasible(&self) -> bool {
        self.evaluation.is_feasible()
    }
}

/// FPA layout scored on `problem`.
pub fn fpa_outcome(problem: &SensingProblem, layout: ArrayLayout) -> SchemeOutcome {
    let report = check_constraints(&layout, &problem.site, &problem.cons);
    let evaluation = Evaluation {
        objective: problem.crb(&layout),
        violations: report.penalized().count(),
    };
    SchemeOutcome {
        history: vec![evaluation.objective],
        layout,
        iterations: 0,
        evaluation,
        penalty: 0.0,
    }
}

/// In-panel antenna displacements of a fixed sector layout.
pub struct PanelObjective<'a> {
    problem: &'a SensingProblem,
    base: &'a ArrayLayout,
    min_spacing: f64,
    dims: Vec<Dim>,
}

impl<'a> PanelObjective<'a> {
    pub fn new(problem: &'a SensingProblem, base: &'a ArrayLayout, extent: f64, min_spacing: f64) -> Result<Self> {
        if !(extent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "panel extent must be > 0, got {extent}"
            )));
        }
        let h = extent / 2.0;
        Ok(Self {
            problem,
            base,
            min_spacing,
            dims: vec![Dim::Clamped { lo: -h, hi: h }; 2 * base.num_antennas()],
        })
    }

    /// Current in-panel `(y, z)` offsets of the base layout.
    pub fn encode(&self) -> Vec<f64> {
        self.base
            .surfaces()
            .iter()
            .flat_map(|s| s.local.offsets().iter().flat_map(|o| [o[1], o[2]]))
            .collect()
    }

    pub fn decode(&self, s: &[f64]) -> ArrayLayout {
        let mut k = 0;
        let surfaces = self
            .base
            .surfaces()
            .iter()
            .map(|surface| {
                let offsets = (0..surface.local.len())
                    .map(|_| {
                        let o = Vec3::new(0.0, s[k], s[k + 1]);
                        k += 2;
                        o
                    })
                    .collect();
                Surface {
                    pose: surface.pose,
                    local: LocalArray::new(offsets, surface.local.normal()).expect("panel offsets are finite"),
                }
            })
            .collect();
        ArrayLayout::new(surfaces).expect("decoded panel layout is non-empty")
    }

    /// Antennas outside the site cube plus antenna pairs, across all panels,
    /// closer than the minimum spacing.
    pub fn violations(&self, layout: &ArrayLayout) -> usize {
        let pts = antenna_positions(layout);
        let limit = self.min_spacing * (1.0 - SPACING_SLACK);
        let mut count = pts.iter().filter(|p| !self.problem.site.contains(p)).count();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if !((pts[i] - pts[j]).norm() >= limit) {
                    count += 1;
                }
            }
        }
        count
    }
}

impl Objective for PanelObjective<'_> {
    fn dims(&self) -> &[Dim] {
        &self.dims
    }

    fn evaluate(&self, s: &[f64]) -> Evaluation {
        let layout = self.decode(s);
        Evaluation {
            objective: self.problem.crb(&layout),
            violations: self.violations(&layout),
        }
    }
}

/// Position-only optimization of the FPA antennas inside square panels of
/// side `extent`, rotations frozen. The FPA layout seeds the swarm, so the
/// result is never worse than the FPA; zero iterations return it unchanged.
pub fn optimize_fa_ma(
    problem: &SensingProblem,
    fpa: &ArrayLayout,
    lambda: Wavelength,
    extent: f64,
    params: &PsoParams,
    seed: u64,
) -> Result<SchemeOutcome> {
    if params.iterations == 0 {
        return Ok(fpa_outcome(problem, fpa.clone()));
    }
    let objective = PanelObjective::new(problem, fpa, extent, lambda.meters() / 2.0)?;
    let start = objective.encode();
    let out = optimize(&objective, params, seed, &[start])?;
    Ok(SchemeOutcome {
        layout: objective.decode(&out.best),
        history: out.history,
        iterations: params.iterations,
        evaluation: out.best_evaluation,
        penalty: out.penalty,
    })
}

/// Full position and rotation optimization of `surfaces` identical
/// surfaces, optionally seeded with `warm_start` layouts.
pub fn optimize_6dma(
    problem: &SensingProblem,
    local: &LocalArray,
    surfaces: usize,
    params: &PsoParams,
    seed: u64,
    warm_start: &[Vec<SurfacePose>],
) -> Result<SchemeOutcome> {
    let objective = PoseObjective::new(problem, local.clone(), surfaces)?;
    let starts: Vec<Vec<f64>> = warm_start.iter().map(|p| encode_poses(p)).collect();
    let out = optimize(&objective, params, seed, &starts)?;
    Ok(SchemeOutcome {
        layout: objective.decode(&out.best),
        history: out.history,
        iterations: params.iterations,
        evaluation: out.best_evaluation,
        penalty: out.penalty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelModel;
    use crate::geometry::{MovementConstraints, SiteSpace};
    use crate::pattern::PatternKind;
    use crate::scenario::{build_targets, make_probe, ProbeMode, SensingRegion};

    fn lambda() -> Wavelength {
        Wavelength::new(0.125).unwrap()
    }

    fn site() -> SiteSpace {
        SiteSpace::new(0.6).unwrap()
    }

    fn problem(nb: usize, pattern: PatternKind) -> SensingProblem {
        let regions = [
            SensingRegion::new([20.0, 0.0], 2.0, 2).unwrap(),
            SensingRegion::new([40.0 * (2.0f64).cos(), 40.0 * (2.0f64).sin()], 2.0, 2).unwrap(),
        ];
        SensingProblem {
            model: ChannelModel::new(pattern, lambda()),
            targets: build_targets(&regions, [0.0, 0.0], 1.0, lambda()).unwrap(),
            probe: make_probe(1.0, 4 * nb, nb, ProbeMode::IdealIdentity).unwrap(),
            noise_var: 1e-12,
            site: SiteSpace::new(0.6).unwrap(),
            cons: MovementConstraints::new(0.150_888).unwrap(),
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for k in SchemeKind::ALL {
            assert_eq!(k.name().parse::<SchemeKind>().unwrap(), k);
        }
        assert!("mimo".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn sector_sizes_follow_ceiling_rule() {
        assert_eq!(sector_sizes(64).unwrap(), [22, 22, 20]);
        assert_eq!(sector_sizes(16).unwrap(), [6, 6, 4]);
        assert_eq!(sector_sizes(3).unwrap(), [1, 1, 1]);
        assert!(sector_sizes(2).is_err());
        // ⌈4/3⌉ = 2 leaves nothing for the last sector
        assert!(sector_sizes(4).is_err());
    }

    #[test]
    fn fpa_geometry() {
        let l = build_fpa(64, lambda(), &site(), 1.0).unwrap();
        assert_eq!(l.num_surfaces(), 3);
        assert_eq!(l.num_antennas(), 64);
        for (s, deg) in l.surfaces().iter().zip(SECTOR_AZIMUTHS_DEG) {
            let psi = deg.to_radians();
            let n = crate::geometry::surface_normal(&s.pose, &s.local);
            assert!((n - Vec3::new(psi.cos(), psi.sin(), 0.0)).norm() < 1e-12);
            assert!((s.pose.position.norm() - 0.15).abs() < 1e-15);
        }
        let report = check_constraints(
            &l,
            &SiteSpace::new(0.6).unwrap(),
            &MovementConstraints::new(0.150_888).unwrap(),
        );
        assert!(report.is_feasible(), "{report:?}");
        assert_eq!(l, build_fpa(64, lambda(), &site(), 1.0).unwrap());
    }

    #[test]
    fn fpa_fits_in_site() {
        for nb in [16, 64] {
            let l = build_fpa(nb, lambda(), &site(), 1.0).unwrap();
            let site = SiteSpace::new(0.6).unwrap();
            for p in antenna_positions(&l) {
                assert!(site.contains(&p), "{nb}: {p:?}");
            }
        }
    }

    #[test]
    fn cylinder_layouts_are_feasible() {
        let site = SiteSpace::new(0.6).unwrap();
        let cons = MovementConstraints::new(0.150_888).unwrap();
        let local = LocalArray::ula(2, 0.0625).unwrap();
        for b in [1, 2, 3, 8, 12, 32] {
            let poses = cylinder_layout(b, &site, cons.d_min()).unwrap();
            assert_eq!(poses.len(), b);
            let l = ArrayLayout::uniform(&poses, &local).unwrap();
            let report = check_constraints(&l, &site, &cons);
            assert!(report.is_feasible(), "b = {b}: {report:?}");
        }
        assert!(cylinder_layout(500, &site, cons.d_min()).is_err());
    }

    #[test]
    fn panels_wrap_into_rows() {
        let p = sector_panel(6, 0.0625, 1).unwrap();
        assert!(p.offsets().iter().all(|o| o[2] == 0.0));
        assert!((p.offsets()[5][1] - p.offsets()[0][1] - 5.0 * 0.0625).abs() < 1e-15);
        let p = sector_panel(22, 0.0625, 2).unwrap();
        let zs: Vec<f64> = p.offsets().iter().map(|o| o[2]).collect();
        assert_eq!(zs.iter().filter(|z| **z < 0.0).count(), 11);
        assert_eq!(sector_panel(5, 0.0625, 3).unwrap().len(), 5);
        assert!(sector_panel(5, 0.0625, 6).is_err());
        // 17 antennas span exactly 1 m at 6.25 cm
        assert_eq!(min_rows(17, 0.0625, 1.0), 1);
        assert_eq!(min_rows(22, 0.0625, 1.0), 2);
    }

    #[test]
    fn fpa_uses_single_rows_at_desk_scale() {
        let l = build_fpa(16, lambda(), &site(), 1.0).unwrap();
        for s in l.surfaces() {
            assert!(s.local.offsets().iter().all(|o| o[2] == 0.0));
        }
    }

    #[test]
    fn fa_ma_zero_iterations_is_fpa() {
        let prob = problem(16, PatternKind::directive());
        let fpa = build_fpa(16, lambda(), &site(), 1.0).unwrap();
        let params = PsoParams {
            iterations: 0,
            ..Default::default()
        };
        let out = optimize_fa_ma(&prob, &fpa, lambda(), 1.0, &params, 0).unwrap();
        assert_eq!(out.layout, fpa);
        assert!(out.is_feasible());
    }

    #[test]
    fn fa_ma_improves_on_fpa_with_frozen_rotations() {
        let prob = problem(16, PatternKind::directive());
        let fpa = build_fpa(16, lambda(), &site(), 1.0).unwrap();
        let base = fpa_outcome(&prob, fpa.clone());
        let params = PsoParams {
            particles: 16,
            iterations: 15,
            ..Default::default()
        };
        let out = optimize_fa_ma(&prob, &fpa, lambda(), 1.0, &params, 1).unwrap();
        assert!(out.is_feasible());
        assert!(out.evaluation.objective <= base.evaluation.objective);
        for (a, b) in out.layout.surfaces().iter().zip(fpa.surfaces()) {
            assert_eq!(a.pose, b.pose);
        }
        let obj = PanelObjective::new(&prob, &fpa, 1.0, 0.0625).unwrap();
        assert_eq!(obj.violations(&fpa), 0);
        assert_eq!(obj.decode(&obj.encode()), fpa);
    }

    #[test]
    fn six_dma_runs_and_keeps_warm_start() {
        let prob = problem(8, PatternKind::directive());
        let local = LocalArray::ula(2, 0.0625).unwrap();
        let ring: Vec<SurfacePose> = (0..4)
            .map(|i| {
                let psi = i as f64 * std::f64::consts::FRAC_PI_2;
                SurfacePose::new(
                    Vec3::new(0.2 * psi.cos(), 0.2 * psi.sin(), 0.0),
                    Vec3::new(0.0, 0.0, -psi),
                )
                .canonicalized()
            })
            .collect();
        let ring_layout = ArrayLayout::uniform(&ring, &local).unwrap();
        assert!(check_constraints(&ring_layout, &prob.site, &prob.cons).is_feasible());
        let params = PsoParams {
            particles: 10,
            iterations: 5,
            ..Default::default()
        };
        let out = optimize_6dma(&prob, &local, 4, &params, 0, &[ring]).unwrap();
        assert!(out.is_feasible());
        assert!(out.evaluation.objective <= prob.crb(&ring_layout));
        assert_eq!(out.history.len(), 6);
    }
}
