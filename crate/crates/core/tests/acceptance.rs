//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run alone with `cargo test --test acceptance`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::TAU;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sixdma::channel::{two_way_channel, ChannelModel, Wavelength};
use sixdma::estimation::{crb_closed_form_single, crb_single_surface_full, crb_total, fisher_information, ClosedForm};
use sixdma::geometry::{
    check_constraints, rotation_matrix, surface_normal, ArrayLayout, LocalArray, MovementConstraints, SiteSpace,
    SurfacePose, Vec3, Violation,
};
use sixdma::harness::{build_scheme, evaluate_layout, run_experiment, ExperimentConfig};
use sixdma::pattern::{gain_dbi, gain_linear, PatternKind};
use sixdma::scenario::{make_probe, ProbeMode, Target};
use sixdma::schemes::{build_fpa, cylinder_layout, SchemeKind};

// tolerances
const ORTHO_TOL: f64 = 1e-12;
const DET_TOL: f64 = 1e-12;
const FIM_REL_TOL: f64 = 1e-4;
const FD_STEP: f64 = 1e-6;
const FULL_FORM_TOL: f64 = 1e-9;
const RESOLVED_FORM_TOL: f64 = 1e-6;
const SLOPE_TOL: f64 = 1e-6;
const GEOMETRY_BUDGET: Duration = Duration::from_secs(5);
const FIM_BUDGET: Duration = Duration::from_secs(30);
const FIGURE_BUDGET: Duration = Duration::from_secs(30 * 60);
const CONSTANTS_BUDGET: Duration = Duration::from_secs(1);

type Criterion = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    ExperimentConfig::load(&path).expect("shipped config loads")
}

fn lambda() -> Wavelength {
    Wavelength::from_frequency(2.4e9).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ── 1. geometry ──────────────────────────────────────────────────────────

/// Global normal written out from the first column of the rotation.
fn brute_normal(rot: &Vec3, local: &Vec3) -> Vec3 {
    let (sa, ca) = rot[0].sin_cos();
    let (sb, cb) = rot[1].sin_cos();
    let (sg, cg) = rot[2].sin_cos();
    let r = Matrix3::new(
        ca * cg,
        ca * sg,
        -sa,
        sb * sa * cg - cb * sg,
        sb * sa * sg + cb * cg,
        ca * sb,
        cb * sa * cg + sb * sg,
        cb * sa * sg - sb * cg,
        ca * cb,
    );
    r * local
}

fn brute_violations(layout: &ArrayLayout, half: f64, d_min: f64) -> BTreeSet<Violation> {
    let surfaces = layout.surfaces();
    let mut out = BTreeSet::new();
    for (i, si) in surfaces.iter().enumerate() {
        let n = brute_normal(&si.pose.rotation, &si.local.normal());
        let q = si.pose.position;
        if n.dot(&q) < 0.0 {
            out.insert(Violation::Blockage { surface: i });
        }
        if q.iter().any(|c| c.abs() > half) {
            out.insert(Violation::OutsideSite { surface: i });
        }
        for (j, sj) in surfaces.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = sj.pose.position - q;
            if n.dot(&d) > 0.0 {
                out.insert(Violation::Reflection { surface: i, other: j });
            }
            if i < j && d.norm() < d_min {
                out.insert(Violation::Distance { first: i, second: j });
            }
        }
    }
    out
}

fn criterion_geometry() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_ortho = 0f64;
    let mut worst_det = 0f64;
    for _ in 0..1000 {
        let rot = Vec3::from_fn(|_, _| rng.random_range(-10.0..10.0));
        let r = rotation_matrix(&rot);
        worst_ortho = worst_ortho.max((r.transpose() * r - Matrix3::identity()).norm());
        worst_det = worst_det.max((r.determinant() - 1.0).abs());
    }

    let site = SiteSpace::new(0.6).unwrap();
    let cons = MovementConstraints::new(0.3).unwrap();
    let local = LocalArray::ula(2, 0.0625).unwrap();
    let mut mismatches = 0;
    let mut kinds = HashSet::new();
    for _ in 0..100 {
        let b = rng.random_range(2..=6);
        let poses: Vec<SurfacePose> = (0..b)
            .map(|_| {
                SurfacePose::new(
                    Vec3::from_fn(|_, _| rng.random_range(-0.4..0.4)),
                    Vec3::from_fn(|_, _| rng.random_range(0.0..TAU)),
                )
            })
            .collect();
        let layout = ArrayLayout::uniform(&poses, &local).unwrap();
        let got: BTreeSet<Violation> = check_constraints(&layout, &site, &cons)
            .violations
            .into_iter()
            .collect();
        let want = brute_violations(&layout, site.half_side(), cons.d_min());
        for v in &want {
            kinds.insert(std::mem::discriminant(v));
        }
        mismatches += usize::from(got != want);
    }
    let elapsed = start.elapsed();
    let pass = worst_ortho < ORTHO_TOL
        && worst_det < DET_TOL
        && mismatches == 0
        && kinds.len() == 4
        && elapsed < GEOMETRY_BUDGET;
    verdict(
        pass,
        format!(
            "max ‖RᵀR−I‖={worst_ortho:.2e}, max |det−1|={worst_det:.2e}, checker mismatches {mismatches}/100 \
             ({} violation kinds exercised), {:.2}s",
            kinds.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// ── 2. FIM against a finite-difference oracle ────────────────────────────

fn criterion_fim_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let lam = lambda();
    let model = ChannelModel::new(PatternKind::HalfSpaceIsotropic, lam);
    let local = LocalArray::ula(2, lam.meters() / 2.0).unwrap();
    let noise_var = 0.5;
    let mut worst = 0f64;
    let mut instances = 0;
    while instances < 25 {
        let poses: Vec<SurfacePose> = (0..2)
            .map(|_| {
                SurfacePose::new(
                    Vec3::from_fn(|_, _| rng.random_range(-0.3..0.3)),
                    Vec3::new(
                        rng.random_range(-0.3..0.3),
                        rng.random_range(-0.3..0.3),
                        rng.random_range(0.0..TAU),
                    ),
                )
            })
            .collect();
        let layout = ArrayLayout::uniform(&poses, &local).unwrap();
        let k = rng.random_range(1..=3);
        let targets: Vec<Target> = (0..k)
            .map(|_| {
                let rho = Complex64::from_polar(rng.random_range(0.5..2.0), rng.random_range(0.0..TAU));
                Target::new(rng.random_range(-3.1..3.1), 10.0, rho).unwrap()
            })
            .collect();
        // every target must be seen, away from the half-space edge
        let visible = targets.iter().all(|t| {
            let u = sixdma::channel::pointing_vector(t.phi());
            layout
                .surfaces()
                .iter()
                .any(|s| surface_normal(&s.pose, &s.local).dot(&u) > 0.1)
                && layout
                    .surfaces()
                    .iter()
                    .all(|s| surface_normal(&s.pose, &s.local).dot(&u).abs() > 1e-3)
        });
        if !visible {
            continue;
        }
        let probe = make_probe(1.0, 8, 4, ProbeMode::Gaussian { seed: instances }).unwrap();
        let x = probe.matrix().unwrap().clone();
        let fim = match fisher_information(&layout, &model, &targets, &probe, noise_var) {
            Ok(f) => f,
            Err(e) => return verdict(false, format!("fisher_information failed: {e}")),
        };
        let mean = |phis: &[f64]| {
            let moved: Vec<Target> = targets
                .iter()
                .zip(phis)
                .map(|(t, &p)| Target::new(p, t.range(), t.rho()).unwrap())
                .collect();
            two_way_channel(&layout, &model, &moved) * &x
        };
        let phis: Vec<f64> = targets.iter().map(|t| t.phi()).collect();
        let grads: Vec<_> = (0..k)
            .map(|i| {
                let mut up = phis.clone();
                let mut dn = phis.clone();
                up[i] += FD_STEP;
                dn[i] -= FD_STEP;
                (mean(&up) - mean(&dn)) / Complex64::from(2.0 * FD_STEP)
            })
            .collect();
        let oracle = DMatrix::from_fn(k, k, |i, j| 2.0 / noise_var * grads[i].dotc(&grads[j]).re);
        worst = worst.max((&fim - &oracle).norm() / oracle.norm());
        instances += 1;
    }
    let elapsed = start.elapsed();
    verdict(
        worst < FIM_REL_TOL && elapsed < FIM_BUDGET,
        format!(
            "25 instances, max relative Frobenius error {worst:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ── 3. single-surface closed forms ───────────────────────────────────────

fn criterion_closed_form() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lam = lambda();
    let model = ChannelModel::new(PatternKind::HalfSpaceIsotropic, lam);
    let (mut worst_full, mut worst_resolved, mut worst_printed) = (0f64, 0f64, 0f64);
    let mut cases = 0;
    while cases < 25 {
        let n = rng.random_range(2..=4);
        let local = LocalArray::ula(n, lam.meters() / 2.0).unwrap();
        let pose = SurfacePose::new(
            Vec3::zeros(),
            Vec3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(0.0..TAU),
            ),
        );
        let layout = ArrayLayout::uniform(&[pose], &local).unwrap();
        let phi = rng.random_range(-3.1..3.1);
        let u = sixdma::channel::pointing_vector(phi);
        if surface_normal(&pose, &local).dot(&u) < 0.2 {
            continue;
        }
        let rho = Complex64::from_polar(rng.random_range(0.1..3.0), rng.random_range(0.0..TAU));
        let target = Target::new(phi, 30.0, rho).unwrap();
        let power = 10f64.powf(rng.random_range(-1.0..2.0));
        let snapshots = rng.random_range(n + 1..4 * n + 8);
        let probe = make_probe(power, snapshots, n, ProbeMode::IdealIdentity).unwrap();
        let noise_var = rng.random_range(0.1..2.0);

        let fim = fisher_information(&layout, &model, &[target], &probe, noise_var).unwrap();
        let crb = crb_total(&fim).unwrap();
        let full = crb_single_surface_full(&layout, &model, &target, &probe, noise_var).unwrap();
        let resolved =
            crb_closed_form_single(&layout, &model, &target, &probe, noise_var, ClosedForm::Resolved).unwrap();
        let printed = crb_closed_form_single(&layout, &model, &target, &probe, noise_var, ClosedForm::Printed).unwrap();
        worst_full = worst_full.max(rel(crb, full));
        worst_resolved = worst_resolved.max(rel(crb, resolved));
        worst_printed = worst_printed.max(rel(crb, printed));
        cases += 1;
    }
    verdict(
        worst_full < FULL_FORM_TOL && worst_resolved < RESOLVED_FORM_TOL,
        format!(
            "25 cases, max rel err vs full expression {worst_full:.2e}, vs resolved decomposition \
             {worst_resolved:.2e} (printed form, informational: {worst_printed:.2e})"
        ),
    )
}

// ── 4. 1/P scaling ───────────────────────────────────────────────────────

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_scaling() -> Verdict {
    let cfg = config("desk.cfg");
    let lam = cfg.wavelength().unwrap();
    let site = cfg.site().unwrap();
    let powers = [10.0, 20.0, 30.0, 40.0, 50.0];
    let log_p: Vec<f64> = powers.iter().map(|p: &f64| (p / 10.0) * 10f64.ln()).collect();
    let mut worst = 0f64;
    let mut curves = 0;
    let cylinder = ArrayLayout::uniform(
        &cylinder_layout(cfg.array.surfaces, &site, cfg.d_min().unwrap()).unwrap(),
        &cfg.surface_array().unwrap(),
    )
    .unwrap();
    let fpa = build_fpa(cfg.total_antennas(), lam, &site, cfg.panel_extent().unwrap()).unwrap();
    for pattern in [PatternKind::directive(), PatternKind::HalfSpaceIsotropic] {
        for layout in [&cylinder, &fpa] {
            let per_power: Vec<(f64, Vec<f64>)> = powers
                .iter()
                .map(|&p| evaluate_layout(&cfg.problem(pattern, p).unwrap(), layout).unwrap())
                .collect();
            if !per_power[0].0.is_finite() {
                continue;
            }
            let total: Vec<f64> = per_power.iter().map(|(t, _)| t.ln()).collect();
            worst = worst.max((slope(&log_p, &total) + 1.0).abs());
            for k in 0..per_power[0].1.len() {
                let ys: Vec<f64> = per_power.iter().map(|(_, v)| v[k].ln()).collect();
                worst = worst.max((slope(&log_p, &ys) + 1.0).abs());
            }
            curves += 1;
        }
    }
    verdict(
        worst < SLOPE_TOL && curves >= 3,
        format!("{curves} identifiable layouts, max |slope + 1| = {worst:.2e} over totals and every target"),
    )
}

// ── 5. PSO contract ──────────────────────────────────────────────────────

fn criterion_pso() -> Verdict {
    let cfg = config("desk.cfg");
    let power = cfg.experiment.powers_dbm[0];
    let mut non_monotone = 0;
    let mut audit_failures = 0;
    let mut irreproducible = 0;
    let mut flagged = 0;
    let mut runs = 0;
    for pattern in [PatternKind::directive(), PatternKind::HalfSpaceIsotropic] {
        let problem = cfg.problem(pattern, power).unwrap();
        for seed in 0..20 {
            let a = build_scheme(&cfg, &problem, SchemeKind::SixDma, seed).unwrap();
            let b = build_scheme(&cfg, &problem, SchemeKind::SixDma, seed).unwrap();
            runs += 1;
            if a.history.windows(2).any(|w| w[1] > w[0]) {
                non_monotone += 1;
            }
            let same = a.layout == b.layout
                && a.history.len() == b.history.len()
                && a.history
                    .iter()
                    .zip(&b.history)
                    .all(|(x, y)| x.to_bits() == y.to_bits());
            irreproducible += usize::from(!same);
            let audit = check_constraints(&a.layout, &problem.site, &problem.cons);
            if a.is_feasible() {
                audit_failures += usize::from(!audit.is_feasible());
            } else {
                flagged += 1;
            }
        }
    }
    verdict(
        non_monotone == 0 && audit_failures == 0 && irreproducible == 0,
        format!(
            "{runs} runs: non-increasing histories {}/{runs}, feasibility audit failures {audit_failures} \
             ({flagged} flagged infeasible), bit-reproducible {}/{runs}",
            runs - non_monotone,
            runs - irreproducible
        ),
    )
}

// ── 6. desk-scale figure shape ───────────────────────────────────────────

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a == b {
            a
        } else {
            0.5 * (a + b)
        }
    }
}

fn criterion_figure_shape() -> Verdict {
    let start = Instant::now();
    let cfg = config("desk.cfg");
    let records = run_experiment(&cfg).unwrap();
    let mut groups: BTreeMap<(&str, SchemeKind, u64), Vec<f64>> = BTreeMap::new();
    for r in &records {
        groups
            .entry((r.pattern, r.scheme, r.power_dbm.to_bits()))
            .or_default()
            .push(r.crb_total);
    }
    let med = |pattern: &str, scheme: SchemeKind, p: f64| median(groups[&(pattern, scheme, p.to_bits())].clone());
    let mut ordering_ok = true;
    let mut gap_ok = true;
    let mut lines = Vec::new();
    for &p in &cfg.experiment.powers_dbm {
        let mut gaps = Vec::new();
        for pattern in ["directive", "isotropic"] {
            let (six, fama, fpa) = (
                med(pattern, SchemeKind::SixDma, p),
                med(pattern, SchemeKind::FaMa, p),
                med(pattern, SchemeKind::Fpa, p),
            );
            ordering_ok &= six <= fama && fama <= fpa;
            gaps.push(fpa / six);
            lines.push(format!(
                "{pattern}@{p}dBm 6dma={six:.3e} fa-ma={fama:.3e} fpa={fpa:.3e}"
            ));
        }
        gap_ok &= gaps[0] > gaps[1];
    }
    let elapsed = start.elapsed();
    let gap_note = {
        let p = cfg.experiment.powers_dbm[0];
        let g = |pat| med(pat, SchemeKind::Fpa, p) / med(pat, SchemeKind::SixDma, p);
        format!(
            "FPA/6DMA gap directive {:.3e} vs isotropic {:.3e}",
            g("directive"),
            g("isotropic")
        )
    };
    for l in &lines {
        println!("    {l}");
    }
    verdict(
        ordering_ok && gap_ok && elapsed < FIGURE_BUDGET,
        format!(
            "ordering 6DMA ≤ FA/MA ≤ FPA at every power: {ordering_ok}; directive gap > isotropic gap: {gap_ok} \
             ({gap_note}); {} records, {:.1}s",
            records.len(),
            elapsed.as_secs_f64()
        ),
    )
}

// ── 7. constants ─────────────────────────────────────────────────────────

fn criterion_constants() -> Verdict {
    let start = Instant::now();
    let cfg = config("paper_v.cfg");
    let lam = cfg.wavelength().unwrap().meters();
    let d_min = cfg.d_min().unwrap();
    let expected_d_min = (2f64.sqrt() / 2.0 + 0.5) * 0.125;
    let ks: Vec<usize> = cfg.scenario.regions.iter().map(|r| r.targets).collect();
    let areas: Vec<f64> = cfg.regions().unwrap().iter().map(|r| r.area()).collect();
    let area_ratio = [areas[1] / areas[0], areas[2] / areas[0]];
    let boresight = gain_dbi(&PatternKind::directive(), 0.0, 0.0);
    let front = gain_linear(
        &PatternKind::HalfSpaceIsotropic,
        &Vec3::zeros(),
        &Vec3::new(1.0, 0.0, 0.0),
    );
    let elapsed = start.elapsed();
    let pass = (lam - 0.125).abs() < 1e-15
        && (d_min - expected_d_min).abs() < 1e-15
        && format!("{d_min:.6}") == "0.150888"
        && ks == [5, 10, 15]
        && (area_ratio[0] - 2.0).abs() < 1e-12
        && (area_ratio[1] - 3.0).abs() < 1e-12
        && (boresight - 8.0).abs() < 1e-15
        && front == 2.0
        && elapsed < CONSTANTS_BUDGET;
    verdict(
        pass,
        format!(
            "λ={lam} m, d_min={d_min:.9} m, K={ks:?}, area ratios 1:{:.6}:{:.6}, boresight {boresight} dBi, \
             isotropic front gain {front}",
            area_ratio[0], area_ratio[1]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 7] = [
        ("1 geometry suite", criterion_geometry),
        ("2 FIM finite-difference oracle", criterion_fim_oracle),
        ("3 closed-form consistency", criterion_closed_form),
        ("4 1/P scaling law", criterion_scaling),
        ("5 PSO contract", criterion_pso),
        ("6 desk-scale figure shape", criterion_figure_shape),
        ("7 constant audit", criterion_constants),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let v = run();
        println!(
            "{} criterion {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
