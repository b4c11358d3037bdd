//! Experiment runner: builds or optimizes every (pattern, scheme, seed)
//! layout, evaluates it across the power sweep, and writes the artifacts.
//!
//! Under a fixed probe direction the CRB scales exactly as `1/P`, so by
//! default each layout is optimized once at the first swept power and then
//! re-evaluated at every power; `reoptimize_per_power` runs the optimizer
//! separately at each power instead.

pub mod config;
pub mod layout_file;
pub mod output;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{crb_per_target, fisher_information, gain_decomposition};
use crate::geometry::ArrayLayout;
use crate::pattern::PatternKind;
use crate::scenario::SensingProblem;
use crate::schemes::{
    build_fpa, cylinder_layout, fpa_outcome, optimize_6dma, optimize_fa_ma, SchemeKind, SchemeOutcome,
};

pub use config::ExperimentConfig;
pub use layout_file::{load_layout, load_layout_for, save_layout};
pub use output::{emit_csv, emit_plot, read_csv, ResultRow};

/// One evaluated (pattern, scheme, seed, power) point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub scheme: SchemeKind,
    pub pattern: &'static str,
    pub seed: u64,
    pub power_dbm: f64,
    /// `inf` when the layout's FIM is unusable.
    pub crb_total: f64,
    pub crb_per_target: Vec<f64>,
    pub power_gain: Vec<f64>,
    pub geometric_gain: Vec<f64>,
    pub layout: ArrayLayout,
    /// Best penalized fitness after initialization and every iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Whether the layout satisfies every placement constraint.
    pub feasible: bool,
    pub wallclock_s: f64,
}

impl RunRecord {
    pub fn to_row(&self, record_wallclock: bool) -> ResultRow {
        ResultRow {
            scheme: self.scheme.name().to_string(),
            pattern: self.pattern.to_string(),
            seed: self.seed,
            power_dbm: self.power_dbm,
            crb_total: self.crb_total,
            crb_per_target: self.crb_per_target.clone(),
            power_gain: self.power_gain.clone(),
            geometric_gain: self.geometric_gain.clone(),
            iterations: self.iterations,
            wallclock_s: record_wallclock.then_some(self.wallclock_s),
            config_hash: self.config_hash.clone(),
        }
    }
}

/// CRBs of `layout`, with `inf` entries when the FIM is unusable.
pub fn evaluate_layout(problem: &SensingProblem, layout: &ArrayLayout) -> Result<(f64, Vec<f64>)> {
    let k = problem.targets.len();
    let fim = fisher_information(
        layout,
        &problem.model,
        &problem.targets,
        &problem.probe,
        problem.noise_var,
    )?;
    match crb_per_target(&fim) {
        Ok(per) => Ok((per.sum(), per.iter().copied().collect())),
        Err(Error::Unidentifiable { .. }) => Ok((f64::INFINITY, vec![f64::INFINITY; k])),
        Err(e) => Err(e),
    }
}

/// Builds (FPA) or optimizes (FA/MA, 6DMA) one scheme on `problem`.
pub fn build_scheme(
    config: &ExperimentConfig,
    problem: &SensingProblem,
    scheme: SchemeKind,
    seed: u64,
) -> Result<SchemeOutcome> {
    let lambda = config.wavelength()?;
    let extent = config.panel_extent()?;
    let params = config.pso_params();
    let fpa = || build_fpa(config.total_antennas(), lambda, &problem.site, extent);
    match scheme {
        SchemeKind::Fpa => Ok(fpa_outcome(problem, fpa()?)),
        SchemeKind::FaMa => optimize_fa_ma(problem, &fpa()?, lambda, extent, &params, seed),
        SchemeKind::SixDma => {
            let warm = match cylinder_layout(config.array.surfaces, &problem.site, problem.cons.d_min()) {
                Ok(poses) => vec![poses],
                Err(e) => {
                    log::warn!("no feasible starting layout, using random initialization only: {e}");
                    Vec::new()
                }
            };
            optimize_6dma(
                problem,
                &config.surface_array()?,
                config.array.surfaces,
                &params,
                seed,
                &warm,
            )
        }
    }
}

fn record(
    config: &ExperimentConfig,
    hash: &str,
    key: (PatternKind, SchemeKind, u64),
    power_dbm: f64,
    outcome: &SchemeOutcome,
    wallclock_s: f64,
) -> Result<RunRecord> {
    let (pattern, scheme, seed) = key;
    let problem = config.problem(pattern, power_dbm)?;
    let (crb_total, crb_per_target) = evaluate_layout(&problem, &outcome.layout)?;
    let (power_gain, geometric_gain) =
        gain_decomposition(&outcome.layout, &problem.model, &problem.targets, &problem.probe);
    Ok(RunRecord {
        config_hash: hash.to_string(),
        scheme,
        pattern: pattern.name(),
        seed,
        power_dbm,
        crb_total,
        crb_per_target,
        power_gain,
        geometric_gain,
        layout: outcome.layout.clone(),
        history: outcome.history.clone(),
        iterations: outcome.iterations,
        feasible: outcome.is_feasible(),
        wallclock_s,
    })
}

/// Records of one (pattern, scheme, seed) over the whole power sweep.
pub fn run_single(
    config: &ExperimentConfig,
    pattern: PatternKind,
    scheme: SchemeKind,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let hash = config.hash();
    let powers = &config.experiment.powers_dbm;
    let key = (pattern, scheme, seed);
    let timed = |p: f64| -> Result<(SchemeOutcome, f64)> {
        let problem = config.problem(pattern, p)?;
        let start = Instant::now();
        let out = build_scheme(config, &problem, scheme, seed)?;
        Ok((out, start.elapsed().as_secs_f64()))
    };
    if config.experiment.reoptimize_per_power {
        powers
            .iter()
            .map(|&p| {
                let (out, t) = timed(p)?;
                record(config, &hash, key, p, &out, t)
            })
            .collect()
    } else {
        let (out, t) = timed(powers[0])?;
        powers.iter().map(|&p| record(config, &hash, key, p, &out, t)).collect()
    }
}

/// Re-evaluates a saved layout over the power sweep without optimizing.
/// The file must carry the hash of `config`.
pub fn replay_layout(
    config: &ExperimentConfig,
    pattern: PatternKind,
    scheme: SchemeKind,
    seed: u64,
    path: &Path,
) -> Result<Vec<RunRecord>> {
    let hash = config.hash();
    let layout = load_layout_for(path, &hash)?;
    let problem = config.problem(pattern, config.experiment.powers_dbm[0])?;
    let outcome = fpa_outcome(&problem, layout);
    config
        .experiment
        .powers_dbm
        .iter()
        .map(|&p| record(config, &hash, (pattern, scheme, seed), p, &outcome, 0.0))
        .collect()
}

/// Every (pattern, scheme, seed, power) record, in configuration order
/// regardless of how the runs were scheduled.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let patterns = config.patterns()?;
    let schemes = config.schemes()?;
    let jobs: Vec<(PatternKind, SchemeKind, u64)> = patterns
        .iter()
        .flat_map(|p| {
            schemes
                .iter()
                .flat_map(move |s| config.experiment.seeds.iter().map(move |seed| (*p, *s, *seed)))
        })
        .collect();
    let per_job: Vec<Result<Vec<RunRecord>>> = jobs
        .par_iter()
        .map(|&(p, s, seed)| run_single(config, p, s, seed))
        .collect();
    let mut out = Vec::new();
    for r in per_job {
        out.extend(r?);
    }
    Ok(out)
}

fn layout_name(r: &RunRecord) -> String {
    format!("{}_{}_seed{}.layout", r.pattern, r.scheme.name(), r.seed)
}

/// Writes `results.csv`, `timing.csv`, `history.csv`, `plot.svg` and one
/// layout file per run into `dir`.
pub fn write_artifacts(config: &ExperimentConfig, records: &[RunRecord], dir: &Path) -> Result<()> {
    let hash = config.hash();
    let layouts = dir.join("layouts");
    std::fs::create_dir_all(&layouts).map_err(|e| Error::io(&layouts, e))?;

    let rows: Vec<ResultRow> = records
        .iter()
        .map(|r| r.to_row(config.experiment.record_wallclock))
        .collect();
    emit_csv(&rows, &dir.join("results.csv"))?;
    emit_plot(&rows, &dir.join("plot.svg"))?;

    let timing_path = dir.join("timing.csv");
    let mut timing = csv::Writer::from_path(&timing_path)?;
    timing.write_record(["pattern", "scheme", "seed", "wallclock_s", "config_hash"])?;
    let history_path = dir.join("history.csv");
    let mut history = csv::Writer::from_path(&history_path)?;
    history.write_record([
        "pattern",
        "scheme",
        "seed",
        "iteration",
        "best_fitness",
        "feasible",
        "config_hash",
    ])?;

    let mut seen = std::collections::BTreeSet::new();
    for r in records {
        let name = layout_name(r);
        if !seen.insert(name.clone()) {
            continue;
        }
        save_layout(&layouts.join(&name), &r.layout, Some(&hash))?;
        let seed = r.seed.to_string();
        timing.write_record([
            r.pattern,
            r.scheme.name(),
            &seed,
            &output::fmt_f64(r.wallclock_s),
            &hash,
        ])?;
        for (i, f) in r.history.iter().enumerate() {
            history.write_record([
                r.pattern,
                r.scheme.name(),
                &seed,
                &i.to_string(),
                &output::fmt_f64(*f),
                if r.feasible { "true" } else { "false" },
                &hash,
            ])?;
        }
    }
    timing.flush().map_err(|e| Error::io(&timing_path, e))?;
    history.flush().map_err(|e| Error::io(&history_path, e))?;
    Ok(())
}
