//! Penalty-based particle swarm optimization of surface poses.
//!
//! A particle's position is `s = [q; u]`: the `3B` surface centres followed
//! by the `3B` rotation angles. Infeasible placements are not discarded;
//! every violated pair adds a fixed penalty `τ` to the CRB, and positions are
//! projected back into the site cube after each move; angles are wrapped,
//! and an angle is pulled towards a best position along the shorter arc.
//! The swarm is
//! synchronous: all particles move with the global best of the previous
//! iteration, are evaluated (possibly in parallel), and the bests are then
//! updated in particle-index order, so a seed fixes the whole trajectory.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::SENTINEL_CRB;
use crate::geometry::{
    rotation_matrix, wrap_angle, ArrayLayout, LocalArray, MovementConstraints, SurfacePose, Vec3, Violation,
};
use crate::scenario::SensingProblem;

/// One coordinate of the search space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dim {
    /// Clamped to `[lo, hi]` after every move.
    Clamped { lo: f64, hi: f64 },
    /// An angle, wrapped into `[0, 2π)`.
    Periodic,
}

impl Dim {
    pub fn project(&self, x: f64) -> f64 {
        match *self {
            Dim::Clamped { lo, hi } => x.clamp(lo, hi),
            Dim::Periodic => wrap_angle(x),
        }
    }

    /// Displacement from `from` to `to`; the shorter arc for angles.
    pub fn delta(&self, from: f64, to: f64) -> f64 {
        match self {
            Dim::Periodic => {
                let d = (to - from).rem_euclid(TAU);
                if d > PI {
                    d - TAU
                } else {
                    d
                }
            }
            _ => to - from,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Dim::Clamped { lo, hi } if lo < hi => rng.random_range(lo..hi),
            Dim::Clamped { lo, .. } => lo,
            Dim::Periodic => rng.random_range(0.0..TAU),
        }
    }

    /// Initial velocities are drawn from `[-b, b]`, a tenth of the range.
    fn velocity_bound(&self) -> f64 {
        match *self {
            Dim::Clamped { lo, hi } => (hi - lo) / 10.0,
            Dim::Periodic => PI / 10.0,
        }
    }
}

/// Unpenalized objective value and number of violated constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub violations: usize,
}

impl Evaluation {
    pub fn fitness(&self, penalty: f64) -> f64 {
        self.objective + penalty * self.violations as f64
    }

    pub fn is_feasible(&self) -> bool {
        self.violations == 0
    }
}

/// A minimization problem over a box/torus search space.
pub trait Objective: Sync {
    fn dims(&self) -> &[Dim];
    fn evaluate(&self, s: &[f64]) -> Evaluation;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyWeight {
    /// `10³ ×` the median objective of the feasible initial particles.
    Auto,
    Fixed(f64),
}

/// Which velocity moves the particle within an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionUpdate {
    /// `s ← s + v⁽ᵗ⁺¹⁾`, the usual ordering.
    Fresh,
    /// `s ← s + v⁽ᵗ⁾`, then the velocity is refreshed.
    Lagged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoParams {
    pub particles: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub penalty: PenaltyWeight,
    pub position_update: PositionUpdate,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            particles: 200,
            iterations: 300,
            inertia: 0.729,
            cognitive: 1.49445,
            social: 1.49445,
            penalty: PenaltyWeight::Auto,
            position_update: PositionUpdate::Fresh,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::InvalidParameter("particle count must be ≥ 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iteration count must be ≥ 1".into()));
        }
        if !(self.inertia > 0.0 && self.inertia <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "inertia must lie in (0, 1], got {}",
                self.inertia
            )));
        }
        if !(self.cognitive > 0.0 && self.social > 0.0) {
            return Err(Error::InvalidParameter("acceleration coefficients must be > 0".into()));
        }
        if let PenaltyWeight::Fixed(t) = self.penalty {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::InvalidParameter(format!("penalty must be > 0, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub personal_best: Vec<f64>,
    pub personal_best_fitness: f64,
}

#[derive(Debug, Clone)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    pub global_best_fitness: f64,
    pub global_best_evaluation: Evaluation,
    pub iteration: usize,
    /// Penalty weight `τ` in force for this run.
    pub penalty: f64,
    rng: ChaCha8Rng,
}

/// Maps every coordinate back into its domain.
pub fn project(dims: &[Dim], s: &mut [f64]) {
    for (x, d) in s.iter_mut().zip(dims) {
        *x = d.project(*x);
    }
}

fn evaluate_all<O: Objective + ?Sized>(objective: &O, positions: &[&[f64]]) -> Vec<Evaluation> {
    positions.par_iter().map(|s| objective.evaluate(s)).collect()
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

fn calibrate_penalty(evals: &[Evaluation]) -> f64 {
    let usable = |e: &&Evaluation| e.objective.is_finite() && e.objective < SENTINEL_CRB;
    let mut feasible: Vec<f64> = evals
        .iter()
        .filter(usable)
        .filter(|e| e.is_feasible())
        .map(|e| e.objective)
        .collect();
    let mut identifiable: Vec<f64> = evals.iter().filter(usable).map(|e| e.objective).collect();
    median(&mut feasible)
        .or_else(|| median(&mut identifiable))
        .filter(|m| *m > 0.0)
        .map_or(1.0, |m| 1e3 * m)
}

impl SwarmState {
    /// Random initial swarm. `warm_start` positions (projected) replace the
    /// first particles; the random draws are made regardless, so adding a
    /// warm start does not shift the rest of the stream.
    pub fn initialize<O: Objective + ?Sized>(
        objective: &O,
        params: &PsoParams,
        seed: u64,
        warm_start: &[Vec<f64>],
    ) -> Result<Self> {
        params.validate()?;
        let dims = objective.dims();
        if warm_start.len() > params.particles {
            return Err(Error::InvalidParameter(format!(
                "{} warm-start particles exceed the swarm size {}",
                warm_start.len(),
                params.particles
            )));
        }
        if let Some(w) = warm_start.iter().find(|w| w.len() != dims.len()) {
            return Err(Error::DimensionMismatch(format!(
                "warm-start particle has {} coordinates, search space has {}",
                w.len(),
                dims.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut starts: Vec<(Vec<f64>, Vec<f64>)> = (0..params.particles)
            .map(|_| {
                let pos: Vec<f64> = dims.iter().map(|d| d.sample(&mut rng)).collect();
                let vel: Vec<f64> = dims
                    .iter()
                    .map(|d| {
                        let b = d.velocity_bound();
                        if b > 0.0 {
                            rng.random_range(-b..=b)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                (pos, vel)
            })
            .collect();
        for (slot, w) in starts.iter_mut().zip(warm_start) {
            slot.0 = w.clone();
            project(dims, &mut slot.0);
        }

        let refs: Vec<&[f64]> = starts.iter().map(|(p, _)| p.as_slice()).collect();
        let evals = evaluate_all(objective, &refs);
        let penalty = match params.penalty {
            PenaltyWeight::Fixed(t) => t,
            PenaltyWeight::Auto => calibrate_penalty(&evals),
        };

        let mut best_idx = 0;
        let mut best_fit = f64::INFINITY;
        let mut particles = Vec::with_capacity(starts.len());
        for (i, ((pos, vel), e)) in starts.into_iter().zip(&evals).enumerate() {
            let fit = e.fitness(penalty);
            if fit < best_fit || i == 0 {
                best_fit = fit;
                best_idx = i;
            }
            particles.push(Particle {
                personal_best: pos.clone(),
                position: pos,
                velocity: vel,
                personal_best_fitness: fit,
            });
        }
        Ok(Self {
            global_best: particles[best_idx].position.clone(),
            global_best_fitness: best_fit,
            global_best_evaluation: evals[best_idx],
            particles,
            iteration: 0,
            penalty,
            rng,
        })
    }

    /// One synchronous swarm iteration.
    pub fn step<O: Objective + ?Sized>(&mut self, objective: &O, params: &PsoParams) {
        let dims = objective.dims();
        for p in &mut self.particles {
            let t1: f64 = self.rng.random();
            let t2: f64 = self.rng.random();
            for (j, dim) in dims.iter().enumerate() {
                let v_old = p.velocity[j];
                let v_new = params.inertia * v_old
                    + params.cognitive * t1 * dim.delta(p.position[j], p.personal_best[j])
                    + params.social * t2 * dim.delta(p.position[j], self.global_best[j]);
                let mv = match params.position_update {
                    PositionUpdate::Fresh => v_new,
                    PositionUpdate::Lagged => v_old,
                };
                p.velocity[j] = v_new;
                p.position[j] = dim.project(p.position[j] + mv);
            }
        }
        let refs: Vec<&[f64]> = self.particles.iter().map(|p| p.position.as_slice()).collect();
        let evals = evaluate_all(objective, &refs);
        for (p, e) in self.particles.iter_mut().zip(&evals) {
            let fit = e.fitness(self.penalty);
            if fit < p.personal_best_fitness {
                p.personal_best_fitness = fit;
                p.personal_best.clone_from(&p.position);
            }
            if fit < self.global_best_fitness {
                self.global_best_fitness = fit;
                self.global_best.clone_from(&p.position);
                self.global_best_evaluation = *e;
            }
        }
        self.iteration += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub best: Vec<f64>,
    pub best_fitness: f64,
    pub best_evaluation: Evaluation,
    /// Global-best fitness after initialization and after every iteration.
    pub history: Vec<f64>,
    pub penalty: f64,
}

pub fn optimize<O: Objective + ?Sized>(
    objective: &O,
    params: &PsoParams,
    seed: u64,
    warm_start: &[Vec<f64>],
) -> Result<PsoOutcome> {
    let mut state = SwarmState::initialize(objective, params, seed, warm_start)?;
    let mut history = Vec::with_capacity(params.iterations + 1);
    history.push(state.global_best_fitness);
    for _ in 0..params.iterations {
        state.step(objective, params);
        history.push(state.global_best_fitness);
    }
    Ok(PsoOutcome {
        best: state.global_best,
        best_fitness: state.global_best_fitness,
        best_evaluation: state.global_best_evaluation,
        history,
        penalty: state.penalty,
    })
}

/// Penalized pairs of a raw pose vector: reflection (ordered pairs),
/// blockage, then minimum distance (`i < j`), in the same order as
/// [`crate::geometry::check_constraints`].
pub fn penalty_set(s: &[f64], local_normal: &Vec3, cons: &MovementConstraints) -> Vec<Violation> {
    assert!(s.len().is_multiple_of(6), "pose vector length must be a multiple of 6");
    let b = s.len() / 6;
    let centre = |i: usize| Vec3::new(s[3 * i], s[3 * i + 1], s[3 * i + 2]);
    let normal = |i: usize| {
        let o = 3 * b + 3 * i;
        rotation_matrix(&Vec3::new(s[o], s[o + 1], s[o + 2])) * local_normal
    };
    let q: Vec<Vec3> = (0..b).map(centre).collect();
    let n: Vec<Vec3> = (0..b).map(normal).collect();
    let mut out = Vec::new();
    for i in 0..b {
        for j in 0..b {
            if i != j && !(n[i].dot(&(q[j] - q[i])) <= 0.0) {
                out.push(Violation::Reflection { surface: i, other: j });
            }
        }
    }
    for i in 0..b {
        if !(n[i].dot(&q[i]) >= 0.0) {
            out.push(Violation::Blockage { surface: i });
        }
    }
    for i in 0..b {
        for j in i + 1..b {
            if !((q[i] - q[j]).norm() >= cons.d_min()) {
                out.push(Violation::Distance { first: i, second: j });
            }
        }
    }
    out
}

/// Full pose search: `B` identical surfaces, each free in position and
/// rotation.
pub struct PoseObjective<'a> {
    problem: &'a SensingProblem,
    local: LocalArray,
    dims: Vec<Dim>,
}

impl<'a> PoseObjective<'a> {
    pub fn new(problem: &'a SensingProblem, local: LocalArray, surfaces: usize) -> Result<Self> {
        if surfaces == 0 {
            return Err(Error::InvalidParameter("need at least one surface".into()));
        }
        let h = problem.site.half_side();
        let mut dims = vec![Dim::Clamped { lo: -h, hi: h }; 3 * surfaces];
        dims.extend(std::iter::repeat_n(Dim::Periodic, 3 * surfaces));
        Ok(Self { problem, local, dims })
    }

    pub fn surfaces(&self) -> usize {
        self.dims.len() / 6
    }

    pub fn decode(&self, s: &[f64]) -> ArrayLayout {
        let poses = decode_poses(s);
        ArrayLayout::uniform(&poses, &self.local).expect("pose vector decodes to a valid layout")
    }
}

impl Objective for PoseObjective<'_> {
    fn dims(&self) -> &[Dim] {
        &self.dims
    }

    fn evaluate(&self, s: &[f64]) -> Evaluation {
        let violations = penalty_set(s, &self.local.normal(), &self.problem.cons).len();
        Evaluation {
            objective: self.problem.crb(&self.decode(s)),
            violations,
        }
    }
}

/// Splits `s = [q; u]` into poses.
pub fn decode_poses(s: &[f64]) -> Vec<SurfacePose> {
    assert!(s.len().is_multiple_of(6), "pose vector length must be a multiple of 6");
    let b = s.len() / 6;
    (0..b)
        .map(|i| {
            let o = 3 * b + 3 * i;
            SurfacePose::new(
                Vec3::new(s[3 * i], s[3 * i + 1], s[3 * i + 2]),
                Vec3::new(s[o], s[o + 1], s[o + 2]),
            )
        })
        .collect()
}

/// Inverse of [`decode_poses`].
pub fn encode_poses(poses: &[SurfacePose]) -> Vec<f64> {
    let mut s: Vec<f64> = poses.iter().flat_map(|p| p.position.iter().copied()).collect();
    s.extend(poses.iter().flat_map(|p| p.rotation.iter().copied()));
    s
}
