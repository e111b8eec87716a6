//! The jump-process view of the dynamics.
//!
//! Along a trajectory, the matrices `P*_{0,t}` solving
//! `dM/dt = alpha Q_t M`, `M(0) = I` are stochastic and reproduce the
//! velocities through `v(t) = P*_{0,t} v(0)`. Their Dobrushin
//! coefficients contract the velocity diameter, and the associated
//! time-reversed jump process can be sampled pathwise: its conditional
//! expectations are Monte Carlo estimators of the velocities.
//!
//! Rate convention: the per-state intensity folds the coupling in,
//! `q_i(t) = alpha * sum_{j != i} Q_{T-t}(i, j)`, and the embedded
//! chain `Pi_t(i, .)` is the normalised off-diagonal row of `Q_{T-t}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::kernel::{fill_rate_matrix, CommunicationKernel};
use crate::numerics;
use crate::Model;

/// Rate matrices at every grid node and cell midpoint of a trajectory,
/// shared by the transition-function solvers.
struct StageRates {
    /// `matrices[2k]` holds `Q` at grid node `k`; `matrices[2k + 1]` at
    /// the midpoint of cell `k` (positions Hermite-interpolated).
    matrices: Vec<DMatrix<f64>>,
}

impl StageRates {
    fn build(traj: &Trajectory, g: &InteractionGraph, kernel: &CommunicationKernel) -> Self {
        let n = g.n();
        let model = traj.model();
        let cells = traj.len() - 1;
        let mut matrices = Vec::with_capacity(2 * cells + 1);
        let mut positions = traj.initial_state().positions.clone();
        for k in 0..traj.len() {
            let mut q = DMatrix::zeros(n, n);
            fill_rate_matrix(g, kernel, &traj.state(k).positions, model, &mut q);
            matrices.push(q);
            if k + 1 < traj.len() {
                let mid = 0.5 * (traj.time(k) + traj.time(k + 1));
                traj.interpolate_positions(mid, &mut positions);
                let mut q = DMatrix::zeros(n, n);
                fill_rate_matrix(g, kernel, &positions, model, &mut q);
                matrices.push(q);
            }
        }
        Self { matrices }
    }

    fn node(&self, k: usize) -> &DMatrix<f64> {
        &self.matrices[2 * k]
    }

    fn midpoint(&self, cell: usize) -> &DMatrix<f64> {
        &self.matrices[2 * cell + 1]
    }
}

/// One RK4 sweep of `dM/dt = alpha Q_t M` from grid index `from` to
/// `to`, starting from the identity; `record` receives `M` after every
/// step (and once for the initial identity).
fn integrate_transition(
    traj: &Trajectory,
    rates: &StageRates,
    alpha: f64,
    from: usize,
    to: usize,
    mut record: impl FnMut(usize, &DMatrix<f64>),
) -> DMatrix<f64> {
    let n = rates.node(0).nrows();
    let mut m = DMatrix::identity(n, n);
    record(from, &m);
    let mut k1 = DMatrix::zeros(n, n);
    let mut k2 = DMatrix::zeros(n, n);
    let mut k3 = DMatrix::zeros(n, n);
    let mut k4 = DMatrix::zeros(n, n);
    let mut tmp = DMatrix::zeros(n, n);
    for cell in from..to {
        let h = traj.time(cell + 1) - traj.time(cell);
        k1.gemm(alpha, rates.node(cell), &m, 0.0);

        tmp.copy_from(&m);
        numerics::add_scaled(&mut tmp, &k1, 0.5 * h);
        k2.gemm(alpha, rates.midpoint(cell), &tmp, 0.0);

        tmp.copy_from(&m);
        numerics::add_scaled(&mut tmp, &k2, 0.5 * h);
        k3.gemm(alpha, rates.midpoint(cell), &tmp, 0.0);

        tmp.copy_from(&m);
        numerics::add_scaled(&mut tmp, &k3, h);
        k4.gemm(alpha, rates.node(cell + 1), &tmp, 0.0);

        let w = h / 6.0;
        numerics::add_scaled(&mut m, &k1, w);
        numerics::add_scaled(&mut m, &k2, 2.0 * w);
        numerics::add_scaled(&mut m, &k3, 2.0 * w);
        numerics::add_scaled(&mut m, &k4, w);
        record(cell + 1, &m);
    }
    m
}

/// The stochastic matrices `P*_{0,t_k}` on a trajectory's grid.
#[derive(Debug, Clone)]
pub struct TransitionFunction {
    times: Vec<f64>,
    matrices: Vec<DMatrix<f64>>,
    model: Model,
    alpha: f64,
}

impl TransitionFunction {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn matrix(&self, k: usize) -> &DMatrix<f64> {
        &self.matrices[k]
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Worst deviation from row-stochasticity over all grid matrices:
    /// `max(|row sum - 1|, -min entry)`.
    pub fn stochasticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in &self.matrices {
            for i in 0..m.nrows() {
                let mut sum = 0.0;
                for j in 0..m.ncols() {
                    worst = worst.max(-m[(i, j)]);
                    sum += m[(i, j)];
                }
                worst = worst.max((sum - 1.0).abs());
            }
        }
        worst
    }

    /// Max-norm duality gap `max_k |v(t_k) - P*_{0,t_k} v(0)|_inf`
    /// between the trajectory velocities and their jump-process
    /// representation.
    pub fn duality_gap(&self, traj: &Trajectory) -> Result<f64> {
        if traj.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "trajectory has {} grid points, transition function {}",
                traj.len(),
                self.len()
            )));
        }
        let v0 = &traj.initial_state().velocities;
        let mut gap = 0.0f64;
        let mut predicted = v0.clone();
        for k in 0..self.len() {
            predicted.gemm(1.0, &self.matrices[k], v0, 0.0);
            let actual = &traj.state(k).velocities;
            for r in 0..predicted.nrows() {
                for c in 0..predicted.ncols() {
                    gap = gap.max((predicted[(r, c)] - actual[(r, c)]).abs());
                }
            }
        }
        Ok(gap)
    }
}

/// Integrates the backward-in-label Kolmogorov system
/// `dM/dt = alpha Q_t M`, `M(0) = I` with RK4 on the trajectory's own
/// grid, rebuilding `Q` from Hermite-interpolated positions at stage
/// times, and returns every `P*_{0,t_k}`.
pub fn solve_transition(
    traj: &Trajectory,
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
) -> Result<TransitionFunction> {
    check_compatible(traj, g)?;
    let rates = StageRates::build(traj, g, kernel);
    let mut matrices: Vec<DMatrix<f64>> = Vec::with_capacity(traj.len());
    integrate_transition(traj, &rates, traj.alpha(), 0, traj.len() - 1, |_, m| {
        matrices.push(m.clone());
    });
    Ok(TransitionFunction {
        times: traj.times().collect(),
        matrices,
        model: traj.model(),
        alpha: traj.alpha(),
    })
}

/// `P*_{s,t}` for grid indices `s <= t`, recomputed on demand by
/// integrating the same system from the identity at `t_s`.
pub fn solve_transition_between(
    traj: &Trajectory,
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    s_index: usize,
    t_index: usize,
) -> Result<DMatrix<f64>> {
    check_compatible(traj, g)?;
    if s_index > t_index || t_index >= traj.len() {
        return Err(Error::GridMismatch(format!(
            "invalid grid window [{s_index}, {t_index}] on {} points",
            traj.len()
        )));
    }
    let rates = StageRates::build(traj, g, kernel);
    Ok(integrate_transition(
        traj,
        &rates,
        traj.alpha(),
        s_index,
        t_index,
        |_, _| {},
    ))
}

fn check_compatible(traj: &Trajectory, g: &InteractionGraph) -> Result<()> {
    if traj.initial_state().n() != g.n() {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} agents, graph has {}",
            traj.initial_state().n(),
            g.n()
        )));
    }
    if traj.model() == Model::MotschTadmor {
        g.check_mt_positivity()?;
    }
    Ok(())
}

/// Dobrushin ergodicity coefficient
/// `mu(P) = min_{i,j} sum_k min(P(i,k), P(j,k))` of a row-stochastic
/// matrix; rejects rows that are not stochastic within 1e-9.
pub fn dobrushin(p: &DMatrix<f64>) -> Result<f64> {
    let n = p.nrows();
    if n != p.ncols() {
        return Err(Error::NotSquare {
            rows: n,
            cols: p.ncols(),
        });
    }
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            if p[(i, j)] < -1e-9 {
                return Err(Error::NotStochastic {
                    row: i,
                    reason: format!("entry ({i},{j}) = {}", p[(i, j)]),
                });
            }
            sum += p[(i, j)];
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotStochastic {
                row: i,
                reason: format!("sums to {sum}"),
            });
        }
    }
    let mut mu = 1.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let overlap: f64 = (0..n).map(|k| p[(i, k)].min(p[(j, k)])).sum();
            mu = mu.min(overlap);
        }
    }
    Ok(mu)
}

/// One sampled `(s, t)` pair of the contraction inequality
/// `V(t) <= (1 - mu(P*_{s,t})) V(s)`.
#[derive(Debug, Clone)]
pub struct ContractionSample {
    pub s_index: usize,
    pub t_index: usize,
    pub mu: f64,
    pub v_s: f64,
    pub v_t: f64,
    /// `V(t) - (1 - mu) V(s)`; positive values eat into the tolerance.
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub samples: Vec<ContractionSample>,
    pub worst_slack: f64,
    /// Absolute allowance `1e-7 * V(0)`.
    pub tolerance: f64,
    pub violations: usize,
}

/// Samples `n_pairs` grid pairs `s < t` (seeded, reproducible), solves
/// `P*_{s,t}` for each and checks the Dobrushin contraction of the
/// velocity diameters.
pub fn contraction_check(
    traj: &Trajectory,
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    n_pairs: usize,
    seed: u64,
) -> Result<ContractionReport> {
    check_compatible(traj, g)?;
    if traj.len() < 2 {
        return Err(Error::GridMismatch(
            "need at least two grid points".to_string(),
        ));
    }
    let rates = StageRates::build(traj, g, kernel);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..n_pairs)
        .map(|_| {
            let a = rng.random_range(0..traj.len());
            let b = rng.random_range(0..traj.len() - 1);
            let b = if b >= a { b + 1 } else { b };
            (a.min(b), a.max(b))
        })
        .collect();
    let v = traj.velocity_diameters();
    let tolerance = 1e-7 * v[0];
    let samples: Vec<ContractionSample> = pairs
        .par_iter()
        .map(|&(s, t)| {
            let p = integrate_transition(traj, &rates, traj.alpha(), s, t, |_, _| {});
            dobrushin(&p).map(|mu| {
                let slack = v[t] - (1.0 - mu) * v[s];
                ContractionSample {
                    s_index: s,
                    t_index: t,
                    mu,
                    v_s: v[s],
                    v_t: v[t],
                    slack,
                }
            })
        })
        .collect::<Result<_>>()?;
    let worst_slack = samples
        .iter()
        .map(|s| s.slack)
        .fold(f64::NEG_INFINITY, f64::max);
    let violations = samples.iter().filter(|s| s.slack > tolerance).count();
    Ok(ContractionReport {
        samples,
        worst_slack,
        tolerance,
        violations,
    })
}

/// One jump of a sampled path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub to: usize,
}

/// A sampled path of the time-reversed jump process on `[0, horizon]`.
/// The recorded jumps are the finite jump times; the path ends when the
/// next exponential clock exceeds the remaining integrated hazard (the
/// `+inf` jump marker) and the state then holds until the horizon.
#[derive(Debug, Clone)]
pub struct JumpPath {
    pub initial_state: usize,
    pub horizon: f64,
    pub jumps: Vec<Jump>,
}

impl JumpPath {
    pub fn state_at(&self, t: f64) -> usize {
        let mut state = self.initial_state;
        for jump in &self.jumps {
            if jump.time <= t {
                state = jump.to;
            } else {
                break;
            }
        }
        state
    }

    pub fn final_state(&self) -> usize {
        self.jumps.last().map_or(self.initial_state, |j| j.to)
    }
}

/// Sampler for the jump process of generator `alpha Q_{T-t}` on
/// `[0, T]`: per-state intensities are tabulated on the (reversed)
/// trajectory grid, integrated hazards accumulate by trapezoid and
/// invert linearly within cells, and jump targets are drawn from the
/// normalised rate row at the exact jump time.
pub struct JumpProcessSampler<'a> {
    traj: &'a Trajectory,
    g: &'a InteractionGraph,
    kernel: &'a CommunicationKernel,
    horizon: f64,
    /// Reversed-time grid `0 = u_0 < ... < u_M = T`.
    u_grid: Vec<f64>,
    /// `cumulative[i][m]`: integrated hazard of state `i` up to `u_m`.
    cumulative: Vec<Vec<f64>>,
}

impl<'a> JumpProcessSampler<'a> {
    pub fn new(
        traj: &'a Trajectory,
        g: &'a InteractionGraph,
        kernel: &'a CommunicationKernel,
        horizon: f64,
    ) -> Result<Self> {
        check_compatible(traj, g)?;
        let end = traj.horizon();
        let tol = 1e-9 * end.max(1.0);
        if !(0.0..=end + tol).contains(&horizon) {
            return Err(Error::HorizonExceeded {
                t: horizon,
                horizon: end,
            });
        }
        let horizon = horizon.min(end);
        let n = g.n();
        let model = traj.model();
        let alpha = traj.alpha();

        // u = horizon - t for each grid time t <= horizon, ascending;
        // prepend u = 0 when the horizon falls between grid points.
        let mut u_grid: Vec<f64> = traj
            .times()
            .filter(|&t| t <= horizon + tol)
            .map(|t| (horizon - t).max(0.0))
            .collect();
        u_grid.reverse();
        if u_grid.first().copied().unwrap_or(f64::INFINITY) > tol {
            u_grid.insert(0, 0.0);
        } else {
            u_grid[0] = 0.0;
        }

        let mut q = DMatrix::zeros(n, n);
        let mut positions = traj.initial_state().positions.clone();
        let mut rates = vec![vec![0.0f64; u_grid.len()]; n];
        for (m, &u) in u_grid.iter().enumerate() {
            let t = horizon - u;
            match traj.index_at(t) {
                Some(k) => fill_rate_matrix(g, kernel, &traj.state(k).positions, model, &mut q),
                None => {
                    traj.interpolate_positions(t, &mut positions);
                    fill_rate_matrix(g, kernel, &positions, model, &mut q);
                }
            }
            for (i, row) in rates.iter_mut().enumerate() {
                row[m] = -alpha * q[(i, i)];
            }
        }
        let cumulative = rates
            .iter()
            .map(|row| {
                let mut acc = vec![0.0f64; row.len()];
                for m in 1..row.len() {
                    let du = u_grid[m] - u_grid[m - 1];
                    acc[m] = acc[m - 1] + 0.5 * (row[m] + row[m - 1]) * du;
                }
                acc
            })
            .collect();
        Ok(Self {
            traj,
            g,
            kernel,
            horizon,
            u_grid,
            cumulative,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Integrated hazard of `state` up to time `u`, linear within cells.
    fn hazard_at(&self, state: usize, u: f64) -> f64 {
        let cum = &self.cumulative[state];
        let idx = self
            .u_grid
            .partition_point(|&node| node <= u)
            .clamp(1, self.u_grid.len() - 1);
        let (u0, u1) = (self.u_grid[idx - 1], self.u_grid[idx]);
        let frac = ((u - u0) / (u1 - u0)).clamp(0.0, 1.0);
        cum[idx - 1] + frac * (cum[idx] - cum[idx - 1])
    }

    /// First `u` with integrated hazard equal to `target`, or `None`
    /// when the hazard over `[0, horizon]` never reaches it.
    fn invert_hazard(&self, state: usize, target: f64) -> Option<f64> {
        let cum = &self.cumulative[state];
        if target >= *cum.last().unwrap() {
            return None;
        }
        let idx = cum.partition_point(|&c| c < target).max(1);
        let dc = cum[idx] - cum[idx - 1];
        let frac = if dc > 0.0 {
            (target - cum[idx - 1]) / dc
        } else {
            1.0
        };
        Some(self.u_grid[idx - 1] + frac * (self.u_grid[idx] - self.u_grid[idx - 1]))
    }

    /// Draws the next state from the embedded chain at process time `u`:
    /// the normalised off-diagonal rate row (the MT normalisation and
    /// the coupling cancel).
    fn sample_target(&self, state: usize, u: f64, draw: f64) -> usize {
        let t = self.horizon - u;
        let n = self.g.n();
        let mut positions = self.traj.initial_state().positions.clone();
        let source = match self.traj.index_at(t) {
            Some(k) => &self.traj.state(k).positions,
            None => {
                self.traj.interpolate_positions(t, &mut positions);
                &positions
            }
        };
        let mut weights = vec![0.0f64; n];
        let mut total = 0.0;
        for (j, w) in weights.iter_mut().enumerate() {
            if j != state && self.g.has_edge(state, j) {
                *w = self.g.weight(state, j)
                    * self
                        .kernel
                        .evaluate(crate::kernel::row_distance(source, state, j));
                total += *w;
            }
        }
        if total <= 0.0 {
            return state;
        }
        let mut acc = 0.0;
        for (j, &w) in weights.iter().enumerate() {
            acc += w;
            if draw * total <= acc && w > 0.0 {
                return j;
            }
        }
        n - 1
    }

    /// Samples one path from `initial` with the given generator.
    pub fn sample<R: Rng + ?Sized>(&self, initial: usize, rng: &mut R) -> JumpPath {
        assert!(initial < self.g.n(), "initial state out of range");
        let mut jumps = Vec::new();
        let mut state = initial;
        let mut consumed = 0.0;
        loop {
            let tau = sample_unit_exponential(rng);
            match self.invert_hazard(state, consumed + tau) {
                None => break,
                Some(u_jump) => {
                    let draw: f64 = rng.random();
                    let next = self.sample_target(state, u_jump, draw);
                    jumps.push(Jump {
                        time: u_jump,
                        to: next,
                    });
                    state = next;
                    consumed = self.hazard_at(state, u_jump);
                }
            }
        }
        JumpPath {
            initial_state: initial,
            horizon: self.horizon,
            jumps,
        }
    }

    /// Seeded path sampling; `stream` selects an independent substream,
    /// so parallel sampling stays reproducible.
    pub fn sample_seeded(&self, initial: usize, seed: u64, stream: u64) -> JumpPath {
        let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, stream));
        self.sample(initial, &mut rng)
    }
}

fn sample_unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

/// SplitMix64 step mixing the base seed with a stream index.
fn substream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Samples a single jump path over `[0, horizon]`, deterministic in the
/// seed.
pub fn sample_jump_process(
    traj: &Trajectory,
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    initial: usize,
    horizon: f64,
    seed: u64,
) -> Result<JumpPath> {
    let sampler = JumpProcessSampler::new(traj, g, kernel, horizon)?;
    Ok(sampler.sample_seeded(initial, seed, 0))
}

/// Componentwise Monte Carlo mean and standard error.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: DVector<f64>,
    pub stderr: DVector<f64>,
    pub n_samples: usize,
}

/// Estimates `v_i(t)` by averaging initial velocities at the terminal
/// states of jump paths started in `i` (duality with horizon `T = t`).
/// Paths are sampled in parallel over deterministic substreams, then
/// reduced sequentially so the result is bit-stable for a given seed.
pub fn mc_velocity_estimate(
    traj: &Trajectory,
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    state_index: usize,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if state_index >= g.n() {
        return Err(Error::InvalidState(format!(
            "state index {state_index} out of range for {} agents",
            g.n()
        )));
    }
    if n_samples == 0 {
        return Err(Error::InvalidState("need at least one sample".to_string()));
    }
    let v0 = &traj.initial_state().velocities;
    let d = v0.ncols();
    if t == 0.0 {
        return Ok(McEstimate {
            mean: DVector::from_fn(d, |m, _| v0[(state_index, m)]),
            stderr: DVector::zeros(d),
            n_samples,
        });
    }
    let sampler = JumpProcessSampler::new(traj, g, kernel, t)?;
    let finals: Vec<usize> = (0..n_samples)
        .into_par_iter()
        .map(|p| {
            sampler
                .sample_seeded(state_index, seed, p as u64)
                .final_state()
        })
        .collect();
    // Shifted two-pass accumulation: with all samples identical the
    // estimate is exact and the spread is exactly zero.
    let mut mean: DVector<f64> = DVector::zeros(d);
    for m in 0..d {
        let shift = v0[(finals[0], m)];
        let sum: f64 = finals.iter().map(|&f| v0[(f, m)] - shift).sum();
        mean[m] = shift + sum / n_samples as f64;
    }
    let mut stderr: DVector<f64> = DVector::zeros(d);
    if n_samples > 1 {
        for &f in &finals {
            for m in 0..d {
                let diff = v0[(f, m)] - mean[m];
                stderr[m] += diff * diff;
            }
        }
        for m in 0..d {
            stderr[m] = (stderr[m] / ((n_samples - 1) as f64 * n_samples as f64)).sqrt();
        }
    }
    Ok(McEstimate {
        mean,
        stderr,
        n_samples,
    })
}

/// `P(Gamma(height, 1) > x) = e^{-x} sum_{n < height} x^n / n!`.
pub fn gamma_tail(height: usize, x: f64) -> f64 {
    assert!(x >= 0.0, "gamma tail needs x >= 0, got {x}");
    numerics::gamma_upper_tail(height, x)
}

/// Which regime's ergodicity bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundRegime {
    Hierarchical,
    GeneralLeadership,
}

/// Structural lower bound on the Dobrushin coefficient `mu(P*_{0,t})`
/// given a position-diameter bound `r` valid on `[0, t]`.
///
/// Hierarchical: `mu >= 1 - P(Gamma_H > omega t)` with the per-state
/// rate floor `omega`. General leadership:
/// `mu >= (1 and alpha theta t / D)^D e^{-alpha rho t}` with the edge
/// rate floor `theta` and row-sum ceiling `rho` of the model.
pub fn ergodicity_lower_bound(
    regime: BoundRegime,
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    model: Model,
    alpha: f64,
    t: f64,
    r: f64,
) -> Result<f64> {
    let bad = |x: f64| x.is_nan() || x < 0.0;
    if bad(t) || bad(r) || !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidState(format!(
            "need t >= 0, r >= 0, alpha > 0; got t = {t}, r = {r}, alpha = {alpha}"
        )));
    }
    let n = g.n();
    let psi = kernel.evaluate(r);
    match regime {
        BoundRegime::Hierarchical => {
            let hierarchy = g.heights()?;
            if n < 2 {
                return Err(Error::MissingConstant(
                    "hierarchy height of a single agent".to_string(),
                ));
            }
            let a_star = (1..n)
                .map(|i| g.row_sum(i))
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .unwrap();
            let omega = match model {
                Model::CuckerSmale => alpha * a_star * psi,
                Model::MotschTadmor => {
                    let b = g.mt_matrix()?;
                    let b_star = (1..n)
                        .map(|i| b.row(i).sum())
                        .min_by(|a, b| a.partial_cmp(b).unwrap())
                        .unwrap();
                    let offset_bar = (1..n).map(|i| g.offsets()[i]).fold(0.0f64, f64::max);
                    alpha * b_star * (offset_bar + a_star) * psi / (offset_bar + a_star * psi)
                }
            };
            Ok(1.0 - gamma_tail(hierarchy.max, omega * t))
        }
        BoundRegime::GeneralLeadership => {
            let diameter =
                g.coalescence_diameter()
                    .diameter
                    .ok_or_else(|| Error::NoUniqueClosedClass {
                        count: g.closed_classes().len(),
                    })?;
            if diameter == 0 {
                return Err(Error::MissingConstant(
                    "coalescence diameter of a single agent".to_string(),
                ));
            }
            let a_hat = g
                .weights()
                .iter()
                .filter(|&&w| w > 0.0)
                .copied()
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .ok_or_else(|| Error::MissingConstant("smallest positive weight".to_string()))?;
            let (theta, rate_ceiling) = match model {
                Model::CuckerSmale => {
                    let a_bar = (0..n).map(|i| g.row_sum(i)).fold(0.0f64, f64::max);
                    (a_hat * psi, a_bar)
                }
                Model::MotschTadmor => {
                    let k = g
                        .k_denominator()
                        .ok_or_else(|| Error::MissingConstant("K (no edge to scan)".to_string()))?;
                    let b = g.mt_matrix()?;
                    let b_bar = (0..n).map(|i| b.row(i).sum()).fold(0.0f64, f64::max);
                    (a_hat * psi / (k + a_hat * psi), b_bar)
                }
            };
            let d_f = diameter as f64;
            let clipped = 1.0f64.min(alpha * theta * t / d_f);
            Ok(clipped.powi(diameter as i32) * (-alpha * rate_ceiling * t).exp())
        }
    }
}
