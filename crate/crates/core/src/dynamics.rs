//! Fixed-step RK4 integration of the alignment ODE
//! `dx_i/dt = v_i`, `dv_i/dt = alpha * sum_j Q(i,j) (v_j - v_i)`
//! with the rate matrix rebuilt from current positions at every stage,
//! plus diameter tracking and reversible asymptotics.
//!
//! The step is fixed (rather than adaptive) because trajectories feed
//! the transition-function solver in [`crate::markov`], which
//! co-integrates on the same grid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{validate_probability_vector, InteractionGraph};
use crate::kernel::{fill_rate_matrix, row_distance, CommunicationKernel};
use crate::Model;

/// Positions and velocities of all agents at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub time: f64,
    pub positions: DMatrix<f64>,
    pub velocities: DMatrix<f64>,
}

impl AgentState {
    pub fn new(time: f64, positions: DMatrix<f64>, velocities: DMatrix<f64>) -> Result<Self> {
        if positions.shape() != velocities.shape() {
            return Err(Error::InvalidState(format!(
                "positions are {:?} but velocities are {:?}",
                positions.shape(),
                velocities.shape()
            )));
        }
        if positions.nrows() == 0 || positions.ncols() == 0 {
            return Err(Error::InvalidState(
                "need at least one agent and one dimension".to_string(),
            ));
        }
        let finite = positions
            .iter()
            .chain(velocities.iter())
            .all(|x| x.is_finite())
            && time.is_finite();
        if !finite {
            return Err(Error::InvalidState("non-finite entry".to_string()));
        }
        Ok(Self {
            time,
            positions,
            velocities,
        })
    }

    pub fn n(&self) -> usize {
        self.positions.nrows()
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    /// Position and velocity diameters `(X, V)`: exact pairwise maxima
    /// of the Euclidean distances.
    pub fn diameters(&self) -> (f64, f64) {
        (
            matrix_diameter(&self.positions),
            matrix_diameter(&self.velocities),
        )
    }
}

pub(crate) fn matrix_diameter(rows: &DMatrix<f64>) -> f64 {
    let n = rows.nrows();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max(row_distance(rows, i, j));
        }
    }
    best
}

/// A simulated trajectory on a uniform grid (the final step may be
/// truncated to land exactly on the horizon), with diameters recorded at
/// every grid point.
#[derive(Debug, Clone)]
pub struct Trajectory {
    model: Model,
    alpha: f64,
    states: Vec<AgentState>,
    diam_x: Vec<f64>,
    diam_v: Vec<f64>,
}

impl Trajectory {
    pub fn model(&self) -> Model {
        self.model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &AgentState {
        &self.states[k]
    }

    pub fn initial_state(&self) -> &AgentState {
        &self.states[0]
    }

    pub fn final_state(&self) -> &AgentState {
        self.states.last().unwrap()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.states[k].time
    }

    pub fn horizon(&self) -> f64 {
        self.final_state().time
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.time)
    }

    /// `X(t_k)` per grid point.
    pub fn position_diameters(&self) -> &[f64] {
        &self.diam_x
    }

    /// `V(t_k)` per grid point.
    pub fn velocity_diameters(&self) -> &[f64] {
        &self.diam_v
    }

    /// Largest position diameter observed up to grid index `k` inclusive.
    pub fn sup_position_diameter(&self, k: usize) -> f64 {
        self.diam_x[..=k].iter().copied().fold(0.0, f64::max)
    }

    /// Grid index whose time matches `t` within `1e-9 * max(1, horizon)`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.horizon().max(1.0);
        let idx = self
            .states
            .partition_point(|s| s.time < t - tol)
            .min(self.states.len() - 1);
        ((self.states[idx].time - t).abs() <= tol).then_some(idx)
    }

    /// Index of the grid cell containing `t`, clamped to the last cell.
    pub(crate) fn cell_of(&self, t: f64) -> usize {
        let k = self.states.partition_point(|s| s.time <= t);
        k.saturating_sub(1).min(self.states.len().saturating_sub(2))
    }

    /// Cubic Hermite interpolation of positions at an off-grid time,
    /// using the stored velocities as exact derivatives. Reproduces grid
    /// points exactly and keeps the interpolation error at the same
    /// order as the integrator's.
    pub(crate) fn interpolate_positions(&self, t: f64, out: &mut DMatrix<f64>) {
        let k = self.cell_of(t);
        let s0 = &self.states[k];
        let s1 = &self.states[k + 1];
        let h = s1.time - s0.time;
        let s = ((t - s0.time) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for r in 0..s0.positions.nrows() {
            for c in 0..s0.positions.ncols() {
                out[(r, c)] = h00 * s0.positions[(r, c)]
                    + h10 * h * s0.velocities[(r, c)]
                    + h01 * s1.positions[(r, c)]
                    + h11 * h * s1.velocities[(r, c)];
            }
        }
    }
}

/// Integrates the coupled system with classic RK4 at fixed step `dt`,
/// truncating the final step to land exactly on `t_end`. The velocity
/// diameter must be non-increasing along the run; violations beyond an
/// integrator-noise slack abort with a diagnostic.
pub fn simulate(
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    model: Model,
    alpha: f64,
    state0: &AgentState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if state0.n() != g.n() {
        return Err(Error::InvalidState(format!(
            "state has {} agents, graph has {}",
            state0.n(),
            g.n()
        )));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidState(format!(
            "coupling strength must be positive, got {alpha}"
        )));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidTimeStep(format!("dt = {dt}")));
    }
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidTimeStep(format!("horizon = {t_end}")));
    }
    if dt > t_end {
        return Err(Error::InvalidTimeStep(format!(
            "dt = {dt} exceeds the horizon {t_end}"
        )));
    }
    if model == Model::MotschTadmor {
        g.check_mt_positivity()?;
    }

    let n = state0.n();
    let d = state0.dim();
    let mut x = state0.positions.clone();
    let mut v = state0.velocities.clone();

    let mut q = DMatrix::zeros(n, n);
    let mut xs = DMatrix::zeros(n, d);
    let mut vs = DMatrix::zeros(n, d);
    let mut kx = [
        DMatrix::zeros(n, d),
        DMatrix::zeros(n, d),
        DMatrix::zeros(n, d),
        DMatrix::zeros(n, d),
    ];
    let mut kv = [
        DMatrix::zeros(n, d),
        DMatrix::zeros(n, d),
        DMatrix::zeros(n, d),
        DMatrix::zeros(n, d),
    ];

    let (x0_diam, v0_diam) = state0.diameters();
    let v_scale = state0.velocities.amax();
    // 1e-9 * V(0) absorbs integrator noise; the epsilon floor covers the
    // V(0) = 0 case where rounding alone perturbs the diameter.
    let slack = 1e-9 * v0_diam + 64.0 * f64::EPSILON * (1.0 + v_scale);

    let mut states = vec![AgentState {
        time: 0.0,
        positions: x.clone(),
        velocities: v.clone(),
    }];
    let mut diam_x = vec![x0_diam];
    let mut diam_v = vec![v0_diam];

    let mut t = 0.0;
    let time_eps = 1e-12 * t_end.max(1.0);
    let mut step_index = 0usize;
    while t < t_end - time_eps {
        step_index += 1;
        // k * dt keeps the grid uniform without accumulation drift; the
        // last step is whatever remains to the horizon.
        let t_next = (step_index as f64 * dt).min(t_end);
        let h = t_next - t;

        // Stage 1 at x.
        fill_rate_matrix(g, kernel, &x, model, &mut q);
        kx[0].copy_from(&v);
        kv[0].gemm(alpha, &q, &v, 0.0);

        // Stage 2 at x + h/2 k1.
        stage(&x, &kx[0], 0.5 * h, &mut xs);
        stage(&v, &kv[0], 0.5 * h, &mut vs);
        fill_rate_matrix(g, kernel, &xs, model, &mut q);
        kx[1].copy_from(&vs);
        kv[1].gemm(alpha, &q, &vs, 0.0);

        // Stage 3 at x + h/2 k2.
        stage(&x, &kx[1], 0.5 * h, &mut xs);
        stage(&v, &kv[1], 0.5 * h, &mut vs);
        fill_rate_matrix(g, kernel, &xs, model, &mut q);
        kx[2].copy_from(&vs);
        kv[2].gemm(alpha, &q, &vs, 0.0);

        // Stage 4 at x + h k3.
        stage(&x, &kx[2], h, &mut xs);
        stage(&v, &kv[2], h, &mut vs);
        fill_rate_matrix(g, kernel, &xs, model, &mut q);
        kx[3].copy_from(&vs);
        kv[3].gemm(alpha, &q, &vs, 0.0);

        let w = h / 6.0;
        for r in 0..n {
            for c in 0..d {
                x[(r, c)] +=
                    w * (kx[0][(r, c)] + 2.0 * kx[1][(r, c)] + 2.0 * kx[2][(r, c)] + kx[3][(r, c)]);
                v[(r, c)] +=
                    w * (kv[0][(r, c)] + 2.0 * kv[1][(r, c)] + 2.0 * kv[2][(r, c)] + kv[3][(r, c)]);
            }
        }
        t = t_next;

        if x.iter().chain(v.iter()).any(|z| !z.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite state at t = {t}")));
        }

        let state = AgentState {
            time: t,
            positions: x.clone(),
            velocities: v.clone(),
        };
        let (dx, dv) = state.diameters();
        let prev = *diam_v.last().unwrap();
        if dv > prev + slack {
            return Err(Error::MonotonicityViolated {
                t,
                from: prev,
                to: dv,
                slack,
            });
        }
        states.push(state);
        diam_x.push(dx);
        diam_v.push(dv);
    }

    Ok(Trajectory {
        model,
        alpha,
        states,
        diam_x,
        diam_v,
    })
}

#[inline]
fn stage(base: &DMatrix<f64>, k: &DMatrix<f64>, scale: f64, out: &mut DMatrix<f64>) {
    out.copy_from(base);
    crate::numerics::add_scaled(out, k, scale);
}

/// The flocking limit velocity `v* = sum_i pi_i v_i(0)` under a
/// reversible measure. Zero entries in `pi` are allowed so the measure
/// may live on the unique closed class only; detailed balance is still
/// required on the whole graph.
pub fn asymptotic_velocity(
    g: &InteractionGraph,
    pi: &DVector<f64>,
    v0: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    validate_probability_vector(pi, g.n(), false)?;
    if v0.nrows() != g.n() {
        return Err(Error::InvalidState(format!(
            "velocities have {} rows for {} agents",
            v0.nrows(),
            g.n()
        )));
    }
    let residual = g.detailed_balance_residual(pi);
    let tolerance = crate::graph::DETAILED_BALANCE_TOL * g.weights().amax().max(f64::MIN_POSITIVE);
    if residual > tolerance {
        return Err(Error::NotReversible {
            residual,
            tolerance,
        });
    }
    let d = v0.ncols();
    let mut out = DVector::zeros(d);
    for i in 0..g.n() {
        for m in 0..d {
            out[m] += pi[i] * v0[(i, m)];
        }
    }
    Ok(out)
}

/// Builds the star graph with hub 0: spoke `i` points to the hub with
/// weight `hub_in[i-1] > 0` and the hub points back with weight
/// `hub_out[i-1] >= 0`. Returns the reversible measure
/// `pi_0 = (1 + sum B_j/A_j)^{-1}`, `pi_i = (B_i/A_i) pi_0` when every
/// hub-out weight is positive; with some spoke unreachable the measure
/// degenerates and is reported absent.
pub fn star_graph(
    hub_in: &[f64],
    hub_out: &[f64],
) -> Result<(InteractionGraph, Option<DVector<f64>>)> {
    if hub_in.len() != hub_out.len() || hub_in.is_empty() {
        return Err(Error::InvalidStar(format!(
            "need matching non-empty spoke weight lists, got {} and {}",
            hub_in.len(),
            hub_out.len()
        )));
    }
    if let Some(i) = hub_in.iter().position(|&a| !a.is_finite() || a <= 0.0) {
        return Err(Error::InvalidStar(format!(
            "spoke-to-hub weight {} must be positive, got {}",
            i + 1,
            hub_in[i]
        )));
    }
    if let Some(i) = hub_out.iter().position(|&b| b < 0.0 || !b.is_finite()) {
        return Err(Error::InvalidStar(format!(
            "hub-to-spoke weight {} must be non-negative, got {}",
            i + 1,
            hub_out[i]
        )));
    }
    let n = hub_in.len() + 1;
    let mut w = DMatrix::zeros(n, n);
    for i in 1..n {
        w[(i, 0)] = hub_in[i - 1];
        w[(0, i)] = hub_out[i - 1];
    }
    let g = InteractionGraph::new(w, DVector::zeros(n))?;
    let pi = if hub_out.iter().all(|&b| b > 0.0) {
        let ratio_sum: f64 = (0..n - 1).map(|i| hub_out[i] / hub_in[i]).sum();
        let pi0 = (1.0 + ratio_sum).recip();
        let mut pi = DVector::zeros(n);
        pi[0] = pi0;
        for i in 1..n {
            pi[i] = hub_out[i - 1] / hub_in[i - 1] * pi0;
        }
        Some(pi)
    } else {
        None
    };
    Ok((g, pi))
}
