//! Communication kernels and assembly of the time-dependent transition
//! rate matrices.
//!
//! A kernel is a positive non-increasing weight of distance with
//! `psi(0) <= 1`. The canonical family is the power law
//! `psi(r) = (1 + r^2)^(-beta/2)`; tabulated kernels with monotone
//! piecewise-linear interpolation are also supported and must declare
//! whether their tail integral converges.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::InteractionGraph;
use crate::numerics;
use crate::Model;

/// Absolute quadrature tolerance on the finite segment of tail
/// integrals. The flocking thresholds compare initial dispersions
/// against these integrals, so the quadrature error must sit far below any
/// meaningful certificate margin.
const QUAD_TOL: f64 = 1e-12;

/// Cutoff beyond which the power-law tail is integrated analytically via
/// `int_R^inf r^(-beta) dr`; at `R = 1e4` the relative correction is
/// below 1e-10 for every `beta > 1`.
const TAIL_CUTOFF: f64 = 1e4;

/// Declared behaviour of a tabulated kernel's tail integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailBehavior {
    /// `int^inf psi` declared finite; integrals truncate at the last
    /// knot, a conservative lower bound.
    ConvergentIntegral,
    /// `int^inf psi` declared infinite.
    DivergentIntegral,
}

/// A communication function `psi`.
#[derive(Debug, Clone, PartialEq)]
pub enum CommunicationKernel {
    /// `psi(r) = (1 + r^2)^(-beta/2)` with `beta >= 0`.
    PowerLaw { beta: f64 },
    /// Monotone piecewise-linear interpolation of sampled values,
    /// constant beyond the last knot.
    Table(TableKernel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableKernel {
    knots: Vec<f64>,
    values: Vec<f64>,
    tail: TailBehavior,
}

impl TableKernel {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> TailBehavior {
        self.tail
    }
}

impl CommunicationKernel {
    pub fn power_law(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidKernel(format!(
                "power-law exponent must be finite and non-negative, got {beta}"
            )));
        }
        Ok(Self::PowerLaw { beta })
    }

    /// A tabulated kernel. Knots must start at 0 and increase strictly;
    /// values must be positive, non-increasing and bounded by 1.
    pub fn table(knots: Vec<f64>, values: Vec<f64>, tail: TailBehavior) -> Result<Self> {
        if knots.len() != values.len() || knots.len() < 2 {
            return Err(Error::InvalidKernel(format!(
                "need matching knot/value lists of length >= 2, got {} and {}",
                knots.len(),
                values.len()
            )));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidKernel(format!(
                "first knot must be 0, got {}",
                knots[0]
            )));
        }
        for w in knots.windows(2) {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(Error::InvalidKernel(
                    "knots must increase strictly".to_string(),
                ));
            }
        }
        if values[0] > 1.0 {
            return Err(Error::InvalidKernel(format!(
                "psi(0) = {} exceeds 1",
                values[0]
            )));
        }
        for w in values.windows(2) {
            if w[1] > w[0] {
                return Err(Error::InvalidKernel(
                    "values must be non-increasing".to_string(),
                ));
            }
        }
        if values.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidKernel("values must be positive".to_string()));
        }
        Ok(Self::Table(TableKernel {
            knots,
            values,
            tail,
        }))
    }

    /// `psi(r)`. Panics on negative distances.
    pub fn evaluate(&self, r: f64) -> f64 {
        assert!(r >= 0.0, "distance must be non-negative, got {r}");
        match self {
            Self::PowerLaw { beta } => (1.0 + r * r).powf(-beta / 2.0),
            Self::Table(t) => {
                let last = *t.knots.last().unwrap();
                if r >= last {
                    return *t.values.last().unwrap();
                }
                let idx = t.knots.partition_point(|&k| k <= r) - 1;
                let (k0, k1) = (t.knots[idx], t.knots[idx + 1]);
                let (v0, v1) = (t.values[idx], t.values[idx + 1]);
                v0 + (v1 - v0) * (r - k0) / (k1 - k0)
            }
        }
    }

    /// Whether `int^inf psi(r) dr` diverges.
    pub fn tail_diverges(&self) -> bool {
        match self {
            Self::PowerLaw { beta } => *beta <= 1.0,
            Self::Table(t) => t.tail == TailBehavior::DivergentIntegral,
        }
    }

    /// `int_{x0}^{inf} psi(r) dr`, `+inf` when the tail diverges.
    ///
    /// Power law: adaptive quadrature on `[x0, R]` plus the analytic
    /// envelope `int_R^inf r^(-beta) dr`. Tabulated kernels integrate the
    /// interpolant exactly up to the last knot and drop the (declared
    /// convergent) remainder, which keeps the result a lower bound.
    pub fn tail_integral(&self, x0: f64) -> f64 {
        assert!(
            x0 >= 0.0,
            "integration start must be non-negative, got {x0}"
        );
        if self.tail_diverges() {
            return f64::INFINITY;
        }
        match self {
            Self::PowerLaw { beta } => {
                let cut = x0.max(TAIL_CUTOFF);
                let finite = numerics::integrate(&|r| self.evaluate(r), x0, cut, QUAD_TOL);
                let tail = cut.powf(1.0 - beta) / (beta - 1.0);
                finite + tail
            }
            Self::Table(t) => {
                let last = *t.knots.last().unwrap();
                if x0 >= last {
                    return 0.0;
                }
                // Trapezoid is exact on the linear pieces.
                let mut total = 0.0;
                for idx in 0..t.knots.len() - 1 {
                    let (k0, k1) = (t.knots[idx], t.knots[idx + 1]);
                    if k1 <= x0 {
                        continue;
                    }
                    let lo = k0.max(x0);
                    let v_lo = self.evaluate(lo);
                    let v_hi = t.values[idx + 1];
                    total += 0.5 * (v_lo + v_hi) * (k1 - lo);
                }
                total
            }
        }
    }
}

/// A transition rate matrix: non-negative off-diagonal entries and zero
/// row sums, tagged with the model it was built for and the coupling
/// strength that multiplies it in the dynamics.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    q: DMatrix<f64>,
    model: Model,
    alpha: f64,
}

impl RateMatrix {
    pub fn new(q: DMatrix<f64>, model: Model, alpha: f64) -> Result<Self> {
        let n = q.nrows();
        if n != q.ncols() {
            return Err(Error::NotSquare {
                rows: n,
                cols: q.ncols(),
            });
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if i != j && q[(i, j)] < 0.0 {
                    return Err(Error::InvalidState(format!(
                        "negative off-diagonal rate at ({i},{j}): {}",
                        q[(i, j)]
                    )));
                }
                sum += q[(i, j)];
            }
            if sum.abs() > 1e-12 {
                return Err(Error::InvalidState(format!(
                    "row {i} sums to {sum:e}, exceeding the 1e-12 budget"
                )));
            }
        }
        Ok(Self { q, model, alpha })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }
}

/// Euclidean distance between rows `i` and `j` of an `n x d` matrix.
#[inline]
pub(crate) fn row_distance(positions: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let d = positions.ncols();
    let mut acc = 0.0;
    for m in 0..d {
        let diff = positions[(i, m)] - positions[(j, m)];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// Fills `q` in place with the rate matrix for the given positions.
/// Diagonal entries are the negated off-diagonal row sums, so rows sum
/// to zero exactly up to a single rounding.
pub(crate) fn fill_rate_matrix(
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    positions: &DMatrix<f64>,
    model: Model,
    q: &mut DMatrix<f64>,
) {
    let n = g.n();
    debug_assert_eq!(positions.nrows(), n);
    debug_assert_eq!(q.nrows(), n);
    match model {
        Model::CuckerSmale => {
            for i in 0..n {
                let mut sum = 0.0;
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = g.weight(i, j);
                    let rate = if w > 0.0 {
                        w * kernel.evaluate(row_distance(positions, i, j))
                    } else {
                        0.0
                    };
                    q[(i, j)] = rate;
                    sum += rate;
                }
                q[(i, i)] = -sum;
            }
        }
        Model::MotschTadmor => {
            for i in 0..n {
                let mut denom = g.offsets()[i];
                for k in 0..n {
                    if k != i && g.weight(i, k) > 0.0 {
                        q[(i, k)] = g.weight(i, k) * kernel.evaluate(row_distance(positions, i, k));
                        denom += q[(i, k)];
                    } else if k != i {
                        q[(i, k)] = 0.0;
                    }
                }
                let mut sum = 0.0;
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    q[(i, j)] /= denom;
                    sum += q[(i, j)];
                }
                q[(i, i)] = -sum;
            }
        }
    }
}

fn check_positions(g: &InteractionGraph, positions: &DMatrix<f64>) -> Result<()> {
    if positions.nrows() != g.n() {
        return Err(Error::InvalidState(format!(
            "positions have {} rows for {} agents",
            positions.nrows(),
            g.n()
        )));
    }
    if positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidState("non-finite position".to_string()));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidState(format!(
            "coupling strength must be positive, got {alpha}"
        )));
    }
    Ok(())
}

/// CS rates: `Q(i,j) = A_ij * psi(|x_j - x_i|)` off the diagonal.
pub fn rate_matrix_cs(
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    positions: &DMatrix<f64>,
    alpha: f64,
) -> Result<RateMatrix> {
    check_positions(g, positions)?;
    check_alpha(alpha)?;
    let mut q = DMatrix::zeros(g.n(), g.n());
    fill_rate_matrix(g, kernel, positions, Model::CuckerSmale, &mut q);
    Ok(RateMatrix {
        q,
        model: Model::CuckerSmale,
        alpha,
    })
}

/// MT rates: the CS rate divided by `a_i + sum_k A_ik psi(|x_k - x_i|)`.
/// Off-diagonal rows then sum to at most 1.
pub fn rate_matrix_mt(
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    positions: &DMatrix<f64>,
    alpha: f64,
) -> Result<RateMatrix> {
    check_positions(g, positions)?;
    check_alpha(alpha)?;
    g.check_mt_positivity()?;
    let mut q = DMatrix::zeros(g.n(), g.n());
    fill_rate_matrix(g, kernel, positions, Model::MotschTadmor, &mut q);
    Ok(RateMatrix {
        q,
        model: Model::MotschTadmor,
        alpha,
    })
}

/// Dispatches on the model tag.
pub fn rate_matrix(
    g: &InteractionGraph,
    kernel: &CommunicationKernel,
    positions: &DMatrix<f64>,
    model: Model,
    alpha: f64,
) -> Result<RateMatrix> {
    match model {
        Model::CuckerSmale => rate_matrix_cs(g, kernel, positions, alpha),
        Model::MotschTadmor => rate_matrix_mt(g, kernel, positions, alpha),
    }
}
