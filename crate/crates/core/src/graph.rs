//! Weighted interaction digraphs and their structural constants.
//!
//! The interaction matrix `A` (non-negative, zero diagonal) induces a
//! digraph with an edge `(i, j)` whenever `A_ij > 0`. This module
//! classifies that graph against the four structural assumptions used by
//! the flocking certificates (reversibility, scrambling, hierarchical
//! leadership, general leadership) and computes every constant the
//! certificate thresholds need: the scrambling coefficient, the
//! normalised matrix `B`, row-sum extrema, the Poincare constant, the
//! hierarchy height and the coalescence diameter.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for detailed-balance residuals, scaled by the
/// largest weight. Reversibility is an exact algebraic property; this
/// only absorbs float rounding in the ratio propagation.
pub const DETAILED_BALANCE_TOL: f64 = 1e-10;

/// A weighted interaction digraph: weights `A` (zero diagonal,
/// non-negative) and the per-agent offsets `a` used by the MT
/// normalisation.
///
/// Construction validates the matrix shape, sign and diagonal. Positivity
/// of the MT denominators (`a_i > 0` whenever row `i` is empty) is *not*
/// required here so that CS-only graphs with zero offsets remain
/// representable; the MT-specific operations check it and reject.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    weights: DMatrix<f64>,
    offsets: DVector<f64>,
}

impl InteractionGraph {
    pub fn new(weights: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(Error::EmptyGraph);
        }
        if offsets.len() != rows {
            return Err(Error::OffsetLength {
                expected: rows,
                got: offsets.len(),
            });
        }
        for i in 0..rows {
            if weights[(i, i)] != 0.0 {
                return Err(Error::NonzeroDiagonal {
                    i,
                    value: weights[(i, i)],
                });
            }
            for j in 0..cols {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidWeight { i, j, value: w });
                }
            }
            let a = offsets[i];
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidOffset { i, value: a });
            }
        }
        Ok(Self { weights, offsets })
    }

    /// Build from row slices; offsets may be shorter-lived borrows.
    pub fn from_rows(rows: &[Vec<f64>], offsets: &[f64]) -> Result<Self> {
        let n = rows.len();
        let weights = DMatrix::from_fn(n, n, |i, j| rows[i].get(j).copied().unwrap_or(f64::NAN));
        Self::new(weights, DVector::from_column_slice(offsets))
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weights[(i, j)] > 0.0
    }

    /// Out-neighbour lists of the induced digraph.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).filter(|&j| self.has_edge(i, j)).collect())
            .collect()
    }

    /// Off-diagonal row sum of the weights for agent `i`.
    pub fn row_sum(&self, i: usize) -> f64 {
        (0..self.n()).map(|j| self.weights[(i, j)]).sum()
    }

    /// Static MT denominators `a_i + sum_{k != i} A_ik`.
    pub fn mt_denominators(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.offsets[i] + self.row_sum(i))
    }

    /// Checks that every MT denominator is positive.
    pub fn check_mt_positivity(&self) -> Result<()> {
        for i in 0..self.n() {
            if self.offsets[i] + self.row_sum(i) <= 0.0 {
                return Err(Error::ZeroMtDenominator { i });
            }
        }
        Ok(())
    }

    /// Strongly connected components in Tarjan emission order
    /// (reverse topological order of the condensation).
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        tarjan_scc(&self.adjacency())
    }

    /// Communication classes with no outgoing edge in the condensation,
    /// each sorted ascending, the list ordered by smallest member.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let sccs = tarjan_scc(&adj);
        let mut comp_of = vec![0usize; self.n()];
        for (cid, comp) in sccs.iter().enumerate() {
            for &v in comp {
                comp_of[v] = cid;
            }
        }
        let mut closed: Vec<Vec<usize>> = sccs
            .iter()
            .enumerate()
            .filter(|(cid, comp)| {
                comp.iter()
                    .all(|&v| adj[v].iter().all(|&w| comp_of[w] == *cid))
            })
            .map(|(_, comp)| {
                let mut c = comp.clone();
                c.sort_unstable();
                c
            })
            .collect();
        closed.sort_by_key(|c| c[0]);
        closed
    }

    /// Evaluates all four structural assumptions independently.
    pub fn classify(&self) -> AssumptionProfile {
        let closed_classes = self.closed_classes();
        let unique_closed_class = if closed_classes.len() == 1 {
            Some(closed_classes[0].clone())
        } else {
            None
        };
        AssumptionProfile {
            reversible: self.reversible_measure(),
            scrambling: self.is_scrambling(),
            hierarchy: self.heights().ok(),
            closed_classes,
            unique_closed_class,
        }
    }

    /// The scrambling assumption: every pair of distinct agents either
    /// interacts directly (one way or the other) or shares a common
    /// out-neighbour. Vacuously true for a single agent.
    pub fn is_scrambling(&self) -> bool {
        let n = self.n();
        for i in 0..n {
            for j in (i + 1)..n {
                let direct = self.has_edge(i, j) || self.has_edge(j, i);
                let common =
                    (0..n).any(|k| k != i && k != j && self.has_edge(i, k) && self.has_edge(j, k));
                if !direct && !common {
                    return false;
                }
            }
        }
        true
    }

    /// The reversible measure `pi` with `pi_i A_ij = pi_j A_ji`, when it
    /// exists and the graph is irreducible.
    ///
    /// Construction: fix the value at vertex 0, propagate the
    /// detailed-balance ratios along a spanning tree of the (symmetric)
    /// support graph, then verify every edge against the Kolmogorov cycle
    /// criterion within [`DETAILED_BALANCE_TOL`] and normalise. Returns
    /// `None` when the graph is reducible, the support is asymmetric or
    /// some cycle ratio is inconsistent.
    pub fn reversible_measure(&self) -> Option<DVector<f64>> {
        let n = self.n();
        if self.strongly_connected_components().len() != 1 {
            return None;
        }
        for i in 0..n {
            for j in 0..n {
                if self.has_edge(i, j) != self.has_edge(j, i) {
                    return None;
                }
            }
        }
        // Spanning tree by BFS over the support; edges are mutual here.
        let mut pi = DVector::from_element(n, 0.0);
        pi[0] = 1.0;
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && self.has_edge(u, v) {
                    seen[v] = true;
                    pi[v] = pi[u] * self.weights[(u, v)] / self.weights[(v, u)];
                    queue.push_back(v);
                }
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "irreducible graph, BFS covers it");
        let total: f64 = pi.iter().sum();
        pi /= total;
        if self.detailed_balance_residual(&pi) > self.balance_tolerance() {
            return None;
        }
        Some(pi)
    }

    /// `max_{i,j} |pi_i A_ij - pi_j A_ji|`.
    pub fn detailed_balance_residual(&self, pi: &DVector<f64>) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let r = (pi[i] * self.weights[(i, j)] - pi[j] * self.weights[(j, i)]).abs();
                worst = worst.max(r);
            }
        }
        worst
    }

    fn balance_tolerance(&self) -> f64 {
        DETAILED_BALANCE_TOL * self.weights.amax().max(f64::MIN_POSITIVE)
    }

    /// The Poincare constant of the graph under the reversible measure
    /// `pi`: the smallest positive eigenvalue of the Laplacian
    /// `L = D - A`, equal to the infimum of the Dirichlet-form to
    /// variance ratio.
    ///
    /// `L` is self-adjoint in the `pi`-weighted inner product, so the
    /// spectrum is computed from the symmetrisation
    /// `S = Pi^{1/2} L Pi^{-1/2}` which shares it.
    pub fn poincare_constant(&self, pi: &DVector<f64>) -> Result<f64> {
        let n = self.n();
        validate_probability_vector(pi, n, true)?;
        let residual = self.detailed_balance_residual(pi);
        let tolerance = self.balance_tolerance();
        if residual > tolerance {
            return Err(Error::NotReversible {
                residual,
                tolerance,
            });
        }
        let mut s = DMatrix::zeros(n, n);
        for i in 0..n {
            let deg = self.row_sum(i);
            for j in 0..n {
                let l = if i == j { deg } else { -self.weights[(i, j)] };
                s[(i, j)] = pi[i].sqrt() * l / pi[j].sqrt();
            }
        }
        // Kill rounding asymmetry before the symmetric eigensolver.
        let s = 0.5 * (&s + s.transpose());
        let mut eigs: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = eigs
            .iter()
            .map(|e| e.abs())
            .fold(f64::MIN_POSITIVE, f64::max);
        let gap = eigs.into_iter().find(|&e| e > 1e-12 * scale);
        gap.ok_or(Error::NoSpectralGap)
    }

    /// Matrix `B` of MT-normalised weights:
    /// `B_ij = A_ij / (a_i + sum_{k != i} A_ik)`.
    pub fn mt_matrix(&self) -> Result<DMatrix<f64>> {
        self.check_mt_positivity()?;
        let n = self.n();
        let denom = self.mt_denominators();
        Ok(DMatrix::from_fn(n, n, |i, j| {
            self.weights[(i, j)] / denom[i]
        }))
    }

    /// Verifies the hierarchical leadership ordering literally (edges only
    /// to strictly smaller indices, every non-leader has an out-edge) and
    /// computes per-node heights: the length of the longest path from
    /// each node down to the leader (node 0).
    pub fn heights(&self) -> Result<Hierarchy> {
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                if self.has_edge(i, j) && j >= i {
                    return Err(Error::NotHierarchical {
                        reason: format!("edge {i} -> {j} does not point to a smaller index"),
                    });
                }
            }
        }
        for i in 1..n {
            if (0..i).all(|j| !self.has_edge(i, j)) {
                return Err(Error::NotHierarchical {
                    reason: format!("agent {i} has no out-edge"),
                });
            }
        }
        // Edges point to smaller indices, so increasing index order is a
        // reverse topological order of the DAG.
        let mut heights = vec![0usize; n];
        for i in 1..n {
            heights[i] = 1
                + (0..i)
                    .filter(|&j| self.has_edge(i, j))
                    .map(|j| heights[j])
                    .max()
                    .unwrap();
        }
        let max = heights.iter().copied().max().unwrap_or(0);
        Ok(Hierarchy { heights, max })
    }

    /// A relabelling that would make the graph hierarchical, if one
    /// exists: the permutation `sigma` with `sigma[old] = new` such that
    /// every edge points to a strictly smaller new index. Never applied
    /// implicitly by any other operation.
    pub fn hierarchical_relabeling(&self) -> Option<Vec<usize>> {
        let n = self.n();
        let adj = self.adjacency();
        let sinks: Vec<usize> = (0..n).filter(|&i| adj[i].is_empty()).collect();
        if sinks.len() != 1 {
            return None;
        }
        // Place nodes once all their out-neighbours are placed; smallest
        // candidate first keeps the order deterministic.
        let mut label = vec![usize::MAX; n];
        let mut placed = 0usize;
        while placed < n {
            let candidate = (0..n).find(|&i| {
                label[i] == usize::MAX && adj[i].iter().all(|&j| label[j] != usize::MAX)
            })?;
            label[candidate] = placed;
            placed += 1;
        }
        Some(label)
    }

    /// Directed shortest-path lengths from every node (BFS); `None`
    /// marks unreachable targets.
    pub fn shortest_paths(&self) -> Vec<Vec<Option<usize>>> {
        let n = self.n();
        let adj = self.adjacency();
        (0..n)
            .map(|source| {
                let mut dist = vec![None; n];
                dist[source] = Some(0);
                let mut queue = std::collections::VecDeque::from([source]);
                while let Some(u) = queue.pop_front() {
                    for &v in &adj[u] {
                        if dist[v].is_none() {
                            dist[v] = Some(dist[u].unwrap() + 1);
                            queue.push_back(v);
                        }
                    }
                }
                dist
            })
            .collect()
    }

    /// Pairwise coalescence distances and their maximum.
    ///
    /// `d_ij` is the minimum over common reachable targets `k` of
    /// `max(dist(i,k), dist(j,k))`. This equals the path-pair definition
    /// (pairs of directed paths from `i` and `j` meeting at a common
    /// vertex, one possibly trivial): any coalescence pair yields a
    /// common target of no larger max-length, and shortest paths to a
    /// common target form a coalescence pair.
    pub fn coalescence_diameter(&self) -> CoalescenceDistances {
        let n = self.n();
        let dist = self.shortest_paths();
        let mut distances = vec![vec![None; n]; n];
        let mut diameter = Some(0usize);
        for i in 0..n {
            distances[i][i] = Some(0);
            for j in (i + 1)..n {
                let mut best: Option<usize> = None;
                for k in 0..n {
                    if let (Some(di), Some(dj)) = (dist[i][k], dist[j][k]) {
                        let m = di.max(dj);
                        best = Some(best.map_or(m, |b| b.min(m)));
                    }
                }
                distances[i][j] = best;
                distances[j][i] = best;
                diameter = match (diameter, best) {
                    (Some(d), Some(b)) => Some(d.max(b)),
                    _ => None,
                };
            }
        }
        CoalescenceDistances {
            distances,
            diameter,
        }
    }

    /// All structural constants in one scan. Fields whose defining
    /// infimum ranges over an empty set, or whose assumption fails, are
    /// absent rather than sentinel values.
    pub fn structural_constants(&self) -> StructuralConstants {
        let n = self.n();
        let chi_a = scrambling_coefficient(&self.weights);
        let a_star = (1..n)
            .map(|i| self.row_sum(i))
            .min_by(|a, b| a.partial_cmp(b).unwrap());
        let a_hat = self
            .weights
            .iter()
            .filter(|&&w| w > 0.0)
            .copied()
            .min_by(|a, b| a.partial_cmp(b).unwrap());
        let a_bar = (0..n).map(|i| self.row_sum(i)).fold(0.0f64, f64::max);
        let offset_bar = (1..n)
            .map(|i| self.offsets[i])
            .max_by(|a, b| a.partial_cmp(b).unwrap());
        let k_denom = self.k_denominator();
        let mt = self.mt_matrix().ok().map(|b| {
            let chi_b = scrambling_coefficient(&b);
            let b_star = (1..n)
                .map(|i| b.row(i).sum())
                .min_by(|a, b| a.partial_cmp(b).unwrap());
            let b_bar = (0..n).map(|i| b.row(i).sum()).fold(0.0f64, f64::max);
            MtConstants {
                b,
                chi_b,
                b_star,
                b_bar,
            }
        });
        let pi = self.reversible_measure();
        let pi_star = pi.as_ref().map(|p| p.min());
        let poincare = pi.as_ref().and_then(|p| self.poincare_constant(p).ok());
        StructuralConstants {
            chi_a,
            mt,
            a_star,
            a_hat,
            a_bar,
            offset_bar,
            k_denom,
            pi,
            pi_star,
            poincare,
            hierarchy: self.heights().ok(),
            coalescence: self.coalescence_diameter(),
        }
    }

    /// `K = inf { a_i + sum_{k != i,j} A_ik : i != j, A_ij > 0 }`; the sum
    /// excludes both endpoints of the edge.
    pub fn k_denominator(&self) -> Option<f64> {
        let n = self.n();
        let mut best: Option<f64> = None;
        for i in 0..n {
            for j in 0..n {
                if i == j || !self.has_edge(i, j) {
                    continue;
                }
                let value = self.offsets[i] + self.row_sum(i) - self.weights[(i, j)];
                best = Some(best.map_or(value, |b| b.min(value)));
            }
        }
        best
    }
}

/// The scrambling coefficient
/// `chi(M) = min_{i != j} (M_ij + M_ji + sum_{k != i,j} min(M_ik, M_jk))`.
/// `None` when there is no pair to scan (`n < 2`). A zero value signals
/// that the scrambling assumption fails for `M`.
pub fn scrambling_coefficient(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    if n < 2 {
        return None;
    }
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut overlap = m[(i, j)] + m[(j, i)];
            for k in 0..n {
                if k != i && k != j {
                    overlap += m[(i, k)].min(m[(j, k)]);
                }
            }
            best = best.min(overlap);
        }
    }
    Some(best)
}

pub(crate) fn validate_probability_vector(
    pi: &DVector<f64>,
    n: usize,
    require_positive: bool,
) -> Result<()> {
    if pi.len() != n {
        return Err(Error::InvalidMeasure(format!(
            "length {} does not match agent count {n}",
            pi.len()
        )));
    }
    for (i, &p) in pi.iter().enumerate() {
        if !p.is_finite() || p < 0.0 || (require_positive && p == 0.0) {
            return Err(Error::InvalidMeasure(format!("entry {i} = {p}")));
        }
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidMeasure(format!("sums to {total}, not 1")));
    }
    Ok(())
}

/// Which structural assumptions the graph satisfies, each evaluated
/// independently of the others.
#[derive(Debug, Clone)]
pub struct AssumptionProfile {
    /// The reversible probability measure, when the graph is irreducible
    /// and detailed balance is consistent.
    pub reversible: Option<DVector<f64>>,
    pub scrambling: bool,
    /// Heights under the literal index ordering, when hierarchical.
    pub hierarchy: Option<Hierarchy>,
    /// All closed communication classes, ordered by smallest member.
    pub closed_classes: Vec<Vec<usize>>,
    /// The unique closed class, when there is exactly one.
    pub unique_closed_class: Option<Vec<usize>>,
}

impl AssumptionProfile {
    pub fn is_reversible(&self) -> bool {
        self.reversible.is_some()
    }

    pub fn is_scrambling(&self) -> bool {
        self.scrambling
    }

    pub fn is_hierarchical(&self) -> bool {
        self.hierarchy.is_some()
    }

    pub fn has_general_leadership(&self) -> bool {
        self.unique_closed_class.is_some()
    }
}

/// Per-node heights `h_i` (longest path down to the leader) and their
/// maximum `H` over the non-leader nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    pub heights: Vec<usize>,
    pub max: usize,
}

/// Pairwise coalescence distances; `None` marks pairs with no common
/// reachable vertex. The diameter is `None` exactly when some pair never
/// coalesces, i.e. when the unique-closed-class assumption fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalescenceDistances {
    pub distances: Vec<Vec<Option<usize>>>,
    pub diameter: Option<usize>,
}

/// MT-normalised constants derived from the matrix `B`.
#[derive(Debug, Clone)]
pub struct MtConstants {
    pub b: DMatrix<f64>,
    pub chi_b: Option<f64>,
    /// `inf_{i>1}` of the off-diagonal row sums of `B`.
    pub b_star: Option<f64>,
    /// `sup_i` of the off-diagonal row sums of `B`.
    pub b_bar: f64,
}

/// Every structural constant used by the flocking thresholds.
#[derive(Debug, Clone)]
pub struct StructuralConstants {
    /// Scrambling coefficient of `A` (absent for a single agent).
    pub chi_a: Option<f64>,
    /// `B`-derived constants; absent when some MT denominator vanishes.
    pub mt: Option<MtConstants>,
    /// `A_* = inf_{i>1} sum_j A_ij`.
    pub a_star: Option<f64>,
    /// Smallest positive weight.
    pub a_hat: Option<f64>,
    /// Largest row sum.
    pub a_bar: f64,
    /// `sup_{i>1} a_i` of the offsets.
    pub offset_bar: Option<f64>,
    /// `K = inf { a_i + sum_{k != i,j} A_ik : A_ij > 0 }`.
    pub k_denom: Option<f64>,
    pub pi: Option<DVector<f64>>,
    /// `min_i pi_i`, when the reversible measure exists.
    pub pi_star: Option<f64>,
    /// Poincare constant, when the reversible measure exists.
    pub poincare: Option<f64>,
    pub hierarchy: Option<Hierarchy>,
    pub coalescence: CoalescenceDistances,
}

fn tarjan_scc(graph: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State {
        index: usize,
        stack: Vec<usize>,
        on_stack: Vec<bool>,
        idx: Vec<Option<usize>>,
        low: Vec<usize>,
        comps: Vec<Vec<usize>>,
    }

    fn connect(v: usize, graph: &[Vec<usize>], st: &mut State) {
        st.idx[v] = Some(st.index);
        st.low[v] = st.index;
        st.index += 1;
        st.stack.push(v);
        st.on_stack[v] = true;

        for &w in &graph[v] {
            if st.idx[w].is_none() {
                connect(w, graph, st);
                st.low[v] = st.low[v].min(st.low[w]);
            } else if st.on_stack[w] {
                st.low[v] = st.low[v].min(st.idx[w].unwrap());
            }
        }

        if st.low[v] == st.idx[v].unwrap() {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("stack underflow");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            st.comps.push(comp);
        }
    }

    let n = graph.len();
    let mut st = State {
        index: 0,
        stack: Vec::new(),
        on_stack: vec![false; n],
        idx: vec![None; n],
        low: vec![0; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if st.idx[v].is_none() {
            connect(v, graph, &mut st);
        }
    }
    st.comps
}
