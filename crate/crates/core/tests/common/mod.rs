//! Shared test oracles and random-instance generators.
//!
//! Every oracle here recomputes its quantity along an independent route
//! (explicit enumeration, gradient descent on the defining variational
//! problem) so the library implementations are checked against something
//! other than themselves.

use flock_core::graph::InteractionGraph;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::collections::HashMap;

/// Rayleigh-quotient oracle for the Poincare constant: projected
/// gradient descent on `E(h) / Var_pi(h)` from random starts, with the
/// constant mode removed by recentering.
pub fn rayleigh_infimum(
    g: &InteractionGraph,
    pi: &DVector<f64>,
    starts: usize,
    rng: &mut impl Rng,
) -> f64 {
    let n = g.n();
    let a = g.weights();
    let energy = |h: &DVector<f64>| -> f64 {
        let mut e = 0.0;
        for i in 0..n {
            for j in 0..n {
                let diff = h[i] - h[j];
                e += 0.5 * diff * diff * pi[i] * a[(i, j)];
            }
        }
        e
    };
    let variance = |h: &DVector<f64>| -> f64 {
        let mean: f64 = (0..n).map(|i| pi[i] * h[i]).sum();
        (0..n).map(|i| pi[i] * (h[i] - mean) * (h[i] - mean)).sum()
    };
    let quotient = |h: &DVector<f64>| energy(h) / variance(h);

    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut h = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        // Recenter and normalise so the quotient is well defined.
        let recenter = |h: &mut DVector<f64>| {
            let mean: f64 = (0..n).map(|i| pi[i] * h[i]).sum();
            for i in 0..n {
                h[i] -= mean;
            }
        };
        recenter(&mut h);
        if variance(&h) < 1e-12 {
            continue;
        }
        let mut value = quotient(&h);
        let mut step = 0.5;
        for _ in 0..4000 {
            let e = energy(&h);
            let v = variance(&h);
            let mean: f64 = (0..n).map(|i| pi[i] * h[i]).sum();
            let mut grad = DVector::zeros(n);
            for k in 0..n {
                let mut ge = 0.0;
                for j in 0..n {
                    ge += (h[k] - h[j]) * (pi[k] * a[(k, j)] + pi[j] * a[(j, k)]);
                }
                let gv = 2.0 * pi[k] * (h[k] - mean);
                grad[k] = (ge * v - e * gv) / (v * v);
            }
            let mut improved = false;
            for _ in 0..50 {
                let mut trial = &h - step * &grad;
                recenter(&mut trial);
                let var = variance(&trial);
                if var > 1e-14 {
                    let scale = var.sqrt();
                    for i in 0..n {
                        trial[i] /= scale;
                    }
                    let q = quotient(&trial);
                    if q < value {
                        let gain = value - q;
                        h = trial;
                        value = q;
                        improved = true;
                        step *= 1.3;
                        if gain <= 1e-15 * value.abs() {
                            improved = false;
                        }
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.min(value);
    }
    best
}

/// Literal triple-loop evaluation of the scrambling coefficient.
pub fn chi_by_literal_scan(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    let mut best: Option<f64> = None;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut total = m[(i, j)] + m[(j, i)];
            for k in 0..n {
                if k != i && k != j {
                    total += if m[(i, k)] < m[(j, k)] {
                        m[(i, k)]
                    } else {
                        m[(j, k)]
                    };
                }
            }
            best = Some(best.map_or(total, |b: f64| b.min(total)));
        }
    }
    best
}

fn adjacency(g: &InteractionGraph) -> Vec<Vec<usize>> {
    let n = g.n();
    (0..n)
        .map(|i| (0..n).filter(|&j| g.weight(i, j) > 0.0).collect())
        .collect()
}

/// Longest path length from `node` to 0, by exhaustive path
/// enumeration with a visited guard.
pub fn height_by_path_enumeration(g: &InteractionGraph, node: usize) -> Option<usize> {
    fn dfs(adj: &[Vec<usize>], v: usize, visited: &mut Vec<bool>) -> Option<usize> {
        if v == 0 {
            return Some(0);
        }
        visited[v] = true;
        let mut best = None;
        for &w in &adj[v] {
            if !visited[w] {
                if let Some(len) = dfs(adj, w, visited) {
                    best = Some(best.map_or(len + 1, |b: usize| b.max(len + 1)));
                }
            }
        }
        visited[v] = false;
        best
    }
    let adj = adjacency(g);
    let mut visited = vec![false; g.n()];
    dfs(&adj, node, &mut visited)
}

/// Minimal path length from `source` to every reachable vertex found by
/// enumerating simple paths (the trivial path included).
fn reachable_min_lengths(adj: &[Vec<usize>], source: usize) -> HashMap<usize, usize> {
    fn dfs(
        adj: &[Vec<usize>],
        v: usize,
        depth: usize,
        visited: &mut Vec<bool>,
        out: &mut HashMap<usize, usize>,
    ) {
        let entry = out.entry(v).or_insert(depth);
        if depth < *entry {
            *entry = depth;
        }
        visited[v] = true;
        for &w in &adj[v] {
            if !visited[w] {
                dfs(adj, w, depth + 1, visited, out);
            }
        }
        visited[v] = false;
    }
    let mut out = HashMap::new();
    let mut visited = vec![false; adj.len()];
    dfs(adj, source, 0, &mut visited, &mut out);
    out
}

/// Coalescence distances by exhaustive search over pairs of simple
/// paths meeting at a common endpoint.
pub fn coalescence_by_path_pairs(g: &InteractionGraph) -> (Vec<Vec<Option<usize>>>, Option<usize>) {
    let n = g.n();
    let adj = adjacency(g);
    let reach: Vec<HashMap<usize, usize>> =
        (0..n).map(|i| reachable_min_lengths(&adj, i)).collect();
    let mut d = vec![vec![None; n]; n];
    let mut diameter = Some(0usize);
    for i in 0..n {
        d[i][i] = Some(0);
        for j in (i + 1)..n {
            let mut best: Option<usize> = None;
            for (&target, &li) in &reach[i] {
                if let Some(&lj) = reach[j].get(&target) {
                    let len = li.max(lj);
                    best = Some(best.map_or(len, |b: usize| b.min(len)));
                }
            }
            d[i][j] = best;
            d[j][i] = best;
            diameter = match (diameter, best) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
        }
    }
    (d, diameter)
}

/// Random digraph with Bernoulli edges and positive offsets (so the MT
/// model is always well defined).
pub fn random_graph(n: usize, edge_prob: f64, rng: &mut impl Rng) -> InteractionGraph {
    loop {
        let weights = DMatrix::from_fn(n, n, |i, j| {
            if i != j && rng.random::<f64>() < edge_prob {
                rng.random_range(0.2..1.5)
            } else {
                0.0
            }
        });
        let offsets = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
        if let Ok(g) = InteractionGraph::new(weights, offsets) {
            return g;
        }
    }
}

/// Random reversible graph: a positive measure is drawn first and the
/// weights are built to satisfy detailed balance on a connected
/// symmetric support.
pub fn random_reversible_graph(n: usize, rng: &mut impl Rng) -> (InteractionGraph, DVector<f64>) {
    let mut pi = DVector::from_fn(n, |_, _| rng.random_range(0.2..1.0));
    let total: f64 = pi.iter().sum();
    pi /= total;
    let mut weights = DMatrix::zeros(n, n);
    let link = |i: usize, j: usize, w: f64, weights: &mut DMatrix<f64>| {
        weights[(i, j)] = w;
        weights[(j, i)] = pi[i] * w / pi[j];
    };
    for v in 1..n {
        let u = rng.random_range(0..v);
        link(u, v, rng.random_range(0.3..1.2), &mut weights);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if weights[(i, j)] == 0.0 && rng.random::<f64>() < 0.3 {
                link(i, j, rng.random_range(0.3..1.2), &mut weights);
            }
        }
    }
    let offsets = DVector::from_fn(n, |_, _| rng.random_range(0.1..0.5));
    (InteractionGraph::new(weights, offsets).unwrap(), pi)
}

/// Random hierarchy: every node above the leader gets at least one edge
/// to a strictly smaller index.
pub fn random_hierarchy(n: usize, rng: &mut impl Rng) -> InteractionGraph {
    let mut weights = DMatrix::zeros(n, n);
    for i in 1..n {
        let forced = rng.random_range(0..i);
        weights[(i, forced)] = rng.random_range(0.3..1.5);
        for j in 0..i {
            if j != forced && rng.random::<f64>() < 0.4 {
                weights[(i, j)] = rng.random_range(0.3..1.5);
            }
        }
    }
    let offsets = DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 });
    InteractionGraph::new(weights, offsets).unwrap()
}
