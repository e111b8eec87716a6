//! Cross-module invariants, mostly property-based: structural flags,
//! rate-matrix algebra, envelope and radius solvers, and the oracles
//! that pin the structural constants to independent computations.

#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use flock_core::dynamics::{simulate, AgentState};
use flock_core::flocking::{check_scrambling, envelope_max, solve_xm, MtEnvelope};
use flock_core::graph::scrambling_coefficient;
use flock_core::kernel::{rate_matrix, CommunicationKernel};
use flock_core::Model;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn power(beta: f64) -> CommunicationKernel {
    CommunicationKernel::power_law(beta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Hierarchical and scrambling graphs always have a unique closed
    /// class; the flags respect the implication lattice.
    #[test]
    fn classification_implication_lattice(seed in 0u64..5000, n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.4, &mut rng);
        let profile = g.classify();
        if profile.is_hierarchical() {
            prop_assert!(profile.has_general_leadership());
        }
        if profile.is_scrambling() {
            prop_assert!(profile.has_general_leadership());
        }
        if profile.is_reversible() {
            prop_assert!(profile.has_general_leadership());
        }
        prop_assert_eq!(
            profile.has_general_leadership(),
            profile.closed_classes.len() == 1
        );
    }

    /// chi(A) > 0 exactly when the classifier reports scrambling.
    #[test]
    fn chi_positivity_matches_classifier(seed in 0u64..5000, n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.35, &mut rng);
        let chi = scrambling_coefficient(g.weights()).unwrap();
        prop_assert_eq!(chi > 0.0, g.classify().is_scrambling());
        // And the literal-scan oracle agrees on the value.
        let oracle = chi_by_literal_scan(g.weights()).unwrap();
        prop_assert!((chi - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
    }

    /// Constructed reversible graphs are recognised and the recovered
    /// measure satisfies detailed balance tightly.
    #[test]
    fn reversible_measure_roundtrip(seed in 0u64..5000, n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, pi_true) = random_reversible_graph(n, &mut rng);
        let pi = g.reversible_measure().expect("constructed reversible");
        let amax = g.weights().amax();
        prop_assert!(g.detailed_balance_residual(&pi) <= 1e-10 * amax);
        for i in 0..n {
            prop_assert!((pi[i] - pi_true[i]).abs() <= 1e-9);
        }
    }

    /// Coalescence distances agree with exhaustive path-pair search and
    /// are symmetric with zero diagonal.
    #[test]
    fn coalescence_matches_path_enumeration(seed in 0u64..5000, n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.35, &mut rng);
        let c = g.coalescence_diameter();
        let (d_oracle, diam_oracle) = coalescence_by_path_pairs(&g);
        prop_assert_eq!(c.diameter, diam_oracle);
        for i in 0..n {
            prop_assert_eq!(c.distances[i][i], Some(0));
            for j in 0..n {
                prop_assert_eq!(c.distances[i][j], d_oracle[i][j]);
                prop_assert_eq!(c.distances[i][j], c.distances[j][i]);
            }
        }
    }

    /// Heights match exhaustive path enumeration on random hierarchies.
    #[test]
    fn heights_match_path_enumeration(seed in 0u64..5000, n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_hierarchy(n, &mut rng);
        let h = g.heights().expect("constructed hierarchical");
        for i in 1..n {
            let oracle = height_by_path_enumeration(&g, i).expect("leader reachable");
            prop_assert_eq!(h.heights[i], oracle);
            prop_assert!(h.heights[i] >= 1);
        }
        prop_assert_eq!(h.max, (1..n).map(|i| h.heights[i]).max().unwrap());
    }

    /// Both rate matrices satisfy the transition-rate constraints and
    /// share the support of A exactly.
    #[test]
    fn rate_matrices_satisfy_generator_constraints(
        seed in 0u64..5000,
        n in 2usize..7,
        beta in 0.0f64..3.0,
        model in prop_oneof![Just(Model::CuckerSmale), Just(Model::MotschTadmor)],
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.4, &mut rng);
        let kernel = power(beta);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0));
        let q = rate_matrix(&g, &kernel, &x, model, 1.0).unwrap();
        for i in 0..n {
            let mut sum = 0.0;
            let mut off = 0.0;
            for j in 0..n {
                let value = q.q()[(i, j)];
                sum += value;
                if i != j {
                    prop_assert!(value >= 0.0);
                    prop_assert_eq!(value > 0.0, g.has_edge(i, j));
                    off += value;
                }
            }
            prop_assert!(sum.abs() <= 1e-12);
            if model == Model::MotschTadmor {
                prop_assert!(off <= 1.0 + 1e-12);
                // Off-diagonal row sum has the closed form s/(a_i + s).
                let s: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let mut dist = 0.0f64;
                        for m in 0..2 {
                            let diff = x[(i, m)] - x[(j, m)];
                            dist += diff * diff;
                        }
                        g.weight(i, j) * kernel.evaluate(dist.sqrt())
                    })
                    .sum();
                let expect = s / (g.offsets()[i] + s);
                prop_assert!((off - expect).abs() <= 1e-12);
            }
        }
    }

    /// Shrinking every pairwise distance never decreases a CS rate.
    #[test]
    fn cs_rates_monotone_under_contraction(seed in 0u64..5000, n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(n, 0.5, &mut rng);
        let kernel = power(1.7);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0));
        let shrunk = 0.5 * &x;
        let far = rate_matrix(&g, &kernel, &x, Model::CuckerSmale, 1.0).unwrap();
        let near = rate_matrix(&g, &kernel, &shrunk, Model::CuckerSmale, 1.0).unwrap();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    prop_assert!(near.q()[(i, j)] >= far.q()[(i, j)] - 1e-15);
                }
            }
        }
    }

    /// The tail integral decreases in the starting point and in beta.
    #[test]
    fn tail_integral_monotone(x0 in 0.0f64..5.0, beta in 1.1f64..4.0) {
        let k = power(beta);
        let base = k.tail_integral(x0);
        prop_assert!(k.tail_integral(x0 + 0.5) < base);
        prop_assert!(power(beta + 0.3).tail_integral(x0) < base);
    }

    /// envelope_max agrees with a golden-section oracle on random
    /// power-law instances, for the CS and both MT weightings.
    #[test]
    fn envelope_matches_golden_section(
        beta in 0.6f64..3.0,
        d in 1usize..4,
        x0 in 0.0f64..4.0,
        ratio in 0.2f64..4.0,
    ) {
        let kernel = power(beta);
        let golden = |f: &dyn Fn(f64) -> f64| {
            let (mut a, mut b) = (x0, x0 + 2e4);
            const INV_PHI: f64 = 0.618_033_988_749_894_9;
            let mut c = b - INV_PHI * (b - a);
            let mut d_pt = a + INV_PHI * (b - a);
            let (mut fc, mut fd) = (f(c), f(d_pt));
            while b - a > 1e-9 {
                if fc >= fd {
                    b = d_pt; d_pt = c; fd = fc;
                    c = b - INV_PHI * (b - a); fc = f(c);
                } else {
                    a = c; c = d_pt; fc = fd;
                    d_pt = a + INV_PHI * (b - a); fd = f(d_pt);
                }
            }
            f(0.5 * (a + b))
        };

        if beta * d as f64 > 1.0 + 1e-9 {
            let (value, _) = envelope_max(&kernel, x0, d, None).unwrap();
            let f = |r: f64| (r - x0) * kernel.evaluate(r).powi(d as i32);
            prop_assert!((value - golden(&f)).abs() <= 1e-9 * value.max(1e-12));

            let mt = MtEnvelope::General { k_denom: 1.0 / ratio, a_hat: 1.0 };
            let (value, _) = envelope_max(&kernel, x0, d, Some(mt)).unwrap();
            let f = |r: f64| {
                let psi = kernel.evaluate(r);
                (r - x0) * (psi / (1.0 / ratio + psi)).powi(d as i32)
            };
            prop_assert!((value - golden(&f)).abs() <= 1e-9 * value.max(1e-12));
        }
        if beta > 1.0 + 1e-9 {
            let mt = MtEnvelope::Hierarchical { offset_bar: 1.0, a_star: ratio };
            let (value, _) = envelope_max(&kernel, x0, 1, Some(mt)).unwrap();
            let f = |r: f64| {
                let psi = kernel.evaluate(r);
                (r - x0) * (1.0 + ratio) * psi / (1.0 + ratio * psi)
            };
            prop_assert!((value - golden(&f)).abs() <= 1e-9 * value.max(1e-12));
        }
    }

    /// solve_xm leaves an integral residual below 1e-9 max(1, V0).
    #[test]
    fn solve_xm_integral_residual(
        x0 in 0.0f64..3.0,
        fill in 0.05f64..0.95,
        beta in 1.5f64..3.0,
        scale in 0.5f64..3.0,
    ) {
        let kernel = power(beta);
        let total = scale * kernel.tail_integral(x0);
        let v0 = fill * total;
        let x_m = solve_xm(|r| scale * kernel.evaluate(r), x0, v0).unwrap();
        prop_assert!(x_m >= x0);
        // Residual via an independent composite Simpson rule; the panel
        // count scales with the interval so distant radii stay sharp.
        let panels = 2 * (10_000 + 50 * (x_m - x0) as usize);
        let h = (x_m - x0) / panels as f64;
        let f = |r: f64| scale * kernel.evaluate(r);
        let mut integral = f(x0) + f(x_m);
        for s in 1..panels {
            let weight = if s % 2 == 1 { 4.0 } else { 2.0 };
            integral += weight * f(x0 + s as f64 * h);
        }
        integral *= h / 3.0;
        prop_assert!((integral - v0).abs() <= 1e-7 * v0.max(1.0));
    }
}

/// Directed cycles: the coalescence diameter stays below the spanning
/// tree height `N - 1`.
#[test]
fn cycle_diameter_below_spanning_height() {
    for n in 3usize..=12 {
        let m = DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { 1.0 } else { 0.0 });
        let g = flock_core::graph::InteractionGraph::new(m, nalgebra::DVector::zeros(n)).unwrap();
        let d = g.coalescence_diameter().diameter.unwrap();
        assert_eq!(d, n / 2);
        assert!(d < n);
    }
}

/// Poincare constant against the Rayleigh gradient-descent oracle.
#[test]
fn poincare_matches_rayleigh_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in [3usize, 4, 5] {
        let (g, _) = random_reversible_graph(n, &mut rng);
        let pi = g.reversible_measure().unwrap();
        let c_p = g.poincare_constant(&pi).unwrap();
        let oracle = rayleigh_infimum(&g, &pi, 60, &mut rng);
        assert!(
            (c_p - oracle).abs() <= 1e-6 * c_p,
            "n = {n}: c_P = {c_p} vs oracle {oracle}"
        );
    }
}

/// A certificate that holds confines the simulated trajectory within
/// its radius and dominates the velocity decay at several horizons.
#[test]
fn certified_runs_respect_radius_and_decay() {
    let n = 4;
    let w = 1.0 / n as f64;
    let weights = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w });
    let g =
        flock_core::graph::InteractionGraph::new(weights, nalgebra::DVector::from_element(n, w))
            .unwrap();
    let kernel = power(2.0);
    let s0 = AgentState::new(
        0.0,
        DMatrix::from_row_slice(4, 1, &[0.0, 0.2, 0.4, 0.6]),
        DMatrix::from_row_slice(4, 1, &[0.05, -0.05, 0.02, 0.0]),
    )
    .unwrap();
    for model in [Model::CuckerSmale, Model::MotschTadmor] {
        let cert = check_scrambling(&g, &kernel, 1.0, &s0, model).unwrap();
        assert!(cert.holds && cert.margin > 0.1 * cert.lhs);
        let radius = cert.radius.unwrap();
        let rate = cert.rate.unwrap();
        let horizon = 5.0 / rate;
        let traj = simulate(&g, &kernel, model, 1.0, &s0, horizon, 1e-3).unwrap();
        let sup_x = traj.sup_position_diameter(traj.len() - 1);
        assert!(
            sup_x <= radius,
            "{model}: sup X = {sup_x} > radius {radius}"
        );
        let decay = cert.decay.unwrap();
        for frac in [0.25, 0.5, 1.0] {
            let t = frac * horizon;
            let k = ((t / 1e-3).round() as usize).min(traj.len() - 1);
            let bound = decay.bound(traj.time(k));
            let v = traj.velocity_diameters()[k];
            assert!(
                v <= bound + 1e-12,
                "{model}: V({}) = {v} above bound {bound}",
                traj.time(k)
            );
        }
        // Five decay times bring the diameter below a percent of V(0).
        let v_end = traj.velocity_diameters()[traj.len() - 1];
        assert!(v_end < 1e-2 * traj.velocity_diameters()[0]);
    }
}
