//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (visible with `--nocapture`). Tolerances are pinned in the
//! assertions themselves.

#![allow(clippy::needless_range_loop)]

mod common;

use std::sync::OnceLock;
use std::time::Instant;

use flock_core::dynamics::{asymptotic_velocity, simulate, star_graph, AgentState, Trajectory};
use flock_core::flocking::{
    check_general, check_hierarchical, check_reversible, check_scrambling, envelope_max,
    FlockingCertificate,
};
use flock_core::graph::{scrambling_coefficient, InteractionGraph};
use flock_core::kernel::CommunicationKernel;
use flock_core::markov::{
    contraction_check, dobrushin, ergodicity_lower_bound, mc_velocity_estimate, solve_transition,
    BoundRegime, TransitionFunction,
};
use flock_core::Model;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn power(beta: f64) -> CommunicationKernel {
    CommunicationKernel::power_law(beta).unwrap()
}

fn pass(name: &str, detail: &str) {
    println!("acceptance {name}: PASS - {detail}");
}

struct Instance {
    label: String,
    g: InteractionGraph,
    kernel: CommunicationKernel,
    traj: Trajectory,
    tf: TransitionFunction,
}

struct Battery {
    instances: Vec<Instance>,
    build_seconds: f64,
}

/// Twenty random instances (N <= 8, d <= 3, both models,
/// beta in {0.5, 1, 2}) simulated to T = 5 at dt = 1e-3, with their
/// transition functions.
fn battery() -> &'static Battery {
    static BATTERY: OnceLock<Battery> = OnceLock::new();
    BATTERY.get_or_init(|| {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let betas = [0.5, 1.0, 2.0];
        let mut instances = Vec::with_capacity(20);
        for idx in 0..20 {
            let n = 2 + idx % 7;
            let d = 1 + idx % 3;
            let beta = betas[idx % 3];
            let model = if idx % 2 == 0 {
                Model::CuckerSmale
            } else {
                Model::MotschTadmor
            };
            let alpha = rng.random_range(0.5..1.2);
            let g = common::random_graph(n, 0.5, &mut rng);
            let kernel = power(beta);
            let positions = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
            let velocities = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
            let state0 = AgentState::new(0.0, positions, velocities).unwrap();
            let traj = simulate(&g, &kernel, model, alpha, &state0, 5.0, 1e-3).unwrap();
            let tf = solve_transition(&traj, &g, &kernel).unwrap();
            instances.push(Instance {
                label: format!("#{idx:02} n={n} d={d} beta={beta} {model} alpha={alpha:.2}"),
                g,
                kernel,
                traj,
                tf,
            });
        }
        Battery {
            instances,
            build_seconds: start.elapsed().as_secs_f64(),
        }
    })
}

/// Criterion 1: velocities and their transition-function representation
/// agree to 1e-6 in max norm at every grid time, in under a minute.
#[test]
fn acceptance_01_velocity_duality() {
    let battery = battery();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for inst in &battery.instances {
        let gap = inst.tf.duality_gap(&inst.traj).unwrap();
        assert!(gap <= 1e-6, "{}: duality gap {gap:e}", inst.label);
        worst = worst.max(gap);
    }
    let runtime = battery.build_seconds + start.elapsed().as_secs_f64();
    assert!(runtime < 60.0, "duality battery took {runtime:.1}s");
    pass(
        "01 velocity duality",
        &format!("20 instances, max gap {worst:.2e}, runtime {runtime:.1}s"),
    );
}

/// Criterion 2: Monte Carlo velocity estimates with 1e5 paths agree
/// with the solver within 3 standard errors in at least 99% of the
/// tested (state, time) cells, in under five minutes.
#[test]
fn acceptance_02_monte_carlo_agreement() {
    let battery = battery();
    let start = Instant::now();
    let times = [1.0, 2.5, 5.0];
    let mut cells = 0usize;
    let mut agreeing = 0usize;
    for inst in battery.instances.iter().take(5) {
        let v0 = &inst.traj.initial_state().velocities;
        for t in times {
            let k = inst.traj.index_at(t).unwrap();
            let solver = inst.tf.matrix(k);
            for i in 0..inst.g.n() {
                let est = mc_velocity_estimate(
                    &inst.traj,
                    &inst.g,
                    &inst.kernel,
                    i,
                    t,
                    100_000,
                    0xacce55 + cells as u64,
                )
                .unwrap();
                let mut ok = true;
                for m in 0..v0.ncols() {
                    let reference: f64 = (0..inst.g.n()).map(|j| solver[(i, j)] * v0[(j, m)]).sum();
                    if (est.mean[m] - reference).abs() > 3.0 * est.stderr[m] + 1e-9 {
                        ok = false;
                    }
                }
                cells += 1;
                if ok {
                    agreeing += 1;
                }
            }
        }
    }
    let runtime = start.elapsed().as_secs_f64();
    let fraction = agreeing as f64 / cells as f64;
    assert!(
        fraction >= 0.99,
        "only {agreeing}/{cells} cells within 3 standard errors"
    );
    assert!(runtime < 300.0, "Monte Carlo battery took {runtime:.1}s");
    pass(
        "02 monte carlo agreement",
        &format!("{agreeing}/{cells} cells within 3se, runtime {runtime:.1}s"),
    );
}

/// Criterion 3: the Dobrushin contraction of velocity diameters holds
/// on 100 sampled (s, t) pairs per instance within 1e-7 V(0).
#[test]
fn acceptance_03_contraction_inequality() {
    let battery = battery();
    let mut worst = f64::NEG_INFINITY;
    for (idx, inst) in battery.instances.iter().enumerate() {
        let report =
            contraction_check(&inst.traj, &inst.g, &inst.kernel, 100, 0xc0 + idx as u64).unwrap();
        assert_eq!(
            report.violations, 0,
            "{}: worst slack {:e} vs tolerance {:e}",
            inst.label, report.worst_slack, report.tolerance
        );
        worst = worst.max(report.worst_slack / report.tolerance.max(f64::MIN_POSITIVE));
    }
    pass(
        "03 contraction inequality",
        &format!("2000 pairs, worst slack {worst:.2e} of tolerance"),
    );
}

/// Criterion 4: the 49-agent star with beta = 0.9 converges to the
/// closed-form asymptotic velocity within 1e-2 by T = 200.
#[test]
fn acceptance_04_star_asymptotic_velocity() {
    let n_spokes = 48;
    let (g, pi) = star_graph(&vec![1.0; n_spokes], &vec![1.0; n_spokes]).unwrap();
    let pi = pi.unwrap();
    let n = n_spokes + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    let mut positions = DMatrix::zeros(n, 2);
    let mut velocities = DMatrix::zeros(n, 2);
    velocities[(0, 0)] = 1.0;
    for i in 1..n {
        positions[(i, 0)] = rng.random_range(-5.0..5.0);
        // Two groups of 24, mirrored boxes, opposite vertical speeds.
        if i <= 24 {
            positions[(i, 1)] = rng.random_range(-11.0..-1.0);
            velocities[(i, 1)] = -1.0;
        } else {
            positions[(i, 1)] = rng.random_range(1.0..11.0);
            velocities[(i, 1)] = 1.0;
        }
    }
    let v_e = asymptotic_velocity(&g, &pi, &velocities).unwrap();
    let state0 = AgentState::new(0.0, positions, velocities).unwrap();
    let kernel = power(0.9);
    let traj = simulate(&g, &kernel, Model::CuckerSmale, 1.0, &state0, 200.0, 0.01).unwrap();
    let end = traj.final_state();
    let mut worst = 0.0f64;
    for i in 0..n {
        let dx = end.velocities[(i, 0)] - v_e[0];
        let dy = end.velocities[(i, 1)] - v_e[1];
        worst = worst.max((dx * dx + dy * dy).sqrt());
    }
    assert!(worst < 1e-2, "max deviation from v_e is {worst:e}");
    pass(
        "04 star asymptotic velocity",
        &format!("N=49, max |v_i(200) - v_e| = {worst:.2e} < 1e-2"),
    );
}

/// Criterion 5: on uniform graphs the reversible threshold reduces to
/// half the kernel tail integral after the sqrt(N) rescaling.
#[test]
fn acceptance_05_uniform_threshold_identity() {
    let kernel = power(2.0);
    let mut worst = 0.0f64;
    for n in [2usize, 5, 20] {
        let w = 1.0 / n as f64;
        let weights = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w });
        let g = InteractionGraph::new(weights, DVector::from_element(n, w)).unwrap();
        let pi = g.reversible_measure().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let positions = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0));
        let velocities = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-0.1..0.1));
        let state0 = AgentState::new(0.0, positions, velocities).unwrap();
        let cert = check_reversible(&g, &pi, &kernel, 1.0, &state0).unwrap();
        let half_integral = 0.5 * kernel.tail_integral(state0.diameters().0);
        let rescaled = (n as f64).sqrt() * cert.threshold;
        let rel = (rescaled - half_integral).abs() / half_integral;
        assert!(rel <= 1e-12, "n = {n}: relative mismatch {rel:e}");
        worst = worst.max(rel);
    }
    pass(
        "05 uniform threshold identity",
        &format!("N in {{2, 5, 20}}, worst relative error {worst:.2e} <= 1e-12"),
    );
}

/// Criterion 6: directed N-cycles have coalescence diameter floor(N/2),
/// matching the exhaustive path-pair oracle, for N = 3..12.
#[test]
fn acceptance_06_cycle_coalescence() {
    for n in 3usize..=12 {
        let weights = DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { 1.0 } else { 0.0 });
        let g = InteractionGraph::new(weights, DVector::zeros(n)).unwrap();
        let computed = g.coalescence_diameter();
        let (oracle_d, oracle_diam) = common::coalescence_by_path_pairs(&g);
        assert_eq!(computed.diameter, Some(n / 2), "cycle N = {n}");
        assert_eq!(computed.diameter, oracle_diam, "cycle N = {n} oracle");
        for i in 0..n {
            for j in 0..n {
                assert_eq!(computed.distances[i][j], oracle_d[i][j]);
            }
        }
    }
    pass(
        "06 cycle coalescence",
        "D = floor(N/2) and full distance matrices match the oracle for N = 3..12",
    );
}

/// Criterion 7: the closed-form envelope maximisers match
/// golden-section maximisation to 1e-9 relative on a 60-point
/// (beta, D, X0) grid.
#[test]
fn acceptance_07_envelope_closed_forms() {
    let betas = [1.1, 1.5, 2.0, 3.0, 4.0];
    let ds = [1usize, 2, 3];
    let x0s = [0.0, 0.5, 2.0, 7.0];
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for &beta in &betas {
        for &d in &ds {
            for &x0 in &x0s {
                let kernel = power(beta);
                let (value, argmax) = envelope_max(&kernel, x0, d, None).unwrap();
                let r_star = argmax.unwrap();
                let f = |r: f64| (r - x0) * kernel.evaluate(r).powi(d as i32);
                let (golden_x, golden_v) = golden_section(&f, x0, x0 + 1e5);
                let rel = (value - golden_v).abs() / golden_v;
                assert!(
                    rel <= 1e-9,
                    "beta={beta} D={d} x0={x0}: value {value} vs golden {golden_v}"
                );
                assert!(
                    (r_star - golden_x).abs() <= 1e-5 * golden_x.max(1.0),
                    "beta={beta} D={d} x0={x0}: argmax {r_star} vs golden {golden_x}"
                );
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    assert!(checked >= 50);
    pass(
        "07 envelope closed forms",
        &format!("{checked} grid points, worst relative value error {worst:.2e}"),
    );
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

struct SoundnessCase {
    label: &'static str,
    g: InteractionGraph,
    kernel: CommunicationKernel,
    model: Model,
    alpha: f64,
    state0: AgentState,
    cert: FlockingCertificate,
}

fn uniform_graph(n: usize) -> InteractionGraph {
    let w = 1.0 / n as f64;
    let weights = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w });
    InteractionGraph::new(weights, DVector::from_element(n, w)).unwrap()
}

fn chain_graph(n: usize, leader_offset: f64) -> InteractionGraph {
    let weights = DMatrix::from_fn(n, n, |i, j| if i >= 1 && j + 1 == i { 1.0 } else { 0.0 });
    let offsets = DVector::from_fn(n, |i, _| if i == 0 { leader_offset } else { 0.0 });
    InteractionGraph::new(weights, offsets).unwrap()
}

fn cycle_graph(n: usize) -> InteractionGraph {
    let weights = DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { 1.0 } else { 0.0 });
    InteractionGraph::new(weights, DVector::zeros(n)).unwrap()
}

fn state_1d(x: &[f64], v: &[f64]) -> AgentState {
    AgentState::new(
        0.0,
        DMatrix::from_row_slice(x.len(), 1, x),
        DMatrix::from_row_slice(v.len(), 1, v),
    )
    .unwrap()
}

/// Criterion 8: on ten certified parameter sets (margin above 10%) the
/// simulation stays within the predicted radius and under the predicted
/// decay bound; hierarchical bounds hold at every grid time.
#[test]
fn acceptance_08_certified_run_soundness() {
    let mut cases: Vec<SoundnessCase> = Vec::new();

    // Reversible regime (CS only).
    {
        let g = uniform_graph(4);
        let kernel = power(0.9);
        let s0 = state_1d(&[0.0, 0.5, 1.0, 1.5], &[0.4, -0.4, 0.2, 0.0]);
        let pi = g.reversible_measure().unwrap();
        let cert = check_reversible(&g, &pi, &kernel, 1.0, &s0).unwrap();
        cases.push(SoundnessCase {
            label: "reversible uniform N=4 beta=0.9",
            g,
            kernel,
            model: Model::CuckerSmale,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }
    {
        let g = uniform_graph(5);
        let kernel = power(2.0);
        let s0 = state_1d(&[0.0, 0.2, 0.4, 0.6, 0.8], &[0.05, -0.05, 0.03, 0.0, -0.03]);
        let pi = g.reversible_measure().unwrap();
        let cert = check_reversible(&g, &pi, &kernel, 1.0, &s0).unwrap();
        cases.push(SoundnessCase {
            label: "reversible uniform N=5 beta=2",
            g,
            kernel,
            model: Model::CuckerSmale,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }
    {
        let (g, pi) = star_graph(&[1.0; 4], &[1.0; 4]).unwrap();
        let pi = pi.unwrap();
        let kernel = power(0.9);
        let s0 = state_1d(&[0.0, 0.3, -0.3, 0.6, -0.6], &[0.3, -0.3, 0.2, -0.2, 0.0]);
        let cert = check_reversible(&g, &pi, &kernel, 1.0, &s0).unwrap();
        cases.push(SoundnessCase {
            label: "reversible star N=5 beta=0.9",
            g,
            kernel,
            model: Model::CuckerSmale,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }

    // Scrambling regime, both models.
    {
        let g = uniform_graph(4);
        let kernel = power(2.0);
        let s0 = state_1d(&[0.0, 0.3, 0.6, 0.9], &[0.1, -0.1, 0.05, 0.0]);
        let cert = check_scrambling(&g, &kernel, 1.0, &s0, Model::CuckerSmale).unwrap();
        cases.push(SoundnessCase {
            label: "scrambling uniform N=4 beta=2 CS",
            g,
            kernel,
            model: Model::CuckerSmale,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }
    {
        let g = uniform_graph(4);
        let kernel = power(0.5);
        let s0 = state_1d(&[0.0, 0.4, 0.8, 1.2], &[0.5, -0.5, 0.25, 0.0]);
        let cert = check_scrambling(&g, &kernel, 1.0, &s0, Model::MotschTadmor).unwrap();
        cases.push(SoundnessCase {
            label: "scrambling uniform N=4 beta=0.5 MT",
            g,
            kernel,
            model: Model::MotschTadmor,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }

    // Hierarchical regime.
    {
        let g = chain_graph(3, 0.0);
        let kernel = power(2.0);
        let s0 = state_1d(&[0.0, 0.25, 0.5], &[0.0, 0.02, -0.02]);
        let cert = check_hierarchical(&g, &kernel, 1.0, &s0, Model::CuckerSmale).unwrap();
        cases.push(SoundnessCase {
            label: "hierarchical chain N=3 beta=2 CS",
            g,
            kernel,
            model: Model::CuckerSmale,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }
    {
        let mut rows = vec![vec![0.0; 4]; 4];
        for i in 1..4 {
            rows[i][0] = 1.0;
        }
        let g = InteractionGraph::from_rows(&rows, &[0.0; 4]).unwrap();
        let kernel = power(0.7);
        let s0 = state_1d(&[0.0, 0.5, 1.0, 1.5], &[0.2, -0.3, 0.4, 0.0]);
        let cert = check_hierarchical(&g, &kernel, 1.0, &s0, Model::CuckerSmale).unwrap();
        cases.push(SoundnessCase {
            label: "hierarchical star-to-leader N=4 beta=0.7 CS",
            g,
            kernel,
            model: Model::CuckerSmale,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }
    {
        let g = chain_graph(3, 1.0);
        let kernel = power(2.0);
        let s0 = state_1d(&[0.0, 0.4, 0.8], &[0.0, 0.3, -0.3]);
        let cert = check_hierarchical(&g, &kernel, 1.0, &s0, Model::MotschTadmor).unwrap();
        cases.push(SoundnessCase {
            label: "hierarchical chain N=3 MT zero offsets above leader",
            g,
            kernel,
            model: Model::MotschTadmor,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }

    // General leadership regime. Slowly decaying kernels certify huge
    // confinement radii with tiny contraction, so the initial spread is
    // kept small to keep the decay horizon 5/rate simulable.
    {
        let g = cycle_graph(4);
        let kernel = power(0.4);
        let s0 = state_1d(&[0.0, 0.1, 0.2, 0.3], &[0.015, -0.015, 0.01, 0.0]);
        let cert = check_general(&g, &kernel, 1.0, &s0, Model::CuckerSmale).unwrap();
        cases.push(SoundnessCase {
            label: "general cycle N=4 beta=0.4 CS",
            g,
            kernel,
            model: Model::CuckerSmale,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }
    {
        let g = cycle_graph(5);
        let kernel = power(0.5);
        let s0 = state_1d(
            &[0.0, 0.05, 0.1, 0.15, 0.2],
            &[0.01, -0.01, 0.005, 0.0, -0.005],
        );
        let cert = check_general(&g, &kernel, 1.0, &s0, Model::CuckerSmale).unwrap();
        cases.push(SoundnessCase {
            label: "general cycle N=5 beta=1/D CS",
            g,
            kernel,
            model: Model::CuckerSmale,
            alpha: 1.0,
            state0: s0,
            cert,
        });
    }

    assert_eq!(cases.len(), 10);
    let mut details = Vec::new();
    for case in &cases {
        let cert = &case.cert;
        assert!(cert.holds, "{}: certificate does not hold", case.label);
        assert!(
            cert.margin > 0.1 * cert.lhs.max(f64::MIN_POSITIVE),
            "{}: margin {} below 10% of lhs {}",
            case.label,
            cert.margin,
            cert.lhs
        );
        let radius = cert.radius.unwrap();
        let rate = cert.rate.unwrap();
        let horizon = 5.0 / rate;
        assert!(
            horizon <= 120.0,
            "{}: decay horizon {horizon:.1}s too long for the suite",
            case.label
        );
        let dt = 1e-3;
        let traj = simulate(
            &case.g,
            &case.kernel,
            case.model,
            case.alpha,
            &case.state0,
            horizon,
            dt,
        )
        .unwrap();
        let sup_x = traj.sup_position_diameter(traj.len() - 1);
        assert!(
            sup_x <= radius,
            "{}: sup X = {sup_x} exceeds radius {radius}",
            case.label
        );
        let decay = cert.decay.as_ref().unwrap();
        let v_end = traj.velocity_diameters()[traj.len() - 1];
        let bound_end = decay.bound(traj.horizon());
        assert!(
            v_end <= bound_end + 1e-12,
            "{}: V(T*) = {v_end:e} above decay bound {bound_end:e}",
            case.label
        );
        if matches!(cert.regime, flock_core::flocking::Regime::Hierarchical) {
            let v = traj.velocity_diameters();
            for k in 0..traj.len() {
                let bound = decay.bound(traj.time(k));
                assert!(
                    v[k] <= bound + 1e-12,
                    "{}: V({}) = {:e} above the hierarchical bound {:e}",
                    case.label,
                    traj.time(k),
                    v[k],
                    bound
                );
            }
        }
        details.push(format!(
            "{} (radius {radius:.3}, rate {rate:.3})",
            case.label
        ));
    }
    pass(
        "08 certified run soundness",
        &format!(
            "10 certified sets confined and decaying: {}",
            details.join("; ")
        ),
    );
}

/// Criterion 9: solver-computed Dobrushin coefficients dominate the
/// hierarchical Gamma-tail bound and the general-leadership bound on
/// chain and cycle instances at T in {1, 5, 10}.
#[test]
fn acceptance_09_ergodicity_bounds() {
    let kernel = power(2.0);
    let mut details = Vec::new();

    let chain = chain_graph(4, 0.0);
    let chain_state = state_1d(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.1, -0.1, 0.05]);
    let chain_traj = simulate(
        &chain,
        &kernel,
        Model::CuckerSmale,
        1.0,
        &chain_state,
        10.0,
        1e-3,
    )
    .unwrap();
    let chain_tf = solve_transition(&chain_traj, &chain, &kernel).unwrap();

    let cycle = cycle_graph(5);
    let cycle_state = state_1d(&[0.0, 0.5, 1.0, 1.5, 2.0], &[0.05, -0.05, 0.03, 0.0, -0.03]);
    let cycle_traj = simulate(
        &cycle,
        &kernel,
        Model::CuckerSmale,
        1.0,
        &cycle_state,
        10.0,
        1e-3,
    )
    .unwrap();
    let cycle_tf = solve_transition(&cycle_traj, &cycle, &kernel).unwrap();

    for t in [1.0, 5.0, 10.0] {
        let k = chain_traj.index_at(t).unwrap();
        let mu = dobrushin(chain_tf.matrix(k)).unwrap();
        let r = chain_traj.sup_position_diameter(k);
        for regime in [BoundRegime::Hierarchical, BoundRegime::GeneralLeadership] {
            let bound =
                ergodicity_lower_bound(regime, &chain, &kernel, Model::CuckerSmale, 1.0, t, r)
                    .unwrap();
            assert!(
                mu >= bound,
                "chain T={t} {regime:?}: mu = {mu:e} below bound {bound:e}"
            );
            if t == 10.0 {
                details.push(format!("chain {regime:?} mu {mu:.3} >= {bound:.2e}"));
            }
        }

        let k = cycle_traj.index_at(t).unwrap();
        let mu = dobrushin(cycle_tf.matrix(k)).unwrap();
        let r = cycle_traj.sup_position_diameter(k);
        let bound = ergodicity_lower_bound(
            BoundRegime::GeneralLeadership,
            &cycle,
            &kernel,
            Model::CuckerSmale,
            1.0,
            t,
            r,
        )
        .unwrap();
        assert!(
            mu >= bound,
            "cycle T={t}: mu = {mu:e} below bound {bound:e}"
        );
        if t == 10.0 {
            details.push(format!("cycle GL mu {mu:.3} >= {bound:.2e}"));
        }
    }
    pass(
        "09 ergodicity bounds",
        &format!("T in {{1, 5, 10}}: {}", details.join("; ")),
    );
}

/// Criterion 10: structural constants against independent oracles:
/// Poincare vs Rayleigh descent (1e-6 relative), chi vs a literal scan,
/// heights vs path enumeration, reversible measures vs the
/// detailed-balance residual.
#[test]
fn acceptance_10_constant_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0bac1e);

    let mut worst_poincare = 0.0f64;
    for n in [3usize, 4, 5, 6, 4, 6] {
        let (g, _) = common::random_reversible_graph(n, &mut rng);
        let pi = g.reversible_measure().expect("constructed reversible");
        let c_p = g.poincare_constant(&pi).unwrap();
        let oracle = common::rayleigh_infimum(&g, &pi, 100, &mut rng);
        let rel = (c_p - oracle).abs() / c_p;
        assert!(rel <= 1e-6, "n = {n}: c_P {c_p} vs Rayleigh {oracle}");
        worst_poincare = worst_poincare.max(rel);
    }

    for _ in 0..20 {
        let n = rng.random_range(2..8);
        let g = common::random_graph(n, 0.4, &mut rng);
        let chi = scrambling_coefficient(g.weights()).unwrap();
        let oracle = common::chi_by_literal_scan(g.weights()).unwrap();
        assert!((chi - oracle).abs() <= 1e-12 * (1.0 + oracle));
    }

    for _ in 0..10 {
        let n = rng.random_range(2..=8);
        let g = common::random_hierarchy(n, &mut rng);
        let h = g.heights().unwrap();
        for i in 1..n {
            let oracle = common::height_by_path_enumeration(&g, i).unwrap();
            assert_eq!(h.heights[i], oracle, "n = {n}, node {i}");
        }
    }

    let mut worst_residual = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(2..8);
        let (g, _) = common::random_reversible_graph(n, &mut rng);
        let pi = g.reversible_measure().expect("constructed reversible");
        let residual = g.detailed_balance_residual(&pi);
        let budget = 1e-10 * g.weights().amax();
        assert!(residual <= budget, "residual {residual:e} over {budget:e}");
        worst_residual = worst_residual.max(residual / budget);
    }

    pass(
        "10 constant oracles",
        &format!(
            "Poincare worst rel err {worst_poincare:.2e}; chi, heights exact; balance residual worst {worst_residual:.2e} of budget"
        ),
    );
}
