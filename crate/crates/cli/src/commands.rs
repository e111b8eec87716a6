//! The four experiment commands: analyze, certify, simulate, verify.
//! Each fills report sections; verify also records failures that drive
//! the process exit status.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use flock_core::dynamics::{asymptotic_velocity, simulate, Trajectory};
use flock_core::flocking::{
    check_general, check_hierarchical, check_reversible, check_scrambling, FlockingCertificate,
};
use flock_core::graph::scrambling_coefficient;
use flock_core::markov::{
    contraction_check, dobrushin, ergodicity_lower_bound, mc_velocity_estimate,
    sample_jump_process, solve_transition, BoundRegime,
};
use flock_core::Model;

use crate::config::Experiment;
use crate::report::{number, Report, Section};

const DUALITY_GAP_TOL: f64 = 1e-6;
const STOCHASTICITY_TOL: f64 = 1e-9;
const MC_AGREEMENT_FLOOR: f64 = 0.99;

pub fn analyze(exp: &Experiment, report: &mut Report) {
    let profile = exp.graph.classify();
    let constants = exp.graph.structural_constants();

    let mut section = Section::new("assumptions");
    section.push("agents", json!(exp.graph.n()));
    section.flag("reversible", profile.is_reversible());
    section.flag("scrambling", profile.is_scrambling());
    section.flag("hierarchical", profile.is_hierarchical());
    section.flag("general_leadership", profile.has_general_leadership());
    section.push("closed_classes", json!(profile.closed_classes));
    if let Some(h) = &profile.hierarchy {
        section.push("heights", json!(h.heights));
        section.push("height_max", json!(h.max));
    }
    if !profile.has_general_leadership() {
        section.text(
            "warning",
            "no unique closed class: no flocking certificate applies",
        );
    }
    report.push(section);

    let mut section = Section::new("constants");
    section.optional_num("chi_a", constants.chi_a);
    section.optional_num("a_star", constants.a_star);
    section.optional_num("a_hat", constants.a_hat);
    section.num("a_bar", constants.a_bar);
    section.optional_num("offset_bar", constants.offset_bar);
    section.optional_num("k_denom", constants.k_denom);
    match &constants.mt {
        Some(mt) => {
            section.optional_num("chi_b", mt.chi_b);
            section.optional_num("b_star", mt.b_star);
            section.num("b_bar", mt.b_bar);
        }
        None => section.text("mt_constants", "absent (some MT denominator vanishes)"),
    }
    match &constants.pi {
        Some(pi) => {
            let values: Vec<Value> = pi.iter().map(|&p| number(p)).collect();
            section.push("pi", Value::Array(values));
        }
        None => section.text("pi", "absent"),
    }
    section.optional_num("pi_star", constants.pi_star);
    section.optional_num("poincare", constants.poincare);
    match constants.coalescence.diameter {
        Some(d) => section.push("coalescence_diameter", json!(d)),
        None => section.text("coalescence_diameter", "infinite"),
    }
    report.push(section);
}

pub fn certify(exp: &Experiment, report: &mut Report) {
    let profile = exp.graph.classify();
    let mut certificates: Vec<(&'static str, FlockingCertificate)> = Vec::new();
    let mut skipped: Vec<(&'static str, String)> = Vec::new();

    if exp.model == Model::CuckerSmale {
        match &profile.reversible {
            Some(pi) => {
                match check_reversible(&exp.graph, pi, &exp.kernel, exp.alpha, &exp.state0) {
                    Ok(cert) => certificates.push(("reversible", cert)),
                    Err(e) => skipped.push(("reversible", e.to_string())),
                }
            }
            None => skipped.push(("reversible", "no reversible measure".to_string())),
        }
    } else {
        skipped.push(("reversible", "CS-only certificate".to_string()));
    }

    let chi = match exp.model {
        Model::CuckerSmale => scrambling_coefficient(exp.graph.weights()),
        Model::MotschTadmor => exp
            .graph
            .mt_matrix()
            .ok()
            .and_then(|b| scrambling_coefficient(&b)),
    };
    if chi.is_some_and(|c| c > 0.0) {
        match check_scrambling(&exp.graph, &exp.kernel, exp.alpha, &exp.state0, exp.model) {
            Ok(cert) => certificates.push(("scrambling", cert)),
            Err(e) => skipped.push(("scrambling", e.to_string())),
        }
    } else {
        skipped.push(("scrambling", "scrambling coefficient is zero".to_string()));
    }

    if profile.is_hierarchical() && exp.graph.n() >= 2 {
        match check_hierarchical(&exp.graph, &exp.kernel, exp.alpha, &exp.state0, exp.model) {
            Ok(cert) => certificates.push(("hierarchical", cert)),
            Err(e) => skipped.push(("hierarchical", e.to_string())),
        }
    } else {
        skipped.push((
            "hierarchical",
            "index ordering not hierarchical".to_string(),
        ));
    }

    if profile.has_general_leadership() && exp.graph.n() >= 2 {
        match check_general(&exp.graph, &exp.kernel, exp.alpha, &exp.state0, exp.model) {
            Ok(cert) => certificates.push(("general_leadership", cert)),
            Err(e) => skipped.push(("general_leadership", e.to_string())),
        }
    } else {
        skipped.push(("general_leadership", "no unique closed class".to_string()));
    }

    // Flag the certificate with the largest margin.
    let best = certificates
        .iter()
        .enumerate()
        .max_by(|(_, (_, a)), (_, (_, b))| {
            a.margin
                .partial_cmp(&b.margin)
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(idx, _)| idx);

    for (idx, (name, cert)) in certificates.iter().enumerate() {
        let mut section = Section::new(format!("certificate.{name}"));
        section.text("model", cert.model.to_string());
        section.flag("holds", cert.holds);
        section.num("lhs", cert.lhs);
        section.num("threshold", cert.threshold);
        section.num("margin", cert.margin);
        section.optional_num("radius", cert.radius);
        section.optional_num("rate", cert.rate);
        section.optional_num("envelope_argmax", cert.witness.envelope_argmax);
        section.optional_num("radius_root", cert.witness.radius_root);
        section.optional_num("step_time", cert.witness.step_time);
        section.flag("best", Some(idx) == best);
        report.push(section);
    }
    if !skipped.is_empty() {
        let mut section = Section::new("certificates.skipped");
        for (name, reason) in skipped {
            section.text(name, reason);
        }
        report.push(section);
    }
}

pub fn run_simulation(exp: &Experiment) -> Result<Trajectory> {
    Ok(simulate(
        &exp.graph,
        &exp.kernel,
        exp.model,
        exp.alpha,
        &exp.state0,
        exp.horizon,
        exp.dt,
    )?)
}

pub fn simulate_cmd(exp: &Experiment, out_dir: &Path, report: &mut Report) -> Result<Trajectory> {
    let traj = run_simulation(exp)?;
    write_trajectory_csv(&traj, &out_dir.join("trajectory.csv"))?;
    write_summary_csv(&traj, &out_dir.join("summary.csv"))?;

    let mut section = Section::new("simulation");
    section.text("model", exp.model.to_string());
    section.num("alpha", exp.alpha);
    section.num("dt", exp.dt);
    section.num("horizon", traj.horizon());
    section.push("grid_points", json!(traj.len()));
    let last = traj.len() - 1;
    section.num("initial_x_diameter", traj.position_diameters()[0]);
    section.num("initial_v_diameter", traj.velocity_diameters()[0]);
    section.num("final_x_diameter", traj.position_diameters()[last]);
    section.num("final_v_diameter", traj.velocity_diameters()[last]);
    section.num("sup_x_diameter", traj.sup_position_diameter(last));
    section.optional_num("fitted_decay_rate", fit_decay_rate(&traj));

    if let Some(pi) = exp.graph.reversible_measure() {
        let v_star = asymptotic_velocity(&exp.graph, &pi, &exp.state0.velocities)?;
        let end = traj.final_state();
        let mut worst = 0.0f64;
        for i in 0..end.n() {
            let mut dev = 0.0;
            for m in 0..end.dim() {
                let diff = end.velocities[(i, m)] - v_star[m];
                dev += diff * diff;
            }
            worst = worst.max(dev.sqrt());
        }
        let components: Vec<Value> = v_star.iter().map(|&v| number(v)).collect();
        section.push("asymptotic_velocity", Value::Array(components));
        section.num("max_final_deviation_from_v_star", worst);
    } else {
        section.text("asymptotic_velocity", "absent (no reversible measure)");
    }
    section.text("trajectory_file", "trajectory.csv");
    section.text("summary_file", "summary.csv");
    report.push(section);
    Ok(traj)
}

/// Least-squares slope of `ln V(t)` over the second half of the grid;
/// absent when the diameter has already collapsed to zero.
fn fit_decay_rate(traj: &Trajectory) -> Option<f64> {
    let v = traj.velocity_diameters();
    let start = traj.len() / 2;
    let points: Vec<(f64, f64)> = (start..traj.len())
        .filter(|&k| v[k] > 1e-300)
        .map(|k| (traj.time(k), v[k].ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, y) in &points {
        cov += (t - mean_t) * (y - mean_y);
        var += (t - mean_t) * (t - mean_t);
    }
    (var > 0.0).then(|| -cov / var)
}

pub fn verify_cmd(
    exp: &Experiment,
    traj: &Trajectory,
    out_dir: &Path,
    report: &mut Report,
) -> Result<()> {
    let mut section = Section::new("verification");

    let tf = solve_transition(traj, &exp.graph, &exp.kernel)?;
    let gap = tf.duality_gap(traj)?;
    let residual = tf.stochasticity_residual();
    section.num("duality_gap", gap);
    section.num("duality_gap_tolerance", DUALITY_GAP_TOL);
    section.num("stochasticity_residual", residual);
    if gap > DUALITY_GAP_TOL {
        report.fail(format!("duality gap {gap:e} exceeds {DUALITY_GAP_TOL:e}"));
    }
    if residual > STOCHASTICITY_TOL {
        report.fail(format!(
            "transition matrices deviate from stochasticity by {residual:e}"
        ));
    }

    let contraction = contraction_check(
        traj,
        &exp.graph,
        &exp.kernel,
        exp.verify.contraction_pairs,
        exp.seed,
    )?;
    section.push("contraction_pairs", json!(contraction.samples.len()));
    section.num("contraction_worst_slack", contraction.worst_slack);
    section.num("contraction_tolerance", contraction.tolerance);
    section.push("contraction_violations", json!(contraction.violations));
    if contraction.violations > 0 {
        report.fail(format!(
            "{} contraction violations beyond {:e}",
            contraction.violations, contraction.tolerance
        ));
    }

    // Monte Carlo agreement over a grid of (state, time) cells.
    let times: Vec<f64> = exp
        .verify
        .mc_times
        .clone()
        .unwrap_or_else(|| vec![0.5 * traj.horizon(), traj.horizon()]);
    let v0 = &traj.initial_state().velocities;
    let mut cells = 0usize;
    let mut agreeing = 0usize;
    let states: Vec<usize> = (0..exp.graph.n().min(12)).collect();
    for (cell_idx, &t) in times.iter().enumerate() {
        let k = match traj.index_at(t) {
            Some(k) => k,
            None => {
                report.fail(format!("verify time {t} is not on the grid"));
                continue;
            }
        };
        let solver = tf.matrix(k);
        for &i in &states {
            let est = mc_velocity_estimate(
                traj,
                &exp.graph,
                &exp.kernel,
                i,
                traj.time(k),
                exp.verify.mc_samples,
                exp.seed ^ (0x9e37 + (cell_idx * 131 + i) as u64),
            )?;
            let mut ok = true;
            for m in 0..v0.ncols() {
                let reference: f64 = (0..exp.graph.n())
                    .map(|j| solver[(i, j)] * v0[(j, m)])
                    .sum();
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
    let fraction = if cells > 0 {
        agreeing as f64 / cells as f64
    } else {
        1.0
    };
    section.push("mc_samples_per_cell", json!(exp.verify.mc_samples));
    section.push("mc_cells", json!(cells));
    section.push("mc_agreeing", json!(agreeing));
    section.num("mc_agreement_fraction", fraction);
    // A 3-sigma test misses a cell now and then; with few cells the
    // 99% floor must still tolerate one statistical miss.
    let allowed_misses = (cells / 100).max(1);
    if cells - agreeing > allowed_misses {
        report.fail(format!(
            "Monte Carlo agreement {fraction:.4} below {MC_AGREEMENT_FLOOR} \
             ({} of {cells} cells beyond 3 standard errors)",
            cells - agreeing
        ));
    }

    // Structural ergodicity bounds against the solver-computed
    // Dobrushin coefficient at the horizon.
    let last = traj.len() - 1;
    let mu = dobrushin(tf.matrix(last))?;
    let r = traj.sup_position_diameter(last);
    section.num("dobrushin_mu_at_horizon", mu);
    let profile = exp.graph.classify();
    if profile.is_hierarchical() && exp.graph.n() >= 2 {
        let bound = ergodicity_lower_bound(
            BoundRegime::Hierarchical,
            &exp.graph,
            &exp.kernel,
            exp.model,
            exp.alpha,
            traj.horizon(),
            r,
        )?;
        section.num("ergodicity_bound_hierarchical", bound);
        if mu + 1e-12 < bound {
            report.fail(format!(
                "mu = {mu:e} below the hierarchical ergodicity bound {bound:e}"
            ));
        }
    }
    if profile.has_general_leadership() && exp.graph.n() >= 2 {
        match ergodicity_lower_bound(
            BoundRegime::GeneralLeadership,
            &exp.graph,
            &exp.kernel,
            exp.model,
            exp.alpha,
            traj.horizon(),
            r,
        ) {
            Ok(bound) => {
                section.num("ergodicity_bound_general", bound);
                if mu + 1e-12 < bound {
                    report.fail(format!(
                        "mu = {mu:e} below the general-leadership ergodicity bound {bound:e}"
                    ));
                }
            }
            Err(e) => section.text("ergodicity_bound_general", format!("skipped: {e}")),
        }
    }

    // Sampled jump paths, exported for inspection.
    let n_paths = exp.verify.export_paths;
    let mut absorbed_at_leader = 0usize;
    {
        let path_file = File::create(out_dir.join("paths.csv")).context("paths.csv")?;
        let mut w = BufWriter::new(path_file);
        writeln!(w, "path_id,jump_index,time,state")?;
        for p in 0..n_paths {
            let initial = p % exp.graph.n();
            let path = sample_jump_process(
                traj,
                &exp.graph,
                &exp.kernel,
                initial,
                traj.horizon(),
                exp.seed ^ (0x7a75_0000u64 + p as u64),
            )?;
            writeln!(w, "{p},0,0,{initial}")?;
            for (idx, jump) in path.jumps.iter().enumerate() {
                writeln!(w, "{p},{},{},{}", idx + 1, jump.time, jump.to)?;
            }
            if path.final_state() == 0 {
                absorbed_at_leader += 1;
            }
        }
        w.flush()?;
    }
    section.push("paths_exported", json!(n_paths));
    if profile.is_hierarchical() && n_paths > 0 {
        section.num(
            "paths_absorbed_at_leader_fraction",
            absorbed_at_leader as f64 / n_paths as f64,
        );
    }
    section.text("paths_file", "paths.csv");
    report.push(section);
    Ok(())
}

fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    let d = traj.initial_state().dim();
    let mut header = String::from("t,i");
    for m in 0..d {
        header.push_str(&format!(",x_{m}"));
    }
    for m in 0..d {
        header.push_str(&format!(",v_{m}"));
    }
    writeln!(w, "{header}")?;
    for k in 0..traj.len() {
        let state = traj.state(k);
        for i in 0..state.n() {
            let mut line = format!("{},{i}", state.time);
            for m in 0..d {
                line.push_str(&format!(",{}", state.positions[(i, m)]));
            }
            for m in 0..d {
                line.push_str(&format!(",{}", state.velocities[(i, m)]));
            }
            writeln!(w, "{line}")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_summary_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,X,V")?;
    for k in 0..traj.len() {
        writeln!(
            w,
            "{},{},{}",
            traj.time(k),
            traj.position_diameters()[k],
            traj.velocity_diameters()[k]
        )?;
    }
    w.flush()?;
    Ok(())
}
