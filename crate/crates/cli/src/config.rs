//! Experiment configuration: a single JSON document with a versioned
//! schema. Unknown keys are rejected everywhere, and parse errors carry
//! the offending path and position.

use anyhow::{anyhow, bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::path::PathBuf;

use flock_core::dynamics::AgentState;
use flock_core::graph::InteractionGraph;
use flock_core::kernel::{CommunicationKernel, TailBehavior};
use flock_core::Model;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub graph: GraphSpec,
    pub kernel: KernelSpec,
    pub model: ModelSpec,
    pub alpha: f64,
    pub initial: InitialSpec,
    pub horizon: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub commands: Option<Vec<CommandName>>,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Analyze,
    Certify,
    Simulate,
    Verify,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Cs,
    Mt,
}

impl From<ModelSpec> for Model {
    fn from(spec: ModelSpec) -> Model {
        match spec {
            ModelSpec::Cs => Model::CuckerSmale,
            ModelSpec::Mt => Model::MotschTadmor,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(rename = "type")]
    pub kind: GraphKind,
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub edges: Option<Vec<EdgeSpec>>,
    #[serde(default)]
    pub offsets: Option<OffsetSpec>,
    #[serde(default)]
    pub family: Option<FamilyName>,
    #[serde(default)]
    pub weight: Option<f64>,
    #[serde(default)]
    pub offset: Option<f64>,
    #[serde(default)]
    pub in_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub out_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Matrix,
    Edges,
    Family,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Uniform,
    Star,
    Chain,
    Cycle,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum OffsetSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(rename = "type")]
    pub kind: KernelKind,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub r: Option<Vec<f64>>,
    #[serde(default)]
    pub psi: Option<Vec<f64>>,
    #[serde(default)]
    pub tail: Option<TailSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Power,
    Table,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSpec {
    Finite,
    Infinite,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(rename = "type")]
    pub kind: InitialKind,
    #[serde(default)]
    pub positions: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub velocities: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub groups: Option<Vec<GroupSpec>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Explicit,
    Groups,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub count: usize,
    #[serde(default)]
    pub position: Option<Vec<f64>>,
    #[serde(default)]
    pub position_box: Option<BoxSpec>,
    #[serde(default)]
    pub velocity: Option<Vec<f64>>,
    #[serde(default)]
    pub velocity_box: Option<BoxSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub contraction_pairs: usize,
    pub mc_samples: usize,
    pub mc_times: Option<Vec<f64>>,
    pub export_paths: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            contraction_pairs: 100,
            mc_samples: 2000,
            mc_times: None,
            export_paths: 20,
        }
    }
}

/// Parses and validates a config document; parse errors carry the JSON
/// path and line/column of the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let deserializer = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(deserializer)
        .map_err(|e| anyhow!("config parse error at `{}`: {}", e.path(), e.inner()))?;
    if config.schema_version != SCHEMA_VERSION {
        bail!(
            "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            config.schema_version
        );
    }
    Ok(config)
}

/// Everything a command needs, built and validated from a config.
#[derive(Debug)]
pub struct Experiment {
    pub graph: InteractionGraph,
    pub kernel: CommunicationKernel,
    pub model: Model,
    pub alpha: f64,
    pub state0: AgentState,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub verify: VerifySpec,
}

impl RunConfig {
    pub fn build(&self) -> Result<Experiment> {
        let graph = build_graph(&self.graph).context("graph")?;
        let kernel = build_kernel(&self.kernel).context("kernel")?;
        let model = Model::from(self.model);
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            bail!("alpha must be positive, got {}", self.alpha);
        }
        let state0 = build_initial(&self.initial, graph.n(), self.seed).context("initial")?;
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            bail!("horizon must be positive, got {}", self.horizon);
        }
        let dt = match self.dt {
            Some(dt) => {
                if dt.is_nan() || dt <= 0.0 || dt > self.horizon {
                    bail!("dt must lie in (0, horizon], got {dt}");
                }
                dt
            }
            None => default_dt(&graph, self.alpha),
        };
        Ok(Experiment {
            graph,
            kernel,
            model,
            alpha: self.alpha,
            state0,
            horizon: self.horizon,
            dt,
            seed: self.seed.unwrap_or(0),
            verify: self.verify.clone().unwrap_or_default(),
        })
    }
}

/// `1e-3 * min(1, 1/(alpha * max row sum))`: resolves the stiffest rate
/// when no step is given.
fn default_dt(graph: &InteractionGraph, alpha: f64) -> f64 {
    let a_bar = (0..graph.n())
        .map(|i| graph.row_sum(i))
        .fold(0.0f64, f64::max);
    if a_bar > 0.0 {
        1e-3 * (1.0f64).min(1.0 / (alpha * a_bar))
    } else {
        1e-3
    }
}

fn build_offsets(spec: &Option<OffsetSpec>, n: usize) -> Result<DVector<f64>> {
    match spec {
        None => Ok(DVector::zeros(n)),
        Some(OffsetSpec::Scalar(a)) => Ok(DVector::from_element(n, *a)),
        Some(OffsetSpec::Vector(v)) => {
            if v.len() != n {
                bail!("offsets has {} entries for {} agents", v.len(), n);
            }
            Ok(DVector::from_column_slice(v))
        }
    }
}

fn build_graph(spec: &GraphSpec) -> Result<InteractionGraph> {
    match spec.kind {
        GraphKind::Matrix => {
            let rows = spec
                .weights
                .as_ref()
                .ok_or_else(|| anyhow!("matrix graph needs `weights`"))?;
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                bail!("weights must be a square {n}x{n} matrix");
            }
            reject_fields(
                spec,
                &[
                    "n",
                    "edges",
                    "family",
                    "weight",
                    "offset",
                    "in_weights",
                    "out_weights",
                ],
            )?;
            let weights = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            Ok(InteractionGraph::new(
                weights,
                build_offsets(&spec.offsets, n)?,
            )?)
        }
        GraphKind::Edges => {
            let n = spec.n.ok_or_else(|| anyhow!("edge graph needs `n`"))?;
            let edges = spec
                .edges
                .as_ref()
                .ok_or_else(|| anyhow!("edge graph needs `edges`"))?;
            reject_fields(
                spec,
                &[
                    "weights",
                    "family",
                    "weight",
                    "offset",
                    "in_weights",
                    "out_weights",
                ],
            )?;
            let mut weights = DMatrix::zeros(n, n);
            for e in edges {
                if e.i >= n || e.j >= n {
                    bail!("edge ({}, {}) out of range for n = {n} (0-based)", e.i, e.j);
                }
                weights[(e.i, e.j)] = e.w;
            }
            Ok(InteractionGraph::new(
                weights,
                build_offsets(&spec.offsets, n)?,
            )?)
        }
        GraphKind::Family => {
            let family = spec
                .family
                .ok_or_else(|| anyhow!("family graph needs `family`"))?;
            reject_fields(spec, &["weights", "edges"])?;
            build_family(spec, family)
        }
    }
}

fn reject_fields(spec: &GraphSpec, names: &[&str]) -> Result<()> {
    let present = |name: &str| -> bool {
        match name {
            "weights" => spec.weights.is_some(),
            "n" => spec.n.is_some(),
            "edges" => spec.edges.is_some(),
            "family" => spec.family.is_some(),
            "weight" => spec.weight.is_some(),
            "offset" => spec.offset.is_some(),
            "in_weights" => spec.in_weights.is_some(),
            "out_weights" => spec.out_weights.is_some(),
            _ => false,
        }
    };
    for name in names {
        if present(name) {
            bail!("field `{name}` does not apply to this graph type");
        }
    }
    Ok(())
}

fn build_family(spec: &GraphSpec, family: FamilyName) -> Result<InteractionGraph> {
    match family {
        FamilyName::Uniform => {
            let n = spec.n.ok_or_else(|| anyhow!("uniform family needs `n`"))?;
            if n == 0 {
                bail!("uniform family needs n >= 1");
            }
            let w = spec.weight.unwrap_or(1.0 / n as f64);
            // The classic normalised model also sets a_i to the weight.
            let a = spec.offset.unwrap_or(w);
            let weights = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w });
            Ok(InteractionGraph::new(weights, DVector::from_element(n, a))?)
        }
        FamilyName::Star => {
            let (n, hub_in, hub_out) = match (&spec.in_weights, &spec.out_weights) {
                (Some(iw), Some(ow)) => {
                    if iw.len() != ow.len() {
                        bail!("in_weights and out_weights must have equal length");
                    }
                    (iw.len() + 1, iw.clone(), ow.clone())
                }
                (None, None) => {
                    let n = spec
                        .n
                        .ok_or_else(|| anyhow!("star family needs `n` or weight arrays"))?;
                    if n < 2 {
                        bail!("star family needs n >= 2");
                    }
                    let w = spec.weight.unwrap_or(1.0);
                    (n, vec![w; n - 1], vec![w; n - 1])
                }
                _ => bail!("star family needs both in_weights and out_weights, or neither"),
            };
            if let Some(expected) = spec.n {
                if expected != n {
                    bail!("star: n = {expected} conflicts with {} spokes", n - 1);
                }
            }
            let (mut graph, _) = flock_core::dynamics::star_graph(&hub_in, &hub_out)?;
            if let Some(a) = spec.offset {
                let weights = graph.weights().clone();
                graph = InteractionGraph::new(weights, DVector::from_element(n, a))?;
            }
            Ok(graph)
        }
        FamilyName::Chain | FamilyName::Cycle => {
            let n = spec.n.ok_or_else(|| anyhow!("family needs `n`"))?;
            if n < 2 {
                bail!("chain/cycle family needs n >= 2");
            }
            let w = spec.weight.unwrap_or(1.0);
            let weights = match family {
                FamilyName::Chain => {
                    DMatrix::from_fn(n, n, |i, j| if i >= 1 && j + 1 == i { w } else { 0.0 })
                }
                _ => DMatrix::from_fn(n, n, |i, j| if j == (i + 1) % n { w } else { 0.0 }),
            };
            let a = spec.offset.unwrap_or(0.0);
            Ok(InteractionGraph::new(weights, DVector::from_element(n, a))?)
        }
    }
}

fn build_kernel(spec: &KernelSpec) -> Result<CommunicationKernel> {
    match spec.kind {
        KernelKind::Power => {
            let beta = spec
                .beta
                .ok_or_else(|| anyhow!("power kernel needs `beta`"))?;
            if spec.r.is_some() || spec.psi.is_some() || spec.tail.is_some() {
                bail!("table fields do not apply to a power kernel");
            }
            Ok(CommunicationKernel::power_law(beta)?)
        }
        KernelKind::Table => {
            let r = spec
                .r
                .clone()
                .ok_or_else(|| anyhow!("table kernel needs `r`"))?;
            let psi = spec
                .psi
                .clone()
                .ok_or_else(|| anyhow!("table kernel needs `psi`"))?;
            let tail = spec
                .tail
                .ok_or_else(|| anyhow!("table kernel needs `tail`"))?;
            if spec.beta.is_some() {
                bail!("`beta` does not apply to a table kernel");
            }
            let tail = match tail {
                TailSpec::Finite => TailBehavior::ConvergentIntegral,
                TailSpec::Infinite => TailBehavior::DivergentIntegral,
            };
            Ok(CommunicationKernel::table(r, psi, tail)?)
        }
    }
}

fn build_initial(spec: &InitialSpec, n: usize, seed: Option<u64>) -> Result<AgentState> {
    match spec.kind {
        InitialKind::Explicit => {
            let positions = spec
                .positions
                .as_ref()
                .ok_or_else(|| anyhow!("explicit initial state needs `positions`"))?;
            let velocities = spec
                .velocities
                .as_ref()
                .ok_or_else(|| anyhow!("explicit initial state needs `velocities`"))?;
            if spec.groups.is_some() {
                bail!("`groups` does not apply to an explicit initial state");
            }
            if positions.len() != n || velocities.len() != n {
                bail!(
                    "initial state has {} positions / {} velocities for {n} agents",
                    positions.len(),
                    velocities.len()
                );
            }
            let d = spec.dim.unwrap_or_else(|| positions[0].len());
            if positions
                .iter()
                .chain(velocities.iter())
                .any(|row| row.len() != d)
            {
                bail!("all rows must have dimension {d}");
            }
            let x = DMatrix::from_fn(n, d, |i, m| positions[i][m]);
            let v = DMatrix::from_fn(n, d, |i, m| velocities[i][m]);
            Ok(AgentState::new(0.0, x, v)?)
        }
        InitialKind::Groups => {
            let d = spec
                .dim
                .ok_or_else(|| anyhow!("grouped initial state needs `dim`"))?;
            let groups = spec
                .groups
                .as_ref()
                .ok_or_else(|| anyhow!("grouped initial state needs `groups`"))?;
            if spec.positions.is_some() || spec.velocities.is_some() {
                bail!("explicit arrays do not apply to a grouped initial state");
            }
            let total: usize = groups.iter().map(|g| g.count).sum();
            if total != n {
                bail!("groups cover {total} agents but the graph has {n}");
            }
            let sampled = groups
                .iter()
                .any(|g| g.position_box.is_some() || g.velocity_box.is_some());
            let mut rng = match (sampled, seed) {
                (true, Some(seed)) => Some(ChaCha8Rng::seed_from_u64(seed)),
                (true, None) => bail!("sampled initial conditions require a `seed`"),
                (false, _) => None,
            };
            let mut x = DMatrix::zeros(n, d);
            let mut v = DMatrix::zeros(n, d);
            let mut row = 0usize;
            for (gi, group) in groups.iter().enumerate() {
                for _ in 0..group.count {
                    fill_row(
                        &mut x,
                        row,
                        d,
                        &group.position,
                        &group.position_box,
                        &mut rng,
                    )
                    .with_context(|| format!("group {gi} position"))?;
                    fill_row(
                        &mut v,
                        row,
                        d,
                        &group.velocity,
                        &group.velocity_box,
                        &mut rng,
                    )
                    .with_context(|| format!("group {gi} velocity"))?;
                    row += 1;
                }
            }
            Ok(AgentState::new(0.0, x, v)?)
        }
    }
}

fn fill_row(
    target: &mut DMatrix<f64>,
    row: usize,
    d: usize,
    fixed: &Option<Vec<f64>>,
    sampled: &Option<BoxSpec>,
    rng: &mut Option<ChaCha8Rng>,
) -> Result<()> {
    match (fixed, sampled) {
        (Some(values), None) => {
            if values.len() != d {
                bail!("fixed vector has dimension {}, expected {d}", values.len());
            }
            for m in 0..d {
                target[(row, m)] = values[m];
            }
        }
        (None, Some(bounds)) => {
            if bounds.low.len() != d || bounds.high.len() != d {
                bail!("box bounds must have dimension {d}");
            }
            let rng = rng.as_mut().expect("checked by caller");
            for m in 0..d {
                let (lo, hi) = (bounds.low[m], bounds.high[m]);
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    bail!("box bounds [{lo}, {hi}] are not ordered (low <= high)");
                }
                target[(row, m)] = if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                };
            }
        }
        (Some(_), Some(_)) => bail!("give either a fixed vector or a box, not both"),
        (None, None) => bail!("each group needs a fixed vector or a sampling box"),
    }
    Ok(())
}
