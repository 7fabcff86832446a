//! JSON documents read and written by the CLI and the service.
//!
//! Every document carries `schema_version`. Readers reject unknown keys
//! unless asked to be lenient, and errors name the offending field path.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wdnsense_core::anneal::{AnnealConfig, AnnealResult, HistogramBin, Schedule};
use wdnsense_core::network::{EdgeSpec, FICTITIOUS_PREFIX};
use wdnsense_core::placement::{BaselineStats, PlacementReport};
use wdnsense_core::{
    CardinalityMode, CentralityMap, DemandModel, Hyperparams, MarkStatus, Network, NetworkError, Node, NodeKind,
    PlacementError, QuboError, QuboModel, Session, VarRole, VariableRegistry,
};

pub const SCHEMA_VERSION: u32 = 1;

fn current_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("field `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
}

impl FormatError {
    fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError::Field {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Parses a document. In strict mode any key the schema does not know is an
/// error naming its path.
pub fn parse<T: DeserializeOwned>(text: &str, strict: bool) -> Result<T, FormatError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let mut unknown = Vec::new();
    let value = {
        let mut track = |path: serde_ignored::Path<'_>| unknown.push(field_path(&path));
        let ignoring = serde_ignored::Deserializer::new(&mut de, &mut track);
        serde_path_to_error::deserialize(ignoring).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if inner.is_syntax() || inner.is_eof() {
                FormatError::Syntax(inner.to_string())
            } else {
                FormatError::field(path, inner.to_string())
            }
        })?
    };
    de.end().map_err(|e| FormatError::Syntax(e.to_string()))?;
    if strict {
        if let Some(path) = unknown.into_iter().next() {
            return Err(FormatError::field(path, "unknown field"));
        }
    }
    Ok(value)
}

/// Renders an ignored-key path as `nodes[0].colour`, matching the paths in
/// type errors.
fn field_path(path: &serde_ignored::Path<'_>) -> String {
    use serde_ignored::Path;
    match path {
        Path::Root => String::new(),
        Path::Seq { parent, index } => format!("{}[{index}]", field_path(parent)),
        Path::Map { parent, key } => {
            let head = field_path(parent);
            if head.is_empty() {
                key.clone()
            } else {
                format!("{head}.{key}")
            }
        }
        Path::Some { parent } | Path::NewtypeStruct { parent } | Path::NewtypeVariant { parent } => field_path(parent),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty<T: Serialize>(doc: &T) -> String {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialize");
    text.push('\n');
    text
}

fn check_version(found: u32) -> Result<(), FormatError> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(FormatError::Version { found })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindDoc {
    Junction,
    Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    pub kind: KindDoc,
    pub demand: f64,
    pub accessible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDoc {
    #[serde(default = "current_version")]
    pub schema_version: u32,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

impl NetworkDoc {
    /// Real nodes and edges only; fictitious elements never leave the process.
    pub fn from_network(net: &Network) -> Self {
        let nodes = net
            .nodes()
            .iter()
            .filter(|n| !n.is_fictitious())
            .map(|n| NodeDoc {
                id: n.id.clone(),
                x: n.coords.map(|c| c.0),
                y: n.coords.map(|c| c.1),
                kind: match n.kind {
                    NodeKind::Junction => KindDoc::Junction,
                    NodeKind::Source => KindDoc::Source,
                },
                demand: n.demand,
                accessible: n.accessible,
            })
            .collect();
        let edges = net
            .edge_specs()
            .into_iter()
            .filter(|e| !e.id.starts_with(FICTITIOUS_PREFIX))
            .map(|e| EdgeDoc {
                id: e.id,
                from: e.from,
                to: e.to,
                length: e.length,
            })
            .collect();
        NetworkDoc {
            schema_version: SCHEMA_VERSION,
            nodes,
            edges,
        }
    }

    pub fn into_network(self) -> Result<Network, FormatError> {
        check_version(self.schema_version)?;
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.into_iter().enumerate() {
            if n.id.starts_with(FICTITIOUS_PREFIX) {
                return Err(FormatError::field(
                    format!("nodes[{i}].id"),
                    format!("ids starting with `{FICTITIOUS_PREFIX}` are reserved"),
                ));
            }
            let kind = match n.kind {
                KindDoc::Junction => NodeKind::Junction,
                KindDoc::Source => NodeKind::Source,
            };
            let mut node = Node::new(n.id, kind, n.demand, n.accessible);
            match (n.x, n.y) {
                (Some(x), Some(y)) => node = node.with_coords(x, y),
                (None, None) => {}
                (Some(_), None) => return Err(FormatError::field(format!("nodes[{i}].y"), "x given without y")),
                (None, Some(_)) => return Err(FormatError::field(format!("nodes[{i}].x"), "y given without x")),
            }
            nodes.push(node);
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.into_iter().enumerate() {
            if e.id.starts_with(FICTITIOUS_PREFIX) {
                return Err(FormatError::field(
                    format!("edges[{i}].id"),
                    format!("ids starting with `{FICTITIOUS_PREFIX}` are reserved"),
                ));
            }
            edges.push(EdgeSpec::new(e.id, e.from, e.to, e.length));
        }
        Ok(Network::new(nodes, edges)?)
    }
}

pub fn parse_network(text: &str, strict: bool) -> Result<Network, FormatError> {
    parse::<NetworkDoc>(text, strict)?.into_network()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityDoc {
    #[serde(default = "current_version")]
    pub schema_version: u32,
    /// Normalized weight per real pipe.
    pub edges: BTreeMap<String, f64>,
    /// Normalized node betweenness, for display.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<BTreeMap<String, f64>>,
}

impl CentralityDoc {
    pub fn new(map: &CentralityMap, nodes: Option<BTreeMap<String, f64>>) -> Self {
        CentralityDoc {
            schema_version: SCHEMA_VERSION,
            edges: map.values.clone(),
            nodes,
        }
    }

    /// Checks that the weights cover exactly the real pipes of `net`.
    pub fn into_map(self, net: &Network) -> Result<CentralityMap, FormatError> {
        check_version(self.schema_version)?;
        let real: BTreeSet<&str> = net
            .edges()
            .iter()
            .filter(|e| !e.is_fictitious())
            .map(|e| e.id.as_str())
            .collect();
        for (id, &v) in &self.edges {
            if !real.contains(id.as_str()) {
                return Err(FormatError::field(format!("edges.{id}"), "not a pipe of the network"));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(FormatError::field(format!("edges.{id}"), format!("{v} is outside [0, 1]")));
            }
        }
        if let Some(missing) = real.iter().find(|id| !self.edges.contains_key(**id)) {
            return Err(FormatError::field(format!("edges.{missing}"), "missing weight"));
        }
        Ok(CentralityMap { values: self.edges })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeDoc {
    Equality,
    AtMost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandModelDoc {
    Linear,
    Exponential,
}

/// Hyperparameters; anything left out takes the reference value
/// `(A, B, C, D) = (1, 30, 5, 1)`, `E = 10 B`, equality mode, linear demand model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperparamsDoc {
    pub sensors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand_model: Option<DemandModelDoc>,
}

impl HyperparamsDoc {
    pub fn from_hyperparams(hp: &Hyperparams) -> Self {
        HyperparamsDoc {
            sensors: hp.sensors,
            a: Some(hp.a),
            b: Some(hp.b),
            c: Some(hp.c),
            d: Some(hp.d),
            e: Some(hp.e),
            mode: Some(match hp.mode {
                CardinalityMode::Equality => ModeDoc::Equality,
                CardinalityMode::AtMost => ModeDoc::AtMost,
            }),
            demand_model: Some(match hp.demand_model {
                DemandModel::Linear => DemandModelDoc::Linear,
                DemandModel::Exponential => DemandModelDoc::Exponential,
            }),
        }
    }

    pub fn to_hyperparams(&self) -> Result<Hyperparams, FormatError> {
        let reference = Hyperparams::reference(self.sensors);
        let b = self.b.unwrap_or(reference.b);
        let mut hp = Hyperparams::new(
            self.a.unwrap_or(reference.a),
            b,
            self.c.unwrap_or(reference.c),
            self.d.unwrap_or(reference.d),
            self.sensors,
        );
        if let Some(e) = self.e {
            hp.e = e;
        }
        if let Some(mode) = self.mode {
            hp.mode = match mode {
                ModeDoc::Equality => CardinalityMode::Equality,
                ModeDoc::AtMost => CardinalityMode::AtMost,
            };
        }
        if let Some(model) = self.demand_model {
            hp.demand_model = match model {
                DemandModelDoc::Linear => DemandModel::Linear,
                DemandModelDoc::Exponential => DemandModel::Exponential,
            };
        }
        hp.validate().map_err(|e| match e {
            PlacementError::InvalidHyperparams { field, reason } => {
                let field = if field == "s" { "sensors".to_string() } else { field.to_lowercase() };
                FormatError::field(format!("hyperparams.{field}"), reason)
            }
            other => FormatError::Placement(other),
        })?;
        Ok(hp)
    }
}

/// Annealing settings. In requests every field is optional; in result
/// documents it echoes the resolved schedule in full.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_hot: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScheduleDoc {
    pub fn echo(s: &Schedule) -> Self {
        ScheduleDoc {
            t_hot: Some(s.t_hot),
            t_cold: Some(s.t_cold),
            sweeps: Some(s.sweeps),
            runs: Some(s.runs),
            seed: Some(s.seed),
        }
    }

    pub fn to_config(&self) -> Result<AnnealConfig, FormatError> {
        let defaults = AnnealConfig::default();
        let config = AnnealConfig {
            t_hot: self.t_hot,
            t_cold: self.t_cold,
            sweeps: self.sweeps.unwrap_or(defaults.sweeps),
            runs: self.runs.unwrap_or(defaults.runs),
            seed: self.seed.unwrap_or(defaults.seed),
        };
        for (name, value) in [("t_hot", config.t_hot), ("t_cold", config.t_cold)] {
            if matches!(value, Some(t) if !(t > 0.0 && t.is_finite())) {
                return Err(FormatError::field(format!("schedule.{name}"), "must be a positive number"));
            }
        }
        if let (Some(hot), Some(cold)) = (config.t_hot, config.t_cold) {
            if cold >= hot {
                return Err(FormatError::field("schedule.t_cold", "must be below t_hot"));
            }
        }
        if config.sweeps == 0 {
            return Err(FormatError::field("schedule.sweeps", "must be at least 1"));
        }
        if config.runs == 0 {
            return Err(FormatError::field("schedule.runs", "must be at least 1"));
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VarDoc {
    Node { id: String },
    Slack { alpha: usize },
    Ancilla { tag: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboDoc {
    #[serde(default = "current_version")]
    pub schema_version: u32,
    pub n: usize,
    pub registry: Vec<VarDoc>,
    pub linear: Vec<f64>,
    /// `[i, j, q]` with `i < j`, sorted.
    pub quadratic: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl QuboDoc {
    pub fn from_model(model: &QuboModel) -> Self {
        let registry = model
            .registry()
            .roles()
            .iter()
            .map(|role| match role {
                VarRole::Node(id) => VarDoc::Node { id: id.clone() },
                VarRole::Slack(alpha) => VarDoc::Slack { alpha: *alpha },
                VarRole::Ancilla(tag) => VarDoc::Ancilla { tag: tag.clone() },
            })
            .collect();
        QuboDoc {
            schema_version: SCHEMA_VERSION,
            n: model.n(),
            registry,
            linear: model.linear().to_vec(),
            quadratic: model.quadratic().map(|((i, j), q)| (i, j, q)).collect(),
            offset: model.offset(),
        }
    }

    pub fn into_model(self) -> Result<QuboModel, FormatError> {
        check_version(self.schema_version)?;
        if self.registry.len() != self.n {
            return Err(FormatError::field("registry", format!("{} entries for n = {}", self.registry.len(), self.n)));
        }
        if self.linear.len() != self.n {
            return Err(FormatError::field("linear", format!("{} entries for n = {}", self.linear.len(), self.n)));
        }
        let mut model = QuboModel::new();
        for role in self.registry {
            model.add_variable(match role {
                VarDoc::Node { id } => VarRole::Node(id),
                VarDoc::Slack { alpha } => VarRole::Slack(alpha),
                VarDoc::Ancilla { tag } => VarRole::Ancilla(tag),
            })?;
        }
        for (i, c) in self.linear.into_iter().enumerate() {
            model.add_linear(i, c);
        }
        for (k, (i, j, q)) in self.quadratic.into_iter().enumerate() {
            if i >= self.n || j >= self.n {
                return Err(FormatError::field(format!("quadratic[{k}]"), "index out of range"));
            }
            model.add_quadratic(i, j, q);
        }
        model.add_offset(self.offset);
        Ok(model)
    }
}

/// Timing and provenance; the only part of a result that varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix_ms: Option<u128>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wall_time_seconds: Vec<f64>,
}

impl Metadata {
    pub fn now(result: &AnnealResult) -> Self {
        Metadata {
            created_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .ok()
                .map(|d| d.as_millis()),
            wall_time_seconds: result
                .runs
                .iter()
                .filter_map(|r| r.wall_time.map(|t| t.as_secs_f64()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDoc {
    #[serde(default = "current_version")]
    pub schema_version: u32,
    pub solver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleDoc>,
    /// Final energy of every run, by run index.
    pub energies: Vec<f64>,
    pub best_run: usize,
    pub best_energy: f64,
    /// Node ids set in the best assignment, sorted.
    pub best_assignment: Vec<String>,
    #[serde(default)]
    pub metadata: Metadata,
}

impl ResultDoc {
    pub fn new(solver: &str, result: &AnnealResult, registry: &VariableRegistry) -> Self {
        let best = result.best_run();
        let best_assignment: BTreeSet<String> = registry
            .node_vars()
            .filter(|&(_, i)| best.assignment[i] == 1)
            .map(|(id, _)| id.to_string())
            .collect();
        ResultDoc {
            schema_version: SCHEMA_VERSION,
            solver: solver.to_string(),
            schedule: result.schedule.as_ref().map(ScheduleDoc::echo),
            energies: result.energies(),
            best_run: best.run,
            best_energy: best.energy,
            best_assignment: best_assignment.into_iter().collect(),
            metadata: Metadata::now(result),
        }
    }

    pub fn check(&self) -> Result<(), FormatError> {
        check_version(self.schema_version)?;
        if self.energies.is_empty() {
            return Err(FormatError::field("energies", "no runs"));
        }
        if self.best_run >= self.energies.len() {
            return Err(FormatError::field("best_run", "out of range"));
        }
        Ok(())
    }

    /// The document without its metadata, for reproducibility comparisons.
    pub fn without_metadata(&self) -> Self {
        ResultDoc {
            metadata: Metadata::default(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineDoc {
    pub mean: f64,
    pub stddev: f64,
    pub trials: usize,
}

impl From<BaselineStats> for BaselineDoc {
    fn from(b: BaselineStats) -> Self {
        BaselineDoc {
            mean: b.mean,
            stddev: b.stddev,
            trials: b.trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    #[serde(default = "current_version")]
    pub schema_version: u32,
    pub selected: Vec<String>,
    pub sensor_count: usize,
    pub accessible_count: usize,
    pub demand_coverage: f64,
    pub uncovered_weight: f64,
    pub energy: f64,
    pub constraint_satisfied: bool,
    /// Random-placement comparison, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineDoc>,
}

impl ReportDoc {
    pub fn new(report: &PlacementReport) -> Self {
        ReportDoc {
            schema_version: SCHEMA_VERSION,
            selected: report.selected.iter().cloned().collect(),
            sensor_count: report.sensor_count,
            accessible_count: report.accessible_count,
            demand_coverage: report.demand_coverage,
            uncovered_weight: report.uncovered_weight,
            energy: report.energy,
            constraint_satisfied: report.constraint_satisfied,
            baseline: None,
        }
    }

    pub fn to_report(&self) -> Result<PlacementReport, FormatError> {
        check_version(self.schema_version)?;
        Ok(PlacementReport {
            selected: self.selected.iter().cloned().collect(),
            sensor_count: self.sensor_count,
            accessible_count: self.accessible_count,
            demand_coverage: self.demand_coverage,
            uncovered_weight: self.uncovered_weight,
            energy: self.energy,
            constraint_satisfied: self.constraint_satisfied,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDoc {
    #[serde(default = "current_version")]
    pub schema_version: u32,
    pub id: String,
    #[serde(default)]
    pub installed: Vec<String>,
    #[serde(default)]
    pub rejected: Vec<String>,
    pub hyperparams: HyperparamsDoc,
    #[serde(default)]
    pub last_report: Option<ReportDoc>,
}

impl SessionDoc {
    pub fn new(session: &Session) -> Self {
        SessionDoc {
            schema_version: SCHEMA_VERSION,
            id: session.id.clone(),
            installed: session.installed().iter().cloned().collect(),
            rejected: session.rejected().iter().cloned().collect(),
            hyperparams: HyperparamsDoc::from_hyperparams(&session.hyperparams),
            last_report: session.last_report.as_ref().map(ReportDoc::new),
        }
    }

    /// Replays the marks against `net`, so every session invariant is
    /// checked again.
    pub fn into_session(self, net: &Network) -> Result<Session, FormatError> {
        check_version(self.schema_version)?;
        let hp = self.hyperparams.to_hyperparams()?;
        let mut session = Session::new(self.id, hp)?;
        for (list, status) in [(&self.installed, MarkStatus::Installed), (&self.rejected, MarkStatus::Rejected)] {
            for id in list {
                session.mark(net, id, status)?;
            }
        }
        session.last_report = self.last_report.as_ref().map(ReportDoc::to_report).transpose()?;
        Ok(session)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDoc {
    #[serde(default = "current_version")]
    pub schema_version: u32,
    pub width: f64,
    /// `[bin center, density]` rows.
    pub table: Vec<(f64, f64)>,
}

impl HistogramDoc {
    pub fn new(bins: &[HistogramBin]) -> Self {
        HistogramDoc {
            schema_version: SCHEMA_VERSION,
            width: bins.first().map_or(1.0, |b| b.width),
            table: bins.iter().map(|b| (b.center, b.density)).collect(),
        }
    }

    pub fn area(&self) -> f64 {
        self.table.iter().map(|&(_, d)| d * self.width).sum()
    }
}

/// Two-column `center,density` table.
pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("center,density\n");
    for b in bins {
        out.push_str(&format!("{},{}\n", b.center, b.density));
    }
    out
}
