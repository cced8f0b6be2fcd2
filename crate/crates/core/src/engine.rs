//! Deterministic simulation loop: contacts in end-time order, lazy forgetting,
//! periodic metric sampling and an end-of-run summary.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmark::run_contact_ba;
use crate::dataset::{generate_dataset, global_graph, Dataset, DatasetConfig};
use crate::error::{ConfigError, ValidationError};
use crate::exchange::{run_contact_ca, ExchangeParams, NodeState, Transfer};
use crate::graph::SemanticNetwork;
use crate::item::NodeId;
use crate::metrics::{
    coverage_convergence, cvm_two_sample, degree_sample, tag_item_counts, CvmResult, MetricsContext, MetricsRecord,
    OwnedTags,
};
use crate::mobility::{generate_trace, sort_contacts, validate_contacts, ContactEvent, MobilityConfig};
use crate::seed;
use crate::Seconds;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Ca,
    Ba,
}

impl FromStr for Algorithm {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ca" => Ok(Self::Ca),
            "ba" => Ok(Self::Ba),
            other => Err(ConfigError::new(
                "algorithm",
                alloc::format!("unknown algorithm {other:?}, expected ca or ba"),
            )),
        }
    }
}

/// Engine timing parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineParams {
    /// Forgetting threshold in seconds; `f64::INFINITY` disables forgetting
    /// and is written as `"inf"`.
    #[serde(with = "maybe_infinite")]
    pub f_min: Seconds,
    pub snapshot_interval: Seconds,
    pub duration: Seconds,
    pub seed: u64,
}

mod maybe_infinite {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    struct V;

    impl Visitor<'_> for V {
        type Value = f64;

        fn expecting(&self, f: &mut core::fmt::Formatter) -> core::fmt::Result {
            f.write_str("a number or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(V)
    }
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            f_min: 150.0,
            snapshot_interval: 100.0,
            duration: 25_000.0,
            seed: 0,
        }
    }
}

/// A full run description. The `seed` fields of the mobility and dataset
/// sections are ignored by [`SimConfig::resolved`], which derives them from
/// the root seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    pub mobility: MobilityConfig,
    pub dataset: DatasetConfig,
    pub exchange: ExchangeParams,
    pub engine: EngineParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::scenario(1).expect("scenario 1 exists")
    }
}

impl SimConfig {
    /// Reference scenarios 1 to 3 at full scale.
    pub fn scenario(n: u8) -> Option<Self> {
        let mobility = MobilityConfig::scenario(n)?;
        let dataset = DatasetConfig::d1_like();
        Some(Self {
            algorithm: Algorithm::Ca,
            engine: EngineParams {
                duration: mobility.duration,
                ..EngineParams::default()
            },
            mobility,
            dataset,
            exchange: ExchangeParams::default(),
        })
    }

    /// Laptop-scale stand-in for scenario 1: 50 nodes in one community on a
    /// 500 m square.
    pub fn desk_scenario() -> Self {
        let mut cfg = Self::scenario(1).expect("scenario 1 exists");
        cfg.mobility.num_nodes = 50;
        cfg.mobility.area_width = 500.0;
        cfg.mobility.area_height = 500.0;
        cfg.engine.snapshot_interval = 5.0;
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let e = &self.engine;
        if !(e.duration > 0.0) || !e.duration.is_finite() {
            return Err(ConfigError::new("duration", "must be positive and finite"));
        }
        if !(e.snapshot_interval > 0.0) || !e.snapshot_interval.is_finite() {
            return Err(ConfigError::new("snapshot_interval", "must be positive and finite"));
        }
        if !(e.f_min > 0.0) {
            return Err(ConfigError::new("f_min", "must be positive"));
        }
        self.exchange.validate()?;
        self.resolved().mobility.validate()?;
        self.dataset.validate()
    }

    /// Copy with sub-seeds derived from the root seed and the mobility
    /// duration aligned with the run.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        cfg.mobility.seed = seed::derive(self.engine.seed, seed::MOBILITY);
        cfg.mobility.duration = self.engine.duration;
        cfg.dataset.seed = seed::derive(self.engine.seed, seed::DATASET);
        cfg
    }
}

/// Parameter axes a sweep may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    FMin,
    WMin,
    TagLimit,
    DataLimit,
    ThetaRec,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [Self::FMin, Self::WMin, Self::TagLimit, Self::DataLimit, Self::ThetaRec];

    pub fn name(self) -> &'static str {
        match self {
            Self::FMin => "f_min",
            Self::WMin => "w_min",
            Self::TagLimit => "tag_limit",
            Self::DataLimit => "data_limit",
            Self::ThetaRec => "theta_rec",
        }
    }

    pub fn apply(self, cfg: &mut SimConfig, value: f64) -> Result<(), ConfigError> {
        let count = |field| {
            if value >= 0.0 && libm::trunc(value) == value && value <= u32::MAX as f64 {
                Ok(value as u32)
            } else {
                Err(ConfigError::new(field, alloc::format!("{value} is not a whole number")))
            }
        };
        match self {
            Self::FMin => cfg.engine.f_min = value,
            Self::WMin => cfg.exchange.w_min_seconds = value,
            Self::TagLimit => cfg.exchange.tag_limit = count("tag_limit")? as usize,
            Self::DataLimit => cfg.exchange.data_limit = count("data_limit")? as usize,
            Self::ThetaRec => cfg.exchange.theta_rec = count("theta_rec")?,
        }
        cfg.validate()
    }
}

impl FromStr for SweepAxis {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| ConfigError::new("axis", alloc::format!("unknown sweep axis {s:?}")))
    }
}

/// Contacts, communities and content a run consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct RunInputs {
    pub num_nodes: usize,
    pub communities: Vec<u32>,
    pub contacts: Vec<ContactEvent>,
    pub dataset: Dataset,
}

/// Generates the trace and dataset for `cfg` from its root seed.
pub fn prepare_inputs(cfg: &SimConfig) -> Result<RunInputs, ConfigError> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let trace = generate_trace(&cfg.mobility)?;
    let clusters: Vec<u32> = trace
        .communities
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            cfg.dataset
                .cluster_of(NodeId(i as u32), c, cfg.mobility.num_communities)
        })
        .collect();
    let dataset = generate_dataset(&cfg.dataset, &clusters)?;
    Ok(RunInputs {
        num_nodes: cfg.mobility.num_nodes as usize,
        communities: trace.communities,
        contacts: trace.contacts,
        dataset,
    })
}

/// Hooks into a running simulation. All methods default to no-ops.
pub trait Observer {
    /// Called after every snapshot tick, once forgetting has been applied.
    fn on_snapshot(&mut self, _time: Seconds, _nodes: &[NodeState], _record: &MetricsRecord) {}
    fn on_contact(&mut self, _contact: &ContactEvent, _transfers: &[Transfer; 2]) {}
}

impl Observer for () {}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub cvg: f64,
    pub time: Seconds,
}

/// A node's final network compared with the global graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub node: NodeId,
    pub vertices: usize,
    pub edges: usize,
    pub pct_vertices: f64,
    pub pct_edges: f64,
    pub diameter: Option<u32>,
    pub global_vertices: usize,
    pub global_edges: usize,
    pub global_diameter: Option<u32>,
}

impl StructureReport {
    pub fn compare(node: NodeId, net: &SemanticNetwork, global: &SemanticNetwork) -> Self {
        let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
        Self {
            node,
            vertices: net.vertex_count(),
            edges: net.edge_count(),
            pct_vertices: pct(net.vertex_count(), global.vertex_count()),
            pct_edges: pct(net.edge_count(), global.edge_count()),
            diameter: net.diameter(),
            global_vertices: global.vertex_count(),
            global_edges: global.edge_count(),
            global_diameter: global.diameter(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub final_metrics: MetricsRecord,
    pub convergence: Convergence,
    pub structure: StructureReport,
    /// Degree distribution of the tagged node against the global graph;
    /// absent when the tagged node ends with an empty network.
    pub cvm: Option<CvmResult>,
    pub contacts_processed: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
    pub global: SemanticNetwork,
    pub nodes: Vec<NodeState>,
}

/// The node whose final network is compared with the global graph: the
/// lowest id still holding any knowledge, or node 0 when none does.
pub fn tagged_node(nodes: &[NodeState]) -> NodeId {
    nodes.iter().find(|n| !n.network.is_empty()).map_or(NodeId(0), |n| n.id)
}

/// Snapshot times `0, dt, 2dt, ...` up to `duration`, always ending on it.
pub fn snapshot_times(interval: Seconds, duration: Seconds) -> Vec<Seconds> {
    let mut times = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * interval;
        if t >= duration {
            break;
        }
        times.push(t);
        k += 1;
    }
    times.push(duration);
    times
}

/// Checks that trace, communities and dataset fit together.
pub fn check_inputs(inputs: &RunInputs) -> Result<(), ValidationError> {
    let n = inputs.num_nodes;
    if inputs.communities.len() != n {
        return Err(ConfigError::new(
            "communities",
            alloc::format!("{} entries for {n} nodes", inputs.communities.len()),
        )
        .into());
    }
    if let Err((i, why)) = validate_contacts(&inputs.contacts) {
        let c = &inputs.contacts[i];
        return Err(ValidationError::BadContact(c.a, c.b, why.to_string()));
    }
    for c in &inputs.contacts {
        for id in [c.a, c.b] {
            if id.index() >= n {
                return Err(ValidationError::UnknownNode(id, n));
            }
        }
    }
    if inputs.dataset.assignment.len() > n {
        let extra = inputs
            .dataset
            .assignment
            .iter()
            .enumerate()
            .skip(n)
            .find(|(_, ids)| !ids.is_empty());
        if let Some((i, _)) = extra {
            return Err(ValidationError::UnknownAssignedNode(NodeId(i as u32), n));
        }
    }
    for id in inputs.dataset.assignment.iter().flatten() {
        if !inputs.dataset.items.contains_key(id) {
            return Err(ValidationError::UnknownItem(id.0));
        }
    }
    Ok(())
}

/// Builds every node's initial state from the assignment.
pub fn initial_nodes(inputs: &RunInputs) -> Vec<NodeState> {
    (0..inputs.num_nodes)
        .map(|i| {
            let id = NodeId(i as u32);
            let mut node = NodeState::new(id, inputs.communities[i]);
            for item in inputs.dataset.node_items(id) {
                node.items.insert(item.id(), item.clone());
            }
            if !node.items.is_empty() {
                node.network = SemanticNetwork::build_initial(node.items.values(), 0.0).expect("non-empty item set");
            }
            node
        })
        .collect()
}

fn pair_mut(nodes: &mut [NodeState], a: usize, b: usize) -> (&mut NodeState, &mut NodeState) {
    debug_assert!(a < b);
    let (lo, hi) = nodes.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

/// Runs a simulation over prepared inputs.
pub fn run_with_inputs(
    cfg: &SimConfig,
    inputs: &RunInputs,
    observer: &mut dyn Observer,
) -> Result<RunOutput, ValidationError> {
    cfg.exchange.validate()?;
    check_inputs(inputs)?;
    let e = cfg.engine;
    if !(e.duration > 0.0) || !(e.snapshot_interval > 0.0) || !(e.f_min > 0.0) {
        cfg.validate()?;
    }

    let mut nodes = initial_nodes(inputs);
    let global = global_graph(nodes.iter().map(|n| &n.network), 0.0);
    let ctx = MetricsContext::new(&global, inputs.dataset.items.values(), cfg.exchange.gamma)
        .map_err(|_| ValidationError::EmptyGlobalGraph)?;

    let mut contacts = inputs.contacts.clone();
    sort_contacts(&mut contacts);
    contacts.sort_by(|x, y| x.end.total_cmp(&y.end).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));

    // items only ever arrive, so owned-tag counts are kept up to date here
    // instead of being recounted at every tick
    let mut owned: Vec<OwnedTags> = nodes.iter().map(|n| tag_item_counts(n.items.values())).collect();
    let mut rng = seed::stream(e.seed, seed::BENCHMARK_WALK);
    let mut records = Vec::new();
    let mut next = 0usize;
    let mut processed = 0usize;
    for t in snapshot_times(e.snapshot_interval, e.duration) {
        while next < contacts.len() && contacts[next].end <= t {
            let c = contacts[next];
            next += 1;
            let (a, b) = pair_mut(&mut nodes, c.a.index(), c.b.index());
            a.network.prune_forgotten(c.end, e.f_min);
            b.network.prune_forgotten(c.end, e.f_min);
            let transfers = match cfg.algorithm {
                Algorithm::Ca => run_contact_ca(a, b, c.start, c.end, &cfg.exchange),
                Algorithm::Ba => run_contact_ba(a, b, c.end, &cfg.exchange, &mut rng),
            };
            processed += 1;
            for tr in &transfers {
                let counts = &mut owned[tr.recipient.index()];
                for id in &tr.items {
                    for tag in inputs.dataset.items[id].tags() {
                        *counts.entry(tag.clone()).or_insert(0) += 1;
                    }
                }
            }
            observer.on_contact(&c, &transfers);
        }
        for n in nodes.iter_mut() {
            n.network.prune_forgotten(t, e.f_min);
        }
        let record = ctx.record_with(t, &nodes, &owned);
        observer.on_snapshot(t, &nodes, &record);
        records.push(record);
    }

    let series: Vec<(Seconds, f64)> = records.iter().map(|r| (r.time, r.cvg)).collect();
    let (cvg, time) = coverage_convergence(&series).expect("at least one snapshot");
    let tagged = &nodes[tagged_node(&nodes).index()];
    let structure = StructureReport::compare(tagged.id, &tagged.network, &global);
    let cvm = if tagged.network.is_empty() {
        None
    } else {
        cvm_two_sample(&degree_sample(&tagged.network), &degree_sample(&global)).ok()
    };
    let summary = Summary {
        final_metrics: *records.last().expect("at least one snapshot"),
        convergence: Convergence { cvg, time },
        structure,
        cvm,
        contacts_processed: processed,
    };
    Ok(RunOutput {
        records,
        summary,
        global,
        nodes,
    })
}

/// Generates inputs from `cfg` and runs it.
pub fn run(cfg: &SimConfig, observer: &mut dyn Observer) -> Result<RunOutput, ValidationError> {
    let inputs = prepare_inputs(cfg)?;
    run_with_inputs(cfg, &inputs, observer)
}

/// Mean of several records, field by field (the time of the first is kept).
pub fn mean_record(records: &[MetricsRecord]) -> Option<MetricsRecord> {
    let first = records.first()?;
    let n = records.len() as f64;
    let sum = |f: fn(&MetricsRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    Some(MetricsRecord {
        time: first.time,
        kd: sum(|r| r.kd),
        cvg: sum(|r| r.cvg),
        f_measure: sum(|r| r.f_measure),
        mean_edge_weight: sum(|r| r.mean_edge_weight),
    })
}

/// Label used for a run in logs and file names.
pub fn run_label(cfg: &SimConfig) -> String {
    let alg = match cfg.algorithm {
        Algorithm::Ca => "ca",
        Algorithm::Ba => "ba",
    };
    alloc::format!("{alg}-seed{}", cfg.engine.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::item::{ItemId, TaggedItem};
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn tiny_inputs(contacts: Vec<ContactEvent>) -> RunInputs {
        let items = [
            TaggedItem::from_strs(1, ["k", "a"]).unwrap(),
            TaggedItem::from_strs(2, ["k", "z"]).unwrap(),
        ];
        let mut map = BTreeMap::new();
        for i in &items {
            map.insert(i.id(), i.clone());
        }
        RunInputs {
            num_nodes: 2,
            communities: vec![0, 0],
            contacts,
            dataset: Dataset {
                items: map,
                assignment: vec![vec![ItemId(1)], vec![ItemId(2)]],
            },
        }
    }

    fn tiny_cfg() -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.engine.duration = 100.0;
        cfg.engine.snapshot_interval = 10.0;
        cfg.engine.f_min = f64::INFINITY;
        cfg.exchange.theta_rec = 1;
        cfg
    }

    #[test]
    fn snapshot_grid() {
        assert_eq!(snapshot_times(5.0, 15.0), vec![0.0, 5.0, 10.0, 15.0]);
        assert_eq!(snapshot_times(10.0, 25.0), vec![0.0, 10.0, 20.0, 25.0]);
    }

    #[test]
    fn no_contacts_no_forgetting_is_constant() {
        let out = run_with_inputs(&tiny_cfg(), &tiny_inputs(vec![]), &mut ()).unwrap();
        assert_eq!(out.records.len(), 11);
        let first = out.records[0];
        for r in &out.records {
            assert_eq!((r.kd, r.cvg, r.f_measure), (first.kd, first.cvg, first.f_measure));
        }
        assert_eq!(out.summary.convergence.time, 0.0);
    }

    #[test]
    fn single_contact_shares_everything() {
        let c = ContactEvent {
            a: NodeId(0),
            b: NodeId(1),
            start: 10.0,
            end: 20.0,
        };
        let out = run_with_inputs(&tiny_cfg(), &tiny_inputs(vec![c]), &mut ()).unwrap();
        assert_eq!(out.summary.contacts_processed, 1);
        for n in &out.nodes {
            assert_eq!(n.network.vertex_count(), 3);
            assert_eq!(n.items.len(), 2);
        }
        let last = out.summary.final_metrics;
        assert_eq!((last.kd, last.cvg, last.f_measure), (1.0, 1.0, 1.0));
        assert_eq!(out.summary.convergence.time, 20.0);
    }

    #[test]
    fn unknown_node_is_rejected() {
        let c = ContactEvent {
            a: NodeId(0),
            b: NodeId(7),
            start: 1.0,
            end: 2.0,
        };
        let err = run_with_inputs(&tiny_cfg(), &tiny_inputs(vec![c]), &mut ()).unwrap_err();
        assert_eq!(err, ValidationError::UnknownNode(NodeId(7), 2));
    }

    #[test]
    fn sweep_axis_parsing_and_application() {
        assert_eq!("f-min".parse::<SweepAxis>().unwrap(), SweepAxis::FMin);
        assert_eq!("W_MIN".parse::<SweepAxis>().unwrap(), SweepAxis::WMin);
        assert!("gamma".parse::<SweepAxis>().is_err());
        let mut cfg = SimConfig::default();
        SweepAxis::TagLimit.apply(&mut cfg, 50.0).unwrap();
        assert_eq!(cfg.exchange.tag_limit, 50);
        assert!(SweepAxis::TagLimit.apply(&mut cfg, 0.0).is_err());
        assert!(SweepAxis::DataLimit.apply(&mut cfg, 2.5).is_err());
    }
}
