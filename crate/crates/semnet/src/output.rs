//! Run directories: writing a run's artefacts and re-deriving its metrics
//! from saved snapshots.
//!
//! Layout of an output directory:
//!
//! ```text
//! metrics.csv        time,kd,cvg,f_measure,mean_edge_weight
//! nodes.csv          per-node rows at every tick (optional)
//! summary.json       config echo and end-of-run summary
//! trace.txt          contacts the run consumed
//! dataset.txt        item file
//! assignment.txt     initial holdings
//! snapshots/<time>/<node>.sn      (optional)
//! snapshots/<time>/<node>.items   owned item ids, alongside each .sn
//! ```

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use semnet_core::dataset::global_graph;
use semnet_core::engine::{initial_nodes, run_with_inputs, Observer, RunInputs, RunOutput, SimConfig, Summary};
use semnet_core::exchange::NodeState;
use semnet_core::metrics::{MetricsContext, MetricsRecord, NodeMetrics};
use semnet_core::{NodeId, Seconds};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::format;

pub const METRICS_FILE: &str = "metrics.csv";
pub const NODES_FILE: &str = "nodes.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.txt";
pub const ITEMS_FILE: &str = "dataset.txt";
pub const ASSIGNMENT_FILE: &str = "assignment.txt";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub snapshots: bool,
    pub node_metrics: bool,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub config: SimConfig,
    #[serde(flatten)]
    pub summary: Summary,
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: impl Write) -> Result<(), Error> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, io::Error::other(e))
}

/// Writes metrics rows as CSV.
pub fn write_metrics(w: impl Write, records: &[MetricsRecord]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, Error> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    rdr.deserialize()
        .collect::<Result<Vec<MetricsRecord>, _>>()
        .map_err(|e| csv_err(path, e))
}

pub fn snapshot_dir(out_dir: &Path, time: Seconds) -> PathBuf {
    out_dir.join(SNAPSHOT_DIR).join(time.to_string())
}

/// Writes every node's network and owned items for one tick.
pub fn write_snapshots(out_dir: &Path, time: Seconds, nodes: &[NodeState]) -> Result<(), Error> {
    let dir = snapshot_dir(out_dir, time);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for n in nodes {
        let path = dir.join(format!("{}.sn", n.id));
        let mut w = create(&path)?;
        format::write_snapshot(&mut w, n.id, time, &n.network).map_err(|e| Error::io(&path, e))?;
        finish(&path, w)?;
        let path = dir.join(format!("{}.items", n.id));
        let mut w = create(&path)?;
        format::write_item_ids(&mut w, n.items.keys().copied()).map_err(|e| Error::io(&path, e))?;
        finish(&path, w)?;
    }
    Ok(())
}

struct Recorder<'a> {
    dir: &'a Path,
    opts: RunOptions,
    ctx: Option<MetricsContext>,
    nodes_csv: Option<csv::Writer<BufWriter<File>>>,
    failure: Option<Error>,
}

#[derive(Serialize)]
struct NodeRow {
    time: Seconds,
    node: NodeId,
    vertices: usize,
    edges: usize,
    items: usize,
    kd: f64,
    cvg: f64,
    precision: f64,
    recall: f64,
    f_measure: f64,
}

impl NodeRow {
    fn new(time: Seconds, m: NodeMetrics) -> Self {
        Self {
            time,
            node: m.node,
            vertices: m.vertices,
            edges: m.edges,
            items: m.items,
            kd: m.kd,
            cvg: m.cvg,
            precision: m.precision,
            recall: m.recall,
            f_measure: m.f_measure,
        }
    }
}

impl Recorder<'_> {
    fn tick(&mut self, time: Seconds, nodes: &[NodeState]) -> Result<(), Error> {
        if self.opts.snapshots {
            write_snapshots(self.dir, time, nodes)?;
        }
        if let (Some(ctx), Some(out)) = (&self.ctx, &mut self.nodes_csv) {
            let path = self.dir.join(NODES_FILE);
            for m in ctx.node_rows(nodes) {
                out.serialize(NodeRow::new(time, m)).map_err(|e| csv_err(&path, e))?;
            }
        }
        Ok(())
    }
}

impl Observer for Recorder<'_> {
    fn on_snapshot(&mut self, time: Seconds, nodes: &[NodeState], _record: &MetricsRecord) {
        if self.failure.is_none() {
            if let Err(e) = self.tick(time, nodes) {
                self.failure = Some(e);
            }
        }
    }
}

fn write_inputs(dir: &Path, inputs: &RunInputs) -> Result<(), Error> {
    let path = dir.join(TRACE_FILE);
    let mut w = create(&path)?;
    let mut contacts = inputs.contacts.clone();
    semnet_core::mobility::sort_contacts(&mut contacts);
    format::write_trace(&mut w, &contacts).map_err(|e| Error::io(&path, e))?;
    finish(&path, w)?;

    let path = dir.join(ITEMS_FILE);
    let mut w = create(&path)?;
    format::write_items(&mut w, inputs.dataset.items.values()).map_err(|e| Error::io(&path, e))?;
    finish(&path, w)?;

    let path = dir.join(ASSIGNMENT_FILE);
    let mut w = create(&path)?;
    format::write_assignment(&mut w, &inputs.dataset.assignment).map_err(|e| Error::io(&path, e))?;
    finish(&path, w)
}

/// Runs `cfg` over `inputs` and writes the full output directory.
pub fn run_to_dir(cfg: &SimConfig, inputs: &RunInputs, dir: &Path, opts: RunOptions) -> Result<RunOutput, Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let snaps = dir.join(SNAPSHOT_DIR);
    if snaps.exists() {
        fs::remove_dir_all(&snaps).map_err(|e| Error::io(&snaps, e))?;
    }
    write_inputs(dir, inputs)?;

    let mut recorder = Recorder {
        dir,
        opts,
        ctx: None,
        nodes_csv: None,
        failure: None,
    };
    if opts.node_metrics {
        let initial = initial_nodes(inputs);
        let global = global_graph(initial.iter().map(|n| &n.network), 0.0);
        recorder.ctx = MetricsContext::new(&global, inputs.dataset.items.values(), cfg.exchange.gamma).ok();
        let path = dir.join(NODES_FILE);
        recorder.nodes_csv = Some(csv::Writer::from_writer(create(&path)?));
    }
    let output = run_with_inputs(cfg, inputs, &mut recorder)?;
    if let Some(e) = recorder.failure {
        return Err(e);
    }
    if let Some(mut w) = recorder.nodes_csv.take() {
        w.flush().map_err(|e| Error::io(&dir.join(NODES_FILE), e))?;
    }

    let path = dir.join(METRICS_FILE);
    let mut w = create(&path)?;
    write_metrics(&mut w, &output.records).map_err(|e| csv_err(&path, e))?;
    finish(&path, w)?;

    let path = dir.join(SUMMARY_FILE);
    let mut w = create(&path)?;
    let doc = SummaryFile {
        config: cfg.resolved(),
        summary: output.summary.clone(),
    };
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| Error::io(&path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    finish(&path, w)?;
    Ok(output)
}

fn read_to_string(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn bad(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Runtime(format!("{}: {e}", path.display()))
}

/// Node states saved for one tick, ordered by node id.
pub fn load_snapshot_tick(
    dir: &Path,
    items: &std::collections::BTreeMap<semnet_core::ItemId, semnet_core::TaggedItem>,
) -> Result<Vec<NodeState>, Error> {
    let mut nodes = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_none_or(|x| x != "sn") {
            continue;
        }
        let snap = format::read_snapshot(read_to_string(&path)?.as_bytes()).map_err(|e| bad(&path, e))?;
        let ids_path = path.with_extension("items");
        let ids = format::read_item_ids(read_to_string(&ids_path)?.as_bytes()).map_err(|e| bad(&ids_path, e))?;
        let mut node = NodeState::new(snap.node, 0);
        node.network = snap.network;
        for id in ids {
            let item = items
                .get(&id)
                .ok_or_else(|| bad(&ids_path, format!("item {id} is not in the dataset")))?;
            node.items.insert(id, item.clone());
        }
        nodes.push(node);
    }
    nodes.sort_by_key(|n| n.id);
    for (i, n) in nodes.iter().enumerate() {
        if n.id != NodeId(i as u32) {
            return Err(bad(dir, format!("snapshot of node {i} is missing")));
        }
    }
    Ok(nodes)
}

/// Recomputes a run's metrics series from its saved snapshots.
pub fn analyze_dir(dir: &Path) -> Result<Vec<MetricsRecord>, Error> {
    let summary_path = dir.join(SUMMARY_FILE);
    let summary: SummaryFile =
        serde_json::from_str(&read_to_string(&summary_path)?).map_err(|e| bad(&summary_path, e))?;
    let items_path = dir.join(ITEMS_FILE);
    let items = format::read_items(read_to_string(&items_path)?.as_bytes()).map_err(|e| bad(&items_path, e))?;
    let assignment_path = dir.join(ASSIGNMENT_FILE);
    let assignment =
        format::read_assignment(read_to_string(&assignment_path)?.as_bytes()).map_err(|e| bad(&assignment_path, e))?;

    let inputs = RunInputs {
        num_nodes: summary.config.mobility.num_nodes as usize,
        communities: vec![0; summary.config.mobility.num_nodes as usize],
        contacts: Vec::new(),
        dataset: semnet_core::dataset::Dataset { items, assignment },
    };
    let initial = initial_nodes(&inputs);
    let global = global_graph(initial.iter().map(|n| &n.network), 0.0);
    let ctx = MetricsContext::new(&global, inputs.dataset.items.values(), summary.config.exchange.gamma)
        .map_err(|e| bad(&items_path, e))?;

    let snaps = dir.join(SNAPSHOT_DIR);
    let mut ticks: Vec<(Seconds, PathBuf)> = Vec::new();
    for entry in fs::read_dir(&snaps).map_err(|e| Error::io(&snaps, e))? {
        let path = entry.map_err(|e| Error::io(&snaps, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let t: Seconds = name.parse().map_err(|_| bad(&path, "directory name is not a time"))?;
        ticks.push((t, path));
    }
    ticks.sort_by(|a, b| a.0.total_cmp(&b.0));
    ticks
        .iter()
        .map(|(t, path)| Ok(ctx.record(*t, &load_snapshot_tick(path, &inputs.dataset.items)?)))
        .collect()
}
