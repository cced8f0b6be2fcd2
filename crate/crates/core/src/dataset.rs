//! Synthetic tagged-item collections and their assignment to nodes.
//!
//! Two regimes are provided. `D1Like` items each carry exactly one of a few
//! main concepts plus a handful of tags local to that concept's cluster;
//! clusters share only a small pool of bridging tags. `D2Like` items carry
//! 10-15 tags drawn from one heavy-tailed vocabulary with no cluster
//! structure. Tag frequencies follow a power law over vocabulary rank.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::graph::{EdgeState, SemanticNetwork};
use crate::item::{ItemId, NodeId, TagLabel, TaggedItem};
use crate::Seconds;

const MAIN_CONCEPTS: [&str; 8] = ["mountain", "sea", "lake", "forest", "city", "desert", "river", "island"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "d1")]
    D1Like,
    #[serde(rename = "d2")]
    D2Like,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub regime: Regime,
    pub num_items: u32,
    pub items_per_node: u32,
    /// Inclusive range of tags per item (main concept included for D1).
    pub tags_per_item: (u32, u32),
    pub num_main_concepts: u32,
    /// Local vocabulary size per cluster (D1) or the single vocabulary size (D2).
    pub tag_pool_sizes: Vec<u32>,
    /// Size of the shared bridging pool relative to the mean cluster vocabulary.
    pub cross_cluster_tag_fraction: f64,
    /// Power-law exponent of tag frequency over vocabulary rank.
    pub zipf_exponent: f64,
    /// Whether an item may be handed to several nodes.
    pub allow_duplicates: bool,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::d1_like()
    }
}

impl DatasetConfig {
    pub fn d1_like() -> Self {
        Self {
            regime: Regime::D1Like,
            num_items: 1000,
            items_per_node: 10,
            tags_per_item: (2, 4),
            num_main_concepts: 3,
            tag_pool_sizes: alloc::vec![70, 70, 70],
            cross_cluster_tag_fraction: 0.1,
            zipf_exponent: 1.0,
            allow_duplicates: false,
            seed: 0,
        }
    }

    pub fn d2_like() -> Self {
        Self {
            regime: Regime::D2Like,
            num_items: 400,
            items_per_node: 10,
            tags_per_item: (10, 15),
            num_main_concepts: 0,
            tag_pool_sizes: alloc::vec![2500],
            cross_cluster_tag_fraction: 0.0,
            zipf_exponent: 1.0,
            allow_duplicates: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let (lo, hi) = self.tags_per_item;
        if hi < lo {
            return Err(ConfigError::new("tags_per_item", "upper bound below lower bound"));
        }
        if lo < 1 {
            return Err(ConfigError::new("tags_per_item", "items need at least one tag"));
        }
        if self.num_items == 0 {
            return Err(ConfigError::new("num_items", "must be at least 1"));
        }
        if self.items_per_node == 0 {
            return Err(ConfigError::new("items_per_node", "must be at least 1"));
        }
        if !(self.zipf_exponent >= 0.0) || !self.zipf_exponent.is_finite() {
            return Err(ConfigError::new("zipf_exponent", "must be finite and non-negative"));
        }
        match self.regime {
            Regime::D1Like => {
                if lo < 2 {
                    return Err(ConfigError::new(
                        "tags_per_item",
                        "D1-like items need at least 2 tags so every item yields an edge",
                    ));
                }
                if self.num_main_concepts == 0 {
                    return Err(ConfigError::new("num_main_concepts", "must be at least 1"));
                }
                if self.tag_pool_sizes.len() != self.num_main_concepts as usize {
                    return Err(ConfigError::new(
                        "tag_pool_sizes",
                        "need one vocabulary size per main concept",
                    ));
                }
                if !(0.0..=1.0).contains(&self.cross_cluster_tag_fraction) {
                    return Err(ConfigError::new("cross_cluster_tag_fraction", "must lie in [0, 1]"));
                }
                let shared = self.shared_pool_size();
                if let Some(small) = self.tag_pool_sizes.iter().find(|&&s| s + shared < hi - 1) {
                    return Err(ConfigError::new(
                        "tag_pool_sizes",
                        format!(
                            "vocabulary of {} cannot fill items with {} local tags",
                            small + shared,
                            hi - 1
                        ),
                    ));
                }
            }
            Regime::D2Like => {
                let vocab = self.tag_pool_sizes.first().copied().unwrap_or(0);
                if vocab < hi {
                    return Err(ConfigError::new(
                        "tag_pool_sizes",
                        format!("vocabulary of {vocab} cannot fill items with {hi} distinct tags"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn shared_pool_size(&self) -> u32 {
        if self.tag_pool_sizes.is_empty() {
            return 0;
        }
        let mean = self.tag_pool_sizes.iter().sum::<u32>() as f64 / self.tag_pool_sizes.len() as f64;
        libm::round(self.cross_cluster_tag_fraction * mean) as u32
    }

    /// Cluster whose items a node receives: its community when there are
    /// several, otherwise its own index, modulo the number of main concepts.
    pub fn cluster_of(&self, node: NodeId, community: u32, num_communities: u32) -> u32 {
        let k = self.num_main_concepts.max(1);
        if num_communities > 1 {
            community % k
        } else {
            node.0 % k
        }
    }
}

/// Items in the system plus the initial holdings of every node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub items: BTreeMap<ItemId, TaggedItem>,
    /// Item ids held by each node at t0, indexed by node.
    pub assignment: Vec<Vec<ItemId>>,
}

impl Dataset {
    pub fn node_items(&self, node: NodeId) -> impl Iterator<Item = &TaggedItem> + '_ {
        self.assignment
            .get(node.index())
            .into_iter()
            .flatten()
            .filter_map(|id| self.items.get(id))
    }

    /// Items never assigned to any node are dropped.
    fn retain_assigned(&mut self) {
        let used: BTreeSet<ItemId> = self.assignment.iter().flatten().copied().collect();
        self.items.retain(|id, _| used.contains(id));
    }
}

struct PowerLaw {
    index: WeightedIndex<f64>,
}

impl PowerLaw {
    fn new(size: usize, exponent: f64) -> Self {
        let weights = (1..=size).map(|r| libm::pow(r as f64, -exponent));
        Self {
            index: WeightedIndex::new(weights).expect("non-empty positive weights"),
        }
    }

    /// `count` distinct ranks.
    fn distinct<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<usize> {
        let mut picked = BTreeSet::new();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let r = self.index.sample(rng);
            if picked.insert(r) {
                out.push(r);
            }
        }
        out
    }
}

fn label(s: &str) -> TagLabel {
    TagLabel::new(s).expect("generated labels are non-empty")
}

fn main_concept(c: u32) -> TagLabel {
    match MAIN_CONCEPTS.get(c as usize) {
        Some(name) => label(name),
        None => label(&format!("concept-{c}")),
    }
}

fn local_tag(c: u32, r: usize) -> String {
    format!("c{c}-t{r:03}")
}

fn shared_tag(r: usize) -> String {
    format!("shared-t{r:03}")
}

/// Generates items and the per-node assignment. `node_clusters[i]` is the
/// cluster node `i` draws from (ignored for D2-like data).
pub fn generate_dataset(cfg: &DatasetConfig, node_clusters: &[u32]) -> Result<Dataset, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = cfg.tags_per_item;
    let mut items = BTreeMap::new();
    // item ids per cluster (a single pool for D2)
    let mut pools: Vec<Vec<ItemId>> = Vec::new();

    match cfg.regime {
        Regime::D1Like => {
            let k = cfg.num_main_concepts;
            let shared = cfg.shared_pool_size() as usize;
            let vocab: Vec<Vec<TagLabel>> = (0..k)
                .map(|c| {
                    (0..cfg.tag_pool_sizes[c as usize] as usize)
                        .map(|r| label(&local_tag(c, r)))
                        .chain((0..shared).map(|r| label(&shared_tag(r))))
                        .collect()
                })
                .collect();
            let laws: Vec<PowerLaw> = vocab
                .iter()
                .map(|v| PowerLaw::new(v.len(), cfg.zipf_exponent))
                .collect();
            pools = alloc::vec![Vec::new(); k as usize];
            for i in 0..cfg.num_items {
                let c = i % k;
                let n = rng.random_range(lo..=hi) as usize;
                let mut tags = alloc::vec![main_concept(c)];
                tags.extend(
                    laws[c as usize]
                        .distinct(n - 1, &mut rng)
                        .into_iter()
                        .map(|r| vocab[c as usize][r].clone()),
                );
                let item = TaggedItem::new(ItemId(i as u64), tags).expect("tags are non-empty");
                items.insert(item.id(), item);
                pools[c as usize].push(ItemId(i as u64));
            }
        }
        Regime::D2Like => {
            let size = cfg.tag_pool_sizes[0] as usize;
            let law = PowerLaw::new(size, cfg.zipf_exponent);
            let mut pool = Vec::new();
            for i in 0..cfg.num_items {
                let n = rng.random_range(lo..=hi) as usize;
                let tags = law
                    .distinct(n, &mut rng)
                    .into_iter()
                    .map(|r| label(&format!("t{r:04}")));
                let item = TaggedItem::new(ItemId(i as u64), tags).expect("tags are non-empty");
                items.insert(item.id(), item);
                pool.push(ItemId(i as u64));
            }
            pools.push(pool);
        }
    }

    let per_node = cfg.items_per_node as usize;
    let cluster_of = |node: usize| match cfg.regime {
        Regime::D1Like => node_clusters.get(node).copied().unwrap_or(node as u32) % cfg.num_main_concepts,
        Regime::D2Like => 0,
    } as usize;
    let mut assignment = Vec::with_capacity(node_clusters.len());
    if cfg.allow_duplicates {
        for node in 0..node_clusters.len() {
            let pool = &pools[cluster_of(node)];
            if pool.len() < per_node {
                return Err(ConfigError::new(
                    "num_items",
                    "a cluster has fewer items than items_per_node",
                ));
            }
            let mut held: Vec<ItemId> = index::sample(&mut rng, pool.len(), per_node)
                .into_iter()
                .map(|j| pool[j])
                .collect();
            held.sort();
            assignment.push(held);
        }
    } else {
        for pool in pools.iter_mut() {
            pool.shuffle(&mut rng);
        }
        let mut cursor = alloc::vec![0usize; pools.len()];
        for node in 0..node_clusters.len() {
            let c = cluster_of(node);
            let start = cursor[c];
            let end = start + per_node;
            if end > pools[c].len() {
                return Err(ConfigError::new(
                    "num_items",
                    format!("cluster {c} runs out of items; raise num_items or allow duplicates"),
                ));
            }
            let mut held = pools[c][start..end].to_vec();
            held.sort();
            assignment.push(held);
            cursor[c] = end;
        }
    }

    let mut dataset = Dataset { items, assignment };
    dataset.retain_assigned();
    Ok(dataset)
}

/// Vertex/edge counts and hop diameter of a knowledge graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub vertices: usize,
    pub edges: usize,
    pub diameter: Option<u32>,
}

impl GraphSummary {
    pub fn of(net: &SemanticNetwork) -> Self {
        Self {
            vertices: net.vertex_count(),
            edges: net.edge_count(),
            diameter: net.diameter(),
        }
    }
}

/// Union of all node networks, every edge reset to `(t0, popularity 1)`.
pub fn global_graph<'a>(networks: impl IntoIterator<Item = &'a SemanticNetwork>, t0: Seconds) -> SemanticNetwork {
    let mut g = SemanticNetwork::new();
    for net in networks {
        g.union_with(net);
    }
    let edges: Vec<_> = g.edges().map(|(e, _)| e.clone()).collect();
    for e in edges {
        g.insert_edge(e, EdgeState::fresh(t0));
    }
    g
}

/// Edges joining cluster-exclusive tags of two different clusters. Items
/// never mix clusters, so for generated D1-like data this is always zero;
/// clusters connect only through shared bridging tags.
pub fn cross_cluster_edges(g: &SemanticNetwork) -> usize {
    fn cluster(t: &TagLabel) -> Option<u32> {
        if let Some(c) = MAIN_CONCEPTS.iter().position(|m| *m == t.as_str()) {
            return Some(c as u32);
        }
        let s = t.as_str();
        let rest = s.strip_prefix("concept-").or_else(|| s.strip_prefix('c'))?;
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        digits.parse().ok()
    }
    g.edges()
        .filter(|(e, _)| {
            let (a, b) = e.endpoints();
            matches!((cluster(a), cluster(b)), (Some(x), Some(y)) if x != y)
        })
        .count()
}
