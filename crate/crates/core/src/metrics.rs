//! Evaluation indexes over node state, plus the structural comparisons used
//! on final semantic networks.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exchange::NodeState;
use crate::graph::SemanticNetwork;
use crate::item::{NodeId, TagLabel, TaggedItem};
use crate::Seconds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("knowledge dissemination is undefined for an empty global graph")]
    EmptyGlobalGraph,
    #[error("Cramér-von Mises test needs two non-empty samples")]
    EmptySample,
}

/// One sampled row of the system-wide indexes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub time: Seconds,
    pub kd: f64,
    pub cvg: f64,
    pub f_measure: f64,
    pub mean_edge_weight: f64,
}

/// Per-node breakdown behind a [`MetricsRecord`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node: NodeId,
    pub vertices: usize,
    pub edges: usize,
    pub items: usize,
    pub kd: f64,
    pub cvg: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

/// Number of items in the system carrying each tag.
pub fn tag_item_counts<'a>(items: impl IntoIterator<Item = &'a TaggedItem>) -> BTreeMap<TagLabel, usize> {
    let mut counts = BTreeMap::new();
    for item in items {
        for t in item.tags() {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
    }
    counts
}

fn node_kd(node: &NodeState, global_vertices: usize) -> f64 {
    node.network.vertex_count() as f64 / global_vertices as f64
}

/// Per-tag count of the items a node owns.
pub type OwnedTags = BTreeMap<TagLabel, usize>;

fn node_cvg(node: &NodeState, owned: &OwnedTags, tag_counts: &BTreeMap<TagLabel, usize>) -> f64 {
    let known = node.network.vertex_count();
    if known == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for v in node.network.vertices() {
        let total = tag_counts.get(v).copied().unwrap_or(0);
        let mine = owned.get(v).copied().unwrap_or(0);
        if total > 0 {
            sum += mine as f64 / total as f64;
        }
    }
    sum / known as f64
}

/// (precision, recall, F) of one node; all zero when undefined.
fn node_prf(node: &NodeState, content_tags: &OwnedTags) -> (f64, f64, f64) {
    let known = node.network.vertex_count();
    if known == 0 || content_tags.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let shared = content_tags.keys().filter(|t| node.network.contains_vertex(t)).count() as f64;
    let p = shared / content_tags.len() as f64;
    let r = shared / known as f64;
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// Mean fraction of the global concept set held by each node.
pub fn knowledge_dissemination(nodes: &[NodeState], global_vertices: usize) -> Result<f64, MetricError> {
    if global_vertices == 0 {
        return Err(MetricError::EmptyGlobalGraph);
    }
    if nodes.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = nodes.iter().map(|n| node_kd(n, global_vertices)).sum();
    Ok(sum / nodes.len() as f64)
}

/// Mean, over nodes and over the tags each node knows, of the share of items
/// carrying that tag that the node owns. Nodes with empty networks count 0.
pub fn coverage(nodes: &[NodeState], tag_counts: &BTreeMap<TagLabel, usize>) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    nodes
        .iter()
        .map(|n| node_cvg(n, &tag_item_counts(n.items.values()), tag_counts))
        .sum::<f64>()
        / nodes.len() as f64
}

/// Mean per-node harmonic mean of precision (owned content tags that are
/// known concepts) and recall (known concepts backed by owned content).
pub fn f_measure(nodes: &[NodeState]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    nodes
        .iter()
        .map(|n| node_prf(n, &tag_item_counts(n.items.values())).2)
        .sum::<f64>()
        / nodes.len() as f64
}

/// Mean strength over every edge of every network.
pub fn mean_edge_weight(nodes: &[NodeState], now: Seconds, gamma: f64) -> f64 {
    let (sum, count) = nodes.iter().fold((0.0, 0usize), |(s, c), n| {
        (s + n.network.total_edge_weight(now, gamma), c + n.network.edge_count())
    });
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Everything needed to score node state, fixed for a whole run.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsContext {
    pub global_vertices: usize,
    pub tag_counts: BTreeMap<TagLabel, usize>,
    pub gamma: f64,
}

impl MetricsContext {
    pub fn new<'a>(
        global: &SemanticNetwork,
        all_items: impl IntoIterator<Item = &'a TaggedItem>,
        gamma: f64,
    ) -> Result<Self, MetricError> {
        if global.is_empty() {
            return Err(MetricError::EmptyGlobalGraph);
        }
        Ok(Self {
            global_vertices: global.vertex_count(),
            tag_counts: tag_item_counts(all_items),
            gamma,
        })
    }

    pub fn record(&self, time: Seconds, nodes: &[NodeState]) -> MetricsRecord {
        let owned: Vec<OwnedTags> = nodes.iter().map(|n| tag_item_counts(n.items.values())).collect();
        self.record_with(time, nodes, &owned)
    }

    /// As [`record`](Self::record), with each node's owned-tag counts
    /// supplied by the caller (index-aligned with `nodes`).
    pub fn record_with(&self, time: Seconds, nodes: &[NodeState], owned: &[OwnedTags]) -> MetricsRecord {
        let n = nodes.len().max(1) as f64;
        let mut cvg = 0.0;
        let mut f = 0.0;
        for (node, tags) in nodes.iter().zip(owned) {
            cvg += node_cvg(node, tags, &self.tag_counts);
            f += node_prf(node, tags).2;
        }
        MetricsRecord {
            time,
            kd: knowledge_dissemination(nodes, self.global_vertices).expect("non-empty global graph"),
            cvg: cvg / n,
            f_measure: f / n,
            mean_edge_weight: mean_edge_weight(nodes, time, self.gamma),
        }
    }

    pub fn node_rows(&self, nodes: &[NodeState]) -> Vec<NodeMetrics> {
        nodes
            .iter()
            .map(|n| {
                let owned = tag_item_counts(n.items.values());
                let (precision, recall, f) = node_prf(n, &owned);
                NodeMetrics {
                    node: n.id,
                    vertices: n.network.vertex_count(),
                    edges: n.network.edge_count(),
                    items: n.items.len(),
                    kd: node_kd(n, self.global_vertices),
                    cvg: node_cvg(n, &owned, &self.tag_counts),
                    precision,
                    recall,
                    f_measure: f,
                }
            })
            .collect()
    }
}

/// Earliest time from which the coverage stays exactly constant to the end of
/// the series, with that constant. `None` for an empty series.
pub fn coverage_convergence(series: &[(Seconds, f64)]) -> Option<(f64, Seconds)> {
    let &(mut since, last) = series.last()?;
    for &(t, v) in series.iter().rev().skip(1) {
        if v != last {
            break;
        }
        since = t;
    }
    Some((last, since))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Asymptotic,
    Permutation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvmResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Null hypothesis (same distribution) rejected at the 5% level.
    pub reject: bool,
    pub method: PValueMethod,
}

/// Samples smaller than this use a permutation p-value.
pub const CVM_ASYMPTOTIC_MIN_SAMPLE: usize = 20;
pub const CVM_PERMUTATIONS: usize = 10_000;

/// Two-sample Cramér-von Mises statistic
/// `T = nm/(n+m)^2 * sum over the pooled sample of (F_n(z) - G_m(z))^2`,
/// with right-continuous empirical CDFs, so ties are handled exactly.
pub fn cvm_statistic(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);

    let (mut i, mut j) = (0usize, 0usize);
    let mut sum = 0.0;
    while i < xs.len() || j < ys.len() {
        let z = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        let (i0, j0) = (i, j);
        while i < xs.len() && xs[i] <= z {
            i += 1;
        }
        while j < ys.len() && ys[j] <= z {
            j += 1;
        }
        let diff = i as f64 / n - j as f64 / m;
        sum += ((i - i0) + (j - j0)) as f64 * diff * diff;
    }
    Ok(n * m / ((n + m) * (n + m)) * sum)
}

/// `K_nu(z)` for real `z > 0` from `int_0^inf exp(-z cosh t) cosh(nu t) dt`,
/// by the trapezoid rule (the integrand decays double-exponentially).
fn bessel_k(nu: f64, z: f64) -> f64 {
    const H: f64 = 0.01;
    let mut sum = 0.5 * libm::exp(-z);
    let mut k = 1u32;
    loop {
        let t = k as f64 * H;
        let c = libm::cosh(t);
        if z * c > 745.0 + nu * t {
            break;
        }
        sum += libm::exp(-z * c) * libm::cosh(nu * t);
        k += 1;
    }
    sum * H
}

/// Limiting CDF of the Cramér-von Mises statistic (Anderson-Darling series).
pub fn cvm_limit_cdf(x: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    let pi = core::f64::consts::PI;
    let sqrt_x = libm::sqrt(x);
    // Gamma(k + 1/2) / Gamma(k + 1), starting at sqrt(pi)
    let mut ratio = libm::sqrt(pi);
    let mut total = 0.0;
    for k in 0..200u32 {
        let y = (4 * k + 1) as f64;
        let q = y * y / (16.0 * x);
        let term = if q > 740.0 {
            0.0
        } else {
            ratio / (pi * libm::sqrt(pi) * sqrt_x) * libm::sqrt(y) * libm::exp(-q) * bessel_k(0.25, q)
        };
        total += term;
        if term < 1e-17 && k > 0 {
            break;
        }
        ratio *= (k as f64 + 0.5) / (k as f64 + 1.0);
    }
    total.clamp(0.0, 1.0)
}

/// Upper-tail probability of the limiting distribution.
pub fn cvm_asymptotic_pvalue(statistic: f64) -> f64 {
    (1.0 - cvm_limit_cdf(statistic)).clamp(0.0, 1.0)
}

/// Fraction of label permutations of the pooled sample whose statistic is at
/// least the observed one (with the usual +1 correction).
pub fn cvm_permutation_pvalue(
    a: &[f64],
    b: &[f64],
    permutations: usize,
    rng: &mut impl rand::Rng,
) -> Result<f64, MetricError> {
    let observed = cvm_statistic(a, b)?;
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut hits = 0usize;
    for _ in 0..permutations {
        pooled.shuffle(rng);
        let (x, y) = pooled.split_at(a.len());
        if cvm_statistic(x, y)? >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (permutations + 1) as f64)
}

/// Two-sample Cramér-von Mises test. Uses the asymptotic p-value when both
/// samples have at least [`CVM_ASYMPTOTIC_MIN_SAMPLE`] values, otherwise a
/// fixed-seed permutation test.
pub fn cvm_two_sample(a: &[f64], b: &[f64]) -> Result<CvmResult, MetricError> {
    let statistic = cvm_statistic(a, b)?;
    let (p_value, method) = if a.len().min(b.len()) >= CVM_ASYMPTOTIC_MIN_SAMPLE {
        (cvm_asymptotic_pvalue(statistic), PValueMethod::Asymptotic)
    } else {
        let seed = ((a.len() as u64) << 32) ^ b.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // symmetric in the arguments: permute with the smaller sample first
        let p = if a.len() <= b.len() {
            cvm_permutation_pvalue(a, b, CVM_PERMUTATIONS, &mut rng)?
        } else {
            cvm_permutation_pvalue(b, a, CVM_PERMUTATIONS, &mut rng)?
        };
        (p, PValueMethod::Permutation)
    };
    Ok(CvmResult {
        statistic,
        p_value,
        reject: p_value < 0.05,
        method,
    })
}

/// `(d, P[degree >= d])` for every distinct degree, ascending.
pub fn degree_ccdf(net: &SemanticNetwork) -> Vec<(usize, f64)> {
    let hist = net.degree_histogram();
    let total = net.vertex_count() as f64;
    let mut remaining = net.vertex_count();
    let mut out = Vec::with_capacity(hist.len());
    for (d, count) in hist {
        out.push((d, remaining as f64 / total));
        remaining -= count;
    }
    out
}

/// Degrees of a network as a sample for [`cvm_two_sample`].
pub fn degree_sample(net: &SemanticNetwork) -> Vec<f64> {
    net.degree_sequence().into_iter().map(|d| d as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::item::{ItemId, TaggedItem};

    fn item(id: u64, tags: &[&str]) -> TaggedItem {
        TaggedItem::from_strs(id, tags.iter().copied()).unwrap()
    }

    fn node(id: u32, known: &[TaggedItem], owned: &[TaggedItem]) -> NodeState {
        let mut n = NodeState::new(NodeId(id), 0);
        if !known.is_empty() {
            n.network = SemanticNetwork::build_initial(known, 0.0).unwrap();
        }
        for i in owned {
            n.items.insert(i.id(), i.clone());
        }
        n
    }

    #[test]
    fn kd_cases() {
        let all = [item(1, &["a", "b", "c", "d"])];
        let full = node(0, &all, &all);
        assert_eq!(knowledge_dissemination(&[full.clone(), full], 4).unwrap(), 1.0);
        let three = node(0, &[item(1, &["a", "b", "c"])], &[]);
        let one = node(1, &[item(2, &["a"])], &[]);
        assert_eq!(knowledge_dissemination(&[three, one], 4).unwrap(), 0.5);
        let empty = node(0, &[], &[]);
        assert_eq!(knowledge_dissemination(std::slice::from_ref(&empty), 4).unwrap(), 0.0);
        assert_eq!(knowledge_dissemination(&[empty], 0), Err(MetricError::EmptyGlobalGraph));
    }

    #[test]
    fn coverage_cases() {
        let items: Vec<_> = (0..4).map(|i| item(i, &["v"])).collect();
        let counts = tag_item_counts(&items);
        let n = node(0, &[item(9, &["v"])], &items[..1]);
        assert_eq!(coverage(&[n], &counts), 0.25);
        let everything = node(0, &items, &items);
        assert_eq!(coverage(&[everything], &counts), 1.0);
        assert_eq!(coverage(&[node(0, &[], &items)], &counts), 0.0);
    }

    #[test]
    fn f_measure_cases() {
        let owned = [item(1, &["a", "b"])];
        assert_eq!(f_measure(&[node(0, &owned, &owned)]), 1.0);
        // p = 1, r = 0.5
        let half = node(0, &[item(2, &["a", "b", "c", "d"])], &owned);
        assert!((f_measure(&[half]) - 2.0 / 3.0).abs() < 1e-15);
        let disjoint = node(0, &[item(3, &["x", "y"])], &owned);
        assert_eq!(f_measure(&[disjoint]), 0.0);
        assert_eq!(f_measure(&[node(0, &[], &owned)]), 0.0);
        assert_eq!(f_measure(&[node(0, &owned, &[])]), 0.0);
    }

    #[test]
    fn convergence_cases() {
        assert_eq!(coverage_convergence(&[]), None);
        let flat = [(0.0, 0.3), (5.0, 0.3), (10.0, 0.3)];
        assert_eq!(coverage_convergence(&flat), Some((0.3, 0.0)));
        let rising = [(0.0, 0.1), (5.0, 0.2), (10.0, 0.3)];
        assert_eq!(coverage_convergence(&rising), Some((0.3, 10.0)));
        let mut series: Vec<(f64, f64)> = (0..421).map(|k| (k as f64 * 5.0, 0.5 + k as f64 * 0.001)).collect();
        series.extend((421..5001).map(|k| (k as f64 * 5.0, 0.987)));
        assert_eq!(coverage_convergence(&series), Some((0.987, 2105.0)));
    }

    #[test]
    fn cvm_identical_samples() {
        let a = [1.0, 2.0, 2.0, 3.0, 5.0];
        let r = cvm_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject);
        assert_eq!(r.method, PValueMethod::Permutation);
        assert_eq!(cvm_statistic(&[], &a), Err(MetricError::EmptySample));
    }

    #[test]
    fn cvm_limit_matches_reference_values() {
        // reference: 1 - CDF of the limiting distribution from a
        // double-precision implementation using modified Bessel functions
        let cases = [
            (0.157_223, 0.368_298_247_781_113_9),
            (0.6225, 0.019_697_326_814_928_53),
            (0.067_960_6, 0.764_137_722_874_654_6),
            (0.2325, 0.212_442_407_028_334_7),
        ];
        for (x, p) in cases {
            let got = cvm_asymptotic_pvalue(x);
            assert!((got - p).abs() < 1e-9, "x={x}: {got} vs {p}");
        }
        assert_eq!(cvm_asymptotic_pvalue(0.0), 1.0);
        assert!(cvm_asymptotic_pvalue(5.0) < 1e-9);
    }

    #[test]
    fn ccdf_cases() {
        let tri = SemanticNetwork::build_initial(&[item(1, &["a", "b", "c"])], 0.0).unwrap();
        assert_eq!(degree_ccdf(&tri), vec![(2, 1.0)]);
        let star = SemanticNetwork::build_initial(
            &[item(1, &["c", "s1"]), item(2, &["c", "s2"]), item(3, &["c", "s3"])],
            0.0,
        )
        .unwrap();
        assert_eq!(degree_ccdf(&star), vec![(1, 1.0), (3, 0.25)]);
        assert!(degree_ccdf(&SemanticNetwork::new()).is_empty());
    }

    #[test]
    fn context_record_on_omniscient_nodes() {
        let items = [item(1, &["a", "b"]), item(2, &["b", "c"])];
        let nodes: Vec<NodeState> = (0..3).map(|i| node(i, &items, &items)).collect();
        let global = SemanticNetwork::build_initial(&items, 0.0).unwrap();
        let ctx = MetricsContext::new(&global, &items, 0.01).unwrap();
        let r = ctx.record(0.0, &nodes);
        assert_eq!((r.kd, r.cvg, r.f_measure, r.mean_edge_weight), (1.0, 1.0, 1.0, 1.0));
        let rows = ctx.node_rows(&nodes);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].items, 2);
        let _ = ItemId(0);
    }
}
