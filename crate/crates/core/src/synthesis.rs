//! Abs-filter synthesis: detecting Al-filter pairs that fire back to back,
//! chaining them through the resulting filter graph, and scanning the
//! concatenated filters over the input.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;

use crate::align::{
    activation_from_dist2, dist2, kernel_activation, scan_rows, scan_rows_backward, AlignFilter,
    AlignmentConfig, AlignmentMap, ScanCache,
};
use crate::array::Array;
use crate::data::MotionSequence;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default pair-detection threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.8;
/// Default cap on the number of Al-filters in one chain.
pub const DEFAULT_MAX_CHAIN: usize = 8;
/// Upper bound on DFS expansions per source node during chain extraction.
pub const DEFAULT_SEARCH_BUDGET: usize = 2_000_000;

/// Ordered concatenation of Al-filters. Owns no weights: its vector is
/// always assembled from the current Al-filter values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbsFilter {
    pub chain: Vec<usize>,
}

impl AbsFilter {
    pub fn new(chain: Vec<usize>) -> Self {
        AbsFilter { chain }
    }

    /// Number of Al-filters in the chain.
    pub fn multiplicity(&self) -> usize {
        self.chain.len()
    }

    pub fn receptive_field(&self, t: usize) -> usize {
        self.chain.len() * t
    }

    /// Concatenated weight vector, looked up by Al-filter id.
    pub fn weights<T: Scalar>(&self, al: &[AlignFilter<T>]) -> Result<Vec<T>> {
        let mut out = Vec::new();
        for &id in &self.chain {
            let f = al
                .iter()
                .find(|f| f.id == id)
                .ok_or_else(|| Error::State(format!("Abs-filter references unknown Al-filter {id}")))?;
            out.extend_from_slice(f.values());
        }
        Ok(out)
    }

    pub fn is_power_of_two(&self) -> bool {
        self.chain.len().is_power_of_two()
    }
}

/// Directed graph over Al-filters; edge `i → j` means `f_i` followed by `f_j`
/// matched some stretch of the data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterGraph {
    pub nodes: usize,
    /// Strongest pair score seen per edge.
    pub evidence: BTreeMap<(usize, usize), f64>,
}

impl FilterGraph {
    pub fn new(nodes: usize) -> Self {
        FilterGraph {
            nodes,
            evidence: BTreeMap::new(),
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, score: f64) {
        if from == to {
            return;
        }
        let e = self.evidence.entry((from, to)).or_insert(score);
        if score > *e {
            *e = score;
        }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.evidence.contains_key(&(from, to))
    }

    pub fn edge_count(&self) -> usize {
        self.evidence.len()
    }

    /// Successor lists, each sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for &(i, j) in self.evidence.keys() {
            adj[i].push(j);
        }
        adj
    }

    pub fn merge(&mut self, other: &FilterGraph) {
        self.nodes = self.nodes.max(other.nodes);
        for (&(i, j), &s) in &other.evidence {
            self.add_edge(i, j, s);
        }
    }
}

/// Product of the activations of `f_i` on the first half and `f_j` on the
/// second half of a `2t`-frame window.
pub fn candidate_score<T: Scalar>(
    fi: &AlignFilter<T>,
    fj: &AlignFilter<T>,
    window: &[T],
    a: T,
) -> Result<T> {
    let t = fi.len();
    if fj.len() != t {
        return Err(Error::invalid("candidate filters differ in length"));
    }
    if window.len() < 2 * t {
        return Err(Error::invalid(format!(
            "pair window has {} frames, needs {}",
            window.len(),
            2 * t
        )));
    }
    Ok(kernel_activation(&window[..t], fi.values(), a)? * kernel_activation(&window[t..2 * t], fj.values(), a)?)
}

fn collect_one<T: Scalar>(seq: &MotionSequence<T>, filters: &[AlignFilter<T>], r: f64, a: T) -> FilterGraph {
    let mut graph = FilterGraph::new(filters.len());
    let t = filters.first().map_or(0, AlignFilter::len);
    if t == 0 || seq.len() < 2 * t {
        return graph;
    }
    let r_t = T::lit(r);
    let starts = seq.len() - t + 1;
    for ch in 0..seq.dims() {
        let x = seq.channel(ch);
        // activations of every filter at every unpadded start frame
        let strong: Vec<Vec<(usize, T)>> = (0..starts)
            .map(|s| {
                filters
                    .iter()
                    .enumerate()
                    .filter_map(|(k, f)| {
                        let g = activation_from_dist2(dist2(&x[s..s + t], f.values()), a);
                        // both factors are <= 1, so each must clear r alone
                        (g >= r_t).then_some((k, g))
                    })
                    .collect()
            })
            .collect();
        for t0 in 0..starts - t {
            for &(i, gi) in &strong[t0] {
                for &(j, gj) in &strong[t0 + t] {
                    let rho = gi * gj;
                    if i != j && rho >= r_t {
                        graph.add_edge(filters[i].id, filters[j].id, rho.as_f64());
                    }
                }
            }
        }
    }
    graph
}

/// Scans every sequence for back-to-back filter pairs scoring at least `r`.
pub fn collect_graph<T: Scalar>(
    sequences: &[MotionSequence<T>],
    filters: &[AlignFilter<T>],
    r: f64,
    a: f64,
) -> FilterGraph {
    let a = T::lit(a);
    let nodes = filters.iter().map(|f| f.id + 1).max().unwrap_or(0);
    let parts: Vec<FilterGraph> = sequences
        .par_iter()
        .map(|s| collect_one(s, filters, r, a))
        .collect();
    let mut graph = FilterGraph::new(nodes);
    for p in &parts {
        graph.merge(p);
    }
    graph.nodes = nodes;
    graph
}

/// Longest simple chains between every ordered pair of filters, capped at
/// `max_len` filters, with chains contained in longer ones removed.
///
/// For each pair `(u, v)` the kept chain is the longest simple path from `u`
/// to `v`; ties go to the lexicographically smallest node sequence.
pub fn extract_chains(graph: &FilterGraph, max_len: usize) -> Vec<AbsFilter> {
    extract_chains_with_budget(graph, max_len, DEFAULT_SEARCH_BUDGET)
}

pub fn extract_chains_with_budget(graph: &FilterGraph, max_len: usize, budget: usize) -> Vec<AbsFilter> {
    let n = graph.nodes;
    if max_len < 2 || n == 0 {
        return Vec::new();
    }
    let adj = graph.adjacency();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for source in 0..n {
        if adj[source].is_empty() {
            continue;
        }
        let best = longest_from(source, &adj, max_len, budget);
        candidates.extend(best.into_iter().flatten().filter(|p| p.len() >= 2));
    }
    eliminate_subchains(candidates)
        .into_iter()
        .map(AbsFilter::new)
        .collect()
}

/// Longest capped simple path from `source` to every node. DFS visits paths
/// in lexicographic order, so the first path of a given length to reach a
/// node is the lexicographically smallest one.
fn longest_from(source: usize, adj: &[Vec<usize>], max_len: usize, budget: usize) -> Vec<Option<Vec<usize>>> {
    let n = adj.len();
    let mut best: Vec<Option<Vec<usize>>> = vec![None; n];
    let mut on_path = vec![false; n];
    let mut path = vec![source];
    on_path[source] = true;
    // explicit stack of (node, next successor index)
    let mut stack: Vec<(usize, usize)> = vec![(source, 0)];
    let mut expansions = 0usize;
    while let Some(&mut (node, ref mut next)) = stack.last_mut() {
        if path.len() < max_len && *next < adj[node].len() {
            let succ = adj[node][*next];
            *next += 1;
            if on_path[succ] {
                continue;
            }
            expansions += 1;
            if expansions > budget {
                warn!("chain search from filter {source} hit its expansion budget; keeping chains found so far");
                break;
            }
            path.push(succ);
            on_path[succ] = true;
            if best[succ].as_ref().is_none_or(|b| path.len() > b.len()) {
                best[succ] = Some(path.clone());
            }
            stack.push((succ, 0));
        } else {
            stack.pop();
            if let Some(last) = path.pop() {
                on_path[last] = false;
            }
        }
    }
    best
}

fn is_contiguous_subchain(short: &[usize], long: &[usize]) -> bool {
    short.len() <= long.len() && long.windows(short.len()).any(|w| w == short)
}

/// Drops duplicates and every chain that appears contiguously inside a
/// longer one. Output is ordered by length (descending), then lexicographically.
pub fn eliminate_subchains(mut chains: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    chains.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    chains.dedup();
    let mut kept: Vec<Vec<usize>> = Vec::new();
    for c in chains {
        if !kept.iter().any(|k| is_contiguous_subchain(&c, k)) {
            kept.push(c);
        }
    }
    kept
}

/// How well each chain occurs in the data: the best unpadded activation of
/// the concatenated filter over all channels of a sequence, averaged over
/// sequences.
pub fn chain_support<T: Scalar>(
    chains: &[AbsFilter],
    filters: &[AlignFilter<T>],
    sequences: &[MotionSequence<T>],
    a: f64,
) -> Result<Vec<f64>> {
    if chains.is_empty() || sequences.is_empty() {
        return Ok(vec![0.0; chains.len()]);
    }
    let t = filters.first().map_or(0, AlignFilter::len);
    let index: BTreeMap<usize, usize> = filters.iter().enumerate().map(|(k, f)| (f.id, k)).collect();
    let chains: Vec<Vec<usize>> = chains
        .iter()
        .map(|c| {
            c.chain
                .iter()
                .map(|id| index.get(id).copied().ok_or_else(|| Error::invalid(format!("unknown Al-filter id {id}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let a = T::lit(a);
    let per_seq: Vec<Vec<f64>> = sequences
        .par_iter()
        .map(|seq| {
            let mut best = vec![f64::INFINITY; chains.len()];
            for ch in 0..seq.dims() {
                let x = seq.channel(ch);
                if x.len() < t {
                    continue;
                }
                let starts = x.len() - t + 1;
                // segment distances of every Al-filter at every start
                let d: Vec<Vec<T>> = filters
                    .iter()
                    .map(|f| (0..starts).map(|s| dist2(&x[s..s + t], f.values())).collect())
                    .collect();
                for (c, chain) in chains.iter().enumerate() {
                    let span = chain.len() * t;
                    if x.len() < span {
                        continue;
                    }
                    for s in 0..=x.len() - span {
                        let total: T = chain.iter().enumerate().map(|(k, &f)| d[f][s + k * t]).sum();
                        best[c] = best[c].min(total.as_f64());
                    }
                }
            }
            best.iter()
                .map(|&d2| if d2.is_finite() { activation_from_dist2(T::lit(d2), a).as_f64() } else { -a.as_f64() })
                .collect()
        })
        .collect();
    let n = per_seq.len() as f64;
    Ok((0..chains.len()).map(|c| per_seq.iter().map(|v| v[c]).sum::<f64>() / n).collect())
}

/// Which filter produced a row of the augmented map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSource {
    Al(usize),
    /// Index into the Abs-filter list.
    Abs(usize),
}

/// Row-stack of the Al-filter map and every Abs-filter map.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMap<T> {
    pub values: Array<T>,
    pub row_index: Vec<RowSource>,
}

/// Cached state of [`forward_abs`].
#[derive(Debug, Clone)]
pub struct AbsCache<T> {
    channels: Array<T>,
    weights: Vec<Vec<T>>,
    chains: Vec<Vec<usize>>,
    scan: ScanCache<T>,
    a: T,
}

#[derive(Debug, Clone)]
pub struct AbsOutput<T> {
    /// `V^p` maps keyed by multiplicity `p`.
    pub by_multiplicity: BTreeMap<usize, AlignmentMap<T>>,
    /// Rows of the Abs-filters in input order, `d_abs × T`.
    pub rows: Option<Array<T>>,
    pub augmented: AugmentedMap<T>,
    pub cache: AbsCache<T>,
}

/// Scans the Abs-filters over every channel and stacks their maps under the
/// Al-filter map `v1`.
pub fn forward_abs<T: Scalar>(
    sequence: &MotionSequence<T>,
    abs_filters: &[AbsFilter],
    al_filters: &[AlignFilter<T>],
    v1: &AlignmentMap<T>,
    cfg: &AlignmentConfig,
) -> Result<AbsOutput<T>> {
    let a = T::lit(cfg.a);
    let weights: Vec<Vec<T>> = abs_filters
        .iter()
        .map(|f| f.weights(al_filters))
        .collect::<Result<_>>()?;
    let frames = sequence.len();
    if v1.values.cols() != frames {
        return Err(Error::invalid("Al-filter map and sequence differ in length"));
    }
    let (rows, scan) = scan_rows(sequence.channels(), &weights, a);
    let mut by_multiplicity: BTreeMap<usize, (Vec<T>, Vec<usize>)> = BTreeMap::new();
    for (k, f) in abs_filters.iter().enumerate() {
        let e = by_multiplicity.entry(f.multiplicity()).or_default();
        e.0.extend_from_slice(rows.row(k));
        e.1.push(k);
    }
    let by_multiplicity = by_multiplicity
        .into_iter()
        .map(|(p, (data, ids))| {
            let n = ids.len();
            Ok((
                p,
                AlignmentMap {
                    values: Array::from_vec(&[n, frames], data)?,
                    source_filter_ids: ids,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let mut stacked = v1.values.data().to_vec();
    if !abs_filters.is_empty() {
        stacked.extend_from_slice(rows.data());
    }
    let mut row_index: Vec<RowSource> = v1.source_filter_ids.iter().map(|&i| RowSource::Al(i)).collect();
    row_index.extend((0..abs_filters.len()).map(RowSource::Abs));
    Ok(AbsOutput {
        by_multiplicity,
        rows: (!abs_filters.is_empty()).then_some(rows),
        augmented: AugmentedMap {
            values: Array::from_vec(&[row_index.len(), frames], stacked)?,
            row_index,
        },
        cache: AbsCache {
            channels: sequence.channels().clone(),
            weights,
            chains: abs_filters.iter().map(|f| f.chain.clone()).collect(),
            scan,
            a,
        },
    })
}

/// Routes the gradient of the Abs-filter rows (`d_abs × T`) back to the
/// Al-filters each chain is built from.
pub fn backward_abs<T: Scalar>(
    upstream: &Array<T>,
    cache: Option<&AbsCache<T>>,
    al_filters: &mut [AlignFilter<T>],
) -> Result<()> {
    let cache = cache.ok_or_else(|| Error::State("backward_abs called without a forward cache".into()))?;
    if cache.chains.is_empty() {
        return Ok(());
    }
    if upstream.shape() != [cache.chains.len(), cache.scan.frames] {
        return Err(Error::invalid(format!(
            "upstream gradient shape {:?} does not match [{}, {}]",
            upstream.shape(),
            cache.chains.len(),
            cache.scan.frames
        )));
    }
    let mut grads: Vec<Vec<T>> = cache.weights.iter().map(|w| vec![T::zero(); w.len()]).collect();
    scan_rows_backward(&cache.channels, &cache.weights, &cache.scan, upstream, cache.a, &mut grads);
    route_segment_grads(&cache.chains, &grads, al_filters)
}

pub(crate) fn route_segment_grads<T: Scalar>(
    chains: &[Vec<usize>],
    grads: &[Vec<T>],
    al_filters: &mut [AlignFilter<T>],
) -> Result<()> {
    for (chain, g) in chains.iter().zip(grads) {
        let t = g.len() / chain.len();
        for (seg, &id) in chain.iter().enumerate() {
            let f = al_filters
                .iter_mut()
                .find(|f| f.id == id)
                .ok_or_else(|| Error::State(format!("unknown Al-filter {id}")))?;
            for (dst, &src) in f.weights.grad.data_mut().iter_mut().zip(&g[seg * t..(seg + 1) * t]) {
                *dst += src;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::forward_align;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(rows: Vec<Vec<f64>>) -> MotionSequence<f64> {
        MotionSequence::new(Array::from_rows(&rows).unwrap(), None).unwrap()
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> FilterGraph {
        let mut g = FilterGraph::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j, 1.0);
        }
        g
    }

    fn chains(v: Vec<AbsFilter>) -> Vec<Vec<usize>> {
        v.into_iter().map(|f| f.chain).collect()
    }

    #[test]
    fn candidate_scores() {
        let fi = AlignFilter::new(0, vec![0.1, 0.2, 0.3]);
        let fj = AlignFilter::new(1, vec![-0.5, 0.0, 0.5]);
        let w = [0.1, 0.2, 0.3, -0.5, 0.0, 0.5];
        assert_eq!(candidate_score(&fi, &fj, &w, 0.1).unwrap(), 1.0);
        let far = [0.1, 0.2, 0.3, 50.0, 50.0, 50.0];
        let s = candidate_score(&fi, &fj, &far, 0.1).unwrap();
        assert!((s + 0.1f64).abs() < 1e-12 && s < DEFAULT_THRESHOLD);
        assert!(candidate_score(&fi, &fj, &w[..5], 0.1).is_err());
        // g1 = 0.95, g2 = 0.90 gives 0.855
        let d1 = (1.1f64 / 1.05).ln().sqrt();
        let d2 = (1.1f64 / 1.0).ln().sqrt();
        let w = [0.1 + d1, 0.2, 0.3, -0.5 + d2, 0.0, 0.5];
        let s = candidate_score(&fi, &fj, &w, 0.1).unwrap();
        assert!((s - 0.855).abs() < 1e-12 && s >= DEFAULT_THRESHOLD);
    }

    #[test]
    fn tiled_pair_creates_edge() {
        let fa = vec![0.0, 0.5, 1.0];
        let fb = vec![1.0, 0.2, -0.6];
        let data: Vec<f64> = fa.iter().chain(&fb).copied().cycle().take(30).collect();
        let filters = vec![AlignFilter::new(0, fa), AlignFilter::new(1, fb)];
        let g = collect_graph(&[seq(vec![data])], &filters, 0.8, 0.1);
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(1, 0));
        assert!(!g.has_edge(0, 0));
    }

    #[test]
    fn short_sequences_contribute_nothing() {
        let filters = vec![AlignFilter::new(0, vec![0.0; 3]), AlignFilter::new(1, vec![0.0; 3])];
        let g = collect_graph(&[seq(vec![vec![0.0; 5]])], &filters, 0.8, 0.1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn random_filters_on_unrelated_noise_give_sparse_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let filters: Vec<_> = (0..8)
            .map(|i| AlignFilter::new(i, (0..3).map(|_| rng.random_range(5.0..9.0)).collect()))
            .collect();
        let data: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..200).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        assert_eq!(collect_graph(&[seq(data)], &filters, 0.8, 0.1).edge_count(), 0);
    }

    #[test]
    fn simple_chain_keeps_only_the_longest() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(chains(extract_chains(&g, 8)), vec![vec![0, 1, 2]]);
        assert_eq!(extract_chains(&g, 8)[0].multiplicity(), 3);
        assert!(extract_chains(&FilterGraph::new(4), 8).is_empty());
    }

    #[test]
    fn cycles_are_capped() {
        let g = graph(2, &[(0, 1), (1, 0)]);
        assert_eq!(chains(extract_chains(&g, 4)), vec![vec![0, 1], vec![1, 0]]);
        let ring = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        let out = chains(extract_chains(&ring, 4));
        assert!(out.iter().all(|c| c.len() == 4));
        assert_eq!(out.len(), 5);
    }

    #[test]
    fn subchain_elimination() {
        let kept = eliminate_subchains(vec![vec![1, 2], vec![0, 1, 2, 3], vec![2, 1], vec![1, 2]]);
        assert_eq!(kept, vec![vec![0, 1, 2, 3], vec![2, 1]]);
    }

    #[test]
    fn abs_filter_weights_are_views() {
        let mut al = vec![AlignFilter::new(0, vec![1.0, 2.0]), AlignFilter::new(1, vec![3.0, 4.0])];
        let f = AbsFilter::new(vec![1, 0, 1]);
        assert_eq!(f.weights(&al).unwrap(), vec![3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
        al[1].weights.value.data_mut()[0] = -7.0;
        assert_eq!(f.weights(&al).unwrap(), vec![-7.0, 4.0, 1.0, 2.0, -7.0, 4.0]);
        assert!(AbsFilter::new(vec![5]).weights(&al).is_err());
    }

    fn tiled_setup() -> (MotionSequence<f64>, Vec<AlignFilter<f64>>, AlignmentConfig) {
        let fa = vec![0.0, 0.5, 1.0];
        let fb = vec![1.0, 0.2, -0.6];
        let period: Vec<f64> = fa.iter().chain(&fb).copied().chain([3.0; 6]).collect();
        let data: Vec<f64> = period.iter().copied().cycle().take(48).collect();
        let filters = vec![AlignFilter::new(0, fa), AlignFilter::new(1, fb)];
        let cfg = AlignmentConfig { filter_count: 2, ..Default::default() };
        (seq(vec![data]), filters, cfg)
    }

    #[test]
    fn abs_rows_are_sparse_and_stacked() {
        let (s, filters, cfg) = tiled_setup();
        let v1 = forward_align(&s, &filters, &cfg).unwrap().map;
        let abs = vec![AbsFilter::new(vec![0, 1])];
        let out = forward_abs(&s, &abs, &filters, &v1, &cfg).unwrap();
        let row = out.by_multiplicity[&2].values.row(0).to_vec();
        // window of 6 frames anchored at k covers k-2..=k+3; tiles start every 12
        for start in [0, 12, 24, 36] {
            assert_eq!(row[start + 2], 1.0);
        }
        let hot = row.iter().filter(|&&v| v > 0.5).count();
        assert_eq!(hot, 4);
        assert_eq!(out.augmented.values.shape(), &[3, 48]);
        assert_eq!(out.augmented.row_index[2], RowSource::Abs(0));
        let none = forward_abs(&s, &[], &filters, &v1, &cfg).unwrap();
        assert_eq!(none.augmented.values, v1.values);
    }

    #[test]
    fn augmented_shape_with_mixed_filters() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = seq(vec![(0..40).map(|_| rng.random_range(-1.0..1.0)).collect()]);
        let filters: Vec<_> = (0..4)
            .map(|i| AlignFilter::new(i, (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let cfg = AlignmentConfig { filter_count: 4, ..Default::default() };
        let v1 = forward_align(&s, &filters, &cfg).unwrap().map;
        let abs = vec![AbsFilter::new(vec![0, 1]), AbsFilter::new(vec![2, 3, 1, 0])];
        let out = forward_abs(&s, &abs, &filters, &v1, &cfg).unwrap();
        assert_eq!(out.augmented.values.shape(), &[6, 40]);
        assert_eq!(out.by_multiplicity.keys().copied().collect::<Vec<_>>(), vec![2, 4]);
    }

    #[test]
    fn repeated_filter_receives_both_segment_gradients() {
        let s = seq(vec![vec![0.05, -0.02, 0.07, 0.01, 0.0, 0.03, -0.04]]);
        let mut al = vec![AlignFilter::new(0, vec![0.02, 0.01, -0.03])];
        let cfg = AlignmentConfig { filter_count: 1, ..Default::default() };
        let v1 = forward_align(&s, &al, &cfg).unwrap().map;
        let abs = vec![AbsFilter::new(vec![0, 0])];
        let out = forward_abs(&s, &abs, &al, &v1, &cfg).unwrap();
        let up = Array::from_vec(&[1, 7], vec![1.0, -0.5, 0.25, 2.0, 0.0, 1.5, -1.0]).unwrap();
        backward_abs(&up, Some(&out.cache), &mut al).unwrap();
        // recompute the full 6-dim gradient and fold the two halves together
        let w = abs[0].weights(&al).unwrap();
        let padded = crate::array::pad_edges(s.channel(0), 6);
        let mut full = vec![0.0; 6];
        for j in 0..7 {
            let g = crate::align::kernel_gradient(&padded[j..j + 6], &w, 0.1).unwrap();
            for m in 0..6 {
                full[m] += up.data()[j] * g[m];
            }
        }
        for m in 0..3 {
            let got = al[0].weights.grad.data()[m];
            assert!((got - (full[m] + full[m + 3])).abs() < 1e-14);
        }
        let mut al2 = vec![AlignFilter::new(0, vec![0.02, 0.01, -0.03])];
        backward_abs(&Array::zeros(&[1, 7]), Some(&out.cache), &mut al2).unwrap();
        assert!(al2[0].weights.grad.data().iter().all(|&g| g == 0.0));
        assert!(backward_abs(&up, None, &mut al2).is_err());
    }

    #[test]
    fn routed_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = seq((0..2).map(|_| (0..16).map(|_| rng.random_range(-0.1..0.1)).collect()).collect());
        let mut al: Vec<_> = (0..3)
            .map(|i| AlignFilter::new(i, (0..3).map(|_| rng.random_range(-0.1..0.1)).collect()))
            .collect();
        let cfg = AlignmentConfig { filter_count: 3, ..Default::default() };
        let abs = vec![AbsFilter::new(vec![0, 2]), AbsFilter::new(vec![1, 2, 0, 1])];
        let up_data: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |al: &[AlignFilter<f64>]| {
            let v1 = forward_align(&s, al, &cfg).unwrap().map;
            let out = forward_abs(&s, &abs, al, &v1, &cfg).unwrap();
            out.rows.unwrap().data().iter().zip(&up_data).map(|(a, b)| a * b).sum::<f64>()
        };
        let v1 = forward_align(&s, &al, &cfg).unwrap().map;
        let out = forward_abs(&s, &abs, &al, &v1, &cfg).unwrap();
        assert!(out.cache.scan.dist2.iter().all(|&d| d <= 0.5));
        backward_abs(&Array::from_vec(&[2, 16], up_data.clone()).unwrap(), Some(&out.cache), &mut al).unwrap();
        for k in 0..3 {
            for m in 0..3 {
                let h = 1e-6;
                let mut p = al.clone();
                p[k].weights.value.data_mut()[m] += h;
                let mut q = al.clone();
                q[k].weights.value.data_mut()[m] -= h;
                let fd = (objective(&p) - objective(&q)) / (2.0 * h);
                let g = al[k].weights.grad.data()[m];
                assert!((fd - g).abs() <= 1e-4 * fd.abs().max(1e-6), "{fd} vs {g}");
            }
        }
    }

    #[test]
    fn longer_filters_are_sparser_on_tiled_data() {
        // a repeating 4-filter pattern; chains of 2, 3, 4 consecutive filters
        let fs: Vec<Vec<f64>> = vec![
            vec![0.0, 0.4, 0.8],
            vec![1.0, 0.9, 0.5],
            vec![0.0, -0.5, -1.0],
            vec![-0.8, -0.3, 0.1],
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut data = Vec::new();
        while data.len() < 200 {
            // random rearrangements of the filters so longer chains match less often
            let k = rng.random_range(0..4);
            data.extend_from_slice(&fs[k]);
            if rng.random_bool(0.6) {
                data.extend_from_slice(&fs[(k + 1) % 4]);
            }
        }
        let al: Vec<_> = fs.iter().enumerate().map(|(i, w)| AlignFilter::new(i, w.clone())).collect();
        let s = seq(vec![data]);
        let cfg = AlignmentConfig { filter_count: 4, ..Default::default() };
        let v1 = forward_align(&s, &al, &cfg).unwrap().map;
        let abs: Vec<AbsFilter> = (2..=4).map(|p| AbsFilter::new((0..p).collect())).collect();
        let out = forward_abs(&s, &abs, &al, &v1, &cfg).unwrap();
        let frac = |p: usize| {
            let m = &out.by_multiplicity[&p].values;
            m.data().iter().filter(|&&v| v > 0.5).count() as f64 / m.len() as f64
        };
        let v1_frac = v1.values.data().iter().filter(|&&v| v > 0.5).count() as f64 / v1.values.len() as f64;
        assert!(v1_frac >= frac(2) && frac(2) >= frac(3) && frac(3) >= frac(4));
    }
}
