//! Upper bound for uncertain systems: the maximum cycle mean of the
//! node-weighted graph over partition elements.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::determinization::{DetController, Partition};
use crate::entropy_det::scc;
use crate::error::{Error, Result};
use crate::synthesis::Abstraction;

/// Largest strongly connected component handed to Karp's table.
pub const MAX_KARP_NODES: usize = 12_000;
pub const MAX_BRUTE_NODES: usize = 12;
/// Guards of the exhaustive expansion-number search.
pub const MAX_ORACLE_ELEMENTS: usize = 4;
pub const MAX_ORACLE_TAU: usize = 4;
pub const MAX_FLAT_SEQUENCES: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedDigraph {
    succ: Vec<Vec<u32>>,
    weights: Vec<f64>,
}

impl WeightedDigraph {
    pub fn new(succ: Vec<Vec<u32>>, weights: Vec<f64>) -> Result<Self> {
        let n = succ.len();
        if weights.len() != n {
            return Err(Error::Graph("weight count differs from node count".into()));
        }
        if succ.iter().flatten().any(|&j| j as usize >= n) {
            return Err(Error::Graph("edge to a missing node".into()));
        }
        Ok(Self { succ, weights })
    }

    /// Each node weighted by log2 of its number of successors.
    pub fn from_followers(succ: Vec<Vec<u32>>) -> Result<Self> {
        let weights = succ.iter().map(|s| (s.len().max(1) as f64).log2()).collect();
        Self::new(succ, weights)
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn successors(&self, i: usize) -> &[u32] {
        &self.succ[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn n_edges(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    fn check_out_edges(&self) -> Result<()> {
        match self.succ.iter().position(Vec::is_empty) {
            Some(i) => Err(Error::Graph(format!("node {i} has no outgoing edge"))),
            None => Ok(()),
        }
    }

    pub fn write_dot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "digraph G {{")?;
        for (i, wt) in self.weights.iter().enumerate() {
            writeln!(w, "  a{i} [label=\"A{i}\\nw={wt:.4}\"];")?;
        }
        for (i, s) in self.succ.iter().enumerate() {
            for j in s {
                writeln!(w, "  a{i} -> a{j};")?;
            }
        }
        writeln!(w, "}}")?;
        Ok(())
    }
}

/// Graph on the partition elements with an edge `A -> A'` for every element
/// `A'` holding a successor cell of some cell of `A`.
pub fn build_weighted_graph(abs: &Abstraction, d: &DetController, p: &Partition) -> Result<WeightedDigraph> {
    if abs.tau() != 1 {
        return Err(Error::Abstraction(format!(
            "the uncertain bound needs tau = 1, got {}",
            abs.tau()
        )));
    }
    let succ = p
        .elements()
        .par_iter()
        .map(|el| {
            let mut out: Vec<u32> = Vec::new();
            for &c in &el.cells {
                let post = abs
                    .post(c, el.seq as usize)
                    .ok_or_else(|| Error::Graph(format!("cell {} has no valid post", c.0)))?;
                for n in abs.state_grid().box_cells(&post.cells()) {
                    if d.position(n).is_none() {
                        return Err(Error::PartitionNotInvariant { cell: n.0 });
                    }
                    let e = p.element_of(n).ok_or(Error::PartitionNotInvariant { cell: n.0 })?;
                    out.push(e as u32);
                }
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(succ.iter().all(|s| !s.is_empty()));
    WeightedDigraph::from_followers(succ)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleMean {
    pub value: f64,
    /// Node ids along the cycle, without repeating the first.
    pub cycle: Vec<u32>,
}

fn cycle_mean(g: &WeightedDigraph, cycle: &[u32]) -> f64 {
    cycle.iter().map(|&v| g.weights[v as usize]).sum::<f64>() / cycle.len() as f64
}

/// Karp's maximum cycle mean, per strongly connected component.
pub fn max_cycle_mean(g: &WeightedDigraph) -> Result<CycleMean> {
    g.check_out_edges()?;
    let comps: Vec<_> = scc(&g.succ).into_iter().filter(|c| !c.trivial).collect();
    if comps.is_empty() {
        return Err(Error::Graph("graph has no cycle".into()));
    }
    if let Some(c) = comps.iter().find(|c| c.nodes.len() > MAX_KARP_NODES) {
        return Err(Error::Guard(format!(
            "component of {} nodes exceeds Karp limit {MAX_KARP_NODES}",
            c.nodes.len()
        )));
    }
    let results = comps
        .par_iter()
        .map(|c| karp_component(g, &c.nodes))
        .collect::<Result<Vec<_>>>()?;
    Ok(results
        .into_iter()
        .fold(None::<CycleMean>, |best, r| match best {
            Some(b) if b.value >= r.value => Some(b),
            _ => Some(r),
        })
        .expect("nonempty"))
}

fn karp_component(g: &WeightedDigraph, nodes: &[u32]) -> Result<CycleMean> {
    let n = nodes.len();
    let mut local = std::collections::HashMap::with_capacity(n);
    for (k, &v) in nodes.iter().enumerate() {
        local.insert(v, k);
    }
    // predecessor lists inside the component
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &v) in nodes.iter().enumerate() {
        for w in &g.succ[v as usize] {
            if let Some(&j) = local.get(w) {
                pred[j].push(k);
            }
        }
    }
    let w: Vec<f64> = nodes.iter().map(|&v| g.weights[v as usize]).collect();
    let none = f64::NEG_INFINITY;
    let mut parent = vec![u32::MAX; (n + 1) * n];
    let mut prev = vec![none; n];
    prev[0] = 0.0;
    let mut cur = vec![none; n];
    for k in 1..=n {
        for v in 0..n {
            let mut best = none;
            let mut arg = u32::MAX;
            for &u in &pred[v] {
                let cand = prev[u] + w[u];
                if cand > best {
                    best = cand;
                    arg = u as u32;
                }
            }
            cur[v] = best;
            parent[k * n + v] = arg;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d_n = prev;
    // second pass for min over k of (D_n - D_k)/(n - k)
    let mut worst = vec![f64::INFINITY; n];
    let mut row = vec![none; n];
    row[0] = 0.0;
    let mut next = vec![none; n];
    for k in 0..n {
        for v in 0..n {
            if d_n[v] > none && row[v] > none {
                worst[v] = worst[v].min((d_n[v] - row[v]) / (n - k) as f64);
            }
        }
        for v in 0..n {
            next[v] = pred[v].iter().map(|&u| row[u] + w[u]).fold(none, f64::max);
        }
        std::mem::swap(&mut row, &mut next);
    }
    let (vstar, value) = (0..n)
        .filter(|&v| d_n[v] > none)
        .map(|v| (v, worst[v]))
        .fold((usize::MAX, none), |b, x| if x.1 > b.1 { x } else { b });
    if vstar == usize::MAX {
        return Err(Error::Graph("component without walks of full length".into()));
    }

    // walk of n edges ending at vstar, oldest node first
    let mut walk = vec![vstar];
    let mut v = vstar;
    for k in (1..=n).rev() {
        v = parent[k * n + v] as usize;
        walk.push(v);
    }
    walk.reverse();
    let mut best: Option<Vec<u32>> = None;
    let mut best_mean = none;
    let mut stack: Vec<usize> = Vec::new();
    let mut pos = vec![usize::MAX; n];
    for &x in &walk {
        if pos[x] != usize::MAX {
            let start = pos[x];
            let cyc: Vec<u32> = stack[start..].iter().map(|&y| nodes[y]).collect();
            for &y in &stack[start..] {
                pos[y] = usize::MAX;
            }
            stack.truncate(start);
            let m = cycle_mean(g, &cyc);
            if m > best_mean {
                best_mean = m;
                best = Some(cyc);
            }
        }
        pos[x] = stack.len();
        stack.push(x);
    }
    let cycle = best.ok_or_else(|| Error::Graph("no cycle on the critical walk".into()))?;
    if (best_mean - value).abs() > 1e-9 * value.abs().max(1.0) {
        return Err(Error::Graph(format!(
            "witness cycle mean {best_mean} differs from {value}"
        )));
    }
    Ok(CycleMean { value, cycle })
}

/// Maximum mean over all simple cycles, by enumeration.
pub fn brute_force_mcm(g: &WeightedDigraph) -> Result<f64> {
    if g.len() > MAX_BRUTE_NODES {
        return Err(Error::Guard(format!(
            "brute-force cycle enumeration supports at most {MAX_BRUTE_NODES} nodes"
        )));
    }
    fn go(g: &WeightedDigraph, start: usize, v: usize, sum: f64, len: usize, used: &mut [bool], best: &mut f64) {
        for &w in &g.succ[v] {
            let w = w as usize;
            if w == start {
                *best = best.max(sum / len as f64);
            } else if w > start && !used[w] {
                used[w] = true;
                go(g, start, w, sum + g.weights[w], len + 1, used, best);
                used[w] = false;
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut used = vec![false; g.len()];
    for s in 0..g.len() {
        used[s] = true;
        go(g, s, s, g.weights[s], 1, &mut used, &mut best);
        used[s] = false;
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::Graph("graph has no cycle".into()));
    }
    Ok(best)
}

/// Max over walks of `tau` nodes of the summed weights of the first `tau - 1`.
pub fn max_path_weight(g: &WeightedDigraph, tau: usize) -> f64 {
    let n = g.len();
    let mut f = vec![0.0f64; n];
    let mut next = vec![f64::NEG_INFINITY; n];
    for _ in 1..tau {
        next.fill(f64::NEG_INFINITY);
        for u in 0..n {
            if f[u] == f64::NEG_INFINITY {
                continue;
            }
            let val = f[u] + g.weights[u];
            for &v in &g.succ[u] {
                let v = v as usize;
                if val > next[v] {
                    next[v] = val;
                }
            }
        }
        std::mem::swap(&mut f, &mut next);
    }
    f.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExpansionCheck {
    /// min over spanning sets of N(J)
    pub exhaustive: u128,
    /// N(W_tau(G))
    pub graph: u128,
}

impl ExpansionCheck {
    pub fn log2(&self) -> f64 {
        (self.exhaustive as f64).log2()
    }
}

/// N(W_tau(G)) for the graph whose successor sets are `table`.
pub fn walk_expansion_number(table: &[Vec<u32>], tau: usize) -> u128 {
    let n = table.len();
    let mut f = vec![1u128; n];
    for _ in 1..tau {
        let mut next = vec![0u128; n];
        for u in 0..n {
            let val = f[u] * table[u].len() as u128;
            for &v in &table[u] {
                next[v as usize] = next[v as usize].max(val);
            }
        }
        f = next;
    }
    n as u128 * f.into_iter().max().unwrap_or(0)
}

fn check_table(a_size: usize, table: &[Vec<u32>], tau: usize) -> Result<()> {
    if tau == 0 {
        return Err(Error::Guard("tau must be at least 1".into()));
    }
    if table.len() != a_size || table.iter().flatten().any(|&j| j as usize >= a_size) {
        return Err(Error::Graph("successor table does not match the element count".into()));
    }
    if table.iter().any(Vec::is_empty) {
        return Err(Error::Graph("element without successors".into()));
    }
    Ok(())
}

/// Smallest expansion number over all spanning sets, by exhaustive search over
/// sequence trees: every prefix picks any successor set containing `D` of its
/// last element.
pub fn expansion_oracle(a_size: usize, table: &[Vec<u32>], tau: usize) -> Result<ExpansionCheck> {
    if a_size > MAX_ORACLE_ELEMENTS || tau > MAX_ORACLE_TAU {
        return Err(Error::Guard(format!(
            "expansion oracle supports at most {MAX_ORACLE_ELEMENTS} elements and tau {MAX_ORACLE_TAU}"
        )));
    }
    check_table(a_size, table, tau)?;
    let masks: Vec<u32> = table.iter().map(|s| s.iter().fold(0, |m, &j| m | 1 << j)).collect();
    // min over subtrees rooted at `a` with `r` further levels
    fn subtree(a: usize, r: usize, a_size: usize, masks: &[u32]) -> u128 {
        if r == 0 {
            return 1;
        }
        (0u32..1 << a_size)
            .filter(|&c| c & masks[a] == masks[a])
            .map(|c| {
                let worst = (0..a_size)
                    .filter(|&j| c >> j & 1 == 1)
                    .map(|j| subtree(j, r - 1, a_size, masks))
                    .max()
                    .unwrap_or(0);
                c.count_ones() as u128 * worst
            })
            .min()
            .expect("the full set qualifies")
    }
    let exhaustive = a_size as u128
        * (0..a_size)
            .map(|a| subtree(a, tau - 1, a_size, &masks))
            .max()
            .unwrap_or(0);
    let graph = walk_expansion_number(table, tau);
    if exhaustive != graph {
        return Err(Error::Graph(format!(
            "exhaustive expansion number {exhaustive} differs from walk count {graph}"
        )));
    }
    Ok(ExpansionCheck { exhaustive, graph })
}

/// Smallest N(J) over literally every subset J of sequences of length `tau`.
pub fn expansion_brute_force(a_size: usize, table: &[Vec<u32>], tau: usize) -> Result<u128> {
    check_table(a_size, table, tau)?;
    let total = a_size.checked_pow(tau as u32).unwrap_or(usize::MAX);
    if total > MAX_FLAT_SEQUENCES {
        return Err(Error::Guard(format!(
            "flat search supports at most {MAX_FLAT_SEQUENCES} sequences, got {total}"
        )));
    }
    let seqs: Vec<Vec<usize>> = (0..total)
        .map(|mut k| {
            let mut s = vec![0; tau];
            for t in (0..tau).rev() {
                s[t] = k % a_size;
                k /= a_size;
            }
            s
        })
        .collect();
    let mut best: Option<u128> = None;
    for j in 1u64..1 << total {
        let chosen: Vec<&Vec<usize>> = (0..total).filter(|&i| j >> i & 1 == 1).map(|i| &seqs[i]).collect();
        let next = |prefix: &[usize]| -> Vec<usize> {
            let mut out: Vec<usize> = chosen
                .iter()
                .filter(|s| s.starts_with(prefix))
                .map(|s| s[prefix.len()])
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        };
        let firsts = next(&[]);
        if firsts.len() != a_size {
            continue;
        }
        let mut spanning = true;
        let mut n_j = 0u128;
        for s in &chosen {
            let mut prod = firsts.len() as u128;
            for t in 0..tau.saturating_sub(1) {
                let p = next(&s[..=t]);
                if !table[s[t]].iter().all(|&d| p.contains(&(d as usize))) {
                    spanning = false;
                    break;
                }
                prod *= p.len() as u128;
            }
            if !spanning {
                break;
            }
            n_j = n_j.max(prod);
        }
        if spanning {
            best = Some(best.map_or(n_j, |b| b.min(n_j)));
        }
    }
    best.ok_or_else(|| Error::Graph("no spanning set".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UncBound {
    pub w_star: f64,
    pub cycle: Vec<u32>,
    pub nodes: usize,
    pub edges: usize,
    pub max_weight: f64,
}

pub fn unc_upper_bound(abs: &Abstraction, d: &DetController, p: &Partition) -> Result<UncBound> {
    let g = build_weighted_graph(abs, d, p)?;
    bound_of(&g)
}

pub fn bound_of(g: &WeightedDigraph) -> Result<UncBound> {
    let m = max_cycle_mean(g)?;
    Ok(UncBound {
        w_star: m.value,
        cycle: m.cycle,
        nodes: g.len(),
        edges: g.n_edges(),
        max_weight: g.max_weight(),
    })
}

/// `element,successors,weight` rows.
pub fn write_weights_csv<W: Write>(g: &WeightedDigraph, mut w: W) -> Result<()> {
    writeln!(w, "element,successors,weight")?;
    for i in 0..g.len() {
        writeln!(w, "{i},{},{}", g.succ[i].len(), g.weights[i])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinization::{coarse_partition, determinize, Determinizer, PartitionMode};
    use crate::geometry::CoverMode;
    use crate::synthesis::{build_abstraction, invariant_controller};
    use crate::systems::{example1, uncertain_linear};
    use proptest::prelude::*;

    fn g(succ: Vec<Vec<u32>>, w: Vec<f64>) -> WeightedDigraph {
        WeightedDigraph::new(succ, w).unwrap()
    }

    #[test]
    fn cycle_mean_small_cases() {
        let one = g(vec![vec![0]], vec![3.0]);
        assert_eq!(max_cycle_mean(&one).unwrap().value, 3.0);
        assert_eq!(brute_force_mcm(&one).unwrap(), 3.0);
        let two = g(vec![vec![1], vec![0]], vec![1.0, 3.0]);
        let m = max_cycle_mean(&two).unwrap();
        assert!((m.value - 2.0).abs() < 1e-12);
        assert_eq!(m.cycle.len(), 2);
        let disjoint = g(
            vec![vec![1], vec![0], vec![3], vec![2]],
            vec![1.0, 2.0, 2.0, 3.0],
        );
        assert_eq!(brute_force_mcm(&disjoint).unwrap(), 2.5);
        let m = max_cycle_mean(&disjoint).unwrap();
        assert_eq!(m.value, 2.5);
        let mut c = m.cycle.clone();
        c.sort_unstable();
        assert_eq!(c, vec![2, 3]);
    }

    #[test]
    fn dead_end_is_rejected() {
        let dead = g(vec![vec![1], vec![]], vec![0.0, 0.0]);
        assert!(max_cycle_mean(&dead).is_err());
        assert!(brute_force_mcm(&g(vec![vec![]; 13], vec![0.0; 13])).is_err());
    }

    #[test]
    fn path_weights() {
        let zero = g(vec![vec![1], vec![0]], vec![0.0, 0.0]);
        for tau in 1..6 {
            assert_eq!(max_path_weight(&zero, tau), 0.0);
        }
        let one = g(vec![vec![0]], vec![1.0]);
        assert_eq!(max_path_weight(&one, 5), 4.0);
        assert_eq!(max_path_weight(&one, 1), 0.0);
    }

    #[test]
    fn expansion_small_cases() {
        let chain = vec![vec![1], vec![2], vec![0]];
        for tau in 1..=4 {
            let e = expansion_oracle(3, &chain, tau).unwrap();
            assert_eq!(e.exhaustive, 3);
        }
        let full = vec![vec![0, 1], vec![0, 1]];
        for tau in 1..=4 {
            let e = expansion_oracle(2, &full, tau).unwrap();
            assert!((e.log2() - tau as f64).abs() < 1e-12);
            assert_eq!(expansion_brute_force(2, &full, tau).unwrap(), e.exhaustive);
        }
        assert!(expansion_oracle(5, &vec![vec![0]; 5], 2).is_err());
    }

    fn unc_partition(eta: f64) -> (crate::synthesis::Abstraction, DetController, Partition) {
        let p = uncertain_linear(eta);
        let abs = build_abstraction(&p, &p.eta_s, &p.eta_i, 1, CoverMode::Interior).unwrap();
        let d = determinize(Determinizer::MinSucc, &invariant_controller(&abs), &abs, None).unwrap();
        let part = coarse_partition(&d, PartitionMode::ByCell).unwrap();
        (abs, d, part)
    }

    #[test]
    fn uncertain_linear_weights() {
        let (abs, d, part) = unc_partition(0.2);
        let g = build_weighted_graph(&abs, &d, &part).unwrap();
        assert_eq!(g.len(), 109);
        for i in 0..g.len() {
            assert_eq!(g.weight(i).exp2().round().log2(), g.weight(i));
        }
        let b = bound_of(&g).unwrap();
        assert!(b.w_star >= 0.0 && b.w_star <= (g.len() as f64).log2());
        assert!((b.w_star - 3.3219).abs() <= 0.5, "{}", b.w_star);
        assert!((cycle_mean(&g, &b.cycle) - b.w_star).abs() < 1e-9);
        // long walks approach the cycle mean
        let n = g.len() as f64;
        let tau = 1000;
        let gap = (max_path_weight(&g, tau) / tau as f64 - b.w_star).abs();
        assert!(gap <= (n * n.log2() + n * g.max_weight()) / tau as f64);
    }

    #[test]
    fn singleton_images_bound_the_deterministic_entropy() {
        let p = example1();
        let abs = build_abstraction(&p, &p.eta_s, &p.eta_i, 1, CoverMode::Interior).unwrap();
        let d = determinize(Determinizer::MaxFreq, &invariant_controller(&abs), &abs, None).unwrap();
        let part = coarse_partition(&d, PartitionMode::ByInput).unwrap();
        let b = unc_upper_bound(&abs, &d, &part).unwrap();
        assert!(b.w_star >= 1.2716 - 1e-4, "{}", b.w_star);
    }

    #[test]
    fn exports() {
        let two = g(vec![vec![1], vec![0]], vec![1.0, 3.0]);
        let mut dot = Vec::new();
        two.write_dot(&mut dot).unwrap();
        assert_eq!(String::from_utf8(dot).unwrap().matches("->").count(), 2);
        let mut csv = Vec::new();
        write_weights_csv(&two, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }

    fn random_graph(max_nodes: usize) -> impl Strategy<Value = WeightedDigraph> {
        (1..=max_nodes).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::collection::btree_set(0..n as u32, 1..=n), n),
                proptest::collection::vec(0.0f64..4.0, n),
            )
                .prop_map(|(succ, w)| g(succ.into_iter().map(|s| s.into_iter().collect()).collect(), w))
        })
    }

    fn random_table(a: usize) -> impl Strategy<Value = Vec<Vec<u32>>> {
        proptest::collection::vec(proptest::collection::btree_set(0..a as u32, 1..=a), a)
            .prop_map(|t| t.into_iter().map(|s| s.into_iter().collect()).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn karp_matches_enumeration(graph in random_graph(8)) {
            let k = max_cycle_mean(&graph).unwrap();
            let b = brute_force_mcm(&graph).unwrap();
            prop_assert!((k.value - b).abs() <= 1e-12, "{} vs {}", k.value, b);
            prop_assert!((cycle_mean(&graph, &k.cycle) - k.value).abs() <= 1e-12);
        }

        #[test]
        fn follower_weights_stay_in_range(table in random_table(8)) {
            let graph = WeightedDigraph::from_followers(table).unwrap();
            let m = max_cycle_mean(&graph).unwrap().value;
            prop_assert!(m >= 0.0 && m <= 3.0 + 1e-12);
        }

        #[test]
        fn long_walks_approach_cycle_mean(graph in random_graph(10)) {
            let m = max_cycle_mean(&graph).unwrap().value;
            let n = graph.len() as f64;
            let tau = 1000;
            let gap = (max_path_weight(&graph, tau) / tau as f64 - m).abs();
            prop_assert!(gap <= (n * n.log2() + n * graph.max_weight()) / tau as f64 + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn expansion_identity_three_elements(table in random_table(3)) {
            let e = expansion_oracle(3, &table, 3).unwrap();
            prop_assert_eq!(e.exhaustive, e.graph);
            prop_assert_eq!(expansion_brute_force(3, &table, 2).unwrap(), walk_expansion_number(&table, 2));
        }

        #[test]
        fn expansion_identity_four_elements(table in random_table(4), tau in 1usize..=4) {
            let e = expansion_oracle(4, &table, tau).unwrap();
            prop_assert_eq!(e.exhaustive, e.graph);
        }
    }
}
