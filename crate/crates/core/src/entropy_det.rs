//! Upper bound for deterministic systems: labelled transition graph over the
//! fine cells, right-resolving presentation per strongly connected component,
//! and the Perron root of its edge-count matrix.

use std::collections::HashMap;
use std::io::Write;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::determinization::{DetController, Partition};
use crate::error::{Error, Result};
use crate::geometry::CellId;
use crate::synthesis::Abstraction;

/// Node cap for the subset construction.
pub const MAX_SUBSET_NODES: usize = 1_000_000;
pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 100_000;
/// Guards of [`count_words`].
pub const COUNT_MAX_NODES: usize = 64;
pub const COUNT_MAX_LEN: usize = 24;

/// Successors of each controller domain cell, as positions in the domain.
pub fn transition_matrix(abs: &Abstraction, d: &DetController) -> Result<Vec<Vec<u32>>> {
    d.domain()
        .par_iter()
        .map(|&c| {
            let s = d.choice(c).expect("domain cell") as usize;
            let post = abs
                .post(c, s as usize)
                .ok_or_else(|| Error::Graph(format!("cell {} has no valid post", c.0)))?;
            abs.state_grid()
                .box_cells(&post.cells())
                .map(|n| {
                    d.position(n)
                        .map(|p| p as u32)
                        .ok_or(Error::PartitionNotInvariant { cell: n.0 })
                })
                .collect()
        })
        .collect()
}

/// Graph on the fine cells; every edge out of a node carries that node's label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDigraph {
    nodes: Vec<CellId>,
    succ: Vec<Vec<u32>>,
    labels: Vec<u32>,
}

impl LabeledDigraph {
    pub fn new(nodes: Vec<CellId>, succ: Vec<Vec<u32>>, labels: Vec<u32>) -> Result<Self> {
        let n = nodes.len();
        if succ.len() != n || labels.len() != n {
            return Err(Error::Graph("node, successor and label counts differ".into()));
        }
        if succ.iter().flatten().any(|&j| j as usize >= n) {
            return Err(Error::Graph("edge to a missing node".into()));
        }
        Ok(Self { nodes, succ, labels })
    }

    /// Γ with labels taken from the partition.
    pub fn from_controller(abs: &Abstraction, d: &DetController, p: &Partition) -> Result<Self> {
        let succ = transition_matrix(abs, d)?;
        let labels = d
            .domain()
            .iter()
            .map(|&c| {
                p.element_of(c)
                    .map(|e| e as u32)
                    .ok_or_else(|| Error::Graph(format!("cell {} is in no element", c.0)))
            })
            .collect::<Result<_>>()?;
        Self::new(d.domain().to_vec(), succ, labels)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[CellId] {
        &self.nodes
    }

    pub fn successors(&self, i: usize) -> &[u32] {
        &self.succ[i]
    }

    pub fn adjacency(&self) -> &[Vec<u32>] {
        &self.succ
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn n_edges(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn write_dot<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "digraph G {{")?;
        for (i, c) in self.nodes.iter().enumerate() {
            writeln!(w, "  n{i} [label=\"B{}\"];", c.0)?;
        }
        for (i, s) in self.succ.iter().enumerate() {
            for j in s {
                writeln!(w, "  n{i} -> n{j} [label=\"{}\"];", self.labels[i])?;
            }
        }
        writeln!(w, "}}")?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    pub nodes: Vec<u32>,
    /// A single node without a self-loop.
    pub trivial: bool,
}

/// Tarjan's algorithm, iterative. Components come out in reverse topological
/// order (sinks first); nodes within a component are sorted.
pub fn scc(adj: &[Vec<u32>]) -> Vec<Component> {
    const UNSEEN: u32 = u32::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut call: Vec<(u32, usize)> = Vec::new();
    let mut next = 0u32;
    let mut out = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root as u32, 0));
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            let vi = v as usize;
            if *edge == 0 && index[vi] == UNSEEN {
                index[vi] = next;
                low[vi] = next;
                next += 1;
                stack.push(v);
                on_stack[vi] = true;
            }
            if let Some(&w) = adj[vi].get(*edge) {
                *edge += 1;
                let wi = w as usize;
                if index[wi] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[wi] {
                    low[vi] = low[vi].min(index[wi]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                let p = parent as usize;
                low[p] = low[p].min(low[vi]);
            }
            if low[vi] == index[vi] {
                let mut nodes = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w as usize] = false;
                    nodes.push(w);
                    if w == v {
                        break;
                    }
                }
                nodes.sort_unstable();
                let trivial = nodes.len() == 1 && !adj[vi].contains(&v);
                out.push(Component { nodes, trivial });
            }
        }
    }
    out
}

/// Nonnegative integer matrix stored by rows as `(column, count)` pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountMatrix {
    rows: Vec<Vec<(u32, u64)>>,
}

impl CountMatrix {
    pub fn from_dense(m: &[Vec<u64>]) -> Self {
        let rows = m
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0)
                    .map(|(j, &v)| (j as u32, v))
                    .collect()
            })
            .collect();
        Self { rows }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c as usize == j)
            .map_or(0, |&(_, v)| v)
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        let n = self.n();
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0; n];
                for &(j, v) in r {
                    d[j as usize] = v;
                }
                d
            })
            .collect()
    }

    /// `[a b c; d e f]` layout.
    pub fn bracket(&self) -> String {
        let rows: Vec<String> = self
            .to_dense()
            .iter()
            .map(|r| r.iter().map(u64::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        format!("[{}]", rows.join("; "))
    }
}

/// Subset-construction graph; node `k` is a set of positions in the source graph.
#[derive(Clone, Debug, PartialEq)]
pub struct RightResolvingGraph {
    pub nodes: Vec<Vec<u32>>,
    pub edges: Vec<(u32, u32, u32)>,
}

impl RightResolvingGraph {
    pub fn is_right_resolving(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.edges.iter().all(|&(a, _, l)| seen.insert((a, l)))
    }

    pub fn count_matrix(&self) -> CountMatrix {
        let mut dense: Vec<HashMap<u32, u64>> = vec![HashMap::new(); self.nodes.len()];
        for &(a, b, _) in &self.edges {
            *dense[a as usize].entry(b).or_default() += 1;
        }
        let rows = dense
            .into_iter()
            .map(|m| {
                let mut r: Vec<(u32, u64)> = m.into_iter().collect();
                r.sort_unstable();
                r
            })
            .collect();
        CountMatrix { rows }
    }

    pub fn write_dot<W: Write>(&self, g: &LabeledDigraph, mut w: W) -> Result<()> {
        writeln!(w, "digraph Gbar {{")?;
        for (k, set) in self.nodes.iter().enumerate() {
            let names: Vec<String> = set.iter().map(|&i| format!("B{}", g.nodes[i as usize].0)).collect();
            writeln!(w, "  r{k} [label=\"{{{}}}\"];", names.join(","))?;
        }
        for &(a, b, l) in &self.edges {
            writeln!(w, "  r{a} -> r{b} [label=\"{l}\"];")?;
        }
        writeln!(w, "}}")?;
        Ok(())
    }
}

/// Right-resolving presentation of the labelled subgraph on `component`.
///
/// Seeds are the label followers of single vertices; the closure adds, for each
/// node and label, the set of successors of its members carrying that label.
/// Only nodes reachable from a cycle are kept.
pub fn right_resolve(g: &LabeledDigraph, component: &[u32]) -> Result<(RightResolvingGraph, CountMatrix)> {
    let n = g.len();
    let mut inside = vec![false; n];
    for &v in component {
        inside[v as usize] = true;
    }
    let succ = |v: u32| g.succ[v as usize].iter().copied().filter(|&w| inside[w as usize]);
    if !component.iter().any(|&v| succ(v).next().is_some()) {
        return Err(Error::NoEdges);
    }

    let mut ids: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut nodes: Vec<Vec<u32>> = Vec::new();
    let mut edges: Vec<(u32, u32, u32)> = Vec::new();
    let mut stamp = vec![u32::MAX; n];
    let mut round = 0u32;
    let mut follower = |members: &mut dyn Iterator<Item = u32>| -> Vec<u32> {
        round += 1;
        let mut out = Vec::new();
        for v in members {
            for w in succ(v) {
                if stamp[w as usize] != round {
                    stamp[w as usize] = round;
                    out.push(w);
                }
            }
        }
        out.sort_unstable();
        out
    };
    let mut intern = |set: Vec<u32>, nodes: &mut Vec<Vec<u32>>| -> Result<u32> {
        if let Some(&id) = ids.get(&set) {
            return Ok(id);
        }
        if nodes.len() >= MAX_SUBSET_NODES {
            return Err(Error::SubsetLimit {
                limit: MAX_SUBSET_NODES,
            });
        }
        let id = nodes.len() as u32;
        ids.insert(set.clone(), id);
        nodes.push(set);
        Ok(id)
    };

    for &v in component {
        let f = follower(&mut std::iter::once(v));
        if !f.is_empty() {
            intern(f, &mut nodes)?;
        }
    }
    let mut done = 0;
    let mut by_label: Vec<(u32, u32)> = Vec::new();
    while done < nodes.len() {
        by_label.clear();
        by_label.extend(nodes[done].iter().map(|&v| (g.labels[v as usize], v)));
        by_label.sort_unstable();
        let mut i = 0;
        while i < by_label.len() {
            let label = by_label[i].0;
            let j = i + by_label[i..].iter().take_while(|x| x.0 == label).count();
            let f = follower(&mut by_label[i..j].iter().map(|x| x.1));
            if !f.is_empty() {
                let to = intern(f, &mut nodes)?;
                edges.push((done as u32, to, label));
            }
            i = j;
        }
        done += 1;
    }

    // keep the part reachable from a cycle
    let mut adj = vec![Vec::new(); nodes.len()];
    for &(a, b, _) in &edges {
        adj[a as usize].push(b);
    }
    let mut keep = vec![false; nodes.len()];
    let mut queue: Vec<u32> = Vec::new();
    for c in scc(&adj).into_iter().filter(|c| !c.trivial) {
        for v in c.nodes {
            keep[v as usize] = true;
            queue.push(v);
        }
    }
    while let Some(v) = queue.pop() {
        for &w in &adj[v as usize] {
            if !keep[w as usize] {
                keep[w as usize] = true;
                queue.push(w);
            }
        }
    }
    let mut renum = vec![u32::MAX; nodes.len()];
    let mut kept = Vec::new();
    for (i, set) in nodes.into_iter().enumerate() {
        if keep[i] {
            renum[i] = kept.len() as u32;
            kept.push(set);
        }
    }
    let edges: Vec<(u32, u32, u32)> = edges
        .into_iter()
        .filter(|&(a, _, _)| keep[a as usize])
        .map(|(a, b, l)| (renum[a as usize], renum[b as usize], l))
        .collect();
    let rr = RightResolvingGraph { nodes: kept, edges };
    debug_assert!(rr.is_right_resolving());
    let r = rr.count_matrix();
    Ok((rr, r))
}

/// Perron root by power iteration on `R + I`, block by block over the strongly
/// connected components of the matrix graph.
pub fn spectral_radius(r: &CountMatrix) -> Result<f64> {
    let adj: Vec<Vec<u32>> = r.rows.iter().map(|row| row.iter().map(|&(j, _)| j).collect()).collect();
    let mut best = 0.0f64;
    let mut local = vec![u32::MAX; r.n()];
    for comp in scc(&adj).into_iter().filter(|c| !c.trivial) {
        for (k, &v) in comp.nodes.iter().enumerate() {
            local[v as usize] = k as u32;
        }
        let rows: Vec<Vec<(usize, f64)>> = comp
            .nodes
            .iter()
            .map(|&v| {
                r.rows[v as usize]
                    .iter()
                    .filter(|(j, _)| local[*j as usize] != u32::MAX)
                    .map(|&(j, c)| (local[j as usize] as usize, c as f64))
                    .collect()
            })
            .collect();
        best = best.max(perron_block(&rows)?);
        for &v in &comp.nodes {
            local[v as usize] = u32::MAX;
        }
    }
    Ok(best)
}

fn perron_block(rows: &[Vec<(usize, f64)>]) -> Result<f64> {
    let n = rows.len();
    let mut x = vec![1.0f64; n];
    let mut y = vec![0.0f64; n];
    for _ in 0..POWER_MAX_ITER {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            y[i] = x[i] + rows[i].iter().map(|&(j, c)| c * x[j]).sum::<f64>();
            let q = y[i] / x[i];
            lo = lo.min(q);
            hi = hi.max(q);
        }
        if hi - lo <= POWER_TOL * hi {
            return Ok(0.5 * (lo + hi) - 1.0);
        }
        let m = y.iter().copied().fold(0.0, f64::max);
        for i in 0..n {
            x[i] = y[i] / m;
        }
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITER,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentBound {
    pub cells: usize,
    pub rr_nodes: usize,
    pub rr_edges: usize,
    pub rho: f64,
    pub log2_rho: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetBound {
    /// max over nontrivial components of log2 rho
    pub h_ba: f64,
    /// `h_ba / tau`
    pub bound: f64,
    pub gamma_edges: usize,
    pub components: usize,
    pub nontrivial: Vec<ComponentBound>,
}

/// Per-component results, with the presentations kept for export.
pub struct DetAnalysis {
    pub graph: LabeledDigraph,
    pub presentations: Vec<(RightResolvingGraph, CountMatrix)>,
    pub bound: DetBound,
}

pub fn det_upper_bound(abs: &Abstraction, d: &DetController, p: &Partition) -> Result<DetBound> {
    analyze(abs, d, p).map(|a| a.bound)
}

pub fn analyze(abs: &Abstraction, d: &DetController, p: &Partition) -> Result<DetAnalysis> {
    let g = LabeledDigraph::from_controller(abs, d, p)?;
    analyze_graph(g, d.tau())
}

pub fn analyze_graph(g: LabeledDigraph, tau: usize) -> Result<DetAnalysis> {
    let comps = scc(&g.succ);
    let mut nontrivial = Vec::new();
    let mut presentations = Vec::new();
    let mut h_ba = 0.0f64;
    for c in comps.iter().filter(|c| !c.trivial) {
        let (rr, r) = right_resolve(&g, &c.nodes)?;
        let rho = spectral_radius(&r)?;
        let log2_rho = if rho > 0.0 { rho.log2().max(0.0) } else { 0.0 };
        h_ba = h_ba.max(log2_rho);
        nontrivial.push(ComponentBound {
            cells: c.nodes.len(),
            rr_nodes: rr.nodes.len(),
            rr_edges: rr.edges.len(),
            rho,
            log2_rho,
        });
        presentations.push((rr, r));
    }
    let bound = DetBound {
        h_ba,
        bound: h_ba / tau as f64,
        gamma_edges: g.n_edges(),
        components: comps.len(),
        nontrivial,
    };
    Ok(DetAnalysis {
        graph: g,
        presentations,
        bound,
    })
}

/// `component,cells,rr_nodes,rr_edges,rho,log2_rho` rows.
pub fn write_components_csv<W: Write>(b: &DetBound, mut w: W) -> Result<()> {
    writeln!(w, "component,cells,rr_nodes,rr_edges,rho,log2_rho")?;
    for (k, c) in b.nontrivial.iter().enumerate() {
        writeln!(w, "{k},{},{},{},{},{}", c.cells, c.rr_nodes, c.rr_edges, c.rho, c.log2_rho)?;
    }
    Ok(())
}

/// Number of distinct label words of length `n` read along paths of `g`.
pub fn count_words(g: &LabeledDigraph, n: usize) -> Result<BigUint> {
    if g.len() > COUNT_MAX_NODES || n > COUNT_MAX_LEN {
        return Err(Error::Guard(format!(
            "count_words supports at most {COUNT_MAX_NODES} nodes and length {COUNT_MAX_LEN}"
        )));
    }
    if n == 0 {
        return Err(Error::Guard("word length must be at least 1".into()));
    }
    let mut label_mask: HashMap<u32, u64> = HashMap::new();
    for (i, &l) in g.labels.iter().enumerate() {
        *label_mask.entry(l).or_default() |= 1 << i;
    }
    let mut label_masks: Vec<u64> = label_mask.into_values().collect();
    label_masks.sort_unstable();
    let succ_mask: Vec<u64> = g
        .succ
        .iter()
        .map(|s| s.iter().fold(0u64, |m, &j| m | 1 << j))
        .collect();
    // state: set of nodes where the word read so far may end
    let mut layer: HashMap<u64, BigUint> = label_masks.iter().map(|&m| (m, BigUint::from(1u32))).collect();
    for _ in 1..n {
        let mut next: HashMap<u64, BigUint> = HashMap::new();
        for (set, count) in layer {
            let mut reach = 0u64;
            let mut bits = set;
            while bits != 0 {
                reach |= succ_mask[bits.trailing_zeros() as usize];
                bits &= bits - 1;
            }
            for &m in &label_masks {
                let to = reach & m;
                if to != 0 {
                    *next.entry(to).or_default() += &count;
                }
            }
        }
        layer = next;
    }
    Ok(layer.into_values().sum())
}
