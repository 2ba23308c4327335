//! Picking one input sequence per cell, and grouping cells into the coarse
//! partition whose entropy gets bounded.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellId, UniformGrid};
use crate::synthesis::{Abstraction, MultiController};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Determinizer {
    /// Greedy: the sequence admissible in most undecided cells wins.
    MaxFreq,
    /// Per cell, the sequence of smallest Euclidean norm.
    MinNorm,
    /// Per cell, the input with the fewest successor cells (tau = 1 only).
    MinSucc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    /// One element per chosen sequence.
    ByInput,
    /// Each by-input group split into face-connected components.
    ByInputConnected,
    /// Every cell its own element.
    ByCell,
}

macro_rules! kebab_enum {
    ($t:ty, $($v:ident => $s:literal),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$v => $s),+ })
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok(Self::$v),)+
                    _ => Err(Error::Config(format!(
                        "unknown value `{s}`, expected one of: {}",
                        [$($s),+].join(", ")
                    ))),
                }
            }
        }
    };
}

kebab_enum!(Determinizer, MaxFreq => "maxfreq", MinNorm => "minnorm", MinSucc => "minsucc");
kebab_enum!(PartitionMode, ByInput => "by-input", ByInputConnected => "by-input-connected", ByCell => "by-cell");

/// One sequence id per domain cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DetController {
    state_grid: UniformGrid,
    tau: usize,
    domain: Vec<CellId>,
    choice: Vec<u32>,
    pos: Vec<u32>,
}

impl DetController {
    fn new(c: &MultiController, choice: Vec<u32>) -> Self {
        let mut pos = vec![NONE; c.state_grid().len()];
        for (i, cell) in c.domain().iter().enumerate() {
            pos[cell.0] = i as u32;
        }
        Self {
            state_grid: c.state_grid().clone(),
            tau: c.tau(),
            domain: c.domain().to_vec(),
            choice,
            pos,
        }
    }

    pub fn state_grid(&self) -> &UniformGrid {
        &self.state_grid
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn domain(&self) -> &[CellId] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    pub fn position(&self, cell: CellId) -> Option<usize> {
        match self.pos.get(cell.0) {
            Some(&p) if p != NONE => Some(p as usize),
            _ => None,
        }
    }

    pub fn choice(&self, cell: CellId) -> Option<u32> {
        self.position(cell).map(|p| self.choice[p])
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, u32)> + '_ {
        self.domain.iter().copied().zip(self.choice.iter().copied())
    }

    /// Every choice must be admissible in the source controller.
    pub fn check_selection(&self, c: &MultiController) -> Result<()> {
        if self.domain != c.domain() {
            return Err(Error::Graph("domains differ".into()));
        }
        for (cell, s) in self.iter() {
            let ok = c.admissible(cell).is_some_and(|a| a.binary_search(&s).is_ok());
            if !ok {
                return Err(Error::Graph(format!("cell {}: sequence {s} is not admissible", cell.0)));
            }
        }
        Ok(())
    }
}

pub fn determinize(
    kind: Determinizer,
    c: &MultiController,
    abs: &Abstraction,
    seed: Option<u64>,
) -> Result<DetController> {
    match kind {
        Determinizer::MaxFreq => determinize_maxfreq(c),
        Determinizer::MinNorm => determinize_minnorm(c, abs),
        Determinizer::MinSucc => determinize_minsucc(c, abs, seed),
    }
}

pub fn determinize_maxfreq(c: &MultiController) -> Result<DetController> {
    if c.is_empty() {
        return Err(Error::EmptyController);
    }
    let n_seqs = c.iter().flat_map(|(_, a)| a.iter()).max().map_or(0, |&m| m as usize + 1);
    let adm: Vec<&[u32]> = c.iter().map(|(_, a)| a).collect();
    let mut choice = vec![NONE; adm.len()];
    let mut undecided: Vec<usize> = (0..adm.len()).collect();
    let mut freq = vec![0usize; n_seqs];
    while !undecided.is_empty() {
        freq.iter_mut().for_each(|f| *f = 0);
        for &i in &undecided {
            for &s in adm[i] {
                freq[s as usize] += 1;
            }
        }
        // first maximum wins, which is the lowest id
        let best = (0..n_seqs).fold(0, |b, s| if freq[s] > freq[b] { s } else { b }) as u32;
        undecided.retain(|&i| {
            if adm[i].binary_search(&best).is_ok() {
                choice[i] = best;
                false
            } else {
                true
            }
        });
    }
    Ok(DetController::new(c, choice))
}

pub fn determinize_minnorm(c: &MultiController, abs: &Abstraction) -> Result<DetController> {
    if c.is_empty() {
        return Err(Error::EmptyController);
    }
    let norm = |s: u32| -> f64 { abs.sequence_values(s as usize).iter().map(|v| v * v).sum() };
    let choice = c
        .iter()
        .map(|(_, a)| {
            // strict comparison keeps the lowest id on ties
            a.iter()
                .copied()
                .fold((NONE, f64::INFINITY), |(bs, bn), s| {
                    let n = norm(s);
                    if n < bn {
                        (s, n)
                    } else {
                        (bs, bn)
                    }
                })
                .0
        })
        .collect();
    Ok(DetController::new(c, choice))
}

pub fn determinize_minsucc(
    c: &MultiController,
    abs: &Abstraction,
    seed: Option<u64>,
) -> Result<DetController> {
    if c.is_empty() {
        return Err(Error::EmptyController);
    }
    if abs.tau() != 1 {
        return Err(Error::Config("minsucc needs tau = 1".into()));
    }
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut ties = Vec::new();
    let mut choice = Vec::with_capacity(c.len());
    for (cell, adm) in c.iter() {
        let size = |s: u32| abs.post(cell, s as usize).map_or(usize::MAX, |p| p.volume());
        let best = adm.iter().map(|&s| size(s)).min().unwrap_or(usize::MAX);
        ties.clear();
        ties.extend(adm.iter().copied().filter(|&s| size(s) == best));
        let pick = match rng.as_mut() {
            Some(r) => *ties.choose(r).expect("nonempty admissible set"),
            None => ties[0],
        };
        choice.push(pick);
    }
    Ok(DetController::new(c, choice))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Element {
    pub cells: Vec<CellId>,
    pub seq: u32,
}

/// Partition of the controller domain into elements sharing one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    elements: Vec<Element>,
    cell_to_element: Vec<u32>,
}

impl Partition {
    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element_of(&self, cell: CellId) -> Option<usize> {
        match self.cell_to_element.get(cell.0) {
            Some(&e) if e != NONE => Some(e as usize),
            _ => None,
        }
    }

    /// Disjointness, coverage of the domain and one sequence per element.
    pub fn check(&self, d: &DetController) -> Result<()> {
        let mut seen = vec![false; self.cell_to_element.len()];
        for (e, el) in self.elements.iter().enumerate() {
            if el.cells.is_empty() {
                return Err(Error::Graph(format!("element {e} is empty")));
            }
            for &c in &el.cells {
                if std::mem::replace(&mut seen[c.0], true) {
                    return Err(Error::Graph(format!("cell {} lies in two elements", c.0)));
                }
                if d.choice(c) != Some(el.seq) {
                    return Err(Error::Graph(format!("cell {} disagrees with element {e}", c.0)));
                }
                if self.element_of(c) != Some(e) {
                    return Err(Error::Graph(format!("cell {} has a stale element index", c.0)));
                }
            }
        }
        let covered = seen.iter().filter(|&&s| s).count();
        if covered != d.len() {
            return Err(Error::Graph(format!("{covered} of {} domain cells covered", d.len())));
        }
        Ok(())
    }

    /// Every cell keeps all enclosures inside Q under its element's sequence.
    pub fn check_invariance(&self, abs: &Abstraction) -> Result<()> {
        for el in &self.elements {
            if let Some(c) = el.cells.iter().find(|&&c| !abs.stays_in_q(c, el.seq as usize)) {
                return Err(Error::Graph(format!("cell {} leaves Q under sequence {}", c.0, el.seq)));
            }
        }
        Ok(())
    }

    /// `cell,element,input` rows, where input is the sequence id.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell,element,input")?;
        let mut rows: Vec<(usize, usize, u32)> = self
            .elements
            .iter()
            .enumerate()
            .flat_map(|(e, el)| el.cells.iter().map(move |c| (c.0, e, el.seq)))
            .collect();
        rows.sort_unstable();
        for (c, e, s) in rows {
            writeln!(w, "{c},{e},{s}")?;
        }
        Ok(())
    }

    /// Cells as positioned boxes coloured by element, for `neato -n`.
    pub fn write_dot<W: Write>(&self, grid: &UniformGrid, mut w: W) -> Result<()> {
        writeln!(w, "graph partition {{")?;
        writeln!(w, "  node [shape=box, style=filled, label=\"\", width=0.2, height=0.2];")?;
        for (e, el) in self.elements.iter().enumerate() {
            let hue = (e as f64 * 0.618_033_988_75).fract();
            for &c in &el.cells {
                let k = grid.multi_index(c);
                let x = k[0] as f64 * 15.0;
                let y = k.get(1).map_or(0.0, |&v| v as f64 * 15.0);
                writeln!(
                    w,
                    "  c{} [pos=\"{x},{y}\", fillcolor=\"{hue:.3} 0.6 0.9\", tooltip=\"element {e}\"];",
                    c.0
                )?;
            }
        }
        writeln!(w, "}}")?;
        Ok(())
    }
}

pub fn coarse_partition(d: &DetController, mode: PartitionMode) -> Result<Partition> {
    if d.is_empty() {
        return Err(Error::EmptyController);
    }
    let grid = &d.state_grid;
    let mut groups: Vec<Element> = match mode {
        PartitionMode::ByCell => d.iter().map(|(c, s)| Element { cells: vec![c], seq: s }).collect(),
        PartitionMode::ByInput => {
            let mut by_seq: Vec<(u32, CellId)> = d.iter().map(|(c, s)| (s, c)).collect();
            by_seq.sort_unstable();
            let mut out: Vec<Element> = Vec::new();
            for (s, c) in by_seq {
                match out.last_mut() {
                    Some(el) if el.seq == s => el.cells.push(c),
                    _ => out.push(Element { cells: vec![c], seq: s }),
                }
            }
            out
        }
        PartitionMode::ByInputConnected => {
            let mut seen = vec![false; grid.len()];
            let mut out = Vec::new();
            let mut queue = VecDeque::new();
            for (start, s) in d.iter() {
                if seen[start.0] {
                    continue;
                }
                seen[start.0] = true;
                queue.push_back(start);
                let mut cells = Vec::new();
                while let Some(c) = queue.pop_front() {
                    cells.push(c);
                    for n in grid.face_neighbors(c) {
                        if !seen[n.0] && d.choice(n) == Some(s) {
                            seen[n.0] = true;
                            queue.push_back(n);
                        }
                    }
                }
                cells.sort_unstable();
                out.push(Element { cells, seq: s });
            }
            out
        }
    };
    groups.sort_by_key(|el| (el.seq, el.cells[0]));
    let mut cell_to_element = vec![NONE; grid.len()];
    for (e, el) in groups.iter().enumerate() {
        for c in &el.cells {
            cell_to_element[c.0] = e as u32;
        }
    }
    Ok(Partition {
        elements: groups,
        cell_to_element,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CoverMode, HyperRect};
    use crate::synthesis::{build_abstraction, invariant_controller};
    use crate::systems::{builtin, example1};

    fn ex1() -> (Abstraction, MultiController) {
        let p = example1();
        let abs = build_abstraction(&p, &p.eta_s, &p.eta_i, 1, CoverMode::Interior).unwrap();
        let c = invariant_controller(&abs);
        (abs, c)
    }

    fn grid_1d(n: usize) -> UniformGrid {
        UniformGrid::new(HyperRect::new(vec![0.0], vec![n as f64]).unwrap(), vec![1.0]).unwrap()
    }

    fn controller(grid: UniformGrid, entries: Vec<(usize, Vec<u32>)>) -> MultiController {
        let mut text = Vec::new();
        writeln!(text, "entrobound-controller 1\ntau 1").unwrap();
        writeln!(text, "state-lb {}\nstate-ub {}", grid.domain().lb()[0], grid.domain().ub()[0]).unwrap();
        writeln!(text, "state-eta 1\nstate-counts {}", grid.len()).unwrap();
        writeln!(text, "input-lb -0.5\ninput-ub 2.5\ninput-eta 1\ninput-counts 3").unwrap();
        writeln!(text, "cells {}", entries.len()).unwrap();
        for (c, a) in entries {
            let ids: Vec<String> = a.iter().map(|s| s.to_string()).collect();
            writeln!(text, "{c} {}", ids.join(" ")).unwrap();
        }
        MultiController::read_from(&text[..]).unwrap()
    }

    #[test]
    fn maxfreq_prefers_the_shared_input() {
        let c = controller(grid_1d(2), vec![(0, vec![0, 1]), (1, vec![1])]);
        let d = determinize_maxfreq(&c).unwrap();
        assert_eq!(d.iter().map(|x| x.1).collect::<Vec<_>>(), vec![1, 1]);
        d.check_selection(&c).unwrap();
        let p = coarse_partition(&d, PartitionMode::ByInput).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn maxfreq_breaks_ties_by_lowest_id() {
        let c = controller(grid_1d(2), vec![(0, vec![1, 2]), (1, vec![1, 2])]);
        assert_eq!(determinize_maxfreq(&c).unwrap().choice(CellId(0)), Some(1));
    }

    #[test]
    fn empty_controller_is_rejected() {
        let c = controller(grid_1d(2), vec![]);
        assert!(matches!(determinize_maxfreq(&c), Err(Error::EmptyController)));
    }

    #[test]
    fn example1_columns() {
        let (abs, c) = ex1();
        for kind in [Determinizer::MaxFreq, Determinizer::MinNorm, Determinizer::MinSucc] {
            let d = determinize(kind, &c, &abs, None).unwrap();
            d.check_selection(&c).unwrap();
            let p = coarse_partition(&d, PartitionMode::ByInput).unwrap();
            p.check(&d).unwrap();
            p.check_invariance(&abs).unwrap();
            assert_eq!(p.len(), 3, "{kind}");
            // elements ordered by input id: u = -1 is the right column
            let cols: Vec<Vec<usize>> = p
                .elements()
                .iter()
                .map(|e| e.cells.iter().map(|c| c.0 % 3).collect())
                .collect();
            assert_eq!(cols, vec![vec![2; 3], vec![1; 3], vec![0; 3]]);
        }
    }

    #[test]
    fn minnorm_picks_zero_then_lowest_id() {
        // example 1 supplies the input values -1, 0, 1
        let (abs, _) = ex1();
        let c = controller(grid_1d(2), vec![(0, vec![0, 1, 2]), (1, vec![0, 2])]);
        let d = determinize_minnorm(&c, &abs).unwrap();
        assert_eq!(d.choice(CellId(0)), Some(1));
        assert_eq!(d.choice(CellId(1)), Some(0));
    }

    #[test]
    fn connected_split() {
        let c = controller(grid_1d(3), vec![(0, vec![0]), (1, vec![1]), (2, vec![0])]);
        let d = determinize_maxfreq(&c).unwrap();
        assert_eq!(coarse_partition(&d, PartitionMode::ByInput).unwrap().len(), 2);
        let p = coarse_partition(&d, PartitionMode::ByInputConnected).unwrap();
        assert_eq!(p.len(), 3);
        p.check(&d).unwrap();
        let cells = coarse_partition(&d, PartitionMode::ByCell).unwrap();
        assert_eq!(cells.len(), 3);
        cells.check(&d).unwrap();
    }

    #[test]
    fn minsucc_seeded_draws_stay_admissible() {
        let p = builtin("uncertain-linear").unwrap();
        let abs = build_abstraction(&p, &p.eta_s, &p.eta_i, 1, CoverMode::Interior).unwrap();
        let c = invariant_controller(&abs);
        let plain = determinize_minsucc(&c, &abs, None).unwrap();
        for seed in 0..3 {
            let d = determinize_minsucc(&c, &abs, Some(seed)).unwrap();
            d.check_selection(&c).unwrap();
            for (cell, s) in d.iter() {
                let size = |s: u32| abs.post(cell, s as usize).unwrap().volume();
                assert_eq!(size(s), size(plain.choice(cell).unwrap()));
            }
        }
    }

    #[test]
    fn partition_exports() {
        let (abs, c) = ex1();
        let d = determinize_maxfreq(&c).unwrap();
        let p = coarse_partition(&d, PartitionMode::ByInput).unwrap();
        let mut csv = Vec::new();
        p.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert_eq!(csv.lines().count(), 10);
        assert!(csv.starts_with("cell,element,input\n0,2,2\n"));
        let mut dot = Vec::new();
        p.write_dot(abs.state_grid(), &mut dot).unwrap();
        assert_eq!(String::from_utf8(dot).unwrap().matches("pos=").count(), 9);
    }

    #[test]
    fn names_parse() {
        assert_eq!("minsucc".parse::<Determinizer>().unwrap(), Determinizer::MinSucc);
        assert_eq!("by-cell".parse::<PartitionMode>().unwrap(), PartitionMode::ByCell);
        assert!("cart".parse::<Determinizer>().is_err());
    }
}
