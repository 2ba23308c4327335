//! Finite abstraction over a grid and the maximal invariant (safety) controller.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::SystemDef;
use crate::error::{Error, Result};
use crate::geometry::{CellId, CoverMode, HyperRect, IndexBox, PrefixCount, SafeSet, UniformGrid};
use crate::systems::ProblemDef;

/// Largest number of input sequences an abstraction may enumerate.
pub const MAX_SEQUENCES: usize = 1_000_000;

/// Cap on alternations of the forward/backward domain iteration.
pub const MAX_ALTERNATIONS: usize = 100;

const NONE: u32 = u32::MAX;

/// Successor cells of a (cell, sequence) pair whose enclosures all stay in the
/// union of Q cells.
#[derive(Clone, Copy, Debug)]
pub struct PostRef<'a> {
    pub lo: &'a [u32],
    pub hi: &'a [u32],
}

impl PostRef<'_> {
    pub fn cells(&self) -> IndexBox {
        IndexBox {
            lo: self.lo.to_vec(),
            hi: self.hi.to_vec(),
        }
    }

    pub fn volume(&self) -> usize {
        self.lo
            .iter()
            .zip(self.hi)
            .map(|(l, h)| (h - l + 1) as usize)
            .product()
    }
}

#[derive(Clone, Debug)]
pub struct Abstraction {
    state_grid: UniformGrid,
    input_grid: UniformGrid,
    inputs: Vec<Vec<f64>>,
    tau: usize,
    mode: CoverMode,
    q_mask: Vec<bool>,
    q_cells: Vec<CellId>,
    q_pos: Vec<u32>,
    n_seqs: usize,
    /// Valid posts only, one row per Q cell: `seqs[offsets[p]..offsets[p + 1]]`
    /// in increasing order with matching `2 * dim` bounds each.
    offsets: Vec<usize>,
    seqs: Vec<u32>,
    bounds: Vec<u32>,
    exact: bool,
}

/// Abstraction of `problem` at the given grid parameters.
pub fn build_abstraction(
    problem: &ProblemDef,
    eta_s: &[f64],
    eta_i: &[f64],
    tau: usize,
    mode: CoverMode,
) -> Result<Abstraction> {
    Abstraction::build(
        &problem.system,
        &problem.safe_set,
        problem.state_grid(eta_s)?,
        problem.input_grid(eta_i)?,
        tau,
        mode,
    )
}

impl Abstraction {
    pub fn build(
        sys: &SystemDef,
        safe: &SafeSet,
        state_grid: UniformGrid,
        input_grid: UniformGrid,
        tau: usize,
        mode: CoverMode,
    ) -> Result<Self> {
        let q_mask: Vec<bool> = (0..state_grid.len())
            .into_par_iter()
            .map(|i| {
                state_grid
                    .cell_rect(CellId(i))
                    .map(|r| safe.contains_rect(&r))
                    .unwrap_or(false)
            })
            .collect();
        Self::build_masked(sys, q_mask, state_grid, input_grid, tau, mode)
    }

    /// Abstraction for the safe set given directly as a union of grid cells.
    pub fn build_masked(
        sys: &SystemDef,
        q_mask: Vec<bool>,
        state_grid: UniformGrid,
        input_grid: UniformGrid,
        tau: usize,
        mode: CoverMode,
    ) -> Result<Self> {
        sys.validate()?;
        if q_mask.len() != state_grid.len() {
            return Err(Error::Abstraction("cell mask does not match the grid".into()));
        }
        if state_grid.dim() != sys.state_dim {
            return Err(Error::Dimension {
                expected: sys.state_dim,
                got: state_grid.dim(),
            });
        }
        if input_grid.dim() != sys.input_dim {
            return Err(Error::Dimension {
                expected: sys.input_dim,
                got: input_grid.dim(),
            });
        }
        if tau == 0 {
            return Err(Error::Abstraction("tau must be at least 1".into()));
        }
        if tau > 1 && sys.is_uncertain() {
            return Err(Error::Abstraction(
                "systems with disturbances only support tau = 1".into(),
            ));
        }
        let m = input_grid.len();
        let n_seqs = (0..tau)
            .try_fold(1usize, |acc, _| acc.checked_mul(m))
            .filter(|&n| n <= MAX_SEQUENCES)
            .ok_or_else(|| {
                Error::Abstraction(format!(
                    "{m}^{tau} input sequences exceed the limit of {MAX_SEQUENCES}"
                ))
            })?;

        let q_cells: Vec<CellId> = (0..q_mask.len()).filter(|&i| q_mask[i]).map(CellId).collect();
        if q_cells.is_empty() {
            return Err(Error::EmptySafeSet);
        }
        let mut q_pos = vec![NONE; q_mask.len()];
        for (p, c) in q_cells.iter().enumerate() {
            q_pos[c.0] = p as u32;
        }
        let inputs: Vec<Vec<f64>> = (0..m).map(|i| input_grid.cell_center(CellId(i))).collect();

        let q_count = PrefixCount::new(&state_grid, &q_mask);
        let walker = Walker {
            sys,
            grid: &state_grid,
            inputs: &inputs,
            tau,
            mode,
            q_count: &q_count,
        };
        let rows: Vec<Row> = q_cells
            .par_iter()
            .map(|&cell| {
                let mut row = Row {
                    exact: true,
                    ..Row::default()
                };
                walker.walk(&state_grid.cell_rect(cell)?, 0, 0, &mut row)?;
                Ok(row)
            })
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let total: usize = rows.iter().map(|r| r.seqs.len()).sum();
        let mut seqs = Vec::with_capacity(total);
        let mut bounds = Vec::with_capacity(total * 2 * state_grid.dim());
        let mut exact = true;
        for r in rows {
            seqs.extend_from_slice(&r.seqs);
            bounds.extend_from_slice(&r.bounds);
            offsets.push(seqs.len());
            exact &= r.exact;
        }

        Ok(Self {
            state_grid,
            input_grid,
            inputs,
            tau,
            mode,
            q_mask,
            q_cells,
            q_pos,
            n_seqs,
            offsets,
            seqs,
            bounds,
            exact,
        })
    }

    pub fn state_grid(&self) -> &UniformGrid {
        &self.state_grid
    }

    pub fn input_grid(&self) -> &UniformGrid {
        &self.input_grid
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn cover_mode(&self) -> CoverMode {
        self.mode
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_sequences(&self) -> usize {
        self.n_seqs
    }

    pub fn q_mask(&self) -> &[bool] {
        &self.q_mask
    }

    pub fn q_cells(&self) -> &[CellId] {
        &self.q_cells
    }

    /// Whether every reachable-set enclosure used was exact (affine systems).
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn input_value(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    /// Input indices of a sequence id, first step first.
    pub fn sequence(&self, seq: usize) -> Vec<usize> {
        let m = self.inputs.len();
        let mut out = vec![0; self.tau];
        let mut r = seq;
        for slot in out.iter_mut().rev() {
            *slot = r % m;
            r /= m;
        }
        out
    }

    /// Concatenated input vector of a sequence.
    pub fn sequence_values(&self, seq: usize) -> Vec<f64> {
        self.sequence(seq)
            .into_iter()
            .flat_map(|i| self.inputs[i].iter().copied())
            .collect()
    }

    fn row(&self, cell: CellId) -> Option<std::ops::Range<usize>> {
        let p = *self.q_pos.get(cell.0)?;
        (p != NONE).then(|| self.offsets[p as usize]..self.offsets[p as usize + 1])
    }

    fn post_at(&self, k: usize) -> PostRef<'_> {
        let d = self.state_grid.dim();
        let b = &self.bounds[2 * d * k..2 * d * (k + 1)];
        PostRef {
            lo: &b[..d],
            hi: &b[d..],
        }
    }

    /// `None` when the cell lies outside Q or some enclosure along the sequence
    /// leaves the union of Q cells.
    pub fn post(&self, cell: CellId, seq: usize) -> Option<PostRef<'_>> {
        let row = self.row(cell)?;
        let i = self.seqs[row.clone()].binary_search(&(seq as u32)).ok()?;
        Some(self.post_at(row.start + i))
    }

    pub fn stays_in_q(&self, cell: CellId, seq: usize) -> bool {
        self.post(cell, seq).is_some()
    }

    /// Sequences with a valid post from `cell`, increasing.
    pub fn valid_sequences(&self, cell: CellId) -> &[u32] {
        self.row(cell).map_or(&[], |r| &self.seqs[r])
    }

    /// Number of stored (valid) posts.
    pub fn n_posts(&self) -> usize {
        self.seqs.len()
    }

    /// Successor cells of a valid post, in increasing order.
    pub fn successors(&self, cell: CellId, seq: usize) -> Vec<CellId> {
        match self.post(cell, seq) {
            Some(p) => self.state_grid.box_cells(&p.cells()).collect(),
            None => Vec::new(),
        }
    }
}

#[derive(Default)]
struct Row {
    seqs: Vec<u32>,
    bounds: Vec<u32>,
    exact: bool,
}

struct Walker<'a> {
    sys: &'a SystemDef,
    grid: &'a UniformGrid,
    inputs: &'a [Vec<f64>],
    tau: usize,
    mode: CoverMode,
    q_count: &'a PrefixCount,
}

impl Walker<'_> {
    /// Depth-first over sequence prefixes, so a failing prefix prunes its subtree
    /// and ids come out in increasing order.
    fn walk(&self, rect: &HyperRect, depth: usize, prefix: usize, row: &mut Row) -> Result<()> {
        let m = self.inputs.len();
        for (i, u) in self.inputs.iter().enumerate() {
            let id = prefix * m + i;
            let reach = self.sys.reach(rect, u)?;
            row.exact &= reach.exact;
            let cover = self.grid.cover(&reach.enclosure, self.mode);
            let cells = match cover.cells {
                Some(b) if !cover.escapes && self.q_count.all_marked(&b) => b,
                _ => continue,
            };
            if depth + 1 == self.tau {
                row.seqs.push(id as u32);
                row.bounds.extend_from_slice(&cells.lo);
                row.bounds.extend_from_slice(&cells.hi);
            } else {
                self.walk(&reach.enclosure, depth + 1, id, row)?;
            }
        }
        Ok(())
    }
}

/// Controller assigning each domain cell its set of admissible sequence ids.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiController {
    state_grid: UniformGrid,
    input_grid: UniformGrid,
    tau: usize,
    domain: Vec<CellId>,
    admissible: Vec<Vec<u32>>,
    pos: Vec<u32>,
    sweeps: usize,
}

impl MultiController {
    fn from_parts(
        state_grid: UniformGrid,
        input_grid: UniformGrid,
        tau: usize,
        entries: Vec<(CellId, Vec<u32>)>,
        sweeps: usize,
    ) -> Self {
        let mut pos = vec![NONE; state_grid.len()];
        let mut domain = Vec::with_capacity(entries.len());
        let mut admissible = Vec::with_capacity(entries.len());
        for (i, (c, a)) in entries.into_iter().enumerate() {
            pos[c.0] = i as u32;
            domain.push(c);
            admissible.push(a);
        }
        Self {
            state_grid,
            input_grid,
            tau,
            domain,
            admissible,
            pos,
            sweeps,
        }
    }

    pub fn state_grid(&self) -> &UniformGrid {
        &self.state_grid
    }

    pub fn input_grid(&self) -> &UniformGrid {
        &self.input_grid
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Domain cells in increasing order.
    pub fn domain(&self) -> &[CellId] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domain.is_empty()
    }

    /// Number of fixed-point sweeps, the final confirming sweep included.
    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn contains(&self, cell: CellId) -> bool {
        self.position(cell).is_some()
    }

    /// Index of `cell` within [`domain`](Self::domain).
    pub fn position(&self, cell: CellId) -> Option<usize> {
        match self.pos.get(cell.0) {
            Some(&p) if p != NONE => Some(p as usize),
            _ => None,
        }
    }

    pub fn admissible(&self, cell: CellId) -> Option<&[u32]> {
        self.position(cell).map(|p| self.admissible[p].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, &[u32])> {
        self.domain.iter().copied().zip(self.admissible.iter().map(|a| a.as_slice()))
    }

    pub fn domain_mask(&self) -> Vec<bool> {
        self.pos.iter().map(|&p| p != NONE).collect()
    }

    /// Checks every admissible pair against the abstraction.
    pub fn check_soundness(&self, abs: &Abstraction) -> Result<()> {
        let mask = self.domain_mask();
        for (c, adm) in self.iter() {
            if adm.is_empty() {
                return Err(Error::Graph(format!("cell {} has no admissible input", c.0)));
            }
            for &s in adm {
                let cells = abs
                    .post(c, s as usize)
                    .ok_or_else(|| Error::Graph(format!("cell {}, sequence {s} leaves Q", c.0)))?
                    .cells();
                let outside = abs.state_grid.box_cells(&cells).find(|x| !mask[x.0]);
                if let Some(out) = outside {
                    return Err(Error::PartitionNotInvariant { cell: out.0 });
                }
            }
        }
        Ok(())
    }

    /// Text format:
    ///
    /// ```text
    /// entrobound-controller 1
    /// tau <tau>
    /// state-lb <f64>...   state-ub, state-eta, state-counts likewise
    /// input-lb <f64>...   input-ub, input-eta, input-counts likewise
    /// cells <count>
    /// <cell-id> <sequence-id>...
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        fn row<W: Write, T: std::fmt::Display>(w: &mut W, key: &str, v: &[T]) -> std::io::Result<()> {
            write!(w, "{key}")?;
            for x in v {
                write!(w, " {x}")?;
            }
            writeln!(w)
        }
        writeln!(w, "entrobound-controller 1")?;
        writeln!(w, "tau {}", self.tau)?;
        for (prefix, g) in [("state", &self.state_grid), ("input", &self.input_grid)] {
            row(&mut w, &format!("{prefix}-lb"), g.domain().lb())?;
            row(&mut w, &format!("{prefix}-ub"), g.domain().ub())?;
            row(&mut w, &format!("{prefix}-eta"), g.eta())?;
            row(&mut w, &format!("{prefix}-counts"), g.counts())?;
        }
        writeln!(w, "cells {}", self.domain.len())?;
        for (c, adm) in self.iter() {
            row(&mut w, &c.0.to_string(), adm)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Format("unexpected end of file".into()))
        };
        fn field<T: std::str::FromStr>(line: &str, key: &str) -> Result<Vec<T>> {
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(Error::Format(format!("expected `{key}`, found `{line}`")));
            }
            it.map(|t| t.parse().map_err(|_| Error::Format(format!("bad value `{t}` in `{key}`"))))
                .collect()
        }
        fn one<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
            let mut v: Vec<T> = field(line, key)?;
            if v.len() != 1 {
                return Err(Error::Format(format!("`{key}` takes one value")));
            }
            Ok(v.remove(0))
        }
        if next()?.trim() != "entrobound-controller 1" {
            return Err(Error::Format("missing header".into()));
        }
        let tau: usize = one(&next()?, "tau")?;
        let mut grids = Vec::new();
        for prefix in ["state", "input"] {
            let lb = field::<f64>(&next()?, &format!("{prefix}-lb"))?;
            let ub = field::<f64>(&next()?, &format!("{prefix}-ub"))?;
            let eta = field::<f64>(&next()?, &format!("{prefix}-eta"))?;
            let counts = field::<u32>(&next()?, &format!("{prefix}-counts"))?;
            if eta.len() != lb.len() || counts.len() != lb.len() {
                return Err(Error::Format(format!("{prefix} grid rows differ in length")));
            }
            grids.push(UniformGrid::from_parts(HyperRect::new(lb, ub)?, eta, counts)?);
        }
        let input_grid = grids.pop().expect("two grids");
        let state_grid = grids.pop().expect("two grids");
        let n: usize = one(&next()?, "cells")?;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let line = next()?;
            let mut it = line.split_whitespace();
            let cell: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad cell line `{line}`")))?;
            if cell >= state_grid.len() {
                return Err(Error::CellOutOfRange {
                    index: cell,
                    len: state_grid.len(),
                });
            }
            let adm = it
                .map(|t| t.parse::<u32>().map_err(|_| Error::Format(format!("bad id `{t}`"))))
                .collect::<Result<Vec<_>>>()?;
            entries.push((CellId(cell), adm));
        }
        entries.sort_by_key(|e| e.0);
        Ok(Self::from_parts(state_grid, input_grid, tau, entries, 0))
    }
}

/// Greatest fixed point inside Q.
pub fn invariant_controller(abs: &Abstraction) -> MultiController {
    invariant_controller_within(abs, None)
}

/// Greatest fixed point inside `Q ∩ initial`.
pub fn invariant_controller_within(abs: &Abstraction, initial: Option<&[bool]>) -> MultiController {
    let grid = &abs.state_grid;
    let mut in_d: Vec<bool> = match initial {
        Some(init) => abs.q_mask.iter().zip(init).map(|(&q, &i)| q && i).collect(),
        None => abs.q_mask.clone(),
    };
    // candidates are row-relative post indices
    let mut cand: Vec<Vec<u32>> = (0..abs.q_cells.len())
        .into_par_iter()
        .map(|p| {
            let n = abs.offsets[p + 1] - abs.offsets[p];
            if in_d[abs.q_cells[p].0] {
                (0..n as u32).collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let count = PrefixCount::new(grid, &in_d);
        let removed: Vec<CellId> = cand
            .par_iter_mut()
            .enumerate()
            .filter_map(|(p, local)| {
                let c = abs.q_cells[p];
                if !in_d[c.0] {
                    return None;
                }
                let start = abs.offsets[p];
                local.retain(|&k| {
                    let post = abs.post_at(start + k as usize);
                    count.all_marked_range(post.lo, post.hi)
                });
                local.is_empty().then_some(c)
            })
            .collect();
        if removed.is_empty() {
            break;
        }
        for c in removed {
            in_d[c.0] = false;
        }
    }
    let entries = cand
        .into_iter()
        .enumerate()
        .filter(|(p, local)| in_d[abs.q_cells[*p].0] && !local.is_empty())
        .map(|(p, local)| {
            let start = abs.offsets[p];
            let seqs = local.iter().map(|&k| abs.seqs[start + k as usize]).collect();
            (abs.q_cells[p], seqs)
        })
        .collect();
    MultiController::from_parts(
        abs.state_grid.clone(),
        abs.input_grid.clone(),
        abs.tau,
        entries,
        sweeps,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardBackward {
    /// Stable domain as a mask over the state grid.
    pub domain: Vec<bool>,
    pub alternations: usize,
    /// Domain size after each alternation.
    pub sizes: Vec<usize>,
}

/// Alternates invariant controllers of the system and its time reversal, each
/// computed inside the previous domain, until two consecutive domains coincide.
/// Each alternation rebuilds the abstraction over the current cells only.
pub fn forward_backward_domain(
    fwd: &SystemDef,
    bwd: &SystemDef,
    safe: &SafeSet,
    state_grid: &UniformGrid,
    input_grid: &UniformGrid,
    mode: CoverMode,
) -> Result<ForwardBackward> {
    let mut current: Vec<bool> = (0..state_grid.len())
        .map(|i| safe.contains_rect(&state_grid.cell_rect(CellId(i))?).then_some(true).map_or(Ok(false), Ok))
        .collect::<Result<_>>()?;
    let mut sizes = Vec::new();
    for k in 0..MAX_ALTERNATIONS {
        let sys = if k % 2 == 0 { fwd } else { bwd };
        let next = match Abstraction::build_masked(
            sys,
            current.clone(),
            state_grid.clone(),
            input_grid.clone(),
            1,
            mode,
        ) {
            Ok(abs) => invariant_controller(&abs).domain_mask(),
            Err(Error::EmptySafeSet) => vec![false; state_grid.len()],
            Err(e) => return Err(e),
        };
        let size = next.iter().filter(|&&b| b).count();
        sizes.push(size);
        if size == 0 || (k > 0 && next == current) {
            return Ok(ForwardBackward {
                domain: next,
                alternations: k + 1,
                sizes,
            });
        }
        current = next;
    }
    let last = sizes[sizes.len() - 1];
    let previous = sizes[sizes.len() - 2];
    Err(Error::NoFixedPoint {
        iterations: MAX_ALTERNATIONS,
        previous,
        last,
    })
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimulationReport {
    pub trajectories: usize,
    pub steps: usize,
    pub violations: usize,
}

/// Closed-loop runs from random points of random domain cells. Each step looks up
/// the current cell, applies a random admissible sequence (with random
/// disturbances for uncertain systems) and checks that every visited state lies
/// in `safe` and in a Q cell, and that the state after each sequence lies in a
/// domain cell.
pub fn simulate_closed_loop(
    sys: &SystemDef,
    safe: &SafeSet,
    abs: &Abstraction,
    ctrl: &MultiController,
    trajectories: usize,
    steps: usize,
    seed: u64,
) -> Result<SimulationReport> {
    if ctrl.is_empty() {
        return Err(Error::EmptyController);
    }
    let grid = &abs.state_grid;
    let violations: usize = (0..trajectories)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let cell = ctrl.domain[rng.gen_range(0..ctrl.len())];
            let r = grid.cell_rect(cell)?;
            let mut x: Vec<f64> = (0..r.dim()).map(|i| rng.gen_range(r.lb()[i]..r.ub()[i])).collect();
            for _ in 0..steps {
                let Some(adm) = grid.locate(&x).and_then(|c| ctrl.admissible(c)) else {
                    return Ok(1);
                };
                let seq = adm[rng.gen_range(0..adm.len())] as usize;
                for i in abs.sequence(seq) {
                    let w: Option<Vec<f64>> = sys.disturbance.as_ref().map(|w| {
                        (0..w.dim()).map(|k| rng.gen_range(w.lb()[k]..=w.ub()[k])).collect()
                    });
                    x = sys.step(&x, abs.input_value(i), w.as_deref())?;
                    let in_q = grid.locate(&x).is_some_and(|c| abs.q_mask[c.0]);
                    if !in_q || !safe.contains_point(&x) {
                        return Ok(1);
                    }
                }
            }
            Ok(0)
        })
        .sum::<Result<usize>>()?;
    Ok(SimulationReport {
        trajectories,
        steps,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SystemKind;
    use crate::systems::{builtin, example1};

    fn ex1_abs() -> Abstraction {
        let p = example1();
        build_abstraction(&p, &p.eta_s, &p.eta_i, 1, CoverMode::Interior).unwrap()
    }

    fn identity(n: usize) -> SystemDef {
        SystemDef {
            state_dim: n,
            input_dim: 1,
            kind: SystemKind::Affine {
                a: (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
                b: vec![vec![0.0]; n],
            },
            disturbance: None,
        }
    }

    fn box_grid(lb: &[f64], ub: &[f64], eta: &[f64]) -> UniformGrid {
        UniformGrid::new(HyperRect::new(lb.to_vec(), ub.to_vec()).unwrap(), eta.to_vec()).unwrap()
    }

    fn unit_inputs() -> UniformGrid {
        box_grid(&[-0.5], &[0.5], &[1.0])
    }

    #[test]
    fn example1_abstraction_sizes() {
        let abs = ex1_abs();
        assert_eq!(abs.q_cells().len(), 9);
        assert_eq!(abs.n_inputs(), 3);
        assert!(abs.is_exact());
    }

    #[test]
    fn example1_corner_cell_with_input_one() {
        let abs = ex1_abs();
        // inputs are ordered -1, 0, 1
        assert!(abs.stays_in_q(CellId(0), 2));
        // [-1,1/3] x [0,2/3] overlaps cells of columns 0 and 1 in the middle row
        assert_eq!(abs.successors(CellId(0), 2), vec![CellId(3), CellId(4)]);
        let closed = Abstraction::build(
            &example1().system,
            &example1().safe_set,
            abs.state_grid().clone(),
            abs.input_grid().clone(),
            1,
            CoverMode::Closed,
        )
        .unwrap();
        assert_eq!(closed.post(CellId(0), 2).unwrap().volume(), 6);
    }

    #[test]
    fn example1_successor_table() {
        let abs = ex1_abs();
        let ctrl = invariant_controller(&abs);
        assert_eq!(ctrl.len(), 9);
        // one admissible input per column
        let expected_input = [2u32, 1, 0];
        let expected_succ: [&[usize]; 9] = [
            &[4, 5],
            &[1, 2, 3, 4, 5, 6],
            &[2, 3],
            &[7, 8],
            &[4, 5, 6],
            &[2, 3],
            &[7, 8],
            &[4, 5, 6, 7, 8, 9],
            &[5, 6],
        ];
        for (c, adm) in ctrl.iter() {
            assert_eq!(adm, &[expected_input[c.0 % 3]], "cell {}", c.0);
            let succ: Vec<usize> = abs.successors(c, adm[0] as usize).iter().map(|x| x.0 + 1).collect();
            assert_eq!(succ, expected_succ[c.0], "cell {}", c.0);
        }
        ctrl.check_soundness(&abs).unwrap();
    }

    #[test]
    fn identity_post_under_both_cover_modes() {
        let grid = box_grid(&[0.0, 0.0], &[3.0, 3.0], &[1.0, 1.0]);
        let safe = SafeSet::Box(grid.domain().clone());
        for (mode, centre, corner) in [(CoverMode::Closed, 9, 4), (CoverMode::Interior, 1, 1)] {
            let abs = Abstraction::build(&identity(2), &safe, grid.clone(), unit_inputs(), 1, mode).unwrap();
            assert_eq!(abs.post(CellId(4), 0).unwrap().volume(), centre);
            assert_eq!(abs.post(CellId(0), 0).unwrap().volume(), corner);
            assert_eq!(invariant_controller(&abs).len(), 9);
        }
    }

    #[test]
    fn hopeless_cell_is_removed_in_the_first_sweep() {
        // x+ = 0.5 - x on [0, 2]: only [0, 0.5] maps back into the grid
        let sys = SystemDef {
            state_dim: 1,
            input_dim: 1,
            kind: SystemKind::Affine {
                a: vec![vec![-1.0]],
                b: vec![vec![0.5]],
            },
            disturbance: None,
        };
        let grid = box_grid(&[0.0], &[2.0], &[0.5]);
        let safe = SafeSet::Box(grid.domain().clone());
        let one = box_grid(&[0.5], &[1.5], &[1.0]);
        let abs = Abstraction::build(&sys, &safe, grid, one, 1, CoverMode::Interior).unwrap();
        assert_eq!(abs.successors(CellId(0), 0), vec![CellId(0)]);
        assert!((1..4).all(|c| !abs.stays_in_q(CellId(c), 0)));
        let ctrl = invariant_controller(&abs);
        assert_eq!(ctrl.domain(), &[CellId(0)]);
        assert_eq!(ctrl.sweeps(), 2);
    }

    #[test]
    fn uncertain_linear_domain_has_109_cells() {
        let p = builtin("uncertain-linear").unwrap();
        let abs = build_abstraction(&p, &p.eta_s, &p.eta_i, 1, CoverMode::Interior).unwrap();
        let ctrl = invariant_controller(&abs);
        assert_eq!(ctrl.len(), 109);
        assert!(ctrl.sweeps() <= abs.q_cells().len() + 1);
        ctrl.check_soundness(&abs).unwrap();
        let sim = simulate_closed_loop(&p.system, &p.safe_set, &abs, &ctrl, 100, 200, 7).unwrap();
        assert_eq!(sim.violations, 0);
    }

    #[test]
    fn errors_for_bad_requests() {
        let p = builtin("uncertain-linear").unwrap();
        assert!(matches!(
            build_abstraction(&p, &p.eta_s, &p.eta_i, 2, CoverMode::Interior),
            Err(Error::Abstraction(_))
        ));
        let far = SafeSet::Box(HyperRect::new(vec![10.0, 10.0], vec![11.0, 11.0]).unwrap());
        let grid = box_grid(&[0.0, 0.0], &[3.0, 3.0], &[1.0, 1.0]);
        assert!(matches!(
            Abstraction::build(&identity(2), &far, grid, unit_inputs(), 1, CoverMode::Interior),
            Err(Error::EmptySafeSet)
        ));
        let ex = example1();
        assert!(build_abstraction(&ex, &ex.eta_s, &[1e-6], 1, CoverMode::Interior).is_err());
    }

    #[test]
    fn sequences_are_numbered_first_step_first() {
        let p = example1();
        let abs = build_abstraction(&p, &p.eta_s, &p.eta_i, 2, CoverMode::Interior).unwrap();
        assert_eq!(abs.n_sequences(), 9);
        assert_eq!(abs.sequence(5), vec![1, 2]);
        assert_eq!(abs.sequence_values(5), vec![0.0, 1.0]);
    }

    #[test]
    fn two_step_posts_chain_the_one_step_map() {
        let p = example1();
        let abs2 = build_abstraction(&p, &p.eta_s, &p.eta_i, 2, CoverMode::Interior).unwrap();
        let grid = abs2.state_grid();
        for c in abs2.q_cells() {
            for seq in 0..abs2.n_sequences() {
                let [u0, u1] = abs2.sequence(seq)[..] else { panic!() };
                let (u0, u1) = (abs2.input_value(u0).to_vec(), abs2.input_value(u1).to_vec());
                let r0 = p.system.reach(&grid.cell_rect(*c).unwrap(), &u0).unwrap().enclosure;
                let r1 = p.system.reach(&r0, &u1).unwrap().enclosure;
                let post = abs2.post(*c, seq);
                let mid_ok = p.safe_set.contains_rect(&r0);
                let end_ok = p.safe_set.contains_rect(&r1);
                assert_eq!(post.is_some(), mid_ok && end_ok, "cell {} seq {seq}", c.0);
                if let Some(post) = post {
                    assert_eq!(Some(post.cells()), grid.cover(&r1, CoverMode::Interior).cells);
                }
            }
        }
        // a column cell of width 2/3 grows to width 8/3 > 2 in two steps, so no
        // open-loop pair keeps it inside Q
        let ctrl = invariant_controller(&abs2);
        ctrl.check_soundness(&abs2).unwrap();
        assert!(ctrl.is_empty());
    }

    #[test]
    fn forward_backward_identity_takes_two_alternations() {
        let grid = box_grid(&[0.0, 0.0], &[2.0, 2.0], &[0.5, 0.5]);
        let safe = SafeSet::Box(grid.domain().clone());
        let id = identity(2);
        let fb = forward_backward_domain(&id, &id, &safe, &grid, &unit_inputs(), CoverMode::Interior).unwrap();
        assert_eq!(fb.alternations, 2);
        assert!(fb.domain.iter().all(|&b| b));
    }

    #[test]
    fn forward_backward_stops_on_empty_domain() {
        let sys = SystemDef {
            state_dim: 1,
            input_dim: 1,
            kind: SystemKind::Affine {
                a: vec![vec![1.0]],
                b: vec![vec![0.0]],
            },
            disturbance: Some(HyperRect::new(vec![5.0], vec![6.0]).unwrap()),
        };
        let grid = box_grid(&[0.0], &[2.0], &[0.5]);
        let safe = SafeSet::Box(grid.domain().clone());
        let fb = forward_backward_domain(&sys, &sys, &safe, &grid, &unit_inputs(), CoverMode::Interior).unwrap();
        assert_eq!((fb.alternations, fb.sizes.as_slice()), (1, &[0][..]));
    }

    #[test]
    fn henon_forward_backward_near_the_saddle() {
        let p = builtin("henon").unwrap();
        let q = HyperRect::new(vec![1.5, 1.5], vec![1.9, 1.9]).unwrap();
        let grid = UniformGrid::aligned(&q, vec![0.002, 0.002]).unwrap();
        let inputs = p.input_grid(&p.eta_i).unwrap();
        let fb = forward_backward_domain(
            &p.system,
            p.reverse.as_ref().unwrap(),
            &SafeSet::Box(q),
            &grid,
            &inputs,
            CoverMode::Interior,
        )
        .unwrap();
        let size = fb.domain.iter().filter(|&&b| b).count();
        assert!(size > 0 && size < fb.sizes[0], "{:?}", fb.sizes);
        assert_eq!(fb.sizes[fb.sizes.len() - 1], fb.sizes[fb.sizes.len() - 2]);
    }

    #[test]
    fn controller_text_round_trip() {
        let p = example1();
        let abs = build_abstraction(&p, &p.eta_s, &p.eta_i, 2, CoverMode::Interior).unwrap();
        let ctrl = invariant_controller(&abs);
        let mut buf = Vec::new();
        ctrl.write_to(&mut buf).unwrap();
        let back = MultiController::read_from(&buf[..]).unwrap();
        assert_eq!(back.domain(), ctrl.domain());
        assert_eq!(back.state_grid(), ctrl.state_grid());
        assert_eq!(back.input_grid(), ctrl.input_grid());
        assert_eq!(back.tau(), 2);
        for (c, adm) in ctrl.iter() {
            assert_eq!(back.admissible(c), Some(adm));
        }
        assert!(MultiController::read_from(&b"garbage\n"[..]).is_err());
    }

    #[test]
    fn example1_closed_loop_simulation() {
        let p = example1();
        let abs = ex1_abs();
        let ctrl = invariant_controller(&abs);
        let sim = simulate_closed_loop(&p.system, &p.safe_set, &abs, &ctrl, 200, 200, 1).unwrap();
        assert_eq!(sim.violations, 0);
    }
}
