//! Boxes, uniform grids and the geometric predicates the abstraction is built on.
//!
//! Cells are closed boxes when tested against other boxes and half-open when a
//! point is located, so the set of cells is a genuine partition of the grid
//! domain. Flat cell indices vary the first axis fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack applied to every geometric predicate.
pub const GEOM_SLACK: f64 = 1e-12;

/// Relative tolerance for `counts * eta == width`.
const GRID_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperRect {
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl HyperRect {
    pub fn new(lb: Vec<f64>, ub: Vec<f64>) -> Result<Self> {
        if lb.is_empty() {
            return Err(Error::InvalidRect("dimension must be at least 1".into()));
        }
        if lb.len() != ub.len() {
            return Err(Error::Dimension {
                expected: lb.len(),
                got: ub.len(),
            });
        }
        for (i, (l, u)) in lb.iter().zip(&ub).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidRect(format!("axis {i} has a non-finite bound")));
            }
            if l > u {
                return Err(Error::InvalidRect(format!("axis {i}: lb {l} > ub {u}")));
            }
        }
        Ok(Self { lb, ub })
    }

    pub fn from_center_radius(center: &[f64], radius: &[f64]) -> Result<Self> {
        if center.len() != radius.len() {
            return Err(Error::Dimension {
                expected: center.len(),
                got: radius.len(),
            });
        }
        let lb = center.iter().zip(radius).map(|(c, r)| c - r.abs()).collect();
        let ub = center.iter().zip(radius).map(|(c, r)| c + r.abs()).collect();
        Self::new(lb, ub)
    }

    /// Degenerate box holding a single point.
    pub fn point(x: &[f64]) -> Result<Self> {
        Self::new(x.to_vec(), x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lb.len()
    }

    pub fn lb(&self) -> &[f64] {
        &self.lb
    }

    pub fn ub(&self) -> &[f64] {
        &self.ub
    }

    pub fn center(&self) -> Vec<f64> {
        self.lb.iter().zip(&self.ub).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn radius(&self) -> Vec<f64> {
        self.lb.iter().zip(&self.ub).map(|(l, u)| 0.5 * (u - l)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lb.iter().zip(&self.ub).map(|(l, u)| u - l).collect()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lb.iter().zip(&self.ub))
                .all(|(v, (l, u))| *v >= l - GEOM_SLACK && *v <= u + GEOM_SLACK)
    }

    pub fn contains_rect(&self, other: &HyperRect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                other.lb[i] >= self.lb[i] - GEOM_SLACK && other.ub[i] <= self.ub[i] + GEOM_SLACK
            })
    }

    /// Closed intersection test.
    pub fn intersects(&self, other: &HyperRect) -> bool {
        other.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                other.lb[i] <= self.ub[i] + GEOM_SLACK && other.ub[i] >= self.lb[i] - GEOM_SLACK
            })
    }

    /// Smallest box containing both.
    pub fn hull(&self, other: &HyperRect) -> HyperRect {
        HyperRect {
            lb: self.lb.iter().zip(&other.lb).map(|(a, b)| a.min(*b)).collect(),
            ub: self.ub.iter().zip(&other.ub).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// The 2^d corners, axis 0 toggling fastest.
    pub fn vertices(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let d = self.dim();
        (0..1usize << d).map(move |mask| {
            (0..d)
                .map(|i| if mask >> i & 1 == 1 { self.ub[i] } else { self.lb[i] })
                .collect()
        })
    }
}

/// Row-major (first axis fastest) flat index of a grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId(pub usize);

/// How a box is matched against grid cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverMode {
    /// Cells whose closed box meets the closed query box, touching faces included.
    Closed,
    /// Cells overlapping the query box with positive measure. A query box that is
    /// degenerate on some axis falls back to the half-open cell holding it.
    #[default]
    Interior,
}

impl std::fmt::Display for CoverMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoverMode::Closed => "closed",
            CoverMode::Interior => "interior",
        })
    }
}

impl std::str::FromStr for CoverMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(CoverMode::Closed),
            "interior" => Ok(CoverMode::Interior),
            _ => Err(Error::Config(format!("unknown cover mode `{s}`, expected interior or closed"))),
        }
    }
}

/// Inclusive per-axis index ranges: a box of grid cells.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexBox {
    pub lo: Vec<u32>,
    pub hi: Vec<u32>,
}

impl IndexBox {
    pub fn volume(&self) -> usize {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l + 1) as usize)
            .product()
    }

    pub fn contains_multi(&self, k: &[u32]) -> bool {
        k.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| v >= l && v <= h)
    }
}

/// Result of matching a box against a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    /// Cells hit, or `None` when the box misses the domain entirely.
    pub cells: Option<IndexBox>,
    /// The box is not contained in the grid domain.
    pub escapes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    domain: HyperRect,
    eta: Vec<f64>,
    counts: Vec<u32>,
    strides: Vec<usize>,
    len: usize,
}

impl UniformGrid {
    /// Grid tiling `domain` exactly with cells of width `eta`.
    pub fn new(domain: HyperRect, eta: Vec<f64>) -> Result<Self> {
        check_eta(&domain, &eta)?;
        let mut counts = Vec::with_capacity(eta.len());
        for (i, (w, e)) in domain.widths().iter().zip(&eta).enumerate() {
            let n = (w / e).round();
            if n < 1.0 {
                return Err(Error::Grid(format!(
                    "axis {i}: width {w} smaller than eta {e}"
                )));
            }
            if (n * e - w).abs() > GRID_REL_TOL * w.max(*e) {
                return Err(Error::Grid(format!(
                    "axis {i}: eta {e} does not divide width {w}"
                )));
            }
            if n > u32::MAX as f64 {
                return Err(Error::Grid(format!("axis {i}: too many cells")));
            }
            counts.push(n as u32);
        }
        Self::from_parts(domain, eta, counts)
    }

    /// Grid whose cells are centred on integer multiples of `eta` and lie inside
    /// `outer`. The domain is the union of those cells.
    pub fn aligned(outer: &HyperRect, eta: Vec<f64>) -> Result<Self> {
        check_eta(outer, &eta)?;
        let d = outer.dim();
        let mut lb = Vec::with_capacity(d);
        let mut ub = Vec::with_capacity(d);
        let mut counts = Vec::with_capacity(d);
        for i in 0..d {
            let e = eta[i];
            let k_lo = ((outer.lb()[i] + 0.5 * e) / e - GRID_REL_TOL).ceil();
            let k_hi = ((outer.ub()[i] - 0.5 * e) / e + GRID_REL_TOL).floor();
            if k_hi < k_lo {
                return Err(Error::Grid(format!(
                    "axis {i}: no cell of width {e} fits inside [{}, {}]",
                    outer.lb()[i],
                    outer.ub()[i]
                )));
            }
            let n = k_hi - k_lo + 1.0;
            if n > u32::MAX as f64 {
                return Err(Error::Grid(format!("axis {i}: too many cells")));
            }
            lb.push((k_lo - 0.5) * e);
            ub.push((k_hi + 0.5) * e);
            counts.push(n as u32);
        }
        Self::from_parts(HyperRect::new(lb, ub)?, eta, counts)
    }

    pub(crate) fn from_parts(domain: HyperRect, eta: Vec<f64>, counts: Vec<u32>) -> Result<Self> {
        let mut strides = Vec::with_capacity(counts.len());
        let mut len: u64 = 1;
        for &c in &counts {
            strides.push(len as usize);
            len = len
                .checked_mul(c as u64)
                .ok_or_else(|| Error::Grid("total cell count overflows".into()))?;
        }
        let len = usize::try_from(len).map_err(|_| Error::Grid("total cell count overflows".into()))?;
        Ok(Self {
            domain,
            eta,
            counts,
            strides,
            len,
        })
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn domain(&self) -> &HyperRect {
        &self.domain
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn multi_index(&self, id: CellId) -> Vec<u32> {
        let mut rest = id.0;
        self.counts
            .iter()
            .map(|&c| {
                let k = rest % c as usize;
                rest /= c as usize;
                k as u32
            })
            .collect()
    }

    pub fn flat_index(&self, k: &[u32]) -> CellId {
        CellId(k.iter().zip(&self.strides).map(|(&k, s)| k as usize * s).sum())
    }

    fn lower(&self, axis: usize, k: u32) -> f64 {
        self.domain.lb()[axis] + k as f64 * self.eta[axis]
    }

    fn upper(&self, axis: usize, k: u32) -> f64 {
        if k + 1 == self.counts[axis] {
            self.domain.ub()[axis]
        } else {
            self.lower(axis, k + 1)
        }
    }

    pub fn cell_rect(&self, id: CellId) -> Result<HyperRect> {
        if id.0 >= self.len {
            return Err(Error::CellOutOfRange {
                index: id.0,
                len: self.len,
            });
        }
        let k = self.multi_index(id);
        let lb = (0..self.dim()).map(|i| self.lower(i, k[i])).collect();
        let ub = (0..self.dim()).map(|i| self.upper(i, k[i])).collect();
        HyperRect::new(lb, ub)
    }

    pub fn cell_center(&self, id: CellId) -> Vec<f64> {
        let k = self.multi_index(id);
        (0..self.dim())
            .map(|i| 0.5 * (self.lower(i, k[i]) + self.upper(i, k[i])))
            .collect()
    }

    /// Half-open point location; the upper domain face belongs to the last cell.
    pub fn locate(&self, x: &[f64]) -> Option<CellId> {
        if x.len() != self.dim() || !self.domain.contains_point(x) {
            return None;
        }
        let k: Vec<u32> = (0..self.dim())
            .map(|i| {
                let t = ((x[i] - self.domain.lb()[i]) / self.eta[i]).floor();
                t.clamp(0.0, (self.counts[i] - 1) as f64) as u32
            })
            .collect();
        Some(self.flat_index(&k))
    }

    /// Cells matched by `rect` under `mode`, by per-axis index arithmetic.
    pub fn cover(&self, rect: &HyperRect, mode: CoverMode) -> Cover {
        debug_assert_eq!(rect.dim(), self.dim());
        let escapes = !self.domain.contains_rect(rect);
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let origin = self.domain.lb()[i];
            let e = self.eta[i];
            let n = self.counts[i] as f64;
            let a = rect.lb()[i] - origin;
            let b = rect.ub()[i] - origin;
            let (l, h) = match mode {
                CoverMode::Closed => {
                    (((a - GEOM_SLACK) / e).ceil() - 1.0, ((b + GEOM_SLACK) / e).floor())
                }
                CoverMode::Interior => {
                    let l = ((a + GEOM_SLACK) / e).floor();
                    let h = ((b - GEOM_SLACK) / e).ceil() - 1.0;
                    (l, h.max(l))
                }
            };
            let (l, h) = (l.max(0.0), h.min(n - 1.0));
            if l > h {
                return Cover {
                    cells: None,
                    escapes,
                };
            }
            lo.push(l as u32);
            hi.push(h as u32);
        }
        Cover {
            cells: Some(IndexBox { lo, hi }),
            escapes,
        }
    }

    /// Cells whose closed box meets the closed `rect`, plus the escape flag.
    pub fn cover_cells(&self, rect: &HyperRect) -> (Vec<CellId>, bool) {
        let cover = self.cover(rect, CoverMode::Closed);
        let cells = cover
            .cells
            .map(|b| self.box_cells(&b).collect())
            .unwrap_or_default();
        (cells, cover.escapes)
    }

    /// Flat ids inside an index box, in increasing order.
    pub fn box_cells<'a>(&'a self, b: &'a IndexBox) -> impl Iterator<Item = CellId> + 'a {
        let d = self.dim();
        let total = b.volume();
        (0..total).map(move |mut r| {
            let mut id = 0;
            for i in 0..d {
                let span = (b.hi[i] - b.lo[i] + 1) as usize;
                id += (b.lo[i] as usize + r % span) * self.strides[i];
                r /= span;
            }
            CellId(id)
        })
    }

    /// Cells sharing a face with `id`.
    pub fn face_neighbors(&self, id: CellId) -> Vec<CellId> {
        let k = self.multi_index(id);
        let mut out = Vec::with_capacity(2 * self.dim());
        for i in 0..self.dim() {
            if k[i] > 0 {
                out.push(CellId(id.0 - self.strides[i]));
            }
            if k[i] + 1 < self.counts[i] {
                out.push(CellId(id.0 + self.strides[i]));
            }
        }
        out
    }
}

fn check_eta(domain: &HyperRect, eta: &[f64]) -> Result<()> {
    if eta.len() != domain.dim() {
        return Err(Error::Dimension {
            expected: domain.dim(),
            got: eta.len(),
        });
    }
    if let Some(e) = eta.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::Grid(format!("grid parameter {e} must be positive")));
    }
    Ok(())
}

/// Half-space description `{x : H x <= b}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub h: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Polytope {
    pub fn new(h: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if h.len() != b.len() {
            return Err(Error::Dimension {
                expected: h.len(),
                got: b.len(),
            });
        }
        if let Some(d) = h.first().map(Vec::len) {
            if let Some(row) = h.iter().find(|r| r.len() != d) {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
        }
        Ok(Self { h, b })
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.h
            .iter()
            .zip(&self.b)
            .all(|(row, b)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() <= b + GEOM_SLACK)
    }
}

/// True iff every vertex of `rect` satisfies `H x <= b`. Each row is maximised
/// over the box in closed form, which equals the vertex maximum.
pub fn rect_in_polytope(rect: &HyperRect, p: &Polytope) -> bool {
    p.h.iter().zip(&p.b).all(|(row, b)| {
        let max: f64 = row
            .iter()
            .enumerate()
            .map(|(i, a)| (a * rect.lb()[i]).max(a * rect.ub()[i]))
            .sum();
        max <= b + GEOM_SLACK
    })
}

/// The compact set to be rendered invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SafeSet {
    Box(HyperRect),
    Polytope(Polytope),
}

impl SafeSet {
    pub fn contains_rect(&self, rect: &HyperRect) -> bool {
        match self {
            SafeSet::Box(b) => b.contains_rect(rect),
            SafeSet::Polytope(p) => rect_in_polytope(rect, p),
        }
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        match self {
            SafeSet::Box(b) => b.contains_point(x),
            SafeSet::Polytope(p) => p.contains_point(x),
        }
    }
}

/// Counts marked cells inside index boxes in O(2^d) using a summed-volume table.
#[derive(Clone, Debug)]
pub struct PrefixCount {
    dims: Vec<usize>,
    strides: Vec<usize>,
    table: Vec<u32>,
}

impl PrefixCount {
    pub fn new(grid: &UniformGrid, marked: &[bool]) -> Self {
        assert_eq!(marked.len(), grid.len());
        let dims: Vec<usize> = grid.counts().iter().map(|&c| c as usize + 1).collect();
        let mut strides = Vec::with_capacity(dims.len());
        let mut s = 1;
        for &d in &dims {
            strides.push(s);
            s *= d;
        }
        let mut table = vec![0u32; s];
        for (id, &m) in marked.iter().enumerate() {
            if m {
                let k = grid.multi_index(CellId(id));
                let pos: usize = k.iter().zip(&strides).map(|(&k, s)| (k as usize + 1) * s).sum();
                table[pos] = 1;
            }
        }
        for axis in 0..dims.len() {
            let stride = strides[axis];
            for pos in 0..table.len() {
                if (pos / stride) % dims[axis] != 0 {
                    table[pos] += table[pos - stride];
                }
            }
        }
        Self {
            dims,
            strides,
            table,
        }
    }

    pub fn count(&self, b: &IndexBox) -> usize {
        self.count_range(&b.lo, &b.hi)
    }

    /// Same as [`count`](Self::count) for a box given as inclusive bounds.
    pub fn count_range(&self, lo: &[u32], hi: &[u32]) -> usize {
        let d = self.dims.len();
        let mut total: i64 = 0;
        for mask in 0..1usize << d {
            let mut pos = 0;
            let mut sign = 1i64;
            for i in 0..d {
                if mask >> i & 1 == 1 {
                    pos += lo[i] as usize * self.strides[i];
                    sign = -sign;
                } else {
                    pos += (hi[i] as usize + 1) * self.strides[i];
                }
            }
            total += sign * self.table[pos] as i64;
        }
        total as usize
    }

    pub fn all_marked(&self, b: &IndexBox) -> bool {
        self.count(b) == b.volume()
    }

    pub fn all_marked_range(&self, lo: &[u32], hi: &[u32]) -> bool {
        let vol: usize = lo.iter().zip(hi).map(|(l, h)| (h - l + 1) as usize).product();
        self.count_range(lo, hi) == vol
    }
}
