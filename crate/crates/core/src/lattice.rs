//! Polyominoes, Temperleyan regions and staircase approximations of continuum domains.
//!
//! Cells are addressed by the integer coordinates of their lower-left corner and vertices
//! by integer lattice points. The lattice spacing `epsilon` is only applied when mapping
//! to continuum points, so all combinatorics stay exact.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Cell = (i32, i32);
pub type Vertex = (i32, i32);

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("parity error: {0}")]
    Parity(String),
    #[error("invalid polyomino: {0}")]
    Shape(String),
    #[error("root placement error: {0}")]
    Placement(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("malformed region file: {0}")]
    Format(String),
}

#[inline]
pub fn is_even_cell(c: Cell) -> bool {
    c.0.rem_euclid(2) == 0 && c.1.rem_euclid(2) == 0
}

/// Checkerboard colour: black cells have even coordinate sum.
#[inline]
pub fn is_black(c: Cell) -> bool {
    (c.0 + c.1).rem_euclid(2) == 0
}

/// The four cells sharing an edge with `c`, in the order E, N, W, S.
#[inline]
pub fn cell_neighbors(c: Cell) -> [Cell; 4] {
    [(c.0 + 1, c.1), (c.0, c.1 + 1), (c.0 - 1, c.1), (c.0, c.1 - 1)]
}

/// Anything that owns a finite set of lattice cells.
pub trait CellRegion {
    fn cells(&self) -> &BTreeSet<Cell>;

    fn black_white_counts(&self) -> (usize, usize) {
        let black = self.cells().iter().filter(|&&c| is_black(c)).count();
        (black, self.cells().len() - black)
    }
}

impl CellRegion for BTreeSet<Cell> {
    fn cells(&self) -> &BTreeSet<Cell> {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CornerKind {
    Convex,
    Concave,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Corner {
    pub vertex: Vertex,
    pub kind: CornerKind,
    /// The lattice square adjacent to the corner that contains the interior angle bisector.
    pub square: Cell,
}

/// A simply connected union of lattice squares bounded by a simple closed lattice curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyomino {
    cells: BTreeSet<Cell>,
    epsilon: f64,
    boundary: Vec<Vertex>,
    corners: Vec<Corner>,
}

impl CellRegion for Polyomino {
    fn cells(&self) -> &BTreeSet<Cell> {
        &self.cells
    }
}

/// Counterclockwise boundary of a finite cell set, starting at the lower-left corner of
/// its lexicographically smallest cell. Fails unless the boundary is one simple closed curve,
/// which also rules out holes and disconnected pieces.
pub fn trace_boundary(cells: &BTreeSet<Cell>) -> Result<Vec<Vertex>, LatticeError> {
    let first = *cells
        .iter()
        .next()
        .ok_or_else(|| LatticeError::Shape("empty cell set".into()))?;
    let mut next: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    let mut edge_count = 0usize;
    for &(i, j) in cells {
        // counterclockwise edges of the cell, paired with the cell across each edge
        let edges = [
            ((i, j), (i + 1, j), (i, j - 1)),
            ((i + 1, j), (i + 1, j + 1), (i + 1, j)),
            ((i + 1, j + 1), (i, j + 1), (i, j + 1)),
            ((i, j + 1), (i, j), (i - 1, j)),
        ];
        for (from, to, across) in edges {
            if !cells.contains(&across) {
                if next.insert(from, to).is_some() {
                    return Err(LatticeError::Shape(format!(
                        "boundary touches itself at vertex {from:?}"
                    )));
                }
                edge_count += 1;
            }
        }
    }
    let start = first;
    let mut path = vec![start];
    let mut cur = next[&start];
    while cur != start {
        path.push(cur);
        cur = *next
            .get(&cur)
            .ok_or_else(|| LatticeError::Shape("open boundary".into()))?;
        if path.len() > edge_count {
            return Err(LatticeError::Shape("boundary does not close".into()));
        }
    }
    if path.len() != edge_count {
        return Err(LatticeError::Shape(
            "cells are disconnected or enclose a hole".into(),
        ));
    }
    Ok(path)
}

fn corner_square(cells: &BTreeSet<Cell>, v: Vertex, kind: CornerKind) -> Cell {
    let around = [
        (v.0 - 1, v.1 - 1),
        (v.0, v.1 - 1),
        (v.0 - 1, v.1),
        (v.0, v.1),
    ];
    match kind {
        CornerKind::Convex => *around.iter().find(|c| cells.contains(c)).unwrap(),
        CornerKind::Concave => {
            let missing = *around.iter().find(|c| !cells.contains(c)).unwrap();
            // diagonally opposite the missing square
            (2 * v.0 - 1 - missing.0, 2 * v.1 - 1 - missing.1)
        }
    }
}

/// Signed turn at each vertex of a counterclockwise lattice path: +1 left, -1 right, 0 straight.
pub fn turns(path: &[Vertex]) -> Vec<i32> {
    let n = path.len();
    (0..n)
        .map(|k| {
            let prev = path[(k + n - 1) % n];
            let cur = path[k];
            let nxt = path[(k + 1) % n];
            let din = (cur.0 - prev.0, cur.1 - prev.1);
            let dout = (nxt.0 - cur.0, nxt.1 - cur.1);
            (din.0 * dout.1 - din.1 * dout.0).signum()
        })
        .collect()
}

impl Polyomino {
    pub fn from_cells(cells: BTreeSet<Cell>, epsilon: f64) -> Result<Self, LatticeError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(LatticeError::Shape(format!("epsilon must be positive, got {epsilon}")));
        }
        let boundary = trace_boundary(&cells)?;
        let corners = boundary
            .iter()
            .zip(turns(&boundary))
            .filter(|(_, t)| *t != 0)
            .map(|(&v, t)| {
                let kind = if t > 0 { CornerKind::Convex } else { CornerKind::Concave };
                Corner { vertex: v, kind, square: corner_square(&cells, v, kind) }
            })
            .collect();
        Ok(Polyomino { cells, epsilon, boundary, corners })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Counterclockwise boundary vertices (closed; the first vertex is not repeated).
    pub fn boundary(&self) -> &[Vertex] {
        &self.boundary
    }

    pub fn corners(&self) -> &[Corner] {
        &self.corners
    }

    pub fn is_even(&self) -> bool {
        self.corners.iter().all(|c| is_even_cell(c.square))
    }

    /// Lengths of the straight boundary edges between consecutive corners, with the kinds of
    /// their two extremities.
    pub fn edge_runs(&self) -> Vec<(CornerKind, CornerKind, i32)> {
        let n = self.boundary.len();
        let corner_at: BTreeMap<usize, CornerKind> = self
            .boundary
            .iter()
            .enumerate()
            .filter_map(|(k, v)| {
                self.corners.iter().find(|c| c.vertex == *v).map(|c| (k, c.kind))
            })
            .collect();
        let idx: Vec<(usize, CornerKind)> = corner_at.into_iter().collect();
        (0..idx.len())
            .map(|t| {
                let (a, ka) = idx[t];
                let (b, kb) = idx[(t + 1) % idx.len()];
                let len = (b + n - a) % n;
                let len = if len == 0 { n } else { len };
                (ka, kb, len as i32)
            })
            .collect()
    }

    /// True when every straight edge obeys the even-polyomino length parity rule: odd when
    /// both ends are convex or both concave, even otherwise.
    pub fn edge_parity_holds(&self) -> bool {
        self.edge_runs()
            .iter()
            .all(|&(a, b, len)| (a == b) == (len % 2 == 1))
    }

    /// Cells sharing at least one edge with the exterior.
    pub fn boundary_cells(&self) -> BTreeSet<Cell> {
        self.cells
            .iter()
            .copied()
            .filter(|&c| cell_neighbors(c).iter().any(|n| !self.cells.contains(n)))
            .collect()
    }
}

/// Odd-by-odd rectangle of cells with its lower-left corner at the origin.
pub fn build_even_rectangle(m: i32, n: i32, epsilon: f64) -> Result<Polyomino, LatticeError> {
    if m <= 0 || n <= 0 {
        return Err(LatticeError::Shape(format!("rectangle sides must be positive, got {m}x{n}")));
    }
    if m % 2 == 0 || n % 2 == 0 {
        return Err(LatticeError::Parity(format!(
            "even rectangle needs odd side lengths, got {m}x{n}"
        )));
    }
    let cells = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    Polyomino::from_cells(cells, epsilon)
}

/// An even polyomino with one boundary square of corner parity removed.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperleyanRegion {
    parent: Polyomino,
    root: Cell,
    cells: BTreeSet<Cell>,
    vertices: BTreeSet<Vertex>,
}

impl CellRegion for TemperleyanRegion {
    fn cells(&self) -> &BTreeSet<Cell> {
        &self.cells
    }
}

pub fn cell_vertices(c: Cell) -> [Vertex; 4] {
    [(c.0, c.1), (c.0 + 1, c.1), (c.0, c.1 + 1), (c.0 + 1, c.1 + 1)]
}

/// Checks the root requirements against a parent polyomino.
fn check_root(parent: &Polyomino, root: Cell) -> Result<(), LatticeError> {
    if !parent.cells.contains(&root) {
        return Err(LatticeError::Placement(format!("root {root:?} is not a cell of the parent")));
    }
    if !is_even_cell(root) {
        return Err(LatticeError::Parity(format!(
            "root {root:?} does not have the parity of the corner squares"
        )));
    }
    if !parent.boundary_cells().contains(&root) {
        return Err(LatticeError::Placement(format!("root {root:?} is not adjacent to the boundary")));
    }
    Ok(())
}

pub fn make_temperleyan(parent: Polyomino, root: Cell) -> Result<TemperleyanRegion, LatticeError> {
    if !parent.is_even() {
        let bad: Vec<Cell> = parent
            .corners
            .iter()
            .filter(|c| !is_even_cell(c.square))
            .map(|c| c.square)
            .collect();
        return Err(LatticeError::Validation(format!("parent is not even; odd corner squares {bad:?}")));
    }
    check_root(&parent, root)?;
    let region = TemperleyanRegion::new_unchecked(parent, root);
    let report = validate_temperleyan(&region);
    if !report.all_passed() {
        return Err(LatticeError::Validation(report.failures().join("; ")));
    }
    Ok(region)
}

impl TemperleyanRegion {
    /// Builds the region without checking any structural condition; see [`validate_temperleyan`].
    pub fn new_unchecked(parent: Polyomino, root: Cell) -> Self {
        let mut cells = parent.cells.clone();
        cells.remove(&root);
        let vertices = cells.iter().flat_map(|&c| cell_vertices(c)).collect();
        TemperleyanRegion { parent, root, cells, vertices }
    }

    pub fn parent(&self) -> &Polyomino {
        &self.parent
    }

    pub fn root(&self) -> Cell {
        self.root
    }

    pub fn epsilon(&self) -> f64 {
        self.parent.epsilon
    }

    pub fn vertices(&self) -> &BTreeSet<Vertex> {
        &self.vertices
    }

    /// The lexicographically smallest vertex of the root square that still belongs to the region.
    pub fn reference_vertex(&self) -> Option<Vertex> {
        let mut vs = cell_vertices(self.root);
        vs.sort();
        vs.into_iter().find(|v| self.vertices.contains(v))
    }

    /// Continuum position of a lattice vertex.
    pub fn point(&self, v: Vertex) -> Complex64 {
        Complex64::new(v.0 as f64 * self.epsilon(), v.1 as f64 * self.epsilon())
    }

    /// `Some((m, n))` when the parent is an `m x n` rectangle anchored at the origin and the
    /// root is one of its corner squares.
    pub fn corner_rectangle(&self) -> Option<(i32, i32)> {
        let (lo, hi) = bounding_box(&self.parent.cells)?;
        if lo != (0, 0) {
            return None;
        }
        let (m, n) = (hi.0 + 1, hi.1 + 1);
        if self.parent.cells.len() as i64 != m as i64 * n as i64 {
            return None;
        }
        let corners = [(0, 0), (m - 1, 0), (0, n - 1), (m - 1, n - 1)];
        corners.contains(&self.root).then_some((m, n))
    }

    pub fn to_json(&self) -> String {
        let file = RegionFile {
            epsilon: self.epsilon(),
            root_cell: [self.root.0, self.root.1],
            cells: self.cells.iter().map(|&(i, j)| [i, j]).collect(),
        };
        serde_json::to_string(&file).expect("region serialization cannot fail")
    }

    /// Parses the region file format. The parent is reconstructed as `cells + rootCell`; no
    /// Temperleyan condition is enforced here (use [`validate_temperleyan`]).
    pub fn from_json(text: &str) -> Result<Self, LatticeError> {
        let file: RegionFile =
            serde_json::from_str(text).map_err(|e| LatticeError::Format(e.to_string()))?;
        let root = (file.root_cell[0], file.root_cell[1]);
        let mut cells: BTreeSet<Cell> = BTreeSet::new();
        for [i, j] in file.cells {
            if !cells.insert((i, j)) {
                return Err(LatticeError::Format(format!("duplicate cell [{i}, {j}]")));
            }
        }
        if cells.contains(&root) {
            return Err(LatticeError::Format("rootCell must not be listed among cells".into()));
        }
        cells.insert(root);
        let parent = Polyomino::from_cells(cells, file.epsilon)?;
        Ok(TemperleyanRegion::new_unchecked(parent, root))
    }
}

#[derive(Serialize, Deserialize)]
struct RegionFile {
    epsilon: f64,
    #[serde(rename = "rootCell")]
    root_cell: [i32; 2],
    cells: Vec<[i32; 2]>,
}

pub fn bounding_box(cells: &BTreeSet<Cell>) -> Option<(Cell, Cell)> {
    let mut it = cells.iter();
    let &first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), &(i, j)| {
        ((lo.0.min(i), lo.1.min(j)), (hi.0.max(i), hi.1.max(j)))
    }))
}

pub fn is_connected(cells: &BTreeSet<Cell>) -> bool {
    let Some(&start) = cells.iter().next() else {
        return true;
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for n in cell_neighbors(c) {
            if cells.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == cells.len()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect()
    }
}

pub const CHECK_CORNER_PARITY: &str = "corner_parity";
pub const CHECK_ROOT_PARITY: &str = "root_parity";
pub const CHECK_ROOT_PLACEMENT: &str = "root_on_boundary";
pub const CHECK_EDGE_PARITY: &str = "edge_length_parity";
pub const CHECK_BALANCED: &str = "balanced_coloring";
pub const CHECK_CONNECTED: &str = "connectivity";

/// Reports every structural Temperleyan condition separately; never fails.
pub fn validate_temperleyan(region: &TemperleyanRegion) -> ValidationReport {
    let parent = &region.parent;
    let odd_corners: Vec<Cell> = parent
        .corners
        .iter()
        .filter(|c| !is_even_cell(c.square))
        .map(|c| c.square)
        .collect();
    let bad_runs: Vec<_> = parent
        .edge_runs()
        .into_iter()
        .filter(|&(a, b, len)| (a == b) != (len % 2 == 1))
        .collect();
    let (black, white) = region.black_white_counts();
    let on_boundary = parent.boundary_cells().contains(&region.root);
    let in_parent = parent.cells.contains(&region.root);
    let checks = vec![
        CheckOutcome {
            name: CHECK_CORNER_PARITY,
            passed: odd_corners.is_empty(),
            detail: if odd_corners.is_empty() {
                format!("{} corner squares, all even", parent.corners.len())
            } else {
                format!("odd corner squares {odd_corners:?}")
            },
        },
        CheckOutcome {
            name: CHECK_ROOT_PARITY,
            passed: is_even_cell(region.root),
            detail: format!("root {:?}", region.root),
        },
        CheckOutcome {
            name: CHECK_ROOT_PLACEMENT,
            passed: in_parent && on_boundary,
            detail: format!("in parent: {in_parent}, boundary-adjacent: {on_boundary}"),
        },
        CheckOutcome {
            name: CHECK_EDGE_PARITY,
            passed: bad_runs.is_empty(),
            detail: if bad_runs.is_empty() {
                "all edges obey the parity rule".into()
            } else {
                format!("violating edges {bad_runs:?}")
            },
        },
        CheckOutcome {
            name: CHECK_BALANCED,
            passed: black == white,
            detail: format!("{black} black, {white} white"),
        },
        CheckOutcome {
            name: CHECK_CONNECTED,
            passed: is_connected(&region.cells),
            detail: format!("{} cells", region.cells.len()),
        },
    ];
    ValidationReport { checks }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    HalfPlane,
    Disk { center: (f64, f64), radius: f64 },
    Rectangle { a: f64, b: f64 },
}

/// A continuum domain with a marked boundary point. `basepoint == None` means the default:
/// infinity for the half-plane, the leftmost point for a disk, the origin for a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub basepoint: Option<(f64, f64)>,
}

impl DomainSpec {
    pub fn half_plane() -> Self {
        DomainSpec { kind: DomainKind::HalfPlane, basepoint: None }
    }

    pub fn unit_disk() -> Self {
        Self::disk((0.0, 0.0), 1.0)
    }

    pub fn disk(center: (f64, f64), radius: f64) -> Self {
        DomainSpec { kind: DomainKind::Disk { center, radius }, basepoint: None }
    }

    pub fn rectangle(a: f64, b: f64) -> Self {
        DomainSpec { kind: DomainKind::Rectangle { a, b }, basepoint: None }
    }

    pub fn with_basepoint(mut self, b: (f64, f64)) -> Self {
        self.basepoint = Some(b);
        self
    }

    /// Resolved basepoint; `None` only for the half-plane's point at infinity.
    pub fn resolved_basepoint(&self) -> Option<Complex64> {
        if let Some((x, y)) = self.basepoint {
            return Some(Complex64::new(x, y));
        }
        match self.kind {
            DomainKind::HalfPlane => None,
            DomainKind::Disk { center, radius } => Some(Complex64::new(center.0 - radius, center.1)),
            DomainKind::Rectangle { .. } => Some(Complex64::new(0.0, 0.0)),
        }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        let tol = 1e-9;
        match self.kind {
            DomainKind::Rectangle { a, b } if !(a > 0.0 && b > 0.0) => {
                return Err(LatticeError::UnsupportedDomain(format!(
                    "rectangle sides must be positive, got {a} x {b}"
                )))
            }
            DomainKind::Disk { radius, .. } if !(radius > 0.0) => {
                return Err(LatticeError::UnsupportedDomain(format!("disk radius must be positive, got {radius}")))
            }
            _ => {}
        }
        let Some(b) = self.resolved_basepoint() else {
            return Ok(());
        };
        let on_boundary = match self.kind {
            DomainKind::HalfPlane => b.im.abs() <= tol,
            DomainKind::Disk { center, radius } => {
                ((b - Complex64::new(center.0, center.1)).norm() - radius).abs() <= tol * radius.max(1.0)
            }
            DomainKind::Rectangle { a, b: h } => {
                let inside = (-tol..=a + tol).contains(&b.re) && (-tol..=h + tol).contains(&b.im);
                let on_edge = b.re.abs() <= tol
                    || (b.re - a).abs() <= tol
                    || b.im.abs() <= tol
                    || (b.im - h).abs() <= tol;
                inside && on_edge
            }
        };
        if on_boundary {
            Ok(())
        } else {
            Err(LatticeError::UnsupportedDomain(format!("basepoint {b} is not on the boundary")))
        }
    }
}

fn odd_count(length: f64, epsilon: f64) -> Result<i32, LatticeError> {
    let steps = length / epsilon;
    let m = steps.round();
    if (steps - m).abs() > 1e-9 * steps.max(1.0) || m < 1.0 || (m as i64) % 2 == 0 {
        return Err(LatticeError::Resolution(format!(
            "side {length} is not an odd multiple of epsilon {epsilon} ({steps} cells)"
        )));
    }
    Ok(m as i32)
}

/// Fattens a set of grid nodes into cells: node `(p, q)` becomes the even cell `(2p, 2q)`,
/// each grid edge the mixed-parity cell between its ends, and each unit face the odd cell at its
/// centre. Every corner square of the result is even.
pub fn fatten_nodes(nodes: &BTreeSet<(i32, i32)>) -> BTreeSet<Cell> {
    let mut cells = BTreeSet::new();
    for &(p, q) in nodes {
        cells.insert((2 * p, 2 * q));
        if nodes.contains(&(p + 1, q)) {
            cells.insert((2 * p + 1, 2 * q));
        }
        if nodes.contains(&(p, q + 1)) {
            cells.insert((2 * p, 2 * q + 1));
        }
        if nodes.contains(&(p + 1, q))
            && nodes.contains(&(p, q + 1))
            && nodes.contains(&(p + 1, q + 1))
        {
            cells.insert((2 * p + 1, 2 * q + 1));
        }
    }
    cells
}

/// Keeps the largest 4-connected component of a node set and fills its holes.
fn repair_nodes(nodes: &BTreeSet<(i32, i32)>) -> BTreeSet<(i32, i32)> {
    let mut best: BTreeSet<(i32, i32)> = BTreeSet::new();
    let mut seen: BTreeSet<(i32, i32)> = BTreeSet::new();
    for &s in nodes {
        if seen.contains(&s) {
            continue;
        }
        let mut comp = BTreeSet::from([s]);
        let mut queue = VecDeque::from([s]);
        seen.insert(s);
        while let Some(c) = queue.pop_front() {
            for n in cell_neighbors(c) {
                if nodes.contains(&n) && seen.insert(n) {
                    comp.insert(n);
                    queue.push_back(n);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    // flood the complement from outside the bounding box; anything unreached is a hole
    let Some((lo, hi)) = bounding_box(&best) else {
        return best;
    };
    let (lo, hi) = ((lo.0 - 1, lo.1 - 1), (hi.0 + 1, hi.1 + 1));
    let mut outside = BTreeSet::from([lo]);
    let mut queue = VecDeque::from([lo]);
    while let Some(c) = queue.pop_front() {
        // 8-connectivity for the exterior so diagonal gaps are not treated as holes
        for dx in -1..=1 {
            for dy in -1..=1 {
                let n = (c.0 + dx, c.1 + dy);
                if n.0 < lo.0 || n.1 < lo.1 || n.0 > hi.0 || n.1 > hi.1 {
                    continue;
                }
                if !best.contains(&n) && outside.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    let mut filled = best.clone();
    for x in lo.0..=hi.0 {
        for y in lo.1..=hi.1 {
            if !best.contains(&(x, y)) && !outside.contains(&(x, y)) {
                filled.insert((x, y));
            }
        }
    }
    filled
}

/// Hausdorff distance between a closed lattice polygon (scaled by `epsilon`) and a circle.
/// The circle side is sampled at `samples` equally spaced points.
pub fn hausdorff_to_circle(
    path: &[Vertex],
    epsilon: f64,
    center: Complex64,
    radius: f64,
    samples: usize,
) -> f64 {
    let pts: Vec<Complex64> = path
        .iter()
        .map(|&(x, y)| Complex64::new(x as f64 * epsilon, y as f64 * epsilon))
        .collect();
    let n = pts.len();
    let mut d_poly = 0.0f64;
    for k in 0..n {
        let (a, b) = (pts[k], pts[(k + 1) % n]);
        let near = closest_on_segment(center, a, b);
        let dmin = (near - center).norm();
        let dmax = (a - center).norm().max((b - center).norm());
        d_poly = d_poly.max((dmin - radius).abs()).max((dmax - radius).abs());
    }
    let mut d_circle = 0.0f64;
    for s in 0..samples {
        let t = std::f64::consts::TAU * s as f64 / samples as f64;
        let c = center + Complex64::from_polar(radius, t);
        let best = (0..n)
            .map(|k| (closest_on_segment(c, pts[k], pts[(k + 1) % n]) - c).norm())
            .fold(f64::INFINITY, f64::min);
        d_circle = d_circle.max(best);
    }
    d_poly.max(d_circle)
}

/// Hausdorff distance between a closed lattice polygon and the boundary of `[0,a] x [0,b]`,
/// evaluated at polygon vertices and rectangle corners (both curves are polygons).
fn hausdorff_to_rectangle(path: &[Vertex], epsilon: f64, a: f64, b: f64) -> f64 {
    let pts: Vec<Complex64> = path
        .iter()
        .map(|&(x, y)| Complex64::new(x as f64 * epsilon, y as f64 * epsilon))
        .collect();
    let rect = [
        Complex64::new(0.0, 0.0),
        Complex64::new(a, 0.0),
        Complex64::new(a, b),
        Complex64::new(0.0, b),
    ];
    let dist_to = |p: Complex64, poly: &[Complex64]| {
        (0..poly.len())
            .map(|k| (closest_on_segment(p, poly[k], poly[(k + 1) % poly.len()]) - p).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let d1 = pts.iter().map(|&p| dist_to(p, &rect)).fold(0.0, f64::max);
    let d2 = rect.iter().map(|&p| dist_to(p, &pts)).fold(0.0, f64::max);
    d1.max(d2)
}

pub(crate) fn closest_on_segment(p: Complex64, a: Complex64, b: Complex64) -> Complex64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a) * d.conj()).re / len2;
    a + d * t.clamp(0.0, 1.0)
}

/// Builds a Temperleyan region approximating a rectangle or a disk at lattice spacing `epsilon`.
///
/// Rectangles must be exact odd multiples of `epsilon`. Disks are approximated by the grid
/// nodes `(p, q)` whose even cell `(2p, 2q)` has its centre inside the disk, repaired to a
/// simply connected set and fattened. The root is the boundary-adjacent even cell whose centre
/// is nearest the basepoint (ties broken lexicographically) and must lie within `2 epsilon`.
pub fn approximate_domain(spec: &DomainSpec, epsilon: f64) -> Result<TemperleyanRegion, LatticeError> {
    spec.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(LatticeError::Resolution(format!("epsilon must be positive, got {epsilon}")));
    }
    let parent = match spec.kind {
        DomainKind::HalfPlane => {
            return Err(LatticeError::UnsupportedDomain("the half-plane has no finite approximation".into()))
        }
        DomainKind::Rectangle { a, b } => {
            let m = odd_count(a, epsilon)?;
            let n = odd_count(b, epsilon)?;
            build_even_rectangle(m, n, epsilon)?
        }
        DomainKind::Disk { center, radius } => {
            let c = Complex64::new(center.0, center.1);
            let r_nodes = (radius / (2.0 * epsilon)).ceil() as i32 + 2;
            let (pc, qc) = ((c.re / (2.0 * epsilon)).round() as i32, (c.im / (2.0 * epsilon)).round() as i32);
            let mut nodes = BTreeSet::new();
            for p in pc - r_nodes..=pc + r_nodes {
                for q in qc - r_nodes..=qc + r_nodes {
                    let centre = Complex64::new((2 * p) as f64 + 0.5, (2 * q) as f64 + 0.5) * epsilon;
                    if (centre - c).norm() < radius {
                        nodes.insert((p, q));
                    }
                }
            }
            let nodes = repair_nodes(&nodes);
            if nodes.is_empty() {
                return Err(LatticeError::Resolution(format!(
                    "epsilon {epsilon} too coarse for radius {radius}"
                )));
            }
            let parent = Polyomino::from_cells(fatten_nodes(&nodes), epsilon)
                .map_err(|e| LatticeError::Resolution(format!("staircase repair failed: {e}")))?;
            if !parent.is_even() {
                return Err(LatticeError::Resolution("staircase approximation is not even".into()));
            }
            let h = hausdorff_to_circle(parent.boundary(), epsilon, c, radius, 4096);
            if h > 2.0 * epsilon {
                return Err(LatticeError::Resolution(format!(
                    "boundary is {h:.4} from the circle, more than 2 epsilon = {}",
                    2.0 * epsilon
                )));
            }
            parent
        }
    };
    if let DomainKind::Rectangle { a, b } = spec.kind {
        let h = hausdorff_to_rectangle(parent.boundary(), epsilon, a, b);
        if h > 2.0 * epsilon {
            return Err(LatticeError::Resolution(format!("boundary is {h} from the rectangle")));
        }
    }
    let basepoint = spec.resolved_basepoint().expect("finite domains have a basepoint");
    let centre = |c: Cell| Complex64::new(c.0 as f64 + 0.5, c.1 as f64 + 0.5) * epsilon;
    let root = parent
        .boundary_cells()
        .into_iter()
        .filter(|&c| is_even_cell(c))
        .min_by(|&x, &y| {
            let (dx, dy) = ((centre(x) - basepoint).norm(), (centre(y) - basepoint).norm());
            dx.partial_cmp(&dy).unwrap().then(x.cmp(&y))
        })
        .ok_or_else(|| LatticeError::Resolution("no admissible root cell".into()))?;
    let d = (centre(root) - basepoint).norm();
    if d > 2.0 * epsilon {
        return Err(LatticeError::Resolution(format!(
            "nearest admissible root is {d:.4} from the basepoint, more than 2 epsilon"
        )));
    }
    make_temperleyan(parent, root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_rectangle() {
        let p = build_even_rectangle(1, 1, 1.0).unwrap();
        assert_eq!(p.cells().len(), 1);
        assert_eq!(p.corners().len(), 4);
        assert!(p.corners().iter().all(|c| c.kind == CornerKind::Convex));
        assert_eq!(p.boundary(), &[(0, 0), (1, 0), (1, 1), (0, 1)]);
    }

    #[test]
    fn three_by_three_corner_squares_are_even() {
        let p = build_even_rectangle(3, 3, 1.0).unwrap();
        let squares: BTreeSet<Cell> = p.corners().iter().map(|c| c.square).collect();
        assert_eq!(squares, BTreeSet::from([(0, 0), (2, 0), (0, 2), (2, 2)]));
        assert!(p.is_even());
    }

    #[test]
    fn five_by_three_edges_are_odd() {
        let p = build_even_rectangle(5, 3, 1.0).unwrap();
        assert_eq!(p.cells().len(), 15);
        let runs = p.edge_runs();
        assert_eq!(runs.len(), 4);
        let mut lens: Vec<i32> = runs.iter().map(|r| r.2).collect();
        lens.sort();
        assert_eq!(lens, vec![3, 3, 5, 5]);
        assert!(runs.iter().all(|r| r.0 == CornerKind::Convex && r.1 == CornerKind::Convex));
        assert!(p.edge_parity_holds());
    }

    #[test]
    fn even_sides_rejected() {
        assert!(matches!(build_even_rectangle(2, 3, 1.0), Err(LatticeError::Parity(_))));
        assert!(matches!(build_even_rectangle(3, 4, 1.0), Err(LatticeError::Parity(_))));
    }

    #[test]
    fn temperleyan_three_by_three() {
        let r = make_temperleyan(build_even_rectangle(3, 3, 1.0).unwrap(), (0, 0)).unwrap();
        assert_eq!(r.cells().len(), 8);
        assert_eq!(r.black_white_counts(), (4, 4));
        assert_eq!(r.reference_vertex(), Some((0, 1)));
        assert_eq!(r.corner_rectangle(), Some((3, 3)));
    }

    #[test]
    fn degenerate_single_cell_region() {
        let r = make_temperleyan(build_even_rectangle(1, 1, 1.0).unwrap(), (0, 0)).unwrap();
        assert!(r.cells().is_empty());
        assert!(r.vertices().is_empty());
    }

    #[test]
    fn odd_root_rejected() {
        let p = build_even_rectangle(3, 3, 1.0).unwrap();
        assert!(matches!(make_temperleyan(p.clone(), (1, 0)), Err(LatticeError::Parity(_))));
        // interior even cell of a 5x5 is not on the boundary
        let p5 = build_even_rectangle(5, 5, 1.0).unwrap();
        assert!(matches!(make_temperleyan(p5, (2, 2)), Err(LatticeError::Placement(_))));
    }

    #[test]
    fn two_by_two_parent_fails_corner_parity() {
        let cells = BTreeSet::from([(0, 0), (1, 0), (0, 1), (1, 1)]);
        let p = Polyomino::from_cells(cells, 1.0).unwrap();
        assert!(!p.is_even());
        let r = TemperleyanRegion::new_unchecked(p.clone(), (0, 0));
        let report = validate_temperleyan(&r);
        assert!(!report.check(CHECK_CORNER_PARITY).unwrap().passed);
        assert!(matches!(make_temperleyan(p, (0, 0)), Err(LatticeError::Validation(_))));
    }

    #[test]
    fn l_shape_passes_all_checks() {
        // two odd rectangles sharing parity: 5x3 and 3x5 overlapping at the origin
        let mut cells = BTreeSet::new();
        for i in 0..5 {
            for j in 0..3 {
                cells.insert((i, j));
            }
        }
        for i in 0..3 {
            for j in 0..5 {
                cells.insert((i, j));
            }
        }
        let p = Polyomino::from_cells(cells, 1.0).unwrap();
        assert!(p.is_even());
        assert!(p.edge_parity_holds());
        assert_eq!(p.corners().iter().filter(|c| c.kind == CornerKind::Concave).count(), 1);
        let r = make_temperleyan(p, (4, 0)).unwrap();
        assert!(validate_temperleyan(&r).all_passed());
    }

    #[test]
    fn holes_and_pinches_rejected() {
        let ring: BTreeSet<Cell> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&c| c != (1, 1))
            .collect();
        assert!(Polyomino::from_cells(ring, 1.0).is_err());
        let pinch = BTreeSet::from([(0, 0), (1, 1)]);
        assert!(Polyomino::from_cells(pinch, 1.0).is_err());
    }

    #[test]
    fn rectangle_approximation() {
        let r = approximate_domain(&DomainSpec::rectangle(1.0, 1.0), 1.0 / 41.0).unwrap();
        assert_eq!(r.cells().len(), 41 * 41 - 1);
        assert_eq!(r.root(), (0, 0));
        assert_eq!(r.corner_rectangle(), Some((41, 41)));
    }

    #[test]
    fn coarse_rectangle_is_a_resolution_error() {
        let spec = DomainSpec::rectangle(1.0, 1.0).with_basepoint((0.5, 0.0));
        assert!(matches!(approximate_domain(&spec, 0.5), Err(LatticeError::Resolution(_))));
    }

    #[test]
    fn basepoint_off_boundary_rejected() {
        let spec = DomainSpec::rectangle(1.0, 1.0).with_basepoint((0.5, 0.5));
        assert!(matches!(approximate_domain(&spec, 1.0 / 41.0), Err(LatticeError::UnsupportedDomain(_))));
    }

    #[test]
    fn disk_approximation_within_two_epsilon() {
        let eps = 1.0 / 40.0;
        let r = approximate_domain(&DomainSpec::unit_disk(), eps).unwrap();
        let h = hausdorff_to_circle(r.parent().boundary(), eps, Complex64::new(0.0, 0.0), 1.0, 20000);
        assert!(h <= 2.0 * eps, "hausdorff {h}");
        assert!(validate_temperleyan(&r).all_passed());
        let root_centre = Complex64::new(r.root().0 as f64 + 0.5, r.root().1 as f64 + 0.5) * eps;
        assert!((root_centre - Complex64::new(-1.0, 0.0)).norm() <= 2.0 * eps);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let r = approximate_domain(&DomainSpec::unit_disk(), 0.1).unwrap();
        let text = r.to_json();
        let back = TemperleyanRegion::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn json_rejects_garbage() {
        assert!(matches!(TemperleyanRegion::from_json("{\"epsilon\":1}"), Err(LatticeError::Format(_))));
    }
}
