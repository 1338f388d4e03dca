//! Tilings, exhaustive enumeration and exact counting through the Kasteleyn determinant.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::lattice::{is_black, Cell, CellRegion};

/// Upper bound on the number of cells [`enumerate_tilings`] accepts.
pub const ENUMERATION_LIMIT: usize = 36;

#[derive(Debug, Error, PartialEq)]
pub enum TilingError {
    #[error("region has {0} cells, enumeration is limited to {ENUMERATION_LIMIT}")]
    TooLarge(usize),
    #[error("region is unbalanced: {black} black vs {white} white cells")]
    Imbalance { black: usize, white: usize },
    #[error("Kasteleyn face condition violated at face {0:?}")]
    FaceCondition(Cell),
    #[error("invalid tiling: {0}")]
    Invalid(String),
    #[error("malformed tiling text: {0}")]
    Parse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Orientation {
    /// Covers `(i, j)` and `(i + 1, j)`.
    H,
    /// Covers `(i, j)` and `(i, j + 1)`.
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Domino {
    pub cell: Cell,
    pub orientation: Orientation,
}

impl Domino {
    pub fn new(cell: Cell, orientation: Orientation) -> Self {
        Domino { cell, orientation }
    }

    /// The domino covering two edge-adjacent cells, in either order.
    pub fn covering(a: Cell, b: Cell) -> Option<Self> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if hi == (lo.0 + 1, lo.1) {
            Some(Domino::new(lo, Orientation::H))
        } else if hi == (lo.0, lo.1 + 1) {
            Some(Domino::new(lo, Orientation::V))
        } else {
            None
        }
    }

    pub fn cells(&self) -> [Cell; 2] {
        let (i, j) = self.cell;
        match self.orientation {
            Orientation::H => [(i, j), (i + 1, j)],
            Orientation::V => [(i, j), (i, j + 1)],
        }
    }
}

/// A set of dominoes, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Tiling {
    dominoes: Vec<Domino>,
}

impl Tiling {
    pub fn new(mut dominoes: Vec<Domino>) -> Self {
        dominoes.sort_unstable();
        Tiling { dominoes }
    }

    pub fn dominoes(&self) -> &[Domino] {
        &self.dominoes
    }

    pub fn len(&self) -> usize {
        self.dominoes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dominoes.is_empty()
    }

    pub fn contains(&self, d: &Domino) -> bool {
        self.dominoes.binary_search(d).is_ok()
    }

    /// Maps every covered cell to its partner cell.
    pub fn partner_map(&self) -> HashMap<Cell, Cell> {
        let mut m = HashMap::with_capacity(2 * self.dominoes.len());
        for d in &self.dominoes {
            let [a, b] = d.cells();
            m.insert(a, b);
            m.insert(b, a);
        }
        m
    }

    /// Checks that the dominoes cover the region's cells exactly once each.
    pub fn validate<R: CellRegion + ?Sized>(&self, region: &R) -> Result<(), TilingError> {
        let cells = region.cells();
        let mut covered = BTreeSet::new();
        for d in &self.dominoes {
            for c in d.cells() {
                if !cells.contains(&c) {
                    return Err(TilingError::Invalid(format!("{d:?} covers {c:?} outside the region")));
                }
                if !covered.insert(c) {
                    return Err(TilingError::Invalid(format!("cell {c:?} covered twice")));
                }
            }
        }
        if covered.len() != cells.len() {
            return Err(TilingError::Invalid(format!(
                "{} of {} cells uncovered",
                cells.len() - covered.len(),
                cells.len()
            )));
        }
        Ok(())
    }

    /// Text form: one `i j H|V` line per domino in sorted order, then a blank line.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str) -> Result<Self, TilingError> {
        let mut tilings = parse_tilings(text)?;
        match tilings.len() {
            0 => Ok(Tiling::default()),
            1 => Ok(tilings.remove(0)),
            n => Err(TilingError::Parse(format!("expected one tiling, found {n}"))),
        }
    }
}

impl fmt::Display for Tiling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.dominoes {
            let o = match d.orientation {
                Orientation::H => 'H',
                Orientation::V => 'V',
            };
            writeln!(f, "{} {} {}", d.cell.0, d.cell.1, o)?;
        }
        writeln!(f)
    }
}

/// Parses a stream of blank-line-terminated tilings. A lone blank line is the empty tiling.
pub fn parse_tilings(text: &str) -> Result<Vec<Tiling>, TilingError> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            out.push(Tiling::new(std::mem::take(&mut current)));
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || TilingError::Parse(format!("line {}: {line:?}", lineno + 1));
        if parts.len() != 3 {
            return Err(bad());
        }
        let i: i32 = parts[0].parse().map_err(|_| bad())?;
        let j: i32 = parts[1].parse().map_err(|_| bad())?;
        let o = match parts[2] {
            "H" => Orientation::H,
            "V" => Orientation::V,
            _ => return Err(bad()),
        };
        current.push(Domino::new((i, j), o));
    }
    if !current.is_empty() {
        return Err(TilingError::Parse("last tiling is not blank-line terminated".into()));
    }
    Ok(out)
}

/// All tilings, in the order produced by covering the lexicographically first uncovered cell,
/// horizontal before vertical.
pub fn enumerate_tilings<R: CellRegion + ?Sized>(region: &R) -> Result<Vec<Tiling>, TilingError> {
    let cells = region.cells();
    if cells.len() > ENUMERATION_LIMIT {
        return Err(TilingError::TooLarge(cells.len()));
    }
    let mut out = Vec::new();
    if cells.len() % 2 == 1 {
        return Ok(out);
    }
    let order: Vec<Cell> = cells.iter().copied().collect();
    let mut covered: BTreeSet<Cell> = BTreeSet::new();
    let mut stack = Vec::new();
    backtrack(cells, &order, 0, &mut covered, &mut stack, &mut out);
    Ok(out)
}

fn backtrack(
    cells: &BTreeSet<Cell>,
    order: &[Cell],
    mut pos: usize,
    covered: &mut BTreeSet<Cell>,
    stack: &mut Vec<Domino>,
    out: &mut Vec<Tiling>,
) {
    while pos < order.len() && covered.contains(&order[pos]) {
        pos += 1;
    }
    if pos == order.len() {
        out.push(Tiling::new(stack.clone()));
        return;
    }
    let c = order[pos];
    for o in [Orientation::H, Orientation::V] {
        let d = Domino::new(c, o);
        let other = d.cells()[1];
        if cells.contains(&other) && !covered.contains(&other) {
            covered.insert(c);
            covered.insert(other);
            stack.push(d);
            backtrack(cells, order, pos + 1, covered, stack, out);
            stack.pop();
            covered.remove(&other);
            covered.remove(&c);
        }
    }
}

/// Real Kasteleyn weight of the edge between adjacent cells `a` and `b`: horizontal edges
/// weigh +1 and vertical edges in column `i` weigh `(-1)^i`, so every unit face has product -1.
pub fn kasteleyn_sign(a: Cell, b: Cell) -> i8 {
    if a.1 != b.1 && a.0.rem_euclid(2) == 1 {
        -1
    } else {
        1
    }
}

/// Signed bipartite adjacency matrix, rows indexed by black cells and columns by white cells.
#[derive(Clone, Debug)]
pub struct KasteleynMatrix {
    blacks: Vec<Cell>,
    whites: Vec<Cell>,
    entries: Vec<i8>,
    provenance: BTreeMap<(Cell, Cell), (usize, usize)>,
}

impl KasteleynMatrix {
    pub fn dim(&self) -> usize {
        self.blacks.len()
    }

    pub fn blacks(&self) -> &[Cell] {
        &self.blacks
    }

    pub fn whites(&self) -> &[Cell] {
        &self.whites
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.whites.len() + col]
    }

    /// Matrix position of the entry for the (black, white) cell pair, if adjacent.
    pub fn position(&self, black: Cell, white: Cell) -> Option<(usize, usize)> {
        self.provenance.get(&(black, white)).copied()
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        nalgebra::DMatrix::from_fn(n, n, |r, c| self.get(r, c) as f64)
    }

    fn check_faces(&self, cells: &BTreeSet<Cell>) -> Result<(), TilingError> {
        for &(i, j) in cells {
            let quad = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            if !quad.iter().all(|c| cells.contains(c)) {
                continue;
            }
            let mut prod = 1i32;
            for k in 0..4 {
                let (a, b) = (quad[k], quad[(k + 1) % 4]);
                let (bl, wh) = if is_black(a) { (a, b) } else { (b, a) };
                let (r, c) = self.provenance[&(bl, wh)];
                prod *= self.get(r, c) as i32;
            }
            if prod != -1 {
                return Err(TilingError::FaceCondition((i, j)));
            }
        }
        Ok(())
    }
}

pub fn kasteleyn_matrix<R: CellRegion + ?Sized>(region: &R) -> Result<KasteleynMatrix, TilingError> {
    let cells = region.cells();
    let blacks: Vec<Cell> = cells.iter().copied().filter(|&c| is_black(c)).collect();
    let whites: Vec<Cell> = cells.iter().copied().filter(|&c| !is_black(c)).collect();
    if blacks.len() != whites.len() {
        return Err(TilingError::Imbalance { black: blacks.len(), white: whites.len() });
    }
    let n = blacks.len();
    let white_index: HashMap<Cell, usize> = whites.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let mut entries = vec![0i8; n * n];
    let mut provenance = BTreeMap::new();
    for (r, &b) in blacks.iter().enumerate() {
        for w in crate::lattice::cell_neighbors(b) {
            if let Some(&c) = white_index.get(&w) {
                entries[r * n + c] = kasteleyn_sign(b, w);
                provenance.insert((b, w), (r, c));
            }
        }
    }
    let k = KasteleynMatrix { blacks, whites, entries, provenance };
    k.check_faces(cells)?;
    Ok(k)
}

/// Determinant of an integer matrix by fraction-free (Bareiss) elimination.
pub fn bareiss_determinant(mut a: Vec<Vec<BigInt>>) -> BigInt {
    let n = a.len();
    if n == 0 {
        return BigInt::from(1);
    }
    let mut sign = 1i32;
    let mut prev = BigInt::from(1);
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&r| !a[r][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        let (head, tail) = a.split_at_mut(k + 1);
        let pivot_row = &head[k];
        for row in tail.iter_mut() {
            let lead = row[k].clone();
            for j in k + 1..n {
                let t = &pivot_row[k] * &row[j] - &lead * &pivot_row[j];
                row[j] = t / &prev;
            }
            row[k] = BigInt::zero();
        }
        prev = head[k][k].clone();
    }
    let det = a[n - 1][n - 1].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

/// Exact number of domino tilings, `|det K|`. Unbalanced or odd regions have none.
///
/// The Kasteleyn signs count tilings only for simply connected regions; that holds for every
/// polyomino and Temperleyan region built by this crate.
pub fn count_tilings<R: CellRegion + ?Sized>(region: &R) -> BigInt {
    let k = match kasteleyn_matrix(region) {
        Ok(k) => k,
        Err(TilingError::Imbalance { .. }) => return BigInt::zero(),
        Err(e) => panic!("Kasteleyn construction failed: {e}"),
    };
    let n = k.dim();
    let rows = (0..n)
        .map(|r| (0..n).map(|c| BigInt::from(k.get(r, c))).collect())
        .collect();
    bareiss_determinant(rows).abs()
}
