//! Exact uniform samplers for domino tilings.
//!
//! Two independent routes are provided:
//! * sequential placement with conditional probabilities read off the inverse Kasteleyn
//!   matrix, for any tileable simply connected region;
//! * a uniform spanning tree from Wilson's algorithm pushed through Temperley's bijection,
//!   for odd-by-odd rectangles with a corner removed.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::enumerate::{kasteleyn_matrix, Domino, KasteleynMatrix, Tiling, TilingError};
use crate::lattice::{is_black, Cell, CellRegion, TemperleyanRegion};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("region has no domino tiling")]
    NoTiling,
    #[error("unsupported region: {0}")]
    UnsupportedRegion(String),
    #[error("malformed spanning tree: {0}")]
    Structure(String),
    #[error(transparent)]
    Tiling(#[from] TilingError),
}

/// Full recomputation period of the working inverse.
pub const REFRESH_INTERVAL: usize = 256;
/// Pivot magnitude below which the rank-one update is replaced by a recomputation.
pub const PIVOT_FLOOR: f64 = 1e-8;

/// Working state of the sequential Kasteleyn sampler. One state per worker.
pub struct SamplerState {
    kasteleyn: KasteleynMatrix,
    order: Vec<Cell>,
    cursor: usize,
    cell_slot: std::collections::HashMap<Cell, (bool, usize)>,
    /// Inverse restricted to live indices, stored over all `n_white x n_black` positions.
    inverse: Vec<f64>,
    live_black: Vec<bool>,
    live_white: Vec<bool>,
    placed: Vec<Domino>,
    since_refresh: usize,
    recomputations: usize,
    rng: rng::Rng,
}

impl SamplerState {
    pub fn new<R: CellRegion + ?Sized>(region: &R, rng: rng::Rng) -> Result<Self, SamplerError> {
        let kasteleyn = match kasteleyn_matrix(region) {
            Ok(k) => k,
            Err(TilingError::Imbalance { .. }) => return Err(SamplerError::NoTiling),
            Err(e) => return Err(e.into()),
        };
        let n = kasteleyn.dim();
        let mut cell_slot = std::collections::HashMap::with_capacity(2 * n);
        for (k, &c) in kasteleyn.blacks().iter().enumerate() {
            cell_slot.insert(c, (true, k));
        }
        for (k, &c) in kasteleyn.whites().iter().enumerate() {
            cell_slot.insert(c, (false, k));
        }
        let mut state = SamplerState {
            order: region.cells().iter().copied().collect(),
            cursor: 0,
            cell_slot,
            inverse: vec![0.0; n * n],
            live_black: vec![true; n],
            live_white: vec![true; n],
            placed: Vec::with_capacity(n),
            since_refresh: 0,
            recomputations: 0,
            rng,
            kasteleyn,
        };
        if n > 0 {
            state.recompute()?;
        }
        Ok(state)
    }

    /// Number of from-scratch inversions performed so far (the initial one included).
    pub fn recomputations(&self) -> usize {
        self.recomputations
    }

    pub fn placed(&self) -> &[Domino] {
        &self.placed
    }

    fn recompute(&mut self) -> Result<(), SamplerError> {
        let n = self.kasteleyn.dim();
        let rows: Vec<usize> = (0..n).filter(|&r| self.live_black[r]).collect();
        let cols: Vec<usize> = (0..n).filter(|&c| self.live_white[c]).collect();
        let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.kasteleyn.get(rows[r], cols[c]) as f64);
        let lu = sub.lu();
        // det K is an integer, so |det| < 1/2 means it vanishes
        let log_det: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
        if !(log_det > 0.5f64.ln()) {
            return Err(SamplerError::NoTiling);
        }
        let inv = lu.try_inverse().ok_or(SamplerError::NoTiling)?;
        // inv is indexed (live white, live black)
        for (a, &w) in cols.iter().enumerate() {
            for (b, &bl) in rows.iter().enumerate() {
                self.inverse[w * n + bl] = inv[(a, b)];
            }
        }
        self.since_refresh = 0;
        self.recomputations += 1;
        Ok(())
    }

    fn probability(&self, black: usize, white: usize) -> f64 {
        let n = self.kasteleyn.dim();
        self.kasteleyn.get(black, white) as f64 * self.inverse[white * n + black]
    }

    fn is_covered(&self, c: Cell) -> bool {
        match self.cell_slot.get(&c) {
            None => true,
            Some(&(true, k)) => !self.live_black[k],
            Some(&(false, k)) => !self.live_white[k],
        }
    }

    /// Places the domino at the lexicographically first uncovered cell. Returns `false` when
    /// the tiling is complete.
    pub fn step(&mut self) -> Result<bool, SamplerError> {
        while self.cursor < self.order.len() && self.is_covered(self.order[self.cursor]) {
            self.cursor += 1;
        }
        if self.cursor == self.order.len() {
            return Ok(false);
        }
        let c = self.order[self.cursor];
        // earlier neighbours are already covered; only the right and upper ones remain
        let mut options: Vec<(Cell, usize, usize, f64)> = Vec::with_capacity(2);
        for other in [(c.0 + 1, c.1), (c.0, c.1 + 1)] {
            if self.is_covered(other) {
                continue;
            }
            let (b, w) = if is_black(c) { (c, other) } else { (other, c) };
            let bi = self.cell_slot[&b].1;
            let wi = self.cell_slot[&w].1;
            let p = self.probability(bi, wi).max(0.0);
            options.push((other, bi, wi, p));
        }
        let total: f64 = options.iter().map(|o| o.3).sum();
        if options.is_empty() || !(total > 0.0) {
            return Err(SamplerError::NoTiling);
        }
        let u = self.rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = options[options.len() - 1];
        for o in &options {
            acc += o.3;
            if u < acc {
                chosen = *o;
                break;
            }
        }
        let (other, bi, wi, _) = chosen;
        self.place(bi, wi)?;
        self.placed.push(Domino::covering(c, other).expect("neighbours are adjacent"));
        Ok(true)
    }

    fn place(&mut self, bi: usize, wi: usize) -> Result<(), SamplerError> {
        let n = self.kasteleyn.dim();
        let pivot = self.inverse[wi * n + bi];
        self.live_black[bi] = false;
        self.live_white[wi] = false;
        self.since_refresh += 1;
        let remaining = self.live_black.iter().any(|&x| x);
        if !remaining {
            return Ok(());
        }
        if pivot.abs() < PIVOT_FLOOR || self.since_refresh >= REFRESH_INTERVAL {
            return self.recompute();
        }
        // inverse of K with row bi and column wi deleted:
        // B'[x][y] = B[x][y] - B[x][bi] * B[wi][y] / B[wi][bi]
        let col_b: Vec<(usize, f64)> = (0..n)
            .filter(|&x| self.live_white[x])
            .map(|x| (x, self.inverse[x * n + bi]))
            .collect();
        let row_w: Vec<(usize, f64)> = (0..n)
            .filter(|&y| self.live_black[y])
            .map(|y| (y, self.inverse[wi * n + y] / pivot))
            .collect();
        for &(x, bx) in &col_b {
            if bx == 0.0 {
                continue;
            }
            let row = &mut self.inverse[x * n..(x + 1) * n];
            for &(y, wy) in &row_w {
                row[y] -= bx * wy;
            }
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<Tiling, SamplerError> {
        while self.step()? {}
        Ok(Tiling::new(self.placed))
    }
}

pub fn sample_tiling_kasteleyn_with<R: CellRegion + ?Sized>(
    region: &R,
    rng: rng::Rng,
) -> Result<Tiling, SamplerError> {
    SamplerState::new(region, rng)?.run()
}

/// One uniform tiling by sequential Kasteleyn sampling, reproducible from `seed`.
pub fn sample_tiling_kasteleyn<R: CellRegion + ?Sized>(region: &R, seed: u64) -> Result<Tiling, SamplerError> {
    sample_tiling_kasteleyn_with(region, rng::stream(seed, 0))
}

/// Spanning tree of the `width x height` node grid, as parent pointers towards `root`.
/// Node `(p, q)` has index `q * width + p` and stands for the even cell `(2p, 2q)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpanningTree {
    width: usize,
    height: usize,
    root: usize,
    parent: Vec<Option<usize>>,
}

impl SpanningTree {
    pub fn new(width: usize, height: usize, root: usize, parent: Vec<Option<usize>>) -> Result<Self, SamplerError> {
        let t = SpanningTree { width, height, root, parent };
        t.check()?;
        Ok(t)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn node(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        let (pa, qa) = self.node(a);
        let (pb, qb) = self.node(b);
        pa.abs_diff(pb) + qa.abs_diff(qb) == 1
    }

    fn check(&self) -> Result<(), SamplerError> {
        let n = self.width * self.height;
        let err = |m: String| Err(SamplerError::Structure(m));
        if n == 0 || self.parent.len() != n || self.root >= n {
            return err(format!("{} parent slots for a {}x{} grid", self.parent.len(), self.width, self.height));
        }
        for (v, p) in self.parent.iter().enumerate() {
            match (v == self.root, p) {
                (true, Some(_)) => return err("root has a parent".into()),
                (false, None) => return err(format!("node {v} has no parent")),
                (false, Some(p)) if *p >= n || !self.adjacent(v, *p) => {
                    return err(format!("node {v} points at non-neighbour {p}"))
                }
                _ => {}
            }
        }
        // every node must reach the root; memoise nodes already known to
        let mut state = vec![0u8; n]; // 0 unknown, 1 on current path, 2 reaches root
        state[self.root] = 2;
        for start in 0..n {
            let mut path = Vec::new();
            let mut v = start;
            while state[v] == 0 {
                state[v] = 1;
                path.push(v);
                v = self.parent[v].unwrap();
            }
            if state[v] == 1 {
                return err(format!("cycle through node {v}"));
            }
            for u in path {
                state[u] = 2;
            }
        }
        Ok(())
    }
}

/// Node grid of an odd-by-odd rectangle with a corner removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TemperleyGrid {
    pub width: usize,
    pub height: usize,
    pub root: usize,
}

impl TemperleyGrid {
    pub fn from_region(region: &TemperleyanRegion) -> Result<Self, SamplerError> {
        let (m, n) = region.corner_rectangle().ok_or_else(|| {
            SamplerError::UnsupportedRegion("Temperley bijection needs an odd rectangle minus a corner".into())
        })?;
        let width = ((m + 1) / 2) as usize;
        let height = ((n + 1) / 2) as usize;
        let (rp, rq) = ((region.root().0 / 2) as usize, (region.root().1 / 2) as usize);
        Ok(TemperleyGrid { width, height, root: rq * width + rp })
    }

    pub fn nodes(&self) -> usize {
        self.width * self.height
    }
}

/// Uniform spanning tree of the node grid by loop-erased random walks towards the root.
pub fn wilson_tree<R: Rng + ?Sized>(grid: &TemperleyGrid, rng: &mut R) -> SpanningTree {
    let n = grid.nodes();
    let (w, h) = (grid.width, grid.height);
    let mut in_tree = vec![false; n];
    let mut next = vec![usize::MAX; n];
    in_tree[grid.root] = true;
    let mut nbrs = [0usize; 4];
    for start in 0..n {
        let mut u = start;
        while !in_tree[u] {
            let (p, q) = (u % w, u / w);
            let mut deg = 0;
            if p + 1 < w {
                nbrs[deg] = u + 1;
                deg += 1;
            }
            if q + 1 < h {
                nbrs[deg] = u + w;
                deg += 1;
            }
            if p > 0 {
                nbrs[deg] = u - 1;
                deg += 1;
            }
            if q > 0 {
                nbrs[deg] = u - w;
                deg += 1;
            }
            let v = nbrs[rng.random_range(0..deg)];
            next[u] = v;
            u = v;
        }
        u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    let parent = (0..n).map(|v| (v != grid.root).then(|| next[v])).collect();
    SpanningTree { width: w, height: h, root: grid.root, parent }
}

fn node_cell(width: usize, v: usize) -> Cell {
    ((2 * (v % width)) as i32, (2 * (v / width)) as i32)
}

/// Tiling of the corner-deleted rectangle encoded by a spanning tree of its node grid.
///
/// Each non-root node is paired with the edge square towards its parent; each face square is
/// paired with the edge square towards its parent in the dual tree, rooted at the outer face.
pub fn temperley_tiling(tree: &SpanningTree) -> Result<Tiling, SamplerError> {
    tree.check()?;
    temperley_tiling_unchecked(tree)
}

fn temperley_tiling_unchecked(tree: &SpanningTree) -> Result<Tiling, SamplerError> {
    let (w, h) = (tree.width, tree.height);
    let corners = [0, w - 1, (h - 1) * w, h * w - 1];
    if !corners.contains(&tree.root) {
        return Err(SamplerError::Structure("tree root must be a corner node".into()));
    }
    // cell grid of the full (2w-1) x (2h-1) rectangle
    let cw = 2 * w - 1;
    let at = |x: usize, y: usize| y * cw + x;
    let mut used = vec![false; cw * (2 * h - 1)];
    let mut dominoes = Vec::with_capacity(w * h + (w - 1) * h.saturating_sub(1));
    for v in 0..w * h {
        if let Some(p) = tree.parent[v] {
            let a = node_cell(w, v);
            let b = node_cell(w, p);
            let edge = ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
            used[at(edge.0 as usize, edge.1 as usize)] = true;
            dominoes.push(Domino::covering(a, edge).unwrap());
        }
    }
    let (fw, fh) = (w - 1, h.saturating_sub(1));
    if fw == 0 || fh == 0 {
        return Ok(Tiling::new(dominoes));
    }
    let mut seen = vec![false; fw * fh];
    let mut queue = VecDeque::with_capacity(fw * fh);
    // face (p, q) has centre cell (2p+1, 2q+1); its four sides are edge cells
    let mut visit = |p: usize, q: usize, edge: (usize, usize), seen: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        let f = q * fw + p;
        if !seen[f] && !used[at(edge.0, edge.1)] {
            seen[f] = true;
            queue.push_back(f);
            dominoes.push(Domino::covering(face_cell(fw, f), (edge.0 as i32, edge.1 as i32)).unwrap());
        }
    };
    // faces reached from the outer face through boundary edge cells
    for p in 0..fw {
        visit(p, 0, (2 * p + 1, 0), &mut seen, &mut queue);
        if fh > 0 {
            visit(p, fh - 1, (2 * p + 1, 2 * fh), &mut seen, &mut queue);
        }
    }
    for q in 0..fh {
        visit(0, q, (0, 2 * q + 1), &mut seen, &mut queue);
        visit(fw - 1, q, (2 * fw, 2 * q + 1), &mut seen, &mut queue);
    }
    while let Some(f) = queue.pop_front() {
        let (p, q) = (f % fw, f / fw);
        if q > 0 {
            visit(p, q - 1, (2 * p + 1, 2 * q), &mut seen, &mut queue);
        }
        if q + 1 < fh {
            visit(p, q + 1, (2 * p + 1, 2 * q + 2), &mut seen, &mut queue);
        }
        if p > 0 {
            visit(p - 1, q, (2 * p, 2 * q + 1), &mut seen, &mut queue);
        }
        if p + 1 < fw {
            visit(p + 1, q, (2 * p + 2, 2 * q + 1), &mut seen, &mut queue);
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(SamplerError::Structure("dual graph is not connected".into()));
    }
    Ok(Tiling::new(dominoes))
}

fn face_cell(fw: usize, f: usize) -> Cell {
    ((2 * (f % fw) + 1) as i32, (2 * (f / fw) + 1) as i32)
}

/// Inverse of [`temperley_tiling`]: reads parent pointers off the dominoes covering node squares.
pub fn temperley_tree(region: &TemperleyanRegion, tiling: &Tiling) -> Result<SpanningTree, SamplerError> {
    let grid = TemperleyGrid::from_region(region)?;
    tiling.validate(region)?;
    let partner = tiling.partner_map();
    let w = grid.width;
    let mut parent = vec![None; grid.nodes()];
    for v in 0..grid.nodes() {
        if v == grid.root {
            continue;
        }
        let a = node_cell(w, v);
        let e = partner[&a];
        let (pi, qi) = (2 * e.0 - a.0, 2 * e.1 - a.1);
        if pi < 0 || qi < 0 || pi % 2 != 0 || qi % 2 != 0 {
            return Err(SamplerError::Structure(format!("node square {a:?} paired outside the grid")));
        }
        parent[v] = Some((qi / 2) as usize * w + (pi / 2) as usize);
    }
    SpanningTree::new(w, grid.height, grid.root, parent)
}

pub fn sample_tiling_wilson_with<R: Rng + ?Sized>(
    region: &TemperleyanRegion,
    rng: &mut R,
) -> Result<Tiling, SamplerError> {
    let grid = TemperleyGrid::from_region(region)?;
    temperley_tiling_unchecked(&wilson_tree(&grid, rng))
}

/// One uniform tiling of a corner-deleted odd rectangle via Wilson's algorithm.
pub fn sample_tiling_wilson(region: &TemperleyanRegion, seed: u64) -> Result<Tiling, SamplerError> {
    sample_tiling_wilson_with(region, &mut rng::stream(seed, 0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Kasteleyn,
    Wilson,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kasteleyn" => Ok(Algorithm::Kasteleyn),
            "wilson" => Ok(Algorithm::Wilson),
            _ => Err(format!("unknown algorithm {s:?}")),
        }
    }
}

/// `count` tilings from replica streams `0..count` of `seed`.
pub fn sample_many(
    region: &TemperleyanRegion,
    algo: Algorithm,
    seed: u64,
    count: usize,
) -> Result<Vec<Tiling>, SamplerError> {
    use rayon::prelude::*;
    (0..count as u64)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(seed, s);
            match algo {
                Algorithm::Kasteleyn => sample_tiling_kasteleyn_with(region, r),
                Algorithm::Wilson => sample_tiling_wilson_with(region, &mut r),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::enumerate_tilings;
    use crate::lattice::{build_even_rectangle, make_temperleyan};
    use std::collections::BTreeSet;

    fn corner_rect(m: i32, n: i32) -> TemperleyanRegion {
        make_temperleyan(build_even_rectangle(m, n, 1.0).unwrap(), (0, 0)).unwrap()
    }

    #[test]
    fn unique_tiling_is_always_returned() {
        // 1x3 minus an end cell has exactly one tiling
        let r = corner_rect(1, 3);
        let only = enumerate_tilings(&r).unwrap();
        assert_eq!(only.len(), 1);
        for seed in 0..20 {
            assert_eq!(sample_tiling_kasteleyn(&r, seed).unwrap(), only[0]);
            assert_eq!(sample_tiling_wilson(&r, seed).unwrap(), only[0]);
        }
    }

    #[test]
    fn untileable_region_is_an_error() {
        // 2x2 with opposite corners removed: two white cells
        let diagonal: BTreeSet<Cell> = [(0, 1), (1, 0)].into_iter().collect();
        assert_eq!(sample_tiling_kasteleyn(&diagonal, 1), Err(SamplerError::NoTiling));
        // balanced overall, but each three-cell strip is unbalanced
        let strips: BTreeSet<Cell> = [(0, 0), (1, 0), (2, 0), (5, 0), (6, 0), (7, 0)].into_iter().collect();
        assert_eq!(sample_tiling_kasteleyn(&strips, 1), Err(SamplerError::NoTiling));
    }

    #[test]
    fn samples_are_valid_and_seed_reproducible() {
        let r = corner_rect(7, 5);
        for seed in 0..10 {
            let a = sample_tiling_kasteleyn(&r, seed).unwrap();
            a.validate(&r).unwrap();
            assert_eq!(a, sample_tiling_kasteleyn(&r, seed).unwrap());
            let b = sample_tiling_wilson(&r, seed).unwrap();
            b.validate(&r).unwrap();
            assert_eq!(b, sample_tiling_wilson(&r, seed).unwrap());
        }
    }

    #[test]
    fn empty_region() {
        let r = corner_rect(1, 1);
        assert!(sample_tiling_wilson(&r, 3).unwrap().is_empty());
        assert!(sample_tiling_kasteleyn(&r, 3).unwrap().is_empty());
        let grid = TemperleyGrid::from_region(&r).unwrap();
        let t = SpanningTree::new(1, 1, 0, vec![None]).unwrap();
        assert_eq!(grid.nodes(), 1);
        assert!(temperley_tiling(&t).unwrap().is_empty());
        assert_eq!(temperley_tree(&r, &Tiling::default()).unwrap(), t);
    }

    #[test]
    fn wilson_rejects_other_regions() {
        let p = build_even_rectangle(5, 5, 1.0).unwrap();
        let r = make_temperleyan(p, (2, 0)).unwrap();
        assert!(matches!(sample_tiling_wilson(&r, 0), Err(SamplerError::UnsupportedRegion(_))));
    }

    #[test]
    fn malformed_trees_rejected() {
        // 2x1 grid: both nodes pointing at each other
        assert!(SpanningTree::new(2, 1, 0, vec![Some(1), Some(0)]).is_err());
        assert!(SpanningTree::new(2, 1, 0, vec![None, None]).is_err());
        // 3x1 grid, node 2 points at non-neighbour 0
        assert!(SpanningTree::new(3, 1, 0, vec![None, Some(0), Some(0)]).is_err());
        assert!(SpanningTree::new(3, 1, 0, vec![None, Some(0), Some(1)]).is_ok());
    }

    #[test]
    fn kasteleyn_sampler_recomputes_on_schedule() {
        let r = corner_rect(9, 9);
        let st = SamplerState::new(&r, rng::stream(1, 0)).unwrap();
        assert_eq!(st.recomputations(), 1);
        let mut st = st;
        while st.step().unwrap() {}
        assert_eq!(st.placed().len(), 40);
    }

    #[test]
    fn algorithm_parses() {
        assert_eq!("wilson".parse::<Algorithm>(), Ok(Algorithm::Wilson));
        assert!("mcmc".parse::<Algorithm>().is_err());
    }
}
