//! Monte Carlo runs of uniform tilings of the unit square at spacing `1/N`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::height::{covariance_with_jackknife, observable_weights, CovarianceEstimate, HeightEnsemble, RegionLayout, Traversal};
use std::collections::BTreeSet;

use rand::Rng;

use crate::lattice::{
    approximate_domain, build_even_rectangle, cell_neighbors, make_temperleyan, Cell, DomainSpec, Polyomino,
    TemperleyanRegion,
};
use crate::rng;
use crate::sampler::{sample_tiling_kasteleyn_with, sample_tiling_wilson_with, Algorithm, SamplerError};

/// The `N x N` square of side 1 with its lower-left square removed.
pub fn unit_square_region(n: i32) -> TemperleyanRegion {
    let parent = build_even_rectangle(n, n, 1.0 / n as f64).expect("odd N");
    make_temperleyan(parent, (0, 0)).expect("corner root is valid")
}

/// A simply connected polyomino of `1..=max_cells` cells grown by random accretion from the
/// origin. Growth steps that would create a hole or a pinch point are skipped.
pub fn random_polyomino<R: Rng + ?Sized>(rng: &mut R, max_cells: usize) -> BTreeSet<Cell> {
    let target = rng.random_range(1..=max_cells.max(1));
    let mut cells = BTreeSet::from([(0, 0)]);
    let mut attempts = 0;
    while cells.len() < target && attempts < 50 * max_cells {
        attempts += 1;
        let frontier: Vec<Cell> = cells
            .iter()
            .flat_map(|&c| cell_neighbors(c))
            .filter(|c| !cells.contains(c))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pick = frontier[rng.random_range(0..frontier.len())];
        cells.insert(pick);
        if Polyomino::from_cells(cells.clone(), 1.0).is_err() {
            cells.remove(&pick);
        }
    }
    cells
}

/// A simply connected region of at most `max_cells` cells built by attaching random dominoes,
/// so it always has at least one tiling.
pub fn random_domino_region<R: Rng + ?Sized>(rng: &mut R, max_cells: usize) -> BTreeSet<Cell> {
    let target = rng.random_range(1..=(max_cells / 2).max(1));
    let mut cells = BTreeSet::from([(0, 0), (1, 0)]);
    let mut placed = 1;
    let mut attempts = 0;
    while placed < target && attempts < 50 * max_cells {
        attempts += 1;
        let frontier: Vec<Cell> = cells
            .iter()
            .flat_map(|&c| cell_neighbors(c))
            .filter(|c| !cells.contains(c))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let a = frontier[rng.random_range(0..frontier.len())];
        let b = cell_neighbors(a)[rng.random_range(0..4)];
        if cells.contains(&b) {
            continue;
        }
        cells.insert(a);
        cells.insert(b);
        if Polyomino::from_cells(cells.clone(), 1.0).is_ok() {
            placed += 1;
        } else {
            cells.remove(&a);
            cells.remove(&b);
        }
    }
    cells
}

/// Named Temperleyan regions of several shapes used for validity sweeps.
pub fn region_corpus() -> Vec<(String, TemperleyanRegion)> {
    let mut out = Vec::new();
    for (m, n) in [(3, 3), (5, 5), (9, 7), (15, 15)] {
        let r = make_temperleyan(build_even_rectangle(m, n, 1.0).unwrap(), (0, 0)).unwrap();
        out.push((format!("rectangle {m}x{n}"), r));
    }
    for eps in [0.25, 1.0 / 6.0, 0.125] {
        let r = approximate_domain(&DomainSpec::unit_disk(), eps).expect("disk approximation");
        out.push((format!("disk eps={eps}"), r));
    }
    for (long, short) in [(5, 3), (9, 5)] {
        let mut cells = BTreeSet::new();
        for i in 0..long {
            for j in 0..short {
                cells.insert((i, j));
                cells.insert((j, i));
            }
        }
        let p = Polyomino::from_cells(cells, 1.0).unwrap();
        out.push((format!("L {long}/{short}"), make_temperleyan(p, (long - 1, 0)).unwrap()));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SquareRun {
    pub n: i32,
    pub samples: usize,
    pub layout: Arc<RegionLayout>,
    pub ensemble: HeightEnsemble,
}

impl SquareRun {
    pub fn epsilon(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Covariance of the heights at tracked vertices `a` and `b`.
    pub fn covariance(&self, a: usize, b: usize) -> CovarianceEstimate {
        covariance_with_jackknife(&self.ensemble.tracked_values[a], &self.ensemble.tracked_values[b])
    }
}

/// Samples `samples` tilings of [`unit_square_region`]`(n)` with replica `r` drawn from stream
/// `r` of `seed`, tracking heights at the vertices nearest `points` and the smoothed
/// observables `ε² Σ φ(x) h(x)` for each `phi`.
pub fn run_square<F>(
    n: i32,
    samples: usize,
    seed: u64,
    algorithm: Algorithm,
    points: &[Complex64],
    phis: &[F],
) -> Result<SquareRun, SamplerError>
where
    F: Fn(Complex64) -> f64 + Sync,
{
    let region = unit_square_region(n);
    let layout = Arc::new(RegionLayout::for_region(&region));
    let tracked: Vec<usize> = points
        .iter()
        .map(|&p| layout.nearest_vertex(p).map_err(|e| SamplerError::Structure(e.to_string())))
        .collect::<Result<_, _>>()?;
    let weights: Vec<Vec<f64>> = phis.iter().map(|phi| observable_weights(&layout, phi)).collect();
    let empty = HeightEnsemble::new(layout.vertices().len(), tracked, weights);
    let ensemble = (0..samples as u64)
        .into_par_iter()
        .try_fold(
            || (empty.clone(), Vec::new()),
            |(mut acc, mut buf), r| {
                let mut g = rng::stream(seed, r);
                let tiling = match algorithm {
                    Algorithm::Wilson => sample_tiling_wilson_with(&region, &mut g)?,
                    Algorithm::Kasteleyn => sample_tiling_kasteleyn_with(&region, g)?,
                };
                layout
                    .heights_into(&tiling, Traversal::BreadthFirst, &mut buf)
                    .map_err(|e| SamplerError::Structure(e.to_string()))?;
                acc.push(&buf);
                Ok::<_, SamplerError>((acc, buf))
            },
        )
        .map(|r| r.map(|(acc, _)| acc))
        .try_reduce(|| empty.clone(), |a, b| Ok(a.merge(b)))?;
    Ok(SquareRun { n, samples, layout, ensemble })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_is_reproducible() {
        let pts = [Complex64::new(0.25, 0.5), Complex64::new(0.75, 0.5)];
        let phi = [|z: Complex64| z.re * z.im];
        let a = run_square(9, 40, 3, Algorithm::Wilson, &pts, &phi).unwrap();
        let b = run_square(9, 40, 3, Algorithm::Wilson, &pts, &phi).unwrap();
        assert_eq!(a.ensemble.sums, b.ensemble.sums);
        assert_eq!(a.ensemble.observables, b.ensemble.observables);
        assert_eq!(a.samples, 40);
        let k = run_square(5, 20, 3, Algorithm::Kasteleyn, &pts, &phi).unwrap();
        assert_eq!(k.ensemble.samples, 20);
    }

    #[test]
    fn corpus_regions_are_tileable() {
        for (name, r) in region_corpus() {
            assert!(crate::enumerate::count_tilings(&r) > 0.into(), "{name}");
        }
    }

    #[test]
    fn random_polyominoes_are_simply_connected() {
        let mut g = rng::stream(9, 0);
        for _ in 0..50 {
            let cells = random_polyomino(&mut g, 16);
            assert!(!cells.is_empty() && cells.len() <= 16);
            assert!(Polyomino::from_cells(cells, 1.0).is_ok());
            let tileable = random_domino_region(&mut g, 16);
            assert!(tileable.len() % 2 == 0 && tileable.len() <= 16);
            assert!(crate::enumerate::count_tilings(&tileable) > 0.into());
        }
    }
}
