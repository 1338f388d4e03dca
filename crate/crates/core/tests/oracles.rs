use std::sync::Arc;

use approx::assert_relative_eq;
use dimer_core::enumerate::{count_tilings, enumerate_tilings};
use dimer_core::experiment::random_polyomino;
use dimer_core::gff::{self, GffModel, Mobius, TestFunction};
use dimer_core::greens::{spectral_g_dirichlet, Greens};
use dimer_core::height::{height_function, predict_mean_height, RegionLayout};
use dimer_core::lattice::{build_even_rectangle, make_temperleyan, DomainSpec, TemperleyanRegion};
use dimer_core::moments::{contour_moment, default_paths, k_point_moment};
use dimer_core::rng;
use dimer_core::sampler::{temperley_tiling, temperley_tree};
use num_bigint::BigInt;
use num_complex::Complex64;

fn c(x: f64, y: f64) -> Complex64 {
    Complex64::new(x, y)
}

fn corner(m: i32, n: i32) -> TemperleyanRegion {
    make_temperleyan(build_even_rectangle(m, n, 1.0).unwrap(), (0, 0)).unwrap()
}

#[test]
fn eight_by_eight_count() {
    let cells: std::collections::BTreeSet<_> = (0..8).flat_map(|i| (0..8).map(move |j| (i, j))).collect();
    assert_eq!(count_tilings(&cells), BigInt::from(12_988_816u64));
}

#[test]
fn determinant_matches_enumeration_on_random_regions() {
    let mut g = rng::stream(2024, 0);
    for _ in 0..40 {
        let cells = random_polyomino(&mut g, 16);
        let brute = enumerate_tilings(&cells).unwrap().len();
        assert_eq!(count_tilings(&cells), BigInt::from(brute), "{cells:?}");
    }
}

#[test]
fn bijection_round_trips_every_tiling_of_small_rectangles() {
    for (m, n) in [(3, 3), (5, 3), (5, 5)] {
        let r = corner(m, n);
        let all = enumerate_tilings(&r).unwrap();
        let mut trees = std::collections::HashSet::new();
        for t in &all {
            let tree = temperley_tree(&r, t).unwrap();
            assert_eq!(&temperley_tiling(&tree).unwrap(), t);
            trees.insert(tree);
        }
        assert_eq!(trees.len(), all.len());
    }
    // 3x3 minus a corner: four tilings, four spanning trees of the 2x2 node grid
    assert_eq!(enumerate_tilings(&corner(3, 3)).unwrap().len(), 4);
}

#[test]
fn spectral_sum_improves_with_more_modes() {
    let g = Greens::new(DomainSpec::rectangle(1.0, 1.0));
    for (z1, z2) in [(c(0.25, 0.5), c(0.75, 0.5)), (c(0.3, 0.3), c(0.6, 0.7))] {
        let exact = g.g_dirichlet(z1, z2).unwrap();
        let e1 = (spectral_g_dirichlet(1.0, 1.0, z1, z2, 50) - exact).abs();
        let e2 = (spectral_g_dirichlet(1.0, 1.0, z1, z2, 100) - exact).abs();
        assert!(e2 < e1, "{e1} {e2}");
        assert!((spectral_g_dirichlet(1.0, 1.0, z1, z2, 2000) - exact).abs() < 1e-6);
    }
}

#[test]
fn four_point_moment_matches_contour_formula() {
    let ps = [c(0.0, 1.0), c(0.0, 2.0), c(1.0, 1.0), c(-1.0, 2.0)];
    let exact = k_point_moment(&DomainSpec::half_plane(), &ps).unwrap().value;
    let quad = contour_moment(&ps, &default_paths(&ps).unwrap()).unwrap().value;
    assert!(((quad - exact) / exact).abs() < 1e-4, "{quad} vs {exact}");
}

#[test]
fn gff_variance_and_wick() {
    let model = GffModel::new(1.0, 1.0, 256);
    let phis = [
        TestFunction::Eigen { j: 1, k: 1 },
        TestFunction::Bump { center: c(0.4, 0.4), radius: 0.3 },
        TestFunction::Bump { center: c(0.6, 0.5), radius: 0.3 },
        TestFunction::Eigen { j: 1, k: 2 },
    ];
    let w: Vec<Vec<f64>> = phis.iter().map(|p| model.pairing_weights(p)).collect();
    let vals = gff::sample_pairings(&model, &w, 100_000, 17);
    let var = dimer_core::stats::summarize(&vals[0]).variance;
    let want = 1.0 / (2.0 * std::f64::consts::PI.powi(2));
    assert!((var / want - 1.0).abs() < 0.02, "{var}");
    // repeated functions keep the Wick prediction away from zero
    let cov = |a: usize, b: usize| model.covariance(&w[a], &w[b]);
    let idx = [1, 1, 2, 2];
    let m: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| cov(idx[i], idx[j])));
    let four = [vals[1].clone(), vals[1].clone(), vals[2].clone(), vals[2].clone()];
    let report = gff::wick_check(&four, &m).unwrap();
    assert!(report.relative_deviation < 0.05, "{report:?}");
}

#[test]
fn conformal_invariance_on_disk() {
    let support = gff::Disk { center: c(0.1, -0.2), radius: 0.3 };
    let omega = move |z: Complex64| gff::bump(support.center, support.radius, z);
    let map = Mobius::disk_automorphism(c(0.3, 0.0), 0.0);
    let r = gff::conformal_invariance_check(&omega, support, &DomainSpec::unit_disk(), map, 24).unwrap();
    assert!(r.relative_difference < 1e-3, "{r:?}");
}

#[test]
fn mean_prediction_tracks_exact_boundary_heights() {
    let region = corner(9, 9);
    let pred = predict_mean_height(&region).unwrap();
    let layout = Arc::new(RegionLayout::for_region(&region));
    let some = dimer_core::sampler::sample_tiling_wilson(&region, 4).unwrap();
    let h = height_function(&region, &some).unwrap();
    // boundary heights oscillate about the smooth turning profile; the fitted offset centres them
    let gaps: Vec<f64> = layout
        .vertices()
        .iter()
        .enumerate()
        .filter(|(_, &v)| !layout.is_interior(v))
        .map(|(k, &v)| pred[k] - h.get(v).unwrap() as f64)
        .collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert_relative_eq!(mean, 0.0, epsilon = 1e-9);
    assert!(gaps.iter().all(|g| g.abs() < 3.0), "{gaps:?}");
}
