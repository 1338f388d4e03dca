//! Python module `dimerlab`: regions, exact counts, samplers, height functions, Green's
//! functions, limiting moments, free field sampling and the verification suite.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use dimer_cli::config::{parse_test_function, Budget, Suite};
use dimer_cli::suite::{run_suite, Plan};
use dimer_core::enumerate::{self, Orientation};
use dimer_core::gff;
use dimer_core::greens::Greens;
use dimer_core::height;
use dimer_core::lattice::{self, Cell, DomainSpec};
use dimer_core::moments;
use dimer_core::sampler::{self, Algorithm};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn domain(name: &str) -> PyResult<DomainSpec> {
    match name {
        "half-plane" => Ok(DomainSpec::half_plane()),
        "disk" => Ok(DomainSpec::unit_disk()),
        "square" => Ok(DomainSpec::rectangle(1.0, 1.0)),
        _ => Err(PyValueError::new_err(format!("unknown domain {name:?}; use half-plane, disk or square"))),
    }
}

/// A Temperleyan region: an even polyomino with one root cell removed.
#[pyclass(module = "dimerlab", frozen)]
struct Region {
    inner: lattice::TemperleyanRegion,
}

#[pymethods]
impl Region {
    /// The `m x n` rectangle (odd sides) with its lower-left cell removed.
    #[staticmethod]
    #[pyo3(signature = (m, n, epsilon=1.0))]
    fn rectangle(m: i32, n: i32, epsilon: f64) -> PyResult<Self> {
        let parent = lattice::build_even_rectangle(m, n, epsilon).map_err(err)?;
        Ok(Region { inner: lattice::make_temperleyan(parent, (0, 0)).map_err(err)? })
    }

    /// Staircase approximation of the unit square (`"square"`) or unit disk (`"disk"`).
    #[staticmethod]
    fn approximate(kind: &str, epsilon: f64) -> PyResult<Self> {
        Ok(Region { inner: lattice::approximate_domain(&domain(kind)?, epsilon).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = lattice::TemperleyanRegion::from_json(text).map_err(err)?;
        let report = lattice::validate_temperleyan(&inner);
        if !report.all_passed() {
            return Err(PyValueError::new_err(report.failures().join("; ")));
        }
        Ok(Region { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn cells(&self) -> Vec<Cell> {
        use lattice::CellRegion;
        self.inner.cells().iter().copied().collect()
    }

    #[getter]
    fn root(&self) -> Cell {
        self.inner.root()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    /// Exact number of domino tilings.
    fn count_tilings(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        big_to_py(py, &enumerate::count_tilings(&self.inner))
    }

    /// One uniform tiling; `algorithm` is `"wilson"` (corner rectangles) or `"kasteleyn"`.
    #[pyo3(signature = (seed, algorithm="wilson"))]
    fn sample(&self, seed: u64, algorithm: &str) -> PyResult<Tiling> {
        let algo: Algorithm = algorithm.parse().map_err(PyValueError::new_err)?;
        let t = match algo {
            Algorithm::Wilson => sampler::sample_tiling_wilson(&self.inner, seed),
            Algorithm::Kasteleyn => sampler::sample_tiling_kasteleyn(&self.inner, seed),
        };
        Ok(Tiling { inner: t.map_err(err)? })
    }

    /// `count` tilings from consecutive replica streams of `seed`.
    #[pyo3(signature = (seed, count, algorithm="wilson"))]
    fn sample_many(&self, seed: u64, count: usize, algorithm: &str) -> PyResult<Vec<Tiling>> {
        let algo: Algorithm = algorithm.parse().map_err(PyValueError::new_err)?;
        let ts = sampler::sample_many(&self.inner, algo, seed, count).map_err(err)?;
        Ok(ts.into_iter().map(|inner| Tiling { inner }).collect())
    }

    /// Height of `tiling` at every vertex, keyed by `(x, y)`.
    fn heights(&self, tiling: &Tiling) -> PyResult<HashMap<(i32, i32), i32>> {
        let h = height::height_function(&self.inner, &tiling.inner).map_err(err)?;
        Ok(h.layout().vertices().iter().copied().zip(h.values().iter().copied()).collect())
    }

    /// Discrete harmonic prediction of the mean height, keyed by `(x, y)`.
    fn predicted_mean_height(&self) -> PyResult<HashMap<(i32, i32), f64>> {
        let layout = height::RegionLayout::for_region(&self.inner);
        let values = height::predict_mean_height(&self.inner).map_err(err)?;
        Ok(layout.vertices().iter().copied().zip(values).collect())
    }

    /// SVG picture of `tiling`, optionally labelled with heights.
    #[pyo3(signature = (tiling, heights=false))]
    fn render_svg(&self, tiling: &Tiling, heights: bool) -> PyResult<String> {
        let h = if heights { Some(height::height_function(&self.inner, &tiling.inner).map_err(err)?) } else { None };
        Ok(dimer_cli::svg::render_tiling_svg(&self.inner, &tiling.inner, h.as_ref()))
    }

    fn __len__(&self) -> usize {
        use lattice::CellRegion;
        self.inner.cells().len()
    }

    fn __repr__(&self) -> String {
        use lattice::CellRegion;
        format!("Region(cells={}, root={:?}, epsilon={})", self.inner.cells().len(), self.inner.root(), self.inner.epsilon())
    }
}

/// A domino tiling as a sorted list of dominoes `(i, j, "H" | "V")`.
#[pyclass(module = "dimerlab", frozen, eq)]
#[derive(PartialEq)]
struct Tiling {
    inner: enumerate::Tiling,
}

#[pymethods]
impl Tiling {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Tiling { inner: enumerate::Tiling::from_text(text).map_err(err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn dominoes(&self) -> Vec<(i32, i32, &'static str)> {
        self.inner
            .dominoes()
            .iter()
            .map(|d| (d.cell.0, d.cell.1, if d.orientation == Orientation::H { "H" } else { "V" }))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Tiling({} dominoes)", self.inner.len())
    }
}

fn big_to_py(py: Python<'_>, n: &num_bigint::BigInt) -> PyResult<Py<PyAny>> {
    let builtins = py.import("builtins")?;
    Ok(builtins.getattr("int")?.call1((n.to_string(),))?.unbind())
}

/// Exact tiling count of an arbitrary simply connected set of cells.
#[pyfunction]
fn count_tilings(py: Python<'_>, cells: Vec<Cell>) -> PyResult<Py<PyAny>> {
    let set: BTreeSet<Cell> = cells.into_iter().collect();
    big_to_py(py, &enumerate::count_tilings(&set))
}

/// Dirichlet Green's function on `"half-plane"`, `"disk"` or `"square"`.
#[pyfunction]
#[pyo3(signature = (z1, z2, domain="half-plane"))]
fn g_dirichlet(z1: Complex64, z2: Complex64, domain: &str) -> PyResult<f64> {
    Greens::new(self::domain(domain)?).g_dirichlet(z1, z2).map_err(err)
}

/// Limiting joint moment of the centred height at `points`.
#[pyfunction]
#[pyo3(signature = (points, domain="half-plane"))]
fn k_point_moment(points: Vec<Complex64>, domain: &str) -> PyResult<f64> {
    Ok(moments::k_point_moment(&self::domain(domain)?, &points).map_err(err)?.value)
}

/// The same moment on the half-plane from the contour-integral formula (2 or 4 points).
#[pyfunction]
fn contour_moment(points: Vec<Complex64>) -> PyResult<(f64, f64)> {
    let paths = moments::default_paths(&points).map_err(err)?;
    let r = moments::contour_moment(&points, &paths).map_err(err)?;
    Ok((r.value, r.error_estimate))
}

#[pyfunction]
fn pairing_det(xs: Vec<Complex64>) -> PyResult<Complex64> {
    moments::pairing_det(&xs).map_err(err)
}

#[pyfunction]
fn pairing_sum(xs: Vec<Complex64>) -> PyResult<Complex64> {
    moments::pairing_sum(&xs).map_err(err)
}

/// Gaussian free field on the unit square truncated to its lowest `modes` eigenmodes.
#[pyclass(module = "dimerlab", frozen)]
struct FreeField {
    model: gff::GffModel,
}

#[pymethods]
impl FreeField {
    #[new]
    #[pyo3(signature = (modes=1024))]
    fn new(modes: usize) -> Self {
        FreeField { model: gff::GffModel::new(1.0, 1.0, modes) }
    }

    /// Weights turning mode coefficients into the pairing with `phi` (`eigen:j,k` or `bump:x,y,r`).
    fn weights(&self, phi: &str) -> PyResult<Vec<f64>> {
        Ok(self.model.pairing_weights(&parse_test_function(phi).map_err(err)?))
    }

    fn covariance(&self, w1: Vec<f64>, w2: Vec<f64>) -> f64 {
        self.model.covariance(&w1, &w2)
    }

    /// `count` samples of the pairing with each weight vector.
    fn sample_pairings(&self, weights: Vec<Vec<f64>>, count: usize, seed: u64) -> Vec<Vec<f64>> {
        gff::sample_pairings(&self.model, &weights, count, seed)
    }
}

/// Runs an acceptance suite (`exact`, `montecarlo` or `all`) and returns one dict per check.
#[pyfunction]
#[pyo3(signature = (suite="exact", budget="small", seed=0))]
fn verify(py: Python<'_>, suite: &str, budget: &str, seed: u64) -> PyResult<Vec<Py<PyAny>>> {
    let suite = match suite {
        "exact" => Suite::Exact,
        "montecarlo" => Suite::Montecarlo,
        "all" => Suite::All,
        _ => return Err(PyValueError::new_err(format!("unknown suite {suite:?}"))),
    };
    let budget = match budget {
        "small" => Budget::Small,
        "full" => Budget::Full,
        _ => return Err(PyValueError::new_err(format!("unknown budget {budget:?}"))),
    };
    let outcome = py.detach(|| run_suite(suite, &Plan::new(budget), seed, &BTreeMap::new(), &mut |_| {}));
    outcome
        .records
        .into_iter()
        .map(|r| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("id", r.id)?;
            d.set_item("name", r.name)?;
            d.set_item("measured", r.measured)?;
            d.set_item("tolerance", r.tolerance)?;
            d.set_item("passed", r.passed)?;
            d.set_item("detail", r.detail)?;
            Ok(d.into_any().unbind())
        })
        .collect()
}

#[pymodule]
fn dimerlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Region>()?;
    m.add_class::<Tiling>()?;
    m.add_class::<FreeField>()?;
    m.add_function(wrap_pyfunction!(count_tilings, m)?)?;
    m.add_function(wrap_pyfunction!(g_dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(k_point_moment, m)?)?;
    m.add_function(wrap_pyfunction!(contour_moment, m)?)?;
    m.add_function(wrap_pyfunction!(pairing_det, m)?)?;
    m.add_function(wrap_pyfunction!(pairing_sum, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
