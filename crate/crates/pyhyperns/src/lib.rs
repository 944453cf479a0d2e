//! Python bindings: instances, solver configuration and the end-to-end
//! pipeline, exposed as the `hyperns_py` extension module.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use hyperns::instance::Point;
use hyperns::pipeline::{self, Config, HeatmapSource, InitMode, PointDistribution};
use hyperns::Error;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// An immutable 2-D Euclidean TSP instance.
#[pyclass(name = "Instance", frozen)]
struct PyInstance {
    inner: hyperns::Instance,
}

#[pymethods]
impl PyInstance {
    /// Build from a list of (x, y) pairs; duplicates are rejected.
    #[new]
    fn new(name: String, points: Vec<(f64, f64)>) -> PyResult<Self> {
        let pts = points.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        let inner = hyperns::Instance::new(name, pts).map_err(to_py_err)?;
        Ok(PyInstance { inner })
    }

    /// Parse a TSPLIB .tsp file (EDGE_WEIGHT_TYPE: EUC_2D).
    #[staticmethod]
    fn load_tsplib(path: PathBuf) -> PyResult<Self> {
        let inner = hyperns::Instance::load_tsplib(path).map_err(to_py_err)?;
        Ok(PyInstance { inner })
    }

    /// Generate a synthetic instance: uniform, clustered, explosion or
    /// implosion.
    #[staticmethod]
    #[pyo3(signature = (n, dist="uniform", seed=0))]
    fn generate(n: usize, dist: &str, seed: u64) -> PyResult<Self> {
        let dist: PointDistribution = dist.parse().map_err(to_py_err)?;
        let inner = pipeline::generate_instance(n, dist, seed).map_err(to_py_err)?;
        Ok(PyInstance { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn point(&self, v: usize) -> PyResult<(f64, f64)> {
        if v >= self.inner.n() {
            return Err(PyValueError::new_err(format!("vertex {v} out of range")));
        }
        let p = self.inner.point(v);
        Ok((p.x, p.y))
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.points().iter().map(|p| (p.x, p.y)).collect()
    }

    fn distance(&self, a: usize, b: usize) -> PyResult<f64> {
        let n = self.inner.n();
        if a >= n || b >= n {
            return Err(PyValueError::new_err("vertex id out of range"));
        }
        Ok(self.inner.distance(a, b))
    }

    /// The min(m, n-1) nearest neighbors of v, ordered by distance.
    fn knn(&self, v: usize, m: usize) -> PyResult<Vec<usize>> {
        if v >= self.inner.n() {
            return Err(PyValueError::new_err(format!("vertex {v} out of range")));
        }
        Ok(self.inner.knn(v, m))
    }

    /// Cycle length of the given visiting order.
    fn tour_length(&self, order: Vec<usize>) -> PyResult<f64> {
        let tour = hyperns::Tour::new(order, &self.inner).map_err(to_py_err)?;
        Ok(tour.length())
    }

    fn write_tsplib(&self, path: PathBuf) -> PyResult<()> {
        let f = std::fs::File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        self.inner.write_tsplib(f).map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Instance(name={:?}, n={})", self.inner.name(), self.inner.n())
    }
}

/// Solver parameters with the standard defaults.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: Config,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        p=100, gamma=30, k=2, k_cov=10, tau=1.0, ls=100, m=100, alpha=1000.0,
        i3=2, seed=0, iteration_cap=0, init="hyper", heatmap="distance",
        heatmap_path=None, tsplib_rounding=false
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        p: usize,
        gamma: usize,
        k: usize,
        k_cov: usize,
        tau: f64,
        ls: usize,
        m: usize,
        alpha: f64,
        i3: usize,
        seed: u64,
        iteration_cap: usize,
        init: &str,
        heatmap: &str,
        heatmap_path: Option<PathBuf>,
        tsplib_rounding: bool,
    ) -> PyResult<Self> {
        let init_mode = match init {
            "hyper" => InitMode::Hyper,
            "greedy" => InitMode::Greedy,
            "random" => InitMode::Random,
            other => {
                return Err(PyValueError::new_err(format!(
                    "init must be hyper|greedy|random, got {other:?}"
                )))
            }
        };
        let heatmap_provider = match heatmap {
            "distance" => HeatmapSource::Distance,
            "file" => HeatmapSource::File,
            other => {
                return Err(PyValueError::new_err(format!(
                    "heatmap must be distance|file, got {other:?}"
                )))
            }
        };
        let inner = Config {
            p,
            gamma,
            k,
            k_cov,
            tau,
            l_s: ls,
            m,
            alpha,
            i3,
            seed,
            iteration_cap,
            init_mode,
            heatmap_provider,
            heatmap_path,
            tsplib_rounding,
            ..Config::default()
        };
        inner.validate().map_err(to_py_err)?;
        Ok(PyConfig { inner })
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "Config(p={}, gamma={}, k={}, k_cov={}, tau={}, ls={}, m={}, alpha={}, i3={}, seed={})",
            c.p, c.gamma, c.k, c.k_cov, c.tau, c.l_s, c.m, c.alpha, c.i3, c.seed
        )
    }
}

/// Result record of one pipeline run.
#[pyclass(name = "RunReport", frozen)]
struct PyRunReport {
    inner: pipeline::RunReport,
}

#[pymethods]
impl PyRunReport {
    #[getter]
    fn instance(&self) -> &str {
        &self.inner.instance
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn init_len(&self) -> f64 {
        self.inner.init_len
    }

    #[getter]
    fn final_len(&self) -> f64 {
        self.inner.final_len
    }

    #[getter]
    fn gap(&self) -> Option<f64> {
        self.inner.gap
    }

    #[getter]
    fn i1(&self) -> usize {
        self.inner.i1
    }

    #[getter]
    fn i2(&self) -> usize {
        self.inner.i2
    }

    #[getter]
    fn peak_edge_stats(&self) -> usize {
        self.inner.peak_edge_stats
    }

    #[getter]
    fn stage_times<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        let t = &self.inner.stage_times;
        d.set_item("heatmap", t.heatmap)?;
        d.set_item("hypertour", t.hypertour)?;
        d.set_item("init", t.init)?;
        d.set_item("tns", t.tns)?;
        d.set_item("subtour", t.subtour)?;
        Ok(d)
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("report serialization")
    }

    fn __repr__(&self) -> String {
        format!(
            "RunReport(instance={:?}, n={}, init_len={}, final_len={})",
            self.inner.instance, self.inner.n, self.inner.init_len, self.inner.final_len
        )
    }
}

/// Run the full pipeline; returns (tour, report). `ref_len` adds a gap to
/// the report.
#[pyfunction]
#[pyo3(signature = (instance, config=None, ref_len=None))]
fn solve(
    instance: &PyInstance,
    config: Option<PyConfig>,
    ref_len: Option<f64>,
) -> PyResult<(Vec<usize>, PyRunReport)> {
    let config = config.map(|c| c.inner).unwrap_or_default();
    let inst = if config.tsplib_rounding != instance.inner.tsplib_rounding() {
        instance
            .inner
            .clone()
            .with_tsplib_rounding(config.tsplib_rounding)
    } else {
        instance.inner.clone()
    };
    let result = pipeline::solve(&inst, &config).map_err(to_py_err)?;
    let mut report = result.report;
    if let Some(r) = ref_len {
        report = report.with_reference(r);
    }
    Ok((result.tour.order().to_vec(), PyRunReport { inner: report }))
}

/// Exact optimum of a small point set: (order, length). Limited to 15
/// points.
#[pyfunction]
fn held_karp(points: Vec<(f64, f64)>) -> PyResult<(Vec<usize>, f64)> {
    let pts: Vec<Point> = points.into_iter().map(|(x, y)| Point::new(x, y)).collect();
    hyperns::lk::held_karp_exact(&pts).map_err(to_py_err)
}

/// Write a tour in TSPLIB .tour format (1-based ids, -1 terminated).
#[pyfunction]
fn write_tour_file(path: PathBuf, name: &str, instance: &PyInstance, order: Vec<usize>) -> PyResult<()> {
    let tour = hyperns::Tour::new(order, &instance.inner).map_err(to_py_err)?;
    let f = std::fs::File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    tour.write_tour_file(name, f).map_err(to_py_err)
}

#[pymodule]
fn hyperns_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRunReport>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(held_karp, m)?)?;
    m.add_function(wrap_pyfunction!(write_tour_file, m)?)?;
    Ok(())
}
