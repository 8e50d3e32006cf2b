//! Python bindings. Images are lists of rows, hypervectors are lists of complex numbers.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sr::encoder::{self as enc, EncodingMode};
use sr::harness::{run_experiment as run_harness, ExperimentConfig, ExperimentKind};
use sr::hd::{self, ComplexVector, Hypervector};
use sr::resonator::{self, StoppingCriterion};
use sr::sparse::{self, FeatureMaps, Grid, SparseConfig};

fn py_err(e: sr::Error) -> PyErr {
    match e {
        sr::Error::Io(_) | sr::Error::NumericFailure(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn grid_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Grid> {
    let side = rows.len();
    if rows.iter().any(|r| r.len() != side) {
        return Err(PyValueError::new_err("image must be square"));
    }
    Grid::from_vec(side, rows.into_iter().flatten().collect()).map_err(py_err)
}

fn grid_to_rows(g: &Grid) -> Vec<Vec<f64>> {
    g.data().chunks(g.side()).map(<[f64]>::to_vec).collect()
}

fn mode(name: &str) -> PyResult<EncodingMode> {
    name.parse().map_err(py_err)
}

/// Random unit-modulus vector.
#[pyfunction]
fn random_phasor(dim: usize, seed: u64) -> PyResult<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(hd::random_phasor(dim, &mut rng).map_err(py_err)?.components().to_vec())
}

#[pyfunction]
fn bind(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let a = ComplexVector::new(a);
    let out = a.bind(&ComplexVector::new(b)).map_err(py_err)?;
    Ok(out.into_components())
}

#[pyfunction]
fn similarity(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<Complex64> {
    hd::similarity(&ComplexVector::new(a), &ComplexVector::new(b)).map_err(py_err)
}

#[pyfunction]
fn normalize(a: Vec<Complex64>) -> Vec<Complex64> {
    hd::normalize(&ComplexVector::new(a)).components().to_vec()
}

/// Convolutional dictionary of square filters.
#[pyclass(module = "sparse_resonator", frozen)]
struct Dictionary {
    inner: sparse::Dictionary,
}

#[pymethods]
impl Dictionary {
    #[new]
    fn new(filters: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let grids = filters.into_iter().map(grid_from_rows).collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: sparse::Dictionary::new(grids).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: sparse::container::load_dictionary(&path).map_err(py_err)?,
        })
    }

    /// The two-filter horizontal/vertical bars dictionary.
    #[staticmethod]
    fn bars() -> Self {
        Self {
            inner: sr::datasets::bars_dictionary(),
        }
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        sparse::container::save_dictionary(&path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.count()
    }

    #[getter]
    fn patch(&self) -> usize {
        self.inner.patch()
    }

    fn filters(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.filters().iter().map(grid_to_rows).collect()
    }

    /// Sparse feature maps of `image`, one map per filter.
    #[pyo3(signature = (image, lam=0.1, max_iters=200, tol=1e-6))]
    fn infer(&self, image: Vec<Vec<f64>>, lam: f64, max_iters: usize, tol: f64) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let cfg = SparseConfig {
            lambda: lam,
            max_iters,
            tol,
            ..SparseConfig::default()
        };
        let maps = sparse::infer_maps(&grid_from_rows(image)?, &self.inner, &cfg).map_err(py_err)?;
        Ok(maps.maps().iter().map(grid_to_rows).collect())
    }

    fn reconstruct(&self, maps: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Vec<f64>>> {
        let grids = maps.into_iter().map(grid_from_rows).collect::<PyResult<Vec<_>>>()?;
        let maps = FeatureMaps::new(grids).map_err(py_err)?;
        Ok(grid_to_rows(&sparse::reconstruct(&self.inner, &maps).map_err(py_err)?))
    }

    fn __repr__(&self) -> String {
        format!("Dictionary(count={}, patch={})", self.inner.count(), self.inner.patch())
    }
}

/// Position bases and filter basis for an `L x L` frame.
#[pyclass(module = "sparse_resonator", unsendable)]
struct Encoder {
    inner: enc::EncoderContext,
}

#[pymethods]
impl Encoder {
    #[new]
    #[pyo3(signature = (dim, side, filters, seed=0))]
    fn new(dim: usize, side: usize, filters: usize, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            inner: enc::EncoderContext::random(dim, side, filters, &mut rng).map_err(py_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn side(&self) -> usize {
        self.inner.side()
    }

    fn encode_pixel(&self, image: Vec<Vec<f64>>) -> PyResult<Vec<Complex64>> {
        let v = enc::encode_pixel(&grid_from_rows(image)?, &self.inner).map_err(py_err)?;
        Ok(v.into_components())
    }

    fn encode_sparse(&self, maps: Vec<Vec<Vec<f64>>>) -> PyResult<Vec<Complex64>> {
        let grids = maps.into_iter().map(grid_from_rows).collect::<PyResult<Vec<_>>>()?;
        let maps = FeatureMaps::new(grids).map_err(py_err)?;
        Ok(enc::encode_sparse(&maps, &self.inner).map_err(py_err)?.into_components())
    }

    /// Moves an encoded scene by `(dx, dy)` pixels.
    fn shift(&self, v: Vec<Complex64>, dx: i64, dy: i64) -> PyResult<Vec<Complex64>> {
        let out = self.inner.shift_vector(&ComplexVector::new(v), dx, dy).map_err(py_err)?;
        Ok(out.into_components())
    }
}

/// Resonator network over position codebooks and a set of object templates.
#[pyclass(module = "sparse_resonator", unsendable)]
struct Resonator {
    codebooks: enc::Codebooks,
    ids: Vec<String>,
}

#[pymethods]
impl Resonator {
    /// Templates are canonical-frame images; sparse mode needs `dictionary`.
    #[new]
    #[pyo3(signature = (encoder, templates, mode="sparse", dictionary=None, lam=0.1))]
    fn new(
        encoder: &Encoder,
        templates: Vec<Vec<Vec<f64>>>,
        mode: &str,
        dictionary: Option<&Dictionary>,
        lam: f64,
    ) -> PyResult<Self> {
        let mode = self::mode(mode)?;
        let dict = match (mode, dictionary) {
            (EncodingMode::Sparse, None) => return Err(PyValueError::new_err("sparse mode needs a dictionary")),
            (_, Some(d)) => d.inner.clone(),
            (EncodingMode::Pixel, None) => sr::datasets::bars_dictionary(),
        };
        let cfg = SparseConfig::with_lambda(lam);
        let objs = templates
            .into_iter()
            .enumerate()
            .map(|(k, t)| {
                let img = grid_from_rows(t)?;
                enc::make_object_template(k.to_string(), &img, &dict, &encoder.inner, &cfg, mode).map_err(py_err)
            })
            .collect::<PyResult<Vec<_>>>()?;
        let ids = objs.iter().map(|o| o.id.clone()).collect();
        Ok(Self {
            codebooks: enc::build_codebooks(&encoder.inner, &objs).map_err(py_err)?,
            ids,
        })
    }

    #[getter]
    fn templates(&self) -> usize {
        self.ids.len()
    }

    /// Returns a dict with `x`, `y`, `k`, `iterations`, `converged` and `confidences`.
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (scene, seed=0, stop="fixed_point", epsilon=0.05, threshold=0.6, max_iters=100))]
    fn factorize<'py>(
        &self,
        py: Python<'py>,
        scene: Vec<Complex64>,
        seed: u64,
        stop: &str,
        epsilon: f64,
        threshold: f64,
        max_iters: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let crit = match stop {
            "fixed_point" => StoppingCriterion::fixed_point(epsilon, max_iters),
            "confidence" => StoppingCriterion::confidence(threshold, max_iters),
            "max_iters" => StoppingCriterion::max_iters_only(max_iters),
            other => return Err(PyValueError::new_err(format!("unknown stopping rule `{other}`"))),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = ComplexVector::new(scene);
        let res = resonator::run(&z, &self.codebooks, &crit, &mut rng).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("x", res.x_index)?;
        d.set_item("y", res.y_index)?;
        d.set_item("k", res.k_index)?;
        d.set_item("iterations", res.iterations)?;
        d.set_item("converged", res.converged)?;
        d.set_item("confidences", res.final_confidences.to_vec())?;
        Ok(d)
    }
}

/// Runs a named experiment; `overrides` uses the config-file keys.
#[pyfunction]
#[pyo3(signature = (kind, data_root=None, overrides=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    kind: &str,
    data_root: Option<PathBuf>,
    overrides: Option<Vec<(String, String)>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let kind: ExperimentKind = kind.parse().map_err(py_err)?;
    let mut cfg = ExperimentConfig::new(kind);
    if let Some(root) = data_root {
        cfg = cfg.with_data_root(&root);
    }
    for (k, v) in overrides.unwrap_or_default() {
        cfg.set(&k, &v).map_err(py_err)?;
    }
    let out = py.detach(|| run_harness(&cfg)).map_err(py_err)?;
    out.summary
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item(r.sweep, r.value)?;
            d.set_item("variant", r.variant)?;
            d.set_item("encoding", r.encoding.as_str())?;
            d.set_item("trials", r.trials)?;
            d.set_item("accuracy", r.accuracy)?;
            d.set_item("iter_median", r.iter_median)?;
            d.set_item("convergence_rate", r.convergence_rate)?;
            d.set_item("conf_correct", r.conf_correct)?;
            d.set_item("conf_incorrect", r.conf_incorrect)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn sparse_resonator(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(random_phasor, m)?)?;
    m.add_function(wrap_pyfunction!(bind, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<Dictionary>()?;
    m.add_class::<Encoder>()?;
    m.add_class::<Resonator>()?;
    Ok(())
}
