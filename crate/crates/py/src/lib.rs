//! Python bindings: `import splatprune`.

use std::collections::BTreeSet;

use pyo3::exceptions::{PyIndexError, PyValueError};
use pyo3::prelude::*;

use splatprune::camera::{load_views, save_views};
use splatprune::model::{load_ply, save_ply};
use splatprune::quant::{quantify_scene, write_scores, DEFAULT_EPSILON};
use splatprune::raster::{render as render_scene, RenderOptions, DEFAULT_N_MAX};
use splatprune::synth::{generate, Layering, SynthSpec};
use splatprune::{ErrorBuffer, Execution, GaussianScene, QuantConstants, ViewSet};

fn err(e: splatprune::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_dict<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (json,))
}

fn precision(name: &str) -> PyResult<bool> {
    match name {
        "f32" => Ok(false),
        "f64" => Ok(true),
        other => Err(PyValueError::new_err(format!("precision must be `f32` or `f64`, got `{other}`"))),
    }
}

fn execution(threads: usize) -> Execution {
    if threads == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// A Gaussian scene; ids are positions in the scene.
#[pyclass(name = "Scene", module = "splatprune", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScene(GaussianScene);

#[pymethods]
impl PyScene {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_ply(path).map(Self).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_ply(&self.0, path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Scene({} gaussians)", self.0.len())
    }

    /// Keeps only `ids`, preserving their relative order.
    fn subset(&self, ids: Vec<usize>) -> PyResult<Self> {
        let ids: BTreeSet<usize> = ids.into_iter().collect();
        self.0.subset(&ids).map(|(s, _)| Self(s)).map_err(|e| err(e.into()))
    }

    /// Removes `ids`.
    fn without(&self, ids: Vec<usize>) -> PyResult<Self> {
        let ids: BTreeSet<usize> = ids.into_iter().collect();
        self.0.without(&ids).map(|(s, _)| Self(s)).map_err(|e| err(e.into()))
    }

    fn positions(&self) -> Vec<[f32; 3]> {
        self.0.gaussians().iter().map(|g| g.position).collect()
    }

    fn opacities(&self) -> Vec<f64> {
        self.0.gaussians().iter().map(|g| g.opacity()).collect()
    }
}

#[pyclass(name = "Views", module = "splatprune", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyViews(ViewSet);

#[pymethods]
impl PyViews {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_views(path).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ViewSet::from_json(text).map(Self).map_err(err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_views(&self.0, path).map_err(err)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn names(&self) -> Vec<String> {
        self.0.views().iter().map(|v| v.name.clone()).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Accumulated removal error per Gaussian, with the constants that produced it.
#[pyclass(name = "Scores", module = "splatprune", frozen)]
struct PyScores {
    buffer: ErrorBuffer,
    consts: QuantConstants,
    precision: &'static str,
}

#[pymethods]
impl PyScores {
    #[getter]
    fn delta_se(&self) -> Vec<f64> {
        self.buffer.delta_se.clone()
    }

    #[getter]
    fn touch_count(&self) -> Vec<u64> {
        self.buffer.touch_count.clone()
    }

    #[getter]
    fn capped_pixels(&self) -> u64 {
        self.buffer.capped_pixels
    }

    #[getter]
    fn terminated_pixels(&self) -> u64 {
        self.buffer.terminated_pixels
    }

    fn total(&self) -> f64 {
        self.buffer.total()
    }

    fn __len__(&self) -> usize {
        self.buffer.len()
    }

    /// Writes the scores CSV.
    fn save(&self, path: &str) -> PyResult<()> {
        write_scores(&self.buffer, &self.consts, self.precision, path).map_err(err)
    }
}

fn constants(epsilon: f64, n_max: usize, background: [f64; 3], sh_degree: usize) -> QuantConstants {
    QuantConstants { epsilon, n_max, background, sh_degree }
}

#[pyfunction]
#[pyo3(signature = (seed=0, count=50, mode="layered", views=3, width=64, height=64))]
fn synth(seed: u64, count: usize, mode: &str, views: usize, width: u32, height: u32) -> PyResult<(PyScene, PyViews)> {
    let layering = mode.parse::<Layering>().map_err(|e| PyValueError::new_err(e.to_string()))?;
    if count == 0 || views == 0 || width == 0 || height == 0 {
        return Err(PyValueError::new_err("count, views, width and height must be positive"));
    }
    let (scene, views) = generate(&SynthSpec { seed, count, layering, views, width, height, ..SynthSpec::default() });
    Ok((PyScene(scene), PyViews(views)))
}

#[pyfunction]
#[pyo3(signature = (scene, views, precision="f32", epsilon=DEFAULT_EPSILON, n_max=DEFAULT_N_MAX, background=[0.0; 3], sh_degree=3, threads=0))]
#[allow(clippy::too_many_arguments)]
fn quantify(
    py: Python<'_>,
    scene: &PyScene,
    views: &PyViews,
    precision: &str,
    epsilon: f64,
    n_max: usize,
    background: [f64; 3],
    sh_degree: usize,
    threads: usize,
) -> PyResult<PyScores> {
    let wide = self::precision(precision)?;
    let consts = constants(epsilon, n_max, background, sh_degree);
    let exec = execution(threads);
    let buffer = py.detach(|| {
        if wide {
            quantify_scene::<f64>(&scene.0, &views.0, &consts, exec)
        } else {
            quantify_scene::<f32>(&scene.0, &views.0, &consts, exec)
        }
    });
    Ok(PyScores { buffer, consts, precision: if wide { "f64" } else { "f32" } })
}

#[pyfunction]
fn prune_ratio<'py>(py: Python<'py>, scene: &PyScene, scores: &PyScores, ratio: f64) -> PyResult<(PyScene, Bound<'py, PyAny>)> {
    let (pruned, report) = splatprune::prune::prune_ratio(&scene.0, &scores.buffer, ratio).map_err(err)?;
    Ok((PyScene(pruned), to_dict(py, &report.to_json())?))
}

#[pyfunction]
fn prune_budget<'py>(py: Python<'py>, scene: &PyScene, scores: &PyScores, budget: f64) -> PyResult<(PyScene, Bound<'py, PyAny>)> {
    let (pruned, report) = splatprune::prune::prune_budget(&scene.0, &scores.buffer, budget).map_err(err)?;
    Ok((PyScene(pruned), to_dict(py, &report.to_json())?))
}

#[pyfunction]
#[pyo3(signature = (scene, views, budget, cycles=1, precision="f32", epsilon=DEFAULT_EPSILON, n_max=DEFAULT_N_MAX, background=[0.0; 3], sh_degree=3))]
#[allow(clippy::too_many_arguments)]
fn iterative_prune<'py>(
    py: Python<'py>,
    scene: &PyScene,
    views: &PyViews,
    budget: f64,
    cycles: usize,
    precision: &str,
    epsilon: f64,
    n_max: usize,
    background: [f64; 3],
    sh_degree: usize,
) -> PyResult<(PyScene, Bound<'py, PyAny>)> {
    let wide = self::precision(precision)?;
    let consts = constants(epsilon, n_max, background, sh_degree);
    let result = py.detach(|| {
        if wide {
            splatprune::prune::iterative_prune::<f64>(&scene.0, &views.0, budget, cycles, &consts, Execution::Parallel)
        } else {
            splatprune::prune::iterative_prune::<f32>(&scene.0, &views.0, budget, cycles, &consts, Execution::Parallel)
        }
    });
    let (pruned, report) = result.map_err(err)?;
    Ok((PyScene(pruned), to_dict(py, &report.to_json())?))
}

/// Per-view MSE, PSNR and SSIM of `scene_b` against `scene_a`.
#[pyfunction]
#[pyo3(signature = (scene_a, scene_b, views, background=[0.0; 3], sh_degree=3))]
fn eval_views<'py>(
    py: Python<'py>,
    scene_a: &PyScene,
    scene_b: &PyScene,
    views: &PyViews,
    background: [f64; 3],
    sh_degree: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let report = py
        .detach(|| splatprune::metrics::eval_views(&scene_a.0, &scene_b.0, &views.0, background, sh_degree))
        .map_err(|e| err(e.into()))?;
    to_dict(py, &report.to_json())
}

/// Leave-one-out comparison; returns the summary with a `rows` list.
#[pyfunction]
#[pyo3(signature = (scene, views, precision="f32", max_gaussians=splatprune::oracle::DEFAULT_MAX_GAUSSIANS, epsilon=DEFAULT_EPSILON, n_max=DEFAULT_N_MAX, background=[0.0; 3], sh_degree=3))]
#[allow(clippy::too_many_arguments)]
fn audit<'py>(
    py: Python<'py>,
    scene: &PyScene,
    views: &PyViews,
    precision: &str,
    max_gaussians: usize,
    epsilon: f64,
    n_max: usize,
    background: [f64; 3],
    sh_degree: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let wide = self::precision(precision)?;
    let consts = constants(epsilon, n_max, background, sh_degree);
    let report = py
        .detach(|| {
            if wide {
                splatprune::oracle::audit::<f64>(&scene.0, &views.0, &consts, max_gaussians)
            } else {
                splatprune::oracle::audit::<f32>(&scene.0, &views.0, &consts, max_gaussians)
            }
        })
        .map_err(err)?;
    let mut summary = report.summary_json();
    summary["rows"] = serde_json::to_value(&report.rows).expect("rows serialize");
    to_dict(py, &summary.to_string())
}

/// Renders view `index`; returns `(width, height, pixels)` with `pixels` a flat row-major RGB list.
#[pyfunction]
#[pyo3(signature = (scene, views, index, background=[0.0; 3], sh_degree=3))]
fn render(
    py: Python<'_>,
    scene: &PyScene,
    views: &PyViews,
    index: usize,
    background: [f64; 3],
    sh_degree: usize,
) -> PyResult<(u32, u32, Vec<f32>)> {
    let view = views
        .0
        .views()
        .get(index)
        .ok_or_else(|| PyIndexError::new_err(format!("view {index} out of range")))?;
    let opts = RenderOptions { background, sh_degree, ..Default::default() };
    let out = py.detach(|| render_scene::<f32>(&scene.0, view, &opts));
    Ok((out.width, out.height, out.image.into_iter().flatten().collect()))
}

#[pymodule]
#[pyo3(name = "splatprune")]
fn splatprune_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyViews>()?;
    m.add_class::<PyScores>()?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(quantify, m)?)?;
    m.add_function(wrap_pyfunction!(prune_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(prune_budget, m)?)?;
    m.add_function(wrap_pyfunction!(iterative_prune, m)?)?;
    m.add_function(wrap_pyfunction!(eval_views, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
