//! Python bindings: meshes, the hand model, contact maps, refinement and the
//! synthetic round trip.

use std::path::PathBuf;

use handcontact::config::RunConfig;
use handcontact::contact::{self, CapsuleConfig, ContactMap, MeshSide};
use handcontact::experiment::run_roundtrip;
use handcontact::io::{load_mesh, save_mesh};
use handcontact::loss::{Objective, Targets};
use handcontact::optim::{optimize, OptimConfig};
use handcontact::synthetic::{synthetic_hand, synthetic_hand_with_shape};
use handcontact::{Error, TriMesh, Vec3};
use pyo3::exceptions::{PyFileNotFoundError, PyIOError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match &e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
            PyFileNotFoundError::new_err(e.to_string())
        }
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn points(vertices: Vec<[f64; 3]>) -> Vec<Vec3> {
    vertices.into_iter().map(Vec3::from).collect()
}

fn arrays(vertices: &[Vec3]) -> Vec<[f64; 3]> {
    vertices.iter().map(|v| [v.x, v.y, v.z]).collect()
}

/// Triangle mesh in millimetres.
#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    inner: TriMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> PyResult<Self> {
        let inner = TriMesh::new(points(vertices), faces).map_err(to_py)?;
        Ok(PyMesh { inner })
    }

    /// Reads an ASCII OBJ or PLY file, multiplying positions by `scale`.
    #[staticmethod]
    #[pyo3(signature = (path, scale = 1.0))]
    fn load(path: PathBuf, scale: f64) -> PyResult<Self> {
        Ok(PyMesh {
            inner: load_mesh(&path, scale).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (path, scale = 1.0))]
    fn save(&self, path: PathBuf, scale: f64) -> PyResult<()> {
        save_mesh(&self.inner, &path, scale).map_err(to_py)
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        arrays(&self.inner.vertices)
    }

    #[getter]
    fn faces(&self) -> Vec<[usize; 3]> {
        self.inner.faces.clone()
    }

    #[getter]
    fn vertex_normals(&self) -> Vec<[f64; 3]> {
        arrays(&self.inner.vertex_normals)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Pose coefficients, shape coefficients, translation (mm) and axis-angle
/// rotation of a hand.
#[pyclass(name = "HandParams", skip_from_py_object)]
#[derive(Clone)]
struct PyHandParams {
    inner: handcontact::HandParams,
}

#[pymethods]
impl PyHandParams {
    #[new]
    #[pyo3(signature = (theta, beta = Vec::new(), translation = [0.0; 3], rotation = [0.0; 3]))]
    fn new(theta: Vec<f64>, beta: Vec<f64>, translation: [f64; 3], rotation: [f64; 3]) -> Self {
        PyHandParams {
            inner: handcontact::HandParams {
                theta,
                beta,
                translation,
                rotation,
            },
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyHandParams {
            inner: handcontact::HandParams::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta.clone()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta.clone()
    }

    #[getter]
    fn translation(&self) -> [f64; 3] {
        self.inner.translation
    }

    #[getter]
    fn rotation(&self) -> [f64; 3] {
        self.inner.rotation
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Articulated hand model with linear blend skinning.
#[pyclass(name = "HandModel", frozen)]
struct PyHandModel {
    inner: handcontact::HandModel,
}

#[pymethods]
impl PyHandModel {
    /// The bundled synthetic hand, optionally with two shape coefficients.
    #[staticmethod]
    #[pyo3(signature = (with_shape = false))]
    fn synthetic(with_shape: bool) -> Self {
        let inner = if with_shape {
            synthetic_hand_with_shape()
        } else {
            synthetic_hand()
        };
        PyHandModel { inner }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyHandModel {
            inner: handcontact::HandModel::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_joints(&self) -> usize {
        self.inner.n_joints()
    }

    #[getter]
    fn joint_names(&self) -> Vec<String> {
        self.inner.joint_names.clone()
    }

    fn zero_params(&self) -> PyHandParams {
        PyHandParams {
            inner: self.inner.zero_params(),
        }
    }

    /// Posed mesh and joint positions.
    fn pose(&self, params: &PyHandParams) -> PyResult<(PyMesh, Vec<[f64; 3]>)> {
        let posed = self.inner.pose(&params.inner).map_err(to_py)?;
        Ok((PyMesh { inner: posed.mesh }, arrays(&posed.joints)))
    }
}

/// Contact value of a point at capsule distance `phi`.
#[pyfunction]
#[pyo3(signature = (phi, c_rad = 1.0))]
fn contact_value(phi: f64, c_rad: f64) -> f64 {
    contact::contact_value(phi, &CapsuleConfig { c_rad, ..CapsuleConfig::default() })
}

/// Object and hand contact maps.
#[pyfunction]
#[pyo3(signature = (object, hand, c_top = 0.5, c_bot = 1.0, c_rad = 1.0))]
fn contact_maps(py: Python<'_>, object: &PyMesh, hand: &PyMesh, c_top: f64, c_bot: f64, c_rad: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let cfg = CapsuleConfig { c_top, c_bot, c_rad };
    cfg.validate().map_err(to_py)?;
    let state = py
        .detach(|| contact::contact_maps(&object.inner, &hand.inner, &cfg))
        .map_err(to_py)?;
    Ok((state.object.values, state.hand.values))
}

/// Refines `init` toward the target maps; returns the parameters and the
/// final loss.
#[pyfunction]
#[pyo3(signature = (model, object, init, target_object, target_hand = None, iterations = 250, restarts = 1, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn refine(
    py: Python<'_>,
    model: &PyHandModel,
    object: &PyMesh,
    init: &PyHandParams,
    target_object: Vec<f64>,
    target_hand: Option<Vec<f64>>,
    iterations: usize,
    restarts: usize,
    seed: u64,
) -> PyResult<(PyHandParams, f64)> {
    let targets = Targets {
        object: ContactMap::new(MeshSide::Object, target_object).map_err(to_py)?,
        hand: target_hand
            .map(|values| ContactMap::new(MeshSide::Hand, values))
            .transpose()
            .map_err(to_py)?,
    };
    let cfg = OptimConfig {
        iterations,
        n_restart: restarts,
        seed,
        ..OptimConfig::default()
    };
    let result = py
        .detach(|| {
            let objective = Objective::new(&model.inner, &object.inner, &targets, Default::default(), Default::default())?;
            optimize(&objective, &init.inner, &cfg)
        })
        .map_err(to_py)?;
    Ok((PyHandParams { inner: result.params }, result.final_loss))
}

/// Synthesize, perturb, refine and evaluate; returns the summary as JSON and
/// the per-sample metrics CSV.
#[pyfunction]
#[pyo3(signature = (n_grasps = 50, seed = 0, restarts = 4))]
fn roundtrip(py: Python<'_>, n_grasps: usize, seed: u64, restarts: usize) -> PyResult<(String, String)> {
    let mut config = RunConfig::default();
    config.optim.n_restart = restarts;
    let outcome = py
        .detach(|| run_roundtrip(&synthetic_hand(), n_grasps, &config, seed))
        .map_err(to_py)?;
    let summary = serde_json::to_string(&outcome.summary()).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((summary, outcome.report.to_csv()))
}

#[pymodule]
fn handcontact_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyHandParams>()?;
    m.add_class::<PyHandModel>()?;
    m.add_function(wrap_pyfunction!(contact_value, m)?)?;
    m.add_function(wrap_pyfunction!(contact_maps, m)?)?;
    m.add_function(wrap_pyfunction!(refine, m)?)?;
    m.add_function(wrap_pyfunction!(roundtrip, m)?)?;
    Ok(())
}
