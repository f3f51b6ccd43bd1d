use std::path::PathBuf;

use failout::evaluator::{enumerate_scenarios, evaluate_exact, monte_carlo_accuracy};
use failout::harness::{load_dataset, train_model, LoadedModel, ModelArtifact, RunConfig};
use failout::netsim::{bandwidth_table, run_sim, SimConfig};
use failout::nn::Real;
use failout::resilinet::{predict, AliveMask, MaskOrigin, Scheme};
use failout::topology::{DistributedModel, FailureSetting, PartitionPlan};
use failout::{Dataset, Error};
use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Data(_) | Error::Numeric(_) => PyRuntimeError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_scheme(s: &str) -> PyResult<Scheme> {
    s.parse().map_err(to_py)
}

fn features(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows of x have different lengths"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<usize>, classes: usize) -> PyResult<Dataset> {
    Dataset::new(features(x)?, y, classes).map_err(to_py)
}

/// Failure scenarios of a named setting as `(label, probability)`, most
/// likely first.
#[pyfunction]
#[pyo3(signature = (setting, nodes=4))]
fn scenarios(setting: &str, nodes: usize) -> PyResult<Vec<(String, f64)>> {
    let s = FailureSetting::named(setting, nodes).map_err(to_py)?;
    Ok(enumerate_scenarios(&s)
        .map_err(to_py)?
        .into_iter()
        .map(|sc| (sc.label, sc.probability))
        .collect())
}

/// Per-inference scalars sent by each scheme with every node alive, as
/// `(scheme, scalars, savings_vs_dfg)`.
#[pyfunction]
#[pyo3(signature = (plan="health"))]
fn bandwidth(plan: &str) -> PyResult<Vec<(String, usize, f64)>> {
    let t = PartitionPlan::preset(plan).and_then(|p| p.topology()).map_err(to_py)?;
    Ok(bandwidth_table(&t)
        .into_iter()
        .map(|r| (r.scheme.to_string(), r.scalars, r.savings_vs_dfg))
        .collect())
}

#[pyclass(module = "failout_py", name = "Plan", frozen)]
struct PyPlan {
    inner: PartitionPlan,
}

#[pymethods]
impl PyPlan {
    #[new]
    fn new(preset: &str) -> PyResult<Self> {
        Ok(Self {
            inner: PartitionPlan::preset(preset).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn partition(&self) -> Vec<usize> {
        self.inner.partition.clone()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn skips(&self) -> Vec<Vec<i64>> {
        self.inner.skips.clone()
    }

    fn __repr__(&self) -> String {
        format!("Plan({:?}, partition={:?})", self.inner.name, self.inner.partition)
    }
}

enum Artifact {
    F32(ModelArtifact<f32>),
    F64(ModelArtifact<f64>),
}

macro_rules! with_model {
    ($art:expr, $a:ident => $body:expr) => {
        match $art {
            Artifact::F32($a) => $body,
            Artifact::F64($a) => $body,
        }
    };
}

/// A trained distributed model.
#[pyclass(module = "failout_py", name = "Model", frozen)]
struct PyModel {
    art: Artifact,
}

fn predict_with<T: Real>(
    model: &DistributedModel<T>,
    x: Array2<f64>,
    failed: &[usize],
    scheme: Scheme,
) -> failout::Result<Option<Vec<usize>>> {
    if let Some(&n) = failed.iter().find(|&&n| n >= model.topology.cloud) {
        return Err(Error::Usage(format!("node {n} is not a compute node")));
    }
    let mask = AliveMask::with_failed(&model.topology, failed, MaskOrigin::ScenarioEnum);
    predict(model, &mask, scheme, x.mapv(T::lit).view())
}

#[pymethods]
impl PyModel {
    /// Trains from a TOML run config, exactly as `failout train` would.
    #[staticmethod]
    #[pyo3(signature = (config="", precision=32))]
    fn train(py: Python<'_>, config: &str, precision: u32) -> PyResult<Self> {
        let cfg = RunConfig::from_toml(config).map_err(to_py)?;
        cfg.validate_settings(false).map_err(to_py)?;
        py.detach(|| {
            let split = load_dataset(&cfg.dataset, cfg.seed)?;
            Ok(match precision {
                32 => {
                    let (m, h) = train_model::<f32>(&cfg, &split)?;
                    Artifact::F32(ModelArtifact::new(&cfg, h, m))
                }
                64 => {
                    let (m, h) = train_model::<f64>(&cfg, &split)?;
                    Artifact::F64(ModelArtifact::new(&cfg, h, m))
                }
                p => return Err(Error::Usage(format!("precision must be 32 or 64, got {p}"))),
            })
        })
        .map(|art| Self { art })
        .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let art = match LoadedModel::load(&path).map_err(to_py)? {
            LoadedModel::F32(a) => Artifact::F32(a),
            LoadedModel::F64(a) => Artifact::F64(a),
        };
        Ok(Self { art })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        with_model!(&self.art, a => a.save(&path)).map_err(to_py)
    }

    #[getter]
    fn scheme(&self) -> String {
        with_model!(&self.art, a => a.scheme.to_string())
    }

    #[getter]
    fn precision(&self) -> u32 {
        with_model!(&self.art, a => a.precision)
    }

    #[getter]
    fn plan(&self) -> PyPlan {
        PyPlan {
            inner: with_model!(&self.art, a => a.model.plan.clone()),
        }
    }

    #[getter]
    fn param_count(&self) -> usize {
        with_model!(&self.art, a => a.model.param_count())
    }

    /// Per-epoch `(loss, accuracy)` from training.
    #[getter]
    fn history(&self) -> Vec<(f64, f64)> {
        with_model!(&self.art, a => a.history.epochs.iter().map(|e| (e.loss, e.accuracy)).collect())
    }

    /// Predicted classes with the listed compute nodes down, or `None` when
    /// nothing reaches the cloud.
    #[pyo3(signature = (x, failed=Vec::new(), scheme=None))]
    fn predict(&self, x: Vec<Vec<f64>>, failed: Vec<usize>, scheme: Option<&str>) -> PyResult<Option<Vec<usize>>> {
        let x = features(x)?;
        let scheme = scheme.map(parse_scheme).transpose()?;
        with_model!(&self.art, a => predict_with(&a.model, x, &failed, scheme.unwrap_or(a.scheme))).map_err(to_py)
    }

    /// Exact expected accuracy over every failure scenario of `setting`.
    #[pyo3(signature = (x, y, setting="normal", scheme=None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        setting: &str,
        scheme: Option<&str>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let scheme = scheme.map(parse_scheme).transpose()?;
        let report = with_model!(&self.art, a => {
            let test = dataset(x, y, a.model.classes())?;
            let s = FailureSetting::named(setting, a.model.node_count()).map_err(to_py)?;
            evaluate_exact(&a.model, &s, scheme.unwrap_or(a.scheme), &test, 1).map_err(to_py)?
        });
        let out = PyDict::new(py);
        out.set_item("expected_accuracy", report.expected_accuracy)?;
        out.set_item("clean_accuracy", report.clean_accuracy)?;
        out.set_item("chance_level", report.chance_level)?;
        let rows: Vec<(String, f64, f64, bool)> = report
            .scenarios
            .into_iter()
            .map(|s| (s.label, s.probability, s.accuracy, s.reachable))
            .collect();
        out.set_item("scenarios", rows)?;
        Ok(out)
    }

    /// Monte Carlo estimate `(mean, stderr)` of the expected accuracy.
    #[pyo3(signature = (x, y, setting="normal", draws=10000, seed=0, scheme=None))]
    fn monte_carlo(
        &self,
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        setting: &str,
        draws: usize,
        seed: u64,
        scheme: Option<&str>,
    ) -> PyResult<(f64, f64)> {
        let scheme = scheme.map(parse_scheme).transpose()?;
        let est = with_model!(&self.art, a => {
            let test = dataset(x, y, a.model.classes())?;
            let s = FailureSetting::named(setting, a.model.node_count()).map_err(to_py)?;
            monte_carlo_accuracy(&a.model, &s, scheme.unwrap_or(a.scheme), &test, draws, seed).map_err(to_py)?
        });
        Ok((est.mean, est.stderr))
    }

    /// Runs the network simulator and returns its report as JSON text.
    #[pyo3(signature = (x, y, sim="normal", horizon_hours=None, seed=None))]
    fn simulate(
        &self,
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        sim: &str,
        horizon_hours: Option<f64>,
        seed: Option<u64>,
    ) -> PyResult<String> {
        let mut cfg = SimConfig::preset(sim)
            .or_else(|_| SimConfig::from_toml(sim))
            .map_err(to_py)?;
        if let Some(h) = horizon_hours {
            cfg.horizon_hours = h;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let report = with_model!(&self.art, a => {
            let data = dataset(x, y, a.model.classes())?;
            run_sim(&cfg, &a.model, a.scheme, &data).map_err(to_py)?
        });
        serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        with_model!(&self.art, a => format!(
            "Model(plan={:?}, scheme={}, f{})",
            a.model.plan.name, a.scheme, a.precision
        ))
    }
}

#[pymodule]
fn failout_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(bandwidth, m)?)?;
    Ok(())
}
