//! Python bindings for `flipcert`.

use std::time::Duration;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use flipcert::classifiers::{ClassifierContext, ClassifierSpec};
use flipcert::region::{ranked_regions, BackendChoice, RankedRegions};
use flipcert::smoothing::{certify_example, BaseClassifier, SmoothingConfig, Verdict};
use flipcert::special::Rounding;
use flipcert::{Label, StructureVector};

create_exception!(flipcert, FlipcertError, PyValueError);

fn err(e: flipcert::Error) -> PyErr {
    FlipcertError::new_err(e.to_string())
}

fn backend(name: &str) -> PyResult<BackendChoice> {
    name.parse().map_err(err)
}

/// Keep probability `β` as the fraction `numer/denom`.
#[pyclass(name = "NoiseSpec", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyNoiseSpec(flipcert::NoiseSpec);

#[pymethods]
impl PyNoiseSpec {
    #[new]
    fn new(numer: u64, denom: u64) -> PyResult<Self> {
        flipcert::NoiseSpec::new(numer, denom).map(Self).map_err(err)
    }

    /// Parses `"0.7"` or `"7/10"`.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        text.parse().map(Self).map_err(err)
    }

    #[getter]
    fn numer(&self) -> u64 {
        self.0.numer()
    }

    #[getter]
    fn denom(&self) -> u64 {
        self.0.denom()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta_f64()
    }

    fn __repr__(&self) -> String {
        format!("NoiseSpec({}, {})", self.0.numer(), self.0.denom())
    }
}

/// Region masses ranked by decreasing density ratio, as `(m, Pr(X∈R(m)),
/// Pr(Y∈R(m)))`. The exact backend yields `Fraction`s, the float backend
/// `(lo, hi)` enclosures.
#[pyfunction]
#[pyo3(signature = (n, k, beta, backend = "exact"))]
fn region_probabilities<'py>(
    py: Python<'py>,
    n: usize,
    k: usize,
    beta: PyNoiseSpec,
    backend: &str,
) -> PyResult<Bound<'py, PyList>> {
    let choice = self::backend(backend)?;
    let regions = py.detach(|| ranked_regions(n, k, &beta.0, choice.resolve(n))).map_err(err)?;
    let out = PyList::empty(py);
    match regions {
        RankedRegions::Exact(r) => {
            let fraction = py.import("fractions")?.getattr("Fraction")?;
            for g in r.regions {
                let x = fraction.call1((g.prob_x.to_string(),))?;
                let y = fraction.call1((g.prob_y.to_string(),))?;
                out.append((g.m, x, y))?;
            }
        }
        RankedRegions::Float(r) => {
            for g in r.regions {
                out.append((g.m, (g.prob_x.lo, g.prob_x.hi), (g.prob_y.lo, g.prob_y.hi)))?;
            }
        }
    }
    Ok(out)
}

/// Whether the bounds certify robustness against `k` flips.
#[pyfunction]
#[pyo3(signature = (n, k, beta, pa_lower, pb_upper, backend = "exact"))]
fn check_radius(n: usize, k: usize, beta: PyNoiseSpec, pa_lower: f64, pb_upper: f64, backend: &str) -> PyResult<bool> {
    let backend = self::backend(backend)?.resolve(n);
    flipcert::certifier::check_radius(n, k, &beta.0, pa_lower, pb_upper, backend).map_err(err)
}

/// Largest certifiable perturbation size, or `None` on abstention.
#[pyfunction]
#[pyo3(signature = (n, beta, pa_lower, pb_upper, backend = "auto"))]
fn certified_perturbation_size(
    py: Python<'_>,
    n: usize,
    beta: PyNoiseSpec,
    pa_lower: f64,
    pb_upper: f64,
    backend: &str,
) -> PyResult<Option<usize>> {
    let backend = self::backend(backend)?.resolve(n);
    py.detach(|| flipcert::certified_perturbation_size(n, &beta.0, pa_lower, pb_upper, backend))
        .map(|c| c.radius())
        .map_err(err)
}

/// Simultaneous Clopper–Pearson bounds for label counts.
#[pyfunction]
fn simultaneous_bounds<'py>(py: Python<'py>, counts: Vec<u64>, alpha: f64) -> PyResult<Bound<'py, PyDict>> {
    let counts = flipcert::LabelCounts::new(counts).map_err(err)?;
    let b = flipcert::simultaneous_bounds(&counts, alpha).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("label", b.c_a.0)?;
    d.set_item("pa_lower", b.pa_lower)?;
    d.set_item("pb_upper", b.pb_upper)?;
    d.set_item("tie", b.tie)?;
    Ok(d)
}

/// The `q`-quantile of Beta(`u`, `w`), rounded outward in `direction`.
#[pyfunction]
#[pyo3(signature = (q, u, w, direction = "down"))]
fn beta_quantile(q: f64, u: f64, w: f64, direction: &str) -> PyResult<f64> {
    let direction = match direction {
        "down" => Rounding::Down,
        "up" => Rounding::Up,
        other => return Err(PyValueError::new_err(format!("unknown direction `{other}`"))),
    };
    flipcert::special::beta_quantile(q, u, w, direction).map_err(err)
}

/// A Python callable mapping a list of bit strings to a list of labels.
struct CallableClassifier {
    f: Py<PyAny>,
    num_labels: usize,
}

impl BaseClassifier for CallableClassifier {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, batch: &[StructureVector]) -> flipcert::Result<Vec<Label>> {
        Python::attach(|py| {
            let inputs: Vec<String> = batch.iter().map(|s| s.to_string()).collect();
            let labels: Vec<u32> = self.f.call1(py, (inputs,))?.extract(py)?;
            Ok::<_, PyErr>(labels)
        })
        .map_err(|e| flipcert::Error::Internal(format!("python classifier: {e}")))?
        .into_iter()
        .map(|l| Label::checked(l, self.num_labels))
        .collect()
    }

    fn parallel(&self) -> bool {
        false
    }
}

/// Smooths `classifier` around `bits` and certifies the prediction.
///
/// `classifier` is a built-in name such as `"parity"` or a callable taking a
/// list of bit strings and returning one label per string.
#[pyfunction]
#[pyo3(signature = (bits, classifier, beta, samples = 10_000, alpha = 0.001, seed = 0, num_labels = 2, backend = "auto", batch_size = 128))]
#[allow(clippy::too_many_arguments)]
fn certify<'py>(
    py: Python<'py>,
    bits: &str,
    classifier: Bound<'py, PyAny>,
    beta: PyNoiseSpec,
    samples: u64,
    alpha: f64,
    seed: u64,
    num_labels: usize,
    backend: &str,
    batch_size: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let s: StructureVector = bits.parse().map_err(err)?;
    let choice = self::backend(backend)?;
    let config = SmoothingConfig { batch_size, ..SmoothingConfig::new(beta.0, samples, seed) };
    let report = if let Ok(name) = classifier.extract::<String>() {
        let spec: ClassifierSpec = name.parse().map_err(err)?;
        let ctx = ClassifierContext { n: s.dim(), num_labels, node: None, labels: None, timeout: Duration::from_secs(30) };
        let base = spec.build(&ctx).map_err(err)?;
        py.detach(|| certify_example(base.as_ref(), &s, &config, alpha, choice))
    } else {
        let base = CallableClassifier { f: classifier.unbind(), num_labels };
        certify_example(&base, &s, &config, alpha, choice)
    }
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("label", report.run.prediction.0)?;
    d.set_item("counts", report.run.counts.as_slice().to_vec())?;
    d.set_item("pa_lower", report.bounds.pa_lower)?;
    d.set_item("pb_upper", report.bounds.pb_upper)?;
    d.set_item("tie", report.bounds.tie)?;
    match report.verdict {
        Verdict::Certified(c) => {
            d.set_item("certified", true)?;
            d.set_item("k", c.k_certified)?;
        }
        Verdict::Abstain => {
            d.set_item("certified", false)?;
            d.set_item("k", py.None())?;
        }
    }
    Ok(d)
}

#[pymodule]
#[pyo3(name = "flipcert")]
fn flipcert_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FlipcertError", m.py().get_type::<FlipcertError>())?;
    m.add_class::<PyNoiseSpec>()?;
    m.add_function(wrap_pyfunction!(region_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(check_radius, m)?)?;
    m.add_function(wrap_pyfunction!(certified_perturbation_size, m)?)?;
    m.add_function(wrap_pyfunction!(simultaneous_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(beta_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    Ok(())
}
