use std::path::PathBuf;
use std::sync::Arc;

use biot_precond::harness::{self, Format, GridPoint, KappaSpec, Layout, SweepConfig};
use biot_precond::krylov::MinresOptions;
use biot_precond::mesh::{BcPreset, TriMesh};
use biot_precond::pressure_precond::MassInner;
use biot_precond::systems::{self, BlockSystem, CaseId, Discretization, Elements};
use biot_precond::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Parse(_) | Error::DimensionMismatch { .. } | Error::Unsupported(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_preset(s: &str) -> PyResult<BcPreset> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "all_dirichlet" | "dirichlet" => Ok(BcPreset::AllDirichlet),
        "left_open" | "mixed" => Ok(BcPreset::LeftOpen),
        _ => Err(PyValueError::new_err(format!("unknown preset '{s}' (all_dirichlet | left_open)"))),
    }
}

fn parse_inner(s: &str) -> PyResult<MassInner> {
    match s.to_ascii_lowercase().as_str() {
        "exact" => Ok(MassInner::ExactMass),
        "jacobi" => Ok(MassInner::Jacobi),
        _ => Err(PyValueError::new_err(format!("unknown mass inner solve '{s}' (exact | jacobi)"))),
    }
}

fn parse_elements(s: &str) -> PyResult<Elements> {
    match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
        "taylor_hood" | "th" => Ok(Elements::TaylorHood),
        "mini" => Ok(Elements::Mini),
        _ => Err(PyValueError::new_err(format!("unknown element pair '{s}' (taylor_hood | mini)"))),
    }
}

/// Uniform right-diagonal triangulation of the unit square.
#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    inner: Arc<TriMesh>,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (n, preset = "left_open"))]
    fn new(n: usize, preset: &str) -> PyResult<Self> {
        let inner = TriMesh::unit_square(n, parse_preset(preset)?).map_err(to_py)?;
        Ok(Self { inner: Arc::new(inner) })
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.edges().len()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices().iter().map(|v| (v[0], v[1])).collect()
    }

    fn cells(&self) -> Vec<(usize, usize, usize)> {
        self.inner.cells().iter().map(|c| (c[0], c[1], c[2])).collect()
    }

    fn cell_areas(&self) -> Vec<f64> {
        self.inner.cell_areas().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(n={}, preset={:?})", self.inner.n_div(), self.inner.preset())
    }
}

/// An assembled block system together with its block-diagonal preconditioner.
#[pyclass(name = "System", frozen)]
struct PySystem {
    inner: BlockSystem,
}

#[pymethods]
impl PySystem {
    /// Builds one benchmark case; `kappa_band` replaces `kappa` by the banded field.
    #[staticmethod]
    #[pyo3(signature = (case, n, lam = 1.0, alpha = 1.0, kappa = 1.0, kappa_band = None, mass_inner = "exact", seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn case(
        py: Python<'_>,
        case: &str,
        n: usize,
        lam: f64,
        alpha: f64,
        kappa: f64,
        kappa_band: Option<f64>,
        mass_inner: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let case: CaseId = case.parse().map_err(to_py)?;
        let inner = parse_inner(mass_inner)?;
        let kappa = kappa_band.map(KappaSpec::band).unwrap_or(KappaSpec::Constant(kappa));
        let p = GridPoint { case, n, lambda: lam, alpha, kappa };
        let sys = py
            .detach(|| {
                let disc = harness::discretization_for(case, n)?;
                let sys = harness::build_case(&disc, &p, inner)?;
                let rhs = harness::manufactured_rhs(&sys, seed);
                sys.with_rhs(rhs)
            })
            .map_err(to_py)?;
        Ok(Self { inner: sys })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn field_names(&self) -> Vec<String> {
        self.inner.field_names.iter().map(|s| s.to_string()).collect()
    }

    #[getter]
    fn field_sizes(&self) -> Vec<usize> {
        self.inner.field_sizes.clone()
    }

    #[getter]
    fn rhs(&self) -> Vec<f64> {
        self.inner.rhs.clone()
    }

    fn with_rhs(&self, rhs: Vec<f64>) -> PyResult<Self> {
        let sys = self.inner.clone().with_rhs(rhs).map_err(to_py)?;
        Ok(Self { inner: sys })
    }

    fn matvec(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_len(x.len())?;
        Ok(self.inner.matrix().mul_vec(&x))
    }

    fn apply_preconditioner(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        use biot_precond::krylov::LinearOp;
        self.check_len(x.len())?;
        Ok(self.inner.preconditioner().apply(&x))
    }

    /// `(rows, cols, values)` of the monolithic matrix.
    fn triplets(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut out = (Vec::new(), Vec::new(), Vec::new());
        for (r, c, v) in self.inner.matrix().triplets() {
            out.0.push(r);
            out.1.push(c);
            out.2.push(v);
        }
        out
    }

    /// Preconditioned MinRes; returns the solution and a report dict.
    #[pyo3(signature = (rtol = 1e-6, max_iter = 5000))]
    fn solve<'py>(&self, py: Python<'py>, rtol: f64, max_iter: usize) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
        let (x, rep) = py.detach(|| self.inner.solve(MinresOptions { rtol, max_iter })).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("iterations", rep.iterations)?;
        d.set_item("converged", rep.converged)?;
        d.set_item("final_ratio", rep.residual_history.last().copied())?;
        d.set_item("residual_history", rep.residual_history)?;
        Ok((x, d))
    }

    /// Lanczos estimate of cond(B A).
    #[pyo3(signature = (n_probe = 3, seed = 1))]
    fn condition<'py>(&self, py: Python<'py>, n_probe: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let est = py.detach(|| self.inner.estimate_condition(n_probe, seed)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("cond", est.cond)?;
        d.set_item("smallest", est.smallest)?;
        d.set_item("largest", est.largest)?;
        d.set_item("dropped", est.dropped)?;
        d.set_item("steps", est.steps)?;
        Ok(d)
    }

    /// Solution of the dense LU reference solve (small systems only).
    fn dense_solve(&self, py: Python<'_>) -> PyResult<Vec<f64>> {
        py.detach(|| systems::dense_reference_solution(&self.inner)).map_err(to_py)
    }

    fn dump(&self, out_dir: PathBuf) -> PyResult<()> {
        self.inner.dump(&out_dir).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("System(N={}, fields={:?}, dim={})", self.inner.n_div, self.inner.field_names, self.inner.dim())
    }
}

impl PySystem {
    fn check_len(&self, n: usize) -> PyResult<()> {
        if n != self.inner.dim() {
            return Err(to_py(Error::DimensionMismatch { expected: self.inner.dim(), got: n }));
        }
        Ok(())
    }
}

/// Runs a sweep described by a JSON config; returns the result rows as JSON.
#[pyfunction]
fn sweep(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = SweepConfig::from_json(config_json).map_err(to_py)?;
    py.detach(|| {
        let rows = harness::run_sweep(&cfg)?;
        harness::emit_table(&rows, Format::Json, Layout::Flat)
    })
    .map_err(to_py)
}

/// Renders rows (as returned by `sweep`) in one of the table layouts.
#[pyfunction]
#[pyo3(signature = (rows_json, format = "md", layout = "flat"))]
fn emit_table(rows_json: &str, format: &str, layout: &str) -> PyResult<String> {
    let rows = harness::rows_from_json(rows_json).map_err(to_py)?;
    let format: Format = format.parse().map_err(to_py)?;
    let layout: Layout = layout.parse().map_err(to_py)?;
    harness::emit_table(&rows, format, layout).map_err(to_py)
}

/// Discrete inf-sup constant of an element pair on the all-Dirichlet mesh.
#[pyfunction]
#[pyo3(signature = (n, elements = "taylor_hood", zero_mean = true))]
fn inf_sup(py: Python<'_>, n: usize, elements: &str, zero_mean: bool) -> PyResult<f64> {
    let el = parse_elements(elements)?;
    py.detach(|| {
        let d = Discretization::new(n, BcPreset::AllDirichlet, el)?;
        systems::discrete_inf_sup(d.velocity_space(), d.pressure_space(), zero_mean)
    })
    .map_err(to_py)
}

/// The built-in invariant checks as `(name, passed, detail)` tuples.
#[pyfunction]
fn check(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(harness::run_checks).into_iter().map(|c| (c.name, c.passed, c.detail)).collect()
}

#[pymodule]
fn biotpc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(emit_table, m)?)?;
    m.add_function(wrap_pyfunction!(inf_sup, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
