//! Python bindings: simulate the built-in scenarios, fit projections, and
//! read the residual-correlation diagnostic from Python.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use admixfit::diagnostics::{block_summary, fit_with_projection, sum_ratio};
use admixfit::estimators::{project_from_q, project_pca1, project_pca2, project_pca3};
use admixfit::model::{GenotypeMatrix, MissingPolicy, PopulationLabels, ProjectionMatrix};
use admixfit::simulate::{simulate, ScenarioSpec};
use ndarray::Array2;

fn to_py_err(e: admixfit::Error) -> PyErr {
    match e {
        admixfit::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// A genotype matrix with population labels.
#[pyclass]
struct Dataset {
    genotypes: GenotypeMatrix,
    labels: PopulationLabels,
    truth_q: Option<Vec<Vec<f64>>>,
}

#[pymethods]
impl Dataset {
    /// (number of SNPs, number of individuals)
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.genotypes.m(), self.genotypes.n())
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.genotypes
            .sample_ids()
            .map(|ids| ids.to_vec())
            .unwrap_or_else(|| self.labels.assignment().to_vec())
    }

    /// True admixture proportions (k rows of n values) when the scenario
    /// defines them.
    #[getter]
    fn truth_q(&self) -> Option<Vec<Vec<f64>>> {
        self.truth_q.clone()
    }

    fn genotype_row(&self, s: usize) -> PyResult<Vec<u8>> {
        if s >= self.genotypes.m() {
            return Err(PyValueError::new_err(format!("SNP index {} out of range", s)));
        }
        Ok(self.genotypes.data().row(s).to_vec())
    }

    /// Fit a PCA-based projection ("pca1", "pca2", "pca3") at dimension k.
    fn fit_pca(&self, method: &str, k: usize) -> PyResult<FitReport> {
        let p = match method {
            "pca1" => project_pca1(&self.genotypes, k),
            "pca2" => project_pca2(&self.genotypes, k),
            "pca3" => project_pca3(&self.genotypes, k),
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown method '{}': expected pca1, pca2 or pca3",
                    other
                )))
            }
        }
        .map_err(to_py_err)?;
        self.fit(p)
    }

    /// Fit the projection defined by admixture proportions
    /// (k rows of n values).
    fn fit_q(&self, q: Vec<Vec<f64>>) -> PyResult<FitReport> {
        let k = q.len();
        let n = q.first().map(|r| r.len()).unwrap_or(0);
        if q.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("ragged Q rows"));
        }
        let flat: Vec<f64> = q.into_iter().flatten().collect();
        let qm = Array2::from_shape_vec((k, n), flat)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        let p = project_from_q(qm.view()).map_err(to_py_err)?;
        self.fit(p)
    }
}

impl Dataset {
    fn fit(&self, p: ProjectionMatrix) -> PyResult<FitReport> {
        let fit = fit_with_projection(&self.genotypes, &p, Some(self.labels.clone()))
            .map_err(to_py_err)?;
        let ratio = sum_ratio(fit.b_cov.view()).ok();
        Ok(FitReport { fit, ratio })
    }
}

/// Result of one diagnostic fit.
#[pyclass]
struct FitReport {
    fit: admixfit::diagnostics::FitResult,
    ratio: Option<f64>,
}

fn matrix_to_lists(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[pymethods]
impl FitReport {
    /// Empirical residual correlation matrix.
    #[getter]
    fn b_hat(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(&self.fit.report.b_hat)
    }

    /// Model-estimated residual correlation matrix.
    #[getter]
    fn c_hat(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(&self.fit.report.c_hat)
    }

    /// Corrected correlations b_hat - c_hat; the misfit signal.
    #[getter]
    fn diff(&self) -> Vec<Vec<f64>> {
        matrix_to_lists(&self.fit.report.diff)
    }

    /// Off-diagonal over diagonal sum of the residual covariance.
    #[getter]
    fn sum_ratio(&self) -> Option<f64> {
        self.ratio
    }

    /// Rows of (block_a, block_b, count, b_mean, b_sd, diff_mean, diff_sd,
    /// reference); stats are None for empty within-block cells.
    #[allow(clippy::type_complexity)]
    fn block_summary(
        &self,
    ) -> PyResult<Vec<(String, String, usize, Option<f64>, Option<f64>, Option<f64>, Option<f64>, Option<f64>)>>
    {
        let summary = block_summary(&self.fit.report).map_err(to_py_err)?;
        Ok(summary
            .rows
            .into_iter()
            .map(|r| match r.stats {
                Some(s) => (
                    r.block_a,
                    r.block_b,
                    s.count,
                    Some(s.b_mean),
                    Some(s.b_sd),
                    Some(s.diff_mean),
                    Some(s.diff_sd),
                    r.reference,
                ),
                None => (r.block_a, r.block_b, 0, None, None, None, None, r.reference),
            })
            .collect())
    }
}

/// Simulate one of the five built-in scenarios.
#[pyfunction]
#[pyo3(signature = (scenario, m, seed, sizes=None, maf=None))]
fn simulate_scenario(
    scenario: u8,
    m: usize,
    seed: u64,
    sizes: Option<Vec<usize>>,
    maf: Option<f64>,
) -> PyResult<Dataset> {
    let mut spec = ScenarioSpec::preset(scenario, m, sizes, seed).map_err(to_py_err)?;
    if let Some(maf) = maf {
        spec.maf_threshold = maf;
        spec.validate().map_err(to_py_err)?;
    }
    let ds = simulate(&spec).map_err(to_py_err)?;
    let truth_q = ds
        .truth
        .as_ref()
        .map(|t| t.q().rows().into_iter().map(|r| r.to_vec()).collect());
    Ok(Dataset {
        genotypes: ds.genotypes,
        labels: ds.labels,
        truth_q,
    })
}

/// Load genotypes from a TSV file (one SNP row of 0/1/2 per line) with
/// per-individual labels.
#[pyfunction]
#[pyo3(signature = (path, labels))]
fn load_tsv(path: &str, labels: Vec<String>) -> PyResult<Dataset> {
    let report = admixfit::io::read_tsv_genotypes(std::path::Path::new(path), MissingPolicy::DropSnp)
        .map_err(to_py_err)?;
    if labels.len() != report.genotypes.n() {
        return Err(PyValueError::new_err(format!(
            "{} labels for {} individuals",
            labels.len(),
            report.genotypes.n()
        )));
    }
    let labels = PopulationLabels::new(labels).map_err(to_py_err)?;
    Ok(Dataset {
        genotypes: report.genotypes,
        labels,
        truth_q: None,
    })
}

#[pymodule]
fn admixfit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<FitReport>()?;
    m.add_function(wrap_pyfunction!(simulate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(load_tsv, m)?)?;
    Ok(())
}
