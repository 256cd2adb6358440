//! Shared domain types and their validation.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::config::*;
use crate::error::{Error, Result};

/// Sentinel for a missing genotype during ingestion. Never present inside
/// a constructed [`GenotypeMatrix`].
pub const MISSING: u8 = 255;

/// How to resolve missing genotypes at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    /// Any missing entry is an error.
    Reject,
    /// Drop every SNP row containing a missing entry.
    DropSnp,
}

/// m x n allele-count matrix, SNP-major. Every entry is 0, 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    data: Array2<u8>,
    snp_ids: Option<Vec<String>>,
    sample_ids: Option<Vec<String>>,
}

impl GenotypeMatrix {
    pub fn new(data: Array2<u8>) -> Result<Self> {
        Self::with_ids(data, None, None)
    }

    pub fn with_ids(
        data: Array2<u8>,
        snp_ids: Option<Vec<String>>,
        sample_ids: Option<Vec<String>>,
    ) -> Result<Self> {
        let (m, n) = data.dim();
        if m == 0 || n == 0 {
            return Err(Error::InvariantViolation {
                type_name: "GenotypeMatrix",
                detail: format!("dimensions {}x{} must both be >= 1", m, n),
            });
        }
        for ((s, i), &g) in data.indexed_iter() {
            if g > 2 {
                return Err(Error::InvalidGenotype {
                    snp: s,
                    individual: i,
                    value: g,
                });
            }
        }
        if let Some(ids) = &snp_ids {
            if ids.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{} snp ids for {} SNPs",
                    ids.len(),
                    m
                )));
            }
        }
        if let Some(ids) = &sample_ids {
            if ids.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} sample ids for {} individuals",
                    ids.len(),
                    n
                )));
            }
        }
        Ok(Self {
            data,
            snp_ids,
            sample_ids,
        })
    }

    /// Number of SNPs.
    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    /// Number of individuals.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, u8> {
        self.data.view()
    }

    pub fn snp_ids(&self) -> Option<&[String]> {
        self.snp_ids.as_deref()
    }

    pub fn sample_ids(&self) -> Option<&[String]> {
        self.sample_ids.as_deref()
    }

    /// Keep only the SNP rows listed in `indices` (ascending).
    pub fn select_snps(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Degenerate("no SNPs selected".into()));
        }
        let data = self.data.select(Axis(0), indices);
        let snp_ids = self
            .snp_ids
            .as_ref()
            .map(|ids| indices.iter().map(|&s| ids[s].clone()).collect());
        Self::with_ids(data, snp_ids, self.sample_ids.clone())
    }
}

/// Outcome of [`validate_genotypes`] under the `drop_snp` policy.
#[derive(Debug)]
pub struct IngestReport {
    pub genotypes: GenotypeMatrix,
    pub dropped_snps: usize,
}

/// Resolve missing entries according to `policy` and construct a complete
/// [`GenotypeMatrix`]. Raw entries must be in {0, 1, 2, [`MISSING`]}.
pub fn validate_genotypes(raw: ArrayView2<'_, u8>, policy: MissingPolicy) -> Result<IngestReport> {
    let (m, n) = raw.dim();
    if m == 0 || n == 0 {
        return Err(Error::Ingestion(format!(
            "raw matrix {}x{} must be non-empty",
            m, n
        )));
    }
    for ((s, i), &g) in raw.indexed_iter() {
        if g > 2 && g != MISSING {
            return Err(Error::InvalidGenotype {
                snp: s,
                individual: i,
                value: g,
            });
        }
    }
    match policy {
        MissingPolicy::Reject => {
            for ((s, i), &g) in raw.indexed_iter() {
                if g == MISSING {
                    return Err(Error::MissingGenotype {
                        snp: s,
                        individual: i,
                    });
                }
            }
            Ok(IngestReport {
                genotypes: GenotypeMatrix::new(raw.to_owned())?,
                dropped_snps: 0,
            })
        }
        MissingPolicy::DropSnp => {
            let keep: Vec<usize> = (0..m)
                .filter(|&s| raw.row(s).iter().all(|&g| g != MISSING))
                .collect();
            let dropped = m - keep.len();
            if keep.is_empty() {
                return Err(Error::Ingestion(
                    "every SNP row contains a missing genotype".into(),
                ));
            }
            if dropped > 0 {
                log::info!("drop_snp policy removed {} of {} SNPs", dropped, m);
            }
            let data = raw.select(Axis(0), &keep);
            Ok(IngestReport {
                genotypes: GenotypeMatrix::new(data)?,
                dropped_snps: dropped,
            })
        }
    }
}

/// Admixture model Pi = F Q with k ancestral populations.
#[derive(Debug, Clone)]
pub struct AdmixtureModel {
    k: usize,
    q: Array2<f64>,
    f: Array2<f64>,
    columns_sum_to_one: bool,
}

impl AdmixtureModel {
    pub fn new(q: Array2<f64>, f: Array2<f64>) -> Result<Self> {
        let k = q.nrows();
        if f.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "F is {}x{} but Q has {} rows",
                f.nrows(),
                f.ncols(),
                k
            )));
        }
        if k == 0 || q.ncols() == 0 || f.nrows() == 0 {
            return Err(Error::InvariantViolation {
                type_name: "AdmixtureModel",
                detail: "empty Q or F".into(),
            });
        }
        if f.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvariantViolation {
                type_name: "AdmixtureModel",
                detail: "entry of F outside [0,1]".into(),
            });
        }
        // Pi = FQ checked blockwise, never materialized in full.
        let block = crate::config::SNP_BLOCK;
        for chunk in f.axis_chunks_iter(Axis(0), block) {
            let pi = chunk.dot(&q);
            if pi.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
                return Err(Error::InvariantViolation {
                    type_name: "AdmixtureModel",
                    detail: "entry of Pi = FQ outside [0,1]".into(),
                });
            }
        }
        let q_rank = crate::spectral::gram_schmidt_pivoted(q.view(), GRAM_SCHMIDT_TOL)?.rank();
        if q_rank != k {
            return Err(Error::RankDeficient {
                found: q_rank,
                required: k,
            });
        }
        let ft = f.t().to_owned();
        let f_rank = crate::spectral::gram_schmidt_pivoted(ft.view(), GRAM_SCHMIDT_TOL)?.rank();
        if f_rank != k {
            return Err(Error::RankDeficient {
                found: f_rank,
                required: k,
            });
        }
        let columns_sum_to_one = q
            .axis_iter(Axis(1))
            .all(|col| (col.sum() - 1.0).abs() <= 1e-9);
        Ok(Self {
            k,
            q,
            f,
            columns_sum_to_one,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    pub fn f(&self) -> ArrayView2<'_, f64> {
        self.f.view()
    }

    /// Whether every column of Q sums to one (not required by the model).
    pub fn columns_sum_to_one(&self) -> bool {
        self.columns_sum_to_one
    }
}

/// Provenance of a projection estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMethod {
    Pca1,
    Pca2,
    Pca3,
    /// k' = 1 mean-only projector onto span{e}.
    PcaNull,
    FromQ,
    FromPi,
    Exact,
}

impl ProjectionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProjectionMethod::Pca1 => "pca1",
            ProjectionMethod::Pca2 => "pca2",
            ProjectionMethod::Pca3 => "pca3",
            ProjectionMethod::PcaNull => "pca-null",
            ProjectionMethod::FromQ => "from_q",
            ProjectionMethod::FromPi => "from_pi",
            ProjectionMethod::Exact => "exact",
        }
    }
}

/// n x n symmetric idempotent matrix of asserted rank `k_prime`.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    p: Array2<f64>,
    k_prime: usize,
    method: ProjectionMethod,
}

impl ProjectionMatrix {
    pub fn new(p: Array2<f64>, k_prime: usize, method: ProjectionMethod) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "projection must be square, got {}x{}",
                n,
                p.ncols()
            )));
        }
        let max_asym = max_abs_diff(&p, &p.t().to_owned());
        if max_asym > TOL_SYMMETRY {
            return Err(Error::InvariantViolation {
                type_name: "ProjectionMatrix",
                detail: format!("max|P - P^T| = {:.3e}", max_asym),
            });
        }
        let p2 = p.dot(&p);
        let max_idem = max_abs_diff(&p2, &p);
        if max_idem > TOL_IDEMPOTENCY {
            return Err(Error::InvariantViolation {
                type_name: "ProjectionMatrix",
                detail: format!("max|P^2 - P| = {:.3e}", max_idem),
            });
        }
        let trace: f64 = p.diag().sum();
        if (trace - k_prime as f64).abs() > TOL_TRACE {
            return Err(Error::InvariantViolation {
                type_name: "ProjectionMatrix",
                detail: format!("trace {} vs asserted rank {}", trace, k_prime),
            });
        }
        Ok(Self { p, k_prime, method })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            p: Array2::zeros((n, n)),
            k_prime: 0,
            method: ProjectionMethod::Exact,
        }
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.p.view()
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn k_prime(&self) -> usize {
        self.k_prime
    }

    pub fn method(&self) -> ProjectionMethod {
        self.method
    }

    /// Whether the all-ones vector lies in the projected subspace.
    pub fn spans_ones(&self) -> bool {
        let n = self.n();
        let e = Array1::from_elem(n, 1.0);
        let pe = self.p.dot(&e);
        pe.iter().zip(e.iter()).all(|(a, b)| (a - b).abs() <= 1e-8)
    }
}

/// Length-n vector of per-individual average heterozygosities.
#[derive(Debug, Clone)]
pub struct HeterozygosityDiag {
    d: Array1<f64>,
}

impl HeterozygosityDiag {
    pub fn new(d: Array1<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::InvariantViolation {
                type_name: "HeterozygosityDiag",
                detail: "empty vector".into(),
            });
        }
        if d.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvariantViolation {
                type_name: "HeterozygosityDiag",
                detail: "entry outside [0,1]".into(),
            });
        }
        Ok(Self { d })
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.d.view()
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl EigenDecomposition {
    /// Validates orthonormality, descending order, and reconstruction of `a`.
    pub fn new(
        eigenvalues: Array1<f64>,
        eigenvectors: Array2<f64>,
        a: ArrayView2<'_, f64>,
    ) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.dim() != (n, n) || a.dim() != (n, n) {
            return Err(Error::DimensionMismatch(
                "eigenvector matrix and input must be n x n".into(),
            ));
        }
        for w in eigenvalues.windows(2) {
            if w[0] < w[1] {
                return Err(Error::InvariantViolation {
                    type_name: "EigenDecomposition",
                    detail: "eigenvalues not sorted descending".into(),
                });
            }
        }
        let vtv = eigenvectors.t().dot(&eigenvectors);
        let eye = Array2::eye(n);
        let ortho = max_abs_diff(&vtv, &eye);
        if ortho > TOL_ORTHONORMAL {
            return Err(Error::InvariantViolation {
                type_name: "EigenDecomposition",
                detail: format!("max|V^T V - I| = {:.3e}", ortho),
            });
        }
        let lam = Array2::from_diag(&eigenvalues);
        let recon = eigenvectors.dot(&lam).dot(&eigenvectors.t());
        let err = (&recon - &a).mapv(|x| x * x).sum().sqrt();
        let norm_a = a.mapv(|x| x * x).sum().sqrt();
        if err > TOL_RECONSTRUCTION * norm_a.max(1.0) {
            return Err(Error::InvariantViolation {
                type_name: "EigenDecomposition",
                detail: format!("reconstruction error {:.3e}", err),
            });
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> ArrayView1<'_, f64> {
        self.eigenvalues.view()
    }

    pub fn eigenvectors(&self) -> ArrayView2<'_, f64> {
        self.eigenvectors.view()
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Per-individual population labels with a fixed block display order.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationLabels {
    assignment: Vec<String>,
    block_order: Vec<String>,
}

impl PopulationLabels {
    /// Block order is first-appearance order of the labels.
    pub fn new(assignment: Vec<String>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvariantViolation {
                type_name: "PopulationLabels",
                detail: "empty assignment".into(),
            });
        }
        let mut block_order = Vec::new();
        for l in &assignment {
            if !block_order.contains(l) {
                block_order.push(l.clone());
            }
        }
        Ok(Self {
            assignment,
            block_order,
        })
    }

    /// Build labels from contiguous block sizes, named `name1`, `name2`, ...
    pub fn from_sizes(prefix: &str, sizes: &[usize]) -> Result<Self> {
        let mut assignment = Vec::new();
        for (b, &sz) in sizes.iter().enumerate() {
            let name = format!("{}{}", prefix, b + 1);
            assignment.extend(std::iter::repeat(name).take(sz));
        }
        Self::new(assignment)
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[String] {
        &self.assignment
    }

    pub fn block_order(&self) -> &[String] {
        &self.block_order
    }

    /// Member indices per block, in display order.
    pub fn blocks(&self) -> Vec<(String, Vec<usize>)> {
        self.block_order
            .iter()
            .map(|name| {
                let idx = self
                    .assignment
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| *l == name)
                    .map(|(i, _)| i)
                    .collect();
                (name.clone(), idx)
            })
            .collect()
    }
}

/// Paired empirical and estimated residual correlation matrices.
#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub b_hat: Array2<f64>,
    pub c_hat: Array2<f64>,
    pub diff: Array2<f64>,
    pub labels: Option<PopulationLabels>,
    /// True where a variance denominator was at or below the guard.
    pub undefined_mask: Array2<bool>,
}

impl CorrelationReport {
    pub fn new(
        b_hat: Array2<f64>,
        c_hat: Array2<f64>,
        labels: Option<PopulationLabels>,
        undefined_mask: Array2<bool>,
    ) -> Result<Self> {
        let n = b_hat.nrows();
        if b_hat.dim() != (n, n) || c_hat.dim() != (n, n) || undefined_mask.dim() != (n, n) {
            return Err(Error::DimensionMismatch(
                "correlation matrices must share one square shape".into(),
            ));
        }
        if let Some(l) = &labels {
            if l.n() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} individuals",
                    l.n(),
                    n
                )));
            }
        }
        for m in [&b_hat, &c_hat] {
            for ((i, j), &v) in m.indexed_iter() {
                if undefined_mask[(i, j)] {
                    continue;
                }
                if (m[(j, i)] - v).abs() > TOL_SYMMETRY {
                    return Err(Error::InvariantViolation {
                        type_name: "CorrelationReport",
                        detail: "correlation matrix not symmetric".into(),
                    });
                }
                if v.abs() > 1.0 + TOL_CORR_RANGE {
                    return Err(Error::InvariantViolation {
                        type_name: "CorrelationReport",
                        detail: format!("entry ({}, {}) = {} outside [-1,1]", i, j, v),
                    });
                }
                if i == j && (v - 1.0).abs() > TOL_CORR_RANGE {
                    return Err(Error::InvariantViolation {
                        type_name: "CorrelationReport",
                        detail: format!("diagonal entry {} = {}", i, v),
                    });
                }
            }
        }
        let mut diff = &b_hat - &c_hat;
        for ((i, j), masked) in undefined_mask.indexed_iter() {
            if *masked {
                diff[(i, j)] = 0.0;
            }
        }
        Ok(Self {
            b_hat,
            c_hat,
            diff,
            labels,
            undefined_mask,
        })
    }

    pub fn n(&self) -> usize {
        self.b_hat.nrows()
    }
}

/// Analytic inputs for the large-m limits: Q, frequency prior moments, and
/// the diagonal D of genotype variances.
#[derive(Debug, Clone)]
pub struct LimitSpec {
    pub q: Array2<f64>,
    pub mu: Array1<f64>,
    pub sigma: Array2<f64>,
    pub d: Array1<f64>,
}

impl LimitSpec {
    pub fn new(q: Array2<f64>, mu: Array1<f64>, sigma: Array2<f64>, d: Array1<f64>) -> Result<Self> {
        let k = q.nrows();
        let n = q.ncols();
        if mu.len() != k || sigma.dim() != (k, k) || d.len() != n {
            return Err(Error::DimensionMismatch(
                "LimitSpec dimensions inconsistent with Q".into(),
            ));
        }
        let max_asym = max_abs_diff(&sigma, &sigma.t().to_owned());
        if max_asym > TOL_PSD {
            return Err(Error::InvariantViolation {
                type_name: "LimitSpec",
                detail: "Sigma not symmetric".into(),
            });
        }
        let eig = crate::spectral::eig_sym(sigma.view())?;
        if eig.eigenvalues().iter().any(|&l| l < -TOL_PSD) {
            return Err(Error::InvariantViolation {
                type_name: "LimitSpec",
                detail: "Sigma not positive semi-definite".into(),
            });
        }
        if d.iter().any(|&x| x < 0.0) {
            return Err(Error::InvariantViolation {
                type_name: "LimitSpec",
                detail: "negative entry in D".into(),
            });
        }
        Ok(Self { q, mu, sigma, d })
    }
}

pub(crate) fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
