//! Heterozygosity and Gram estimates plus the four projection estimators.
//!
//! All reductions over SNPs run in fixed-size blocks whose partial sums are
//! combined in block-index order, so results are bit-identical regardless of
//! thread count.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::config::*;
use crate::error::{Error, Result};
use crate::model::{
    EigenDecomposition, GenotypeMatrix, HeterozygosityDiag, ProjectionMatrix, ProjectionMethod,
};
use crate::spectral::{self, OrthonormalBasis};

/// Which normalization produced a Gram estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramKind {
    /// (1/m) G^T G - diag(D̂), the variance-adjusted Gram.
    Pca1Adjusted,
    /// (1/m) G1^T G1 over SNP-centered genotypes.
    Centered,
    /// (1/m') G2^T G2 over centered and variance-scaled genotypes.
    Standardized,
}

/// n x n symmetric Gram estimate with the SNP count that produced it.
#[derive(Debug, Clone)]
pub struct GramEstimate {
    h: Array2<f64>,
    kind: GramKind,
    m_used: usize,
}

impl GramEstimate {
    fn new(h: Array2<f64>, kind: GramKind, m_used: usize) -> Result<Self> {
        let n = h.nrows();
        let mut max_asym = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max_asym = max_asym.max((h[(i, j)] - h[(j, i)]).abs());
            }
        }
        if max_asym > 1e-10 {
            return Err(Error::InvariantViolation {
                type_name: "GramEstimate",
                detail: format!("max asymmetry {:.3e}", max_asym),
            });
        }
        if kind == GramKind::Centered {
            let norm = h.mapv(|x| x * x).sum().sqrt();
            let e = Array1::from_elem(n, 1.0);
            let he = h.dot(&e);
            let max_he = he.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if max_he > 1e-8 * norm.max(1.0) {
                return Err(Error::InvariantViolation {
                    type_name: "GramEstimate",
                    detail: format!("centered Gram has H e = {:.3e}", max_he),
                });
            }
        }
        Ok(Self { h, kind, m_used })
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.h.view()
    }

    pub fn kind(&self) -> GramKind {
        self.kind
    }

    /// Number of SNPs that contributed.
    pub fn m_used(&self) -> usize {
        self.m_used
    }
}

/// Per-SNP observed standard deviations after dropping zero-variance sites.
#[derive(Debug, Clone)]
pub struct ScalingDiag {
    pub w: Vec<f64>,
    pub kept_snps: Vec<usize>,
}

/// D̂_ii = (1/m) sum_s G_si (2 - G_si).
pub fn heterozygosity_diag(g: &GenotypeMatrix) -> HeterozygosityDiag {
    let m = g.m();
    let n = g.n();
    let partials: Vec<Array1<f64>> = g
        .data()
        .axis_chunks_iter(Axis(0), SNP_BLOCK)
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| {
            let mut acc = Array1::<f64>::zeros(n);
            for row in chunk.rows() {
                for (i, &gv) in row.iter().enumerate() {
                    // G(2-G) is 1 exactly for heterozygotes, else 0
                    acc[i] += (gv * (2 - gv)) as f64;
                }
            }
            acc
        })
        .collect();
    let mut d = Array1::<f64>::zeros(n);
    for p in partials {
        d += &p;
    }
    d.mapv_inplace(|x| x / m as f64);
    HeterozygosityDiag::new(d).expect("heterozygosity entries are averages of {0,1}")
}

/// Raw Gram G^T G in f64, accumulated blockwise in deterministic order.
pub fn gram_raw(g: ArrayView2<'_, u8>) -> Array2<f64> {
    let n = g.ncols();
    let partials: Vec<Array2<f64>> = g
        .axis_chunks_iter(Axis(0), SNP_BLOCK)
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| {
            let b = chunk.mapv(|x| x as f64);
            b.t().dot(&b)
        })
        .collect();
    let mut acc = Array2::<f64>::zeros((n, n));
    for p in partials {
        acc += &p;
    }
    acc
}

/// Raw Gram accumulated from a fallible block stream (same block size and
/// combine order as [`gram_raw`], hence bit-identical results).
pub fn gram_raw_streamed<I>(blocks: I, n: usize) -> Result<Array2<f64>>
where
    I: Iterator<Item = Result<Array2<u8>>>,
{
    let mut acc = Array2::<f64>::zeros((n, n));
    for block in blocks {
        let block = block?;
        if block.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "block has {} columns, expected {}",
                block.ncols(),
                n
            )));
        }
        let b = block.mapv(|x| x as f64);
        acc += &b.t().dot(&b);
    }
    Ok(acc)
}

/// Ĥ = (1/m) G^T G - diag(D̂).
pub fn gram_pca1(g: &GenotypeMatrix) -> GramEstimate {
    let m = g.m();
    let mut h = gram_raw(g.data());
    h.mapv_inplace(|x| x / m as f64);
    let d = heterozygosity_diag(g);
    for i in 0..g.n() {
        h[(i, i)] -= d.values()[i];
    }
    GramEstimate::new(h, GramKind::Pca1Adjusted, m).expect("pca1 Gram is symmetric")
}

/// Ĥ₁ = (1/m) G₁^T G₁ with G₁ the SNP-wise mean-centered genotypes.
pub fn gram_centered(g: &GenotypeMatrix) -> GramEstimate {
    let m = g.m();
    let n = g.n();
    let partials: Vec<Array2<f64>> = g
        .data()
        .axis_chunks_iter(Axis(0), SNP_BLOCK)
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| {
            let mut b = chunk.mapv(|x| x as f64);
            for mut row in b.rows_mut() {
                let mean = row.sum() / n as f64;
                row.mapv_inplace(|x| x - mean);
            }
            b.t().dot(&b)
        })
        .collect();
    let mut h = Array2::<f64>::zeros((n, n));
    for p in partials {
        h += &p;
    }
    h.mapv_inplace(|x| x / m as f64);
    GramEstimate::new(h, GramKind::Centered, m).expect("centered Gram is symmetric")
}

/// Observed per-SNP standard deviations (divisor n), zero-variance SNPs
/// dropped.
pub fn scaling_diag(g: &GenotypeMatrix) -> ScalingDiag {
    let n = g.n() as f64;
    let mut w = Vec::new();
    let mut kept = Vec::new();
    for (s, row) in g.data().rows().into_iter().enumerate() {
        let sum: f64 = row.iter().map(|&x| x as f64).sum();
        let sumsq: f64 = row.iter().map(|&x| (x as f64) * (x as f64)).sum();
        let mean = sum / n;
        let var = (sumsq / n - mean * mean).max(0.0);
        let sd = var.sqrt();
        if sd > VARIANCE_GUARD {
            w.push(sd);
            kept.push(s);
        }
    }
    ScalingDiag { w, kept_snps: kept }
}

/// Ĥ₂ over mean- and variance-normalized genotypes (kept SNPs only).
pub fn gram_standardized(g: &GenotypeMatrix) -> Result<(GramEstimate, ScalingDiag)> {
    let scaling = scaling_diag(g);
    let m_used = scaling.kept_snps.len();
    if m_used == 0 {
        return Err(Error::Degenerate(
            "every SNP has zero observed variance".into(),
        ));
    }
    let n = g.n();
    let data = g.data();
    // (snp index, w) pairs blocked to the usual size
    let pairs: Vec<(usize, f64)> = scaling
        .kept_snps
        .iter()
        .copied()
        .zip(scaling.w.iter().copied())
        .collect();
    let partials: Vec<Array2<f64>> = pairs
        .chunks(SNP_BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| {
            let mut b = Array2::<f64>::zeros((chunk.len(), n));
            for (r, &(s, w)) in chunk.iter().enumerate() {
                let row = data.row(s);
                let mean: f64 = row.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
                for (c, &x) in row.iter().enumerate() {
                    b[(r, c)] = (x as f64 - mean) / w;
                }
            }
            b.t().dot(&b)
        })
        .collect();
    let mut h = Array2::<f64>::zeros((n, n));
    for p in partials {
        h += &p;
    }
    h.mapv_inplace(|x| x / m_used as f64);
    Ok((
        GramEstimate::new(h, GramKind::Standardized, m_used)?,
        scaling,
    ))
}

fn check_k_prime(k_prime: usize, min: usize, n: usize) -> Result<()> {
    if k_prime < min || k_prime > n {
        return Err(Error::KPrimeOutOfRange {
            k_prime,
            min,
            max: n,
        });
    }
    Ok(())
}

fn warn_eigengap(eig: &EigenDecomposition, k_prime: usize) {
    let n = eig.n();
    if k_prime >= n {
        return;
    }
    let lam = eig.eigenvalues();
    let top = lam[0].abs();
    if lam[k_prime - 1] - lam[k_prime] <= EIGENGAP_WARN * top {
        log::warn!(
            "eigenvalue condition failed: gap {:.3e} at k' = {} (top eigenvalue {:.3e})",
            lam[k_prime - 1] - lam[k_prime],
            k_prime,
            top
        );
    }
}

fn top_eigvec_basis(eig: &EigenDecomposition, count: usize) -> Result<OrthonormalBasis> {
    let cols = eig.eigenvectors().slice(ndarray::s![.., ..count]).to_owned();
    OrthonormalBasis::from_columns(cols)
}

/// PCA 1 projector plus the eigendecomposition of Ĥ it came from.
pub fn pca1_fit(g: &GenotypeMatrix, k_prime: usize) -> Result<(ProjectionMatrix, EigenDecomposition)> {
    check_k_prime(k_prime, 1, g.n())?;
    let gram = gram_pca1(g);
    let eig = spectral::eig_sym(gram.matrix())?;
    warn_eigengap(&eig, k_prime);
    let basis = top_eigvec_basis(&eig, k_prime)?;
    let p = spectral::projector_from_basis(&basis, ProjectionMethod::Pca1)?;
    Ok((p, eig))
}

/// Projector onto the span of the top k' eigenvectors of Ĥ = (1/m)G^T G - D̂.
pub fn project_pca1(g: &GenotypeMatrix, k_prime: usize) -> Result<ProjectionMatrix> {
    pca1_fit(g, k_prime).map(|(p, _)| p)
}

/// PCA 2 projector plus the eigendecomposition of the centered Gram.
pub fn pca2_fit(g: &GenotypeMatrix, k_prime: usize) -> Result<(ProjectionMatrix, EigenDecomposition)> {
    check_k_prime(k_prime, 2, g.n())?;
    let gram = gram_centered(g);
    let eig = spectral::eig_sym(gram.matrix())?;
    let p = centered_projector(&eig, k_prime, ProjectionMethod::Pca2)?;
    Ok((p, eig))
}

/// Projector onto span{top k'-1 eigenvectors of Ĥ₁} ∪ {e}.
pub fn project_pca2(g: &GenotypeMatrix, k_prime: usize) -> Result<ProjectionMatrix> {
    pca2_fit(g, k_prime).map(|(p, _)| p)
}

/// PCA 3 projector plus eigendecomposition and the SNP scaling used.
pub fn pca3_fit(
    g: &GenotypeMatrix,
    k_prime: usize,
) -> Result<(ProjectionMatrix, EigenDecomposition, ScalingDiag)> {
    check_k_prime(k_prime, 2, g.n())?;
    let (gram, scaling) = gram_standardized(g)?;
    let eig = spectral::eig_sym(gram.matrix())?;
    let p = centered_projector(&eig, k_prime, ProjectionMethod::Pca3)?;
    Ok((p, eig, scaling))
}

/// Like PCA 2, on mean- and variance-normalized genotypes.
pub fn project_pca3(g: &GenotypeMatrix, k_prime: usize) -> Result<ProjectionMatrix> {
    pca3_fit(g, k_prime).map(|(p, _, _)| p)
}

/// k' = 1 projector onto span{e}: only the mean is removed, predicted
/// centered genotypes are zero.
pub fn project_pca_null(n: usize) -> Result<ProjectionMatrix> {
    let e = Array2::from_elem((1, n), 1.0);
    let basis = spectral::gram_schmidt_pivoted(e.view(), GRAM_SCHMIDT_TOL)?;
    spectral::projector_from_basis(&basis, ProjectionMethod::PcaNull)
}

fn centered_projector(
    eig: &EigenDecomposition,
    k_prime: usize,
    method: ProjectionMethod,
) -> Result<ProjectionMatrix> {
    let n = eig.n();
    let mut rows = Array2::<f64>::zeros((k_prime, n));
    for j in 0..k_prime - 1 {
        rows.row_mut(j).assign(&eig.eigenvectors().column(j));
    }
    rows.row_mut(k_prime - 1).fill(1.0);
    let basis = spectral::gram_schmidt_pivoted(rows.view(), GRAM_SCHMIDT_TOL)?;
    spectral::projector_from_basis(&basis, method)
}

/// P̂ = Q̂^T (Q̂ Q̂^T)^{-1} Q̂, the projector onto the row space of Q̂.
pub fn project_from_q(q_hat: ArrayView2<'_, f64>) -> Result<ProjectionMatrix> {
    let k_prime = q_hat.nrows();
    let basis = spectral::gram_schmidt_pivoted(q_hat, GRAM_SCHMIDT_TOL)?;
    if basis.rank() < k_prime {
        return Err(Error::RankDeficient {
            found: basis.rank(),
            required: k_prime,
        });
    }
    spectral::projector_from_basis(&basis, ProjectionMethod::FromQ)
}

/// Pivoted Gram-Schmidt over the rows of Π̂ selects k' independent rows; the
/// projector is onto their span and does not depend on which independent rows
/// are chosen.
pub fn project_from_pi(pi_hat: ArrayView2<'_, f64>, k_prime: usize) -> Result<ProjectionMatrix> {
    check_k_prime(k_prime, 1, pi_hat.ncols())?;
    let basis = spectral::gram_schmidt_capped(pi_hat, GRAM_SCHMIDT_TOL, k_prime)?;
    if basis.rank() < k_prime {
        return Err(Error::RankDeficient {
            found: basis.rank(),
            required: k_prime,
        });
    }
    spectral::projector_from_basis(&basis, ProjectionMethod::FromPi)
}
