//! Residual computation and the fit diagnostic itself: the empirical residual
//! correlation matrix b̂ against the model-estimated ĉ, their difference,
//! block summaries, and the analytic large-m limits used as oracles.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::config::*;
use crate::error::{Error, Result};
use crate::estimators::heterozygosity_diag;
use crate::model::{
    CorrelationReport, GenotypeMatrix, HeterozygosityDiag, LimitSpec, PopulationLabels,
    ProjectionMatrix, ProjectionMethod,
};

/// m x n residual matrix R = G(I - P̂).
#[derive(Debug, Clone)]
pub struct ResidualMatrix {
    r: Array2<f64>,
    k_prime: usize,
    method: ProjectionMethod,
}

impl ResidualMatrix {
    /// Wrap an existing residual matrix without the row-sum check (used when
    /// the projector is not available).
    pub fn from_raw(r: Array2<f64>, k_prime: usize, method: ProjectionMethod) -> Self {
        Self { r, k_prime, method }
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.r.view()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    pub fn n(&self) -> usize {
        self.r.ncols()
    }

    pub fn k_prime(&self) -> usize {
        self.k_prime
    }

    pub fn method(&self) -> ProjectionMethod {
        self.method
    }
}

/// R = G(I - P̂), computed SNP-block by SNP-block.
pub fn residuals(g: &GenotypeMatrix, p: &ProjectionMatrix) -> Result<ResidualMatrix> {
    if p.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "projection for {} individuals, genotypes have {}",
            p.n(),
            g.n()
        )));
    }
    let n = g.n();
    let ip = Array2::<f64>::eye(n) - &p.matrix();
    let blocks: Vec<Array2<f64>> = g
        .data()
        .axis_chunks_iter(Axis(0), SNP_BLOCK)
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| chunk.mapv(|x| x as f64).dot(&ip))
        .collect();
    let mut r = Array2::<f64>::zeros((g.m(), n));
    let mut row = 0;
    for b in blocks {
        let rows = b.nrows();
        r.slice_mut(ndarray::s![row..row + rows, ..]).assign(&b);
        row += rows;
    }
    let res = ResidualMatrix {
        r,
        k_prime: p.k_prime(),
        method: p.method(),
    };
    if p.spans_ones() {
        let max_rowsum = res
            .r
            .rows()
            .into_iter()
            .map(|row| row.sum().abs())
            .fold(0.0f64, f64::max);
        if max_rowsum > 1e-6 {
            return Err(Error::InvariantViolation {
                type_name: "ResidualMatrix",
                detail: format!(
                    "P spans e but a residual row sums to {:.3e}",
                    max_rowsum
                ),
            });
        }
    }
    Ok(res)
}

fn corr_from_cov(cov: &Array2<f64>) -> (Array2<f64>, Array2<bool>) {
    let n = cov.nrows();
    let mut corr = Array2::<f64>::zeros((n, n));
    let mut mask = Array2::from_elem((n, n), false);
    let defined: Vec<bool> = (0..n).map(|i| cov[(i, i)] > VARIANCE_GUARD).collect();
    for i in 0..n {
        for j in 0..n {
            if defined[i] && defined[j] {
                corr[(i, j)] = if i == j {
                    1.0
                } else {
                    cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()
                };
            } else {
                mask[(i, j)] = true;
            }
        }
    }
    (corr, mask)
}

/// Empirical residual covariance B̂ and correlation b̂ from an explicit R.
pub fn empirical_corr(r: &ResidualMatrix) -> Result<(Array2<f64>, Array2<f64>, Array2<bool>)> {
    if r.m() < 2 {
        return Err(Error::Degenerate("need at least 2 SNPs for B̂".into()));
    }
    let n = r.n();
    let partials: Vec<(Array2<f64>, Array1<f64>)> = r
        .matrix()
        .axis_chunks_iter(Axis(0), SNP_BLOCK)
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| (chunk.t().dot(&chunk), chunk.sum_axis(Axis(0))))
        .collect();
    finish_empirical(partials, r.m(), n)
}

/// B̂ and b̂ computed directly from G and P̂ without materializing R beyond
/// one SNP block. Bit-identical to [`empirical_corr`] over [`residuals`].
pub fn empirical_corr_streamed(
    g: &GenotypeMatrix,
    p: &ProjectionMatrix,
) -> Result<(Array2<f64>, Array2<f64>, Array2<bool>)> {
    if p.n() != g.n() {
        return Err(Error::DimensionMismatch(
            "projection and genotype dimensions differ".into(),
        ));
    }
    if g.m() < 2 {
        return Err(Error::Degenerate("need at least 2 SNPs for B̂".into()));
    }
    let n = g.n();
    let ip = Array2::<f64>::eye(n) - &p.matrix();
    let partials: Vec<(Array2<f64>, Array1<f64>)> = g
        .data()
        .axis_chunks_iter(Axis(0), SNP_BLOCK)
        .into_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| {
            let rblk = chunk.mapv(|x| x as f64).dot(&ip);
            (rblk.t().dot(&rblk), rblk.sum_axis(Axis(0)))
        })
        .collect();
    finish_empirical(partials, g.m(), n)
}

fn finish_empirical(
    partials: Vec<(Array2<f64>, Array1<f64>)>,
    m: usize,
    n: usize,
) -> Result<(Array2<f64>, Array2<f64>, Array2<bool>)> {
    let mut s = Array2::<f64>::zeros((n, n));
    let mut t = Array1::<f64>::zeros(n);
    for (ps, pt) in partials {
        s += &ps;
        t += &pt;
    }
    let mf = m as f64;
    let mut cov = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] = (s[(i, j)] - t[i] * t[j] / mf) / (mf - 1.0);
        }
    }
    let (corr, mask) = corr_from_cov(&cov);
    Ok((cov, corr, mask))
}

/// Ĉ = (I - P̂) D̂ (I - P̂) and its correlation ĉ.
pub fn estimated_corr(
    p: &ProjectionMatrix,
    d: &HeterozygosityDiag,
) -> Result<(Array2<f64>, Array2<f64>, Array2<bool>)> {
    if p.n() != d.n() {
        return Err(Error::DimensionMismatch(
            "projection and heterozygosity dimensions differ".into(),
        ));
    }
    let n = p.n();
    let ip = Array2::<f64>::eye(n) - &p.matrix();
    let mut scaled = ip.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|x| x * d.values()[j]);
    }
    let cov = scaled.dot(&ip);
    // symmetrize roundoff: (I-P) D (I-P) is symmetric in exact arithmetic
    let cov = (&cov + &cov.t()) * 0.5;
    let (corr, mask) = corr_from_cov(&cov);
    Ok((cov, corr, mask))
}

/// Assemble the paired report; the difference b̂ - ĉ is the fit diagnostic.
pub fn corrected_corr(
    b_hat: Array2<f64>,
    c_hat: Array2<f64>,
    b_mask: &Array2<bool>,
    c_mask: &Array2<bool>,
    labels: Option<PopulationLabels>,
) -> Result<CorrelationReport> {
    if b_mask.dim() != c_mask.dim() || b_hat.dim() != b_mask.dim() {
        return Err(Error::DimensionMismatch("mask shapes differ".into()));
    }
    let mut mask = Array2::from_elem(b_mask.dim(), false);
    for (idx, v) in mask.indexed_iter_mut() {
        *v = b_mask[idx] || c_mask[idx];
    }
    // masked entries carry no information; zero them so range checks skip them
    let mut b = b_hat;
    let mut c = c_hat;
    for ((i, j), &masked) in mask.indexed_iter() {
        if masked {
            b[(i, j)] = 0.0;
            c[(i, j)] = 0.0;
        }
    }
    CorrelationReport::new(b, c, labels, mask)
}

/// Everything the CLI and acceptance suite need from one fit.
#[derive(Debug)]
pub struct FitResult {
    pub report: CorrelationReport,
    pub b_cov: Array2<f64>,
    pub c_cov: Array2<f64>,
    pub heterozygosity: HeterozygosityDiag,
}

/// Run residual -> correlations -> report for one projection estimate.
pub fn fit_with_projection(
    g: &GenotypeMatrix,
    p: &ProjectionMatrix,
    labels: Option<PopulationLabels>,
) -> Result<FitResult> {
    let d = heterozygosity_diag(g);
    let (b_cov, b_hat, b_mask) = empirical_corr_streamed(g, p)?;
    let (c_cov, c_hat, c_mask) = estimated_corr(p, &d)?;
    let report = corrected_corr(b_hat, c_hat, &b_mask, &c_mask, labels)?;
    Ok(FitResult {
        report,
        b_cov,
        c_cov,
        heterozygosity: d,
    })
}

/// Mean/sd summaries per ordered block pair, with the -1/(n_l - 1) reference
/// for within-block rows.
#[derive(Debug, Clone)]
pub struct PairStats {
    pub count: usize,
    pub b_mean: f64,
    pub b_sd: f64,
    pub diff_mean: f64,
    pub diff_sd: f64,
}

#[derive(Debug, Clone)]
pub struct BlockPairSummary {
    pub block_a: String,
    pub block_b: String,
    /// -1/(n_l - 1), present for within-block rows with n_l > 1.
    pub reference: Option<f64>,
    /// Absent for a within-block row over a block of size 1.
    pub stats: Option<PairStats>,
}

#[derive(Debug, Clone)]
pub struct BlockSummary {
    pub rows: Vec<BlockPairSummary>,
}

impl BlockSummary {
    pub fn within(&self, block: &str) -> Option<&BlockPairSummary> {
        self.rows
            .iter()
            .find(|r| r.block_a == block && r.block_b == block)
    }
}

/// Summarize b̂ and b̂ - ĉ over every ordered block pair; diagonal entries and
/// masked entries are excluded.
pub fn block_summary(report: &CorrelationReport) -> Result<BlockSummary> {
    let labels = report
        .labels
        .as_ref()
        .ok_or_else(|| Error::Degenerate("block summary requires population labels".into()))?;
    let blocks = labels.blocks();
    let mut rows = Vec::new();
    for (name_a, idx_a) in &blocks {
        for (name_b, idx_b) in &blocks {
            let mut bs = Vec::new();
            let mut ds = Vec::new();
            for &i in idx_a {
                for &j in idx_b {
                    if i == j || report.undefined_mask[(i, j)] {
                        continue;
                    }
                    bs.push(report.b_hat[(i, j)]);
                    ds.push(report.diff[(i, j)]);
                }
            }
            let reference = if name_a == name_b && idx_a.len() > 1 {
                Some(-1.0 / (idx_a.len() as f64 - 1.0))
            } else {
                None
            };
            let stats = if bs.is_empty() {
                None
            } else {
                Some(PairStats {
                    count: bs.len(),
                    b_mean: mean(&bs),
                    b_sd: sample_sd(&bs),
                    diff_mean: mean(&ds),
                    diff_sd: sample_sd(&ds),
                })
            };
            rows.push(BlockPairSummary {
                block_a: name_a.clone(),
                block_b: name_b.clone(),
                reference,
                stats,
            });
        }
    }
    Ok(BlockSummary { rows })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// (sum of off-diagonal B̂) / (sum of diagonal B̂); converges to -1 when the
/// ones vector lies in the row space of Q and k' = k.
pub fn sum_ratio(b_cov: ArrayView2<'_, f64>) -> Result<f64> {
    let n = b_cov.nrows();
    if n < 2 {
        return Err(Error::Degenerate("sum ratio needs n >= 2".into()));
    }
    let diag: f64 = b_cov.diag().sum();
    if diag.abs() <= VARIANCE_GUARD {
        return Err(Error::Degenerate("zero trace in B̂".into()));
    }
    let total: f64 = b_cov.sum();
    Ok((total - diag) / diag)
}

/// Analytic large-m limits of B̂, Ĉ, their correlations, and the difference.
#[derive(Debug, Clone)]
pub struct LimitMatrices {
    pub b_cov: Array2<f64>,
    pub c_cov: Array2<f64>,
    pub b_corr: Array2<f64>,
    pub c_corr: Array2<f64>,
    pub diff: Array2<f64>,
    pub mask: Array2<bool>,
}

/// Evaluate the limit matrices B -> (I-P)(D + 4 Q^T Σ Q)(I-P) and
/// C -> (I-P) D (I-P) analytically.
pub fn limit_oracle(spec: &LimitSpec, p_limit: &ProjectionMatrix) -> Result<LimitMatrices> {
    let n = spec.q.ncols();
    if p_limit.n() != n {
        return Err(Error::DimensionMismatch(
            "limit projector dimension differs from Q".into(),
        ));
    }
    let ip = Array2::<f64>::eye(n) - &p_limit.matrix();
    let qsq = spec.q.t().dot(&spec.sigma).dot(&spec.q) * 4.0;
    let d_mat = Array2::from_diag(&spec.d);
    let b_cov = ip.dot(&(&d_mat + &qsq)).dot(&ip);
    let c_cov = ip.dot(&d_mat).dot(&ip);
    let b_cov = (&b_cov + &b_cov.t()) * 0.5;
    let c_cov = (&c_cov + &c_cov.t()) * 0.5;
    let (b_corr, b_mask) = corr_from_cov(&b_cov);
    let (c_corr, c_mask) = corr_from_cov(&c_cov);
    let mut mask = Array2::from_elem((n, n), false);
    let mut diff = Array2::<f64>::zeros((n, n));
    for ((i, j), v) in diff.indexed_iter_mut() {
        if b_mask[(i, j)] || c_mask[(i, j)] {
            mask[(i, j)] = true;
        } else {
            *v = b_corr[(i, j)] - c_corr[(i, j)];
        }
    }
    Ok(LimitMatrices {
        b_cov,
        c_cov,
        b_corr,
        c_corr,
        diff,
        mask,
    })
}

/// Build the analytic D for an admixture model with F rows iid from a prior
/// with moments (mu, Sigma): D_ii = 2(mu^T q_i - (mu^T q_i)^2 - (Q^T Σ Q)_ii).
pub fn limit_spec_from_prior(
    q: Array2<f64>,
    mu: Array1<f64>,
    sigma: Array2<f64>,
) -> Result<LimitSpec> {
    let qsq = q.t().dot(&sigma).dot(&q);
    let n = q.ncols();
    let mut d = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mq: f64 = mu.dot(&q.column(i));
        d[i] = 2.0 * (mq - mq * mq - qsq[(i, i)]);
    }
    LimitSpec::new(q, mu, sigma, d)
}

/// Result of the Theorem-3 style lower-bound check for one block.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub pass: bool,
    pub min_b: f64,
    pub threshold: f64,
    pub slack: f64,
    /// min_b - (threshold - slack); non-negative iff pass.
    pub margin: f64,
}

/// Check that the within-block b̂ entries respect the homogeneous-block lower
/// bound -1/(n_1 - 1), with a slack of 3 within-block standard deviations to
/// absorb finite-m noise.
pub fn homogeneity_bound_check(report: &CorrelationReport, block: &str) -> Result<BoundCheck> {
    let labels = report
        .labels
        .as_ref()
        .ok_or_else(|| Error::Degenerate("bound check requires labels".into()))?;
    let idx: Vec<usize> = labels
        .assignment()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.as_str() == block)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 2 {
        return Err(Error::Degenerate(format!(
            "block '{}' has fewer than 2 members",
            block
        )));
    }
    let mut vals = Vec::new();
    for &i in &idx {
        for &j in &idx {
            if i != j && !report.undefined_mask[(i, j)] {
                vals.push(report.b_hat[(i, j)]);
            }
        }
    }
    if vals.is_empty() {
        return Err(Error::Degenerate("block entirely masked".into()));
    }
    let threshold = -1.0 / (idx.len() as f64 - 1.0);
    let slack = 3.0 * sample_sd(&vals);
    let min_b = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let margin = min_b - (threshold - slack);
    Ok(BoundCheck {
        pass: margin >= 0.0,
        min_b,
        threshold,
        slack,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::project_from_q;
    use crate::model::ProjectionMethod;
    use ndarray::array;

    fn proj(p: Array2<f64>, k: usize) -> ProjectionMatrix {
        ProjectionMatrix::new(p, k, ProjectionMethod::Exact).unwrap()
    }

    #[test]
    fn residuals_zero_and_full_projection() {
        let g = GenotypeMatrix::new(array![[0u8, 1, 2], [2, 2, 0]]).unwrap();
        let r0 = residuals(&g, &ProjectionMatrix::zero(3)).unwrap();
        assert_eq!(
            r0.matrix().to_owned(),
            array![[0.0, 1.0, 2.0], [2.0, 2.0, 0.0]]
        );
        let ri = residuals(&g, &proj(Array2::eye(3), 3)).unwrap();
        assert!(ri.matrix().iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn residuals_mean_removal() {
        let g = GenotypeMatrix::new(array![[0u8, 1, 2]]).unwrap();
        let p = proj(Array2::from_elem((3, 3), 1.0 / 3.0), 1);
        let r = residuals(&g, &p).unwrap();
        let expect = array![[-1.0, 0.0, 1.0]];
        for (a, b) in r.matrix().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_dimension_mismatch() {
        let g = GenotypeMatrix::new(array![[0u8, 1]]).unwrap();
        assert!(residuals(&g, &ProjectionMatrix::zero(3)).is_err());
    }

    #[test]
    fn empirical_corr_duplicate_and_negated_columns() {
        let col: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut r = Array2::<f64>::zeros((50, 3));
        for (s, &v) in col.iter().enumerate() {
            r[(s, 0)] = v;
            r[(s, 1)] = v;
            r[(s, 2)] = -v;
        }
        let rm = ResidualMatrix::from_raw(r, 0, ProjectionMethod::Exact);
        let (_, b, mask) = empirical_corr(&rm).unwrap();
        assert!(!mask[(0, 1)]);
        assert!((b[(0, 1)] - 1.0).abs() < 1e-10);
        assert!((b[(0, 2)] + 1.0).abs() < 1e-10);
        assert_eq!(b[(0, 0)], 1.0);
    }

    #[test]
    fn empirical_corr_masks_zero_variance() {
        let mut r = Array2::<f64>::zeros((10, 2));
        for s in 0..10 {
            r[(s, 0)] = s as f64;
        }
        let rm = ResidualMatrix::from_raw(r, 0, ProjectionMethod::Exact);
        let (_, b, mask) = empirical_corr(&rm).unwrap();
        assert!(mask[(0, 1)] && mask[(1, 1)]);
        assert!(!mask[(0, 0)]);
        assert_eq!(b[(0, 1)], 0.0);
    }

    #[test]
    fn estimated_corr_zero_projection_is_identity_corr() {
        let d = HeterozygosityDiag::new(array![0.3, 0.5, 0.4]).unwrap();
        let (c_cov, c, _) = estimated_corr(&ProjectionMatrix::zero(3), &d).unwrap();
        assert!((c_cov[(0, 0)] - 0.3).abs() < 1e-12);
        assert!((c_cov[(1, 1)] - 0.5).abs() < 1e-12);
        let eye = Array2::<f64>::eye(3);
        assert!(crate::model::max_abs_diff(&c, &eye) < 1e-12);
    }

    #[test]
    fn estimated_corr_mean_projector_block_value() {
        let n = 5;
        let d = HeterozygosityDiag::new(Array1::from_elem(n, 0.4)).unwrap();
        let p = proj(Array2::from_elem((n, n), 1.0 / n as f64), 1);
        let (_, c, _) = estimated_corr(&p, &d).unwrap();
        let expect = -1.0 / (n as f64 - 1.0);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    assert!((c[(i, j)] - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sum_ratio_cases() {
        let n = 4;
        let b = Array2::<f64>::eye(n) - Array2::from_elem((n, n), 1.0 / n as f64);
        assert!((sum_ratio(b.view()).unwrap() + 1.0).abs() < 1e-12);
        let eye = Array2::<f64>::eye(n);
        assert_eq!(sum_ratio(eye.view()).unwrap(), 0.0);
        let zero = Array2::<f64>::zeros((n, n));
        assert!(sum_ratio(zero.view()).is_err());
    }

    #[test]
    fn corrected_corr_equal_inputs_zero_diff() {
        let b = array![[1.0, 0.3], [0.3, 1.0]];
        let mask = Array2::from_elem((2, 2), false);
        let rep = corrected_corr(b.clone(), b, &mask, &mask, None).unwrap();
        assert!(rep.diff.iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn limit_oracle_block_identity_theorem2() {
        // scenario-1 style: exact P gives b_inf = -1/(n_l - 1) within blocks
        let sizes = [3usize, 4];
        let q = crate::simulate::block_identity_q(&sizes);
        let mu = Array1::from_elem(2, 0.5);
        let sigma = Array2::<f64>::eye(2) / 12.0;
        let spec = limit_spec_from_prior(q.clone(), mu, sigma).unwrap();
        let p = project_from_q(q.view()).unwrap();
        let lim = limit_oracle(&spec, &p).unwrap();
        for (idx, expect) in [(0usize..3, -0.5), (3..7, -1.0 / 3.0)] {
            for i in idx.clone() {
                for j in idx.clone() {
                    if i != j {
                        assert!(
                            (lim.b_corr[(i, j)] - expect).abs() < 1e-10,
                            "b_inf[{},{}] = {}",
                            i,
                            j,
                            lim.b_corr[(i, j)]
                        );
                    }
                }
            }
        }
        // diff_inf vanishes for k' = k with the exact projector
        assert!(lim.diff.iter().all(|&x| x.abs() < 1e-10));
    }

    #[test]
    fn limit_oracle_scenario2_table_values() {
        let q = crate::simulate::admixed_q(&[20, 20, 20]);
        let mu = Array1::from_elem(2, 0.5);
        let sigma = Array2::<f64>::eye(2) / 12.0;
        let spec = limit_spec_from_prior(q.clone(), mu, sigma).unwrap();
        // analytic D: 1/3 unadmixed, 5/12 admixed
        assert!((spec.d[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((spec.d[30] - 5.0 / 12.0).abs() < 1e-12);
        let p = project_from_q(q.view()).unwrap();
        let lim = limit_oracle(&spec, &p).unwrap();
        let block_mean = |lo: usize, hi: usize| {
            let mut acc = 0.0;
            let mut cnt = 0;
            for i in lo..hi {
                for j in lo..hi {
                    if i != j {
                        acc += lim.b_corr[(i, j)];
                        cnt += 1;
                    }
                }
            }
            acc / cnt as f64
        };
        assert!((block_mean(0, 20) - (-0.0420)).abs() < 5e-5);
        assert!((block_mean(20, 40) - (-0.0193)).abs() < 5e-5);
        assert!((block_mean(40, 60) - (-0.0420)).abs() < 5e-5);
    }

    #[test]
    fn limit_oracle_zero_projector_reduction() {
        let q = array![[1.0, 0.5], [0.0, 0.5]];
        let mu = array![0.5, 0.5];
        let sigma = Array2::<f64>::eye(2) / 12.0;
        let spec = limit_spec_from_prior(q.clone(), mu, sigma.clone()).unwrap();
        let lim = limit_oracle(&spec, &ProjectionMatrix::zero(2)).unwrap();
        let expect = Array2::from_diag(&spec.d) + q.t().dot(&sigma).dot(&q) * 4.0;
        assert!(crate::model::max_abs_diff(&lim.b_cov, &expect) < 1e-12);
    }

    #[test]
    fn block_summary_constant_block() {
        let n = 4;
        let mut b = Array2::<f64>::eye(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    b[(i, j)] = 0.25;
                }
            }
        }
        let c = Array2::<f64>::eye(n);
        let mask = Array2::from_elem((n, n), false);
        let labels = PopulationLabels::from_sizes("pop", &[2, 2]).unwrap();
        let mut c_full = c;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c_full[(i, j)] = 0.1;
                }
            }
        }
        let rep = corrected_corr(b, c_full, &mask, &mask, Some(labels)).unwrap();
        let summary = block_summary(&rep).unwrap();
        let w = summary.within("pop1").unwrap();
        let stats = w.stats.as_ref().unwrap();
        assert!((stats.b_mean - 0.25).abs() < 1e-12);
        assert_eq!(stats.b_sd, 0.0);
        assert!((stats.diff_mean - 0.15).abs() < 1e-12);
        assert_eq!(w.reference, Some(-1.0));
    }

    #[test]
    fn block_summary_size_one_block_absent() {
        let b = Array2::<f64>::eye(3);
        let mask = Array2::from_elem((3, 3), false);
        let labels = PopulationLabels::from_sizes("pop", &[1, 2]).unwrap();
        let rep = corrected_corr(b.clone(), b, &mask, &mask, Some(labels)).unwrap();
        let summary = block_summary(&rep).unwrap();
        let w1 = summary.within("pop1").unwrap();
        assert!(w1.stats.is_none());
        assert!(w1.reference.is_none());
    }

    #[test]
    fn homogeneity_bound_violation_detected() {
        let n = 50;
        let mut b = Array2::<f64>::eye(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    b[(i, j)] = -0.1;
                }
            }
        }
        let c = Array2::<f64>::eye(n);
        let mask = Array2::from_elem((n, n), false);
        let labels = PopulationLabels::from_sizes("pop", &[n]).unwrap();
        let rep = corrected_corr(b, c, &mask, &mask, Some(labels)).unwrap();
        let check = homogeneity_bound_check(&rep, "pop1").unwrap();
        assert!(!check.pass);
        assert!((check.threshold - (-1.0 / 49.0)).abs() < 1e-12);
    }

    #[test]
    fn streamed_equals_materialized_bitwise() {
        let spec = crate::simulate::ScenarioSpec::preset(1, 10_000, Some(vec![4, 4]), 3).unwrap();
        let ds = crate::simulate::simulate(&spec).unwrap();
        let truth = ds.truth.unwrap();
        let p = project_from_q(truth.q()).unwrap();
        let r = residuals(&ds.genotypes, &p).unwrap();
        let (cov_a, b_a, _) = empirical_corr(&r).unwrap();
        let (cov_b, b_b, _) = empirical_corr_streamed(&ds.genotypes, &p).unwrap();
        assert_eq!(cov_a, cov_b);
        assert_eq!(b_a, b_b);
    }

    #[test]
    fn estimated_corr_is_psd() {
        let d = HeterozygosityDiag::new(array![0.3, 0.45, 0.4, 0.2]).unwrap();
        let q = array![[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]];
        let p = project_from_q(q.view()).unwrap();
        let (c_cov, _, _) = estimated_corr(&p, &d).unwrap();
        let eig = crate::spectral::eig_sym(c_cov.view()).unwrap();
        assert!(eig.eigenvalues().iter().all(|&l| l >= -1e-8));
    }
}
