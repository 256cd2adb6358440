//! Dense symmetric eigendecomposition, pivoted Gram-Schmidt, and projector
//! construction. Everything here is deterministic: identical input bits give
//! identical output bits.

use ndarray::{Array1, Array2, ArrayView2};

use crate::config::*;
use crate::error::{Error, Result};
use crate::model::{max_abs_diff, EigenDecomposition, ProjectionMatrix, ProjectionMethod};

/// n x r matrix with orthonormal columns spanning a row space, together with
/// the pivot order in which input rows were selected.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    vectors: Array2<f64>,
    pivots: Vec<usize>,
}

impl OrthonormalBasis {
    fn new(vectors: Array2<f64>, pivots: Vec<usize>) -> Result<Self> {
        let r = vectors.ncols();
        if r > 0 {
            let vtv = vectors.t().dot(&vectors);
            let eye = Array2::eye(r);
            let err = max_abs_diff(&vtv, &eye);
            if err > TOL_ORTHONORMAL {
                return Err(Error::InvariantViolation {
                    type_name: "OrthonormalBasis",
                    detail: format!("max|V^T V - I| = {:.3e}", err),
                });
            }
        }
        Ok(Self { vectors, pivots })
    }

    /// Wrap an already-orthonormal set of columns (e.g. eigenvectors).
    pub fn from_columns(vectors: Array2<f64>) -> Result<Self> {
        let pivots = (0..vectors.ncols()).collect();
        Self::new(vectors, pivots)
    }

    /// Columns are the basis vectors.
    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn rank(&self) -> usize {
        self.vectors.ncols()
    }

    /// Input row indices selected as pivots, in acceptance order.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }
}

/// Eigendecomposition of a symmetric matrix via Householder tridiagonalization
/// followed by implicit-shift QL. Eigenvalues are returned descending with a
/// stable tie order.
pub fn eig_sym(a: ArrayView2<'_, f64>) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if a.ncols() != n || n == 0 {
        return Err(Error::DimensionMismatch(format!(
            "eig_sym needs a non-empty square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let max_asym = max_abs_diff(&a.to_owned(), &a.t().to_owned());
    if max_asym > TOL_SYMMETRY {
        return Err(Error::AsymmetricInput {
            max_asym,
            tol: TOL_SYMMETRY,
        });
    }

    // Work on the symmetrized copy so roundoff asymmetry cannot leak in.
    let mut z: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (a[(i, j)] + a[(j, i)])).collect())
        .collect();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];

    tred2(&mut z, &mut d, &mut e);
    tqli(&mut z, &mut d, &mut e)?;

    // Stable descending sort of eigenpairs.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap());
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| d[i]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[(row, col)] = z[row][src];
        }
    }
    EigenDecomposition::new(eigenvalues, eigenvectors, a)
}

/// Householder reduction to tridiagonal form with accumulated transform.
/// On exit `z` holds the orthogonal matrix, `d` the diagonal, `e` the
/// subdiagonal (e[0] unused).
fn tred2(z: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| z[i][k].abs()).sum();
            if scale == 0.0 {
                e[i] = z[i][l];
            } else {
                for k in 0..=l {
                    z[i][k] /= scale;
                    h += z[i][k] * z[i][k];
                }
                let mut f = z[i][l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[i][l] = f - g;
                f = 0.0;
                for j in 0..=l {
                    z[j][i] = z[i][j] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[j][k] * z[i][k];
                    }
                    for k in (j + 1)..=l {
                        g += z[k][j] * z[i][k];
                    }
                    e[j] = g / h;
                    f += e[j] * z[i][j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = z[i][j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[j][k] -= f * e[k] + g * z[i][k];
                    }
                }
            }
        } else {
            e[i] = z[i][l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[i][k] * z[k][j];
                }
                for k in 0..i {
                    z[k][j] -= g * z[k][i];
                }
            }
        }
        d[i] = z[i][i];
        z[i][i] = 1.0;
        for j in 0..i {
            z[j][i] = 0.0;
            z[i][j] = 0.0;
        }
    }
}

/// Implicit-shift QL on a tridiagonal matrix, rotations applied to `z`.
fn tqli(z: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Degenerate(
                    "eigensolver failed to converge in 60 iterations".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Pivoted modified Gram-Schmidt over the rows of `rows`. At each step the row
/// with the largest remaining residual is selected; a row contributes to the
/// basis only while its residual norm exceeds `tol` times its original norm.
pub fn gram_schmidt_pivoted(rows: ArrayView2<'_, f64>, tol: f64) -> Result<OrthonormalBasis> {
    if rows.nrows() > rows.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows exceed ambient dimension {}",
            rows.nrows(),
            rows.ncols()
        )));
    }
    gram_schmidt_capped(rows, tol, usize::MAX)
}

/// Same as [`gram_schmidt_pivoted`] but stops after `cap` accepted vectors
/// and accepts more rows than the ambient dimension (row selection).
pub fn gram_schmidt_capped(
    rows: ArrayView2<'_, f64>,
    tol: f64,
    cap: usize,
) -> Result<OrthonormalBasis> {
    let r = rows.nrows();
    let n = rows.ncols();
    if tol <= 0.0 {
        return Err(Error::Degenerate("gram-schmidt tol must be positive".into()));
    }
    let mut residual: Vec<Array1<f64>> = rows.rows().into_iter().map(|r| r.to_owned()).collect();
    let orig_norm: Vec<f64> = residual.iter().map(|v| v.dot(v).sqrt()).collect();
    let mut remaining: Vec<usize> = (0..r).collect();
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut pivots: Vec<usize> = Vec::new();

    while basis.len() < cap && !remaining.is_empty() {
        // Largest residual wins; ties broken by smallest row index.
        let mut pivot = remaining[0];
        let mut norm = -1.0;
        for &i in &remaining {
            let nn = residual[i].dot(&residual[i]).sqrt();
            if nn > norm {
                norm = nn;
                pivot = i;
            }
        }
        if norm <= tol * orig_norm[pivot] || norm == 0.0 {
            break;
        }
        // One re-orthogonalization pass keeps the basis orthonormal well
        // below the 1e-8 contract.
        let mut v = residual[pivot].clone();
        for b in &basis {
            let proj = b.dot(&v);
            v.scaled_add(-proj, b);
        }
        let vn = v.dot(&v).sqrt();
        if vn <= tol * orig_norm[pivot] || vn == 0.0 {
            remaining.retain(|&i| i != pivot);
            continue;
        }
        v.mapv_inplace(|x| x / vn);
        remaining.retain(|&i| i != pivot);
        for &j in &remaining {
            let proj = v.dot(&residual[j]);
            residual[j].scaled_add(-proj, &v);
        }
        basis.push(v);
        pivots.push(pivot);
    }

    let rank = basis.len();
    let mut vectors = Array2::zeros((n, rank));
    for (c, v) in basis.iter().enumerate() {
        vectors.column_mut(c).assign(v);
    }
    OrthonormalBasis::new(vectors, pivots)
}

/// P = V V^T for an orthonormal basis V.
pub fn projector_from_basis(
    basis: &OrthonormalBasis,
    method: ProjectionMethod,
) -> Result<ProjectionMatrix> {
    let v = basis.vectors();
    let n = v.nrows();
    if basis.rank() == 0 {
        return ProjectionMatrix::new(Array2::zeros((n, n)), 0, method);
    }
    let p = v.dot(&v.t());
    ProjectionMatrix::new(p, basis.rank(), method)
}

/// Frobenius norm of P - Q; zero iff the projected subspaces coincide when
/// the ranks agree.
pub fn projection_distance(p: &ProjectionMatrix, q: &ProjectionMatrix) -> Result<f64> {
    if p.n() != q.n() {
        return Err(Error::DimensionMismatch(format!(
            "projections of size {} and {}",
            p.n(),
            q.n()
        )));
    }
    let d = &p.matrix() - &q.matrix();
    Ok(d.mapv(|x| x * x).sum().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eig_identity_stable_order() {
        let eig = eig_sym(Array2::<f64>::eye(3).view()).unwrap();
        assert_eq!(eig.eigenvalues().to_vec(), vec![1.0, 1.0, 1.0]);
        assert_eq!(eig.eigenvectors(), Array2::<f64>::eye(3).view());
    }

    #[test]
    fn eig_diagonal_sorted() {
        let a = Array2::from_diag(&array![3.0, 1.0, 2.0]);
        let eig = eig_sym(a.view()).unwrap();
        assert_eq!(eig.eigenvalues().to_vec(), vec![3.0, 2.0, 1.0]);
        // permutation eigenvectors
        let v = eig.eigenvectors();
        assert!((v[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((v[(2, 1)].abs() - 1.0).abs() < 1e-12);
        assert!((v[(1, 2)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_rank_one() {
        let s = 1.0 / 2f64.sqrt();
        let a = array![[0.5, 0.5], [0.5, 0.5]];
        let eig = eig_sym(a.view()).unwrap();
        assert!((eig.eigenvalues()[0] - 1.0).abs() < 1e-12);
        assert!(eig.eigenvalues()[1].abs() < 1e-12);
        let v0 = eig.eigenvectors().column(0).to_owned();
        assert!((v0[0].abs() - s).abs() < 1e-10 && (v0[1].abs() - s).abs() < 1e-10);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = array![[1.0, 0.1], [0.0, 1.0]];
        assert!(matches!(
            eig_sym(a.view()),
            Err(Error::AsymmetricInput { .. })
        ));
    }

    #[test]
    fn eig_single_element() {
        let a = array![[5.0]];
        let eig = eig_sym(a.view()).unwrap();
        assert_eq!(eig.eigenvalues()[0], 5.0);
    }

    #[test]
    fn gram_schmidt_orthogonal_input() {
        let rows = array![[1.0, 0.0], [0.0, 2.0]];
        let b = gram_schmidt_pivoted(rows.view(), GRAM_SCHMIDT_TOL).unwrap();
        assert_eq!(b.rank(), 2);
        // pivot order: row 1 has the larger norm
        assert_eq!(b.pivots(), &[1, 0]);
    }

    #[test]
    fn gram_schmidt_duplicated_direction() {
        let rows = array![[1.0, 1.0], [2.0, 2.0]];
        let b = gram_schmidt_pivoted(rows.view(), GRAM_SCHMIDT_TOL).unwrap();
        assert_eq!(b.rank(), 1);
        let s = 1.0 / 2f64.sqrt();
        let v = b.vectors().column(0).to_owned();
        assert!((v[0].abs() - s).abs() < 1e-12 && (v[1].abs() - s).abs() < 1e-12);
    }

    #[test]
    fn gram_schmidt_zero_matrix_rank_zero() {
        let rows = Array2::<f64>::zeros((2, 3));
        let b = gram_schmidt_pivoted(rows.view(), GRAM_SCHMIDT_TOL).unwrap();
        assert_eq!(b.rank(), 0);
    }

    #[test]
    fn gram_schmidt_dependent_third_row_matches_direct_projector() {
        // r3 = r1 + r2 spans nothing new; the basis projector must agree with
        // the projector built directly from the two independent rows.
        let r1 = array![0.3, -1.2, 0.7, 0.4];
        let r2 = array![1.1, 0.2, -0.5, 0.9];
        let r3 = &r1 + &r2;
        let mut rows = Array2::zeros((3, 4));
        rows.row_mut(0).assign(&r1);
        rows.row_mut(1).assign(&r2);
        rows.row_mut(2).assign(&r3);
        let b = gram_schmidt_pivoted(rows.view(), GRAM_SCHMIDT_TOL).unwrap();
        assert_eq!(b.rank(), 2);
        let p = projector_from_basis(&b, ProjectionMethod::Exact).unwrap();

        // direct formula Q^T (Q Q^T)^{-1} Q for the 2x4 independent rows
        let q = ndarray::stack![ndarray::Axis(0), r1, r2];
        let qqt = q.dot(&q.t());
        let det = qqt[(0, 0)] * qqt[(1, 1)] - qqt[(0, 1)] * qqt[(1, 0)];
        let inv = array![
            [qqt[(1, 1)] / det, -qqt[(0, 1)] / det],
            [-qqt[(1, 0)] / det, qqt[(0, 0)] / det]
        ];
        let p_direct = q.t().dot(&inv).dot(&q);
        let err = max_abs_diff(&p.matrix().to_owned(), &p_direct);
        assert!(err < 1e-8, "err = {}", err);
    }

    #[test]
    fn projector_span_of_ones() {
        let rows = array![[1.0, 1.0, 1.0, 1.0]];
        let b = gram_schmidt_pivoted(rows.view(), GRAM_SCHMIDT_TOL).unwrap();
        let p = projector_from_basis(&b, ProjectionMethod::Exact).unwrap();
        for v in p.matrix().iter() {
            assert!((v - 0.25).abs() < 1e-12);
        }
        assert_eq!(p.k_prime(), 1);
    }

    #[test]
    fn projector_empty_basis_is_zero() {
        let rows = Array2::<f64>::zeros((1, 3));
        let b = gram_schmidt_pivoted(rows.view(), GRAM_SCHMIDT_TOL).unwrap();
        let p = projector_from_basis(&b, ProjectionMethod::Exact).unwrap();
        assert_eq!(p.k_prime(), 0);
        assert!(p.matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn projector_coordinate_basis() {
        let rows = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let b = gram_schmidt_pivoted(rows.view(), GRAM_SCHMIDT_TOL).unwrap();
        let p = projector_from_basis(&b, ProjectionMethod::Exact).unwrap();
        let expect = Array2::from_diag(&array![1.0, 1.0, 0.0]);
        assert!(max_abs_diff(&p.matrix().to_owned(), &expect) < 1e-12);
    }

    #[test]
    fn projection_distance_cases() {
        let p = ProjectionMatrix::new(
            Array2::from_diag(&array![1.0, 0.0]),
            1,
            ProjectionMethod::Exact,
        )
        .unwrap();
        let q = ProjectionMatrix::new(
            Array2::from_diag(&array![0.0, 1.0]),
            1,
            ProjectionMethod::Exact,
        )
        .unwrap();
        assert_eq!(projection_distance(&p, &p).unwrap(), 0.0);
        assert!((projection_distance(&p, &q).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn projector_invariant_under_basis_rotation() {
        // same plane, rotated basis
        let rows_a = array![[1.0, 0.0, 1.0], [0.0, 1.0, -1.0]];
        let theta: f64 = 0.73;
        let (c, s) = (theta.cos(), theta.sin());
        let r0 = rows_a.row(0).to_owned();
        let r1 = rows_a.row(1).to_owned();
        let mut rows_b = Array2::zeros((2, 3));
        rows_b.row_mut(0).assign(&(&r0 * c + &r1 * s));
        rows_b.row_mut(1).assign(&(&r0 * (-s) + &r1 * c));
        let pa = projector_from_basis(
            &gram_schmidt_pivoted(rows_a.view(), GRAM_SCHMIDT_TOL).unwrap(),
            ProjectionMethod::Exact,
        )
        .unwrap();
        let pb = projector_from_basis(
            &gram_schmidt_pivoted(rows_b.view(), GRAM_SCHMIDT_TOL).unwrap(),
            ProjectionMethod::Exact,
        )
        .unwrap();
        assert!(projection_distance(&pa, &pb).unwrap() <= 1e-8);
    }
}
