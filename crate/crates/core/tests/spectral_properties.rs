//! Randomized properties of the eigensolver and projector construction:
//! reconstruction on random symmetric matrices, subspace stability under
//! O(1/sqrt(m)) perturbations, and Frobenius-norm identities.

use admixfit::spectral::{
    eig_sym, gram_schmidt_pivoted, projection_distance, projector_from_basis,
};
use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_symmetric(n: usize, rng: &mut StdRng) -> Array2<f64> {
    let mut a = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

fn random_orthogonal(n: usize, rng: &mut StdRng) -> Array2<f64> {
    loop {
        let mut rows = Array2::<f64>::zeros((n, n));
        for v in rows.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let basis = gram_schmidt_pivoted(rows.view(), 1e-10).unwrap();
        if basis.rank() == n {
            return basis.vectors().to_owned();
        }
    }
}

fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn eig_reconstruction_random_matrices() {
    let mut rng = StdRng::seed_from_u64(101);
    // EigenDecomposition validates orthonormality, descending order, and
    // reconstruction against the input on construction
    for trial in 0..200 {
        let n = rng.gen_range(1..=50);
        let a = random_symmetric(n, &mut rng);
        let eig = eig_sym(a.view()).unwrap_or_else(|e| panic!("trial {}: {}", trial, e));
        assert_eq!(eig.n(), n);
    }
}

#[test]
fn eig_deterministic_identical_bits() {
    let mut rng = StdRng::seed_from_u64(7);
    let a = random_symmetric(30, &mut rng);
    let e1 = eig_sym(a.view()).unwrap();
    let e2 = eig_sym(a.view()).unwrap();
    assert_eq!(e1.eigenvalues(), e2.eigenvalues());
    assert_eq!(e1.eigenvectors(), e2.eigenvectors());
}

#[test]
fn perturbation_suite_projector_stability() {
    let mut rng = StdRng::seed_from_u64(42);
    let n = 10;
    let k = 3;
    let m = 10_000usize;
    for trial in 0..50 {
        // spectrum with a guaranteed gap: top k in [1.5, 2.5], rest in [0, 1]
        let mut vals = Array1::<f64>::zeros(n);
        for i in 0..k {
            vals[i] = rng.gen_range(1.5..2.5);
        }
        for i in k..n {
            vals[i] = rng.gen_range(0.0..1.0);
        }
        let u = random_orthogonal(n, &mut rng);
        let a = u.dot(&Array2::from_diag(&vals)).dot(&u.t());
        let a = (&a + &a.t()) * 0.5;

        let mut s = random_symmetric(n, &mut rng);
        s.mapv_inplace(|x| x / (m as f64).sqrt());
        let am = &a + &s;

        let top = |mat: &Array2<f64>| {
            let eig = eig_sym(mat.view()).unwrap();
            let vecs = eig.eigenvectors().slice(ndarray::s![.., ..k]).to_owned();
            let basis = gram_schmidt_pivoted(vecs.t(), 1e-10).unwrap();
            projector_from_basis(&basis, admixfit::model::ProjectionMethod::Exact).unwrap()
        };
        let d = projection_distance(&top(&a), &top(&am)).unwrap();
        assert!(
            d < 0.05,
            "trial {}: projection distance {} not below 0.05",
            trial,
            d
        );
    }
}

#[test]
fn frobenius_invariance_under_orthogonal_maps() {
    let mut rng = StdRng::seed_from_u64(55);
    for _ in 0..20 {
        let n = rng.gen_range(2..12);
        let a = random_symmetric(n, &mut rng);
        let u = random_orthogonal(n, &mut rng);
        let v = random_orthogonal(n, &mut rng);
        let mapped = v.dot(&a).dot(&u);
        assert!((frob(&mapped) - frob(&a)).abs() < 1e-10);
    }
}

#[test]
fn frobenius_rank_one_factorization() {
    let mut rng = StdRng::seed_from_u64(56);
    for _ in 0..20 {
        let n = rng.gen_range(2..30);
        let w = Array1::from_iter((0..n).map(|_| rng.gen_range(-2.0..2.0f64)));
        let x = Array1::from_iter((0..n).map(|_| rng.gen_range(-2.0..2.0f64)));
        let outer = Array2::from_shape_fn((n, n), |(i, j)| w[i] * x[j]);
        let wn = w.dot(&w).sqrt();
        let xn = x.dot(&x).sqrt();
        assert!((frob(&outer) - wn * xn).abs() < 1e-12);
    }
}

#[test]
fn frobenius_norm_of_projector_is_sqrt_rank() {
    let mut rng = StdRng::seed_from_u64(57);
    for _ in 0..20 {
        let n = rng.gen_range(2..20);
        let r = rng.gen_range(1..=n);
        let mut rows = Array2::<f64>::zeros((r, n));
        for v in rows.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let basis = gram_schmidt_pivoted(rows.view(), 1e-10).unwrap();
        let p = projector_from_basis(&basis, admixfit::model::ProjectionMethod::Exact).unwrap();
        let expect = (basis.rank() as f64).sqrt();
        assert!((frob(&p.matrix().to_owned()) - expect).abs() < 1e-8);
    }
}
