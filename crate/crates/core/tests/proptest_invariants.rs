//! Property-based invariants over random small genotype matrices: every
//! projection estimator produces a valid projector, residual rows sum to zero
//! whenever the projector spans the ones vector, and file formats round-trip.

use admixfit::diagnostics::residuals;
use admixfit::estimators::{
    project_from_pi, project_from_q, project_pca1, project_pca2, project_pca3,
};
use admixfit::model::{GenotypeMatrix, MissingPolicy};
use ndarray::Array2;
use proptest::prelude::*;

fn genotype_matrix(max_m: usize, max_n: usize) -> impl Strategy<Value = GenotypeMatrix> {
    (2..=max_m, 3..=max_n)
        .prop_flat_map(|(m, n)| {
            proptest::collection::vec(0u8..=2, m * n).prop_map(move |flat| {
                GenotypeMatrix::new(Array2::from_shape_vec((m, n), flat).unwrap()).unwrap()
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn estimators_produce_valid_projectors(g in genotype_matrix(30, 8), k in 2usize..=3) {
        // ProjectionMatrix::new validates symmetry, idempotency, and trace,
        // so a returned value is the property; only structured errors allowed
        let n = g.n();
        let k = k.min(n);
        prop_assert!(project_pca1(&g, k).is_ok());
        prop_assert!(project_pca2(&g, k).is_ok());
        match project_pca3(&g, k) {
            Ok(_) => {}
            Err(admixfit::Error::Degenerate(_)) => {} // all SNPs monomorphic
            Err(e) => prop_assert!(false, "unexpected pca3 error: {}", e),
        }
    }

    #[test]
    fn residual_rows_sum_to_zero_when_ones_spanned(g in genotype_matrix(30, 8)) {
        let p = project_pca2(&g, 2).unwrap();
        prop_assert!(p.spans_ones());
        let r = residuals(&g, &p).unwrap();
        for row in r.matrix().rows() {
            prop_assert!(row.sum().abs() < 1e-6);
        }
    }

    #[test]
    fn residual_rows_sum_to_zero_from_q_summing_to_one(g in genotype_matrix(20, 6), split in 1usize..=5) {
        let n = g.n();
        let split = split.min(n - 1);
        let mut q = Array2::<f64>::zeros((2, n));
        for i in 0..n {
            if i < split {
                q[(0, i)] = 1.0;
            } else {
                q[(1, i)] = 1.0;
            }
        }
        let p = project_from_q(q.view()).unwrap();
        prop_assert!(p.spans_ones());
        let r = residuals(&g, &p).unwrap();
        for row in r.matrix().rows() {
            prop_assert!(row.sum().abs() < 1e-6);
        }
    }

    #[test]
    fn from_pi_row_subsets_agree(seed in 0u64..1000) {
        use admixfit::simulate::{block_identity_q, sim_admixture, FreqPrior};
        use admixfit::model::PopulationLabels;
        let q = block_identity_q(&[3, 3]);
        let labels = PopulationLabels::from_sizes("pop", &[3, 3]).unwrap();
        let ds = sim_admixture(q.clone(), FreqPrior::Uniform { lo: 0.2, hi: 0.8 }, 40, seed, labels).unwrap();
        let truth = ds.truth.as_ref().unwrap();
        let pi = truth.f().dot(&truth.q());
        let top = pi.slice(ndarray::s![..20, ..]);
        let bottom = pi.slice(ndarray::s![20.., ..]);
        let p1 = project_from_pi(top, 2).unwrap();
        let p2 = project_from_pi(bottom, 2).unwrap();
        let d = admixfit::spectral::projection_distance(&p1, &p2).unwrap();
        prop_assert!(d < 1e-8, "disjoint row subsets disagree: {}", d);
    }

    #[test]
    fn tsv_round_trip(g in genotype_matrix(15, 6)) {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("g.tsv");
        admixfit::io::write_tsv_genotypes(&g, &path).unwrap();
        let back = admixfit::io::read_tsv_genotypes(&path, MissingPolicy::Reject).unwrap();
        prop_assert_eq!(back.genotypes.data(), g.data());
    }

    #[test]
    fn bed_round_trip(g in genotype_matrix(15, 9)) {
        let dir = tempfile::TempDir::new().unwrap();
        let (bed, bim, fam) = (
            dir.path().join("g.bed"),
            dir.path().join("g.bim"),
            dir.path().join("g.fam"),
        );
        admixfit::io::write_bed(&g, &bed, &bim, &fam).unwrap();
        let back = admixfit::io::read_bed(&bed, &bim, &fam, MissingPolicy::Reject).unwrap();
        prop_assert_eq!(back.genotypes.data(), g.data());
    }
}
