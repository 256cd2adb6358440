"""Smoke test for the admixfit_py extension module.

Build the module first, then run this script from the repository root:

    cargo build --release -p admixfit-py --features extension-module
    cp target/release/libadmixfit_py.so python/admixfit_py.so
    python3 python/smoke_test.py
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import admixfit_py


def close(a, b, tol):
    return abs(a - b) < tol


def main():
    # three populations of 20, correctly specified fit at k = 3
    ds = admixfit_py.simulate_scenario(1, 50_000, seed=7, sizes=[20, 20, 20])
    m, n = ds.shape
    assert n == 60 and m == 50_000, ds.shape
    assert len(ds.labels) == 60
    row = ds.genotype_row(0)
    assert len(row) == 60 and all(g in (0, 1, 2) for g in row)

    fit = ds.fit_pca("pca1", 3)
    assert len(fit.b_hat) == 60 and len(fit.diff) == 60
    # within-block residual correlations concentrate near -1/(20 - 1) and the
    # corrected correlations near zero
    for block_a, block_b, count, b_mean, _, diff_mean, _, ref in fit.block_summary():
        if block_a == block_b:
            assert count == 20 * 19, (block_a, count)
            assert close(b_mean, -1.0 / 19.0, 0.01), (block_a, b_mean)
            assert close(diff_mean, 0.0, 0.005), (block_a, diff_mean)
            assert ref is not None and close(ref, -1.0 / 19.0, 1e-12)
    assert close(fit.sum_ratio, -1.0, 0.02), fit.sum_ratio

    # fitting the true admixture proportions also gives near-zero misfit
    q = ds.truth_q
    assert q is not None and len(q) == 3 and len(q[0]) == 60
    fit_q = ds.fit_q(q)
    worst = max(
        abs(d)
        for a, b, c, _, _, d, _, _ in fit_q.block_summary()
        if a == b and d is not None
    )
    assert worst < 0.005, worst

    bad = False
    try:
        ds.fit_pca("pca9", 2)
    except ValueError:
        bad = True
    assert bad, "unknown method must raise ValueError"

    print("smoke test passed")


if __name__ == "__main__":
    main()
