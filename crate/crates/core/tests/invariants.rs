use anderson_spectra::transfer::char_poly_value;
use anderson_spectra::tridiag::{self, default_tol};
use anderson_spectra::TridiagonalOperator;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn operator() -> impl Strategy<Value = TridiagonalOperator> {
    (1usize..60, 0.0..5.0f64).prop_flat_map(|(n, s)| {
        prop::collection::vec(-s..=s, n).prop_map(|d| TridiagonalOperator::new(d).unwrap())
    })
}

fn spectrum(op: &TridiagonalOperator) -> Vec<f64> {
    tridiag::full_spectrum(op, default_tol(op)).unwrap()
}

fn dense_spectrum(op: &TridiagonalOperator) -> Vec<f64> {
    let n = op.n();
    let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => op.diagonal()[i],
        1 => 1.0,
        _ => 0.0,
    });
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bisection_matches_dense_solver(op in operator()) {
        let ours = spectrum(&op);
        let dense = dense_spectrum(&op);
        prop_assert_eq!(ours.len(), dense.len());
        for (a, b) in ours.iter().zip(&dense) {
            prop_assert!((a - b).abs() <= 1e-10 * op.scale(), "{a} vs {b}");
        }
    }

    #[test]
    fn sturm_count_is_monotone(op in operator(), mut shifts in prop::collection::vec(-8.0..8.0f64, 1..40)) {
        shifts.sort_by(f64::total_cmp);
        let counts = tridiag::sturm_counts(&op, &shifts);
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        for (mu, c) in shifts.iter().zip(&counts) {
            prop_assert_eq!(*c, tridiag::sturm_count(&op, *mu));
        }
    }

    #[test]
    fn count_below_matches_spectrum(op in operator(), mu in -8.0..8.0f64) {
        let ev = spectrum(&op);
        let tol = default_tol(&op);
        prop_assume!(ev.iter().all(|e| (e - mu).abs() > 10.0 * tol));
        prop_assert_eq!(tridiag::sturm_count(&op, mu), ev.iter().filter(|e| **e < mu).count());
    }

    #[test]
    fn determinant_sign_counts_eigenvalues_above(op in operator(), e in -8.0..8.0f64) {
        let (sign, _) = char_poly_value(op.diagonal(), 1.0, e);
        prop_assume!(sign != 0);
        let above = op.n() - tridiag::sturm_count(&op, e);
        prop_assert_eq!(sign, if above.is_multiple_of(2) { 1 } else { -1 });
    }

    #[test]
    fn positive_rank_one_perturbation_obeys_weyl_and_interlacing(op in operator(), site in 0usize..60, tau in 0.0..3.0f64) {
        let site = site % op.n();
        let bumped = op.with_site(site, op.diagonal()[site] + tau);
        let before = spectrum(&op);
        let after = spectrum(&bumped);
        let slack = 4.0 * default_tol(&bumped);
        for k in 0..before.len() {
            prop_assert!(after[k] >= before[k] - slack);
            prop_assert!(after[k] <= before[k] + tau + slack);
            if k + 1 < before.len() {
                prop_assert!(after[k] <= before[k + 1] + slack);
            }
        }
    }

    #[test]
    fn trace_identity(op in operator()) {
        let sum: f64 = spectrum(&op).iter().sum();
        prop_assert!((sum - op.trace()).abs() <= 1e-9 * op.scale() * op.n() as f64);
    }
}
