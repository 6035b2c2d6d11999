use rpce_web::{basis_count, kl_eigenvalues, ridge_comparison};

#[test]
fn study_is_reproducible_for_a_seed() {
    let a = ridge_comparison(4, 60, 7, 5).unwrap();
    let b = ridge_comparison(4, 60, 7, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.l1.basis_size, basis_count(4, 3, false).unwrap() as usize);
    assert!((a.exact_mean - 1.0).abs() < 1e-12);
}

#[test]
fn rotations_help_on_the_ridge() {
    let s = ridge_comparison(4, 60, 3, 9).unwrap();
    assert!(s.adm.rel_l2 < s.l1.rel_l2, "{s:?}");
}

#[test]
fn spectrum_sums_below_the_trace() {
    let s = kl_eigenvalues(0.1, 100).unwrap();
    let total: f64 = s.iter().sum();
    assert!(total > 0.978 && total < 1.0);
    assert!(kl_eigenvalues(0.1, 5000).is_err());
}

#[test]
fn out_of_range_inputs_are_rejected() {
    assert!(ridge_comparison(4, 5, 1, 3).is_err());
    assert!(ridge_comparison(1, 50, 1, 3).is_err());
}
