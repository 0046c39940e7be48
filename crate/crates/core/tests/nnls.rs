mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use taste::{nnls_from_design, nnls_solve, NnlsError, NnlsNormalForm};

fn default_solve(gram: &Mat, cross: &Mat) -> Mat {
    let p = NnlsNormalForm::new(gram.clone(), cross.clone()).unwrap();
    nnls_solve(&p, p.default_kkt_tol()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solutions_satisfy_kkt(seed in any::<u64>(), r in 1usize..=6, n in 1usize..=5) {
        let mut rng = rng(seed);
        let gram = random_spd(&mut rng, r);
        let cross = normal(&mut rng, r, n) * 3.0;
        let p = NnlsNormalForm::new(gram.clone(), cross.clone()).unwrap();
        let tol = p.default_kkt_tol();
        let x = nnls_solve(&p, tol).unwrap();
        let y = &gram * &x - &cross;
        for c in 0..n {
            for i in 0..r {
                prop_assert!(x[(i, c)] >= 0.0);
                if x[(i, c)] == 0.0 {
                    prop_assert!(y[(i, c)] >= -tol, "dual {} below -{}", y[(i, c)], tol);
                }
                prop_assert!((x[(i, c)] * y[(i, c)]).abs() <= tol);
            }
        }
    }

    #[test]
    fn beats_random_feasible_points(seed in any::<u64>(), r in 1usize..=5) {
        let mut rng = rng(seed);
        let gram = random_spd(&mut rng, r);
        let cross = normal(&mut rng, r, 1);
        let x = default_solve(&gram, &cross).column(0).into_owned();
        let c = cross.column(0).into_owned();
        let best = quad_value(&gram, &c, &x);
        for _ in 0..120 {
            let cand = Vector::from_fn(r, |_, _| if rng.random::<f64>() < 0.3 { 0.0 } else { 2.0 * rng.random::<f64>() });
            prop_assert!(best <= quad_value(&gram, &c, &cand) + 1e-12 * (1.0 + best.abs()));
        }
    }

    #[test]
    fn matches_enumeration(seed in any::<u64>(), r in 1usize..=5) {
        let mut rng = rng(seed);
        let gram = random_spd(&mut rng, r);
        let cross = normal(&mut rng, r, 3);
        let x = default_solve(&gram, &cross);
        for c in 0..3 {
            let want = enumerate_normal(&gram, &cross.column(c).into_owned());
            let got = x.column(c).into_owned();
            let scale = want.amax().max(f64::MIN_POSITIVE);
            prop_assert!((got - &want).amax() <= 1e-8 * scale);
        }
    }

    #[test]
    fn nonpositive_cross_is_exactly_zero(seed in any::<u64>(), r in 1usize..=6) {
        let mut rng = rng(seed);
        // x = 0 satisfies KKT for any SPD gram once the cross is nonpositive.
        let gram = random_spd(&mut rng, r);
        let cross = -uniform(&mut rng, r, 2);
        prop_assert!(default_solve(&gram, &cross).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn design_form_equals_normal_form(seed in any::<u64>(), m in 3usize..=12, r in 1usize..=3) {
        let mut rng = rng(seed);
        let design = normal(&mut rng, m.max(r + 1), r);
        let targets = normal(&mut rng, design.nrows(), 2);
        let from_design = nnls_from_design(&design, &targets, 1e-10).unwrap();
        let want = enumerate_design_all(&design, &targets);
        prop_assert!(rel_err(&from_design, &want) <= 1e-8);
    }
}

#[test]
fn random_three_by_three_matches_all_sign_patterns() {
    let mut rng = rng(42);
    for _ in 0..50 {
        let gram = random_spd(&mut rng, 3);
        let cross = normal(&mut rng, 3, 1);
        let want = enumerate_normal(&gram, &cross.column(0).into_owned());
        let got = default_solve(&gram, &cross).column(0).into_owned();
        assert!((got - &want).amax() <= 1e-8 * want.amax().max(f64::MIN_POSITIVE));
    }
}

#[test]
fn random_four_by_two_design_matches_oracle() {
    let mut rng = rng(7);
    for _ in 0..50 {
        let design = normal(&mut rng, 4, 2);
        let targets = normal(&mut rng, 4, 1);
        let got = nnls_from_design(&design, &targets, 1e-10).unwrap();
        assert!(rel_err(&got, &enumerate_design_all(&design, &targets)) <= 1e-8);
    }
}

#[test]
fn deterministic_for_fixed_inputs() {
    let mut rng = rng(9);
    let gram = random_spd(&mut rng, 6);
    let cross = normal(&mut rng, 6, 64);
    let a = default_solve(&gram, &cross);
    let b = default_solve(&gram, &cross);
    assert_eq!(a.as_slice(), b.as_slice());
}

#[test]
fn many_columns_agree_with_one_at_a_time() {
    // Wide problems take the column-parallel path.
    let mut rng = rng(10);
    let gram = random_spd(&mut rng, 4);
    let cross = normal(&mut rng, 4, 100);
    let all = default_solve(&gram, &cross);
    for c in 0..100 {
        let one = default_solve(&gram, &cross.columns(c, 1).into_owned());
        assert_eq!(all.column(c).as_slice(), one.as_slice());
    }
}

#[test]
fn rejects_non_finite_and_mismatched_inputs() {
    let g = Mat::identity(2, 2);
    let mut bad = g.clone();
    bad[(0, 1)] = f64::NAN;
    assert!(matches!(NnlsNormalForm::new(bad, Mat::zeros(2, 1)), Err(NnlsError::NonFinite(_))));
    assert!(matches!(NnlsNormalForm::new(g.clone(), Mat::zeros(3, 1)), Err(NnlsError::Shape { .. })));
    let mut cross = Mat::zeros(2, 1);
    cross[(1, 0)] = f64::INFINITY;
    assert!(matches!(NnlsNormalForm::new(g, cross), Err(NnlsError::NonFinite(_))));
}

#[test]
fn singular_gram_is_ridged_then_solved() {
    // Rank-one gram from two identical columns.
    let design = Mat::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.5, 0.5]);
    let mut p = NnlsNormalForm::from_design(&design, &Mat::from_column_slice(3, 1, &[1.0, 2.0, 0.5])).unwrap();
    assert!(p.ensure_positive_definite());
    let x = nnls_solve(&p, p.default_kkt_tol()).unwrap();
    // Any split with x0 + x1 = 1 fits exactly; the ridge picks a feasible one.
    assert!((x[(0, 0)] + x[(1, 0)] - 1.0).abs() < 1e-8);
    assert!(x.iter().all(|&v| v >= 0.0));
}
