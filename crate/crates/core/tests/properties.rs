//! Randomized invariants of the exact scalars and the formal series calculus.

use num_bigint::BigInt;
use proptest::prelude::*;

use twistmod::linalg::SparseMat;
use twistmod::rational::{int, rat, Rational};
use twistmod::scalar::{scalar_add, scalar_mul, Scalar};
use twistmod::series::{nilpotent_conjugate, series_mul, LogSeries, NilpotentAction, NilpotentOp, Var};
use twistmod::Coeff;

fn small_rational() -> impl Strategy<Value = Rational> {
    (-12i64..=12, 1i64..=8).prop_map(|(n, d)| rat(n, d))
}

/// q with denominator dividing 24, so every element lives in one field ℚ(ζ_24).
fn root_exponent() -> impl Strategy<Value = Rational> {
    (-30i64..=30, prop::sample::select(vec![1i64, 2, 3, 4, 6, 8, 12, 24])).prop_map(|(n, d)| rat(n, d))
}

/// Σ c_j e^{2πi q_j} τ^{k_j} with k_j ≤ `max_tau`, built independently as a `Scalar`.
fn scalar(max_tau: u32) -> impl Strategy<Value = Scalar> {
    prop::collection::vec((small_rational(), root_exponent(), 0..=max_tau), 0..4).prop_map(|terms| {
        terms.into_iter().fold(Scalar::zero(), |acc, (c, q, k)| scalar_add(&acc, &Scalar::term(c, q, k)))
    })
}

fn coeff(max_tau: u32) -> impl Strategy<Value = Coeff> {
    scalar(max_tau).prop_map(|s| s.to_coeff())
}

fn big(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn series(var: &Var) -> impl Strategy<Value = LogSeries<Coeff>> {
    let var = var.clone();
    prop::collection::vec((-4i64..=4, 1i64..=2, 0u32..=2, coeff(0)), 0..5).prop_map(move |terms| {
        let mut s = LogSeries::new(var.clone());
        for (n, d, k, c) in terms {
            s.add_term(rat(n, d), k, &c).unwrap();
        }
        s
    })
}

proptest! {
    #[test]
    fn tau_free_field_axioms(a in coeff(0), b in coeff(0), c in coeff(0)) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_zero());
        if !a.is_zero() {
            prop_assert!((&a * &a.inv()).is_one());
        }
    }

    #[test]
    fn coeff_matches_scalar_arithmetic(a in scalar(2), b in scalar(2)) {
        prop_assert_eq!(scalar_add(&a, &b).to_coeff(), &a.to_coeff() + &b.to_coeff());
        prop_assert_eq!(scalar_mul(&a, &b).to_coeff(), &a.to_coeff() * &b.to_coeff());
    }

    #[test]
    fn tau_is_central_and_invertible(a in coeff(2)) {
        let tau = Coeff::tau_pow(1);
        prop_assert_eq!(&a * &tau, &tau * &a);
        prop_assert!((&tau * &tau.inv()).is_one());
        let shifted = &a + &tau;
        if !shifted.is_zero() {
            prop_assert!((&shifted * &shifted.inv()).is_one());
        }
    }

    #[test]
    fn roots_of_unity_normalize(q in root_exponent(), k in -3i64..=3) {
        let shifted = &q + int(k);
        prop_assert_eq!(Coeff::root_of_unity(&q), Coeff::root_of_unity(&shifted));
        prop_assert_eq!(Scalar::root_of_unity(&q), Scalar::root_of_unity(&shifted));
        for (exponent, _, _) in Scalar::root_of_unity(&q).terms() {
            prop_assert!(*exponent >= Rational::from_integer(0.into()) && *exponent < Rational::from_integer(1.into()));
        }
        prop_assert_eq!(&Coeff::root_of_unity(&q) * &Coeff::root_of_unity(&-&q), Coeff::one());
    }

    #[test]
    fn rational_fast_path_agrees_with_bigint(n1 in any::<i64>(), d1 in 1i64..=i64::MAX, n2 in any::<i64>(), d2 in 1i64..=i64::MAX) {
        let (x, y) = (big(n1, d1), big(n2, d2));
        let (a, b) = (Coeff::from_rational(x.clone()), Coeff::from_rational(y.clone()));
        prop_assert_eq!((&a + &b).as_rational(), Some(&x + &y));
        prop_assert_eq!((&a * &b).as_rational(), Some(&x * &y));
        prop_assert_eq!((-&a).as_rational(), Some(-&x));
        if n1 != 0 {
            prop_assert_eq!(a.inv().as_rational(), Some(x.recip()));
        }
    }

    #[test]
    fn leibniz_rule(f in series(&Var::new("x")), g in series(&Var::new("x"))) {
        let product = series_mul(&f, &g).unwrap();
        let lhs = product.derivative();
        let rhs = series_mul(&f.derivative(), &g).unwrap().add(&series_mul(&f, &g.derivative()).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn derivative_of_log_monomial(n in -5i64..=5, d in 1i64..=3, k in 0u32..=3) {
        let e = rat(n, d);
        let x = Var::new("x");
        let got = LogSeries::monomial(x.clone(), e.clone(), k, Coeff::one()).derivative();
        let mut want = LogSeries::new(x);
        want.add_term(&e - int(1), k, &Coeff::from_rational(e.clone())).unwrap();
        if k > 0 {
            want.add_term(&e - int(1), k - 1, &Coeff::from_i64(k as i64)).unwrap();
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn branch_changes_compose(f in series(&Var::new("x")), a in -2i64..=2, b in -2i64..=2) {
        let stepwise = f.branch_substitute(a, 8).unwrap().branch_substitute(a + b, 8).unwrap();
        let direct = f.branch_substitute(a + b, 8).unwrap();
        prop_assert_eq!(stepwise, direct);
    }

    #[test]
    fn zero_nilpotent_conjugation_is_identity(entries in prop::collection::vec((0usize..3, 0usize..3, small_rational(), -3i64..=3, 0u32..=1), 0..6)) {
        let x = Var::new("x");
        let mut f: LogSeries<SparseMat> = LogSeries::new(x);
        for (i, j, c, e, k) in entries {
            let mut m = SparseMat::zero(3, 3);
            m.add_entry(i, j, &Coeff::from_rational(c));
            f.add_term(int(e), k, &m).unwrap();
        }
        let op = NilpotentOp::new(SparseMat::zero(3, 3)).unwrap();
        prop_assert_eq!(op.index(), 1);
        prop_assert_eq!(nilpotent_conjugate(&f, &op, NilpotentAction::Conjugate), f);
    }
}

/// N = E_{12} on a 2-dimensional space: x^{−N} E_{21} x^{N} computed by hand.
#[test]
fn jordan_conjugation_by_hand() {
    let x = Var::new("x");
    let mut n = SparseMat::zero(2, 2);
    n.add_entry(0, 1, &Coeff::one());
    let op = NilpotentOp::new(n).unwrap();
    assert_eq!(op.index(), 2);
    let mut e21 = SparseMat::zero(2, 2);
    e21.add_entry(1, 0, &Coeff::one());
    let f = LogSeries::monomial(x.clone(), int(0), 0, e21.clone());
    // (1 − N log x) E21 (1 + N log x) = E21 + (E22 − E11) log x − E12 (log x)^2
    let got = nilpotent_conjugate(&f, &op, NilpotentAction::Conjugate);
    let mut log1 = SparseMat::zero(2, 2);
    log1.add_entry(1, 1, &Coeff::one());
    log1.add_entry(0, 0, &-Coeff::one());
    let mut log2 = SparseMat::zero(2, 2);
    log2.add_entry(0, 1, &-Coeff::one());
    let mut want = LogSeries::new(x);
    want.add_term(int(0), 0, &e21).unwrap();
    want.add_term(int(0), 1, &log1).unwrap();
    want.add_term(int(0), 2, &log2).unwrap();
    assert_eq!(got, want);
    // and undoing it from both sides recovers the original
    let back = nilpotent_conjugate(
        &nilpotent_conjugate(&got, &op, NilpotentAction::Left(1)),
        &op,
        NilpotentAction::Right(-1),
    );
    assert_eq!(back, f);
}
