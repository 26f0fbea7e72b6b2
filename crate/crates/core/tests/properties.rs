//! Randomized invariants of the exact expression algebra.

use pepcert::expr::{Basis, BasisLabel, ScalarExpr, VectorExpr};
use pepcert::methods;
use pepcert::quadratic::residual_polynomials;
use pepcert::rat::{parse_decimal, ratio, rationalize, to_f64, Rat};
use proptest::prelude::*;

fn small_rat() -> impl Strategy<Value = Rat> {
    (-20i64..=20, 1i64..=9).prop_map(|(p, q)| ratio(p, q))
}

fn test_basis() -> Basis {
    Basis::new(
        vec![
            BasisLabel::Star,
            BasisLabel::Init,
            BasisLabel::Gradient(0),
            BasisLabel::Gradient(1),
        ],
        3,
    )
}

fn vector_expr() -> impl Strategy<Value = VectorExpr> {
    proptest::collection::vec(small_rat(), 4).prop_map(|ws| {
        let labels = [
            BasisLabel::Star,
            BasisLabel::Init,
            BasisLabel::Gradient(0),
            BasisLabel::Gradient(1),
        ];
        let mut e = VectorExpr::zero();
        for (l, w) in labels.into_iter().zip(ws) {
            e.add_term(l, w);
        }
        e
    })
}

proptest! {
    /// <., .> is bilinear and symmetric as an exact lifted expression.
    #[test]
    fn inner_product_bilinear_symmetric(
        a in vector_expr(),
        b in vector_expr(),
        c in vector_expr(),
        w in small_rat(),
    ) {
        let basis = test_basis();
        let ip = |x: &VectorExpr, y: &VectorExpr| {
            ScalarExpr::inner_product(&basis, x, y).unwrap()
        };
        prop_assert_eq!(ip(&a, &b), ip(&b, &a));
        let mut lhs = ip(&a.add(&b.scale(&w)), &c);
        lhs.add_scaled(&-w, &ip(&b, &c)).unwrap();
        lhs.add_scaled(&-Rat::from_integer(1.into()), &ip(&a, &c)).unwrap();
        prop_assert!(lhs.is_zero());
    }

    /// Evaluating the lifted expression on concrete vectors reproduces the
    /// plain Euclidean inner product.
    #[test]
    fn lifted_eval_matches_euclidean(
        a in vector_expr(),
        b in vector_expr(),
        coords in proptest::collection::vec(-10.0f64..10.0, 4 * 3),
    ) {
        let basis = test_basis();
        let vectors: Vec<Vec<f64>> = coords.chunks(3).map(<[f64]>::to_vec).collect();
        let av = a.eval(&basis, &vectors).unwrap();
        let bv = b.eval(&basis, &vectors).unwrap();
        let direct: f64 = av.iter().zip(&bv).map(|(x, y)| x * y).sum();
        let e = ScalarExpr::inner_product(&basis, &a, &b).unwrap();
        let lifted = e.eval(&vectors, &vec![0.0; e.v.len()]);
        prop_assert!((lifted - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    /// Fraction strings parse exactly and float rationalization recovers
    /// small rationals from their f64 images.
    #[test]
    fn rational_round_trips(p in -2000i64..=2000, q in 1i64..=999) {
        let r = ratio(p, q);
        prop_assert_eq!(parse_decimal(&format!("{p}/{q}")).unwrap(), r.clone());
        prop_assert_eq!(rationalize(to_f64(&r), 10_000, 1e-9).unwrap(), r);
    }

    /// Constant-step gradient descent has residual polynomials
    /// `P_t(x) = (1 - step x)^t`, exactly.
    #[test]
    fn gd_residual_polynomials_are_powers(
        step in small_rat(),
        t in 1usize..=5,
        x in small_rat(),
    ) {
        let ps = residual_polynomials(&methods::gd(step.clone(), t)).unwrap();
        let base = Rat::from_integer(1.into()) - step * &x;
        let mut expect = Rat::from_integer(1.into());
        for (s, p) in ps.iter().enumerate() {
            prop_assert_eq!(p.eval_rat(&x), expect.clone(), "degree {}", s);
            expect *= &base;
        }
    }
}
