//! Property tests for expression evaluation, substitution and the
//! s-expression round trip.

use std::collections::BTreeMap;

use minorarc::pwl::{AffineForm, Point, PwlExpr};
use minorarc::rat::Rat;
use proptest::prelude::*;

const VARS: [&str; 4] = ["phi", "tau", "phi3", "phi4"];

fn arb_rat() -> impl Strategy<Value = Rat> {
    (-40i64..=40, 1i64..=12).prop_map(|(p, q)| Rat::new(p, q))
}

fn arb_affine() -> impl Strategy<Value = AffineForm> {
    (
        proptest::collection::btree_map(proptest::sample::select(VARS.to_vec()), arb_rat(), 0..=3),
        arb_rat(),
    )
        .prop_map(|(coeffs, constant)| {
            AffineForm::new(
                coeffs.into_iter().map(|(k, v)| (k.to_string(), v)),
                constant,
            )
        })
}

fn arb_expr() -> impl Strategy<Value = PwlExpr> {
    let leaf = arb_affine().prop_map(PwlExpr::Affine);
    leaf.prop_recursive(3, 24, 3, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 1..=3).prop_map(|c| PwlExpr::max(c).unwrap()),
            proptest::collection::vec(inner.clone(), 1..=3).prop_map(|c| PwlExpr::min(c).unwrap()),
            proptest::collection::vec(inner.clone(), 1..=3).prop_map(|c| PwlExpr::sum(c).unwrap()),
            (arb_rat(), inner).prop_map(|(c, e)| PwlExpr::scale(c, e)),
        ]
    })
}

fn arb_point() -> impl Strategy<Value = Point> {
    proptest::collection::vec(arb_rat(), VARS.len()).prop_map(|vals| {
        VARS.iter()
            .map(|v| v.to_string())
            .zip(vals)
            .collect::<BTreeMap<_, _>>()
    })
}

proptest! {
    #[test]
    fn scaling_is_exact(e in arb_expr(), c in arb_rat(), p in arb_point()) {
        let scaled = PwlExpr::scale(c.clone(), e.clone());
        prop_assert_eq!(scaled.eval(&p).unwrap(), c * e.eval(&p).unwrap());
    }

    #[test]
    fn max_dominates_children(children in proptest::collection::vec(arb_expr(), 1..=4), p in arb_point()) {
        let expr = PwlExpr::max(children.clone()).unwrap();
        let v = expr.eval(&p).unwrap();
        let mut attained = false;
        for child in &children {
            let cv = child.eval(&p).unwrap();
            prop_assert!(v >= cv);
            attained |= cv == v;
        }
        prop_assert!(attained, "max must equal one of its children");
    }

    #[test]
    fn substitution_merges_with_eval(e in arb_expr(), p in arb_point()) {
        // Bind the first two variables, evaluate the rest.
        let mut bindings = Point::new();
        let mut rest = Point::new();
        for (i, (k, v)) in p.iter().enumerate() {
            if i < 2 {
                bindings.insert(k.clone(), v.clone());
            } else {
                rest.insert(k.clone(), v.clone());
            }
        }
        let bound = e.substitute(&bindings);
        prop_assert_eq!(bound.eval(&rest).unwrap(), e.eval(&p).unwrap());
    }

    #[test]
    fn sexpr_round_trip_preserves_structure_and_eval(e in arb_expr(), p in arb_point()) {
        let text = e.to_sexpr();
        let back = PwlExpr::parse(&text).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.eval(&p).unwrap(), e.eval(&p).unwrap());
    }
}

#[test]
fn round_trip_at_one_hundred_random_points() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
    // A representative nested expression.
    let text = "(max (+ (affine (phi 5/2) (tau 2) 38) (* -37/2 (max (affine 10/37) \
                (affine (phi 6/41) 2/41)))) (min (affine (phi3 1) 0) (affine (phi4 -3/4) 1/7)))";
    let e = PwlExpr::parse(text).unwrap();
    let back = PwlExpr::parse(&e.to_sexpr()).unwrap();
    for _ in 0..100 {
        let p: Point = VARS
            .iter()
            .map(|v| {
                (
                    v.to_string(),
                    Rat::new(rng.gen_range(-400..=400), rng.gen_range(1..=64)),
                )
            })
            .collect();
        assert_eq!(back.eval(&p).unwrap(), e.eval(&p).unwrap());
    }
}
