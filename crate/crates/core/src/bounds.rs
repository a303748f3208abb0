//! The five minor-arc exponent bounds and the verification driver.
//!
//! Everything is parameterized by `(n, Δ, ε')`: the number of variables of
//! the cubic system, the major-arc cutoff exponent and the small slack in
//! the Poisson height bracket. The five bounds are piecewise-linear
//! functions of the dyadic exponents `(phi, tau, phi3, phi4)`; the
//! verification computes their exact max-min over the two domain polytopes
//! and reports the margin against `n - 6`.

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::minmax::{max_min, Engine, MinMaxResult};
use crate::polytope::{Constraint, Polytope, Relation};
use crate::pwl::{AffineForm, Point, PwlExpr};
use crate::rat::Rat;

pub const VARS: [&str; 4] = ["phi", "tau", "phi3", "phi4"];

pub const BOUND_NAMES: [&str; 5] = ["B_AV/P", "B_PV/P", "B_AV/W", "B_PV/W", "B_Weyl"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: i64,
    pub delta: Rat,
    pub eps_prime: Rat,
}

impl BoundParams {
    pub fn new(n: i64, delta: Rat, eps_prime: Rat) -> Result<Self, Error> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!(
                "n must be at least 3 so that n-2 and n+2 stay positive, got {}",
                n
            )));
        }
        if !delta.is_positive() || delta >= Rat::new(1, 7) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1/7), got {}",
                delta
            )));
        }
        if !eps_prime.is_positive() {
            return Err(Error::InvalidParameter(format!(
                "eps_prime must be positive, got {}",
                eps_prime
            )));
        }
        Ok(BoundParams {
            n,
            delta,
            eps_prime,
        })
    }

    /// The paper's reported run: Δ = 1/7 - 1/1000, ε' = 1/10000.
    pub fn defaults_for(n: i64) -> Result<Self, Error> {
        BoundParams::new(n, Rat::new(993, 7000), Rat::new(1, 10000))
    }
}

/// The five bound expressions over `(phi, tau, phi3, phi4)`.
#[derive(Debug, Clone)]
pub struct BoundFamily {
    pub b_avp: PwlExpr,
    pub b_pvp: PwlExpr,
    pub b_avw: PwlExpr,
    pub b_pvw: PwlExpr,
    pub b_weyl: PwlExpr,
    pub params: BoundParams,
}

impl BoundFamily {
    pub fn exprs(&self) -> Vec<PwlExpr> {
        vec![
            self.b_avp.clone(),
            self.b_pvp.clone(),
            self.b_avw.clone(),
            self.b_pvw.clone(),
            self.b_weyl.clone(),
        ]
    }

    /// The five bounds in the s-expression grammar, for audit; parsing the
    /// text back reproduces the expressions bit-exactly.
    pub fn to_sexprs(&self) -> Vec<(String, String)> {
        BOUND_NAMES
            .iter()
            .map(|n| n.to_string())
            .zip(self.exprs().iter().map(PwlExpr::to_sexpr))
            .collect()
    }
}

fn aff(pairs: &[(&str, Rat)], constant: Rat) -> PwlExpr {
    PwlExpr::Affine(AffineForm::new(
        pairs.iter().map(|(n, v)| (n.to_string(), v.clone())),
        constant,
    ))
}

fn mx(children: Vec<PwlExpr>) -> PwlExpr {
    PwlExpr::max(children).expect("nonempty max")
}

fn mn(children: Vec<PwlExpr>) -> PwlExpr {
    PwlExpr::min(children).expect("nonempty min")
}

fn sm(children: Vec<PwlExpr>) -> PwlExpr {
    PwlExpr::sum(children).expect("nonempty sum")
}

fn sc(c: Rat, e: PwlExpr) -> PwlExpr {
    PwlExpr::scale(c, e)
}

/// Builds the five bounds. The helper brackets are shared subexpressions:
/// the Poisson height `H^` feeds the volume bracket `V^`, the tau bracket
/// and the X bracket; the Weyl height feeds the two van der Corput/Weyl
/// bounds.
pub fn build_bound_family(params: &BoundParams) -> Result<BoundFamily, Error> {
    let n = params.n;
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "n must be >= 3, got {}",
            n
        )));
    }
    let eps = params.eps_prime.clone();
    let rn = Rat::int(n);

    // H^(phi) = max{10/(n-2) + eps', 2/(n+2) + eps' + 6 phi/(n+2)}
    let hhat = mx(vec![
        aff(&[], Rat::new(10, n - 2) + eps.clone()),
        aff(
            &[("phi", Rat::new(6, n + 2))],
            Rat::new(2, n + 2) + eps.clone(),
        ),
    ]);

    // V^(phi, tau) = max{0, -1 + phi, phi + (tau + H^)/2}
    let vhat = mx(vec![
        aff(&[], Rat::zero()),
        aff(&[("phi", Rat::one())], Rat::int(-1)),
        sm(vec![
            aff(&[("phi", Rat::one())], Rat::zero()),
            sc(
                Rat::new(1, 2),
                sm(vec![aff(&[("tau", Rat::one())], Rat::zero()), hhat.clone()]),
            ),
        ]),
    ]);

    // tau_brac = max{-2 - H^, tau}
    let tau_brac = mx(vec![
        sm(vec![aff(&[], Rat::int(-2)), sc(Rat::int(-1), hhat.clone())]),
        aff(&[("tau", Rat::one())], Rat::zero()),
    ]);

    // X_brac = max{phi,
    //              (1-n)phi/2 + n H^ + (n-1) V^,
    //              (1-n)phi/2 + (n/3 - 1/2) phi3 + (n-1) phi4/2 + n H^}
    let xbrac = mx(vec![
        aff(&[("phi", Rat::one())], Rat::zero()),
        sm(vec![
            aff(&[("phi", Rat::new(1 - n, 2))], Rat::zero()),
            sc(rn.clone(), hhat.clone()),
            sc(Rat::int(n - 1), vhat),
        ]),
        sm(vec![
            aff(
                &[
                    ("phi", Rat::new(1 - n, 2)),
                    ("phi3", Rat::new(n, 3) - Rat::new(1, 2)),
                    ("phi4", Rat::new(n - 1, 2)),
                ],
                Rat::zero(),
            ),
            sc(rn.clone(), hhat.clone()),
        ]),
    ]);

    // H^_Weyl = max{phi/6, (2 + phi + tau)/5}
    let hweyl = mx(vec![
        aff(&[("phi", Rat::new(1, 6))], Rat::zero()),
        aff(
            &[("phi", Rat::new(1, 5)), ("tau", Rat::new(1, 5))],
            Rat::new(2, 5),
        ),
    ]);

    // Weyl-side tau bracket: max{-2 - H^_Weyl, tau}
    let tau_brac_weyl = mx(vec![
        sm(vec![
            aff(&[], Rat::int(-2)),
            sc(Rat::int(-1), hweyl.clone()),
        ]),
        aff(&[("tau", Rat::one())], Rat::zero()),
    ]);

    // Weyl_brac = max{2 phi + 2 tau, -phi + min{0, -3 - tau}}
    let weyl_brac = mx(vec![
        aff(&[("phi", Rat::int(2)), ("tau", Rat::int(2))], Rat::zero()),
        sm(vec![
            aff(&[("phi", Rat::int(-1))], Rat::zero()),
            mn(vec![
                aff(&[], Rat::zero()),
                aff(&[("tau", Rat::int(-1))], Rat::int(-3)),
            ]),
        ]),
    ]);

    let b_avp = sm(vec![
        aff(&[("phi", Rat::new(5, 2))], Rat::int(n - 1)),
        sc(Rat::new(2 - n, 2), hhat.clone()),
        sc(Rat::int(2), tau_brac),
        sc(Rat::new(1, 2), xbrac.clone()),
    ]);
    let b_pvp = sm(vec![
        aff(
            &[("phi", Rat::new(5, 2)), ("tau", Rat::int(2))],
            Rat::int(n),
        ),
        sc(Rat::new(-n, 2), hhat),
        sc(Rat::new(1, 2), xbrac),
    ]);
    let b_avw = sm(vec![
        aff(
            &[
                ("phi", Rat::int(3)),
                ("phi3", Rat::new(-2, 3)),
                ("phi4", Rat::new(-3, 4)),
            ],
            Rat::int(n - 1),
        ),
        sc(Rat::new(3 - n, 2), hweyl.clone()),
        sc(Rat::int(2), tau_brac_weyl),
    ]);
    let b_pvw = sm(vec![
        aff(
            &[
                ("phi", Rat::int(3)),
                ("tau", Rat::int(2)),
                ("phi3", Rat::new(-2, 3)),
                ("phi4", Rat::new(-3, 4)),
            ],
            Rat::int(n),
        ),
        sc(Rat::new(1 - n, 2), hweyl),
    ]);
    let b_weyl = sm(vec![
        aff(
            &[
                ("phi", Rat::int(3)),
                ("tau", Rat::int(2)),
                ("phi3", Rat::new(-2, 3)),
                ("phi4", Rat::new(-3, 4)),
            ],
            Rat::int(n),
        ),
        sc(Rat::new(n - 1, 16), weyl_brac),
    ]);

    Ok(BoundFamily {
        b_avp,
        b_pvp,
        b_avw,
        b_pvw,
        b_weyl,
        params: params.clone(),
    })
}

fn var_names() -> Vec<String> {
    VARS.iter().map(|s| s.to_string()).collect()
}

fn pair(a: &str, ca: Rat, b: &str, cb: Rat) -> AffineForm {
    AffineForm::new([(a.to_string(), ca), (b.to_string(), cb)], Rat::zero())
}

/// The two domain polytopes, embedded in `(phi, tau, phi3, phi4)` space:
///
/// * `D1 = {Δ <= phi <= 3/2, 0 <= phi3 <= phi, phi4 = 0,
///          -5 <= tau <= -phi - 3/4}`;
/// * `D2 = {0 <= phi <= Δ, 0 <= phi3 <= phi, phi4 = 0,
///          -3 + Δ <= tau <= -phi - 3/4}`.
///
/// The fourth exponent is pinned to zero: the three-variable region is the
/// one whose optimum reproduces the published value, and freeing `phi4`
/// under the weaker coupling `phi3 + phi4 <= phi` opens a ridge at
/// `phi = Δ` where three of the bounds cross at exactly `n - 6`, so the
/// strict margin would be lost (see `tests/phi4_ridge.rs`).
pub fn domains(delta: &Rat) -> Result<(Polytope, Polytope), Error> {
    if !delta.is_positive() || *delta >= Rat::new(1, 7) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1/7), got {}",
            delta
        )));
    }
    let ge = |form: AffineForm, rhs: Rat| Constraint::new(form, Relation::Ge, rhs);
    let le = |form: AffineForm, rhs: Rat| Constraint::new(form, Relation::Le, rhs);
    let shared = |lo_phi: Rat, hi_phi: Rat, lo_tau: Rat| -> Vec<Constraint> {
        vec![
            ge(AffineForm::var("phi"), lo_phi),
            le(AffineForm::var("phi"), hi_phi),
            ge(AffineForm::var("phi3"), Rat::zero()),
            // phi3 <= phi
            le(pair("phi3", Rat::one(), "phi", Rat::int(-1)), Rat::zero()),
            Constraint::new(AffineForm::var("phi4"), Relation::Eq, Rat::zero()),
            ge(AffineForm::var("tau"), lo_tau),
            // tau <= -phi - 3/4
            le(pair("tau", Rat::one(), "phi", Rat::one()), Rat::new(-3, 4)),
        ]
    };
    let d1 = Polytope::new(
        var_names(),
        shared(delta.clone(), Rat::new(3, 2), Rat::int(-5)),
    )?;
    let d2 = Polytope::new(
        var_names(),
        shared(Rat::zero(), delta.clone(), Rat::int(-3) + delta.clone()),
    )?;
    Ok((d1, d2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainId {
    D1,
    D2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub params: BoundParams,
    pub engine: Engine,
    pub d1: MinMaxResult,
    pub d2: MinMaxResult,
    /// max over D1 ∪ D2 of the min of the five bounds.
    pub value: Rat,
    /// `value - (n - 6)`; negative means the minor-arc bound holds.
    pub margin: Rat,
    pub winner: DomainId,
    pub argmax: Point,
    /// All five bound values at the overall argmax, in family order.
    pub per_bound_at_argmax: Vec<Rat>,
    /// Name of the minimizing bound at the argmax.
    pub min_bound: String,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Runs the full minor-arc verification for one `n`.
pub fn verify_minor_arcs(
    params: &BoundParams,
    engine: Engine,
) -> Result<VerificationReport, Error> {
    let start = Instant::now();
    let family = build_bound_family(params)?;
    let exprs = family.exprs();
    let (d1, d2) = domains(&params.delta)?;
    let r1 = max_min(&exprs, &d1, engine)?;
    let r2 = max_min(&exprs, &d2, engine)?;
    // Ties break toward D1.
    let (winner, best) = if r2.value > r1.value {
        (DomainId::D2, &r2)
    } else {
        (DomainId::D1, &r1)
    };
    let argmax = best.argmax.clone();
    let value = best.value.clone();
    let per_bound: Result<Vec<Rat>, Error> = exprs.iter().map(|e| e.eval(&argmax)).collect();
    let per_bound = per_bound?;
    let min_bound = BOUND_NAMES[best.min_index].to_string();
    let margin = &value - &Rat::int(params.n - 6);
    Ok(VerificationReport {
        params: params.clone(),
        engine,
        d1: r1.clone(),
        d2: r2,
        value,
        margin,
        winner,
        argmax,
        per_bound_at_argmax: per_bound,
        min_bound,
        wall_time: start.elapsed(),
    })
}

/// Min of the five bounds at a rational point, exactly.
pub fn min_of_bounds_at(family: &BoundFamily, point: &Point) -> Result<Rat, Error> {
    let mut best: Option<Rat> = None;
    for expr in family.exprs() {
        let v = expr.eval(point)?;
        best = Some(match best {
            Some(b) => b.min(v),
            None => v,
        });
    }
    Ok(best.expect("five bounds"))
}

/// The generic limiting case `phi = 3/2`, `tau = -9/4`, `phi3 = phi4 = 0`.
pub fn generic_vertex() -> Point {
    [
        ("phi".to_string(), Rat::new(3, 2)),
        ("tau".to_string(), Rat::new(-9, 4)),
        ("phi3".to_string(), Rat::zero()),
        ("phi4".to_string(), Rat::zero()),
    ]
    .into_iter()
    .collect()
}

/// Independent lower-bound oracle: the max of the min of the five bounds
/// over `count` deterministic domain points. The first point probed is
/// always the generic vertex `(3/2, -9/4, 0, 0)`; the rest are seeded
/// pseudorandom rational points of `D1 ∪ D2`. The result can never exceed
/// the verified optimum.
pub fn sample_floor(params: &BoundParams, seed: u64, count: u64) -> Result<Rat, Error> {
    if count < 1 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let family = build_bound_family(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = min_of_bounds_at(&family, &generic_vertex())?;
    for _ in 1..count {
        let point = sample_domain_point(&params.delta, &mut rng);
        let v = min_of_bounds_at(&family, &point)?;
        best = best.max(v);
    }
    Ok(best)
}

/// A random rational point of `D1` or `D2`, built parametrically so each
/// constraint holds exactly.
pub fn sample_domain_point(delta: &Rat, rng: &mut impl Rng) -> Point {
    let frac = |rng: &mut dyn rand::RngCore| Rat::new(rng.gen_range(0..=64), 64);
    let in_d1 = rng.gen_bool(0.5);
    let (phi_lo, phi_hi) = if in_d1 {
        (delta.clone(), Rat::new(3, 2))
    } else {
        (Rat::zero(), delta.clone())
    };
    let phi = &phi_lo + &(frac(rng) * (&phi_hi - &phi_lo));
    let tau_hi = -&phi - Rat::new(3, 4);
    let tau_lo = if in_d1 {
        Rat::int(-5)
    } else {
        Rat::int(-3) + delta.clone()
    };
    let tau = &tau_lo + &(frac(rng) * (&tau_hi - &tau_lo));
    let phi3 = frac(rng) * phi.clone();
    [
        ("phi".to_string(), phi),
        ("tau".to_string(), tau),
        ("phi3".to_string(), phi3),
        ("phi4".to_string(), Rat::zero()),
    ]
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwl::point;

    fn params39() -> BoundParams {
        BoundParams::defaults_for(39).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(BoundParams::new(2, Rat::new(1, 10), Rat::new(1, 10000)).is_err());
        assert!(BoundParams::new(39, Rat::new(1, 7), Rat::new(1, 10000)).is_err());
        assert!(BoundParams::new(39, Rat::new(1, 10), Rat::zero()).is_err());
    }

    #[test]
    fn weyl_bound_at_generic_vertex() {
        // B_Weyl(3/2, -9/4, 0, 0) = 39 + 9/2 - 9/2 + (38/16)(-3/2) = 39 - 57/16.
        let family = build_bound_family(&params39()).unwrap();
        let v = family.b_weyl.eval(&generic_vertex()).unwrap();
        assert_eq!(v, Rat::int(39) - Rat::new(57, 16));
    }

    #[test]
    fn avp_bound_at_generic_vertex() {
        // The height bracket term (37/2) H^ contributes exactly 5 + 37/20000,
        // so B_AV/P = 39 - 6 - 37/20000 there.
        let family = build_bound_family(&params39()).unwrap();
        let v = family.b_avp.eval(&generic_vertex()).unwrap();
        assert_eq!(v, Rat::int(33) - Rat::new(37, 20000));
    }

    #[test]
    fn weyl_height_ties_at_generic_vertex() {
        // H^_Weyl(3/2, -9/4) = max{1/4, 1/4} = 1/4, entering through B_PV/W.
        let family = build_bound_family(&params39()).unwrap();
        let v = family.b_pvw.eval(&generic_vertex()).unwrap();
        // B_PV/W = 39 + 9/2 - 9/2 + ((1-39)/2)(1/4) = 39 - 19/4.
        assert_eq!(v, Rat::int(39) - Rat::new(19, 4));
    }

    #[test]
    fn domain_examples() {
        let delta = Rat::new(993, 7000);
        let (d1, d2) = domains(&delta).unwrap();
        assert!(d1.is_feasible());
        assert!(d1.contains(&generic_vertex()).unwrap());
        let d2_corner = point(&[
            ("phi", Rat::zero()),
            ("tau", Rat::int(-3) + delta.clone()),
            ("phi3", Rat::zero()),
            ("phi4", Rat::zero()),
        ]);
        assert!(d2.contains(&d2_corner).unwrap());
        let excluded = point(&[
            ("phi", Rat::new(3, 2)),
            ("tau", Rat::int(-2)),
            ("phi3", Rat::zero()),
            ("phi4", Rat::zero()),
        ]);
        assert!(!d1.contains(&excluded).unwrap());
    }

    #[test]
    fn d2_has_expected_vertex() {
        let delta = Rat::new(993, 7000);
        let (_, d2) = domains(&delta).unwrap();
        let verts = d2.vertices().unwrap();
        let corner = point(&[
            ("phi", Rat::zero()),
            ("tau", Rat::int(-3) + delta),
            ("phi3", Rat::zero()),
            ("phi4", Rat::zero()),
        ]);
        assert!(verts.contains(&corner));
    }

    #[test]
    fn maximize_tau_over_d1() {
        let delta = Rat::new(993, 7000);
        let (d1, _) = domains(&delta).unwrap();
        match d1.maximize(&AffineForm::var("tau")).unwrap() {
            crate::polytope::LpOutcome::Optimal { value, point } => {
                assert_eq!(value, -&delta - Rat::new(3, 4));
                assert_eq!(point["phi"], delta);
            }
            other => panic!("expected optimal, got {:?}", other),
        }
    }

    #[test]
    fn sample_floor_hits_generic_vertex_first() {
        let v = sample_floor(&params39(), 7, 1).unwrap();
        assert_eq!(v, Rat::int(33) - Rat::new(37, 20000));
    }

    #[test]
    fn n38_generic_vertex_witnesses_failure() {
        let params = BoundParams::defaults_for(38).unwrap();
        let family = build_bound_family(&params).unwrap();
        let v = min_of_bounds_at(&family, &generic_vertex()).unwrap();
        assert!(v > Rat::int(38 - 6));
    }

    #[test]
    fn sampled_points_lie_in_domain() {
        use rand::SeedableRng;
        let delta = Rat::new(993, 7000);
        let (d1, d2) = domains(&delta).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = sample_domain_point(&delta, &mut rng);
            assert!(d1.contains(&p).unwrap() || d2.contains(&p).unwrap());
        }
    }
}
