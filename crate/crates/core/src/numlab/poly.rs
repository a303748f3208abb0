//! Integer quadratic and cubic polynomials.
//!
//! A `QuadPoly` is `x^t M x + b·x + c` with a symmetric integer matrix `M`.
//! Cubics are stored as sparse coefficient maps and support the shift
//! differencing `F_h(y) = F(y + h) - F(y)` that turns a cubic into an (at
//! most) quadratic polynomial.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numlab::matrix::{reduce_mod, IntMatrix};

pub const MAX_CUBIC_VARS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadPoly {
    pub quadratic: IntMatrix,
    #[serde(with = "bigint_vec")]
    pub linear: Vec<BigInt>,
    #[serde(with = "bigint_scalar")]
    pub constant: BigInt,
}

impl QuadPoly {
    pub fn new(quadratic: IntMatrix, linear: Vec<BigInt>, constant: BigInt) -> Result<Self, Error> {
        if !quadratic.is_symmetric() {
            return Err(Error::MalformedInput(
                "quadratic part must be a symmetric square matrix".into(),
            ));
        }
        if linear.len() != quadratic.rows() {
            return Err(Error::MalformedInput(
                "linear part length must match the matrix dimension".into(),
            ));
        }
        Ok(QuadPoly {
            quadratic,
            linear,
            constant,
        })
    }

    pub fn zero(n: usize) -> Self {
        QuadPoly {
            quadratic: IntMatrix::zero(n, n),
            linear: vec![BigInt::zero(); n],
            constant: BigInt::zero(),
        }
    }

    pub fn n(&self) -> usize {
        self.quadratic.rows()
    }

    pub fn eval(&self, x: &[BigInt]) -> BigInt {
        let n = self.n();
        assert_eq!(x.len(), n);
        let mut acc = self.constant.clone();
        for i in 0..n {
            acc += &self.linear[i] * &x[i];
            for j in 0..n {
                acc += self.quadratic.get(i, j) * &x[i] * &x[j];
            }
        }
        acc
    }

    /// Value modulo q with all arithmetic reduced.
    pub fn eval_mod(&self, x: &[u64], q: u64) -> u64 {
        let n = self.n();
        let mut acc: u128 = reduce_mod(&self.constant, q) as u128;
        let qq = q as u128;
        for i in 0..n {
            acc += reduce_mod(&self.linear[i], q) as u128 * (x[i] as u128) % qq;
            for j in 0..n {
                let m = reduce_mod(self.quadratic.get(i, j), q) as u128;
                acc += m * (x[i] as u128) % qq * (x[j] as u128) % qq;
            }
            acc %= qq;
        }
        (acc % qq) as u64
    }

    /// `a1·F + a2·G` exactly.
    pub fn combine(a1: i64, f: &QuadPoly, a2: i64, g: &QuadPoly) -> QuadPoly {
        assert_eq!(f.n(), g.n());
        let a1 = BigInt::from(a1);
        let a2 = BigInt::from(a2);
        QuadPoly {
            quadratic: f.quadratic.scale(&a1).add(&g.quadratic.scale(&a2)),
            linear: f
                .linear
                .iter()
                .zip(&g.linear)
                .map(|(x, y)| x * &a1 + y * &a2)
                .collect(),
            constant: &f.constant * &a1 + &g.constant * &a2,
        }
    }

    /// Content (gcd of all coefficients) of the leading quadratic form.
    pub fn leading_content(&self) -> BigInt {
        use num_integer::Integer;
        let mut g = BigInt::zero();
        for i in 0..self.n() {
            for j in 0..self.n() {
                g = g.gcd(self.quadratic.get(i, j));
            }
        }
        g
    }
}

/// Sparse cubic polynomial: exponent vector -> coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubicPoly {
    n: usize,
    coeffs: BTreeMap<Vec<u8>, BigInt>,
}

impl CubicPoly {
    pub fn new(n: usize) -> Result<Self, Error> {
        if n == 0 || n > MAX_CUBIC_VARS {
            return Err(Error::GuardExceeded(format!(
                "cubic polynomials support 1..={} variables, got {}",
                MAX_CUBIC_VARS, n
            )));
        }
        Ok(CubicPoly {
            n,
            coeffs: BTreeMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u8>, &BigInt)> {
        self.coeffs.iter()
    }

    pub fn add_term(&mut self, exps: Vec<u8>, coeff: BigInt) -> Result<(), Error> {
        if exps.len() != self.n {
            return Err(Error::MalformedInput(
                "exponent vector length must match variable count".into(),
            ));
        }
        let degree: u32 = exps.iter().map(|&e| e as u32).sum();
        if degree > 3 {
            return Err(Error::MalformedInput(format!(
                "total degree must be at most 3, got {}",
                degree
            )));
        }
        if coeff.is_zero() {
            return Ok(());
        }
        let entry = self.coeffs.entry(exps).or_insert_with(BigInt::zero);
        *entry += coeff;
        self.coeffs.retain(|_, v| !v.is_zero());
        Ok(())
    }

    pub fn from_terms(n: usize, terms: &[(Vec<u8>, i64)]) -> Result<Self, Error> {
        let mut poly = CubicPoly::new(n)?;
        for (exps, coeff) in terms {
            poly.add_term(exps.clone(), BigInt::from(*coeff))?;
        }
        Ok(poly)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(Zero::is_zero)
    }

    pub fn eval(&self, x: &[BigInt]) -> BigInt {
        assert_eq!(x.len(), self.n);
        let mut acc = BigInt::zero();
        for (exps, coeff) in &self.coeffs {
            let mut term = coeff.clone();
            for (v, &e) in x.iter().zip(exps) {
                for _ in 0..e {
                    term *= v;
                }
            }
            acc += term;
        }
        acc
    }

    pub fn eval_mod(&self, x: &[u64], q: u64) -> u64 {
        let qq = q as u128;
        let mut acc: u128 = 0;
        for (exps, coeff) in &self.coeffs {
            let mut term = reduce_mod(coeff, q) as u128;
            for (&v, &e) in x.iter().zip(exps) {
                for _ in 0..e {
                    term = term * (v as u128) % qq;
                }
            }
            acc = (acc + term) % qq;
        }
        acc as u64
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (exps, coeff) in &self.coeffs {
            let mut term = coeff.to_f64().unwrap_or(f64::NAN);
            for (&v, &e) in x.iter().zip(exps) {
                for _ in 0..e {
                    term *= v;
                }
            }
            acc += term;
        }
        acc
    }

    pub fn sub(&self, other: &CubicPoly) -> CubicPoly {
        let mut out = self.clone();
        for (exps, coeff) in &other.coeffs {
            out.add_term(exps.clone(), -coeff.clone())
                .expect("same arity");
        }
        out
    }

    /// `F(y + h)` expanded by the binomial theorem.
    pub fn shift(&self, h: &[BigInt]) -> CubicPoly {
        assert_eq!(h.len(), self.n);
        let mut out = CubicPoly::new(self.n).expect("same arity");
        for (exps, coeff) in &self.coeffs {
            // Expand prod_j (y_j + h_j)^{e_j} over sub-exponent choices.
            let mut partial: Vec<(Vec<u8>, BigInt)> = vec![(Vec::new(), coeff.clone())];
            for (j, &e) in exps.iter().enumerate() {
                let mut next = Vec::new();
                for (sub, c) in &partial {
                    for k in 0..=e {
                        let mut sub = sub.clone();
                        sub.push(k);
                        let mut c = c * binomial(e, k);
                        for _ in 0..(e - k) {
                            c *= &h[j];
                        }
                        next.push((sub, c));
                    }
                }
                partial = next;
            }
            for (sub, c) in partial {
                out.add_term(sub, c)
                    .expect("degree cannot grow under shift");
            }
        }
        out
    }
}

fn binomial(n: u8, k: u8) -> BigInt {
    let mut acc = BigInt::from(1);
    for i in 0..k {
        acc = acc * BigInt::from((n - i) as u32) / BigInt::from((i + 1) as u32);
    }
    acc
}

/// Result of differencing a cubic: the difference polynomial as a
/// `QuadPoly`, doubled when the raw cross coefficients are odd so that the
/// matrix stays integral. When `doubled` is set the stored polynomial is
/// `2·F_h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferencedQuad {
    pub poly: QuadPoly,
    pub doubled: bool,
}

impl DifferencedQuad {
    /// Exact value of the underlying difference polynomial `F_h(y)`,
    /// undoing the doubling; the result is always an integer.
    pub fn value_at(&self, y: &[BigInt]) -> BigInt {
        let v = self.poly.eval(y);
        if self.doubled {
            debug_assert!((&v % BigInt::from(2)).is_zero());
            v / BigInt::from(2)
        } else {
            v
        }
    }
}

/// `F_h(y) = F(y + h) - F(y)`, degree at most two. The quadratic part of
/// the result is the top form `h·∇F`; its symmetric matrix is half the
/// Hessian contraction, doubled to stay integral when necessary.
pub fn difference_cubic(f: &CubicPoly, h: &[BigInt]) -> Result<DifferencedQuad, Error> {
    if h.len() != f.n() {
        return Err(Error::MalformedInput(
            "difference vector length must match variable count".into(),
        ));
    }
    let n = f.n();
    let diff = f.shift(h).sub(f);
    let mut cross = BTreeMap::new();
    let mut square = vec![BigInt::zero(); n];
    let mut linear = vec![BigInt::zero(); n];
    let mut constant = BigInt::zero();
    for (exps, coeff) in diff.terms() {
        let degree: u32 = exps.iter().map(|&e| e as u32).sum();
        match degree {
            0 => constant += coeff,
            1 => {
                let i = exps.iter().position(|&e| e == 1).expect("degree one");
                linear[i] += coeff;
            }
            2 => {
                let support: Vec<usize> = (0..n).filter(|&i| exps[i] > 0).collect();
                if support.len() == 1 {
                    square[support[0]] += coeff;
                } else {
                    cross.insert((support[0], support[1]), coeff.clone());
                }
            }
            _ => {
                return Err(Error::MalformedInput(
                    "difference of a cubic exceeded degree two".into(),
                ))
            }
        }
    }
    let doubled = cross.values().any(|c: &BigInt| c.is_odd());
    let two = BigInt::from(2);
    let mut m = IntMatrix::zero(n, n);
    for i in 0..n {
        let v = if doubled {
            &square[i] * &two
        } else {
            square[i].clone()
        };
        m.set(i, i, v);
    }
    for ((i, j), c) in cross {
        let half = if doubled { c } else { c / &two };
        m.set(i, j, half.clone());
        m.set(j, i, half);
    }
    let poly = QuadPoly::new(
        m,
        if doubled {
            linear.iter().map(|v| v * &two).collect()
        } else {
            linear
        },
        if doubled { constant * two } else { constant },
    )?;
    Ok(DifferencedQuad { poly, doubled })
}

mod bigint_vec {
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        let out: Result<Vec<i64>, _> = v
            .iter()
            .map(|x| {
                x.to_i64()
                    .ok_or_else(|| serde::ser::Error::custom("coefficient exceeds i64"))
            })
            .collect();
        serde::Serialize::serialize(&out?, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Ok(v.into_iter().map(BigInt::from).collect())
    }
}

mod bigint_scalar {
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        let out = v
            .to_i64()
            .ok_or_else(|| serde::ser::Error::custom("coefficient exceeds i64"))?;
        s.serialize_i64(out)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        Ok(BigInt::from(i64::deserialize(d)?))
    }
}

// {"n": 2, "monomials": [{"exps": [3, 0], "coeff": 1}, ...]}
#[derive(Serialize, Deserialize)]
struct MonomialJson {
    exps: Vec<u8>,
    coeff: i64,
}

#[derive(Serialize, Deserialize)]
struct CubicJson {
    n: usize,
    monomials: Vec<MonomialJson>,
}

impl Serialize for CubicPoly {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let monomials: Result<Vec<MonomialJson>, _> = self
            .coeffs
            .iter()
            .map(|(exps, coeff)| {
                coeff
                    .to_i64()
                    .map(|coeff| MonomialJson {
                        exps: exps.clone(),
                        coeff,
                    })
                    .ok_or_else(|| serde::ser::Error::custom("coefficient exceeds i64"))
            })
            .collect();
        CubicJson {
            n: self.n,
            monomials: monomials?,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CubicPoly {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = CubicJson::deserialize(deserializer)?;
        let mut poly = CubicPoly::new(json.n).map_err(serde::de::Error::custom)?;
        for m in json.monomials {
            poly.add_term(m.exps, BigInt::from(m.coeff))
                .map_err(serde::de::Error::custom)?;
        }
        Ok(poly)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn difference_of_x_cubed() {
        // F = x^3, h = 1: F_h = 3x^2 + 3x + 1.
        let f = CubicPoly::from_terms(1, &[(vec![3], 1)]).unwrap();
        let d = difference_cubic(&f, &[big(1)]).unwrap();
        assert!(!d.doubled);
        assert_eq!(*d.poly.quadratic.get(0, 0), big(3));
        assert_eq!(d.poly.linear, vec![big(3)]);
        assert_eq!(d.poly.constant, big(1));
    }

    #[test]
    fn difference_with_zero_shift() {
        let f = CubicPoly::from_terms(2, &[(vec![2, 1], 5), (vec![0, 3], -2)]).unwrap();
        let d = difference_cubic(&f, &[big(0), big(0)]).unwrap();
        assert_eq!(d.poly, QuadPoly::zero(2));
    }

    #[test]
    fn difference_of_triple_product() {
        // F = x1 x2 x3, h = (1,0,0): F_h = x2 x3; stored doubled as 2 x2 x3.
        let f = CubicPoly::from_terms(3, &[(vec![1, 1, 1], 1)]).unwrap();
        let d = difference_cubic(&f, &[big(1), big(0), big(0)]).unwrap();
        assert!(d.doubled);
        assert_eq!(*d.poly.quadratic.get(1, 2), big(1));
        assert_eq!(*d.poly.quadratic.get(2, 1), big(1));
        // The undoubled value matches x2*x3 pointwise.
        let y = [big(4), big(-3), big(7)];
        assert_eq!(d.value_at(&y), big(-21));
    }

    #[test]
    fn difference_matches_definition_pointwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let n = rng.gen_range(1..=3);
            let mut f = CubicPoly::new(n).unwrap();
            for _ in 0..6 {
                let exps: Vec<u8> = {
                    let mut left = 3i32;
                    (0..n)
                        .map(|_| {
                            let e = rng.gen_range(0..=left.min(3)) as u8;
                            left -= e as i32;
                            e
                        })
                        .collect()
                };
                f.add_term(exps, big(rng.gen_range(-5..=5))).unwrap();
            }
            let h: Vec<BigInt> = (0..n).map(|_| big(rng.gen_range(-4..=4))).collect();
            let d = difference_cubic(&f, &h).unwrap();
            for _ in 0..10 {
                let y: Vec<BigInt> = (0..n).map(|_| big(rng.gen_range(-6..=6))).collect();
                let yh: Vec<BigInt> = y.iter().zip(&h).map(|(a, b)| a + b).collect();
                assert_eq!(d.value_at(&y), f.eval(&yh) - f.eval(&y));
            }
        }
    }

    #[test]
    fn chain_rule_for_shifts() {
        // F(y+h1+h2) - F(y) = F_{h1}(y+h2) + F_{h2}(y).
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.gen_range(1..=3);
            let mut f = CubicPoly::new(n).unwrap();
            for _ in 0..5 {
                let mut exps = vec![0u8; n];
                for _ in 0..rng.gen_range(0..=3) {
                    exps[rng.gen_range(0..n)] += 1;
                }
                f.add_term(exps, big(rng.gen_range(-4..=4))).unwrap();
            }
            let h1: Vec<BigInt> = (0..n).map(|_| big(rng.gen_range(-3..=3))).collect();
            let h2: Vec<BigInt> = (0..n).map(|_| big(rng.gen_range(-3..=3))).collect();
            let h12: Vec<BigInt> = h1.iter().zip(&h2).map(|(a, b)| a + b).collect();
            let d1 = difference_cubic(&f, &h1).unwrap();
            let d2 = difference_cubic(&f, &h2).unwrap();
            let d12 = difference_cubic(&f, &h12).unwrap();
            for _ in 0..8 {
                let y: Vec<BigInt> = (0..n).map(|_| big(rng.gen_range(-5..=5))).collect();
                let y2: Vec<BigInt> = y.iter().zip(&h2).map(|(a, b)| a + b).collect();
                assert_eq!(d12.value_at(&y), d1.value_at(&y2) + d2.value_at(&y));
            }
        }
    }

    #[test]
    fn quadpoly_json_round_trip() {
        let m = IntMatrix::from_rows(&[vec![1, 2], vec![2, -3]]).unwrap();
        let p = QuadPoly::new(m, vec![big(0), big(5)], big(-7)).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: QuadPoly = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn cubic_json_round_trip() {
        let f = CubicPoly::from_terms(2, &[(vec![3, 0], 1), (vec![1, 1], -4)]).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: CubicPoly = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
    }
}
