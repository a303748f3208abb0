//! Desk-scale integer matrices: Smith normal form, null counts modulo q,
//! ranks over prime fields.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Hard cap on matrix dimensions.
pub const MAX_DIM: usize = 8;

/// Guard for brute-force residue enumerations.
pub const BRUTE_GUARD: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Result<Self, Error> {
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::GuardExceeded(format!(
                "matrix dimensions must be in 1..={}, got {}x{}",
                MAX_DIM, rows, cols
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::MalformedInput(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        Ok(IntMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self, Error> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::MalformedInput("ragged matrix rows".into()));
        }
        IntMatrix::new(
            r,
            c,
            rows.iter()
                .flat_map(|row| row.iter().map(|&v| BigInt::from(v)))
                .collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![BigInt::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = BigInt::one();
        }
        IntMatrix {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut out = IntMatrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = IntMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = BigInt::zero();
                for k in 0..self.cols {
                    acc += self.get(i, k) * other.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * &v[j]).sum())
            .collect()
    }

    pub fn scale(&self, c: &BigInt) -> IntMatrix {
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        assert!(self.is_square(), "determinant needs a square matrix");
        let n = self.rows;
        let mut a: Vec<Vec<BigInt>> = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j).clone()).collect())
            .collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                    Some(r) => {
                        a.swap(k, r);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = &num / &prev;
                }
                a[i][k] = BigInt::zero();
            }
            prev = a[k][k].clone();
        }
        sign * a[n - 1][n - 1].clone()
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        for r in 0..self.rows {
            self.data.swap(r * self.cols + i, r * self.cols + j);
        }
    }

    fn row_sub(&mut self, target: usize, source: usize, factor: &BigInt) {
        for c in 0..self.cols {
            let delta = factor * self.get(source, c);
            self.data[target * self.cols + c] -= delta;
        }
    }

    fn col_sub(&mut self, target: usize, source: usize, factor: &BigInt) {
        for r in 0..self.rows {
            let delta = factor * self.get(r, source);
            self.data[r * self.cols + target] -= delta;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for c in 0..self.cols {
            let v = -self.get(i, c).clone();
            self.set(i, c, v);
        }
    }
}

// Row-major integer arrays: [[2, 1], [1, 2]].
impl Serialize for IntMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<i64>> = (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| {
                        self.get(i, j)
                            .to_i64()
                            .ok_or_else(|| serde::ser::Error::custom("matrix entry exceeds i64"))
                    })
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?;
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<i64>>::deserialize(deserializer)?;
        IntMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Smith normal form: unimodular `S`, `T` with `S·M·T = D`, `D` diagonal,
/// nonnegative, and `D[i] | D[i+1]`.
pub fn smith_normal_form(m: &IntMatrix) -> Result<(IntMatrix, IntMatrix, IntMatrix), Error> {
    if !m.is_square() {
        return Err(Error::MalformedInput(
            "smith normal form requires a square matrix".into(),
        ));
    }
    let n = m.rows();
    let mut a = m.clone();
    let mut s = IntMatrix::identity(n);
    let mut t = IntMatrix::identity(n);

    for k in 0..n {
        'reduce: loop {
            // Smallest nonzero entry of the trailing block becomes the pivot.
            let mut pivot: Option<(usize, usize)> = None;
            for i in k..n {
                for j in k..n {
                    if a.get(i, j).is_zero() {
                        continue;
                    }
                    let better = match pivot {
                        None => true,
                        Some((pi, pj)) => a.get(i, j).abs() < a.get(pi, pj).abs(),
                    };
                    if better {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                break 'reduce; // trailing block is zero
            };
            if pi != k {
                a.swap_rows(k, pi);
                s.swap_rows(k, pi);
            }
            if pj != k {
                a.swap_cols(k, pj);
                t.swap_cols(k, pj);
            }

            let mut dirty = false;
            for i in k + 1..n {
                if !a.get(i, k).is_zero() {
                    let q = a.get(i, k).div_floor(a.get(k, k));
                    a.row_sub(i, k, &q);
                    s.row_sub(i, k, &q);
                    if !a.get(i, k).is_zero() {
                        dirty = true; // remainder stays; pivot shrinks next pass
                    }
                }
            }
            for j in k + 1..n {
                if !a.get(k, j).is_zero() {
                    let q = a.get(k, j).div_floor(a.get(k, k));
                    a.col_sub(j, k, &q);
                    t.col_sub(j, k, &q);
                    if !a.get(k, j).is_zero() {
                        dirty = true;
                    }
                }
            }
            if dirty {
                continue 'reduce;
            }

            // Pivot must divide the whole trailing block for the divisibility
            // chain; folding an offending row in restarts the reduction.
            for i in k + 1..n {
                for j in k + 1..n {
                    if !(a.get(i, j) % a.get(k, k)).is_zero() {
                        let one = -BigInt::one();
                        a.row_sub(k, i, &one);
                        s.row_sub(k, i, &one);
                        continue 'reduce;
                    }
                }
            }
            break 'reduce;
        }
        if a.get(k, k).is_negative() {
            a.negate_row(k);
            s.negate_row(k);
        }
    }

    Ok((s, a, t))
}

/// The invariant factors `λ_1 | λ_2 | ... | λ_n` (all nonnegative).
pub fn invariant_factors(m: &IntMatrix) -> Result<Vec<BigInt>, Error> {
    let (_, d, _) = smith_normal_form(m)?;
    Ok((0..d.rows()).map(|i| d.get(i, i).clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullMethod {
    Smith,
    Brute,
}

impl std::str::FromStr for NullMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smith" => Ok(NullMethod::Smith),
            "brute" => Ok(NullMethod::Brute),
            other => Err(Error::InvalidParameter(format!(
                "unknown method `{}` (expected smith or brute)",
                other
            ))),
        }
    }
}

/// `#Null_q(M)`: solutions of `M x ≡ 0 (mod q)`. The Smith route returns
/// the exact product of `gcd(q, λ_i)`; the brute route counts directly and
/// is guarded by `q^n <= 10^7`.
pub fn null_count(m: &IntMatrix, q: u64, method: NullMethod) -> Result<BigInt, Error> {
    if !m.is_square() {
        return Err(Error::MalformedInput(
            "null count needs a square matrix".into(),
        ));
    }
    if q == 0 {
        return Err(Error::InvalidParameter("modulus must be positive".into()));
    }
    match method {
        NullMethod::Smith => {
            let q = BigInt::from(q);
            let mut acc = BigInt::one();
            for lambda in invariant_factors(m)? {
                acc *= q.gcd(&lambda);
            }
            Ok(acc)
        }
        NullMethod::Brute => Ok(BigInt::from(count_solutions_mod(m, q, &vec![0; m.rows()])?)),
    }
}

/// Brute-force count of `M x ≡ rhs (mod q)`, guarded by `q^n <= 10^7`.
pub fn count_solutions_mod(m: &IntMatrix, q: u64, rhs: &[u64]) -> Result<u64, Error> {
    let n = m.cols();
    if rhs.len() != m.rows() {
        return Err(Error::MalformedInput("rhs length mismatch".into()));
    }
    let total = checked_pow(q, n as u32)?;
    let mq: Vec<Vec<u64>> = (0..m.rows())
        .map(|i| (0..n).map(|j| reduce_mod(m.get(i, j), q)).collect())
        .collect();
    let rhs: Vec<u64> = rhs.iter().map(|&v| v % q).collect();
    let mut count = 0u64;
    let mut x = vec![0u64; n];
    for idx in 0..total {
        let mut rem = idx;
        for slot in x.iter_mut() {
            *slot = rem % q;
            rem /= q;
        }
        let ok = (0..m.rows()).all(|i| {
            let mut acc = 0u64;
            for j in 0..n {
                acc = (acc + mq[i][j] * x[j]) % q;
            }
            acc == rhs[i]
        });
        if ok {
            count += 1;
        }
    }
    Ok(count)
}

pub(crate) fn checked_pow(q: u64, n: u32) -> Result<u64, Error> {
    let mut acc: u64 = 1;
    for _ in 0..n {
        acc = acc
            .checked_mul(q)
            .filter(|&v| v <= BRUTE_GUARD)
            .ok_or_else(|| {
                Error::GuardExceeded(format!("q^n = {}^{} exceeds {}", q, n, BRUTE_GUARD))
            })?;
    }
    Ok(acc)
}

pub(crate) fn reduce_mod(v: &BigInt, q: u64) -> u64 {
    let q_big = BigInt::from(q);
    let r = v.mod_floor(&q_big);
    r.to_u64().expect("residue fits in u64")
}

/// Rank of `M` over the prime field `F_p` by Gaussian elimination.
pub fn rank_mod_p(m: &IntMatrix, p: u64) -> usize {
    let rows = m.rows();
    let cols = m.cols();
    let mut a: Vec<Vec<u64>> = (0..rows)
        .map(|i| (0..cols).map(|j| reduce_mod(m.get(i, j), p)).collect())
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, pivot);
        let inv = mod_inverse(a[rank][col], p);
        for j in col..cols {
            a[rank][j] = a[rank][j] * inv % p;
        }
        for r in 0..rows {
            if r != rank && a[r][col] != 0 {
                let factor = a[r][col];
                for j in col..cols {
                    a[r][j] = (a[r][j] + (p - factor) * a[rank][j]) % p;
                }
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

fn mod_inverse(a: u64, p: u64) -> u64 {
    // Fermat; p is prime in every caller.
    mod_pow(a, p - 2, p)
}

pub(crate) fn mod_pow(base: u64, mut exp: u64, modulus: u64) -> u64 {
    let m = modulus as u128;
    let mut acc: u128 = 1;
    let mut b = (base % modulus) as u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

/// Divisibility test used by the Smith-form exponential-sum bound:
/// 1 iff `gcd(q, λ_i)` divides `(T^t v)_i` for every `i`.
pub fn delta_q(m: &IntMatrix, q: u64, v: &[BigInt]) -> Result<u8, Error> {
    if !m.is_square() || v.len() != m.rows() {
        return Err(Error::MalformedInput(
            "delta_q needs a square matrix and a matching vector".into(),
        ));
    }
    let (_, d, t) = smith_normal_form(m)?;
    let tv = t.transpose().mul_vec(v);
    let q_big = BigInt::from(q);
    for i in 0..m.rows() {
        let lam_q = q_big.gcd(d.get(i, i));
        if !(&tv[i] % &lam_q).is_zero() {
            return Ok(0);
        }
    }
    Ok(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows).unwrap()
    }

    fn check_snf(m: &IntMatrix) {
        let (s, d, t) = smith_normal_form(m).unwrap();
        assert_eq!(s.mul(m).mul(&t), d, "S·M·T = D fails");
        assert_eq!(s.det().abs(), BigInt::one(), "S not unimodular");
        assert_eq!(t.det().abs(), BigInt::one(), "T not unimodular");
        let n = m.rows();
        for i in 0..n {
            assert!(!d.get(i, i).is_negative());
            for j in 0..n {
                if i != j {
                    assert!(d.get(i, j).is_zero(), "off-diagonal residue");
                }
            }
            if i + 1 < n && !d.get(i, i).is_zero() {
                assert!(
                    (d.get(i + 1, i + 1) % d.get(i, i)).is_zero(),
                    "divisibility chain broken"
                );
            }
            if i + 1 < n && d.get(i, i).is_zero() {
                assert!(d.get(i + 1, i + 1).is_zero());
            }
        }
    }

    #[test]
    fn snf_identity_and_zero() {
        let id = IntMatrix::identity(3);
        let (s, d, t) = smith_normal_form(&id).unwrap();
        assert_eq!(d, id);
        assert_eq!(s, IntMatrix::identity(3));
        assert_eq!(t, IntMatrix::identity(3));
        let z = mat(&[vec![0, 0], vec![0, 0]]);
        let (_, d, _) = smith_normal_form(&z).unwrap();
        assert_eq!(d, z);
    }

    #[test]
    fn snf_2x2_example() {
        let m = mat(&[vec![2, 1], vec![1, 2]]);
        let (_, d, _) = smith_normal_form(&m).unwrap();
        assert_eq!(*d.get(0, 0), BigInt::one());
        assert_eq!(*d.get(1, 1), BigInt::from(3));
        check_snf(&m);
    }

    #[test]
    fn snf_random_small_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..=4);
            let rows: Vec<Vec<i64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-20..=20)).collect())
                .collect();
            check_snf(&mat(&rows));
        }
    }

    #[test]
    fn null_count_examples() {
        let id = IntMatrix::identity(2);
        assert_eq!(
            null_count(&id, 12, NullMethod::Smith).unwrap(),
            BigInt::one()
        );
        let z = mat(&[vec![0, 0], vec![0, 0]]);
        assert_eq!(
            null_count(&z, 5, NullMethod::Brute).unwrap(),
            BigInt::from(25)
        );
        let diag = mat(&[vec![2, 0], vec![0, 4]]);
        assert_eq!(
            null_count(&diag, 8, NullMethod::Smith).unwrap(),
            BigInt::from(8)
        );
        assert_eq!(
            null_count(&diag, 8, NullMethod::Brute).unwrap(),
            BigInt::from(8)
        );
    }

    #[test]
    fn null_methods_agree_randomly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..150 {
            let n = rng.gen_range(1..=3);
            let q = rng.gen_range(1..=40u64);
            let rows: Vec<Vec<i64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(-15..=15)).collect())
                .collect();
            let m = mat(&rows);
            assert_eq!(
                null_count(&m, q, NullMethod::Smith).unwrap(),
                null_count(&m, q, NullMethod::Brute).unwrap(),
                "disagreement for {:?} mod {}",
                rows,
                q
            );
        }
    }

    #[test]
    fn brute_guard_is_hard() {
        let m = IntMatrix::identity(4);
        assert!(matches!(
            null_count(&m, 100, NullMethod::Brute),
            Err(Error::GuardExceeded(_))
        ));
    }

    #[test]
    fn delta_q_examples() {
        let id = IntMatrix::identity(2);
        for v in [[0i64, 0], [3, -5], [1, 0]] {
            let vv: Vec<BigInt> = v.iter().map(|&x| BigInt::from(x)).collect();
            assert_eq!(delta_q(&id, 6, &vv).unwrap(), 1);
        }
        let m = mat(&[vec![2, 0], vec![0, 0]]);
        let zero = vec![BigInt::zero(), BigInt::zero()];
        assert_eq!(delta_q(&m, 4, &zero).unwrap(), 1);
        let v = vec![BigInt::one(), BigInt::zero()];
        assert_eq!(delta_q(&m, 4, &v).unwrap(), 0);
    }

    #[test]
    fn rank_mod_p_basics() {
        let m = mat(&[vec![1, 2], vec![2, 4]]);
        assert_eq!(rank_mod_p(&m, 5), 1);
        assert_eq!(rank_mod_p(&m, 3), 1);
        let id = IntMatrix::identity(3);
        assert_eq!(rank_mod_p(&id, 7), 3);
        // 2I vanishes mod 2.
        let two = id.scale(&BigInt::from(2));
        assert_eq!(rank_mod_p(&two, 2), 0);
    }

    #[test]
    fn determinant_matches_cofactor_small() {
        let m = mat(&[vec![3, -1, 2], vec![0, 4, 1], vec![-2, 5, 0]]);
        // Cofactor expansion by hand: 3(0-5) +1(0+2) +2(0+8) = -15+2+16 = 3.
        assert_eq!(m.det(), BigInt::from(3));
    }
}
