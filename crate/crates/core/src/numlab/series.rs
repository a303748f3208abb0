//! Truncated singular series and the toy singular integral.
//!
//! `A(q) = q^{-n} sum*_{a mod q} S_{a,q}` with
//! `S_{a,q} = sum_{x mod q} e_q(a1 F(x) + a2 G(x))`, and the partial sum
//! `SS(R) = sum_{q <= R} A(q)`, all brute force. The singular integral is a
//! tensor-grid quadrature of the oscillatory double integral against the
//! compactly supported weight.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numlab::expsum::{phase_table, ComplexVal, TERM_ERR};
use crate::numlab::poisson::omega_weight;
use crate::numlab::poly::CubicPoly;
use crate::rat::Rat;

/// Guard on the total brute-force work `sum_{q <= R} q^{n+2}`.
pub const SERIES_GUARD: u64 = 1_000_000_000;

pub const MAX_SERIES_VARS: usize = 3;

/// `A(q)`: the local density term at modulus `q`, by brute force over the
/// numerators and the residue cube. Guarded by `q^{n+2} <= 10^9`.
pub fn local_density(f: &CubicPoly, g: &CubicPoly, q: u64) -> Result<ComplexVal, Error> {
    let n = f.n();
    if g.n() != n {
        return Err(Error::MalformedInput("F and G must share arity".into()));
    }
    if n > MAX_SERIES_VARS {
        return Err(Error::GuardExceeded(format!(
            "singular series supports n <= {}, got {}",
            MAX_SERIES_VARS, n
        )));
    }
    if q == 0 {
        return Err(Error::InvalidParameter("q must be positive".into()));
    }
    let cost = cost_of(q, n)?;
    if cost > SERIES_GUARD {
        return Err(Error::GuardExceeded(format!(
            "q^(n+2) = {} exceeds {}",
            cost, SERIES_GUARD
        )));
    }
    let qn = q.pow(n as u32);
    let mut fu = Vec::with_capacity(qn as usize);
    let mut gu = Vec::with_capacity(qn as usize);
    let mut x = vec![0u64; n];
    for idx in 0..qn {
        let mut rem = idx;
        for slot in x.iter_mut() {
            *slot = rem % q;
            rem /= q;
        }
        fu.push(f.eval_mod(&x, q));
        gu.push(g.eval_mod(&x, q));
    }
    let table = phase_table(q);
    let mut acc = ComplexVal::zero();
    for a1 in 0..q {
        for a2 in 0..q {
            if a1.gcd(&a2).gcd(&q) != 1 {
                continue;
            }
            let mut hist = vec![0u32; q as usize];
            for i in 0..qn as usize {
                let val = (a1 * fu[i] % q + a2 * gu[i]) % q;
                hist[val as usize] += 1;
            }
            for (k, &count) in hist.iter().enumerate() {
                if count == 0 {
                    continue;
                }
                let (c, s) = table[k];
                let w = count as f64;
                acc.add_term(w * c, w * s, w * TERM_ERR + 2.0 * f64::EPSILON * w);
            }
        }
    }
    Ok(acc.scale((q as f64).powi(-(n as i32))))
}

fn cost_of(q: u64, n: usize) -> Result<u64, Error> {
    let mut acc: u64 = 1;
    for _ in 0..n + 2 {
        acc = acc
            .checked_mul(q)
            .ok_or_else(|| Error::GuardExceeded("q^(n+2) overflows".into()))?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub q: u64,
    pub a_q: ComplexVal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesReport {
    /// `SS(R) = sum_{q <= R} A(q)` (real part; the series is real).
    pub value: f64,
    pub err: f64,
    pub terms: Vec<SeriesTerm>,
}

/// Partial sums of the singular series up to `R`, with the per-`q` terms
/// reported for multiplicativity testing.
pub fn singular_series_partial(
    f: &CubicPoly,
    g: &CubicPoly,
    r: u64,
) -> Result<SeriesReport, Error> {
    let n = f.n();
    let mut total_cost: u64 = 0;
    for q in 1..=r {
        total_cost = total_cost
            .checked_add(cost_of(q, n)?)
            .ok_or_else(|| Error::GuardExceeded("series cost overflows".into()))?;
    }
    if total_cost > SERIES_GUARD {
        return Err(Error::GuardExceeded(format!(
            "sum of q^(n+2) up to {} is {} which exceeds {}",
            r, total_cost, SERIES_GUARD
        )));
    }
    let mut value = 0.0;
    let mut err = 0.0;
    let mut terms = Vec::with_capacity(r as usize);
    for q in 1..=r {
        let a_q = local_density(f, g, q)?;
        value += a_q.re;
        err += a_q.err + a_q.im.abs();
        terms.push(SeriesTerm { q, a_q });
    }
    Ok(SeriesReport { value, err, terms })
}

/// Tensor-grid quadrature of
/// `J(R) = int_{|z| < R} int omega(x) e(z1 F(x) + z2 G(x)) dx dz`
/// with `omega(x) = gamma(rho^{-1}(x - x0))`. The inner `z` box is factored
/// per axis, which is exactly the midpoint rule on the full product grid.
pub fn singular_integral(
    f: &CubicPoly,
    g: &CubicPoly,
    r: &Rat,
    rho: &Rat,
    x0: &[Rat],
    grid: usize,
) -> Result<ComplexVal, Error> {
    let n = f.n();
    if g.n() != n || x0.len() != n {
        return Err(Error::MalformedInput("F, G and x0 must share arity".into()));
    }
    if n > MAX_SERIES_VARS {
        return Err(Error::GuardExceeded(format!(
            "singular integral supports n <= {}, got {}",
            MAX_SERIES_VARS, n
        )));
    }
    if grid == 0 || grid > 200 {
        return Err(Error::GuardExceeded(
            "grid must be between 1 and 200 points per axis".into(),
        ));
    }
    let r_f = r.to_f64();
    let rho_f = rho.to_f64();
    if !(r_f > 0.0) || !(rho_f > 0.0) {
        return Err(Error::InvalidParameter("R and rho must be positive".into()));
    }
    let x0_f: Vec<f64> = x0.iter().map(Rat::to_f64).collect();

    let hz = 2.0 * r_f / grid as f64;
    let z_nodes: Vec<f64> = (0..grid).map(|i| -r_f + (i as f64 + 0.5) * hz).collect();
    let hx: f64 = 2.0 * rho_f / grid as f64;
    let x_axis = |j: usize, i: usize| -> f64 { x0_f[j] - rho_f + (i as f64 + 0.5) * hx };

    let mut acc = ComplexVal::zero();
    let total = (grid as u64).pow(n as u32);
    let mut idx = vec![0usize; n];
    for flat in 0..total {
        let mut rem = flat;
        for slot in idx.iter_mut() {
            *slot = (rem % grid as u64) as usize;
            rem /= grid as u64;
        }
        let x: Vec<f64> = (0..n).map(|j| x_axis(j, idx[j])).collect();
        let w = omega_weight(&x, rho_f, &x0_f);
        if w == 0.0 {
            continue;
        }
        let fv = f.eval_f64(&x);
        let gv = g.eval_f64(&x);
        // sum over the z grid factors per axis.
        let (s1r, s1i) = phase_line_sum(&z_nodes, fv);
        let (s2r, s2i) = phase_line_sum(&z_nodes, gv);
        let re = s1r * s2r - s1i * s2i;
        let im = s1r * s2i + s1i * s2r;
        acc.add_term(
            w * re,
            w * im,
            w * (2.0 * grid as f64) * (TERM_ERR + 4.0 * f64::EPSILON),
        );
    }
    let cell = hz * hz * hx.powi(n as i32);
    Ok(acc.scale(cell))
}

fn phase_line_sum(z_nodes: &[f64], t: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for &z in z_nodes {
        let theta = 2.0 * std::f64::consts::PI * z * t;
        re += theta.cos();
        im += theta.sin();
    }
    (re, im)
}
