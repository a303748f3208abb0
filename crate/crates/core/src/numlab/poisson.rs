//! Numerical check of the Poisson summation identity
//! `T(q, z) = q^{-n} sum_m S(q; m) I(z; m/q)`.
//!
//! The left side is a direct lattice sum against the smooth compactly
//! supported weight; the right side combines brute-force complete sums
//! with midpoint quadrature of the exponential integral. The weight is the
//! standard product bump `gamma(rho^{-1}(x - x0))` with
//! `gamma(x) = prod_j exp(-1/(1 - x_j^2))` on the open unit hypercube.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numlab::expsum::{exp_sum_averaged, phase_table, ComplexVal, TERM_ERR};
use crate::numlab::poly::QuadPoly;
use crate::rat::Rat;

/// One axis factor of the bump.
fn bump_axis(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// `gamma(x) = prod_j exp(-1/(1 - x_j^2))`, supported in the open unit
/// hypercube.
pub fn gamma_bump(x: &[f64]) -> f64 {
    x.iter().map(|&t| bump_axis(t)).product()
}

/// `omega(x) = gamma(rho^{-1}(x - x0))`.
pub fn omega_weight(x: &[f64], rho: f64, x0: &[f64]) -> f64 {
    let scaled: Vec<f64> = x.iter().zip(x0).map(|(&v, &c)| (v - c) / rho).collect();
    gamma_bump(&scaled)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonReport {
    pub lhs: ComplexVal,
    pub rhs: ComplexVal,
    pub abs_diff: f64,
    /// Change of the right side under the final quadrature refinement.
    pub quadrature_shift: f64,
}

pub struct PoissonConfig {
    pub q: u64,
    pub z: (Rat, Rat),
    pub big_p: u64,
    pub m_cut: i64,
    pub rho: Rat,
    pub x0: Vec<Rat>,
}

/// Checks Poisson summation for the pair `(F, G)` at modulus `q` and
/// frequency offset `z`. Supports `n <= 2`; the sampled support may not
/// exceed 200 lattice points per axis.
pub fn poisson_check(
    f: &QuadPoly,
    g: &QuadPoly,
    cfg: &PoissonConfig,
) -> Result<PoissonReport, Error> {
    let n = f.n();
    if g.n() != n {
        return Err(Error::MalformedInput("F and G must share arity".into()));
    }
    if n > 2 {
        return Err(Error::GuardExceeded("poisson check supports n <= 2".into()));
    }
    if cfg.x0.len() != n {
        return Err(Error::MalformedInput("x0 length must match arity".into()));
    }
    if cfg.q == 0 || cfg.big_p == 0 {
        return Err(Error::InvalidParameter("q and P must be positive".into()));
    }
    let rho = cfg.rho.to_f64();
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter("rho must be positive".into()));
    }
    let p_f = cfg.big_p as f64;
    if 2.0 * p_f * rho > 200.0 {
        return Err(Error::GuardExceeded(format!(
            "P * support width = {} exceeds 200 points per axis",
            2.0 * p_f * rho
        )));
    }
    let x0: Vec<f64> = cfg.x0.iter().map(Rat::to_f64).collect();
    let z = (cfg.z.0.to_f64(), cfg.z.1.to_f64());

    let lhs = direct_sum(f, g, cfg.q, z, cfg.big_p, rho, &x0)?;

    // The integrand oscillates at up to m_cut/q cycles per unit across a
    // support of width 2 P rho, so the midpoint grid must resolve that
    // frequency; eight nodes per cycle keeps the rule in its spectral
    // regime for the smooth bump.
    let width = 2.0 * p_f * rho;
    let max_freq = cfg.m_cut.unsigned_abs() as f64 / cfg.q as f64;
    let base_grid = (8.0 * width * max_freq).ceil().max(256.0) as usize;
    if base_grid > 4096 {
        return Err(Error::GuardExceeded(format!(
            "m_cut/q = {} over a support of width {} needs a {}-point grid per axis",
            max_freq, width, base_grid
        )));
    }

    // The complete sums do not depend on the grid; compute them once.
    let sums = averaged_sums(f, g, cfg)?;

    // rhs = q^{-n} sum_{|m| <= m_cut} S(q; m) I(z; m/q); doubling the grid
    // must not move it.
    let rhs_coarse = poisson_rhs(f, g, cfg, &sums, base_grid)?;
    let rhs = poisson_rhs(f, g, cfg, &sums, 2 * base_grid)?;
    let quadrature_shift = rhs.sub(&rhs_coarse).abs();
    let scale = lhs.abs().max(1.0);
    if quadrature_shift > 1e-7 * scale {
        return Err(Error::QuadratureDiverged(format!(
            "rhs moved by {} between refinements",
            quadrature_shift
        )));
    }
    let abs_diff = lhs.sub(&rhs).abs();
    Ok(PoissonReport {
        lhs,
        rhs,
        abs_diff,
        quadrature_shift,
    })
}

/// `S(q; m)` for every `m` in the cutoff box, indexed row-major over
/// `(m_1, ..., m_n)` with each coordinate running `-m_cut..=m_cut`.
fn averaged_sums(
    f: &QuadPoly,
    g: &QuadPoly,
    cfg: &PoissonConfig,
) -> Result<Vec<ComplexVal>, Error> {
    let n = f.n();
    let m_count = (2 * cfg.m_cut + 1) as usize;
    let total = m_count.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    let mut m = vec![0i64; n];
    for idx in 0..total {
        let mut rem = idx;
        for slot in m.iter_mut() {
            *slot = (rem % m_count) as i64 - cfg.m_cut;
            rem /= m_count;
        }
        out.push(exp_sum_averaged(f, g, cfg.q, &m)?);
    }
    Ok(out)
}

/// `T(q, z) = sum*_a sum_{y in Z^n} omega(y/P) e((a1/q + z1)F(y) + ...)`.
fn direct_sum(
    f: &QuadPoly,
    g: &QuadPoly,
    q: u64,
    z: (f64, f64),
    big_p: u64,
    rho: f64,
    x0: &[f64],
) -> Result<ComplexVal, Error> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_traits::ToPrimitive;

    let n = f.n();
    let p_f = big_p as f64;
    let ranges: Vec<(i64, i64)> = (0..n)
        .map(|j| {
            let lo = (p_f * (x0[j] - rho)).ceil() as i64;
            let hi = (p_f * (x0[j] + rho)).floor() as i64;
            (lo, hi)
        })
        .collect();
    let table = phase_table(q);
    let mut acc = ComplexVal::zero();
    let mut y = vec![0i64; n];
    let mut idx = vec![0i64; n];
    for (j, r) in ranges.iter().enumerate() {
        idx[j] = r.0;
    }
    'outer: loop {
        y.copy_from_slice(&idx);
        let xf: Vec<f64> = y.iter().map(|&v| v as f64 / p_f).collect();
        let w = omega_weight(&xf, rho, x0);
        if w != 0.0 {
            let yb: Vec<BigInt> = y.iter().map(|&v| BigInt::from(v)).collect();
            let fv = f.eval(&yb);
            let gv = g.eval(&yb);
            let frac = z.0 * fv.to_f64().unwrap() + z.1 * gv.to_f64().unwrap();
            for a1 in 0..q {
                for a2 in 0..q {
                    if a1.gcd(&a2).gcd(&q) != 1 {
                        continue;
                    }
                    let residue = ((&fv * BigInt::from(a1) + &gv * BigInt::from(a2))
                        .mod_floor(&BigInt::from(q)))
                    .to_u64()
                    .unwrap();
                    let (c0, s0) = table[residue as usize];
                    let theta = 2.0 * std::f64::consts::PI * frac;
                    let (c1, s1) = (theta.cos(), theta.sin());
                    let re = c0 * c1 - s0 * s1;
                    let im = c0 * s1 + s0 * c1;
                    // The fractional phase theta can be large; its rounding
                    // scales with |theta|.
                    let term_err = w * (TERM_ERR + 4.0 * f64::EPSILON * (1.0 + theta.abs()));
                    acc.add_term(w * re, w * im, term_err);
                }
            }
        }
        // Advance the odometer.
        for j in 0..n {
            idx[j] += 1;
            if idx[j] <= ranges[j].1 {
                continue 'outer;
            }
            idx[j] = ranges[j].0;
        }
        break;
    }
    Ok(acc)
}

/// The Poisson side on a fixed midpoint grid with `grid` nodes per axis.
fn poisson_rhs(
    f: &QuadPoly,
    g: &QuadPoly,
    cfg: &PoissonConfig,
    sums: &[ComplexVal],
    grid: usize,
) -> Result<ComplexVal, Error> {
    let n = f.n();
    let q = cfg.q;
    let p_f = cfg.big_p as f64;
    let rho = cfg.rho.to_f64();
    let x0: Vec<f64> = cfg.x0.iter().map(Rat::to_f64).collect();
    let z = (cfg.z.0.to_f64(), cfg.z.1.to_f64());
    let m_cut = cfg.m_cut;
    let m_count = (2 * m_cut + 1) as usize;

    // Integration box: the support of omega(x/P) per axis.
    let lo: Vec<f64> = (0..n).map(|j| p_f * (x0[j] - rho)).collect();
    let hi: Vec<f64> = (0..n).map(|j| p_f * (x0[j] + rho)).collect();
    let h: Vec<f64> = (0..n).map(|j| (hi[j] - lo[j]) / grid as f64).collect();
    let nodes: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..grid).map(|i| lo[j] + (i as f64 + 0.5) * h[j]).collect())
        .collect();

    // g-values on the grid: omega(x/P) e(z1 F(x) + z2 G(x)).
    let eval_g = |x: &[f64]| -> (f64, f64) {
        let xf: Vec<f64> = x.iter().map(|&v| v / p_f).collect();
        let w = omega_weight(&xf, rho, &x0);
        if w == 0.0 {
            return (0.0, 0.0);
        }
        let fv = quad_f64(f, x);
        let gv = quad_f64(g, x);
        let theta = 2.0 * std::f64::consts::PI * (z.0 * fv + z.1 * gv);
        (w * theta.cos(), w * theta.sin())
    };

    // Per-axis phase factors e(-(m_j/q) x_j) for every m_j.
    let phases: Vec<Vec<Vec<(f64, f64)>>> = (0..n)
        .map(|j| {
            (-m_cut..=m_cut)
                .map(|mj| {
                    nodes[j]
                        .iter()
                        .map(|&xj| {
                            let theta = -2.0 * std::f64::consts::PI * (mj as f64) * xj / q as f64;
                            (theta.cos(), theta.sin())
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let cell = h.iter().product::<f64>();
    let mut rhs = ComplexVal::zero();
    let qn_inv = (q as f64).powi(-(n as i32));

    if n == 1 {
        let gv: Vec<(f64, f64)> = nodes[0].iter().map(|&x| eval_g(&[x])).collect();
        for mi in 0..m_count {
            let mut ire = 0.0;
            let mut iim = 0.0;
            for i in 0..grid {
                let (gr, gi) = gv[i];
                let (pr, pi) = phases[0][mi][i];
                ire += gr * pr - gi * pi;
                iim += gr * pi + gi * pr;
            }
            let integral = ComplexVal {
                re: ire * cell,
                im: iim * cell,
                err: grid as f64 * cell * 4.0 * f64::EPSILON,
            };
            let term = sums[mi].mul(&integral).scale(qn_inv);
            rhs = rhs.add(&term);
        }
    } else {
        let mut gv = vec![(0.0, 0.0); grid * grid];
        for i1 in 0..grid {
            for i2 in 0..grid {
                gv[i1 * grid + i2] = eval_g(&[nodes[0][i1], nodes[1][i2]]);
            }
        }
        // Contract axis 1 against every m1: A[m1][i2] = sum_i1 g * u1.
        let mut a = vec![(0.0, 0.0); m_count * grid];
        for (mi, row) in phases[0].iter().enumerate() {
            for i2 in 0..grid {
                let mut re = 0.0;
                let mut im = 0.0;
                for i1 in 0..grid {
                    let (gr, gi) = gv[i1 * grid + i2];
                    let (pr, pi) = row[i1];
                    re += gr * pr - gi * pi;
                    im += gr * pi + gi * pr;
                }
                a[mi * grid + i2] = (re, im);
            }
        }
        for mi1 in 0..m_count {
            for mi2 in 0..m_count {
                let mut re = 0.0;
                let mut im = 0.0;
                for i2 in 0..grid {
                    let (ar, ai) = a[mi1 * grid + i2];
                    let (pr, pi) = phases[1][mi2][i2];
                    re += ar * pr - ai * pi;
                    im += ar * pi + ai * pr;
                }
                let integral = ComplexVal {
                    re: re * cell,
                    im: im * cell,
                    err: (grid * grid) as f64 * cell * 4.0 * f64::EPSILON,
                };
                // m_1 varies fastest in the precomputed table.
                let term = sums[mi2 * m_count + mi1].mul(&integral).scale(qn_inv);
                rhs = rhs.add(&term);
            }
        }
    }
    Ok(rhs)
}

fn quad_f64(p: &QuadPoly, x: &[f64]) -> f64 {
    use num_traits::ToPrimitive;
    let n = p.n();
    let mut acc = p.constant.to_f64().unwrap_or(0.0);
    for i in 0..n {
        acc += p.linear[i].to_f64().unwrap_or(0.0) * x[i];
        for j in 0..n {
            acc += p.quadratic.get(i, j).to_f64().unwrap_or(0.0) * x[i] * x[j];
        }
    }
    acc
}
