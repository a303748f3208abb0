//! Exact-rational primal simplex with Bland's anti-cycling rule.
//!
//! Solves `maximize c·x subject to A x <= b` with free variables. Free
//! variables are split as differences of nonnegative parts, rows are
//! normalized to nonnegative right-hand sides, and a phase-one pass with
//! artificial variables decides feasibility. Every pivot is an exact
//! rational operation; Bland's rule guarantees termination.

use crate::rat::Rat;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value at the optimum (`None` unless optimal).
    pub value: Option<Rat>,
    /// A maximizing assignment for the original free variables.
    pub point: Option<Vec<Rat>>,
}

impl LpSolution {
    fn infeasible() -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            value: None,
            point: None,
        }
    }

    fn unbounded() -> Self {
        LpSolution {
            status: LpStatus::Unbounded,
            value: None,
            point: None,
        }
    }
}

/// One inequality `coeffs · x <= rhs` over the dense variable order.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<Rat>,
    pub rhs: Rat,
}

struct Tableau {
    /// Rows in basic canonical form; last entry of each row is the rhs.
    rows: Vec<Vec<Rat>>,
    /// Reduced-cost row; last entry is minus the current objective value.
    obj: Vec<Rat>,
    basis: Vec<usize>,
    ncols: usize,
    first_artificial: usize,
}

impl Tableau {
    /// Builds the phase-one tableau. Columns are laid out as
    /// `[u_1..u_d, v_1..v_d, s_1..s_m, a_1..a_m]` with `x_j = u_j - v_j`.
    fn new(rows_in: &[Row], dim: usize) -> Tableau {
        let m = rows_in.len();
        let ncols = 2 * dim + 2 * m;
        let first_artificial = 2 * dim + m;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        for (i, row) in rows_in.iter().enumerate() {
            let mut r = vec![Rat::zero(); ncols + 1];
            let negate = row.rhs.is_negative();
            for (j, c) in row.coeffs.iter().enumerate() {
                let c = if negate { -c } else { c.clone() };
                r[2 * j + 1] = -&c;
                r[2 * j] = c;
            }
            r[2 * dim + i] = if negate { -Rat::one() } else { Rat::one() };
            r[ncols] = if negate { -&row.rhs } else { row.rhs.clone() };
            if negate {
                // Slack enters with -1, so an artificial carries the basis.
                r[first_artificial + i] = Rat::one();
                basis.push(first_artificial + i);
            } else {
                basis.push(2 * dim + i);
            }
            rows.push(r);
        }
        Tableau {
            rows,
            obj: vec![Rat::zero(); ncols + 1],
            basis,
            ncols,
            first_artificial,
        }
    }

    /// Installs cost vector `c` (length `ncols`) and prices out the basis.
    fn set_costs(&mut self, costs: &[Rat]) {
        self.obj = costs.to_vec();
        self.obj.push(Rat::zero());
        for i in 0..self.rows.len() {
            let cb = costs[self.basis[i]].clone();
            if !cb.is_zero() {
                for j in 0..=self.ncols {
                    let delta = &cb * &self.rows[i][j];
                    self.obj[j] -= &delta;
                }
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.rows[row][col].clone();
        let inv = pivot.recip();
        for entry in self.rows[row].iter_mut() {
            *entry = &*entry * &inv;
        }
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col].clone();
            if factor.is_zero() {
                continue;
            }
            for j in 0..=self.ncols {
                let delta = &factor * &self.rows[row][j];
                self.rows[i][j] -= &delta;
            }
        }
        let factor = self.obj[col].clone();
        if !factor.is_zero() {
            for j in 0..=self.ncols {
                let delta = &factor * &self.rows[row][j];
                self.obj[j] -= &delta;
            }
        }
        self.basis[row] = col;
    }

    /// Runs primal simplex on the current cost row. `allow` filters the
    /// columns that may enter the basis. Returns false on unboundedness.
    fn optimize(&mut self, allow: impl Fn(usize) -> bool) -> bool {
        loop {
            // Bland: smallest-index column with positive reduced cost.
            let entering = (0..self.ncols).find(|&j| allow(j) && self.obj[j].is_positive());
            let Some(col) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, Rat)> = None;
            for i in 0..self.rows.len() {
                if !self.rows[i][col].is_positive() {
                    continue;
                }
                let ratio = &self.rows[i][self.ncols] / &self.rows[i][col];
                let better = match &leaving {
                    None => true,
                    Some((best_i, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*best_i])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            match leaving {
                Some((row, _)) => self.pivot(row, col),
                None => return false,
            }
        }
    }

    fn objective_value(&self) -> Rat {
        -&self.obj[self.ncols]
    }

    /// After a feasible phase one, pivots every basic artificial out of the
    /// basis; rows that cannot release theirs are redundant and dropped.
    /// Artificials then sit at zero forever once phase two bars their
    /// columns from entering.
    fn expel_artificials(&mut self) {
        let first_artificial = self.first_artificial;
        let mut redundant = Vec::new();
        for i in 0..self.rows.len() {
            if self.basis[i] < first_artificial {
                continue;
            }
            match (0..first_artificial).find(|&j| !self.rows[i][j].is_zero()) {
                Some(j) => self.pivot(i, j),
                None => redundant.push(i),
            }
        }
        for &i in redundant.iter().rev() {
            self.rows.remove(i);
            self.basis.remove(i);
        }
    }

    fn point(&self, dim: usize) -> Vec<Rat> {
        let mut vals = vec![Rat::zero(); self.ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            vals[b] = self.rows[i][self.ncols].clone();
        }
        (0..dim).map(|j| &vals[2 * j] - &vals[2 * j + 1]).collect()
    }
}

/// Maximizes `objective · x` over `{x : rows}` with `x` free.
pub fn maximize(rows: &[Row], objective: &[Rat]) -> LpSolution {
    let dim = objective.len();
    debug_assert!(rows.iter().all(|r| r.coeffs.len() == dim));
    let mut tab = Tableau::new(rows, dim);

    // Phase one: maximize minus the sum of artificials.
    let mut phase1 = vec![Rat::zero(); tab.ncols];
    for c in phase1.iter_mut().skip(tab.first_artificial) {
        *c = -Rat::one();
    }
    tab.set_costs(&phase1);
    let ok = tab.optimize(|_| true);
    debug_assert!(ok, "phase one is bounded by construction");
    if tab.objective_value().is_negative() {
        return LpSolution::infeasible();
    }
    tab.expel_artificials();

    // Phase two: artificials stay at zero and may not re-enter.
    let mut phase2 = vec![Rat::zero(); tab.ncols];
    for j in 0..dim {
        phase2[2 * j] = objective[j].clone();
        phase2[2 * j + 1] = -&objective[j];
    }
    tab.set_costs(&phase2);
    let first_artificial = tab.first_artificial;
    if !tab.optimize(|j| j < first_artificial) {
        return LpSolution::unbounded();
    }
    LpSolution {
        status: LpStatus::Optimal,
        value: Some(tab.objective_value()),
        point: Some(tab.point(dim)),
    }
}

/// Phase-one feasibility test.
pub fn feasible(rows: &[Row], dim: usize) -> bool {
    feasible_point(rows, dim).is_some()
}

/// Phase-one feasibility test that returns a feasible point on success.
pub fn feasible_point(rows: &[Row], dim: usize) -> Option<Vec<Rat>> {
    let mut tab = Tableau::new(rows, dim);
    let mut phase1 = vec![Rat::zero(); tab.ncols];
    for c in phase1.iter_mut().skip(tab.first_artificial) {
        *c = -Rat::one();
    }
    tab.set_costs(&phase1);
    let ok = tab.optimize(|_| true);
    debug_assert!(ok, "phase one is bounded by construction");
    if tab.objective_value().is_negative() {
        None
    } else {
        Some(tab.point(dim))
    }
}

/// Exact check of `coeffs · x <= rhs` for every row.
pub fn satisfies(rows: &[Row], x: &[Rat]) -> bool {
    rows.iter().all(|row| {
        let mut acc = Rat::zero();
        for (c, v) in row.coeffs.iter().zip(x) {
            acc += &(c * v);
        }
        acc <= row.rhs
    })
}
