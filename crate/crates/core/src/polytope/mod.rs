//! Exact H-representation polytopes: feasibility, linear optimization and
//! vertex enumeration.
//!
//! A polytope is a finite list of rational linear constraints over an
//! ordered variable list. The feasible set may be empty; that is a
//! queryable state, never an assumption. All queries are exact.

pub mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::pwl::{AffineForm, Point};
use crate::rat::Rat;
use simplex::{LpStatus, Row};

/// Guard for the exhaustive vertex enumeration.
const MAX_VERTEX_VARS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

/// One constraint `lhs rel rhs`. Any constant term inside `lhs` is folded
/// onto the right-hand side when the constraint is compiled to rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub lhs: AffineForm,
    pub rel: Relation,
    pub rhs: Rat,
}

impl Constraint {
    pub fn new(lhs: AffineForm, rel: Relation, rhs: Rat) -> Self {
        Constraint { lhs, rel, rhs }
    }

    fn holds_at(&self, point: &Point) -> Result<bool, Error> {
        let value = self.lhs.eval(point)?;
        Ok(match self.rel {
            Relation::Le => value <= self.rhs,
            Relation::Ge => value >= self.rhs,
            Relation::Eq => value == self.rhs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polytope {
    variables: Vec<String>,
    constraints: Vec<Constraint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal { value: Rat, point: Point },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<&Rat> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&Point> {
        match self {
            LpOutcome::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }
}

impl Polytope {
    pub fn new(variables: Vec<String>, constraints: Vec<Constraint>) -> Result<Self, Error> {
        let poly = Polytope {
            variables,
            constraints: Vec::new(),
        };
        constraints.into_iter().try_fold(poly, |mut poly, c| {
            poly.check_constraint(&c)?;
            poly.constraints.push(c);
            Ok(poly)
        })
    }

    fn check_constraint(&self, c: &Constraint) -> Result<(), Error> {
        for name in c.lhs.coeffs.keys() {
            if !self.variables.iter().any(|v| v == name) {
                return Err(Error::UnknownVariable(name.clone()));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    /// Returns a copy with an extra constraint appended.
    pub fn with_constraint(&self, c: Constraint) -> Result<Self, Error> {
        self.check_constraint(&c)?;
        let mut poly = self.clone();
        poly.constraints.push(c);
        Ok(poly)
    }

    /// Exact membership test.
    pub fn contains(&self, point: &Point) -> Result<bool, Error> {
        for c in &self.constraints {
            if !c.holds_at(point)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Dense coefficient vector over the declared variable order.
    fn dense(&self, form: &AffineForm) -> Result<Vec<Rat>, Error> {
        let mut row = vec![Rat::zero(); self.variables.len()];
        for (name, coeff) in &form.coeffs {
            let idx = self
                .variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
            row[idx] = coeff.clone();
        }
        Ok(row)
    }

    /// Compiles all constraints into `<=` rows. Equalities become one `<=`
    /// and one `>=` row so that the simplex has a single code path.
    pub(crate) fn rows(&self) -> Result<Vec<Row>, Error> {
        let mut rows = Vec::new();
        for c in &self.constraints {
            let coeffs = self.dense(&c.lhs)?;
            let rhs = &c.rhs - &c.lhs.constant;
            match c.rel {
                Relation::Le => rows.push(Row { coeffs, rhs }),
                Relation::Ge => rows.push(Row {
                    coeffs: coeffs.iter().map(|c| -c).collect(),
                    rhs: -rhs,
                }),
                Relation::Eq => {
                    rows.push(Row {
                        coeffs: coeffs.iter().map(|c| -c).collect(),
                        rhs: -&rhs,
                    });
                    rows.push(Row { coeffs, rhs });
                }
            }
        }
        Ok(rows)
    }

    fn named_point(&self, coords: &[Rat]) -> Point {
        self.variables
            .iter()
            .cloned()
            .zip(coords.iter().cloned())
            .collect()
    }

    /// True iff the feasible set is nonempty; decided by exact phase-one
    /// simplex.
    pub fn is_feasible(&self) -> bool {
        match self.rows() {
            Ok(rows) => simplex::feasible(&rows, self.variables.len()),
            Err(_) => false,
        }
    }

    /// Exact maximization of an affine objective. On ties the returned
    /// point is the lexicographically smallest optimizer in the declared
    /// variable order, obtained by objective refinement.
    pub fn maximize(&self, objective: &AffineForm) -> Result<LpOutcome, Error> {
        let rows = self.rows()?;
        let c = self.dense(objective)?;
        let sol = simplex::maximize(&rows, &c);
        match sol.status {
            LpStatus::Infeasible => Ok(LpOutcome::Infeasible),
            LpStatus::Unbounded => Ok(LpOutcome::Unbounded),
            LpStatus::Optimal => {
                let raw_value = sol.value.expect("optimal solution carries a value");
                let fallback = sol.point.expect("optimal solution carries a point");
                let point = self
                    .lex_smallest_optimum(&rows, &c, &raw_value)
                    .unwrap_or(fallback);
                Ok(LpOutcome::Optimal {
                    value: raw_value + objective.constant.clone(),
                    point: self.named_point(&point),
                })
            }
        }
    }

    /// Lexicographic refinement: pin the objective to its optimum, then
    /// minimize each coordinate in order. Returns `None` when the optimal
    /// face is unbounded in some coordinate.
    fn lex_smallest_optimum(
        &self,
        rows: &[Row],
        objective: &[Rat],
        value: &Rat,
    ) -> Option<Vec<Rat>> {
        let dim = self.variables.len();
        let mut rows = rows.to_vec();
        rows.push(Row {
            coeffs: objective.iter().map(|c| -c).collect(),
            rhs: -value,
        });
        let mut coords = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut c = vec![Rat::zero(); dim];
            c[j] = -Rat::one();
            let sol = simplex::maximize(&rows, &c);
            if sol.status != LpStatus::Optimal {
                return None;
            }
            let mj = -sol.value.expect("optimal");
            let mut fix = vec![Rat::zero(); dim];
            fix[j] = Rat::one();
            rows.push(Row {
                coeffs: fix.iter().map(|c| -c).collect(),
                rhs: -&mj,
            });
            rows.push(Row {
                coeffs: fix,
                rhs: mj.clone(),
            });
            coords.push(mj);
        }
        Some(coords)
    }

    /// Checks that every coordinate direction is bounded; returns the name
    /// of an unbounded variable otherwise.
    fn unbounded_direction(&self) -> Result<Option<String>, Error> {
        let rows = self.rows()?;
        let dim = self.variables.len();
        for (j, name) in self.variables.iter().enumerate() {
            for sign in [1i64, -1] {
                let mut c = vec![Rat::zero(); dim];
                c[j] = Rat::int(sign);
                let sol = simplex::maximize(&rows, &c);
                match sol.status {
                    LpStatus::Unbounded => return Ok(Some(name.clone())),
                    LpStatus::Infeasible => return Ok(None),
                    LpStatus::Optimal => {}
                }
            }
        }
        Ok(None)
    }

    pub fn is_bounded(&self) -> Result<bool, Error> {
        Ok(self.unbounded_direction()?.is_none())
    }

    /// Enumerates all vertices by exhaustive inspection of d-subsets of
    /// tight constraints, filtered by feasibility and deduplicated.
    /// Requires a bounded polytope in at most twelve variables.
    pub fn vertices(&self) -> Result<Vec<Point>, Error> {
        let dim = self.variables.len();
        if dim > MAX_VERTEX_VARS {
            return Err(Error::GuardExceeded(format!(
                "vertex enumeration supports at most {} variables, got {}",
                MAX_VERTEX_VARS, dim
            )));
        }
        if let Some(var) = self.unbounded_direction()? {
            return Err(Error::UnboundedPolytope(var));
        }
        let rows = self.rows()?;
        let candidates = vertex_candidates(&rows, dim);
        let mut out: Vec<Vec<Rat>> = candidates
            .into_iter()
            .filter(|x| point_satisfies(&rows, x))
            .collect();
        out.sort();
        out.dedup();
        Ok(out.iter().map(|x| self.named_point(x)).collect())
    }
}

/// Solves the square system given by the selected rows at equality for
/// every d-subset; returns all nondegenerate intersection points.
pub(crate) fn vertex_candidates(rows: &[Row], dim: usize) -> Vec<Vec<Rat>> {
    let mut out = Vec::new();
    if dim == 0 || rows.len() < dim {
        return out;
    }
    let mut idx: Vec<usize> = (0..dim).collect();
    loop {
        let mat: Vec<Vec<Rat>> = idx.iter().map(|&i| rows[i].coeffs.clone()).collect();
        let rhs: Vec<Rat> = idx.iter().map(|&i| rows[i].rhs.clone()).collect();
        if let Some(x) = solve_square(mat, rhs) {
            out.push(x);
        }
        // Next d-combination of row indices in lexicographic order.
        let mut k = dim;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] + (dim - k) < rows.len() {
                idx[k] += 1;
                for j in k + 1..dim {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

pub(crate) use simplex::satisfies as point_satisfies;

/// Exact Gaussian elimination; `None` when the matrix is singular.
pub(crate) fn solve_square(mut mat: Vec<Vec<Rat>>, mut rhs: Vec<Rat>) -> Option<Vec<Rat>> {
    let n = mat.len();
    for col in 0..n {
        let pivot_row = (col..n).find(|&r| !mat[r][col].is_zero())?;
        mat.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        let inv = mat[col][col].recip();
        for j in col..n {
            mat[col][j] = &mat[col][j] * &inv;
        }
        rhs[col] = &rhs[col] * &inv;
        for r in 0..n {
            if r == col || mat[r][col].is_zero() {
                continue;
            }
            let factor = mat[r][col].clone();
            for j in col..n {
                let delta = &factor * &mat[col][j];
                mat[r][j] -= &delta;
            }
            let delta = &factor * &rhs[col];
            rhs[r] -= &delta;
        }
    }
    Some(rhs)
}

// JSON representation:
// {"variables": [...], "constraints": [{"lhs": {"var": "p/q", ...}, "rel": "<=", "rhs": "p/q"}]}
// Constant terms of the lhs are folded into the rhs on serialization.
#[derive(Serialize, Deserialize)]
struct ConstraintJson {
    lhs: BTreeMap<String, Rat>,
    rel: Relation,
    rhs: Rat,
}

#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    variables: Vec<String>,
    constraints: Vec<ConstraintJson>,
}

impl Serialize for Polytope {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let json = PolytopeJson {
            variables: self.variables.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintJson {
                    lhs: c.lhs.coeffs.clone(),
                    rel: c.rel,
                    rhs: &c.rhs - &c.lhs.constant,
                })
                .collect(),
        };
        json.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = PolytopeJson::deserialize(deserializer)?;
        let constraints = json
            .constraints
            .into_iter()
            .map(|c| Constraint {
                lhs: AffineForm::new(c.lhs, Rat::zero()),
                rel: c.rel,
                rhs: c.rhs,
            })
            .collect();
        Polytope::new(json.variables, constraints).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwl::point;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    fn le(form: AffineForm, rhs: Rat) -> Constraint {
        Constraint::new(form, Relation::Le, rhs)
    }

    fn ge(form: AffineForm, rhs: Rat) -> Constraint {
        Constraint::new(form, Relation::Ge, rhs)
    }

    fn unit_interval() -> Polytope {
        Polytope::new(
            names(&["x"]),
            vec![
                ge(AffineForm::var("x"), Rat::zero()),
                le(AffineForm::var("x"), Rat::one()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn feasibility_examples() {
        assert!(unit_interval().is_feasible());
        let empty = Polytope::new(
            names(&["x"]),
            vec![
                ge(AffineForm::var("x"), Rat::one()),
                le(AffineForm::var("x"), Rat::zero()),
            ],
        )
        .unwrap();
        assert!(!empty.is_feasible());
    }

    #[test]
    fn maximize_box() {
        let poly = unit_interval();
        match poly.maximize(&AffineForm::var("x")).unwrap() {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, Rat::one());
                assert_eq!(point["x"], Rat::one());
            }
            other => panic!("expected optimal, got {:?}", other),
        }
    }

    #[test]
    fn maximize_unbounded() {
        let poly = Polytope::new(
            names(&["x", "y"]),
            vec![ge(AffineForm::var("x"), Rat::zero())],
        )
        .unwrap();
        let obj = AffineForm::new(
            [("x".to_string(), Rat::one()), ("y".to_string(), Rat::one())],
            Rat::zero(),
        );
        assert_eq!(poly.maximize(&obj).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn unit_square_vertices() {
        let poly = Polytope::new(
            names(&["x", "y"]),
            vec![
                ge(AffineForm::var("x"), Rat::zero()),
                le(AffineForm::var("x"), Rat::one()),
                ge(AffineForm::var("y"), Rat::zero()),
                le(AffineForm::var("y"), Rat::one()),
            ],
        )
        .unwrap();
        let verts = poly.vertices().unwrap();
        assert_eq!(verts.len(), 4);
    }

    #[test]
    fn simplex_vertices() {
        let sum = AffineForm::new(
            [("x".to_string(), Rat::one()), ("y".to_string(), Rat::one())],
            Rat::zero(),
        );
        let poly = Polytope::new(
            names(&["x", "y"]),
            vec![
                ge(AffineForm::var("x"), Rat::zero()),
                ge(AffineForm::var("y"), Rat::zero()),
                le(sum, Rat::one()),
            ],
        )
        .unwrap();
        let verts = poly.vertices().unwrap();
        let expected = [
            point(&[("x", Rat::zero()), ("y", Rat::zero())]),
            point(&[("x", Rat::one()), ("y", Rat::zero())]),
            point(&[("x", Rat::zero()), ("y", Rat::one())]),
        ];
        assert_eq!(verts.len(), 3);
        for v in expected {
            assert!(verts.contains(&v));
        }
    }

    #[test]
    fn vertices_reject_unbounded() {
        let poly =
            Polytope::new(names(&["x"]), vec![ge(AffineForm::var("x"), Rat::zero())]).unwrap();
        assert!(matches!(poly.vertices(), Err(Error::UnboundedPolytope(_))));
    }

    #[test]
    fn equality_constraint_splits() {
        let poly = Polytope::new(
            names(&["x", "y"]),
            vec![
                Constraint::new(AffineForm::var("x"), Relation::Eq, Rat::new(1, 2)),
                ge(AffineForm::var("y"), Rat::zero()),
                le(AffineForm::var("y"), Rat::one()),
            ],
        )
        .unwrap();
        let verts = poly.vertices().unwrap();
        assert_eq!(verts.len(), 2);
        for v in &verts {
            assert_eq!(v["x"], Rat::new(1, 2));
        }
    }

    #[test]
    fn lex_tie_breaking_picks_smallest_point() {
        // maximize 0 over the unit square: every point optimal, expect (0,0).
        let poly = Polytope::new(
            names(&["x", "y"]),
            vec![
                ge(AffineForm::var("x"), Rat::zero()),
                le(AffineForm::var("x"), Rat::one()),
                ge(AffineForm::var("y"), Rat::zero()),
                le(AffineForm::var("y"), Rat::one()),
            ],
        )
        .unwrap();
        match poly.maximize(&AffineForm::constant(Rat::zero())).unwrap() {
            LpOutcome::Optimal { point, .. } => {
                assert_eq!(point["x"], Rat::zero());
                assert_eq!(point["y"], Rat::zero());
            }
            other => panic!("expected optimal, got {:?}", other),
        }
    }

    #[test]
    fn json_round_trip() {
        let poly = Polytope::new(
            names(&["x", "y"]),
            vec![
                ge(AffineForm::var("x"), Rat::zero()),
                le(
                    AffineForm::new(
                        [
                            ("x".to_string(), Rat::new(2, 3)),
                            ("y".to_string(), Rat::int(-1)),
                        ],
                        Rat::zero(),
                    ),
                    Rat::new(7, 5),
                ),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&poly).unwrap();
        let back: Polytope = serde_json::from_str(&text).unwrap();
        assert_eq!(back, poly);
    }
}
