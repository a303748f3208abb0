//! Exact max-min optimization of piecewise-linear families over polytopes.
//!
//! Computes `max_{x in D} min_i f_i(x)` for a finite family of
//! piecewise-linear expressions, with a verifiable certificate. Two
//! independent engines are provided and may be cross-checked:
//!
//! * the *branch* engine enumerates consistent branch assignments of all
//!   max/min nodes, prunes infeasible assignments eagerly with a phase-one
//!   LP, and solves `maximize t s.t. t <= f_i(x)` on each feasible cell;
//! * the *vertex* engine collects the hyperplane arrangement spanned by
//!   the cell boundaries, enumerates all candidate vertices inside the
//!   domain, and evaluates the min there exactly.
//!
//! Both return exact rationals. When run together they must agree exactly;
//! disagreement aborts rather than trusting either side.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::polytope::simplex::{self, LpStatus, Row};
use crate::polytope::{Constraint, LpOutcome, Polytope, Relation};
use crate::pwl::{AffineForm, Point, PwlExpr};
use crate::rat::Rat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Branch,
    Vertex,
    Both,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "branch" => Ok(Engine::Branch),
            "vertex" => Ok(Engine::Vertex),
            "both" => Ok(Engine::Both),
            other => Err(Error::InvalidParameter(format!(
                "unknown engine `{}` (expected branch, vertex or both)",
                other
            ))),
        }
    }
}

/// A region on which every expression of the family is simultaneously
/// linear, together with the linear piece each expression equals there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub region: Polytope,
    pub active: Vec<AffineForm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinMaxResult {
    pub value: Rat,
    pub argmax: Point,
    pub cell: Cell,
    /// Index of an expression attaining the min at the argmax.
    pub min_index: usize,
    pub engine: Engine,
}

impl MinMaxResult {
    /// Re-derives the defining properties of the certificate from scratch:
    /// the argmax lies in the certified region, each certified linear piece
    /// matches its expression at the argmax, and the reported value is the
    /// exact min there.
    pub fn check(&self, exprs: &[PwlExpr], domain: &Polytope) -> Result<(), String> {
        let inside = |poly: &Polytope| poly.contains(&self.argmax).map_err(|e| e.to_string());
        if !inside(domain)? {
            return Err("argmax lies outside the domain".into());
        }
        if !inside(&self.cell.region)? {
            return Err("argmax lies outside the certified cell".into());
        }
        let mut min_val: Option<Rat> = None;
        for (i, expr) in exprs.iter().enumerate() {
            let v = expr.eval(&self.argmax).map_err(|e| e.to_string())?;
            let a = self.cell.active[i]
                .eval(&self.argmax)
                .map_err(|e| e.to_string())?;
            if v != a {
                return Err(format!("active form {} disagrees with its expression", i));
            }
            min_val = Some(match min_val {
                Some(m) => m.min(v),
                None => v,
            });
        }
        if min_val.as_ref() != Some(&self.value) {
            return Err("min over the family at the argmax differs from the value".into());
        }
        let at_min = exprs[self.min_index]
            .eval(&self.argmax)
            .map_err(|e| e.to_string())?;
        if at_min != self.value {
            return Err("min_index does not attain the value".into());
        }
        Ok(())
    }
}

/// Distinct max/min nodes of an expression family, in first-occurrence
/// post-order. Structurally equal subtrees share one entry, so one branch
/// choice binds every occurrence consistently.
struct BranchSpace {
    nodes: Vec<PwlExpr>,
    index: HashMap<PwlExpr, usize>,
}

impl BranchSpace {
    fn build(exprs: &[PwlExpr]) -> Self {
        let mut space = BranchSpace {
            nodes: Vec::new(),
            index: HashMap::new(),
        };
        for expr in exprs {
            space.collect(expr);
        }
        space
    }

    fn collect(&mut self, expr: &PwlExpr) {
        match expr {
            PwlExpr::Affine(_) => {}
            PwlExpr::Scale(_, inner) => self.collect(inner),
            PwlExpr::Sum(children) => {
                for c in children {
                    self.collect(c);
                }
            }
            PwlExpr::Max(children) | PwlExpr::Min(children) => {
                for c in children {
                    self.collect(c);
                }
                if !self.index.contains_key(expr) {
                    self.index.insert(expr.clone(), self.nodes.len());
                    self.nodes.push(expr.clone());
                }
            }
        }
    }

    fn children(&self, node: usize) -> &[PwlExpr] {
        match &self.nodes[node] {
            PwlExpr::Max(c) | PwlExpr::Min(c) => c,
            _ => unreachable!("branch nodes are max or min"),
        }
    }

    fn is_max(&self, node: usize) -> bool {
        matches!(self.nodes[node], PwlExpr::Max(_))
    }

    /// Resolves an expression to its active affine form under a (partial)
    /// assignment covering all branch nodes the expression contains.
    fn resolve(&self, expr: &PwlExpr, choice: &[Option<usize>]) -> AffineForm {
        match expr {
            PwlExpr::Affine(form) => form.clone(),
            PwlExpr::Scale(c, inner) => self.resolve(inner, choice).scale(c),
            PwlExpr::Sum(children) => {
                let mut acc = AffineForm::constant(Rat::zero());
                for c in children {
                    acc = acc.add(&self.resolve(c, choice));
                }
                acc
            }
            PwlExpr::Max(_) | PwlExpr::Min(_) => {
                let idx = self.index[expr];
                let j = choice[idx].expect("post-order assignment covers nested nodes");
                self.resolve(&self.children(idx)[j], choice)
            }
        }
    }
}

/// One consistent branch assignment: the constraints that carve the region
/// out of the domain and the resolved piece of every family member.
struct RawCell {
    constraints: Vec<Constraint>,
    actives: Vec<AffineForm>,
}

fn dense_of(form: &AffineForm, vars: &[String]) -> Result<Vec<Rat>, Error> {
    let mut row = vec![Rat::zero(); vars.len()];
    for (name, coeff) in &form.coeffs {
        let idx = vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
        row[idx] = coeff.clone();
    }
    Ok(row)
}

/// Compiles `form <= 0` into a dense simplex row.
fn row_of(form: &AffineForm, vars: &[String]) -> Result<Row, Error> {
    Ok(Row {
        coeffs: dense_of(form, vars)?,
        rhs: -&form.constant,
    })
}

/// Enumerates all consistent, feasible branch assignments of the family
/// over the domain. Infeasible assignments are pruned eagerly with a
/// phase-one LP; a feasible witness point is carried down the search so
/// the LP only runs when a new cut actually excludes the witness.
fn enumerate_cells(exprs: &[PwlExpr], domain: &Polytope) -> Result<Vec<RawCell>, Error> {
    let space = BranchSpace::build(exprs);
    let vars = domain.variables().to_vec();
    let base_rows = domain.rows()?;
    let mut cells = Vec::new();
    let Some(witness) = simplex::feasible_point(&base_rows, vars.len()) else {
        return Ok(cells);
    };
    let mut choice: Vec<Option<usize>> = vec![None; space.nodes.len()];
    let mut stack_rows: Vec<Row> = Vec::new();
    let mut stack_cons: Vec<Constraint> = Vec::new();

    struct Ctx<'a> {
        space: &'a BranchSpace,
        exprs: &'a [PwlExpr],
        vars: &'a [String],
        base_rows: &'a [Row],
    }

    fn dfs(
        ctx: &Ctx,
        node: usize,
        witness: &[Rat],
        choice: &mut Vec<Option<usize>>,
        stack_rows: &mut Vec<Row>,
        stack_cons: &mut Vec<Constraint>,
        cells: &mut Vec<RawCell>,
    ) -> Result<(), Error> {
        if node == ctx.space.nodes.len() {
            cells.push(RawCell {
                constraints: stack_cons.clone(),
                actives: ctx
                    .exprs
                    .iter()
                    .map(|e| ctx.space.resolve(e, choice))
                    .collect(),
            });
            return Ok(());
        }
        let children = ctx.space.children(node).to_vec();
        let is_max = ctx.space.is_max(node);
        'branches: for j in 0..children.len() {
            choice[node] = Some(j);
            let chosen = ctx.space.resolve(&children[j], choice);
            let mut added = 0;
            let mut ok = true;
            for (i, other) in children.iter().enumerate() {
                if i == j {
                    continue;
                }
                let other = ctx.space.resolve(other, choice);
                // Max: chosen >= other, i.e. other - chosen <= 0.
                let gap = if is_max {
                    other.sub(&chosen)
                } else {
                    chosen.sub(&other)
                };
                if gap.is_constant() {
                    if gap.constant.is_positive() {
                        // Constantly violated; this branch is void.
                        for _ in 0..added {
                            stack_rows.pop();
                            stack_cons.pop();
                        }
                        choice[node] = None;
                        continue 'branches;
                    }
                    continue; // Constantly satisfied; no cut needed.
                }
                let row = row_of(&gap, ctx.vars)?;
                ok &= simplex::satisfies(std::slice::from_ref(&row), witness);
                stack_rows.push(row);
                stack_cons.push(Constraint::new(gap, Relation::Le, Rat::zero()));
                added += 1;
            }
            if ok {
                // The inherited witness still lies in the refined region.
                dfs(
                    ctx,
                    node + 1,
                    witness,
                    choice,
                    stack_rows,
                    stack_cons,
                    cells,
                )?;
            } else {
                let mut rows: Vec<Row> = ctx.base_rows.to_vec();
                rows.extend(stack_rows.iter().cloned());
                if let Some(fresh) = simplex::feasible_point(&rows, ctx.vars.len()) {
                    dfs(ctx, node + 1, &fresh, choice, stack_rows, stack_cons, cells)?;
                }
            }
            for _ in 0..added {
                stack_rows.pop();
                stack_cons.pop();
            }
            choice[node] = None;
        }
        Ok(())
    }

    let ctx = Ctx {
        space: &space,
        exprs,
        vars: &vars,
        base_rows: &base_rows,
    };
    dfs(
        &ctx,
        0,
        &witness,
        &mut choice,
        &mut stack_rows,
        &mut stack_cons,
        &mut cells,
    )?;
    Ok(cells)
}

/// Decomposes a single expression over a domain into feasible linear cells.
/// On each returned region the expression equals the paired affine form,
/// and the closed regions jointly cover the domain.
pub fn linear_cells(
    expr: &PwlExpr,
    domain: &Polytope,
) -> Result<Vec<(Polytope, AffineForm)>, Error> {
    let raw = enumerate_cells(std::slice::from_ref(expr), domain)?;
    raw.into_iter()
        .map(|cell| {
            let mut region = domain.clone();
            for c in cell.constraints {
                region = region.with_constraint(c)?;
            }
            Ok((region, cell.actives.into_iter().next().expect("one expr")))
        })
        .collect()
}

fn coord_vec(point: &Point, vars: &[String]) -> Vec<Rat> {
    vars.iter()
        .map(|v| point.get(v).cloned().unwrap_or_else(Rat::zero))
        .collect()
}

/// Exact `max over domain of min_i exprs[i]`.
pub fn max_min(
    exprs: &[PwlExpr],
    domain: &Polytope,
    engine: Engine,
) -> Result<MinMaxResult, Error> {
    if exprs.is_empty() {
        return Err(Error::EmptyMaxMin());
    }
    for expr in exprs {
        for name in expr.variables() {
            if !domain.variables().contains(&name) {
                return Err(Error::UnknownVariable(name));
            }
        }
    }
    if !domain.is_feasible() {
        return Err(Error::Infeasible);
    }
    if let Some(var) = domain_unbounded(domain)? {
        return Err(Error::UnboundedPolytope(var));
    }
    match engine {
        Engine::Branch => branch_engine(exprs, domain),
        Engine::Vertex => vertex_engine(exprs, domain),
        Engine::Both => {
            let b = branch_engine(exprs, domain)?;
            let v = vertex_engine(exprs, domain)?;
            if b.value != v.value {
                return Err(Error::EngineDisagreement {
                    branch: b.value.to_string(),
                    vertex: v.value.to_string(),
                });
            }
            Ok(b)
        }
    }
}

fn domain_unbounded(domain: &Polytope) -> Result<Option<String>, Error> {
    if domain.is_bounded()? {
        Ok(None)
    } else {
        // Re-derive the offending direction for the error message.
        for name in domain.variables() {
            for sign in [1i64, -1] {
                let mut form = AffineForm::var(name);
                form = form.scale(&Rat::int(sign));
                if matches!(domain.maximize(&form)?, LpOutcome::Unbounded) {
                    return Ok(Some(name.clone()));
                }
            }
        }
        Ok(None)
    }
}

fn build_certificate(
    exprs: &[PwlExpr],
    domain: &Polytope,
    cell: &RawCell,
    value: Rat,
    argmax: Point,
    engine: Engine,
) -> Result<MinMaxResult, Error> {
    let mut region = domain.clone();
    for c in &cell.constraints {
        region = region.with_constraint(c.clone())?;
    }
    let mut min_index = 0;
    let mut min_val: Option<Rat> = None;
    for (i, expr) in exprs.iter().enumerate() {
        let v = expr.eval(&argmax)?;
        if min_val.as_ref().is_none_or(|m| v < *m) {
            min_val = Some(v);
            min_index = i;
        }
    }
    Ok(MinMaxResult {
        value,
        argmax,
        cell: Cell {
            region,
            active: cell.actives.clone(),
        },
        min_index,
        engine,
    })
}

/// Branch engine: per-cell LP `maximize t s.t. t <= active_i(x), x in cell`.
fn branch_engine(exprs: &[PwlExpr], domain: &Polytope) -> Result<MinMaxResult, Error> {
    let vars = domain.variables().to_vec();
    let dim = vars.len();
    let base_rows = domain.rows()?;
    let cells = enumerate_cells(exprs, domain)?;

    // Pass one: optimal value per cell, in the extended space (x, t).
    let mut values: Vec<Option<Rat>> = Vec::with_capacity(cells.len());
    for cell in &cells {
        let mut rows: Vec<Row> = Vec::new();
        for row in base_rows.iter() {
            let mut coeffs = row.coeffs.clone();
            coeffs.push(Rat::zero());
            rows.push(Row {
                coeffs,
                rhs: row.rhs.clone(),
            });
        }
        for c in &cell.constraints {
            let mut coeffs = dense_of(&c.lhs, &vars)?;
            coeffs.push(Rat::zero());
            rows.push(Row {
                coeffs,
                rhs: &c.rhs - &c.lhs.constant,
            });
        }
        for active in &cell.actives {
            // t <= a·x + c  <=>  -a·x + t <= c
            let mut coeffs: Vec<Rat> = dense_of(active, &vars)?.iter().map(|v| -v).collect();
            coeffs.push(Rat::one());
            rows.push(Row {
                coeffs,
                rhs: active.constant.clone(),
            });
        }
        let mut obj = vec![Rat::zero(); dim + 1];
        obj[dim] = Rat::one();
        let sol = simplex::maximize(&rows, &obj);
        values.push(match sol.status {
            LpStatus::Optimal => Some(sol.value.expect("optimal")),
            LpStatus::Infeasible => None,
            // The domain is bounded and t <= active_i(x), so t is bounded.
            LpStatus::Unbounded => unreachable!("bounded domain forces a bounded cell LP"),
        });
    }
    let best_value = values
        .iter()
        .flatten()
        .max()
        .cloned()
        .ok_or(Error::Infeasible)?;

    // Pass two: among the winning cells take the lexicographically
    // smallest argmax on the optimal face {x in cell : active_i(x) >= best}.
    let mut best: Option<(Vec<Rat>, Point, usize)> = None;
    for (idx, cell) in cells.iter().enumerate() {
        if values[idx].as_ref() != Some(&best_value) {
            continue;
        }
        let mut face = domain.clone();
        for c in &cell.constraints {
            face = face.with_constraint(c.clone())?;
        }
        for active in &cell.actives {
            face = face.with_constraint(Constraint::new(
                active.clone(),
                Relation::Ge,
                best_value.clone(),
            ))?;
        }
        let outcome = face.maximize(&AffineForm::constant(Rat::zero()))?;
        let point = match outcome {
            LpOutcome::Optimal { point, .. } => point,
            // The face is nonempty by pass one.
            _ => continue,
        };
        let key = coord_vec(&point, &vars);
        if best.as_ref().is_none_or(|(k, _, _)| key < *k) {
            best = Some((key, point, idx));
        }
    }
    let (_, argmax, cell_idx) = best.expect("a winning cell exists");
    build_certificate(
        exprs,
        domain,
        &cells[cell_idx],
        best_value,
        argmax,
        Engine::Branch,
    )
}

/// Deduplicated hyperplane table with, per plane, the set of cells whose
/// row set contains it. A d-subset of planes can only carry a cell vertex
/// if all d planes co-occur in some cell, which the bitmask AND detects.
struct PlaneTable {
    rows: Vec<Row>,
    masks: Vec<Vec<u64>>,
    index: HashMap<Vec<Rat>, usize>,
    words: usize,
}

impl PlaneTable {
    fn new(cell_count: usize) -> Self {
        PlaneTable {
            rows: Vec::new(),
            masks: Vec::new(),
            index: HashMap::new(),
            words: cell_count.div_ceil(64).max(1),
        }
    }

    /// Registers the hyperplane of `row` for `cell` (`None` = every cell).
    fn add(&mut self, row: Row, cell: Option<usize>) {
        let Some(first) = row.coeffs.iter().find(|c| !c.is_zero()) else {
            return;
        };
        let inv = first.recip();
        let mut key: Vec<Rat> = row.coeffs.iter().map(|c| c * &inv).collect();
        key.push(&row.rhs * &inv);
        let id = match self.index.get(&key) {
            Some(&id) => id,
            None => {
                let id = self.rows.len();
                self.index.insert(key, id);
                self.rows.push(row);
                self.masks.push(vec![0u64; self.words]);
                id
            }
        };
        match cell {
            Some(c) => self.masks[id][c / 64] |= 1 << (c % 64),
            None => self.masks[id].iter_mut().for_each(|w| *w = !0),
        }
    }

    /// Visits every d-subset of planes that co-occurs in at least one cell.
    fn for_each_coherent_subset(&self, d: usize, mut visit: impl FnMut(&[usize])) {
        let n = self.rows.len();
        if n < d {
            return;
        }
        let mut chosen = Vec::with_capacity(d);
        let mut mask_stack: Vec<Vec<u64>> = vec![vec![!0u64; self.words]];
        self.subset_dfs(d, 0, &mut chosen, &mut mask_stack, &mut visit);
    }

    fn subset_dfs(
        &self,
        d: usize,
        from: usize,
        chosen: &mut Vec<usize>,
        mask_stack: &mut Vec<Vec<u64>>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        if chosen.len() == d {
            visit(chosen);
            return;
        }
        let need = d - chosen.len();
        for i in from..self.rows.len().saturating_sub(need - 1) {
            let top = mask_stack.last().expect("stack nonempty");
            let and: Vec<u64> = top.iter().zip(&self.masks[i]).map(|(a, b)| a & b).collect();
            if and.iter().all(|&w| w == 0) {
                continue;
            }
            chosen.push(i);
            mask_stack.push(and);
            self.subset_dfs(d, i + 1, chosen, mask_stack, visit);
            mask_stack.pop();
            chosen.pop();
        }
    }
}

/// Vertex engine: evaluate the min at every vertex of the linearity-cell
/// arrangement inside the domain and take the exact maximum.
fn vertex_engine(exprs: &[PwlExpr], domain: &Polytope) -> Result<MinMaxResult, Error> {
    let vars = domain.variables().to_vec();
    let dim = vars.len();
    let base_rows = domain.rows()?;
    let min_expr = PwlExpr::min(exprs.to_vec())?;
    let cells = enumerate_cells(std::slice::from_ref(&min_expr), domain)?;

    // The boundary of every cell lies in the union of its constraint rows
    // and the domain facets.
    let mut table = PlaneTable::new(cells.len());
    for row in &base_rows {
        table.add(row.clone(), None);
    }
    for (idx, cell) in cells.iter().enumerate() {
        for c in &cell.constraints {
            let row = row_of(&c.lhs, &vars).expect("constraint over domain variables");
            table.add(row, Some(idx));
        }
    }

    let mut best: Option<(Rat, Vec<Rat>)> = None;
    let mut seen: std::collections::HashSet<Vec<Rat>> = std::collections::HashSet::new();
    let mut eval_err: Option<Error> = None;
    table.for_each_coherent_subset(dim, |subset| {
        if eval_err.is_some() {
            return;
        }
        let mat: Vec<Vec<Rat>> = subset
            .iter()
            .map(|&i| table.rows[i].coeffs.clone())
            .collect();
        let rhs: Vec<Rat> = subset.iter().map(|&i| table.rows[i].rhs.clone()).collect();
        let Some(x) = crate::polytope::solve_square(mat, rhs) else {
            return;
        };
        if !crate::polytope::point_satisfies(&base_rows, &x) {
            return;
        }
        if !seen.insert(x.clone()) {
            return;
        }
        let point: Point = vars.iter().cloned().zip(x.iter().cloned()).collect();
        let v = match min_expr.eval(&point) {
            Ok(v) => v,
            Err(e) => {
                eval_err = Some(e);
                return;
            }
        };
        let better = match &best {
            None => true,
            Some((bv, bx)) => v > *bv || (v == *bv && x < *bx),
        };
        if better {
            best = Some((v, x));
        }
    });
    if let Some(e) = eval_err {
        return Err(e);
    }
    let (value, x) = best.ok_or(Error::Infeasible)?;
    let argmax: Point = vars.iter().cloned().zip(x).collect();

    // Certify via the branch assignment active at the argmax.
    let cell = cell_at_point(exprs, &argmax)?;
    build_certificate(exprs, domain, &cell, value, argmax, Engine::Vertex)
}

/// The branch assignment active at a specific point: each max/min node
/// resolves to its extremal child there (smallest index on ties).
fn cell_at_point(exprs: &[PwlExpr], point: &Point) -> Result<RawCell, Error> {
    let space = BranchSpace::build(exprs);
    let mut choice: Vec<Option<usize>> = vec![None; space.nodes.len()];
    // Nodes are stored in post-order, so children resolve before parents.
    for k in 0..space.nodes.len() {
        let children = space.children(k);
        let mut best: Option<(Rat, usize)> = None;
        for (j, child) in children.iter().enumerate() {
            let v = child.eval(point)?;
            let better = match &best {
                None => true,
                Some((bv, _)) => {
                    if space.is_max(k) {
                        v > *bv
                    } else {
                        v < *bv
                    }
                }
            };
            if better {
                best = Some((v, j));
            }
        }
        choice[k] = Some(best.expect("max/min nodes are nonempty").1);
    }
    let mut constraints = Vec::new();
    for k in 0..space.nodes.len() {
        let children = space.children(k).to_vec();
        let j = choice[k].expect("assigned above");
        let chosen = space.resolve(&children[j], &choice);
        for (i, other) in children.iter().enumerate() {
            if i == j {
                continue;
            }
            let other = space.resolve(other, &choice);
            let gap = if space.is_max(k) {
                other.sub(&chosen)
            } else {
                chosen.sub(&other)
            };
            if gap.is_constant() {
                continue;
            }
            constraints.push(Constraint::new(gap, Relation::Le, Rat::zero()));
        }
    }
    let actives = exprs.iter().map(|e| space.resolve(e, &choice)).collect();
    Ok(RawCell {
        constraints,
        actives,
    })
}
