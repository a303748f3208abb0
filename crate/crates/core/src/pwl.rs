//! Piecewise-linear expressions over named rational variables.
//!
//! An expression is a finite tree of affine forms combined by `max`, `min`,
//! sums and rational scalar multiples. Evaluation at a rational point is
//! exact. Expressions are immutable after construction and safe to share
//! across threads.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;
use crate::rat::Rat;

/// Assignment of rational values to variable names.
pub type Point = BTreeMap<String, Rat>;

/// An affine form `sum_i c_i * x_i + const`. A variable missing from the
/// coefficient map has coefficient zero.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct AffineForm {
    pub coeffs: BTreeMap<String, Rat>,
    pub constant: Rat,
}

impl AffineForm {
    pub fn constant(c: Rat) -> Self {
        AffineForm {
            coeffs: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn new(coeffs: impl IntoIterator<Item = (String, Rat)>, constant: Rat) -> Self {
        AffineForm {
            coeffs: coeffs.into_iter().collect(),
            constant,
        }
    }

    /// Single variable with coefficient one.
    pub fn var(name: &str) -> Self {
        AffineForm::new([(name.to_string(), Rat::one())], Rat::zero())
    }

    pub fn eval(&self, point: &Point) -> Result<Rat, Error> {
        let mut acc = self.constant.clone();
        for (name, coeff) in &self.coeffs {
            let value = point
                .get(name)
                .ok_or_else(|| Error::UnboundVariable(name.clone()))?;
            acc += &(coeff * value);
        }
        Ok(acc)
    }

    pub fn scale(&self, c: &Rat) -> Self {
        AffineForm {
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, v)| (k.clone(), c * v))
                .collect(),
            constant: c * &self.constant,
        }
    }

    pub fn add(&self, other: &AffineForm) -> Self {
        let mut coeffs = self.coeffs.clone();
        for (k, v) in &other.coeffs {
            let entry = coeffs.entry(k.clone()).or_insert_with(Rat::zero);
            *entry += v;
        }
        AffineForm {
            coeffs,
            constant: &self.constant + &other.constant,
        }
    }

    pub fn sub(&self, other: &AffineForm) -> Self {
        self.add(&other.scale(&-Rat::one()))
    }

    /// True when every coefficient is zero (the form is constant).
    pub fn is_constant(&self) -> bool {
        self.coeffs.values().all(Rat::is_zero)
    }

    /// Substitutes bound variables by their values, folding them into the
    /// constant term.
    pub fn substitute(&self, bindings: &Point) -> Self {
        let mut coeffs = BTreeMap::new();
        let mut constant = self.constant.clone();
        for (name, coeff) in &self.coeffs {
            match bindings.get(name) {
                Some(value) => constant += &(coeff * value),
                None => {
                    coeffs.insert(name.clone(), coeff.clone());
                }
            }
        }
        AffineForm { coeffs, constant }
    }
}

/// A piecewise-linear expression tree.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum PwlExpr {
    Affine(AffineForm),
    Max(Vec<PwlExpr>),
    Min(Vec<PwlExpr>),
    Sum(Vec<PwlExpr>),
    Scale(Rat, Box<PwlExpr>),
}

impl PwlExpr {
    pub fn affine(form: AffineForm) -> Self {
        PwlExpr::Affine(form)
    }

    pub fn constant(c: Rat) -> Self {
        PwlExpr::Affine(AffineForm::constant(c))
    }

    pub fn var(name: &str) -> Self {
        PwlExpr::Affine(AffineForm::var(name))
    }

    /// Pointwise maximum. Empty child lists are a construction error, not
    /// negative infinity.
    pub fn max(children: Vec<PwlExpr>) -> Result<Self, Error> {
        if children.is_empty() {
            return Err(Error::EmptyMaxMin());
        }
        Ok(PwlExpr::Max(children))
    }

    /// Pointwise minimum; empty child lists are a construction error.
    pub fn min(children: Vec<PwlExpr>) -> Result<Self, Error> {
        if children.is_empty() {
            return Err(Error::EmptyMaxMin());
        }
        Ok(PwlExpr::Min(children))
    }

    pub fn sum(children: Vec<PwlExpr>) -> Result<Self, Error> {
        if children.is_empty() {
            return Err(Error::EmptyMaxMin());
        }
        Ok(PwlExpr::Sum(children))
    }

    pub fn scale(c: Rat, e: PwlExpr) -> Self {
        PwlExpr::Scale(c, Box::new(e))
    }

    /// Exact value at `point` by structural recursion.
    pub fn eval(&self, point: &Point) -> Result<Rat, Error> {
        match self {
            PwlExpr::Affine(form) => form.eval(point),
            PwlExpr::Max(children) => {
                let mut best: Option<Rat> = None;
                for child in children {
                    let v = child.eval(point)?;
                    best = Some(match best {
                        Some(b) => b.max(v),
                        None => v,
                    });
                }
                Ok(best.expect("max node has at least one child"))
            }
            PwlExpr::Min(children) => {
                let mut best: Option<Rat> = None;
                for child in children {
                    let v = child.eval(point)?;
                    best = Some(match best {
                        Some(b) => b.min(v),
                        None => v,
                    });
                }
                Ok(best.expect("min node has at least one child"))
            }
            PwlExpr::Sum(children) => {
                let mut acc = Rat::zero();
                for child in children {
                    acc += &child.eval(point)?;
                }
                Ok(acc)
            }
            PwlExpr::Scale(c, e) => Ok(c * &e.eval(point)?),
        }
    }

    /// Binds a subset of the variables, returning an expression over the
    /// remaining ones. `eval(substitute(e, b), p)` equals `eval(e, b ∪ p)`.
    pub fn substitute(&self, bindings: &Point) -> Self {
        match self {
            PwlExpr::Affine(form) => PwlExpr::Affine(form.substitute(bindings)),
            PwlExpr::Max(children) => {
                PwlExpr::Max(children.iter().map(|c| c.substitute(bindings)).collect())
            }
            PwlExpr::Min(children) => {
                PwlExpr::Min(children.iter().map(|c| c.substitute(bindings)).collect())
            }
            PwlExpr::Sum(children) => {
                PwlExpr::Sum(children.iter().map(|c| c.substitute(bindings)).collect())
            }
            PwlExpr::Scale(c, e) => PwlExpr::Scale(c.clone(), Box::new(e.substitute(bindings))),
        }
    }

    /// Names of all variables appearing in the expression.
    pub fn variables(&self) -> Vec<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_variables(&mut out);
        out.into_iter().collect()
    }

    fn collect_variables(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            PwlExpr::Affine(form) => out.extend(form.coeffs.keys().cloned()),
            PwlExpr::Max(children) | PwlExpr::Min(children) | PwlExpr::Sum(children) => {
                for child in children {
                    child.collect_variables(out);
                }
            }
            PwlExpr::Scale(_, e) => e.collect_variables(out),
        }
    }

    /// Canonical s-expression text. `parse` inverts it bit-exactly.
    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s).expect("string formatting");
        s
    }

    fn write_sexpr(&self, out: &mut String) -> fmt::Result {
        use fmt::Write;
        match self {
            PwlExpr::Affine(form) => {
                write!(out, "(affine")?;
                for (name, coeff) in &form.coeffs {
                    write!(out, " ({} {})", name, coeff)?;
                }
                write!(out, " {})", form.constant)
            }
            PwlExpr::Max(children) => Self::write_list(out, "max", children),
            PwlExpr::Min(children) => Self::write_list(out, "min", children),
            PwlExpr::Sum(children) => Self::write_list(out, "+", children),
            PwlExpr::Scale(c, e) => {
                write!(out, "(* {} ", c)?;
                e.write_sexpr(out)?;
                write!(out, ")")
            }
        }
    }

    fn write_list(out: &mut String, head: &str, children: &[PwlExpr]) -> fmt::Result {
        use fmt::Write;
        write!(out, "({}", head)?;
        for child in children {
            write!(out, " ")?;
            child.write_sexpr(out)?;
        }
        write!(out, ")")
    }

    /// Parses the s-expression grammar `(max e...)`, `(min e...)`,
    /// `(+ e...)`, `(* p/q e)`, `(affine (var coeff)... const)`.
    pub fn parse(input: &str) -> Result<Self, Error> {
        let tokens = tokenize(input)?;
        let mut pos = 0;
        let expr = parse_expr(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::ParseExpr(format!(
                "trailing tokens after expression: {:?}",
                &tokens[pos..]
            )));
        }
        Ok(expr)
    }
}

impl fmt::Display for PwlExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(input: &str) -> Result<Vec<Token>, Error> {
    let mut tokens = Vec::new();
    let mut atom = String::new();
    for ch in input.chars() {
        match ch {
            '(' | ')' => {
                if !atom.is_empty() {
                    tokens.push(Token::Atom(std::mem::take(&mut atom)));
                }
                tokens.push(if ch == '(' { Token::Open } else { Token::Close });
            }
            c if c.is_whitespace() => {
                if !atom.is_empty() {
                    tokens.push(Token::Atom(std::mem::take(&mut atom)));
                }
            }
            c => atom.push(c),
        }
    }
    if !atom.is_empty() {
        tokens.push(Token::Atom(atom));
    }
    Ok(tokens)
}

fn expect(tokens: &[Token], pos: &mut usize, want: Token) -> Result<(), Error> {
    match tokens.get(*pos) {
        Some(t) if *t == want => {
            *pos += 1;
            Ok(())
        }
        other => Err(Error::ParseExpr(format!(
            "expected {:?}, found {:?}",
            want, other
        ))),
    }
}

fn next_atom(tokens: &[Token], pos: &mut usize) -> Result<String, Error> {
    match tokens.get(*pos) {
        Some(Token::Atom(a)) => {
            *pos += 1;
            Ok(a.clone())
        }
        other => Err(Error::ParseExpr(format!(
            "expected atom, found {:?}",
            other
        ))),
    }
}

fn parse_expr(tokens: &[Token], pos: &mut usize) -> Result<PwlExpr, Error> {
    expect(tokens, pos, Token::Open)?;
    let head = next_atom(tokens, pos)?;
    let expr = match head.as_str() {
        "affine" => {
            let mut coeffs = BTreeMap::new();
            let constant = loop {
                match tokens.get(*pos) {
                    Some(Token::Open) => {
                        *pos += 1;
                        let name = next_atom(tokens, pos)?;
                        let coeff = Rat::parse(&next_atom(tokens, pos)?)?;
                        expect(tokens, pos, Token::Close)?;
                        coeffs.insert(name, coeff);
                    }
                    Some(Token::Atom(a)) => {
                        let c = Rat::parse(a)?;
                        *pos += 1;
                        break c;
                    }
                    other => {
                        return Err(Error::ParseExpr(format!(
                            "expected coefficient pair or constant, found {:?}",
                            other
                        )))
                    }
                }
            };
            PwlExpr::Affine(AffineForm { coeffs, constant })
        }
        "max" | "min" | "+" => {
            let mut children = Vec::new();
            while tokens.get(*pos) != Some(&Token::Close) {
                children.push(parse_expr(tokens, pos)?);
            }
            match head.as_str() {
                "max" => PwlExpr::max(children)?,
                "min" => PwlExpr::min(children)?,
                _ => PwlExpr::sum(children)?,
            }
        }
        "*" => {
            let c = Rat::parse(&next_atom(tokens, pos)?)?;
            let e = parse_expr(tokens, pos)?;
            PwlExpr::Scale(c, Box::new(e))
        }
        other => return Err(Error::ParseExpr(format!("unknown head `{}`", other))),
    };
    expect(tokens, pos, Token::Close)?;
    Ok(expr)
}

/// Convenience constructor for test and bound-building code.
pub fn point(pairs: &[(&str, Rat)]) -> Point {
    pairs
        .iter()
        .map(|(name, value)| (name.to_string(), value.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aff(pairs: &[(&str, Rat)], c: Rat) -> PwlExpr {
        PwlExpr::Affine(AffineForm::new(
            pairs.iter().map(|(n, v)| (n.to_string(), v.clone())),
            c,
        ))
    }

    #[test]
    fn constant_form_evaluates_to_constant() {
        let e = aff(&[], Rat::new(7, 3));
        assert_eq!(e.eval(&point(&[])).unwrap(), Rat::new(7, 3));
    }

    #[test]
    fn idempotent_max() {
        let x = PwlExpr::var("x");
        let e = PwlExpr::max(vec![x.clone(), x]).unwrap();
        let p = point(&[("x", Rat::new(7, 3))]);
        assert_eq!(e.eval(&p).unwrap(), Rat::new(7, 3));
    }

    #[test]
    fn unbound_variable_is_named() {
        let e = PwlExpr::var("tau");
        match e.eval(&point(&[("phi", Rat::one())])) {
            Err(Error::UnboundVariable(name)) => assert_eq!(name, "tau"),
            other => panic!("expected unbound-variable error, got {:?}", other),
        }
    }

    #[test]
    fn empty_max_is_construction_error() {
        assert!(PwlExpr::max(vec![]).is_err());
        assert!(PwlExpr::min(vec![]).is_err());
    }

    // First branch of the Poisson H bracket at n=39, eps'=1/10000, phi=3/2:
    // max{10/37 + 1/10000, 2/41 + 1/10000 + (6/41)(3/2)} = 10/37 + 1/10000.
    #[test]
    fn poisson_h_bracket_at_generic_point() {
        let eps = Rat::new(1, 10000);
        let h = PwlExpr::max(vec![
            aff(&[], Rat::new(10, 37) + eps.clone()),
            aff(&[("phi", Rat::new(6, 41))], Rat::new(2, 41) + eps),
        ])
        .unwrap();
        let p = point(&[("phi", Rat::new(3, 2))]);
        assert_eq!(h.eval(&p).unwrap(), Rat::new(100037, 370000));
    }

    #[test]
    fn substitute_binds_and_folds() {
        let e = aff(&[("phi", Rat::one())], Rat::zero());
        let bound = e.substitute(&point(&[("phi", Rat::int(2))]));
        assert_eq!(bound, aff(&[], Rat::int(2)));
    }

    #[test]
    fn substitute_then_eval_max() {
        let e = PwlExpr::max(vec![PwlExpr::var("phi"), PwlExpr::var("tau")]).unwrap();
        let bound = e.substitute(&point(&[("tau", Rat::int(-5))]));
        assert_eq!(
            bound.eval(&point(&[("phi", Rat::zero())])).unwrap(),
            Rat::zero()
        );
    }

    // Weyl bracket with tau bound to -9/4, evaluated at phi=3/2:
    // branches 2*phi+2*tau = -3/2 and -phi+min{0,-3-tau} = -9/4.
    #[test]
    fn weyl_bracket_partial_binding() {
        let weyl = PwlExpr::max(vec![
            aff(&[("phi", Rat::int(2)), ("tau", Rat::int(2))], Rat::zero()),
            PwlExpr::sum(vec![
                aff(&[("phi", Rat::int(-1))], Rat::zero()),
                PwlExpr::min(vec![
                    aff(&[], Rat::zero()),
                    aff(&[("tau", Rat::int(-1))], Rat::int(-3)),
                ])
                .unwrap(),
            ])
            .unwrap(),
        ])
        .unwrap();
        let bound = weyl.substitute(&point(&[("tau", Rat::new(-9, 4))]));
        let v = bound.eval(&point(&[("phi", Rat::new(3, 2))])).unwrap();
        assert_eq!(v, Rat::new(-3, 2));
    }

    #[test]
    fn sexpr_round_trip_examples() {
        let exprs = [
            "(affine (phi 1/2) (tau -3) 5/4)",
            "(max (affine (phi 1) 0) (affine (tau 1) 0))",
            "(* -37/2 (min (affine 0) (+ (affine (phi 1) 0) (affine 1/7))))",
        ];
        for text in exprs {
            let e = PwlExpr::parse(text).unwrap();
            assert_eq!(e.to_sexpr(), text);
            assert_eq!(PwlExpr::parse(&e.to_sexpr()).unwrap(), e);
        }
    }

    #[test]
    fn parse_rejects_empty_bracket() {
        assert!(PwlExpr::parse("(max)").is_err());
    }
}
