//! Formulas of the modal μ-calculus with the single cover-style modality ∇,
//! and modal equation systems over them.
//!
//! Argument sets of `and`, `or` and `nab` are `BTreeSet`s, so two formulas
//! that differ only in member order or multiplicity are the same value. The
//! derived `Ord` is the fixed total order used for canonical printing and for
//! every tie-break elsewhere in the crate.

mod parse;
pub(crate) mod system;

use std::collections::BTreeSet;
use std::fmt;

pub use parse::{parse_formula, parse_formula_in, parse_formula_sugared, parse_system, ParseError};
pub use system::{EquationSystem, EquationalFormula, SystemError};

pub type FormulaSet = BTreeSet<Formula>;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    And(FormulaSet),
    Or(FormulaSet),
    Nabla(FormulaSet),
    /// `box φ`, kept only by the sugared parser; see [`crate::normalform::desugar`].
    Square(Box<Formula>),
    /// `dia φ`, kept only by the sugared parser.
    Diamond(Box<Formula>),
    Mu(String, Box<Formula>),
    Nu(String, Box<Formula>),
    Var(String),
    Prop(String),
    NegProp(String),
}

impl Formula {
    pub fn tt() -> Self {
        Formula::And(FormulaSet::new())
    }

    pub fn ff() -> Self {
        Formula::Or(FormulaSet::new())
    }

    pub fn prop(p: &str) -> Self {
        Formula::Prop(p.to_string())
    }

    pub fn neg(p: &str) -> Self {
        Formula::NegProp(p.to_string())
    }

    pub fn var(x: &str) -> Self {
        Formula::Var(x.to_string())
    }

    pub fn and<I: IntoIterator<Item = Formula>>(members: I) -> Self {
        Formula::And(members.into_iter().collect())
    }

    pub fn or<I: IntoIterator<Item = Formula>>(members: I) -> Self {
        Formula::Or(members.into_iter().collect())
    }

    pub fn nabla<I: IntoIterator<Item = Formula>>(members: I) -> Self {
        Formula::Nabla(members.into_iter().collect())
    }

    pub fn mu(x: &str, body: Formula) -> Self {
        Formula::Mu(x.to_string(), Box::new(body))
    }

    pub fn nu(x: &str, body: Formula) -> Self {
        Formula::Nu(x.to_string(), Box::new(body))
    }

    /// `□φ ≔ ∇{φ, ⊥}`.
    pub fn boxed(phi: Formula) -> Self {
        Formula::nabla([phi, Formula::ff()])
    }

    /// `◇φ ≔ ∇{φ} ∧ ∇∅`.
    pub fn dia(phi: Formula) -> Self {
        Formula::and([Formula::nabla([phi]), Formula::nabla([])])
    }

    /// Members of an `and`, `or` or `nab` node.
    pub fn members(&self) -> Option<&FormulaSet> {
        match self {
            Formula::And(s) | Formula::Or(s) | Formula::Nabla(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Formula::Prop(_) | Formula::NegProp(_))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Formula::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Formula::Prop(_) | Formula::NegProp(_) => {}
            Formula::And(s) | Formula::Or(s) | Formula::Nabla(s) => {
                for m in s {
                    m.collect_free(bound, out);
                }
            }
            Formula::Square(b) | Formula::Diamond(b) => b.collect_free(bound, out),
            Formula::Mu(x, b) | Formula::Nu(x, b) => {
                bound.push(x.clone());
                b.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// No μ/ν nodes outside closed subformulas.
    pub fn is_quantifier_free_over_closed(&self) -> bool {
        if self.is_closed() {
            return true;
        }
        match self {
            Formula::Mu(..) | Formula::Nu(..) => false,
            Formula::And(s) | Formula::Or(s) | Formula::Nabla(s) => {
                s.iter().all(|m| m.is_quantifier_free_over_closed())
            }
            Formula::Square(b) | Formula::Diamond(b) => b.is_quantifier_free_over_closed(),
            _ => true,
        }
    }

    pub fn props(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Prop(p) | Formula::NegProp(p) = f {
                out.insert(p.clone());
            }
        });
        out
    }

    /// Names bound by μ/ν anywhere inside.
    pub fn binders(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Mu(x, _) | Formula::Nu(x, _) = f {
                out.insert(x.clone());
            }
        });
        out
    }

    /// Pre-order traversal over every node.
    pub fn visit<F: FnMut(&Formula)>(&self, f: &mut F) {
        f(self);
        match self {
            Formula::And(s) | Formula::Or(s) | Formula::Nabla(s) => {
                for m in s {
                    m.visit(f);
                }
            }
            Formula::Square(b) | Formula::Diamond(b) | Formula::Mu(_, b) | Formula::Nu(_, b) => b.visit(f),
            _ => {}
        }
    }

    pub fn has_sugar(&self) -> bool {
        let mut found = false;
        self.visit(&mut |f| found |= matches!(f, Formula::Square(_) | Formula::Diamond(_)));
        found
    }

    /// Number of nested modalities (∇, □, ◇) on the deepest branch.
    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::And(s) | Formula::Or(s) => s.iter().map(Formula::modal_depth).max().unwrap_or(0),
            Formula::Nabla(s) => 1 + s.iter().map(Formula::modal_depth).max().unwrap_or(0),
            Formula::Square(b) | Formula::Diamond(b) => 1 + b.modal_depth(),
            Formula::Mu(_, b) | Formula::Nu(_, b) => b.modal_depth(),
            _ => 0,
        }
    }

    /// Capture-avoiding substitution of `replacement` for the free
    /// occurrences of `x`.
    pub fn substitute(&self, x: &str, replacement: &Formula) -> Formula {
        let repl_free = replacement.free_vars();
        self.subst_with(x, replacement, &repl_free)
    }

    fn subst_with(&self, x: &str, repl: &Formula, repl_free: &BTreeSet<String>) -> Formula {
        match self {
            Formula::Var(y) if y == x => repl.clone(),
            Formula::Var(_) | Formula::Prop(_) | Formula::NegProp(_) => self.clone(),
            Formula::And(s) => Formula::And(s.iter().map(|m| m.subst_with(x, repl, repl_free)).collect()),
            Formula::Or(s) => Formula::Or(s.iter().map(|m| m.subst_with(x, repl, repl_free)).collect()),
            Formula::Nabla(s) => Formula::Nabla(s.iter().map(|m| m.subst_with(x, repl, repl_free)).collect()),
            Formula::Square(b) => Formula::Square(Box::new(b.subst_with(x, repl, repl_free))),
            Formula::Diamond(b) => Formula::Diamond(Box::new(b.subst_with(x, repl, repl_free))),
            Formula::Mu(y, b) | Formula::Nu(y, b) => {
                if y == x || !b.free_vars().contains(x) {
                    return self.clone();
                }
                let (y2, body) = if repl_free.contains(y) {
                    let mut fresh = format!("{y}'");
                    let body_free = b.free_vars();
                    while repl_free.contains(&fresh) || body_free.contains(&fresh) || fresh == x {
                        fresh.push('\'');
                    }
                    (fresh.clone(), b.substitute(y, &Formula::Var(fresh)))
                } else {
                    (y.clone(), (**b).clone())
                };
                let body = Box::new(body.subst_with(x, repl, repl_free));
                match self {
                    Formula::Mu(..) => Formula::Mu(y2, body),
                    _ => Formula::Nu(y2, body),
                }
            }
        }
    }

    /// Replaces `box φ` by `nab{φ, ff}` and `dia φ` by `and{nab{φ}, nab{}}`,
    /// recursively.
    pub fn desugar(&self) -> Formula {
        match self {
            Formula::Square(b) => Formula::boxed(b.desugar()),
            Formula::Diamond(b) => Formula::dia(b.desugar()),
            Formula::And(s) => Formula::And(s.iter().map(Formula::desugar).collect()),
            Formula::Or(s) => Formula::Or(s.iter().map(Formula::desugar).collect()),
            Formula::Nabla(s) => Formula::Nabla(s.iter().map(Formula::desugar).collect()),
            Formula::Mu(x, b) => Formula::Mu(x.clone(), Box::new(b.desugar())),
            Formula::Nu(x, b) => Formula::Nu(x.clone(), Box::new(b.desugar())),
            _ => self.clone(),
        }
    }

    /// Unwraps `and{φ}` / `or{φ}` singletons.
    pub fn strip_singletons(&self) -> &Formula {
        match self {
            Formula::And(s) | Formula::Or(s) if s.len() == 1 => s.iter().next().unwrap().strip_singletons(),
            _ => self,
        }
    }
}

fn write_set(f: &mut fmt::Formatter<'_>, head: &str, s: &FormulaSet) -> fmt::Result {
    write!(f, "{head}{{")?;
    for (i, m) in s.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{m}")?;
    }
    f.write_str("}")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::And(s) if s.is_empty() => f.write_str("tt"),
            Formula::Or(s) if s.is_empty() => f.write_str("ff"),
            Formula::And(s) => write_set(f, "and", s),
            Formula::Or(s) => write_set(f, "or", s),
            Formula::Nabla(s) => write_set(f, "nab", s),
            Formula::Square(b) => write!(f, "box {b}"),
            Formula::Diamond(b) => write!(f, "dia {b}"),
            Formula::Mu(x, b) => write!(f, "mu {x}. {b}"),
            Formula::Nu(x, b) => write!(f, "nu {x}. {b}"),
            Formula::Var(x) | Formula::Prop(x) => f.write_str(x),
            Formula::NegProp(p) => write!(f, "!{p}"),
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{self}`")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_semantics() {
        let a = Formula::or([Formula::prop("p"), Formula::prop("q"), Formula::prop("p")]);
        let b = Formula::or([Formula::prop("q"), Formula::prop("p")]);
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "or{p, q}");
    }

    #[test]
    fn sugar_constructors() {
        assert_eq!(Formula::boxed(Formula::prop("p")).to_string(), "nab{ff, p}");
        assert_eq!(Formula::dia(Formula::prop("p")).to_string(), "and{nab{}, nab{p}}");
    }

    #[test]
    fn free_vars_and_closedness() {
        let body = Formula::or([Formula::prop("p"), Formula::dia(Formula::var("x"))]);
        assert_eq!(body.free_vars(), BTreeSet::from(["x".to_string()]));
        assert!(Formula::mu("x", body).is_closed());
    }

    #[test]
    fn substitution_avoids_capture() {
        // (mu y. nab{x, y})[y/x] must not capture the substituted y.
        let f = Formula::mu("y", Formula::nabla([Formula::var("x"), Formula::var("y")]));
        let g = f.substitute("x", &Formula::var("y"));
        assert_eq!(g.free_vars(), BTreeSet::from(["y".to_string()]));
        assert_eq!(g.to_string(), "mu y'. nab{y, y'}");
    }

    #[test]
    fn modal_depth_counts_nesting() {
        let f = Formula::nabla([Formula::nabla([Formula::prop("p")]), Formula::prop("q")]);
        assert_eq!(f.modal_depth(), 2);
        assert_eq!(Formula::prop("p").modal_depth(), 0);
    }
}
