use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::{Formula, FormulaSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("variable `{0}` has more than one equation")]
    DuplicateEquation(String),
    #[error("equation for `{var}` mentions undeclared variable `{name}`")]
    UnboundVariable { var: String, name: String },
    #[error("equation for `{var}`: `{name}` is not in the scope of a modality")]
    Unguarded { var: String, name: String },
    #[error("equation for `{var}`: fixpoint subformula {formula} is not closed")]
    OpenFixpoint { var: String, formula: String },
    #[error("initial variable `{0}` has no equation")]
    UnknownInit(String),
}

impl SystemError {
    /// The equation the error is about, if any.
    pub fn variable(&self) -> Option<&str> {
        match self {
            SystemError::DuplicateEquation(v) => Some(v),
            SystemError::UnboundVariable { var, .. }
            | SystemError::Unguarded { var, .. }
            | SystemError::OpenFixpoint { var, .. } => Some(var),
            SystemError::UnknownInit(_) => None,
        }
    }
}

/// A finite set of variables, each with a guarded quantifier-free defining
/// formula over the variables and closed formulas.
///
/// The declaration order of the variables is kept; it is the enumeration used
/// by signatures.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EquationSystem {
    order: Vec<String>,
    eqs: BTreeMap<String, Formula>,
}

/// Variables of `x` that occur outside the scope of every modality.
pub(crate) fn unguarded_vars(f: &Formula, vars: &BTreeSet<String>) -> BTreeSet<String> {
    fn go(f: &Formula, vars: &BTreeSet<String>, out: &mut BTreeSet<String>) {
        match f {
            Formula::Var(x) if vars.contains(x) => {
                out.insert(x.clone());
            }
            Formula::And(s) | Formula::Or(s) => s.iter().for_each(|m| go(m, vars, out)),
            // Bound variables of a closed fixpoint are not system variables.
            Formula::Mu(y, b) | Formula::Nu(y, b) => {
                let mut inner = vars.clone();
                inner.remove(y);
                go(b, &inner, out)
            }
            _ => {}
        }
    }
    let mut out = BTreeSet::new();
    go(f, vars, &mut out);
    out
}

impl EquationSystem {
    /// Builds and validates a system. Bodies are desugared first.
    pub fn new(eqs: Vec<(String, Formula)>) -> Result<Self, SystemError> {
        let mut order = Vec::with_capacity(eqs.len());
        let mut map = BTreeMap::new();
        for (x, f) in eqs {
            if map.insert(x.clone(), f.desugar()).is_some() {
                return Err(SystemError::DuplicateEquation(x));
            }
            order.push(x);
        }
        let vars: BTreeSet<String> = order.iter().cloned().collect();
        for x in &order {
            let body = &map[x];
            if let Some(name) = body.free_vars().into_iter().find(|v| !vars.contains(v)) {
                return Err(SystemError::UnboundVariable { var: x.clone(), name });
            }
            let mut open = None;
            body.visit(&mut |g| {
                if open.is_none() && matches!(g, Formula::Mu(..) | Formula::Nu(..)) && !g.is_closed() {
                    open = Some(g.to_string());
                }
            });
            if let Some(formula) = open {
                return Err(SystemError::OpenFixpoint { var: x.clone(), formula });
            }
            if let Some(name) = unguarded_vars(body, &vars).into_iter().next() {
                return Err(SystemError::Unguarded { var: x.clone(), name });
            }
        }
        Ok(EquationSystem { order, eqs: map })
    }

    /// Variables in declaration order.
    pub fn vars(&self) -> &[String] {
        &self.order
    }

    pub fn var_set(&self) -> BTreeSet<String> {
        self.order.iter().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn equation(&self, x: &str) -> Option<&Formula> {
        self.eqs.get(x)
    }

    /// `(x, E(x))` in declaration order.
    pub fn equations(&self) -> impl Iterator<Item = (&str, &Formula)> {
        self.order.iter().map(move |x| (x.as_str(), &self.eqs[x]))
    }

    pub fn index_of(&self, x: &str) -> Option<usize> {
        self.order.iter().position(|v| v == x)
    }

    pub fn props(&self) -> BTreeSet<String> {
        self.eqs.values().flat_map(Formula::props).collect()
    }

    /// Fischer–Ladner style closure: the least set containing every `E(x)`,
    /// closed under taking members of `and`/`or`/`nab` and under one-step
    /// unfolding `σy.ψ ↦ ψ[σy.ψ / y]` of the (closed) fixpoint formulas.
    pub fn closure(&self) -> FormulaSet {
        let mut seen = FormulaSet::new();
        let mut work: Vec<Formula> = self.eqs.values().cloned().collect();
        while let Some(f) = work.pop() {
            if seen.contains(&f) {
                continue;
            }
            match &f {
                Formula::And(s) | Formula::Or(s) | Formula::Nabla(s) => work.extend(s.iter().cloned()),
                Formula::Mu(y, b) | Formula::Nu(y, b) => work.push(b.substitute(y, &f)),
                Formula::Square(b) | Formula::Diamond(b) => work.push((**b).clone()),
                _ => {}
            }
            seen.insert(f);
        }
        seen
    }

    /// Cardinality of the closure.
    pub fn size(&self) -> usize {
        self.closure().len()
    }

    fn is_var_nabla(&self, f: &Formula) -> bool {
        match f {
            Formula::Nabla(s) => s.iter().all(|m| matches!(m, Formula::Var(v) if self.eqs.contains_key(v))),
            _ => false,
        }
    }

    /// `⋁Γ ∨ ∇Y` with `Γ` closed and `Y` a set of system variables.
    fn is_clause(&self, f: &Formula) -> bool {
        let f = f.strip_singletons();
        if self.is_var_nabla(f) {
            return true;
        }
        let Formula::Or(members) = f else {
            return false;
        };
        let open: Vec<&Formula> = members.iter().filter(|m| !m.is_closed()).collect();
        match open.as_slice() {
            [] => members.iter().any(|m| *m.strip_singletons() == Formula::nabla([])),
            [m] => self.is_var_nabla(m.strip_singletons()),
            _ => false,
        }
    }

    /// True iff every equation has the shape `⋀_i (⋁Γ_i ∨ ∇Y_i)`, after
    /// unwrapping singleton `and`/`or` nodes.
    pub fn is_conjunctive(&self) -> bool {
        self.eqs.values().all(|body| self.is_conjunctive_body(body))
    }

    pub fn is_conjunctive_body(&self, body: &Formula) -> bool {
        match body.strip_singletons() {
            Formula::And(conjuncts) => conjuncts.iter().all(|c| self.is_clause(c)),
            other => self.is_clause(other),
        }
    }
}

/// An equation system with a distinguished initial variable.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EquationalFormula {
    system: EquationSystem,
    init: String,
}

impl EquationalFormula {
    pub fn new(system: EquationSystem, init: &str) -> Result<Self, SystemError> {
        if system.equation(init).is_none() {
            return Err(SystemError::UnknownInit(init.to_string()));
        }
        Ok(EquationalFormula { system, init: init.to_string() })
    }

    pub fn system(&self) -> &EquationSystem {
        &self.system
    }

    pub fn init(&self) -> &str {
        &self.init
    }

    pub fn is_conjunctive(&self) -> bool {
        self.system.is_conjunctive()
    }
}

/// The `.mes` text form; [`super::parse_system`] is its inverse.
impl fmt::Display for EquationalFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system")?;
        writeln!(f, "init: {}", self.init)?;
        for (x, body) in self.system.equations() {
            writeln!(f, "{x} = {body}")?;
        }
        Ok(())
    }
}
