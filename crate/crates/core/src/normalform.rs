//! Translations between presentations: Σ-formulas to equation systems, sugar
//! removal, and equation systems to conjunctive ones.
//!
//! The conjunctive translation works on a clause representation. After every
//! non-variable ∇ member has been moved into its own equation, a body is a
//! boolean combination of closed formulas and `∇Y` atoms over variables. Its
//! CNF has clauses `⋁Γ ∨ ∇Y_1 ∨ … ∨ ∇Y_m`; the ∇ atoms of a clause are merged
//! pairwise with the dual of the cover distributive law
//!
//! ```text
//! ∇A ∨ ∇B  ≡  ⋀ { ∇{a ∨ b : (a, b) ∈ Z} : Z ⊆ A × B full }
//! ```
//!
//! where a disjunction of variables becomes a fresh variable whose equation is
//! the disjunction of their equations. Clauses without any ∇ atom get the
//! two-clause gadget `(⋁Γ ∨ ∇{⊥}) ∧ (⋁Γ ∨ ∇∅)`, with `⊥` the variable of
//! `⊥ = ∇{⊥} ∧ ∇∅`. Every result is checked against the input on a sweep of
//! frames before it is returned.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::frame::{gen, Frame};
use crate::semantics::Approximations;
use crate::syntax::system::unguarded_vars;
use crate::syntax::{EquationSystem, EquationalFormula, Formula, SystemError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalFormError {
    #[error("not in the Σ-fragment: {0}")]
    NotSigmaFragment(String),
    #[error("variable `{0}` occurs outside the scope of every modality")]
    UnguardedVariable(String),
    #[error("translation failed at {subterm}: {detail}")]
    TranslationFailure { subterm: Formula, detail: String },
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Removes `box`/`dia` nodes.
pub fn desugar(phi: &Formula) -> Formula {
    phi.desugar()
}

/// Hands out `_y0, _y1, …`, skipping names already in use.
struct Fresh {
    next: usize,
    taken: BTreeSet<String>,
}

impl Fresh {
    fn new(taken: BTreeSet<String>) -> Self {
        Fresh { next: 0, taken }
    }

    fn reserve(&mut self, name: &str) {
        self.taken.insert(name.to_string());
    }

    fn take(&mut self) -> String {
        loop {
            let name = format!("_y{}", self.next);
            self.next += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    fn take_like(&mut self, base: &str) -> String {
        if self.taken.insert(base.to_string()) {
            return base.to_string();
        }
        let mut name = format!("{base}'");
        while !self.taken.insert(name.clone()) {
            name.push('\'');
        }
        name
    }
}

fn bottom_body(bot: &str) -> Formula {
    Formula::and([Formula::nabla([Formula::var(bot)]), Formula::nabla([])])
}

/// `(φ ∨ ∇{⊥}) ∧ (φ ∨ ∇∅)`, which denotes `φ`.
fn gadget(phi: &Formula, bot: &str) -> Formula {
    Formula::and([
        Formula::or([phi.clone(), Formula::nabla([Formula::var(bot)])]),
        Formula::or([phi.clone(), Formula::nabla([])]),
    ])
}

/// Replaces unguarded occurrences of variables by their (guarded) equations
/// until none remain. Occurrences that keep coming back after as many rounds
/// as there are equations sit on an unguarded cycle.
fn unfold_unguarded(body: &Formula, eqs: &BTreeMap<String, Formula>) -> Result<Formula, NormalFormError> {
    let vars: BTreeSet<String> = eqs.keys().cloned().collect();
    let mut cur = body.clone();
    for _ in 0..=eqs.len() {
        let open = unguarded_vars(&cur, &vars);
        if open.is_empty() {
            return Ok(cur);
        }
        for x in &open {
            cur = cur.substitute(x, &eqs[x]);
        }
    }
    let x = unguarded_vars(&cur, &vars).into_iter().next().expect("still unguarded");
    Err(NormalFormError::UnguardedVariable(x))
}

/// Equation system for a closed Σ-formula. Every μ reachable from the top
/// through connectives, ∇ and μ becomes one equation; ν subformulas must be
/// closed and stay inside equation bodies. A top that is not a μ gets a fresh
/// initial variable defined by the two-clause gadget.
pub fn to_equational(phi: &Formula) -> Result<EquationalFormula, NormalFormError> {
    let phi = phi.desugar();
    if let Some(x) = phi.free_vars().into_iter().next() {
        return Err(NormalFormError::NotSigmaFragment(format!("free variable `{x}`")));
    }
    let mut bad = None;
    phi.visit(&mut |g| {
        if bad.is_none() && matches!(g, Formula::Nu(..)) && !g.is_closed() {
            bad = Some(g.clone());
        }
    });
    if let Some(g) = bad {
        return Err(NormalFormError::NotSigmaFragment(format!("ν subformula {g} binds an outer variable")));
    }

    let mut fresh = Fresh::new(phi.props());
    let mut order: Vec<String> = Vec::new();
    let mut eqs: BTreeMap<String, Formula> = BTreeMap::new();

    // Rewrites `f`, turning external μs into variables. `scope` maps binder
    // names visible at this point to their equation variables.
    fn lift(
        f: &Formula,
        scope: &mut Vec<(String, String)>,
        fresh: &mut Fresh,
        order: &mut Vec<String>,
        eqs: &mut BTreeMap<String, Formula>,
    ) -> Formula {
        match f {
            Formula::Var(x) => {
                let v = scope.iter().rev().find(|(b, _)| b == x).map(|(_, v)| v.clone());
                Formula::Var(v.unwrap_or_else(|| x.clone()))
            }
            Formula::And(s) => Formula::And(s.iter().map(|m| lift(m, scope, fresh, order, eqs)).collect()),
            Formula::Or(s) => Formula::Or(s.iter().map(|m| lift(m, scope, fresh, order, eqs)).collect()),
            Formula::Nabla(s) => {
                Formula::Nabla(s.iter().map(|m| lift(m, scope, fresh, order, eqs)).collect())
            }
            Formula::Mu(x, b) => {
                let v = fresh.take_like(x);
                order.push(v.clone());
                scope.push((x.clone(), v.clone()));
                let body = lift(b, scope, fresh, order, eqs);
                scope.pop();
                eqs.insert(v.clone(), body);
                Formula::Var(v)
            }
            // Closed ν formulas and literals are kept verbatim.
            _ => f.clone(),
        }
    }

    // Names bound inside kept ν formulas must not be reused as equation
    // variables, or printing the system would make them ambiguous.
    let mut nu_binders = BTreeSet::new();
    phi.visit(&mut |g| {
        if let Formula::Nu(..) = g {
            nu_binders.extend(g.binders());
        }
    });
    for b in &nu_binders {
        fresh.reserve(b);
    }

    let top = lift(&phi, &mut Vec::new(), &mut fresh, &mut order, &mut eqs);
    let init = match &top {
        Formula::Var(v) if eqs.contains_key(v) && matches!(phi, Formula::Mu(..)) => v.clone(),
        _ => {
            let z = fresh.take();
            let bot = fresh.take();
            let unfolded = unfold_unguarded(&top, &eqs)?;
            order.insert(0, z.clone());
            order.push(bot.clone());
            eqs.insert(z.clone(), gadget(&unfolded, &bot));
            eqs.insert(bot.clone(), bottom_body(&bot));
            z
        }
    };
    let snapshot = eqs.clone();
    for x in &order {
        let body = unfold_unguarded(&snapshot[x], &snapshot)?;
        eqs.insert(x.clone(), body);
    }
    let system = EquationSystem::new(order.iter().map(|x| (x.clone(), eqs[x].clone())).collect())?;
    Ok(EquationalFormula::new(system, &init)?)
}

/// Why a fresh variable was introduced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "role", rename_all = "kebab-case")]
pub enum FreshRole {
    /// Stands for a non-variable, non-closed ∇ member.
    NablaMember { member: String },
    /// Stands for a closed ∇ member, defined by the gadget.
    ClosedMember { member: String },
    /// Disjunction of the listed variables.
    Union { of: Vec<String> },
    /// The variable whose equation denotes `⊥`.
    Bottom,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FreshVar {
    pub name: String,
    #[serde(flatten)]
    pub role: FreshRole,
}

/// What the equivalence oracle saw.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OracleVerdict {
    pub exhaustive_frames: usize,
    pub random_frames: usize,
    pub mismatches: usize,
    /// Text of the first frame on which input and output differ.
    pub first_mismatch: Option<String>,
}

impl OracleVerdict {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

#[derive(Clone, Debug)]
pub struct TranslationReport {
    pub input: EquationalFormula,
    pub output: EquationalFormula,
    pub fresh: Vec<FreshVar>,
    pub verdict: OracleVerdict,
    /// Per-frame closure ordinals `(input, output)` on the random frames.
    /// Diagnostics only; no inequality between them is asserted.
    pub closure_ordinals: Vec<(usize, usize)>,
}

/// Settings for the equivalence oracle.
#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub exhaustive_states: usize,
    pub random_frames: usize,
    pub random_max_states: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { exhaustive_states: 3, random_frames: 500, random_max_states: 8, seed: 0x5eed }
    }
}

/// Compares two equational formulas on every frame of the configured sweep.
pub fn oracle(
    a: &EquationalFormula,
    b: &EquationalFormula,
    cfg: &OracleConfig,
) -> (OracleVerdict, Vec<(usize, usize)>) {
    let props: BTreeSet<String> = a.system().props().union(&b.system().props()).cloned().collect();
    let props: Vec<&str> = props.iter().map(String::as_str).collect();
    let exhaustive = gen::enumerate(cfg.exhaustive_states, &props);
    let random = gen::random_frames(cfg.seed, cfg.random_frames, cfg.random_max_states, &props);
    let xa = Formula::var(a.init());
    let xb = Formula::var(b.init());
    let mut verdict = OracleVerdict {
        exhaustive_frames: exhaustive.len(),
        random_frames: random.len(),
        mismatches: 0,
        first_mismatch: None,
    };
    let mut cos = Vec::with_capacity(random.len());
    let mut check = |f: &Frame, record: bool| {
        let pa = Approximations::compute(a.system(), f);
        let pb = Approximations::compute(b.system(), f);
        if pa.limit(&xa) != pb.limit(&xb) {
            verdict.mismatches += 1;
            verdict.first_mismatch.get_or_insert_with(|| f.to_text(None));
        }
        if record {
            cos.push((pa.closure_ordinal(&xa), pb.closure_ordinal(&xb)));
        }
    };
    for f in &exhaustive {
        check(f, false);
    }
    for f in &random {
        check(f, true);
    }
    (verdict, cos)
}

/// One clause `⋁closed ∨ ∇N_1 ∨ …`. A ∇ family is a set of members, each
/// member a set of variables read as their disjunction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Clause {
    closed: BTreeSet<Formula>,
    nablas: Vec<Family>,
}

type Family = BTreeSet<BTreeSet<String>>;

/// `⋀` of clauses.
type Cnf = Vec<Clause>;

fn cnf_or(a: &Cnf, b: &Cnf) -> Cnf {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for c in a {
        for d in b {
            let mut closed = c.closed.clone();
            closed.extend(d.closed.iter().cloned());
            let mut nablas = c.nablas.clone();
            nablas.extend(d.nablas.iter().cloned());
            out.push(Clause { closed, nablas });
        }
    }
    out
}

/// All relations `Z ⊆ A × B` whose projections cover `A` and `B`.
fn full_relations(a: &[BTreeSet<String>], b: &[BTreeSet<String>]) -> Vec<Family> {
    let pairs: Vec<(usize, usize)> = (0..a.len()).flat_map(|i| (0..b.len()).map(move |j| (i, j))).collect();
    assert!(pairs.len() < 24, "∇ merge too large");
    let mut out = BTreeSet::new();
    for mask in 0u32..(1 << pairs.len()) {
        let chosen: Vec<(usize, usize)> =
            pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &p)| p).collect();
        let covers_a = (0..a.len()).all(|i| chosen.iter().any(|&(x, _)| x == i));
        let covers_b = (0..b.len()).all(|j| chosen.iter().any(|&(_, y)| y == j));
        if covers_a && covers_b {
            let fam: Family = chosen.iter().map(|&(i, j)| a[i].union(&b[j]).cloned().collect()).collect();
            out.insert(fam);
        }
    }
    out.into_iter().collect()
}

/// `∇A ∨ ∇B` as a conjunction of single ∇ atoms.
fn merge(a: &Family, b: &Family) -> Vec<Family> {
    let a: Vec<_> = a.iter().cloned().collect();
    let b: Vec<_> = b.iter().cloned().collect();
    full_relations(&a, &b)
}

/// Splits clauses with several ∇ atoms into clauses with at most one.
fn single_nabla(cnf: Cnf) -> Vec<(BTreeSet<Formula>, Option<Family>)> {
    let mut out = BTreeSet::new();
    for clause in cnf {
        if clause.closed.contains(&Formula::tt()) {
            continue;
        }
        let mut iter = clause.nablas.into_iter();
        let Some(first) = iter.next() else {
            out.insert((clause.closed, None));
            continue;
        };
        let mut conj = vec![first];
        for n in iter {
            conj = conj.iter().flat_map(|f| merge(f, &n)).collect::<BTreeSet<_>>().into_iter().collect();
        }
        for fam in conj {
            out.insert((clause.closed.clone(), Some(fam)));
        }
    }
    out.into_iter().collect()
}

struct Translator<'a> {
    source: &'a EquationSystem,
    fresh: Fresh,
    order: Vec<String>,
    /// CNF of each variable's equation, members flattened to base variables.
    cnf: BTreeMap<String, Cnf>,
    /// Base variables a variable stands for (itself, or the union's parts).
    base: BTreeMap<String, BTreeSet<String>>,
    unions: BTreeMap<BTreeSet<String>, String>,
    members: BTreeMap<Formula, String>,
    bottom: Option<String>,
    extra: BTreeMap<String, Formula>,
    roles: Vec<FreshVar>,
    pending: Vec<String>,
}

impl<'a> Translator<'a> {
    fn bottom(&mut self) -> String {
        if let Some(b) = &self.bottom {
            return b.clone();
        }
        let b = self.fresh.take();
        self.order.push(b.clone());
        self.extra.insert(b.clone(), bottom_body(&b));
        self.roles.push(FreshVar { name: b.clone(), role: FreshRole::Bottom });
        self.base.insert(b.clone(), BTreeSet::from([b.clone()]));
        let fam: Family = BTreeSet::from([BTreeSet::from([b.clone()])]);
        let empty: Family = BTreeSet::new();
        self.cnf.insert(
            b.clone(),
            vec![
                Clause { closed: BTreeSet::new(), nablas: vec![fam] },
                Clause { closed: BTreeSet::new(), nablas: vec![empty] },
            ],
        );
        self.bottom = Some(b.clone());
        b
    }

    /// Base-variable set of a ∇ member, hoisting it into a fresh equation
    /// unless it already is a variable.
    fn member(&mut self, m: &Formula) -> Result<BTreeSet<String>, NormalFormError> {
        if let Formula::Var(v) = m {
            return Ok(self.base.get(v).cloned().unwrap_or_else(|| BTreeSet::from([v.clone()])));
        }
        if let Some(v) = self.members.get(m) {
            return Ok(BTreeSet::from([v.clone()]));
        }
        let y = self.fresh.take();
        self.members.insert(m.clone(), y.clone());
        self.order.push(y.clone());
        self.base.insert(y.clone(), BTreeSet::from([y.clone()]));
        if m.is_closed() {
            let bot = self.bottom();
            self.extra.insert(y.clone(), gadget(m, &bot));
            self.roles
                .push(FreshVar { name: y.clone(), role: FreshRole::ClosedMember { member: m.to_string() } });
        } else {
            let eqs: BTreeMap<String, Formula> = self
                .source
                .equations()
                .map(|(x, e)| (x.to_string(), e.clone()))
                .chain(self.extra.clone())
                .collect();
            let body = unfold_unguarded(m, &eqs)?;
            self.extra.insert(y.clone(), body);
            self.roles
                .push(FreshVar { name: y.clone(), role: FreshRole::NablaMember { member: m.to_string() } });
        }
        self.pending.push(y.clone());
        Ok(BTreeSet::from([y]))
    }

    fn cnf_of(&mut self, f: &Formula) -> Result<Cnf, NormalFormError> {
        if f.is_closed() {
            return Ok(vec![Clause { closed: BTreeSet::from([f.clone()]), nablas: vec![] }]);
        }
        match f {
            Formula::And(s) => {
                let mut out = Vec::new();
                for m in s {
                    out.extend(self.cnf_of(m)?);
                }
                Ok(out)
            }
            Formula::Or(s) => {
                let mut acc: Cnf = vec![Clause { closed: BTreeSet::new(), nablas: vec![] }];
                for m in s {
                    let c = self.cnf_of(m)?;
                    acc = cnf_or(&acc, &c);
                }
                Ok(acc)
            }
            Formula::Nabla(s) => {
                let mut fam = Family::new();
                for m in s {
                    fam.insert(self.member(m)?);
                }
                Ok(vec![Clause { closed: BTreeSet::new(), nablas: vec![fam] }])
            }
            Formula::Var(x) => Err(NormalFormError::UnguardedVariable(x.clone())),
            other => Err(NormalFormError::TranslationFailure {
                subterm: other.clone(),
                detail: "open fixpoint inside an equation".into(),
            }),
        }
    }

    fn union_var(&mut self, set: &BTreeSet<String>) -> String {
        if set.len() == 1 {
            return set.iter().next().unwrap().clone();
        }
        if let Some(w) = self.unions.get(set) {
            return w.clone();
        }
        let w = self.fresh.take();
        self.unions.insert(set.clone(), w.clone());
        self.order.push(w.clone());
        self.base.insert(w.clone(), set.clone());
        self.roles
            .push(FreshVar { name: w.clone(), role: FreshRole::Union { of: set.iter().cloned().collect() } });
        self.pending.push(w.clone());
        w
    }

    fn emit(&mut self, x: &str) -> Result<Formula, NormalFormError> {
        let clauses = single_nabla(self.cnf[x].clone());
        if clauses.is_empty() {
            return Ok(Formula::or([Formula::tt(), Formula::nabla([])]));
        }
        let mut conjuncts = Vec::new();
        for (closed, fam) in clauses {
            match fam {
                Some(fam) => {
                    let members: Vec<Formula> =
                        fam.iter().map(|s| Formula::var(&self.union_var(s))).collect();
                    let mut ms: Vec<Formula> = closed.into_iter().collect();
                    ms.push(Formula::nabla(members));
                    conjuncts.push(if ms.len() == 1 { ms.pop().unwrap() } else { Formula::or(ms) });
                }
                None => {
                    let bot = self.bottom();
                    let mut a: Vec<Formula> = closed.iter().cloned().collect();
                    a.push(Formula::nabla([Formula::var(&bot)]));
                    let mut b: Vec<Formula> = closed.into_iter().collect();
                    b.push(Formula::nabla([]));
                    conjuncts.push(Formula::or(a));
                    conjuncts.push(Formula::or(b));
                }
            }
        }
        Ok(if conjuncts.len() == 1 { conjuncts.pop().unwrap() } else { Formula::and(conjuncts) })
    }
}

/// Conjunctive equational formula equivalent to `phi`, checked by the oracle
/// with the default configuration.
pub fn to_conjunctive(
    phi: &EquationalFormula,
) -> Result<(EquationalFormula, TranslationReport), NormalFormError> {
    to_conjunctive_with(phi, &OracleConfig::default())
}

pub fn to_conjunctive_with(
    phi: &EquationalFormula,
    cfg: &OracleConfig,
) -> Result<(EquationalFormula, TranslationReport), NormalFormError> {
    let sys = phi.system();
    let mut taken: BTreeSet<String> = sys.var_set();
    taken.extend(sys.props());
    for (_, e) in sys.equations() {
        taken.extend(e.binders());
    }
    let mut t = Translator {
        source: sys,
        fresh: Fresh::new(taken),
        order: sys.vars().to_vec(),
        cnf: BTreeMap::new(),
        base: sys.vars().iter().map(|x| (x.clone(), BTreeSet::from([x.clone()]))).collect(),
        unions: BTreeMap::new(),
        members: BTreeMap::new(),
        bottom: None,
        extra: BTreeMap::new(),
        roles: Vec::new(),
        pending: sys.vars().to_vec(),
    };
    let mut done: BTreeMap<String, Formula> = BTreeMap::new();
    // Phase one: CNF for every base variable, including hoisted members.
    // Union variables are resolved afterwards from their parts' CNFs.
    let mut unions_seen = Vec::new();
    while let Some(x) = t.pending.pop() {
        if t.cnf.contains_key(&x) || unions_seen.contains(&x) {
            continue;
        }
        if t.unions.values().any(|w| *w == x) {
            unions_seen.push(x.clone());
            continue;
        }
        let body = sys
            .equation(&x)
            .cloned()
            .or_else(|| t.extra.get(&x).cloned())
            .expect("every variable has a body");
        let c = t.cnf_of(&body)?;
        t.cnf.insert(x, c);
    }
    // Phase two: emit bodies. Emitting may create union variables, whose CNF
    // is the disjunction of their parts' CNFs and may in turn need unions.
    let mut queue: Vec<String> = t.order.clone();
    let mut i = 0;
    while i < queue.len() {
        let x = queue[i].clone();
        i += 1;
        if done.contains_key(&x) {
            continue;
        }
        if !t.cnf.contains_key(&x) {
            let parts = t.base[&x].clone();
            let mut acc: Cnf = vec![Clause { closed: BTreeSet::new(), nablas: vec![] }];
            for p in &parts {
                acc = cnf_or(&acc, &t.cnf[p]);
            }
            t.cnf.insert(x.clone(), acc);
        }
        let keep = sys.equation(&x).filter(|e| sys.is_conjunctive_body(e)).cloned();
        let body = match keep {
            Some(e) => e,
            None => match t.extra.get(&x) {
                Some(e) if t.bottom.as_deref() == Some(x.as_str()) => e.clone(),
                _ => t.emit(&x)?,
            },
        };
        done.insert(x.clone(), body);
        for v in &t.order {
            if !queue.contains(v) {
                queue.push(v.clone());
            }
        }
    }
    let eqs: Vec<(String, Formula)> = t.order.iter().map(|x| (x.clone(), done[x].clone())).collect();
    let system = EquationSystem::new(eqs).map_err(|e| NormalFormError::TranslationFailure {
        subterm: Formula::var(e.variable().unwrap_or(phi.init())),
        detail: e.to_string(),
    })?;
    let output = EquationalFormula::new(system, phi.init())?;
    if !output.is_conjunctive() {
        let bad = output
            .system()
            .equations()
            .find(|(_, e)| !output.system().is_conjunctive_body(e))
            .map(|(_, e)| e.clone())
            .unwrap_or_else(Formula::tt);
        return Err(NormalFormError::TranslationFailure {
            subterm: bad,
            detail: "result is not conjunctive".into(),
        });
    }
    let (verdict, closure_ordinals) = oracle(phi, &output, cfg);
    if !verdict.passed() {
        return Err(NormalFormError::TranslationFailure {
            subterm: Formula::var(phi.init()),
            detail: format!(
                "{} of {} frames disagree; first:\n{}",
                verdict.mismatches,
                verdict.exhaustive_frames + verdict.random_frames,
                verdict.first_mismatch.as_deref().unwrap_or("")
            ),
        });
    }
    let report = TranslationReport {
        input: phi.clone(),
        output: output.clone(),
        fresh: t.roles,
        verdict,
        closure_ordinals,
    };
    Ok((output, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{eval_closed, eval_equational};
    use crate::syntax::{parse_formula, parse_system};

    fn quick() -> OracleConfig {
        OracleConfig { exhaustive_states: 2, random_frames: 60, random_max_states: 5, seed: 1 }
    }

    fn mes(src: &str) -> EquationalFormula {
        parse_system(src).unwrap()
    }

    #[test]
    fn desugar_examples() {
        let f = crate::syntax::parse_formula_sugared("box p").unwrap();
        assert_eq!(desugar(&f).to_string(), "nab{ff, p}");
        let g = crate::syntax::parse_formula_sugared("dia p").unwrap();
        assert_eq!(desugar(&g).to_string(), "and{nab{}, nab{p}}");
        assert_eq!(desugar(&desugar(&g)), desugar(&g));
    }

    #[test]
    fn single_external_mu() {
        let e = to_equational(&parse_formula("mu x. or{p, dia x}").unwrap()).unwrap();
        assert_eq!(e.init(), "x");
        assert_eq!(e.system().vars(), ["x"]);
        assert_eq!(e.system().equation("x").unwrap().to_string(), "or{and{nab{}, nab{x}}, p}");
    }

    #[test]
    fn closed_top_uses_gadget() {
        let phi = parse_formula("or{p, box q}").unwrap();
        let e = to_equational(&phi).unwrap();
        assert_eq!(e.system().len(), 2);
        assert!(e.is_conjunctive());
        for f in gen::enumerate(3, &["p", "q"]) {
            assert_eq!(eval_equational(&e, &f), eval_closed(&phi, &f));
        }
    }

    #[test]
    fn nested_external_mus() {
        let phi = parse_formula("mu x. or{p, dia mu y. or{q, box y, dia x}}").unwrap();
        let e = to_equational(&phi).unwrap();
        assert_eq!(e.system().vars(), ["x", "y"]);
        for f in gen::enumerate(3, &["p", "q"]) {
            assert_eq!(eval_equational(&e, &f), eval_closed(&phi, &f));
        }
    }

    #[test]
    fn unguarded_mu_is_unfolded_or_rejected() {
        // y occurs unguarded in x's body; unfolding it is fine.
        let phi = parse_formula("mu x. mu y. or{p, dia y, box x}").unwrap();
        let e = to_equational(&phi).unwrap();
        for f in gen::enumerate(3, &["p"]) {
            assert_eq!(eval_equational(&e, &f), eval_closed(&phi, &f));
        }
        let bad = parse_formula("mu x. or{p, x}").unwrap();
        assert_eq!(to_equational(&bad), Err(NormalFormError::UnguardedVariable("x".into())));
    }

    #[test]
    fn open_nu_rejected() {
        let phi = parse_formula("mu x. nu y. or{dia x, box y}").unwrap();
        assert!(matches!(to_equational(&phi), Err(NormalFormError::NotSigmaFragment(_))));
    }

    #[test]
    fn conjunctive_input_is_kept() {
        let e = mes("system\ninit: x\nx = or{p, nab{x}}\n");
        let (out, report) = to_conjunctive_with(&e, &quick()).unwrap();
        assert_eq!(out, e);
        assert!(report.fresh.is_empty());
        assert!(report.verdict.passed());
    }

    #[test]
    fn nested_nabla_hoisted() {
        let e = mes("system\ninit: x\nx = nab{nab{x}, q}\n");
        let (out, report) = to_conjunctive_with(&e, &quick()).unwrap();
        assert!(out.is_conjunctive());
        let roles: Vec<&FreshRole> = report.fresh.iter().map(|f| &f.role).collect();
        assert!(roles.contains(&&FreshRole::NablaMember { member: "nab{x}".into() }));
        assert!(roles.contains(&&FreshRole::ClosedMember { member: "q".into() }));
    }

    #[test]
    fn disjunction_of_nablas() {
        let e = mes("system\ninit: x\nx = or{nab{x}, nab{y}}\ny = or{p, dia y}\n");
        let (out, report) = to_conjunctive_with(&e, &quick()).unwrap();
        assert!(out.is_conjunctive());
        assert!(report.fresh.iter().any(|f| matches!(f.role, FreshRole::Union { .. })));
    }

    #[test]
    fn full_relations_count() {
        let a = vec![BTreeSet::from(["a".to_string()]), BTreeSet::from(["b".to_string()])];
        let b = vec![BTreeSet::from(["c".to_string()]), BTreeSet::from(["d".to_string()])];
        // Edge covers of K_{2,2}: 7.
        assert_eq!(full_relations(&a, &b).len(), 7);
        assert!(full_relations(&a, &[]).is_empty());
        assert_eq!(full_relations(&[], &[]).len(), 1);
    }
}
