//! Denotations over finite frames: direct μ/ν model checking, the stage
//! valuations `V^n` of an equation system, signature approximations and
//! per-frame closure ordinals.
//!
//! Everything here is naive on purpose. Fixpoints are Kleene iterations
//! recomputed at every nesting, which keeps this module usable as the oracle
//! the rest of the crate is tested against.

use std::collections::{BTreeMap, HashMap};

use crate::frame::{Frame, StateSet};
use crate::syntax::{EquationSystem, EquationalFormula, Formula};

/// Variable assignment; unmapped variables denote ∅.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Valuation(BTreeMap<String, StateSet>);

impl Valuation {
    pub fn new() -> Self {
        Valuation(BTreeMap::new())
    }

    pub fn get(&self, x: &str) -> Option<&StateSet> {
        self.0.get(x)
    }

    pub fn set(&mut self, x: &str, u: StateSet) {
        self.0.insert(x.to_string(), u);
    }

    /// `V[x ↦ U]`.
    pub fn with(&self, x: &str, u: StateSet) -> Valuation {
        let mut v = self.clone();
        v.set(x, u);
        v
    }
}

impl FromIterator<(String, StateSet)> for Valuation {
    fn from_iter<I: IntoIterator<Item = (String, StateSet)>>(iter: I) -> Self {
        Valuation(iter.into_iter().collect())
    }
}

/// `{v : R[v] ⊆ U}`.
pub fn box_pre(frame: &Frame, u: &StateSet) -> StateSet {
    StateSet::from_iter_in(
        frame.len(),
        frame.states().filter(|&v| frame.successors(v).iter().all(|&t| u.contains(t))),
    )
}

/// `{v : R[v] ∩ U ≠ ∅}`.
pub fn dia_pre(frame: &Frame, u: &StateSet) -> StateSet {
    StateSet::from_iter_in(
        frame.len(),
        frame.states().filter(|&v| frame.successors(v).iter().any(|&t| u.contains(t))),
    )
}

/// The ∇ operator on sets of states: states all of whose successors fall in
/// a single member, plus states with a successor in every member (`⋂∅ = S`).
pub fn nabla_op(frame: &Frame, sets: &[StateSet]) -> StateSet {
    let mut meet = frame.full_set();
    for u in sets {
        meet.intersect_with(u);
    }
    let mut out = dia_pre(frame, &meet);
    for u in sets {
        out.union_with(&box_pre(frame, u));
    }
    out
}

pub fn eval(phi: &Formula, frame: &Frame, val: &Valuation) -> StateSet {
    let n = frame.len();
    match phi {
        Formula::Prop(p) => frame.label(p),
        Formula::NegProp(p) => frame.label(p).complement(),
        Formula::Var(x) => val.get(x).cloned().unwrap_or_else(|| StateSet::empty(n)),
        Formula::And(s) => {
            let mut out = StateSet::full(n);
            for m in s {
                out.intersect_with(&eval(m, frame, val));
                if out.is_empty() {
                    break;
                }
            }
            out
        }
        Formula::Or(s) => {
            let mut out = StateSet::empty(n);
            for m in s {
                out.union_with(&eval(m, frame, val));
            }
            out
        }
        Formula::Nabla(s) => {
            let sets: Vec<StateSet> = s.iter().map(|m| eval(m, frame, val)).collect();
            nabla_op(frame, &sets)
        }
        Formula::Square(b) => box_pre(frame, &eval(b, frame, val)),
        Formula::Diamond(b) => dia_pre(frame, &eval(b, frame, val)),
        Formula::Mu(x, b) => fixpoint(x, b, frame, val, StateSet::empty(n)),
        Formula::Nu(x, b) => fixpoint(x, b, frame, val, StateSet::full(n)),
    }
}

fn fixpoint(x: &str, body: &Formula, frame: &Frame, val: &Valuation, start: StateSet) -> StateSet {
    let mut cur = start;
    loop {
        let next = eval(body, frame, &val.with(x, cur.clone()));
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Denotation of a closed formula.
pub fn eval_closed(phi: &Formula, frame: &Frame) -> StateSet {
    eval(phi, frame, &Valuation::new())
}

/// The stage valuations `V^0 ⊆ V^1 ⊆ …` of a system on a frame, computed up
/// to the first repetition. Stages past the last computed one equal it.
#[derive(Clone, Debug)]
pub struct Approximations<'a> {
    system: &'a EquationSystem,
    frame: &'a Frame,
    stages: Vec<Valuation>,
}

impl<'a> Approximations<'a> {
    pub fn compute(system: &'a EquationSystem, frame: &'a Frame) -> Self {
        let empty: Valuation = system.vars().iter().map(|x| (x.clone(), frame.empty_set())).collect();
        let mut stages = vec![empty];
        loop {
            let prev = stages.last().unwrap();
            let next: Valuation = system
                .equations()
                .map(|(x, e)| {
                    let mut u = prev.get(x).cloned().unwrap_or_else(|| frame.empty_set());
                    u.union_with(&eval(e, frame, prev));
                    (x.to_string(), u)
                })
                .collect();
            if &next == prev {
                break;
            }
            stages.push(next);
        }
        Approximations { system, frame, stages }
    }

    pub fn system(&self) -> &EquationSystem {
        self.system
    }

    pub fn frame(&self) -> &Frame {
        self.frame
    }

    /// Least `H` with `V^H = V^{H+1}`.
    pub fn stabilization(&self) -> usize {
        self.stages.len() - 1
    }

    /// `V^n`.
    pub fn stage(&self, n: usize) -> &Valuation {
        &self.stages[n.min(self.stages.len() - 1)]
    }

    /// `⟦ψ^n⟧`.
    pub fn denote(&self, psi: &Formula, n: usize) -> StateSet {
        eval(psi, self.frame, self.stage(n))
    }

    /// `⟦ψ⟧` at the stabilized stage.
    pub fn limit(&self, psi: &Formula) -> StateSet {
        self.denote(psi, self.stabilization())
    }

    /// Least `n` with `s ∈ ⟦ψ^n⟧`, if any.
    pub fn least_stage(&self, psi: &Formula, s: usize) -> Option<usize> {
        (0..=self.stabilization()).find(|&n| self.denote(psi, n).contains(s))
    }

    /// Least `n` per state, for every state of the frame at once.
    pub fn least_stages(&self, psi: &Formula) -> Vec<Option<usize>> {
        let mut out = vec![None; self.frame.len()];
        for n in 0..=self.stabilization() {
            for s in self.denote(psi, n).iter() {
                out[s].get_or_insert(n);
            }
        }
        out
    }

    /// Least `κ` with `⟦ψ^κ⟧ = ⟦ψ⟧`.
    pub fn closure_ordinal(&self, psi: &Formula) -> usize {
        let target = self.limit(psi);
        (0..=self.stabilization()).find(|&n| self.denote(psi, n) == target).expect("stabilized stage matches")
    }
}

/// `⟦ψ^α⟧` for natural `α`.
pub fn approx(psi: &Formula, alpha: usize, system: &EquationSystem, frame: &Frame) -> StateSet {
    Approximations::compute(system, frame).denote(psi, alpha)
}

/// Denotation of `ψ` under a signature, one natural per variable in
/// declaration order: `⟦x_i^σ⟧ = ⋃_{β<σ_i} ⟦E(x_i)^{σ[i↦β]}⟧`.
pub fn sig_approx(psi: &Formula, sig: &[usize], system: &EquationSystem, frame: &Frame) -> StateSet {
    assert_eq!(sig.len(), system.len(), "signature length must match the number of variables");
    let mut memo = HashMap::new();
    let val = sig_valuation(sig, system, frame, &mut memo);
    eval(psi, frame, &val)
}

fn sig_valuation(
    sig: &[usize],
    system: &EquationSystem,
    frame: &Frame,
    memo: &mut HashMap<Vec<usize>, Valuation>,
) -> Valuation {
    if let Some(v) = memo.get(sig) {
        return v.clone();
    }
    let mut val = Valuation::new();
    for (i, (x, e)) in system.equations().enumerate() {
        let mut u = frame.empty_set();
        for beta in 0..sig[i] {
            let mut lower = sig.to_vec();
            lower[i] = beta;
            let inner = sig_valuation(&lower, system, frame, memo);
            u.union_with(&eval(e, frame, &inner));
        }
        val.set(x, u);
    }
    memo.insert(sig.to_vec(), val.clone());
    val
}

/// Per-frame closure ordinal of an equational formula: the least `κ` with
/// `⟦x_0^κ⟧` equal to the formula's denotation.
pub fn closure_ordinal_on(frame: &Frame, phi: &EquationalFormula) -> usize {
    Approximations::compute(phi.system(), frame).closure_ordinal(&Formula::var(phi.init()))
}

/// Denotation of an equational formula.
pub fn eval_equational(phi: &EquationalFormula, frame: &Frame) -> StateSet {
    Approximations::compute(phi.system(), frame).limit(&Formula::var(phi.init()))
}
