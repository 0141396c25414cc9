//! Brute-force reference semantics over plain boolean vectors, written
//! without the library's evaluator so tests can compare against it.
#![allow(dead_code)]

use std::collections::HashMap;

use nabla_core::{EquationSystem, EquationalFormula, Formula, Frame, StateSet};

pub type Bits = Vec<bool>;
pub type Env = HashMap<String, Bits>;

fn nabla_at(frame: &Frame, s: usize, members: &[Bits]) -> bool {
    let succ = frame.successors(s);
    let some_covers = members.iter().any(|m| succ.iter().all(|&t| m[t]));
    let some_meets = succ.iter().any(|&t| members.iter().all(|m| m[t]));
    some_covers || some_meets
}

pub fn eval(f: &Formula, frame: &Frame, env: &Env) -> Bits {
    let n = frame.len();
    match f {
        Formula::Prop(p) => (0..n).map(|s| frame.has_label(p, s)).collect(),
        Formula::NegProp(p) => (0..n).map(|s| !frame.has_label(p, s)).collect(),
        Formula::Var(x) => env.get(x).cloned().unwrap_or_else(|| panic!("unbound {x}")),
        Formula::And(gs) => {
            let parts: Vec<Bits> = gs.iter().map(|g| eval(g, frame, env)).collect();
            (0..n).map(|s| parts.iter().all(|b| b[s])).collect()
        }
        Formula::Or(gs) => {
            let parts: Vec<Bits> = gs.iter().map(|g| eval(g, frame, env)).collect();
            (0..n).map(|s| parts.iter().any(|b| b[s])).collect()
        }
        Formula::Nabla(gs) => {
            let parts: Vec<Bits> = gs.iter().map(|g| eval(g, frame, env)).collect();
            (0..n).map(|s| nabla_at(frame, s, &parts)).collect()
        }
        Formula::Square(g) => {
            let b = eval(g, frame, env);
            (0..n).map(|s| frame.successors(s).iter().all(|&t| b[t])).collect()
        }
        Formula::Diamond(g) => {
            let b = eval(g, frame, env);
            (0..n).map(|s| frame.successors(s).iter().any(|&t| b[t])).collect()
        }
        Formula::Mu(x, body) | Formula::Nu(x, body) => {
            let mut cur = vec![matches!(f, Formula::Nu(..)); n];
            loop {
                let mut inner = env.clone();
                inner.insert(x.clone(), cur.clone());
                let next = eval(body, frame, &inner);
                if next == cur {
                    return cur;
                }
                cur = next;
            }
        }
    }
}

/// Stages `V^0, V^1, …` of a system, up to and including the first repeat.
pub fn stages(sys: &EquationSystem, frame: &Frame) -> Vec<Env> {
    let n = frame.len();
    let mut cur: Env = sys.vars().iter().map(|x| (x.clone(), vec![false; n])).collect();
    let mut out = vec![cur.clone()];
    loop {
        let mut next = cur.clone();
        for (x, e) in sys.equations() {
            let add = eval(e, frame, &cur);
            for (v, a) in next.get_mut(x).unwrap().iter_mut().zip(add) {
                *v |= a;
            }
        }
        out.push(next.clone());
        if next == cur {
            return out;
        }
        cur = next;
    }
}

pub fn denotation(ef: &EquationalFormula, frame: &Frame) -> Bits {
    stages(ef.system(), frame).last().unwrap()[ef.init()].clone()
}

/// Least stage at which the initial variable reaches its limit.
pub fn closure_ordinal(ef: &EquationalFormula, frame: &Frame) -> usize {
    let st = stages(ef.system(), frame);
    let x = ef.init();
    let limit = &st.last().unwrap()[x];
    st.iter().position(|v| &v[x] == limit).unwrap()
}

pub fn to_bits(set: &StateSet, n: usize) -> Bits {
    (0..n).map(|s| set.contains(s)).collect()
}
