//! Ordinal-annotated trees: limit states, repetition pairs, the pigeonhole
//! bound, branch replacement ("pumping"), and bounded estimates of the best
//! root annotation reachable for a given root profile.

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::annotation::{check_relevant, AnnSet, Annotation, Violation};
use crate::frame::{Frame, FrameError, TreeFrame};
use crate::ordinal::Ordinal;
use crate::syntax::{EquationSystem, Formula, FormulaSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PumpError {
    #[error("donor root profile differs from the profile at `{0}`")]
    RootSetMismatch(String),
    #[error("no state #{0} in the tree")]
    NotATreeState(usize),
    #[error("annotation covers {0} states, tree has {1}")]
    SizeMismatch(usize, usize),
    #[error("relevant part is not contained in the annotation at `{0}`")]
    RelevantNotContained(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// A tree with an annotation `Θ` and a relevant part `Φ ⊆ Θ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedTree {
    tree: TreeFrame,
    theta: Annotation,
    phi: Annotation,
}

impl AnnotatedTree {
    pub fn new(tree: TreeFrame, theta: Annotation, phi: Annotation) -> Result<Self, PumpError> {
        let n = tree.frame().len();
        for a in [&theta, &phi] {
            if a.len() != n {
                return Err(PumpError::SizeMismatch(a.len(), n));
            }
        }
        for s in 0..n {
            if phi.at(s).iter().any(|(f, a)| !theta.at(s).contains(f, a)) {
                return Err(PumpError::RelevantNotContained(tree.frame().name(s).to_string()));
            }
        }
        Ok(AnnotatedTree { tree, theta, phi })
    }

    pub fn tree(&self) -> &TreeFrame {
        &self.tree
    }

    pub fn frame(&self) -> &Frame {
        self.tree.frame()
    }

    pub fn theta(&self) -> &Annotation {
        &self.theta
    }

    pub fn phi(&self) -> &Annotation {
        &self.phi
    }

    pub fn root(&self) -> usize {
        self.tree.root()
    }

    pub fn len(&self) -> usize {
        self.frame().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(Θ_s^-, Φ_s^-)`.
    pub fn profile(&self, s: usize) -> (FormulaSet, FormulaSet) {
        (self.theta.at(s).formulas(), self.phi.at(s).formulas())
    }

    /// The annotated subtree rooted at `s`, state names kept.
    pub fn subtree(&self, s: usize) -> AnnotatedTree {
        let states = self.tree.subtree(s);
        let mut index = vec![usize::MAX; self.len()];
        for (i, &t) in states.iter().enumerate() {
            index[t] = i;
        }
        let f = self.frame();
        let names = states.iter().map(|&t| f.name(t).to_string()).collect();
        let edges: Vec<(usize, usize)> = states
            .iter()
            .flat_map(|&t| f.successors(t).iter().map(move |&c| (t, c)))
            .map(|(a, b)| (index[a], index[b]))
            .collect();
        let labels: Vec<(String, Vec<usize>)> = f
            .props()
            .map(|p| {
                (p.to_string(), states.iter().filter(|&&t| f.has_label(p, t)).map(|&t| index[t]).collect())
            })
            .collect();
        let frame = Frame::build(names, edges, labels).expect("subtree of a valid frame");
        let tree = TreeFrame::new(frame, 0).expect("subtree of a tree");
        let pick = |a: &Annotation| Annotation::from_sets(states.iter().map(|&t| a.at(t).clone()).collect());
        AnnotatedTree { tree, theta: pick(&self.theta), phi: pick(&self.phi) }
    }
}

/// States whose relevant part holds some `∇Γ^λ` with `λ` a limit.
pub fn limit_states(t: &AnnotatedTree) -> Vec<usize> {
    t.frame().states().filter(|&s| limit_nablas(t.phi.at(s)).next().is_some()).collect()
}

fn limit_nablas(set: &AnnSet) -> impl Iterator<Item = (&FormulaSet, &Ordinal)> {
    set.iter().filter_map(|(f, a)| match f {
        Formula::Nabla(g) if a.is_limit() => Some((g, a)),
        _ => None,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RepetitionPair {
    pub companion: usize,
    pub bud: usize,
    #[serde(serialize_with = "nabla_text")]
    pub gamma: FormulaSet,
    pub alpha: Ordinal,
    pub beta: Ordinal,
}

fn nabla_text<S: serde::Serializer>(g: &FormulaSet, ser: S) -> Result<S::Ok, S::Error> {
    ser.collect_str(&Formula::Nabla(g.clone()))
}

impl RepetitionPair {
    pub fn describe(&self, frame: &Frame) -> String {
        format!(
            "companion {} bud {}: {} @ {} > {}",
            frame.name(self.companion),
            frame.name(self.bud),
            Formula::Nabla(self.gamma.clone()),
            self.alpha,
            self.beta
        )
    }
}

/// The pair conditions for a fixed companion `s` and bud `t`, without the
/// path condition. One pair per shared `Γ`, with the largest `α` at `s` and
/// the smallest limit `β < α` at `t`.
pub fn pair_at(t: &AnnotatedTree, s: usize, b: usize) -> Vec<RepetitionPair> {
    if t.profile(s) != t.profile(b) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let ps = t.phi.at(s);
    let pb = t.phi.at(b);
    let gammas: BTreeSet<&FormulaSet> = limit_nablas(ps).map(|(g, _)| g).collect();
    for g in gammas {
        let nab = Formula::Nabla(g.clone());
        let alpha = ps.ordinals(&nab).filter(|a| a.is_limit()).last().cloned();
        let beta = pb.ordinals(&nab).find(|a| a.is_limit()).cloned();
        if let (Some(alpha), Some(beta)) = (alpha, beta) {
            if beta < alpha {
                out.push(RepetitionPair { companion: s, bud: b, gamma: g.clone(), alpha, beta });
            }
        }
    }
    out
}

/// Every repetition pair: companion a proper ancestor of the bud, equal
/// stripped annotation and relevant sets, and a shared relevant `∇Γ` with
/// limit annotations `β < α`.
pub fn find_repetition_pairs(t: &AnnotatedTree) -> Vec<RepetitionPair> {
    let limits: BTreeSet<usize> = limit_states(t).into_iter().collect();
    let mut out = Vec::new();
    for &b in &limits {
        let mut cur = t.tree.parent(b);
        while let Some(s) = cur {
            if limits.contains(&s) {
                out.extend(pair_at(t, s, b));
            }
            cur = t.tree.parent(s);
        }
    }
    out.sort();
    out
}

/// `2^(2n) + 1`.
pub fn repetition_bound_for_size(n: usize) -> BigUint {
    (BigUint::from(1u32) << (2 * n)) + 1u32
}

/// The pigeonhole bound for a system, from its closure size.
pub fn repetition_bound(sys: &EquationSystem) -> BigUint {
    repetition_bound_for_size(sys.size())
}

/// `ω·n`, or `None` when `n` does not fit a coefficient.
fn omega_times(n: &BigUint) -> Option<Ordinal> {
    u64::try_from(n).ok().map(Ordinal::omega_times)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Unmet {
    NotAPath { from: String, to: String },
    NotFromRoot,
    EmptyRelevant { state: String },
    BelowBound { alpha0: Ordinal, bound: String },
    NotZeroAtEnd { alpha_k: Ordinal },
    RelevantViolation { violation: String },
}

impl fmt::Display for Unmet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unmet::NotAPath { from, to } => write!(f, "{to} is not a successor of {from}"),
            Unmet::NotFromRoot => f.write_str("path does not start at the root"),
            Unmet::EmptyRelevant { state } => write!(f, "no relevant formula at {state}"),
            Unmet::BelowBound { alpha0, bound } => write!(f, "α0 below ω.N ({alpha0} < w.{bound})"),
            Unmet::NotZeroAtEnd { alpha_k } => write!(f, "last annotation is {alpha_k}, not 0"),
            Unmet::RelevantViolation { violation } => {
                write!(f, "relevant part broken on the path: {violation}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Descent {
    PairFound {
        pair: RepetitionPair,
    },
    HypothesisUnmet {
        unmet: Unmet,
    },
    /// All hypotheses hold and still no pair lies on the path.
    NoPair,
}

/// Checks the pigeonhole hypotheses on a root-to-node path: relevant
/// formulas all along, largest annotation at the start `≥ ω·n`, a relevant
/// formula annotated 0 at the end, and no relevant-part violation on the
/// path. If they hold, returns a repetition pair between two path states.
pub fn check_descent_hypothesis(
    t: &AnnotatedTree,
    sys: &EquationSystem,
    path: &[usize],
    n: &BigUint,
) -> Descent {
    let unmet = |u| Descent::HypothesisUnmet { unmet: u };
    let f = t.frame();
    if path.first() != Some(&t.root()) {
        return unmet(Unmet::NotFromRoot);
    }
    for w in path.windows(2) {
        if t.tree.parent(w[1]) != Some(w[0]) {
            return unmet(Unmet::NotAPath { from: f.name(w[0]).into(), to: f.name(w[1]).into() });
        }
    }
    if let Some(&s) = path.iter().find(|&&s| t.phi.at(s).is_empty()) {
        return unmet(Unmet::EmptyRelevant { state: f.name(s).into() });
    }
    let alpha0 = t.phi.at(path[0]).iter().map(|(_, a)| a.clone()).max().expect("nonempty");
    let reaches = match omega_times(n) {
        Some(bound) => alpha0 >= bound,
        None => alpha0 >= Ordinal::monomial(2, 1),
    };
    if !reaches {
        return unmet(Unmet::BelowBound { alpha0, bound: n.to_string() });
    }
    let last = *path.last().unwrap();
    let alpha_k = t.phi.at(last).iter().map(|(_, a)| a.clone()).min().expect("nonempty");
    if !alpha_k.is_zero() {
        return unmet(Unmet::NotZeroAtEnd { alpha_k });
    }
    let on_path: BTreeSet<String> = path.iter().map(|&s| f.name(s).to_string()).collect();
    let problems: Vec<Violation> =
        check_relevant(&t.phi, &t.theta, sys, f).into_iter().filter(|v| on_path.contains(&v.state)).collect();
    if let Some(v) = problems.first() {
        return unmet(Unmet::RelevantViolation { violation: v.to_string() });
    }
    for (i, &s) in path.iter().enumerate() {
        for &b in &path[i + 1..] {
            if let Some(pair) = pair_at(t, s, b).into_iter().next() {
                return Descent::PairFound { pair };
            }
        }
    }
    Descent::NoPair
}

/// What a pump did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PumpLog {
    pub replaced: String,
    pub donor_root: String,
    pub removed: usize,
    pub added: usize,
    /// Donor state name to its name in the result.
    pub renaming: Vec<(String, String)>,
}

/// Replaces the subtree at `s` by `donor`, whose root profile `Θ^-` must
/// equal `Θ_s^-`. Donor states get fresh names `p<k>.<name>`.
pub fn pump(
    t: &AnnotatedTree,
    s: usize,
    donor: &AnnotatedTree,
) -> Result<(AnnotatedTree, PumpLog), PumpError> {
    let f = t.frame();
    if s >= f.len() {
        return Err(PumpError::NotATreeState(s));
    }
    if t.theta.at(s).formulas() != donor.theta.at(donor.root()).formulas() {
        return Err(PumpError::RootSetMismatch(f.name(s).to_string()));
    }
    let removed: BTreeSet<usize> = t.tree.subtree(s).into_iter().collect();
    let kept: Vec<usize> = f.states().filter(|x| !removed.contains(x)).collect();
    let taken: BTreeSet<&str> = kept.iter().map(|&x| f.name(x)).collect();
    let df = donor.frame();
    let mut k = 0;
    let prefix = loop {
        let p = format!("p{k}.");
        if !taken.iter().any(|n| n.starts_with(&p)) {
            break p;
        }
        k += 1;
    };

    let mut names: Vec<String> = kept.iter().map(|&x| f.name(x).to_string()).collect();
    let mut index = vec![usize::MAX; f.len()];
    for (i, &x) in kept.iter().enumerate() {
        index[x] = i;
    }
    let offset = names.len();
    let renaming: Vec<(String, String)> =
        df.names().iter().map(|n| (n.clone(), format!("{prefix}{n}"))).collect();
    names.extend(renaming.iter().map(|(_, new)| new.clone()));

    let mut edges = Vec::new();
    for &x in &kept {
        for &c in f.successors(x) {
            if c == s {
                edges.push((index[x], offset + donor.root()));
            } else if !removed.contains(&c) {
                edges.push((index[x], index[c]));
            }
        }
    }
    edges.extend(df.edges().map(|(a, b)| (offset + a, offset + b)));

    let props: BTreeSet<&str> = f.props().chain(df.props()).collect();
    let labels: Vec<(String, Vec<usize>)> = props
        .iter()
        .map(|p| {
            let mut v: Vec<usize> = kept.iter().filter(|&&x| f.has_label(p, x)).map(|&x| index[x]).collect();
            v.extend(df.states().filter(|&x| df.has_label(p, x)).map(|x| offset + x));
            (p.to_string(), v)
        })
        .collect();
    let frame = Frame::build(names, edges, labels)?;
    let root = if s == t.root() { offset + donor.root() } else { index[t.root()] };
    let tree = TreeFrame::new(frame, root)?;
    let splice = |a: &Annotation, d: &Annotation| {
        let mut sets: Vec<AnnSet> = kept.iter().map(|&x| a.at(x).clone()).collect();
        sets.extend(d.sets().iter().cloned());
        Annotation::from_sets(sets)
    };
    let result =
        AnnotatedTree { tree, theta: splice(&t.theta, &donor.theta), phi: splice(&t.phi, &donor.phi) };
    let log = PumpLog {
        replaced: f.name(s).to_string(),
        donor_root: df.name(donor.root()).to_string(),
        removed: removed.len(),
        added: df.len(),
        renaming,
    };
    Ok((result, log))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Canon {
    labels: Vec<String>,
    theta: AnnSet,
    phi: AnnSet,
    children: Vec<Canon>,
}

fn canon(t: &AnnotatedTree, s: usize) -> Canon {
    let mut children: Vec<Canon> = t.tree.children(s).iter().map(|&c| canon(t, c)).collect();
    children.sort();
    Canon {
        labels: t.frame().labels_at(s).into_iter().map(str::to_string).collect(),
        theta: t.theta.at(s).clone(),
        phi: t.phi.at(s).clone(),
        children,
    }
}

/// Isomorphism of annotated trees, ignoring state names.
pub fn isomorphic(a: &AnnotatedTree, b: &AnnotatedTree) -> bool {
    a.len() == b.len() && canon(a, a.root()) == canon(b, b.root())
}

/// Best root annotation of `phi` over the members of a family whose root
/// profile is `gamma`. A lower bound on the true supremum.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OEstimate {
    pub value: Ordinal,
    /// Index of the family member achieving `value`; `None` when no member
    /// qualifies (then `value` is 0).
    pub witness: Option<usize>,
}

pub fn estimate_o(phi: &Formula, gamma: &FormulaSet, family: &[AnnotatedTree]) -> OEstimate {
    let mut best = OEstimate { value: Ordinal::zero(), witness: None };
    for (i, t) in family.iter().enumerate() {
        let root = t.theta.at(t.root());
        if root.formulas() != *gamma {
            continue;
        }
        if let Some(k) = root.max_of(phi) {
            if best.witness.is_none() || *k > best.value {
                best = OEstimate { value: k.clone(), witness: Some(i) };
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Optimality {
    /// A family member with the same root profile annotates `φ` at least
    /// `α + ω`.
    NotOptimal { witness: usize, value: Ordinal },
    /// Nothing in the family rules optimality out.
    PossiblyOptimal,
}

/// Bounded optimality test of `Θ_s` for `φ^α`, reading the profile argument
/// as `Θ_s^-`.
pub fn optimality(
    t: &AnnotatedTree,
    s: usize,
    phi: &Formula,
    alpha: &Ordinal,
    family: &[AnnotatedTree],
) -> Optimality {
    let est = estimate_o(phi, &t.theta.at(s).formulas(), family);
    match est.witness {
        Some(w) if est.value >= alpha.add(&Ordinal::omega()) => {
            Optimality::NotOptimal { witness: w, value: est.value }
        }
        _ => Optimality::PossiblyOptimal,
    }
}
