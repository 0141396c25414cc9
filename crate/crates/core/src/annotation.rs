//! Ordinal annotations of frames: Kozen-style well-annotations, the
//! conservative (least) one, and relevant parts.
//!
//! Text format (`.ann`), one line per state, formulas in the system grammar:
//!
//! ```text
//! s0: x @ 3; or{p, nab{x}} @ 2;
//! s1: p @ 0
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Frame, FrameError, TreeFrame};
use crate::ordinal::Ordinal;
use crate::semantics::{eval_closed, Approximations};
use crate::syntax::{parse_formula_in, EquationSystem, Formula, FormulaSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("state `{state}`: {formula} is not in the closure of the system")]
    ForeignFormula { state: String, formula: Formula },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("annotation has {0} states but the frame has {1}")]
    SizeMismatch(usize, usize),
    #[error("annotation is not conservative ({0} violations)")]
    NotConservative(usize),
    #[error("`{0}` is not annotated at the root")]
    MissingTarget(String),
    #[error("relevant part extraction failed: {0}")]
    ExtractionFailure(Violation),
}

/// A finite set of annotated formulas `φ^α`.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AnnSet(BTreeSet<(Formula, Ordinal)>);

impl AnnSet {
    pub fn new() -> Self {
        AnnSet(BTreeSet::new())
    }

    pub fn insert(&mut self, phi: Formula, alpha: Ordinal) -> bool {
        self.0.insert((phi, alpha))
    }

    pub fn remove(&mut self, phi: &Formula, alpha: &Ordinal) -> bool {
        self.0.remove(&(phi.clone(), alpha.clone()))
    }

    pub fn contains(&self, phi: &Formula, alpha: &Ordinal) -> bool {
        self.0.contains(&(phi.clone(), alpha.clone()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Formula, &Ordinal)> {
        self.0.iter().map(|(f, a)| (f, a))
    }

    /// Ordinals attached to `phi`, ascending.
    pub fn ordinals(&self, phi: &Formula) -> impl Iterator<Item = &Ordinal> + '_ {
        let key = phi.clone();
        self.0.range((key.clone(), Ordinal::zero())..).take_while(move |(f, _)| *f == key).map(|(_, a)| a)
    }

    /// Least ordinal attached to `phi`.
    pub fn min_of(&self, phi: &Formula) -> Option<&Ordinal> {
        self.ordinals(phi).next()
    }

    /// Greatest ordinal attached to `phi`.
    pub fn max_of(&self, phi: &Formula) -> Option<&Ordinal> {
        self.ordinals(phi).last()
    }

    pub fn has(&self, phi: &Formula) -> bool {
        self.min_of(phi).is_some()
    }

    /// The underlying formulas, `Θ^-`.
    pub fn formulas(&self) -> FormulaSet {
        self.0.iter().map(|(f, _)| f.clone()).collect()
    }

    /// `self ≼ other`: every `φ^α ∈ other` has some `φ^β ∈ self`, `β ≤ α`.
    pub fn preceq(&self, other: &AnnSet) -> bool {
        other.iter().all(|(phi, alpha)| self.min_of(phi).is_some_and(|b| b <= alpha))
    }

    /// `self ≼ Γ^α`.
    pub fn preceq_all<'a>(&self, gamma: impl IntoIterator<Item = &'a Formula>, alpha: &Ordinal) -> bool {
        gamma.into_iter().all(|phi| self.min_of(phi).is_some_and(|b| b <= alpha))
    }
}

impl FromIterator<(Formula, Ordinal)> for AnnSet {
    fn from_iter<I: IntoIterator<Item = (Formula, Ordinal)>>(iter: I) -> Self {
        AnnSet(iter.into_iter().collect())
    }
}

impl fmt::Debug for AnnSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|(phi, a)| format!("{phi} @ {a}"))).finish()
    }
}

/// A map from the states of a frame to annotated-formula sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Annotation {
    sets: Vec<AnnSet>,
}

impl Annotation {
    /// The everywhere-empty annotation of an `n`-state frame.
    pub fn empty(n: usize) -> Self {
        Annotation { sets: vec![AnnSet::new(); n] }
    }

    pub fn from_sets(sets: Vec<AnnSet>) -> Self {
        Annotation { sets }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn at(&self, s: usize) -> &AnnSet {
        &self.sets[s]
    }

    pub fn at_mut(&mut self, s: usize) -> &mut AnnSet {
        &mut self.sets[s]
    }

    pub fn sets(&self) -> &[AnnSet] {
        &self.sets
    }

    pub fn entry_count(&self) -> usize {
        self.sets.iter().map(AnnSet::len).sum()
    }

    /// Pointwise `≼`.
    pub fn preceq(&self, other: &Annotation) -> bool {
        self.sets.len() == other.sets.len() && self.sets.iter().zip(&other.sets).all(|(a, b)| a.preceq(b))
    }

    /// Adds `delta` on the left of every ordinal, `α ↦ δ + α`.
    pub fn shifted(&self, delta: &Ordinal) -> Annotation {
        Annotation {
            sets: self
                .sets
                .iter()
                .map(|set| set.iter().map(|(f, a)| (f.clone(), delta.add(a))).collect())
                .collect(),
        }
    }

    pub fn parse(text: &str, frame: &Frame, vars: &BTreeSet<String>) -> Result<Annotation, AnnotationError> {
        let mut ann = Annotation::empty(frame.len());
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: String| AnnotationError::Parse { line, msg };
            let (state, rest) = content.split_once(':').ok_or_else(|| err("expected `state: …`".into()))?;
            let s = frame.index_of(state.trim())?;
            for item in rest.split(';').map(str::trim).filter(|t| !t.is_empty()) {
                let (f, a) = item
                    .rsplit_once('@')
                    .ok_or_else(|| err(format!("expected `formula @ ordinal` in `{item}`")))?;
                let phi = parse_formula_in(f.trim(), vars).map_err(|e| err(e.to_string()))?;
                let alpha: Ordinal =
                    a.trim().parse().map_err(|e: crate::ordinal::OrdinalError| err(e.to_string()))?;
                ann.sets[s].insert(phi, alpha);
            }
        }
        Ok(ann)
    }

    /// `.ann` text; states with empty sets are omitted.
    pub fn to_text(&self, frame: &Frame) -> String {
        let mut out = String::new();
        for (s, set) in self.sets.iter().enumerate() {
            if set.is_empty() {
                continue;
            }
            out.push_str(frame.name(s));
            out.push(':');
            for (phi, a) in set.iter() {
                out.push_str(&format!(" {phi} @ {a};"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_doc(&self, frame: &Frame) -> AnnDoc {
        AnnDoc(
            self.sets
                .iter()
                .enumerate()
                .filter(|(_, set)| !set.is_empty())
                .map(|(s, set)| {
                    let entries = set
                        .iter()
                        .map(|(f, a)| AnnEntry { formula: f.to_string(), ordinal: a.clone() })
                        .collect();
                    (frame.name(s).to_string(), entries)
                })
                .collect(),
        )
    }

    pub fn from_doc(
        doc: &AnnDoc,
        frame: &Frame,
        vars: &BTreeSet<String>,
    ) -> Result<Annotation, AnnotationError> {
        let mut ann = Annotation::empty(frame.len());
        for (state, entries) in &doc.0 {
            let s = frame.index_of(state)?;
            for e in entries {
                let phi = parse_formula_in(&e.formula, vars)
                    .map_err(|err| AnnotationError::Parse { line: 0, msg: err.to_string() })?;
                ann.sets[s].insert(phi, e.ordinal.clone());
            }
        }
        Ok(ann)
    }
}

/// Structured form of an annotation: state name to entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnDoc(pub BTreeMap<String, Vec<AnnEntry>>);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnEntry {
    pub formula: String,
    pub ordinal: Ordinal,
}

/// The local condition an annotation fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Clause {
    /// A closed formula must be true where it is annotated.
    WellClosed,
    /// `x^α` needs `E(x)^β` with `β < α`.
    WellVariable,
    /// `⋁Γ^α` needs some member at most `α`.
    WellOr,
    /// `⋀Γ^α` needs every member at most `α`.
    WellAnd,
    /// `∇Γ^α` needs a successor carrying all of `Γ`, or one member at every
    /// successor, at most `α`.
    WellNabla,
    /// At most one ordinal per formula and state.
    ConservativeUnique,
    /// Every entry carries the least possible ordinal and every true closure
    /// formula is present.
    ConservativeMinimal,
    RelevantSubset,
    RelevantVariable,
    RelevantOr,
    RelevantAnd,
    RelevantNablaBox,
    RelevantNablaDia,
    RelevantNablaPred,
    /// At most one relevant ∇ formula per state.
    RelevantSingleNabla,
}

impl Clause {
    pub fn id(self) -> &'static str {
        match self {
            Clause::WellClosed => "well.closed",
            Clause::WellVariable => "well.variable",
            Clause::WellOr => "well.or",
            Clause::WellAnd => "well.and",
            Clause::WellNabla => "well.nabla",
            Clause::ConservativeUnique => "conservative.unique",
            Clause::ConservativeMinimal => "conservative.minimal",
            Clause::RelevantSubset => "relevant.subset",
            Clause::RelevantVariable => "relevant.variable",
            Clause::RelevantOr => "relevant.or",
            Clause::RelevantAnd => "relevant.and",
            Clause::RelevantNablaBox => "relevant.nabla-box",
            Clause::RelevantNablaDia => "relevant.nabla-dia",
            Clause::RelevantNablaPred => "relevant.nabla-pred",
            Clause::RelevantSingleNabla => "relevant.single-nabla",
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub state: String,
    pub clause: Clause,
    pub formula: String,
    pub ordinal: Option<Ordinal>,
    pub detail: String,
}

impl Violation {
    fn new(
        frame: &Frame,
        s: usize,
        clause: Clause,
        phi: &Formula,
        alpha: Option<&Ordinal>,
        detail: String,
    ) -> Self {
        Violation {
            state: frame.name(s).to_string(),
            clause,
            formula: phi.to_string(),
            ordinal: alpha.cloned(),
            detail,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: [{}] {}", self.state, self.clause, self.formula)?;
        if let Some(a) = &self.ordinal {
            write!(f, " @ {a}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Formulas an annotation may mention: the closure plus the system's
/// variables, so that an initial variable no equation refers to can still be
/// annotated.
pub fn annotatable(sys: &EquationSystem) -> FormulaSet {
    let mut set = sys.closure();
    set.extend(sys.vars().iter().map(|x| Formula::var(x)));
    set
}

fn check_size(ann: &Annotation, frame: &Frame) -> Result<(), AnnotationError> {
    if ann.len() != frame.len() {
        return Err(AnnotationError::SizeMismatch(ann.len(), frame.len()));
    }
    Ok(())
}

fn check_foreign(ann: &Annotation, closure: &FormulaSet, frame: &Frame) -> Result<(), AnnotationError> {
    for (s, set) in ann.sets.iter().enumerate() {
        if let Some((phi, _)) = set.iter().find(|(phi, _)| !closure.contains(*phi)) {
            return Err(AnnotationError::ForeignFormula {
                state: frame.name(s).to_string(),
                formula: phi.clone(),
            });
        }
    }
    Ok(())
}

/// All violations of the well-annotation conditions; empty iff `theta` is a
/// well-annotation. A failed ∇ condition is reported once.
pub fn check_well_annotation(
    theta: &Annotation,
    sys: &EquationSystem,
    frame: &Frame,
) -> Result<Vec<Violation>, AnnotationError> {
    check_size(theta, frame)?;
    check_foreign(theta, &annotatable(sys), frame)?;
    let mut truth: HashMap<&Formula, _> = HashMap::new();
    let mut out = Vec::new();
    for s in frame.states() {
        let set = theta.at(s);
        for (phi, alpha) in set.iter() {
            let v = |clause, detail: String| Violation::new(frame, s, clause, phi, Some(alpha), detail);
            if phi.is_closed() && !truth.entry(phi).or_insert_with(|| eval_closed(phi, frame)).contains(s) {
                out.push(v(Clause::WellClosed, "closed formula is false here".into()));
            }
            match phi {
                Formula::Var(x) => {
                    if let Some(e) = sys.equation(x) {
                        if !set.min_of(e).is_some_and(|b| b < alpha) {
                            out.push(v(Clause::WellVariable, format!("no {e} annotated below {alpha}")));
                        }
                    }
                }
                Formula::Or(gamma) => {
                    if !gamma.iter().any(|g| set.min_of(g).is_some_and(|b| b <= alpha)) {
                        out.push(v(Clause::WellOr, format!("no disjunct annotated at most {alpha}")));
                    }
                }
                Formula::And(gamma) => {
                    if let Some(g) = gamma.iter().find(|g| !set.min_of(g).is_some_and(|b| b <= alpha)) {
                        out.push(v(Clause::WellAnd, format!("conjunct {g} not annotated at most {alpha}")));
                    }
                }
                Formula::Nabla(gamma) => {
                    let succ = frame.successors(s);
                    let some_r = succ.iter().any(|&r| theta.at(r).preceq_all(gamma, alpha));
                    let all_r = gamma
                        .iter()
                        .any(|g| succ.iter().all(|&r| theta.at(r).min_of(g).is_some_and(|b| b <= alpha)));
                    if !some_r && !all_r {
                        out.push(v(
                            Clause::WellNabla,
                            format!("no successor carries all members, and no member is at every successor, at most {alpha}"),
                        ));
                    }
                }
                _ => {}
            }
        }
    }
    Ok(out)
}

/// The conservative well-annotation: `φ^α ∈ Θ_s` iff `s ∈ ⟦φ⟧` and `α` is
/// the least stage with `s ∈ ⟦φ^α⟧`.
pub fn conservative(sys: &EquationSystem, frame: &Frame) -> Annotation {
    let approx = Approximations::compute(sys, frame);
    let mut ann = Annotation::empty(frame.len());
    for phi in annotatable(sys) {
        for (s, stage) in approx.least_stages(&phi).into_iter().enumerate() {
            if let Some(n) = stage {
                ann.sets[s].insert(phi.clone(), Ordinal::nat(n as u64));
            }
        }
    }
    ann
}

/// Differences between `theta` and the conservative annotation. Empty iff
/// they are equal.
pub fn verify_conservative(
    theta: &Annotation,
    sys: &EquationSystem,
    frame: &Frame,
) -> Result<Vec<Violation>, AnnotationError> {
    check_size(theta, frame)?;
    check_foreign(theta, &annotatable(sys), frame)?;
    let expected = conservative(sys, frame);
    let mut out = Vec::new();
    for s in frame.states() {
        let have = theta.at(s);
        let want = expected.at(s);
        for phi in have.formulas() {
            let ords: Vec<&Ordinal> = have.ordinals(&phi).collect();
            if ords.len() > 1 {
                let list: Vec<String> = ords.iter().map(|a| a.to_string()).collect();
                out.push(Violation::new(
                    frame,
                    s,
                    Clause::ConservativeUnique,
                    &phi,
                    None,
                    format!("annotated with {}", list.join(", ")),
                ));
            }
            for a in ords {
                match want.min_of(&phi) {
                    None => out.push(Violation::new(
                        frame,
                        s,
                        Clause::ConservativeMinimal,
                        &phi,
                        Some(a),
                        "formula is false here".into(),
                    )),
                    Some(b) if b != a => out.push(Violation::new(
                        frame,
                        s,
                        Clause::ConservativeMinimal,
                        &phi,
                        Some(a),
                        format!("least annotation is {b}"),
                    )),
                    _ => {}
                }
            }
        }
        for (phi, b) in want.iter() {
            if !have.has(phi) {
                out.push(Violation::new(
                    frame,
                    s,
                    Clause::ConservativeMinimal,
                    phi,
                    Some(b),
                    "missing entry".into(),
                ));
            }
        }
    }
    Ok(out)
}

/// `Γ^s_□`: members of `Γ` present at every successor of `s` (all of `Γ` at
/// a deadlock).
pub fn box_set(gamma: &FormulaSet, s: usize, theta: &Annotation, frame: &Frame) -> FormulaSet {
    gamma.iter().filter(|g| frame.successors(s).iter().all(|&t| theta.at(t).has(g))).cloned().collect()
}

/// `Γ^s_◇`: successors of `s` carrying all of `Γ`.
pub fn dia_set(gamma: &FormulaSet, s: usize, theta: &Annotation, frame: &Frame) -> Vec<usize> {
    frame.successors(s).iter().copied().filter(|&t| gamma.iter().all(|g| theta.at(t).has(g))).collect()
}

/// Violations of the relevant-part conditions of `phi` against `theta`.
pub fn check_relevant(
    phi: &Annotation,
    theta: &Annotation,
    sys: &EquationSystem,
    frame: &Frame,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in frame.states() {
        let here = phi.at(s);
        for (f, alpha) in here.iter() {
            let v = |clause, detail: String| Violation::new(frame, s, clause, f, Some(alpha), detail);
            if !theta.at(s).contains(f, alpha) {
                out.push(v(Clause::RelevantSubset, "not in the annotation".into()));
            }
            match f {
                Formula::Var(x) => {
                    if let Some(e) = sys.equation(x) {
                        match alpha.predecessor() {
                            Some(beta) if here.contains(e, &beta) => {}
                            Some(beta) => {
                                out.push(v(Clause::RelevantVariable, format!("{e} @ {beta} not relevant")))
                            }
                            None => {
                                out.push(v(Clause::RelevantVariable, format!("{alpha} is not a successor")))
                            }
                        }
                    }
                }
                Formula::Or(gamma) if !alpha.is_zero() => {
                    for g in gamma {
                        if theta.at(s).contains(g, alpha) && !here.contains(g, alpha) {
                            out.push(v(Clause::RelevantOr, format!("disjunct {g} @ {alpha} not relevant")));
                        }
                    }
                }
                // `tt` ends a trace like a literal; the one-conjunct rule is
                // for nonempty conjunctions.
                Formula::And(gamma) if !gamma.is_empty() => {
                    let n = gamma.iter().filter(|g| here.contains(g, alpha)).count();
                    if n != 1 {
                        out.push(v(
                            Clause::RelevantAnd,
                            format!("{n} conjuncts relevant at {alpha}, expected one"),
                        ));
                    }
                }
                Formula::Nabla(gamma) if !alpha.is_zero() => {
                    let succ = frame.successors(s);
                    for g in box_set(gamma, s, theta, frame) {
                        let best = succ.iter().filter_map(|&r| phi.at(r).max_of(&g)).max();
                        if !best.is_some_and(|b| b >= alpha) {
                            out.push(v(
                                Clause::RelevantNablaBox,
                                format!("{g} not relevant at a successor up to {alpha}"),
                            ));
                        }
                    }
                    for r in dia_set(gamma, s, theta, frame) {
                        if !gamma.iter().any(|g| phi.at(r).has(g)) {
                            out.push(v(
                                Clause::RelevantNablaDia,
                                format!(
                                    "successor {} carries all members but none is relevant",
                                    frame.name(r)
                                ),
                            ));
                        }
                    }
                    let floor = alpha.pred().expect("alpha is positive");
                    for &r in succ {
                        if phi.at(r).is_empty() {
                            continue;
                        }
                        let ok = gamma.iter().any(|g| phi.at(r).max_of(g).is_some_and(|b| *b > floor));
                        if !ok {
                            out.push(v(
                                Clause::RelevantNablaPred,
                                format!("successor {} has no relevant member above {floor}", frame.name(r)),
                            ));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// States with more than one relevant ∇ formula.
pub fn check_single_nabla(phi: &Annotation, frame: &Frame) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in frame.states() {
        let nablas: Vec<Formula> =
            phi.at(s).formulas().into_iter().filter(|f| matches!(f, Formula::Nabla(_))).collect();
        if nablas.len() > 1 {
            let list: Vec<String> = nablas.iter().map(|f| f.to_string()).collect();
            out.push(Violation::new(
                frame,
                s,
                Clause::RelevantSingleNabla,
                &nablas[1],
                None,
                format!("relevant ∇ formulas: {}", list.join(", ")),
            ));
        }
    }
    out
}

/// Result of relevant-part extraction.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub tree: TreeFrame,
    pub theta: Annotation,
    pub phi: Annotation,
    /// State of the input tree each new state copies.
    pub origin: Vec<usize>,
}

struct Node {
    origin: usize,
    name: String,
    children: Vec<usize>,
}

/// Builds a tree (input states plus duplicated subtrees), its conservative
/// annotation and a relevant part containing `x^α` at the root, with at most
/// one relevant ∇ per state. `theta` must be the conservative annotation of
/// `tree`.
pub fn extract_relevant(
    tree: &TreeFrame,
    theta: &Annotation,
    sys: &EquationSystem,
    x: &str,
) -> Result<Extraction, AnnotationError> {
    let frame = tree.frame();
    let bad = verify_conservative(theta, sys, frame)?;
    if !bad.is_empty() {
        return Err(AnnotationError::NotConservative(bad.len()));
    }
    let target = Formula::var(x);
    let alpha = theta
        .at(tree.root())
        .min_of(&target)
        .cloned()
        .ok_or_else(|| AnnotationError::MissingTarget(x.into()))?;

    let mut nodes: Vec<Node> = frame
        .states()
        .map(|s| Node { origin: s, name: frame.name(s).to_string(), children: frame.successors(s).to_vec() })
        .collect();
    let mut clones = 0usize;
    let mut phi: Vec<AnnSet> = vec![AnnSet::new(); nodes.len()];
    let mut queue = vec![(tree.root(), vec![(target, alpha)])];

    while let Some((n, demands)) = queue.pop() {
        let th = theta.at(nodes[n].origin);
        let marked = close_locally(demands, th, sys);
        let mut child_demands: Vec<Vec<(Formula, Ordinal)>> = vec![Vec::new(); nodes[n].children.len()];
        let view = |c: usize, nodes: &[Node]| theta.at(nodes[c].origin);
        for (f, a) in marked.iter() {
            let Formula::Nabla(gamma) = f else { continue };
            if a.is_zero() {
                continue;
            }
            let kids = nodes[n].children.clone();
            // Box part: each member present everywhere goes to the successor
            // where it is annotated highest.
            for g in gamma.iter().filter(|g| kids.iter().all(|&c| view(c, &nodes).has(g))) {
                let best = kids
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &c)| view(c, &nodes).min_of(g).map(|b| (b.clone(), i)))
                    .max_by(|p, q| p.0.cmp(&q.0).then(q.1.cmp(&p.1)));
                if let Some((b, i)) = best {
                    if !child_demands[i].iter().any(|(h, _)| h == g) {
                        child_demands[i].push((g.clone(), b));
                    }
                }
            }
            // Diamond part: a successor carrying all of Γ gets its highest member.
            for (i, &c) in kids.iter().enumerate() {
                let tc = view(c, &nodes);
                if !gamma.iter().all(|g| tc.has(g)) || child_demands[i].iter().any(|(h, _)| gamma.contains(h))
                {
                    continue;
                }
                let best = gamma
                    .iter()
                    .map(|g| (tc.min_of(g).cloned().unwrap(), g))
                    .max_by(|p, q| p.0.cmp(&q.0).then(q.1.cmp(p.1)))
                    .unwrap();
                child_demands[i].push((best.1.clone(), best.0));
            }
        }
        phi[n] = marked;
        let kids = nodes[n].children.clone();
        for (i, demands) in child_demands.into_iter().enumerate() {
            let mut iter = demands.into_iter();
            let Some(first) = iter.next() else { continue };
            queue.push((kids[i], vec![first]));
            for d in iter {
                let copy = clone_subtree(&mut nodes, &mut phi, kids[i], &mut clones);
                nodes[n].children.push(copy);
                queue.push((copy, vec![d]));
            }
        }
    }

    let origin: Vec<usize> = nodes.iter().map(|nd| nd.origin).collect();
    let names: Vec<String> = nodes.iter().map(|nd| nd.name.clone()).collect();
    let edges: Vec<(usize, usize)> =
        nodes.iter().enumerate().flat_map(|(i, nd)| nd.children.iter().map(move |&c| (i, c))).collect();
    let labels: Vec<(String, Vec<usize>)> = frame
        .props()
        .map(|p| (p.to_string(), (0..nodes.len()).filter(|&i| frame.has_label(p, origin[i])).collect()))
        .collect();
    let new_frame = Frame::build(names, edges, labels)?;
    let new_tree = TreeFrame::new(new_frame, tree.root())?;
    let new_theta = Annotation::from_sets(origin.iter().map(|&o| theta.at(o).clone()).collect());
    let phi = Annotation::from_sets(phi);

    let f = new_tree.frame();
    let mut problems = check_relevant(&phi, &new_theta, sys, f);
    problems.extend(check_single_nabla(&phi, f));
    if let Some(v) = problems.into_iter().next() {
        return Err(AnnotationError::ExtractionFailure(v));
    }
    Ok(Extraction { tree: new_tree, theta: new_theta, phi, origin })
}

fn clone_subtree(nodes: &mut Vec<Node>, phi: &mut Vec<AnnSet>, root: usize, clones: &mut usize) -> usize {
    *clones += 1;
    let tag = *clones;
    fn go(nodes: &mut Vec<Node>, phi: &mut Vec<AnnSet>, n: usize, tag: usize) -> usize {
        let id = nodes.len();
        let base = nodes[n].name.clone();
        nodes.push(Node { origin: nodes[n].origin, name: format!("{base}~{tag}"), children: Vec::new() });
        phi.push(AnnSet::new());
        let kids = nodes[n].children.clone();
        let copies: Vec<usize> = kids.into_iter().map(|c| go(nodes, phi, c, tag)).collect();
        nodes[id].children = copies;
        id
    }
    go(nodes, phi, root, tag)
}

/// Saturates demands at one state under the variable, disjunction and
/// conjunction conditions.
fn close_locally(demands: Vec<(Formula, Ordinal)>, theta: &AnnSet, sys: &EquationSystem) -> AnnSet {
    let mut marked = AnnSet::new();
    let mut work = demands;
    while let Some((f, a)) = work.pop() {
        if !marked.insert(f.clone(), a.clone()) {
            continue;
        }
        match &f {
            Formula::Var(x) => {
                if let (Some(e), Some(b)) = (sys.equation(x), a.predecessor()) {
                    if theta.contains(e, &b) {
                        work.push((e.clone(), b));
                    }
                }
            }
            // Only disjuncts annotated exactly `a` are marked. For `a = 0`
            // nothing is forced; one modality-free disjunct is marked anyway
            // so the trace ends at a literal.
            Formula::Or(gamma) if a.is_zero() => {
                if let Some(g) = gamma.iter().find(|g| g.modal_depth() == 0 && theta.contains(g, &a)) {
                    work.push((g.clone(), a.clone()));
                }
            }
            Formula::Or(gamma) => {
                for g in gamma {
                    if theta.contains(g, &a) {
                        work.push((g.clone(), a.clone()));
                    }
                }
            }
            Formula::And(gamma) => {
                // Members are in AST order, so `find` breaks ties by it.
                if let Some(g) = gamma.iter().find(|g| theta.contains(g, &a)) {
                    work.push((g.clone(), a.clone()));
                }
            }
            _ => {}
        }
    }
    marked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_system;

    fn chain_example() -> (EquationSystem, Frame) {
        let sys = parse_system("system\ninit: x\nx = or{p, dia x}\n").unwrap().system().clone();
        let f = Frame::from_indices(3, [(0, 1), (1, 2)], [("p".to_string(), vec![2])]).unwrap();
        (sys, f)
    }

    fn parse(s: &str, sys: &EquationSystem) -> Formula {
        parse_formula_in(s, &sys.var_set()).unwrap()
    }

    #[test]
    fn preceq_examples() {
        let phi = Formula::prop("p");
        let psi = Formula::prop("q");
        let a = |xs: &[(&Formula, Ordinal)]| {
            xs.iter().map(|(f, o)| ((*f).clone(), o.clone())).collect::<AnnSet>()
        };
        assert!(a(&[(&phi, Ordinal::nat(3))]).preceq(&AnnSet::new()));
        assert!(a(&[(&phi, Ordinal::nat(2))]).preceq(&a(&[(&phi, Ordinal::nat(5))])));
        assert!(!a(&[(&phi, Ordinal::nat(5))]).preceq(&a(&[(&phi, Ordinal::nat(2))])));
        let w = Ordinal::omega();
        assert!(!a(&[(&phi, w.clone())]).preceq(&a(&[(&phi, w.succ()), (&psi, Ordinal::nat(3))])));
    }

    #[test]
    fn conservative_chain_example() {
        let (sys, f) = chain_example();
        let theta = conservative(&sys, &f);
        let x = Formula::var("x");
        let body = sys.equation("x").unwrap().clone();
        let s2 = theta.at(2);
        assert_eq!(s2.min_of(&Formula::prop("p")), Some(&Ordinal::nat(0)));
        assert_eq!(s2.min_of(&body), Some(&Ordinal::nat(0)));
        assert_eq!(s2.min_of(&x), Some(&Ordinal::nat(1)));
        let s1 = theta.at(1);
        assert_eq!(s1.min_of(&x), Some(&Ordinal::nat(2)));
        assert_eq!(s1.min_of(&parse("dia x", &sys)), Some(&Ordinal::nat(1)));
        assert_eq!(check_well_annotation(&theta, &sys, &f).unwrap(), []);
        assert_eq!(verify_conservative(&theta, &sys, &f).unwrap(), []);
    }

    #[test]
    fn well_annotation_violations() {
        let (sys, f) = chain_example();
        let mut theta = Annotation::empty(3);
        assert_eq!(check_well_annotation(&theta, &sys, &f).unwrap(), []);
        theta.at_mut(0).insert(Formula::var("x"), Ordinal::nat(1));
        let v = check_well_annotation(&theta, &sys, &f).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].clause, Clause::WellVariable);
        let mut foreign = Annotation::empty(3);
        foreign.at_mut(0).insert(Formula::prop("zzz"), Ordinal::zero());
        assert!(matches!(
            check_well_annotation(&foreign, &sys, &f),
            Err(AnnotationError::ForeignFormula { .. })
        ));
    }

    #[test]
    fn verify_conservative_reports() {
        let (sys, f) = chain_example();
        let x = Formula::var("x");
        let mut bumped = conservative(&sys, &f);
        bumped.at_mut(2).remove(&x, &Ordinal::nat(1));
        bumped.at_mut(2).insert(x.clone(), Ordinal::nat(2));
        let v = verify_conservative(&bumped, &sys, &f).unwrap();
        assert!(v
            .iter()
            .any(|v| v.clause == Clause::ConservativeMinimal && v.detail.contains("least annotation is 1")));

        let mut missing = conservative(&sys, &f);
        missing.at_mut(2).remove(&Formula::prop("p"), &Ordinal::zero());
        let v = verify_conservative(&missing, &sys, &f).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].detail, "missing entry");

        let mut dup = conservative(&sys, &f);
        dup.at_mut(2).insert(x, Ordinal::nat(4));
        let v = verify_conservative(&dup, &sys, &f).unwrap();
        assert!(v.iter().any(|v| v.clause == Clause::ConservativeUnique));
    }

    #[test]
    fn box_and_dia_sets() {
        let f = Frame::from_indices(3, [(0, 1), (0, 2)], []).unwrap();
        let p = Formula::prop("p");
        let q = Formula::prop("q");
        let mut theta = Annotation::empty(3);
        theta.at_mut(1).insert(p.clone(), Ordinal::zero());
        theta.at_mut(1).insert(q.clone(), Ordinal::zero());
        theta.at_mut(2).insert(p.clone(), Ordinal::zero());
        let gamma: FormulaSet = [p.clone(), q.clone()].into();
        assert_eq!(box_set(&gamma, 0, &theta, &f), FormulaSet::from([p]));
        assert_eq!(dia_set(&gamma, 0, &theta, &f), [1]);
        // A deadlock keeps all of Γ in the box set.
        assert_eq!(box_set(&gamma, 1, &theta, &f), gamma);
    }

    #[test]
    fn extraction_on_chain() {
        let sys = parse_system("system\ninit: x\nx = or{p, nab{x}}\n").unwrap().system().clone();
        let f = Frame::from_indices(4, [(0, 1), (1, 2), (2, 3)], [("p".to_string(), vec![3])]).unwrap();
        let tree = TreeFrame::new(f.clone(), 0).unwrap();
        let theta = conservative(&sys, &f);
        let ex = extract_relevant(&tree, &theta, &sys, "x").unwrap();
        assert_eq!(ex.tree.frame().len(), 4);
        let x = Formula::var("x");
        let traced: Vec<Option<&Ordinal>> = (0..4).map(|s| ex.phi.at(s).min_of(&x)).collect();
        let n = |k| Some(Ordinal::nat(k));
        assert_eq!(traced, [n(4).as_ref(), n(3).as_ref(), n(2).as_ref(), n(1).as_ref()]);
        assert!(ex.phi.at(3).has(&Formula::prop("p")));
        assert_eq!(check_relevant(&ex.phi, &ex.theta, &sys, ex.tree.frame()), []);
    }

    #[test]
    fn extraction_duplicates_shared_successor() {
        // Both members of nab{y, z} peak at the single successor, so it gets
        // cloned to keep one relevant ∇ per state.
        let src = "system\ninit: x\nx = nab{y, z}\ny = or{p, nab{y}}\nz = or{q, nab{z}}\n";
        let sys = parse_system(src).unwrap().system().clone();
        let f = Frame::from_indices(
            3,
            [(0, 1), (1, 2)],
            [("p".to_string(), vec![2]), ("q".to_string(), vec![2])],
        )
        .unwrap();
        let tree = TreeFrame::new(f.clone(), 0).unwrap();
        let theta = conservative(&sys, &f);
        let ex = extract_relevant(&tree, &theta, &sys, "x").unwrap();
        assert!(ex.tree.frame().len() > 3);
        assert_eq!(check_single_nabla(&ex.phi, ex.tree.frame()), []);
        assert_eq!(verify_conservative(&ex.theta, &sys, ex.tree.frame()).unwrap(), []);
    }

    #[test]
    fn relevant_variable_clause() {
        let (sys, f) = chain_example();
        let theta = conservative(&sys, &f);
        let mut phi = Annotation::empty(3);
        phi.at_mut(2).insert(Formula::var("x"), Ordinal::nat(1));
        let v = check_relevant(&phi, &theta, &sys, &f);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].clause, Clause::RelevantVariable);
    }

    #[test]
    fn text_roundtrip() {
        let (sys, f) = chain_example();
        let theta = conservative(&sys, &f);
        let text = theta.to_text(&f);
        assert_eq!(Annotation::parse(&text, &f, &sys.var_set()).unwrap(), theta);
        let doc = theta.to_doc(&f);
        assert_eq!(Annotation::from_doc(&doc, &f, &sys.var_set()).unwrap(), theta);
    }
}
