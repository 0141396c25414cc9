//! Finite Kripke frames `(S, R, Λ)` and rooted trees over them.
//!
//! States are addressed internally by dense indices; their external names are
//! opaque strings (generators use `s0, s1, …`).
//!
//! Text format (`.frame`):
//!
//! ```text
//! states: s0 s1 s2
//! edges: s0->s1 s1->s2
//! labels: p: s0 s2 ; q: s1
//! root: s0
//! ```

pub mod gen;
mod set;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use set::StateSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state `{0}` declared twice")]
    DuplicateState(String),
    #[error("a frame needs at least one state")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("not a tree: {0}")]
    NotATree(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Frame {
    names: Vec<String>,
    index: HashMap<String, usize>,
    succ: Vec<Vec<usize>>,
    labels: BTreeMap<String, StateSet>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && !s.contains(|c: char| c.is_whitespace() || c == ':' || c == ';' || c == '#' || c == '@')
        && !s.contains("->")
}

impl Frame {
    /// Frame over states `s0 … s{n-1}` given by index.
    pub fn from_indices(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        labels: impl IntoIterator<Item = (String, Vec<usize>)>,
    ) -> Result<Frame, FrameError> {
        let names = (0..n).map(|i| format!("s{i}")).collect();
        Frame::build(names, edges, labels)
    }

    /// Frame over named states.
    pub fn new(
        names: Vec<String>,
        edges: &[(String, String)],
        labels: &BTreeMap<String, Vec<String>>,
    ) -> Result<Frame, FrameError> {
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let lookup =
            |s: &String| index.get(s.as_str()).copied().ok_or_else(|| FrameError::UnknownState(s.clone()));
        let edges = edges
            .iter()
            .map(|(a, b)| Ok((lookup(a)?, lookup(b)?)))
            .collect::<Result<Vec<_>, FrameError>>()?;
        let labels = labels
            .iter()
            .map(|(p, ss)| Ok((p.clone(), ss.iter().map(lookup).collect::<Result<Vec<_>, _>>()?)))
            .collect::<Result<Vec<_>, FrameError>>()?;
        Frame::build(names, edges, labels)
    }

    pub(crate) fn build(
        names: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize)>,
        labels: impl IntoIterator<Item = (String, Vec<usize>)>,
    ) -> Result<Frame, FrameError> {
        let n = names.len();
        if n == 0 {
            return Err(FrameError::Empty);
        }
        let mut index = HashMap::with_capacity(n);
        for (i, s) in names.iter().enumerate() {
            if !valid_name(s) {
                return Err(FrameError::InvalidParameter(format!("invalid state name `{s}`")));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(FrameError::DuplicateState(s.clone()));
            }
        }
        let mut succ = vec![Vec::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(FrameError::UnknownState(format!("#{}", a.max(b))));
            }
            succ[a].push(b);
        }
        for s in &mut succ {
            s.sort_unstable();
            s.dedup();
        }
        let mut lab = BTreeMap::new();
        for (p, states) in labels {
            let set: &mut StateSet = lab.entry(p).or_insert_with(|| StateSet::empty(n));
            for s in states {
                if s >= n {
                    return Err(FrameError::UnknownState(format!("#{s}")));
                }
                set.insert(s);
            }
        }
        Ok(Frame { names, index, succ, labels: lab })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn states(&self) -> std::ops::Range<usize> {
        0..self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, s: usize) -> &str {
        &self.names[s]
    }

    pub fn index_of(&self, name: &str) -> Result<usize, FrameError> {
        self.index.get(name).copied().ok_or_else(|| FrameError::UnknownState(name.to_string()))
    }

    /// `R[s]`, sorted.
    pub fn successors(&self, s: usize) -> &[usize] {
        &self.succ[s]
    }

    /// `R[s]` by name.
    pub fn successors_of(&self, name: &str) -> Result<Vec<&str>, FrameError> {
        let s = self.index_of(name)?;
        Ok(self.succ[s].iter().map(|&t| self.name(t)).collect())
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(a, ts)| ts.iter().map(move |&b| (a, b)))
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// `Λ(p)`; empty for unknown propositions.
    pub fn label(&self, p: &str) -> StateSet {
        self.labels.get(p).cloned().unwrap_or_else(|| StateSet::empty(self.len()))
    }

    pub fn has_label(&self, p: &str, s: usize) -> bool {
        self.labels.get(p).is_some_and(|set| set.contains(s))
    }

    pub fn props(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    /// Propositions true at `s`.
    pub fn labels_at(&self, s: usize) -> Vec<&str> {
        self.labels.iter().filter(|(_, set)| set.contains(s)).map(|(p, _)| p.as_str()).collect()
    }

    pub fn empty_set(&self) -> StateSet {
        StateSet::empty(self.len())
    }

    pub fn full_set(&self) -> StateSet {
        StateSet::full(self.len())
    }

    pub fn parse(text: &str) -> Result<(Frame, Option<String>), FrameError> {
        let mut states: Option<Vec<String>> = None;
        let mut edges = Vec::new();
        let mut labels: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut root = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: &str| FrameError::Parse { line, msg: msg.to_string() };
            let (key, rest) = content.split_once(':').ok_or_else(|| err("expected `key: …`"))?;
            match key.trim() {
                "states" => {
                    if states.is_some() {
                        return Err(err("duplicate `states:` line"));
                    }
                    states = Some(rest.split_whitespace().map(str::to_string).collect());
                }
                "edges" => {
                    for e in rest.split_whitespace() {
                        let (a, b) = e.split_once("->").ok_or_else(|| err("expected `a->b`"))?;
                        edges.push((a.to_string(), b.to_string()));
                    }
                }
                "labels" => {
                    for group in rest.split(';').map(str::trim).filter(|g| !g.is_empty()) {
                        let (p, ss) = group.split_once(':').ok_or_else(|| err("expected `p: s0 s1`"))?;
                        labels
                            .entry(p.trim().to_string())
                            .or_default()
                            .extend(ss.split_whitespace().map(str::to_string));
                    }
                }
                "root" => root = Some(rest.trim().to_string()),
                other => return Err(err(&format!("unknown key `{other}`"))),
            }
        }
        let states = states.ok_or(FrameError::Parse { line: 1, msg: "missing `states:` line".into() })?;
        let frame = Frame::new(states, &edges, &labels)?;
        if let Some(r) = &root {
            frame.index_of(r)?;
        }
        Ok((frame, root))
    }

    pub fn to_text(&self, root: Option<&str>) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "states: {}", self.names.join(" "));
        let edges: Vec<String> =
            self.edges().map(|(a, b)| format!("{}->{}", self.name(a), self.name(b))).collect();
        let _ = writeln!(out, "edges: {}", edges.join(" ")).map(|_| ());
        let groups: Vec<String> = self
            .labels
            .iter()
            .map(|(p, set)| {
                let ss: Vec<&str> = set.iter().map(|s| self.name(s)).collect();
                if ss.is_empty() {
                    format!("{p}:")
                } else {
                    format!("{p}: {}", ss.join(" "))
                }
            })
            .collect();
        let _ = writeln!(out, "labels: {}", groups.join(" ; "));
        if let Some(r) = root {
            let _ = writeln!(out, "root: {r}");
        }
        out
    }

    pub fn to_doc(&self, root: Option<&str>) -> FrameDoc {
        FrameDoc {
            states: self.names.clone(),
            edges: self.edges().map(|(a, b)| (self.name(a).to_string(), self.name(b).to_string())).collect(),
            labels: self
                .labels
                .iter()
                .map(|(p, set)| (p.clone(), set.iter().map(|s| self.name(s).to_string()).collect()))
                .collect(),
            root: root.map(str::to_string),
        }
    }

    pub fn from_doc(doc: &FrameDoc) -> Result<Frame, FrameError> {
        let f = Frame::new(doc.states.clone(), &doc.edges, &doc.labels)?;
        if let Some(r) = &doc.root {
            f.index_of(r)?;
        }
        Ok(f)
    }

    /// Graphviz rendering; node labels list the true propositions.
    pub fn to_dot(&self, root: Option<&str>) -> String {
        let mut out = String::from("digraph frame {\n");
        for s in self.states() {
            let props = self.labels_at(s).join(",");
            let shape = if Some(self.name(s)) == root { ", shape=doublecircle" } else { "" };
            let _ =
                writeln!(out, "  \"{}\" [label=\"{}\\n{}\"{}];", self.name(s), self.name(s), props, shape);
        }
        for (a, b) in self.edges() {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", self.name(a), self.name(b));
        }
        out.push_str("}\n");
        out
    }

    /// Tree of all paths of length ≤ `depth` from `s`. Node names are the
    /// paths, e.g. `s0/s1/s0`; the second component maps each tree node to
    /// the state it copies.
    pub fn unravel(&self, s: usize, depth: usize) -> (TreeFrame, Vec<usize>) {
        let mut names = vec![self.name(s).to_string()];
        let mut origin = vec![s];
        let mut edges = Vec::new();
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        while let Some((node, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for &t in self.successors(origin[node]) {
                let child = names.len();
                names.push(format!("{}/{}", names[node], self.name(t)));
                origin.push(t);
                edges.push((node, child));
                queue.push_back((child, d + 1));
            }
        }
        let labels: Vec<(String, Vec<usize>)> = self
            .labels
            .iter()
            .map(|(p, set)| (p.clone(), (0..origin.len()).filter(|&i| set.contains(origin[i])).collect()))
            .collect();
        let frame = Frame::build(names, edges, labels).expect("unravelling yields a valid frame");
        (TreeFrame::new(frame, 0).expect("unravelling yields a tree"), origin)
    }

    /// Same as [`Frame::unravel`], by state name.
    pub fn unravel_named(&self, s: &str, depth: usize) -> Result<(TreeFrame, Vec<usize>), FrameError> {
        Ok(self.unravel(self.index_of(s)?, depth))
    }
}

/// Structured (JSON) form of a frame.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDoc {
    pub states: Vec<String>,
    pub edges: Vec<(String, String)>,
    pub labels: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
}

/// A frame whose edges form a tree rooted at `root`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TreeFrame {
    frame: Frame,
    root: usize,
    parent: Vec<Option<usize>>,
}

impl TreeFrame {
    pub fn new(frame: Frame, root: usize) -> Result<TreeFrame, FrameError> {
        let n = frame.len();
        if root >= n {
            return Err(FrameError::UnknownState(format!("#{root}")));
        }
        let mut parent = vec![None; n];
        for (a, b) in frame.edges() {
            if b == root {
                return Err(FrameError::NotATree(format!("edge into root `{}`", frame.name(root))));
            }
            if parent[b].replace(a).is_some() {
                return Err(FrameError::NotATree(format!("`{}` has two parents", frame.name(b))));
            }
        }
        // Unique parents plus reachability of every state rules out cycles.
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        while let Some(s) = stack.pop() {
            if std::mem::replace(&mut seen[s], true) {
                return Err(FrameError::NotATree("cycle".into()));
            }
            stack.extend(frame.successors(s));
        }
        if let Some(s) = seen.iter().position(|v| !v) {
            return Err(FrameError::NotATree(format!("`{}` unreachable from root", frame.name(s))));
        }
        Ok(TreeFrame { frame, root, parent })
    }

    pub fn with_root_name(frame: Frame, root: &str) -> Result<TreeFrame, FrameError> {
        let r = frame.index_of(root)?;
        TreeFrame::new(frame, r)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn into_frame(self) -> Frame {
        self.frame
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_name(&self) -> &str {
        self.frame.name(self.root)
    }

    pub fn parent(&self, s: usize) -> Option<usize> {
        self.parent[s]
    }

    pub fn children(&self, s: usize) -> &[usize] {
        self.frame.successors(s)
    }

    /// True iff `a` lies strictly above `b`.
    pub fn is_proper_ancestor(&self, a: usize, b: usize) -> bool {
        let mut cur = self.parent[b];
        while let Some(p) = cur {
            if p == a {
                return true;
            }
            cur = self.parent[p];
        }
        false
    }

    /// States from the root down to `s`.
    pub fn path_to(&self, s: usize) -> Vec<usize> {
        let mut path = vec![s];
        let mut cur = s;
        while let Some(p) = self.parent[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// States of the subtree at `s`, in pre-order.
    pub fn subtree(&self, s: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![s];
        while let Some(t) = stack.pop() {
            out.push(t);
            stack.extend(self.children(t).iter().rev());
        }
        out
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.frame.states().filter(|&s| self.children(s).is_empty())
    }

    pub fn to_text(&self) -> String {
        self.frame.to_text(Some(self.root_name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain3() -> Frame {
        gen::chain(3).unwrap()
    }

    #[test]
    fn successors_examples() {
        let f = chain3();
        assert_eq!(f.successors_of("s1").unwrap(), ["s2"]);
        assert!(f.successors_of("s2").unwrap().is_empty());
        let loop_ = Frame::from_indices(1, [(0, 0)], []).unwrap();
        assert_eq!(loop_.successors_of("s0").unwrap(), ["s0"]);
        assert_eq!(f.successors_of("nope"), Err(FrameError::UnknownState("nope".into())));
    }

    #[test]
    fn unravel_self_loop() {
        let f = Frame::from_indices(1, [(0, 0)], [("p".to_string(), vec![0])]).unwrap();
        let (t, origin) = f.unravel(0, 2);
        assert_eq!(t.frame().len(), 3);
        assert_eq!(t.frame().edge_count(), 2);
        assert_eq!(origin, [0, 0, 0]);
        assert_eq!(t.frame().label("p").count(), 3);
        assert_eq!(t.frame().names(), ["s0", "s0/s0", "s0/s0/s0"]);
    }

    #[test]
    fn unravel_two_cycle_alternates_labels() {
        let f = Frame::from_indices(2, [(0, 1), (1, 0)], [("p".to_string(), vec![0])]).unwrap();
        let (t, _) = f.unravel(0, 3);
        let fr = t.frame();
        assert_eq!(fr.len(), 4);
        let path = t.path_to(3);
        assert_eq!(path, [0, 1, 2, 3]);
        let ps: Vec<bool> = path.iter().map(|&s| fr.has_label("p", s)).collect();
        assert_eq!(ps, [true, false, true, false]);
    }

    #[test]
    fn unravel_tree_is_copy() {
        let f = Frame::from_indices(4, [(0, 1), (0, 2), (2, 3)], [("q".to_string(), vec![3])]).unwrap();
        let (t, origin) = f.unravel(0, 10);
        assert_eq!(t.frame().len(), 4);
        assert_eq!(t.frame().edge_count(), 3);
        assert_eq!(origin.len(), 4);
        let q: Vec<usize> = t.frame().label("q").iter().map(|s| origin[s]).collect();
        assert_eq!(q, [3]);
    }

    #[test]
    fn tree_invariants() {
        let f = chain3();
        let t = TreeFrame::new(f.clone(), 0).unwrap();
        assert_eq!(t.frame().edge_count(), t.frame().len() - 1);
        assert!(t.is_proper_ancestor(0, 2));
        assert!(!t.is_proper_ancestor(2, 0));
        assert!(matches!(TreeFrame::new(f, 1), Err(FrameError::NotATree(_))));
        let cyc = Frame::from_indices(2, [(0, 1), (1, 1)], []).unwrap();
        assert!(TreeFrame::new(cyc, 0).is_err());
        let dag = Frame::from_indices(3, [(0, 1), (0, 2), (1, 2)], []).unwrap();
        assert!(TreeFrame::new(dag, 0).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let src = "states: s0 s1 s2\nedges: s0->s1 s1->s2 s2->s2\nlabels: p: s0 s2 ; q: s1\nroot: s0\n";
        let (f, root) = Frame::parse(src).unwrap();
        assert_eq!(root.as_deref(), Some("s0"));
        assert_eq!(f.to_text(root.as_deref()), src);
        assert_eq!(Frame::parse(&f.to_text(None)).unwrap().0, f);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Frame::parse("edges: a->b\n"), Err(FrameError::Parse { .. })));
        assert!(matches!(Frame::parse("states: a\nedges: a->b\n"), Err(FrameError::UnknownState(_))));
        assert!(matches!(Frame::parse("states: a a\n"), Err(FrameError::DuplicateState(_))));
        assert!(matches!(Frame::parse("states: a\nfoo: 1\n"), Err(FrameError::Parse { line: 2, .. })));
        assert!(matches!(Frame::parse("states:\n"), Err(FrameError::Empty)));
    }

    #[test]
    fn doc_roundtrip() {
        let f = gen::random(7, 5, 0.4, &["p"]).unwrap();
        let doc = f.to_doc(Some("s0"));
        let json = serde_json::to_string(&doc).unwrap();
        let back: FrameDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(Frame::from_doc(&back).unwrap(), f);
    }
}
