//! Loading inputs, rendering results, and atomic output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nabla_core::annotation::{AnnDoc, Annotation, AnnotationError};
use nabla_core::frame::{FrameDoc, FrameError};
use nabla_core::normalform::{to_equational, NormalFormError};
use nabla_core::pump::{AnnotatedTree, PumpError};
use nabla_core::syntax::{parse_formula_sugared, parse_system, ParseError};
use nabla_core::{EquationalFormula, Formula, Frame, StateSet, TreeFrame};

/// A failed command: `Usage` exits 2, `Domain` exits 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Domain(m) => m,
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub fn domain(msg: impl Into<String>) -> Failure {
    Failure::Domain(msg.into())
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        usage(e.to_string())
    }
}

impl From<FrameError> for Failure {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::Parse { .. } | FrameError::UnknownState(_) | FrameError::DuplicateState(_) => {
                usage(e.to_string())
            }
            _ => domain(e.to_string()),
        }
    }
}

impl From<AnnotationError> for Failure {
    fn from(e: AnnotationError) -> Self {
        match e {
            AnnotationError::Parse { .. } => usage(e.to_string()),
            AnnotationError::Frame(f) => f.into(),
            _ => domain(e.to_string()),
        }
    }
}

impl From<NormalFormError> for Failure {
    fn from(e: NormalFormError) -> Self {
        domain(e.to_string())
    }
}

impl From<PumpError> for Failure {
    fn from(e: PumpError) -> Self {
        match e {
            PumpError::Frame(f) => f.into(),
            _ => domain(e.to_string()),
        }
    }
}

pub fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn is_json(text: &str) -> bool {
    text.trim_start().starts_with('{')
}

fn json_err(path: &Path, e: serde_json::Error) -> Failure {
    usage(format!("{}: {e}", path.display()))
}

/// A `.mes` file.
pub fn load_system(path: &Path) -> Outcome<EquationalFormula> {
    parse_system(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// A formula given inline, turned into an equational formula.
pub fn formula_system(text: &str) -> Outcome<EquationalFormula> {
    let phi = parse_formula_sugared(text)?;
    Ok(to_equational(&phi.desugar())?)
}

/// A frame in text or JSON form, with its optional root.
pub fn load_frame(path: &Path) -> Outcome<(Frame, Option<String>)> {
    let text = read(path)?;
    if is_json(&text) {
        let doc: FrameDoc = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
        let root = doc.root.clone();
        Ok((Frame::from_doc(&doc)?, root))
    } else {
        Frame::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

pub fn load_tree(path: &Path, root: Option<&str>) -> Outcome<TreeFrame> {
    let (frame, declared) = load_frame(path)?;
    let root = root.map(str::to_string).or(declared).unwrap_or_else(|| frame.name(0).to_string());
    Ok(TreeFrame::with_root_name(frame, &root)?)
}

pub fn load_ann(path: &Path, frame: &Frame, ef: &EquationalFormula) -> Outcome<Annotation> {
    let text = read(path)?;
    let vars = ef.system().var_set();
    let ann = if is_json(&text) {
        let doc: AnnDoc = serde_json::from_str(&text).map_err(|e| json_err(path, e))?;
        Annotation::from_doc(&doc, frame, &vars)
    } else {
        Annotation::parse(&text, frame, &vars)
    };
    ann.map_err(|e| match e {
        AnnotationError::Parse { .. } => usage(format!("{}: {e}", path.display())),
        other => other.into(),
    })
}

pub fn set_text(frame: &Frame, set: &StateSet) -> String {
    let names: Vec<&str> = set.iter().map(|s| frame.name(s)).collect();
    format!("{{{}}}", names.join(", "))
}

pub fn set_names(frame: &Frame, set: &StateSet) -> Vec<String> {
    set.iter().map(|s| frame.name(s).to_string()).collect()
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering of an annotated tree. Relevant entries are starred.
pub fn tree_dot(t: &AnnotatedTree) -> String {
    let f = t.frame();
    let mut out = String::from("digraph tree {\n  node [shape=box];\n");
    for s in f.states() {
        let mut lines = vec![f.name(s).to_string()];
        let labels = f.labels_at(s);
        if !labels.is_empty() {
            lines.push(labels.join(","));
        }
        for (phi, a) in t.theta().at(s).iter() {
            let star = if t.phi().at(s).contains(phi, a) { "*" } else { "" };
            lines.push(format!("{star}{phi} @ {a}"));
        }
        let body: Vec<String> = lines.iter().map(|l| escape(l)).collect();
        let _ = writeln!(out, "  \"{}\" [label=\"{}\"];", escape(f.name(s)), body.join("\\l"));
    }
    for (a, b) in f.edges() {
        let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape(f.name(a)), escape(f.name(b)));
    }
    out.push_str("}\n");
    out
}

/// Writes `text` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> Outcome<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let fail = |e: std::io::Error| domain(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(text.as_bytes()).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

/// Writes an annotated tree as `<prefix>.frame`, `<prefix>.ann` and
/// `<prefix>.rel.ann`.
pub fn write_tree(prefix: &Path, t: &AnnotatedTree) -> Outcome<Vec<PathBuf>> {
    let with = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    let files = [
        (with(".frame"), t.tree().to_text()),
        (with(".ann"), t.theta().to_text(t.frame())),
        (with(".rel.ann"), t.phi().to_text(t.frame())),
    ];
    for (p, text) in &files {
        write_atomic(p, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

pub fn formula_list(fs: impl IntoIterator<Item = Formula>) -> String {
    let items: Vec<String> = fs.into_iter().map(|f| f.to_string()).collect();
    items.join(", ")
}
