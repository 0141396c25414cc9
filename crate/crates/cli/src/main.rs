mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nabla_core::annotation::{
    check_relevant, check_single_nabla, check_well_annotation, conservative, extract_relevant,
    verify_conservative, Violation,
};
use nabla_core::corpus;
use nabla_core::frame::gen;
use nabla_core::normalform::{to_conjunctive_with, OracleConfig};
use nabla_core::pump::{
    check_descent_hypothesis, find_repetition_pairs, pump, repetition_bound, repetition_bound_for_size,
    AnnotatedTree, Descent,
};
use nabla_core::semantics::{closure_ordinal_on, eval_closed, eval_equational, sig_approx, Approximations};
use nabla_core::syntax::{parse_formula_in, parse_formula_sugared};
use nabla_core::{EquationalFormula, Formula, Frame};

use io::{domain, usage, Outcome};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Parser)]
#[command(
    name = "nabla",
    version,
    about = "Equation systems, closure ordinals and well-annotations for the cover-modality μ-calculus"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output rendering; `dot` only applies to frames and annotated trees.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    /// Write the result here (atomically) instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

/// Where the formula comes from: a `.mes` file or an inline formula.
#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "formula")]
    system: Option<PathBuf>,
    #[arg(long)]
    formula: Option<String>,
}

impl Source {
    fn load(&self) -> Outcome<EquationalFormula> {
        match (&self.system, &self.formula) {
            (Some(p), _) => io::load_system(p),
            (None, Some(f)) => io::formula_system(f),
            (None, None) => Err(usage("give --system FILE or --formula TEXT")),
        }
    }
}

#[derive(Args)]
struct Annotated {
    #[arg(long)]
    system: PathBuf,
    #[arg(long)]
    frame: PathBuf,
    #[arg(long)]
    ann: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and print a formula or system in canonical form.
    Parse {
        #[command(flatten)]
        src: Source,
        /// Expand `box`/`dia` sugar.
        #[arg(long)]
        desugar: bool,
        /// Print the equational form of an inline formula.
        #[arg(long)]
        equational: bool,
    },
    /// Expand `box`/`dia` sugar.
    Desugar {
        #[command(flatten)]
        src: Source,
    },
    /// States satisfying a closed formula or equational formula.
    Eval {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        frame: PathBuf,
    },
    /// Approximation `ψ^n` or signature approximation `ψ^σ`.
    Approx {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        frame: PathBuf,
        /// Formula over the system variables; defaults to the initial variable.
        #[arg(long)]
        psi: Option<String>,
        #[arg(long, conflicts_with = "sig")]
        stage: Option<usize>,
        /// Comma-separated naturals, one per variable in declaration order.
        #[arg(long, value_delimiter = ',')]
        sig: Option<Vec<usize>>,
    },
    /// Closure ordinal of the initial variable on a frame.
    Co {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        frame: PathBuf,
    },
    /// Least-stage (conservative) annotation.
    Annotate {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        frame: PathBuf,
    },
    /// Check the well-annotation conditions.
    CheckAnn {
        #[command(flatten)]
        a: Annotated,
    },
    /// Compare an annotation with the least-stage annotation.
    ConservativeCheck {
        #[command(flatten)]
        a: Annotated,
    },
    /// Extract a relevant part, or check one given with --rel.
    Relevant {
        #[command(flatten)]
        a: Annotated,
        /// Variable whose trace is extracted.
        #[arg(long, default_value = "x")]
        var: String,
        #[arg(long)]
        root: Option<String>,
        #[arg(long)]
        rel: Option<PathBuf>,
        /// Write `<prefix>.frame`, `<prefix>.ann`, `<prefix>.rel.ann`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repetition pairs of an annotated tree; with --path, the descent check.
    Pairs {
        #[command(flatten)]
        a: Annotated,
        #[arg(long)]
        rel: PathBuf,
        #[arg(long)]
        root: Option<String>,
        /// Comma-separated state names from the root.
        #[arg(long, value_delimiter = ',')]
        path: Option<Vec<String>>,
        /// Closure size used for the bound `2^(2n)+1`; defaults to the system's.
        #[arg(long)]
        bound_size: Option<usize>,
    },
    /// Replace the subtree at a state by a donor tree.
    Pump {
        #[command(flatten)]
        a: Annotated,
        #[arg(long)]
        rel: PathBuf,
        #[arg(long)]
        root: Option<String>,
        #[arg(long)]
        at: String,
        #[arg(long)]
        donor_frame: PathBuf,
        #[arg(long)]
        donor_ann: PathBuf,
        #[arg(long)]
        donor_rel: PathBuf,
        #[arg(long)]
        donor_root: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Translate into a conjunctive equational formula.
    Conjunctive {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 3)]
        exhaustive_states: usize,
        #[arg(long, default_value_t = 500)]
        random_frames: usize,
        #[arg(long, default_value_t = 8)]
        max_states: usize,
        #[arg(long, env = "NABLA_SEED", default_value_t = 0x5eed)]
        seed: u64,
    },
    /// Generate frames, systems and fixtures.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// `s0 → … → s{k-1}`.
    Chain { k: usize },
    /// Depth-k Czarnecki frame with n levels.
    Czarnecki {
        #[arg(long, default_value_t = 1)]
        n: usize,
        k: usize,
    },
    /// The formula paired with the Czarnecki frames, as a system.
    CzarneckiFormula {
        #[arg(default_value_t = 1)]
        n: usize,
    },
    /// Random frame.
    Random {
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0.3)]
        edge_prob: f64,
        #[arg(long, value_delimiter = ',', default_value = "p,q")]
        props: Vec<String>,
        #[arg(long, env = "NABLA_SEED")]
        seed: Option<u64>,
    },
    /// Random guarded system.
    System {
        #[arg(long, default_value_t = 3)]
        max_vars: usize,
        #[arg(long, value_delimiter = ',', default_value = "p,q")]
        props: Vec<String>,
        #[arg(long, env = "NABLA_SEED")]
        seed: Option<u64>,
    },
    /// Corpus entry by name; lists the names without one.
    Corpus { name: Option<String> },
    /// Annotated tree whose relevant trace descends through limit ordinals.
    Descent {
        #[arg(long, default_value_t = 18)]
        limits: usize,
        #[arg(long, env = "NABLA_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// What a command produced.
enum Rendered {
    Text(String),
    Json(Value),
    Dot(String),
}

struct Output {
    text: String,
    json: Value,
    dot: Option<String>,
}

impl Output {
    fn new(text: impl Into<String>, json: Value) -> Self {
        Output { text: text.into(), json, dot: None }
    }

    fn with_dot(mut self, dot: String) -> Self {
        self.dot = Some(dot);
        self
    }

    fn render(self, format: Format) -> Outcome<Rendered> {
        Ok(match format {
            Format::Text => Rendered::Text(self.text),
            Format::Json => Rendered::Json(self.json),
            Format::Dot => Rendered::Dot(
                self.dot
                    .ok_or_else(|| usage("dot output is only available for frames and annotated trees"))?,
            ),
        })
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn system_json(ef: &EquationalFormula) -> Value {
    let eqs: Vec<Value> =
        ef.system().equations().map(|(x, e)| json!({ "var": x, "body": e.to_string() })).collect();
    json!({
        "init": ef.init(),
        "equations": eqs,
        "conjunctive": ef.is_conjunctive(),
        "closure_size": ef.system().size(),
    })
}

fn frame_output(frame: &Frame, root: Option<&str>) -> Output {
    Output::new(frame.to_text(root), serde_json::to_value(frame.to_doc(root)).expect("serializable"))
        .with_dot(frame.to_dot(root))
}

fn tree_json(t: &AnnotatedTree) -> Value {
    json!({
        "frame": t.frame().to_doc(Some(t.tree().root_name())),
        "annotation": t.theta().to_doc(t.frame()),
        "relevant": t.phi().to_doc(t.frame()),
    })
}

fn tree_text(t: &AnnotatedTree) -> String {
    format!(
        "# frame\n{}# annotation\n{}# relevant\n{}",
        t.tree().to_text(),
        t.theta().to_text(t.frame()),
        t.phi().to_text(t.frame())
    )
}

fn violations_output(vs: &[Violation]) -> Output {
    let mut text = String::new();
    for v in vs {
        text.push_str(&format!("{v}\n"));
    }
    if vs.is_empty() {
        text.push_str("OK (0 violations)\n");
    } else {
        text.push_str(&format!("{} violations\n", vs.len()));
    }
    Output::new(text, json!({ "ok": vs.is_empty(), "violations": vs }))
}

fn need_seed(seed: Option<u64>) -> Outcome<u64> {
    seed.ok_or_else(|| usage("random generation needs --seed or NABLA_SEED"))
}

fn load_annotated(
    a: &Annotated,
    rel: &std::path::Path,
    root: Option<&str>,
) -> Outcome<(EquationalFormula, AnnotatedTree)> {
    let ef = io::load_system(&a.system)?;
    let tree = io::load_tree(&a.frame, root)?;
    let theta = io::load_ann(&a.ann, tree.frame(), &ef)?;
    let phi = io::load_ann(rel, tree.frame(), &ef)?;
    Ok((ef, AnnotatedTree::new(tree, theta, phi)?))
}

fn run(cli: &Cli) -> Outcome<Rendered> {
    let out = match &cli.cmd {
        Cmd::Parse { src, desugar, equational } => match (&src.formula, &src.system) {
            (Some(text), None) if !equational => {
                let phi = parse_formula_sugared(text)?;
                let phi = if *desugar { phi.desugar() } else { phi };
                Output::new(
                    format!("{phi}\n"),
                    json!({ "formula": phi.to_string(), "closed": phi.is_closed() }),
                )
            }
            _ => {
                let ef = src.load()?;
                Output::new(ef.to_string(), system_json(&ef))
            }
        },
        Cmd::Desugar { src } => match (&src.formula, &src.system) {
            (Some(text), None) => {
                let phi = parse_formula_sugared(text)?.desugar();
                Output::new(format!("{phi}\n"), json!({ "formula": phi.to_string() }))
            }
            _ => {
                let ef = src.load()?;
                Output::new(ef.to_string(), system_json(&ef))
            }
        },
        Cmd::Eval { src, frame } => {
            let (frame, _) = io::load_frame(frame)?;
            let set = match (&src.formula, &src.system) {
                (Some(text), None) => {
                    let phi = parse_formula_sugared(text)?.desugar();
                    if !phi.is_closed() {
                        return Err(domain(format!(
                            "formula has free variables: {}",
                            io::formula_list(phi.free_vars().iter().map(|x| Formula::var(x)))
                        )));
                    }
                    eval_closed(&phi, &frame)
                }
                _ => eval_equational(&src.load()?, &frame),
            };
            Output::new(
                format!("{}\n", io::set_text(&frame, &set)),
                json!({ "states": io::set_names(&frame, &set) }),
            )
        }
        Cmd::Approx { system, frame, psi, stage, sig } => {
            let ef = io::load_system(system)?;
            let (frame, _) = io::load_frame(frame)?;
            let sys = ef.system();
            let psi = match psi {
                Some(text) => parse_formula_in(text, &sys.var_set())?.desugar(),
                None => Formula::var(ef.init()),
            };
            let set = match (stage, sig) {
                (Some(n), _) => Approximations::compute(sys, &frame).denote(&psi, *n),
                (None, Some(sig)) => {
                    if sig.len() != sys.len() {
                        return Err(usage(format!(
                            "signature has {} entries, system has {} variables",
                            sig.len(),
                            sys.len()
                        )));
                    }
                    sig_approx(&psi, sig, sys, &frame)
                }
                (None, None) => return Err(usage("give --stage N or --sig A,B,…")),
            };
            Output::new(
                format!("{}\n", io::set_text(&frame, &set)),
                json!({ "states": io::set_names(&frame, &set) }),
            )
        }
        Cmd::Co { src, frame } => {
            let ef = src.load()?;
            let (frame, _) = io::load_frame(frame)?;
            let co = closure_ordinal_on(&frame, &ef);
            Output::new(format!("{co}\n"), json!({ "closure_ordinal": co }))
        }
        Cmd::Annotate { system, frame } => {
            let ef = io::load_system(system)?;
            let (frame, _) = io::load_frame(frame)?;
            let ann = conservative(ef.system(), &frame);
            Output::new(ann.to_text(&frame), serde_json::to_value(ann.to_doc(&frame)).expect("serializable"))
        }
        Cmd::CheckAnn { a } => {
            let ef = io::load_system(&a.system)?;
            let (frame, _) = io::load_frame(&a.frame)?;
            let ann = io::load_ann(&a.ann, &frame, &ef)?;
            violations_output(&check_well_annotation(&ann, ef.system(), &frame)?)
        }
        Cmd::ConservativeCheck { a } => {
            let ef = io::load_system(&a.system)?;
            let (frame, _) = io::load_frame(&a.frame)?;
            let ann = io::load_ann(&a.ann, &frame, &ef)?;
            violations_output(&verify_conservative(&ann, ef.system(), &frame)?)
        }
        Cmd::Relevant { a, var, root, rel, out } => {
            let ef = io::load_system(&a.system)?;
            let tree = io::load_tree(&a.frame, root.as_deref())?;
            let theta = io::load_ann(&a.ann, tree.frame(), &ef)?;
            match rel {
                Some(rel) => {
                    let phi = io::load_ann(rel, tree.frame(), &ef)?;
                    let mut vs = check_relevant(&phi, &theta, ef.system(), tree.frame());
                    vs.extend(check_single_nabla(&phi, tree.frame()));
                    violations_output(&vs)
                }
                None => {
                    let ex = extract_relevant(&tree, &theta, ef.system(), var)?;
                    let t = AnnotatedTree::new(ex.tree, ex.theta, ex.phi)?;
                    let text = match out {
                        Some(prefix) => {
                            let files = io::write_tree(prefix, &t)?;
                            let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
                            format!("wrote {}\n", names.join(", "))
                        }
                        None => tree_text(&t),
                    };
                    Output::new(text, tree_json(&t)).with_dot(io::tree_dot(&t))
                }
            }
        }
        Cmd::Pairs { a, rel, root, path, bound_size } => {
            let (ef, t) = load_annotated(a, rel, root.as_deref())?;
            let f = t.frame();
            match path {
                None => {
                    let pairs = find_repetition_pairs(&t);
                    let text: String = pairs.iter().map(|p| format!("{}\n", p.describe(f))).collect();
                    let text = if pairs.is_empty() { "no repetition pairs\n".to_string() } else { text };
                    let items: Vec<Value> = pairs
                        .iter()
                        .map(|p| {
                            json!({
                                "companion": f.name(p.companion),
                                "bud": f.name(p.bud),
                                "nabla": Formula::Nabla(p.gamma.clone()).to_string(),
                                "alpha": p.alpha,
                                "beta": p.beta,
                            })
                        })
                        .collect();
                    Output::new(text, json!({ "pairs": items }))
                }
                Some(names) => {
                    let path = names.iter().map(|n| f.index_of(n)).collect::<Result<Vec<_>, _>>()?;
                    let bound = match bound_size {
                        Some(n) => repetition_bound_for_size(*n),
                        None => repetition_bound(ef.system()),
                    };
                    let d = check_descent_hypothesis(&t, ef.system(), &path, &bound);
                    let text = match &d {
                        Descent::PairFound { pair } => format!("pair found: {}\n", pair.describe(f)),
                        Descent::HypothesisUnmet { unmet } => format!("hypothesis unmet: {unmet}\n"),
                        Descent::NoPair => "hypotheses hold but no pair lies on the path\n".to_string(),
                    };
                    Output::new(text, json!({ "bound": bound.to_string(), "result": d }))
                }
            }
        }
        Cmd::Pump { a, rel, root, at, donor_frame, donor_ann, donor_rel, donor_root, out } => {
            let (ef, t) = load_annotated(a, rel, root.as_deref())?;
            let donor_tree = io::load_tree(donor_frame, donor_root.as_deref())?;
            let dtheta = io::load_ann(donor_ann, donor_tree.frame(), &ef)?;
            let dphi = io::load_ann(donor_rel, donor_tree.frame(), &ef)?;
            let donor = AnnotatedTree::new(donor_tree, dtheta, dphi)?;
            let s = t.frame().index_of(at)?;
            let (result, log) = pump(&t, s, &donor)?;
            let summary = format!(
                "replaced {} ({} states) by {} ({} states)\n",
                log.replaced, log.removed, log.donor_root, log.added
            );
            let text = match out {
                Some(prefix) => {
                    let files = io::write_tree(prefix, &result)?;
                    let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
                    format!("{summary}wrote {}\n", names.join(", "))
                }
                None => format!("{summary}{}", tree_text(&result)),
            };
            Output::new(text, json!({ "log": log, "tree": tree_json(&result) }))
                .with_dot(io::tree_dot(&result))
        }
        Cmd::Conjunctive { src, exhaustive_states, random_frames, max_states, seed } => {
            let ef = src.load()?;
            let cfg = OracleConfig {
                exhaustive_states: *exhaustive_states,
                random_frames: *random_frames,
                random_max_states: *max_states,
                seed: *seed,
            };
            let (result, report) = to_conjunctive_with(&ef, &cfg)?;
            let mut text = String::new();
            for v in &report.fresh {
                text.push_str(&format!(
                    "# {}: {}\n",
                    v.name,
                    serde_json::to_string(&v.role).expect("serializable")
                ));
            }
            let verdict = &report.verdict;
            text.push_str(&format!(
                "# oracle: {} exhaustive + {} random frames, {} mismatches\n",
                verdict.exhaustive_frames, verdict.random_frames, verdict.mismatches
            ));
            text.push_str(&result.to_string());
            Output::new(
                text,
                json!({
                    "input": ef.to_string(),
                    "output": result.to_string(),
                    "fresh": report.fresh,
                    "verdict": report.verdict,
                    "closure_ordinals": report.closure_ordinals,
                }),
            )
        }
        Cmd::Gen { kind } => match kind {
            GenKind::Chain { k } => frame_output(&gen::chain(*k)?, Some("s0")),
            GenKind::Czarnecki { n, k } => frame_output(&gen::czarnecki(*n, *k)?, Some("s0")),
            GenKind::CzarneckiFormula { n } => {
                if *n == 0 {
                    return Err(usage("n must be positive"));
                }
                let ef = nabla_core::normalform::to_equational(&gen::czarnecki_formula(*n))?;
                Output::new(ef.to_string(), system_json(&ef))
            }
            GenKind::Random { size, edge_prob, props, seed } => {
                let props: Vec<&str> = props.iter().map(String::as_str).collect();
                frame_output(&gen::random(need_seed(*seed)?, *size, *edge_prob, &props)?, None)
            }
            GenKind::System { max_vars, props, seed } => {
                if *max_vars == 0 || props.is_empty() {
                    return Err(usage("need at least one variable and one proposition"));
                }
                let props: Vec<&str> = props.iter().map(String::as_str).collect();
                let ef = corpus::random_systems(need_seed(*seed)?, 1, *max_vars, &props).remove(0);
                Output::new(ef.to_string(), system_json(&ef))
            }
            GenKind::Corpus { name } => {
                let all = corpus::formulas();
                match name {
                    None => {
                        let names: Vec<&str> = all.iter().map(|(n, _)| n.as_str()).collect();
                        Output::new(format!("{}\n", names.join("\n")), json!({ "names": names }))
                    }
                    Some(name) => {
                        let (_, ef) = all
                            .iter()
                            .find(|(n, _)| n == name)
                            .ok_or_else(|| usage(format!("no corpus entry `{name}`")))?;
                        Output::new(ef.to_string(), system_json(ef))
                    }
                }
            }
            GenKind::Descent { limits, seed, out } => {
                let t = corpus::descent_fixture(need_seed(*seed)?, *limits);
                let sys = corpus::descent_system();
                let text = match out {
                    Some(prefix) => {
                        let mut files = io::write_tree(prefix, &t)?;
                        let mut mes = prefix.as_os_str().to_owned();
                        mes.push(".mes");
                        io::write_atomic(std::path::Path::new(&mes), &sys.to_string())?;
                        files.push(mes.into());
                        let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
                        format!("wrote {}\n", names.join(", "))
                    }
                    None => format!("{}{}", sys, tree_text(&t)),
                };
                Output::new(text, json!({ "system": sys.to_string(), "tree": tree_json(&t) }))
                    .with_dot(io::tree_dot(&t))
            }
        },
    };
    out.render(cli.format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|r| {
        let text = match r {
            Rendered::Text(t) | Rendered::Dot(t) => with_newline(t),
            Rendered::Json(v) => format!("{}\n", serde_json::to_string_pretty(&v).expect("serializable")),
        };
        match &cli.output {
            Some(p) => io::write_atomic(p, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code() as u8)
        }
    }
}
