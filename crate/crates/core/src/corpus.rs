//! Fixture corpus: named equational formulas, random guarded systems, and
//! annotated trees whose relevant trace descends through limit ordinals.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::{AnnSet, Annotation};
use crate::frame::gen::{czarnecki_formula, czarnecki_prop};
use crate::frame::{Frame, TreeFrame};
use crate::ordinal::Ordinal;
use crate::pump::AnnotatedTree;
use crate::syntax::{parse_system, EquationSystem, EquationalFormula, Formula};

const ENTRIES: &[(&str, &str)] = &[
    ("reach", "x = or{p, dia x}"),
    ("reach-all", "x = or{p, box x}"),
    ("nabla-reach", "x = or{p, nab{x}}"),
    ("nested-nabla", "x = nab{nab{x}, q}"),
    ("two-nablas", "x = or{nab{x}, nab{y}}\ny = or{p, nab{y}}"),
    ("mutual", "x = or{p, dia y}\ny = or{q, box x}"),
    ("mutual-init-second", "init: y\nx = or{p, dia x}\ny = or{q, box x}"),
    ("reach-and-safe", "x = and{or{p, dia x}, or{q, box x}}"),
    ("conjunctive-pair", "x = and{nab{p, x}, nab{}}"),
    ("guarded-choice", "x = or{and{p, nab{y}}, nab{x, y}}\ny = or{q, nab{}}"),
    ("nabla-pair", "x = nab{x, y}\ny = or{p, nab{y}}"),
    ("closed-greatest", "x = or{and{p, nu z. box z}, dia x}"),
    ("negated", "x = or{!p, and{q, box x}}"),
    ("deadlock-or-step", "x = or{nab{}, and{p, dia x}}"),
    ("nabla-with-prop", "x = or{p, nab{x, q}}"),
    ("two-conjuncts", "x = and{or{p, nab{x}}, or{q, nab{x, p}}}"),
    ("cycle-of-three", "x = or{p, dia y}\ny = or{q, dia z}\nz = or{and{p, q}, box x}"),
    ("box-or-dia", "x = or{and{p, box x}, and{q, dia x}}"),
    ("three-nablas", "x = or{nab{x}, nab{p}, nab{q, x}}"),
    ("nabla-or-prop", "x = or{p, nab{x}, nab{q}}"),
    ("negated-guard", "x = or{and{!q, dia x}, and{p, q}}"),
    ("compound-member", "x = nab{or{p, x}}"),
    ("padded", "x = and{nab{x}, nab{}, or{p, nab{x, ff}}}"),
    ("trivial-true", "x = tt"),
    ("trivial-false", "x = ff"),
    ("two-diamonds", "x = or{p, and{dia x, dia y}}\ny = or{q, dia y}"),
    ("dead-or-pair", "x = or{box ff, nab{x, y}}\ny = or{p, and{q, dia x}}"),
    ("conjunct-member", "x = or{nab{and{p, x}}, q}"),
    ("nested-pair", "x = or{p, nab{nab{x}, nab{y}}}\ny = or{q, nab{}}"),
    ("closed-safety-conjunct", "x = and{or{p, dia x}, nu z. or{q, box z}}"),
    ("mixed-nabla", "x = or{and{p, nab{x, y}}, and{q, nab{y}}}\ny = or{and{p, q}, nab{x}}"),
    ("self-and-other", "x = or{p, nab{x}, and{q, nab{y}}}\ny = or{!p, nab{x, y}}"),
];

/// The named corpus. Every entry parses; the worked examples of the
/// documentation and the first Czarnecki formulas are included.
pub fn formulas() -> Vec<(String, EquationalFormula)> {
    let mut out: Vec<(String, EquationalFormula)> =
        ENTRIES.iter().map(|(name, body)| (name.to_string(), parse_entry(body))).collect();
    for n in 1..=3 {
        let ef = match czarnecki_formula(n) {
            Formula::Mu(x, body) => {
                EquationalFormula::new(EquationSystem::new(vec![(x.clone(), *body)]).expect("guarded"), &x)
            }
            _ => unreachable!("czarnecki formulas are μ-formulas"),
        };
        out.push((format!("czarnecki-{n}"), ef.expect("valid")));
    }
    out
}

fn parse_entry(body: &str) -> EquationalFormula {
    let text = if body.starts_with("init:") {
        format!("system\n{body}\n")
    } else {
        format!("system\ninit: x\n{body}\n")
    };
    parse_system(&text).unwrap_or_else(|e| panic!("corpus entry `{body}`: {e}"))
}

/// Corpus entries with exactly two variables.
pub fn two_variable() -> Vec<(String, EquationalFormula)> {
    formulas().into_iter().filter(|(_, ef)| ef.system().len() == 2).collect()
}

fn var_name(i: usize) -> String {
    ["x", "y", "z"].get(i).map_or_else(|| format!("x{i}"), |s| s.to_string())
}

fn literal<R: Rng>(rng: &mut R, props: &[&str]) -> Formula {
    match rng.gen_range(0..10) {
        0 => Formula::tt(),
        1 => Formula::ff(),
        2 | 3 => Formula::neg(props.choose(rng).expect("props nonempty")),
        _ => Formula::prop(props.choose(rng).expect("props nonempty")),
    }
}

/// A formula under a ∇: variables may occur anywhere.
fn member<R: Rng>(rng: &mut R, depth: usize, vars: &[String], props: &[&str]) -> Formula {
    let pick = if depth == 0 { rng.gen_range(0..2) } else { rng.gen_range(0..5) };
    match pick {
        0 => Formula::var(vars.choose(rng).expect("vars nonempty")),
        1 => literal(rng, props),
        2 => Formula::and((0..2).map(|_| member(rng, depth - 1, vars, props))),
        3 => Formula::or((0..2).map(|_| member(rng, depth - 1, vars, props))),
        _ => nabla(rng, depth - 1, vars, props),
    }
}

fn nabla<R: Rng>(rng: &mut R, depth: usize, vars: &[String], props: &[&str]) -> Formula {
    let n = rng.gen_range(0..=2);
    Formula::nabla((0..n).map(|_| member(rng, depth, vars, props)))
}

/// A guarded body: every variable occurrence sits under a ∇.
fn body<R: Rng>(rng: &mut R, depth: usize, vars: &[String], props: &[&str]) -> Formula {
    let pick = if depth == 0 { rng.gen_range(0..2) } else { rng.gen_range(0..4) };
    match pick {
        0 => literal(rng, props),
        1 => nabla(rng, depth.min(1), vars, props),
        2 => Formula::or((0..rng.gen_range(2..=3)).map(|_| body(rng, depth - 1, vars, props))),
        _ => Formula::and((0..2).map(|_| body(rng, depth - 1, vars, props))),
    }
}

/// Random guarded system with `1..=max_vars` variables, initial variable `x`.
pub fn random_system<R: Rng>(rng: &mut R, max_vars: usize, props: &[&str]) -> EquationalFormula {
    let n = rng.gen_range(1..=max_vars.max(1));
    let vars: Vec<String> = (0..n).map(var_name).collect();
    let eqs = vars.iter().map(|x| (x.clone(), body(rng, 2, &vars, props))).collect();
    let sys = EquationSystem::new(eqs).expect("bodies are guarded");
    EquationalFormula::new(sys, "x").expect("x is declared")
}

/// `count` random systems from `seed`.
pub fn random_systems(seed: u64, count: usize, max_vars: usize, props: &[&str]) -> Vec<EquationalFormula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_system(&mut rng, max_vars, props)).collect()
}

/// Decorating propositions of [`descent_fixture`].
pub const DECORATIONS: [&str; 4] = ["q1", "q2", "q3", "q4"];

/// System of [`descent_fixture`]: the trace variable `x` plus a variable `d`
/// whose body puts the decorations into the closure.
pub fn descent_system() -> EquationalFormula {
    parse_system("system\ninit: x\nx = or{p, nab{x}}\nd = or{q1, q2, q3, q4, nab{d}}\n").expect("valid")
}

/// A well-annotated tree (not conservative) with `limits` limit states on its
/// spine. The `i`-th limit state carries `x^(ω·m+1)`, `E(x)^(ω·m)` and
/// `∇{x}^(ω·m)` with `m = limits - i`, a random set of decorations, and a
/// dead-end sibling child without annotations. Between limit states up to two
/// states with successor annotations are inserted; the spine ends in a leaf
/// with `x^1`, `E(x)^0`, `p^0`. All of `Θ` except the decorations is relevant.
pub fn descent_fixture(seed: u64, limits: usize) -> AnnotatedTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Formula::var("x");
    let ex = Formula::or([Formula::prop("p"), Formula::nabla([x.clone()])]);
    let nab = Formula::nabla([x.clone()]);

    let mut names: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut labels: Vec<(String, Vec<usize>)> =
        std::iter::once("p").chain(DECORATIONS).map(|p| (p.to_string(), Vec::new())).collect();
    let mut theta: Vec<AnnSet> = Vec::new();
    let mut phi: Vec<AnnSet> = Vec::new();
    let mut add = |name: String, rel: AnnSet, deco: Vec<usize>, names: &mut Vec<String>| {
        let s = names.len();
        names.push(name);
        let mut th = rel.clone();
        for d in deco {
            th.insert(Formula::prop(DECORATIONS[d]), Ordinal::zero());
            labels[d + 1].1.push(s);
        }
        theta.push(th);
        phi.push(rel);
        s
    };
    let trace = |a: &Ordinal| -> AnnSet {
        [(x.clone(), a.succ()), (ex.clone(), a.clone()), (nab.clone(), a.clone())].into_iter().collect()
    };

    let mut prev: Option<usize> = None;
    let link = |s: usize, prev: &mut Option<usize>, edges: &mut Vec<(usize, usize)>| {
        if let Some(p) = *prev {
            edges.push((p, s));
        }
        *prev = Some(s);
    };
    for i in 0..limits {
        let m = (limits - i) as u64;
        let deco: Vec<usize> = (0..DECORATIONS.len()).filter(|_| rng.gen_bool(0.5)).collect();
        let s = add(format!("l{i}"), trace(&Ordinal::omega_times(m)), deco, &mut names);
        link(s, &mut prev, &mut edges);
        let dead = add(format!("u{i}"), AnnSet::new(), Vec::new(), &mut names);
        edges.push((s, dead));
        let extra = rng.gen_range(0..=2u64);
        let below = Ordinal::omega_times(m - 1);
        for k in (1..=extra).rev() {
            let s = add(format!("l{i}.{k}"), trace(&below.add(&Ordinal::nat(k))), Vec::new(), &mut names);
            link(s, &mut prev, &mut edges);
        }
    }
    let leaf: AnnSet =
        [(x.clone(), Ordinal::nat(1)), (ex.clone(), Ordinal::zero()), (Formula::prop("p"), Ordinal::zero())]
            .into_iter()
            .collect();
    let end = add("leaf".into(), leaf, Vec::new(), &mut names);
    labels[0].1.push(end);
    link(end, &mut prev, &mut edges);

    let frame = Frame::build(names, edges, labels).expect("fixture frame");
    let tree = TreeFrame::new(frame, 0).expect("fixture tree");
    AnnotatedTree::new(tree, Annotation::from_sets(theta), Annotation::from_sets(phi)).expect("Φ ⊆ Θ")
}

/// The spine of a [`descent_fixture`]: root to the `leaf` state.
pub fn descent_spine(t: &AnnotatedTree) -> Vec<usize> {
    let leaf = t.frame().index_of("leaf").expect("fixture has a leaf");
    t.tree().path_to(leaf)
}

/// Czarnecki proposition names for the first `n` levels.
pub fn czarnecki_props(n: usize) -> Vec<String> {
    (1..=n).map(czarnecki_prop).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{check_relevant, check_single_nabla, check_well_annotation};
    use crate::pump::limit_states;

    #[test]
    fn corpus_is_large_and_parses() {
        let all = formulas();
        assert!(all.len() >= 30);
        let mut names: Vec<&str> = all.iter().map(|(n, _)| n.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
        assert!(two_variable().len() >= 8);
    }

    #[test]
    fn random_systems_are_guarded_and_deterministic() {
        let a = random_systems(3, 50, 3, &["p", "q"]);
        let b = random_systems(3, 50, 3, &["p", "q"]);
        assert_eq!(a, b);
        assert!(a.iter().all(|ef| (1..=3).contains(&ef.system().len())));
    }

    #[test]
    fn descent_fixture_is_well_formed() {
        let ef = descent_system();
        for seed in 0..5 {
            let t = descent_fixture(seed, 18);
            assert_eq!(limit_states(&t).len(), 18);
            let well = check_well_annotation(t.theta(), ef.system(), t.frame()).unwrap();
            assert!(well.is_empty(), "{:?}", well.first().map(|v| v.to_string()));
            let rel = check_relevant(t.phi(), t.theta(), ef.system(), t.frame());
            assert!(rel.is_empty(), "{:?}", rel.first().map(|v| v.to_string()));
            assert!(check_single_nabla(t.phi(), t.frame()).is_empty());
            assert_eq!(t.frame().name(*descent_spine(&t).last().unwrap()), "leaf");
        }
    }
}
