//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nabla_core::annotation::{check_relevant, check_well_annotation, conservative, AnnSet, Annotation};
use nabla_core::corpus;
use nabla_core::frame::gen;
use nabla_core::normalform::to_conjunctive;
use nabla_core::pump::{
    check_descent_hypothesis, find_repetition_pairs, isomorphic, limit_states, optimality, pump,
    repetition_bound_for_size, AnnotatedTree, Descent, Optimality, PumpError,
};
use nabla_core::semantics::{closure_ordinal_on, sig_approx, Approximations};
use nabla_core::{EquationalFormula, Formula, Frame, Ordinal};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.1?}, limit {limit:?}"))?;
    Ok(t)
}

fn props_of(ef: &EquationalFormula) -> Vec<String> {
    ef.system().props().into_iter().collect()
}

// 1. ∇Γ against "some member holds at every successor, or some successor
// satisfies every member", computed by hand.
fn nabla_law() -> Outcome {
    let start = Instant::now();
    let p = || Formula::prop("p");
    let q = || Formula::prop("q");
    let gammas: Vec<Vec<Formula>> = vec![
        vec![],
        vec![p()],
        vec![p(), q()],
        vec![p(), Formula::neg("q")],
        vec![Formula::ff()],
        vec![Formula::tt()],
        vec![p(), Formula::ff()],
        vec![Formula::and([p(), q()]), Formula::or([p(), Formula::neg("q")])],
        vec![Formula::nabla([p()]), q()],
        vec![Formula::nabla([]), Formula::nabla([p(), q()]), Formula::neg("p")],
    ];
    let mut frames = gen::enumerate(3, &["p", "q"]);
    let exhaustive = frames.len();
    frames.extend(gen::random_frames(0x5eed, 500, 8, &["p", "q"]));
    let env = common::Env::new();
    let mut checks = 0;
    for f in &frames {
        for g in &gammas {
            let lhs =
                common::to_bits(&nabla_core::semantics::eval_closed(&Formula::nabla(g.clone()), f), f.len());
            let members: Vec<common::Bits> = g.iter().map(|m| common::eval(m, f, &env)).collect();
            let rhs: common::Bits = f
                .states()
                .map(|s| {
                    let succ = f.successors(s);
                    members.iter().any(|m| succ.iter().all(|&t| m[t]))
                        || succ.iter().any(|&t| members.iter().all(|m| m[t]))
                })
                .collect();
            ensure(lhs == rhs, || {
                format!("mismatch for {} on\n{}", Formula::nabla(g.clone()), f.to_text(None))
            })?;
            checks += 1;
        }
    }
    let t = within(Duration::from_secs(120), start)?;
    Ok(format!("{exhaustive} exhaustive + 500 random frames, {checks} checks, 0 mismatches, {t:.1?}"))
}

fn random_frame(rng: &mut ChaCha8Rng, max_states: usize, props: &[&str]) -> Frame {
    let n = rng.gen_range(1..=max_states);
    let p = rng.gen_range(0.15..=0.6);
    gen::random_with(rng, n, p, props).unwrap()
}

// 2. Stages are monotone and stable by |S|·|X|; library stages agree with
// the reference iteration.
fn approximations() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..200 {
        let ef = corpus::random_system(&mut rng, 3, &["p", "q"]);
        let f = random_frame(&mut rng, 6, &["p", "q"]);
        let sys = ef.system();
        let bound = f.len() * sys.len();
        let lib = Approximations::compute(sys, &f);
        let reference = common::stages(sys, &f);
        for n in 0..=bound + 1 {
            let r = &reference[n.min(reference.len() - 1)];
            for x in sys.vars() {
                let v = lib.stage(n).get(x).unwrap();
                ensure(common::to_bits(v, f.len()) == r[x], || {
                    format!("instance {i}: stage {n} of {x} differs")
                })?;
                if n <= bound {
                    ensure(v.is_subset(lib.stage(n + 1).get(x).unwrap()), || {
                        format!("instance {i}: V^{n}({x}) not below V^{}", n + 1)
                    })?;
                }
            }
        }
        ensure(reference.len() - 1 <= bound + 1 && lib.stabilization() <= bound, || {
            format!("instance {i}: no stabilization by {bound}")
        })?;
    }
    Ok("200 instances, 0 violations".into())
}

// 3. ⟦ψ^σ⟧ ⊆ ⟦ψ^{Σσ}⟧ ⊆ ⟦ψ^{(Σσ,Σσ)}⟧ on two-variable corpus systems.
fn sandwich() -> Outcome {
    let systems = corpus::two_variable();
    let mut checks = 0;
    for (name, ef) in &systems {
        let props = props_of(ef);
        let props: Vec<&str> = props.iter().map(String::as_str).collect();
        let mut frames = gen::enumerate(2, &props);
        frames.extend(gen::random_frames(0x5a4d, 150, 5, &props));
        frames.push(gen::chain(4).unwrap());
        let sys = ef.system();
        let targets: Vec<Formula> = sys
            .vars()
            .iter()
            .map(|x| Formula::var(x))
            .chain(sys.equations().map(|(_, e)| e.clone()))
            .collect();
        for f in &frames {
            let reference = common::stages(sys, f);
            for a in 0..=4 {
                for b in 0..=4 {
                    let total = a + b;
                    let mid_env = &reference[total.min(reference.len() - 1)];
                    for psi in &targets {
                        let low = common::to_bits(&sig_approx(psi, &[a, b], sys, f), f.len());
                        let mid = common::eval(psi, f, mid_env);
                        let high = common::to_bits(&sig_approx(psi, &[total, total], sys, f), f.len());
                        let sub = |u: &common::Bits, v: &common::Bits| u.iter().zip(v).all(|(x, y)| !x || *y);
                        ensure(sub(&low, &mid) && sub(&mid, &high), || {
                            format!("{name}: {psi} with ({a}, {b}) on\n{}", f.to_text(None))
                        })?;
                        checks += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{} systems, {checks} containments, 0 violations", systems.len()))
}

fn random_ordinal(rng: &mut ChaCha8Rng) -> Ordinal {
    match rng.gen_range(0..4) {
        0 => Ordinal::nat(rng.gen_range(1..5)),
        1 => Ordinal::omega_times(rng.gen_range(1..4)).add(&Ordinal::nat(rng.gen_range(0..3))),
        2 => Ordinal::monomial(2, 1).add(&Ordinal::nat(rng.gen_range(0..3))),
        _ => Ordinal::omega(),
    }
}

fn perturb(base: &Annotation, rng: &mut ChaCha8Rng) -> Annotation {
    let mut sets: Vec<AnnSet> = base.sets().to_vec();
    let kind = rng.gen_range(0..4);
    if kind == 0 || kind == 3 {
        sets = Annotation::from_sets(sets).shifted(&random_ordinal(rng)).sets().to_vec();
    }
    if kind == 1 || kind == 3 {
        for set in sets.iter_mut() {
            let mut extra = Vec::new();
            for (f, a) in set.iter() {
                if rng.gen_bool(0.3) {
                    extra.push((f.clone(), a.add(&random_ordinal(rng))));
                }
            }
            for (f, a) in extra {
                set.insert(f, a);
            }
        }
    }
    if kind == 2 {
        let s = rng.gen_range(0..sets.len());
        let entries: Vec<(Formula, Ordinal)> = sets[s].iter().map(|(f, a)| (f.clone(), a.clone())).collect();
        if !entries.is_empty() {
            let (f, a) = &entries[rng.gen_range(0..entries.len())];
            sets[s].remove(f, a);
        }
    }
    Annotation::from_sets(sets)
}

// 4. The least-stage annotation is a well-annotation, true where annotated,
// and below every perturbed well-annotation.
fn kozen_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut compared = 0;
    for i in 0..200 {
        let ef = corpus::random_system(&mut rng, 3, &["p", "q"]);
        let f = random_frame(&mut rng, 5, &["p", "q"]);
        let sys = ef.system();
        let theta = conservative(sys, &f);
        let v = check_well_annotation(&theta, sys, &f).map_err(|e| e.to_string())?;
        ensure(v.is_empty(), || format!("instance {i}: {}", v[0]))?;
        let limit = common::stages(sys, &f).pop().unwrap();
        for s in f.states() {
            for (phi, _) in theta.at(s).iter() {
                ensure(common::eval(phi, &f, &limit)[s], || {
                    format!("instance {i}: {phi} annotated but false at {s}")
                })?;
            }
        }
        let mut valid = 0;
        for _ in 0..2000 {
            if valid == 50 {
                break;
            }
            let other = perturb(&theta, &mut rng);
            if !check_well_annotation(&other, sys, &f).map_err(|e| e.to_string())?.is_empty() {
                continue;
            }
            valid += 1;
            ensure(theta.preceq(&other), || format!("instance {i}: conservative not below a perturbation"))?;
        }
        ensure(valid == 50, || format!("instance {i}: only {valid} valid perturbations"))?;
        compared += valid;
    }
    Ok(format!("200 instances, {compared} perturbed well-annotations compared, 0 violations"))
}

// 5. Closure ordinals on the Czarnecki frames grow with depth.
fn czarnecki_growth() -> Outcome {
    let start = Instant::now();
    let ef = corpus::formulas().into_iter().find(|(n, _)| n == "czarnecki-1").unwrap().1;
    let mut prev = 0;
    let mut seen = Vec::new();
    for k in 1..=12 {
        let f = gen::czarnecki(1, k).unwrap();
        let co = closure_ordinal_on(&f, &ef);
        ensure(co == common::closure_ordinal(&ef, &f), || format!("k = {k}: reference disagrees"))?;
        ensure(co > prev && co >= k, || format!("k = {k}: closure ordinal {co} after {prev}"))?;
        prev = co;
        seen.push(co);
    }
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!("closure ordinals {seen:?}, {t:.1?}"))
}

type PairKey = (usize, usize, String, Ordinal, Ordinal);

fn brute_force_pairs(t: &AnnotatedTree) -> Vec<PairKey> {
    let mut out = Vec::new();
    let limit_nablas = |set: &AnnSet| -> BTreeSet<Formula> {
        set.iter()
            .filter(|(f, a)| matches!(f, Formula::Nabla(_)) && a.is_limit())
            .map(|(f, _)| f.clone())
            .collect()
    };
    for s in t.frame().states() {
        for b in t.frame().states() {
            if !t.tree().is_proper_ancestor(s, b) {
                continue;
            }
            if t.theta().at(s).formulas() != t.theta().at(b).formulas()
                || t.phi().at(s).formulas() != t.phi().at(b).formulas()
            {
                continue;
            }
            for g in limit_nablas(t.phi().at(s)) {
                let alpha = t
                    .phi()
                    .at(s)
                    .iter()
                    .filter(|(f, a)| **f == g && a.is_limit())
                    .map(|(_, a)| a.clone())
                    .max();
                let beta = t
                    .phi()
                    .at(b)
                    .iter()
                    .filter(|(f, a)| **f == g && a.is_limit())
                    .map(|(_, a)| a.clone())
                    .min();
                if let (Some(alpha), Some(beta)) = (alpha, beta) {
                    if beta < alpha {
                        out.push((s, b, g.to_string(), alpha, beta));
                    }
                }
            }
        }
    }
    out.sort();
    out
}

const FIXTURES: u64 = 24;

// 6. Every descending fixture yields a pair, matching a brute-force scan.
fn pigeonhole() -> Outcome {
    let start = Instant::now();
    let ef = corpus::descent_system();
    let n = repetition_bound_for_size(2);
    ensure(n == 17u32.into(), || format!("scaled bound is {n}"))?;
    let mut total = 0;
    for seed in 0..FIXTURES {
        let t = corpus::descent_fixture(seed, 18);
        let limits = limit_states(&t);
        let profiles: BTreeSet<_> = limits.iter().map(|&s| t.profile(s)).collect();
        ensure(limits.len() == 18 && profiles.len() <= 16, || format!("fixture {seed}: malformed"))?;
        let rel = check_relevant(t.phi(), t.theta(), ef.system(), t.frame());
        ensure(rel.is_empty(), || format!("fixture {seed}: {}", rel[0]))?;
        let pairs = find_repetition_pairs(&t);
        ensure(!pairs.is_empty(), || format!("fixture {seed}: no pair"))?;
        let found: Vec<PairKey> = pairs
            .iter()
            .map(|p| {
                (
                    p.companion,
                    p.bud,
                    Formula::Nabla(p.gamma.clone()).to_string(),
                    p.alpha.clone(),
                    p.beta.clone(),
                )
            })
            .collect();
        ensure(found == brute_force_pairs(&t), || format!("fixture {seed}: scan disagrees"))?;
        let spine = corpus::descent_spine(&t);
        ensure(
            matches!(check_descent_hypothesis(&t, ef.system(), &spine, &n), Descent::PairFound { .. }),
            || format!("fixture {seed}: descent check found no pair"),
        )?;
        total += pairs.len();
    }
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!("{FIXTURES} fixtures, {total} pairs, scans agree, {t:.1?}"))
}

// 7. Identity pumps, mismatched donors, and splicing companions into buds.
fn pump_mechanics() -> Outcome {
    let mut spliced = 0;
    for seed in 0..FIXTURES {
        let t = corpus::descent_fixture(seed, 18);
        for s in t.frame().states() {
            let (out, _) = pump(&t, s, &t.subtree(s)).map_err(|e| e.to_string())?;
            ensure(isomorphic(&out, &t), || {
                format!("fixture {seed}: identity pump at {s} changed the tree")
            })?;

            let donor = t.subtree(s);
            let root = donor.root();
            let mut theta = donor.theta().clone();
            let q = Formula::prop("q1");
            if theta.at(root).has(&q) {
                let a = theta.at(root).min_of(&q).unwrap().clone();
                theta.at_mut(root).remove(&q, &a);
            } else {
                theta.at_mut(root).insert(q, Ordinal::zero());
            }
            let altered = AnnotatedTree::new(donor.tree().clone(), theta, donor.phi().clone()).unwrap();
            ensure(matches!(pump(&t, s, &altered), Err(PumpError::RootSetMismatch(_))), || {
                format!("fixture {seed}: altered donor accepted at {s}")
            })?;
        }
        for pair in find_repetition_pairs(&t) {
            let donor = t.subtree(pair.companion);
            let nab = Formula::Nabla(pair.gamma.clone());
            let (out, log) = pump(&t, pair.bud, &donor).map_err(|e| e.to_string())?;
            let new_root = out.frame().index_of(&log.renaming[donor.root()].1).unwrap();
            ensure(out.phi().at(new_root).contains(&nab, &pair.alpha), || {
                format!("fixture {seed}: splice lost {nab} @ {}", pair.alpha)
            })?;
            let verdict = optimality(&t, pair.bud, &nab, &pair.beta, std::slice::from_ref(&donor));
            ensure(matches!(verdict, Optimality::NotOptimal { .. }), || {
                format!("fixture {seed}: bud {} judged possibly optimal", pair.bud)
            })?;
            spliced += 1;
        }
    }
    Ok(format!("{FIXTURES} fixtures, {spliced} splices accepted"))
}

// 8. Conjunctive translation of the whole corpus, rechecked by the reference
// evaluator.
fn conjunctive() -> Outcome {
    let start = Instant::now();
    let all = corpus::formulas();
    ensure(all.len() >= 30, || format!("corpus has {} entries", all.len()))?;
    let mut frames_checked = 0;
    for (name, ef) in &all {
        let (out, report) = to_conjunctive(ef).map_err(|e| format!("{name}: {e}"))?;
        ensure(out.is_conjunctive(), || format!("{name}: output not conjunctive"))?;
        ensure(report.verdict.passed(), || format!("{name}: built-in oracle found mismatches"))?;
        let props = props_of(ef);
        let props: Vec<&str> = props.iter().map(String::as_str).collect();
        let mut frames = gen::enumerate(3, &props);
        frames.extend(gen::random_frames(0x5eed, 500, 8, &props));
        for f in &frames {
            ensure(common::denotation(ef, f) == common::denotation(&out, f), || {
                format!("{name}: differs on\n{}", f.to_text(None))
            })?;
        }
        frames_checked += frames.len();
    }
    let t = within(Duration::from_secs(600), start)?;
    Ok(format!("{} formulas, {frames_checked} frame checks, 0 mismatches, {t:.1?}", all.len()))
}

/// Reference ordinal below `ω^3`: coefficients of `ω^2`, `ω`, `1`.
type Triple = (u64, u64, u64);

fn triple_add(a: Triple, b: Triple) -> Triple {
    if b.0 > 0 {
        (a.0 + b.0, b.1, b.2)
    } else if b.1 > 0 {
        (a.0, a.1 + b.1, b.2)
    } else {
        (a.0, a.1, a.2 + b.2)
    }
}

fn triple_pred(a: Triple) -> Option<Triple> {
    match a {
        (0, 0, 0) => None,
        (x, y, z) if z > 0 => Some((x, y, z - 1)),
        (x, y, 0) if y > 0 => Some((x, y - 1, 0)),
        (x, _, _) => Some((x - 1, 0, 0)),
    }
}

fn from_triple(a: Triple) -> Ordinal {
    Ordinal::from_terms([(2, a.0), (1, a.1), (0, a.2)].into_iter().filter(|t| t.1 > 0))
}

// 9. Ordinal kernel against the reference triples.
fn ordinals() -> Outcome {
    let all: Vec<Triple> =
        (0..=5).flat_map(|a| (0..=5).flat_map(move |b| (0..=5).map(move |c| (a, b, c)))).collect();
    let mut pairs = 0;
    for &a in &all {
        let oa = from_triple(a);
        ensure(oa.pred().ok() == triple_pred(a).map(from_triple), || format!("pred({oa})"))?;
        let before = (a.2 > 0).then(|| from_triple((a.0, a.1, a.2 - 1)));
        ensure(oa.predecessor() == before, || format!("predecessor({oa})"))?;
        for &b in &all {
            let ob = from_triple(b);
            ensure(oa.cmp(&ob) == a.cmp(&b), || format!("compare {oa} {ob}"))?;
            ensure(oa.add(&ob) == from_triple(triple_add(a, b)), || format!("{oa} + {ob}"))?;
            pairs += 1;
        }
    }
    ensure(Ordinal::omega().succ().pred() == Ok(Ordinal::omega()), || "pred(w+1)".into())?;
    for k in 0..=10 {
        ensure(Ordinal::omega_times(k + 1).pred() == Ok(Ordinal::omega_times(k)), || {
            format!("pred(w.{})", k + 1)
        })?;
    }
    Ok(format!("{} ordinals, {pairs} pairs, 0 disagreements", all.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("nabla law", nabla_law),
        ("approximation monotonicity and stabilization", approximations),
        ("sandwich containments", sandwich),
        ("least-stage annotation round trip", kozen_round_trip),
        ("Czarnecki growth", czarnecki_growth),
        ("repetition-pair pigeonhole", pigeonhole),
        ("pump mechanics", pump_mechanics),
        ("conjunctive translation", conjunctive),
        ("ordinal kernel", ordinals),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|k| k != i + 1) {
            continue;
        }
        match run() {
            Ok(detail) => println!("criterion {} ({name}): PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL ({detail})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
