mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nabla_core::annotation::{
    check_relevant, check_single_nabla, check_well_annotation, conservative, extract_relevant,
    verify_conservative, Annotation, AnnotationError, Extraction,
};
use nabla_core::corpus;
use nabla_core::frame::gen;
use nabla_core::normalform::{to_conjunctive_with, OracleConfig};
use nabla_core::pump::{isomorphic, pump, AnnotatedTree};
use nabla_core::{EquationalFormula, Formula, TreeFrame};

fn light_oracle() -> OracleConfig {
    OracleConfig { exhaustive_states: 2, random_frames: 40, random_max_states: 5, seed: 1 }
}

/// Checks an extraction against every relevant-part condition and the tree
/// it came from.
fn assert_extraction(
    tree: &TreeFrame,
    theta: &Annotation,
    ef: &EquationalFormula,
    ex: &Extraction,
    what: &str,
) {
    let sys = ef.system();
    let fr = ex.tree.frame();
    assert!(verify_conservative(&ex.theta, sys, fr).unwrap().is_empty(), "{what}");
    assert!(check_well_annotation(&ex.theta, sys, fr).unwrap().is_empty(), "{what}");
    let rel = check_relevant(&ex.phi, &ex.theta, sys, fr);
    assert!(rel.is_empty(), "{what}: {}", rel[0]);
    let x = Formula::var(ef.init());
    let alpha = theta.at(tree.root()).min_of(&x).unwrap();
    assert!(ex.phi.at(ex.tree.root()).contains(&x, alpha));
    for (s, &o) in ex.origin.iter().enumerate() {
        assert_eq!(fr.labels_at(s), tree.frame().labels_at(o));
    }
}

#[test]
fn extracted_relevant_parts_satisfy_their_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut extracted = 0;
    for i in 0..120 {
        let raw = corpus::random_system(&mut rng, 2, &["p", "q"]);
        let (ef, _) = to_conjunctive_with(&raw, &light_oracle()).unwrap();
        let size = rng.gen_range(1..=4);
        let f = gen::random_with(&mut rng, size, 0.4, &["p", "q"]).unwrap();
        let (tree, _) = f.unravel(0, 3);
        let x = Formula::var(ef.init());

        // Without the conjunctive shape, extraction may fail but never lies.
        let raw_theta = conservative(raw.system(), tree.frame());
        if raw_theta.at(tree.root()).has(&x) {
            match extract_relevant(&tree, &raw_theta, raw.system(), ef.init()) {
                Ok(ex) => {
                    assert_extraction(&tree, &raw_theta, &raw, &ex, &format!("raw instance {i}"));
                    assert!(check_single_nabla(&ex.phi, ex.tree.frame()).is_empty());
                }
                Err(e) => {
                    assert!(matches!(e, AnnotationError::ExtractionFailure(_)), "raw instance {i}: {e}")
                }
            }
        }

        let theta = conservative(ef.system(), tree.frame());
        if !theta.at(tree.root()).has(&x) {
            continue;
        }
        let ex = extract_relevant(&tree, &theta, ef.system(), ef.init())
            .unwrap_or_else(|e| panic!("instance {i}: {e}"));
        assert_extraction(&tree, &theta, &ef, &ex, &format!("instance {i}"));
        assert!(check_single_nabla(&ex.phi, ex.tree.frame()).is_empty(), "instance {i}");

        let t = AnnotatedTree::new(ex.tree.clone(), ex.theta.clone(), ex.phi.clone()).unwrap();
        for s in t.frame().states() {
            let (out, _) = pump(&t, s, &t.subtree(s)).unwrap();
            assert!(isomorphic(&out, &t));
        }
        extracted += 1;
    }
    assert!(extracted >= 40, "only {extracted} instances had the initial variable at the root");
}

#[test]
fn annotation_text_and_doc_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let ef = corpus::random_system(&mut rng, 3, &["p", "q"]);
        let f = gen::random_with(&mut rng, 4, 0.4, &["p", "q"]).unwrap();
        let theta = conservative(ef.system(), &f).shifted(&"w.2+1".parse().unwrap());
        let vars = ef.system().var_set();
        assert_eq!(Annotation::parse(&theta.to_text(&f), &f, &vars).unwrap(), theta);
        assert_eq!(Annotation::from_doc(&theta.to_doc(&f), &f, &vars).unwrap(), theta);
    }
}

#[test]
fn annotated_formulas_hold_where_annotated() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let ef = corpus::random_system(&mut rng, 2, &["p", "q"]);
        let f = gen::random_with(&mut rng, 5, 0.35, &["p", "q"]).unwrap();
        let theta = conservative(ef.system(), &f);
        let stages = common::stages(ef.system(), &f);
        let limit = stages.last().unwrap();
        for s in f.states() {
            for (phi, a) in theta.at(s).iter() {
                let n = a.as_nat().unwrap() as usize;
                assert!(common::eval(phi, &f, &stages[n.min(stages.len() - 1)])[s], "{phi} @ {a}");
                assert!(common::eval(phi, &f, limit)[s]);
                if n > 0 {
                    assert!(!common::eval(phi, &f, &stages[n - 1])[s], "{phi} @ {a} is not least");
                }
            }
        }
    }
}
