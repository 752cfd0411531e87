use std::collections::BTreeSet;

use geoforge_core::geom::{
    check_nondegenerate, sample_scene, FactStore, Pattern, Point, PointLabel, Predicate, PredicateKind, SampleBudget,
    Substitution, Term, Witness,
};
use geoforge_core::verify::{check_relation, ToleranceConfig};
use proptest::prelude::*;

const LABELS: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

fn l(s: &str) -> PointLabel {
    PointLabel::new(s).unwrap()
}

#[test]
fn sampled_facts_hold_on_their_witness() {
    let tol = ToleranceConfig::default();
    for seed in 0..100 {
        let scene = sample_scene(seed, &SampleBudget::default()).unwrap();
        assert!(!scene.facts.is_empty());
        for f in &scene.facts {
            let r = check_relation(f, &scene.witness, &tol).unwrap();
            assert!(r.passed, "seed {seed}: {f} residual {}", r.residual);
        }
        assert!(scene.witness.min_separation() >= SampleBudget::default().min_separation);
    }
}

#[test]
fn nondegeneracy_examples() {
    let mut w = Witness::new();
    for (n, x, y) in [("A", 0.0, 0.0), ("B", 1.0, 0.0), ("C", 0.0, 1.0), ("D", 2.0, 0.0)] {
        w.insert(l(n), Point::new(x, y));
    }
    let ok = |s: &str| check_nondegenerate(&w, &s.parse().unwrap()).unwrap();
    assert!(ok("ncoll A B C"));
    assert!(!ok("ncoll A B D"));
    assert!(!ok("sameclock A B C A C B"));
    assert!(ok("sameclock A B C B C A"));
    assert!(ok("npara A B A C"));
    assert!(!ok("npara A B B D"));
    assert!(check_nondegenerate(&w, &"ncoll A B Z".parse().unwrap()).is_err());
}

fn fact_strategy() -> impl Strategy<Value = Option<Predicate>> {
    let kinds = [
        PredicateKind::Para,
        PredicateKind::Perp,
        PredicateKind::Cong,
        PredicateKind::Coll,
        PredicateKind::Midp,
        PredicateKind::Circle,
        PredicateKind::Cyclic,
        PredicateKind::Eqangle,
    ];
    (prop::sample::select(kinds.to_vec()), prop::collection::vec(0..LABELS.len(), 8)).prop_map(|(kind, ix)| {
        let n = match kind {
            PredicateKind::Coll | PredicateKind::Midp => 3,
            PredicateKind::Eqangle => 8,
            _ => 4,
        };
        let args = ix[..n].iter().map(|&i| l(LABELS[i])).collect();
        Predicate::new(kind, args, None).ok()
    })
}

/// Pattern of a kind with up to four variables, the rest fixed labels.
fn pattern_strategy() -> impl Strategy<Value = Pattern> {
    let kinds = [
        PredicateKind::Para,
        PredicateKind::Perp,
        PredicateKind::Cong,
        PredicateKind::Coll,
        PredicateKind::Midp,
        PredicateKind::Circle,
        PredicateKind::Cyclic,
        PredicateKind::Eqangle,
    ];
    (
        prop::sample::select(kinds.to_vec()),
        prop::collection::vec((any::<bool>(), 0..4usize, 0..LABELS.len()), 8),
    )
        .prop_map(|(kind, slots)| {
            let n = match kind {
                PredicateKind::Coll | PredicateKind::Midp => 3,
                PredicateKind::Eqangle => 8,
                _ => 4,
            };
            let terms = slots[..n]
                .iter()
                .enumerate()
                .map(|(i, &(var, v, lab))| {
                    // Eqangle keeps its second half fixed to bound the brute force.
                    if var && !(kind == PredicateKind::Eqangle && i >= 4) {
                        Term::Var(format!("v{v}"))
                    } else {
                        Term::Label(l(LABELS[lab]))
                    }
                })
                .collect();
            Pattern::new(kind, terms, None).unwrap()
        })
}

fn brute_force(store: &FactStore, pat: &Pattern) -> BTreeSet<Substitution> {
    let vars: Vec<String> = {
        let mut v: Vec<String> = pat.vars().map(str::to_string).collect();
        v.sort();
        v.dedup();
        v
    };
    let mut out = BTreeSet::new();
    let total = LABELS.len().pow(vars.len() as u32);
    for code in 0..total {
        let mut c = code;
        let sub: Substitution = vars
            .iter()
            .map(|v| {
                let lab = l(LABELS[c % LABELS.len()]);
                c /= LABELS.len();
                (v.clone(), lab)
            })
            .collect();
        if let Ok(p) = pat.instantiate(&sub) {
            if store.contains(&p) {
                out.insert(sub);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn match_agrees_with_brute_force(facts in prop::collection::vec(fact_strategy(), 0..12), pat in pattern_strategy()) {
        let mut store = FactStore::new();
        for f in facts.iter().flatten() {
            store.insert(f);
        }
        let got = store.match_pattern(&pat);
        let got_set: BTreeSet<Substitution> = got.iter().cloned().collect();
        prop_assert_eq!(got.len(), got_set.len(), "duplicates in result");
        prop_assert_eq!(got_set, brute_force(&store, &pat));
    }

    #[test]
    fn insert_is_symmetry_insensitive(f in fact_strategy()) {
        let Some(f) = f else { return Ok(()); };
        let mut store = FactStore::new();
        prop_assert!(store.insert(&f));
        prop_assert!(!store.insert(&f.canonicalize()));
        prop_assert!(store.contains(&f));
    }
}

#[test]
fn empty_store_matches_nothing() {
    let store = FactStore::new();
    assert!(store.match_pattern(&"para ?x ?y C D".parse().unwrap()).is_empty());
}
