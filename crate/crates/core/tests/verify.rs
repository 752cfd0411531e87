use geoforge_core::deduction::{forward_chain, load_rule_library, ChainBudget};
use geoforge_core::geom::{Predicate, PredicateKind};
use geoforge_core::geom::{sample_scene, SampleBudget};
use geoforge_core::schema::{PlotCode, Segment};
use geoforge_core::verify::{
    check_annotations, verify_answer, verify_record, zero_value_quantities, CandidateRecord, ProblemKind, ToleranceConfig,
};
use proptest::prelude::*;

/// A record built from a sampled scene with every segment length annotated exactly.
fn record_from_scene(seed: u64) -> CandidateRecord {
    let scene = sample_scene(seed, &SampleBudget::default()).unwrap();
    let points = scene.witness.coords.clone();
    let labels: Vec<_> = points.keys().copied().collect();
    let mut pc = PlotCode {
        points: points.clone(),
        ..PlotCode::default()
    };
    for w in labels.windows(2) {
        pc.segments.insert(Segment::new(w[0], w[1]).unwrap());
        let len = points[&w[0]].dist(points[&w[1]]);
        pc.annotations.length_of_line.push(([w[0], w[1]], format!("{len}")));
    }
    let (a, b) = (labels[0], labels[1]);
    pc.quantities = vec![format!("length({a}, {b})")];
    let answer = format!("{}", points[&a].dist(points[&b]));
    CandidateRecord {
        plot_code: pc,
        declared: scene.facts.clone(),
        answer: Some(answer),
        kind: ProblemKind::Computation,
    }
}

#[test]
fn passing_records_reverify_identically() {
    let tol = ToleranceConfig::default();
    for seed in 0..20 {
        let rec = record_from_scene(seed);
        let first = verify_record(&rec, &tol);
        assert!(first.passed, "seed {seed}: {:?}", first.failures().collect::<Vec<_>>());
        let again = verify_record(&rec, &tol);
        assert_eq!(serde_json::to_vec(&first).unwrap(), serde_json::to_vec(&again).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perturbed_length_fails(seed in 0u64..500, pick in any::<prop::sample::Index>(), up in any::<bool>()) {
        let tol = ToleranceConfig::default();
        let mut rec = record_from_scene(seed);
        prop_assert!(check_annotations(&rec.plot_code, &tol).passed);
        let anns = &mut rec.plot_code.annotations.length_of_line;
        let i = pick.index(anns.len());
        let v: f64 = anns[i].1.parse().unwrap();
        let delta = 1e3 * tol.eps_abs.max(tol.eps_rel * v.abs());
        anns[i].1 = format!("{}", if up { v + delta } else { v - delta });
        prop_assert!(!check_annotations(&rec.plot_code, &tol).passed);
    }

    #[test]
    fn computation_and_proof_forms_agree(
        seed in 0u64..500,
        exponent in -12i32..-2,
        sign in prop::sample::select(vec![-1.0, 0.0, 1.0]),
        scale in prop::sample::select(vec![1.0, 1e3, 1e5]),
    ) {
        let tol = ToleranceConfig::default();
        let rec = record_from_scene(seed);
        let pc = &rec.plot_code;
        let q = format!("{scale} * ({})", pc.quantities[0]);
        let truth: f64 = rec.answer.as_deref().unwrap().parse::<f64>().unwrap() * scale;
        let answer = truth + sign * 10f64.powi(exponent) * truth;
        let a = format!("{answer}");
        let comp = verify_answer(std::slice::from_ref(&q), pc, Some(&a), ProblemKind::Computation, &tol).unwrap();
        let proof = verify_answer(&[format!("{q} - {a}")], pc, None, ProblemKind::Proof, &tol).unwrap();
        prop_assert_eq!(comp.passed, proof.passed, "q={} a={}", q, a);
    }
}

fn proof_record(pc: &PlotCode, quantities: Vec<String>) -> f64 {
    let report = verify_answer(&quantities, pc, None, ProblemKind::Proof, &ToleranceConfig::default()).unwrap();
    report.checks.iter().map(|c| c.value.unwrap().abs()).fold(0.0, f64::max)
}

#[test]
fn zero_value_forms_vanish_on_sampled_and_derived_facts() {
    let rules = load_rule_library().unwrap();
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..30 {
        let scene = sample_scene(seed, &SampleBudget::default()).unwrap();
        let pc = PlotCode {
            points: scene.witness.coords.clone(),
            ..PlotCode::default()
        };
        let g = forward_chain(&scene.facts, &scene.witness, &rules, ChainBudget::default());
        for node in &g.nodes {
            let Some(qs) = zero_value_quantities(&node.fact) else { continue };
            seen.insert(node.fact.kind());
            let worst = proof_record(&pc, qs.clone());
            assert!(worst < 1e-6, "seed {seed}: {} -> {qs:?} = {worst}", node.fact);
        }
    }
    for k in [PredicateKind::Cong, PredicateKind::Para, PredicateKind::Perp] {
        assert!(seen.contains(&k), "no {k:?} facts sampled");
    }
}

#[test]
fn zero_value_forms_match_the_table() {
    let q = |s: &str| zero_value_quantities(&s.parse::<Predicate>().unwrap()).unwrap();
    assert_eq!(q("cong A B C D"), ["length(A, B) - length(C, D)"]);
    assert_eq!(q("perp A B C D"), ["angle_between_lines(A, B, C, D) - 90"]);
    assert_eq!(q("para A B C D"), ["angle_between_lines(A, B, C, D) - 0"]);
    assert_eq!(q("coll A B C"), ["area(A, B, C) - 0"]);
    assert_eq!(
        q("eqratio A B C D E F G H"),
        ["length(A, B) / length(C, D) - length(E, F) / length(G, H)"]
    );
    assert!(zero_value_quantities(&"ncoll A B C".parse().unwrap()).is_none());
}

#[test]
fn zero_value_forms_detect_broken_relations() {
    use geoforge_core::geom::{Point, PointLabel};
    let l = |s: &str| PointLabel::new(s).unwrap();
    let mut pc = PlotCode::default();
    for (n, x, y) in [("A", 0.0, 0.0), ("B", 4.0, 0.0), ("C", 1.0, 1.0), ("D", 1.0, 5.0)] {
        pc.points.insert(l(n), Point::new(x, y));
    }
    let q = |s: &str| zero_value_quantities(&s.parse::<Predicate>().unwrap()).unwrap();
    assert!(proof_record(&pc, q("cong A B C D")) < 1e-12);
    assert!(proof_record(&pc, q("perp A B C D")) < 1e-12);
    pc.points.insert(l("D"), Point::new(1.1, 5.0));
    assert!(proof_record(&pc, q("cong A B C D")) > 1e-6);
    assert!(proof_record(&pc, q("perp A B C D")) > 1e-6);
}
