use geoforge::eval::{evaluate, EvalError};
use serde_json::json;

fn pc(segments: &[(&str, &str)]) -> serde_json::Value {
    let mut points = serde_json::Map::new();
    for (i, l) in ["A", "B", "C", "D"].iter().enumerate() {
        points.insert(l.to_string(), json!([i as f64, (i * i) as f64]));
    }
    json!({
        "points": points,
        "segments": segments.iter().map(|(a, b)| json!([a, b])).collect::<Vec<_>>(),
        "circles": [],
        "quantities": [],
        "annotations": {"right_angles": [], "length_of_line": [[["A", "B"], "2*sqrt(3)"]], "measure_of_angle": []}
    })
}

fn lines(values: &[serde_json::Value]) -> String {
    values.iter().map(|v| format!("{v}\n")).collect()
}

#[test]
fn bare_plot_code_pairs_by_position() {
    let truth = lines(&[pc(&[("A", "B"), ("B", "C"), ("C", "A"), ("B", "D")])]);
    let pred = lines(&[pc(&[("B", "A"), ("B", "C"), ("A", "D")])]);
    let r = evaluate(&pred, &truth, 4, 1e-6).unwrap();
    let f = r.samples[0].segments;
    assert_eq!((f.intersection, f.predicted, f.truth), (2, 3, 4));
    assert_eq!(f.f1, 4.0 / 7.0);
    assert_eq!(r.parse_rate, 1.0);
    assert!(r.bins.is_none());
}

#[test]
fn wrappers_pair_by_id_and_bin() {
    let truth: Vec<_> = (0..8)
        .map(|i| json!({"id": format!("t{i}"), "plot_code": pc(&[("A", "B"), ("B", "C")])}))
        .collect();
    let pred: Vec<_> = (0..8)
        .rev()
        .map(|i| {
            let segs: &[(&str, &str)] = if i % 2 == 0 { &[("A", "B"), ("B", "C")] } else { &[("A", "B")] };
            json!({"id": format!("t{i}"), "plot_code": pc(segs), "solved": i % 2 == 0})
        })
        .collect();
    let r = evaluate(&lines(&pred), &lines(&truth), 4, 1e-6).unwrap();
    let bins = r.bins.unwrap();
    assert_eq!(bins.iter().map(|b| b.size).collect::<Vec<_>>(), vec![2, 2, 2, 2]);
    assert_eq!(bins.iter().map(|b| b.accuracy).collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, 1.0]);
    assert_eq!(r.annotations.fully_correct, 8);
}

#[test]
fn raw_model_text_and_unparseable_lines() {
    let truth = lines(&[
        json!({"id": "a", "plot_code": pc(&[("A", "B")])}),
        json!({"id": "b", "plot_code": pc(&[("A", "B")])}),
    ]);
    let raw = format!("Here you go:\n```json\n{}\n```", pc(&[("A", "B")]));
    let pred = lines(&[
        json!({"id": "a", "plot_code": raw}),
        json!({"id": "b", "plot_code": "no code today"}),
    ]);
    let r = evaluate(&pred, &truth, 1, 1e-6).unwrap();
    assert_eq!(r.parse_rate, 0.5);
    assert_eq!(r.samples[0].segments.f1, 1.0);
    assert_eq!(r.samples[1].segments.f1, 0.0);
    assert!(r.samples[1].annotations.is_none());
    assert_eq!(r.annotations.evaluated, 1);
}

#[test]
fn mismatches_are_errors() {
    let truth = lines(&[pc(&[]), pc(&[])]);
    let pred = lines(&[pc(&[])]);
    assert!(matches!(
        evaluate(&pred, &truth, 1, 1e-6),
        Err(EvalError::CountMismatch { pred: 1, truth: 2 })
    ));
    let truth = lines(&[json!({"id": "x", "plot_code": pc(&[])})]);
    let pred = lines(&[json!({"id": "y", "plot_code": pc(&[])})]);
    assert!(matches!(evaluate(&pred, &truth, 1, 1e-6), Err(EvalError::UnknownId(_))));
    assert!(matches!(
        evaluate(&pred, "not json\n", 1, 1e-6),
        Err(EvalError::Truth { line: 1, .. })
    ));
}
