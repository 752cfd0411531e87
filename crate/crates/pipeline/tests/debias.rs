mod common;

use common::mock_gateway;
use geoforge::{annotation_text, debias, plotting_code_text, step2_vars, surviving_literals, DebiasError};
use geoforge_core::geom::{Point, PointLabel};
use geoforge_core::schema::{Annotations, PlotCode};
use geoforge_gateway::{vars, Role, TranscriptEntry};
use serde_json::json;

fn l(s: &str) -> PointLabel {
    PointLabel::new(s).unwrap()
}

fn lengths(entries: &[(&str, &str, &str)]) -> Annotations {
    Annotations {
        length_of_line: entries.iter().map(|(a, b, v)| ([l(a), l(b)], v.to_string())).collect(),
        ..Annotations::default()
    }
}

fn entry(role: Role, v: &std::collections::BTreeMap<String, String>, response: serde_json::Value) -> TranscriptEntry {
    TranscriptEntry::new(role, &role.template().render(v).unwrap(), response.to_string())
}

#[test]
fn annotation_text_wording() {
    let mut ann = lengths(&[("A", "B", "3"), ("A", "C", "6")]);
    ann.right_angles.push([l("B"), l("A"), l("C")]);
    assert_eq!(
        annotation_text(&ann),
        "Right angle annotation: angleBAC = 90degrees; Length annotations: AB = 3, AC = 6"
    );
    let one = lengths(&[("D", "E", "2*sqrt(3)")]);
    assert_eq!(annotation_text(&one), "Length annotation: DE = 2*sqrt(3)");
    let angle = Annotations {
        measure_of_angle: vec![([l("A"), l("B"), l("C")], "30".into())],
        ..Annotations::default()
    };
    assert_eq!(annotation_text(&angle), "Angle annotation: angleABC = 30degrees");
    assert_eq!(annotation_text(&Annotations::default()), "");
}

#[test]
fn guard_flags_standalone_literals_only() {
    let ann = lengths(&[("A", "B", "3")]);
    assert_eq!(surviving_literals("Given AB = 3. Find CD.", &ann).len(), 1);
    assert_eq!(surviving_literals("Given $AB=3$. Find CD.", &ann).len(), 1);
    assert!(surviving_literals("Given AB = 3.5. Find CD.", &ann).is_empty());
    assert!(surviving_literals("Given AB = 13. Find CD.", &ann).is_empty());
    assert!(surviving_literals("Find 3/4 of CD.", &ann).is_empty());
    assert!(surviving_literals("Find angle P3Q.", &ann).is_empty());

    let right = Annotations {
        right_angles: vec![[l("B"), l("A"), l("C")]],
        ..Annotations::default()
    };
    let flags = surviving_literals("Given $\\angle BAC=90^\\circ$. Find BC.", &right);
    assert_eq!(flags, vec!["right angle BAC: 90 survives".to_string()]);
    assert!(surviving_literals("Given $AB \\perp AC$. Find BC.", &right).is_empty());
}

fn pc_with(ann: Annotations) -> PlotCode {
    PlotCode {
        points: [("A", 0.0, 0.0), ("B", 3.0, 0.0), ("C", 0.0, 6.0)]
            .iter()
            .map(|(n, x, y)| (l(n), Point::new(*x, *y)))
            .collect(),
        annotations: ann,
        ..PlotCode::default()
    }
}

#[test]
fn empty_annotations_skip_filtering() {
    let pc = pc_with(Annotations::default());
    let q = "Given $AB=3$ and $AC=6$. Find $BC$.";
    let q1 = "Given $AB=3$, $AC=6$. Find $BC$.";
    let cot = "Step1: Pythagoras.";
    let gw = mock_gateway(vec![
        entry(Role::DebiasStep1, &vars([("question", q)]), json!({ "question_sanitized": q1 })),
        entry(
            Role::CotRewrite,
            &vars([("cot", cot.to_string()), ("plotting_code", plotting_code_text(&pc))]),
            json!({ "cot": "From the figure, Pythagoras." }),
        ),
    ]);
    let d = debias(q, cot, &pc, &gw).unwrap();
    assert_eq!(d.question, q1);
    assert_eq!(d.raw_step2, None);
    assert_eq!(d.cot, "From the figure, Pythagoras.");
    assert!(d.flags.is_empty());
}

#[test]
fn surviving_literal_is_flagged_not_edited() {
    let mut ann = lengths(&[("A", "B", "3")]);
    ann.right_angles.push([l("B"), l("A"), l("C")]);
    let pc = pc_with(ann);
    let q = "Given $AB=3$, $\\angle BAC=90^\\circ$. Find $BC$.";
    let kept = "Given $\\angle BAC=90^\\circ$. Find $BC$.";
    let gw = mock_gateway(vec![
        entry(Role::DebiasStep1, &vars([("question", q)]), json!({ "question_sanitized": q })),
        entry(
            Role::DebiasStep2,
            &step2_vars(q, &pc.annotations),
            json!({ "question_sanitized": kept }),
        ),
        entry(
            Role::CotRewrite,
            &vars([("cot", "c".to_string()), ("plotting_code", plotting_code_text(&pc))]),
            json!({ "cot": "c2" }),
        ),
    ]);
    let d = debias(q, "c", &pc, &gw).unwrap();
    assert_eq!(d.question, kept);
    assert_eq!(d.flags, vec!["right angle BAC: 90 survives".to_string()]);
}

#[test]
fn missing_field_is_an_error() {
    let pc = pc_with(Annotations::default());
    let gw = mock_gateway(vec![entry(
        Role::DebiasStep1,
        &vars([("question", "Q")]),
        json!({ "question": "wrong key" }),
    )]);
    assert!(matches!(
        debias("Q", "c", &pc, &gw),
        Err(DebiasError::MissingField {
            role: Role::DebiasStep1,
            ..
        })
    ));
}
