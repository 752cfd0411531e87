//! A deterministic stand-in for the model roles.
//!
//! For each attempt it writes the responses a well-behaved model would give
//! and keys them by the exact prompts the pipeline renders, so the result
//! replays through the mock backend. Corruptions turn one response bad in a
//! way that a specific gate must catch.

use std::collections::BTreeMap;

use geoforge_core::deduction::predicate_text;
use geoforge_core::geom::{Point, PointLabel, Predicate, PredicateKind};
use geoforge_core::schema::{plotcode_from_value, CircleForm, CircleSpec, ParseMode, PlotCode, Segment};
use geoforge_core::verify::{zero_value_quantities, ProblemKind};
use geoforge_gateway::{extract_json, string_field, vars, Role, TranscriptEntry};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::attempt::{coder_vars, instructor_request, Attempt};
use crate::debias::{plotting_code_text, step2_vars};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// The judge rejects the problem.
    Verdict,
    /// One length annotation disagrees with the coordinates.
    WrongLength,
    /// A circle through three collinear points.
    DegenerateCircle,
    /// An extra point almost on top of another one.
    Overlap,
}

/// First two distinct labels of the first premise; its length is fixed to a
/// small integer.
fn reference_segment(a: &Attempt) -> (PointLabel, PointLabel) {
    let args = a.seed.premises[0].args();
    let first = args[0];
    let second = args.iter().copied().find(|l| *l != first).expect("premises span two points");
    (first, second)
}

fn segments_of(p: &Predicate) -> Vec<(usize, usize)> {
    use PredicateKind::*;
    match p.kind() {
        Perp | Para | Cong | Npara | Rconst => vec![(0, 1), (2, 3)],
        Eqangle | Eqratio => vec![(0, 1), (2, 3), (4, 5), (6, 7)],
        Eqratio3 => vec![(4, 0), (4, 2), (5, 1), (5, 3)],
        Coll => (1..p.args().len()).map(|i| (i - 1, i)).collect(),
        Midp => vec![(1, 0), (0, 2)],
        Simtri | Simtrir | Contri | Contrir => vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)],
        Cyclic | Circle | Ncoll | Sameside | Nsameside | Sameclock => vec![],
    }
}

fn right_angle_of(p: &Predicate) -> Option<[PointLabel; 3]> {
    if p.kind() != PredicateKind::Perp {
        return None;
    }
    let a = p.args();
    for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
        if a[i] == a[j] {
            return Some([a[1 - i], a[i], a[5 - j]]);
        }
    }
    None
}

fn free_label(pc: &PlotCode) -> PointLabel {
    ["Z", "Y", "X", "W", "V", "U", "T", "S"]
        .iter()
        .map(|s| PointLabel::new(s).expect("valid label"))
        .find(|l| !pc.points.contains_key(l))
        .expect("scene leaves a spare letter")
}

struct Draft {
    question: String,
    question_filtered: String,
    cot: String,
    answer: String,
    plot_code: PlotCode,
}

fn draft(a: &Attempt) -> Draft {
    let (ra, rb) = reference_segment(a);
    let w = &a.seed.witness.coords;
    let length = (3 + a.scene % 7) as f64;
    let scale = length / w[&ra].dist(w[&rb]);
    let points = w
        .iter()
        .map(|(l, p)| (*l, Point::new(p.x * scale, p.y * scale)))
        .collect();
    let mut pc = PlotCode {
        points,
        ..PlotCode::default()
    };

    let target = a.target();
    let relations: Vec<&Predicate> = a.seed.premises.iter().chain(&a.seed.targets).collect();
    for p in &relations {
        let args = p.args();
        for (i, j) in segments_of(p) {
            if let Some(s) = Segment::new(args[i], args[j]) {
                pc.segments.insert(s);
            }
        }
        let form = match p.kind() {
            PredicateKind::Circle => Some(CircleForm::CenterPoint {
                center: args[0],
                through: args[1],
            }),
            PredicateKind::Cyclic => Some(CircleForm::ThreePoints(args[0], args[1], args[2])),
            _ => None,
        };
        if let Some(form) = form {
            if !pc.circles.iter().any(|c| c.form == form) {
                pc.circles.push(CircleSpec {
                    id: format!("C{}", pc.circles.len() + 1),
                    form,
                });
            }
        }
    }
    pc.annotations.length_of_line.push(([ra, rb], format!("{length}")));
    if let Some(r) = a.seed.premises.iter().find_map(right_angle_of) {
        pc.annotations.right_angles.push(r);
    }

    let target_text = predicate_text(target);
    let premises = &a.text.premise_text;
    let (ask, answer, quantities) = match a.kind {
        ProblemKind::Computation => {
            let args = target.args();
            let (num, den) = match target.kind() {
                PredicateKind::Eqratio3 => ((args[4], args[0]), (args[4], args[2])),
                _ => ((args[0], args[1]), (args[2], args[3])),
            };
            let quantity = format!("length({}, {}) / length({}, {})", num.0, num.1, den.0, den.1);
            let answer = match target.ratio() {
                Some(r) => format!("{}/{}", r.numer(), r.denom()),
                None => {
                    let d = |x: PointLabel, y: PointLabel| pc.points[&x].dist(pc.points[&y]);
                    let other = match target.kind() {
                        PredicateKind::Eqratio3 => d(args[5], args[1]) / d(args[5], args[3]),
                        _ => d(args[4], args[5]) / d(args[6], args[7]),
                    };
                    format!("{other}")
                }
            };
            (
                format!("Find {}{}:{}{}.", num.0, num.1, den.0, den.1),
                answer,
                vec![quantity],
            )
        }
        ProblemKind::Proof => (
            format!("Prove that {target_text}."),
            format!("Therefore, {target_text}."),
            zero_value_quantities(target).unwrap_or_default(),
        ),
    };
    pc.quantities = quantities;

    let cot = a
        .text
        .step_texts
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Step{}: {s}.", i + 1))
        .collect::<Vec<_>>()
        .join("\n");
    Draft {
        question: format!("Given {premises}, with {ra}{rb} = {length}. {ask}"),
        question_filtered: format!("Given {premises}. {ask}"),
        cot,
        answer,
        plot_code: pc,
    }
}

fn corrupt(pc: &mut PlotCode, c: Corruption) {
    match c {
        Corruption::Verdict => {}
        Corruption::WrongLength => {
            let entry = &mut pc.annotations.length_of_line[0];
            let v: f64 = entry.1.parse().expect("scripted lengths are numeric");
            entry.1 = format!("{}", v + 1.0);
        }
        Corruption::DegenerateCircle => {
            let [(a, pa), (b, pb)] = {
                let mut it = pc.points.iter().map(|(l, p)| (*l, *p));
                [it.next().expect("two points"), it.next().expect("two points")]
            };
            let z = free_label(pc);
            pc.points.insert(z, pa.midpoint(pb));
            pc.circles.push(CircleSpec {
                id: format!("C{}", pc.circles.len() + 1),
                form: CircleForm::ThreePoints(a, b, z),
            });
        }
        Corruption::Overlap => {
            let (_, p) = pc.points.iter().next().map(|(l, p)| (*l, *p)).expect("a point");
            let diameter = pc
                .points
                .values()
                .flat_map(|a| pc.points.values().map(move |b| a.dist(*b)))
                .fold(0.0, f64::max);
            let z = free_label(pc);
            pc.points.insert(z, Point::new(p.x + 1e-3 * diameter, p.y));
        }
    }
}

/// Prompt-keyed responses; the first response written for a prompt wins,
/// as a deterministic model would answer it again.
#[derive(Default)]
struct Memo {
    entries: BTreeMap<(Role, String), TranscriptEntry>,
}

impl Memo {
    /// Response stored for the prompt, or `fresh` stored and returned.
    fn answer(&mut self, role: Role, v: &BTreeMap<String, String>, fresh: impl FnOnce() -> String) -> String {
        let prompt = role.template().render(v).expect("pipeline variables fit the template");
        let e = TranscriptEntry::new(role, &prompt, String::new());
        self.entries
            .entry((role, e.prompt_hash.clone()))
            .or_insert_with(|| TranscriptEntry { response: fresh(), ..e })
            .response
            .clone()
    }
}

fn field(raw: &str, key: &str) -> String {
    extract_json(raw)
        .ok()
        .and_then(|v| string_field(&v, key))
        .expect("scripted responses carry their fields")
}

fn script_into(memo: &mut Memo, a: &Attempt, corruption: Option<Corruption>) {
    let d = draft(a);
    let (role, v) = instructor_request(a);
    let raw = memo.answer(role, &v, || {
        json!({"question": d.question, "cot": d.cot, "answer": d.answer}).to_string()
    });
    let (question, cot, answer) = (field(&raw, "question"), field(&raw, "cot"), field(&raw, "answer"));
    // Prompts that match also match in premises and ask, so only the length
    // literal can differ and the filtered question is the same.
    let filtered = d.question_filtered.clone();

    memo.answer(
        Role::Judge,
        &vars([("question", &question), ("cot", &cot), ("answer", &answer)]),
        || match corruption {
            Some(Corruption::Verdict) => {
                json!({"passed": false, "reason": "The stated answer does not follow from the conditions."})
            }
            _ => json!({"passed": true, "reason": "The conditions are consistent and determine the answer."}),
        }
        .to_string(),
    );

    let raw_coder = memo.answer(Role::CoderPlotcode, &coder_vars(&question), || {
        let mut pc = d.plot_code.clone();
        if let Some(c) = corruption {
            corrupt(&mut pc, c);
        }
        let v = serde_json::to_value(&pc).expect("plot code serializes");
        format!("```json\n{}\n```", serde_json::to_string_pretty(&v).expect("JSON value"))
    });
    // What the pipeline will see after parsing the coder's JSON.
    let Some(pc) = extract_json(&raw_coder)
        .ok()
        .and_then(|v| plotcode_from_value(&v, ParseMode::Lenient).ok())
    else {
        return;
    };

    memo.answer(Role::DebiasStep1, &vars([("question", &question)]), || {
        json!({ "question_sanitized": question }).to_string()
    });
    if !pc.annotations.is_empty() {
        memo.answer(Role::DebiasStep2, &step2_vars(&question, &pc.annotations), || {
            json!({ "question_sanitized": filtered }).to_string()
        });
    }
    memo.answer(
        Role::CotRewrite,
        &vars([("cot", cot.clone()), ("plotting_code", plotting_code_text(&pc))]),
        || json!({ "cot": format!("From the image, the figure matches the stated conditions.\n{cot}") }).to_string(),
    );
}

/// Transcript entries for one attempt, optionally corrupted.
pub fn script_attempt(a: &Attempt, corruption: Option<Corruption>) -> Vec<TranscriptEntry> {
    let mut memo = Memo::default();
    script_into(&mut memo, a, corruption);
    memo.entries.into_values().collect()
}

/// Entries for every attempt, sorted; `corruptions` is keyed by attempt id.
///
/// Attempts are scripted in order and a prompt already answered keeps its
/// first response, so a corruption only takes effect on an attempt whose
/// corrupted prompt is not shared with an earlier attempt.
pub fn script_transcript(attempts: &[Attempt], corruptions: &BTreeMap<String, Corruption>) -> Vec<TranscriptEntry> {
    let mut memo = Memo::default();
    for a in attempts {
        script_into(&mut memo, a, corruptions.get(&a.id).copied());
    }
    let mut out: Vec<TranscriptEntry> = memo.entries.into_values().collect();
    out.sort();
    out
}
