//! Numeric verification of declared relations, annotations and answers.

use serde::{Deserialize, Serialize};

use crate::dsl::{eval_quantity, parse_quantity, parse_value_literal, Expr, Func, LiteralContext, Op, Scene};
use crate::geom::{check_nondegenerate, circumcenter, orient, GeomError, Point, PointLabel, Predicate, PredicateKind, Witness};
use crate::schema::PlotCode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToleranceConfig {
    pub eps_abs: f64,
    pub eps_angle_deg: f64,
    pub eps_rel: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            eps_abs: 1e-6,
            eps_angle_deg: 1e-6,
            eps_rel: 1e-9,
        }
    }
}

impl ToleranceConfig {
    /// Uniform tolerance, as used by the CLI `--tol` flag.
    pub fn uniform(eps: f64) -> Self {
        ToleranceConfig {
            eps_abs: eps,
            eps_angle_deg: eps,
            ..ToleranceConfig::default()
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.eps_abs, self.eps_angle_deg, self.eps_rel]
            .iter()
            .all(|e| e.is_finite() && *e > 0.0)
    }

    /// Length-like residual against a reference magnitude.
    pub fn accepts(&self, residual: f64, reference: f64) -> bool {
        residual.abs() <= self.eps_abs.max(self.eps_rel * reference.abs())
    }

    /// Angle residual in degrees.
    pub fn accepts_angle(&self, residual_deg: f64) -> bool {
        residual_deg.abs() <= self.eps_angle_deg
    }
}

/// Pipeline stage a record was rejected at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Semantic,
    Geometric,
    Plotting,
    Image,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckFamily {
    Constraint,
    Annotation,
    Answer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub family: CheckFamily,
    pub subject: String,
    /// Measured value (answer checks) or residual (constraint/annotation checks).
    pub value: Option<f64>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
    pub rejected_stage: Option<Stage>,
}

impl VerificationReport {
    fn from_checks(checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        VerificationReport {
            checks,
            passed,
            rejected_stage: None,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Computation,
    Proof,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("configuration error: {0}")]
    Config(String),
}

/// Outcome of checking one relation on coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationCheck {
    pub passed: bool,
    /// Length residual, angle residual in degrees, or ratio residual by kind.
    /// Side conditions (ncoll, sameclock, ...) report 0 on success and 1 on failure.
    pub residual: f64,
}

/// Angle between lines `ab` and `cd` in degrees, in [0, 90].
fn line_angle(a: Point, b: Point, c: Point, d: Point) -> Option<f64> {
    let u = b.sub(a);
    let v = d.sub(c);
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return None;
    }
    Some(u.cross(v).abs().atan2(u.dot(v).abs()).to_degrees())
}

fn ratio(a: Point, b: Point, c: Point, d: Point) -> Option<f64> {
    let den = c.dist(d);
    (den > 0.0).then(|| a.dist(b) / den)
}

fn collinearity_residual(a: Point, b: Point, c: Point) -> (f64, f64) {
    let scale = a.dist(b).max(b.dist(c)).max(c.dist(a));
    (orient(a, b, c).abs() / 2.0, scale * scale)
}

const FAILED: RelationCheck = RelationCheck {
    passed: false,
    residual: f64::MAX,
};

/// Checks one relation numerically.
pub fn check_relation(p: &Predicate, w: &Witness, tol: &ToleranceConfig) -> Result<RelationCheck, GeomError> {
    use PredicateKind::*;
    if p.kind().is_check() {
        let ok = check_nondegenerate(w, p)?;
        return Ok(RelationCheck {
            passed: ok,
            residual: if ok { 0.0 } else { 1.0 },
        });
    }
    let x: Vec<Point> = p.args().iter().map(|l| w.get(*l)).collect::<Result<_, _>>()?;
    let length = |residual: f64, reference: f64| RelationCheck {
        passed: tol.accepts(residual, reference),
        residual: residual.abs(),
    };
    let angle = |residual: f64| RelationCheck {
        passed: tol.accepts_angle(residual),
        residual: residual.abs(),
    };
    Ok(match p.kind() {
        Cong => length(x[0].dist(x[1]) - x[2].dist(x[3]), x[0].dist(x[1])),
        Perp => match line_angle(x[0], x[1], x[2], x[3]) {
            Some(t) => angle(90.0 - t),
            None => FAILED,
        },
        Para => match line_angle(x[0], x[1], x[2], x[3]) {
            Some(t) => angle(t),
            None => FAILED,
        },
        Coll => {
            let (r, s) = collinearity_residual(x[0], x[1], x[2]);
            length(r, s)
        }
        Midp => {
            let (m, a, b) = (x[0], x[1], x[2]);
            let (coll, s) = collinearity_residual(m, a, b);
            let eq = (m.dist(a) - m.dist(b)).abs();
            let between = m.sub(a).dot(m.sub(b)) <= 0.0;
            let c = length(eq.max(coll), a.dist(b).max(s));
            RelationCheck {
                passed: c.passed && tol.accepts(coll, s) && between,
                residual: c.residual,
            }
        }
        Circle => {
            let r = x[0].dist(x[1]);
            let worst = x[2..]
                .iter()
                .map(|q| (x[0].dist(*q) - r).abs())
                .fold(0.0, f64::max);
            length(worst, r)
        }
        Cyclic => {
            // circle through the best-conditioned triple, then distances of the rest
            let mut best: Option<(f64, usize, usize, usize)> = None;
            let n = x.len();
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        let a = orient(x[i], x[j], x[k]).abs();
                        if best.is_none_or(|b| a > b.0) {
                            best = Some((a, i, j, k));
                        }
                    }
                }
            }
            let (_, i, j, k) = best.expect("cyclic has at least four points");
            match circumcenter(x[i], x[j], x[k]) {
                Some(o) => {
                    let r = o.dist(x[i]);
                    let worst = x.iter().map(|q| (o.dist(*q) - r).abs()).fold(0.0, f64::max);
                    length(worst, r)
                }
                None => FAILED,
            }
        }
        Eqangle => match (
            line_angle(x[0], x[1], x[2], x[3]),
            line_angle(x[4], x[5], x[6], x[7]),
        ) {
            (Some(a), Some(b)) => angle(a - b),
            _ => FAILED,
        },
        Eqratio => match (ratio(x[0], x[1], x[2], x[3]), ratio(x[4], x[5], x[6], x[7])) {
            (Some(a), Some(b)) => length(a - b, a),
            _ => FAILED,
        },
        Eqratio3 => {
            let (a, b, c, d, m, n) = (x[0], x[1], x[2], x[3], x[4], x[5]);
            match (ratio(m, a, m, c), ratio(n, b, n, d)) {
                (Some(r1), Some(r2)) => length(r1 - r2, r1),
                _ => FAILED,
            }
        }
        Rconst => {
            let r = p.ratio().expect("rconst carries a ratio");
            let want = *r.numer() as f64 / *r.denom() as f64;
            match ratio(x[0], x[1], x[2], x[3]) {
                Some(v) => length(v - want, want),
                None => FAILED,
            }
        }
        Simtri | Simtrir | Contri | Contrir => {
            let (a, b, c, pp, q, r) = (x[0], x[1], x[2], x[3], x[4], x[5]);
            let sides1 = [a.dist(b), b.dist(c), c.dist(a)];
            let sides2 = [pp.dist(q), q.dist(r), r.dist(pp)];
            let same_orientation = orient(a, b, c) * orient(pp, q, r) > 0.0;
            let want_same = matches!(p.kind(), Simtri | Contri);
            let shape_ok = same_orientation == want_same;
            let check = if matches!(p.kind(), Contri | Contrir) {
                let worst = (0..3).map(|i| (sides1[i] - sides2[i]).abs()).fold(0.0, f64::max);
                length(worst, sides1.iter().copied().fold(0.0, f64::max))
            } else if sides2.iter().any(|s| *s == 0.0) {
                FAILED
            } else {
                let k = sides1[0] / sides2[0];
                let worst = (1..3).map(|i| (sides1[i] / sides2[i] - k).abs()).fold(0.0, f64::max);
                length(worst, k)
            };
            RelationCheck {
                passed: check.passed && shape_ok,
                residual: check.residual,
            }
        }
        Ncoll | Npara | Sameside | Nsameside | Sameclock => unreachable!("side conditions handled above"),
    })
}

fn angle_at(a: Point, b: Point, c: Point) -> Option<f64> {
    let u = a.sub(b);
    let v = c.sub(b);
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return None;
    }
    Some(u.cross(v).abs().atan2(u.dot(v)).to_degrees())
}

fn names(ls: &[PointLabel]) -> String {
    ls.iter().map(PointLabel::as_str).collect()
}

/// Checks every annotation against the coordinates.
pub fn check_annotations(pc: &PlotCode, tol: &ToleranceConfig) -> VerificationReport {
    let mut checks = Vec::new();
    let pt = |l: &PointLabel| pc.points.get(l).copied();
    let fail = |subject: String, reason: String| Check {
        family: CheckFamily::Annotation,
        subject,
        value: None,
        passed: false,
        reason: Some(reason),
    };
    for tri in &pc.annotations.right_angles {
        let subject = format!("right angle {}", names(tri));
        match (pt(&tri[0]), pt(&tri[1]), pt(&tri[2])) {
            (Some(a), Some(b), Some(c)) => match angle_at(a, b, c) {
                Some(t) => checks.push(Check {
                    family: CheckFamily::Annotation,
                    subject,
                    value: Some((t - 90.0).abs()),
                    passed: tol.accepts_angle(t - 90.0),
                    reason: None,
                }),
                None => checks.push(fail(subject, "degenerate angle".into())),
            },
            _ => checks.push(fail(subject, "unknown point".into())),
        }
    }
    for (seg, lit) in &pc.annotations.length_of_line {
        let subject = format!("length {} = {lit}", names(seg));
        let declared = match parse_value_literal(lit, LiteralContext::Length) {
            Ok(v) => v,
            Err(e) => {
                checks.push(fail(subject, e.to_string()));
                continue;
            }
        };
        match (pt(&seg[0]), pt(&seg[1])) {
            (Some(a), Some(b)) => {
                let r = a.dist(b) - declared;
                checks.push(Check {
                    family: CheckFamily::Annotation,
                    subject,
                    value: Some(r.abs()),
                    passed: tol.accepts(r, declared),
                    reason: None,
                });
            }
            _ => checks.push(fail(subject, "unknown point".into())),
        }
    }
    for (tri, lit) in &pc.annotations.measure_of_angle {
        let subject = format!("angle {} = {lit}", names(tri));
        let declared = match parse_value_literal(lit, LiteralContext::Angle) {
            Ok(v) => v,
            Err(e) => {
                checks.push(fail(subject, e.to_string()));
                continue;
            }
        };
        match (pt(&tri[0]), pt(&tri[1]), pt(&tri[2])) {
            (Some(a), Some(b), Some(c)) => match angle_at(a, b, c) {
                Some(t) => checks.push(Check {
                    family: CheckFamily::Annotation,
                    subject,
                    value: Some((t - declared).abs()),
                    passed: tol.accepts_angle(t - declared),
                    reason: None,
                }),
                None => checks.push(fail(subject, "degenerate angle".into())),
            },
            _ => checks.push(fail(subject, "unknown point".into())),
        }
    }
    VerificationReport::from_checks(checks)
}

/// Unit context of an expression's value: angle-valued atoms produce degrees.
fn literal_context(e: &Expr) -> LiteralContext {
    match e {
        Expr::Atom { func, .. }
            if matches!(
                func,
                Func::Angle | Func::AngleBetweenLines | Func::CentralAngle | Func::ArcInscribedAngle
            ) =>
        {
            LiteralContext::Angle
        }
        _ => LiteralContext::Length,
    }
}

/// Reference magnitude for a proof expression `lhs - rhs`: the size of the
/// right-hand side, so `q - a` is judged exactly like answer `a` for `q`.
fn proof_scale(e: &Expr, scene: &Scene<'_>) -> f64 {
    match e {
        Expr::BinOp { op: Op::Sub, rhs, .. } => eval_quantity(rhs, scene).map_or(0.0, f64::abs),
        _ => 0.0,
    }
}

/// Quantity expressions that vanish exactly when `p` holds, in the
/// `lhs - rhs` form used by proof records. `None` for side conditions.
///
/// Concyclicity becomes equal line angles subtended at two of the points,
/// which is insensitive to the points lying on opposite arcs.
pub fn zero_value_quantities(p: &Predicate) -> Option<Vec<String>> {
    use PredicateKind::*;
    let a: Vec<&str> = p.args().iter().map(|l| l.as_str()).collect();
    let len = |i: usize, j: usize| format!("length({}, {})", a[i], a[j]);
    let lines = |i: usize, j: usize, k: usize, l: usize| {
        format!("angle_between_lines({}, {}, {}, {})", a[i], a[j], a[k], a[l])
    };
    Some(match p.kind() {
        Cong => vec![format!("{} - {}", len(0, 1), len(2, 3))],
        Perp => vec![format!("{} - 90", lines(0, 1, 2, 3))],
        Para => vec![format!("{} - 0", lines(0, 1, 2, 3))],
        Coll => (2..a.len())
            .map(|i| format!("area({}, {}, {}) - 0", a[0], a[1], a[i]))
            .collect(),
        Midp => vec![
            format!("{} - {}", len(0, 1), len(0, 2)),
            format!("area({}, {}, {}) - 0", a[0], a[1], a[2]),
        ],
        Circle => (2..a.len()).map(|i| format!("{} - {}", len(0, 1), len(0, i))).collect(),
        Cyclic => (3..a.len())
            .map(|i| {
                format!(
                    "angle_between_lines({c}, {x}, {c}, {y}) - angle_between_lines({d}, {x}, {d}, {y})",
                    x = a[0],
                    y = a[1],
                    c = a[2],
                    d = a[i]
                )
            })
            .collect(),
        Eqangle => vec![format!("{} - {}", lines(0, 1, 2, 3), lines(4, 5, 6, 7))],
        Eqratio => vec![format!("{} / {} - {} / {}", len(0, 1), len(2, 3), len(4, 5), len(6, 7))],
        Eqratio3 => vec![format!("{} / {} - {} / {}", len(4, 0), len(4, 2), len(5, 1), len(5, 3))],
        Rconst => {
            let r = p.ratio()?;
            vec![format!("{} / {} - {}/{}", len(0, 1), len(2, 3), r.numer(), r.denom())]
        }
        Contri | Contrir => vec![
            format!("{} - {}", len(0, 1), len(3, 4)),
            format!("{} - {}", len(1, 2), len(4, 5)),
            format!("{} - {}", len(2, 0), len(5, 3)),
        ],
        Simtri | Simtrir => vec![
            format!("{} / {} - {} / {}", len(0, 1), len(3, 4), len(1, 2), len(4, 5)),
            format!("{} / {} - {} / {}", len(0, 1), len(3, 4), len(2, 0), len(5, 3)),
        ],
        Ncoll | Npara | Sameside | Nsameside | Sameclock => return None,
    })
}

/// Evaluates the quantities of a record and compares them with the answer.
///
/// Computation problems: every expression must evaluate and the first must
/// match `answer`. Proof problems: every expression must vanish.
pub fn verify_answer(
    quantities: &[String],
    pc: &PlotCode,
    answer: Option<&str>,
    kind: ProblemKind,
    tol: &ToleranceConfig,
) -> Result<VerificationReport, VerifyError> {
    let declared = match kind {
        ProblemKind::Computation => Some(answer.ok_or_else(|| VerifyError::Config("computation record without answer".into()))?),
        ProblemKind::Proof => None,
    };
    let fail = |subject: &str, reason: String| Check {
        family: CheckFamily::Answer,
        subject: subject.to_string(),
        value: None,
        passed: false,
        reason: Some(reason),
    };
    if quantities.is_empty() {
        return Ok(VerificationReport::from_checks(vec![fail("quantities", "no quantity expressions".into())]));
    }
    let circles = match pc.resolve_circles() {
        Ok(c) => c,
        Err(e) => return Ok(VerificationReport::from_checks(vec![fail("circles", e.to_string())])),
    };
    let scene = Scene {
        points: &pc.points,
        circles: &circles,
    };
    let mut checks = Vec::new();
    for (i, q) in quantities.iter().enumerate() {
        let expr = match parse_quantity(q) {
            Ok(e) => e,
            Err(e) => {
                checks.push(fail(q, format!("parse: {e}")));
                continue;
            }
        };
        let v = match eval_quantity(&expr, &scene) {
            Ok(v) => v,
            Err(e) => {
                checks.push(fail(q, format!("eval: {e}")));
                continue;
            }
        };
        let (passed, reason) = match declared {
            None => (tol.accepts(v, proof_scale(&expr, &scene)), None),
            Some(lit) if i == 0 => match parse_value_literal(lit, literal_context(&expr)) {
                Ok(want) => (tol.accepts(v - want, want), None),
                Err(e) => (false, Some(e.to_string())),
            },
            Some(_) => (v.is_finite(), None),
        };
        checks.push(Check {
            family: CheckFamily::Answer,
            subject: q.clone(),
            value: Some(v),
            passed,
            reason,
        });
    }
    Ok(VerificationReport::from_checks(checks))
}

/// A candidate dataset record as seen by the verifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub plot_code: PlotCode,
    /// Relations the problem text declares; checked on the plot-code coordinates.
    #[serde(default)]
    pub declared: Vec<Predicate>,
    #[serde(default)]
    pub answer: Option<String>,
    pub kind: ProblemKind,
}

/// Runs constraint, annotation and answer checks; any failure is geometric.
pub fn verify_record(record: &CandidateRecord, tol: &ToleranceConfig) -> VerificationReport {
    let pc = &record.plot_code;
    let witness = Witness {
        coords: pc.points.clone(),
    };
    let mut checks = Vec::new();
    for p in &record.declared {
        let subject = p.to_string();
        checks.push(match check_relation(p, &witness, tol) {
            Ok(r) => Check {
                family: CheckFamily::Constraint,
                subject,
                value: Some(r.residual),
                passed: r.passed,
                reason: None,
            },
            Err(e) => Check {
                family: CheckFamily::Constraint,
                subject,
                value: None,
                passed: false,
                reason: Some(e.to_string()),
            },
        });
    }
    checks.extend(check_annotations(pc, tol).checks);
    match verify_answer(&pc.quantities, pc, record.answer.as_deref(), record.kind, tol) {
        Ok(r) => checks.extend(r.checks),
        Err(e) => checks.push(Check {
            family: CheckFamily::Answer,
            subject: "answer".into(),
            value: None,
            passed: false,
            reason: Some(e.to_string()),
        }),
    }
    let mut report = VerificationReport::from_checks(checks);
    if !report.passed {
        report.rejected_stage = Some(Stage::Geometric);
    }
    report
}

/// Coordinates of a plot code as a witness.
pub fn witness_of(pc: &PlotCode) -> Witness {
    Witness {
        coords: pc.points.clone(),
    }
}
