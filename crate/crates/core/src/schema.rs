//! Plot-code records: points, segments, circles, annotations and quantities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::dsl::{parse_value_literal, LiteralContext};
use crate::geom::{circumcenter, is_circle_id, Point, PointLabel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("schema error at {0}")]
    Field(String),
    #[error("dangling label {0}")]
    DanglingLabel(String),
    #[error("duplicate circle id {0}")]
    DuplicateCircleId(String),
    #[error("bad coordinate for point {0}")]
    CoordError(String),
    #[error("invalid circle {0}")]
    InvalidCircle(String),
    #[error("degenerate circle {0}")]
    DegenerateCircle(String),
}

/// How forgiving [`parse_plotcode`] is.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    /// Unknown keys rejected, every annotation key required, value literals must parse.
    Strict,
    /// Unknown keys ignored, missing annotation keys read as empty, literals kept verbatim.
    #[default]
    Lenient,
}

/// Unordered pair of distinct labels, stored sorted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment(PointLabel, PointLabel);

impl Segment {
    pub fn new(a: PointLabel, b: PointLabel) -> Option<Segment> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Segment(a, b)),
            std::cmp::Ordering::Greater => Some(Segment(b, a)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn ends(&self) -> (PointLabel, PointLabel) {
        (self.0, self.1)
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0, self.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CircleForm {
    CenterRadius { center: PointLabel, radius: f64 },
    CenterPoint { center: PointLabel, through: PointLabel },
    Diameter(PointLabel, PointLabel),
    ThreePoints(PointLabel, PointLabel, PointLabel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircleSpec {
    pub id: String,
    pub form: CircleForm,
}

impl CircleSpec {
    pub fn labels(&self) -> Vec<PointLabel> {
        match &self.form {
            CircleForm::CenterRadius { center, .. } => vec![*center],
            CircleForm::CenterPoint { center, through } => vec![*center, *through],
            CircleForm::Diameter(a, b) => vec![*a, *b],
            CircleForm::ThreePoints(a, b, c) => vec![*a, *b, *c],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedCircle {
    pub center: Point,
    pub radius: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Annotations {
    pub right_angles: Vec<[PointLabel; 3]>,
    pub length_of_line: Vec<([PointLabel; 2], String)>,
    pub measure_of_angle: Vec<([PointLabel; 3], String)>,
}

impl Annotations {
    pub fn is_empty(&self) -> bool {
        self.right_angles.is_empty() && self.length_of_line.is_empty() && self.measure_of_angle.is_empty()
    }

    fn labels(&self) -> impl Iterator<Item = PointLabel> + '_ {
        self.right_angles
            .iter()
            .flatten()
            .chain(self.length_of_line.iter().flat_map(|(s, _)| s))
            .chain(self.measure_of_angle.iter().flat_map(|(a, _)| a))
            .copied()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotCode {
    pub points: BTreeMap<PointLabel, Point>,
    pub segments: BTreeSet<Segment>,
    pub circles: Vec<CircleSpec>,
    pub annotations: Annotations,
    pub quantities: Vec<String>,
}

/// Replaces tuple parentheses with array brackets outside string literals.
fn normalize_tuples(src: &str) -> String {
    let mut out = String::with_capacity(src.len());
    let mut in_str = false;
    let mut escaped = false;
    for ch in src.chars() {
        if in_str {
            out.push(ch);
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_str = false;
            }
            continue;
        }
        match ch {
            '"' => {
                in_str = true;
                out.push(ch);
            }
            '(' => out.push('['),
            ')' => out.push(']'),
            _ => out.push(ch),
        }
    }
    out
}

/// Parses and validates plot code; tuple-style `("A", "B")` encodings are accepted.
pub fn parse_plotcode(bytes: &[u8], mode: ParseMode) -> Result<PlotCode, SchemaError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SchemaError::Json(e.to_string()))?;
    let value: Value = serde_json::from_str(&normalize_tuples(text)).map_err(|e| SchemaError::Json(e.to_string()))?;
    plotcode_from_value(&value, mode)
}

const TOP_KEYS: [&str; 5] = ["points", "segments", "circles", "quantities", "annotations"];
const ANNOTATION_KEYS: [&str; 3] = ["right_angles", "length_of_line", "measure_of_angle"];

pub fn plotcode_from_value(value: &Value, mode: ParseMode) -> Result<PlotCode, SchemaError> {
    let field = |s: &str| SchemaError::Field(s.to_string());
    let obj = value.as_object().ok_or_else(|| field("<root>"))?;
    if mode == ParseMode::Strict {
        if let Some(k) = obj.keys().find(|k| !TOP_KEYS.contains(&k.as_str())) {
            return Err(field(k));
        }
    }
    let get = |k: &str| obj.get(k).ok_or_else(|| field(k));

    let mut points = BTreeMap::new();
    for (name, coord) in get("points")?.as_object().ok_or_else(|| field("points"))? {
        let label = PointLabel::new(name).map_err(|_| field(&format!("points.{name}")))?;
        let p = parse_coord(coord).ok_or_else(|| SchemaError::CoordError(name.clone()))?;
        points.insert(label, p);
    }

    let mut segments = BTreeSet::new();
    for (i, s) in array(get("segments")?, "segments")?.iter().enumerate() {
        let path = format!("segments[{i}]");
        let [a, b] = labels_n::<2>(s, &path)?;
        segments.insert(Segment::new(a, b).ok_or_else(|| field(&path))?);
    }

    let mut circles = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, c) in array(get("circles")?, "circles")?.iter().enumerate() {
        let spec = parse_circle(c, &format!("circles[{i}]"))?;
        if !ids.insert(spec.id.clone()) {
            return Err(SchemaError::DuplicateCircleId(spec.id));
        }
        circles.push(spec);
    }

    let quantities = array(get("quantities")?, "quantities")?
        .iter()
        .enumerate()
        .map(|(i, q)| q.as_str().map(str::to_string).ok_or_else(|| field(&format!("quantities[{i}]"))))
        .collect::<Result<Vec<_>, _>>()?;

    let annotations = parse_annotations(get("annotations")?, mode)?;

    let pc = PlotCode {
        points,
        segments,
        circles,
        annotations,
        quantities,
    };
    pc.check_references()?;
    Ok(pc)
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, SchemaError> {
    v.as_array().ok_or_else(|| SchemaError::Field(path.to_string()))
}

fn parse_coord(v: &Value) -> Option<Point> {
    let a = v.as_array()?;
    if a.len() != 2 {
        return None;
    }
    let num = |x: &Value| match x {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    let p = Point::new(num(&a[0])?, num(&a[1])?);
    p.is_finite().then_some(p)
}

fn label(v: &Value, path: &str) -> Result<PointLabel, SchemaError> {
    v.as_str()
        .and_then(|s| PointLabel::new(s).ok())
        .ok_or_else(|| SchemaError::Field(path.to_string()))
}

fn labels_n<const N: usize>(v: &Value, path: &str) -> Result<[PointLabel; N], SchemaError> {
    let a = array(v, path)?;
    if a.len() != N {
        return Err(SchemaError::Field(path.to_string()));
    }
    let mut out = [PointLabel::new("A").expect("valid"); N];
    for (i, x) in a.iter().enumerate() {
        out[i] = label(x, &format!("{path}[{i}]"))?;
    }
    Ok(out)
}

fn parse_circle(v: &Value, path: &str) -> Result<CircleSpec, SchemaError> {
    let a = array(v, path)?;
    let id = a
        .first()
        .and_then(Value::as_str)
        .filter(|s| is_circle_id(s))
        .ok_or_else(|| SchemaError::Field(format!("{path}[0]")))?
        .to_string();
    let invalid = || SchemaError::InvalidCircle(id.clone());
    let form = match a.len() {
        3 => {
            let center = label(&a[1], &format!("{path}[1]"))?;
            match &a[2] {
                Value::Number(n) => {
                    let radius = n.as_f64().ok_or_else(invalid)?;
                    if !(radius.is_finite() && radius > 0.0) {
                        return Err(invalid());
                    }
                    CircleForm::CenterRadius { center, radius }
                }
                Value::String(s) => match PointLabel::new(s) {
                    Ok(through) => CircleForm::CenterPoint { center, through },
                    Err(_) => {
                        let radius = parse_value_literal(s, LiteralContext::Length).map_err(|_| invalid())?;
                        if radius <= 0.0 {
                            return Err(invalid());
                        }
                        CircleForm::CenterRadius { center, radius }
                    }
                },
                _ => return Err(invalid()),
            }
        }
        4 => {
            let p = label(&a[1], &format!("{path}[1]"))?;
            let q = label(&a[2], &format!("{path}[2]"))?;
            if a[3].as_str() == Some("diameter") {
                CircleForm::Diameter(p, q)
            } else {
                CircleForm::ThreePoints(p, q, label(&a[3], &format!("{path}[3]"))?)
            }
        }
        _ => return Err(invalid()),
    };
    Ok(CircleSpec { id, form })
}

fn parse_annotations(v: &Value, mode: ParseMode) -> Result<Annotations, SchemaError> {
    let field = |s: &str| SchemaError::Field(s.to_string());
    let obj = v.as_object().ok_or_else(|| field("annotations"))?;
    if mode == ParseMode::Strict {
        if let Some(k) = obj.keys().find(|k| !ANNOTATION_KEYS.contains(&k.as_str())) {
            return Err(field(&format!("annotations.{k}")));
        }
    }
    let empty = Vec::new();
    let list = |k: &str| -> Result<&Vec<Value>, SchemaError> {
        let path = format!("annotations.{k}");
        match obj.get(k) {
            Some(Value::Null) | None if mode == ParseMode::Lenient => Ok(&empty),
            Some(x) => array(x, &path),
            None => Err(field(&path)),
        }
    };
    let literal = |x: &Value, path: &str, ctx: LiteralContext| -> Result<String, SchemaError> {
        let s = match x {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => return Err(field(path)),
        };
        if mode == ParseMode::Strict && parse_value_literal(&s, ctx).is_err() {
            return Err(field(path));
        }
        Ok(s)
    };

    let mut ann = Annotations::default();
    for (i, x) in list("right_angles")?.iter().enumerate() {
        ann.right_angles
            .push(labels_n::<3>(x, &format!("annotations.right_angles[{i}]"))?);
    }
    for (i, x) in list("length_of_line")?.iter().enumerate() {
        let path = format!("annotations.length_of_line[{i}]");
        let pair = array(x, &path)?;
        if pair.len() != 2 {
            return Err(field(&path));
        }
        let seg = labels_n::<2>(&pair[0], &path)?;
        if seg[0] == seg[1] {
            return Err(field(&path));
        }
        ann.length_of_line
            .push((seg, literal(&pair[1], &path, LiteralContext::Length)?));
    }
    for (i, x) in list("measure_of_angle")?.iter().enumerate() {
        let path = format!("annotations.measure_of_angle[{i}]");
        let pair = array(x, &path)?;
        if pair.len() != 2 {
            return Err(field(&path));
        }
        let tri = labels_n::<3>(&pair[0], &path)?;
        ann.measure_of_angle
            .push((tri, literal(&pair[1], &path, LiteralContext::Angle)?));
    }
    Ok(ann)
}

impl PlotCode {
    fn check_references(&self) -> Result<(), SchemaError> {
        let used = self
            .segments
            .iter()
            .flat_map(|s| [s.0, s.1])
            .chain(self.circles.iter().flat_map(CircleSpec::labels))
            .chain(self.annotations.labels());
        for l in used {
            if !self.points.contains_key(&l) {
                return Err(SchemaError::DanglingLabel(l.to_string()));
            }
        }
        Ok(())
    }

    /// Re-checks the structural invariants of a value built in code.
    pub fn validate(&self) -> Result<(), SchemaError> {
        if let Some((l, _)) = self.points.iter().find(|(_, p)| !p.is_finite()) {
            return Err(SchemaError::CoordError(l.to_string()));
        }
        let mut ids = BTreeSet::new();
        for c in &self.circles {
            if !is_circle_id(&c.id) {
                return Err(SchemaError::Field(format!("circle id {}", c.id)));
            }
            if !ids.insert(&c.id) {
                return Err(SchemaError::DuplicateCircleId(c.id.clone()));
            }
        }
        self.check_references()
    }

    pub fn circle(&self, id: &str) -> Option<&CircleSpec> {
        self.circles.iter().find(|c| c.id == id)
    }

    /// Resolves every circle, keyed by ID.
    pub fn resolve_circles(&self) -> Result<BTreeMap<String, ResolvedCircle>, SchemaError> {
        self.circles
            .iter()
            .map(|c| Ok((c.id.clone(), resolve_circle(c, &self.points)?)))
            .collect()
    }

    /// Deterministic compact JSON bytes.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("plot code serializes")
    }
}

/// Center and radius of a circle spec.
pub fn resolve_circle(spec: &CircleSpec, points: &BTreeMap<PointLabel, Point>) -> Result<ResolvedCircle, SchemaError> {
    let get = |l: &PointLabel| points.get(l).copied().ok_or_else(|| SchemaError::DanglingLabel(l.to_string()));
    let degenerate = || SchemaError::DegenerateCircle(spec.id.clone());
    let (center, radius) = match &spec.form {
        CircleForm::CenterRadius { center, radius } => (get(center)?, *radius),
        CircleForm::CenterPoint { center, through } => {
            let o = get(center)?;
            (o, o.dist(get(through)?))
        }
        CircleForm::Diameter(a, b) => {
            let (pa, pb) = (get(a)?, get(b)?);
            (pa.midpoint(pb), pa.dist(pb) / 2.0)
        }
        CircleForm::ThreePoints(a, b, c) => {
            let (pa, pb, pc) = (get(a)?, get(b)?, get(c)?);
            let o = circumcenter(pa, pb, pc).ok_or_else(degenerate)?;
            (o, o.dist(pa))
        }
    };
    if !(radius.is_finite() && radius > 0.0) {
        return Err(degenerate());
    }
    Ok(ResolvedCircle { center, radius })
}

/// Canonical serialization (same bytes as [`PlotCode::canonical_bytes`]).
pub fn canonical_serialize(pc: &PlotCode) -> Vec<u8> {
    pc.canonical_bytes()
}

/// Rewrites every circle as center + integer radius (at least 1).
///
/// Centers reuse the defining label, or an existing point sitting at the
/// resolved center, or a new `O1`, `O2`, ... point.
pub fn simplify_for_training(pc: &PlotCode) -> Result<PlotCode, SchemaError> {
    let mut out = pc.clone();
    let mut next = 1;
    let scale = pc
        .points
        .values()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(1.0, f64::max);
    for c in &mut out.circles {
        let resolved = resolve_circle(c, &pc.points)?;
        let center = match &c.form {
            CircleForm::CenterRadius { center, .. } | CircleForm::CenterPoint { center, .. } => *center,
            _ => {
                let existing = out
                    .points
                    .iter()
                    .find(|(_, p)| p.dist(resolved.center) <= 1e-9 * scale)
                    .map(|(l, _)| *l);
                match existing {
                    Some(l) => l,
                    None => loop {
                        let l = PointLabel::new(&format!("O{next}")).expect("valid label");
                        next += 1;
                        if !out.points.contains_key(&l) {
                            out.points.insert(l, resolved.center);
                            break l;
                        }
                    },
                }
            }
        };
        c.form = CircleForm::CenterRadius {
            center,
            radius: resolved.radius.floor().max(1.0),
        };
    }
    Ok(out)
}

struct Pair<'a, T: Serialize>(&'a T, &'a T);

impl<T: Serialize> Serialize for Pair<'_, T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(self.0)?;
        seq.serialize_element(self.1)?;
        seq.end()
    }
}

impl Serialize for CircleSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(None)?;
        seq.serialize_element(&self.id)?;
        match &self.form {
            CircleForm::CenterRadius { center, radius } => {
                seq.serialize_element(center)?;
                seq.serialize_element(radius)?;
            }
            CircleForm::CenterPoint { center, through } => {
                seq.serialize_element(center)?;
                seq.serialize_element(through)?;
            }
            CircleForm::Diameter(a, b) => {
                seq.serialize_element(a)?;
                seq.serialize_element(b)?;
                seq.serialize_element("diameter")?;
            }
            CircleForm::ThreePoints(a, b, c) => {
                seq.serialize_element(a)?;
                seq.serialize_element(b)?;
                seq.serialize_element(c)?;
            }
        }
        seq.end()
    }
}

impl Serialize for Annotations {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("right_angles", &self.right_angles)?;
        let lengths: Vec<(&[PointLabel; 2], &String)> = self.length_of_line.iter().map(|(a, b)| (a, b)).collect();
        m.serialize_entry("length_of_line", &lengths)?;
        let angles: Vec<(&[PointLabel; 3], &String)> = self.measure_of_angle.iter().map(|(a, b)| (a, b)).collect();
        m.serialize_entry("measure_of_angle", &angles)?;
        m.end()
    }
}

impl Serialize for PlotCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        struct Points<'a>(&'a BTreeMap<PointLabel, Point>);
        impl Serialize for Points<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(self.0.len()))?;
                for (l, p) in self.0 {
                    m.serialize_entry(l, &Pair(&p.x, &p.y))?;
                }
                m.end()
            }
        }
        let segments: Vec<Pair<PointLabel>> = self.segments.iter().map(|s| Pair(&s.0, &s.1)).collect();
        let mut m = s.serialize_map(Some(5))?;
        m.serialize_entry("points", &Points(&self.points))?;
        m.serialize_entry("segments", &segments)?;
        m.serialize_entry("circles", &self.circles)?;
        m.serialize_entry("quantities", &self.quantities)?;
        m.serialize_entry("annotations", &self.annotations)?;
        m.end()
    }
}

impl<'de> Deserialize<'de> for PlotCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        plotcode_from_value(&v, ParseMode::Lenient).map_err(serde::de::Error::custom)
    }
}
