//! Plot code to SVG, plus the layout heuristics used as the image gate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geom::{Point, PointLabel};
use crate::schema::{PlotCode, ResolvedCircle, SchemaError, Segment};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("nothing to draw")]
    EmptyScene,
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("invalid style: {0}")]
    Style(String),
}

/// Limits applied by [`quality_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QualityThresholds {
    /// Largest tolerated overlap of two label boxes, as a fraction of the smaller box.
    pub max_label_overlap: f64,
    /// Smallest tolerated point distance, as a fraction of the diagram diagonal.
    pub min_separation: f64,
    /// Smallest tolerated height/base ratio of a drawn triangle.
    pub min_height_ratio: f64,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        QualityThresholds {
            max_label_overlap: 0.25,
            min_separation: 0.02,
            min_height_ratio: 0.02,
        }
    }
}

/// Drawing metrics in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub canvas: f64,
    pub margin: f64,
    pub line_width: f64,
    pub circle_width: f64,
    pub font_size: f64,
    pub point_radius: f64,
    pub right_angle_size: f64,
    pub label_offset: f64,
    pub angle_arc_radius: f64,
    pub quality: QualityThresholds,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            canvas: 512.0,
            margin: 0.1,
            line_width: 2.0,
            circle_width: 1.5,
            font_size: 16.0,
            point_radius: 3.0,
            right_angle_size: 10.0,
            label_offset: 14.0,
            angle_arc_radius: 18.0,
            quality: QualityThresholds::default(),
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<(), RenderError> {
        let sizes = [
            self.canvas,
            self.line_width,
            self.circle_width,
            self.font_size,
            self.point_radius,
            self.right_angle_size,
            self.label_offset,
            self.angle_arc_radius,
        ];
        if sizes.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(RenderError::Style("sizes must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.margin) {
            return Err(RenderError::Style("margin must be in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Math-to-screen mapping: uniform scale, y flipped, content centered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewport {
    min: Point,
    max: Point,
    scale: f64,
    offset: Point,
    pub size: f64,
}

impl Viewport {
    fn fit(points: &BTreeMap<PointLabel, Point>, circles: &BTreeMap<String, ResolvedCircle>, style: &RenderStyle) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut grow = |p: Point, r: f64| {
            min = Point::new(min.x.min(p.x - r), min.y.min(p.y - r));
            max = Point::new(max.x.max(p.x + r), max.y.max(p.y + r));
        };
        points.values().for_each(|p| grow(*p, 0.0));
        circles.values().for_each(|c| grow(c.center, c.radius));
        let extent = (max.x - min.x).max(max.y - min.y);
        let extent = if extent > 0.0 { extent } else { 1.0 };
        let inner = style.canvas * (1.0 - 2.0 * style.margin);
        let scale = inner / extent;
        let offset = Point::new(
            (style.canvas - (max.x - min.x) * scale) / 2.0,
            (style.canvas - (max.y - min.y) * scale) / 2.0,
        );
        Viewport {
            min,
            max,
            scale,
            offset,
            size: style.canvas,
        }
    }

    pub fn map(&self, p: Point) -> Point {
        Point::new(
            self.offset.x + (p.x - self.min.x) * self.scale,
            self.offset.y + (self.max.y - p.y) * self.scale,
        )
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Diagonal of the fitted bounding box in math units.
    pub fn diagonal(&self) -> f64 {
        self.min.dist(self.max)
    }
}

/// Viewport used by [`render_svg`] for this plot code.
pub fn viewport(pc: &PlotCode, style: &RenderStyle) -> Result<Viewport, RenderError> {
    if pc.points.is_empty() {
        return Err(RenderError::EmptyScene);
    }
    Ok(Viewport::fit(&pc.points, &pc.resolve_circles()?, style))
}

/// Fixed three-decimal formatting; never prints `-0.000`.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn unit(v: Point) -> Option<Point> {
    let n = v.norm();
    (n > 1e-12).then(|| v.scale(1.0 / n))
}

fn neighbours(pc: &PlotCode, l: PointLabel) -> Vec<PointLabel> {
    pc.segments
        .iter()
        .filter_map(|s| match s.ends() {
            (a, b) if a == l => Some(b),
            (a, b) if b == l => Some(a),
            _ => None,
        })
        .collect()
}

/// Screen position of each point label: pushed away from the incident
/// segments along their reversed mean direction, or toward +x without any.
fn label_positions(pc: &PlotCode, vp: &Viewport, style: &RenderStyle) -> BTreeMap<PointLabel, Point> {
    pc.points
        .iter()
        .map(|(l, p)| {
            let at = vp.map(*p);
            let sum = neighbours(pc, *l)
                .iter()
                .filter_map(|n| unit(vp.map(pc.points[n]).sub(at)))
                .fold(Point::new(0.0, 0.0), Point::add);
            let dir = unit(sum.scale(-1.0)).unwrap_or(Point::new(1.0, 0.0));
            (*l, at.add(dir.scale(style.label_offset)))
        })
        .collect()
}

fn label_box(center: Point, text: &str, style: &RenderStyle) -> (Point, Point) {
    let w = style.font_size * 0.6 * text.chars().count() as f64;
    let h = style.font_size;
    (
        Point::new(center.x - w / 2.0, center.y - h / 2.0),
        Point::new(center.x + w / 2.0, center.y + h / 2.0),
    )
}

/// Renders the plot code as a standalone SVG document.
pub fn render_svg(pc: &PlotCode, style: &RenderStyle) -> Result<Vec<u8>, RenderError> {
    style.validate()?;
    if pc.points.is_empty() {
        return Err(RenderError::EmptyScene);
    }
    let circles = pc.resolve_circles()?;
    let vp = Viewport::fit(&pc.points, &circles, style);
    let size = num(style.canvas);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, r#"<rect width="{size}" height="{size}" fill="white"/>"#);

    for c in &pc.circles {
        let r = circles[&c.id];
        let m = vp.map(r.center);
        let _ = writeln!(
            out,
            r#"<circle class="circle" id="{}" cx="{}" cy="{}" r="{}" fill="none" stroke="black" stroke-width="{}"/>"#,
            escape(&c.id),
            num(m.x),
            num(m.y),
            num(r.radius * vp.scale),
            num(style.circle_width)
        );
    }
    for s in &pc.segments {
        let (a, b) = s.ends();
        let (pa, pb) = (vp.map(pc.points[&a]), vp.map(pc.points[&b]));
        let _ = writeln!(
            out,
            r#"<line class="segment" x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="{}"/>"#,
            num(pa.x),
            num(pa.y),
            num(pb.x),
            num(pb.y),
            num(style.line_width)
        );
    }
    let screen = |l: &PointLabel| pc.points.get(l).map(|p| vp.map(*p));
    for tri in &pc.annotations.right_angles {
        let (Some(a), Some(b), Some(c)) = (screen(&tri[0]), screen(&tri[1]), screen(&tri[2])) else {
            continue;
        };
        let (Some(u), Some(v)) = (unit(a.sub(b)), unit(c.sub(b))) else {
            continue;
        };
        let k = style.right_angle_size;
        let (p1, p2, p3) = (b.add(u.scale(k)), b.add(u.scale(k)).add(v.scale(k)), b.add(v.scale(k)));
        let _ = writeln!(
            out,
            r#"<path class="right-angle" d="M {} {} L {} {} L {} {}" fill="none" stroke="black" stroke-width="1"/>"#,
            num(p1.x),
            num(p1.y),
            num(p2.x),
            num(p2.y),
            num(p3.x),
            num(p3.y)
        );
    }
    for (seg, lit) in &pc.annotations.length_of_line {
        let (Some(a), Some(b)) = (screen(&seg[0]), screen(&seg[1])) else {
            continue;
        };
        let mid = a.midpoint(b);
        let normal = unit(b.sub(a)).map_or(Point::new(0.0, -1.0), Point::perp);
        // Keep the text on the upper side of the segment.
        let normal = if normal.y > 0.0 { normal.scale(-1.0) } else { normal };
        let at = mid.add(normal.scale(style.font_size * 0.75));
        let _ = writeln!(
            out,
            r#"<text class="length" x="{}" y="{}" font-size="{}" text-anchor="middle" dominant-baseline="central">{}</text>"#,
            num(at.x),
            num(at.y),
            num(style.font_size * 0.8),
            escape(lit)
        );
    }
    for (tri, lit) in &pc.annotations.measure_of_angle {
        let (Some(a), Some(b), Some(c)) = (screen(&tri[0]), screen(&tri[1]), screen(&tri[2])) else {
            continue;
        };
        let (Some(u), Some(v)) = (unit(a.sub(b)), unit(c.sub(b))) else {
            continue;
        };
        let r = style.angle_arc_radius;
        let (s, e) = (b.add(u.scale(r)), b.add(v.scale(r)));
        // Minor arc; sweep follows the screen-space turn from u to v.
        let sweep = if u.cross(v) > 0.0 { 1 } else { 0 };
        let _ = writeln!(
            out,
            r#"<path class="angle-arc" d="M {} {} A {} {} 0 0 {sweep} {} {}" fill="none" stroke="black" stroke-width="1"/>"#,
            num(s.x),
            num(s.y),
            num(r),
            num(r),
            num(e.x),
            num(e.y)
        );
        let bis = unit(u.add(v)).unwrap_or(u.perp());
        let at = b.add(bis.scale(r + style.font_size * 0.9));
        let _ = writeln!(
            out,
            r#"<text class="angle" x="{}" y="{}" font-size="{}" text-anchor="middle" dominant-baseline="central">{}</text>"#,
            num(at.x),
            num(at.y),
            num(style.font_size * 0.8),
            escape(lit)
        );
    }
    let labels = label_positions(pc, &vp, style);
    for (l, p) in &pc.points {
        let m = vp.map(*p);
        let _ = writeln!(
            out,
            r#"<circle class="point" cx="{}" cy="{}" r="{}" fill="black"/>"#,
            num(m.x),
            num(m.y),
            num(style.point_radius)
        );
        let at = labels[l];
        let _ = writeln!(
            out,
            r#"<text class="label" x="{}" y="{}" font-size="{}" font-family="serif" font-style="italic" text-anchor="middle" dominant-baseline="central">{}</text>"#,
            num(at.x),
            num(at.y),
            num(style.font_size),
            escape(l.as_str())
        );
    }
    out.push_str("</svg>\n");
    Ok(out.into_bytes())
}

/// Layout heuristics standing in for a visual inspection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub overlapping_labels: Vec<(String, String)>,
    /// Smallest point distance divided by the diagram diagonal.
    pub min_separation: f64,
    /// Smallest height/base ratio over drawn non-collinear triangles.
    pub min_height_ratio: Option<f64>,
    pub passed: bool,
    pub reasons: Vec<String>,
}

/// Collinear triples below this height ratio are drawn on purpose (a point
/// on a segment) and are not triangles.
const EXACT_COLLINEAR: f64 = 1e-9;

pub fn quality_check(pc: &PlotCode, style: &RenderStyle) -> QualityReport {
    let th = style.quality;
    let mut reasons = Vec::new();
    let vp = match viewport(pc, style) {
        Ok(vp) => vp,
        Err(e) => {
            return QualityReport {
                overlapping_labels: Vec::new(),
                min_separation: 0.0,
                min_height_ratio: None,
                passed: false,
                reasons: vec![e.to_string()],
            }
        }
    };

    let labels = label_positions(pc, &vp, style);
    let boxes: Vec<(PointLabel, (Point, Point))> =
        labels.iter().map(|(l, c)| (*l, label_box(*c, l.as_str(), style))).collect();
    let mut overlapping = Vec::new();
    for (i, (la, a)) in boxes.iter().enumerate() {
        for (lb, b) in &boxes[i + 1..] {
            let w = (a.1.x.min(b.1.x) - a.0.x.max(b.0.x)).max(0.0);
            let h = (a.1.y.min(b.1.y) - a.0.y.max(b.0.y)).max(0.0);
            let area = |r: &(Point, Point)| (r.1.x - r.0.x) * (r.1.y - r.0.y);
            let ratio = w * h / area(a).min(area(b));
            if ratio > th.max_label_overlap {
                overlapping.push((la.to_string(), lb.to_string()));
            }
        }
    }
    if !overlapping.is_empty() {
        reasons.push(format!("{} overlapping label pair(s)", overlapping.len()));
    }

    let pts: Vec<Point> = pc.points.values().copied().collect();
    let diag = vp.diagonal();
    let mut min_sep = f64::INFINITY;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            min_sep = min_sep.min(a.dist(*b));
        }
    }
    let min_separation = if pts.len() < 2 || diag == 0.0 {
        1.0
    } else {
        min_sep / diag
    };
    if min_separation < th.min_separation {
        reasons.push(format!("points too close ({})", num(min_separation)));
    }

    let mut min_ratio: Option<f64> = None;
    let drawn: BTreeSet<Segment> = pc.segments.clone();
    let labels_sorted: Vec<PointLabel> = pc.points.keys().copied().collect();
    for (i, &a) in labels_sorted.iter().enumerate() {
        for (j, &b) in labels_sorted.iter().enumerate().skip(i + 1) {
            if !Segment::new(a, b).is_some_and(|s| drawn.contains(&s)) {
                continue;
            }
            for &c in &labels_sorted[j + 1..] {
                let has = |x, y| Segment::new(x, y).is_some_and(|s| drawn.contains(&s));
                if !(has(b, c) && has(a, c)) {
                    continue;
                }
                let (pa, pb, pc_) = (pc.points[&a], pc.points[&b], pc.points[&c]);
                let base = pa.dist(pb).max(pb.dist(pc_)).max(pa.dist(pc_));
                if base == 0.0 {
                    continue;
                }
                let height = pb.sub(pa).cross(pc_.sub(pa)).abs() / base;
                let ratio = height / base;
                if ratio < EXACT_COLLINEAR {
                    continue;
                }
                min_ratio = Some(min_ratio.map_or(ratio, |m: f64| m.min(ratio)));
            }
        }
    }
    if let Some(r) = min_ratio.filter(|r| *r < th.min_height_ratio) {
        reasons.push(format!("near-degenerate triangle (height/base {})", num(r)));
    }

    QualityReport {
        overlapping_labels: overlapping,
        min_separation,
        min_height_ratio: min_ratio,
        passed: reasons.is_empty(),
        reasons,
    }
}
