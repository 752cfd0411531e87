use std::fmt;
use std::str::FromStr;

use arrayvec::ArrayString;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::GeomError;

/// Maximum byte length of a point label.
pub const MAX_LABEL_LEN: usize = 4;

/// Name of a point in a scene, e.g. `A`, `M1`.
///
/// A label starts with an uppercase ASCII letter, continues with ASCII
/// uppercase letters, digits or `'`, and never looks like a circle ID
/// (`C` followed only by digits).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointLabel(ArrayString<MAX_LABEL_LEN>);

impl PointLabel {
    pub fn new(name: &str) -> Result<Self, GeomError> {
        if !is_valid_label(name) {
            return Err(GeomError::InvalidLabel(name.to_string()));
        }
        let mut buf = ArrayString::new();
        buf.push_str(name);
        Ok(PointLabel(buf))
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }
}

fn is_valid_label(name: &str) -> bool {
    let bytes = name.as_bytes();
    if bytes.is_empty() || bytes.len() > MAX_LABEL_LEN {
        return false;
    }
    if !bytes[0].is_ascii_uppercase() {
        return false;
    }
    if !bytes[1..]
        .iter()
        .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || *b == b'\'')
    {
        return false;
    }
    !is_circle_id(name)
}

/// True for strings of the form `C<digits>` (at least one digit).
pub fn is_circle_id(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() >= 2 && b[0] == b'C' && b[1..].iter().all(u8::is_ascii_digit)
}

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PointLabel {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PointLabel::new(s)
    }
}

impl Serialize for PointLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PointLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        PointLabel::new(&s).map_err(serde::de::Error::custom)
    }
}

/// A point in the plane, mathematical orientation (y up).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn midpoint(self, o: Point) -> Point {
        Point::new((self.x + o.x) / 2.0, (self.y + o.y) / 2.0)
    }

    /// Rotation by +90 degrees.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Twice the signed area of triangle `abc` (positive when counter-clockwise).
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    b.sub(a).cross(c.sub(a))
}

/// Circumcenter of a triangle; `None` when the points are (numerically) collinear.
pub fn circumcenter(a: Point, b: Point, c: Point) -> Option<Point> {
    let ab = b.sub(a);
    let ac = c.sub(a);
    let d = 2.0 * ab.cross(ac);
    let scale = ab.dot(ab).max(ac.dot(ac)).max(c.sub(b).dot(c.sub(b)));
    if scale == 0.0 || d.abs() <= 1e-12 * scale || !d.is_finite() {
        return None;
    }
    let ab2 = ab.dot(ab);
    let ac2 = ac.dot(ac);
    let ux = (ac.y * ab2 - ab.y * ac2) / d;
    let uy = (ab.x * ac2 - ac.x * ab2) / d;
    Some(Point::new(a.x + ux, a.y + uy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert!(PointLabel::new("A").is_ok());
        assert!(PointLabel::new("M1").is_ok());
        assert!(PointLabel::new("C").is_ok());
        assert!(PointLabel::new("C1").is_err());
        assert!(PointLabel::new("a").is_err());
        assert!(PointLabel::new("").is_err());
        assert!(PointLabel::new("ABCDE").is_err());
    }

    #[test]
    fn circle_ids() {
        assert!(is_circle_id("C1"));
        assert!(is_circle_id("C12"));
        assert!(!is_circle_id("C"));
        assert!(!is_circle_id("CA"));
    }

    #[test]
    fn circumcenter_right_triangle() {
        let o = circumcenter(Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 3.0)).unwrap();
        assert!((o.x - 2.0).abs() < 1e-12 && (o.y - 1.5).abs() < 1e-12);
        assert!(circumcenter(Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)).is_none());
    }
}
