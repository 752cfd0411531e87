use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{orient, GeomError, Point, PointLabel, Predicate, PredicateKind};

/// Relative area threshold for `ncoll` (twice the triangle area over the
/// squared largest pairwise distance).
pub const NCOLL_AREA_TOL: f64 = 1e-6;
/// Minimum angle between two lines, in radians, for `npara`.
pub const NPARA_ANGLE_TOL: f64 = 1e-6;
/// Relative magnitude below which a sign test counts as zero.
const SIGN_TOL: f64 = 1e-9;

/// Concrete coordinates for a set of labelled points.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Witness {
    pub coords: BTreeMap<PointLabel, Point>,
}

impl Witness {
    pub fn new() -> Self {
        Witness::default()
    }

    pub fn insert(&mut self, label: PointLabel, p: Point) {
        self.coords.insert(label, p);
    }

    pub fn get(&self, label: PointLabel) -> Result<Point, GeomError> {
        self.coords
            .get(&label)
            .copied()
            .ok_or(GeomError::UnknownPoint(label.to_string()))
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = PointLabel> + '_ {
        self.coords.keys().copied()
    }

    /// Largest pairwise distance between points.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<Point> = self.coords.values().copied().collect();
        let mut d: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    /// Smallest pairwise distance between points (infinite for fewer than two).
    pub fn min_separation(&self) -> f64 {
        let pts: Vec<Point> = self.coords.values().copied().collect();
        let mut d = f64::INFINITY;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                d = d.min(a.dist(*b));
            }
        }
        d
    }

    fn resolve(&self, labels: &[PointLabel]) -> Result<Vec<Point>, GeomError> {
        labels.iter().map(|l| self.get(*l)).collect()
    }
}

fn max_pairwise(pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(a.dist(*b));
        }
    }
    d
}

/// Relative collinearity measure of a triangle: 2·area / (longest side)².
pub fn relative_area(a: Point, b: Point, c: Point) -> f64 {
    let d = max_pairwise(&[a, b, c]);
    if d == 0.0 {
        return 0.0;
    }
    orient(a, b, c).abs() / (d * d)
}

fn sign(v: f64, scale: f64) -> i8 {
    if v.abs() <= SIGN_TOL * scale {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Sign of `(b - a)·(c - a)`: negative when `a` lies strictly between `b` and `c`.
fn division_sign(a: Point, b: Point, c: Point) -> i8 {
    let u = b.sub(a);
    let v = c.sub(a);
    sign(u.dot(v), u.norm() * v.norm())
}

fn orientation_sign(a: Point, b: Point, c: Point) -> i8 {
    let d = max_pairwise(&[a, b, c]);
    sign(orient(a, b, c), d * d)
}

/// Evaluates a non-degeneracy side condition on concrete coordinates.
///
/// * `ncoll`: the points are not all collinear.
/// * `npara`: the two lines differ in direction by more than [`NPARA_ANGLE_TOL`].
/// * `sameclock a b c d e f`: triangles `abc` and `def` have the same orientation.
/// * `sameside a b c d e f`: `a` lies inside segment `bc` exactly when `d`
///   lies inside segment `ef` (sign of `(b-a)·(c-a)` matches sign of `(e-d)·(f-d)`).
/// * `nsameside`: negation of `sameside`.
pub fn check_nondegenerate(w: &Witness, p: &Predicate) -> Result<bool, GeomError> {
    let pts = w.resolve(p.args())?;
    Ok(match p.kind() {
        PredicateKind::Ncoll => {
            let n = pts.len();
            let mut best: f64 = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        best = best.max(relative_area(pts[i], pts[j], pts[k]));
                    }
                }
            }
            best > NCOLL_AREA_TOL
        }
        PredicateKind::Npara => {
            let u = pts[1].sub(pts[0]);
            let v = pts[3].sub(pts[2]);
            let angle = u.cross(v).abs().atan2(u.dot(v).abs());
            angle > NPARA_ANGLE_TOL
        }
        PredicateKind::Sameclock => {
            let s1 = orientation_sign(pts[0], pts[1], pts[2]);
            let s2 = orientation_sign(pts[3], pts[4], pts[5]);
            s1 != 0 && s1 == s2
        }
        PredicateKind::Sameside => sameside(&pts),
        PredicateKind::Nsameside => !sameside(&pts),
        other => {
            return Err(GeomError::InvalidPredicate(format!(
                "{} is not a non-degeneracy condition",
                other.name()
            )))
        }
    })
}

fn sameside(pts: &[Point]) -> bool {
    let s1 = division_sign(pts[0], pts[1], pts[2]);
    let s2 = division_sign(pts[3], pts[4], pts[5]);
    s1 != 0 && s1 == s2
}
