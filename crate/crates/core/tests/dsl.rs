use std::collections::BTreeMap;
use std::f64::consts::PI;

use geoforge_core::dsl::{eval_quantity, eval_str, parse_quantity, Scene};
use geoforge_core::geom::{Point, PointLabel};
use geoforge_core::schema::ResolvedCircle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LABELS: [&str; 5] = ["A", "B", "C", "D", "E"];

type Pts = BTreeMap<PointLabel, Point>;
type Circles = BTreeMap<String, ResolvedCircle>;

fn random_scene(rng: &mut ChaCha8Rng) -> (Pts, Circles) {
    loop {
        let pts: Vec<(f64, f64)> = (0..LABELS.len())
            .map(|_| (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)))
            .collect();
        let far_apart = pts.iter().enumerate().all(|(i, a)| {
            pts[i + 1..]
                .iter()
                .all(|b| (a.0 - b.0).hypot(a.1 - b.1) > 0.5)
        });
        if !far_apart {
            continue;
        }
        let points = LABELS
            .iter()
            .zip(&pts)
            .map(|(l, &(x, y))| (PointLabel::new(l).unwrap(), Point::new(x, y)))
            .collect();
        let circle = ResolvedCircle {
            center: Point::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
            radius: rng.random_range(0.5..6.0),
        };
        return (points, BTreeMap::from([("C1".to_string(), circle)]));
    }
}

/// Oracle expression tree, evaluated straight from coordinates.
enum O {
    Num(f64),
    Call(&'static str, Vec<&'static str>),
    Bin(char, Box<O>, Box<O>),
}

impl O {
    fn text(&self) -> String {
        match self {
            O::Num(v) => format!("{v}"),
            O::Call(f, args) => format!("{f}({})", args.join(",")),
            O::Bin(op, a, b) => format!("({}) {op} ({})", a.text(), b.text()),
        }
    }
}

fn polar(p: (f64, f64)) -> f64 {
    p.1.atan2(p.0)
}

/// Unsigned angle between two directions via polar-angle difference.
fn dir_angle(u: (f64, f64), v: (f64, f64)) -> f64 {
    let d = (polar(v) - polar(u)).rem_euclid(2.0 * PI);
    if d > PI {
        2.0 * PI - d
    } else {
        d
    }
}

struct Oracle<'a> {
    pts: &'a Pts,
    circle: ResolvedCircle,
}

impl Oracle<'_> {
    fn p(&self, l: &str) -> (f64, f64) {
        let q = self.pts[&PointLabel::new(l).unwrap()];
        (q.x, q.y)
    }

    fn vec(&self, from: &str, to: &str) -> (f64, f64) {
        let (a, b) = (self.p(from), self.p(to));
        (b.0 - a.0, b.1 - a.1)
    }

    fn at_center(&self, l: &str) -> (f64, f64) {
        let q = self.p(l);
        (q.0 - self.circle.center.x, q.1 - self.circle.center.y)
    }

    /// Value and a magnitude bound used to scale the comparison tolerance.
    fn eval(&self, e: &O) -> Option<(f64, f64)> {
        let r = self.circle.radius;
        Some(match e {
            O::Num(v) => (*v, v.abs()),
            O::Bin(op, a, b) => {
                let (x, mx) = self.eval(a)?;
                let (y, my) = self.eval(b)?;
                match op {
                    '+' => (x + y, mx + my),
                    '-' => (x - y, mx + my),
                    '*' => (x * y, mx * my),
                    _ => {
                        if y.abs() < 1e-3 {
                            return None;
                        }
                        (x / y, mx / y.abs() + mx * my / (y * y))
                    }
                }
            }
            O::Call(f, a) => {
                let v = match *f {
                    "length" => {
                        let d = self.vec(a[0], a[1]);
                        d.0.hypot(d.1)
                    }
                    "angle" | "sin" | "cos" | "tan" => {
                        let t = dir_angle(self.vec(a[1], a[0]), self.vec(a[1], a[2]));
                        match *f {
                            "angle" => t * 180.0 / PI,
                            "sin" => t.sin(),
                            "cos" => t.cos(),
                            _ => {
                                if t.cos().abs() < 1e-3 {
                                    return None;
                                }
                                t.tan()
                            }
                        }
                    }
                    "area" => {
                        // Fan triangulation from the first vertex.
                        let o = self.p(a[0]);
                        let mut s = 0.0;
                        for w in a[1..].windows(2) {
                            let (u, v) = (self.p(w[0]), self.p(w[1]));
                            s += (u.0 - o.0) * (v.1 - o.1) - (u.1 - o.1) * (v.0 - o.0);
                        }
                        s.abs() / 2.0
                    }
                    "perimeter" => (0..a.len())
                        .map(|i| {
                            let d = self.vec(a[i], a[(i + 1) % a.len()]);
                            d.0.hypot(d.1)
                        })
                        .sum(),
                    "angle_between_lines" => {
                        let t = dir_angle(self.vec(a[0], a[1]), self.vec(a[2], a[3]));
                        t.min(PI - t) * 180.0 / PI
                    }
                    "central_angle" => dir_angle(self.at_center(a[1]), self.at_center(a[2])) * 180.0 / PI,
                    "arc_length" => r * dir_angle(self.at_center(a[1]), self.at_center(a[2])),
                    "sector_area" => r * r * dir_angle(self.at_center(a[1]), self.at_center(a[2])) / 2.0,
                    "segment_area" => {
                        let t = dir_angle(self.at_center(a[1]), self.at_center(a[2]));
                        r * r * (t - t.sin()) / 2.0
                    }
                    "circle_area" => PI * r * r,
                    "circle_perimeter" => 2.0 * PI * r,
                    "radius" => r,
                    "diameter" => 2.0 * r,
                    other => panic!("oracle lacks {other}"),
                };
                (v, v.abs())
            }
        })
    }
}

fn pick(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    let mut pool = LABELS.to_vec();
    (0..n).map(|_| pool.remove(rng.random_range(0..pool.len()))).collect()
}

fn random_atom(rng: &mut ChaCha8Rng) -> O {
    match rng.random_range(0..15) {
        0 => O::Call("length", pick(rng, 2)),
        1 => O::Call("angle", pick(rng, 3)),
        2 => O::Call("sin", pick(rng, 3)),
        3 => O::Call("cos", pick(rng, 3)),
        4 => O::Call("tan", pick(rng, 3)),
        5 => O::Call("area", pick(rng, 3)),
        6 => O::Call("perimeter", pick(rng, 4)),
        7 => O::Call("angle_between_lines", pick(rng, 4)),
        8 => {
            let f = ["central_angle", "arc_length", "sector_area", "segment_area"][rng.random_range(0..4)];
            let mut args = vec!["C1"];
            args.extend(pick(rng, 2));
            O::Call(f, args)
        }
        9 => O::Call(
            ["circle_area", "circle_perimeter", "radius", "diameter"][rng.random_range(0..4)],
            vec!["C1"],
        ),
        10 => O::Call("area", pick(rng, 4)),
        _ => O::Num((rng.random_range(0.0..20.0f64) * 100.0).round() / 100.0),
    }
}

fn random_expr(rng: &mut ChaCha8Rng, depth: u32) -> O {
    if depth == 0 || rng.random_bool(0.35) {
        return random_atom(rng);
    }
    let op = ['+', '-', '*', '/'][rng.random_range(0..4)];
    O::Bin(op, Box::new(random_expr(rng, depth - 1)), Box::new(random_expr(rng, depth - 1)))
}

#[test]
fn evaluator_agrees_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut compared = 0;
    while compared < 500 {
        let (pts, circles) = random_scene(&mut rng);
        let oracle = Oracle {
            pts: &pts,
            circle: circles["C1"],
        };
        let e = random_expr(&mut rng, 3);
        let Some((want, mag)) = oracle.eval(&e) else {
            continue;
        };
        let scene = Scene {
            points: &pts,
            circles: &circles,
        };
        let got = eval_str(&e.text(), &scene).unwrap_or_else(|err| panic!("{}: {err}", e.text()));
        assert!(
            (got - want).abs() <= 1e-9 * mag.max(1.0),
            "{}: got {got}, oracle {want}",
            e.text()
        );
        compared += 1;
    }
}

fn scene_strategy() -> impl Strategy<Value = (Pts, Circles)> {
    any::<u64>().prop_map(|s| random_scene(&mut ChaCha8Rng::seed_from_u64(s)))
}

proptest! {
    #[test]
    fn angle_is_symmetric((pts, circles) in scene_strategy(), i in 0..5usize, j in 0..5usize, k in 0..5usize) {
        prop_assume!(i != j && j != k && i != k);
        let scene = Scene { points: &pts, circles: &circles };
        let (a, b, c) = (LABELS[i], LABELS[j], LABELS[k]);
        let x = eval_str(&format!("angle({a},{b},{c})"), &scene).unwrap();
        let y = eval_str(&format!("angle({c},{b},{a})"), &scene).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn pythagorean_identity((pts, circles) in scene_strategy(), i in 0..5usize, j in 0..5usize, k in 0..5usize) {
        prop_assume!(i != j && j != k && i != k);
        let scene = Scene { points: &pts, circles: &circles };
        let args = format!("{},{},{}", LABELS[i], LABELS[j], LABELS[k]);
        let s = eval_str(&format!("sin({args})"), &scene).unwrap();
        let c = eval_str(&format!("cos({args})"), &scene).unwrap();
        prop_assert!((s * s + c * c - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sector_area_is_half_arc_times_radius((pts, circles) in scene_strategy(), i in 0..5usize, j in 0..5usize) {
        prop_assume!(i != j);
        let scene = Scene { points: &pts, circles: &circles };
        let (a, b) = (LABELS[i], LABELS[j]);
        let sector = eval_str(&format!("sector_area(C1,{a},{b})"), &scene).unwrap();
        let arc = eval_str(&format!("arc_length(C1,{a},{b})"), &scene).unwrap();
        let r = eval_str("radius(C1)", &scene).unwrap();
        prop_assert!((sector - arc * r / 2.0).abs() <= 1e-12 * sector.abs().max(1.0));
    }

    #[test]
    fn printed_ast_reparses(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = parse_quantity(&random_expr(&mut rng, 4).text()).unwrap();
        let again = parse_quantity(&e.to_string()).unwrap();
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(again.to_string(), e.to_string());
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,40}") {
        let _ = parse_quantity(&text);
    }
}

#[test]
fn unary_minus_and_pi() {
    let pts = Pts::new();
    let circles = Circles::new();
    let scene = Scene {
        points: &pts,
        circles: &circles,
    };
    let e = parse_quantity("-2 * pi").unwrap();
    assert!((eval_quantity(&e, &scene).unwrap() + 2.0 * PI).abs() < 1e-15);
}
