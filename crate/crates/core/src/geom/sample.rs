use std::collections::BTreeSet;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{circumcenter, GeomError, Point, PointLabel, Predicate, PredicateKind, Witness};

/// Limits and robustness margins for [`sample_scene`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleBudget {
    pub max_points: usize,
    pub max_constructions: usize,
    /// Minimum pairwise distance, relative to the scene diameter.
    pub min_separation: f64,
    /// Minimum height of triangles used by a construction, relative to the scene diameter.
    pub min_height: f64,
}

impl Default for SampleBudget {
    fn default() -> Self {
        SampleBudget {
            max_points: 10,
            max_constructions: 7,
            min_separation: 1e-3,
            min_height: 1e-2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    BaseTriangle,
    Midpoint,
    Foot,
    ParallelThrough,
    PerpendicularThrough,
    Circumcenter,
    RatioPoint,
    OnCircumcircle,
    LineIntersection,
    PerpBisectorPoint,
    Antipode,
}

impl Construction {
    const STEPS: [Construction; 10] = [
        Construction::Midpoint,
        Construction::Foot,
        Construction::ParallelThrough,
        Construction::PerpendicularThrough,
        Construction::Circumcenter,
        Construction::RatioPoint,
        Construction::OnCircumcircle,
        Construction::LineIntersection,
        Construction::PerpBisectorPoint,
        Construction::Antipode,
    ];
}

/// One entry of the construction log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionStep {
    pub kind: Construction,
    pub new_points: Vec<PointLabel>,
    pub inputs: Vec<PointLabel>,
    pub facts: Vec<Predicate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledScene {
    pub witness: Witness,
    /// Canonical, deduplicated, in construction order.
    pub facts: Vec<Predicate>,
    pub constructions: Vec<ConstructionStep>,
}

const DRAWS_PER_STEP: usize = 200;
const RATIOS: [(i64, i64); 6] = [(1, 3), (2, 3), (1, 4), (3, 4), (2, 5), (3, 5)];

/// Samples a random scene by applying constructions to a base triangle.
///
/// Every emitted predicate holds on the returned witness by construction.
pub fn sample_scene(rng_seed: u64, budget: &SampleBudget) -> Result<SampledScene, GeomError> {
    if budget.max_points < 3 {
        return Err(GeomError::InvalidBudget(format!(
            "max_points {} below the base triangle",
            budget.max_points
        )));
    }
    if !(budget.min_separation > 0.0 && budget.min_separation < 1.0)
        || !(budget.min_height > 0.0 && budget.min_height < 1.0)
    {
        return Err(GeomError::InvalidBudget("margins must lie in (0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut s = Sampler {
        budget,
        witness: Witness::new(),
        order: Vec::new(),
        facts: Vec::new(),
        seen: BTreeSet::new(),
        log: Vec::new(),
        circles: Vec::new(),
    };
    s.base_triangle(&mut rng)?;
    let steps = budget.max_constructions.min(budget.max_points - 3);
    let mut failures = 0;
    while s.log.len() - 1 < steps {
        let kind = Construction::STEPS[rng.random_range(0..Construction::STEPS.len())];
        if !s.try_construct(kind, &mut rng)? {
            failures += 1;
            if failures > DRAWS_PER_STEP * steps.max(1) {
                return Err(GeomError::SamplingFailed(failures));
            }
        }
    }
    Ok(SampledScene {
        witness: s.witness,
        facts: s.facts,
        constructions: s.log,
    })
}

/// Label sequence A, B, ..., Z, A1, B1, ... skipping circle-ID lookalikes.
fn nth_label(n: usize) -> Option<PointLabel> {
    let letter = (b'A' + (n % 26) as u8) as char;
    let round = n / 26;
    let name = if round == 0 {
        letter.to_string()
    } else {
        format!("{letter}{round}")
    };
    PointLabel::new(&name).ok()
}

struct Sampler<'a> {
    budget: &'a SampleBudget,
    witness: Witness,
    order: Vec<PointLabel>,
    facts: Vec<Predicate>,
    seen: BTreeSet<Predicate>,
    log: Vec<ConstructionStep>,
    /// (center, three points on the circle) from circumcenter constructions.
    circles: Vec<(PointLabel, [PointLabel; 3])>,
}

impl Sampler<'_> {
    fn next_label(&self) -> PointLabel {
        let mut n = self.order.len();
        loop {
            if let Some(l) = nth_label(n).filter(|l| self.witness.get(*l).is_err()) {
                return l;
            }
            n += 1;
        }
    }

    fn pt(&self, l: PointLabel) -> Point {
        self.witness.coords[&l]
    }

    fn pick<R: Rng>(&self, rng: &mut R, k: usize) -> Vec<PointLabel> {
        let mut pool = self.order.clone();
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let i = rng.random_range(0..pool.len());
            out.push(pool.swap_remove(i));
        }
        out
    }

    fn diameter_with(&self, p: Point) -> f64 {
        self.witness
            .coords
            .values()
            .map(|q| q.dist(p))
            .fold(self.witness.diameter(), f64::max)
    }

    fn base_triangle<R: Rng>(&mut self, rng: &mut R) -> Result<(), GeomError> {
        for _ in 0..DRAWS_PER_STEP {
            let pts: Vec<Point> = (0..3)
                .map(|_| Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
                .collect();
            if !well_shaped(pts[0], pts[1], pts[2]) {
                continue;
            }
            let labels: Vec<PointLabel> = (0..3).filter_map(nth_label).collect();
            for (l, p) in labels.iter().zip(&pts) {
                self.witness.insert(*l, *p);
                self.order.push(*l);
            }
            self.log.push(ConstructionStep {
                kind: Construction::BaseTriangle,
                new_points: labels.clone(),
                inputs: Vec::new(),
                facts: Vec::new(),
            });
            return Ok(());
        }
        Err(GeomError::SamplingFailed(DRAWS_PER_STEP))
    }

    /// Height of triangle `abc` relative to the scene diameter.
    fn relative_height(&self, a: Point, b: Point, c: Point) -> f64 {
        let longest = a.dist(b).max(b.dist(c)).max(c.dist(a));
        if longest == 0.0 {
            return 0.0;
        }
        super::orient(a, b, c).abs() / longest / self.witness.diameter()
    }

    fn accepts_new(&self, p: Point) -> bool {
        if !p.is_finite() {
            return false;
        }
        let d = self.diameter_with(p);
        // keep the scene from sprawling: at most twice the current extent
        if d > 2.0 * self.witness.diameter().max(1e-9) {
            return false;
        }
        self.witness
            .coords
            .values()
            .all(|q| q.dist(p) >= self.budget.min_separation * d)
    }

    fn try_construct<R: Rng>(&mut self, kind: Construction, rng: &mut R) -> Result<bool, GeomError> {
        use Construction::*;
        use PredicateKind as K;
        let n = self.order.len();
        let x = self.next_label();
        let h = self.budget.min_height;
        let (pos, inputs, facts): (Point, Vec<PointLabel>, Vec<Predicate>) = match kind {
            Midpoint => {
                let v = self.pick(rng, 2);
                let p = self.pt(v[0]).midpoint(self.pt(v[1]));
                (p, v.clone(), vec![pred(K::Midp, &[x, v[0], v[1]])?])
            }
            Foot => {
                if n < 3 {
                    return Ok(false);
                }
                let v = self.pick(rng, 3);
                let (p, q, r) = (self.pt(v[0]), self.pt(v[1]), self.pt(v[2]));
                if self.relative_height(p, q, r) < h {
                    return Ok(false);
                }
                let d = r.sub(q);
                let t = p.sub(q).dot(d) / d.dot(d);
                let foot = q.add(d.scale(t));
                (
                    foot,
                    v.clone(),
                    vec![pred(K::Perp, &[v[0], x, v[1], v[2]])?, pred(K::Coll, &[x, v[1], v[2]])?],
                )
            }
            ParallelThrough | PerpendicularThrough => {
                if n < 3 {
                    return Ok(false);
                }
                let v = self.pick(rng, 3);
                let (p, q, r) = (self.pt(v[0]), self.pt(v[1]), self.pt(v[2]));
                if self.relative_height(p, q, r) < h {
                    return Ok(false);
                }
                let mut dir = r.sub(q);
                if kind == PerpendicularThrough {
                    dir = dir.perp();
                }
                let t = rng.random_range(0.4..1.2) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let k = if kind == ParallelThrough { K::Para } else { K::Perp };
                (p.add(dir.scale(t)), v.clone(), vec![pred(k, &[v[0], x, v[1], v[2]])?])
            }
            Circumcenter => {
                let v = self.pick(rng, 3);
                let (p, q, r) = (self.pt(v[0]), self.pt(v[1]), self.pt(v[2]));
                if self.relative_height(p, q, r) < 0.1 {
                    return Ok(false);
                }
                let Some(o) = circumcenter(p, q, r) else {
                    return Ok(false);
                };
                (
                    o,
                    v.clone(),
                    vec![
                        pred(K::Circle, &[x, v[0], v[1], v[2]])?,
                        pred(K::Cong, &[x, v[0], x, v[1]])?,
                        pred(K::Cong, &[x, v[0], x, v[2]])?,
                    ],
                )
            }
            RatioPoint => {
                let v = self.pick(rng, 2);
                let (num, den) = RATIOS[rng.random_range(0..RATIOS.len())];
                let t = num as f64 / den as f64;
                let (p, q) = (self.pt(v[0]), self.pt(v[1]));
                let r = Ratio::new(num, den);
                (
                    p.add(q.sub(p).scale(t)),
                    v.clone(),
                    vec![
                        pred(K::Coll, &[x, v[0], v[1]])?,
                        Predicate::rconst([x, v[0], v[0], v[1]], r)?,
                    ],
                )
            }
            OnCircumcircle => {
                let v = self.pick(rng, 3);
                let (p, q, r) = (self.pt(v[0]), self.pt(v[1]), self.pt(v[2]));
                if self.relative_height(p, q, r) < 0.1 {
                    return Ok(false);
                }
                let Some(o) = circumcenter(p, q, r) else {
                    return Ok(false);
                };
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let rad = o.dist(p);
                let mut facts = vec![pred(K::Cyclic, &[v[0], v[1], v[2], x])?];
                if let Some((c, _)) = self.circles.iter().find(|(_, on)| same_set(on, &v)) {
                    facts.push(pred(K::Cong, &[*c, v[0], *c, x])?);
                }
                (o.add(Point::new(theta.cos(), theta.sin()).scale(rad)), v.clone(), facts)
            }
            LineIntersection => {
                if n < 4 {
                    return Ok(false);
                }
                let v = self.pick(rng, 4);
                let (p, q, r, s) = (self.pt(v[0]), self.pt(v[1]), self.pt(v[2]), self.pt(v[3]));
                let d1 = q.sub(p);
                let d2 = s.sub(r);
                let den = d1.cross(d2);
                if den.abs() < 0.2 * d1.norm() * d2.norm() {
                    return Ok(false);
                }
                let t = r.sub(p).cross(d2) / den;
                (
                    p.add(d1.scale(t)),
                    v.clone(),
                    vec![pred(K::Coll, &[x, v[0], v[1]])?, pred(K::Coll, &[x, v[2], v[3]])?],
                )
            }
            PerpBisectorPoint => {
                let v = self.pick(rng, 2);
                let (p, q) = (self.pt(v[0]), self.pt(v[1]));
                let t = rng.random_range(0.3..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (
                    p.midpoint(q).add(q.sub(p).perp().scale(t)),
                    v.clone(),
                    vec![pred(K::Cong, &[x, v[0], x, v[1]])?],
                )
            }
            Antipode => {
                if self.circles.is_empty() {
                    return Ok(false);
                }
                let (o, on) = self.circles[rng.random_range(0..self.circles.len())];
                let i = rng.random_range(0..3);
                let (p, q) = (on[i], on[(i + 1) % 3]);
                let pos = self.pt(o).scale(2.0).sub(self.pt(p));
                (
                    pos,
                    vec![o, p, q],
                    vec![pred(K::Midp, &[o, p, x])?, pred(K::Circle, &[o, p, q, x])?],
                )
            }
            BaseTriangle => return Ok(false),
        };
        if !self.accepts_new(pos) {
            return Ok(false);
        }
        self.witness.insert(x, pos);
        self.order.push(x);
        if kind == Circumcenter {
            self.circles.push((x, [inputs[0], inputs[1], inputs[2]]));
        }
        let mut kept = Vec::new();
        for f in facts {
            let c = f.canonicalize();
            if self.seen.insert(c.clone()) {
                self.facts.push(c.clone());
                kept.push(c);
            }
        }
        self.log.push(ConstructionStep {
            kind,
            new_points: vec![x],
            inputs,
            facts: kept,
        });
        Ok(true)
    }
}

fn pred(kind: PredicateKind, args: &[PointLabel]) -> Result<Predicate, GeomError> {
    Predicate::new(kind, args.to_vec(), None)
}

fn same_set(a: &[PointLabel; 3], b: &[PointLabel]) -> bool {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort();
    y.sort();
    x == y
}

/// Base triangles have every angle between 25 and 115 degrees.
fn well_shaped(a: Point, b: Point, c: Point) -> bool {
    let angle = |p: Point, q: Point, r: Point| {
        let u = q.sub(p);
        let v = r.sub(p);
        u.cross(v).abs().atan2(u.dot(v)).to_degrees()
    };
    [angle(a, b, c), angle(b, c, a), angle(c, a, b)]
        .iter()
        .all(|t| (25.0..=115.0).contains(t))
        && a.dist(b).min(b.dist(c)).min(c.dist(a)) > 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let b = SampleBudget::default();
        assert_eq!(sample_scene(7, &b).unwrap(), sample_scene(7, &b).unwrap());
        assert_ne!(sample_scene(7, &b).unwrap().witness, sample_scene(8, &b).unwrap().witness);
    }

    #[test]
    fn respects_budget() {
        let b = SampleBudget {
            max_points: 5,
            max_constructions: 9,
            ..SampleBudget::default()
        };
        for seed in 0..20 {
            let s = sample_scene(seed, &b).unwrap();
            assert!(s.witness.len() <= 5);
            assert!(s.facts.iter().all(Predicate::is_canonical));
        }
    }

    #[test]
    fn tiny_budget_rejected() {
        let b = SampleBudget {
            max_points: 2,
            ..SampleBudget::default()
        };
        assert!(matches!(sample_scene(0, &b), Err(GeomError::InvalidBudget(_))));
    }

    #[test]
    fn midpoint_log_matches_facts() {
        let b = SampleBudget::default();
        let mut found = false;
        for seed in 0..50 {
            let s = sample_scene(seed, &b).unwrap();
            for step in s.constructions.iter().filter(|c| c.kind == Construction::Midpoint) {
                let m = step.new_points[0];
                let (a, c) = (step.inputs[0], step.inputs[1]);
                let want = Predicate::new(PredicateKind::Midp, vec![m, a, c], None).unwrap().canonicalize();
                assert!(s.facts.contains(&want));
                let (pm, pa, pc) = (s.witness.coords[&m], s.witness.coords[&a], s.witness.coords[&c]);
                assert!(super::super::orient(pa, pm, pc).abs() < 1e-9);
                found = true;
            }
        }
        assert!(found);
    }
}
