use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GeomError, PointLabel};

/// Relation vocabulary shared by the rule library, the sampler and the verifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredicateKind {
    Perp,
    Para,
    Cong,
    Coll,
    Ncoll,
    Npara,
    Cyclic,
    Circle,
    Midp,
    Eqangle,
    Eqratio,
    Eqratio3,
    Rconst,
    Simtri,
    Simtrir,
    Contri,
    Contrir,
    Sameside,
    Nsameside,
    Sameclock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Exact(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exact(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl PredicateKind {
    pub const ALL: [PredicateKind; 20] = [
        PredicateKind::Perp,
        PredicateKind::Para,
        PredicateKind::Cong,
        PredicateKind::Coll,
        PredicateKind::Ncoll,
        PredicateKind::Npara,
        PredicateKind::Cyclic,
        PredicateKind::Circle,
        PredicateKind::Midp,
        PredicateKind::Eqangle,
        PredicateKind::Eqratio,
        PredicateKind::Eqratio3,
        PredicateKind::Rconst,
        PredicateKind::Simtri,
        PredicateKind::Simtrir,
        PredicateKind::Contri,
        PredicateKind::Contrir,
        PredicateKind::Sameside,
        PredicateKind::Nsameside,
        PredicateKind::Sameclock,
    ];

    pub fn name(self) -> &'static str {
        use PredicateKind::*;
        match self {
            Perp => "perp",
            Para => "para",
            Cong => "cong",
            Coll => "coll",
            Ncoll => "ncoll",
            Npara => "npara",
            Cyclic => "cyclic",
            Circle => "circle",
            Midp => "midp",
            Eqangle => "eqangle",
            Eqratio => "eqratio",
            Eqratio3 => "eqratio3",
            Rconst => "rconst",
            Simtri => "simtri",
            Simtrir => "simtrir",
            Contri => "contri",
            Contrir => "contrir",
            Sameside => "sameside",
            Nsameside => "nsameside",
            Sameclock => "sameclock",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        PredicateKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn arity(self) -> Arity {
        use PredicateKind::*;
        match self {
            Perp | Para | Cong | Npara | Circle | Rconst => Arity::Exact(4),
            Coll | Midp => Arity::Exact(3),
            Ncoll => Arity::AtLeast(3),
            Cyclic => Arity::AtLeast(4),
            Eqangle | Eqratio => Arity::Exact(8),
            Eqratio3 | Simtri | Simtrir | Contri | Contrir | Sameside | Nsameside | Sameclock => {
                Arity::Exact(6)
            }
        }
    }

    /// Side conditions that are discharged numerically rather than stored.
    pub fn is_check(self) -> bool {
        use PredicateKind::*;
        matches!(self, Ncoll | Npara | Sameside | Nsameside | Sameclock)
    }

    /// Permutations of argument positions under which the relation is invariant.
    ///
    /// `variant[j] = args[perm[j]]`. Kinds with variable arity (ncoll, cyclic)
    /// are fully symmetric and have no table.
    pub(crate) fn symmetry(self, arity: usize) -> Option<&'static [Vec<usize>]> {
        use PredicateKind::*;
        match self {
            Perp | Para | Cong | Npara => Some(table(&PAIRS, pair_perms)),
            Coll => Some(table(&S3, s3_perms)),
            Ncoll if arity == 3 => Some(table(&S3, s3_perms)),
            Midp => Some(table(&MIDP, || vec![vec![0, 1, 2], vec![0, 2, 1]])),
            Circle => Some(table(&CIRCLE, || {
                s3_perms()
                    .into_iter()
                    .map(|p| std::iter::once(0).chain(p.into_iter().map(|i| i + 1)).collect())
                    .collect()
            })),
            Eqangle | Eqratio => Some(table(&LINES4, lines4_perms)),
            Eqratio3 => Some(table(&EQRATIO3, || {
                vec![
                    vec![0, 1, 2, 3, 4, 5],
                    vec![1, 0, 3, 2, 5, 4],
                    vec![2, 3, 0, 1, 4, 5],
                    vec![3, 2, 1, 0, 5, 4],
                ]
            })),
            Rconst => Some(table(&RCONST, || {
                vec![vec![0, 1, 2, 3], vec![1, 0, 2, 3], vec![0, 1, 3, 2], vec![1, 0, 3, 2]]
            })),
            Simtri | Simtrir | Contri | Contrir | Sameclock => {
                Some(table(&TRIANGLES, triangle_pair_perms))
            }
            Sameside | Nsameside => Some(table(&SAMESIDE, sameside_perms)),
            Ncoll | Cyclic => None,
        }
    }
}

static PAIRS: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
static S3: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
static MIDP: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
static CIRCLE: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
static LINES4: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
static EQRATIO3: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
static RCONST: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
static TRIANGLES: OnceLock<Vec<Vec<usize>>> = OnceLock::new();
static SAMESIDE: OnceLock<Vec<Vec<usize>>> = OnceLock::new();

fn table(cell: &'static OnceLock<Vec<Vec<usize>>>, init: fn() -> Vec<Vec<usize>>) -> &'static [Vec<usize>] {
    cell.get_or_init(init)
}

fn s3_perms() -> Vec<Vec<usize>> {
    vec![
        vec![0, 1, 2],
        vec![0, 2, 1],
        vec![1, 0, 2],
        vec![1, 2, 0],
        vec![2, 0, 1],
        vec![2, 1, 0],
    ]
}

fn pair_perms() -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(8);
    for first in [[0, 1], [1, 0]] {
        for second in [[2, 3], [3, 2]] {
            out.push([first, second].concat());
            out.push([second, first].concat());
        }
    }
    out
}

fn lines4_perms() -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(32);
    for mask in 0..16u32 {
        let line = |i: usize| -> [usize; 2] {
            if mask & (1 << i) != 0 {
                [2 * i + 1, 2 * i]
            } else {
                [2 * i, 2 * i + 1]
            }
        };
        let (l0, l1, l2, l3) = (line(0), line(1), line(2), line(3));
        out.push([l0, l1, l2, l3].concat());
        out.push([l2, l3, l0, l1].concat());
    }
    out
}

fn triangle_pair_perms() -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(12);
    for p in s3_perms() {
        let first: Vec<usize> = p.clone();
        let second: Vec<usize> = p.iter().map(|i| i + 3).collect();
        out.push([first.clone(), second.clone()].concat());
        out.push([second, first].concat());
    }
    out
}

fn sameside_perms() -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(8);
    for first in [[0, 1, 2], [0, 2, 1]] {
        for second in [[3, 4, 5], [3, 5, 4]] {
            out.push([first, second].concat());
            out.push([second, first].concat());
        }
    }
    out
}

/// One symbolic geometric relation over point labels.
///
/// Values built through [`Predicate::new`] have valid arity and no
/// degenerate repeated labels; they are not necessarily canonical.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Predicate {
    kind: PredicateKind,
    args: Vec<PointLabel>,
    ratio: Option<Ratio<i64>>,
}

impl Predicate {
    pub fn new(
        kind: PredicateKind,
        args: Vec<PointLabel>,
        ratio: Option<Ratio<i64>>,
    ) -> Result<Self, GeomError> {
        let p = Predicate { kind, args, ratio };
        p.validate()?;
        Ok(p)
    }

    /// Convenience constructor from label strings.
    pub fn from_labels(kind: PredicateKind, labels: &[&str]) -> Result<Self, GeomError> {
        let args = labels
            .iter()
            .map(|s| PointLabel::new(s))
            .collect::<Result<Vec<_>, _>>()?;
        Predicate::new(kind, args, None)
    }

    pub fn rconst(args: [PointLabel; 4], ratio: Ratio<i64>) -> Result<Self, GeomError> {
        Predicate::new(PredicateKind::Rconst, args.to_vec(), Some(ratio))
    }

    pub fn kind(&self) -> PredicateKind {
        self.kind
    }

    pub fn args(&self) -> &[PointLabel] {
        &self.args
    }

    pub fn ratio(&self) -> Option<Ratio<i64>> {
        self.ratio
    }

    fn validate(&self) -> Result<(), GeomError> {
        use PredicateKind::*;
        let invalid = |why: &str| Err(GeomError::InvalidPredicate(format!("{self}: {why}")));
        if !self.kind.arity().accepts(self.args.len()) {
            return invalid("arity mismatch");
        }
        match (self.kind, self.ratio) {
            (Rconst, None) => return invalid("rconst needs a ratio"),
            (Rconst, Some(r)) if *r.numer() <= 0 || *r.denom() <= 0 => {
                return invalid("ratio must be positive")
            }
            (Rconst, Some(_)) => {}
            (_, Some(_)) => return invalid("unexpected ratio"),
            _ => {}
        }
        let a = &self.args;
        let distinct = |xs: &[PointLabel]| {
            xs.iter()
                .enumerate()
                .all(|(i, x)| xs[i + 1..].iter().all(|y| y != x))
        };
        let ok = match self.kind {
            Perp | Para | Cong | Npara | Rconst | Eqangle | Eqratio => {
                a.chunks(2).all(|seg| seg[0] != seg[1])
            }
            Coll | Ncoll | Cyclic | Circle | Midp => distinct(a),
            Eqratio3 => a[4] != a[0] && a[4] != a[2] && a[5] != a[1] && a[5] != a[3],
            Simtri | Simtrir | Contri | Contrir | Sameclock | Sameside | Nsameside => {
                distinct(&a[..3]) && distinct(&a[3..])
            }
        };
        if ok {
            Ok(())
        } else {
            invalid("degenerate repeated label")
        }
    }

    /// Lexicographically least representative under the kind's symmetry group.
    pub fn canonicalize(&self) -> Predicate {
        let args = match self.kind.symmetry(self.args.len()) {
            Some(perms) => perms
                .iter()
                .map(|p| permute(&self.args, p))
                .min()
                .expect("non-empty symmetry table"),
            None => {
                let mut v = self.args.clone();
                v.sort();
                v
            }
        };
        Predicate {
            kind: self.kind,
            args,
            ratio: self.ratio,
        }
    }

    pub fn is_canonical(&self) -> bool {
        *self == self.canonicalize()
    }

    /// All argument orders equivalent to this one.
    #[cfg(test)]
    pub(crate) fn variants(&self) -> Vec<Vec<PointLabel>> {
        match self.kind.symmetry(self.args.len()) {
            Some(perms) => perms.iter().map(|p| permute(&self.args, p)).collect(),
            None => vec![self.args.clone()],
        }
    }

    /// Relations that hold for every configuration and carry no information.
    pub fn is_trivial(&self) -> bool {
        use PredicateKind::*;
        let a = &self.args;
        let line = |i: usize| sorted_pair(a[i], a[i + 1]);
        match self.kind {
            Para | Cong => line(0) == line(2),
            Eqangle | Eqratio => {
                (line(0) == line(4) && line(2) == line(6)) || (line(0) == line(2) && line(4) == line(6))
            }
            Eqratio3 => a[4] == a[5] && a[0] == a[1] && a[2] == a[3],
            Simtri | Contri => a[..3] == a[3..],
            _ => false,
        }
    }

    /// Every label mentioned by the predicate, sorted and deduplicated.
    pub fn labels(&self) -> Vec<PointLabel> {
        let mut v = self.args.clone();
        v.sort();
        v.dedup();
        v
    }
}

fn sorted_pair(a: PointLabel, b: PointLabel) -> (PointLabel, PointLabel) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn permute(args: &[PointLabel], perm: &[usize]) -> Vec<PointLabel> {
    perm.iter().map(|&i| args[i]).collect()
}

/// Canonicalization as a free function.
pub fn canonicalize(p: &Predicate) -> Predicate {
    p.canonicalize()
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        if let Some(r) = self.ratio {
            write!(f, " {}/{}", r.numer(), r.denom())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub(crate) fn parse_ratio(tok: &str) -> Option<Ratio<i64>> {
    let (n, d) = match tok.split_once('/') {
        Some((n, d)) => (n.trim().parse::<i64>().ok()?, d.trim().parse::<i64>().ok()?),
        None => (tok.trim().parse::<i64>().ok()?, 1),
    };
    if d == 0 {
        return None;
    }
    Some(Ratio::new(n, d))
}

impl FromStr for Predicate {
    type Err = GeomError;

    /// Parses the whitespace-separated text form, e.g. `perp A B C D` or
    /// `rconst M A A B 1/2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut toks = s.split_whitespace();
        let bad = || GeomError::ParsePredicate(s.to_string());
        let kind = toks.next().and_then(PredicateKind::from_name).ok_or_else(bad)?;
        let mut rest: Vec<&str> = toks.collect();
        let ratio = if kind == PredicateKind::Rconst {
            let last = rest.pop().ok_or_else(bad)?;
            Some(parse_ratio(last).ok_or_else(bad)?)
        } else {
            None
        };
        let args = rest
            .into_iter()
            .map(PointLabel::new)
            .collect::<Result<Vec<_>, _>>()?;
        Predicate::new(kind, args, ratio)
    }
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
