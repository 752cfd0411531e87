use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use super::predicate::parse_ratio;
use super::{GeomError, PointLabel, Predicate, PredicateKind};

/// Argument slot of a pattern: a named variable or a fixed label.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Label(PointLabel),
}

/// A predicate whose arguments may be variables.
///
/// Text form: `para ?x ?y C D`; tokens starting with `?` are variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub kind: PredicateKind,
    pub terms: Vec<Term>,
    pub ratio: Option<Ratio<i64>>,
}

impl Pattern {
    pub fn new(kind: PredicateKind, terms: Vec<Term>, ratio: Option<Ratio<i64>>) -> Result<Self, GeomError> {
        if !kind.arity().accepts(terms.len()) {
            return Err(GeomError::InvalidPredicate(format!(
                "{} pattern with {} arguments",
                kind.name(),
                terms.len()
            )));
        }
        if (kind == PredicateKind::Rconst) != ratio.is_some() {
            return Err(GeomError::InvalidPredicate(format!("{} pattern ratio mismatch", kind.name())));
        }
        Ok(Pattern { kind, terms, ratio })
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Label(_) => None,
        })
    }

    /// Substitutes every variable; fails when a variable is unbound or the
    /// resulting predicate is degenerate.
    pub fn instantiate(&self, sub: &Substitution) -> Result<Predicate, GeomError> {
        let args = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Label(l) => Ok(*l),
                Term::Var(v) => sub
                    .get(v)
                    .copied()
                    .ok_or_else(|| GeomError::InvalidPredicate(format!("unbound variable {v}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Predicate::new(self.kind, args, self.ratio)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        for t in &self.terms {
            match t {
                Term::Var(v) => write!(f, " ?{v}")?,
                Term::Label(l) => write!(f, " {l}")?,
            }
        }
        if let Some(r) = self.ratio {
            write!(f, " {}/{}", r.numer(), r.denom())?;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GeomError::ParsePredicate(s.to_string());
        let mut toks = s.split_whitespace();
        let kind = toks.next().and_then(PredicateKind::from_name).ok_or_else(bad)?;
        let mut rest: Vec<&str> = toks.collect();
        let ratio = if kind == PredicateKind::Rconst {
            Some(rest.pop().and_then(parse_ratio).ok_or_else(bad)?)
        } else {
            None
        };
        let terms = rest
            .into_iter()
            .map(|t| match t.strip_prefix('?') {
                Some(v) if !v.is_empty() => Ok(Term::Var(v.to_string())),
                Some(_) => Err(bad()),
                None => PointLabel::new(t).map(Term::Label),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Pattern::new(kind, terms, ratio)
    }
}

pub type Substitution = BTreeMap<String, PointLabel>;

/// Pattern with variables replaced by dense indices.
#[derive(Clone, Debug)]
pub(crate) struct CompiledPattern {
    pub kind: PredicateKind,
    pub terms: Vec<CTerm>,
    pub ratio: Option<Ratio<i64>>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum CTerm {
    Var(usize),
    Label(PointLabel),
}

pub(crate) type Binding = Vec<Option<PointLabel>>;

impl CompiledPattern {
    pub fn compile(p: &Pattern, vars: &mut Vec<String>) -> CompiledPattern {
        let terms = p
            .terms
            .iter()
            .map(|t| match t {
                Term::Label(l) => CTerm::Label(*l),
                Term::Var(v) => {
                    let idx = match vars.iter().position(|x| x == v) {
                        Some(i) => i,
                        None => {
                            vars.push(v.clone());
                            vars.len() - 1
                        }
                    };
                    CTerm::Var(idx)
                }
            })
            .collect();
        CompiledPattern {
            kind: p.kind,
            terms,
            ratio: p.ratio,
        }
    }

    pub fn instantiate(&self, b: &Binding) -> Option<Vec<PointLabel>> {
        self.terms
            .iter()
            .map(|t| match t {
                CTerm::Label(l) => Some(*l),
                CTerm::Var(v) => b[*v],
            })
            .collect()
    }
}

/// Which stored item satisfied a pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Support {
    Fact(PredicateKind, u32),
    Cyclic(u32),
}

/// A maximal known-concyclic point set and the facts it was merged from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CyclicSet {
    pub points: BTreeSet<PointLabel>,
    pub sources: BTreeSet<Predicate>,
    generation: u32,
}

/// Indexed set of canonical facts.
///
/// Concyclicity is stored as point sets: two sets merge when they share at
/// least three points (three points determine a circle).
#[derive(Clone, Debug, Default)]
pub struct FactStore {
    facts: BTreeSet<Predicate>,
    by_kind: BTreeMap<PredicateKind, Vec<Predicate>>,
    /// Insertion generation of each entry of `by_kind`, ascending.
    gens: BTreeMap<PredicateKind, Vec<u32>>,
    index: HashMap<IndexKey, Vec<u32>>,
    cyclic_sets: Vec<CyclicSet>,
    generation: u32,
}

impl FactStore {
    pub fn new() -> Self {
        FactStore::default()
    }

    /// Inserts a fact; returns `true` iff it was not already known.
    pub fn insert(&mut self, p: &Predicate) -> bool {
        let p = p.canonicalize();
        if p.kind() == PredicateKind::Cyclic {
            return self.insert_cyclic(p);
        }
        if !self.facts.insert(p.clone()) {
            return false;
        }
        self.generation += 1;
        self.gens.entry(p.kind()).or_default().push(self.generation);
        let list = self.by_kind.entry(p.kind()).or_default();
        let pos = list.len() as u32;
        for l in p.labels() {
            self.index.entry(IndexKey::Label(p.kind(), l)).or_default().push(pos);
        }
        if is_segment_kind(p.kind()) {
            let mut segs: Vec<_> = p.args().chunks(2).map(|s| sorted(s[0], s[1])).collect();
            segs.sort();
            segs.dedup();
            for (a, b) in segs {
                self.index.entry(IndexKey::Segment(p.kind(), a, b)).or_default().push(pos);
            }
        }
        list.push(p);
        true
    }

    fn insert_cyclic(&mut self, p: Predicate) -> bool {
        let points: BTreeSet<PointLabel> = p.args().iter().copied().collect();
        if self.cyclic_sets.iter().any(|s| points.is_subset(&s.points)) {
            return false;
        }
        self.facts.insert(p.clone());
        self.generation += 1;
        let mut merged = CyclicSet {
            points,
            sources: BTreeSet::from([p]),
            generation: self.generation,
        };
        while let Some(i) = self
            .cyclic_sets
            .iter()
            .position(|s| s.points.intersection(&merged.points).count() >= 3)
        {
            let other = self.cyclic_sets.remove(i);
            merged.points.extend(other.points);
            merged.sources.extend(other.sources);
        }
        self.cyclic_sets.push(merged);
        self.cyclic_sets.sort_by(|a, b| a.points.cmp(&b.points));
        true
    }

    /// Symmetry-insensitive membership.
    pub fn contains(&self, p: &Predicate) -> bool {
        let p = p.canonicalize();
        if p.kind() == PredicateKind::Cyclic {
            let pts: BTreeSet<PointLabel> = p.args().iter().copied().collect();
            return self.cyclic_sets.iter().any(|s| pts.is_subset(&s.points));
        }
        self.facts.contains(&p)
    }

    /// Number of distinct facts inserted (cyclic facts counted as inserted).
    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Predicate> {
        self.facts.iter()
    }

    pub fn facts_of(&self, kind: PredicateKind) -> &[Predicate] {
        self.by_kind.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Counter bumped by every successful insert.
    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn cyclic_sets(&self) -> &[CyclicSet] {
        &self.cyclic_sets
    }

    pub(crate) fn support_facts(&self, s: Support) -> Vec<Predicate> {
        match s {
            Support::Fact(kind, i) => vec![self.by_kind[&kind][i as usize].clone()],
            Support::Cyclic(i) => self.cyclic_sets[i as usize].sources.iter().cloned().collect(),
        }
    }

    /// Every substitution whose instantiation is a stored fact, sorted.
    pub fn match_pattern(&self, pattern: &Pattern) -> Vec<Substitution> {
        let mut vars = Vec::new();
        let compiled = CompiledPattern::compile(pattern, &mut vars);
        let mut out = Vec::new();
        self.match_compiled(&compiled, &vec![None; vars.len()], 0, &mut out);
        let subs: BTreeSet<Substitution> = out
            .into_iter()
            .map(|(b, _)| {
                vars.iter()
                    .cloned()
                    .zip(b.into_iter().map(|l| l.expect("all pattern vars bound")))
                    .collect()
            })
            .collect();
        subs.into_iter().collect()
    }

    /// Extends `binding` in every way that makes `pat` a stored fact whose
    /// generation is above `since`.
    pub(crate) fn match_compiled(
        &self,
        pat: &CompiledPattern,
        binding: &Binding,
        since: u32,
        out: &mut Vec<(Binding, Support)>,
    ) {
        if pat.kind == PredicateKind::Cyclic {
            self.match_cyclic(pat, binding, since, out);
            return;
        }
        let gens = self.gens.get(&pat.kind).map(Vec::as_slice).unwrap_or(&[]);
        let first_new = gens.partition_point(|&g| g <= since) as u32;
        let facts = self.facts_of(pat.kind);
        if facts.is_empty() {
            return;
        }
        let bound: Vec<Option<PointLabel>> = pat
            .terms
            .iter()
            .map(|t| match t {
                CTerm::Label(l) => Some(*l),
                CTerm::Var(v) => binding[*v],
            })
            .collect();
        let mut keys: Vec<IndexKey> = bound.iter().flatten().map(|l| IndexKey::Label(pat.kind, *l)).collect();
        if is_segment_kind(pat.kind) {
            for s in bound.chunks(2) {
                if let [Some(a), Some(b)] = s {
                    let (a, b) = sorted(*a, *b);
                    keys.push(IndexKey::Segment(pat.kind, a, b));
                }
            }
        }
        let mut best: Option<&Vec<u32>> = None;
        for k in &keys {
            match self.index.get(k) {
                None => return,
                Some(list) => {
                    if best.is_none_or(|b| list.len() < b.len()) {
                        best = Some(list);
                    }
                }
            }
        }
        let mut try_fact = |i: u32| {
            let f = &facts[i as usize];
            if f.args().len() != pat.terms.len() || f.ratio() != pat.ratio {
                return;
            }
            let support = Support::Fact(pat.kind, i);
            match pat.kind.symmetry(f.args().len()) {
                Some(perms) => {
                    for perm in perms {
                        if let Some(b) = unify(&pat.terms, f.args(), Some(perm), binding) {
                            out.push((b, support));
                        }
                    }
                }
                None => {
                    for perm in all_permutations(f.args().len()) {
                        if let Some(b) = unify(&pat.terms, f.args(), Some(&perm), binding) {
                            out.push((b, support));
                        }
                    }
                }
            }
        };
        match best {
            Some(list) => {
                let start = list.partition_point(|&i| i < first_new);
                list[start..].iter().for_each(|&i| try_fact(i))
            }
            None => (first_new..facts.len() as u32).for_each(&mut try_fact),
        }
    }

    fn match_cyclic(&self, pat: &CompiledPattern, binding: &Binding, since: u32, out: &mut Vec<(Binding, Support)>) {
        let k = pat.terms.len();
        for (si, set) in self.cyclic_sets.iter().enumerate() {
            if set.points.len() < k || set.generation <= since {
                continue;
            }
            let pts: Vec<PointLabel> = set.points.iter().copied().collect();
            let mut b = binding.clone();
            let mut used = vec![false; pts.len()];
            assign_cyclic(&pat.terms, 0, &pts, &mut used, &mut b, &mut |b| {
                out.push((b.clone(), Support::Cyclic(si as u32)))
            });
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum IndexKey {
    Label(PredicateKind, PointLabel),
    /// Unordered endpoint pair of a line/segment argument.
    Segment(PredicateKind, PointLabel, PointLabel),
}

/// Kinds whose arguments are consecutive endpoint pairs.
fn is_segment_kind(k: PredicateKind) -> bool {
    use PredicateKind::*;
    matches!(k, Perp | Para | Cong | Npara | Eqangle | Eqratio | Rconst)
}

fn sorted(a: PointLabel, b: PointLabel) -> (PointLabel, PointLabel) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn assign_cyclic(
    terms: &[CTerm],
    pos: usize,
    pts: &[PointLabel],
    used: &mut [bool],
    b: &mut Binding,
    emit: &mut dyn FnMut(&Binding),
) {
    if pos == terms.len() {
        emit(b);
        return;
    }
    let fixed = match terms[pos] {
        CTerm::Label(l) => Some(l),
        CTerm::Var(v) => b[v],
    };
    match fixed {
        Some(l) => {
            if let Some(i) = pts.iter().position(|p| *p == l) {
                if !used[i] {
                    used[i] = true;
                    assign_cyclic(terms, pos + 1, pts, used, b, emit);
                    used[i] = false;
                }
            }
        }
        None => {
            let CTerm::Var(v) = terms[pos] else { unreachable!() };
            for i in 0..pts.len() {
                if used[i] {
                    continue;
                }
                used[i] = true;
                b[v] = Some(pts[i]);
                assign_cyclic(terms, pos + 1, pts, used, b, emit);
                b[v] = None;
                used[i] = false;
            }
        }
    }
}

fn unify(terms: &[CTerm], args: &[PointLabel], perm: Option<&[usize]>, binding: &Binding) -> Option<Binding> {
    let mut b = binding.clone();
    for (j, t) in terms.iter().enumerate() {
        let l = match perm {
            Some(p) => args[p[j]],
            None => args[j],
        };
        match *t {
            CTerm::Label(x) => {
                if x != l {
                    return None;
                }
            }
            CTerm::Var(v) => match b[v] {
                Some(x) if x != l => return None,
                Some(_) => {}
                None => b[v] = Some(l),
            },
        }
    }
    Some(b)
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}
