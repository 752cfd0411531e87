use std::collections::BTreeSet;
use std::fmt;

use crate::geom::{Pattern, PredicateKind, Term};

use super::DeductionError;

const LIBRARY: &str = include_str!("rules.txt");

/// A named inference rule: all premises together entail every conclusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub name: String,
    pub premises: Vec<Pattern>,
    pub conclusions: Vec<Pattern>,
}

impl Rule {
    /// Premises that are ordinary facts, as opposed to numeric side conditions.
    pub fn positive_premises(&self) -> impl Iterator<Item = &Pattern> {
        self.premises.iter().filter(|p| !p.kind.is_check())
    }

    pub fn check_premises(&self) -> impl Iterator<Item = &Pattern> {
        self.premises.iter().filter(|p| p.kind.is_check())
    }
}

struct PlainPattern<'a>(&'a Pattern);

impl fmt::Display for PlainPattern<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.kind.name())?;
        for t in &self.0.terms {
            match t {
                Term::Var(v) => write!(f, " {v}")?,
                Term::Label(l) => write!(f, " {l}")?,
            }
        }
        if let Some(r) = self.0.ratio {
            write!(f, " {}/{}", r.numer(), r.denom())?;
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    /// Same two-line block format the library is stored in.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.id, self.name)?;
        let join = |ps: &[Pattern]| {
            ps.iter()
                .map(|p| PlainPattern(p).to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        write!(f, "{} => {}", join(&self.premises), join(&self.conclusions))
    }
}

/// The built-in rule library, in id order.
pub fn load_rule_library() -> Result<Vec<Rule>, DeductionError> {
    parse_rules(LIBRARY)
}

/// Parses blank-line separated blocks of `rNN Name` / `premises => conclusions`.
///
/// Every token after the predicate name is a variable, except the trailing
/// ratio of `rconst`.
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, DeductionError> {
    let mut rules = Vec::new();
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    while let Some(head) = lines.next() {
        let (id, name) = head
            .split_once(char::is_whitespace)
            .ok_or_else(|| bad(head, "missing rule name"))?;
        if !id.starts_with('r') || id.len() < 2 || !id[1..].chars().all(|c| c.is_ascii_digit()) {
            return Err(bad(head, "rule id must look like rNN"));
        }
        let body = lines.next().ok_or_else(|| bad(head, "missing rule body"))?;
        let (lhs, rhs) = body.split_once("=>").ok_or_else(|| bad(id, "missing =>"))?;
        let rule = Rule {
            id: id.to_string(),
            name: name.trim().to_string(),
            premises: parse_list(id, lhs)?,
            conclusions: parse_list(id, rhs)?,
        };
        validate(&rule)?;
        if rules.iter().any(|r: &Rule| r.id == rule.id) {
            return Err(bad(id, "duplicate rule id"));
        }
        rules.push(rule);
    }
    rules.sort_by_key(|r| r.id[1..].parse::<u32>().unwrap_or(u32::MAX));
    Ok(rules)
}

fn bad(at: &str, msg: &str) -> DeductionError {
    DeductionError::Rules(format!("{at}: {msg}"))
}

fn parse_list(id: &str, text: &str) -> Result<Vec<Pattern>, DeductionError> {
    text.split(',').map(|p| parse_pattern(id, p.trim())).collect()
}

fn parse_pattern(id: &str, text: &str) -> Result<Pattern, DeductionError> {
    let mut toks = text.split_whitespace();
    let kind = toks
        .next()
        .and_then(PredicateKind::from_name)
        .ok_or_else(|| bad(id, &format!("unknown predicate in `{text}`")))?;
    let mut rest: Vec<&str> = toks.collect();
    let ratio = if kind == PredicateKind::Rconst {
        let r = rest.pop().unwrap_or_default();
        Some(
            crate::geom::parse_ratio(r)
                .ok_or_else(|| bad(id, &format!("bad ratio `{r}`")))?,
        )
    } else {
        None
    };
    let terms = rest.into_iter().map(|v| Term::Var(v.to_string())).collect();
    Pattern::new(kind, terms, ratio).map_err(|e| bad(id, &e.to_string()))
}

fn validate(rule: &Rule) -> Result<(), DeductionError> {
    let bound: BTreeSet<&str> = rule.positive_premises().flat_map(Pattern::vars).collect();
    if bound.is_empty() {
        return Err(bad(&rule.id, "needs at least one fact premise"));
    }
    for p in rule.check_premises().chain(&rule.conclusions) {
        if let Some(v) = p.vars().find(|v| !bound.contains(v)) {
            return Err(bad(&rule.id, &format!("variable {v} not bound by a fact premise")));
        }
    }
    if rule.conclusions.iter().any(|p| p.kind.is_check()) {
        return Err(bad(&rule.id, "conclusions must be facts"));
    }
    Ok(())
}
