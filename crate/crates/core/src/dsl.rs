//! Quantities DSL: `length(A, B) / length(C, D) - 1` and friends, plus
//! annotation value literals such as `2*sqrt(3)` or `pi/6`.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | primary ;
//! primary = number | "pi" | call | "(" expr ")" ;
//! call    = ident "(" ident { "," ident } ")" ;
//! ```
//!
//! Unary minus is represented as `0 - x`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::geom::{is_circle_id, Point, PointLabel};
use crate::schema::ResolvedCircle;

/// Values below this magnitude are not accepted as divisors.
pub const DIVISION_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("{func} needs a circle ID as first argument, got {got}")]
    CircleIdRequired { func: String, got: String },
    #[error("{func} needs a point label, got {got}")]
    PointRequired { func: String, got: String },
    #[error("{func} takes {expected} arguments, got {got}")]
    ArityError { func: String, expected: String, got: usize },
    #[error("unknown reference {0}")]
    UnknownReference(String),
    #[error("degenerate angle in {0}")]
    DegenerateAngle(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot parse value {0:?}")]
    ValueParse(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Length,
    Angle,
    Tan,
    Sin,
    Cos,
    Area,
    Perimeter,
    AngleBetweenLines,
    TanBetweenLines,
    SinBetweenLines,
    CosBetweenLines,
    CentralAngle,
    ArcLength,
    SectorArea,
    ArcInscribedAngle,
    CircleArea,
    CirclePerimeter,
    SegmentArea,
    Radius,
    Diameter,
}

/// Argument signature of a function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Signature {
    Points(usize),
    AtLeastPoints(usize),
    /// Circle ID followed by the given number of points.
    Circle(usize),
}

impl Func {
    pub const ALL: [Func; 20] = [
        Func::Length,
        Func::Angle,
        Func::Tan,
        Func::Sin,
        Func::Cos,
        Func::Area,
        Func::Perimeter,
        Func::AngleBetweenLines,
        Func::TanBetweenLines,
        Func::SinBetweenLines,
        Func::CosBetweenLines,
        Func::CentralAngle,
        Func::ArcLength,
        Func::SectorArea,
        Func::ArcInscribedAngle,
        Func::CircleArea,
        Func::CirclePerimeter,
        Func::SegmentArea,
        Func::Radius,
        Func::Diameter,
    ];

    pub fn name(self) -> &'static str {
        use Func::*;
        match self {
            Length => "length",
            Angle => "angle",
            Tan => "tan",
            Sin => "sin",
            Cos => "cos",
            Area => "area",
            Perimeter => "perimeter",
            AngleBetweenLines => "angle_between_lines",
            TanBetweenLines => "tan_between_lines",
            SinBetweenLines => "sin_between_lines",
            CosBetweenLines => "cos_between_lines",
            CentralAngle => "central_angle",
            ArcLength => "arc_length",
            SectorArea => "sector_area",
            ArcInscribedAngle => "arc_inscribed_angle",
            CircleArea => "circle_area",
            CirclePerimeter => "circle_perimeter",
            SegmentArea => "segment_area",
            Radius => "radius",
            Diameter => "diameter",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    fn signature(self) -> Signature {
        use Func::*;
        match self {
            Length => Signature::Points(2),
            Angle | Tan | Sin | Cos => Signature::Points(3),
            Area | Perimeter => Signature::AtLeastPoints(3),
            AngleBetweenLines | TanBetweenLines | SinBetweenLines | CosBetweenLines => Signature::Points(4),
            CentralAngle | ArcLength | SectorArea | ArcInscribedAngle | SegmentArea => Signature::Circle(2),
            CircleArea | CirclePerimeter | Radius | Diameter => Signature::Circle(0),
        }
    }

    pub fn takes_circle(self) -> bool {
        matches!(self.signature(), Signature::Circle(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arg {
    Point(PointLabel),
    Circle(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Point(p) => write!(f, "{p}"),
            Arg::Circle(c) => f.write_str(c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            Op::Add | Op::Sub => 1,
            Op::Mul | Op::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Atom { func: Func, args: Vec<Arg> },
    Number(f64),
    BinOp { op: Op, lhs: Box<Expr>, rhs: Box<Expr> },
}

impl Expr {
    pub fn binop(op: Op, lhs: Expr, rhs: Expr) -> Expr {
        Expr::BinOp {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::BinOp { op, .. } => op.precedence(),
            _ => 3,
        }
    }

    /// Every atom in the expression, left to right.
    pub fn atoms(&self) -> Vec<(Func, &[Arg])> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<(Func, &'a [Arg])>) {
        match self {
            Expr::Atom { func, args } => out.push((*func, args)),
            Expr::Number(_) => {}
            Expr::BinOp { lhs, rhs, .. } => {
                lhs.collect_atoms(out);
                rhs.collect_atoms(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom { func, args } => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Number(v) => write!(f, "{v}"),
            Expr::BinOp { op, lhs, rhs } => {
                let p = op.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, DslError> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'.' && b.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    while j < b.len() && b[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| DslError::Syntax {
                pos: start,
                msg: format!("bad number {text:?}"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'\'') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if b"+-*/(),".contains(&c) {
            out.push((i, Tok::Sym(c as char)));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(DslError::Syntax {
                pos: i,
                msg: format!("unexpected character {ch:?}"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        Err(DslError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                Op::Add
            } else if self.eat('-') {
                Op::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::binop(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                Op::Mul
            } else if self.eat('/') {
                Op::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::binop(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(Expr::binop(Op::Sub, Expr::Number(0.0), inner));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Number(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "pi" {
                    return Ok(Expr::Number(PI));
                }
                if !self.eat('(') {
                    return self.err(format!("expected '(' after {name}"));
                }
                let mut raw = Vec::new();
                loop {
                    match self.peek().cloned() {
                        Some(Tok::Ident(a)) => {
                            self.pos += 1;
                            raw.push(a);
                        }
                        _ => return self.err("expected an argument name"),
                    }
                    if self.eat(',') {
                        continue;
                    }
                    if self.eat(')') {
                        break;
                    }
                    return self.err("expected ',' or ')'");
                }
                let func = Func::from_name(&name).ok_or(DslError::UnknownFunction(name))?;
                Ok(Expr::Atom {
                    func,
                    args: classify_args(func, raw)?,
                })
            }
            Some(Tok::Sym(c)) => self.err(format!("unexpected {c:?}")),
            None => self.err("unexpected end of input"),
        }
    }
}

fn classify_args(func: Func, raw: Vec<String>) -> Result<Vec<Arg>, DslError> {
    let arity_err = |expected: String| DslError::ArityError {
        func: func.name().to_string(),
        expected,
        got: raw.len(),
    };
    let (circle, points) = match func.signature() {
        Signature::Points(n) if raw.len() != n => return Err(arity_err(n.to_string())),
        Signature::AtLeastPoints(n) if raw.len() < n => return Err(arity_err(format!("at least {n}"))),
        Signature::Circle(n) if raw.len() != n + 1 => return Err(arity_err((n + 1).to_string())),
        Signature::Circle(_) => (true, &raw[1..]),
        _ => (false, &raw[..]),
    };
    let mut args = Vec::with_capacity(raw.len());
    if circle {
        if !is_circle_id(&raw[0]) {
            return Err(DslError::CircleIdRequired {
                func: func.name().to_string(),
                got: raw[0].clone(),
            });
        }
        args.push(Arg::Circle(raw[0].clone()));
    }
    for a in points {
        let label = PointLabel::new(a).map_err(|_| DslError::PointRequired {
            func: func.name().to_string(),
            got: a.clone(),
        })?;
        args.push(Arg::Point(label));
    }
    Ok(args)
}

/// Parses a quantity expression.
pub fn parse_quantity(text: &str) -> Result<Expr, DslError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Coordinates and resolved circles an expression is evaluated against.
#[derive(Clone, Copy, Debug)]
pub struct Scene<'a> {
    pub points: &'a BTreeMap<PointLabel, Point>,
    pub circles: &'a BTreeMap<String, ResolvedCircle>,
}

impl Scene<'_> {
    fn point(&self, a: &Arg) -> Result<Point, DslError> {
        match a {
            Arg::Point(l) => self
                .points
                .get(l)
                .copied()
                .ok_or_else(|| DslError::UnknownReference(l.to_string())),
            Arg::Circle(c) => Err(DslError::UnknownReference(c.clone())),
        }
    }

    fn circle(&self, a: &Arg) -> Result<ResolvedCircle, DslError> {
        match a {
            Arg::Circle(c) => self
                .circles
                .get(c)
                .copied()
                .ok_or_else(|| DslError::UnknownReference(c.clone())),
            Arg::Point(l) => Err(DslError::UnknownReference(l.to_string())),
        }
    }
}

/// Angle between vectors `u` and `v` in radians, in [0, π].
fn vector_angle(u: Point, v: Point, what: &str) -> Result<f64, DslError> {
    if u.norm() == 0.0 || v.norm() == 0.0 {
        return Err(DslError::DegenerateAngle(what.to_string()));
    }
    Ok(u.cross(v).abs().atan2(u.dot(v)))
}

/// Evaluates an expression. Angles are in degrees.
pub fn eval_quantity(e: &Expr, scene: &Scene<'_>) -> Result<f64, DslError> {
    match e {
        Expr::Number(v) => Ok(*v),
        Expr::BinOp { op, lhs, rhs } => {
            let a = eval_quantity(lhs, scene)?;
            let b = eval_quantity(rhs, scene)?;
            Ok(match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => {
                    if b.abs() < DIVISION_GUARD {
                        return Err(DslError::DivisionByZero);
                    }
                    a / b
                }
            })
        }
        Expr::Atom { func, args } => eval_atom(*func, args, scene),
    }
}

fn eval_atom(func: Func, args: &[Arg], scene: &Scene<'_>) -> Result<f64, DslError> {
    use Func::*;
    let name = func.name();
    if func.takes_circle() {
        let c = scene.circle(&args[0])?;
        let r = c.radius;
        let theta = || -> Result<f64, DslError> {
            let a = scene.point(&args[1])?;
            let b = scene.point(&args[2])?;
            vector_angle(a.sub(c.center), b.sub(c.center), name)
        };
        return Ok(match func {
            CentralAngle => theta()?.to_degrees(),
            ArcLength => r * theta()?,
            SectorArea => r * r * theta()? / 2.0,
            ArcInscribedAngle => theta()?.to_degrees() / 2.0,
            SegmentArea => {
                let t = theta()?;
                r * r * (t - t.sin()) / 2.0
            }
            CircleArea => PI * r * r,
            CirclePerimeter => 2.0 * PI * r,
            Radius => r,
            Diameter => 2.0 * r,
            _ => unreachable!("circle functions handled above"),
        });
    }
    let pts = args.iter().map(|a| scene.point(a)).collect::<Result<Vec<_>, _>>()?;
    Ok(match func {
        Length => pts[0].dist(pts[1]),
        Angle | Tan | Sin | Cos => {
            let t = vector_angle(pts[0].sub(pts[1]), pts[2].sub(pts[1]), name)?;
            match func {
                Angle => t.to_degrees(),
                Tan => t.tan(),
                Sin => t.sin(),
                _ => t.cos(),
            }
        }
        AngleBetweenLines | TanBetweenLines | SinBetweenLines | CosBetweenLines => {
            let u = pts[1].sub(pts[0]);
            let v = pts[3].sub(pts[2]);
            if u.norm() == 0.0 || v.norm() == 0.0 {
                return Err(DslError::DegenerateAngle(name.to_string()));
            }
            let t = u.cross(v).abs().atan2(u.dot(v).abs());
            match func {
                AngleBetweenLines => t.to_degrees(),
                TanBetweenLines => t.tan(),
                SinBetweenLines => t.sin(),
                _ => t.cos(),
            }
        }
        Area => {
            let n = pts.len();
            let twice: f64 = (0..n).map(|i| pts[i].cross(pts[(i + 1) % n])).sum();
            twice.abs() / 2.0
        }
        Perimeter => {
            let n = pts.len();
            (0..n).map(|i| pts[i].dist(pts[(i + 1) % n])).sum()
        }
        _ => unreachable!("point functions handled above"),
    })
}

/// Parses and evaluates in one go.
pub fn eval_str(text: &str, scene: &Scene<'_>) -> Result<f64, DslError> {
    eval_quantity(&parse_quantity(text)?, scene)
}

/// Unit context of an annotation value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiteralContext {
    Length,
    /// Plain numbers are degrees; anything mentioning π is radians.
    Angle,
}

/// Parses an annotation or answer literal: `3/2`, `2*sqrt(3)`, `5sqrt3`,
/// `2√3`, `\frac{3}{2}`, `pi/6`, `30°`.
pub fn parse_value_literal(text: &str, ctx: LiteralContext) -> Result<f64, DslError> {
    let bad = || DslError::ValueParse(text.to_string());
    let norm = normalize_literal(text).ok_or_else(bad)?;
    let toks = lex(&norm).map_err(|_| bad())?;
    if toks.is_empty() {
        return Err(bad());
    }
    let mut p = LitParser {
        toks,
        pos: 0,
        saw_pi: false,
    };
    let v = p.expr().ok_or_else(bad)?;
    if p.pos != p.toks.len() || !v.is_finite() {
        return Err(bad());
    }
    Ok(if ctx == LiteralContext::Angle && p.saw_pi {
        v.to_degrees()
    } else {
        v
    })
}

fn normalize_literal(text: &str) -> Option<String> {
    let mut s = text.trim().trim_matches('$').trim().to_string();
    for suffix in ["^{\\circ}", "^\\circ", "\\circ", "°", "degrees", "degree", "deg"] {
        if let Some(rest) = s.strip_suffix(suffix) {
            s = rest.trim_end().to_string();
            break;
        }
    }
    let s = s
        .replace("\\left", "")
        .replace("\\right", "")
        .replace("\\cdot", "*")
        .replace("\\times", "*")
        .replace(['×', '·'], "*")
        .replace("\\pi", "pi")
        .replace('π', "pi")
        .replace('√', "sqrt");
    let s = rewrite_latex(&s, "\\frac", 2)?;
    let s = rewrite_latex(&s, "\\dfrac", 2)?;
    let s = rewrite_latex(&s, "\\sqrt", 1)?;
    Some(s.replace('{', "(").replace('}', ")"))
}

/// Rewrites `\frac{a}{b}` to `((a)/(b))` and `\sqrt{a}` to `sqrt(a)`.
fn rewrite_latex(s: &str, cmd: &str, groups: usize) -> Option<String> {
    let mut out = String::new();
    let mut rest = s;
    while let Some(i) = rest.find(cmd) {
        out.push_str(&rest[..i]);
        rest = &rest[i + cmd.len()..];
        let mut parts = Vec::new();
        for _ in 0..groups {
            let body = rest.strip_prefix('{')?;
            let mut depth = 1;
            let mut end = None;
            for (j, ch) in body.char_indices() {
                match ch {
                    '{' => depth += 1,
                    '}' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(j);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            let end = end?;
            parts.push(body[..end].to_string());
            rest = &body[end + 1..];
        }
        if groups == 2 {
            out.push_str(&format!("(({})/({}))", parts[0], parts[1]));
        } else {
            out.push_str(&format!("sqrt({})", parts[0]));
        }
    }
    out.push_str(rest);
    Some(out)
}

/// Numeric parser for literals; allows implicit multiplication (`5sqrt3`, `2pi`).
struct LitParser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    saw_pi: bool,
}

impl LitParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Option<f64> {
        let mut v = self.term()?;
        loop {
            if self.eat('+') {
                v += self.term()?;
            } else if self.eat('-') {
                v -= self.term()?;
            } else {
                return Some(v);
            }
        }
    }

    fn term(&mut self) -> Option<f64> {
        let mut v = self.unary()?;
        loop {
            if self.eat('*') {
                v *= self.unary()?;
            } else if self.eat('/') {
                let d = self.unary()?;
                if d == 0.0 {
                    return None;
                }
                v /= d;
            } else if matches!(self.peek(), Some(Tok::Num(_) | Tok::Ident(_) | Tok::Sym('('))) {
                v *= self.unary()?;
            } else {
                return Some(v);
            }
        }
    }

    fn unary(&mut self) -> Option<f64> {
        if self.eat('-') {
            return Some(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Option<f64> {
        match self.peek().cloned()? {
            Tok::Num(v) => {
                self.pos += 1;
                Some(v)
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let v = self.expr()?;
                self.eat(')').then_some(v)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "pi" => {
                        self.saw_pi = true;
                        Some(PI)
                    }
                    "sqrt" => {
                        let x = if self.eat('(') {
                            let x = self.expr()?;
                            if !self.eat(')') {
                                return None;
                            }
                            x
                        } else {
                            match self.peek().cloned()? {
                                Tok::Num(v) => {
                                    self.pos += 1;
                                    v
                                }
                                _ => return None,
                            }
                        };
                        (x >= 0.0).then(|| x.sqrt())
                    }
                    _ => {
                        // `sqrt3` lexes as one identifier
                        let digits = name.strip_prefix("sqrt")?;
                        let x: f64 = digits.parse().ok()?;
                        Some(x.sqrt())
                    }
                }
            }
            Tok::Sym(_) => None,
        }
    }
}
