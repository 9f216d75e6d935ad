//! Operation descriptions: operands with their properties plus the
//! postcondition equations, and the `.clk` text format they are read from.
//!
//! ```text
//! operation LU {
//!   operand L : m x m [Output, Matrix, LowerTriangular, UnitDiagonal];
//!   operand U : m x m [Output, Matrix, UpperTriangular];
//!   operand A : m x m [Input, Matrix, ExistsLU];
//!   postcondition {
//!     L * U = A;
//!   }
//! }
//! ```
//!
//! Sizes are identifiers, or `1` for a unit extent. Expressions use `+`,
//! binary and unary `-`, `*`, the postfix operators `^T` and `^-1`, and
//! parentheses. Comments start with `#` or `//` and run to end of line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{
    close_properties, infer_dims, Dims, Equation, Expr, ExprError, OpRef, Operand, Property, PropertySet, SymbolicSize,
    UNIT_DIM,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationSpec {
    pub name: String,
    pub operands: Vec<Operand>,
    pub postcondition: Vec<Equation>,
}

impl OperationSpec {
    pub fn operand(&self, name: &str) -> Option<&Operand> {
        self.operands.iter().find(|o| o.name == name)
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Operand> {
        self.operands.iter().filter(|o| o.is_input())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Operand> {
        self.operands.iter().filter(|o| o.is_output())
    }

    pub fn whole_dims(&self) -> BTreeMap<OpRef, Dims> {
        self.operands.iter().map(|o| (OpRef::whole(&o.name), (o.rows.clone(), o.cols.clone()))).collect()
    }

    /// Structural comparison: same name, operands and equations (each
    /// equation up to addend order).
    pub fn structurally_equal(&self, other: &OperationSpec) -> bool {
        self.name == other.name
            && self.operands == other.operands
            && self.postcondition.len() == other.postcondition.len()
            && self.postcondition.iter().zip(&other.postcondition).all(|(a, b)| a.normalized() == b.normalized())
    }
}

/// Diagnostic codes, one per kind of rejected input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagCode {
    Syntax,
    UnknownProperty,
    DuplicateOperand,
    UndeclaredOperand,
    DimensionMismatch,
    EmptyPostcondition,
    NoOutputOperand,
    NoInputOperand,
    EquationWithoutOutput,
    ConflictingRole,
    MissingRole,
    NonSquareStructure,
    ZeroAndIdentity,
    UnsupportedProperty,
    KindMismatch,
}

impl DiagCode {
    pub fn code(self) -> &'static str {
        match self {
            DiagCode::Syntax => "E100",
            DiagCode::UnknownProperty => "E101",
            DiagCode::DuplicateOperand => "E102",
            DiagCode::UndeclaredOperand => "E103",
            DiagCode::DimensionMismatch => "E104",
            DiagCode::EmptyPostcondition => "E105",
            DiagCode::NoOutputOperand => "E106",
            DiagCode::NoInputOperand => "E107",
            DiagCode::EquationWithoutOutput => "E108",
            DiagCode::ConflictingRole => "E109",
            DiagCode::MissingRole => "E110",
            DiagCode::NonSquareStructure => "E111",
            DiagCode::ZeroAndIdentity => "E112",
            DiagCode::UnsupportedProperty => "E113",
            DiagCode::KindMismatch => "E114",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {}: {message}", code.code())]
pub struct Diagnostic {
    pub code: DiagCode,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    fn new(code: DiagCode, pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { code, line: pos.line, col: pos.col, message: message.into() }
    }

    /// `file:line:col: code: message`
    pub fn with_file(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    Punct(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) | Tok::Number(s) => write!(f, "`{s}`"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, Diagnostic> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut pos = Pos { line: 1, col: 1 };
    let advance = |c: char, pos: &mut Pos| {
        if c == '\n' {
            pos.line += 1;
            pos.col = 1;
        } else {
            pos.col += 1;
        }
    };
    while let Some(&c) = chars.peek() {
        let start = pos;
        if c.is_whitespace() {
            chars.next();
            advance(c, &mut pos);
        } else if c == '#' || (c == '/' && text[byte_offset(text, start)..].starts_with("//")) {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                advance(c, &mut pos);
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    chars.next();
                    advance(c, &mut pos);
                } else {
                    break;
                }
            }
            out.push((Tok::Ident(s), start));
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    s.push(c);
                    chars.next();
                    advance(c, &mut pos);
                } else {
                    break;
                }
            }
            out.push((Tok::Number(s), start));
        } else if "{}[];:,=+-*^()".contains(c) {
            chars.next();
            advance(c, &mut pos);
            out.push((Tok::Punct(c), start));
        } else {
            return Err(Diagnostic::new(DiagCode::Syntax, start, format!("unexpected character `{c}`")));
        }
    }
    out.push((Tok::Eof, pos));
    Ok(out)
}

fn byte_offset(text: &str, pos: Pos) -> usize {
    let mut line = 1;
    let mut col = 1;
    for (i, c) in text.char_indices() {
        if line == pos.line && col == pos.col {
            return i;
        }
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    text.len()
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

struct RawOperand {
    name: String,
    pos: Pos,
    rows: String,
    cols: String,
    props: Vec<(Property, Pos)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, expected: &str) -> Diagnostic {
        Diagnostic::new(DiagCode::Syntax, self.pos(), format!("expected {expected}, found {}", self.peek()))
    }

    fn punct(&mut self, c: char) -> Result<Pos, Diagnostic> {
        if *self.peek() == Tok::Punct(c) {
            Ok(self.bump().1)
        } else {
            Err(self.syntax(&format!("`{c}`")))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), Diagnostic> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            _ => Err(self.syntax(&format!("`{kw}`"))),
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let p = self.bump().1;
                Ok((s, p))
            }
            _ => Err(self.syntax("identifier")),
        }
    }

    fn size(&mut self) -> Result<String, Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Number(n) if n == UNIT_DIM => {
                self.bump();
                Ok(n)
            }
            Tok::Number(n) => Err(Diagnostic::new(
                DiagCode::Syntax,
                self.pos(),
                format!("numeric size `{n}` not allowed; sizes are symbolic (or 1)"),
            )),
            _ => Err(self.syntax("size")),
        }
    }

    fn operand(&mut self) -> Result<RawOperand, Diagnostic> {
        let (name, pos) = self.ident()?;
        self.punct(':')?;
        let rows = self.size()?;
        self.keyword("x")?;
        let cols = self.size()?;
        let mut props = Vec::new();
        if *self.peek() == Tok::Punct('[') {
            self.bump();
            if *self.peek() != Tok::Punct(']') {
                loop {
                    let (p, ppos) = self.ident()?;
                    let prop = match Property::from_name(&p) {
                        Some(prop) => prop,
                        None if p == "Symmetric" => {
                            return Err(Diagnostic::new(
                                DiagCode::UnsupportedProperty,
                                ppos,
                                "property `Symmetric` is not supported by the partitioner",
                            ))
                        }
                        None => {
                            return Err(Diagnostic::new(
                                DiagCode::UnknownProperty,
                                ppos,
                                format!("unknown property `{p}`"),
                            ))
                        }
                    };
                    props.push((prop, ppos));
                    if *self.peek() == Tok::Punct(',') {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
            self.punct(']')?;
        }
        self.punct(';')?;
        Ok(RawOperand { name, pos, rows, cols, props })
    }

    fn expr(&mut self, refs: &mut Vec<(String, Pos)>) -> Result<Expr, Diagnostic> {
        let mut terms = vec![self.term(refs)?];
        loop {
            match self.peek() {
                Tok::Punct('+') => {
                    self.bump();
                    terms.push(self.term(refs)?);
                }
                Tok::Punct('-') => {
                    self.bump();
                    terms.push(Expr::neg(self.term(refs)?));
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::Plus(terms) })
    }

    fn term(&mut self, refs: &mut Vec<(String, Pos)>) -> Result<Expr, Diagnostic> {
        let mut factors = vec![self.unary(refs)?];
        while *self.peek() == Tok::Punct('*') {
            self.bump();
            factors.push(self.unary(refs)?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::Times(factors) })
    }

    fn unary(&mut self, refs: &mut Vec<(String, Pos)>) -> Result<Expr, Diagnostic> {
        if *self.peek() == Tok::Punct('-') {
            self.bump();
            return Ok(Expr::neg(self.unary(refs)?));
        }
        let mut e = self.primary(refs)?;
        while *self.peek() == Tok::Punct('^') {
            self.bump();
            match self.peek().clone() {
                Tok::Ident(s) if s == "T" => {
                    self.bump();
                    e = Expr::transpose(e);
                }
                Tok::Punct('-') => {
                    self.bump();
                    match self.peek() {
                        Tok::Number(n) if n == "1" => {
                            self.bump();
                            e = Expr::inverse(e);
                        }
                        _ => return Err(self.syntax("`1` after `^-`")),
                    }
                }
                _ => return Err(self.syntax("`T` or `-1` after `^`")),
            }
        }
        Ok(e)
    }

    fn primary(&mut self, refs: &mut Vec<(String, Pos)>) -> Result<Expr, Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let p = self.bump().1;
                refs.push((name.clone(), p));
                Ok(Expr::Ref(OpRef::whole(name)))
            }
            Tok::Punct('(') => {
                self.bump();
                let e = self.expr(refs)?;
                self.punct(')')?;
                Ok(e)
            }
            _ => Err(self.syntax("operand or `(`")),
        }
    }
}

/// Parses and validates an operation description.
pub fn parse_spec(text: &str) -> Result<OperationSpec, Diagnostic> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    p.keyword("operation")?;
    let (name, _) = p.ident()?;
    p.punct('{')?;

    let mut raw = Vec::new();
    loop {
        match p.peek() {
            Tok::Ident(s) if s == "operand" => {
                p.bump();
                raw.push(p.operand()?);
            }
            _ => break,
        }
    }

    let post_pos = p.pos();
    p.keyword("postcondition")?;
    p.punct('{')?;
    let mut equations = Vec::new();
    while *p.peek() != Tok::Punct('}') {
        let eq_pos = p.pos();
        let mut refs = Vec::new();
        let lhs = p.expr(&mut refs)?;
        p.punct('=')?;
        let rhs = p.expr(&mut refs)?;
        p.punct(';')?;
        equations.push((Equation::new(lhs, rhs), eq_pos, refs));
    }
    p.punct('}')?;
    p.punct('}')?;
    if *p.peek() != Tok::Eof {
        return Err(p.syntax("end of input"));
    }

    let operands = validate_operands(&raw)?;
    let spec = OperationSpec { name, operands, postcondition: equations.iter().map(|(e, _, _)| e.clone()).collect() };
    check_declared(&spec, &equations)?;
    validate_roles(&spec.operands, &raw)?;
    validate_postcondition(&spec, &equations, post_pos)?;
    Ok(spec)
}

fn validate_operands(raw: &[RawOperand]) -> Result<Vec<Operand>, Diagnostic> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in raw {
        if !seen.insert(r.name.clone()) {
            return Err(Diagnostic::new(
                DiagCode::DuplicateOperand,
                r.pos,
                format!("operand `{}` declared twice", r.name),
            ));
        }
        let mut props: PropertySet = r.props.iter().map(|(p, _)| *p).collect();
        let has = |p| props.contains(&p);
        if has(Property::Input) && has(Property::Output) {
            return Err(Diagnostic::new(
                DiagCode::ConflictingRole,
                r.pos,
                format!("operand `{}` is both Input and Output", r.name),
            ));
        }
        if !has(Property::Input) && !has(Property::Output) {
            return Err(Diagnostic::new(
                DiagCode::MissingRole,
                r.pos,
                format!("operand `{}` must be Input or Output", r.name),
            ));
        }
        if has(Property::Zero) && has(Property::Identity) {
            return Err(Diagnostic::new(
                DiagCode::ZeroAndIdentity,
                r.pos,
                format!("operand `{}` cannot be both Zero and Identity", r.name),
            ));
        }
        let needs_square = [
            Property::LowerTriangular,
            Property::UpperTriangular,
            Property::UnitDiagonal,
            Property::Identity,
            Property::ExistsLU,
            Property::NonSingular,
        ];
        if r.rows != r.cols {
            if let Some(p) = needs_square.iter().find(|p| has(**p)) {
                return Err(Diagnostic::new(
                    DiagCode::NonSquareStructure,
                    r.pos,
                    format!("operand `{}` is {} x {} but {p} requires a square matrix", r.name, r.rows, r.cols),
                ));
            }
        }
        let kinds = [Property::Matrix, Property::Vector, Property::Scalar];
        let declared: Vec<_> = kinds.iter().filter(|k| has(**k)).collect();
        if declared.len() > 1 {
            return Err(Diagnostic::new(
                DiagCode::KindMismatch,
                r.pos,
                format!("operand `{}` declares more than one of Matrix/Vector/Scalar", r.name),
            ));
        }
        if has(Property::Vector) && r.cols != UNIT_DIM {
            return Err(Diagnostic::new(
                DiagCode::KindMismatch,
                r.pos,
                format!("vector `{}` must have 1 column", r.name),
            ));
        }
        if has(Property::Scalar) && (r.rows != UNIT_DIM || r.cols != UNIT_DIM) {
            return Err(Diagnostic::new(DiagCode::KindMismatch, r.pos, format!("scalar `{}` must be 1 x 1", r.name)));
        }
        if declared.is_empty() {
            props.insert(Property::Matrix);
        }
        close_properties(&mut props);
        out.push(Operand {
            name: r.name.clone(),
            properties: props,
            rows: SymbolicSize::full(&r.rows),
            cols: SymbolicSize::full(&r.cols),
        });
    }
    Ok(out)
}

fn validate_roles(ops: &[Operand], raw: &[RawOperand]) -> Result<(), Diagnostic> {
    if !ops.iter().any(|o| o.is_output()) {
        return Err(Diagnostic::new(
            DiagCode::NoOutputOperand,
            raw.first().map(|r| r.pos).unwrap_or_default(),
            "no operand is marked Output",
        ));
    }
    if !ops.iter().any(|o| o.is_input()) {
        return Err(Diagnostic::new(
            DiagCode::NoInputOperand,
            raw.first().map(|r| r.pos).unwrap_or_default(),
            "no operand is marked Input",
        ));
    }
    Ok(())
}

type ParsedEquation = (Equation, Pos, Vec<(String, Pos)>);

fn check_declared(spec: &OperationSpec, equations: &[ParsedEquation]) -> Result<(), Diagnostic> {
    for (_, _, refs) in equations {
        for (name, rpos) in refs {
            if spec.operand(name).is_none() {
                return Err(Diagnostic::new(
                    DiagCode::UndeclaredOperand,
                    *rpos,
                    format!("undeclared operand `{name}`"),
                ));
            }
        }
    }
    Ok(())
}

fn validate_postcondition(spec: &OperationSpec, equations: &[ParsedEquation], post_pos: Pos) -> Result<(), Diagnostic> {
    if equations.is_empty() {
        return Err(Diagnostic::new(DiagCode::EmptyPostcondition, post_pos, "postcondition has no equations"));
    }
    let env = spec.whole_dims();
    for (eq, pos, refs) in equations {
        if !refs.iter().any(|(n, _)| spec.operand(n).is_some_and(|o| o.is_output())) {
            return Err(Diagnostic::new(
                DiagCode::EquationWithoutOutput,
                *pos,
                format!("equation `{eq}` references no Output operand"),
            ));
        }
        let dims = |e: &Expr| {
            infer_dims(e, &env).map_err(|err| {
                let msg = match err {
                    ExprError::DimensionMismatch { term, detail } => {
                        format!("dimension mismatch in `{term}`: {detail}")
                    }
                    other => other.to_string(),
                };
                Diagnostic::new(DiagCode::DimensionMismatch, *pos, msg)
            })
        };
        let l = dims(&eq.lhs)?;
        let r = dims(&eq.rhs)?;
        if let (Some(l), Some(r)) = (&l, &r) {
            if l != r {
                return Err(Diagnostic::new(
                    DiagCode::DimensionMismatch,
                    *pos,
                    format!("sides of `{eq}` have sizes {} x {} and {} x {}", l.0, l.1, r.0, r.1),
                ));
            }
        }
    }
    Ok(())
}

/// Renders `spec` in the `.clk` format; `parse_spec` reads it back to a
/// structurally equal description.
pub fn render_spec(spec: &OperationSpec) -> String {
    let mut s = format!("operation {} {{\n", spec.name);
    for o in &spec.operands {
        let props: Vec<&str> = o.properties.iter().map(|p| p.name()).collect();
        s.push_str(&format!("  operand {} : {} x {} [{}];\n", o.name, o.rows.base, o.cols.base, props.join(", ")));
    }
    s.push_str("  postcondition {\n");
    for eq in &spec.postcondition {
        s.push_str(&format!("    {} = {};\n", render_source(&eq.lhs), render_source(&eq.rhs)));
    }
    s.push_str("  }\n}\n");
    s
}

fn render_source(e: &Expr) -> String {
    match e {
        Expr::Ref(r) => r.name.clone(),
        Expr::Zero | Expr::Identity | Expr::Apply { .. } => e.text(),
        Expr::Plus(xs) => {
            let mut s = String::new();
            for (i, x) in xs.iter().enumerate() {
                match x {
                    Expr::Neg(inner) => {
                        s.push_str(if i == 0 { "-" } else { " - " });
                        s.push_str(&render_source_factor(inner));
                    }
                    _ => {
                        if i > 0 {
                            s.push_str(" + ");
                        }
                        s.push_str(&render_source(x));
                    }
                }
            }
            s
        }
        Expr::Times(xs) => xs.iter().map(render_source_factor).collect::<Vec<_>>().join(" * "),
        Expr::Neg(x) => format!("-{}", render_source_factor(x)),
        Expr::Transpose(x) => format!("{}^T", render_source_atom(x)),
        Expr::Inverse(x) => format!("{}^-1", render_source_atom(x)),
    }
}

fn render_source_factor(e: &Expr) -> String {
    match e {
        Expr::Plus(_) | Expr::Neg(_) => format!("({})", render_source(e)),
        _ => render_source(e),
    }
}

fn render_source_atom(e: &Expr) -> String {
    match e {
        Expr::Ref(_) => render_source(e),
        _ => format!("({})", render_source(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LU: &str = include_str!("../../../corpus/lu.clk");
    const SYLV: &str = include_str!("../../../corpus/coupled_sylvester.clk");

    #[test]
    fn parses_lu() {
        let spec = parse_spec(LU).unwrap();
        assert_eq!(spec.name, "LU");
        let l = spec.operand("L").unwrap();
        for p in [Property::Output, Property::LowerTriangular, Property::UnitDiagonal] {
            assert!(l.has(p));
        }
        assert!(spec.operand("U").unwrap().has(Property::UpperTriangular));
        let a = spec.operand("A").unwrap();
        assert!(a.has(Property::Input) && a.has(Property::ExistsLU));
        assert_eq!(spec.postcondition.len(), 1);
        assert_eq!(spec.postcondition[0].text(), "L U = A");
    }

    #[test]
    fn parses_coupled_sylvester() {
        let spec = parse_spec(SYLV).unwrap();
        assert_eq!(spec.operands.len(), 8);
        let eqs: Vec<String> = spec.postcondition.iter().map(|e| e.text()).collect();
        assert_eq!(eqs, vec!["A X + Y B = C", "D X + Y E = F"]);
    }

    #[test]
    fn round_trips() {
        for text in [LU, SYLV] {
            let spec = parse_spec(text).unwrap();
            let again = parse_spec(&render_spec(&spec)).unwrap();
            assert!(spec.structurally_equal(&again));
            assert_eq!(render_spec(&spec), render_spec(&again));
        }
    }

    fn code_of(text: &str) -> DiagCode {
        parse_spec(text).unwrap_err().code
    }

    #[test]
    fn undeclared_operand() {
        let text = "operation T { operand X : m x m [Output]; postcondition { X = A; } }";
        let err = parse_spec(text).unwrap_err();
        assert_eq!(err.code, DiagCode::UndeclaredOperand);
        assert!(err.message.contains("undeclared operand"));
        assert_eq!((err.line, err.col), (1, 63));
    }

    #[test]
    fn every_violation_has_its_own_code() {
        let cases = [
            ("operation T { operand X : m x m [Output] postcondition { X = X; } }", DiagCode::Syntax),
            ("operation T { operand X : m x m [Output, Fancy]; postcondition { X = X; } }", DiagCode::UnknownProperty),
            ("operation T { operand X : m x m [Output]; operand X : m x m [Input]; postcondition { X = X; } }", DiagCode::DuplicateOperand),
            ("operation T { operand X : m x n [Output]; operand A : n x m [Input]; postcondition { X = A; } }", DiagCode::DimensionMismatch),
            ("operation T { operand X : m x m [Output]; operand A : m x m [Input]; postcondition { } }", DiagCode::EmptyPostcondition),
            ("operation T { operand A : m x m [Input]; postcondition { A = A; } }", DiagCode::NoOutputOperand),
            ("operation T { operand X : m x m [Output]; postcondition { X = X; } }", DiagCode::NoInputOperand),
            ("operation T { operand X : m x m [Output]; operand A : m x m [Input]; postcondition { X = A; A = A; } }", DiagCode::EquationWithoutOutput),
            ("operation T { operand X : m x m [Output, Input]; postcondition { X = X; } }", DiagCode::ConflictingRole),
            ("operation T { operand X : m x m [Matrix]; postcondition { X = X; } }", DiagCode::MissingRole),
            ("operation T { operand X : m x n [Output, LowerTriangular]; postcondition { X = X; } }", DiagCode::NonSquareStructure),
            ("operation T { operand X : m x m [Output, Zero, Identity]; postcondition { X = X; } }", DiagCode::ZeroAndIdentity),
            ("operation T { operand X : m x m [Output, Symmetric]; postcondition { X = X; } }", DiagCode::UnsupportedProperty),
            ("operation T { operand X : m x n [Output, Vector]; postcondition { X = X; } }", DiagCode::KindMismatch),
        ];
        let mut codes = BTreeSet::new();
        for (text, expected) in cases {
            assert_eq!(code_of(text), expected, "{text}");
            codes.insert(expected.code());
        }
        assert_eq!(codes.len(), cases.len());
    }

    #[test]
    fn diagnostic_format() {
        let err = parse_spec("operation T {\n  operand X : m x m [Output, Fancy];\n}").unwrap_err();
        assert_eq!(err.with_file("t.clk"), "t.clk:2:30: E101: unknown property `Fancy`");
    }

    #[test]
    fn postfix_operators_and_comments() {
        let text = "# comment\noperation T {\n  operand X : m x m [Output]; // trailing\n  operand A : m x m [Input, NonSingular];\n  postcondition { X = (A^T)^-1 - -A; }\n}";
        let spec = parse_spec(text).unwrap();
        let back = parse_spec(&render_spec(&spec)).unwrap();
        assert!(spec.structurally_equal(&back));
    }
}
