//! Symbolic matrix expressions.
//!
//! Expressions are immutable trees over operand references. [`normalize`]
//! brings a tree into the canonical form every other module relies on:
//! sums and products are flattened, negations are pulled to the front of
//! products, literal zeros and identities are absorbed, and the addends of a
//! sum are sorted so that two sums with the same terms compare equal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::Quadrant;

/// Operand properties as they appear in an operation description.
///
/// `Input`/`Output` double as the known/unknown markers of the derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Property {
    Input,
    Output,
    Matrix,
    Vector,
    Scalar,
    LowerTriangular,
    UpperTriangular,
    UnitDiagonal,
    NonSingular,
    ExistsLU,
    Zero,
    Identity,
}

impl Property {
    pub const ALL: [Property; 12] = [
        Property::Input,
        Property::Output,
        Property::Matrix,
        Property::Vector,
        Property::Scalar,
        Property::LowerTriangular,
        Property::UpperTriangular,
        Property::UnitDiagonal,
        Property::NonSingular,
        Property::ExistsLU,
        Property::Zero,
        Property::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Input => "Input",
            Property::Output => "Output",
            Property::Matrix => "Matrix",
            Property::Vector => "Vector",
            Property::Scalar => "Scalar",
            Property::LowerTriangular => "LowerTriangular",
            Property::UpperTriangular => "UpperTriangular",
            Property::UnitDiagonal => "UnitDiagonal",
            Property::NonSingular => "NonSingular",
            Property::ExistsLU => "ExistsLU",
            Property::Zero => "Zero",
            Property::Identity => "Identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Property> {
        Property::ALL.iter().copied().find(|p| p.name() == name)
    }

    /// Properties that describe the entries of a matrix and can be checked
    /// exactly, as opposed to existence claims such as `ExistsLU`.
    pub fn is_structural(self) -> bool {
        matches!(
            self,
            Property::LowerTriangular
                | Property::UpperTriangular
                | Property::UnitDiagonal
                | Property::Zero
                | Property::Identity
        )
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type PropertySet = BTreeSet<Property>;

/// Applies the derived closure rules (`UnitDiagonal` implies `NonSingular`).
pub fn close_properties(props: &mut PropertySet) {
    if props.contains(&Property::UnitDiagonal) {
        props.insert(Property::NonSingular);
    }
}

/// The base dimension name used for unit (non-partitionable) extents.
pub const UNIT_DIM: &str = "1";

/// Which side of a split a block dimension refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Half {
    Leading,
    Trailing,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Extent {
    Zero,
    /// The leading (`k`) or trailing (`base - k`) part of a split.
    Split {
        var: String,
        half: Half,
    },
    Full,
}

/// A symbolic dimension: a base size such as `m` and how much of it a block
/// covers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SymbolicSize {
    pub base: String,
    pub extent: Extent,
}

impl SymbolicSize {
    pub fn full(base: impl Into<String>) -> Self {
        SymbolicSize { base: base.into(), extent: Extent::Full }
    }

    pub fn split(base: impl Into<String>, var: impl Into<String>, half: Half) -> Self {
        SymbolicSize { base: base.into(), extent: Extent::Split { var: var.into(), half } }
    }

    pub fn is_unit(&self) -> bool {
        self.base == UNIT_DIM
    }

    /// Position in the partial order `Zero <= Split <= Full`.
    pub fn rank(&self) -> u8 {
        match self.extent {
            Extent::Zero => 0,
            Extent::Split { .. } => 1,
            Extent::Full => 2,
        }
    }

    /// Partial order used by boundary rewriting; sizes over different bases
    /// or different split variables are incomparable.
    pub fn partial_cmp_extent(&self, other: &SymbolicSize) -> Option<std::cmp::Ordering> {
        if self.base != other.base {
            return None;
        }
        match (&self.extent, &other.extent) {
            (Extent::Split { var: a, half: ha }, Extent::Split { var: b, half: hb }) => {
                (a == b && ha == hb).then_some(std::cmp::Ordering::Equal)
            }
            _ => Some(self.rank().cmp(&other.rank())),
        }
    }
}

impl fmt::Display for SymbolicSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.extent {
            Extent::Zero => write!(f, "0"),
            Extent::Full => write!(f, "{}", self.base),
            Extent::Split { var, half: Half::Leading } => write!(f, "{var}"),
            Extent::Split { var, half: Half::Trailing } => write!(f, "{}-{var}", self.base),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operand {
    pub name: String,
    pub properties: PropertySet,
    pub rows: SymbolicSize,
    pub cols: SymbolicSize,
}

impl Operand {
    pub fn new(name: impl Into<String>, rows: &str, cols: &str, props: &[Property]) -> Self {
        let mut properties: PropertySet = props.iter().copied().collect();
        close_properties(&mut properties);
        Operand { name: name.into(), properties, rows: SymbolicSize::full(rows), cols: SymbolicSize::full(cols) }
    }

    pub fn has(&self, p: Property) -> bool {
        self.properties.contains(&p)
    }

    pub fn is_output(&self) -> bool {
        self.has(Property::Output)
    }

    pub fn is_input(&self) -> bool {
        self.has(Property::Input)
    }

    pub fn is_square(&self) -> bool {
        self.rows.base == self.cols.base
    }
}

/// A reference to an operand or to one of its quadrants.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpRef {
    pub name: String,
    pub quadrant: Option<Quadrant>,
}

impl OpRef {
    pub fn whole(name: impl Into<String>) -> Self {
        OpRef { name: name.into(), quadrant: None }
    }

    pub fn quad(name: impl Into<String>, q: Quadrant) -> Self {
        OpRef { name: name.into(), quadrant: Some(q) }
    }

    pub fn sexpr(&self) -> String {
        match self.quadrant {
            Some(q) => format!("{}@{}", self.name, q),
            None => self.name.clone(),
        }
    }
}

impl fmt::Display for OpRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.quadrant {
            Some(Quadrant::Whole) | None => write!(f, "{}", self.name),
            Some(q) => write!(f, "{}_{}", self.name, q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Ref(OpRef),
    /// Literal zero block; its shape is taken from context.
    Zero,
    /// Literal identity block; its shape is taken from context.
    Identity,
    Plus(Vec<Expr>),
    Times(Vec<Expr>),
    Neg(Box<Expr>),
    Transpose(Box<Expr>),
    Inverse(Box<Expr>),
    /// Application of a named operation returning `outputs` results.
    Apply {
        op: String,
        args: Vec<Expr>,
        outputs: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("dimension mismatch in `{term}`: {detail}")]
    DimensionMismatch { term: String, detail: String },
    #[error("unknown operand `{0}`")]
    UnknownOperand(String),
}

impl Expr {
    pub fn r(name: &str) -> Expr {
        Expr::Ref(OpRef::whole(name))
    }

    pub fn q(name: &str, q: Quadrant) -> Expr {
        Expr::Ref(OpRef::quad(name, q))
    }

    pub fn plus(xs: Vec<Expr>) -> Expr {
        Expr::Plus(xs)
    }

    pub fn times(xs: Vec<Expr>) -> Expr {
        Expr::Times(xs)
    }

    pub fn neg(x: Expr) -> Expr {
        Expr::Neg(Box::new(x))
    }

    pub fn transpose(x: Expr) -> Expr {
        Expr::Transpose(Box::new(x))
    }

    pub fn inverse(x: Expr) -> Expr {
        Expr::Inverse(Box::new(x))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Plus(vec![a, Expr::neg(b)])
    }

    pub fn as_ref(&self) -> Option<&OpRef> {
        match self {
            Expr::Ref(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Zero)
    }

    /// Stable s-expression serialization, used for ordering, hashing and
    /// golden files.
    pub fn sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s);
        s
    }

    fn write_sexpr(&self, out: &mut String) {
        let list = |out: &mut String, head: &str, xs: &[Expr]| {
            out.push('(');
            out.push_str(head);
            for x in xs {
                out.push(' ');
                x.write_sexpr(out);
            }
            out.push(')');
        };
        match self {
            Expr::Ref(r) => out.push_str(&r.sexpr()),
            Expr::Zero => out.push('0'),
            Expr::Identity => out.push('I'),
            Expr::Plus(xs) => list(out, "+", xs),
            Expr::Times(xs) => list(out, "*", xs),
            Expr::Neg(x) => list(out, "-", std::slice::from_ref(x)),
            Expr::Transpose(x) => list(out, "T", std::slice::from_ref(x)),
            Expr::Inverse(x) => list(out, "inv", std::slice::from_ref(x)),
            Expr::Apply { op, args, outputs } => list(out, &format!("apply {op} {outputs}"), args),
        }
    }

    /// Plain-text rendering, e.g. `A_BR - L_BL U_TR`.
    pub fn text(&self) -> String {
        self.render(&TextStyle)
    }

    /// LaTeX rendering, e.g. `A_{BR} - L_{BL} U_{TR}`.
    pub fn latex(&self) -> String {
        self.render(&LatexStyle)
    }

    fn render(&self, st: &dyn Style) -> String {
        match self {
            Expr::Ref(r) => st.operand(r),
            Expr::Zero => "0".into(),
            Expr::Identity => st.identity(),
            Expr::Plus(xs) => {
                let mut s = String::new();
                for (i, x) in xs.iter().enumerate() {
                    match x {
                        Expr::Neg(inner) => {
                            s.push_str(if i == 0 { "-" } else { " - " });
                            s.push_str(&inner.render_operand_of_sum(st));
                        }
                        _ => {
                            if i > 0 {
                                s.push_str(" + ");
                            }
                            s.push_str(&x.render(st));
                        }
                    }
                }
                s
            }
            Expr::Times(xs) => xs
                .iter()
                .map(|x| match x {
                    Expr::Plus(_) | Expr::Neg(_) => format!("({})", x.render(st)),
                    _ => x.render(st),
                })
                .collect::<Vec<_>>()
                .join(" "),
            Expr::Neg(x) => format!("-{}", x.render_operand_of_sum(st)),
            Expr::Transpose(x) => st.postfix(&x.render_atom(st), "T"),
            Expr::Inverse(x) => st.postfix(&x.render_atom(st), "-1"),
            Expr::Apply { op, args, .. } => {
                let args: Vec<String> = args.iter().map(|a| a.render(st)).collect();
                format!("{}({})", st.op_name(op), args.join(", "))
            }
        }
    }

    fn render_operand_of_sum(&self, st: &dyn Style) -> String {
        match self {
            Expr::Plus(_) | Expr::Neg(_) => format!("({})", self.render(st)),
            _ => self.render(st),
        }
    }

    fn render_atom(&self, st: &dyn Style) -> String {
        match self {
            Expr::Ref(_) | Expr::Zero | Expr::Identity | Expr::Apply { .. } => self.render(st),
            _ => format!("({})", self.render(st)),
        }
    }

    /// Visits every subexpression in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Plus(xs) | Expr::Times(xs) | Expr::Apply { args: xs, .. } => {
                for x in xs {
                    x.walk(f);
                }
            }
            Expr::Neg(x) | Expr::Transpose(x) | Expr::Inverse(x) => x.walk(f),
            Expr::Ref(_) | Expr::Zero | Expr::Identity => {}
        }
    }

    /// Rebuilds the tree bottom-up through `f`.
    pub fn map(&self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let e = match self {
            Expr::Plus(xs) => Expr::Plus(xs.iter().map(|x| x.map(f)).collect()),
            Expr::Times(xs) => Expr::Times(xs.iter().map(|x| x.map(f)).collect()),
            Expr::Apply { op, args, outputs } => {
                Expr::Apply { op: op.clone(), args: args.iter().map(|x| x.map(f)).collect(), outputs: *outputs }
            }
            Expr::Neg(x) => Expr::neg(x.map(f)),
            Expr::Transpose(x) => Expr::transpose(x.map(f)),
            Expr::Inverse(x) => Expr::inverse(x.map(f)),
            leaf => leaf.clone(),
        };
        f(e)
    }
}

trait Style {
    fn operand(&self, r: &OpRef) -> String;
    fn identity(&self) -> String;
    fn postfix(&self, base: &str, sup: &str) -> String;
    fn op_name(&self, op: &str) -> String;
}

struct TextStyle;

impl Style for TextStyle {
    fn operand(&self, r: &OpRef) -> String {
        r.to_string()
    }
    fn identity(&self) -> String {
        "I".into()
    }
    fn postfix(&self, base: &str, sup: &str) -> String {
        format!("{base}^{sup}")
    }
    fn op_name(&self, op: &str) -> String {
        op.to_string()
    }
}

struct LatexStyle;

const GREEK: [&str; 12] =
    ["Psi", "Phi", "Omega", "Gamma", "Delta", "Lambda", "Sigma", "Theta", "Pi", "Xi", "Upsilon", "Chi"];

impl Style for LatexStyle {
    fn operand(&self, r: &OpRef) -> String {
        match r.quadrant {
            Some(Quadrant::Whole) | None => r.name.clone(),
            Some(q) => format!("{}_{{{}}}", r.name, q),
        }
    }
    fn identity(&self) -> String {
        "I".into()
    }
    fn postfix(&self, base: &str, sup: &str) -> String {
        match sup {
            "T" => format!("{base}^{{T}}"),
            _ => format!("{base}^{{{sup}}}"),
        }
    }
    fn op_name(&self, op: &str) -> String {
        if GREEK.contains(&op) {
            format!("\\{op}")
        } else {
            op.to_string()
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

/// Sort key for addends: positive terms before negated ones, then by the
/// serialization of the unsigned term.
fn addend_key(e: &Expr) -> (bool, String) {
    match e {
        Expr::Neg(x) => (true, x.sexpr()),
        _ => (false, e.sexpr()),
    }
}

/// Returns the canonical form of `e`. Idempotent.
pub fn normalize(e: &Expr) -> Expr {
    match e {
        Expr::Ref(_) | Expr::Zero | Expr::Identity => e.clone(),
        Expr::Neg(x) => negate(normalize(x)),
        Expr::Plus(xs) => {
            let mut terms = Vec::new();
            for x in xs {
                match normalize(x) {
                    Expr::Zero => {}
                    Expr::Plus(inner) => terms.extend(inner),
                    t => terms.push(t),
                }
            }
            cancel_addends(&mut terms);
            terms.sort_by_cached_key(addend_key);
            match terms.len() {
                0 => Expr::Zero,
                1 => terms.pop().unwrap(),
                _ => Expr::Plus(terms),
            }
        }
        Expr::Times(xs) => {
            let mut negative = false;
            let mut factors = Vec::new();
            for x in xs {
                let mut f = normalize(x);
                if let Expr::Neg(inner) = f {
                    negative = !negative;
                    f = *inner;
                }
                match f {
                    Expr::Zero => return Expr::Zero,
                    Expr::Identity => {}
                    Expr::Times(inner) => factors.extend(inner),
                    f => factors.push(f),
                }
            }
            let prod = match factors.len() {
                0 => Expr::Identity,
                1 => factors.pop().unwrap(),
                _ => Expr::Times(factors),
            };
            if negative {
                negate(prod)
            } else {
                prod
            }
        }
        Expr::Transpose(x) => transpose_of(normalize(x)),
        Expr::Inverse(x) => match normalize(x) {
            Expr::Inverse(inner) => *inner,
            Expr::Identity => Expr::Identity,
            Expr::Neg(inner) => negate(Expr::inverse(*inner)),
            other => Expr::inverse(other),
        },
        Expr::Apply { op, args, outputs } => {
            Expr::Apply { op: op.clone(), args: args.iter().map(normalize).collect(), outputs: *outputs }
        }
    }
}

/// Negation of an already-normalized expression.
fn negate(e: Expr) -> Expr {
    match e {
        Expr::Zero => Expr::Zero,
        Expr::Neg(x) => *x,
        Expr::Plus(xs) => normalize(&Expr::Plus(xs.into_iter().map(Expr::neg).collect())),
        other => Expr::neg(other),
    }
}

/// Transpose of an already-normalized expression.
fn transpose_of(e: Expr) -> Expr {
    match e {
        Expr::Zero => Expr::Zero,
        Expr::Identity => Expr::Identity,
        Expr::Transpose(x) => *x,
        Expr::Neg(x) => negate(transpose_of(*x)),
        Expr::Plus(xs) => normalize(&Expr::Plus(xs.into_iter().map(transpose_of).collect())),
        Expr::Times(xs) => normalize(&Expr::Times(xs.into_iter().rev().map(transpose_of).collect())),
        other => Expr::transpose(other),
    }
}

/// Removes pairs `t`, `-t` from a list of normalized addends.
fn cancel_addends(terms: &mut Vec<Expr>) {
    let mut i = 0;
    while i < terms.len() {
        let opposite = negate(terms[i].clone());
        if let Some(j) = terms.iter().enumerate().position(|(j, t)| j != i && *t == opposite) {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            terms.remove(b);
            terms.remove(a);
            i = 0;
        } else {
            i += 1;
        }
    }
}

/// Equality modulo addend order; products stay ordered.
pub fn structural_equal(a: &Expr, b: &Expr) -> bool {
    normalize(a) == normalize(b)
}

/// Every operand reference occurring in `e`.
pub fn operands_of(e: &Expr) -> BTreeSet<OpRef> {
    let mut out = BTreeSet::new();
    e.walk(&mut |x| {
        if let Expr::Ref(r) = x {
            out.insert(r.clone());
        }
    });
    out
}

/// Operand references in order of first appearance.
pub fn operands_in_order(e: &Expr) -> Vec<OpRef> {
    let mut out: Vec<OpRef> = Vec::new();
    e.walk(&mut |x| {
        if let Expr::Ref(r) = x {
            if !out.contains(r) {
                out.push(r.clone());
            }
        }
    });
    out
}

/// Replaces references according to `bindings` and normalizes the result.
pub fn substitute(e: &Expr, bindings: &BTreeMap<OpRef, Expr>) -> Expr {
    let replaced = e.map(&mut |x| match &x {
        Expr::Ref(r) => bindings.get(r).cloned().unwrap_or(x),
        _ => x,
    });
    normalize(&replaced)
}

/// Lookup of the symbolic dimensions of operand references.
pub trait DimEnv {
    fn dims(&self, r: &OpRef) -> Option<(SymbolicSize, SymbolicSize)>;
}

impl DimEnv for BTreeMap<OpRef, (SymbolicSize, SymbolicSize)> {
    fn dims(&self, r: &OpRef) -> Option<(SymbolicSize, SymbolicSize)> {
        self.get(r).cloned()
    }
}

pub type Dims = (SymbolicSize, SymbolicSize);

/// Infers the dimensions of `e`. `Ok(None)` means the expression is a
/// shape-polymorphic literal (zero or identity). `Apply` nodes are opaque
/// and also yield `None`.
pub fn infer_dims(e: &Expr, env: &dyn DimEnv) -> Result<Option<Dims>, ExprError> {
    let mismatch = |detail: String| ExprError::DimensionMismatch { term: e.text(), detail };
    match e {
        Expr::Ref(r) => env.dims(r).map(Some).ok_or_else(|| ExprError::UnknownOperand(r.to_string())),
        Expr::Zero | Expr::Identity | Expr::Apply { .. } => Ok(None),
        Expr::Neg(x) => infer_dims(x, env),
        Expr::Transpose(x) => Ok(infer_dims(x, env)?.map(|(r, c)| (c, r))),
        Expr::Inverse(x) => {
            let d = infer_dims(x, env)?;
            if let Some((r, c)) = &d {
                if r != c {
                    return Err(mismatch(format!("inverse of non-square {r} x {c} block")));
                }
            }
            Ok(d)
        }
        Expr::Plus(xs) => {
            let mut acc: Option<Dims> = None;
            for x in xs {
                if let Some(d) = infer_dims(x, env)? {
                    match &acc {
                        None => acc = Some(d),
                        Some(a) if *a == d => {}
                        Some(a) => {
                            return Err(mismatch(format!("addends of size {} x {} and {} x {}", a.0, a.1, d.0, d.1)))
                        }
                    }
                }
            }
            Ok(acc)
        }
        Expr::Times(xs) => {
            let mut acc: Option<Dims> = None;
            for x in xs {
                let Some(d) = infer_dims(x, env)? else { continue };
                acc = Some(match acc {
                    None => d,
                    Some((r, c)) => {
                        if c != d.0 {
                            return Err(mismatch(format!("inner dimensions {} and {} differ", c, d.0)));
                        }
                        (r, d.1)
                    }
                });
            }
            Ok(acc)
        }
    }
}

/// An implicit equation `lhs = rhs` (as in a postcondition).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Equation {
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Equation {
    pub fn new(lhs: Expr, rhs: Expr) -> Self {
        Equation { lhs, rhs }
    }

    /// Canonical `lhs - rhs`.
    pub fn difference(&self) -> Expr {
        normalize(&Expr::sub(self.lhs.clone(), self.rhs.clone()))
    }

    pub fn normalized(&self) -> Equation {
        Equation { lhs: normalize(&self.lhs), rhs: normalize(&self.rhs) }
    }

    /// Same equation up to moving terms across and flipping both sides.
    pub fn equivalent(&self, other: &Equation) -> bool {
        let a = self.difference();
        let b = other.difference();
        a == b || a == normalize(&Expr::neg(b))
    }

    pub fn operands(&self) -> BTreeSet<OpRef> {
        let mut s = operands_of(&self.lhs);
        s.extend(operands_of(&self.rhs));
        s
    }

    pub fn text(&self) -> String {
        format!("{} = {}", self.lhs.text(), self.rhs.text())
    }

    pub fn latex(&self) -> String {
        format!("{} = {}", self.lhs.latex(), self.rhs.latex())
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

/// An equation in solved form: the outputs on the left, an explicit
/// computation on the right. Multi-output forms carry an `Apply` rhs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SolvedEquation {
    pub outputs: Vec<OpRef>,
    pub rhs: Expr,
}

impl SolvedEquation {
    pub fn new(outputs: Vec<OpRef>, rhs: Expr) -> Self {
        SolvedEquation { outputs, rhs: normalize(&rhs) }
    }

    pub fn single(output: OpRef, rhs: Expr) -> Self {
        Self::new(vec![output], rhs)
    }

    pub fn lhs_text(&self) -> String {
        lhs_render(&self.outputs, |r| r.to_string(), "{", "}")
    }

    pub fn text(&self) -> String {
        format!("{} = {}", self.lhs_text(), self.rhs.text())
    }

    pub fn latex(&self) -> String {
        let lhs = lhs_render(&self.outputs, |r| Expr::Ref(r.clone()).latex(), "\\{ ", " \\}");
        format!("{} = {}", lhs, self.rhs.latex())
    }

    pub fn sexpr(&self) -> String {
        let outs: Vec<String> = self.outputs.iter().map(OpRef::sexpr).collect();
        format!("(= ({}) {})", outs.join(" "), self.rhs.sexpr())
    }

    /// The implicit equation for a single-output form.
    pub fn as_equation(&self) -> Option<Equation> {
        match self.outputs.as_slice() {
            [o] if !matches!(self.rhs, Expr::Apply { .. }) => {
                Some(Equation::new(Expr::Ref(o.clone()), self.rhs.clone()))
            }
            _ => None,
        }
    }
}

fn lhs_render(outs: &[OpRef], f: impl Fn(&OpRef) -> String, open: &str, close: &str) -> String {
    match outs {
        [one] => f(one),
        many => {
            let parts: Vec<String> = many.iter().map(f).collect();
            format!("{open}{}{close}", parts.join(", "))
        }
    }
}

impl fmt::Display for SolvedEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}
