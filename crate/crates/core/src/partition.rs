//! Partitioning rules: which block shapes each operand admits, which
//! properties the blocks inherit, and which combinations of rules leave the
//! postcondition dimension-conformal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Dims, Equation, Expr, Extent, Half, OpRef, Operand, Property, PropertySet, SymbolicSize};
use crate::opspec::OperationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    TL,
    TR,
    BL,
    BR,
    T,
    B,
    L,
    R,
    Whole,
}

impl Quadrant {
    pub fn name(self) -> &'static str {
        match self {
            Quadrant::TL => "TL",
            Quadrant::TR => "TR",
            Quadrant::BL => "BL",
            Quadrant::BR => "BR",
            Quadrant::T => "T",
            Quadrant::B => "B",
            Quadrant::L => "L",
            Quadrant::R => "R",
            Quadrant::Whole => "Whole",
        }
    }

    /// Row half for quadrants of a row-split block, `None` otherwise.
    pub fn row_half(self) -> Option<Half> {
        match self {
            Quadrant::TL | Quadrant::TR | Quadrant::T => Some(Half::Leading),
            Quadrant::BL | Quadrant::BR | Quadrant::B => Some(Half::Trailing),
            _ => None,
        }
    }

    pub fn col_half(self) -> Option<Half> {
        match self {
            Quadrant::TL | Quadrant::BL | Quadrant::L => Some(Half::Leading),
            Quadrant::TR | Quadrant::BR | Quadrant::R => Some(Half::Trailing),
            _ => None,
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Shape {
    OneByOne,
    OneByTwo,
    TwoByOne,
    TwoByTwo,
}

impl Shape {
    pub fn from_grid(rows: usize, cols: usize) -> Shape {
        match (rows, cols) {
            (1, 1) => Shape::OneByOne,
            (1, 2) => Shape::OneByTwo,
            (2, 1) => Shape::TwoByOne,
            (2, 2) => Shape::TwoByTwo,
            _ => panic!("unsupported block grid {rows}x{cols}"),
        }
    }

    pub fn grid(self) -> (usize, usize) {
        match self {
            Shape::OneByOne => (1, 1),
            Shape::OneByTwo => (1, 2),
            Shape::TwoByOne => (2, 1),
            Shape::TwoByTwo => (2, 2),
        }
    }

    pub fn splits_rows(self) -> bool {
        self.grid().0 == 2
    }

    pub fn splits_cols(self) -> bool {
        self.grid().1 == 2
    }

    /// Quadrants in row-major order.
    pub fn quadrants(self) -> &'static [Quadrant] {
        match self {
            Shape::OneByOne => &[Quadrant::Whole],
            Shape::OneByTwo => &[Quadrant::L, Quadrant::R],
            Shape::TwoByOne => &[Quadrant::T, Quadrant::B],
            Shape::TwoByTwo => &[Quadrant::TL, Quadrant::TR, Quadrant::BL, Quadrant::BR],
        }
    }

    pub fn quadrant_at(self, i: usize, j: usize) -> Quadrant {
        let (_, cols) = self.grid();
        self.quadrants()[i * cols + j]
    }

    pub fn label(self) -> &'static str {
        match self {
            Shape::OneByOne => "1x1",
            Shape::OneByTwo => "1x2",
            Shape::TwoByOne => "2x1",
            Shape::TwoByTwo => "2x2",
        }
    }

    fn sort_rank(self) -> u8 {
        match self {
            Shape::OneByTwo => 0,
            Shape::TwoByOne => 1,
            Shape::TwoByTwo => 2,
            Shape::OneByOne => 3,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Traversal {
    TLtoBR,
    TtoB,
    LtoR,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRule {
    pub operand: String,
    pub shape: Shape,
    pub square_tl: bool,
    /// Split variable of the row dimension, once assigned by conformality.
    pub row_var: Option<String>,
    pub col_var: Option<String>,
    pub quadrant_properties: BTreeMap<Quadrant, PropertySet>,
}

impl PartitionRule {
    fn new(op: &Operand, shape: Shape, square_tl: bool) -> Self {
        PartitionRule {
            operand: op.name.clone(),
            shape,
            square_tl,
            row_var: None,
            col_var: None,
            quadrant_properties: quadrant_properties(op, shape, square_tl),
        }
    }

    pub fn quadrants(&self) -> impl Iterator<Item = Quadrant> + '_ {
        self.shape.quadrants().iter().copied()
    }

    /// Quadrants that are real sub-operands (not literal zero or identity).
    pub fn live_quadrants(&self) -> Vec<Quadrant> {
        self.quadrants()
            .filter(|q| {
                let p = &self.quadrant_properties[q];
                !p.contains(&Property::Zero) && !p.contains(&Property::Identity)
            })
            .collect()
    }
}

fn kind_of(op: &Operand) -> Property {
    [Property::Scalar, Property::Vector].into_iter().find(|p| op.has(*p)).unwrap_or(Property::Matrix)
}

/// Properties inherited by each quadrant of `op` under `shape`.
pub fn quadrant_properties(op: &Operand, shape: Shape, square_tl: bool) -> BTreeMap<Quadrant, PropertySet> {
    let mut out = BTreeMap::new();
    if shape == Shape::OneByOne {
        out.insert(Quadrant::Whole, op.properties.clone());
        return out;
    }
    let role = if op.is_output() { Property::Output } else { Property::Input };
    let base: PropertySet = [role, kind_of(op)].into_iter().collect();
    for &q in shape.quadrants() {
        out.insert(q, base.clone());
    }
    let zero = |out: &mut BTreeMap<Quadrant, PropertySet>, q| {
        let set = out.get_mut(&q).unwrap();
        set.insert(Property::Zero);
    };
    if op.has(Property::Zero) {
        for &q in shape.quadrants() {
            zero(&mut out, q);
        }
        return out;
    }
    if shape != Shape::TwoByTwo || !square_tl {
        return out;
    }
    let diagonal = [Quadrant::TL, Quadrant::BR];
    if op.has(Property::Identity) {
        for q in diagonal {
            out.get_mut(&q).unwrap().insert(Property::Identity);
        }
        zero(&mut out, Quadrant::TR);
        zero(&mut out, Quadrant::BL);
        return out;
    }
    for (tri, off) in [(Property::LowerTriangular, Quadrant::TR), (Property::UpperTriangular, Quadrant::BL)] {
        if op.has(tri) {
            for q in diagonal {
                let set = out.get_mut(&q).unwrap();
                set.insert(tri);
                for p in [Property::UnitDiagonal, Property::NonSingular] {
                    if op.has(p) {
                        set.insert(p);
                    }
                }
            }
            zero(&mut out, off);
        }
    }
    if op.has(Property::ExistsLU) {
        out.get_mut(&Quadrant::TL).unwrap().insert(Property::ExistsLU);
    }
    out
}

fn is_triangular_like(op: &Operand) -> bool {
    op.has(Property::LowerTriangular) || op.has(Property::UpperTriangular) || op.has(Property::Identity)
}

/// Structure-admissible partitioning rules for one operand.
pub fn admissible_shapes(op: &Operand) -> Vec<PartitionRule> {
    let candidates: Vec<(Shape, bool)> = if op.has(Property::Scalar) {
        vec![(Shape::OneByOne, false)]
    } else if op.has(Property::Vector) {
        vec![(Shape::TwoByOne, false), (Shape::OneByOne, false)]
    } else if is_triangular_like(op) {
        vec![(Shape::TwoByTwo, true), (Shape::OneByOne, false)]
    } else {
        vec![(Shape::TwoByTwo, false), (Shape::TwoByOne, false), (Shape::OneByTwo, false), (Shape::OneByOne, false)]
    };
    candidates
        .into_iter()
        .filter(|(s, _)| !(s.splits_rows() && op.rows.is_unit()) && !(s.splits_cols() && op.cols.is_unit()))
        .map(|(s, sq)| PartitionRule::new(op, s, sq))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitVar {
    pub name: String,
    pub base: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    /// One rule per operand, in declaration order.
    pub rules: Vec<PartitionRule>,
    pub traversal: Traversal,
    /// Block grid of the distributed postcondition.
    pub grid: Shape,
    pub split_vars: Vec<SplitVar>,
}

impl RuleSet {
    pub fn rule(&self, operand: &str) -> Option<&PartitionRule> {
        self.rules.iter().find(|r| r.operand == operand)
    }

    /// The block form of an operand: references to its quadrants, with
    /// zero and identity quadrants replaced by literals.
    pub fn block_of(&self, operand: &str) -> Blocks {
        let rule = self.rule(operand).expect("operand has a rule");
        let (rows, cols) = rule.shape.grid();
        let cells = rule
            .quadrants()
            .map(|q| {
                let props = &rule.quadrant_properties[&q];
                if props.contains(&Property::Zero) {
                    Expr::Zero
                } else if props.contains(&Property::Identity) {
                    Expr::Identity
                } else if q == Quadrant::Whole {
                    Expr::Ref(OpRef::whole(operand))
                } else {
                    Expr::Ref(OpRef::quad(operand, q))
                }
            })
            .collect();
        Blocks { rows, cols, cells }
    }

    /// Properties of a (sub-)operand reference.
    pub fn ref_properties(&self, spec: &OperationSpec, r: &OpRef) -> PropertySet {
        match r.quadrant {
            None | Some(Quadrant::Whole) => spec.operand(&r.name).map(|o| o.properties.clone()).unwrap_or_default(),
            Some(q) => {
                self.rule(&r.name).and_then(|rule| rule.quadrant_properties.get(&q).cloned()).unwrap_or_default()
            }
        }
    }

    /// Symbolic dimensions of a (sub-)operand reference.
    pub fn ref_dims(&self, spec: &OperationSpec, r: &OpRef) -> Option<Dims> {
        let op = spec.operand(&r.name)?;
        let q = match r.quadrant {
            None | Some(Quadrant::Whole) => return Some((op.rows.clone(), op.cols.clone())),
            Some(q) => q,
        };
        let rule = self.rule(&r.name)?;
        let dim = |size: &SymbolicSize, var: &Option<String>, half: Option<Half>| match (var, half) {
            (Some(v), Some(h)) => SymbolicSize::split(&size.base, v, h),
            _ => size.clone(),
        };
        Some((dim(&op.rows, &rule.row_var, q.row_half()), dim(&op.cols, &rule.col_var, q.col_half())))
    }

    /// Every live (sub-)operand reference of the partitioned operands.
    pub fn live_refs(&self, spec: &OperationSpec) -> Vec<OpRef> {
        let mut out = Vec::new();
        for op in &spec.operands {
            let rule = self.rule(&op.name).expect("operand has a rule");
            for q in rule.live_quadrants() {
                out.push(if q == Quadrant::Whole { OpRef::whole(&op.name) } else { OpRef::quad(&op.name, q) });
            }
        }
        out
    }

    /// Dedup/sort key: the multiset of (operand, shape, square-TL).
    pub fn key(&self) -> String {
        let mut parts: Vec<String> = self
            .rules
            .iter()
            .map(|r| format!("{}:{}{}", r.operand, r.shape, if r.square_tl { "s" } else { "" }))
            .collect();
        parts.sort();
        parts.join(",")
    }

    /// One-line summary such as `L 2x2 (square TL), U 2x2 (square TL), A 2x2 (square TL)`.
    pub fn summary(&self) -> String {
        self.rules
            .iter()
            .map(|r| format!("{} {}{}", r.operand, r.shape, if r.square_tl { " (square TL)" } else { "" }))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Unsplit,
    Split(usize),
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let p = self.0[i];
        if p == i {
            return i;
        }
        let r = self.find(p);
        self.0[i] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

struct Conformality<'a> {
    slots: BTreeMap<&'a str, (Slot, Slot)>,
    uf: UnionFind,
}

impl Conformality<'_> {
    fn unify(&mut self, a: Slot, b: Slot) -> bool {
        match (a, b) {
            (Slot::Unsplit, Slot::Unsplit) => true,
            (Slot::Split(i), Slot::Split(j)) => {
                self.uf.union(i, j);
                true
            }
            _ => false,
        }
    }

    fn infer(&mut self, e: &Expr) -> Result<Option<(Slot, Slot)>, ()> {
        match e {
            Expr::Ref(r) => Ok(self.slots.get(r.name.as_str()).copied()),
            Expr::Zero | Expr::Identity | Expr::Apply { .. } => Ok(None),
            Expr::Neg(x) => self.infer(x),
            Expr::Transpose(x) => Ok(self.infer(x)?.map(|(r, c)| (c, r))),
            Expr::Inverse(x) => {
                let d = self.infer(x)?;
                if let Some((r, c)) = d {
                    if !self.unify(r, c) {
                        return Err(());
                    }
                }
                Ok(d)
            }
            Expr::Plus(xs) => {
                let mut acc: Option<(Slot, Slot)> = None;
                for x in xs {
                    if let Some(d) = self.infer(x)? {
                        match acc {
                            None => acc = Some(d),
                            Some(a) => {
                                if !self.unify(a.0, d.0) || !self.unify(a.1, d.1) {
                                    return Err(());
                                }
                            }
                        }
                    }
                }
                Ok(acc)
            }
            Expr::Times(xs) => {
                let mut acc: Option<(Slot, Slot)> = None;
                for x in xs {
                    if let Some(d) = self.infer(x)? {
                        acc = match acc {
                            None => Some(d),
                            Some(a) => {
                                if !self.unify(a.1, d.0) {
                                    return Err(());
                                }
                                Some((a.0, d.1))
                            }
                        };
                    }
                }
                Ok(acc)
            }
        }
    }

    fn equation(&mut self, eq: &Equation) -> Result<Option<(Slot, Slot)>, ()> {
        let l = self.infer(&eq.lhs)?;
        let r = self.infer(&eq.rhs)?;
        match (l, r) {
            (Some(a), Some(b)) => {
                if self.unify(a.0, b.0) && self.unify(a.1, b.1) {
                    Ok(Some(a))
                } else {
                    Err(())
                }
            }
            (a, b) => Ok(a.or(b)),
        }
    }
}

/// Checks conformality of one combination of rules (one per operand in
/// declaration order) and, if it passes, returns the completed rule set.
fn check_combination(spec: &OperationSpec, choice: &[&PartitionRule]) -> Option<RuleSet> {
    let mut next = 0;
    let mut fresh = || {
        next += 1;
        next - 1
    };
    let mut slots = BTreeMap::new();
    for (op, rule) in spec.operands.iter().zip(choice) {
        let row = if rule.shape.splits_rows() { Slot::Split(fresh()) } else { Slot::Unsplit };
        let col = if rule.square_tl {
            row
        } else if rule.shape.splits_cols() {
            Slot::Split(fresh())
        } else {
            Slot::Unsplit
        };
        slots.insert(op.name.as_str(), (row, col));
    }
    let mut cx = Conformality { slots, uf: UnionFind((0..next).collect()) };
    let mut grid_slots = None;
    for eq in &spec.postcondition {
        let d = cx.equation(eq).ok()?;
        grid_slots = grid_slots.or(d);
    }
    let (grow, gcol) = grid_slots?;

    // Name the variable classes in order of first appearance.
    let mut names: BTreeMap<usize, usize> = BTreeMap::new();
    let mut bases: Vec<String> = Vec::new();
    for op in &spec.operands {
        let (r, c) = cx.slots[op.name.as_str()];
        for (slot, base) in [(r, &op.rows.base), (c, &op.cols.base)] {
            if let Slot::Split(i) = slot {
                let root = cx.uf.find(i);
                if !names.contains_key(&root) {
                    names.insert(root, bases.len());
                    bases.push(base.clone());
                }
            }
        }
    }
    let var_name = |idx: usize| {
        if bases.len() == 1 {
            "k".to_string()
        } else {
            format!("k{}", idx + 1)
        }
    };
    let mut rules = Vec::new();
    for (op, rule) in spec.operands.iter().zip(choice) {
        let (r, c) = cx.slots[op.name.as_str()];
        let mut var_of = |s: Slot| match s {
            Slot::Split(i) => Some(var_name(names[&cx.uf.find(i)])),
            Slot::Unsplit => None,
        };
        let row_var = var_of(r);
        let col_var = var_of(c);
        let square_tl = rule.shape == Shape::TwoByTwo && row_var == col_var;
        let mut rule = PartitionRule::new(op, rule.shape, square_tl);
        rule.row_var = row_var;
        rule.col_var = col_var;
        rules.push(rule);
    }
    let grid = Shape::from_grid(if grow == Slot::Unsplit { 1 } else { 2 }, if gcol == Slot::Unsplit { 1 } else { 2 });
    let traversal = match grid {
        Shape::TwoByTwo => Traversal::TLtoBR,
        Shape::TwoByOne => Traversal::TtoB,
        Shape::OneByTwo => Traversal::LtoR,
        Shape::OneByOne => spec
            .operands
            .iter()
            .zip(&rules)
            .find(|(op, r)| op.is_input() && r.shape != Shape::OneByOne)
            .map(|(_, r)| match r.shape {
                Shape::TwoByTwo => Traversal::TLtoBR,
                Shape::TwoByOne => Traversal::TtoB,
                _ => Traversal::LtoR,
            })
            .unwrap_or(Traversal::None),
    };
    let split_vars = bases.iter().enumerate().map(|(i, b)| SplitVar { name: var_name(i), base: b.clone() }).collect();
    Some(RuleSet { rules, traversal, grid, split_vars })
}

/// All conformal, non-trivial rule sets in a deterministic order: fewer
/// split variables first, then by grid shape (1x2, 2x1, 2x2), then by key.
pub fn enumerate_rule_sets(spec: &OperationSpec) -> Vec<RuleSet> {
    let options: Vec<Vec<PartitionRule>> = spec.operands.iter().map(admissible_shapes).collect();
    let mut found = Vec::new();
    let mut seen = BTreeSet::new();
    let mut idx = vec![0usize; options.len()];
    if options.iter().any(|o| o.is_empty()) {
        return found;
    }
    loop {
        let choice: Vec<&PartitionRule> = idx.iter().zip(&options).map(|(&i, o)| &o[i]).collect();
        if choice.iter().any(|r| r.shape != Shape::OneByOne) {
            if let Some(rs) = check_combination(spec, &choice) {
                if seen.insert(rs.key()) {
                    found.push(rs);
                }
            }
        }
        // Odometer increment, last operand fastest.
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                found.sort_by_key(|rs: &RuleSet| (rs.split_vars.len(), rs.grid.sort_rank(), rs.key()));
                return found;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// A grid of expressions, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Blocks {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Expr>,
}

impl Blocks {
    pub fn single(e: Expr) -> Self {
        Blocks { rows: 1, cols: 1, cells: vec![e] }
    }

    pub fn at(&self, i: usize, j: usize) -> &Expr {
        &self.cells[i * self.cols + j]
    }

    pub fn text(&self) -> String {
        if self.rows == 1 && self.cols == 1 {
            return self.cells[0].text();
        }
        let rows: Vec<String> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j).text()).collect::<Vec<_>>().join(", "))
            .collect();
        format!("[{}]", rows.join("; "))
    }
}

/// An expression over block matrices, as produced by [`apply_ruleset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionedExpr {
    Blocks(Blocks),
    Plus(Vec<PartitionedExpr>),
    Times(Vec<PartitionedExpr>),
    Neg(Box<PartitionedExpr>),
    Transpose(Box<PartitionedExpr>),
    Inverse(Box<PartitionedExpr>),
}

impl PartitionedExpr {
    pub fn text(&self) -> String {
        match self {
            PartitionedExpr::Blocks(b) => b.text(),
            PartitionedExpr::Plus(xs) => xs.iter().map(|x| x.text()).collect::<Vec<_>>().join(" + "),
            PartitionedExpr::Times(xs) => xs
                .iter()
                .map(|x| match x {
                    PartitionedExpr::Plus(_) => format!("({})", x.text()),
                    _ => x.text(),
                })
                .collect::<Vec<_>>()
                .join(" "),
            PartitionedExpr::Neg(x) => format!("-({})", x.text()),
            PartitionedExpr::Transpose(x) => format!("({})^T", x.text()),
            PartitionedExpr::Inverse(x) => format!("({})^-1", x.text()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionedEquation {
    pub lhs: PartitionedExpr,
    pub rhs: PartitionedExpr,
}

impl PartitionedEquation {
    pub fn text(&self) -> String {
        format!("{} = {}", self.lhs.text(), self.rhs.text())
    }
}

fn partition_expr(e: &Expr, rs: &RuleSet) -> PartitionedExpr {
    let rec = |x: &Expr| Box::new(partition_expr(x, rs));
    match e {
        Expr::Ref(r) => match rs.rule(&r.name) {
            Some(_) if r.quadrant.is_none() => PartitionedExpr::Blocks(rs.block_of(&r.name)),
            _ => PartitionedExpr::Blocks(Blocks::single(e.clone())),
        },
        Expr::Zero | Expr::Identity | Expr::Apply { .. } => PartitionedExpr::Blocks(Blocks::single(e.clone())),
        Expr::Plus(xs) => PartitionedExpr::Plus(xs.iter().map(|x| partition_expr(x, rs)).collect()),
        Expr::Times(xs) => PartitionedExpr::Times(xs.iter().map(|x| partition_expr(x, rs)).collect()),
        Expr::Neg(x) => PartitionedExpr::Neg(rec(x)),
        Expr::Transpose(x) => PartitionedExpr::Transpose(rec(x)),
        Expr::Inverse(x) => PartitionedExpr::Inverse(rec(x)),
    }
}

/// Replaces every operand of the postcondition by its block form.
pub fn apply_ruleset(spec: &OperationSpec, rs: &RuleSet) -> Vec<PartitionedEquation> {
    spec.postcondition
        .iter()
        .map(|eq| PartitionedEquation { lhs: partition_expr(&eq.lhs, rs), rhs: partition_expr(&eq.rhs, rs) })
        .collect()
}

/// Extent of one dimension after fixing every split variable.
pub fn fix_extent(size: &SymbolicSize, leading_empty: bool) -> SymbolicSize {
    let extent = match &size.extent {
        Extent::Split { half, .. } => {
            if (*half == Half::Leading) == leading_empty {
                Extent::Zero
            } else {
                Extent::Full
            }
        }
        other => other.clone(),
    };
    SymbolicSize { base: size.base.clone(), extent }
}
