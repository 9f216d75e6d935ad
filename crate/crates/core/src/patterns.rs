//! Operation patterns and the matcher that recognizes them inside quadrant
//! equation systems.
//!
//! Recognition works on the signed terms of `lhs - rhs`. Terms containing an
//! unknown must pair up one-to-one with template terms containing an output
//! placeholder; the remaining (known) terms are collected into the single
//! input placeholder they correspond to, which is how
//! `L_BL U_TR + L_BR U_BR = A_BR` becomes `LU(A_BR - L_BL U_TR)`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::expr::{
    normalize, operands_of, structural_equal, substitute, Equation, Expr, OpRef, Operand, Property, PropertySet,
    SolvedEquation, SymbolicSize,
};
use crate::opspec::OperationSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placeholder {
    pub name: String,
    pub constraints: PropertySet,
    /// Base names of the dimensions, as declared by the operand.
    pub rows: String,
    pub cols: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationPattern {
    pub name: String,
    /// Placeholders in declaration order.
    pub placeholders: Vec<Placeholder>,
    pub template_equations: Vec<Equation>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl OperationPattern {
    /// The placeholders as whole operands, for solving instances.
    pub fn operands(&self) -> Vec<Operand> {
        self.placeholders
            .iter()
            .map(|p| Operand {
                name: p.name.clone(),
                properties: p.constraints.clone(),
                rows: SymbolicSize::full(&p.rows),
                cols: SymbolicSize::full(&p.cols),
            })
            .collect()
    }

    fn placeholder(&self, name: &str) -> Option<&Placeholder> {
        self.placeholders.iter().find(|p| p.name == name)
    }

    fn is_output(&self, name: &str) -> bool {
        self.outputs.iter().any(|o| o == name)
    }

    /// A pattern whose single equation already states its output
    /// explicitly (`X = f(inputs)`). Such patterns add nothing over direct
    /// assignment and are not used for recognition.
    pub fn is_explicit(&self) -> bool {
        if self.outputs.len() != 1 || self.template_equations.len() != 1 {
            return false;
        }
        let eq = &self.template_equations[0];
        let out = Expr::r(&self.outputs[0]);
        let mentions_out = |e: &Expr| operands_of(e).iter().any(|r| self.is_output(&r.name));
        (eq.lhs == out && !mentions_out(&eq.rhs)) || (eq.rhs == out && !mentions_out(&eq.lhs))
    }

    /// The template equations with placeholders replaced by `outputs` and
    /// `args` (in the order of [`Self::outputs`] and [`Self::inputs`]).
    pub fn instantiate(&self, outputs: &[Expr], args: &[Expr]) -> Vec<Equation> {
        let mut bindings = BTreeMap::new();
        for (name, e) in self.outputs.iter().zip(outputs) {
            bindings.insert(OpRef::whole(name), e.clone());
        }
        for (name, e) in self.inputs.iter().zip(args) {
            bindings.insert(OpRef::whole(name), e.clone());
        }
        self.template_equations
            .iter()
            .map(|eq| Equation::new(substitute(&eq.lhs, &bindings), substitute(&eq.rhs, &bindings)))
            .collect()
    }

    /// Expands a solved equation whose right-hand side applies this pattern.
    pub fn expand(&self, eq: &SolvedEquation) -> Option<Vec<Equation>> {
        match &eq.rhs {
            Expr::Apply { op, args, .. } if *op == self.name => {
                let outs: Vec<Expr> = eq.outputs.iter().cloned().map(Expr::Ref).collect();
                Some(self.instantiate(&outs, args))
            }
            _ => None,
        }
    }
}

/// The pattern defined by an operation description: placeholders mirror
/// the operands, arguments are the inputs and results are the outputs, both
/// in declaration order.
pub fn learn_pattern(spec: &OperationSpec) -> OperationPattern {
    OperationPattern {
        name: spec.name.clone(),
        placeholders: spec
            .operands
            .iter()
            .map(|o| Placeholder {
                name: o.name.clone(),
                constraints: o.properties.clone(),
                rows: o.rows.base.clone(),
                cols: o.cols.base.clone(),
            })
            .collect(),
        template_equations: spec.postcondition.iter().map(|e| e.normalized()).collect(),
        inputs: spec.inputs().map(|o| o.name.clone()).collect(),
        outputs: spec.outputs().map(|o| o.name.clone()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern `{0}` is already registered with a different definition")]
    NameCollision(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    pub patterns: Vec<OperationPattern>,
}

impl Registry {
    pub fn register(&mut self, p: OperationPattern) -> Result<(), PatternError> {
        match self.patterns.iter().find(|q| q.name == p.name) {
            Some(q) if *q == p => Ok(()),
            Some(_) => Err(PatternError::NameCollision(p.name)),
            None => {
                self.patterns.push(p);
                Ok(())
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&OperationPattern> {
        self.patterns.iter().find(|p| p.name == name)
    }

    /// Expands pattern applications back into implicit equations; other
    /// solved equations are returned in implicit form.
    pub fn expand(&self, eq: &SolvedEquation) -> Vec<Equation> {
        if let Expr::Apply { op, .. } = &eq.rhs {
            if let Some(eqs) = self.get(op).and_then(|p| p.expand(eq)) {
                return eqs;
            }
        }
        eq.as_equation().into_iter().collect()
    }
}

/// What the matcher knows: which sub-operands are already computed and the
/// properties of every sub-operand.
#[derive(Debug, Clone, Default)]
pub struct Knowledge {
    pub known: BTreeSet<OpRef>,
    pub properties: BTreeMap<OpRef, PropertySet>,
}

impl Knowledge {
    pub fn is_known(&self, r: &OpRef) -> bool {
        self.known.contains(r)
    }

    fn expr_known(&self, e: &Expr) -> bool {
        operands_of(e).iter().all(|r| self.is_known(r))
    }

    fn has(&self, e: &Expr, p: Property) -> bool {
        match e {
            Expr::Ref(r) => self.properties.get(r).is_some_and(|s| s.contains(&p)),
            Expr::Identity => {
                matches!(p, Property::UnitDiagonal | Property::NonSingular | Property::Identity)
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchKind {
    Recognized { pattern: String, solved: SolvedEquation },
    Isolated(SolvedEquation),
    NoMatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub kind: MatchKind,
    pub assumptions: Vec<String>,
}

impl MatchResult {
    fn no_match(reason: impl Into<String>) -> Self {
        MatchResult { kind: MatchKind::NoMatch(reason.into()), assumptions: Vec::new() }
    }

    pub fn solved(&self) -> Option<&SolvedEquation> {
        match &self.kind {
            MatchKind::Recognized { solved, .. } | MatchKind::Isolated(solved) => Some(solved),
            MatchKind::NoMatch(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Term {
    negative: bool,
    factors: Vec<Expr>,
}

impl Term {
    fn expr(&self) -> Expr {
        let body = if self.factors.len() == 1 { self.factors[0].clone() } else { Expr::Times(self.factors.clone()) };
        if self.negative {
            Expr::neg(body)
        } else {
            body
        }
    }
}

fn terms_of(e: &Expr) -> Vec<Term> {
    let items: Vec<&Expr> = match e {
        Expr::Zero => Vec::new(),
        Expr::Plus(xs) => xs.iter().collect(),
        other => vec![other],
    };
    items
        .into_iter()
        .map(|t| {
            let (negative, inner) = match t {
                Expr::Neg(x) => (true, x.as_ref()),
                x => (false, x),
            };
            let factors = match inner {
                Expr::Times(fs) => fs.clone(),
                x => vec![x.clone()],
            };
            Term { negative, factors }
        })
        .collect()
}

fn sum_of(terms: &[&Term]) -> Expr {
    normalize(&Expr::Plus(terms.iter().map(|t| t.expr()).collect()))
}

type Bindings = BTreeMap<String, Expr>;

struct Matcher<'a> {
    pattern: &'a OperationPattern,
    kn: &'a Knowledge,
}

impl Matcher<'_> {
    fn placeholder_of(&self, e: &Expr) -> Option<String> {
        match e {
            Expr::Ref(r) if r.quadrant.is_none() && self.pattern.placeholder(&r.name).is_some() => Some(r.name.clone()),
            _ => None,
        }
    }

    fn has_output_placeholder(&self, t: &Term) -> bool {
        t.factors.iter().any(|f| operands_of(f).iter().any(|r| self.pattern.is_output(&r.name)))
    }

    fn bind(&self, b: &Bindings, p: &str, e: Expr) -> Option<Bindings> {
        let e = normalize(&e);
        if self.pattern.is_output(p) {
            match &e {
                Expr::Ref(r) if !self.kn.is_known(r) => {}
                _ => return None,
            }
        } else if !self.kn.expr_known(&e) {
            return None;
        }
        match b.get(p) {
            Some(old) => structural_equal(old, &e).then(|| b.clone()),
            None => {
                let mut nb = b.clone();
                nb.insert(p.to_string(), e);
                Some(nb)
            }
        }
    }

    fn unify(&self, t: &Expr, a: &Expr, b: &Bindings) -> Vec<Bindings> {
        if let Some(p) = self.placeholder_of(t) {
            return self.bind(b, &p, a.clone()).into_iter().collect();
        }
        match (t, a) {
            (Expr::Transpose(x), Expr::Transpose(y))
            | (Expr::Inverse(x), Expr::Inverse(y))
            | (Expr::Neg(x), Expr::Neg(y)) => self.unify(x, y, b),
            (Expr::Times(xs), Expr::Times(ys)) => self.factors(xs, ys, b),
            _ if operands_of(t).iter().all(|r| self.pattern.placeholder(&r.name).is_none()) => {
                if structural_equal(t, a) {
                    vec![b.clone()]
                } else {
                    Vec::new()
                }
            }
            _ => Vec::new(),
        }
    }

    /// Matches a template factor sequence against an actual one. Output
    /// placeholders take exactly one factor; input placeholders take a
    /// non-empty run of known factors.
    fn factors(&self, tf: &[Expr], af: &[Expr], b: &Bindings) -> Vec<Bindings> {
        let Some((f, rest)) = tf.split_first() else {
            return if af.is_empty() { vec![b.clone()] } else { Vec::new() };
        };
        let mut out = Vec::new();
        match self.placeholder_of(f) {
            Some(p) if !self.pattern.is_output(&p) => {
                for len in 1..=af.len() {
                    let run = &af[..len];
                    if !run.iter().all(|x| self.kn.expr_known(x)) {
                        break;
                    }
                    let value = if len == 1 { run[0].clone() } else { Expr::Times(run.to_vec()) };
                    if let Some(nb) = self.bind(b, &p, value) {
                        out.extend(self.factors(rest, &af[len..], &nb));
                    }
                }
            }
            _ => {
                if let Some((a, arest)) = af.split_first() {
                    for nb in self.unify(f, a, b) {
                        out.extend(self.factors(rest, arest, &nb));
                    }
                }
            }
        }
        out
    }

    /// One-to-one pairing of template terms with actual terms.
    fn pair_terms(&self, tt: &[&Term], at: &[&Term], flip: bool, b: &Bindings) -> Vec<Bindings> {
        let Some((t, trest)) = tt.split_first() else {
            return if at.is_empty() { vec![b.clone()] } else { Vec::new() };
        };
        let mut out = Vec::new();
        for (j, a) in at.iter().enumerate() {
            if (t.negative != flip) != a.negative {
                continue;
            }
            let mut arest: Vec<&Term> = at.to_vec();
            arest.remove(j);
            for nb in self.factors(&t.factors, &a.factors, b) {
                out.extend(self.pair_terms(trest, &arest, flip, &nb));
            }
        }
        out
    }

    fn equation(&self, template: &Equation, actual: &Equation, b: &Bindings) -> Vec<Bindings> {
        let tterms = terms_of(&template.difference());
        let aterms = terms_of(&actual.difference());
        let (tu, tk): (Vec<&Term>, Vec<&Term>) = tterms.iter().partition(|t| self.has_output_placeholder(t));
        let (au, ak): (Vec<&Term>, Vec<&Term>) =
            aterms.iter().partition(|t| t.factors.iter().any(|f| !self.kn.expr_known(f)));
        if tu.len() != au.len() {
            return Vec::new();
        }
        let mut out = Vec::new();
        for flip in [false, true] {
            for nb in self.pair_terms(&tu, &au, flip, b) {
                match tk.as_slice() {
                    [t] if t.factors.len() == 1 && self.placeholder_of(&t.factors[0]).is_some() => {
                        let p = self.placeholder_of(&t.factors[0]).unwrap();
                        let sum = sum_of(&ak);
                        let value = if t.negative != flip { Expr::neg(sum) } else { sum };
                        out.extend(self.bind(&nb, &p, value));
                    }
                    _ => out.extend(self.pair_terms(&tk, &ak, flip, &nb)),
                }
            }
        }
        out
    }

    /// Checks placeholder constraints on a complete binding. Structural
    /// properties must hold exactly; solvability properties that cannot be
    /// established are returned as assumptions.
    fn constraints(&self, b: &Bindings) -> Option<Vec<String>> {
        let mut assumptions = Vec::new();
        for ph in &self.pattern.placeholders {
            let e = b.get(&ph.name)?;
            for &p in &ph.constraints {
                match p {
                    Property::LowerTriangular
                    | Property::UpperTriangular
                    | Property::UnitDiagonal
                    | Property::Zero
                    | Property::Identity => {
                        if !self.kn.has(e, p) {
                            return None;
                        }
                    }
                    Property::NonSingular | Property::ExistsLU => {
                        if !self.kn.has(e, p) {
                            assumptions.push(format!("{p}({})", e.text()));
                        }
                    }
                    _ => {}
                }
            }
        }
        Some(assumptions)
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Tries to recognize `system` as an instance of `pattern`.
pub fn match_pattern(system: &[Equation], pattern: &OperationPattern, kn: &Knowledge) -> Option<MatchResult> {
    if system.len() != pattern.template_equations.len() {
        return None;
    }
    let m = Matcher { pattern, kn };
    for perm in permutations(system.len()) {
        let mut states = vec![Bindings::new()];
        for (t, &i) in pattern.template_equations.iter().zip(&perm) {
            states = states.iter().flat_map(|b| m.equation(t, &system[i], b)).collect();
            if states.is_empty() {
                break;
            }
        }
        for b in states {
            let Some(assumptions) = m.constraints(&b) else { continue };
            let outputs: Vec<OpRef> =
                pattern.outputs.iter().map(|o| b[o].as_ref().cloned().expect("outputs bind references")).collect();
            let distinct: BTreeSet<&OpRef> = outputs.iter().collect();
            if distinct.len() != outputs.len() {
                continue;
            }
            let args = pattern.inputs.iter().map(|i| b[i].clone()).collect();
            let rhs = Expr::Apply { op: pattern.name.clone(), args, outputs: outputs.len() };
            return Some(MatchResult {
                kind: MatchKind::Recognized {
                    pattern: pattern.name.clone(),
                    solved: SolvedEquation::new(outputs, rhs),
                },
                assumptions,
            });
        }
    }
    None
}

/// Recognizes a quadrant system: learned patterns first, then isolation of
/// a single unknown (triangular solves and direct assignments).
pub fn recognize(system: &[Equation], kn: &Knowledge, registry: &Registry) -> MatchResult {
    for p in registry.patterns.iter().filter(|p| !p.is_explicit()) {
        if let Some(m) = match_pattern(system, p, kn) {
            return m;
        }
    }
    match system {
        [eq] => isolate_unknown(eq, kn),
        [] => MatchResult::no_match("empty system"),
        _ => MatchResult::no_match(format!("no pattern matches the {}-equation system", system.len())),
    }
}

fn invert_factor(f: &Expr, kn: &Knowledge, assumptions: &mut Vec<String>) -> Result<Expr, String> {
    if kn.has(f, Property::NonSingular) || kn.has(f, Property::UnitDiagonal) {
        return Ok(Expr::inverse(f.clone()));
    }
    if kn.has(f, Property::LowerTriangular) || kn.has(f, Property::UpperTriangular) {
        assumptions.push(format!("NonSingular({})", f.text()));
        return Ok(Expr::inverse(f.clone()));
    }
    Err(format!("factor `{}` is not known to be nonsingular", f.text()))
}

/// Solves `eq` for its single unknown: `P u Q + R = 0` becomes
/// `u = P^-1 (-R) Q^-1`.
pub fn isolate_unknown(eq: &Equation, kn: &Knowledge) -> MatchResult {
    let d = eq.difference();
    let unknowns: Vec<OpRef> = operands_of(&d).into_iter().filter(|r| !kn.is_known(r)).collect();
    let u = match unknowns.as_slice() {
        [u] => u.clone(),
        [] => return MatchResult::no_match("no unknown"),
        _ => {
            let names: Vec<String> = unknowns.iter().map(|r| r.to_string()).collect();
            return MatchResult::no_match(format!("several unknowns: {}", names.join(", ")));
        }
    };
    let target = Expr::Ref(u.clone());
    let terms = terms_of(&d);
    let occurrences = |e: &Expr| {
        let mut n = 0;
        e.walk(&mut |x| {
            if *x == target {
                n += 1;
            }
        });
        n
    };
    let total: usize = terms.iter().map(|t| occurrences(&t.expr())).sum();
    if total != 1 {
        return MatchResult::no_match(format!("`{u}` occurs {total} times"));
    }
    let (idx, term) =
        terms.iter().enumerate().find(|(_, t)| occurrences(&t.expr()) == 1).expect("one term holds the unknown");
    let Some(pos) = term.factors.iter().position(|f| *f == target) else {
        return MatchResult::no_match(format!("`{u}` is not a bare factor of its term"));
    };
    let rest: Vec<&Term> = terms.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, t)| t).collect();
    let rest = sum_of(&rest);
    // s P u Q = -R  =>  P u Q = -s R
    let moved = if term.negative { rest } else { Expr::neg(rest) };
    let mut assumptions = Vec::new();
    let mut factors = Vec::new();
    for f in term.factors[..pos].iter().rev() {
        match invert_factor(f, kn, &mut assumptions) {
            Ok(inv) => factors.push(inv),
            Err(reason) => return MatchResult::no_match(reason),
        }
    }
    factors.push(moved);
    for f in term.factors[pos + 1..].iter().rev() {
        match invert_factor(f, kn, &mut assumptions) {
            Ok(inv) => factors.push(inv),
            Err(reason) => return MatchResult::no_match(reason),
        }
    }
    let solved = SolvedEquation::single(u, Expr::times(factors));
    MatchResult { kind: MatchKind::Isolated(solved), assumptions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspec::parse_spec;
    use crate::partition::Quadrant::{self, *};

    fn q(n: &str, quad: Quadrant) -> Expr {
        Expr::q(n, quad)
    }

    fn lu_knowledge(known: &[(&str, Quadrant)]) -> Knowledge {
        let mut kn = Knowledge::default();
        for (n, quad) in known {
            kn.known.insert(OpRef::quad(*n, *quad));
        }
        let set = |ps: &[Property]| ps.iter().copied().collect::<PropertySet>();
        for quad in [TL, BR] {
            kn.properties.insert(
                OpRef::quad("L", quad),
                set(&[Property::Output, Property::LowerTriangular, Property::UnitDiagonal, Property::NonSingular]),
            );
            kn.properties.insert(OpRef::quad("U", quad), set(&[Property::Output, Property::UpperTriangular]));
        }
        kn.properties.insert(OpRef::quad("A", TL), set(&[Property::Input, Property::ExistsLU]));
        kn
    }

    fn lu_registry() -> Registry {
        let mut r = Registry::default();
        r.register(learn_pattern(&parse_spec(include_str!("../../../corpus/lu.clk")).unwrap())).unwrap();
        r
    }

    #[test]
    fn learns_lu() {
        let p = learn_pattern(&parse_spec(include_str!("../../../corpus/lu.clk")).unwrap());
        assert_eq!(p.outputs, vec!["L", "U"]);
        assert_eq!(p.inputs, vec!["A"]);
        assert_eq!(p.template_equations[0].text(), "L U = A");
        assert!(!p.is_explicit());
        let mut reg = Registry::default();
        reg.register(p.clone()).unwrap();
        reg.register(p.clone()).unwrap();
        assert_eq!(reg.patterns.len(), 1);
        let mut other = p;
        other.inputs.clear();
        assert!(reg.register(other).is_err());
    }

    #[test]
    fn recognizes_lu_top_left() {
        let kn = lu_knowledge(&[("A", TL)]);
        let eq = Equation::new(Expr::times(vec![q("L", TL), q("U", TL)]), q("A", TL));
        let m = recognize(&[eq], &kn, &lu_registry());
        assert_eq!(m.solved().unwrap().text(), "{L_TL, U_TL} = LU(A_TL)");
        assert!(m.assumptions.is_empty());
    }

    #[test]
    fn recognizes_lu_bottom_right_with_assumption() {
        let kn = lu_knowledge(&[("A", BR), ("L", BL), ("U", TR)]);
        let eq = Equation::new(
            Expr::plus(vec![Expr::times(vec![q("L", BL), q("U", TR)]), Expr::times(vec![q("L", BR), q("U", BR)])]),
            q("A", BR),
        );
        let m = recognize(&[eq], &kn, &lu_registry());
        assert_eq!(m.solved().unwrap().text(), "{L_BR, U_BR} = LU(A_BR - L_BL U_TR)");
        assert_eq!(m.assumptions, vec!["ExistsLU(A_BR - L_BL U_TR)"]);
    }

    #[test]
    fn isolates_triangular_solves() {
        let kn = lu_knowledge(&[("A", TR), ("A", BL), ("L", TL), ("U", TL)]);
        let tr = Equation::new(Expr::times(vec![q("L", TL), q("U", TR)]), q("A", TR));
        let m = recognize(&[tr], &kn, &lu_registry());
        assert!(matches!(m.kind, MatchKind::Isolated(_)));
        assert_eq!(m.solved().unwrap().text(), "U_TR = L_TL^-1 A_TR");
        assert!(m.assumptions.is_empty());
        let bl = Equation::new(Expr::times(vec![q("L", BL), q("U", TL)]), q("A", BL));
        let m = recognize(&[bl], &kn, &lu_registry());
        assert_eq!(m.solved().unwrap().text(), "L_BL = A_BL U_TL^-1");
        assert_eq!(m.assumptions, vec!["NonSingular(U_TL)"]);
    }

    #[test]
    fn additive_isolation() {
        let mut kn = Knowledge::default();
        kn.known.extend([OpRef::whole("B"), OpRef::whole("C")]);
        let eq = Equation::new(Expr::plus(vec![Expr::r("X"), Expr::r("B")]), Expr::r("C"));
        assert_eq!(isolate_unknown(&eq, &kn).solved().unwrap().text(), "X = C - B");
    }

    #[test]
    fn underdetermined_product_does_not_match() {
        let mut kn = Knowledge::default();
        kn.known.insert(OpRef::whole("A"));
        let eq = Equation::new(Expr::times(vec![Expr::r("X"), Expr::r("Y")]), Expr::r("A"));
        assert!(matches!(recognize(&[eq], &kn, &Registry::default()).kind, MatchKind::NoMatch(_)));
    }

    #[test]
    fn unknown_inside_inverse_is_rejected() {
        let mut kn = Knowledge::default();
        kn.known.insert(OpRef::whole("A"));
        let eq = Equation::new(Expr::inverse(Expr::r("X")), Expr::r("A"));
        assert!(matches!(isolate_unknown(&eq, &kn).kind, MatchKind::NoMatch(_)));
    }

    #[test]
    fn general_factor_is_not_inverted() {
        let mut kn = Knowledge::default();
        kn.known.extend([OpRef::whole("A"), OpRef::whole("B")]);
        let eq = Equation::new(Expr::times(vec![Expr::r("A"), Expr::r("X")]), Expr::r("B"));
        assert!(matches!(isolate_unknown(&eq, &kn).kind, MatchKind::NoMatch(_)));
    }

    #[test]
    fn instantiation_reproduces_system() {
        let kn = lu_knowledge(&[("A", BR), ("L", BL), ("U", TR)]);
        let eq = Equation::new(
            Expr::plus(vec![Expr::times(vec![q("L", BL), q("U", TR)]), Expr::times(vec![q("L", BR), q("U", BR)])]),
            q("A", BR),
        );
        let reg = lu_registry();
        let m = recognize(&[eq.clone()], &kn, &reg);
        let back = reg.expand(m.solved().unwrap());
        assert_eq!(back.len(), 1);
        assert!(back[0].equivalent(&eq));
    }

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(2), vec![vec![0, 1], vec![1, 0]]);
    }
}
