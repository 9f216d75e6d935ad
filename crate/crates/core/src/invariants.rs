//! Loop-invariant candidates: dependency-closed task subsets, their
//! predicates, and the feasibility test against the loop boundaries.

use std::collections::{BTreeMap, BTreeSet};

use crate::expr::{substitute, Equation, Expr, OpRef, SolvedEquation};
use crate::opspec::OperationSpec;
use crate::partition::{Quadrant, RuleSet, Shape};
use crate::patterns::Registry;
use crate::pme::{derive_pmes, Pme, PmeError};
use crate::rewrite::{boundary_rewrite, Boundary, Grid};
use crate::tasks::{build_graph, decompose, DepGraph, Task};

pub type CandidateSubgraph = BTreeSet<usize>;

/// All dependency-closed subsets, built level by level: every subset found
/// so far is extended by each non-empty subset of the nodes of the current
/// level whose predecessors it already contains.
pub fn enumerate_downsets(g: &DepGraph) -> Vec<CandidateSubgraph> {
    let preds: BTreeMap<usize, BTreeSet<usize>> = g.nodes.iter().map(|t| (t.id, g.predecessors(t.id))).collect();
    let mut list = vec![CandidateSubgraph::new()];
    for level in &g.levels {
        let snapshot = list.clone();
        for sub in &snapshot {
            let acc: Vec<usize> =
                level.iter().copied().filter(|n| !sub.contains(n) && preds[n].is_subset(sub)).collect();
            for mask in 1u64..(1u64 << acc.len()) {
                let mut next = sub.clone();
                next.extend(acc.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, n)| *n));
                list.push(next);
            }
        }
    }
    list
}

/// True if every predecessor of every member is a member.
pub fn is_closed(g: &DepGraph, c: &CandidateSubgraph) -> bool {
    g.edges.iter().all(|e| !c.contains(&e.to) || c.contains(&e.from))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuadrantState {
    /// No constraint on the quadrant's contents.
    Unconstrained,
    Equality(Vec<SolvedEquation>),
}

impl QuadrantState {
    pub fn equations(&self) -> &[SolvedEquation] {
        match self {
            QuadrantState::Unconstrained => &[],
            QuadrantState::Equality(e) => e,
        }
    }

    pub fn text(&self) -> String {
        match self {
            QuadrantState::Unconstrained => "≠".to_string(),
            QuadrantState::Equality(e) => e.iter().map(|x| x.text()).collect::<Vec<_>>().join("; "),
        }
    }

    pub fn latex(&self) -> String {
        match self {
            QuadrantState::Unconstrained => "\\neq".to_string(),
            QuadrantState::Equality(e) => e.iter().map(|x| x.latex()).collect::<Vec<_>>().join(" \\\\ "),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopGuard {
    pub operand: String,
    pub quadrant: Quadrant,
}

impl LoopGuard {
    pub fn text(&self) -> String {
        format!("size({}) < size({})", OpRef::quad(&self.operand, self.quadrant), self.operand)
    }
}

/// The guard anchors on the leading quadrant of the first input operand
/// that is partitioned like the distributed grid and carries every split
/// variable.
pub fn loop_guard(spec: &OperationSpec, rs: &RuleSet) -> Option<LoopGuard> {
    let all: BTreeSet<&str> = rs.split_vars.iter().map(|v| v.name.as_str()).collect();
    let covers = |name: &str| {
        let r = rs.rule(name).expect("rule");
        let vars: BTreeSet<&str> = r.row_var.iter().chain(&r.col_var).map(String::as_str).collect();
        vars == all
    };
    let pick = spec
        .inputs()
        .find(|o| rs.rule(&o.name).is_some_and(|r| r.shape == rs.grid) && covers(&o.name))
        .or_else(|| spec.inputs().find(|o| covers(&o.name)))
        .or_else(|| spec.operands.iter().find(|o| rs.rule(&o.name).is_some_and(|r| r.shape != Shape::OneByOne)))?;
    let shape = rs.rule(&pick.name)?.shape;
    Some(LoopGuard { operand: pick.name.clone(), quadrant: shape.quadrants()[0] })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopInvariant {
    pub subgraph: CandidateSubgraph,
    pub grid: Grid<QuadrantState>,
    pub guard: Option<LoopGuard>,
}

impl LoopInvariant {
    /// The predicate as a flat list of equalities.
    pub fn predicate(&self) -> Vec<SolvedEquation> {
        self.grid.cells.iter().flat_map(|(_, s)| s.equations().to_vec()).collect()
    }
}

/// Renders the predicate of a candidate: finished quadrants show their PME
/// cell, untouched ones are unconstrained, and partially computed ones show
/// the in-place effect of their finished tasks.
pub fn render_invariant(c: &CandidateSubgraph, pme: &Pme, tasks: &[Task]) -> Grid<QuadrantState> {
    pme.grid.map(|q, cell| {
        let mine: Vec<&Task> = tasks.iter().filter(|t| t.quadrant == q).collect();
        let done: Vec<&Task> = mine.iter().copied().filter(|t| c.contains(&t.id)).collect();
        if done.is_empty() {
            QuadrantState::Unconstrained
        } else if done.len() == mine.len() {
            QuadrantState::Equality(vec![cell.solved.clone()])
        } else {
            QuadrantState::Equality(partial_state(&done))
        }
    })
}

fn partial_state(done: &[&Task]) -> Vec<SolvedEquation> {
    let mut state: BTreeMap<OpRef, Expr> = BTreeMap::new();
    let mut order: Vec<Vec<OpRef>> = Vec::new();
    for t in done {
        let value = substitute(&t.expr, &state);
        if t.outputs.len() == 1 {
            state.insert(t.outputs[0].clone(), value);
        } else {
            // A multi-output operation: keep its application as the state.
            for o in &t.outputs {
                state.remove(o);
            }
            order.retain(|outs| !outs.iter().any(|o| t.outputs.contains(o)));
            order.push(t.outputs.clone());
            state.insert(t.outputs[0].clone(), value);
            continue;
        }
        if !order.iter().any(|outs| outs == &t.outputs) {
            order.push(t.outputs.clone());
        }
    }
    order
        .into_iter()
        .map(|outs| {
            let rhs = state[&outs[0]].clone();
            SolvedEquation::new(outs, rhs)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub initial_ok: bool,
    pub final_ok: bool,
    pub witness: Option<String>,
    pub initial: Vec<SolvedEquation>,
    pub final_predicate: Vec<SolvedEquation>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.initial_ok && self.final_ok
    }
}

fn same_system(a: &[Equation], b: &[Equation]) -> bool {
    a.iter().all(|x| b.iter().any(|y| x.equivalent(y))) && b.iter().all(|y| a.iter().any(|x| x.equivalent(y)))
}

/// Checks both feasibility conditions: the predicate must hold vacuously
/// on the initial partitioning, and on the final partitioning it must
/// state the postcondition.
pub fn check_feasibility(
    predicate: &[SolvedEquation],
    pme: &Pme,
    spec: &OperationSpec,
    registry: &Registry,
) -> FeasibilityReport {
    let rs = &pme.ruleset;
    let initial = boundary_rewrite(predicate, Boundary::Initial, rs, spec);
    let final_predicate = boundary_rewrite(predicate, Boundary::Final, rs, spec);
    let initial_ok = initial.is_empty();
    let expanded: Vec<Equation> = final_predicate.iter().flat_map(|e| registry.expand(e)).collect();
    let final_ok = !final_predicate.is_empty()
        && final_predicate.iter().all(|e| !registry.expand(e).is_empty())
        && same_system(&expanded, &spec.postcondition);
    let join = |eqs: &[SolvedEquation]| eqs.iter().map(|e| e.text()).collect::<Vec<_>>().join("; ");
    let witness = if final_predicate.is_empty() {
        Some("final predicate empty".to_string())
    } else if !final_ok {
        Some(format!("final predicate does not match postcondition: {}", join(&final_predicate)))
    } else if !initial_ok {
        Some(format!("initial residual: {}", join(&initial)))
    } else {
        None
    };
    FeasibilityReport { initial_ok, final_ok, witness, initial, final_predicate }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub invariant: LoopInvariant,
    pub feasibility: FeasibilityReport,
}

/// Renders and checks every candidate, in enumeration order.
pub fn feasibility_filter(
    candidates: &[CandidateSubgraph],
    pme: &Pme,
    tasks: &[Task],
    spec: &OperationSpec,
    registry: &Registry,
) -> Vec<Candidate> {
    let guard = loop_guard(spec, &pme.ruleset);
    candidates
        .iter()
        .map(|c| {
            let invariant =
                LoopInvariant { subgraph: c.clone(), grid: render_invariant(c, pme, tasks), guard: guard.clone() };
            let feasibility = check_feasibility(&invariant.predicate(), pme, spec, registry);
            Candidate { invariant, feasibility }
        })
        .collect()
}

/// Everything derived from one PME.
#[derive(Debug, Clone)]
pub struct PmeAnalysis {
    /// 1-based position among the derived PMEs.
    pub index: usize,
    pub pme: Pme,
    pub tasks: Vec<Task>,
    pub graph: Option<DepGraph>,
    pub candidates: Vec<Candidate>,
}

impl PmeAnalysis {
    pub fn invariants(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.iter().filter(|c| c.feasibility.feasible())
    }
}

/// The complete derivation for one operation.
#[derive(Debug, Clone)]
pub struct Derivation {
    pub spec: OperationSpec,
    pub registry: Registry,
    pub rule_sets: Vec<RuleSet>,
    pub pme_errors: Vec<(usize, PmeError)>,
    pub analyses: Vec<PmeAnalysis>,
    pub diagnostics: Vec<String>,
}

/// Runs the whole pipeline: rule sets, PMEs, tasks, graphs, candidates and
/// feasible invariants.
pub fn generate_invariants(spec: &OperationSpec) -> Derivation {
    let pd = derive_pmes(spec);
    let mut diagnostics = pd.diagnostics.clone();
    let mut analyses = Vec::new();
    let mut pme_errors = Vec::new();
    for (i, r) in pd.results.iter().enumerate() {
        let pme = match r {
            Ok(p) => p.clone(),
            Err(e) => {
                pme_errors.push((i + 1, e.clone()));
                continue;
            }
        };
        let index = analyses.len() + 1;
        let (tasks, graph) = match decompose(&pme).and_then(|t| build_graph(&t).map(|g| (t, g))) {
            Ok((t, g)) => (t, Some(g)),
            Err(e) => {
                diagnostics.push(format!("PME {index}: {e}"));
                (Vec::new(), None)
            }
        };
        let candidates = match &graph {
            Some(g) => {
                let downsets = enumerate_downsets(g);
                feasibility_filter(&downsets, &pme, &tasks, spec, &pd.registry)
            }
            None => Vec::new(),
        };
        analyses.push(PmeAnalysis { index, pme, tasks, graph, candidates });
    }
    Derivation { spec: spec.clone(), registry: pd.registry, rule_sets: pd.rule_sets, pme_errors, analyses, diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspec::parse_spec;

    fn lu() -> Derivation {
        generate_invariants(&parse_spec(include_str!("../../../corpus/lu.clk")).unwrap())
    }

    fn sets(v: &[CandidateSubgraph]) -> Vec<Vec<usize>> {
        v.iter().map(|s| s.iter().copied().collect()).collect()
    }

    #[test]
    fn lu_downsets_in_enumeration_order() {
        let d = lu();
        let g = d.analyses[0].graph.as_ref().unwrap();
        assert_eq!(
            sets(&enumerate_downsets(g)),
            vec![vec![], vec![1], vec![1, 2], vec![1, 3], vec![1, 2, 3], vec![1, 2, 3, 4], vec![1, 2, 3, 4, 5]]
        );
    }

    #[test]
    fn empty_graph_has_only_empty_downset() {
        let g = DepGraph { nodes: Vec::new(), edges: BTreeSet::new(), levels: Vec::new() };
        assert_eq!(enumerate_downsets(&g), vec![CandidateSubgraph::new()]);
    }

    #[test]
    fn lu_invariants() {
        let d = lu();
        let a = &d.analyses[0];
        let inv: Vec<&Candidate> = a.invariants().collect();
        assert_eq!(inv.len(), 5);
        let row5: Vec<String> = inv[4].invariant.grid.cells.iter().map(|(_, s)| s.text()).collect();
        assert_eq!(
            row5,
            vec!["{L_TL, U_TL} = LU(A_TL)", "U_TR = L_TL^-1 A_TR", "L_BL = A_BL U_TL^-1", "A_BR = A_BR - L_BL U_TR"]
        );
        assert_eq!(inv[0].invariant.guard.as_ref().unwrap().text(), "size(A_TL) < size(A)");
    }

    #[test]
    fn lu_rejections_have_witnesses() {
        let d = lu();
        let a = &d.analyses[0];
        let empty = &a.candidates[0].feasibility;
        assert!(!empty.final_ok);
        assert_eq!(empty.witness.as_deref(), Some("final predicate empty"));
        let full = &a.candidates[6].feasibility;
        assert!(full.final_ok && !full.initial_ok);
        assert_eq!(full.witness.as_deref(), Some("initial residual: {L, U} = LU(A)"));
    }

    #[test]
    fn empty_candidate_is_unconstrained_everywhere() {
        let d = lu();
        let a = &d.analyses[0];
        assert!(a.candidates[0].invariant.grid.cells.iter().all(|(_, s)| *s == QuadrantState::Unconstrained));
    }
}
