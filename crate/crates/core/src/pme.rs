//! Derivation of Partitioned Matrix Expressions.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::expr::{Equation, OpRef, SolvedEquation};
use crate::opspec::OperationSpec;
use crate::partition::{apply_ruleset, enumerate_rule_sets, PartitionedEquation, Quadrant, RuleSet};
use crate::patterns::{learn_pattern, recognize, Knowledge, MatchKind, Registry};
use crate::rewrite::{distribute, Grid, RewriteError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PmeCell {
    pub solved: SolvedEquation,
    /// Name of the recognized pattern, or `None` for an isolated unknown.
    pub pattern: Option<String>,
    pub assumptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pme {
    pub ruleset: RuleSet,
    pub partitioned: Vec<PartitionedEquation>,
    pub distributed: Grid<Vec<Equation>>,
    /// Solved cells in row-major order; grid positions without equations
    /// are absent.
    pub grid: Grid<PmeCell>,
    /// Order in which cells were solved.
    pub solve_order: Vec<Quadrant>,
    pub assumptions: Vec<String>,
}

impl Pme {
    pub fn cell(&self, q: Quadrant) -> Option<&PmeCell> {
        self.grid.get(q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PmeError {
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("derivation stuck; unsolved cells: {}", .0.iter().map(|(q, r)| format!("{q} ({r})")).collect::<Vec<_>>().join(", "))]
    Stuck(Vec<(Quadrant, String)>),
    #[error("output coverage violated: {0}")]
    Coverage(String),
}

/// Property and known-set context for one rule set.
pub fn knowledge_for(spec: &OperationSpec, rs: &RuleSet) -> Knowledge {
    let mut kn = Knowledge::default();
    for r in rs.live_refs(spec) {
        kn.properties.insert(r.clone(), rs.ref_properties(spec, &r));
        if spec.operand(&r.name).is_some_and(|o| o.is_input()) {
            kn.known.insert(r);
        }
    }
    for o in &spec.operands {
        kn.properties.insert(OpRef::whole(&o.name), o.properties.clone());
    }
    kn
}

/// Derives the PME of one rule set: cells are scanned in row-major order
/// and solved as soon as enough of their operands are known; the outputs
/// of a solved cell become known immediately.
pub fn derive_pme(spec: &OperationSpec, rs: &RuleSet, registry: &Registry) -> Result<Pme, PmeError> {
    let partitioned = apply_ruleset(spec, rs);
    let distributed = distribute(&partitioned)?;
    let mut kn = knowledge_for(spec, rs);
    let pending: Vec<(Quadrant, &Vec<Equation>)> =
        distributed.cells.iter().filter(|(_, e)| !e.is_empty()).map(|(q, e)| (*q, e)).collect();
    let mut solved: Vec<Option<PmeCell>> = vec![None; pending.len()];
    let mut solve_order = Vec::new();
    loop {
        let mut progress = false;
        let mut reasons = Vec::new();
        for (i, (q, eqs)) in pending.iter().enumerate() {
            if solved[i].is_some() {
                continue;
            }
            let m = recognize(eqs, &kn, registry);
            match m.kind {
                MatchKind::NoMatch(reason) => reasons.push((*q, reason)),
                MatchKind::Recognized { pattern, solved: s } => {
                    kn.known.extend(s.outputs.iter().cloned());
                    solved[i] = Some(PmeCell { solved: s, pattern: Some(pattern), assumptions: m.assumptions });
                    solve_order.push(*q);
                    progress = true;
                }
                MatchKind::Isolated(s) => {
                    kn.known.extend(s.outputs.iter().cloned());
                    solved[i] = Some(PmeCell { solved: s, pattern: None, assumptions: m.assumptions });
                    solve_order.push(*q);
                    progress = true;
                }
            }
        }
        if solved.iter().all(Option::is_some) {
            break;
        }
        if !progress {
            return Err(PmeError::Stuck(reasons));
        }
    }
    let cells: Vec<(Quadrant, PmeCell)> =
        pending.iter().map(|(q, _)| *q).zip(solved.into_iter().map(Option::unwrap)).collect();
    check_coverage(spec, rs, &cells)?;
    let mut assumptions = Vec::new();
    for (_, c) in &cells {
        for a in &c.assumptions {
            if !assumptions.contains(a) {
                assumptions.push(a.clone());
            }
        }
    }
    Ok(Pme {
        ruleset: rs.clone(),
        partitioned,
        grid: Grid { shape: distributed.shape, cells },
        distributed,
        solve_order,
        assumptions,
    })
}

fn check_coverage(spec: &OperationSpec, rs: &RuleSet, cells: &[(Quadrant, PmeCell)]) -> Result<(), PmeError> {
    let expected: BTreeSet<OpRef> =
        rs.live_refs(spec).into_iter().filter(|r| spec.operand(&r.name).is_some_and(|o| o.is_output())).collect();
    let mut seen = BTreeSet::new();
    for (_, c) in cells {
        for o in &c.solved.outputs {
            if !seen.insert(o.clone()) {
                return Err(PmeError::Coverage(format!("{o} is computed twice")));
            }
        }
    }
    if seen != expected {
        let missing: Vec<String> = expected.difference(&seen).map(|r| r.to_string()).collect();
        return Err(PmeError::Coverage(format!("not computed: {}", missing.join(", "))));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PmeDerivation {
    pub registry: Registry,
    pub rule_sets: Vec<RuleSet>,
    /// One entry per rule set, in rule-set order.
    pub results: Vec<Result<Pme, PmeError>>,
    pub diagnostics: Vec<String>,
}

impl PmeDerivation {
    pub fn pmes(&self) -> impl Iterator<Item = &Pme> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }
}

/// Derives one PME per admissible rule set. Rule sets whose derivation gets
/// stuck are dropped with a diagnostic.
pub fn derive_pmes(spec: &OperationSpec) -> PmeDerivation {
    let mut registry = Registry::default();
    registry.register(learn_pattern(spec)).expect("fresh registry");
    let rule_sets = enumerate_rule_sets(spec);
    let mut diagnostics = Vec::new();
    if rule_sets.is_empty() {
        diagnostics.push("no admissible partitioning rule set".to_string());
    }
    let results: Vec<_> = rule_sets.iter().map(|rs| derive_pme(spec, rs, &registry)).collect();
    for (i, r) in results.iter().enumerate() {
        if let Err(e) = r {
            diagnostics.push(format!("rule set {} ({}) dropped: {e}", i + 1, rule_sets[i].summary()));
        }
    }
    PmeDerivation { registry, rule_sets, results, diagnostics }
}
