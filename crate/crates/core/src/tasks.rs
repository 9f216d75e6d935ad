//! Decomposition of PME cells into basic tasks and the task dependency graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{normalize, operands_in_order, Expr, OpRef, SolvedEquation};
use crate::partition::Quadrant;
use crate::pme::Pme;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    /// 1-based emission index.
    pub id: usize,
    pub outputs: Vec<OpRef>,
    /// Operands read by `expr`; in-place targets appear here and in `outputs`.
    pub inputs: Vec<OpRef>,
    pub expr: Expr,
    pub quadrant: Quadrant,
    pub commute_group: Option<usize>,
}

impl Task {
    fn assignment(&self) -> SolvedEquation {
        SolvedEquation { outputs: self.outputs.clone(), rhs: self.expr.clone() }
    }

    /// `{L_TL, U_TL} := LU(A_TL)`
    pub fn text(&self) -> String {
        let a = self.assignment();
        format!("{} := {}", a.lhs_text(), self.expr.text())
    }

    pub fn latex(&self) -> String {
        let eq = self.assignment().latex();
        eq.replacen(" = ", " := ", 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("cell {quadrant}: argument `{term}` matches no basic task pattern")]
    Unmatched { quadrant: Quadrant, term: String },
    #[error("dependency cycle among edges: {}", .0.iter().map(|(a, b)| format!("{a}->{b}")).collect::<Vec<_>>().join(", "))]
    Cycle(Vec<(usize, usize)>),
}

struct Emitter {
    tasks: Vec<Task>,
    groups: usize,
}

impl Emitter {
    fn emit(&mut self, outputs: Vec<OpRef>, expr: Expr, quadrant: Quadrant, group: Option<usize>) {
        let inputs = operands_in_order(&expr);
        self.tasks.push(Task { id: self.tasks.len() + 1, outputs, inputs, expr, quadrant, commute_group: group });
    }

    /// Reduces a complex argument to a sub-operand by in-place updates and
    /// returns that sub-operand.
    fn argument(&mut self, arg: &Expr, quadrant: Quadrant) -> Result<OpRef, TaskError> {
        let unmatched = || TaskError::Unmatched { quadrant, term: arg.text() };
        match arg {
            Expr::Ref(r) => Ok(r.clone()),
            Expr::Plus(terms) => {
                // The first positive bare reference is updated in place by
                // every other addend.
                let pos = terms.iter().position(|t| matches!(t, Expr::Ref(_))).ok_or_else(unmatched)?;
                let target = terms[pos].as_ref().unwrap().clone();
                let addends: Vec<&Expr> = terms.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, t)| t).collect();
                let group = if addends.len() > 1 {
                    self.groups += 1;
                    Some(self.groups)
                } else {
                    None
                };
                for a in addends {
                    let expr = normalize(&Expr::Plus(vec![Expr::Ref(target.clone()), a.clone()]));
                    self.emit(vec![target.clone()], expr, quadrant, group);
                }
                Ok(target)
            }
            // inv(A) B and B inv(A): triangular solves in place on B.
            Expr::Times(fs) if fs.len() == 2 => {
                let target = match (&fs[0], &fs[1]) {
                    (Expr::Inverse(_), Expr::Ref(b)) | (Expr::Ref(b), Expr::Inverse(_)) => b.clone(),
                    _ => return Err(unmatched()),
                };
                self.emit(vec![target.clone()], arg.clone(), quadrant, None);
                Ok(target)
            }
            _ => Err(unmatched()),
        }
    }
}

/// Splits every PME cell into basic tasks, visiting cells in row-major
/// order and arguments left to right.
pub fn decompose(pme: &Pme) -> Result<Vec<Task>, TaskError> {
    let mut em = Emitter { tasks: Vec::new(), groups: 0 };
    for (q, cell) in &pme.grid.cells {
        let s = &cell.solved;
        match &s.rhs {
            Expr::Apply { op, args, outputs } => {
                let mut plain = Vec::with_capacity(args.len());
                for a in args {
                    plain.push(Expr::Ref(em.argument(a, *q)?));
                }
                let expr = Expr::Apply { op: op.clone(), args: plain, outputs: *outputs };
                em.emit(s.outputs.clone(), expr, *q, None);
            }
            rhs => em.emit(s.outputs.clone(), rhs.clone(), *q, None),
        }
    }
    Ok(em.tasks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum DepKind {
    True,
    Anti,
    Output,
}

impl DepKind {
    pub fn name(self) -> &'static str {
        match self {
            DepKind::True => "true",
            DepKind::Anti => "anti",
            DepKind::Output => "output",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: DepKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepGraph {
    pub nodes: Vec<Task>,
    pub edges: BTreeSet<Edge>,
    /// `levels[i]`: tasks whose longest path from a root has length `i`.
    pub levels: Vec<Vec<usize>>,
}

impl DepGraph {
    pub fn predecessors(&self, id: usize) -> BTreeSet<usize> {
        self.edges.iter().filter(|e| e.to == id).map(|e| e.from).collect()
    }

    pub fn task(&self, id: usize) -> &Task {
        &self.nodes[id - 1]
    }

    pub fn level_of(&self, id: usize) -> usize {
        self.levels.iter().position(|l| l.contains(&id)).expect("every node has a level")
    }

    /// Graph over `nodes` (ids `1..=n`) with the given edges; levels are
    /// longest-path depths computed with Kahn's algorithm.
    pub fn from_edges(nodes: Vec<Task>, edges: BTreeSet<Edge>) -> Result<DepGraph, TaskError> {
        let n = nodes.len();
        let mut indeg = vec![0usize; n + 1];
        for e in &edges {
            indeg[e.to] += 1;
        }
        let mut level = vec![0usize; n + 1];
        let mut ready: Vec<usize> = (1..=n).filter(|&i| indeg[i] == 0).collect();
        let mut done = 0;
        while let Some(i) = ready.pop() {
            done += 1;
            for e in edges.iter().filter(|e| e.from == i) {
                level[e.to] = level[e.to].max(level[i] + 1);
                indeg[e.to] -= 1;
                if indeg[e.to] == 0 {
                    ready.push(e.to);
                }
            }
        }
        if done != n {
            let stuck: Vec<(usize, usize)> =
                edges.iter().filter(|e| indeg[e.to] > 0 && indeg[e.from] > 0).map(|e| (e.from, e.to)).collect();
            return Err(TaskError::Cycle(stuck));
        }
        let depth = (1..=n).map(|i| level[i]).max().map_or(0, |m| m + 1);
        let mut levels = vec![Vec::new(); depth];
        for i in 1..=n {
            levels[level[i]].push(i);
        }
        Ok(DepGraph { nodes, edges, levels })
    }

    /// Graphviz rendering: one box per task, solid/dashed/dotted edges for
    /// true/anti/output dependencies, one rank per level.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph \"{name}\" {{");
        let _ = writeln!(s, "  rankdir=TB;");
        let _ = writeln!(s, "  node [shape=box, fontname=\"monospace\"];");
        for t in &self.nodes {
            let label = format!("{}: {}", t.id, t.text()).replace('"', "\\\"");
            let _ = writeln!(s, "  t{} [label=\"{label}\"];", t.id);
        }
        for level in &self.levels {
            let ids: Vec<String> = level.iter().map(|i| format!("t{i}")).collect();
            let _ = writeln!(s, "  {{ rank=same; {}; }}", ids.join("; "));
        }
        for e in &self.edges {
            let style = match e.kind {
                DepKind::True => "solid",
                DepKind::Anti => "dashed",
                DepKind::Output => "dotted",
            };
            let _ = writeln!(s, "  t{} -> t{} [style={style}];", e.from, e.to);
        }
        s.push_str("}\n");
        s
    }
}

fn intersects(a: &[OpRef], b: &[OpRef]) -> bool {
    a.iter().any(|x| b.contains(x))
}

/// Builds the dependency graph. Cross-quadrant data flow is always a true
/// dependency; within a quadrant the emission order fixes the direction.
/// Members of one commute group are never ordered. When a pair is related
/// in several ways only the strongest kind (true, anti, output) is kept.
pub fn build_graph(tasks: &[Task]) -> Result<DepGraph, TaskError> {
    let mut kinds: BTreeMap<(usize, usize), DepKind> = BTreeMap::new();
    for t in tasks {
        for u in tasks {
            if t.id == u.id {
                continue;
            }
            if t.commute_group.is_some() && t.commute_group == u.commute_group {
                continue;
            }
            let same = t.quadrant == u.quadrant;
            let kind = if intersects(&t.outputs, &u.inputs) && (!same || t.id < u.id) {
                Some(DepKind::True)
            } else if same && t.id < u.id && intersects(&t.inputs, &u.outputs) {
                Some(DepKind::Anti)
            } else if same && t.id < u.id && intersects(&t.outputs, &u.outputs) {
                Some(DepKind::Output)
            } else {
                None
            };
            if let Some(k) = kind {
                kinds.insert((t.id, u.id), k);
            }
        }
    }
    let edges: BTreeSet<Edge> = kinds.into_iter().map(|((from, to), kind)| Edge { from, to, kind }).collect();

    DepGraph::from_edges(tasks.to_vec(), edges)
}
