//! Renderers for every pipeline stage: plain-text grids, LaTeX arrays,
//! Graphviz and the JSON derivation report.
//!
//! All output is a pure function of the derivation, so identical inputs
//! give byte-identical output.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invariants::{Candidate, Derivation, PmeAnalysis};
use crate::numeric::CheckReport;
use crate::opspec::render_spec;
use crate::partition::{Quadrant, RuleSet, Shape, Traversal};
use crate::rewrite::Grid;

pub const SCHEMA_VERSION: u32 = 1;

/// The JSON Schema describing [`DerivationReport`].
pub const SCHEMA: &str = include_str!("../../../schema/derivation-report.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    RuleSets,
    Pme,
    Tasks,
    Graph,
    Candidates,
    Invariants,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::RuleSets, Stage::Pme, Stage::Tasks, Stage::Graph, Stage::Candidates, Stage::Invariants];

    pub fn name(self) -> &'static str {
        match self {
            Stage::RuleSets => "rulesets",
            Stage::Pme => "pme",
            Stage::Tasks => "tasks",
            Stage::Graph => "graph",
            Stage::Candidates => "candidates",
            Stage::Invariants => "invariants",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Text,
    Json,
    Latex,
    Dot,
}

impl Format {
    pub const ALL: [Format; 4] = [Format::Text, Format::Json, Format::Latex, Format::Dot];

    pub fn name(self) -> &'static str {
        match self {
            Format::Text => "text",
            Format::Json => "json",
            Format::Latex => "latex",
            Format::Dot => "dot",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Json => "json",
            Format::Latex => "tex",
            Format::Dot => "dot",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Format::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown format `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("format `{format}` is not available for stage `{stage}`")]
    Unsupported { stage: Stage, format: Format },
    #[error("no PME with index {0}")]
    NoSuchPme(usize),
}

/// What to render.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub stage: Stage,
    /// 1-based PME index; `None` selects every PME.
    pub pme: Option<usize>,
}

impl Selection {
    fn analyses<'d>(&self, d: &'d Derivation) -> Result<Vec<&'d PmeAnalysis>, RenderError> {
        match self.pme {
            None => Ok(d.analyses.iter().collect()),
            Some(i) => d.analyses.iter().find(|a| a.index == i).map(|a| vec![a]).ok_or(RenderError::NoSuchPme(i)),
        }
    }
}

// ---------------------------------------------------------------- JSON

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationReport {
    pub schema_version: u32,
    pub operation: String,
    /// The operation description in canonical `.clk` form.
    pub spec: String,
    pub stage: String,
    pub patterns: Vec<PatternReport>,
    pub rule_sets: Vec<RuleSetReport>,
    pub pmes: Vec<PmeReport>,
    pub diagnostics: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternReport {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub equations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleReport {
    pub operand: String,
    pub shape: String,
    pub square_tl: bool,
    pub row_var: Option<String>,
    pub col_var: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitVarReport {
    pub name: String,
    pub base: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSetReport {
    pub index: usize,
    pub summary: String,
    pub traversal: String,
    pub rules: Vec<RuleReport>,
    pub split_vars: Vec<SplitVarReport>,
    /// Index of the PME derived from this rule set, if any.
    pub pme: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellReport {
    pub quadrant: String,
    pub equation: String,
    pub latex: String,
    pub sexpr: String,
    pub pattern: Option<String>,
    pub assumptions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskReport {
    pub id: usize,
    pub text: String,
    pub latex: String,
    pub quadrant: String,
    pub outputs: Vec<String>,
    pub inputs: Vec<String>,
    pub commute_group: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub from: usize,
    pub to: usize,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphReport {
    pub edges: Vec<EdgeReport>,
    pub levels: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantStateReport {
    pub quadrant: String,
    /// `null` for an unconstrained quadrant.
    pub equations: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub id: usize,
    pub tasks: Vec<usize>,
    pub feasible: bool,
    pub witness: Option<String>,
    pub guard: Option<String>,
    pub grid: Vec<QuadrantStateReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PmeReport {
    pub index: usize,
    pub rule_set: usize,
    pub shape: String,
    pub cells: Vec<CellReport>,
    pub assumptions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<Vec<TaskReport>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<CandidateReport>>,
    /// Ids of the feasible candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariants: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub sizes: BTreeMap<String, usize>,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn new(seed: u64, sizes: BTreeMap<String, usize>, rep: &CheckReport) -> Self {
        VerificationReport { seed, sizes, checks: rep.checks, failures: rep.failures.clone() }
    }

    pub fn summary(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let verdict =
            if self.failures.is_empty() { "all passed".to_string() } else { format!("{} failed", self.failures.len()) };
        format!("verify: seed {}, sizes {}: {} checks, {verdict}", self.seed, sizes.join(" "), self.checks)
    }
}

fn rule_set_index(d: &Derivation, rs: &RuleSet) -> usize {
    d.rule_sets.iter().position(|r| r == rs).map_or(0, |i| i + 1)
}

fn traversal_name(t: Traversal) -> &'static str {
    match t {
        Traversal::TLtoBR => "TL to BR",
        Traversal::TtoB => "T to B",
        Traversal::LtoR => "L to R",
        Traversal::None => "none",
    }
}

fn grid_report<T>(g: &Grid<T>, f: impl Fn(&T) -> Option<Vec<String>>) -> Vec<QuadrantStateReport> {
    g.cells.iter().map(|(q, s)| QuadrantStateReport { quadrant: q.to_string(), equations: f(s) }).collect()
}

fn candidate_report(id: usize, c: &Candidate) -> CandidateReport {
    CandidateReport {
        id,
        tasks: c.invariant.subgraph.iter().copied().collect(),
        feasible: c.feasibility.feasible(),
        witness: c.feasibility.witness.clone(),
        guard: c.invariant.guard.as_ref().map(|g| g.text()),
        grid: grid_report(&c.invariant.grid, |s| {
            let eqs = s.equations();
            (!eqs.is_empty()).then(|| eqs.iter().map(|e| e.text()).collect())
        }),
    }
}

fn pme_report(d: &Derivation, a: &PmeAnalysis, stage: Stage) -> PmeReport {
    let pme = &a.pme;
    let cells = pme
        .grid
        .cells
        .iter()
        .map(|(q, c)| CellReport {
            quadrant: q.to_string(),
            equation: c.solved.text(),
            latex: c.solved.latex(),
            sexpr: c.solved.sexpr(),
            pattern: c.pattern.clone(),
            assumptions: c.assumptions.clone(),
        })
        .collect();
    let tasks = (stage >= Stage::Tasks).then(|| {
        a.tasks
            .iter()
            .map(|t| TaskReport {
                id: t.id,
                text: t.text(),
                latex: t.latex(),
                quadrant: t.quadrant.to_string(),
                outputs: t.outputs.iter().map(|r| r.to_string()).collect(),
                inputs: t.inputs.iter().map(|r| r.to_string()).collect(),
                commute_group: t.commute_group,
            })
            .collect()
    });
    let graph = if stage >= Stage::Graph {
        a.graph.as_ref().map(|g| GraphReport {
            edges: g
                .edges
                .iter()
                .map(|e| EdgeReport { from: e.from, to: e.to, kind: e.kind.name().to_string() })
                .collect(),
            levels: g.levels.clone(),
        })
    } else {
        None
    };
    let candidates = (stage >= Stage::Candidates)
        .then(|| a.candidates.iter().enumerate().map(|(i, c)| candidate_report(i + 1, c)).collect());
    let invariants = (stage >= Stage::Invariants).then(|| {
        a.candidates.iter().enumerate().filter(|(_, c)| c.feasibility.feasible()).map(|(i, _)| i + 1).collect()
    });
    PmeReport {
        index: a.index,
        rule_set: rule_set_index(d, &pme.ruleset),
        shape: pme.grid.shape.to_string(),
        cells,
        assumptions: pme.assumptions.clone(),
        tasks,
        graph,
        candidates,
        invariants,
    }
}

/// Builds the JSON report up to and including `sel.stage`.
pub fn build_report(d: &Derivation, sel: &Selection) -> Result<DerivationReport, RenderError> {
    let analyses = sel.analyses(d)?;
    let pme_of = |rs: &RuleSet| d.analyses.iter().find(|a| a.pme.ruleset == *rs).map(|a| a.index);
    let rule_sets = d
        .rule_sets
        .iter()
        .enumerate()
        .map(|(i, rs)| RuleSetReport {
            index: i + 1,
            summary: rs.summary(),
            traversal: traversal_name(rs.traversal).to_string(),
            rules: rs
                .rules
                .iter()
                .map(|r| RuleReport {
                    operand: r.operand.clone(),
                    shape: r.shape.to_string(),
                    square_tl: r.square_tl,
                    row_var: r.row_var.clone(),
                    col_var: r.col_var.clone(),
                })
                .collect(),
            split_vars: rs
                .split_vars
                .iter()
                .map(|v| SplitVarReport { name: v.name.clone(), base: v.base.clone() })
                .collect(),
            pme: if sel.stage >= Stage::Pme { pme_of(rs) } else { None },
            error: d
                .pme_errors
                .iter()
                .find(|(k, _)| *k == i + 1)
                .filter(|_| sel.stage >= Stage::Pme)
                .map(|(_, e)| e.to_string()),
        })
        .collect();
    let pmes = if sel.stage >= Stage::Pme {
        analyses.iter().map(|a| pme_report(d, a, sel.stage)).collect()
    } else {
        Vec::new()
    };
    Ok(DerivationReport {
        schema_version: SCHEMA_VERSION,
        operation: d.spec.name.clone(),
        spec: render_spec(&d.spec),
        stage: sel.stage.to_string(),
        patterns: d
            .registry
            .patterns
            .iter()
            .map(|p| PatternReport {
                name: p.name.clone(),
                inputs: p.inputs.clone(),
                outputs: p.outputs.clone(),
                equations: p.template_equations.iter().map(|e| e.text()).collect(),
            })
            .collect(),
        rule_sets,
        pmes,
        diagnostics: d.diagnostics.clone(),
        verification: None,
    })
}

pub fn to_json(report: &DerivationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- text

/// Renders cells into a box-drawing grid; absent cells are blank.
pub fn text_grid(shape: Shape, cell: impl Fn(Quadrant) -> Option<String>) -> String {
    let (rows, cols) = shape.grid();
    let text: Vec<Vec<String>> =
        (0..rows).map(|i| (0..cols).map(|j| cell(shape.quadrant_at(i, j)).unwrap_or_default()).collect()).collect();
    let widths: Vec<usize> = (0..cols).map(|j| text.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    let mut s = String::new();
    for (i, row) in text.iter().enumerate() {
        if i > 0 {
            let bars: Vec<String> = widths.iter().map(|w| "─".repeat(w + 2)).collect();
            let _ = writeln!(s, "{}", bars.join("┼"));
        }
        let cells: Vec<String> =
            row.iter().zip(&widths).map(|(c, w)| format!(" {c}{} ", " ".repeat(w - c.chars().count()))).collect();
        let _ = writeln!(s, "{}", cells.join("│").trim_end());
    }
    s
}

fn ids(v: impl IntoIterator<Item = usize>) -> String {
    let v: Vec<String> = v.into_iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", v.join(", "))
}

fn text_rule_sets(d: &Derivation) -> String {
    let mut s = String::new();
    if d.rule_sets.is_empty() {
        s.push_str("no admissible rule set\n");
    }
    for (i, rs) in d.rule_sets.iter().enumerate() {
        let _ = writeln!(s, "Rule set {}: {}", i + 1, rs.summary());
        let _ = writeln!(s, "  traversal: {}", traversal_name(rs.traversal));
        for v in &rs.split_vars {
            let _ = writeln!(s, "  split: {} over {}", v.name, v.base);
        }
    }
    s
}

fn text_pme(d: &Derivation, a: &PmeAnalysis) -> String {
    let mut s = format!("PME {} (rule set {}):\n", a.index, rule_set_index(d, &a.pme.ruleset));
    s.push_str(&text_grid(a.pme.grid.shape, |q| a.pme.cell(q).map(|c| c.solved.text())));
    if !a.pme.assumptions.is_empty() {
        let _ = writeln!(s, "Assumptions: {}", a.pme.assumptions.join(", "));
    }
    s
}

fn text_tasks(a: &PmeAnalysis) -> String {
    let mut s = format!("Tasks of PME {}:\n", a.index);
    for t in &a.tasks {
        let group = t.commute_group.map(|g| format!("  [commutes, group {g}]")).unwrap_or_default();
        let _ = writeln!(s, "{:>3}. {}{group}", t.id, t.text());
    }
    s
}

fn text_graph(a: &PmeAnalysis) -> String {
    let mut s = format!("Dependency graph of PME {}:\n", a.index);
    let Some(g) = &a.graph else {
        s.push_str("  unavailable\n");
        return s;
    };
    for e in &g.edges {
        let _ = writeln!(s, "  {} -> {} ({})", e.from, e.to, e.kind.name());
    }
    for (i, l) in g.levels.iter().enumerate() {
        let _ = writeln!(s, "  level {}: {}", i + 1, ids(l.iter().copied()));
    }
    s
}

fn text_candidate(a: &PmeAnalysis, id: usize, c: &Candidate) -> String {
    let mut s = format!("Candidate {id} of PME {}: tasks {}", a.index, ids(c.invariant.subgraph.iter().copied()));
    match &c.feasibility.witness {
        None => s.push_str(", feasible\n"),
        Some(w) => {
            let _ = writeln!(s, ", rejected: {w}");
        }
    }
    s
}

fn text_invariant(a: &PmeAnalysis, n: usize, id: usize, c: &Candidate) -> String {
    let mut s = format!(
        "Invariant {n} of PME {} (candidate {id}, tasks {}):\n",
        a.index,
        ids(c.invariant.subgraph.iter().copied())
    );
    s.push_str(&text_grid(c.invariant.grid.shape, |q| c.invariant.grid.get(q).map(|x| x.text())));
    if let Some(g) = &c.invariant.guard {
        let _ = writeln!(s, "Guard: {}", g.text());
    }
    s
}

fn render_text(d: &Derivation, sel: &Selection) -> Result<String, RenderError> {
    let analyses = sel.analyses(d)?;
    let mut parts = Vec::new();
    match sel.stage {
        Stage::RuleSets => parts.push(text_rule_sets(d)),
        Stage::Pme => parts.extend(analyses.iter().map(|a| text_pme(d, a))),
        Stage::Tasks => parts.extend(analyses.iter().map(|a| text_tasks(a))),
        Stage::Graph => parts.extend(analyses.iter().map(|a| text_graph(a))),
        Stage::Candidates => {
            for a in &analyses {
                let mut s = String::new();
                for (i, c) in a.candidates.iter().enumerate() {
                    s.push_str(&text_candidate(a, i + 1, c));
                }
                let _ = writeln!(
                    s,
                    "PME {}: {} candidates, {} feasible",
                    a.index,
                    a.candidates.len(),
                    a.invariants().count()
                );
                parts.push(s);
            }
        }
        Stage::Invariants => {
            for a in &analyses {
                let feasible = a.candidates.iter().enumerate().filter(|(_, c)| c.feasibility.feasible());
                for (n, (i, c)) in feasible.enumerate() {
                    parts.push(text_invariant(a, n + 1, i + 1, c));
                }
            }
        }
    }
    Ok(parts.join("\n"))
}

// ---------------------------------------------------------------- LaTeX

/// A partitioned-matrix array: `\left(\begin{array}{c|c} ... \end{array}\right)`.
pub fn latex_grid(shape: Shape, cell: impl Fn(Quadrant) -> Option<String>) -> String {
    let (rows, cols) = shape.grid();
    let spec = vec!["c"; cols].join("|");
    let mut s = format!("\\left(\\begin{{array}}{{{spec}}}\n");
    for i in 0..rows {
        if i > 0 {
            s.push_str("\\hline\n");
        }
        let cells: Vec<String> = (0..cols).map(|j| cell(shape.quadrant_at(i, j)).unwrap_or_default()).collect();
        let _ = writeln!(s, "  {} \\\\", cells.join(" & "));
    }
    s.push_str("\\end{array}\\right)");
    s
}

/// Wraps multi-equation states so they stack inside one array cell.
fn latex_stack(parts: &[String]) -> String {
    match parts {
        [one] => one.clone(),
        _ => format!("\\begin{{array}}{{c}} {} \\end{{array}}", parts.join(" \\\\ ")),
    }
}

fn latex_pme(a: &PmeAnalysis) -> String {
    let grid = latex_grid(a.pme.grid.shape, |q| a.pme.cell(q).map(|c| c.solved.latex()));
    format!("% PME {}\n\\[\n{grid}\n\\]\n", a.index)
}

fn latex_tasks(a: &PmeAnalysis) -> String {
    let mut s = format!("% Tasks of PME {}\n\\begin{{enumerate}}\n", a.index);
    for t in &a.tasks {
        let _ = writeln!(s, "  \\item ${}$", t.latex());
    }
    s.push_str("\\end{enumerate}\n");
    s
}

fn latex_invariants(a: &PmeAnalysis, feasible_only: bool) -> String {
    let mut s = format!("% {} of PME {}\n", if feasible_only { "Invariants" } else { "Candidates" }, a.index);
    s.push_str("\\begin{tabular}{r|l|c}\n  \\# & Tasks & Predicate \\\\\n  \\hline\n");
    let mut n = 0;
    for c in &a.candidates {
        if feasible_only && !c.feasibility.feasible() {
            continue;
        }
        n += 1;
        let grid = latex_grid(c.invariant.grid.shape, |q| {
            c.invariant.grid.get(q).map(|x| {
                let parts: Vec<String> = x.equations().iter().map(|e| e.latex()).collect();
                if parts.is_empty() {
                    x.latex()
                } else {
                    latex_stack(&parts)
                }
            })
        });
        let tasks: Vec<String> = c.invariant.subgraph.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "  {n} & \\{{{}\\}} & ${}$ \\\\", tasks.join(", "), grid.replace('\n', " "));
    }
    s.push_str("\\end{tabular}\n");
    s
}

fn render_latex(d: &Derivation, sel: &Selection) -> Result<String, RenderError> {
    let analyses = sel.analyses(d)?;
    let parts: Vec<String> = match sel.stage {
        Stage::Pme => analyses.iter().map(|a| latex_pme(a)).collect(),
        Stage::Tasks => analyses.iter().map(|a| latex_tasks(a)).collect(),
        Stage::Candidates => analyses.iter().map(|a| latex_invariants(a, false)).collect(),
        Stage::Invariants => analyses.iter().map(|a| latex_invariants(a, true)).collect(),
        stage => return Err(RenderError::Unsupported { stage, format: Format::Latex }),
    };
    Ok(parts.join("\n"))
}

// ---------------------------------------------------------------- entry

/// Graphviz output, one graph per selected PME.
pub fn dot_graphs(d: &Derivation, sel: &Selection) -> Result<Vec<(usize, String)>, RenderError> {
    if sel.stage != Stage::Graph {
        return Err(RenderError::Unsupported { stage: sel.stage, format: Format::Dot });
    }
    Ok(sel
        .analyses(d)?
        .into_iter()
        .filter_map(|a| a.graph.as_ref().map(|g| (a.index, g.to_dot(&format!("{} PME {}", d.spec.name, a.index)))))
        .collect())
}

/// Renders one stage in one format.
pub fn render(d: &Derivation, sel: &Selection, format: Format) -> Result<String, RenderError> {
    match format {
        Format::Text => render_text(d, sel),
        Format::Json => build_report(d, sel).map(|r| to_json(&r)),
        Format::Latex => render_latex(d, sel),
        Format::Dot => Ok(dot_graphs(d, sel)?.into_iter().map(|(_, g)| g).collect::<Vec<_>>().join("\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::generate_invariants;
    use crate::opspec::parse_spec;

    fn lu() -> Derivation {
        generate_invariants(&parse_spec(include_str!("../../../corpus/lu.clk")).unwrap())
    }

    #[test]
    fn text_grid_aligns_columns() {
        let g = text_grid(Shape::TwoByTwo, |q| Some(q.to_string().repeat(2)));
        assert_eq!(g, " TLTL │ TRTR\n──────┼──────\n BLBL │ BRBR\n");
        let one = text_grid(Shape::OneByTwo, |q| (q == Quadrant::L).then(|| "x".into()));
        assert_eq!(one, " x │\n");
    }

    #[test]
    fn lu_pme_text() {
        let d = lu();
        let s = render(&d, &Selection { stage: Stage::Pme, pme: None }, Format::Text).unwrap();
        assert!(s.contains(" {L_TL, U_TL} = LU(A_TL) │ U_TR = L_TL^-1 A_TR\n"), "{s}");
        assert!(s.contains("Assumptions: NonSingular(U_TL), ExistsLU(A_BR - L_BL U_TR)"));
    }

    #[test]
    fn invariant_text_has_five_grids() {
        let d = lu();
        let s = render(&d, &Selection { stage: Stage::Invariants, pme: None }, Format::Text).unwrap();
        assert_eq!(s.matches("Invariant ").count(), 5);
        assert_eq!(s.matches("Guard: size(A_TL) < size(A)").count(), 5);
    }

    #[test]
    fn latex_mirrors_partitioned_arrays() {
        let d = lu();
        let s = render(&d, &Selection { stage: Stage::Pme, pme: Some(1) }, Format::Latex).unwrap();
        assert!(s.contains("\\begin{array}{c|c}"));
        assert!(s.contains("\\hline"));
        let err = render(&d, &Selection { stage: Stage::Graph, pme: None }, Format::Latex);
        assert!(matches!(err, Err(RenderError::Unsupported { .. })));
    }

    #[test]
    fn json_sections_follow_stage() {
        let d = lu();
        let r = build_report(&d, &Selection { stage: Stage::Tasks, pme: None }).unwrap();
        assert_eq!(r.schema_version, SCHEMA_VERSION);
        assert!(r.pmes[0].tasks.is_some());
        assert!(r.pmes[0].graph.is_none());
        let r = build_report(&d, &Selection { stage: Stage::RuleSets, pme: None }).unwrap();
        assert!(r.pmes.is_empty());
        let r = build_report(&d, &Selection { stage: Stage::Invariants, pme: None }).unwrap();
        assert_eq!(r.pmes[0].invariants.as_ref().unwrap().len(), 5);
        let back: DerivationReport = serde_json::from_str(&to_json(&r)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn missing_pme_is_an_error() {
        let d = lu();
        let r = render(&d, &Selection { stage: Stage::Pme, pme: Some(4) }, Format::Text);
        assert_eq!(r, Err(RenderError::NoSuchPme(4)));
    }

    #[test]
    fn stage_and_format_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        for f in Format::ALL {
            assert_eq!(f.name().parse::<Format>().unwrap(), f);
        }
        assert!("html".parse::<Format>().is_err());
    }
}
