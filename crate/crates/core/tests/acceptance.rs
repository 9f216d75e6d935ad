//! Acceptance suite: one line per criterion, `[PASS]` or `[FAIL]`, with the
//! reason for any failure. Exits non-zero if a criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use loopinv::expr::Expr;
use loopinv::invariants::{enumerate_downsets, generate_invariants, Derivation, PmeAnalysis};
use loopinv::numeric::{check_derivation, dimension_names, random_instance};
use loopinv::opspec::parse_spec;
use loopinv::partition::Quadrant;
use loopinv::report::{build_report, to_json, Selection, Stage};
use loopinv::tasks::{DepGraph, DepKind, Edge, Task};

const LU: &str = include_str!("../../../corpus/lu.clk");
const SYLVESTER: &str = include_str!("../../../corpus/coupled_sylvester.clk");

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn derive(src: &str) -> Derivation {
    generate_invariants(&parse_spec(src).expect("corpus parses"))
}

fn cells(a: &PmeAnalysis) -> Vec<String> {
    a.pme.grid.cells.iter().map(|(_, c)| c.solved.text()).collect()
}

fn grid_of(a: &PmeAnalysis, tasks: &[usize]) -> Result<Vec<String>, String> {
    let want: BTreeSet<usize> = tasks.iter().copied().collect();
    let c =
        a.candidates.iter().find(|c| c.invariant.subgraph == want).ok_or_else(|| format!("no candidate {want:?}"))?;
    ensure!(c.feasibility.feasible(), "candidate {want:?} rejected: {:?}", c.feasibility.witness);
    Ok(c.invariant.grid.cells.iter().map(|(_, s)| s.text()).collect())
}

fn ac1() -> Outcome {
    let d = derive(LU);
    ensure!(d.rule_sets.len() == 1, "{} rule sets", d.rule_sets.len());
    ensure!(d.analyses.len() == 1, "{} PMEs", d.analyses.len());
    let a = &d.analyses[0];
    let pme = [
        "{L_TL, U_TL} = LU(A_TL)",
        "U_TR = L_TL^-1 A_TR",
        "L_BL = A_BL U_TL^-1",
        "{L_BR, U_BR} = LU(A_BR - L_BL U_TR)",
    ];
    ensure!(cells(a) == pme, "PME {:?}", cells(a));
    let tasks: Vec<String> = a.tasks.iter().map(|t| t.text()).collect();
    let expected = [
        "{L_TL, U_TL} := LU(A_TL)",
        "U_TR := L_TL^-1 A_TR",
        "L_BL := A_BL U_TL^-1",
        "A_BR := A_BR - L_BL U_TR",
        "{L_BR, U_BR} := LU(A_BR)",
    ];
    ensure!(tasks == expected, "tasks {tasks:?}");
    let g = a.graph.as_ref().ok_or("no graph")?;
    let edges: BTreeSet<(usize, usize)> = g.edges.iter().map(|e| (e.from, e.to)).collect();
    let want: BTreeSet<(usize, usize)> = [(1, 2), (1, 3), (2, 4), (3, 4), (4, 5)].into_iter().collect();
    ensure!(edges == want, "edges {edges:?}");
    ensure!(g.levels == vec![vec![1], vec![2, 3], vec![4], vec![5]], "levels {:?}", g.levels);
    let subsets: Vec<Vec<usize>> =
        a.candidates.iter().map(|c| c.invariant.subgraph.iter().copied().collect()).collect();
    let listed = vec![vec![], vec![1], vec![1, 2], vec![1, 3], vec![1, 2, 3], vec![1, 2, 3, 4], vec![1, 2, 3, 4, 5]];
    ensure!(subsets == listed, "candidates {subsets:?}");
    ensure!(a.invariants().count() == 5, "{} invariants", a.invariants().count());
    // Every invariant, in enumeration order.
    let ne = "≠";
    let rows: [(&[usize], [&str; 4]); 5] = [
        (&[1], [pme[0], ne, ne, ne]),
        (&[1, 2], [pme[0], pme[1], ne, ne]),
        (&[1, 3], [pme[0], ne, pme[2], ne]),
        (&[1, 2, 3], [pme[0], pme[1], pme[2], ne]),
        (&[1, 2, 3, 4], [pme[0], pme[1], pme[2], "A_BR = A_BR - L_BL U_TR"]),
    ];
    for (ids, row) in rows {
        let got = grid_of(a, ids)?;
        ensure!(got == row, "invariant {ids:?}: {got:?}");
    }
    Ok(())
}

/// Maps the workspace naming of a partial update (`X_q = C_q - ...`)
/// to the in-place naming used here (`C_q = C_q - ...`).
fn in_place(s: &str) -> String {
    let (lhs, rhs) = s.split_once(" = ").expect("equation");
    let lhs = lhs.replacen("X_", "C_", 1).replacen("Y_", "F_", 1);
    format!("{lhs} = {rhs}")
}

fn ac2() -> Outcome {
    let d = derive(SYLVESTER);
    ensure!(d.rule_sets.len() == 3, "{} rule sets", d.rule_sets.len());
    ensure!(d.analyses.len() == 3, "{} PMEs", d.analyses.len());
    let table2: [&[&str]; 3] = [
        &[
            "{X_L, Y_L} = Psi(A, B_TL, C_L, D, E_TL, F_L)",
            "{X_R, Y_R} = Psi(A, B_BR, C_R - Y_L B_TR, D, E_BR, F_R - Y_L E_TR)",
        ],
        &[
            "{X_T, Y_T} = Psi(A_TL, B, C_T, D_TL, E, F_T)",
            "{X_B, Y_B} = Psi(A_BR, B, C_B - A_BL X_T, D_BR, E, F_B - D_BL X_T)",
        ],
        &[
            "{X_TL, Y_TL} = Psi(A_TL, B_TL, C_TL, D_TL, E_TL, F_TL)",
            "{X_TR, Y_TR} = Psi(A_TL, B_BR, C_TR - Y_TL B_TR, D_TL, E_BR, F_TR - Y_TL E_TR)",
            "{X_BL, Y_BL} = Psi(A_BR, B_TL, C_BL - A_BL X_TL, D_BR, E_TL, F_BL - D_BL X_TL)",
            "{X_BR, Y_BR} = Psi(A_BR, B_BR, C_BR - A_BL X_TR - Y_BL B_TR, D_BR, E_BR, F_BR - D_BL X_TR - Y_BL E_TR)",
        ],
    ];
    for (a, want) in d.analyses.iter().zip(table2) {
        ensure!(cells(a) == want, "PME {}: {:?}", a.index, cells(a));
    }
    let a = &d.analyses[2];
    let tasks: Vec<String> = a.tasks.iter().map(|t| t.text()).collect();
    let listed = [
        "{X_TL, Y_TL} := Psi(A_TL, B_TL, C_TL, D_TL, E_TL, F_TL)",
        "C_TR := C_TR - Y_TL B_TR",
        "F_TR := F_TR - Y_TL E_TR",
        "{X_TR, Y_TR} := Psi(A_TL, B_BR, C_TR, D_TL, E_BR, F_TR)",
        "C_BL := C_BL - A_BL X_TL",
        "F_BL := F_BL - D_BL X_TL",
        "{X_BL, Y_BL} := Psi(A_BR, B_TL, C_BL, D_BR, E_TL, F_BL)",
        "C_BR := C_BR - A_BL X_TR",
        "C_BR := C_BR - Y_BL B_TR",
        "F_BR := F_BR - D_BL X_TR",
        "F_BR := F_BR - Y_BL E_TR",
        "{X_BR, Y_BR} := Psi(A_BR, B_BR, C_BR, D_BR, E_BR, F_BR)",
    ];
    ensure!(tasks == listed, "tasks {tasks:?}");
    let g = a.graph.as_ref().ok_or("no graph")?;
    let edges: BTreeSet<(usize, usize)> = g.edges.iter().map(|e| (e.from, e.to)).collect();
    let box14: BTreeSet<(usize, usize)> = [
        (1, 2),
        (1, 3),
        (1, 5),
        (1, 6),
        (2, 4),
        (3, 4),
        (5, 7),
        (6, 7),
        (4, 8),
        (4, 10),
        (7, 9),
        (7, 11),
        (8, 12),
        (9, 12),
        (10, 12),
        (11, 12),
    ]
    .into_iter()
    .collect();
    ensure!(edges == box14, "edges {edges:?}");
    ensure!(g.edges.iter().all(|e| e.kind == DepKind::True), "non-true edge");
    let group = |id: usize| a.tasks[id - 1].commute_group;
    ensure!(group(8).is_some() && group(8) == group(9), "8 and 9 do not commute");
    ensure!(group(10).is_some() && group(10) == group(11), "10 and 11 do not commute");
    ensure!(group(8) != group(10), "groups merged");
    ensure!(!edges.contains(&(8, 9)) && !edges.contains(&(10, 11)), "intra-group edge");
    ensure!(a.candidates.len() == 66, "{} candidates", a.candidates.len());
    ensure!(a.invariants().count() == 64, "{} invariants", a.invariants().count());
    // Reference invariants, written with workspace naming.
    let tl = "{X_TL, Y_TL} = Psi(A_TL, B_TL, C_TL, D_TL, E_TL, F_TL)";
    let ne = "≠".to_string();
    let rows: [(&[usize], [String; 4]); 4] = [
        (&[1], [tl.into(), ne.clone(), ne.clone(), ne.clone()]),
        (&[1, 2], [tl.into(), in_place("X_TR = C_TR - Y_TL B_TR"), ne.clone(), ne.clone()]),
        (&[1, 3], [tl.into(), in_place("Y_TR = F_TR - Y_TL E_TR"), ne.clone(), ne.clone()]),
        (&[1, 5], [tl.into(), ne.clone(), in_place("X_BL = C_BL - A_BL X_TL"), ne.clone()]),
    ];
    for (ids, row) in rows {
        let got = grid_of(a, ids)?;
        ensure!(got == row, "invariant {ids:?}: {got:?}");
    }
    let max: Vec<usize> = (1..=11).collect();
    let got = grid_of(a, &max)?;
    let row64 = [
        tl.to_string(),
        table2[2][1].to_string(),
        table2[2][2].to_string(),
        format!(
            "{}; {}",
            in_place("X_BR = C_BR - A_BL X_TR - Y_BL B_TR"),
            in_place("Y_BR = F_BR - D_BL X_TR - Y_BL E_TR")
        ),
    ];
    ensure!(got == row64, "maximal invariant {got:?}");
    Ok(())
}

fn dummy_graph(n: usize, edges: &BTreeSet<(usize, usize)>) -> DepGraph {
    let nodes = (1..=n)
        .map(|id| Task {
            id,
            outputs: Vec::new(),
            inputs: Vec::new(),
            expr: Expr::Zero,
            quadrant: Quadrant::Whole,
            commute_group: None,
        })
        .collect();
    let edges = edges.iter().map(|&(from, to)| Edge { from, to, kind: DepKind::True }).collect();
    DepGraph::from_edges(nodes, edges).expect("acyclic")
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for round in 0..200 {
        let n = rng.gen_range(1..=12);
        let density = rng.gen_range(0.05..0.6);
        let mut edges = BTreeSet::new();
        for i in 1..=n {
            for j in i + 1..=n {
                if rng.gen_bool(density) {
                    edges.insert((i, j));
                }
            }
        }
        let listed = enumerate_downsets(&dummy_graph(n, &edges));
        let found: BTreeSet<BTreeSet<usize>> = listed.iter().cloned().collect();
        ensure!(found.len() == listed.len(), "DAG {round}: duplicate subsets");
        let brute: BTreeSet<BTreeSet<usize>> = (0u32..1 << n)
            .map(|m| (1..=n).filter(|i| m >> (i - 1) & 1 == 1).collect::<BTreeSet<usize>>())
            .filter(|s| edges.iter().all(|(a, b)| !s.contains(b) || s.contains(a)))
            .collect();
        ensure!(found == brute, "DAG {round} ({n} nodes): {} listed, {} closed", found.len(), brute.len());
    }
    Ok(())
}

fn ac4() -> Outcome {
    let jobs: Vec<(&str, u64)> =
        [LU, SYLVESTER].into_iter().flat_map(|src| (0..20).map(move |seed| (src, seed))).collect();
    let results: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(src, seed)| {
                s.spawn(move || {
                    let d = derive(src);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let sizes: BTreeMap<String, usize> =
                        dimension_names(&d.spec).into_iter().map(|n| (n, rng.gen_range(2..=5))).collect();
                    let inst = random_instance(&d.spec, &sizes, seed).map_err(|e| e.to_string())?;
                    let rep = check_derivation(&d, &inst).map_err(|e| e.to_string())?;
                    ensure!(rep.checks > 0, "{} seed {seed}: nothing checked", d.spec.name);
                    ensure!(
                        rep.passed(),
                        "{} seed {seed} {sizes:?}: {} of {} checks failed, first: {}",
                        d.spec.name,
                        rep.failures.len(),
                        rep.checks,
                        rep.failures[0]
                    );
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panicked".into()))).collect()
    });
    results.into_iter().collect()
}

fn ac5() -> Outcome {
    for src in [LU, SYLVESTER] {
        let d = derive(src);
        for a in &d.analyses {
            let n = a.tasks.len();
            let rejected: Vec<usize> =
                a.candidates.iter().filter(|c| !c.feasibility.feasible()).map(|c| c.invariant.subgraph.len()).collect();
            ensure!(rejected == vec![0, n], "{} PME {}: rejected sizes {rejected:?}", d.spec.name, a.index);
            ensure!(
                a.invariants().count() == a.candidates.len() - 2,
                "{} PME {}: {} invariants of {} candidates",
                d.spec.name,
                a.index,
                a.invariants().count(),
                a.candidates.len()
            );
        }
    }
    Ok(())
}

fn ac6() -> Outcome {
    for src in [LU, SYLVESTER] {
        let run = || {
            let d = derive(src);
            to_json(&build_report(&d, &Selection { stage: Stage::Invariants, pme: None }).unwrap())
        };
        let (a, b) = (run(), run());
        ensure!(a == b, "reports differ");
        ensure!(a.contains("\"schema_version\": 1"), "no schema version");
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, Duration, fn() -> Outcome); 6] = [
        ("AC1", "LU end-to-end", Duration::from_secs(1), ac1),
        ("AC2", "coupled Sylvester end-to-end", Duration::from_secs(5), ac2),
        ("AC3", "downset enumeration equals brute force on 200 DAGs", Duration::from_secs(10), ac3),
        ("AC4", "numeric validation at every split point", Duration::from_secs(30), ac4),
        ("AC5", "feasibility rejects exactly the empty and full candidates", Duration::from_secs(5), ac5),
        ("AC6", "deterministic JSON reports", Duration::from_secs(5), ac6),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let mut outcome = run();
        let took = start.elapsed();
        if outcome.is_ok() && took > limit {
            outcome = Err(format!("took {took:.2?}, limit {limit:?}"));
        }
        match outcome {
            Ok(()) => println!("{id} [PASS] {name} ({took:.2?})"),
            Err(why) => {
                failed += 1;
                println!("{id} [FAIL] {name} ({took:.2?}): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
