//! Golden files under `corpus/goldens/`. Run with `UPDATE_GOLDENS=1` to
//! regenerate them after an intended change.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use loopinv::invariants::generate_invariants;
use loopinv::opspec::{parse_spec, OperationSpec};
use loopinv::partition::{apply_ruleset, enumerate_rule_sets};
use loopinv::report::{render, Format, Selection, Stage};
use loopinv::rewrite::distribute;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Block form of every postcondition equation and the per-quadrant
/// equations after distribution, for every rule set.
fn distributed(spec: &OperationSpec) -> String {
    let mut s = String::new();
    for (i, rs) in enumerate_rule_sets(spec).iter().enumerate() {
        let _ = writeln!(s, "rule set {}: {}", i + 1, rs.summary());
        let parts = apply_ruleset(spec, rs);
        for p in &parts {
            let _ = writeln!(s, "  block form: {}", p.text());
        }
        match distribute(&parts) {
            Ok(grid) => {
                for (q, eqs) in &grid.cells {
                    for e in eqs {
                        let _ = writeln!(s, "  {q}: {}", e.text());
                        let _ = writeln!(s, "  {q}: {} = {}", e.lhs.sexpr(), e.rhs.sexpr());
                    }
                }
            }
            Err(e) => {
                let _ = writeln!(s, "  error: {e}");
            }
        }
    }
    s
}

fn generate() -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "clk"))
        .collect();
    entries.sort();
    for path in entries {
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        let spec = parse_spec(&fs::read_to_string(&path).unwrap()).unwrap();
        let d = generate_invariants(&spec);
        let all = Selection { stage: Stage::Invariants, pme: None };
        out.insert(format!("{stem}.report.json"), render(&d, &all, Format::Json).unwrap());
        out.insert(format!("{stem}.invariants.txt"), render(&d, &all, Format::Text).unwrap());
        let pme = Selection { stage: Stage::Pme, pme: None };
        out.insert(format!("{stem}.pme.tex"), render(&d, &pme, Format::Latex).unwrap());
        out.insert(format!("{stem}.distributed.txt"), distributed(&spec));
    }
    out
}

#[test]
fn goldens_regenerate_identically() {
    let dir = corpus_dir().join("goldens");
    let generated = generate();
    if std::env::var_os("UPDATE_GOLDENS").is_some() {
        fs::create_dir_all(&dir).unwrap();
        for (name, content) in &generated {
            fs::write(dir.join(name), content).unwrap();
        }
    }
    let mut on_disk: Vec<String> = fs::read_dir(&dir)
        .expect("corpus/goldens exists; run with UPDATE_GOLDENS=1 to create it")
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    on_disk.sort();
    let expected: Vec<String> = generated.keys().cloned().collect();
    assert_eq!(on_disk, expected, "stale or missing golden files");
    for (name, content) in &generated {
        let golden = fs::read_to_string(dir.join(name)).unwrap();
        assert!(golden == *content, "{name} differs from its golden file");
    }
}

#[test]
fn sylvester_block_form_golden_has_eight_equalities() {
    let spec = parse_spec(&fs::read_to_string(corpus_dir().join("coupled_sylvester.clk")).unwrap()).unwrap();
    let text = distributed(&spec);
    let third = text.split("rule set 3:").nth(1).unwrap();
    let eqs: Vec<&str> = third.lines().filter(|l| l.starts_with("  T") || l.starts_with("  B")).collect();
    // Each equation appears once as text and once as an s-expression.
    assert_eq!(eqs.len(), 16);
    assert!(third.contains("  TL: A_TL X_TL + Y_TL B_TL = C_TL\n"), "{third}");
    assert!(third.contains("  TL: D_TL X_TL + Y_TL E_TL = F_TL\n"));
}
