//! Block arithmetic over partitioned operands and boundary rewriting of
//! predicates at the start and end of a loop.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{normalize, operands_of, substitute, Equation, Expr, Extent, OpRef, SolvedEquation};
use crate::opspec::OperationSpec;
use crate::partition::{fix_extent, Blocks, PartitionedEquation, PartitionedExpr, Quadrant, RuleSet, Shape};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("non-conformal blocks: {0}")]
    NonConformal(String),
    #[error("inverse of a partitioned block is not supported: {0}")]
    PartitionedInverse(String),
}

/// Per-quadrant values, in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    pub shape: Shape,
    pub cells: Vec<(Quadrant, T)>,
}

impl<T> Grid<T> {
    pub fn get(&self, q: Quadrant) -> Option<&T> {
        self.cells.iter().find(|(k, _)| *k == q).map(|(_, v)| v)
    }

    pub fn map<U>(&self, mut f: impl FnMut(Quadrant, &T) -> U) -> Grid<U> {
        Grid { shape: self.shape, cells: self.cells.iter().map(|(q, v)| (*q, f(*q, v))).collect() }
    }
}

fn add(a: Blocks, b: Blocks) -> Result<Blocks, RewriteError> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(RewriteError::NonConformal(format!("{} + {}", a.text(), b.text())));
    }
    let cells = a.cells.into_iter().zip(b.cells).map(|(x, y)| normalize(&Expr::Plus(vec![x, y]))).collect();
    Ok(Blocks { rows: a.rows, cols: a.cols, cells })
}

fn mul(a: &Blocks, b: &Blocks) -> Result<Blocks, RewriteError> {
    if a.cols != b.rows {
        return Err(RewriteError::NonConformal(format!("{} {}", a.text(), b.text())));
    }
    let mut cells = Vec::with_capacity(a.rows * b.cols);
    for i in 0..a.rows {
        for j in 0..b.cols {
            let terms = (0..a.cols).map(|l| Expr::Times(vec![a.at(i, l).clone(), b.at(l, j).clone()])).collect();
            cells.push(normalize(&Expr::Plus(terms)));
        }
    }
    Ok(Blocks { rows: a.rows, cols: b.cols, cells })
}

/// Evaluates block arithmetic down to a single grid of expressions.
pub fn eval_blocks(e: &PartitionedExpr) -> Result<Blocks, RewriteError> {
    match e {
        PartitionedExpr::Blocks(b) => {
            Ok(Blocks { rows: b.rows, cols: b.cols, cells: b.cells.iter().map(normalize).collect() })
        }
        PartitionedExpr::Plus(xs) => {
            let mut it = xs.iter();
            let mut acc = eval_blocks(it.next().expect("non-empty sum"))?;
            for x in it {
                acc = add(acc, eval_blocks(x)?)?;
            }
            Ok(acc)
        }
        PartitionedExpr::Times(xs) => {
            let mut it = xs.iter();
            let mut acc = eval_blocks(it.next().expect("non-empty product"))?;
            for x in it {
                acc = mul(&acc, &eval_blocks(x)?)?;
            }
            Ok(acc)
        }
        PartitionedExpr::Neg(x) => {
            let b = eval_blocks(x)?;
            Ok(Blocks {
                rows: b.rows,
                cols: b.cols,
                cells: b.cells.iter().map(|c| normalize(&Expr::neg(c.clone()))).collect(),
            })
        }
        PartitionedExpr::Transpose(x) => {
            let b = eval_blocks(x)?;
            let mut cells = Vec::with_capacity(b.cells.len());
            for j in 0..b.cols {
                for i in 0..b.rows {
                    cells.push(normalize(&Expr::transpose(b.at(i, j).clone())));
                }
            }
            Ok(Blocks { rows: b.cols, cols: b.rows, cells })
        }
        PartitionedExpr::Inverse(x) => {
            let b = eval_blocks(x)?;
            if b.rows != 1 || b.cols != 1 {
                return Err(RewriteError::PartitionedInverse(b.text()));
            }
            Ok(Blocks::single(normalize(&Expr::inverse(b.cells[0].clone()))))
        }
    }
}

/// Carries out the block arithmetic of every partitioned equation and
/// distributes the equality over the resulting grid. Each grid position
/// receives one equation per postcondition equation, in postcondition
/// order; trivial `0 = 0` equations are dropped.
pub fn distribute(partitioned: &[PartitionedEquation]) -> Result<Grid<Vec<Equation>>, RewriteError> {
    let mut shape = None;
    let mut per_eq = Vec::new();
    for peq in partitioned {
        let l = eval_blocks(&peq.lhs)?;
        let r = eval_blocks(&peq.rhs)?;
        if (l.rows, l.cols) != (r.rows, r.cols) {
            return Err(RewriteError::NonConformal(peq.text()));
        }
        let s = Shape::from_grid(l.rows, l.cols);
        if *shape.get_or_insert(s) != s {
            return Err(RewriteError::NonConformal(peq.text()));
        }
        per_eq.push((l, r));
    }
    let shape = shape.unwrap_or(Shape::OneByOne);
    let (rows, cols) = shape.grid();
    let mut cells = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let eqs: Vec<Equation> = per_eq
                .iter()
                .map(|(l, r)| Equation::new(l.at(i, j).clone(), r.at(i, j).clone()))
                .filter(|eq| !eq.difference().is_zero())
                .collect();
            cells.push((shape.quadrant_at(i, j), eqs));
        }
    }
    Ok(Grid { shape, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Boundary {
    /// Before the first iteration: every leading block is empty.
    Initial,
    /// After the last iteration: every leading block covers its operand.
    Final,
}

enum Fixed {
    Empty,
    Whole(OpRef),
    Partial(OpRef),
}

fn fix_ref(r: &OpRef, boundary: Boundary, rs: &RuleSet, spec: &OperationSpec) -> Fixed {
    let Some((rows, cols)) = rs.ref_dims(spec, r) else {
        return Fixed::Partial(r.clone());
    };
    let leading_empty = boundary == Boundary::Initial;
    let (rows, cols) = (fix_extent(&rows, leading_empty), fix_extent(&cols, leading_empty));
    if rows.extent == Extent::Zero || cols.extent == Extent::Zero {
        Fixed::Empty
    } else if rows.extent == Extent::Full && cols.extent == Extent::Full {
        Fixed::Whole(OpRef::whole(&r.name))
    } else {
        Fixed::Partial(r.clone())
    }
}

/// Rewrites a predicate (the equalities of all constrained quadrants) at a
/// loop boundary. Empty sub-operands become zero, full ones are renamed to
/// the operand itself, and equalities that become vacuous are removed: those
/// whose outputs are all empty, and those that read `T = T`.
pub fn boundary_rewrite(
    predicate: &[SolvedEquation],
    boundary: Boundary,
    rs: &RuleSet,
    spec: &OperationSpec,
) -> Vec<SolvedEquation> {
    let mut out = Vec::new();
    for eq in predicate {
        let mut outputs = Vec::new();
        for o in &eq.outputs {
            match fix_ref(o, boundary, rs, spec) {
                Fixed::Empty => {}
                Fixed::Whole(r) | Fixed::Partial(r) => outputs.push(r),
            }
        }
        if outputs.is_empty() {
            continue;
        }
        let mut bindings = BTreeMap::new();
        for r in operands_of(&eq.rhs) {
            match fix_ref(&r, boundary, rs, spec) {
                Fixed::Empty => {
                    bindings.insert(r, Expr::Zero);
                }
                Fixed::Whole(w) => {
                    bindings.insert(r, Expr::Ref(w));
                }
                Fixed::Partial(_) => {}
            }
        }
        let rhs = substitute(&eq.rhs, &bindings);
        if outputs.len() == 1 && rhs == Expr::Ref(outputs[0].clone()) {
            continue;
        }
        out.push(SolvedEquation::new(outputs, rhs));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opspec::parse_spec;
    use crate::partition::{apply_ruleset, enumerate_rule_sets};

    fn texts(eqs: &[Equation]) -> Vec<String> {
        eqs.iter().map(|e| e.text()).collect()
    }

    #[test]
    fn lu_distribution() {
        let spec = parse_spec(include_str!("../../../corpus/lu.clk")).unwrap();
        let rs = &enumerate_rule_sets(&spec)[0];
        let grid = distribute(&apply_ruleset(&spec, rs)).unwrap();
        assert_eq!(grid.shape, Shape::TwoByTwo);
        let cell = |q| texts(grid.get(q).unwrap());
        assert_eq!(cell(Quadrant::TL), vec!["L_TL U_TL = A_TL"]);
        assert_eq!(cell(Quadrant::TR), vec!["L_TL U_TR = A_TR"]);
        assert_eq!(cell(Quadrant::BL), vec!["L_BL U_TL = A_BL"]);
        assert_eq!(cell(Quadrant::BR), vec!["L_BL U_TR + L_BR U_BR = A_BR"]);
    }

    #[test]
    fn sylvester_full_partition_pairs() {
        let spec = parse_spec(include_str!("../../../corpus/coupled_sylvester.clk")).unwrap();
        let rs = &enumerate_rule_sets(&spec)[2];
        let grid = distribute(&apply_ruleset(&spec, rs)).unwrap();
        assert_eq!(grid.cells.iter().map(|(_, e)| e.len()).sum::<usize>(), 8);
        assert_eq!(
            texts(grid.get(Quadrant::TL).unwrap()),
            vec!["A_TL X_TL + Y_TL B_TL = C_TL", "D_TL X_TL + Y_TL E_TL = F_TL"]
        );
        assert_eq!(
            texts(grid.get(Quadrant::BR).unwrap()),
            vec![
                "A_BL X_TR + A_BR X_BR + Y_BL B_TR + Y_BR B_BR = C_BR",
                "D_BL X_TR + D_BR X_BR + Y_BL E_TR + Y_BR E_BR = F_BR"
            ]
        );
    }

    #[test]
    fn unpartitioned_grid_is_whole() {
        let eq = PartitionedEquation {
            lhs: PartitionedExpr::Blocks(Blocks::single(Expr::r("X"))),
            rhs: PartitionedExpr::Blocks(Blocks::single(Expr::r("A"))),
        };
        let grid = distribute(&[eq]).unwrap();
        assert_eq!(grid.shape, Shape::OneByOne);
        assert_eq!(texts(grid.get(Quadrant::Whole).unwrap()), vec!["X = A"]);
    }

    #[test]
    fn nonconformal_blocks_are_reported() {
        let two = Blocks { rows: 2, cols: 1, cells: vec![Expr::r("a"), Expr::r("b")] };
        let e = PartitionedExpr::Times(vec![PartitionedExpr::Blocks(two.clone()), PartitionedExpr::Blocks(two)]);
        assert!(matches!(eval_blocks(&e), Err(RewriteError::NonConformal(_))));
    }

    #[test]
    fn lu_boundaries() {
        let spec = parse_spec(include_str!("../../../corpus/lu.clk")).unwrap();
        let rs = &enumerate_rule_sets(&spec)[0];
        let q = |n: &str, quad| Expr::Ref(OpRef::quad(n, quad));
        let update = SolvedEquation::single(
            OpRef::quad("A", Quadrant::BR),
            Expr::sub(q("A", Quadrant::BR), Expr::times(vec![q("L", Quadrant::BL), q("U", Quadrant::TR)])),
        );
        let tl = SolvedEquation::new(
            vec![OpRef::quad("L", Quadrant::TL), OpRef::quad("U", Quadrant::TL)],
            Expr::Apply { op: "LU".into(), args: vec![q("A", Quadrant::TL)], outputs: 2 },
        );
        let pred = vec![tl.clone(), update.clone()];
        assert!(boundary_rewrite(&pred, Boundary::Initial, rs, &spec).is_empty());
        let fin = boundary_rewrite(&pred, Boundary::Final, rs, &spec);
        assert_eq!(fin.len(), 1);
        assert_eq!(fin[0].text(), "{L, U} = LU(A)");
        // Idempotence.
        assert_eq!(boundary_rewrite(&fin, Boundary::Final, rs, &spec), fin);
    }
}
