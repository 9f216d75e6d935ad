//! Exact rational evaluation: random instances, a reference solver that is
//! independent of the symbolic pipeline, and numeric checks of PMEs and
//! loop invariants at every split point.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{Equation, Expr, Half, OpRef, Operand, Property, SolvedEquation, UNIT_DIM};
use crate::invariants::{Derivation, PmeAnalysis, QuadrantState};
use crate::opspec::OperationSpec;
use crate::partition::{Quadrant, RuleSet};
use crate::patterns::Registry;

pub type Q = BigRational;

fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NumericError {
    #[error("singular system: {0}")]
    Singular(String),
    #[error("inconsistent system: {0}")]
    Inconsistent(String),
    #[error("postcondition is not linear in the outputs and has no direct solver: {0}")]
    Nonlinear(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown operand `{0}`")]
    UnknownOperand(String),
    #[error("unknown operation `{0}`")]
    UnknownOperation(String),
    #[error("no size given for dimension `{0}`")]
    MissingSize(String),
}

/// Dense matrix over the rationals. Either dimension may be zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                f.write_str("; ")?;
            }
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            f.write_str(&row.join(" "))?;
        }
        f.write_str("]")
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![Q::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    /// Row-major integer entries.
    pub fn from_ints(rows: usize, cols: usize, vals: &[i64]) -> Self {
        assert_eq!(vals.len(), rows * cols);
        Matrix { rows, cols, data: vals.iter().map(|&v| q(v)).collect() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entries(&self) -> &[Q] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    fn same_dims(&self, o: &Matrix, what: &str) -> Result<(), NumericError> {
        if self.dims() != o.dims() {
            return Err(NumericError::Dimension(format!(
                "{what} of {}x{} and {}x{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, o: &Matrix) -> Result<Matrix, NumericError> {
        self.same_dims(o, "sum")?;
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a + b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, o: &Matrix) -> Result<Matrix, NumericError> {
        self.same_dims(o, "difference")?;
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a - b).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn neg(&self) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| -a).collect() }
    }

    pub fn mul(&self, o: &Matrix) -> Result<Matrix, NumericError> {
        if self.cols != o.rows {
            return Err(NumericError::Dimension(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, o.rows, o.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for s in 0..self.cols {
                let a = &self[(i, s)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let t = a * &o[(s, j)];
                    out[(i, j)] += t;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    /// Gauss-Jordan inverse.
    pub fn inverse(&self) -> Result<Matrix, NumericError> {
        if self.rows != self.cols {
            return Err(NumericError::Dimension(format!("inverse of {}x{}", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        for c in 0..n {
            let p = (c..n)
                .find(|&r| !a[(r, c)].is_zero())
                .ok_or_else(|| NumericError::Singular(format!("{n}x{n} matrix is not invertible")))?;
            a.swap_rows(p, c);
            inv.swap_rows(p, c);
            let d = a[(c, c)].clone();
            for j in 0..n {
                a[(c, j)] /= &d;
                inv[(c, j)] /= &d;
            }
            for r in 0..n {
                if r == c || a[(r, c)].is_zero() {
                    continue;
                }
                let f = a[(r, c)].clone();
                for j in 0..n {
                    let t = &f * &a[(c, j)];
                    a[(r, j)] -= t;
                    let t = &f * &inv[(c, j)];
                    inv[(r, j)] -= t;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    /// Rows `r0..r1`, columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Matrix {
        let mut out = Matrix::zeros(r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                out[(i - r0, j - c0)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)].clone();
            }
        }
    }
}

/// Concrete sizes and input values for one operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub sizes: BTreeMap<String, usize>,
    pub inputs: BTreeMap<String, Matrix>,
}

/// The dimension names used by an operation, excluding the unit dimension.
pub fn dimension_names(spec: &OperationSpec) -> BTreeSet<String> {
    spec.operands.iter().flat_map(|o| [o.rows.base.clone(), o.cols.base.clone()]).filter(|b| b != UNIT_DIM).collect()
}

fn resolve(sizes: &BTreeMap<String, usize>, base: &str) -> Result<usize, NumericError> {
    if base == UNIT_DIM {
        return Ok(1);
    }
    sizes.get(base).copied().ok_or_else(|| NumericError::MissingSize(base.to_string()))
}

fn primes(count: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(count);
    let mut n = 2i64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= n).all(|&p| n % p != 0) {
            out.push(n);
        }
        n += 1;
    }
    out
}

const POOL: usize = 6;

/// A random instance satisfying the declared properties of every input.
///
/// Off-diagonal entries are small integers. Triangular inputs with a free
/// diagonal draw it from a pool of primes private to that operand, so
/// products of diagonal entries of different operands never coincide; this
/// keeps coupled triangular systems uniquely solvable. Other inputs that
/// must be nonsingular or admit an LU factorization are made strictly
/// diagonally dominant.
pub fn random_instance(
    spec: &OperationSpec,
    sizes: &BTreeMap<String, usize>,
    seed: u64,
) -> Result<Instance, NumericError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tri: Vec<&str> = spec
        .inputs()
        .filter(|o| {
            (o.has(Property::LowerTriangular) || o.has(Property::UpperTriangular))
                && !o.has(Property::UnitDiagonal)
                && !o.has(Property::Zero)
                && !o.has(Property::Identity)
        })
        .map(|o| o.name.as_str())
        .collect();
    let prime_list = primes(tri.len() * POOL);
    let mut inputs = BTreeMap::new();
    for o in spec.inputs() {
        let rows = resolve(sizes, &o.rows.base)?;
        let cols = resolve(sizes, &o.cols.base)?;
        let mut m = Matrix::zeros(rows, cols);
        if o.has(Property::Identity) {
            m = Matrix::identity(rows);
        } else if !o.has(Property::Zero) {
            let lower = o.has(Property::LowerTriangular);
            let upper = o.has(Property::UpperTriangular);
            for i in 0..rows {
                for j in 0..cols {
                    if (lower && j > i) || (upper && i > j) {
                        continue;
                    }
                    m[(i, j)] = q(rng.gen_range(-4..=4));
                }
            }
            if o.has(Property::UnitDiagonal) {
                for i in 0..rows.min(cols) {
                    m[(i, i)] = Q::one();
                }
            } else if let Some(t) = tri.iter().position(|n| *n == o.name) {
                for i in 0..rows.min(cols) {
                    let p = prime_list[t + tri.len() * rng.gen_range(0..POOL)];
                    m[(i, i)] = q(if rng.gen_bool(0.5) { p } else { -p });
                }
            } else if o.has(Property::NonSingular) || o.has(Property::ExistsLU) {
                for i in 0..rows.min(cols) {
                    let off: Q = (0..cols).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
                    m[(i, i)] = off + q(rng.gen_range(1..=3));
                }
            }
        }
        inputs.insert(o.name.clone(), m);
    }
    Ok(Instance { sizes: sizes.clone(), inputs })
}

/// Result of evaluating an expression: a matrix, or a literal whose shape
/// is fixed by its context.
#[derive(Debug, Clone)]
enum Val {
    M(Matrix),
    Zero,
    Identity,
}

impl Val {
    fn into_matrix(self, rows: usize, cols: usize) -> Result<Matrix, NumericError> {
        match self {
            Val::M(m) => {
                if m.dims() != (rows, cols) {
                    return Err(NumericError::Dimension(format!("expected {rows}x{cols}, got {}x{}", m.rows, m.cols)));
                }
                Ok(m)
            }
            Val::Zero => Ok(Matrix::zeros(rows, cols)),
            Val::Identity if rows == cols => Ok(Matrix::identity(rows)),
            Val::Identity => Err(NumericError::Dimension(format!("identity of {rows}x{cols}"))),
        }
    }
}

fn shapeless(what: &str) -> NumericError {
    NumericError::Dimension(format!("cannot infer the shape of {what}"))
}

/// Evaluates expressions and solves operation applications, memoizing the
/// solutions of sub-problems.
#[derive(Debug, Clone, Default)]
pub struct Evaluator {
    registry: Registry,
    memo: HashMap<(String, Vec<Matrix>), Vec<Matrix>>,
}

type Env<'a> = dyn Fn(&OpRef) -> Result<Matrix, NumericError> + 'a;

impl Evaluator {
    pub fn new(registry: Registry) -> Self {
        Evaluator { registry, memo: HashMap::new() }
    }

    fn eval(&mut self, e: &Expr, env: &Env<'_>) -> Result<Val, NumericError> {
        Ok(match e {
            Expr::Ref(r) => Val::M(env(r)?),
            Expr::Zero => Val::Zero,
            Expr::Identity => Val::Identity,
            Expr::Plus(xs) => {
                let vals = xs.iter().map(|x| self.eval(x, env)).collect::<Result<Vec<_>, _>>()?;
                let Some(dims) = vals.iter().find_map(|v| match v {
                    Val::M(m) => Some(m.dims()),
                    _ => None,
                }) else {
                    if vals.iter().any(|v| matches!(v, Val::Identity)) {
                        return Err(shapeless("a sum of identities"));
                    }
                    return Ok(Val::Zero);
                };
                let mut acc = Matrix::zeros(dims.0, dims.1);
                for v in vals {
                    acc = acc.add(&v.into_matrix(dims.0, dims.1)?)?;
                }
                Val::M(acc)
            }
            Expr::Times(xs) => {
                let mut acc = Val::Identity;
                for x in xs {
                    acc = match (acc, self.eval(x, env)?) {
                        (Val::Zero, _) | (_, Val::Zero) => Val::Zero,
                        (Val::Identity, v) | (v, Val::Identity) => v,
                        (Val::M(a), Val::M(b)) => Val::M(a.mul(&b)?),
                    };
                }
                acc
            }
            Expr::Neg(x) => match self.eval(x, env)? {
                Val::M(m) => Val::M(m.neg()),
                Val::Zero => Val::Zero,
                Val::Identity => return Err(shapeless("a negated identity")),
            },
            Expr::Transpose(x) => match self.eval(x, env)? {
                Val::M(m) => Val::M(m.transpose()),
                v => v,
            },
            Expr::Inverse(x) => match self.eval(x, env)? {
                Val::M(m) => Val::M(m.inverse()?),
                Val::Identity => Val::Identity,
                Val::Zero => return Err(NumericError::Singular("inverse of zero".into())),
            },
            Expr::Apply { outputs: 1, .. } => Val::M(self.apply(e, env)?.pop().expect("one output")),
            Expr::Apply { op, .. } => return Err(NumericError::Dimension(format!("`{op}` yields several results"))),
        })
    }

    fn apply(&mut self, e: &Expr, env: &Env<'_>) -> Result<Vec<Matrix>, NumericError> {
        let Expr::Apply { op, args, .. } = e else { unreachable!("apply on a non-application") };
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            match self.eval(a, env)? {
                Val::M(m) => vals.push(m),
                _ => return Err(shapeless(&format!("an argument of `{op}`"))),
            }
        }
        let key = (op.clone(), vals);
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        let p = self.registry.get(op).ok_or_else(|| NumericError::UnknownOperation(op.clone()))?;
        let inputs: BTreeMap<String, Matrix> = p.inputs.iter().cloned().zip(key.1.iter().cloned()).collect();
        let solved = solve_system(&p.operands(), &p.template_equations, &inputs)?;
        let outs: Vec<Matrix> = p.outputs.iter().map(|o| solved[o].clone()).collect();
        self.memo.insert(key, outs.clone());
        Ok(outs)
    }

    /// Values of the outputs of a solved equation, in order; `dims` gives
    /// the expected shape of each output.
    pub fn eval_solved(
        &mut self,
        eq: &SolvedEquation,
        dims: &[(usize, usize)],
        env: &Env<'_>,
    ) -> Result<Vec<Matrix>, NumericError> {
        if let Expr::Apply { .. } = eq.rhs {
            let outs = self.apply(&eq.rhs, env)?;
            for (m, d) in outs.iter().zip(dims) {
                if m.dims() != *d {
                    return Err(NumericError::Dimension(format!(
                        "expected {}x{}, got {}x{}",
                        d.0, d.1, m.rows, m.cols
                    )));
                }
            }
            return Ok(outs);
        }
        let v = self.eval(&eq.rhs, env)?;
        Ok(vec![v.into_matrix(dims[0].0, dims[0].1)?])
    }

    /// `lhs - rhs` of an equation as a matrix, or `None` if both sides are
    /// shapeless literals.
    fn residual(&mut self, eq: &Equation, env: &Env<'_>) -> Result<Option<Matrix>, NumericError> {
        let l = self.eval(&eq.lhs, env)?;
        let r = self.eval(&eq.rhs, env)?;
        let dims = match (&l, &r) {
            (Val::M(m), _) | (_, Val::M(m)) => m.dims(),
            (Val::Zero, Val::Zero) | (Val::Identity, Val::Identity) => return Ok(None),
            _ => return Err(shapeless("an equation between literals")),
        };
        Ok(Some(l.into_matrix(dims.0, dims.1)?.sub(&r.into_matrix(dims.0, dims.1)?)?))
    }
}

/// Structurally fixed value of entry `(i, j)` of an output, if any.
fn fixed_entry(o: &Operand, i: usize, j: usize) -> Option<Q> {
    if o.has(Property::Zero) {
        return Some(Q::zero());
    }
    if o.has(Property::Identity) {
        return Some(if i == j { Q::one() } else { Q::zero() });
    }
    if (o.has(Property::LowerTriangular) && j > i) || (o.has(Property::UpperTriangular) && i > j) {
        return Some(Q::zero());
    }
    if o.has(Property::UnitDiagonal) && i == j {
        return Some(Q::one());
    }
    None
}

/// Solves `A x = b` exactly; the solution must exist and be unique.
pub fn solve_linear(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Result<Vec<Q>, NumericError> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut pivots = Vec::with_capacity(cols);
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            return Err(NumericError::Singular(format!("unknown {c} is not determined")));
        };
        a.swap(p, r);
        b.swap(p, r);
        for i in r + 1..rows {
            if a[i][c].is_zero() {
                continue;
            }
            let f = &a[i][c] / &a[r][c];
            for j in c..cols {
                let t = &f * &a[r][j];
                a[i][j] -= t;
            }
            let t = &f * &b[r];
            b[i] -= t;
        }
        pivots.push(r);
        r += 1;
    }
    if let Some(i) = (r..rows).find(|&i| !b[i].is_zero()) {
        return Err(NumericError::Inconsistent(format!("equation {i} cannot be satisfied")));
    }
    let mut x = vec![Q::zero(); cols];
    for c in (0..cols).rev() {
        let pr = pivots[c];
        let mut s = b[pr].clone();
        for j in c + 1..cols {
            s -= &a[pr][j] * &x[j];
        }
        x[c] = s / &a[pr][c];
    }
    Ok(x)
}

/// `L U = A` with `L` unit lower triangular, `U` upper triangular and `A`
/// an input: the names of `(L, U, A)`.
fn lu_form<'a>(operands: &'a [Operand], equations: &[Equation]) -> Option<(&'a str, &'a str, &'a str)> {
    let [eq] = equations else { return None };
    let find = |e: &Expr| e.as_ref().and_then(|r| operands.iter().find(|o| o.name == r.name));
    let (prod, a) = match (&eq.lhs, &eq.rhs) {
        (Expr::Times(f), a) | (a, Expr::Times(f)) if f.len() == 2 => (f, find(a)?),
        _ => return None,
    };
    let (l, u) = (find(&prod[0])?, find(&prod[1])?);
    let ok = l.is_output()
        && l.has(Property::LowerTriangular)
        && l.has(Property::UnitDiagonal)
        && u.is_output()
        && u.has(Property::UpperTriangular)
        && a.is_input();
    ok.then_some((l.name.as_str(), u.name.as_str(), a.name.as_str()))
}

/// Doolittle factorization without pivoting.
pub fn doolittle(a: &Matrix) -> Result<(Matrix, Matrix), NumericError> {
    if a.rows != a.cols {
        return Err(NumericError::Dimension(format!("LU of {}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    let mut l = Matrix::identity(n);
    let mut u = Matrix::zeros(n, n);
    for k in 0..n {
        for j in k..n {
            let mut s = a[(k, j)].clone();
            for p in 0..k {
                s -= &l[(k, p)] * &u[(p, j)];
            }
            u[(k, j)] = s;
        }
        if k + 1 < n && u[(k, k)].is_zero() {
            return Err(NumericError::Singular(format!("zero pivot at position {k}")));
        }
        for i in k + 1..n {
            let mut s = a[(i, k)].clone();
            for p in 0..k {
                s -= &l[(i, p)] * &u[(p, k)];
            }
            l[(i, k)] = s / &u[(k, k)];
        }
    }
    Ok((l, u))
}

/// Computes the outputs of a system of equations from its inputs.
///
/// The `L U = A` form is factored directly. Anything else must be linear in
/// the outputs: the free entries of all outputs are flattened into one
/// unknown vector and the system is solved by exact elimination. The
/// result is always checked against the equations.
pub fn solve_system(
    operands: &[Operand],
    equations: &[Equation],
    inputs: &BTreeMap<String, Matrix>,
) -> Result<BTreeMap<String, Matrix>, NumericError> {
    let mut sizes = BTreeMap::new();
    for o in operands.iter().filter(|o| o.is_input()) {
        let m = inputs.get(&o.name).ok_or_else(|| NumericError::UnknownOperand(o.name.clone()))?;
        for (base, n) in [(&o.rows.base, m.rows), (&o.cols.base, m.cols)] {
            if base == UNIT_DIM {
                if n != 1 {
                    return Err(NumericError::Dimension(format!("`{}` must have a unit dimension", o.name)));
                }
            } else if *sizes.entry(base.clone()).or_insert(n) != n {
                return Err(NumericError::Dimension(format!("`{base}` has conflicting sizes")));
            }
        }
    }
    let outputs: Vec<&Operand> = operands.iter().filter(|o| o.is_output()).collect();
    let mut base = BTreeMap::new();
    let mut free = Vec::new();
    for (k, o) in outputs.iter().enumerate() {
        let (r, c) = (resolve(&sizes, &o.rows.base)?, resolve(&sizes, &o.cols.base)?);
        let mut m = Matrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                match fixed_entry(o, i, j) {
                    Some(v) => m[(i, j)] = v,
                    None => free.push((k, i, j)),
                }
            }
        }
        base.insert(o.name.clone(), m);
    }

    let mut ev = Evaluator::default();
    let mut residual = |outs: &BTreeMap<String, Matrix>| -> Result<Vec<Q>, NumericError> {
        let env = |r: &OpRef| {
            inputs
                .get(&r.name)
                .or_else(|| outs.get(&r.name))
                .cloned()
                .ok_or_else(|| NumericError::UnknownOperand(r.name.clone()))
        };
        let mut v = Vec::new();
        for eq in equations {
            if let Some(m) = ev.residual(eq, &env)? {
                v.extend(m.data);
            }
        }
        Ok(v)
    };

    let solution = if let Some((l, u, a)) = lu_form(operands, equations) {
        let (lm, um) = doolittle(&inputs[a])?;
        let mut s = base.clone();
        s.insert(l.to_string(), lm);
        s.insert(u.to_string(), um);
        s
    } else {
        let with = |x: &[Q]| {
            let mut s = base.clone();
            for (v, &(k, i, j)) in x.iter().zip(&free) {
                s.get_mut(&outputs[k].name).expect("output")[(i, j)] = v.clone();
            }
            s
        };
        let r0 = residual(&base)?;
        let mut a = vec![Vec::with_capacity(free.len()); r0.len()];
        let mut unit = vec![Q::zero(); free.len()];
        for c in 0..free.len() {
            unit[c] = Q::one();
            let rc = residual(&with(&unit))?;
            unit[c] = Q::zero();
            for (row, (x, y)) in a.iter_mut().zip(rc.iter().zip(&r0)) {
                row.push(x - y);
            }
        }
        let b: Vec<Q> = r0.iter().map(|v| -v).collect();
        with(&solve_linear(a, b)?)
    };
    if residual(&solution)?.iter().any(|v| !v.is_zero()) {
        let text: Vec<String> = equations.iter().map(Equation::text).collect();
        return Err(NumericError::Nonlinear(text.join("; ")));
    }
    Ok(solution)
}

/// Reference outputs of an operation for an instance.
pub fn reference_solve(spec: &OperationSpec, inst: &Instance) -> Result<BTreeMap<String, Matrix>, NumericError> {
    solve_system(&spec.operands, &spec.postcondition, &inst.inputs)
}

/// Values of the split variables of one rule set.
pub type SplitPoint = BTreeMap<String, usize>;

/// Every combination of split-variable values `0..=size`.
pub fn split_points(rs: &RuleSet, sizes: &BTreeMap<String, usize>) -> Vec<SplitPoint> {
    let mut out = vec![SplitPoint::new()];
    for v in &rs.split_vars {
        let n = resolve(sizes, &v.base).unwrap_or(0);
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=n).map(move |k| {
                    let mut p = p.clone();
                    p.insert(v.name.clone(), k);
                    p
                })
            })
            .collect();
    }
    out
}

fn split_text(p: &SplitPoint) -> String {
    if p.is_empty() {
        return "unsplit".into();
    }
    p.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
}

/// Outcome of a batch of numeric checks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckReport {
    pub checks: usize,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, ok: Result<bool, NumericError>, what: impl FnOnce() -> String) {
        self.checks += 1;
        match ok {
            Ok(true) => {}
            Ok(false) => self.failures.push(format!("{} does not hold", what())),
            Err(e) => self.failures.push(format!("{}: {e}", what())),
        }
    }

    fn merge(&mut self, o: CheckReport) {
        self.checks += o.checks;
        self.failures.extend(o.failures);
    }
}

/// Reference values and block geometry, shared by the oracle's checks.
#[derive(Debug, Clone)]
struct Ctx<'a> {
    spec: &'a OperationSpec,
    original: BTreeMap<String, Matrix>,
}

impl Ctx<'_> {
    fn range(&self, rs: &RuleSet, r: &OpRef, p: &SplitPoint) -> (usize, usize, usize, usize) {
        let m = &self.original[&r.name];
        let q = r.quadrant.unwrap_or(Quadrant::Whole);
        let rule = rs.rule(&r.name);
        let span = |n: usize, var: Option<&String>, half: Option<Half>| match (var, half) {
            (Some(v), Some(h)) => {
                let k = p.get(v).copied().unwrap_or(0).min(n);
                if h == Half::Leading {
                    (0, k)
                } else {
                    (k, n)
                }
            }
            _ => (0, n),
        };
        let (r0, r1) = span(m.rows, rule.and_then(|x| x.row_var.as_ref()), q.row_half());
        let (c0, c1) = span(m.cols, rule.and_then(|x| x.col_var.as_ref()), q.col_half());
        (r0, r1, c0, c1)
    }

    fn read(
        &self,
        ws: &BTreeMap<String, Matrix>,
        rs: &RuleSet,
        r: &OpRef,
        p: &SplitPoint,
    ) -> Result<Matrix, NumericError> {
        let m = ws.get(&r.name).ok_or_else(|| NumericError::UnknownOperand(r.name.clone()))?;
        let (r0, r1, c0, c1) = self.range(rs, r, p);
        Ok(m.block(r0, r1, c0, c1))
    }

    fn dims(&self, rs: &RuleSet, outs: &[OpRef], p: &SplitPoint) -> Vec<(usize, usize)> {
        outs.iter()
            .map(|r| {
                let (r0, r1, c0, c1) = self.range(rs, r, p);
                (r1 - r0, c1 - c0)
            })
            .collect()
    }

    fn is_input(&self, name: &str) -> bool {
        self.spec.operand(name).is_some_and(|o| o.is_input())
    }

    fn at_end(&self, rs: &RuleSet, p: &SplitPoint) -> bool {
        rs.split_vars.iter().all(|v| {
            let full = self.spec.operands.iter().find_map(|o| {
                let m = &self.original[&o.name];
                if o.rows.base == v.base {
                    Some(m.rows)
                } else if o.cols.base == v.base {
                    Some(m.cols)
                } else {
                    None
                }
            });
            p.get(&v.name).copied() == full
        })
    }

    /// Checks `eq` against the values in `ws`; operands on the right read
    /// the original inputs and the outputs in `ws`.
    fn holds(
        &self,
        ev: &mut Evaluator,
        eq: &SolvedEquation,
        rs: &RuleSet,
        p: &SplitPoint,
        ws: &BTreeMap<String, Matrix>,
    ) -> Result<bool, NumericError> {
        let dims = self.dims(rs, &eq.outputs, p);
        let env = |r: &OpRef| {
            let src = if self.is_input(&r.name) { &self.original } else { ws };
            self.read(src, rs, r, p)
        };
        let got = ev.eval_solved(eq, &dims, &env)?;
        for (r, v) in eq.outputs.iter().zip(got) {
            if self.read(ws, rs, r, p)? != v {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Numeric oracle for one instance: holds the inputs, the reference
/// outputs and the evaluator used for sub-problems.
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    ctx: Ctx<'a>,
    ev: Evaluator,
}

impl<'a> Oracle<'a> {
    pub fn new(spec: &'a OperationSpec, registry: &Registry, inst: &Instance) -> Result<Self, NumericError> {
        let mut original = reference_solve(spec, inst)?;
        original.extend(inst.inputs.clone());
        Ok(Oracle { ctx: Ctx { spec, original }, ev: Evaluator::new(registry.clone()) })
    }

    /// Reference value of a whole operand.
    pub fn value(&self, name: &str) -> Option<&Matrix> {
        self.ctx.original.get(name)
    }

    /// Every PME cell at one split point, against the reference outputs.
    pub fn check_pme(&mut self, a: &PmeAnalysis, p: &SplitPoint) -> CheckReport {
        let mut rep = CheckReport::default();
        let rs = &a.pme.ruleset;
        for (quad, cell) in &a.pme.grid.cells {
            let ok = self.ctx.holds(&mut self.ev, &cell.solved, rs, p, &self.ctx.original);
            rep.record(ok, || format!("PME {} at {}: cell {quad}: {}", a.index, split_text(p), cell.solved.text()));
        }
        rep
    }

    /// Executes the tasks of every candidate at one split point and checks
    /// its predicate. When every split variable is at its full size the
    /// postcondition is checked as well for feasible candidates.
    pub fn check_invariants(&mut self, a: &PmeAnalysis, p: &SplitPoint) -> CheckReport {
        let mut rep = CheckReport::default();
        if a.graph.is_none() {
            return rep;
        }
        let rs = &a.pme.ruleset;
        let at_end = self.ctx.at_end(rs, p);
        for c in &a.candidates {
            let inv = &c.invariant;
            let label = || {
                let ids: Vec<String> = inv.subgraph.iter().map(usize::to_string).collect();
                format!("PME {} invariant {{{}}} at {}", a.index, ids.join(","), split_text(p))
            };
            let ws = match self.execute(a, &inv.subgraph, p) {
                Ok(ws) => ws,
                Err(e) => {
                    rep.record(Err(e), || format!("{}: executing tasks", label()));
                    continue;
                }
            };
            for (quad, state) in &inv.grid.cells {
                if let QuadrantState::Equality(eqs) = state {
                    for eq in eqs {
                        let ok = self.ctx.holds(&mut self.ev, eq, rs, p, &ws);
                        rep.record(ok, || format!("{}: quadrant {quad}: {}", label(), eq.text()));
                    }
                }
            }
            if at_end && c.feasibility.feasible() {
                let ctx = &self.ctx;
                let env = |r: &OpRef| {
                    let src = if ctx.is_input(&r.name) { &ctx.original } else { &ws };
                    src.get(&r.name).cloned().ok_or_else(|| NumericError::UnknownOperand(r.name.clone()))
                };
                for eq in &ctx.spec.postcondition {
                    let ok = self.ev.residual(eq, &env).map(|m| m.is_none_or(|m| m.is_zero()));
                    rep.record(ok, || format!("{}: postcondition {}", label(), eq.text()));
                }
            }
        }
        rep
    }

    /// PME cells and invariants at one split point.
    pub fn check_at(&mut self, a: &PmeAnalysis, p: &SplitPoint) -> CheckReport {
        let mut rep = self.check_pme(a, p);
        rep.merge(self.check_invariants(a, p));
        rep
    }

    /// Runs the tasks of `subgraph` in dependency order on a workspace that
    /// starts from the inputs, with outputs zeroed.
    fn execute(
        &mut self,
        a: &PmeAnalysis,
        subgraph: &BTreeSet<usize>,
        p: &SplitPoint,
    ) -> Result<BTreeMap<String, Matrix>, NumericError> {
        let rs = &a.pme.ruleset;
        let g = a.graph.as_ref().expect("graph");
        let ctx = &self.ctx;
        let mut ws: BTreeMap<String, Matrix> = ctx
            .original
            .iter()
            .map(|(n, m)| {
                let v = if ctx.is_input(n) { m.clone() } else { Matrix::zeros(m.rows, m.cols) };
                (n.clone(), v)
            })
            .collect();
        let mut order: Vec<usize> = subgraph.iter().copied().collect();
        order.sort_by_key(|&id| (g.level_of(id), id));
        for id in order {
            let t = g.task(id);
            let eq = SolvedEquation { outputs: t.outputs.clone(), rhs: t.expr.clone() };
            let dims = ctx.dims(rs, &t.outputs, p);
            let vals = {
                let snapshot = &ws;
                let env = |r: &OpRef| ctx.read(snapshot, rs, r, p);
                self.ev.eval_solved(&eq, &dims, &env)?
            };
            for (r, v) in t.outputs.iter().zip(vals) {
                let (r0, _, c0, _) = ctx.range(rs, r, p);
                ws.get_mut(&r.name).expect("operand").set_block(r0, c0, &v);
            }
        }
        Ok(ws)
    }
}

/// Checks every PME cell and every candidate of every PME at every split
/// point of one instance.
pub fn check_derivation(d: &Derivation, inst: &Instance) -> Result<CheckReport, NumericError> {
    let mut oracle = Oracle::new(&d.spec, &d.registry, inst)?;
    let mut rep = CheckReport::default();
    for a in &d.analyses {
        for p in split_points(&a.pme.ruleset, &inst.sizes) {
            rep.merge(oracle.check_at(a, &p));
        }
    }
    Ok(rep)
}

/// Like [`check_derivation`] with every split variable set to `k`, capped
/// at the size it splits.
pub fn check_derivation_at(d: &Derivation, inst: &Instance, k: usize) -> Result<CheckReport, NumericError> {
    let mut oracle = Oracle::new(&d.spec, &d.registry, inst)?;
    let mut rep = CheckReport::default();
    for a in &d.analyses {
        let p: SplitPoint = a
            .pme
            .ruleset
            .split_vars
            .iter()
            .map(|v| (v.name.clone(), k.min(resolve(&inst.sizes, &v.base).unwrap_or(0))))
            .collect();
        rep.merge(oracle.check_at(a, &p));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::generate_invariants;
    use crate::opspec::parse_spec;

    fn sizes(pairs: &[(&str, usize)]) -> BTreeMap<String, usize> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn inverse_round_trips() {
        let a = Matrix::from_ints(3, 3, &[2, 1, 0, 1, 3, 1, 0, 1, 4]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul(&inv).unwrap(), Matrix::identity(3));
        assert!(Matrix::from_ints(2, 2, &[1, 2, 2, 4]).inverse().is_err());
        assert_eq!(Matrix::zeros(0, 0).inverse().unwrap(), Matrix::zeros(0, 0));
    }

    #[test]
    fn empty_products_are_zero() {
        let a = Matrix::zeros(3, 0);
        let b = Matrix::zeros(0, 2);
        assert_eq!(a.mul(&b).unwrap(), Matrix::zeros(3, 2));
    }

    #[test]
    fn doolittle_factors() {
        let a = Matrix::from_ints(3, 3, &[4, 3, 2, 2, 5, 1, 6, 1, 7]);
        let (l, u) = doolittle(&a).unwrap();
        assert_eq!(l.mul(&u).unwrap(), a);
        assert!(doolittle(&Matrix::from_ints(2, 2, &[0, 1, 1, 0])).is_err());
    }

    #[test]
    fn linear_solver_rejects_underdetermined_and_inconsistent() {
        let a = vec![vec![q(1), q(1)], vec![q(2), q(2)]];
        assert!(matches!(solve_linear(a, vec![q(1), q(2)]), Err(NumericError::Singular(_))));
        let a = vec![vec![q(1)], vec![q(1)]];
        assert!(matches!(solve_linear(a, vec![q(1), q(2)]), Err(NumericError::Inconsistent(_))));
        let a = vec![vec![q(2), q(1)], vec![q(1), q(3)]];
        assert_eq!(solve_linear(a, vec![q(3), q(4)]).unwrap(), vec![q(1), q(1)]);
    }

    #[test]
    fn instances_respect_properties() {
        let spec = parse_spec(include_str!("../../../corpus/coupled_sylvester.clk")).unwrap();
        let inst = random_instance(&spec, &sizes(&[("m", 4), ("n", 3)]), 7).unwrap();
        let a = &inst.inputs["A"];
        assert_eq!(a.dims(), (4, 4));
        assert!((0..4).all(|i| (i + 1..4).all(|j| a[(i, j)].is_zero())));
        assert!((0..4).all(|i| !a[(i, i)].is_zero()));
        let b = &inst.inputs["B"];
        assert!((0..3).all(|i| (0..i).all(|j| b[(i, j)].is_zero())));
        assert_eq!(random_instance(&spec, &inst.sizes, 7).unwrap(), inst);
        assert!(random_instance(&spec, &sizes(&[("m", 2)]), 1).is_err());
    }

    #[test]
    fn reference_solutions_satisfy_postconditions() {
        let lu = parse_spec(include_str!("../../../corpus/lu.clk")).unwrap();
        let inst = random_instance(&lu, &sizes(&[("m", 5)]), 3).unwrap();
        let out = reference_solve(&lu, &inst).unwrap();
        assert_eq!(out["L"].mul(&out["U"]).unwrap(), inst.inputs["A"]);

        let syl = parse_spec(include_str!("../../../corpus/coupled_sylvester.clk")).unwrap();
        let inst = random_instance(&syl, &sizes(&[("m", 3), ("n", 2)]), 11).unwrap();
        let out = reference_solve(&syl, &inst).unwrap();
        let i = &inst.inputs;
        let lhs = i["A"].mul(&out["X"]).unwrap().add(&out["Y"].mul(&i["B"]).unwrap()).unwrap();
        assert_eq!(lhs, i["C"]);
        let lhs = i["D"].mul(&out["X"]).unwrap().add(&out["Y"].mul(&i["E"]).unwrap()).unwrap();
        assert_eq!(lhs, i["F"]);
    }

    #[test]
    fn nonlinear_postcondition_without_direct_solver_is_reported() {
        let spec = parse_spec(
            "operation Sq { operand X : m x m [Output]; operand A : m x m [Input]; postcondition { X * X = A; } }",
        )
        .unwrap();
        let inst = random_instance(&spec, &sizes(&[("m", 2)]), 5).unwrap();
        assert!(reference_solve(&spec, &inst).is_err());
    }

    #[test]
    fn lu_derivation_checks_at_every_split_point() {
        let spec = parse_spec(include_str!("../../../corpus/lu.clk")).unwrap();
        let d = generate_invariants(&spec);
        let inst = random_instance(&spec, &sizes(&[("m", 4)]), 21).unwrap();
        let rep = check_derivation(&d, &inst).unwrap();
        assert!(rep.passed(), "{:#?}", rep.failures);
        // 5 split points; 4 cells plus 7 candidates' equalities per point.
        assert!(rep.checks > 5 * 4);
    }

    #[test]
    fn corrupted_cell_is_named() {
        let spec = parse_spec(include_str!("../../../corpus/lu.clk")).unwrap();
        let mut d = generate_invariants(&spec);
        let cell = &mut d.analyses[0].pme.grid.cells[1].1;
        assert_eq!(cell.solved.text(), "U_TR = L_TL^-1 A_TR");
        cell.solved.rhs = Expr::neg(cell.solved.rhs.clone());
        let inst = random_instance(&spec, &sizes(&[("m", 3)]), 2).unwrap();
        let rep = check_derivation_at(&d, &inst, 1).unwrap();
        assert!(!rep.passed());
        assert!(rep.failures.iter().any(|f| f.contains("cell TR")), "{:?}", rep.failures);
    }

    #[test]
    fn split_points_cover_all_combinations() {
        let spec = parse_spec(include_str!("../../../corpus/coupled_sylvester.clk")).unwrap();
        let d = generate_invariants(&spec);
        let pts = split_points(&d.analyses[2].pme.ruleset, &sizes(&[("m", 2), ("n", 3)]));
        assert_eq!(pts.len(), 3 * 4);
    }
}
