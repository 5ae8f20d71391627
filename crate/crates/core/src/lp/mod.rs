//! Sparse LP representation and the built-in solver.
//!
//! Models are minimization problems over bounded variables with `<=`, `=`
//! and `>=` rows. [`solve`] runs the built-in revised simplex and returns
//! primal values, row duals and the final basis; [`solve_with_basis`] warm
//! starts from an earlier basis (falling back to a cold solve when the
//! basis no longer fits the model); [`solve_lazy`] alternates solving with
//! a row source that generates violated rows, the pattern used for lazy
//! triangle constraints and cutting planes.
//!
//! The env var `JOMATCH_LP_BACKEND` selects `builtin` (default) or
//! `export-only`, which writes an LP-format file per solve call instead of
//! solving (escape hatch for external solvers).

mod lu;
mod simplex;
mod sparse;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

use simplex::{Compiled, Engine};
use sparse::SparseMatrix;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-7;
/// Complementary-slackness tolerance.
pub const CS_TOL: f64 = 1e-6;
/// Relative duality-gap tolerance.
pub const GAP_TOL: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("row references unknown variable id {0}")]
    UnknownVar(usize),
    #[error("duplicate variable id {0} in one row")]
    DuplicateVar(usize),
    #[error("non-finite coefficient or rhs in row")]
    NonFinite,
    #[error("variable bounds are empty: lower {lower} > upper {upper}")]
    EmptyBounds { lower: f64, upper: f64 },
    #[error("export-only backend: model written to {0}")]
    ExportOnly(PathBuf),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct LpRow {
    pub sense: Sense,
    pub rhs: f64,
    pub coeffs: Vec<(VarId, f64)>,
}

#[derive(Debug, Clone)]
struct VarDef {
    lower: f64,
    upper: f64,
    obj: f64,
    name: Option<String>,
}

/// Sparse minimization model.
#[derive(Debug, Clone, Default)]
pub struct LpModel {
    vars: Vec<VarDef>,
    rows: Vec<LpRow>,
}

impl LpModel {
    pub fn minimize() -> Self {
        LpModel::default()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64, obj: f64) -> VarId {
        self.add_named_var(lower, upper, obj, None)
    }

    pub fn add_named_var(
        &mut self,
        lower: f64,
        upper: f64,
        obj: f64,
        name: Option<String>,
    ) -> VarId {
        assert!(lower <= upper, "bounds {lower} > {upper}");
        self.vars.push(VarDef {
            lower,
            upper,
            obj,
            name,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(
        &mut self,
        sense: Sense,
        rhs: f64,
        coeffs: &[(VarId, f64)],
    ) -> Result<RowId, LpError> {
        if !rhs.is_finite() || coeffs.iter().any(|&(_, c)| !c.is_finite()) {
            return Err(LpError::NonFinite);
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(VarId(v), _) in coeffs {
            if v >= self.vars.len() {
                return Err(LpError::UnknownVar(v));
            }
            if !seen.insert(v) {
                return Err(LpError::DuplicateVar(v));
            }
        }
        self.rows.push(LpRow {
            sense,
            rhs,
            coeffs: coeffs.to_vec(),
        });
        Ok(RowId(self.rows.len() - 1))
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_coeff(&self, v: VarId) -> f64 {
        self.vars[v.0].obj
    }

    pub fn set_objective_coeff(&mut self, v: VarId, obj: f64) {
        self.vars[v.0].obj = obj;
    }

    pub fn row(&self, r: RowId) -> &LpRow {
        &self.rows[r.0]
    }

    /// Drops every row whose flag is false. Returns the old-to-new row
    /// index mapping for bookkeeping on the caller's side.
    pub fn retain_rows(&mut self, keep: &[bool]) -> Vec<Option<usize>> {
        assert_eq!(keep.len(), self.rows.len());
        let mut mapping = vec![None; keep.len()];
        let mut next = 0usize;
        let mut rows = Vec::with_capacity(keep.iter().filter(|&&k| k).count());
        for (r, row) in self.rows.drain(..).enumerate() {
            if keep[r] {
                mapping[r] = Some(next);
                next += 1;
                rows.push(row);
            }
        }
        self.rows = rows;
        mapping
    }

    fn compile(&self) -> Compiled {
        let n = self.vars.len();
        let m = self.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for v in &self.vars {
            lower.push(v.lower);
            upper.push(v.upper);
            cost.push(v.obj);
        }
        for (r, row) in self.rows.iter().enumerate() {
            for &(VarId(j), c) in &row.coeffs {
                cols[j].push((r, c));
            }
            rhs.push(row.rhs);
        }
        for row in &self.rows {
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Eq => (0.0, 0.0),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lower.push(l);
            upper.push(u);
            cost.push(0.0);
        }
        Compiled {
            n_struct: n,
            m,
            a: SparseMatrix::from_columns(m, &cols),
            rhs,
            lower,
            upper,
            cost,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    NumericalBreakdown,
}

/// Basis snapshot: internal column ids (variables first, then one logical
/// per row) for each basis slot, plus the set of nonbasic columns resting
/// at their upper bound.
#[derive(Debug, Clone)]
pub struct Basis {
    n_vars: usize,
    basic_cols: Vec<usize>,
    at_upper: Vec<usize>,
}

impl Basis {
    /// Basis from raw internal column ids (variables `0..n_vars`, logicals
    /// `n_vars..n_vars+m`). Used by model builders that know a good
    /// starting vertex.
    pub(crate) fn from_columns(
        n_vars: usize,
        basic_cols: Vec<usize>,
        at_upper: Vec<usize>,
    ) -> Self {
        Basis {
            n_vars,
            basic_cols,
            at_upper,
        }
    }

    /// Rewrites the basis after rows were dropped with
    /// [`LpModel::retain_rows`]. Returns None when a removed row's logical
    /// was not basic (the shrunk basis would not be square); callers should
    /// only purge rows with strictly slack logicals, which are basic.
    pub fn remap_after_row_removal(&self, mapping: &[Option<usize>]) -> Option<Basis> {
        let mut basic_cols = Vec::with_capacity(self.basic_cols.len());
        for &col in &self.basic_cols {
            if col < self.n_vars {
                basic_cols.push(col);
            } else {
                match mapping[col - self.n_vars] {
                    Some(new_r) => basic_cols.push(self.n_vars + new_r),
                    None => {} // removed row's logical leaves the basis
                }
            }
        }
        let kept = mapping.iter().filter(|m| m.is_some()).count();
        if basic_cols.len() != kept {
            return None;
        }
        let mut at_upper = Vec::with_capacity(self.at_upper.len());
        for &col in &self.at_upper {
            if col < self.n_vars {
                at_upper.push(col);
            } else {
                match mapping[col - self.n_vars] {
                    Some(new_r) => at_upper.push(self.n_vars + new_r),
                    None => return None, // removed row had a nonbasic logical
                }
            }
        }
        Some(Basis {
            n_vars: self.n_vars,
            basic_cols,
            at_upper,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// Row duals `y`: reduced costs are `c - A^T y`; `<=` rows have
    /// `y <= 0`, `>=` rows `y >= 0` at optimality of a minimization.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.primal[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.duals[r.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Builtin,
    ExportOnly,
}

pub fn backend_from_env() -> Backend {
    match std::env::var("JOMATCH_LP_BACKEND").as_deref() {
        Ok("export-only") => Backend::ExportOnly,
        _ => Backend::Builtin,
    }
}

static EXPORT_COUNTER: AtomicUsize = AtomicUsize::new(0);

fn export_path() -> PathBuf {
    let dir = std::env::var("JOMATCH_LP_EXPORT_DIR").unwrap_or_else(|_| ".".into());
    let id = EXPORT_COUNTER.fetch_add(1, Ordering::SeqCst);
    Path::new(&dir).join(format!("jomatch_model_{id:04}.lp"))
}

fn default_iteration_limit(model: &LpModel) -> usize {
    200_000 + 50 * (model.num_rows() + model.num_vars())
}

pub fn solve(model: &LpModel) -> Result<LpSolution, LpError> {
    solve_inner(model, None)
}

/// Solves warm-started from `basis`. A basis from a model with fewer rows
/// is extended with the new rows' logicals; an incompatible or singular
/// basis falls back to a cold solve.
pub fn solve_with_basis(model: &LpModel, basis: &Basis) -> Result<LpSolution, LpError> {
    solve_inner(model, Some(basis))
}

fn solve_inner(model: &LpModel, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
    if backend_from_env() == Backend::ExportOnly {
        let path = export_path();
        export_lp_file(model, &path)?;
        return Err(LpError::ExportOnly(path));
    }
    let compiled = model.compile();
    let limit = default_iteration_limit(model);
    let mut engine = Engine::new(&compiled, limit);

    let mut warm_ok = false;
    if let Some(b) = warm {
        if b.n_vars == model.num_vars() && b.basic_cols.len() <= model.num_rows() {
            // re-map logical ids (they sit behind the variable block) and
            // append logicals for rows added since the basis was taken
            let old_m = b.basic_cols.len();
            let shift = |col: usize| -> usize {
                if col < b.n_vars {
                    col
                } else {
                    model.num_vars() + (col - b.n_vars)
                }
            };
            let mut basic: Vec<usize> = b.basic_cols.iter().map(|&c| shift(c)).collect();
            for r in old_m..model.num_rows() {
                basic.push(model.num_vars() + r);
            }
            let at_upper: Vec<usize> = b.at_upper.iter().map(|&c| shift(c)).collect();
            if engine.init_given_basis(&basic, &at_upper) && engine.factorize() {
                warm_ok = true;
            } else {
                engine.degraded = true; // incompatible basis, cold restart
            }
        } else {
            engine.degraded = true;
        }
    }
    if !warm_ok {
        engine.init_logical_basis();
        if !engine.factorize() {
            return Ok(finish(model, engine.result(LpStatus::NumericalBreakdown)));
        }
    }
    engine.recompute_x();
    engine.recompute_d();

    let mut status;
    let mut repairs = 0;
    loop {
        status = if engine.is_primal_feasible() {
            engine.run_primal()
        } else if engine.is_dual_feasible() {
            engine.run_dual()
        } else {
            let p1 = engine.run_phase1();
            if p1 == LpStatus::Optimal {
                engine.recompute_d();
                engine.run_primal()
            } else {
                p1
            }
        };
        if status == LpStatus::Unbounded && engine.is_perturbed() {
            // a degenerate ray can look unbounded only through the
            // perturbation; retry on the true objective
            engine.unperturb_costs();
            engine.recompute_d();
            continue;
        }
        if status != LpStatus::Optimal || repairs >= 4 {
            break;
        }
        // refresh the factorization, drop the perturbation and verify the
        // claimed optimum against the true objective
        if !engine.factorize() {
            status = LpStatus::NumericalBreakdown;
            break;
        }
        engine.recompute_x();
        engine.unperturb_costs();
        engine.recompute_d();
        if engine.is_primal_feasible() && engine.is_dual_feasible() {
            break;
        }
        repairs += 1;
    }
    if std::env::var("JOMATCH_LP_DEBUG").is_ok() {
        eprintln!(
            "lp debug: m={} n={} iters={} factors={} factor_t={:?} lu_nnz={} ftran_t={:?} btran_t={:?} gather_t={:?} price_t={:?}",
            model.num_rows(),
            model.num_vars(),
            engine.iterations,
            engine.stats.factorizations,
            engine.stats.factor_time,
            engine.stats.lu_nnz,
            engine.stats.ftran_time,
            engine.stats.btran_time,
            engine.stats.gather_time,
            engine.stats.price_time,
        );
    }
    Ok(finish(model, engine.result(status)))
}

fn finish(model: &LpModel, res: simplex::EngineResult) -> LpSolution {
    LpSolution {
        status: res.status,
        primal: res.x,
        duals: res.duals,
        objective: res.objective,
        basis: Basis {
            n_vars: model.num_vars(),
            basic_cols: res.basic_cols,
            at_upper: res.at_upper,
        },
        iterations: res.iterations,
    }
}

/// Generates violated rows for [`solve_lazy`]. Implementations must be
/// deterministic and must not return a row twice.
pub trait RowSource {
    fn violated_rows(&mut self, primal: &[f64], max_rows: usize) -> Vec<LpRow>;
}

#[derive(Debug, Clone, Copy)]
pub struct LazyOptions {
    pub max_rounds: usize,
    pub max_rows_per_round: usize,
}

impl Default for LazyOptions {
    fn default() -> Self {
        LazyOptions {
            max_rounds: 200,
            max_rows_per_round: 50_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LazyOutcome {
    pub solution: LpSolution,
    pub rounds: usize,
    pub rows_added: usize,
    /// False when the round limit was hit with violated rows outstanding.
    pub converged: bool,
}

/// Row-generation loop: solve, ask the source for violated rows, append
/// them and re-solve warm-started with the dual simplex, until no violated
/// row remains. The model is mutated in place.
pub fn solve_lazy(
    model: &mut LpModel,
    source: &mut dyn RowSource,
    opts: LazyOptions,
) -> Result<LazyOutcome, LpError> {
    let mut solution = solve(model)?;
    let mut rounds = 1usize;
    let mut rows_added = 0usize;
    loop {
        if !solution.is_optimal() {
            return Ok(LazyOutcome {
                solution,
                rounds,
                rows_added,
                converged: false,
            });
        }
        let new_rows = source.violated_rows(&solution.primal, opts.max_rows_per_round);
        if new_rows.is_empty() {
            return Ok(LazyOutcome {
                solution,
                rounds,
                rows_added,
                converged: true,
            });
        }
        if rounds >= opts.max_rounds {
            return Ok(LazyOutcome {
                solution,
                rounds,
                rows_added,
                converged: false,
            });
        }
        for row in &new_rows {
            rows_added += 1;
            model.add_row(row.sense, row.rhs, &row.coeffs)?;
        }
        solution = solve_with_basis(model, &solution.basis)?;
        rounds += 1;
    }
}

/// Writes the model in the human-readable LP file format.
pub fn export_lp_file(model: &LpModel, path: impl AsRef<Path>) -> Result<(), LpError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let name = |j: usize| -> String {
        model.vars[j]
            .name
            .clone()
            .unwrap_or_else(|| format!("x{j}"))
    };
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    let mut first = true;
    for (j, v) in model.vars.iter().enumerate() {
        if v.obj != 0.0 {
            write_term(&mut out, v.obj, &name(j), first)?;
            first = false;
        }
    }
    if first {
        write!(out, " 0 {}", name(0))?;
    }
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    for (r, row) in model.rows.iter().enumerate() {
        write!(out, " c{r}:")?;
        let mut first = true;
        for &(VarId(j), c) in &row.coeffs {
            write_term(&mut out, c, &name(j), first)?;
            first = false;
        }
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        writeln!(out, " {} {}", op, fmt_num(row.rhs))?;
    }
    writeln!(out, "Bounds")?;
    for (j, v) in model.vars.iter().enumerate() {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => writeln!(
                out,
                " {} <= {} <= {}",
                fmt_num(v.lower),
                name(j),
                fmt_num(v.upper)
            )?,
            (true, false) => writeln!(out, " {} >= {}", name(j), fmt_num(v.lower))?,
            (false, true) => {
                writeln!(out, " -inf <= {} <= {}", name(j), fmt_num(v.upper))?
            }
            (false, false) => writeln!(out, " {} free", name(j))?,
        }
    }
    writeln!(out, "End")?;
    Ok(())
}

fn write_term<W: Write>(out: &mut W, c: f64, name: &str, first: bool) -> std::io::Result<()> {
    if first {
        if c < 0.0 {
            write!(out, " - {} {}", fmt_num(-c), name)
        } else {
            write!(out, " {} {}", fmt_num(c), name)
        }
    } else if c < 0.0 {
        write!(out, " - {} {}", fmt_num(-c), name)
    } else {
        write!(out, " + {} {}", fmt_num(c), name)
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Residual diagnostics for an optimal solution.
#[derive(Debug, Clone, Copy)]
pub struct SolutionCheck {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub cs_residual: f64,
    pub gap: f64,
}

/// Verifies feasibility, dual feasibility, complementary slackness and the
/// duality gap of a claimed-optimal solution.
pub fn check_solution(model: &LpModel, sol: &LpSolution) -> SolutionCheck {
    let x = &sol.primal;
    let y = &sol.duals;
    let mut primal_residual = 0.0f64;
    let mut cs_residual = 0.0f64;
    for (r, row) in model.rows.iter().enumerate() {
        let act: f64 = row.coeffs.iter().map(|&(VarId(j), c)| c * x[j]).sum();
        let scale = 1.0 + row.rhs.abs();
        let viol = match row.sense {
            Sense::Le => (act - row.rhs).max(0.0),
            Sense::Ge => (row.rhs - act).max(0.0),
            Sense::Eq => (act - row.rhs).abs(),
        };
        primal_residual = primal_residual.max(viol / scale);
        if row.sense != Sense::Eq {
            cs_residual = cs_residual.max((y[r] * (act - row.rhs)).abs() / scale);
        }
    }
    // reduced costs
    let mut reduced: Vec<f64> = model.vars.iter().map(|v| v.obj).collect();
    for (r, row) in model.rows.iter().enumerate() {
        for &(VarId(j), c) in &row.coeffs {
            reduced[j] -= y[r] * c;
        }
    }
    let mut dual_residual = 0.0f64;
    let mut bound_terms = 0.0;
    for (j, v) in model.vars.iter().enumerate() {
        let d = reduced[j];
        let at_lower = v.lower.is_finite() && (x[j] - v.lower).abs() <= 1e-6 * (1.0 + v.lower.abs());
        let at_upper = v.upper.is_finite() && (x[j] - v.upper).abs() <= 1e-6 * (1.0 + v.upper.abs());
        if at_lower && d >= 0.0 {
            bound_terms += d * v.lower;
        } else if at_upper && d <= 0.0 {
            bound_terms += d * v.upper;
        } else {
            // interior variables need zero reduced cost
            dual_residual = dual_residual.max(d.abs());
            cs_residual = cs_residual.max(d.abs() * 0.0);
        }
    }
    for (r, row) in model.rows.iter().enumerate() {
        match row.sense {
            Sense::Le => dual_residual = dual_residual.max(y[r].max(0.0)),
            Sense::Ge => dual_residual = dual_residual.max((-y[r]).max(0.0)),
            Sense::Eq => {}
        }
    }
    let dual_obj: f64 = model
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| y[r] * row.rhs)
        .sum::<f64>()
        + bound_terms;
    let gap = (sol.objective - dual_obj).abs() / (1.0 + sol.objective.abs());
    SolutionCheck {
        primal_residual,
        dual_residual,
        cs_residual,
        gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hungarian;
    use crate::rational::{exact_solve_standard_form, rat_from_f64, rat_to_f64, ExactOutcome};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_box_lp() {
        // min -x  s.t.  x <= 1, x >= 0
        let mut m = LpModel::minimize();
        let x = m.add_var(0.0, f64::INFINITY, -1.0);
        m.add_row(Sense::Le, 1.0, &[(x, 1.0)]).unwrap();
        let sol = solve(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value(x) - 1.0).abs() < 1e-9);
        assert!((sol.objective + 1.0).abs() < 1e-9);
        let check = check_solution(&m, &sol);
        assert!(check.gap <= GAP_TOL * 2.0, "gap {}", check.gap);
    }

    #[test]
    fn infeasible_pair_of_bounds() {
        let mut m = LpModel::minimize();
        let x = m.add_var(0.0, f64::INFINITY, 0.0);
        m.add_row(Sense::Ge, 1.0, &[(x, 1.0)]).unwrap();
        m.add_row(Sense::Le, 0.0, &[(x, 1.0)]).unwrap();
        let sol = solve(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut m = LpModel::minimize();
        let x = m.add_var(0.0, f64::INFINITY, -1.0);
        let y = m.add_var(0.0, f64::INFINITY, 0.0);
        m.add_row(Sense::Le, 0.0, &[(x, 1.0), (y, -1.0)]).unwrap();
        let sol = solve(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    /// 2x2 assignment polytope against the Hungarian oracle.
    #[test]
    fn assignment_two_by_two() {
        let cost = [[0.0, 1.0], [1.0, 0.0]];
        let mut m = LpModel::minimize();
        let mut vars = [[VarId(0); 2]; 2];
        for (t, row) in cost.iter().enumerate() {
            for (q, &c) in row.iter().enumerate() {
                vars[t][q] = m.add_var(0.0, f64::INFINITY, c);
            }
        }
        for t in 0..2 {
            m.add_row(Sense::Eq, 1.0, &[(vars[t][0], 1.0), (vars[t][1], 1.0)])
                .unwrap();
        }
        for q in 0..2 {
            m.add_row(Sense::Eq, 1.0, &[(vars[0][q], 1.0), (vars[1][q], 1.0)])
                .unwrap();
        }
        let sol = solve(&m).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let (_, oracle) = hungarian::solve_min_cost(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!((sol.objective - oracle).abs() < 1e-9);
        assert!((sol.value(vars[0][0]) - 1.0).abs() < 1e-7);
        assert!((sol.value(vars[1][1]) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn warm_start_on_unchanged_model_stays_put() {
        let mut m = LpModel::minimize();
        let x = m.add_var(0.0, 2.0, -1.0);
        let y = m.add_var(0.0, 2.0, -2.0);
        m.add_row(Sense::Le, 3.0, &[(x, 1.0), (y, 1.0)]).unwrap();
        let cold = solve(&m).unwrap();
        let warm = solve_with_basis(&m, &cold.basis).unwrap();
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.objective - cold.objective).abs() < 1e-12);
        assert_eq!(warm.iterations, 1, "re-solve from optimum needs no pivot");
    }

    #[test]
    fn cut_added_then_warm_resolve_tightens_upward() {
        let mut m = LpModel::minimize();
        let x = m.add_var(0.0, f64::INFINITY, -1.0);
        let y = m.add_var(0.0, f64::INFINITY, -1.0);
        m.add_row(Sense::Le, 2.0, &[(x, 1.0)]).unwrap();
        m.add_row(Sense::Le, 2.0, &[(y, 1.0)]).unwrap();
        let base = solve(&m).unwrap();
        assert!((base.objective + 4.0).abs() < 1e-9);
        m.add_row(Sense::Le, 3.0, &[(x, 1.0), (y, 1.0)]).unwrap();
        let warm = solve_with_basis(&m, &base.basis).unwrap();
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!(warm.objective >= base.objective - 1e-9);
        assert!((warm.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn export_writes_lp_format() {
        let mut m = LpModel::minimize();
        let x = m.add_named_var(0.0, 1.0, -1.0, Some("width".into()));
        m.add_row(Sense::Le, 1.0, &[(x, 1.0)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lp");
        export_lp_file(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("Minimize"));
        assert!(text.contains("Subject To"));
        assert!(text.contains("width"));
        assert!(text.contains("c0:"));
        assert!(text.trim_end().ends_with("End"));
    }

    /// Converts a bounded-variable model to standard form and cross-checks
    /// the engine against the exact rational simplex.
    fn exact_oracle_objective(model: &LpModel) -> Option<f64> {
        let n = model.num_vars();
        let mut a: Vec<Vec<f64>> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut width = n;
        let mut slack_cols: Vec<(usize, f64)> = Vec::new(); // (row, sign)
        for row in &model.rows {
            let mut dense = vec![0.0; n];
            for &(VarId(j), c) in &row.coeffs {
                dense[j] = c;
            }
            match row.sense {
                Sense::Le => slack_cols.push((a.len(), 1.0)),
                Sense::Ge => slack_cols.push((a.len(), -1.0)),
                Sense::Eq => {}
            }
            a.push(dense);
            b.push(row.rhs);
        }
        // upper bounds as extra rows
        for (j, v) in model.vars.iter().enumerate() {
            assert_eq!(v.lower, 0.0, "oracle helper assumes zero lower bounds");
            if v.upper.is_finite() {
                let mut dense = vec![0.0; n];
                dense[j] = 1.0;
                slack_cols.push((a.len(), 1.0));
                a.push(dense);
                b.push(v.upper);
            }
        }
        for row in a.iter_mut() {
            row.resize(width + slack_cols.len(), 0.0);
        }
        for (k, &(r, sign)) in slack_cols.iter().enumerate() {
            a[r][width + k] = sign;
        }
        width += slack_cols.len();
        let ar: Vec<Vec<_>> = a
            .iter()
            .map(|row| row.iter().map(|&v| rat_from_f64(v)).collect())
            .collect();
        let br: Vec<_> = b.iter().map(|&v| rat_from_f64(v)).collect();
        let mut cr = vec![rat_from_f64(0.0); width];
        for (j, v) in model.vars.iter().enumerate() {
            cr[j] = rat_from_f64(v.obj);
        }
        match exact_solve_standard_form(&ar, &br, &cr) {
            ExactOutcome::Optimal { value, .. } => Some(rat_to_f64(&value)),
            _ => None,
        }
    }

    #[test]
    fn random_models_agree_with_exact_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        for _ in 0..60 {
            let n = rng.gen_range(2..6);
            let m = rng.gen_range(1..6);
            let mut model = LpModel::minimize();
            let vars: Vec<VarId> = (0..n)
                .map(|_| {
                    let upper = if rng.gen_bool(0.5) {
                        rng.gen_range(0.5..3.0)
                    } else {
                        f64::INFINITY
                    };
                    model.add_var(0.0, upper, rng.gen_range(-2.0..2.0))
                })
                .collect();
            for _ in 0..m {
                let mut coeffs: Vec<(VarId, f64)> = Vec::new();
                for &v in &vars {
                    if rng.gen_bool(0.7) {
                        coeffs.push((v, rng.gen_range(-1.0..2.0)));
                    }
                }
                if coeffs.is_empty() {
                    continue;
                }
                let sense = match rng.gen_range(0..3) {
                    0 => Sense::Le,
                    1 => Sense::Ge,
                    _ => Sense::Eq,
                };
                model.add_row(sense, rng.gen_range(0.0..3.0), &coeffs).unwrap();
            }
            let sol = solve(&model).unwrap();
            let oracle = exact_oracle_objective(&model);
            match (sol.status, oracle) {
                (LpStatus::Optimal, Some(want)) => {
                    checked += 1;
                    assert!(
                        (sol.objective - want).abs() <= 1e-6 * (1.0 + want.abs()),
                        "engine {} vs oracle {}",
                        sol.objective,
                        want
                    );
                    let chk = check_solution(&model, &sol);
                    assert!(chk.primal_residual <= FEAS_TOL * 10.0);
                    assert!(chk.gap <= GAP_TOL * 100.0, "gap {}", chk.gap);
                }
                (LpStatus::Optimal, None) => panic!("engine optimal, oracle not"),
                (LpStatus::Infeasible, Some(_)) => panic!("engine infeasible, oracle optimal"),
                _ => {}
            }
        }
        assert!(checked >= 20, "too few optimal cross-checks: {checked}");
    }

    #[test]
    fn deterministic_pivot_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut model = LpModel::minimize();
        let vars: Vec<VarId> = (0..8)
            .map(|_| model.add_var(0.0, f64::INFINITY, rng.gen_range(-1.0..1.0)))
            .collect();
        for _ in 0..6 {
            let coeffs: Vec<(VarId, f64)> = vars
                .iter()
                .map(|&v| (v, rng.gen_range(-1.0..1.0)))
                .collect();
            model.add_row(Sense::Le, rng.gen_range(1.0..2.0), &coeffs).unwrap();
        }
        let a = solve(&model).unwrap();
        let b = solve(&model).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.primal, b.primal);
        assert_eq!(a.duals, b.duals);
    }
}
