//! Builders translating an [`Instance`] into LP models: the equality-form
//! permutation-synchronization LP and the inequality-form general matching
//! LP, both with triangle rows generated eagerly at small sizes and lazily
//! (row generation against the current optimum) beyond a row cap.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cuts::{Cut, CutKey};
use crate::hungarian;
use crate::instance::{CostTensor, Instance, ObjectConfig};
use crate::lp::{
    self, Basis, LpError, LpModel, LpRow, LpSolution, RowId, Sense, VarId, FEAS_TOL,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("permutation-synchronization form needs equal object sizes, got {0:?}")]
    UnequalSizes(Vec<usize>),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// One LP variable `X_{tq}(i, j)` with `i < j`, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarIndex {
    pub i: usize,
    pub j: usize,
    pub t: usize,
    pub q: usize,
}

/// Bijection between [`VarIndex`] and LP column ids; covers every pair,
/// observed or not, in the canonical order (pairs lexicographic, entries
/// row-major).
#[derive(Debug, Clone)]
pub struct VarMap {
    config: ObjectConfig,
    offsets: Vec<usize>,
    total: usize,
}

impl VarMap {
    pub fn new(config: &ObjectConfig) -> Self {
        let mut offsets = Vec::with_capacity(config.pair_count());
        let mut total = 0;
        for (i, j) in config.pairs() {
            offsets.push(total);
            total += config.size(i) * config.size(j);
        }
        VarMap {
            config: config.clone(),
            offsets,
            total,
        }
    }

    pub fn config(&self) -> &ObjectConfig {
        &self.config
    }

    pub fn count(&self) -> usize {
        self.total
    }

    pub fn column(&self, v: VarIndex) -> VarId {
        VarId(self.position(v))
    }

    /// Canonical coordinate of a variable in vectorized points.
    pub fn position(&self, v: VarIndex) -> usize {
        debug_assert!(v.i < v.j);
        let pair = self.config.pair_id(v.i, v.j);
        self.offsets[pair] + v.t * self.config.size(v.j) + v.q
    }

    pub fn index_of(&self, col: VarId) -> VarIndex {
        let pos = col.0;
        let pair = match self.offsets.binary_search(&pos) {
            Ok(p) => p,
            Err(p) => p - 1,
        };
        let (i, j) = self
            .config
            .pairs()
            .nth(pair)
            .expect("pair id in range");
        let rel = pos - self.offsets[pair];
        let dj = self.config.size(j);
        VarIndex {
            i,
            j,
            t: rel / dj,
            q: rel % dj,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelForm {
    /// Problem with row/column sums fixed to one (equality form).
    PermSync,
    /// General form with row/column sums at most one.
    JomBasic,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Triangle rows are built eagerly up to this count and generated
    /// lazily (like cuts) beyond it.
    pub max_eager_triangle_rows: usize,
    /// Cap on lazily added triangle rows per round; the most violated rows
    /// are taken first.
    pub max_rows_per_round: usize,
    /// Lazy rows slack for this many consecutive rounds are dropped from
    /// the model (they return if violated again).
    pub purge_after_rounds: u32,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_eager_triangle_rows: 20_000,
            max_rows_per_round: 2_000,
            purge_after_rounds: 4,
        }
    }
}

/// A matching LP with bookkeeping for lazy triangle rows and attached cuts.
#[derive(Debug, Clone)]
pub struct MatchingLp {
    pub model: LpModel,
    pub vars: VarMap,
    pub form: ModelForm,
    eager_triangles: bool,
    added_triangles: BTreeSet<u64>,
    lazy_rows: Vec<LazyRow>,
    attached_cuts: BTreeSet<CutKey>,
    opts: BuildOptions,
}

#[derive(Debug, Clone, Copy)]
struct LazyRow {
    row: usize,
    key: u64,
    inactive: u32,
}

/// Solve statistics for a lazily generated model.
#[derive(Debug, Clone)]
pub struct SolveStats {
    pub solution: LpSolution,
    pub rounds: usize,
    pub lazy_rows_added: usize,
}

/// Total triangle-row count of the full model.
pub fn full_triangle_rows(config: &ObjectConfig) -> usize {
    config
        .triples()
        .map(|(i, j, k)| 3 * config.size(i) * config.size(j) * config.size(k))
        .sum()
}

fn triangle_key(i: usize, j: usize, k: usize, l: usize, t: usize, q: usize, f: usize) -> u64 {
    debug_assert!(i < 1 << 10 && j < 1 << 10 && k < 1 << 10);
    debug_assert!(l < 1 << 10 && t < 1 << 10 && q < 1 << 10);
    (((((((((i as u64) << 10 | j as u64) << 10) | k as u64) << 10 | l as u64) << 10)
        | t as u64)
        << 10
        | q as u64)
        << 2)
        | f as u64
}

/// The three triangle rows for a `(triple, l, t, q)` cell, in the order
/// minus-first-block, minus-middle-block, minus-third-block.
fn triangle_rows(
    vars: &VarMap,
    (i, j, k): (usize, usize, usize),
    l: usize,
    t: usize,
    q: usize,
) -> [LpRow; 3] {
    let x_ij = vars.column(VarIndex { i, j, t: l, q: t });
    let x_jk = vars.column(VarIndex { i: j, j: k, t, q });
    let x_ik = vars.column(VarIndex { i, j: k, t: l, q });
    let row = |s_ij: f64, s_jk: f64, s_ik: f64| LpRow {
        sense: Sense::Le,
        rhs: 1.0,
        coeffs: vec![(x_ij, s_ij), (x_jk, s_jk), (x_ik, s_ik)],
    };
    [
        row(-1.0, 1.0, 1.0),
        row(1.0, -1.0, 1.0),
        row(1.0, 1.0, -1.0),
    ]
}

fn build_common(
    inst: &Instance,
    form: ModelForm,
    opts: BuildOptions,
) -> Result<MatchingLp, BuildError> {
    let config = inst.config();
    if form == ModelForm::PermSync && !config.is_uniform() {
        return Err(BuildError::UnequalSizes(config.sizes().to_vec()));
    }
    let vars = VarMap::new(config);
    let costs = CostTensor::from_instance(inst);
    let mut model = LpModel::minimize();
    for (i, j) in config.pairs() {
        for t in 0..config.size(i) {
            for q in 0..config.size(j) {
                let name = format!("x_{}_{}_{}_{}", i + 1, j + 1, t + 1, q + 1);
                model.add_named_var(
                    0.0,
                    f64::INFINITY,
                    costs.block(i, j).get(t, q),
                    Some(name),
                );
            }
        }
    }
    // row/column sum rows per pair
    for (i, j) in config.pairs() {
        let (sense, rhs) = match form {
            ModelForm::PermSync => (Sense::Eq, 1.0),
            ModelForm::JomBasic => (Sense::Le, 1.0),
        };
        for t in 0..config.size(i) {
            let coeffs: Vec<(VarId, f64)> = (0..config.size(j))
                .map(|q| (vars.column(VarIndex { i, j, t, q }), 1.0))
                .collect();
            model.add_row(sense, rhs, &coeffs)?;
        }
        for q in 0..config.size(j) {
            let coeffs: Vec<(VarId, f64)> = (0..config.size(i))
                .map(|t| (vars.column(VarIndex { i, j, t, q }), 1.0))
                .collect();
            model.add_row(sense, rhs, &coeffs)?;
        }
    }
    let full = full_triangle_rows(config);
    let eager = full <= opts.max_eager_triangle_rows;
    let mut added_triangles = BTreeSet::new();
    if eager {
        for (i, j, k) in config.triples() {
            for l in 0..config.size(i) {
                for t in 0..config.size(j) {
                    for q in 0..config.size(k) {
                        for (f, row) in triangle_rows(&vars, (i, j, k), l, t, q)
                            .into_iter()
                            .enumerate()
                        {
                            model.add_row(row.sense, row.rhs, &row.coeffs)?;
                            added_triangles.insert(triangle_key(i, j, k, l, t, q, f));
                        }
                    }
                }
            }
        }
    }
    Ok(MatchingLp {
        model,
        vars,
        form,
        eager_triangles: eager,
        added_triangles,
        lazy_rows: Vec::new(),
        attached_cuts: BTreeSet::new(),
        opts,
    })
}

/// Equality-form LP for permutation synchronization: row and column sums
/// equal one, all triangle rows, costs from the instance.
pub fn build_perm_sync_lp(inst: &Instance) -> Result<MatchingLp, BuildError> {
    build_perm_sync_lp_with(inst, BuildOptions::default())
}

pub fn build_perm_sync_lp_with(
    inst: &Instance,
    opts: BuildOptions,
) -> Result<MatchingLp, BuildError> {
    build_common(inst, ModelForm::PermSync, opts)
}

/// Relaxation of the general matching ILP: row and column sums at most
/// one, triangle rows, nonnegativity.
pub fn build_jom_basic_lp(inst: &Instance) -> Result<MatchingLp, BuildError> {
    build_jom_basic_lp_with(inst, BuildOptions::default())
}

pub fn build_jom_basic_lp_with(
    inst: &Instance,
    opts: BuildOptions,
) -> Result<MatchingLp, BuildError> {
    build_common(inst, ModelForm::JomBasic, opts)
}

impl MatchingLp {
    pub fn is_eager(&self) -> bool {
        self.eager_triangles
    }

    pub fn cuts_attached(&self) -> usize {
        self.attached_cuts.len()
    }

    /// All violated, not-yet-added triangle cells at a point with their
    /// violations, in deterministic scan order.
    fn violated_triangles(&self, x: &[f64]) -> Vec<(u64, f64)> {
        let config = self.vars.config().clone();
        let mut out = Vec::new();
        let tol = 10.0 * FEAS_TOL;
        for (i, j, k) in config.triples() {
            for l in 0..config.size(i) {
                for t in 0..config.size(j) {
                    for q in 0..config.size(k) {
                        let v_ij = x[self.vars.position(VarIndex { i, j, t: l, q: t })];
                        let v_jk = x[self.vars.position(VarIndex { i: j, j: k, t, q })];
                        let v_ik = x[self.vars.position(VarIndex { i, j: k, t: l, q })];
                        let lhs = [
                            -v_ij + v_jk + v_ik,
                            v_ij - v_jk + v_ik,
                            v_ij + v_jk - v_ik,
                        ];
                        for (f, &val) in lhs.iter().enumerate() {
                            if val > 1.0 + tol {
                                let key = triangle_key(i, j, k, l, t, q, f);
                                if !self.added_triangles.contains(&key) {
                                    out.push((key, val - 1.0));
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn row_from_key(&self, key: u64) -> LpRow {
        let f = (key & 3) as usize;
        let q = (key >> 2 & 0x3ff) as usize;
        let t = (key >> 12 & 0x3ff) as usize;
        let l = (key >> 22 & 0x3ff) as usize;
        let k = (key >> 32 & 0x3ff) as usize;
        let j = (key >> 42 & 0x3ff) as usize;
        let i = (key >> 52 & 0x3ff) as usize;
        triangle_rows(&self.vars, (i, j, k), l, t, q)[f].clone()
    }

    /// Drops lazy rows that have been slack for enough consecutive rounds.
    /// Returns the remapped warm-start basis when anything was purged.
    fn purge_lazy_rows(&mut self, solution: &lp::LpSolution) -> Option<Basis> {
        if self.lazy_rows.is_empty() {
            return None;
        }
        let slack_tol = 10.0 * FEAS_TOL;
        let mut any_purge = false;
        for info in self.lazy_rows.iter_mut() {
            let row = self.model.row(RowId(info.row));
            let act: f64 = row
                .coeffs
                .iter()
                .map(|&(VarId(v), c)| c * solution.primal[v])
                .sum();
            if row.rhs - act > slack_tol {
                info.inactive += 1;
                if info.inactive >= self.opts.purge_after_rounds {
                    any_purge = true;
                }
            } else {
                info.inactive = 0;
            }
        }
        if !any_purge {
            return None;
        }
        let mut keep = vec![true; self.model.num_rows()];
        for info in &self.lazy_rows {
            if info.inactive >= self.opts.purge_after_rounds {
                keep[info.row] = false;
            }
        }
        // the basis must stay square: every dropped row's logical is basic
        // because the row is strictly slack at the optimum
        let mut probe = self.model.clone();
        let mapping = probe.retain_rows(&keep);
        let Some(basis) = solution.basis.remap_after_row_removal(&mapping) else {
            for info in self.lazy_rows.iter_mut() {
                info.inactive = 0; // skip purging this round
            }
            return None;
        };
        self.model = probe;
        let mut kept_rows = Vec::with_capacity(self.lazy_rows.len());
        for info in &self.lazy_rows {
            match mapping[info.row] {
                Some(new_row) => kept_rows.push(LazyRow {
                    row: new_row,
                    key: info.key,
                    inactive: info.inactive,
                }),
                None => {
                    self.added_triangles.remove(&info.key);
                }
            }
        }
        self.lazy_rows = kept_rows;
        Some(basis)
    }

    /// Solves the model; with lazy triangles this loops row generation
    /// (most violated first, stale rows purged) and warm-started
    /// dual-simplex re-solves until no triangle is violated.
    pub fn solve(&mut self) -> Result<SolveStats, LpError> {
        self.solve_from(None)
    }

    pub fn solve_from(&mut self, start: Option<&Basis>) -> Result<SolveStats, LpError> {
        let mut solution = match start {
            Some(basis) => lp::solve_with_basis(&self.model, basis)?,
            None => lp::solve(&self.model)?,
        };
        let mut rounds = 1usize;
        let mut lazy_rows_added = 0usize;
        loop {
            if !solution.is_optimal() {
                break;
            }
            let mut violated = self.violated_triangles(&solution.primal);
            if violated.is_empty() {
                break;
            }
            // most violated first, deterministic tie-break on the cell key
            violated.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            violated.truncate(self.opts.max_rows_per_round);
            let warm = self.purge_lazy_rows(&solution);
            for (key, _) in violated {
                let row = self.row_from_key(key);
                let id = self.model.add_row(row.sense, row.rhs, &row.coeffs)?;
                self.added_triangles.insert(key);
                self.lazy_rows.push(LazyRow {
                    row: id.0,
                    key,
                    inactive: 0,
                });
                lazy_rows_added += 1;
            }
            let basis = warm.as_ref().unwrap_or(&solution.basis);
            solution = lp::solve_with_basis(&self.model, basis)?;
            rounds += 1;
        }
        Ok(SolveStats {
            solution,
            rounds,
            lazy_rows_added,
        })
    }

    /// Attaches cuts as `<=` rows; duplicates (by canonical key) are
    /// skipped, so attaching is idempotent. Returns how many rows were
    /// actually added.
    pub fn attach_cuts(&mut self, cuts: &[Cut]) -> Result<usize, LpError> {
        let mut added = 0;
        for cut in cuts {
            let key = cut.canonical_key();
            if !self.attached_cuts.insert(key) {
                continue;
            }
            let ineq = cut.to_inequality(self.vars.config());
            let row = ineq.to_lp_row(&self.vars);
            self.model.add_row(row.sense, row.rhs, &row.coeffs)?;
            added += 1;
        }
        Ok(added)
    }

    /// Row/column-sum structure plus a per-pair optimal assignment give a
    /// primal-feasible starting basis for the equality form: the matched
    /// variables, a spanning-tree completion and one logical per pair.
    pub fn crash_basis(&self, inst: &Instance) -> Option<Basis> {
        if self.form != ModelForm::PermSync {
            return None;
        }
        let config = self.vars.config();
        let d = config.size(0);
        let costs = CostTensor::from_instance(inst);
        let mut basic_cols = Vec::with_capacity(self.model.num_rows());
        let mut pair_row = 0usize; // rows are laid out pair-major
        for (i, j) in config.pairs() {
            let block = costs.block(i, j);
            let cost: Vec<Vec<f64>> = (0..d)
                .map(|t| (0..d).map(|q| block.get(t, q)).collect())
                .collect();
            let (assign, _) = hungarian::solve_min_cost(&cost);
            for (t, &q) in assign.iter().enumerate() {
                basic_cols.push(self.vars.column(VarIndex { i, j, t, q }).0);
            }
            for t in 1..d {
                // connect component t to component 0 through row 0
                basic_cols.push(self.vars.column(VarIndex { i, j, t: 0, q: assign[t] }).0);
            }
            // one logical on the pair's first row-sum row
            basic_cols.push(self.model.num_vars() + pair_row);
            pair_row += 2 * d;
        }
        Some(Basis::from_columns(self.model.num_vars(), basic_cols, Vec::new()))
    }

    /// Largest violation of any model row at a point (for tests).
    pub fn max_row_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.model.num_rows() {
            let row = self.model.row(RowId(r));
            let act: f64 = row.coeffs.iter().map(|&(VarId(j), c)| c * x[j]).sum();
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope_lab::{enumerate_vertices, vectorize_binary};
    use crate::synth::{generate, CorruptionParams};

    fn small_instance(n: usize, d: usize, p_true: f64, seed: u64) -> Instance {
        generate(&CorruptionParams {
            n,
            d,
            p_true,
            p_obs: 1.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn perm_sync_counts_for_n3_d2() {
        let inst = small_instance(3, 2, 0.5, 1);
        let lp = build_perm_sync_lp(&inst).unwrap();
        assert_eq!(lp.model.num_vars(), 12);
        assert!(lp.is_eager());
        // 12 equality rows + 24 triangle rows
        assert_eq!(lp.model.num_rows(), 12 + 24);
    }

    #[test]
    fn jom_var_count_for_mixed_sizes() {
        let config = ObjectConfig::new(vec![1, 2, 2]).unwrap();
        assert_eq!(VarMap::new(&config).count(), 8);
    }

    #[test]
    fn var_map_round_trip() {
        let config = ObjectConfig::new(vec![2, 3, 1, 4]).unwrap();
        let vars = VarMap::new(&config);
        let mut seen = std::collections::BTreeSet::new();
        for (i, j) in config.pairs() {
            for t in 0..config.size(i) {
                for q in 0..config.size(j) {
                    let v = VarIndex { i, j, t, q };
                    let col = vars.column(v);
                    assert!(seen.insert(col));
                    assert_eq!(vars.index_of(col), v);
                }
            }
        }
        assert_eq!(seen.len(), vars.count());
    }

    #[test]
    fn all_true_instance_recovers_identity_blocks() {
        let inst = small_instance(4, 2, 1.0, 3);
        let mut lp = build_perm_sync_lp(&inst).unwrap();
        let stats = lp.solve().unwrap();
        assert!(stats.solution.is_optimal());
        // costs all favor the diagonal: optimum is all identities
        let pairs = inst.config().pair_count() as f64;
        assert!((stats.solution.objective + pairs * 2.0).abs() < 1e-6);
    }

    #[test]
    fn vertices_are_feasible_for_both_builders() {
        let inst = small_instance(3, 2, 0.4, 9);
        let sync = build_perm_sync_lp(&inst).unwrap();
        let jom = build_jom_basic_lp(&inst).unwrap();
        let vs = enumerate_vertices(inst.config()).unwrap();
        for k in 0..vs.len() {
            let maps = vs.maps(k);
            let x: Vec<f64> = vectorize_binary(&maps).iter().map(|&v| v as f64).collect();
            // every vertex satisfies the inequality form
            assert!(jom.max_row_violation(&x) <= 1e-12);
            // permutation vertices satisfy the equality form
            if maps.blocks().iter().all(|b| {
                (0..b.rows()).all(|t| (0..b.cols()).map(|q| b.get(t, q)).sum::<f64>() == 1.0)
            }) {
                assert!(sync.max_row_violation(&x) <= 1e-12);
            }
        }
    }

    #[test]
    fn lazy_and_eager_agree() {
        let inst = small_instance(5, 3, 0.3, 17);
        let mut eager = build_perm_sync_lp_with(
            &inst,
            BuildOptions {
                max_eager_triangle_rows: usize::MAX,
                ..Default::default()
            },
        )
        .unwrap();
        let mut lazy = build_perm_sync_lp_with(
            &inst,
            BuildOptions {
                max_eager_triangle_rows: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(eager.is_eager());
        assert!(!lazy.is_eager());
        let a = eager.solve().unwrap();
        let b = lazy.solve().unwrap();
        assert!(a.solution.is_optimal() && b.solution.is_optimal());
        assert!(
            (a.solution.objective - b.solution.objective).abs() < 1e-6,
            "eager {} vs lazy {}",
            a.solution.objective,
            b.solution.objective
        );
        assert!(b.rounds >= 1);
    }

    #[test]
    fn crash_basis_matches_cold_solve() {
        let inst = small_instance(6, 3, 0.5, 23);
        let mut lp = build_perm_sync_lp_with(
            &inst,
            BuildOptions {
                max_eager_triangle_rows: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let crash = lp.crash_basis(&inst).unwrap();
        let warm = lp.solve_from(Some(&crash)).unwrap();
        let mut cold_lp = build_perm_sync_lp_with(
            &inst,
            BuildOptions {
                max_eager_triangle_rows: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let cold = cold_lp.solve().unwrap();
        assert!(warm.solution.is_optimal());
        assert!(
            (warm.solution.objective - cold.solution.objective).abs() < 1e-6,
            "warm {} vs cold {}",
            warm.solution.objective,
            cold.solution.objective
        );
    }
}
