//! Bounded-variable revised simplex: primal and dual iterations over a
//! sparse LU basis with a product-form eta file. Deterministic throughout:
//! ties break on magnitude first, then on the lowest column index, and the
//! engine switches to Bland's rule after a stall to guarantee termination.

use super::lu::{LuFactors, LuWorkspace};
use super::sparse::{ScatterVec, SparseMatrix};
use super::{LpStatus, FEAS_TOL};

const DUAL_TOL: f64 = 1e-9;
const PIVOT_ABS_TOL: f64 = 1e-7;
const ZERO_TOL: f64 = 1e-11;
const ETA_REFACTOR: usize = 64;
const STALL_LIMIT: usize = 4000;
/// Ratio-test tie window: candidates this close to the best ratio compete
/// on pivot magnitude instead (degeneracy stabilization).
const RATIO_TIE: f64 = 1e-7;

/// Internal column state. Columns are structural variables first, then one
/// logical per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic(usize),
    AtLower,
    AtUpper,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

#[derive(Debug, Clone)]
struct Eta {
    slot: usize,
    /// Spike entries (slot, value) including the pivot slot itself.
    entries: Vec<(usize, f64)>,
    pivot: f64,
}

/// Model compiled to internal arrays. Rows are `A x + s = rhs` where each
/// row owns one logical `s` whose bounds encode the row sense.
pub(crate) struct Compiled {
    pub n_struct: usize,
    pub m: usize,
    pub a: SparseMatrix,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cost: Vec<f64>,
}

impl Compiled {
    fn n_total(&self) -> usize {
        self.n_struct + self.m
    }

    fn col_entries(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n_struct {
            self.a.col(j).collect()
        } else {
            vec![(j - self.n_struct, 1.0)]
        }
    }
}

pub(crate) struct Engine<'a> {
    model: &'a Compiled,
    /// Active objective: deterministically perturbed during iterations to
    /// break dual degeneracy, restored to the true costs for cleanup.
    cost: Vec<f64>,
    perturbed: bool,
    state: Vec<ColState>,
    basic: Vec<usize>,
    x_basic: Vec<f64>,
    nb_value: Vec<f64>,
    d: Vec<f64>,
    lu: Option<LuFactors>,
    etas: Vec<Eta>,
    ws: LuWorkspace,
    spike: ScatterVec,
    rho: ScatterVec,
    alpha: ScatterVec,
    eta_work: ScatterVec,
    /// Dual steepest-edge weights per basis slot (Forrest-Goldfarb,
    /// initialized to one when a basis is installed).
    dse: Vec<f64>,
    tau: ScatterVec,
    pub iterations: usize,
    iteration_limit: usize,
    bland: bool,
    stall: usize,
    last_objective: f64,
    pub degraded: bool,
    pub stats: PhaseStats,
}

/// Internal profiling counters, printed when `JOMATCH_LP_DEBUG` is set.
#[derive(Debug, Default)]
pub(crate) struct PhaseStats {
    pub factor_time: std::time::Duration,
    pub ftran_time: std::time::Duration,
    pub btran_time: std::time::Duration,
    pub gather_time: std::time::Duration,
    pub price_time: std::time::Duration,
    pub factorizations: usize,
    pub lu_nnz: usize,
}

pub(crate) struct EngineResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub objective: f64,
    pub basic_cols: Vec<usize>,
    pub at_upper: Vec<usize>,
    pub iterations: usize,
}

impl<'a> Engine<'a> {
    pub fn new(model: &'a Compiled, iteration_limit: usize) -> Self {
        let m = model.m;
        Engine {
            model,
            cost: model.cost.clone(),
            perturbed: false,
            state: Vec::new(),
            basic: Vec::new(),
            x_basic: Vec::new(),
            nb_value: Vec::new(),
            d: Vec::new(),
            lu: None,
            etas: Vec::new(),
            ws: LuWorkspace::new(m),
            spike: ScatterVec::new(m),
            rho: ScatterVec::new(m),
            alpha: ScatterVec::new(model.n_total()),
            eta_work: ScatterVec::new(m),
            dse: vec![1.0; m],
            tau: ScatterVec::new(m),
            iterations: 0,
            iteration_limit,
            bland: false,
            stall: 0,
            last_objective: f64::INFINITY,
            degraded: false,
            stats: PhaseStats::default(),
        }
    }

    /// Deterministic tiny cost perturbation; breaks the massive dual
    /// degeneracy of combinatorial models. Cleaned up exactly afterwards.
    pub fn perturb_costs(&mut self) {
        if self.perturbed {
            return;
        }
        self.perturbed = true;
        for j in 0..self.model.n_struct {
            let h = splitmix(j as u64 ^ 0x9e37_79b9_7f4a_7c15);
            let frac = (h >> 11) as f64 / (1u64 << 53) as f64; // in [0, 1)
            let eps = 1e-9 * (1.0 + self.model.cost[j].abs()) * (0.5 + frac);
            self.cost[j] = self.model.cost[j] + eps;
        }
    }

    pub fn is_perturbed(&self) -> bool {
        self.perturbed
    }

    /// Restores the true objective; reduced costs must be recomputed.
    pub fn unperturb_costs(&mut self) {
        if !self.perturbed {
            return;
        }
        self.perturbed = false;
        self.cost[..self.model.n_struct].copy_from_slice(&self.model.cost[..self.model.n_struct]);
    }

    /// Nonbasic resting value for a column: finite lower bound first, else
    /// finite upper bound, else zero for free columns.
    fn resting(&self, j: usize) -> (ColState, f64) {
        let l = self.model.lower[j];
        let u = self.model.upper[j];
        if l.is_finite() {
            (ColState::AtLower, l)
        } else if u.is_finite() {
            (ColState::AtUpper, u)
        } else {
            (ColState::AtLower, 0.0)
        }
    }

    /// All-logical starting basis.
    pub fn init_logical_basis(&mut self) {
        let n = self.model.n_total();
        self.state = Vec::with_capacity(n);
        self.nb_value = vec![0.0; n];
        for j in 0..self.model.n_struct {
            let (st, v) = self.resting(j);
            self.state.push(st);
            self.nb_value[j] = v;
        }
        self.basic = Vec::with_capacity(self.model.m);
        for r in 0..self.model.m {
            let col = self.model.n_struct + r;
            self.state.push(ColState::Basic(r));
            self.basic.push(col);
        }
        self.dse = vec![1.0; self.model.m];
    }

    /// Starting basis from explicit column lists. Returns false when the
    /// shape is incompatible (caller falls back to a cold start).
    pub fn init_given_basis(&mut self, basic_cols: &[usize], at_upper: &[usize]) -> bool {
        let n = self.model.n_total();
        if basic_cols.len() != self.model.m {
            return false;
        }
        if basic_cols.iter().any(|&c| c >= n) || at_upper.iter().any(|&c| c >= n) {
            return false;
        }
        self.state = Vec::with_capacity(n);
        self.nb_value = vec![0.0; n];
        for j in 0..n {
            let (st, v) = self.resting(j);
            self.state.push(st);
            self.nb_value[j] = v;
        }
        for &j in at_upper {
            if self.model.upper[j].is_finite() {
                self.state[j] = ColState::AtUpper;
                self.nb_value[j] = self.model.upper[j];
            }
        }
        let mut seen = vec![false; n];
        for (slot, &col) in basic_cols.iter().enumerate() {
            if seen[col] {
                return false;
            }
            seen[col] = true;
            self.state[col] = ColState::Basic(slot);
        }
        self.basic = basic_cols.to_vec();
        self.dse = vec![1.0; self.model.m];
        true
    }

    pub fn factorize(&mut self) -> bool {
        let started = std::time::Instant::now();
        let model = self.model;
        let basic = &self.basic;
        let res = LuFactors::factorize(
            model.m,
            |slot| model.col_entries(basic[slot]),
            &mut self.ws,
        );
        self.stats.factor_time += started.elapsed();
        self.stats.factorizations += 1;
        match res {
            Ok(lu) => {
                self.stats.lu_nnz = lu.nnz();
                self.lu = Some(lu);
                self.etas.clear();
                true
            }
            Err(_) => false,
        }
    }

    /// Recomputes basic values from scratch: `B x_B = rhs - N x_N`.
    pub fn recompute_x(&mut self) {
        let mut rhs: Vec<f64> = self.model.rhs.clone();
        for j in 0..self.model.n_total() {
            if matches!(self.state[j], ColState::Basic(_)) {
                continue;
            }
            let v = self.nb_value[j];
            if v != 0.0 {
                for (r, a) in self.model.col_entries(j) {
                    rhs[r] -= a * v;
                }
            }
        }
        let packed: Vec<(usize, f64)> = rhs
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v != 0.0)
            .map(|(r, &v)| (r, v))
            .collect();
        self.ftran(&packed);
        self.x_basic = vec![0.0; self.model.m];
        for (slot, v) in self.spike.iter_nonzero() {
            self.x_basic[slot] = v;
        }
    }

    /// Recomputes reduced costs from scratch via `y = B^-T c_B`.
    pub fn recompute_d(&mut self) {
        let y = self.dual_values();
        let n = self.model.n_total();
        self.d = vec![0.0; n];
        for j in 0..self.model.n_struct {
            if matches!(self.state[j], ColState::Basic(_)) {
                continue;
            }
            let mut dj = self.cost[j];
            for (r, a) in self.model.a.col(j) {
                dj -= y[r] * a;
            }
            self.d[j] = dj;
        }
        for r in 0..self.model.m {
            let j = self.model.n_struct + r;
            if !matches!(self.state[j], ColState::Basic(_)) {
                self.d[j] = -y[r];
            }
        }
    }

    /// Row duals `y = B^-T c_B` at the current basis, dense.
    pub fn dual_values(&mut self) -> Vec<f64> {
        let packed: Vec<(usize, f64)> = self
            .basic
            .iter()
            .enumerate()
            .filter_map(|(slot, &col)| {
                let c = self.cost[col];
                (c != 0.0).then_some((slot, c))
            })
            .collect();
        self.btran(&packed);
        let mut y = vec![0.0; self.model.m];
        for (r, v) in self.rho.iter_nonzero() {
            y[r] = v;
        }
        y
    }

    fn ftran(&mut self, a: &[(usize, f64)]) {
        let started = std::time::Instant::now();
        let lu = self.lu.as_ref().expect("factorized");
        lu.ftran(a, &mut self.ws, &mut self.spike);
        for eta in &self.etas {
            let xr = self.spike.get(eta.slot);
            if xr == 0.0 {
                continue;
            }
            let scaled = xr / eta.pivot;
            for &(i, w) in &eta.entries {
                if i == eta.slot {
                    continue;
                }
                self.spike.add(i, -w * scaled);
            }
            self.spike.set(eta.slot, scaled);
        }
        self.stats.ftran_time += started.elapsed();
    }

    fn btran(&mut self, c: &[(usize, f64)]) {
        let started = std::time::Instant::now();
        // eta transposes first, in reverse order, on a slot-space scatter
        let Self {
            etas, eta_work, ..
        } = self;
        eta_work.clear();
        for &(i, v) in c {
            eta_work.add(i, v);
        }
        for eta in etas.iter().rev() {
            let mut dot = 0.0;
            for &(i, w) in &eta.entries {
                if i != eta.slot {
                    dot += w * eta_work.get(i);
                }
            }
            let yr = eta_work.get(eta.slot);
            let new = (yr - dot) / eta.pivot;
            if yr != 0.0 || new != 0.0 {
                eta_work.set(eta.slot, new);
            }
        }
        let packed: Vec<(usize, f64)> = self.eta_work.iter_nonzero().collect();
        let lu = self.lu.as_ref().expect("factorized");
        lu.btran(&packed, &mut self.ws, &mut self.rho);
        self.stats.btran_time += started.elapsed();
    }

    fn primal_infeasibility(&self, slot: usize) -> f64 {
        let col = self.basic[slot];
        let x = self.x_basic[slot];
        let l = self.model.lower[col];
        let u = self.model.upper[col];
        if x < l - FEAS_TOL {
            l - x
        } else if x > u + FEAS_TOL {
            x - u
        } else {
            0.0
        }
    }

    pub fn is_primal_feasible(&self) -> bool {
        (0..self.model.m).all(|s| self.primal_infeasibility(s) == 0.0)
    }

    pub fn is_dual_feasible(&self) -> bool {
        (0..self.model.n_total()).all(|j| match self.state[j] {
            ColState::Basic(_) => true,
            ColState::AtLower => {
                self.d[j] >= -DUAL_TOL || self.model.lower[j] == self.model.upper[j]
            }
            ColState::AtUpper => {
                self.d[j] <= DUAL_TOL || self.model.lower[j] == self.model.upper[j]
            }
        })
    }

    fn objective(&self) -> f64 {
        let mut obj = 0.0;
        for j in 0..self.model.n_struct {
            let v = match self.state[j] {
                ColState::Basic(slot) => self.x_basic[slot],
                _ => self.nb_value[j],
            };
            obj += self.cost[j] * v;
        }
        obj
    }

    fn track_stall(&mut self, objective: f64) {
        if objective < self.last_objective - 1e-9 * (1.0 + objective.abs()) {
            self.last_objective = objective;
            self.stall = 0;
            self.bland = false;
        } else {
            self.stall += 1;
            if self.stall > STALL_LIMIT {
                self.bland = true;
            }
        }
    }

    fn push_eta(&mut self, slot: usize) {
        // keep the pivot entry, drop numerical dust
        let entries: Vec<(usize, f64)> = self
            .spike
            .iter_nonzero()
            .filter(|&(i, v)| i == slot || v.abs() > ZERO_TOL)
            .collect();
        let pivot = self.spike.get(slot);
        self.etas.push(Eta {
            slot,
            entries,
            pivot,
        });
    }

    fn refactor_if_due(&mut self) -> bool {
        if self.etas.len() >= ETA_REFACTOR {
            if !self.factorize() {
                return false;
            }
            self.recompute_x();
            self.recompute_d();
        }
        true
    }

    /// Gathers the pivot row over all columns into `self.alpha` from the
    /// row multipliers in `self.rho`.
    fn gather_pivot_row(&mut self) {
        let started = std::time::Instant::now();
        self.alpha.clear();
        let pattern_len = self.rho.pattern.len();
        for idx in 0..pattern_len {
            let r = self.rho.pattern[idx];
            let pr = self.rho.get(r);
            if pr == 0.0 {
                continue;
            }
            if pr.abs() <= ZERO_TOL {
                continue;
            }
            for (j, a) in self.model.a.row(r) {
                self.alpha.add(j, pr * a);
            }
            self.alpha.add(self.model.n_struct + r, pr);
        }
        self.stats.gather_time += started.elapsed();
    }

    fn update_reduced_costs(&mut self, theta: f64, entering: usize) {
        if theta == 0.0 {
            self.d[entering] = 0.0;
            return;
        }
        let pattern_len = self.alpha.pattern.len();
        for idx in 0..pattern_len {
            let j = self.alpha.pattern[idx];
            let aj = self.alpha.get(j);
            if aj == 0.0 || j == entering {
                continue;
            }
            self.d[j] -= theta * aj;
        }
        self.d[entering] = 0.0;
    }

    // --- primal simplex -----------------------------------------------

    fn price_primal(&mut self) -> Option<usize> {
        let started = std::time::Instant::now();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.model.n_total() {
            let score = match self.state[j] {
                ColState::Basic(_) => continue,
                ColState::AtLower => {
                    if self.model.lower[j] == self.model.upper[j] {
                        continue;
                    }
                    -self.d[j]
                }
                ColState::AtUpper => {
                    if self.model.lower[j] == self.model.upper[j] {
                        continue;
                    }
                    self.d[j]
                }
            };
            if score > DUAL_TOL {
                if self.bland {
                    return Some(j);
                }
                match best {
                    Some((_, bs)) if score <= bs => {}
                    _ => best = Some((j, score)),
                }
            }
        }
        self.stats.price_time += started.elapsed();
        best.map(|(j, _)| j)
    }

    /// One primal iteration. Returns the resulting status when finished.
    fn primal_step(&mut self) -> Option<LpStatus> {
        let Some(q) = self.price_primal() else {
            return Some(LpStatus::Optimal);
        };
        let dir = match self.state[q] {
            ColState::AtLower => 1.0,
            ColState::AtUpper => -1.0,
            ColState::Basic(_) => unreachable!(),
        };
        let col = self.model.col_entries(q);
        self.ftran(&col);

        // ratio test: smallest step that drives a basic variable to one of
        // its bounds, or the entering column to its opposite bound
        let own_range = self.model.upper[q] - self.model.lower[q];
        let mut t_best = if own_range.is_finite() {
            own_range
        } else {
            f64::INFINITY
        };
        let mut leave: Option<(usize, f64, bool)> = None; // slot, |pivot|, to_upper
        let pattern_len = self.spike.pattern.len();
        for idx in 0..pattern_len {
            let slot = self.spike.pattern[idx];
            let w = self.spike.get(slot);
            let delta = dir * w;
            if delta.abs() <= PIVOT_ABS_TOL {
                continue;
            }
            let bcol = self.basic[slot];
            let x = self.x_basic[slot];
            let (limit, to_upper) = if delta > 0.0 {
                let l = self.model.lower[bcol];
                if !l.is_finite() {
                    continue;
                }
                (((x - l) / delta).max(0.0), false)
            } else {
                let u = self.model.upper[bcol];
                if !u.is_finite() {
                    continue;
                }
                (((x - u) / delta).max(0.0), true)
            };
            let better = match leave {
                None => limit < t_best - RATIO_TIE,
                Some((ls, lw, _)) => {
                    limit < t_best - RATIO_TIE
                        || (limit <= t_best + RATIO_TIE
                            && (delta.abs() > lw
                                || (delta.abs() == lw && self.basic[slot] < self.basic[ls])))
                }
            };
            if better {
                t_best = t_best.min(limit);
                leave = Some((slot, delta.abs(), to_upper));
            }
        }

        if leave.is_none() {
            if t_best.is_infinite() {
                return Some(LpStatus::Unbounded);
            }
            // bound flip: entering jumps to its opposite bound
            let pattern_len = self.spike.pattern.len();
            for idx in 0..pattern_len {
                let slot = self.spike.pattern[idx];
                let w = self.spike.get(slot);
                self.x_basic[slot] -= t_best * dir * w;
            }
            let (new_state, new_val) = if dir > 0.0 {
                (ColState::AtUpper, self.model.upper[q])
            } else {
                (ColState::AtLower, self.model.lower[q])
            };
            self.state[q] = new_state;
            self.nb_value[q] = new_val;
            return None;
        }
        let (r_slot, _, to_upper) = leave.unwrap();

        // value updates
        let pattern_len = self.spike.pattern.len();
        for idx in 0..pattern_len {
            let slot = self.spike.pattern[idx];
            let w = self.spike.get(slot);
            self.x_basic[slot] -= t_best * dir * w;
        }
        let enter_value = self.nb_value[q] + dir * t_best;
        let leaving = self.basic[r_slot];
        self.state[leaving] = if to_upper {
            ColState::AtUpper
        } else {
            ColState::AtLower
        };
        self.nb_value[leaving] = if to_upper {
            self.model.upper[leaving]
        } else {
            self.model.lower[leaving]
        };
        self.basic[r_slot] = q;
        self.state[q] = ColState::Basic(r_slot);
        self.x_basic[r_slot] = enter_value;

        // reduced cost update via the pivot row
        let w_r = self.spike.get(r_slot);
        self.btran(&[(r_slot, 1.0)]);
        self.gather_pivot_row();
        let theta = self.d[q] / w_r;
        self.update_reduced_costs(theta, q);
        self.d[leaving] = -theta;

        self.push_eta(r_slot);
        None
    }

    pub fn run_primal(&mut self) -> LpStatus {
        loop {
            if self.iterations >= self.iteration_limit {
                return LpStatus::IterationLimit;
            }
            self.iterations += 1;
            if !self.refactor_if_due() {
                return LpStatus::NumericalBreakdown;
            }
            match self.primal_step() {
                Some(status) => return status,
                None => {
                    let obj = self.objective();
                    self.track_stall(obj);
                }
            }
        }
    }

    // --- dual simplex ---------------------------------------------------

    fn pick_leaving(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for slot in 0..self.model.m {
            let inf = self.primal_infeasibility(slot);
            if inf > 0.0 {
                if self.bland {
                    match best {
                        Some((bs, _)) if self.basic[bs] <= self.basic[slot] => {}
                        _ => best = Some((slot, inf)),
                    }
                } else {
                    // steepest-edge score: infeasibility^2 over the squared
                    // norm of the corresponding row of the basis inverse
                    let score = inf * inf / self.dse[slot].max(1e-10);
                    match best {
                        Some((_, bi)) if score <= bi => {}
                        _ => best = Some((slot, score)),
                    }
                }
            }
        }
        best.map(|(s, _)| s)
    }

    fn dual_step(&mut self) -> Option<LpStatus> {
        let Some(r_slot) = self.pick_leaving() else {
            return Some(LpStatus::Optimal);
        };
        let leaving = self.basic[r_slot];
        let x_r = self.x_basic[r_slot];
        let below = x_r < self.model.lower[leaving];
        // target bound the leaving variable exits at
        let target = if below {
            self.model.lower[leaving]
        } else {
            self.model.upper[leaving]
        };

        self.btran(&[(r_slot, 1.0)]);
        self.gather_pivot_row();

        // entering: minimal dual ratio among sign-eligible columns
        let mut best: Option<(usize, f64, f64)> = None; // col, ratio, |alpha|
        let pattern_len = self.alpha.pattern.len();
        for idx in 0..pattern_len {
            let j = self.alpha.pattern[idx];
            let aj = self.alpha.get(j);
            if aj.abs() <= PIVOT_ABS_TOL || matches!(self.state[j], ColState::Basic(_)) {
                continue;
            }
            if self.model.lower[j] == self.model.upper[j] {
                continue; // fixed columns cannot enter
            }
            let eligible = match self.state[j] {
                ColState::AtLower => {
                    if below {
                        aj < 0.0
                    } else {
                        aj > 0.0
                    }
                }
                ColState::AtUpper => {
                    if below {
                        aj > 0.0
                    } else {
                        aj < 0.0
                    }
                }
                ColState::Basic(_) => false,
            };
            if !eligible {
                continue;
            }
            let ratio = (self.d[j] / aj).abs();
            let better = match best {
                None => true,
                Some((bj, br, ba)) => {
                    if self.bland {
                        ratio < br - RATIO_TIE || (ratio <= br + RATIO_TIE && j < bj)
                    } else {
                        ratio < br - RATIO_TIE
                            || (ratio <= br + RATIO_TIE
                                && (aj.abs() > ba || (aj.abs() == ba && j < bj)))
                    }
                }
            };
            if better {
                best = Some((j, ratio, aj.abs()));
            }
        }
        let Some((q, _, _)) = best else {
            return Some(LpStatus::Infeasible);
        };

        // tau = B^-1 rho drives the steepest-edge weight update
        let rho_packed: Vec<(usize, f64)> = self.rho.iter_nonzero().collect();
        self.ftran(&rho_packed);
        self.tau.clear();
        for idx in 0..self.spike.pattern.len() {
            let slot = self.spike.pattern[idx];
            let v = self.spike.get(slot);
            if v != 0.0 {
                self.tau.set(slot, v);
            }
        }

        let alpha_q = self.alpha.get(q);
        let col = self.model.col_entries(q);
        self.ftran(&col);
        // the pivot element computed through the row (B^-T) and the column
        // (B^-1) must agree; a large discrepancy means the factorization
        // has drifted and the iteration restarts after a refactor
        let w_r = self.spike.get(r_slot);
        if (w_r - alpha_q).abs() > 1e-6 * (1.0 + alpha_q.abs()) {
            if !self.factorize() {
                return Some(LpStatus::NumericalBreakdown);
            }
            self.recompute_x();
            self.recompute_d();
            return None;
        }
        let step = (x_r - target) / w_r; // change of x_q

        // Forrest-Goldfarb weight update over the spike support
        let gamma_r = self.dse[r_slot].max(1e-10);
        let pattern_len = self.spike.pattern.len();
        for idx in 0..pattern_len {
            let slot = self.spike.pattern[idx];
            if slot == r_slot {
                continue;
            }
            let w = self.spike.get(slot);
            if w.abs() <= ZERO_TOL {
                continue;
            }
            let kappa = w / w_r;
            let updated = self.dse[slot] - 2.0 * kappa * self.tau.get(slot)
                + kappa * kappa * gamma_r;
            self.dse[slot] = updated.max(1e-4);
        }
        self.dse[r_slot] = (gamma_r / (w_r * w_r)).max(1e-4);

        let pattern_len = self.spike.pattern.len();
        for idx in 0..pattern_len {
            let slot = self.spike.pattern[idx];
            let w = self.spike.get(slot);
            self.x_basic[slot] -= step * w;
        }
        let enter_value = self.nb_value[q] + step;
        self.state[leaving] = if below {
            ColState::AtLower
        } else {
            ColState::AtUpper
        };
        self.nb_value[leaving] = target;
        self.basic[r_slot] = q;
        self.state[q] = ColState::Basic(r_slot);
        self.x_basic[r_slot] = enter_value;

        let theta = self.d[q] / w_r;
        self.update_reduced_costs(theta, q);
        self.d[leaving] = -theta;

        self.push_eta(r_slot);
        None
    }

    pub fn run_dual(&mut self) -> LpStatus {
        // weights may be stale after primal phases; Devex-style restart
        self.dse.iter_mut().for_each(|g| *g = 1.0);
        let mut last_inf = f64::INFINITY;
        let mut stall = 0usize;
        loop {
            if self.iterations >= self.iteration_limit {
                return LpStatus::IterationLimit;
            }
            self.iterations += 1;
            if !self.refactor_if_due() {
                return LpStatus::NumericalBreakdown;
            }
            match self.dual_step() {
                Some(status) => return status,
                None => {
                    let total_inf: f64 = (0..self.model.m)
                        .map(|s| self.primal_infeasibility(s))
                        .sum();
                    if total_inf < last_inf - 1e-10 {
                        last_inf = total_inf;
                        stall = 0;
                        self.bland = false;
                    } else {
                        stall += 1;
                        if stall > STALL_LIMIT {
                            self.bland = true;
                        }
                    }
                }
            }
        }
    }

    // --- phase 1 ---------------------------------------------------------

    /// Composite phase 1: minimizes the sum of bound violations of the
    /// basic variables. Reduced costs are recomputed each iteration from
    /// the current infeasibility signature.
    pub fn run_phase1(&mut self) -> LpStatus {
        let mut last_inf = f64::INFINITY;
        let mut stall = 0usize;
        loop {
            if self.iterations >= self.iteration_limit {
                return LpStatus::IterationLimit;
            }
            self.iterations += 1;
            if !self.refactor_if_due() {
                return LpStatus::NumericalBreakdown;
            }

            let mut sigma: Vec<(usize, f64)> = Vec::new();
            let mut total_inf = 0.0;
            for slot in 0..self.model.m {
                let col = self.basic[slot];
                let x = self.x_basic[slot];
                if x < self.model.lower[col] - FEAS_TOL {
                    sigma.push((slot, -1.0));
                    total_inf += self.model.lower[col] - x;
                } else if x > self.model.upper[col] + FEAS_TOL {
                    sigma.push((slot, 1.0));
                    total_inf += x - self.model.upper[col];
                }
            }
            if sigma.is_empty() {
                return LpStatus::Optimal; // feasible; caller switches phase
            }
            if total_inf < last_inf - 1e-10 {
                last_inf = total_inf;
                stall = 0;
                self.bland = false;
            } else {
                stall += 1;
                if stall > STALL_LIMIT {
                    self.bland = true;
                }
            }

            // phase-1 reduced costs: d1_j = -sigma^T B^-1 A_j
            self.btran(&sigma);
            let mut entering: Option<(usize, f64)> = None;
            {
                // gather -y1^T A over all columns
                self.alpha.clear();
                let pattern_len = self.rho.pattern.len();
                for idx in 0..pattern_len {
                    let r = self.rho.pattern[idx];
                    let pr = self.rho.get(r);
                    if pr == 0.0 {
                        continue;
                    }
                    for (j, a) in self.model.a.row(r) {
                        self.alpha.add(j, -pr * a);
                    }
                    self.alpha.add(self.model.n_struct + r, -pr);
                }
                let pattern_len = self.alpha.pattern.len();
                for idx in 0..pattern_len {
                    let j = self.alpha.pattern[idx];
                    if matches!(self.state[j], ColState::Basic(_)) {
                        continue;
                    }
                    if self.model.lower[j] == self.model.upper[j] {
                        continue;
                    }
                    let d1 = self.alpha.get(j);
                    let score = match self.state[j] {
                        ColState::AtLower => -d1,
                        ColState::AtUpper => d1,
                        ColState::Basic(_) => continue,
                    };
                    if score > DUAL_TOL {
                        if self.bland {
                            match entering {
                                Some((bj, _)) if bj <= j => {}
                                _ => entering = Some((j, score)),
                            }
                        } else {
                            match entering {
                                Some((_, bs)) if score <= bs => {}
                                _ => entering = Some((j, score)),
                            }
                        }
                    }
                }
            }
            let Some((q, _)) = entering else {
                return LpStatus::Infeasible; // local optimum with infeasibility left
            };

            let dir = match self.state[q] {
                ColState::AtLower => 1.0,
                ColState::AtUpper => -1.0,
                ColState::Basic(_) => unreachable!(),
            };
            let col = self.model.col_entries(q);
            self.ftran(&col);

            // ratio test: feasible basics stay within bounds, infeasible
            // basics stop on reaching their violated bound
            let own_range = self.model.upper[q] - self.model.lower[q];
            let mut t_best = if own_range.is_finite() {
                own_range
            } else {
                f64::INFINITY
            };
            let mut leave: Option<(usize, f64, bool)> = None;
            let pattern_len = self.spike.pattern.len();
            for idx in 0..pattern_len {
                let slot = self.spike.pattern[idx];
                let w = self.spike.get(slot);
                let delta = dir * w;
                if delta.abs() <= PIVOT_ABS_TOL {
                    continue;
                }
                let bcol = self.basic[slot];
                let x = self.x_basic[slot];
                let l = self.model.lower[bcol];
                let u = self.model.upper[bcol];
                let candidate: Option<(f64, bool)> = if x < l - FEAS_TOL {
                    // below lower: blocks when rising to l
                    (delta < 0.0).then(|| (((x - l) / delta).max(0.0), false))
                } else if x > u + FEAS_TOL {
                    (delta > 0.0).then(|| (((x - u) / delta).max(0.0), true))
                } else if delta > 0.0 {
                    l.is_finite().then(|| (((x - l) / delta).max(0.0), false))
                } else {
                    u.is_finite().then(|| (((x - u) / delta).max(0.0), true))
                };
                if let Some((limit, to_upper)) = candidate {
                    let better = match leave {
                        None => limit <= t_best,
                        Some((ls, lw, _)) => {
                            limit < t_best - RATIO_TIE
                                || (limit <= t_best + RATIO_TIE
                                    && (delta.abs() > lw
                                        || (delta.abs() == lw
                                            && self.basic[slot] < self.basic[ls])))
                        }
                    };
                    if better {
                        t_best = t_best.min(limit);
                        leave = Some((slot, delta.abs(), to_upper));
                    }
                }
            }
            match leave {
                None => {
                    if t_best.is_infinite() {
                        // phase-1 objective is bounded below by zero, so an
                        // unbounded ray only flips the entering bound
                        return LpStatus::NumericalBreakdown;
                    }
                    let pattern_len = self.spike.pattern.len();
                    for idx in 0..pattern_len {
                        let slot = self.spike.pattern[idx];
                        let w = self.spike.get(slot);
                        self.x_basic[slot] -= t_best * dir * w;
                    }
                    let (st, v) = if dir > 0.0 {
                        (ColState::AtUpper, self.model.upper[q])
                    } else {
                        (ColState::AtLower, self.model.lower[q])
                    };
                    self.state[q] = st;
                    self.nb_value[q] = v;
                }
                Some((r_slot, _, to_upper)) => {
                    let pattern_len = self.spike.pattern.len();
                    for idx in 0..pattern_len {
                        let slot = self.spike.pattern[idx];
                        let w = self.spike.get(slot);
                        self.x_basic[slot] -= t_best * dir * w;
                    }
                    let enter_value = self.nb_value[q] + dir * t_best;
                    let leaving = self.basic[r_slot];
                    self.state[leaving] = if to_upper {
                        ColState::AtUpper
                    } else {
                        ColState::AtLower
                    };
                    self.nb_value[leaving] = if to_upper {
                        self.model.upper[leaving]
                    } else {
                        self.model.lower[leaving]
                    };
                    self.basic[r_slot] = q;
                    self.state[q] = ColState::Basic(r_slot);
                    self.x_basic[r_slot] = enter_value;
                    self.push_eta(r_slot);
                }
            }
        }
    }

    pub fn result(&mut self, status: LpStatus) -> EngineResult {
        let mut x = vec![0.0; self.model.n_struct];
        for j in 0..self.model.n_struct {
            x[j] = match self.state[j] {
                ColState::Basic(slot) => self.x_basic[slot],
                _ => self.nb_value[j],
            };
        }
        // snap values that drifted marginally outside their bounds
        for j in 0..self.model.n_struct {
            let l = self.model.lower[j];
            let u = self.model.upper[j];
            if x[j] < l && x[j] > l - FEAS_TOL {
                x[j] = l;
            }
            if x[j] > u && x[j] < u + FEAS_TOL {
                x[j] = u;
            }
            if x[j].abs() < ZERO_TOL {
                x[j] = 0.0;
            }
        }
        let duals = if matches!(status, LpStatus::Optimal | LpStatus::IterationLimit) {
            self.dual_values()
        } else {
            vec![0.0; self.model.m]
        };
        let objective = x
            .iter()
            .zip(&self.model.cost[..self.model.n_struct])
            .map(|(&v, &c)| v * c)
            .sum();
        let at_upper: Vec<usize> = (0..self.model.n_total())
            .filter(|&j| matches!(self.state[j], ColState::AtUpper))
            .collect();
        EngineResult {
            status,
            x,
            duals,
            objective,
            basic_cols: self.basic.clone(),
            at_upper,
            iterations: self.iterations,
        }
    }
}
