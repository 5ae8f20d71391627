//! Sparse LU factorization of the simplex basis (left-looking, partial
//! pivoting by magnitude) with sparse forward/backward and transposed
//! solves. Columns are internally reordered by fill count so that logical
//! (unit) columns pivot first; the slot translation is hidden behind
//! [`LuFactors::ftran`] / [`LuFactors::btran`].

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::sparse::ScatterVec;

const PIVOT_TOL: f64 = 1e-10;
/// Values below this are treated as numerical noise during solves.
const DROP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LuError {
    /// No acceptable pivot while processing the column in this basis slot.
    Singular { slot: usize },
}

#[derive(Debug, Clone)]
pub struct LuFactors {
    m: usize,
    /// Strict lower entries of column k. During factorization these hold
    /// original row indices; afterwards they are pivot positions > k.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// Strict upper entries of column k: (position < k, value).
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    /// Row-major shadows for the transposed solves.
    l_rows: Vec<Vec<(usize, f64)>>,
    u_rows: Vec<Vec<(usize, f64)>>,
    /// original row -> pivot position
    pos_of_row: Vec<usize>,
    /// pivot position -> original row
    row_of_pos: Vec<usize>,
    /// basis slot -> internal column order position, and back
    order_of_slot: Vec<usize>,
    slot_of_order: Vec<usize>,
}

/// Scratch space shared across factorizations and solves.
pub struct LuWorkspace {
    work: ScatterVec,
    work2: ScatterVec,
    heap: BinaryHeap<Reverse<usize>>,
    heap_desc: BinaryHeap<usize>,
    queued: Vec<bool>,
    touched: Vec<usize>,
}

fn queue_asc(
    heap: &mut BinaryHeap<Reverse<usize>>,
    queued: &mut [bool],
    touched: &mut Vec<usize>,
    i: usize,
) {
    if !queued[i] {
        queued[i] = true;
        touched.push(i);
        heap.push(Reverse(i));
    }
}

fn queue_desc(
    heap: &mut BinaryHeap<usize>,
    queued: &mut [bool],
    touched: &mut Vec<usize>,
    i: usize,
) {
    if !queued[i] {
        queued[i] = true;
        touched.push(i);
        heap.push(i);
    }
}

impl LuWorkspace {
    pub fn new(m: usize) -> Self {
        LuWorkspace {
            work: ScatterVec::new(m),
            work2: ScatterVec::new(m),
            heap: BinaryHeap::new(),
            heap_desc: BinaryHeap::new(),
            queued: vec![false; m],
            touched: Vec::new(),
        }
    }

    fn reset_queued(&mut self) {
        for &i in &self.touched {
            self.queued[i] = false;
        }
        self.touched.clear();
        self.heap.clear();
        self.heap_desc.clear();
    }
}

/// Pre-factorization triangularization: repeatedly eliminate column and
/// row singletons (both are fill-free pivots), leaving a small bump for
/// the general pass. Returns the column order and, for peeled columns, the
/// forced pivot row.
fn peel_order(m: usize, cols: &[Vec<(usize, f64)>]) -> (Vec<usize>, Vec<Option<usize>>) {
    let mut row_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (k, col) in cols.iter().enumerate() {
        for &(r, _) in col {
            row_cols[r].push(k);
        }
    }
    let mut row_active = vec![true; m];
    let mut col_active = vec![true; m];
    let mut row_count: Vec<usize> = row_cols.iter().map(Vec::len).collect();
    let mut col_count: Vec<usize> = cols.iter().map(Vec::len).collect();
    let mut col_queue: Vec<usize> = (0..m).filter(|&k| col_count[k] == 1).collect();
    let mut row_queue: Vec<usize> = (0..m).filter(|&r| row_count[r] == 1).collect();
    let mut order = Vec::with_capacity(m);
    let mut forced = Vec::with_capacity(m);

    let mut deactivate = |r: usize,
                          k: usize,
                          row_active: &mut Vec<bool>,
                          col_active: &mut Vec<bool>,
                          row_count: &mut Vec<usize>,
                          col_count: &mut Vec<usize>,
                          col_queue: &mut Vec<usize>,
                          row_queue: &mut Vec<usize>| {
        row_active[r] = false;
        col_active[k] = false;
        for &k2 in &row_cols[r] {
            if col_active[k2] {
                col_count[k2] -= 1;
                if col_count[k2] == 1 {
                    col_queue.push(k2);
                }
            }
        }
        for &(r2, _) in &cols[k] {
            if row_active[r2] {
                row_count[r2] -= 1;
                if row_count[r2] == 1 {
                    row_queue.push(r2);
                }
            }
        }
    };

    loop {
        if let Some(k) = col_queue.pop() {
            if !col_active[k] || col_count[k] != 1 {
                continue;
            }
            let r = cols[k]
                .iter()
                .map(|&(r, _)| r)
                .find(|&r| row_active[r])
                .expect("column singleton has an active row");
            order.push(k);
            forced.push(Some(r));
            deactivate(
                r,
                k,
                &mut row_active,
                &mut col_active,
                &mut row_count,
                &mut col_count,
                &mut col_queue,
                &mut row_queue,
            );
            continue;
        }
        if let Some(r) = row_queue.pop() {
            if !row_active[r] || row_count[r] != 1 {
                continue;
            }
            let k = row_cols[r]
                .iter()
                .copied()
                .find(|&k| col_active[k])
                .expect("row singleton has an active column");
            order.push(k);
            forced.push(Some(r));
            deactivate(
                r,
                k,
                &mut row_active,
                &mut col_active,
                &mut row_count,
                &mut col_count,
                &mut col_queue,
                &mut row_queue,
            );
            continue;
        }
        break;
    }
    // bump columns: sparsest first, then index, pivot row free
    let mut bump: Vec<usize> = (0..m).filter(|&k| col_active[k]).collect();
    bump.sort_by_key(|&k| (col_count[k], k));
    for k in bump {
        order.push(k);
        forced.push(None);
    }
    (order, forced)
}

impl LuFactors {
    /// Factorizes the m x m basis given by `col_of_slot(slot)`, a list of
    /// `(row, value)` entries per basis slot.
    pub fn factorize(
        m: usize,
        col_of_slot: impl Fn(usize) -> Vec<(usize, f64)>,
        ws: &mut LuWorkspace,
    ) -> Result<Self, LuError> {
        let cols: Vec<Vec<(usize, f64)>> = (0..m).map(&col_of_slot).collect();
        let (order, forced) = peel_order(m, &cols);
        let mut order_of_slot = vec![0usize; m];
        for (k, &s) in order.iter().enumerate() {
            order_of_slot[s] = k;
        }
        // static row degrees steer bump pivoting away from dense rows
        let mut row_degree = vec![0usize; m];
        for col in &cols {
            for &(r, _) in col {
                row_degree[r] += 1;
            }
        }

        let mut lu = LuFactors {
            m,
            l_cols: Vec::with_capacity(m),
            u_cols: Vec::with_capacity(m),
            u_diag: Vec::with_capacity(m),
            l_rows: vec![Vec::new(); m],
            u_rows: vec![Vec::new(); m],
            pos_of_row: vec![usize::MAX; m],
            row_of_pos: vec![usize::MAX; m],
            slot_of_order: order,
            order_of_slot,
        };

        for k in 0..m {
            let slot = lu.slot_of_order[k];
            ws.work.clear();
            ws.reset_queued();
            for &(r, v) in &cols[slot] {
                ws.work.add(r, v);
                let pos = lu.pos_of_row[r];
                if pos != usize::MAX {
                    queue_asc(&mut ws.heap, &mut ws.queued, &mut ws.touched, pos);
                }
            }
            // sparse lower solve against finished columns, ascending pivots;
            // L entries still carry original row indices at this stage
            while let Some(Reverse(p)) = ws.heap.pop() {
                let xr = ws.work.get(lu.row_of_pos[p]);
                if xr == 0.0 {
                    continue;
                }
                for idx in 0..lu.l_cols[p].len() {
                    let (orig, lv) = lu.l_cols[p][idx];
                    ws.work.add(orig, -lv * xr);
                    let pos = lu.pos_of_row[orig];
                    if pos != usize::MAX {
                        debug_assert!(pos > p);
                        queue_asc(&mut ws.heap, &mut ws.queued, &mut ws.touched, pos);
                    }
                }
            }
            // split into U (pivoted rows) and pivot candidates; peeled
            // columns carry a forced fill-free pivot row, bump columns
            // pivot by magnitude
            let mut best: Option<(usize, f64)> = None;
            if let Some(r) = forced[k] {
                let v = ws.work.get(r);
                if v.abs() > PIVOT_TOL {
                    best = Some((r, v));
                }
            }
            if best.is_none() {
                // threshold pivoting: among rows within a factor 10 of the
                // largest magnitude, prefer the sparsest row
                let mut max_mag = 0.0f64;
                for idx in 0..ws.work.pattern.len() {
                    let r = ws.work.pattern[idx];
                    if lu.pos_of_row[r] == usize::MAX {
                        max_mag = max_mag.max(ws.work.get(r).abs());
                    }
                }
                let threshold = 0.1 * max_mag;
                let mut best_key = (usize::MAX, 0.0f64, usize::MAX);
                for idx in 0..ws.work.pattern.len() {
                    let r = ws.work.pattern[idx];
                    if lu.pos_of_row[r] != usize::MAX {
                        continue;
                    }
                    let v = ws.work.get(r);
                    if v == 0.0 || v.abs() < threshold {
                        continue;
                    }
                    let key = (row_degree[r], -v.abs(), r);
                    let better = key.0 < best_key.0
                        || (key.0 == best_key.0
                            && (key.1 < best_key.1 || (key.1 == best_key.1 && r < best_key.2)));
                    if better {
                        best_key = (key.0, key.1, r);
                        best = Some((r, v));
                    }
                }
            }
            let Some((pivot_row, pivot_val)) = best else {
                return Err(LuError::Singular { slot });
            };
            if pivot_val.abs() <= PIVOT_TOL {
                return Err(LuError::Singular { slot });
            }
            lu.pos_of_row[pivot_row] = k;
            lu.row_of_pos[k] = pivot_row;
            lu.u_diag.push(pivot_val);
            let mut ucol = Vec::new();
            let mut lcol = Vec::new();
            for idx in 0..ws.work.pattern.len() {
                let r = ws.work.pattern[idx];
                let v = ws.work.get(r);
                if v == 0.0 || r == pivot_row {
                    continue;
                }
                let pos = lu.pos_of_row[r];
                if pos != usize::MAX && pos < k {
                    ucol.push((pos, v));
                } else if pos == usize::MAX {
                    lcol.push((r, v / pivot_val));
                }
            }
            lu.u_cols.push(ucol);
            lu.l_cols.push(lcol);
        }

        // translate L row indices (orig rows) into pivot positions, then
        // build the row-major shadows
        for k in 0..m {
            for entry in &mut lu.l_cols[k] {
                entry.0 = lu.pos_of_row[entry.0];
                debug_assert!(entry.0 > k);
            }
        }
        for k in 0..m {
            for idx in 0..lu.l_cols[k].len() {
                let (p, v) = lu.l_cols[k][idx];
                lu.l_rows[p].push((k, v));
            }
            for idx in 0..lu.u_cols[k].len() {
                let (p, v) = lu.u_cols[k][idx];
                lu.u_rows[p].push((k, v));
            }
        }
        Ok(lu)
    }

    pub fn nnz(&self) -> usize {
        self.l_cols.iter().map(Vec::len).sum::<usize>()
            + self.u_cols.iter().map(Vec::len).sum::<usize>()
            + self.m
    }

    /// Once a solve touches more than this fraction of positions, the
    /// heap-ordered sparse pass loses to a plain sequential sweep.
    fn dense_cutoff(&self) -> usize {
        self.m / 16 + 4
    }

    /// Solves `B x = a`. Input is (row, value) entries of `a`; output is
    /// written into `out` indexed by basis slot. Entries below the drop
    /// tolerance are discarded to keep spike patterns from snowballing.
    pub fn ftran(&self, a: &[(usize, f64)], ws: &mut LuWorkspace, out: &mut ScatterVec) {
        ws.work.clear();
        let dense = a.len() > self.dense_cutoff();
        if dense {
            for &(r, v) in a {
                ws.work.add(self.pos_of_row[r], v);
            }
            // L forward, full sweep
            for p in 0..self.m {
                let v = ws.work.get(p);
                if v.abs() <= DROP_TOL {
                    continue;
                }
                for &(q, l) in &self.l_cols[p] {
                    ws.work.add(q, -l * v);
                }
            }
        } else {
            ws.reset_queued();
            for &(r, v) in a {
                let p = self.pos_of_row[r];
                ws.work.add(p, v);
                queue_asc(&mut ws.heap, &mut ws.queued, &mut ws.touched, p);
            }
            while let Some(Reverse(p)) = ws.heap.pop() {
                let v = ws.work.get(p);
                if v.abs() <= DROP_TOL {
                    continue;
                }
                for &(q, l) in &self.l_cols[p] {
                    ws.work.add(q, -l * v);
                    queue_asc(&mut ws.heap, &mut ws.queued, &mut ws.touched, q);
                }
            }
        }
        // U backward, descending positions, column oriented
        out.clear();
        if dense || ws.work.pattern.len() > self.dense_cutoff() {
            for k in (0..self.m).rev() {
                let v = ws.work.get(k);
                if v.abs() <= DROP_TOL {
                    continue;
                }
                let xk = v / self.u_diag[k];
                out.set(self.slot_of_order[k], xk);
                for &(p, u) in &self.u_cols[k] {
                    ws.work.add(p, -u * xk);
                }
            }
        } else {
            ws.reset_queued();
            for idx in 0..ws.work.pattern.len() {
                let p = ws.work.pattern[idx];
                if ws.work.get(p) != 0.0 {
                    queue_desc(&mut ws.heap_desc, &mut ws.queued, &mut ws.touched, p);
                }
            }
            while let Some(k) = ws.heap_desc.pop() {
                let v = ws.work.get(k);
                if v.abs() <= DROP_TOL {
                    continue;
                }
                let xk = v / self.u_diag[k];
                out.set(self.slot_of_order[k], xk);
                for &(p, u) in &self.u_cols[k] {
                    ws.work.add(p, -u * xk);
                    queue_desc(&mut ws.heap_desc, &mut ws.queued, &mut ws.touched, p);
                }
            }
        }
    }

    /// Solves `B^T w = c`. Input is (basis slot, value) entries of `c`;
    /// output is written into `out` indexed by original row.
    pub fn btran(&self, c: &[(usize, f64)], ws: &mut LuWorkspace, out: &mut ScatterVec) {
        ws.work.clear();
        ws.work2.clear();
        let dense = c.len() > self.dense_cutoff();
        if dense {
            for &(slot, v) in c {
                ws.work.add(self.order_of_slot[slot], v);
            }
            // U^T forward, full sweep
            for p in 0..self.m {
                let v = ws.work.get(p);
                if v.abs() <= DROP_TOL {
                    continue;
                }
                let zp = v / self.u_diag[p];
                ws.work2.set(p, zp);
                for &(k, u) in &self.u_rows[p] {
                    ws.work.add(k, -u * zp);
                }
            }
        } else {
            ws.reset_queued();
            for &(slot, v) in c {
                let k = self.order_of_slot[slot];
                ws.work.add(k, v);
                queue_asc(&mut ws.heap, &mut ws.queued, &mut ws.touched, k);
            }
            while let Some(Reverse(p)) = ws.heap.pop() {
                let v = ws.work.get(p);
                if v.abs() <= DROP_TOL {
                    continue;
                }
                let zp = v / self.u_diag[p];
                ws.work2.set(p, zp);
                for &(k, u) in &self.u_rows[p] {
                    ws.work.add(k, -u * zp);
                    queue_asc(&mut ws.heap, &mut ws.queued, &mut ws.touched, k);
                }
            }
        }
        // L^T backward, descending
        out.clear();
        if dense || ws.work2.pattern.len() > self.dense_cutoff() {
            for q in (0..self.m).rev() {
                let v = ws.work2.get(q);
                if v.abs() <= DROP_TOL {
                    continue;
                }
                out.set(self.row_of_pos[q], v);
                for &(k, l) in &self.l_rows[q] {
                    ws.work2.add(k, -l * v);
                }
            }
        } else {
            ws.reset_queued();
            for idx in 0..ws.work2.pattern.len() {
                let p = ws.work2.pattern[idx];
                if ws.work2.get(p) != 0.0 {
                    queue_desc(&mut ws.heap_desc, &mut ws.queued, &mut ws.touched, p);
                }
            }
            while let Some(q) = ws.heap_desc.pop() {
                let v = ws.work2.get(q);
                if v.abs() <= DROP_TOL {
                    continue;
                }
                out.set(self.row_of_pos[q], v);
                for &(k, l) in &self.l_rows[q] {
                    ws.work2.add(k, -l * v);
                    queue_desc(&mut ws.heap_desc, &mut ws.queued, &mut ws.touched, k);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|j| {
                (0..m)
                    .filter(|&i| a[i][j] != 0.0)
                    .map(|i| (i, a[i][j]))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn ftran_btran_solve_small_system() {
        let a = vec![
            vec![2.0, 1.0, 0.0],
            vec![0.0, 0.0, 3.0],
            vec![4.0, 0.0, 1.0],
        ];
        let cols = dense_cols(&a);
        let mut ws = LuWorkspace::new(3);
        let lu = LuFactors::factorize(3, |s| cols[s].clone(), &mut ws).unwrap();

        // B x = (1, 2, 3)^T
        let mut out = ScatterVec::new(3);
        lu.ftran(&[(0, 1.0), (1, 2.0), (2, 3.0)], &mut ws, &mut out);
        let x: Vec<f64> = (0..3).map(|k| out.get(k)).collect();
        for i in 0..3 {
            let lhs: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            let rhs = [1.0, 2.0, 3.0][i];
            assert!((lhs - rhs).abs() < 1e-12, "row {i}: {lhs} vs {rhs}");
        }

        // B^T w = e_1
        lu.btran(&[(1, 1.0)], &mut ws, &mut out);
        let w: Vec<f64> = (0..3).map(|r| out.get(r)).collect();
        for j in 0..3 {
            let lhs: f64 = (0..3).map(|i| a[i][j] * w[i]).sum();
            let rhs = if j == 1 { 1.0 } else { 0.0 };
            assert!((lhs - rhs).abs() < 1e-12, "col {j}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn reports_singular_basis() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let cols = dense_cols(&a);
        let mut ws = LuWorkspace::new(2);
        assert!(LuFactors::factorize(2, |s| cols[s].clone(), &mut ws).is_err());
    }

    #[test]
    fn random_dense_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..50 {
            let m = 1 + (trial % 12);
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let cols = dense_cols(&a);
            let mut ws = LuWorkspace::new(m);
            let Ok(lu) = LuFactors::factorize(m, |s| cols[s].clone(), &mut ws) else {
                continue; // nearly singular draw
            };
            let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut out = ScatterVec::new(m);
            let packed: Vec<(usize, f64)> = rhs.iter().cloned().enumerate().collect();
            lu.ftran(&packed, &mut ws, &mut out);
            let x: Vec<f64> = (0..m).map(|k| out.get(k)).collect();
            for i in 0..m {
                let lhs: f64 = (0..m).map(|j| a[i][j] * x[j]).sum();
                assert!((lhs - rhs[i]).abs() < 1e-8);
            }
            // transposed system on the same factors
            lu.btran(&packed, &mut ws, &mut out);
            let w: Vec<f64> = (0..m).map(|r| out.get(r)).collect();
            for j in 0..m {
                let lhs: f64 = (0..m).map(|i| a[i][j] * w[i]).sum();
                assert!((lhs - rhs[j]).abs() < 1e-8);
            }
        }
    }
}
