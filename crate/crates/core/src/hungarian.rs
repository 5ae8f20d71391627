//! O(n^3) Hungarian algorithm (shortest augmenting paths with potentials)
//! for square min-cost assignment, plus a max-weight bipartite matching
//! wrapper that permits unmatched rows and columns.

const FORBIDDEN: f64 = 1e18;

/// Minimum-cost perfect assignment on a square cost matrix.
/// Returns `(row_to_col, total_cost)`.
pub fn solve_min_cost(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    assert!(cost.iter().all(|r| r.len() == n), "square matrix required");
    // 1-based arrays per the classic formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1]; // column -> row
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|r| cost[r][row_to_col[r]]).sum();
    (row_to_col, total)
}

/// Maximum-weight matching on a rectangular weight matrix where any row or
/// column may stay unmatched and only strictly positive weights are ever
/// selected. Returns the matched `(row, col)` pairs and the total weight.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> (Vec<(usize, usize)>, f64) {
    let r = weights.len();
    let c = weights.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 {
        return (Vec::new(), 0.0);
    }
    let s = r + c;
    // Square padding: dummy columns let rows go unmatched, dummy rows let
    // columns go unmatched; nonpositive weights are forbidden outright.
    let mut cost = vec![vec![0.0; s]; s];
    for (i, row) in weights.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            cost[i][j] = if w > 0.0 { -w } else { FORBIDDEN };
        }
    }
    let (assign, _) = solve_min_cost(&cost);
    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (i, &j) in assign.iter().enumerate().take(r) {
        if j < c && cost[i][j] != FORBIDDEN {
            pairs.push((i, j));
            total += weights[i][j];
        }
    }
    (pairs, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_max(weights: &[Vec<f64>]) -> f64 {
        // enumerate all partial matchings recursively
        fn go(weights: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == weights.len() {
                return 0.0;
            }
            let mut best = go(weights, row + 1, used); // leave row unmatched
            for j in 0..weights[row].len() {
                if !used[j] && weights[row][j] > 0.0 {
                    used[j] = true;
                    best = best.max(weights[row][j] + go(weights, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let cols = weights.first().map_or(0, |r| r.len());
        go(weights, 0, &mut vec![false; cols])
    }

    #[test]
    fn identity_is_optimal_for_diagonal_costs() {
        let cost = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let (assign, total) = solve_min_cost(&cost);
        assert_eq!(assign, vec![0, 1]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn matching_skips_zero_weights() {
        let w = vec![vec![0.0, 0.0], vec![0.0, 0.9]];
        let (pairs, total) = max_weight_matching(&w);
        assert_eq!(pairs, vec![(1, 1)]);
        assert!((total - 0.9).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_random_rectangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r = rng.gen_range(1..=5);
            let c = rng.gen_range(1..=5);
            let w: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..c).map(|_| rng.gen_range(-0.2..1.0)).collect())
                .collect();
            let (_, got) = max_weight_matching(&w);
            let want = brute_force_max(&w);
            assert!((got - want).abs() < 1e-9, "got {got}, want {want}");
        }
    }
}
