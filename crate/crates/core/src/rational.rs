//! Exact rational arithmetic helpers: conversions from floats and a small
//! dense simplex over `BigRational` used for hull-membership tests and as an
//! independent oracle for the floating-point solver on desk-sized models.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

pub type Rat = BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Exact rational value of a finite `f64`. Every finite double is a dyadic
/// rational, so no rounding is involved.
pub fn rat_from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

pub fn rat_to_f64(x: &Rat) -> f64 {
    let num = x.numer();
    let den = x.denom();
    // good enough for reporting; exact values stay rational internally
    let fnum: f64 = num.to_string().parse().unwrap_or(f64::NAN);
    let fden: f64 = den.to_string().parse().unwrap_or(f64::NAN);
    fnum / fden
}

/// Outcome of the exact simplex on `min c.x  s.t.  A x = b, x >= 0`.
#[derive(Debug, Clone)]
pub enum ExactOutcome {
    Optimal {
        value: Rat,
        x: Vec<Rat>,
        /// Row duals `y` with `y.b = value` and `c - y.A >= 0`.
        y: Vec<Rat>,
    },
    /// Farkas certificate: `y.A <= 0` componentwise and `y.b > 0`.
    Infeasible { farkas: Vec<Rat> },
    Unbounded,
}

/// Dense two-phase tableau simplex with Bland's rule, exact over rationals.
///
/// Intended for desk-scale models (hundreds of columns); termination is
/// guaranteed and every comparison is exact.
pub fn exact_solve_standard_form(
    a: &[Vec<Rat>],
    b: &[Rat],
    c: &[Rat],
) -> ExactOutcome {
    let m = a.len();
    let n = c.len();
    assert_eq!(b.len(), m);
    assert!(a.iter().all(|row| row.len() == n));
    if m == 0 {
        // unconstrained: either zero is optimal or some column is a ray
        return if c.iter().any(|cj| cj.is_negative()) {
            ExactOutcome::Unbounded
        } else {
            ExactOutcome::Optimal {
                value: Rat::zero(),
                x: vec![Rat::zero(); n],
                y: Vec::new(),
            }
        };
    }

    // Tableau layout: n structural columns, m artificial columns, rhs.
    // Rows are normalized so the rhs is nonnegative; artificials then form
    // an identity basis, and their final columns carry the basis inverse.
    let width = n + m + 1;
    let mut t: Vec<Vec<Rat>> = Vec::with_capacity(m);
    for r in 0..m {
        let flip = b[r].is_negative();
        let mut row: Vec<Rat> = Vec::with_capacity(width);
        for j in 0..n {
            row.push(if flip { -a[r][j].clone() } else { a[r][j].clone() });
        }
        for k in 0..m {
            row.push(if k == r { Rat::one() } else { Rat::zero() });
        }
        row.push(if flip { -b[r].clone() } else { b[r].clone() });
        t.push(row);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let row_sign: Vec<Rat> = (0..m)
        .map(|r| if b[r].is_negative() { -Rat::one() } else { Rat::one() })
        .collect();

    // Phase 1: minimize the sum of artificials.
    let phase1 = |j: usize| -> Rat {
        if j >= n {
            Rat::one()
        } else {
            Rat::zero()
        }
    };
    if !run_phase(&mut t, &mut basis, n + m, &phase1, |_| true) {
        unreachable!("phase 1 is bounded below by zero");
    }
    let infeas: Rat = basis
        .iter()
        .enumerate()
        .filter(|&(_, &j)| j >= n)
        .map(|(r, _)| t[r][width - 1].clone())
        .sum();
    if !infeas.is_zero() {
        // y = c_B B^{-1}, read from the artificial columns, undoing the row
        // sign flips applied during setup.
        let mut farkas = vec![Rat::zero(); m];
        for k in 0..m {
            let mut yk = Rat::zero();
            for (r, &j) in basis.iter().enumerate() {
                if j >= n {
                    yk += &t[r][n + k];
                }
            }
            farkas[k] = yk * &row_sign[k];
        }
        return ExactOutcome::Infeasible { farkas };
    }

    // Drive lingering zero-level artificials out of the basis where possible.
    for r in 0..m {
        if basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| !t[r][j].is_zero()) {
                pivot(&mut t, &mut basis, r, j);
            }
        }
    }

    // Phase 2 on the original costs; artificial columns stay only to track
    // the basis inverse and are never allowed to enter.
    let phase2 = |j: usize| -> Rat {
        if j < n {
            c[j].clone()
        } else {
            Rat::zero()
        }
    };
    if !run_phase(&mut t, &mut basis, n + m, &phase2, |j| j < n) {
        return ExactOutcome::Unbounded;
    }

    let mut x = vec![Rat::zero(); n];
    for (r, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = t[r][width - 1].clone();
        }
    }
    let value: Rat = (0..n).map(|j| &c[j] * &x[j]).sum();
    let mut y = vec![Rat::zero(); m];
    for k in 0..m {
        let mut yk = Rat::zero();
        for (r, &j) in basis.iter().enumerate() {
            if j < n {
                yk += &c[j] * &t[r][n + k];
            }
        }
        y[k] = yk * &row_sign[k];
    }
    ExactOutcome::Optimal { value, x, y }
}

/// Bland-rule simplex loop over the tableau; returns false on unboundedness.
fn run_phase(
    t: &mut [Vec<Rat>],
    basis: &mut [usize],
    ncols: usize,
    cost: &dyn Fn(usize) -> Rat,
    allowed: impl Fn(usize) -> bool,
) -> bool {
    let m = t.len();
    let rhs = ncols;
    loop {
        // reduced costs d_j = c_j - c_B B^{-1} a_j
        let mut entering = None;
        for j in 0..ncols {
            if !allowed(j) || basis.contains(&j) {
                continue;
            }
            let mut d = cost(j);
            for r in 0..m {
                let cb = cost(basis[r]);
                if !cb.is_zero() {
                    d -= cb * &t[r][j];
                }
            }
            if d.is_negative() {
                entering = Some(j);
                break; // Bland: smallest eligible index
            }
        }
        let Some(q) = entering else {
            return true;
        };
        let mut leave: Option<(usize, Rat)> = None;
        for r in 0..m {
            if t[r][q].is_positive() {
                let ratio = &t[r][rhs] / &t[r][q];
                match &leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        // Bland tie break on the basic variable index
                        if ratio < *lratio || (ratio == *lratio && basis[r] < basis[*lr]) {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, _)) = leave else {
            return false;
        };
        pivot(t, basis, r, q);
    }
}

fn pivot(t: &mut [Vec<Rat>], basis: &mut [usize], r: usize, q: usize) {
    let m = t.len();
    let width = t[0].len();
    let piv = t[r][q].clone();
    for v in t[r].iter_mut() {
        *v /= &piv;
    }
    for i in 0..m {
        if i != r && !t[i][q].is_zero() {
            let f = t[i][q].clone();
            for j in 0..width {
                let sub = &f * &t[r][j];
                t[i][j] -= sub;
            }
        }
    }
    basis[r] = q;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tiny_lp() {
        // min -x  s.t.  x + s = 1, x,s >= 0  -> x = 1
        let a = vec![vec![rat(1, 1), rat(1, 1)]];
        let b = vec![rat(1, 1)];
        let c = vec![rat(-1, 1), rat(0, 1)];
        match exact_solve_standard_form(&a, &b, &c) {
            ExactOutcome::Optimal { value, x, y } => {
                assert_eq!(value, rat(-1, 1));
                assert_eq!(x[0], rat(1, 1));
                // strong duality: y.b = value
                assert_eq!(y[0].clone() * rat(1, 1), rat(-1, 1));
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn reports_infeasible_with_farkas() {
        // x = 1 and x = 2 simultaneously
        let a = vec![vec![rat(1, 1)], vec![rat(1, 1)]];
        let b = vec![rat(1, 1), rat(2, 1)];
        let c = vec![rat(0, 1)];
        match exact_solve_standard_form(&a, &b, &c) {
            ExactOutcome::Infeasible { farkas } => {
                let yb = &farkas[0] * rat(1, 1) + &farkas[1] * rat(2, 1);
                let ya = &farkas[0] + &farkas[1];
                assert!(yb.is_positive());
                assert!(!ya.is_positive());
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn reports_unbounded() {
        // min -x  s.t.  x - s = 0 (x free to grow)
        let a = vec![vec![rat(1, 1), rat(-1, 1)]];
        let b = vec![rat(0, 1)];
        let c = vec![rat(-1, 1), rat(0, 1)];
        assert!(matches!(
            exact_solve_standard_form(&a, &b, &c),
            ExactOutcome::Unbounded
        ));
    }
}
