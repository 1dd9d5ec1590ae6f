//! Box-constrained convex quadratic programs by a primal active-set method.
//!
//! Solves `min ½ xᵀHx − gᵀx` subject to `lower <= x <= upper` with `H`
//! symmetric positive semidefinite. Each iteration minimizes over the free
//! coordinates with the bound ones frozen; an infeasible free minimizer is
//! approached along the segment until the first bound blocks, and a bound
//! coordinate whose multiplier has the wrong sign is released.

use crate::error::{Error, Result};
use crate::linalg::{pinv_solve_symmetric, solve_spd};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundState {
    Free,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxQpSolution<T> {
    pub x: Vec<T>,
    pub state: Vec<BoundState>,
    /// Gradient `Hx − g` at the solution.
    pub gradient: Vec<T>,
    /// A free-set system was singular and solved in the minimum-norm sense.
    pub rank_deficient: bool,
    pub iterations: usize,
}

fn quad_objective<T: Scalar>(h: &[Vec<T>], g: &[T], x: &[T]) -> T {
    let n = x.len();
    let mut acc = T::zero();
    for i in 0..n {
        let hx: T = (0..n).map(|j| h[i][j] * x[j]).sum();
        acc += T::half() * x[i] * hx - g[i] * x[i];
    }
    acc
}

/// Minimizes `½ xᵀHx − gᵀx` over the box.
pub fn solve_box_qp<T: Scalar>(h: &[Vec<T>], g: &[T], lower: &[T], upper: &[T]) -> Result<BoxQpSolution<T>> {
    let n = g.len();
    if h.len() != n || h.iter().any(|r| r.len() != n) || lower.len() != n || upper.len() != n {
        return Err(Error::DimensionMismatch(format!("box QP of size {n} with inconsistent inputs")));
    }
    for i in 0..n {
        if !(lower[i] <= upper[i]) {
            return Err(Error::InvalidArgument(format!("empty box on coordinate {i}: [{}, {}]", lower[i], upper[i])));
        }
    }
    let scale = h.iter().flatten().chain(g.iter()).fold(T::one(), |acc, v| acc.max(v.abs()));
    let tol = scale * T::epsilon() * T::lit(1e4);

    // Feasible start: projection of the unconstrained (min-norm) minimizer.
    let (x_free, _) = pinv_solve_symmetric(h, g);
    let mut x = vec![T::zero(); n];
    let mut state = vec![BoundState::Free; n];
    for i in 0..n {
        let xi = if x_free[i].is_finite() { x_free[i] } else { T::zero() };
        if xi <= lower[i] {
            x[i] = lower[i];
            state[i] = BoundState::AtLower;
        } else if xi >= upper[i] {
            x[i] = upper[i];
            state[i] = BoundState::AtUpper;
        } else {
            x[i] = xi;
        }
    }

    let mut rank_deficient = false;
    let max_iter = 50 * (n + 1) * (n + 1);
    for iter in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == BoundState::Free).collect();
        let mut z = x.clone();
        if !free.is_empty() {
            let sub_h: Vec<Vec<T>> = free.iter().map(|&i| free.iter().map(|&j| h[i][j]).collect()).collect();
            let rhs: Vec<T> = free
                .iter()
                .map(|&i| {
                    let fixed: T = (0..n).filter(|&j| state[j] != BoundState::Free).map(|j| h[i][j] * x[j]).sum();
                    g[i] - fixed
                })
                .collect();
            let sol = match solve_spd(&sub_h, &rhs) {
                Some(s) => s,
                None => {
                    rank_deficient = true;
                    pinv_solve_symmetric(&sub_h, &rhs).0
                }
            };
            for (k, &i) in free.iter().enumerate() {
                z[i] = sol[k];
            }
        }

        // Largest feasible step toward z.
        let mut step = T::one();
        let mut blocking: Option<(usize, BoundState)> = None;
        for &i in &free {
            let d = z[i] - x[i];
            if d < T::zero() && z[i] < lower[i] {
                let a = (lower[i] - x[i]) / d;
                if a < step {
                    step = a;
                    blocking = Some((i, BoundState::AtLower));
                }
            } else if d > T::zero() && z[i] > upper[i] {
                let a = (upper[i] - x[i]) / d;
                if a < step {
                    step = a;
                    blocking = Some((i, BoundState::AtUpper));
                }
            }
        }
        for &i in &free {
            x[i] = x[i] + step * (z[i] - x[i]);
        }
        if let Some((i, st)) = blocking {
            state[i] = st;
            x[i] = if st == BoundState::AtLower { lower[i] } else { upper[i] };
            continue;
        }

        let gradient: Vec<T> = (0..n).map(|i| (0..n).map(|j| h[i][j] * x[j]).sum::<T>() - g[i]).collect();
        let mut worst: Option<(usize, T)> = None;
        for i in 0..n {
            let violation = match state[i] {
                BoundState::AtLower if lower[i] < upper[i] => -gradient[i],
                BoundState::AtUpper if lower[i] < upper[i] => gradient[i],
                _ => T::zero(),
            };
            if violation > tol && worst.is_none_or(|(_, w)| violation > w) {
                worst = Some((i, violation));
            }
        }
        match worst {
            Some((i, _)) => state[i] = BoundState::Free,
            None => {
                return Ok(BoxQpSolution { x, state, gradient, rank_deficient, iterations: iter + 1 });
            }
        }
    }
    Err(Error::Contract(format!("active-set iteration limit reached (objective {})", quad_objective(h, g, &x))))
}
