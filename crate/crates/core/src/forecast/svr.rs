//! SMO solver for the epsilon-SVR dual with an RBF kernel.
//!
//! The dual over `(alpha, alpha*)` is folded into 2n box variables
//! `beta_t in [0, C]` with signs `s_t` (+1 for the alpha block, -1 for the
//! alpha* block), giving the canonical form
//!
//! ```text
//! min  1/2 beta' Q beta + p' beta
//! s.t. sum_t s_t beta_t = 0,   0 <= beta_t <= C
//! ```
//!
//! with `Q[t][u] = s_t s_u K(x_t, x_u)` and `p_t = epsilon - s_t y_t`.
//! Each iteration picks the maximal violating pair and takes the exact
//! two-variable Newton step clipped to the box.

/// Result of a dual solve, in standardized space.
#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    /// Net coefficient `alpha_i - alpha*_i` per training sample.
    pub beta_net: Vec<f64>,
    pub bias: f64,
    pub iterations: u64,
    /// Final KKT gap `m - M`; at or below the tolerance when converged.
    pub gap: f64,
    pub converged: bool,
}

pub(crate) fn rbf(a: &[f64; 3], b: &[f64; 3], gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for k in 0..3 {
        let d = a[k] - b[k];
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

/// Curvature floor for coinciding samples.
const TAU: f64 = 1e-12;
/// Bound snap: beta within this fraction of 0 or C is treated as bound.
const SNAP: f64 = 1e-12;

#[allow(clippy::needless_range_loop)]
pub(crate) fn solve(
    xs: &[[f64; 3]],
    ys: &[f64],
    c: f64,
    epsilon: f64,
    gamma: f64,
    tol: f64,
    max_iter: u64,
) -> DualSolution {
    let n = xs.len();
    assert_eq!(n, ys.len());
    assert!(n > 0 && c > 0.0);

    let mut kernel = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rbf(&xs[i], &xs[j], gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }

    // t < n: alpha_i, sign +1; t >= n: alpha*_i, sign -1.
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let sample = |t: usize| if t < n { t } else { t - n };
    let mut beta = vec![0.0f64; 2 * n];
    let mut grad = vec![0.0f64; 2 * n];
    for t in 0..2 * n {
        grad[t] = epsilon - sign(t) * ys[sample(t)];
    }

    let in_up = |t: usize, beta: &[f64]| {
        if t < n {
            beta[t] < c
        } else {
            beta[t] > 0.0
        }
    };
    let in_low = |t: usize, beta: &[f64]| {
        if t < n {
            beta[t] > 0.0
        } else {
            beta[t] < c
        }
    };

    // (m, i, M, j): most violating pair under the current gradient
    let select = |grad: &[f64], beta: &[f64]| {
        let mut up: Option<(f64, usize)> = None;
        let mut low: Option<(f64, usize)> = None;
        for t in 0..2 * n {
            let viol = -sign(t) * grad[t];
            if in_up(t, beta) && up.is_none_or(|(m, _)| viol > m) {
                up = Some((viol, t));
            }
            if in_low(t, beta) && low.is_none_or(|(m, _)| viol < m) {
                low = Some((viol, t));
            }
        }
        (up, low)
    };

    let mut iterations = 0u64;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        let (up, low) = select(&grad, &beta);
        let (Some((m, i)), Some((mm, j))) = (up, low) else {
            converged = true;
            gap = 0.0;
            break;
        };
        gap = m - mm;
        if gap <= tol {
            converged = true;
            break;
        }

        let (si, sj) = (sample(i), sample(j));
        let mut eta = kernel[si * n + si] + kernel[sj * n + sj] - 2.0 * kernel[si * n + sj];
        if eta <= TAU {
            eta = TAU;
        }
        let room_i = if sign(i) > 0.0 { c - beta[i] } else { beta[i] };
        let room_j = if sign(j) > 0.0 { beta[j] } else { c - beta[j] };
        let step = (gap / eta).min(room_i).min(room_j);

        beta[i] += sign(i) * step;
        beta[j] -= sign(j) * step;
        // snap tiny residues so bound membership stays exact
        for t in [i, j] {
            if beta[t] < c * SNAP {
                beta[t] = 0.0;
            } else if beta[t] > c * (1.0 - SNAP) {
                beta[t] = c;
            }
        }
        for t in 0..2 * n {
            let st = sample(t);
            grad[t] += step * sign(t) * (kernel[st * n + si] - kernel[st * n + sj]);
        }
        iterations += 1;
    }

    if !converged {
        if let (Some((m, _)), Some((mm, _))) = select(&grad, &beta) {
            gap = m - mm;
        }
    }

    // KKT: free variables satisfy -s_t grad_t = bias exactly at the optimum
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..2 * n {
        if beta[t] > 0.0 && beta[t] < c {
            free_sum += -sign(t) * grad[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        let (up, low) = select(&grad, &beta);
        match (up, low) {
            (Some((m, _)), Some((mm, _))) => (m + mm) / 2.0,
            _ => 0.0,
        }
    };

    let beta_net = (0..n).map(|i| beta[i] - beta[n + i]).collect();
    DualSolution {
        beta_net,
        bias,
        iterations,
        gap,
        converged,
    }
}
