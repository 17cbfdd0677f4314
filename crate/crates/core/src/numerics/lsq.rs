//! Box-constrained Levenberg–Marquardt for small dense least-squares
//! problems. Parameters are mapped onto the unit cube spanned by their
//! bounds, steps are projected back onto it, and the Jacobian is taken by
//! forward differences.

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct LsqOptions {
    pub max_iter: usize,
    /// Relative reduction of the cost below which the search stops.
    pub cost_rtol: f64,
    /// Absolute cost at which the search stops.
    pub cost_atol: f64,
    /// Finite-difference step in unit-cube coordinates.
    pub fd_step: f64,
    /// Accepted steps shorter than this (unit-cube max norm) end the search.
    pub step_tol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            cost_rtol: 1e-12,
            cost_atol: 1e-24,
            fd_step: 1e-5,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LsqResult {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Half the sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Cube<'a> {
    lo: &'a [f64],
    hi: &'a [f64],
}

impl Cube<'_> {
    fn to_x(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.lo.iter().zip(self.hi))
            .map(|(y, (lo, hi))| lo + y.clamp(0.0, 1.0) * (hi - lo))
            .collect()
    }
    fn to_y(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(self.hi))
            .map(|(x, (lo, hi))| {
                if hi > lo {
                    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn half_ss(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Minimise `0.5 * |r(x)|^2` subject to `lo <= x <= hi`.
///
/// A residual evaluation that fails is treated as an infinitely bad point:
/// the trial step is rejected and the damping increased. Only a failure at
/// the starting point is propagated.
pub fn levenberg_marquardt<F>(
    mut residual: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: LsqOptions,
) -> Result<LsqResult>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    assert_eq!(lo.len(), n);
    assert_eq!(hi.len(), n);
    let cube = Cube { lo, hi };
    let free: Vec<bool> = lo.iter().zip(hi).map(|(l, h)| h > l).collect();

    let mut y = cube.to_y(x0);
    let mut r = residual(&cube.to_x(&y))?;
    let m = r.len();
    let mut cost = half_ss(&r);
    let mut mu = 1e-3;
    let mut iterations = 0;
    let mut converged = cost <= opts.cost_atol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;

        // Forward-difference Jacobian in cube coordinates, stepping inward
        // at the upper face.
        let mut jac = vec![vec![0.0; n]; m];
        for k in 0..n {
            if !free[k] {
                continue;
            }
            let h = if y[k] + opts.fd_step <= 1.0 {
                opts.fd_step
            } else {
                -opts.fd_step
            };
            let mut yk = y.clone();
            yk[k] += h;
            let rk = match residual(&cube.to_x(&yk)) {
                Ok(v) => v,
                Err(_) => {
                    yk[k] = y[k] - h;
                    match residual(&cube.to_x(&yk)) {
                        Ok(v) => {
                            for i in 0..m {
                                jac[i][k] = (r[i] - v[i]) / h;
                            }
                            continue;
                        }
                        Err(_) => continue,
                    }
                }
            };
            for i in 0..m {
                jac[i][k] = (rk[i] - r[i]) / h;
            }
        }

        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            for a in 0..n {
                jtr[a] += jac[i][a] * r[i];
                for b in 0..n {
                    jtj[a][b] += jac[i][a] * jac[i][b];
                }
            }
        }
        // Projected gradient: components pushing against an active bound
        // cannot be reduced further.
        let grad_norm = jtr
            .iter()
            .zip(&y)
            .zip(&free)
            .map(|((g, y), free)| {
                if !free || (*y >= 1.0 && *g < 0.0) || (*y <= 0.0 && *g > 0.0) {
                    0.0
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max);
        if grad_norm <= 1e-14 * cost.sqrt().max(1e-300) || grad_norm == 0.0 {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[k][k] += mu * (jtj[k][k].max(1e-12));
                if !free[k] {
                    a[k] = vec![0.0; n];
                    a[k][k] = 1.0;
                }
            }
            let rhs: Vec<f64> = (0..n)
                .map(|k| if free[k] { -jtr[k] } else { 0.0 })
                .collect();
            let Some(step) = solve(a, rhs) else {
                mu *= 10.0;
                continue;
            };
            let y_new: Vec<f64> = y
                .iter()
                .zip(&step)
                .map(|(y, s)| (y + s).clamp(0.0, 1.0))
                .collect();
            if y_new == y {
                break;
            }
            match residual(&cube.to_x(&y_new)) {
                Ok(r_new) => {
                    let c_new = half_ss(&r_new);
                    if c_new.is_finite() && c_new < cost {
                        let rel = (cost - c_new) / cost.max(1e-300);
                        let moved = y_new
                            .iter()
                            .zip(&y)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        y = y_new;
                        r = r_new;
                        cost = c_new;
                        mu = (mu / 3.0).max(1e-12);
                        accepted = true;
                        if rel < opts.cost_rtol || cost <= opts.cost_atol || moved < opts.step_tol {
                            converged = true;
                        }
                        break;
                    }
                    mu *= 4.0;
                }
                Err(_) => mu *= 4.0,
            }
        }
        if !accepted {
            // No descent direction left at this damping level: stationary
            // up to the resolution of the residuals.
            converged = true;
        }
    }

    Ok(LsqResult {
        x: cube.to_x(&y),
        residuals: r,
        cost,
        iterations,
        converged,
    })
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
