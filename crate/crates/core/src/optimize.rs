//! Derivative-free minimization and a finite-difference Hessian.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub initial_step: f64,
    /// Converged once both the simplex diameter and the spread of objective
    /// values fall below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { initial_step: 0.5, tolerance: 1e-8, max_iterations: 20_000 }
    }
}

/// Nelder-Mead simplex search with the standard coefficients and restarts
/// from the best vertex until a restart no longer improves the minimum.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], options: NelderMeadOptions) -> Result<Minimum> {
    let mut total = 0;
    let mut best = simplex_search(&f, x0, options, &mut total)?;
    for _ in 0..3 {
        let again = simplex_search(&f, &best.x, NelderMeadOptions { initial_step: options.initial_step * 0.1, ..options }, &mut total)?;
        let improved = best.value - again.value > options.tolerance;
        best = if again.value <= best.value { again } else { best };
        if !improved {
            break;
        }
    }
    best.iterations = total;
    Ok(best)
}

fn simplex_search(f: &impl Fn(&[f64]) -> f64, x0: &[f64], options: NelderMeadOptions, total: &mut usize) -> Result<Minimum> {
    let dim = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for k in 0..dim {
        let mut x = x0.to_vec();
        x[k] += options.initial_step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    loop {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let spread = (values[dim] - values[0]).abs();
        if diameter < options.tolerance && spread < options.tolerance {
            break;
        }
        if iterations >= options.max_iterations {
            *total += iterations;
            return Err(Error::NoConvergence { iterations, step: diameter, change: spread });
        }
        iterations += 1;

        let centroid: Vec<f64> =
            (0..dim).map(|k| simplex[..dim].iter().map(|x| x[k]).sum::<f64>() / dim as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..dim).map(|k| centroid[k] + t * (simplex[dim][k] - centroid[k])).collect() };
        let reflected = along(-alpha);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(-gamma);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
        } else if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
        } else {
            let (contracted, fc) = if fr < values[dim] {
                let c = along(-rho);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = along(rho);
                let fc = eval(&c);
                (c, fc)
            };
            if fc < values[dim].min(fr) {
                simplex[dim] = contracted;
                values[dim] = fc;
            } else {
                for k in 1..=dim {
                    let shrunk: Vec<f64> =
                        (0..dim).map(|d| simplex[0][d] + sigma * (simplex[k][d] - simplex[0][d])).collect();
                    values[k] = eval(&shrunk);
                    simplex[k] = shrunk;
                }
            }
        }
    }
    *total += iterations;
    Ok(Minimum { x: simplex[0].clone(), value: values[0], iterations })
}

/// Central-difference Hessian of `f` at `x`.
pub fn numeric_hessian(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<Vec<f64>> {
    let dim = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let at = |dx: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(k, d) in dx {
            y[k] += d;
        }
        f(&y)
    };
    let f0 = f(x);
    let mut hess = vec![vec![0.0; dim]; dim];
    for a in 0..dim {
        hess[a][a] = (at(&[(a, h[a])]) - 2.0 * f0 + at(&[(a, -h[a])])) / (h[a] * h[a]);
        for b in 0..a {
            let v = (at(&[(a, h[a]), (b, h[b])]) - at(&[(a, h[a]), (b, -h[b])]) - at(&[(a, -h[a]), (b, h[b])])
                + at(&[(a, -h[a]), (b, -h[b])]))
                / (4.0 * h[a] * h[b]);
            hess[a][b] = v;
            hess[b][a] = v;
        }
    }
    hess
}

/// Inverse of a 1x1 or 2x2 symmetric matrix; `None` if singular.
pub fn invert_small(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    match m.len() {
        1 => (m[0][0] != 0.0).then(|| vec![vec![1.0 / m[0][0]]]),
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            (det != 0.0 && det.is_finite())
                .then(|| vec![vec![m[1][1] / det, -m[0][1] / det], vec![-m[1][0] / det, m[0][0] / det]])
        }
        _ => None,
    }
}
