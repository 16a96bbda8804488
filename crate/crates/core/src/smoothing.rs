//! Turning a step cumulative-hazard estimate into an evaluable hazard.
//!
//! The default smoother fits an inverse-variance weighted cubic smoothing spline
//! to the cumulative values at the jump ages and differentiates it. The penalty
//! is chosen by generalized cross-validation. Following R's `smooth.spline`,
//! the spline is a penalized cubic B-spline with a knot at every distinct age
//! up to 49 ages and a slowly growing knot subset beyond that; leverages come
//! from the band of the inverse normal matrix, so each GCV evaluation is O(n).
//!
//! The alternative is a Ramlau-Hansen kernel smoother of the increments with an
//! Epanechnikov kernel.

use crate::error::{Error, Result};
use crate::hazard::HazardModel;
use crate::stats::sorted_quantile;
use crate::step::StepEstimate;

pub const DEFAULT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    RuleOfThumb,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherKind {
    SplineGcv,
    Kernel(Bandwidth),
}

/// Outside `[lower, upper]` percentiles of the jump ages the hazard is held at
/// its value at the nearest percentile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPolicy {
    HoldPercentiles { lower: f64, upper: f64 },
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig {
    pub kind: SmootherKind,
    pub boundary: BoundaryPolicy,
    pub floor: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            kind: SmootherKind::SplineGcv,
            boundary: BoundaryPolicy::HoldPercentiles { lower: 0.02, upper: 0.98 },
            floor: DEFAULT_FLOOR,
        }
    }
}

impl SmootherConfig {
    pub fn kernel() -> Self {
        Self { kind: SmootherKind::Kernel(Bandwidth::RuleOfThumb), ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.floor >= 0.0) {
            return Err(Error::InvalidParameter(format!("hazard floor {}", self.floor)));
        }
        if let SmootherKind::Kernel(Bandwidth::Fixed(b)) = self.kind {
            if !(b > 0.0) {
                return Err(Error::InvalidParameter(format!("bandwidth {b}")));
            }
        }
        Ok(())
    }
}

/// Smooths `est` according to `config`.
pub fn smooth(est: &StepEstimate, config: &SmootherConfig) -> Result<HazardModel> {
    match config.kind {
        SmootherKind::SplineGcv => smooth_cumhaz(est, &est.variances, config),
        SmootherKind::Kernel(_) => smooth_kernel(est, config),
    }
}

/// Spline-based hazard: GCV smoothing spline through `(age, cumulative value)`
/// with weights `1 / variance`, differentiated and floored.
pub fn smooth_cumhaz(est: &StepEstimate, variances: &[f64], config: &SmootherConfig) -> Result<HazardModel> {
    config.validate()?;
    if est.len() < 2 {
        return Err(Error::TooFewJumps { needed: 2, got: est.len() });
    }
    let weights = inverse_variance_weights(variances);
    let fit = SplineFit::gcv(&est.times, &est.values, &weights)?;
    let hold = hold_points(&est.times, config.boundary);
    Ok(HazardModel::Smoothed(SmoothedHazard::new(Curve::Spline(fit), hold, config.floor, est.horizon)))
}

/// Kernel-smoothed increments `sum_k K_b(tau - tau_k) dLambda_k`. Within one
/// bandwidth of age 0 or of the horizon the Epanechnikov kernel is replaced by
/// its Mueller-Wang boundary kernel.
pub fn smooth_kernel(est: &StepEstimate, config: &SmootherConfig) -> Result<HazardModel> {
    config.validate()?;
    let bandwidth = match config.kind {
        SmootherKind::Kernel(Bandwidth::Fixed(b)) => {
            if est.is_empty() {
                return Err(Error::TooFewJumps { needed: 1, got: 0 });
            }
            b
        }
        _ => {
            if est.len() < 2 {
                return Err(Error::TooFewJumps { needed: 2, got: est.len() });
            }
            rule_of_thumb_bandwidth(&est.times)
        }
    };
    let upper = est.horizon.max(*est.times.last().unwrap_or(&0.0));
    let kernel = KernelCurve { ages: est.times.clone(), increments: est.increments.clone(), bandwidth, domain: (0.0, upper) };
    let hold = hold_points(&est.times, config.boundary);
    Ok(HazardModel::Smoothed(SmoothedHazard::new(Curve::Kernel(kernel), hold, config.floor, est.horizon)))
}

fn inverse_variance_weights(variances: &[f64]) -> Vec<f64> {
    let smallest = variances.iter().copied().filter(|v| *v > 0.0 && v.is_finite()).fold(f64::INFINITY, f64::min);
    if !smallest.is_finite() {
        return vec![1.0; variances.len()];
    }
    variances.iter().map(|&v| 1.0 / if v > 0.0 && v.is_finite() { v } else { smallest }).collect()
}

/// Silverman-style rule of thumb for the Epanechnikov kernel.
fn rule_of_thumb_bandwidth(ages: &[f64]) -> f64 {
    let n = ages.len() as f64;
    let mean = ages.iter().sum::<f64>() / n;
    let sd = (ages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut sorted = ages.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = sorted_quantile(&sorted, 0.75).unwrap() - sorted_quantile(&sorted, 0.25).unwrap();
    let spread = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    let spread = if spread > 0.0 { spread } else { 1.0 };
    2.34 * spread * n.powf(-0.2)
}

fn hold_points(ages: &[f64], policy: BoundaryPolicy) -> Option<(f64, f64)> {
    let BoundaryPolicy::HoldPercentiles { lower, upper } = policy else { return None };
    let mut sorted = ages.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted_quantile(&sorted, lower)?;
    let hi = sorted_quantile(&sorted, upper)?;
    (lo <= hi).then_some((lo, hi))
}

/// Cubic smoothing spline stored by its values and second derivatives at the
/// knots.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFit {
    pub knots: Vec<f64>,
    /// Fitted values at the knots.
    pub fitted: Vec<f64>,
    pub second: Vec<f64>,
    pub penalty: f64,
    pub gcv: f64,
    pub effective_df: f64,
}

/// Number of knots for `n` distinct abscissae: every point below 50, then the
/// slowly growing schedule used by R's `smooth.spline`.
pub fn knot_count(n: usize) -> usize {
    if n < 50 {
        return n;
    }
    let (a1, a2, a3, a4) = (50f64.log2(), 100f64.log2(), 140f64.log2(), 200f64.log2());
    let nf = n as f64;
    let k = if n < 200 {
        2f64.powf(a1 + (a2 - a1) * (nf - 50.0) / 150.0)
    } else if n < 800 {
        2f64.powf(a2 + (a3 - a2) * (nf - 200.0) / 600.0)
    } else if n < 3200 {
        2f64.powf(a3 + (a4 - a3) * (nf - 800.0) / 2400.0)
    } else {
        200.0 + (nf - 3200.0).powf(0.2)
    };
    // fractional counts round up, as `seq.int(length.out = )` does
    (k - 1e-9).ceil() as usize
}

/// Symmetric matrix with three off-diagonals; `band[i][d] = A[i][i + d]`.
#[derive(Debug, Clone)]
struct Band4 {
    band: Vec<[f64; 4]>,
}

impl Band4 {
    fn zeros(p: usize) -> Self {
        Self { band: vec![[0.0; 4]; p] }
    }

    fn len(&self) -> usize {
        self.band.len()
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > 3 {
            0.0
        } else {
            self.band[lo][hi - lo]
        }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        self.band[lo][hi - lo] += v;
    }
}

/// Cubic B-spline basis on `knots` (boundary knots repeated four times).
#[derive(Debug, Clone)]
struct Basis {
    knots: Vec<f64>,
    t: Vec<f64>,
}

impl Basis {
    fn new(knots: Vec<f64>) -> Self {
        let (first, last) = (knots[0], knots[knots.len() - 1]);
        let mut t = vec![first; 3];
        t.extend_from_slice(&knots);
        t.extend([last; 3]);
        Self { knots, t }
    }

    fn size(&self) -> usize {
        self.knots.len() + 2
    }

    /// Knot interval holding `x`, clamped to the fitted range.
    fn interval(&self, x: f64) -> usize {
        self.knots.partition_point(|&k| k <= x).saturating_sub(1).min(self.knots.len() - 2)
    }

    /// Values and second derivatives of the four basis functions that are
    /// nonzero on interval `s`, evaluated at `x`; they are `B_s .. B_{s+3}`.
    fn eval(&self, s: usize, x: f64) -> ([f64; 4], [f64; 4]) {
        const P: usize = 3;
        let span = s + P;
        let t = &self.t;
        let mut ndu = [[0.0f64; 4]; 4];
        let mut left = [0.0f64; 4];
        let mut right = [0.0f64; 4];
        ndu[0][0] = 1.0;
        for j in 1..=P {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut value = [0.0; 4];
        let mut second = [0.0; 4];
        for j in 0..=P {
            value[j] = ndu[j][P];
        }
        for r in 0..=P as isize {
            let mut a = [[0.0f64; 4]; 2];
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=2isize {
                let mut d = 0.0;
                let rk = r - k;
                let pk = P as isize - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { -rk };
                let j2 = if r - 1 <= pk { k - 1 } else { P as isize - r };
                for j in j1..=j2 {
                    let (ju, rkj) = (j as usize, (rk + j) as usize);
                    a[s2][ju] = (a[s1][ju] - a[s1][ju - 1]) / ndu[(pk + 1) as usize][rkj];
                    d += a[s2][ju] * ndu[rkj][pk as usize];
                }
                if r <= pk {
                    let ku = k as usize;
                    a[s2][ku] = -a[s1][ku - 1] / ndu[(pk + 1) as usize][r as usize];
                    d += a[s2][ku] * ndu[r as usize][pk as usize];
                }
                if k == 2 {
                    second[r as usize] = d * 6.0;
                }
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        (value, second)
    }

    /// Gram matrix of second derivatives; `B''` is linear on each interval so
    /// Simpson's rule is exact.
    fn roughness(&self) -> Band4 {
        let mut omega = Band4::zeros(self.size());
        for s in 0..self.knots.len() - 1 {
            let (a, b) = (self.knots[s], self.knots[s + 1]);
            let h = b - a;
            let (_, da) = self.eval(s, a);
            let (_, dm) = self.eval(s, 0.5 * (a + b));
            let (_, db) = self.eval(s, b);
            for i in 0..4 {
                for j in i..4 {
                    let v = h / 6.0 * (da[i] * da[j] + 4.0 * dm[i] * dm[j] + db[i] * db[j]);
                    omega.add(s + i, s + j, v);
                }
            }
        }
        omega
    }
}

struct SplineProblem {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    basis: Basis,
    // per data point: first basis index and basis values
    rows: Vec<(usize, [f64; 4])>,
    gram: Band4,
    omega: Band4,
    xty: Vec<f64>,
}

struct Solved {
    coef: Vec<f64>,
    rss: f64,
    trace: f64,
}

impl SplineProblem {
    fn new(x: Vec<f64>, y: Vec<f64>, w: Vec<f64>) -> Self {
        let n = x.len();
        let k = knot_count(n);
        let knots: Vec<f64> = (0..k).map(|i| x[(i * (n - 1)) / (k - 1)]).collect();
        let basis = Basis::new(knots);
        let p = basis.size();
        let mut gram = Band4::zeros(p);
        let mut xty = vec![0.0; p];
        let rows: Vec<(usize, [f64; 4])> = x
            .iter()
            .map(|&xi| {
                let s = basis.interval(xi);
                (s, basis.eval(s, xi).0)
            })
            .collect();
        for (i, (s, b)) in rows.iter().enumerate() {
            for a in 0..4 {
                xty[s + a] += w[i] * b[a] * y[i];
                for c in a..4 {
                    gram.add(s + a, s + c, w[i] * b[a] * b[c]);
                }
            }
        }
        let omega = basis.roughness();
        Self { x, y, w, basis, rows, gram, omega, xty }
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    /// Scale at which roughness and fit terms are comparable.
    fn reference_penalty(&self) -> f64 {
        let tr_g: f64 = self.gram.band.iter().map(|b| b[0]).sum();
        let tr_o: f64 = self.omega.band.iter().map(|b| b[0]).sum();
        tr_g / tr_o
    }

    fn solve(&self, alpha: f64) -> Solved {
        let p = self.gram.len();
        // A = G + alpha * Omega = L D L^T, L unit lower with three subdiagonals
        let a = |i: usize, j: usize| self.gram.get(i, j) + alpha * self.omega.get(i, j);
        let mut d = vec![0.0; p];
        let mut l = vec![[0.0f64; 4]; p]; // l[j][e] = L[j][j - e]
        let lget = |l: &[[f64; 4]], r: usize, c: usize| if r == c { 1.0 } else if r > c && r - c <= 3 { l[r][r - c] } else { 0.0 };
        for i in 0..p {
            let mut di = a(i, i);
            for k in i.saturating_sub(3)..i {
                di -= lget(&l, i, k).powi(2) * d[k];
            }
            d[i] = di;
            for j in i + 1..(i + 4).min(p) {
                let mut v = a(j, i);
                for k in j.saturating_sub(3)..i {
                    v -= lget(&l, j, k) * lget(&l, i, k) * d[k];
                }
                l[j][j - i] = v / di;
            }
        }
        let mut coef = self.xty.clone();
        for i in 0..p {
            for k in i.saturating_sub(3)..i {
                coef[i] -= lget(&l, i, k) * coef[k];
            }
        }
        for i in 0..p {
            coef[i] /= d[i];
        }
        for i in (0..p).rev() {
            for k in i + 1..(i + 4).min(p) {
                coef[i] -= lget(&l, k, i) * coef[k];
            }
        }
        // band of A^-1, from the bottom right corner up
        let mut inv = Band4::zeros(p);
        for i in (0..p).rev() {
            let hi = (i + 3).min(p - 1);
            for j in (i + 1..=hi).rev() {
                let v: f64 = (i + 1..=hi).map(|k| -lget(&l, k, i) * inv.get(k, j)).sum();
                inv.band[i][j - i] = v;
            }
            let v: f64 = (i + 1..=hi).map(|k| lget(&l, k, i) * inv.get(k, i)).sum();
            inv.band[i][0] = 1.0 / d[i] - v;
        }
        let mut trace = 0.0;
        for i in 0..p {
            trace += inv.band[i][0] * self.gram.band[i][0];
            for e in 1..4 {
                trace += 2.0 * inv.band[i][e] * self.gram.band[i][e];
            }
        }
        let rss = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, (s, b))| {
                let f: f64 = (0..4).map(|a| b[a] * coef[s + a]).sum();
                self.w[i] * (self.y[i] - f).powi(2)
            })
            .sum();
        Solved { coef, rss, trace }
    }

    fn gcv(&self, alpha: f64) -> (f64, Solved) {
        let s = self.solve(alpha);
        let n = self.n() as f64;
        let denom = 1.0 - s.trace / n;
        let score = if denom > 0.0 { (s.rss / n) / (denom * denom) } else { f64::INFINITY };
        (score, s)
    }
}

impl SplineFit {
    /// Fits with the penalty minimizing GCV. Points closer than `1e-6` of the
    /// range are pooled first.
    pub fn gcv(x: &[f64], y: &[f64], w: &[f64]) -> Result<Self> {
        let (x, y, w) = pool_close_points(x, y, w);
        if x.len() < 2 {
            return Err(Error::TooFewJumps { needed: 2, got: x.len() });
        }
        if x.len() == 2 {
            // any penalty gives the weighted least-squares line, which interpolates
            return Ok(Self { knots: x, fitted: y, second: vec![0.0; 2], penalty: 0.0, gcv: 0.0, effective_df: 2.0 });
        }
        let problem = SplineProblem::new(x, y, w);
        let log_ref = problem.reference_penalty().log10();
        let score = |log_alpha: f64| problem.gcv(10f64.powf(log_alpha)).0;

        // R's spar range [-1.5, 1.5] around the trace ratio: 256^(3 spar - 1)
        let decades = 256f64.log10();
        let (from, to) = (log_ref - 5.5 * decades, log_ref + 3.5 * decades);
        let step = 0.25;
        let count = ((to - from) / step).ceil() as usize;
        let grid: Vec<f64> = (0..=count).map(|k| (from + step * k as f64).min(to)).collect();
        let scores: Vec<f64> = grid.iter().map(|&g| score(g)).collect();
        let best = (0..grid.len()).min_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let (mut log_alpha, mut best_score) = golden_section(score, lo, hi, 1e-4);
        if scores[best] < best_score {
            log_alpha = grid[best];
            best_score = scores[best];
        }
        Ok(Self::from_problem(&problem, 10f64.powf(log_alpha), best_score))
    }

    /// Fits with a fixed penalty.
    pub fn with_penalty(x: &[f64], y: &[f64], w: &[f64], penalty: f64) -> Result<Self> {
        let (x, y, w) = pool_close_points(x, y, w);
        if x.len() < 3 {
            return Err(Error::TooFewJumps { needed: 3, got: x.len() });
        }
        let problem = SplineProblem::new(x, y, w);
        let (score, _) = problem.gcv(penalty);
        Ok(Self::from_problem(&problem, penalty, score))
    }

    /// GCV score of the same data at another penalty.
    pub fn gcv_score(x: &[f64], y: &[f64], w: &[f64], penalty: f64) -> Result<f64> {
        let (x, y, w) = pool_close_points(x, y, w);
        if x.len() < 3 {
            return Err(Error::TooFewJumps { needed: 3, got: x.len() });
        }
        Ok(SplineProblem::new(x, y, w).gcv(penalty).0)
    }

    fn from_problem(problem: &SplineProblem, penalty: f64, gcv: f64) -> Self {
        let solved = problem.solve(penalty);
        let basis = &problem.basis;
        let (mut fitted, mut second) = (Vec::new(), Vec::new());
        for &kx in &basis.knots {
            let s = basis.interval(kx);
            let (v, d2) = basis.eval(s, kx);
            fitted.push((0..4).map(|a| v[a] * solved.coef[s + a]).sum());
            second.push((0..4).map(|a| d2[a] * solved.coef[s + a]).sum());
        }
        Self { knots: basis.knots.clone(), fitted, second, penalty, gcv, effective_df: solved.trace }
    }

    fn segment(&self, t: f64) -> usize {
        let k = self.knots.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(self.knots.len() - 2)
    }

    pub fn value(&self, t: f64) -> f64 {
        let (first, last) = (self.knots[0], self.knots[self.knots.len() - 1]);
        if t < first {
            return self.fitted[0] + (t - first) * self.derivative(first);
        }
        if t > last {
            return self.fitted[self.fitted.len() - 1] + (t - last) * self.derivative(last);
        }
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        a * self.fitted[i]
            + b * self.fitted[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }

    /// First derivative; linear extrapolation outside the knots.
    pub fn derivative(&self, t: f64) -> f64 {
        let n = self.knots.len();
        let t = t.clamp(self.knots[0], self.knots[n - 1]);
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - t) / h;
        let b = (t - self.knots[i]) / h;
        (self.fitted[i + 1] - self.fitted[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.second[i]
            + (3.0 * b * b - 1.0) / 6.0 * h * self.second[i + 1]
    }
}

fn pool_close_points(x: &[f64], y: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let range = match (order.first(), order.last()) {
        (Some(&a), Some(&b)) => x[b] - x[a],
        _ => 0.0,
    };
    let tol = 1e-6 * range;
    let (mut px, mut py, mut pw): (Vec<f64>, Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new(), Vec::new());
    // running weighted sums of the current pool
    let mut anchor = f64::NAN;
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for &k in &order {
        if !px.is_empty() || sw > 0.0 {
            if x[k] - anchor <= tol && sw > 0.0 {
                sx += w[k] * x[k];
                sy += w[k] * y[k];
                sw += w[k];
                continue;
            }
            px.push(sx / sw);
            py.push(sy / sw);
            pw.push(sw);
        }
        anchor = x[k];
        sx = w[k] * x[k];
        sy = w[k] * y[k];
        sw = w[k];
    }
    if sw > 0.0 {
        px.push(sx / sw);
        py.push(sy / sw);
        pw.push(sw);
    }
    let mean_w = pw.iter().sum::<f64>() / pw.len().max(1) as f64;
    pw.iter_mut().for_each(|v| *v /= mean_w);
    (px, py, pw)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCurve {
    pub ages: Vec<f64>,
    pub increments: Vec<f64>,
    pub bandwidth: f64,
    /// Ends of the age domain, where boundary kernels take over.
    pub domain: (f64, f64),
}

/// Epanechnikov boundary kernel on `[-1, q]`, `0 <= q <= 1`; equals the
/// ordinary kernel at `q = 1`.
fn boundary_kernel(u: f64, q: f64) -> f64 {
    if !(-1.0..=q).contains(&u) {
        return 0.0;
    }
    12.0 / (1.0 + q).powi(4) * (1.0 + u) * ((1.0 - 2.0 * q) * u + 0.5 * (3.0 * q * q - 2.0 * q + 1.0))
}

impl KernelCurve {
    fn hazard(&self, t: f64) -> f64 {
        let b = self.bandwidth;
        let (left, right) = self.domain;
        // `u` runs away from the nearby boundary
        let (q, sign) = if t - left < b && t >= left {
            ((t - left) / b, 1.0)
        } else if right - t < b && t <= right {
            ((right - t) / b, -1.0)
        } else {
            (1.0, 1.0)
        };
        let lo = self.ages.partition_point(|&a| a < t - b);
        let hi = self.ages.partition_point(|&a| a <= t + b);
        (lo..hi)
            .map(|k| {
                let u = sign * (t - self.ages[k]) / b;
                boundary_kernel(u, q) / b * self.increments[k]
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Spline(SplineFit),
    Kernel(KernelCurve),
}

impl Curve {
    fn raw_hazard(&self, t: f64) -> f64 {
        match self {
            Curve::Spline(fit) => fit.derivative(t),
            Curve::Kernel(k) => k.hazard(t),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Curve::Spline(fit) => fit.knots.clone(),
            Curve::Kernel(k) => {
                let mut pts: Vec<f64> = k.ages.iter().flat_map(|&a| [a - k.bandwidth, a, a + k.bandwidth]).collect();
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                pts
            }
        }
    }
}

/// A smoothed hazard on `(0, horizon]`, floored and optionally held constant
/// beyond two boundary points.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedHazard {
    pub curve: Curve,
    pub hold: Option<(f64, f64)>,
    pub floor: f64,
    pub horizon: f64,
    table_x: Vec<f64>,
    table_cum: Vec<f64>,
}

const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

impl SmoothedHazard {
    pub fn new(curve: Curve, hold: Option<(f64, f64)>, floor: f64, horizon: f64) -> Self {
        let mut s = Self { curve, hold, floor, horizon, table_x: Vec::new(), table_cum: Vec::new() };
        s.build_table();
        s
    }

    pub fn hazard(&self, t: f64) -> f64 {
        let t = match self.hold {
            Some((lo, hi)) => t.clamp(lo, hi),
            None => t,
        };
        self.curve.raw_hazard(t).max(self.floor)
    }

    fn build_table(&mut self) {
        let mut pts = vec![0.0];
        let upper = match self.hold {
            Some((_, hi)) => hi,
            None => self.horizon.max(*self.curve.breakpoints().last().unwrap_or(&0.0)),
        };
        pts.extend(self.curve.breakpoints().into_iter().filter(|&p| p > 0.0 && p < upper));
        if let Some((lo, _)) = self.hold {
            if lo > 0.0 {
                pts.push(lo);
            }
        }
        pts.push(upper);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut cum = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in pts.windows(2) {
            acc += self.integrate(w[0], w[1]);
            cum.push(acc);
        }
        self.table_x = pts;
        self.table_cum = cum;
    }

    fn integrate(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        // split in four to absorb kinks from flooring
        let quarter = (b - a) / 4.0;
        (0..4)
            .map(|k| {
                let lo = a + quarter * k as f64;
                let m = lo + 0.5 * quarter;
                let h = 0.5 * quarter;
                GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * self.hazard(m + h * x)).sum::<f64>() * h
            })
            .sum()
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let last = *self.table_x.last().unwrap();
        if t >= last {
            return self.table_cum[self.table_cum.len() - 1] + (t - last) * self.hazard(last);
        }
        let k = self.table_x.partition_point(|&x| x <= t) - 1;
        self.table_cum[k] + self.integrate(self.table_x[k], t)
    }

    /// `(tau, hazard)` pairs on an even grid over `(0, horizon]`.
    pub fn grid(&self, points: usize) -> Vec<(f64, f64)> {
        (1..=points)
            .map(|k| {
                let t = self.horizon * k as f64 / points as f64;
                (t, self.hazard(t))
            })
            .collect()
    }
}
