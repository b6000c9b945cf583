use serde::{Deserialize, Serialize};

use crate::clip::ClipConfig;
use crate::error::{Error, Result};
use crate::oracle::{clip_scalar, clip_slice, CounterExample};
use crate::problem::FiniteSum;
use crate::vector::Vector;

const GRID_STEP: f64 = 1e-3;
const BISECTION_WIDTH: f64 = 1e-12;

/// One root of the mean clipped gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x_star: f64,
    /// `|mean clipped gradient at x_star|`.
    pub residual: f64,
}

/// All fixed points of clipped gradient descent found in the scan range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    /// The fixed point closest to the origin, if any.
    pub x_star: Option<f64>,
    pub residual: Option<f64>,
    pub method: String,
    pub threshold: f64,
    pub range: (f64, f64),
    pub fixed_points: Vec<FixedPoint>,
}

fn mean_clipped_gradient(problem: &CounterExample, x: f64, c: f64) -> f64 {
    let n = problem.len();
    (0..n)
        .map(|i| clip_scalar(problem.gradient_at(x, i), c))
        .sum::<f64>()
        / n as f64
}

fn bisect(problem: &CounterExample, c: f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = mean_clipped_gradient(problem, lo, c);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = mean_clipped_gradient(problem, mid, c);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let f_hi = mean_clipped_gradient(problem, hi, c);
    if f_lo.abs() <= f_hi.abs() {
        lo
    } else {
        hi
    }
}

/// Roots of `x -> (1/N) sum_i clip(grad f(x; xi_i), c)` by a grid scan with
/// step `1e-3` over [`CounterExample::scan_range`], refined by bisection to
/// width `1e-12`. `c = +inf` disables clipping.
pub fn clipped_fixed_point(problem: &CounterExample, c: f64) -> Result<FixedPointReport> {
    if !(c > 0.0) {
        return Err(Error::config(format!(
            "clipping threshold must be positive, got {c}"
        )));
    }
    let range = problem.scan_range();
    let steps = ((range.1 - range.0) / GRID_STEP).round() as usize;
    let grid = |k: usize| range.0 + (range.1 - range.0) * k as f64 / steps as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev = mean_clipped_gradient(problem, grid(0), c);
    if prev == 0.0 {
        roots.push(grid(0));
    }
    for k in 1..=steps {
        let x = grid(k);
        let cur = mean_clipped_gradient(problem, x, c);
        if cur == 0.0 {
            roots.push(x);
        } else if prev != 0.0 && (cur < 0.0) != (prev < 0.0) {
            roots.push(bisect(problem, c, grid(k - 1), x));
        }
        prev = cur;
    }
    let fixed_points: Vec<FixedPoint> = roots
        .into_iter()
        .map(|x| FixedPoint {
            x_star: x,
            residual: mean_clipped_gradient(problem, x, c).abs(),
        })
        .collect();
    let closest = fixed_points
        .iter()
        .min_by(|a, b| a.x_star.abs().total_cmp(&b.x_star.abs()));
    Ok(FixedPointReport {
        x_star: closest.map(|p| p.x_star),
        residual: closest.map(|p| p.residual),
        method: "grid_scan_bisection".into(),
        threshold: c,
        range,
        fixed_points,
    })
}

/// Residuals of the error-feedback fixed-point equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResiduals {
    /// `||(1/N) sum_i clip(g_i, C1) + clip(e, C2)||`.
    pub balance: f64,
    /// `||grad f(x)||`.
    pub gradient: f64,
}

/// Evaluates both fixed-point conditions of DiceSGD at `(x, e)` with full
/// data.
pub fn dicesgd_fixed_point_check<P: FiniteSum + ?Sized>(
    problem: &P,
    clip: &ClipConfig,
    x: &Vector,
    e: &Vector,
) -> Result<FixedPointResiduals> {
    problem.check_point(x)?;
    problem.check_point(e)?;
    let d = problem.dim();
    let n = problem.len();
    let mut balance = clip_slice(e.as_slice(), clip.c2);
    let mut full = vec![0.0; d];
    for i in 0..n {
        let g = problem.per_sample_gradient(x, i)?;
        let cg = clip_slice(g.as_slice(), clip.c1);
        for j in 0..d {
            balance[j] += cg[j] / n as f64;
            full[j] += g[j] / n as f64;
        }
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(FixedPointResiduals {
        balance: norm(&balance),
        gradient: norm(&full),
    })
}
