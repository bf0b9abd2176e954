//! Small least-squares helpers for slope and limit extraction.

use crate::aligned::harmonic_number;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { got: usize, need: usize },
    #[error("design matrix is singular")]
    Singular,
}

/// Ordinary least squares `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit, FitError> {
    assert_eq!(xs.len(), ys.len());
    let m = xs.len();
    if m < 2 {
        return Err(FitError::TooFewPoints { got: m, need: 2 });
    }
    let mf = m as f64;
    let x_bar = xs.iter().sum::<f64>() / mf;
    let y_bar = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FitError::Singular);
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let slope_stderr = if m > 2 {
        (rss / (mf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// The extracted limit of `bits / ((n/2) log2 P)` as P grows.
///
/// At finite P the ratio carries an `O(log log P / log P)` excess from the
/// harmonic factor of the set-size bound, so the raw ratio overshoots badly
/// at any reachable P. The fit separates the two scales: regress the raw
/// bits on `(n/2) log2 P` and on the bound's own lower-order covariate
/// `n log2(1 + 2 H_Q)`, `Q = ceil(sqrt(P))`; the coefficient of the first
/// covariate is the limit of the normalized ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofLimitFit {
    pub alpha_hat: f64,
    pub harmonic_coefficient: f64,
    pub intercept: f64,
}

/// Fits `bits ~ alpha_hat * (n/2) log2 P + b * n log2(1 + 2 H_Q) + c` by
/// least squares over `(P, n, bits)` points.
pub fn fit_dof_limit(points: &[(f64, usize, f64)]) -> Result<DofLimitFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints {
            got: points.len(),
            need: 3,
        });
    }
    // Normal equations for the 3-column design [x1, x2, 1].
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for &(p, n, bits) in points {
        let q = p.sqrt().ceil() as u64;
        let row = [
            n as f64 / 2.0 * p.log2(),
            n as f64 * (1.0 + 2.0 * harmonic_number(q)).log2(),
            1.0,
        ];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            aty[i] += row[i] * bits;
        }
    }
    let sol = solve3(ata, aty).ok_or(FitError::Singular)?;
    Ok(DofLimitFit {
        alpha_hat: sol[0],
        harmonic_coefficient: sol[1],
        intercept: sol[2],
    })
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .expect("finite matrix")
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in (row + 1)..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}
