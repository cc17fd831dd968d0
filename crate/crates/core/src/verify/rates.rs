use serde::Serialize;

use crate::error::VerifyError;
use crate::optim::IterationTrace;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `f_k - f* ~ C k^{-p}`.
    #[serde(rename = "sublinear_1_over_k")]
    Sublinear,
    /// `f_k - f* ~ C q^k`.
    #[serde(rename = "linear_geometric")]
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    /// `C` in either model.
    pub fitted_constant: f64,
    /// Exponent `p` for the sublinear model, ratio `q` for the geometric one.
    pub rate: f64,
    pub r_squared: f64,
}

/// Minimum number of rows a fit is computed from.
pub const MIN_FIT_ROWS: usize = 10;

struct Line {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> Line {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Line { slope, intercept, r_squared }
}

/// Fits `log(f_k - f*)` against `log k` and against `k` and returns the model
/// with the better coefficient of determination.
///
/// The first 10% of iterations are discarded as transient, as are row 0 and
/// rows with `f_k - f* <= 0`.
pub fn fit_rate<T: Real>(trace: &IterationTrace<T>, f_star: f64) -> Result<RateFit, VerifyError> {
    let last_iter = trace.rows.last().map_or(0, |r| r.iter);
    let skip = last_iter / 10;
    let (ks, gaps): (Vec<f64>, Vec<f64>) = trace
        .rows
        .iter()
        .filter(|r| r.iter >= 1 && r.iter >= skip)
        .filter_map(|r| {
            let gap = r.objective.as_f64() - f_star;
            (gap > 0.0 && gap.is_finite()).then(|| (r.iter as f64, gap.ln()))
        })
        .unzip();
    if ks.len() < MIN_FIT_ROWS {
        return Err(VerifyError::TooShort { rows: ks.len(), needed: MIN_FIT_ROWS });
    }
    let log_k: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let sub = least_squares(&log_k, &gaps);
    let geo = least_squares(&ks, &gaps);
    Ok(if sub.r_squared >= geo.r_squared {
        RateFit { model: RateModel::Sublinear, fitted_constant: sub.intercept.exp(), rate: -sub.slope, r_squared: sub.r_squared }
    } else {
        RateFit { model: RateModel::Geometric, fitted_constant: geo.intercept.exp(), rate: geo.slope.exp(), r_squared: geo.r_squared }
    })
}
