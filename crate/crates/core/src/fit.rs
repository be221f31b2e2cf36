//! Least-squares line fits used for decay rates and convergence orders.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. Needs two distinct `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let dx = x[k] - mx;
        let dy = y[k] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Fit of `ln y` against `t`; `-slope` is the exponential decay rate.
pub fn fit_exponential(t: &[f64], y: &[f64]) -> Option<LineFit> {
    if y.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(t, &ly)
}

/// Exponential fit over the post-transient window: from the first sample
/// below `start_fraction · y[0]` up to (not including) the first sample below
/// `floor`, or the end. Returns the fit and the window as `start..end`.
pub fn fit_decay_window(t: &[f64], y: &[f64], start_fraction: f64, floor: f64) -> Option<(LineFit, Range<usize>)> {
    let n = t.len().min(y.len());
    let y0 = *y.first()?;
    let start = y[..n].iter().position(|v| *v < start_fraction * y0)?;
    let end = y[start..n].iter().position(|v| *v < floor).map_or(n, |k| start + k);
    if end < start + 3 {
        return None;
    }
    fit_exponential(&t[start..end], &y[start..end]).map(|f| (f, start..end))
}

/// Fit of `ln err` against `ln h`; the slope is the observed order.
pub fn fit_loglog(h: &[f64], err: &[f64]) -> Option<LineFit> {
    if h.iter().chain(err).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lh: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let le: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    fit_line(&lh, &le)
}
