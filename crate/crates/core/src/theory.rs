//! Closed-form SSR for a mono source panned with the constant-power law,
//! with and without an extra delay on the right channel of the test signal.

use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};

/// Constant-power pan position in `[-1, 1]` (`-1` is hard left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanParams {
    p: f64,
}

impl PanParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("pan {p} outside [-1, 1]")));
        }
        Ok(Self { p })
    }

    pub fn position(&self) -> f64 {
        self.p
    }

    pub fn left_gain(&self) -> f64 {
        (FRAC_PI_4 * (self.p + 1.0)).cos()
    }

    pub fn right_gain(&self) -> f64 {
        (FRAC_PI_4 * (self.p + 1.0)).sin()
    }
}

fn inv_to_db(u_inv: f64, cap: f64) -> f64 {
    if u_inv <= 0.0 {
        return cap;
    }
    (-10.0 * u_inv.log10()).clamp(-cap, cap)
}

/// Spatial error energy of a pure pan change, relative to the source energy.
fn pan_error(p: PanParams, p_hat: PanParams) -> f64 {
    if p.p == p_hat.p {
        return 0.0;
    }
    2.0 - 2.0 * (FRAC_PI_4 * (p_hat.p - p.p)).cos()
}

/// SSR when the test differs from the reference only by its pan position.
pub fn theoretical_ssr_pan(p: PanParams, p_hat: PanParams, cap: f64) -> f64 {
    inv_to_db(pan_error(p, p_hat), cap)
}

/// Biased autocorrelation `acf[d] = sum_n v[n] v[n + d]` for `d` in `0..=max_lag`.
pub fn autocorrelation(v: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag.min(v.len().saturating_sub(1)))
        .map(|d| v.iter().zip(&v[d..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// SSR when the test is re-panned and its right channel delayed by `d_hat`
/// samples. `acf` is the source autocorrelation from [`autocorrelation`].
pub fn theoretical_ssr_pan_delay(
    p: PanParams,
    p_hat: PanParams,
    d_hat: i64,
    acf: &[f64],
    cap: f64,
) -> Result<f64> {
    let k0 = *acf.first().ok_or(Error::ZeroEnergySource)?;
    if !(k0 > 0.0) {
        return Err(Error::ZeroEnergySource);
    }
    let lag = d_hat.unsigned_abs() as usize;
    let kd = *acf.get(lag).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "delay {d_hat} beyond autocorrelation support {}",
            acf.len() - 1
        ))
    })?;
    let u_inv = pan_error(p, p_hat) + 2.0 * p_hat.right_gain() * p.right_gain() * (1.0 - kd / k0);
    Ok(inv_to_db(u_inv, cap))
}

/// `(lower, upper)` SSR over all possible source autocorrelations.
pub fn theoretical_ssr_bounds(p: PanParams, p_hat: PanParams, cap: f64) -> (f64, f64) {
    let base = pan_error(p, p_hat);
    let spread = 4.0 * p_hat.right_gain() * p.right_gain();
    (inv_to_db(base + spread, cap), inv_to_db(base, cap))
}
