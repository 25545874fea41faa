//! Parks-McClellan design of odd-length, even-symmetric (type I) FIR filters.
//!
//! The amplitude response of a type I filter with `2M + 1` taps is a
//! polynomial of degree `M` in `x = cos(w)`. Each exchange iteration fixes
//! `M + 2` reference frequencies, solves for the levelled error `delta`
//! through barycentric Lagrange interpolation, then moves the references
//! to the local extrema of the weighted error on a dense grid.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
const GRID_DENSITY: usize = 32;

/// One approximation band, frequencies in cycles/sample (`0..=0.5`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub low: f64,
    pub high: f64,
    pub desired: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemezDesign {
    pub taps: Vec<f64>,
    /// Levelled weighted error at convergence.
    pub ripple: f64,
    pub iterations: usize,
}

struct Grid {
    freq: Vec<f64>,
    x: Vec<f64>,
    desired: Vec<f64>,
    weight: Vec<f64>,
    band: Vec<usize>,
}

fn build_grid(bands: &[Band], order: usize) -> Grid {
    let step = 0.5 / (GRID_DENSITY * (order + 1)) as f64;
    let mut g = Grid {
        freq: Vec::new(),
        x: Vec::new(),
        desired: Vec::new(),
        weight: Vec::new(),
        band: Vec::new(),
    };
    for (b, band) in bands.iter().enumerate() {
        let count = (((band.high - band.low) / step).ceil() as usize).max(1);
        let points = if band.high > band.low { count + 1 } else { 1 };
        for i in 0..points {
            let f = if points == 1 {
                band.low
            } else {
                band.low + (band.high - band.low) * i as f64 / (points - 1) as f64
            };
            g.freq.push(f);
            g.x.push((2.0 * PI * f).cos());
            g.desired.push(band.desired);
            g.weight.push(band.weight);
            g.band.push(b);
        }
    }
    g
}

/// Barycentric weights for nodes `x`, scaled to avoid under/overflow.
fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let prod = x
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .fold(1.0, |acc, (_, &xj)| acc * 2.0 * (x[k] - xj));
            1.0 / prod
        })
        .collect()
}

struct Interpolant {
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Interpolant {
    fn eval(&self, x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&xk, &yk), &wk) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let dx = x - xk;
            if dx == 0.0 {
                return yk;
            }
            let c = wk / dx;
            num += c * yk;
            den += c;
        }
        num / den
    }
}

/// Solves the levelled-error interpolation on the reference set `ext`.
fn level(grid: &Grid, ext: &[usize]) -> (f64, Interpolant) {
    let x: Vec<f64> = ext.iter().map(|&i| grid.x[i]).collect();
    let ad = barycentric_weights(&x);
    // the weights sum to zero, so an offset in the desired values cancels;
    // removing it avoids cancellation between large weights
    let offset = grid.desired[ext[0]];
    let mut num = 0.0;
    let mut den = 0.0;
    let mut sign = 1.0;
    for (k, &i) in ext.iter().enumerate() {
        num += ad[k] * (grid.desired[i] - offset);
        den += sign * ad[k] / grid.weight[i];
        sign = -sign;
    }
    let delta = num / den;
    // every reference is a node so no grid point is evaluated far outside
    // the node hull; the values are consistent with a degree len - 2 fit
    let mut sign = 1.0;
    let values: Vec<f64> = ext
        .iter()
        .map(|&i| {
            let v = grid.desired[i] - sign * delta / grid.weight[i];
            sign = -sign;
            v
        })
        .collect();
    let nodes = x;
    let weights = ad;
    (
        delta,
        Interpolant {
            nodes,
            values,
            weights,
        },
    )
}

/// Indices of alternating local extrema of `err`, reduced to `want` points.
fn find_extrema(grid: &Grid, err: &[f64], want: usize) -> Vec<usize> {
    let n = err.len();
    let mut cands: Vec<usize> = Vec::new();
    for i in 0..n {
        let e = err[i];
        if e == 0.0 {
            continue;
        }
        let left = (i > 0 && grid.band[i - 1] == grid.band[i]).then(|| err[i - 1]);
        let right = (i + 1 < n && grid.band[i + 1] == grid.band[i]).then(|| err[i + 1]);
        let edge = left.is_none() || right.is_none();
        let peak = |nb: Option<f64>| nb.is_none_or(|v| if e > 0.0 { e >= v } else { e <= v });
        if edge || (peak(left) && peak(right)) {
            cands.push(i);
        }
    }

    let mut alt: Vec<usize> = Vec::with_capacity(cands.len());
    for i in cands {
        match alt.last() {
            Some(&j) if err[j].signum() == err[i].signum() => {
                if err[i].abs() > err[j].abs() {
                    *alt.last_mut().unwrap() = i;
                }
            }
            _ => alt.push(i),
        }
    }

    while alt.len() > want {
        let excess = alt.len() - want;
        let (first, last) = (err[alt[0]].abs(), err[*alt.last().unwrap()].abs());
        if excess == 1 {
            if first < last {
                alt.remove(0);
            } else {
                alt.pop();
            }
            continue;
        }
        let (k, _) = alt
            .iter()
            .enumerate()
            .min_by(|a, b| err[*a.1].abs().total_cmp(&err[*b.1].abs()))
            .unwrap();
        if k == 0 || k == alt.len() - 1 {
            alt.remove(k);
        } else {
            // dropping a neighbour pair keeps the signs alternating
            let nb = if err[alt[k - 1]].abs() < err[alt[k + 1]].abs() {
                k - 1
            } else {
                k + 1
            };
            alt.remove(k.max(nb));
            alt.remove(k.min(nb));
        }
    }
    alt
}

/// Minimax design of a `num_taps`-tap type I filter over `bands`.
pub fn remez(num_taps: usize, bands: &[Band]) -> Result<RemezDesign> {
    if num_taps < 3 || num_taps.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "type I design needs an odd tap count >= 3, got {num_taps}"
        )));
    }
    for b in bands {
        if !(0.0 <= b.low && b.low <= b.high && b.high <= 0.5 && b.weight > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid band {b:?}")));
        }
    }
    let order = (num_taps - 1) / 2;
    let grid = build_grid(bands, order);
    let want = order + 2;
    if grid.freq.len() < want {
        return Err(Error::InvalidParameter(
            "bands too narrow for filter order".into(),
        ));
    }

    let ng = grid.freq.len();
    let mut ext: Vec<usize> = (0..want).map(|j| j * (ng - 1) / (want - 1)).collect();
    let mut err = vec![0.0; ng];
    for iter in 1..=MAX_ITERATIONS {
        let (delta, interp) = level(&grid, &ext);
        for i in 0..ng {
            err[i] = grid.weight[i] * (grid.desired[i] - interp.eval(grid.x[i]));
        }
        let next = find_extrema(&grid, &err, want);
        let max_err = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let converged =
            next == ext || (max_err - delta.abs()) <= 1e-9 * max_err || max_err <= 1e-13;
        if next.len() < want {
            if (max_err - delta.abs()) <= 1e-6 * max_err || max_err <= 1e-13 {
                return Ok(finish(num_taps, &interp, delta, iter));
            }
            return Err(Error::NoConvergence(iter));
        }
        if converged {
            return Ok(finish(num_taps, &interp, delta, iter));
        }
        ext = next;
    }
    Err(Error::NoConvergence(MAX_ITERATIONS))
}

/// Impulse response from samples of the amplitude response.
fn finish(num_taps: usize, interp: &Interpolant, delta: f64, iterations: usize) -> RemezDesign {
    let m = (num_taps - 1) / 2;
    let l = num_taps as f64;
    let amp: Vec<f64> = (0..=m)
        .map(|k| interp.eval((2.0 * PI * k as f64 / l).cos()))
        .collect();
    let half: Vec<f64> = (0..=m)
        .map(|n| {
            let t = n as f64 - m as f64;
            let s: f64 = (1..=m)
                .map(|k| amp[k] * (2.0 * PI * k as f64 * t / l).cos())
                .sum();
            (amp[0] + 2.0 * s) / l
        })
        .collect();
    let taps = half.iter().chain(half[..m].iter().rev()).copied().collect();
    RemezDesign {
        taps,
        ripple: delta.abs(),
        iterations,
    }
}
