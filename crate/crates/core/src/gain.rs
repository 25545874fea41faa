//! Optimal gain matrix for a fixed shift matrix.
//!
//! Each row `c` of the gain matrix solves the normal equations
//! `A[c, D] * R^c[D, D] = rhs[D]`, where `R^c` is the Gram matrix of the
//! reference channels shifted by row `c` of the shift matrix and `D` is the
//! set of non-silent reference channels. Silent test rows are zero.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::correlation::{estimate_shift_matrix, generalized_correlation, DelaySearchConfig};
use crate::error::{Error, Result};
use crate::projection::{project, Decomposition};
use crate::signal::{validity_sets, GainMatrix, MultichannelSignal, ShiftMatrix, ValiditySets};

/// Channels below this fraction of the largest channel energy are silent.
pub const DEFAULT_SILENCE_EPS_REL: f64 = 1e-6;

/// Absolute energy floor under which a channel is always silent.
pub const SILENCE_FLOOR: f64 = 1e-30;

/// Eigenvalues below this fraction of the largest are dropped.
pub const EIGEN_CUTOFF_REL: f64 = 1e-10;

/// Channels excluded from the solve.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SilentChannels {
    /// Silent test channels (zero gain rows).
    pub rows: Vec<usize>,
    /// Silent reference channels (zero gain columns).
    pub cols: Vec<usize>,
}

/// Flags silent test rows and reference columns.
///
/// A channel is silent when its energy is below
/// `max(eps_rel * E_max, SILENCE_FLOOR)`, with `E_max` the largest channel
/// energy across both signals.
pub fn prune_silent_channels(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    eps_rel: f64,
) -> Result<SilentChannels> {
    if !(eps_rel > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "silence threshold {eps_rel} must be positive"
        )));
    }
    let et = test.channel_energies();
    let er = reference.channel_energies();
    let scale = et.iter().chain(&er).fold(0.0f64, |m, &e| m.max(e));
    let threshold = (eps_rel * scale).max(SILENCE_FLOOR);
    let silent = |e: &[f64]| -> Vec<usize> {
        e.iter()
            .enumerate()
            .filter(|(_, &v)| v < threshold)
            .map(|(i, _)| i)
            .collect()
    };
    let out = SilentChannels {
        rows: silent(&et),
        cols: silent(&er),
    };
    if out.cols.len() == er.len() {
        return Err(Error::AllChannelsSilent("reference"));
    }
    if out.rows.len() == et.len() {
        return Err(Error::AllChannelsSilent("test"));
    }
    Ok(out)
}

/// Normal equations for one gain row.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub channel: usize,
    pub channels: usize,
    /// Row-major `C x C` Gram matrix of shifted reference channels.
    pub gram: Vec<f64>,
    /// Cross-correlation of test channel `channel` with each shifted reference channel.
    pub rhs: Vec<f64>,
    pub active_rows: Vec<usize>,
    pub active_cols: Vec<usize>,
}

impl GramSystem {
    pub fn gram_at(&self, b: usize, d: usize) -> f64 {
        self.gram[b * self.channels + d]
    }

    pub fn is_active_row(&self) -> bool {
        self.active_rows.contains(&self.channel)
    }
}

/// Builds `R^c` and the right-hand side for row `c`, summing over the
/// global validity set.
pub fn build_gram_system(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    tau: &ShiftMatrix,
    c: usize,
    sets: &ValiditySets,
    silent: &SilentChannels,
) -> Result<GramSystem> {
    test.check_same_shape(reference)?;
    let ch = reference.num_channels();
    if c >= ch || tau.num_channels() != ch {
        return Err(Error::InvalidParameter(format!(
            "row {c} / shift matrix size {} for {ch} channels",
            tau.num_channels()
        )));
    }
    let idx = sets.global();
    if idx.is_empty() {
        return Err(Error::EmptyValiditySet {
            n_samples: test.num_samples(),
        });
    }
    let mut gram = vec![0.0; ch * ch];
    for b in 0..ch {
        for d in b..ch {
            let v = generalized_correlation(
                reference.channel(b),
                reference.channel(d),
                tau.get(c, b),
                tau.get(c, d),
                idx,
            )?;
            gram[b * ch + d] = v;
            gram[d * ch + b] = v;
        }
    }
    let rhs = (0..ch)
        .map(|d| {
            generalized_correlation(test.channel(c), reference.channel(d), 0, tau.get(c, d), idx)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GramSystem {
        channel: c,
        channels: ch,
        gram,
        rhs,
        active_rows: (0..ch).filter(|r| !silent.rows.contains(r)).collect(),
        active_cols: (0..ch).filter(|d| !silent.cols.contains(d)).collect(),
    })
}

/// Solves one gain row by spectral pseudo-inverse of `R^c[D, D]`.
pub fn solve_gain_row(sys: &GramSystem) -> Result<Vec<f64>> {
    let mut row = vec![0.0; sys.channels];
    if !sys.is_active_row() || sys.active_cols.is_empty() {
        return Ok(row);
    }
    let cols = &sys.active_cols;
    let m = cols.len();
    let gram = DMatrix::from_fn(m, m, |i, j| sys.gram_at(cols[i], cols[j]));
    let rhs = DVector::from_iterator(m, cols.iter().map(|&d| sys.rhs[d]));

    let eig = SymmetricEigen::new(gram);
    let lambda_max = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l));
    if !(lambda_max > 0.0) {
        return Err(Error::SingularSystem {
            channel: sys.channel,
        });
    }
    let cutoff = EIGEN_CUTOFF_REL * lambda_max;
    let mut solution = DVector::zeros(m);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff {
            let v = eig.eigenvectors.column(i);
            solution += v * (v.dot(&rhs) / lambda);
        }
    }
    for (k, &d) in cols.iter().enumerate() {
        row[d] = solution[k];
    }
    Ok(row)
}

/// Settings for a single decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeConfig {
    pub delay: DelaySearchConfig,
    pub silence_eps_rel: f64,
}

impl DecomposeConfig {
    pub fn new(max_shift: usize) -> Self {
        Self {
            delay: DelaySearchConfig::new(max_shift),
            silence_eps_rel: DEFAULT_SILENCE_EPS_REL,
        }
    }
}

/// Projects `reference` onto `test` with the gain/delay model.
pub fn decompose(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    cfg: &DecomposeConfig,
) -> Result<Decomposition> {
    test.check_same_shape(reference)?;
    let silent = prune_silent_channels(test, reference, cfg.silence_eps_rel)?;
    let shifts = estimate_shift_matrix(test, reference, &cfg.delay, &silent.rows, &silent.cols)?;
    let gains = solve_gains(test, reference, &shifts, &silent)?;
    let (projected, sets) = project(reference, &gains, &shifts)?;
    Ok(Decomposition {
        gains,
        shifts,
        projected,
        sets,
        silent,
    })
}

/// Solves every gain row for a given shift matrix.
pub fn solve_gains(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    shifts: &ShiftMatrix,
    silent: &SilentChannels,
) -> Result<GainMatrix> {
    let sets = validity_sets(shifts, test.num_samples())?;
    let ch = test.num_channels();
    let mut gains = GainMatrix::zeros(ch);
    for c in 0..ch {
        let sys = build_gram_system(test, reference, shifts, c, &sets, silent)?;
        gains.set_row(c, &solve_gain_row(&sys)?);
    }
    Ok(gains)
}
