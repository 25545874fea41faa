//! Projected signal and the spatial/residual error split.

use crate::correlation::shifted;
use crate::error::{Error, Result};
use crate::gain::SilentChannels;
use crate::signal::{
    validity_sets, GainMatrix, MultichannelSignal, SampleRange, ShiftMatrix, ValiditySets,
};

/// Solved projection of a reference onto a test signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub gains: GainMatrix,
    pub shifts: ShiftMatrix,
    /// `s~` restricted to the global validity set.
    pub projected: MultichannelSignal,
    pub sets: ValiditySets,
    pub silent: SilentChannels,
}

impl Decomposition {
    pub fn range(&self) -> SampleRange {
        self.sets.global()
    }
}

/// `s~_c[n] = sum_d A[c][d] * s_d[n - tau[c][d]]` for `n` in the global
/// validity set. The returned signal starts at `sets.global().start`.
pub fn project(
    reference: &MultichannelSignal,
    gains: &GainMatrix,
    shifts: &ShiftMatrix,
) -> Result<(MultichannelSignal, ValiditySets)> {
    let ch = reference.num_channels();
    if gains.num_channels() != ch || shifts.num_channels() != ch {
        return Err(Error::ShapeMismatch(format!(
            "{ch} channels against {}x{} gains and {}x{} shifts",
            gains.num_channels(),
            gains.num_channels(),
            shifts.num_channels(),
            shifts.num_channels()
        )));
    }
    let sets = validity_sets(shifts, reference.num_samples())?;
    let idx = sets.global();
    let mut out = Vec::with_capacity(ch * idx.len());
    for c in 0..ch {
        let mut row = vec![0.0; idx.len()];
        for d in 0..ch {
            let a = gains.get(c, d);
            let src = shifted(reference.channel(d), shifts.get(c, d), idx)?;
            row.iter_mut().zip(src).for_each(|(y, x)| *y += a * x);
        }
        out.extend(row);
    }
    let projected = MultichannelSignal::from_planar(out, ch, reference.sample_rate())?;
    Ok((projected, sets))
}

/// Error signals on the global validity set.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSignals {
    pub range: SampleRange,
    /// `s~ - s`
    pub spatial: MultichannelSignal,
    /// `s^ - s~`
    pub residual: MultichannelSignal,
    /// `e_spat + e_resid`, summed samplewise in that order.
    pub total: MultichannelSignal,
}

pub fn error_signals(
    test: &MultichannelSignal,
    reference: &MultichannelSignal,
    dec: &Decomposition,
) -> Result<ErrorSignals> {
    test.check_same_shape(reference)?;
    let range = dec.range();
    let ch = test.num_channels();
    if dec.projected.num_channels() != ch || dec.projected.num_samples() != range.len() {
        return Err(Error::ShapeMismatch(
            "projection does not match its validity set".into(),
        ));
    }
    let sr = test.sample_rate();
    let n = range.len();
    let mut spatial = Vec::with_capacity(ch * n);
    let mut residual = Vec::with_capacity(ch * n);
    for c in 0..ch {
        let s = &reference.channel(c)[range.start..range.end];
        let t = &test.channel(c)[range.start..range.end];
        let p = dec.projected.channel(c);
        spatial.extend(p.iter().zip(s).map(|(p, s)| p - s));
        residual.extend(t.iter().zip(p).map(|(t, p)| t - p));
    }
    let total = spatial.iter().zip(&residual).map(|(a, b)| a + b).collect();
    Ok(ErrorSignals {
        range,
        spatial: MultichannelSignal::from_planar(spatial, ch, sr)?,
        residual: MultichannelSignal::from_planar(residual, ch, sr)?,
        total: MultichannelSignal::from_planar(total, ch, sr)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::{decompose, DecomposeConfig};
    use crate::signal::energy;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn two(x: Vec<f64>, y: Vec<f64>) -> MultichannelSignal {
        MultichannelSignal::from_channels(vec![x, y], 8000).unwrap()
    }

    #[test]
    fn identity_zero_and_permutation() {
        let s = two(vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 4.0]);
        let t0 = ShiftMatrix::zeros(2);
        let (p, _) = project(&s, &GainMatrix::identity(2), &t0).unwrap();
        assert_eq!(p, s);
        let (p, _) = project(&s, &GainMatrix::zeros(2), &t0).unwrap();
        assert!(p.as_planar().iter().all(|&x| x == 0.0));
        let swap = GainMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (p, _) = project(&s, &swap, &t0).unwrap();
        assert_eq!(p.channel(0), s.channel(1));
        assert_eq!(p.channel(1), s.channel(0));
    }

    #[test]
    fn shifted_projection_reads_delayed_samples() {
        let s = two(vec![1.0, 2.0, 3.0, 4.0], vec![10.0, 20.0, 30.0, 40.0]);
        let tau = ShiftMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap();
        let (p, sets) = project(&s, &GainMatrix::identity(2), &tau).unwrap();
        assert_eq!(sets.global(), SampleRange::new(1, 4));
        assert_eq!(p.channel(0), &[1.0, 2.0, 3.0]);
        assert_eq!(p.channel(1), &[20.0, 30.0, 40.0]);
    }

    #[test]
    fn identical_signals_have_no_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = two(
            (0..256).map(|_| rng.sample(StandardNormal)).collect(),
            (0..256).map(|_| rng.sample(StandardNormal)).collect(),
        );
        let dec = decompose(&s, &s, &DecomposeConfig::new(16)).unwrap();
        let e = error_signals(&s, &s, &dec).unwrap();
        let scale = energy(&s, e.range);
        assert!(energy(&e.spatial, SampleRange::full(e.range.len())) < 1e-24 * scale);
        assert!(energy(&e.residual, SampleRange::full(e.range.len())) < 1e-24 * scale);
    }

    #[test]
    fn pure_pan_has_no_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..512).map(|_| rng.sample(StandardNormal)).collect();
        let s = two(
            v.iter().map(|x| 0.8 * x).collect(),
            v.iter().map(|x| 0.6 * x).collect(),
        );
        let t = two(
            v.iter().map(|x| 0.28 * x).collect(),
            v.iter().map(|x| 0.96 * x).collect(),
        );
        let dec = decompose(&t, &s, &DecomposeConfig::new(16)).unwrap();
        let e = error_signals(&t, &s, &dec).unwrap();
        let full = SampleRange::full(e.range.len());
        let signal = energy(&t, e.range);
        assert!(energy(&e.residual, full) < 1e-12 * signal);
        assert!(energy(&e.spatial, full) > 0.1 * signal);
    }

    #[test]
    fn additive_noise_lands_in_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4096;
        let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        };
        let (a, b) = (gauss(&mut rng), gauss(&mut rng));
        let (wa, wb): (Vec<f64>, Vec<f64>) = (gauss(&mut rng), gauss(&mut rng));
        let wa: Vec<f64> = wa.iter().map(|x| 0.1 * x).collect();
        let wb: Vec<f64> = wb.iter().map(|x| 0.1 * x).collect();
        let s = two(a.clone(), b.clone());
        let t = two(
            a.iter().zip(&wa).map(|(x, w)| x + w).collect(),
            b.iter().zip(&wb).map(|(x, w)| x + w).collect(),
        );
        let dec = decompose(&t, &s, &DecomposeConfig::new(32)).unwrap();
        assert_eq!(dec.shifts.get(0, 0), 0);
        assert_eq!(dec.shifts.get(1, 1), 0);
        let e = error_signals(&t, &s, &dec).unwrap();
        let r = e.range;
        let w: Vec<f64> = wa[r.start..r.end]
            .iter()
            .chain(&wb[r.start..r.end])
            .copied()
            .collect();
        let res = e.residual.as_planar();
        let num: f64 = res.iter().zip(&w).map(|(x, y)| x * y).sum();
        let den =
            (res.iter().map(|x| x * x).sum::<f64>() * w.iter().map(|x| x * x).sum::<f64>()).sqrt();
        assert!(num / den > 0.999, "correlation {}", num / den);
    }

    #[test]
    fn decomposition_identity_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 300;
        let s = two(
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let t = two(
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            s.channel(0).iter().map(|x| 0.3 * x).collect(),
        );
        let dec = decompose(&t, &s, &DecomposeConfig::new(10)).unwrap();
        let e = error_signals(&t, &s, &dec).unwrap();
        for i in 0..e.total.as_planar().len() {
            assert_eq!(
                e.total.as_planar()[i],
                e.spatial.as_planar()[i] + e.residual.as_planar()[i]
            );
        }
        // and agrees with s^ - s up to rounding
        for c in 0..2 {
            for (k, n) in (e.range.start..e.range.end).enumerate() {
                let direct = t.channel(c)[n] - s.channel(c)[n];
                let scale = t.channel(c)[n].abs()
                    + s.channel(c)[n].abs()
                    + dec.projected.channel(c)[k].abs();
                assert!((e.total.channel(c)[k] - direct).abs() <= 4.0 * f64::EPSILON * scale);
            }
        }
    }

    proptest! {
        #[test]
        fn projection_is_linear_in_gains(
            s0 in prop::collection::vec(-1.0f64..1.0, 24),
            s1 in prop::collection::vec(-1.0f64..1.0, 24),
            a1 in prop::collection::vec(-2.0f64..2.0, 4),
            a2 in prop::collection::vec(-2.0f64..2.0, 4),
            tau in prop::collection::vec(-3i64..=3, 4),
        ) {
            let s = two(s0, s1);
            let t = ShiftMatrix::from_rows(&[tau[..2].to_vec(), tau[2..].to_vec()]).unwrap();
            let g1 = GainMatrix::from_rows(&[a1[..2].to_vec(), a1[2..].to_vec()]).unwrap();
            let g2 = GainMatrix::from_rows(&[a2[..2].to_vec(), a2[2..].to_vec()]).unwrap();
            let sum: Vec<Vec<f64>> = (0..2)
                .map(|c| (0..2).map(|d| g1.get(c, d) + g2.get(c, d)).collect())
                .collect();
            let gs = GainMatrix::from_rows(&sum).unwrap();
            let (p1, _) = project(&s, &g1, &t).unwrap();
            let (p2, _) = project(&s, &g2, &t).unwrap();
            let (ps, _) = project(&s, &gs, &t).unwrap();
            let scale = ps.as_planar().iter().fold(1.0f64, |m, x| m.max(x.abs()));
            for i in 0..ps.as_planar().len() {
                let lin = p1.as_planar()[i] + p2.as_planar()[i];
                prop_assert!((ps.as_planar()[i] - lin).abs() <= 1e-12 * scale);
            }
        }
    }
}
