//! Frequency-selective block fading with imperfect CSIT.
//!
//! The time-domain channel has `N_d` independent CSCG taps `h_l ~ CN(0, σ_l²)`;
//! the per-subcarrier response is the `n_F`-point DFT of the zero-padded taps.
//! CSIT errors are drawn per tap, `Δh_l ~ CN(0, σ_{h,l}²)`, and transformed, so
//! the frequency-domain error `ΔH_n` has variance `σ_e² = Σ_l σ_{h,l}²` and
//! cross-subcarrier correlation `Σ_l σ_{h,l}² e^{-j2πl(n1-n2)/n_F}` exactly.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::specfun::bessel_j0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("FFT length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("{taps} taps do not fit in an FFT of length {n_fft}")]
    TooManyTaps { taps: usize, n_fft: usize },
    #[error("{n_d} independent subcarriers do not divide {n_f} subcarriers")]
    Indivisible { n_f: usize, n_d: usize },
    #[error("invalid channel model: {0}")]
    InvalidModel(String),
}

/// Per-tap variances `σ_l²` of the time-domain channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    tap_variances: Vec<f64>,
}

impl PowerDelayProfile {
    pub fn new(tap_variances: Vec<f64>) -> Result<Self, ChannelError> {
        if tap_variances.is_empty() {
            return Err(ChannelError::InvalidModel("profile has no taps".into()));
        }
        if tap_variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ChannelError::InvalidModel(
                "tap variances must be finite and non-negative".into(),
            ));
        }
        if tap_variances.iter().all(|v| *v == 0.0) {
            return Err(ChannelError::InvalidModel("profile carries no power".into()));
        }
        Ok(Self { tap_variances })
    }

    /// `N_d` equal taps with unit total power.
    pub fn uniform(n_d: usize) -> Self {
        Self {
            tap_variances: vec![1.0 / n_d as f64; n_d],
        }
    }

    pub fn tap_variances(&self) -> &[f64] {
        &self.tap_variances
    }

    pub fn len(&self) -> usize {
        self.tap_variances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tap_variances.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.tap_variances.iter().sum()
    }
}

/// Per-tap CSIT error variances `σ_{h,l}²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsitErrorModel {
    per_tap_error_variance: Vec<f64>,
}

impl CsitErrorModel {
    pub fn new(per_tap_error_variance: Vec<f64>) -> Result<Self, ChannelError> {
        if per_tap_error_variance.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ChannelError::InvalidModel(
                "error variances must be finite and non-negative".into(),
            ));
        }
        Ok(Self { per_tap_error_variance })
    }

    /// Splits an aggregate `σ_e²` evenly over `n_d` taps.
    pub fn uniform(sigma_e2: f64, n_d: usize) -> Result<Self, ChannelError> {
        Self::new(vec![sigma_e2 / n_d as f64; n_d])
    }

    /// Error variances from pilot SNR, Doppler and duplexing delay, one per
    /// tap of `profile`, clamped to `[0, σ_l²]`.
    pub fn from_pilot(
        pilot_snr: f64,
        doppler_hz: f64,
        duplex_delay_s: f64,
        profile: &PowerDelayProfile,
    ) -> Result<Self, ChannelError> {
        let per_tap = profile
            .tap_variances()
            .iter()
            .enumerate()
            .map(|(l, &var)| {
                let raw = derive_error_variance(pilot_snr, doppler_hz, duplex_delay_s, var);
                if raw > var {
                    log::warn!(
                        "tap {l}: CSIT error variance {raw:.4} exceeds tap variance {var:.4}; clamping"
                    );
                    var
                } else {
                    raw
                }
            })
            .collect();
        Self::new(per_tap)
    }

    pub fn per_tap(&self) -> &[f64] {
        &self.per_tap_error_variance
    }

    /// Aggregate per-subcarrier error variance `σ_e² = Σ_l σ_{h,l}²`.
    pub fn sigma_e2(&self) -> f64 {
        self.per_tap_error_variance.iter().sum()
    }
}

/// One slot's channel: true taps, true response, and CSIT.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub taps: Vec<Complex64>,
    pub csit_taps: Vec<Complex64>,
    pub freq_true: Vec<Complex64>,
    pub freq_csit: Vec<Complex64>,
}

/// `σ_{h,l}² = 1 − E_p σ_l²/(E_p σ_l² + 1) · J0(2π f_D τ)`, floored at zero.
pub fn derive_error_variance(pilot_snr: f64, doppler_hz: f64, duplex_delay_s: f64, tap_variance: f64) -> f64 {
    let gain = pilot_snr * tap_variance;
    let correlation = bessel_j0(2.0 * std::f64::consts::PI * doppler_hz * duplex_delay_s);
    (1.0 - gain / (gain + 1.0) * correlation).max(0.0)
}

/// A circularly-symmetric complex normal with variance `var`.
pub(crate) fn cscg<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    if var == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Independent taps `h_l ~ CN(0, σ_l²)`.
pub fn sample_taps<R: Rng + ?Sized>(profile: &PowerDelayProfile, rng: &mut R) -> Vec<Complex64> {
    profile.tap_variances().iter().map(|&v| cscg(rng, v)).collect()
}

/// `H_n = Σ_l h_l e^{-j2πln/n_F}` for `n = 0..n_F`, by radix-2 FFT.
pub fn taps_to_freq(taps: &[Complex64], n_fft: usize) -> Result<Vec<Complex64>, ChannelError> {
    if !n_fft.is_power_of_two() {
        return Err(ChannelError::NotPowerOfTwo(n_fft));
    }
    if taps.len() > n_fft {
        return Err(ChannelError::TooManyTaps {
            taps: taps.len(),
            n_fft,
        });
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    buf[..taps.len()].copy_from_slice(taps);
    fft_in_place(&mut buf);
    Ok(buf)
}

/// Iterative in-place radix-2 decimation-in-time FFT (forward, `e^{-j…}`).
fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let angle = -2.0 * std::f64::consts::PI / len as f64;
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                // Direct twiddles; a running product drifts for long transforms.
                let w = Complex64::from_polar(1.0, angle * k as f64);
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Adds per-tap CSIT errors to `taps` and transforms both.
pub fn sample_csit<R: Rng + ?Sized>(
    taps: Vec<Complex64>,
    err: &CsitErrorModel,
    n_fft: usize,
    rng: &mut R,
) -> Result<ChannelDraw, ChannelError> {
    if err.per_tap().len() != taps.len() {
        return Err(ChannelError::InvalidModel(format!(
            "{} error variances for {} taps",
            err.per_tap().len(),
            taps.len()
        )));
    }
    let csit_taps: Vec<Complex64> = taps
        .iter()
        .zip(err.per_tap())
        .map(|(h, &v)| h + cscg(rng, v))
        .collect();
    let freq_true = taps_to_freq(&taps, n_fft)?;
    let freq_csit = taps_to_freq(&csit_taps, n_fft)?;
    Ok(ChannelDraw {
        taps,
        csit_taps,
        freq_true,
        freq_csit,
    })
}

/// Joint law of the true channel and its estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsitLaw {
    /// Estimate first: `ĥ_l ~ CN(0, σ_l² − σ_{h,l}²)`, then `h_l = ĥ_l + Δh_l`
    /// with `Δh_l` independent of `ĥ_l`. The true channel keeps variance `σ_l²`
    /// and `H | Ĥ ~ CN(Ĥ, σ_e²)` holds exactly.
    #[default]
    Mmse,
    /// Truth first: `ĥ_l = h_l + Δh_l` with `Δh_l` independent of `h_l`.
    Additive,
}

/// One slot's channel and CSIT under `law`.
///
/// Under [`CsitLaw::Additive`] the returned truth is the generating channel;
/// callers that need the channel conditioned on the CSIT should draw it with
/// [`sample_true_given_csit`].
pub fn sample_link<R: Rng + ?Sized>(
    profile: &PowerDelayProfile,
    err: &CsitErrorModel,
    law: CsitLaw,
    n_fft: usize,
    rng: &mut R,
) -> Result<ChannelDraw, ChannelError> {
    match law {
        CsitLaw::Additive => sample_csit(sample_taps(profile, rng), err, n_fft, rng),
        CsitLaw::Mmse => {
            let vars = profile.tap_variances();
            if err.per_tap().len() != vars.len() {
                return Err(ChannelError::InvalidModel(format!(
                    "{} error variances for {} taps",
                    err.per_tap().len(),
                    vars.len()
                )));
            }
            if let Some(l) = err.per_tap().iter().zip(vars).position(|(e, v)| e > v) {
                return Err(ChannelError::InvalidModel(format!(
                    "tap {l}: error variance {} exceeds tap variance {}",
                    err.per_tap()[l],
                    vars[l]
                )));
            }
            let csit_taps: Vec<Complex64> = vars.iter().zip(err.per_tap()).map(|(v, e)| cscg(rng, v - e)).collect();
            let taps: Vec<Complex64> = csit_taps.iter().zip(err.per_tap()).map(|(h, &e)| h + cscg(rng, e)).collect();
            let freq_true = taps_to_freq(&taps, n_fft)?;
            let freq_csit = taps_to_freq(&csit_taps, n_fft)?;
            Ok(ChannelDraw {
                taps,
                csit_taps,
                freq_true,
                freq_csit,
            })
        }
    }
}

/// A fresh true-channel response given CSIT taps: `H = DFT(ĥ + e)` with
/// `e_l ~ CN(0, σ_{h,l}²)` independent of `ĥ`.
///
/// This is the conditional law under which `ψ²` given `Ĥ` is exactly the
/// scaled non-central chi-square of [`crate::specfun::NcChiSq`].
pub fn sample_true_given_csit<R: Rng + ?Sized>(
    csit_taps: &[Complex64],
    err: &CsitErrorModel,
    n_fft: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>, ChannelError> {
    let taps: Vec<Complex64> = csit_taps
        .iter()
        .zip(err.per_tap())
        .map(|(h, &v)| h + cscg(rng, v))
        .collect();
    taps_to_freq(&taps, n_fft)
}

/// The `N_d` evenly spaced subcarriers `{0, n_F/N_d, 2n_F/N_d, …}`.
pub fn independent_subcarrier_set(n_f: usize, n_d: usize) -> Result<Vec<usize>, ChannelError> {
    if n_d == 0 || n_f == 0 || n_f % n_d != 0 {
        return Err(ChannelError::Indivisible { n_f, n_d });
    }
    let stride = n_f / n_d;
    Ok((0..n_d).map(|i| i * stride).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn dft_direct(taps: &[Complex64], n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| {
                taps.iter()
                    .enumerate()
                    .map(|(l, h)| h * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (l * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn flat_and_delay_channels() {
        let flat = taps_to_freq(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 8).unwrap();
        assert!(flat.iter().all(|h| (h - c(1.0, 0.0)).norm() < 1e-15));
        let ramp = taps_to_freq(&[c(0.0, 0.0), c(1.0, 0.0)], 4).unwrap();
        let want = [c(1.0, 0.0), c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)];
        for (got, want) in ramp.iter().zip(want) {
            assert!((got - want).norm() < 1e-15);
        }
    }

    #[test]
    fn fft_matches_direct_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n_taps, n) in &[(4usize, 64usize), (16, 1024), (7, 8), (1, 1)] {
            let taps: Vec<_> = (0..n_taps).map(|_| cscg(&mut rng, 1.0)).collect();
            let fast = taps_to_freq(&taps, n).unwrap();
            let slow = dft_direct(&taps, n);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn fft_contract_errors() {
        assert_eq!(taps_to_freq(&[c(1.0, 0.0)], 6), Err(ChannelError::NotPowerOfTwo(6)));
        assert!(matches!(
            taps_to_freq(&[c(1.0, 0.0); 5], 4),
            Err(ChannelError::TooManyTaps { .. })
        ));
    }

    #[test]
    fn error_variance_formula() {
        assert!((derive_error_variance(1.0, 0.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(derive_error_variance(1e9, 0.0, 0.0, 1.0) < 1e-8);
        let tau = 2.404_83 / (2.0 * std::f64::consts::PI);
        assert!((derive_error_variance(1.0, 1.0, tau, 1.0) - 1.0).abs() < 1e-5);
        // J0 < 0 pushes the raw formula above one.
        assert!(derive_error_variance(10.0, 1.0, 3.8317 / (2.0 * std::f64::consts::PI), 1.0) > 1.0);
    }

    #[test]
    fn pilot_model_clamps_to_tap_variance() {
        let profile = PowerDelayProfile::uniform(4);
        let tau = 3.8317 / (2.0 * std::f64::consts::PI);
        let err = CsitErrorModel::from_pilot(10.0, 1.0, tau, &profile).unwrap();
        assert!(err.per_tap().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let err = CsitErrorModel::from_pilot(100.0, 0.0, 0.0, &profile).unwrap();
        assert!(err.per_tap().iter().all(|&v| v > 0.0 && v < 0.25));
        assert!((err.sigma_e2() - err.per_tap().iter().sum::<f64>()).abs() == 0.0);
    }

    #[test]
    fn zero_variance_tap_is_zero() {
        let profile = PowerDelayProfile::new(vec![0.5, 0.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_taps(&profile, &mut rng)[1], c(0.0, 0.0));
        }
        assert!(PowerDelayProfile::new(vec![]).is_err());
        assert!(PowerDelayProfile::new(vec![0.0, 0.0]).is_err());
        assert!(PowerDelayProfile::new(vec![-1.0]).is_err());
    }

    #[test]
    fn perfect_csit_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let profile = PowerDelayProfile::uniform(4);
        let err = CsitErrorModel::uniform(0.0, 4).unwrap();
        let taps = sample_taps(&profile, &mut rng);
        let draw = sample_csit(taps, &err, 64, &mut rng).unwrap();
        assert_eq!(draw.freq_true, draw.freq_csit);
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let profile = PowerDelayProfile::uniform(16);
        for _ in 0..50 {
            let taps = sample_taps(&profile, &mut rng);
            let freq = taps_to_freq(&taps, 1024).unwrap();
            let time: f64 = taps.iter().map(|h| h.norm_sqr()).sum();
            let f: f64 = freq.iter().map(|h| h.norm_sqr()).sum::<f64>() / 1024.0;
            assert!(((time - f) / time).abs() < 1e-9);
        }
    }

    #[test]
    fn subcarrier_sets() {
        assert_eq!(independent_subcarrier_set(8, 2).unwrap(), vec![0, 4]);
        let set = independent_subcarrier_set(1024, 16).unwrap();
        assert_eq!(set.len(), 16);
        assert_eq!(set[1], 64);
        assert_eq!(*set.last().unwrap(), 960);
        assert!(independent_subcarrier_set(10, 3).is_err());
        assert!(independent_subcarrier_set(8, 0).is_err());
    }
}
