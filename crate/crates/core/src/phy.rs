//! PHY abstraction: CSIT quality `f`, the rate→power map, mutual information
//! and the outage-based packet-error indicator.
//!
//! Rates are in nats/s with the bandwidth folded into the `n_F` normalization,
//! the noise variance per subcarrier is `1/n_F`, and powers are linear.

use num_complex::Complex64;
use thiserror::Error;

use crate::specfun::{NcChiSq, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("invalid PHY parameter: {0}")]
    Invalid(String),
    #[error("expected {expected} independent subcarriers, got {got}")]
    SubcarrierSet { expected: usize, got: usize },
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyParams {
    n_f: usize,
    n_d: usize,
    target_per: f64,
    sigma_e2: f64,
    circuit_power: f64,
}

impl PhyParams {
    pub fn new(n_f: usize, n_d: usize, target_per: f64, sigma_e2: f64, circuit_power: f64) -> Result<Self, PhyError> {
        if n_f == 0 || n_d == 0 {
            return Err(PhyError::Invalid("n_f and n_d must be positive".into()));
        }
        if !(target_per > 0.0 && target_per < 1.0) {
            return Err(PhyError::Invalid(format!("target PER {target_per} outside (0, 1)")));
        }
        if !(sigma_e2 > 0.0 && sigma_e2.is_finite()) {
            return Err(PhyError::Invalid(format!("sigma_e2 {sigma_e2} must be positive")));
        }
        if !(circuit_power >= 0.0 && circuit_power.is_finite()) {
            return Err(PhyError::Invalid(format!("circuit power {circuit_power} must be >= 0")));
        }
        Ok(Self {
            n_f,
            n_d,
            target_per,
            sigma_e2,
            circuit_power,
        })
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn n_d(&self) -> usize {
        self.n_d
    }

    pub fn target_per(&self) -> f64 {
        self.target_per
    }

    pub fn sigma_e2(&self) -> f64 {
        self.sigma_e2
    }

    pub fn circuit_power(&self) -> f64 {
        self.circuit_power
    }

    pub fn with_circuit_power(mut self, p_cct: f64) -> Self {
        self.circuit_power = p_cct;
        self
    }
}

/// Noncentrality `s² = (1/N_d) Σ_{n∈I_B} |Ĥ_n|²`.
pub fn noncentrality(csit: &[Complex64], ib: &[usize]) -> f64 {
    ib.iter().map(|&n| csit[n].norm_sqr()).sum::<f64>() / ib.len() as f64
}

/// CSIT quality `f(ε, σ_e², Ĥ)`: the `ε`-quantile of `ψ²` given the CSIT.
pub fn f_quality(params: &PhyParams, csit: &[Complex64], ib: &[usize]) -> Result<f64, PhyError> {
    if ib.len() != params.n_d {
        return Err(PhyError::SubcarrierSet {
            expected: params.n_d,
            got: ib.len(),
        });
    }
    f_from_noncentrality(params, noncentrality(csit, ib))
}

pub fn f_from_noncentrality(params: &PhyParams, s2: f64) -> Result<f64, PhyError> {
    let law = NcChiSq::new(params.n_d as u32, s2, params.sigma_e2)?;
    Ok(law.quantile(params.target_per)?)
}

/// Minimum transmit power for rate `r`: `(e^{r/n_F} − 1) n_F / f`.
pub fn tx_power(rate: f64, f: f64, n_f: usize) -> f64 {
    let n = n_f as f64;
    (rate / n).exp_m1() * n / f
}

/// Transmit plus circuit power; zero when nothing is sent.
pub fn total_power(rate: f64, f: f64, params: &PhyParams) -> f64 {
    if rate > 0.0 {
        tx_power(rate, f, params.n_f) + params.circuit_power
    } else {
        0.0
    }
}

/// `Σ_n ln(1 + P_tx |H_n|² / n_F)` in nats/s.
pub fn mutual_information(channel: &[Complex64], p_tx: f64, n_f: usize) -> f64 {
    let scale = p_tx / n_f as f64;
    channel.iter().map(|h| (scale * h.norm_sqr()).ln_1p()).sum()
}

/// Outage indicator: the scheduled rate exceeds the realized mutual information.
pub fn packet_error(rate: f64, channel: &[Complex64], p_tx: f64, n_f: usize) -> bool {
    rate > 0.0 && rate > mutual_information(channel, p_tx, n_f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhyParams {
        PhyParams::new(64, 1, 0.01, 1.0, 0.0).unwrap()
    }

    #[test]
    fn f_central_case() {
        let csit = vec![Complex64::new(0.0, 0.0); 64];
        let f = f_quality(&params(), &csit, &[0]).unwrap();
        assert!((f - 0.010_050_34).abs() < 1e-8);
        assert!(f_quality(&params(), &csit, &[0, 32]).is_err());
    }

    #[test]
    fn f_grows_with_csit_gain() {
        let p = PhyParams::new(64, 4, 0.01, 0.05, 0.0).unwrap();
        let ib = [0, 16, 32, 48];
        let mut prev = 0.0;
        for gain in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let csit = vec![Complex64::new(gain, 0.3 * gain); 64];
            let f = f_quality(&p, &csit, &ib).unwrap();
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn power_map() {
        assert_eq!(tx_power(0.0, 1.0, 64), 0.0);
        let r = 64.0 * std::f64::consts::LN_2;
        assert!((tx_power(r, 1.0, 64) - 64.0).abs() < 1e-12);
        assert!((tx_power(r, 2.0, 64) - 32.0).abs() < 1e-12);
        let p = params().with_circuit_power(5.0);
        assert_eq!(total_power(0.0, 1.0, &p), 0.0);
        assert!((total_power(r, 1.0, &p) - 69.0).abs() < 1e-12);
        assert!((total_power(r, 1.0, &params()) - tx_power(r, 1.0, 64)).abs() == 0.0);
    }

    #[test]
    fn tx_power_is_convex_in_rate() {
        for k in 1..200 {
            let r = k as f64 * 2.0;
            let mid = tx_power(r, 0.7, 64);
            let avg = 0.5 * (tx_power(r - 1.5, 0.7, 64) + tx_power(r + 1.5, 0.7, 64));
            assert!(mid <= avg);
        }
    }

    #[test]
    fn mutual_information_basics() {
        let flat = vec![Complex64::new(1.0, 0.0); 64];
        assert_eq!(mutual_information(&flat, 0.0, 64), 0.0);
        assert!((mutual_information(&flat, 64.0, 64) - 64.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let mi = mutual_information(&flat, 64.0, 64);
        assert!(!packet_error(0.0, &flat, 0.0, 64));
        assert!(packet_error(mi + 1e-9, &flat, 64.0, 64));
        assert!(!packet_error(mi - 1e-9, &flat, 64.0, 64));
    }
}
