//! Virtual continuous-time analysis: drain trajectories, the steady-state
//! leftover, and the delay/power bounds built from them.
//!
//! A backlog `Ũ` drains at the CSIT-averaged DBP rate, `dŨ/dt = −(1−ε) r̄(Ũ)`.
//! Replacing `r̄` by `n_F(ln Ũ + β)` gives the closed form
//!
//! `y(t; β) = exp(−β + Ei⁻¹[Ei(ln u0 + β) − n_F(1−ε)e^β t])`
//!
//! which upper-bounds the fluid backlog; `β′` gives the lower trajectory.
//! Here `β = E[ln((1−ε)f/V)]` and `β′ = E[(ln((1−ε)f/V))⁺]`, so `V` is folded
//! into both constants.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelError, CsitErrorModel, CsitLaw, PowerDelayProfile};
use crate::phy::{self, PhyError, PhyParams};
use crate::queueing::ArrivalModel;
use crate::specfun::{ei, ei_inv, quad_adaptive, SpecfunError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VctsError {
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("backlog {u0} is at or below the activation level e^(-beta) = {level}")]
    BelowActivation { u0: f64, level: f64 },
    #[error("no finite bracket for the leftover fixed point with burst {burst}")]
    Bracket { burst: f64 },
    #[error("ODE step {step} too coarse: Richardson estimate {estimate:e} exceeds tolerance")]
    StepTooLarge { step: f64, estimate: f64 },
    #[error("{0}")]
    Regime(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl VctsError {
    pub fn is_regime(&self) -> bool {
        !matches!(self, Self::Invalid(_) | Self::Channel(_))
    }
}

type Result<T> = std::result::Result<T, VctsError>;

/// Monte Carlo sample of `x = ln((1−ε) f)` over CSIT draws, sorted so that
/// every expectation the bounds need is a prefix/suffix sum lookup.
#[derive(Debug, Clone)]
pub struct CsitStatistics {
    n_f: usize,
    eps: f64,
    x: Vec<f64>,
    x_suffix: Vec<f64>,
    inv_f_suffix: Vec<f64>,
    mean_f: f64,
    mean_f_se: f64,
    x_mean: f64,
    x_sd: f64,
}

impl CsitStatistics {
    pub fn from_f_samples(mut f: Vec<f64>, eps: f64, n_f: usize) -> Result<Self> {
        if f.len() < 2 {
            return Err(VctsError::Invalid("need at least two quality samples".into()));
        }
        if f.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(VctsError::Invalid("quality samples must be positive and finite".into()));
        }
        f.sort_by(f64::total_cmp);
        let n = f.len() as f64;
        let x: Vec<f64> = f.iter().map(|v| ((1.0 - eps) * v).ln()).collect();
        let mut x_suffix = vec![0.0; f.len() + 1];
        let mut inv_f_suffix = vec![0.0; f.len() + 1];
        for i in (0..f.len()).rev() {
            x_suffix[i] = x_suffix[i + 1] + x[i];
            inv_f_suffix[i] = inv_f_suffix[i + 1] + 1.0 / f[i];
        }
        let (mean_f, sd_f) = mean_sd(&f);
        let (x_mean, x_sd) = mean_sd(&x);
        Ok(Self {
            n_f,
            eps,
            x,
            x_suffix,
            inv_f_suffix,
            mean_f,
            mean_f_se: sd_f / n.sqrt(),
            x_mean,
            x_sd,
        })
    }

    /// Draws `n_samples` CSIT realizations and evaluates `f` on each.
    pub fn estimate(
        phy: &PhyParams,
        profile: &PowerDelayProfile,
        err: &CsitErrorModel,
        law: CsitLaw,
        n_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ib = channel::independent_subcarrier_set(phy.n_f(), phy.n_d())?;
        let mut f = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let draw = channel::sample_link(profile, err, law, phy.n_f(), &mut rng)?;
            f.push(phy::f_quality(phy, &draw.freq_csit, &ib)?);
        }
        Self::from_f_samples(f, phy.target_per(), phy.n_f())
    }

    /// Like [`estimate`](Self::estimate) but memoized process-wide.
    pub fn cached(
        phy: &PhyParams,
        profile: &PowerDelayProfile,
        err: &CsitErrorModel,
        law: CsitLaw,
        n_samples: usize,
        seed: u64,
    ) -> Result<Arc<Self>> {
        static CACHE: OnceLock<RwLock<HashMap<Vec<u64>, Arc<CsitStatistics>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut key = vec![phy.n_f() as u64, phy.n_d() as u64, phy.target_per().to_bits(), n_samples as u64, seed, law as u64];
        key.extend(profile.tap_variances().iter().map(|v| v.to_bits()));
        key.push(u64::MAX);
        key.extend(err.per_tap().iter().map(|v| v.to_bits()));
        if let Some(hit) = cache.read().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(hit.clone());
        }
        let stats = Arc::new(Self::estimate(phy, profile, err, law, n_samples, seed)?);
        let mut guard = cache.write().unwrap_or_else(|e| e.into_inner());
        Ok(guard.entry(key).or_insert(stats).clone())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn target_per(&self) -> f64 {
        self.eps
    }

    pub fn mean_f(&self) -> f64 {
        self.mean_f
    }

    pub fn mean_f_se(&self) -> f64 {
        self.mean_f_se
    }

    /// `β(V) = E[ln((1−ε) f / V)]`.
    pub fn beta(&self, v: f64) -> f64 {
        self.x_mean - v.ln()
    }

    pub fn beta_se(&self) -> f64 {
        self.x_sd / (self.len() as f64).sqrt()
    }

    /// `β′(V) = E[(ln((1−ε) f / V))⁺]`.
    pub fn beta_prime(&self, v: f64) -> f64 {
        self.mean_positive_part(-v.ln())
    }

    pub fn beta_prime_se(&self, v: f64) -> f64 {
        let shift = -v.ln();
        let vals: Vec<f64> = self.x.iter().map(|x| (x + shift).max(0.0)).collect();
        mean_sd(&vals).1 / (self.len() as f64).sqrt()
    }

    /// `E[(x + shift)⁺]`.
    pub fn mean_positive_part(&self, shift: f64) -> f64 {
        let idx = self.x.partition_point(|&x| x + shift <= 0.0);
        let active = (self.len() - idx) as f64;
        // never below E[x] + shift, which summation order could otherwise breach
        ((self.x_suffix[idx] + shift * active) / self.len() as f64).max(self.x_mean + shift)
    }

    /// `E[r_DBP | U]`, the CSIT-averaged DBP rate at backlog `u`.
    pub fn mean_dbp_rate(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        self.n_f as f64 * self.mean_positive_part(u.ln() - v.ln())
    }

    /// `E[g_DBP(u0)]`: the CSIT-averaged DBP power at backlog `u0`, with the
    /// circuit power paid only when the burst is on.
    pub fn mean_dbp_power(&self, u0: f64, v: f64, p_cct: f64) -> f64 {
        if u0 <= 0.0 {
            return 0.0;
        }
        let n = self.n_f as f64;
        let kappa = n * (1.0 - self.eps) / v;
        // active iff κ u0 > n_F / f, i.e. x > ln V − ln u0
        let cut = v.ln() - u0.ln();
        let idx = self.x.partition_point(|&x| x <= cut);
        let active = (self.len() - idx) as f64;
        ((kappa * u0 + p_cct) * active - n * self.inv_f_suffix[idx]) / self.len() as f64
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Everything the bounds need for one `(ε, σ_e², V, P_cct, T)` point.
#[derive(Debug, Clone)]
pub struct VctsParams {
    pub n_f: usize,
    pub eps: f64,
    pub v: f64,
    pub p_cct: f64,
    pub frame_s: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub mean_f: f64,
    /// Offset `L_Δ` of the asymptotic delay term; `e^{−β}` when unset.
    pub l_delta: Option<f64>,
    stats: Option<Arc<CsitStatistics>>,
}

impl VctsParams {
    pub fn new(stats: Arc<CsitStatistics>, v: f64, p_cct: f64, frame_s: f64) -> Result<Self> {
        if !(v > 0.0 && frame_s > 0.0 && p_cct >= 0.0) {
            return Err(VctsError::Invalid(format!("need V > 0, T > 0, P_cct >= 0 (got {v}, {frame_s}, {p_cct})")));
        }
        Ok(Self {
            n_f: stats.n_f(),
            eps: stats.target_per(),
            v,
            p_cct,
            frame_s,
            beta: stats.beta(v),
            beta_prime: stats.beta_prime(v),
            mean_f: stats.mean_f(),
            l_delta: None,
            stats: Some(stats),
        })
    }

    /// Trajectory-only parameters with the constants given directly.
    /// Power bounds need the CSIT sample and fail on these.
    pub fn from_constants(n_f: usize, eps: f64, beta: f64, beta_prime: f64, frame_s: f64) -> Self {
        Self {
            n_f,
            eps,
            v: 1.0,
            p_cct: 0.0,
            frame_s,
            beta,
            beta_prime,
            mean_f: f64::NAN,
            l_delta: None,
            stats: None,
        }
    }

    pub fn stats(&self) -> Option<&Arc<CsitStatistics>> {
        self.stats.as_ref()
    }

    fn drain(&self) -> f64 {
        self.n_f as f64 * (1.0 - self.eps)
    }

    fn kappa(&self) -> f64 {
        self.drain() / self.v
    }
}

/// Closed-form drain trajectory `y(t; β)`.
pub fn traj_y(t: f64, u0: f64, beta: f64, n_f: usize, eps: f64) -> Result<f64> {
    let z0 = u0.ln() + beta;
    if !(z0 > 0.0) {
        return Err(VctsError::BelowActivation {
            u0,
            level: (-beta).exp(),
        });
    }
    if t == 0.0 {
        return Ok(u0);
    }
    let c = n_f as f64 * (1.0 - eps);
    let z = ei_inv(ei(z0)? - c * beta.exp() * t)?;
    Ok((z - beta).exp())
}

/// `y(t; β)`, held at `u0` when the start is already below activation.
pub fn traj_y_clamped(t: f64, u0: f64, beta: f64, n_f: usize, eps: f64) -> Result<f64> {
    if !(u0.ln() + beta > 0.0) {
        return Ok(u0);
    }
    traj_y(t, u0, beta, n_f, eps)
}

/// Time at which `y(·; β)` from `u0` reaches `target`; infinite when the
/// target is at or below the activation level.
fn time_to_reach(u0: f64, target: f64, beta: f64, c: f64) -> Result<f64> {
    let z0 = u0.ln() + beta;
    let z1 = target.ln() + beta;
    if !(z1 > 0.0) {
        return Ok(f64::INFINITY);
    }
    if z1 >= z0 {
        return Ok(0.0);
    }
    Ok((ei(z0)? - ei(z1)?) / (c * beta.exp()))
}

/// Conditional-mean rate law used by the numerical ODE.
#[derive(Debug, Clone, Copy)]
pub enum RateModel<'a> {
    /// `n_F (ln U + β)⁺`, the lower rate bound.
    Low { beta: f64 },
    /// `n_F ((ln U)⁺ + β′)`, the upper rate bound.
    Up { beta_prime: f64 },
    /// The exact CSIT-averaged DBP rate over a Monte Carlo sample.
    MonteCarlo { stats: &'a CsitStatistics, v: f64 },
}

impl RateModel<'_> {
    pub fn rate(&self, u: f64, n_f: usize) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let n = n_f as f64;
        match *self {
            Self::Low { beta } => n * (u.ln() + beta).max(0.0),
            Self::Up { beta_prime } => n * (u.ln().max(0.0) + beta_prime),
            Self::MonteCarlo { stats, v } => stats.mean_dbp_rate(u, v),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `|U_h(end) − U_{h/2}(end)| / 15`, relative to the start value.
    pub richardson_estimate: f64,
}

const RICHARDSON_TOL: f64 = 1e-7;

/// RK4 integration of `dU/dt = −(1−ε) r̄(U)` on `[0, horizon]`.
pub fn vcts_ode_integrate(
    u0: f64,
    model: RateModel<'_>,
    n_f: usize,
    eps: f64,
    horizon: f64,
    step: f64,
) -> Result<Trajectory> {
    if !(step > 0.0 && horizon >= 0.0 && u0 >= 0.0) {
        return Err(VctsError::Invalid(format!("bad ODE arguments u0={u0} horizon={horizon} step={step}")));
    }
    let rhs = |u: f64| -(1.0 - eps) * model.rate(u.max(0.0), n_f);
    let run = |h: f64, record: bool| {
        let n = (horizon / h).ceil().max(1.0) as usize;
        let h = horizon / n as f64;
        let mut u = u0;
        let mut times = Vec::new();
        let mut values = Vec::new();
        if record {
            times.reserve(n + 1);
            values.reserve(n + 1);
            times.push(0.0);
            values.push(u);
        }
        for i in 0..n {
            let k1 = rhs(u);
            let k2 = rhs(u + 0.5 * h * k1);
            let k3 = rhs(u + 0.5 * h * k2);
            let k4 = rhs(u + h * k3);
            u = (u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).max(0.0);
            if record {
                times.push((i + 1) as f64 * h);
                values.push(u);
            }
        }
        (u, times, values)
    };
    let (end, times, values) = run(step, true);
    let (end_fine, _, _) = run(step / 2.0, false);
    let estimate = (end - end_fine).abs() / 15.0 / u0.max(f64::MIN_POSITIVE);
    if estimate > RICHARDSON_TOL {
        return Err(VctsError::StepTooLarge { step, estimate });
    }
    Ok(Trajectory {
        times,
        values,
        richardson_estimate: estimate,
    })
}

/// Solution of `L = y(T; B + L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    pub residual: f64,
    /// `d y(T; B+L)/dL` at the solution; below one for a contraction.
    pub slope: f64,
    pub iterations: u32,
}

/// The steady-state per-period leftover `L*` for bursts of `burst` nats.
pub fn leftover_fixed_point(burst: f64, frame_s: f64, beta: f64, n_f: usize, eps: f64) -> Result<FixedPoint> {
    if !(burst >= 0.0 && frame_s > 0.0) {
        return Err(VctsError::Invalid(format!("burst {burst} and frame {frame_s} must be >= 0 and > 0")));
    }
    if burst == 0.0 {
        return Ok(FixedPoint {
            value: 0.0,
            residual: 0.0,
            slope: 0.0,
            iterations: 0,
        });
    }
    let g = |l: f64| traj_y_clamped(frame_s, burst + l, beta, n_f, eps).map(|y| y - l);
    let mut lo = 0.0;
    let mut hi = burst.max(1.0);
    while g(hi)? >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(VctsError::Bracket { burst });
        }
    }
    let mut iterations = 0;
    while iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    let value = 0.5 * (lo + hi);
    let residual = g(value)?;
    // dy/du0 = z(T)/z(0) with z = ln y + β
    let u0 = burst + value;
    let y = value + residual;
    let slope = if u0.ln() + beta > 0.0 {
        (y.ln() + beta) / (u0.ln() + beta)
    } else {
        1.0
    };
    Ok(FixedPoint {
        value,
        residual,
        slope,
        iterations,
    })
}

/// `∫_0^T y(t; β) dt`: upper bound on the per-period unfinished work from `u0`.
pub fn ju_upper(u0: f64, p: &VctsParams) -> Result<f64> {
    let t = p.frame_s;
    if !(u0.ln() + p.beta > 0.0) {
        return Ok(u0.max(0.0) * t);
    }
    let f = |s: f64| traj_y(s, u0, p.beta, p.n_f, p.eps).unwrap_or(f64::NAN);
    let val = quad_adaptive(f, 0.0, t, 1e-11 * u0 * t)?;
    if !val.is_finite() {
        return Err(VctsError::Regime(format!("trajectory from {u0} left the exponential-integral range")));
    }
    Ok(val)
}

/// Lower bound on the per-period energy from `u0`: the integral of
/// `[κ y(t; β′) + E[g_DBP(u0)] − κ u0]⁺` with `κ = n_F(1−ε)/V`.
pub fn jg_lower(u0: f64, p: &VctsParams) -> Result<f64> {
    let stats = p
        .stats
        .as_ref()
        .ok_or_else(|| VctsError::Invalid("power bound needs CSIT statistics".into()))?;
    if u0 <= 0.0 {
        return Ok(0.0);
    }
    let kappa = p.kappa();
    let g0 = stats.mean_dbp_power(u0, p.v, p.p_cct);
    if g0 <= 0.0 {
        return Ok(0.0);
    }
    if !(u0.ln() + p.beta_prime > 0.0) {
        return Ok(g0 * p.frame_s);
    }
    // the integrand is decreasing in t; integrate only up to its zero
    let target = u0 - g0 / kappa;
    let t_zero = if target > 0.0 {
        time_to_reach(u0, target, p.beta_prime, p.drain())?
    } else {
        f64::INFINITY
    };
    let upper = t_zero.min(p.frame_s);
    let f = |s: f64| {
        traj_y(s, u0, p.beta_prime, p.n_f, p.eps)
            .map(|y| (kappa * y + g0 - kappa * u0).max(0.0))
            .unwrap_or(f64::NAN)
    };
    let val = quad_adaptive(f, 0.0, upper, 1e-11 * g0 * p.frame_s)?;
    if !val.is_finite() {
        return Err(VctsError::Regime(format!("power trajectory from {u0} left the exponential-integral range")));
    }
    Ok(val)
}

/// Delay bound (s) for deterministic bursts of `burst` nats per frame.
pub fn delay_upper_bound(burst: f64, p: &VctsParams) -> Result<f64> {
    if !(burst > 0.0) {
        return Err(VctsError::Invalid("delay bound needs a positive burst".into()));
    }
    let l = leftover_fixed_point(burst, p.frame_s, p.beta, p.n_f, p.eps)?;
    Ok(ju_upper(burst + l.value, p)? / burst)
}

/// Power bound (linear) for deterministic bursts of `burst` nats per frame.
pub fn power_lower_bound(burst: f64, p: &VctsParams) -> Result<f64> {
    Ok(jg_lower(burst, p)? / p.frame_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTerms {
    pub t_d: f64,
    pub t_p: f64,
    pub delay_order: f64,
    pub power_order: f64,
    /// `½(B − L_Δ) t_d + T(L* + L_Δ)`, the triangle-plus-rectangle area.
    pub area_overbound: f64,
}

/// Burst-duration terms and small-`V` order expressions.
pub fn asymptotic_terms(burst: f64, p: &VctsParams) -> Result<AsymptoticTerms> {
    let log_term = (burst * p.mean_f / p.v).ln();
    if !(log_term > 0.0) {
        return Err(VctsError::Regime(format!(
            "ln(B E[f] / V) = {log_term} is not positive; the small-V expansion does not apply"
        )));
    }
    let stats = p
        .stats
        .as_ref()
        .ok_or_else(|| VctsError::Invalid("asymptotic terms need CSIT statistics".into()))?;
    let l_star = leftover_fixed_point(burst, p.frame_s, p.beta, p.n_f, p.eps)?.value;
    let l_delta = p.l_delta.unwrap_or((-p.beta).exp());
    let c = p.drain();
    let z_hi = (burst + l_star).ln() + p.beta;
    let z_lo = (l_star + l_delta).ln() + p.beta;
    if !(z_hi > 0.0 && z_lo > 0.0) {
        return Err(VctsError::BelowActivation {
            u0: burst + l_star,
            level: (-p.beta).exp(),
        });
    }
    let t_d = ((-p.beta).exp() / c * (ei(z_hi)? - ei(z_lo)?)).clamp(f64::MIN_POSITIVE, p.frame_s);

    let g_low = stats.mean_dbp_power(burst, p.v, p.p_cct);
    let rate_up = p.n_f as f64 * (burst.ln() + p.beta_prime);
    if !(rate_up > 0.0) {
        return Err(VctsError::BelowActivation {
            u0: burst,
            level: (-p.beta_prime).exp(),
        });
    }
    let slope = (1.0 - p.eps) * c * rate_up / p.v;
    let t_p = (g_low / slope).clamp(f64::MIN_POSITIVE, p.frame_s);

    Ok(AsymptoticTerms {
        t_d,
        t_p,
        delay_order: burst * burst / log_term + p.v / p.mean_f,
        power_order: (burst / p.v + p.p_cct) * burst / log_term,
        area_overbound: 0.5 * (burst - l_delta) * t_d + p.frame_s * (l_star + l_delta),
    })
}

/// Delay and power bounds under i.i.d. bursts: expectations over the
/// arrival table, with the leftover taken at `B_max`.
pub fn random_arrival_bounds(arrival: &ArrivalModel, p: &VctsParams) -> Result<(f64, f64)> {
    let mean = arrival.mean_per_frame();
    if !(mean > 0.0) {
        return Err(VctsError::Invalid("arrival mean must be positive".into()));
    }
    let l_max = leftover_fixed_point(arrival.max_per_frame(), p.frame_s, p.beta, p.n_f, p.eps)?.value;
    let mut ju = 0.0;
    let mut jg = 0.0;
    for (b, prob) in arrival.atoms() {
        if prob == 0.0 {
            continue;
        }
        ju += prob * ju_upper(b + l_max, p)?;
        jg += prob * jg_lower(b, p)?;
    }
    Ok((ju / mean, jg / p.frame_s))
}

/// The full analytical report for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VctsBounds {
    pub arrivals: String,
    pub v: f64,
    pub beta: f64,
    pub beta_se: f64,
    pub beta_prime: f64,
    pub beta_prime_se: f64,
    pub mean_f: f64,
    pub mean_f_se: f64,
    pub leftover_fixed_point: f64,
    pub fixed_point_residual: f64,
    pub fixed_point_slope: f64,
    pub ju_upper: f64,
    pub jg_lower: f64,
    pub delay_upper: f64,
    pub power_lower: f64,
    pub asymptotic: Option<AsymptoticTerms>,
    pub notes: Vec<String>,
}

pub fn bounds(arrival: &ArrivalModel, p: &VctsParams) -> Result<VctsBounds> {
    let stats = p
        .stats
        .as_ref()
        .ok_or_else(|| VctsError::Invalid("bounds need CSIT statistics".into()))?;
    let mut notes = Vec::new();
    let (kind, l, ju, jg, delay, power, burst) = match arrival {
        ArrivalModel::Deterministic { per_frame } => {
            let b = *per_frame;
            let l = leftover_fixed_point(b, p.frame_s, p.beta, p.n_f, p.eps)?;
            let ju = ju_upper(b + l.value, p)?;
            let jg = jg_lower(b, p)?;
            ("deterministic", l, ju, jg, ju / b, jg / p.frame_s, b)
        }
        ArrivalModel::Iid { .. } => {
            let b_max = arrival.max_per_frame();
            let l = leftover_fixed_point(b_max, p.frame_s, p.beta, p.n_f, p.eps)?;
            let (delay, power) = random_arrival_bounds(arrival, p)?;
            let mean = arrival.mean_per_frame();
            ("iid", l, delay * mean, power * p.frame_s, delay, power, mean)
        }
    };
    if power == 0.0 {
        notes.push("DBP never activates at the period-start backlog; power bound is zero".into());
    }
    let asymptotic = match asymptotic_terms(burst, p) {
        Ok(a) => Some(a),
        Err(e) => {
            notes.push(format!("asymptotic terms unavailable: {e}"));
            None
        }
    };
    Ok(VctsBounds {
        arrivals: kind.into(),
        v: p.v,
        beta: p.beta,
        beta_se: stats.beta_se(),
        beta_prime: p.beta_prime,
        beta_prime_se: stats.beta_prime_se(p.v),
        mean_f: p.mean_f,
        mean_f_se: stats.mean_f_se(),
        leftover_fixed_point: l.value,
        fixed_point_residual: l.residual,
        fixed_point_slope: l.slope,
        ju_upper: ju,
        jg_lower: jg,
        delay_upper: delay,
        power_lower: power,
        asymptotic,
        notes,
    })
}
