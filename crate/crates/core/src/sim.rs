//! Slot-level Monte Carlo: channel draw, policy decision, outage, queue update.

use std::collections::VecDeque;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelError, CsitErrorModel, CsitLaw, PowerDelayProfile};
use crate::phy::{self, PhyError, PhyParams};
use crate::policies::{Decision, PolicyConfig, RateControl};
use crate::queueing::{ArrivalModel, QueueError, QueueState};
use crate::vcts::{self, CsitStatistics, VctsBounds, VctsParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error("invalid run: {0}")]
    Invalid(String),
    #[error("backlog {backlog:.3e} nats at slot {slot} exceeds the stability watchdog; arrivals are outside the stability region")]
    Unstable { slot: u64, backlog: f64 },
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

/// How a transmitting slot's packet error is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorModel {
    /// Rate above the realized mutual information of a true channel drawn
    /// given the CSIT.
    #[default]
    Outage,
    /// An independent error with the target probability for CSIT-adaptive
    /// policies; fixed-rate policies still use the outage rule.
    Nominal,
}

/// Everything about the link except the policy.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub phy: PhyParams,
    pub profile: PowerDelayProfile,
    pub csit_error: CsitErrorModel,
    pub csit_law: CsitLaw,
    /// Per-frame burst law in nats.
    pub arrival: ArrivalModel,
    pub dt: f64,
    pub slots_per_frame: u64,
    pub error_model: ErrorModel,
    pub warmup_fraction: f64,
    pub min_warmup: u64,
    pub expectation_samples: usize,
    pub expectation_seed: u64,
    /// Overrides the default `L_Δ = e^{−β}` in the asymptotic terms.
    pub l_delta: Option<f64>,
}

impl Scenario {
    pub fn frame_s(&self) -> f64 {
        self.dt * self.slots_per_frame as f64
    }

    /// `B̄` in nats/s.
    pub fn arrival_rate(&self) -> f64 {
        self.arrival.mean_per_frame() / self.frame_s()
    }

    pub fn warmup_slots(&self, n_slots: u64) -> u64 {
        ((n_slots as f64 * self.warmup_fraction).ceil() as u64).max(self.min_warmup)
    }

    /// CSIT statistics for the analytical side, memoized.
    pub fn csit_statistics(&self) -> Result<std::sync::Arc<CsitStatistics>, vcts::VctsError> {
        CsitStatistics::cached(&self.phy, &self.profile, &self.csit_error, self.csit_law, self.expectation_samples, self.expectation_seed)
    }

    pub fn vcts_params(&self, v: f64) -> Result<VctsParams, vcts::VctsError> {
        let mut p = VctsParams::new(self.csit_statistics()?, v, self.phy.circuit_power(), self.frame_s())?;
        p.l_delta = self.l_delta;
        Ok(p)
    }

    pub fn bounds(&self, v: f64) -> Result<VctsBounds, vcts::VctsError> {
        vcts::bounds(&self.arrival, &self.vcts_params(v)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub avg_backlog: f64,
    /// Little's-law delay in seconds.
    pub avg_delay: f64,
    /// Per-nat FIFO sojourn time over nats that arrived after warm-up.
    pub fifo_delay: f64,
    pub avg_power: f64,
    pub conditional_per: f64,
    pub transmit_slots: u64,
    pub errors: u64,
    pub bursts: u64,
    pub slots_simulated: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    pub arrived: f64,
    pub served: f64,
    pub final_backlog: f64,
    pub trend_warning: bool,
}

/// One slot as seen by the engine.
#[derive(Debug, Clone, Copy)]
struct SlotSample {
    backlog: f64,
    decision: Decision,
    error: bool,
    arrival: Option<f64>,
    served: f64,
    next_backlog: f64,
    /// Service the reference policy would have delivered this slot.
    reference_service: Option<f64>,
}

struct Engine<'a> {
    sc: &'a Scenario,
    ib: Vec<usize>,
    rng: ChaCha8Rng,
    queue: QueueState,
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario, seed: u64) -> Result<Self, SimError> {
        Ok(Self {
            sc,
            ib: channel::independent_subcarrier_set(sc.phy.n_f(), sc.phy.n_d())?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: QueueState::new(0.0, sc.slots_per_frame)?,
        })
    }

    fn error_for(&mut self, d: &Decision, adaptive: bool, truth: &mut Option<Vec<Complex64>>, csit_taps: &[Complex64], u: f64) -> Result<bool, SimError> {
        if !d.is_active() {
            return Ok(false);
        }
        if adaptive && self.sc.error_model == ErrorModel::Nominal {
            return Ok(u < self.sc.phy.target_per());
        }
        if truth.is_none() {
            // the additive law's generating channel is not conditioned on the CSIT
            *truth = Some(channel::sample_true_given_csit(csit_taps, &self.sc.csit_error, self.sc.phy.n_f(), &mut self.rng)?);
        }
        let h = truth.as_deref().unwrap_or_default();
        Ok(phy::packet_error(d.rate, h, d.tx_power, self.sc.phy.n_f()))
    }

    fn step<P: RateControl + ?Sized>(&mut self, policy: &P, reference: Option<&PolicyConfig>) -> Result<SlotSample, SimError> {
        let sc = self.sc;
        let n_f = sc.phy.n_f();
        let draw = channel::sample_link(&sc.profile, &sc.csit_error, sc.csit_law, n_f, &mut self.rng)?;
        let needs_f = policy.uses_csit() || reference.is_some();
        let f = if needs_f {
            phy::f_quality(&sc.phy, &draw.freq_csit, &self.ib)?
        } else {
            f64::NAN
        };
        let u = self.queue.backlog();
        let decision = policy.decide(u, f, &sc.phy);
        let coin: f64 = self.rng.random();
        let mut truth = match sc.csit_law {
            CsitLaw::Mmse => Some(draw.freq_true),
            CsitLaw::Additive => None,
        };
        let error = self.error_for(&decision, policy.uses_csit(), &mut truth, &draw.csit_taps, coin)?;
        let reference_service = match reference {
            Some(r) => {
                let d = r.decide(u, f, &sc.phy);
                let e = self.error_for(&d, true, &mut truth, &draw.csit_taps, coin)?;
                Some(if e { 0.0 } else { d.rate * sc.dt })
            }
            None => None,
        };
        let arrival = if self.queue.is_frame_boundary() {
            Some(sc.arrival.sample(&mut self.rng))
        } else {
            None
        };
        let out = self.queue.step(decision.rate, error, sc.dt, arrival)?;
        Ok(SlotSample {
            backlog: u,
            decision,
            error,
            arrival,
            served: out.served,
            next_backlog: self.queue.backlog(),
            reference_service,
        })
    }
}

/// Simulates `n_slots` slots of `policy` on `sc`.
pub fn run<P: RateControl + ?Sized>(sc: &Scenario, policy: &P, n_slots: u64, seed: u64) -> Result<SimStats, SimError> {
    let warmup = sc.warmup_slots(n_slots);
    if n_slots <= warmup {
        return Err(SimError::Invalid(format!("{n_slots} slots do not exceed the {warmup}-slot warm-up")));
    }
    let mut engine = Engine::new(sc, seed)?;
    let watchdog = 1e6 * sc.arrival.mean_per_frame().max(f64::MIN_POSITIVE);
    let measured = n_slots - warmup;

    let mut backlog_sum = 0.0;
    let mut half_sums = [0.0; 2];
    let mut power_sum = 0.0;
    let (mut tx_slots, mut errors, mut bursts) = (0u64, 0u64, 0u64);
    let (mut arrived, mut served) = (0.0, 0.0);
    let mut was_active = false;
    // FIFO bookkeeping: (arrival slot, nats remaining, counted)
    let mut fifo: VecDeque<(u64, f64, bool)> = VecDeque::new();
    let (mut fifo_wait, mut fifo_nats) = (0.0, 0.0);

    for k in 0..n_slots {
        let s = engine.step(policy, None)?;
        arrived += s.arrival.unwrap_or(0.0);
        served += s.served;

        let mut left = s.served;
        while left > 0.0 {
            let Some(front) = fifo.front_mut() else { break };
            let take = left.min(front.1);
            if front.2 {
                fifo_wait += take * (k - front.0) as f64 * sc.dt;
                fifo_nats += take;
            }
            front.1 -= take;
            left -= take;
            if front.1 <= 1e-12 * (1.0 + take) {
                fifo.pop_front();
            }
        }
        if let Some(a) = s.arrival.filter(|a| *a > 0.0) {
            fifo.push_back((k, a, k >= warmup));
        }

        if k >= warmup {
            backlog_sum += s.backlog;
            half_sums[usize::from(k - warmup >= measured / 2)] += s.backlog;
            power_sum += s.decision.power;
            let active = s.decision.is_active();
            if active {
                tx_slots += 1;
                errors += u64::from(s.error);
                if !was_active {
                    bursts += 1;
                }
            }
            was_active = active;
        }
        if s.next_backlog > watchdog {
            return Err(SimError::Unstable {
                slot: k,
                backlog: s.next_backlog,
            });
        }
    }

    let avg_backlog = backlog_sum / measured as f64;
    let rate = sc.arrival_rate();
    let first = half_sums[0] / (measured / 2).max(1) as f64;
    let second = half_sums[1] / (measured - measured / 2).max(1) as f64;
    let trend_warning = second > 2.0 * first && second > sc.arrival.mean_per_frame();
    if trend_warning {
        log::warn!("backlog grew from {first:.3e} to {second:.3e} over the run; arrivals may exceed the service capacity");
    }
    Ok(SimStats {
        avg_backlog,
        avg_delay: if rate > 0.0 { avg_backlog / rate } else { 0.0 },
        fifo_delay: if fifo_nats > 0.0 { fifo_wait / fifo_nats } else { 0.0 },
        avg_power: power_sum / measured as f64,
        conditional_per: if tx_slots > 0 { errors as f64 / tx_slots as f64 } else { 0.0 },
        transmit_slots: tx_slots,
        errors,
        bursts,
        slots_simulated: n_slots,
        warmup_slots: warmup,
        seed,
        arrived,
        served,
        final_backlog: engine.queue.backlog(),
        trend_warning,
    })
}

/// Counter-based seed splitter (splitmix64 finalizer over base and index).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One operating point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub policy: String,
    pub sweep_param: f64,
    pub sigma_e2: f64,
    pub p_cct: f64,
    pub stats: SimStats,
    pub bounds: Option<VctsBounds>,
    pub config_hash: u64,
}

/// A sweep point that failed, kept so the rest of the sweep can proceed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFailure {
    pub sweep_param: f64,
    pub error: SimError,
}

fn fnv1a(text: &str) -> u64 {
    text.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub fn config_hash(sc: &Scenario, policy: &PolicyConfig) -> u64 {
    fnv1a(&format!(
        "{:?}|{:?}|{:?}|{:?}|{:?}|{}|{}|{:?}|{:?}",
        sc.phy, sc.profile, sc.csit_error, sc.csit_law, sc.arrival, sc.dt, sc.slots_per_frame, sc.error_model, policy
    ))
}

/// Runs one point and, for DBP, attaches the matching bounds.
pub fn run_point(sc: &Scenario, policy: PolicyConfig, n_slots: u64, seed: u64) -> Result<TradeoffPoint, SimError> {
    policy.validate().map_err(SimError::Invalid)?;
    let stats = run(sc, &policy, n_slots, seed)?;
    let bounds = match policy {
        PolicyConfig::Dbp { v } => match sc.bounds(v) {
            Ok(b) => Some(b),
            Err(e) => {
                log::warn!("no bounds for V = {v}: {e}");
                None
            }
        },
        _ => None,
    };
    Ok(TradeoffPoint {
        policy: policy.name().into(),
        sweep_param: policy.sweep_param(),
        sigma_e2: sc.csit_error.sigma_e2(),
        p_cct: sc.phy.circuit_power(),
        stats,
        bounds,
        config_hash: config_hash(sc, &policy),
    })
}

/// Runs `family` at each of `values` with decorrelated seeds on
/// `parallelism` worker threads. Output order follows `values`.
pub fn sweep(
    sc: &Scenario,
    family: PolicyConfig,
    values: &[f64],
    n_slots: u64,
    base_seed: u64,
    parallelism: usize,
) -> Result<Vec<Result<TradeoffPoint, PointFailure>>, SimError> {
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(SimError::Invalid("sweep values must be positive".into()));
    }
    // bounds share one CSIT sample; build it once before fanning out
    if matches!(family, PolicyConfig::Dbp { .. }) {
        if let Err(e) = sc.csit_statistics() {
            log::warn!("CSIT statistics unavailable: {e}");
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    Ok(pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                run_point(sc, family.with_sweep_param(x), n_slots, derive_seed(base_seed, i as u64)).map_err(|error| {
                    log::warn!("sweep point {x} failed: {error}");
                    PointFailure { sweep_param: x, error }
                })
            })
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSettings {
    pub bins: usize,
    /// `A_max` in nats per slot.
    pub arrival_cap: f64,
    /// `R_max` in nats per slot.
    pub service_cap: f64,
    pub min_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftBin {
    pub backlog_lo: f64,
    pub backlog_hi: f64,
    pub samples: usize,
    pub mean_drift: f64,
    pub mean_rhs: f64,
    /// Standard error of the per-sample excess `ΔL − RHS`.
    pub se: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub bins: Vec<DriftBin>,
    pub sparse_bins: usize,
    pub passed: bool,
}

/// Empirical one-slot drift of `L(U) = U²/2` under `policy`, binned by `U`,
/// against `(A_max² + R_max²)/2 − U·(S − A)` where `S` is the service the
/// reference DBP rule would have delivered in the same slot.
pub fn drift_check<P: RateControl + ?Sized>(
    sc: &Scenario,
    policy: &P,
    reference_v: f64,
    n_slots: u64,
    seed: u64,
    settings: &DriftSettings,
) -> Result<DriftReport, SimError> {
    if settings.bins == 0 {
        return Err(SimError::Invalid("drift check needs at least one bin".into()));
    }
    if sc.arrival.max_per_frame() > settings.arrival_cap {
        return Err(SimError::Invalid(format!(
            "arrival support {} exceeds A_max {}",
            sc.arrival.max_per_frame(),
            settings.arrival_cap
        )));
    }
    let reference = PolicyConfig::Dbp { v: reference_v };
    let mut engine = Engine::new(sc, seed)?;
    let c = 0.5 * (settings.arrival_cap.powi(2) + settings.service_cap.powi(2));
    let mut samples: Vec<(f64, f64, f64)> = Vec::with_capacity(n_slots as usize);
    for _ in 0..n_slots {
        let s = engine.step(policy, Some(&reference))?;
        let u = s.backlog;
        let a = s.arrival.unwrap_or(0.0);
        let service = s.reference_service.unwrap_or(0.0).min(settings.service_cap);
        let drift = 0.5 * (s.next_backlog * s.next_backlog - u * u);
        samples.push((u, drift, c - u * (service - a)));
        if s.next_backlog > 1e6 * sc.arrival.mean_per_frame().max(1.0) {
            break;
        }
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let per_bin = samples.len().div_ceil(settings.bins).max(1);
    let mut bins = Vec::new();
    let mut sparse = 0;
    for chunk in samples.chunks(per_bin) {
        let n = chunk.len() as f64;
        let mean_drift = chunk.iter().map(|s| s.1).sum::<f64>() / n;
        let mean_rhs = chunk.iter().map(|s| s.2).sum::<f64>() / n;
        let excess = mean_drift - mean_rhs;
        let var = if chunk.len() > 1 {
            chunk.iter().map(|s| (s.1 - s.2 - excess).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let se = (var / n).sqrt();
        let enough = chunk.len() >= settings.min_samples;
        if !enough {
            sparse += 1;
        }
        bins.push(DriftBin {
            backlog_lo: chunk[0].0,
            backlog_hi: chunk[chunk.len() - 1].0,
            samples: chunk.len(),
            mean_drift,
            mean_rhs,
            se,
            passes: !enough || excess <= 3.0 * se,
        });
    }
    let passed = bins.iter().all(|b| b.passes);
    Ok(DriftReport {
        bins,
        sparse_bins: sparse,
        passed,
    })
}
