//! Run configuration: a TOML file with dotted sections, validated into a
//! [`SystemConfig`]. Validation reports every violation with its key path.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{CsitErrorModel, CsitLaw, PowerDelayProfile};
use crate::phy::PhyParams;
use crate::policies::PolicyConfig;
use crate::queueing::ArrivalModel;
use crate::sim::{DriftSettings, ErrorModel, Scenario};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{} invalid setting(s):\n  {}", .0.len(), .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalUnits {
    NatsPerSlot,
    NatsPerSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CsitSource {
    Direct { sigma_e2: f64 },
    Pilot { pilot_snr: f64, doppler_hz: f64, duplex_delay_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSettings {
    pub slots: u64,
    pub seed: u64,
    pub warmup_fraction: f64,
    pub expectation_samples: usize,
    pub expectation_seed: u64,
    pub parallel: usize,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub n_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub n_taps: usize,
    pub slot_s: f64,
    pub frame_s: f64,
    pub slots_per_frame: u64,
    pub target_per: f64,
    pub circuit_power: f64,
    pub profile: PowerDelayProfile,
    pub csit_source: CsitSource,
    pub csit_error: CsitErrorModel,
    pub csit_law: CsitLaw,
    pub arrival_units: ArrivalUnits,
    /// Per-frame burst law in nats.
    pub arrival: ArrivalModel,
    pub policy: PolicyConfig,
    pub rate_margin: f64,
    pub sweep_values: Vec<f64>,
    pub error_model: ErrorModel,
    pub mc: MonteCarloSettings,
    pub drift: DriftSettings,
    pub l_delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    link: RawLink,
    #[serde(default)]
    csit: RawCsit,
    #[serde(default)]
    arrival: RawArrival,
    #[serde(default)]
    policy: RawPolicy,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    phy: RawPhy,
    #[serde(default)]
    mc: RawMc,
    #[serde(default)]
    drift: RawDrift,
    #[serde(default)]
    analysis: RawAnalysis,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    n_subcarriers: Option<i64>,
    bandwidth_hz: Option<f64>,
    n_taps: Option<i64>,
    slot_s: Option<f64>,
    frame_s: Option<f64>,
    target_per: Option<f64>,
    circuit_power: Option<f64>,
    power_delay_profile: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCsit {
    law: Option<String>,
    sigma_e2: Option<f64>,
    pilot_snr: Option<f64>,
    doppler_hz: Option<f64>,
    duplex_delay_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArrival {
    kind: Option<String>,
    units: Option<String>,
    mean: Option<f64>,
    values: Option<Vec<f64>>,
    probs: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    kind: Option<String>,
    v: Option<f64>,
    fixed_rate: Option<f64>,
    fixed_power: Option<f64>,
    rate_margin: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    values: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhy {
    error_model: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMc {
    slots: Option<i64>,
    seed: Option<i64>,
    warmup_fraction: Option<f64>,
    expectation_samples: Option<i64>,
    expectation_seed: Option<i64>,
    parallel: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrift {
    bins: Option<i64>,
    arrival_cap: Option<f64>,
    service_cap: Option<f64>,
    min_samples: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    l_delta: Option<f64>,
}

struct Checker(Vec<Violation>);

impl Checker {
    fn fail(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(Violation {
            key: key.into(),
            message: message.into(),
        });
    }

    fn positive(&mut self, key: &str, v: f64) -> f64 {
        if !(v > 0.0 && v.is_finite()) {
            self.fail(key, format!("must be a positive number, got {v}"));
        }
        v
    }

    fn nonneg(&mut self, key: &str, v: f64) -> f64 {
        if !(v >= 0.0 && v.is_finite()) {
            self.fail(key, format!("must be >= 0, got {v}"));
        }
        v
    }

    fn count(&mut self, key: &str, v: i64, min: i64) -> u64 {
        if v < min {
            self.fail(key, format!("must be an integer >= {min}, got {v}"));
            return min.max(0) as u64;
        }
        v as u64
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl SystemConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
            ConfigError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        validate(raw)
    }

    pub fn phy(&self) -> PhyParams {
        PhyParams::new(
            self.n_subcarriers,
            self.n_taps,
            self.target_per,
            self.csit_error.sigma_e2(),
            self.circuit_power,
        )
        .unwrap_or_else(|e| unreachable!("validated config produced bad PHY parameters: {e}"))
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            phy: self.phy(),
            profile: self.profile.clone(),
            csit_error: self.csit_error.clone(),
            csit_law: self.csit_law,
            arrival: self.arrival.clone(),
            dt: self.slot_s,
            slots_per_frame: self.slots_per_frame,
            error_model: self.error_model,
            warmup_fraction: self.mc.warmup_fraction,
            min_warmup: 1000,
            expectation_samples: self.mc.expectation_samples,
            expectation_seed: self.mc.expectation_seed,
            l_delta: self.l_delta,
        }
    }

    /// `B̄` in nats/s.
    pub fn arrival_rate(&self) -> f64 {
        self.arrival.mean_per_frame() / self.frame_s
    }
}

fn validate(raw: RawConfig) -> Result<SystemConfig, ConfigError> {
    let mut c = Checker(Vec::new());

    let link = raw.link;
    let n_subcarriers = c.count("link.n_subcarriers", link.n_subcarriers.unwrap_or(1024), 1) as usize;
    if !n_subcarriers.is_power_of_two() {
        c.fail("link.n_subcarriers", format!("must be a power of two, got {n_subcarriers}"));
    }
    let bandwidth_hz = c.positive("link.bandwidth_hz", link.bandwidth_hz.unwrap_or(10e6));
    let n_taps = c.count("link.n_taps", link.n_taps.unwrap_or(16), 1) as usize;
    if n_taps > 0 && n_subcarriers % n_taps != 0 {
        c.fail("link.n_taps", format!("must divide n_subcarriers ({n_subcarriers}), got {n_taps}"));
    }
    let slot_s = c.positive("link.slot_s", link.slot_s.unwrap_or(0.005));
    let frame_s = c.positive("link.frame_s", link.frame_s.unwrap_or(0.1));
    let ratio = frame_s / slot_s;
    let slots_per_frame = ratio.round().max(1.0) as u64;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
        c.fail("link.frame_s", format!("frame must be integer slots (frame_s / slot_s = {ratio})"));
    }
    let target_per = link.target_per.unwrap_or(0.01);
    if !(target_per > 0.0 && target_per < 1.0) {
        c.fail("link.target_per", format!("must lie in (0, 1), got {target_per}"));
    }
    let circuit_power = c.nonneg("link.circuit_power", link.circuit_power.unwrap_or(0.0));
    let profile = match link.power_delay_profile {
        None => PowerDelayProfile::uniform(n_taps.max(1)),
        Some(v) => {
            if v.len() != n_taps {
                c.fail("link.power_delay_profile", format!("needs {n_taps} entries, got {}", v.len()));
            }
            PowerDelayProfile::new(v).unwrap_or_else(|e| {
                c.fail("link.power_delay_profile", e.to_string());
                PowerDelayProfile::uniform(n_taps.max(1))
            })
        }
    };

    let csit = raw.csit;
    let pilot = (csit.pilot_snr, csit.doppler_hz, csit.duplex_delay_s);
    let (csit_source, csit_error) = match (csit.sigma_e2, pilot) {
        (Some(_), (Some(_), _, _) | (_, Some(_), _) | (_, _, Some(_))) => {
            c.fail("csit", "give either sigma_e2 or the pilot settings, not both");
            (CsitSource::Direct { sigma_e2: 0.05 }, CsitErrorModel::uniform(0.05, n_taps.max(1)).ok())
        }
        (sigma, (None, None, None)) => {
            let s = c.positive("csit.sigma_e2", sigma.unwrap_or(0.05));
            (CsitSource::Direct { sigma_e2: s }, CsitErrorModel::uniform(s, n_taps.max(1)).ok())
        }
        (None, (snr, doppler, delay)) => {
            let snr = c.positive("csit.pilot_snr", snr.unwrap_or(f64::NAN));
            let doppler = c.nonneg("csit.doppler_hz", doppler.unwrap_or(0.0));
            let delay = c.nonneg("csit.duplex_delay_s", delay.unwrap_or(0.0));
            let model = CsitErrorModel::from_pilot(snr, doppler, delay, &profile).ok();
            (
                CsitSource::Pilot {
                    pilot_snr: snr,
                    doppler_hz: doppler,
                    duplex_delay_s: delay,
                },
                model,
            )
        }
    };
    let csit_error = match csit_error {
        Some(m) if m.sigma_e2() > 0.0 => m,
        _ => {
            c.fail("csit", "CSIT error variance must be positive");
            CsitErrorModel::uniform(0.05, n_taps.max(1)).unwrap_or_else(|e| unreachable!("{e}"))
        }
    };

    let csit_law = match csit.law.as_deref().unwrap_or("mmse") {
        "mmse" => CsitLaw::Mmse,
        "additive" => CsitLaw::Additive,
        other => {
            c.fail("csit.law", format!("expected mmse or additive, got {other:?}"));
            CsitLaw::Mmse
        }
    };
    if csit_law == CsitLaw::Mmse {
        let over = csit_error.per_tap().iter().zip(profile.tap_variances()).any(|(e, v)| e > v);
        if over {
            c.fail("csit", "error variance exceeds a tap variance; the mmse law needs σ_e²/N_d ≤ σ_l² per tap");
        }
    }

    let arr = raw.arrival;
    let arrival_units = match arr.units.as_deref().unwrap_or("nats_per_second") {
        "nats_per_slot" => ArrivalUnits::NatsPerSlot,
        "nats_per_second" => ArrivalUnits::NatsPerSecond,
        other => {
            c.fail("arrival.units", format!("expected nats_per_slot or nats_per_second, got {other:?}"));
            ArrivalUnits::NatsPerSecond
        }
    };
    let to_frame = match arrival_units {
        ArrivalUnits::NatsPerSlot => slots_per_frame as f64,
        ArrivalUnits::NatsPerSecond => frame_s,
    };
    let arrival = match arr.kind.as_deref().unwrap_or("deterministic") {
        "deterministic" => {
            if arr.values.is_some() || arr.probs.is_some() {
                c.fail("arrival.values", "only iid arrivals take a value table");
            }
            let mean = c.positive("arrival.mean", arr.mean.unwrap_or(f64::NAN));
            ArrivalModel::deterministic(mean * to_frame).ok()
        }
        "iid" => {
            if arr.mean.is_some() {
                c.fail("arrival.mean", "iid arrivals take values and probs, not mean");
            }
            match (arr.values, arr.probs) {
                (Some(v), Some(p)) => {
                    let v: Vec<f64> = v.into_iter().map(|x| x * to_frame).collect();
                    match ArrivalModel::iid(v, p) {
                        Ok(m) if m.mean_per_frame() > 0.0 => Some(m),
                        Ok(_) => {
                            c.fail("arrival.values", "mean arrival must be positive");
                            None
                        }
                        Err(e) => {
                            c.fail("arrival.values", e.to_string());
                            None
                        }
                    }
                }
                _ => {
                    c.fail("arrival.values", "iid arrivals need both values and probs");
                    None
                }
            }
        }
        other => {
            c.fail("arrival.kind", format!("expected deterministic or iid, got {other:?}"));
            None
        }
    };
    let arrival = arrival.unwrap_or(ArrivalModel::Deterministic { per_frame: 1.0 });
    let arrival_rate = arrival.mean_per_frame() / frame_s;

    let pol = raw.policy;
    let rate_margin = c.positive("policy.rate_margin", pol.rate_margin.unwrap_or(1.5));
    let policy = match pol.kind.as_deref().unwrap_or("dbp") {
        kind @ ("dbp" | "csit-only") => {
            if pol.fixed_rate.is_some() || pol.fixed_power.is_some() {
                c.fail("policy", format!("{kind} takes v, not fixed_rate/fixed_power"));
            }
            let v = c.positive("policy.v", pol.v.unwrap_or(1.0));
            if kind == "dbp" {
                PolicyConfig::Dbp { v }
            } else {
                PolicyConfig::CsitOnly { v }
            }
        }
        "no-csit" => {
            if pol.v.is_some() {
                c.fail("policy.v", "no-csit takes fixed_rate/fixed_power, not v");
            }
            let rate = c.positive("policy.fixed_rate", pol.fixed_rate.unwrap_or(rate_margin * arrival_rate));
            let power = c.positive("policy.fixed_power", pol.fixed_power.unwrap_or(f64::NAN));
            PolicyConfig::NoCsit { rate, power }
        }
        other => {
            c.fail("policy.kind", format!("expected dbp, csit-only or no-csit, got {other:?}"));
            PolicyConfig::Dbp { v: 1.0 }
        }
    };

    let sweep_values = raw.sweep.values.unwrap_or_else(|| vec![1.0, 2.0, 4.0, 6.0, 10.0, 15.0, 25.0, 40.0]);
    if sweep_values.is_empty() {
        c.fail("sweep.values", "must not be empty");
    }
    for (i, v) in sweep_values.iter().enumerate() {
        c.positive(&format!("sweep.values[{i}]"), *v);
    }

    let error_model = match raw.phy.error_model.as_deref().unwrap_or("outage") {
        "outage" => ErrorModel::Outage,
        "nominal" => ErrorModel::Nominal,
        other => {
            c.fail("phy.error_model", format!("expected outage or nominal, got {other:?}"));
            ErrorModel::Outage
        }
    };

    let mc = raw.mc;
    let slots = c.count("mc.slots", mc.slots.unwrap_or(1_000_000), 1);
    let seed = c.count("mc.seed", mc.seed.unwrap_or(1), 0);
    let warmup_fraction = mc.warmup_fraction.unwrap_or(0.1);
    if !(0.0..1.0).contains(&warmup_fraction) {
        c.fail("mc.warmup_fraction", format!("must lie in [0, 1), got {warmup_fraction}"));
    }
    let expectation_samples = c.count("mc.expectation_samples", mc.expectation_samples.unwrap_or(100_000), 10_000) as usize;
    let expectation_seed = c.count("mc.expectation_seed", mc.expectation_seed.unwrap_or(0x5eed), 0);
    let parallel = c.count("mc.parallel", mc.parallel.unwrap_or(1), 1) as usize;
    let warmup = ((slots as f64 * warmup_fraction).ceil() as u64).max(1000);
    if slots <= warmup {
        c.fail("mc.slots", format!("must exceed the {warmup}-slot warm-up"));
    }

    let drift = DriftSettings {
        bins: c.count("drift.bins", raw.drift.bins.unwrap_or(10), 1) as usize,
        arrival_cap: c.positive("drift.arrival_cap", raw.drift.arrival_cap.unwrap_or(arrival.max_per_frame())),
        service_cap: c.positive(
            "drift.service_cap",
            raw.drift.service_cap.unwrap_or(4.0 * arrival.max_per_frame().max(f64::MIN_POSITIVE)),
        ),
        min_samples: c.count("drift.min_samples", raw.drift.min_samples.unwrap_or(50), 2) as usize,
    };

    let l_delta = raw.analysis.l_delta.map(|v| c.positive("analysis.l_delta", v));

    if !c.0.is_empty() {
        return Err(ConfigError::Invalid(c.0));
    }
    Ok(SystemConfig {
        n_subcarriers,
        bandwidth_hz,
        n_taps,
        slot_s,
        frame_s,
        slots_per_frame,
        target_per,
        circuit_power,
        profile,
        csit_source,
        csit_error,
        csit_law,
        arrival_units,
        arrival,
        policy,
        rate_margin,
        sweep_values,
        error_model,
        mc: MonteCarloSettings {
            slots,
            seed,
            warmup_fraction,
            expectation_samples,
            expectation_seed,
            parallel,
        },
        drift,
        l_delta,
    })
}
