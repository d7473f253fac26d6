//! Rate-control policies mapping the link state `(U, Ĥ)` to a rate and power.
//!
//! Policies see the CSIT only through its quality `f`; the simulator computes
//! `f` once per slot and hands it to whichever policy is running.

use serde::{Deserialize, Serialize};

use crate::phy::{self, PhyParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyConfig {
    Dbp { v: f64 },
    CsitOnly { v: f64 },
    NoCsit { rate: f64, power: f64 },
}

impl PolicyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Dbp { .. } => "dbp",
            Self::CsitOnly { .. } => "csit-only",
            Self::NoCsit { .. } => "no-csit",
        }
    }

    /// The value a sweep varies: `V` for the adaptive policies, the fixed
    /// transmit power for No-CSIT.
    pub fn sweep_param(&self) -> f64 {
        match *self {
            Self::Dbp { v } | Self::CsitOnly { v } => v,
            Self::NoCsit { power, .. } => power,
        }
    }

    pub fn with_sweep_param(self, x: f64) -> Self {
        match self {
            Self::Dbp { .. } => Self::Dbp { v: x },
            Self::CsitOnly { .. } => Self::CsitOnly { v: x },
            Self::NoCsit { rate, .. } => Self::NoCsit { rate, power: x },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Self::Dbp { v } | Self::CsitOnly { v } if !(v > 0.0 && v.is_finite()) => {
                Err(format!("tradeoff V must be positive, got {v}"))
            }
            Self::NoCsit { rate, power } if !(rate > 0.0 && rate.is_finite() && power > 0.0 && power.is_finite()) => {
                Err(format!("no-csit rate and power must be positive, got ({rate}, {power})"))
            }
            _ => Ok(()),
        }
    }
}

/// One slot's scheduling decision. `power` includes circuit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub rate: f64,
    pub tx_power: f64,
    pub power: f64,
}

impl Decision {
    pub const IDLE: Decision = Decision {
        rate: 0.0,
        tx_power: 0.0,
        power: 0.0,
    };

    pub fn is_active(&self) -> bool {
        self.rate > 0.0
    }
}

/// A rate-control rule. `f` is the CSIT quality of the current slot.
pub trait RateControl: Sync {
    fn decide(&self, backlog: f64, f: f64, phy: &PhyParams) -> Decision;

    /// Whether the rule adapts to the CSIT. Fixed-rate rules have no
    /// CSIT-derived error guarantee.
    fn uses_csit(&self) -> bool {
        true
    }
}

impl RateControl for PolicyConfig {
    fn decide(&self, backlog: f64, f: f64, phy: &PhyParams) -> Decision {
        if backlog <= 0.0 {
            return Decision::IDLE;
        }
        match *self {
            Self::Dbp { v } => adaptive(dbp_rate(backlog, f, v, phy), f, phy),
            Self::CsitOnly { v } => adaptive(csit_only_rate(f, v, phy), f, phy),
            Self::NoCsit { rate, power } => Decision {
                rate,
                tx_power: power,
                power: power + phy.circuit_power(),
            },
        }
    }

    fn uses_csit(&self) -> bool {
        !matches!(self, Self::NoCsit { .. })
    }
}

fn adaptive(rate: f64, f: f64, phy: &PhyParams) -> Decision {
    if rate <= 0.0 {
        return Decision::IDLE;
    }
    let tx = phy::tx_power(rate, f, phy.n_f());
    Decision {
        rate,
        tx_power: tx,
        power: tx + phy.circuit_power(),
    }
}

/// Per-slot drift-minus-penalty objective `U r (1−ε) Δt − V g(r) Δt`.
pub fn dbp_objective(rate: f64, backlog: f64, v: f64, f: f64, phy: &PhyParams, dt: f64) -> f64 {
    backlog * rate * (1.0 - phy.target_per()) * dt - v * phy::total_power(rate, f, phy) * dt
}

/// `n_F [ln(U (1−ε) f / V)]⁺`.
pub fn dbp_rate(backlog: f64, f: f64, v: f64, phy: &PhyParams) -> f64 {
    if backlog <= 0.0 {
        return 0.0;
    }
    let level = (backlog * (1.0 - phy.target_per()) * f / v).ln();
    phy.n_f() as f64 * level.max(0.0)
}

/// Water-filling form of the DBP power: `U(1−ε)n_F/V − n_F/f + P_cct` above
/// the activation level, zero below it.
pub fn dbp_power(backlog: f64, f: f64, v: f64, phy: &PhyParams) -> f64 {
    let n = phy.n_f() as f64;
    let water = backlog * (1.0 - phy.target_per()) * n / v;
    let floor = n / f;
    if water > floor {
        water - floor + phy.circuit_power()
    } else {
        0.0
    }
}

/// `n_F [ln((1−ε) f / V)]⁺`, independent of the backlog.
pub fn csit_only_rate(f: f64, v: f64, phy: &PhyParams) -> f64 {
    let level = ((1.0 - phy.target_per()) * f / v).ln();
    phy.n_f() as f64 * level.max(0.0)
}

/// The configured `(rate, power)` while there is something to send.
pub fn no_csit(rate: f64, power: f64, backlog: f64) -> (f64, f64) {
    if backlog > 0.0 {
        (rate, power)
    } else {
        (0.0, 0.0)
    }
}
