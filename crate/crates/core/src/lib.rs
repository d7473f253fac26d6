//! Simulation and analysis toolkit for dynamic-backpressure rate and power
//! control on an OFDM link with imperfect CSIT.
//!
//! The crate has two halves that are meant to be compared against each other:
//!
//! * a slot-level Monte Carlo engine ([`sim`]) that composes the channel
//!   model ([`channel`]), the outage PHY ([`phy`]), the queue ([`queueing`])
//!   and a rate-control policy ([`policies`]);
//! * the virtual continuous-time analysis ([`vcts`]) that yields closed-form
//!   delay and power bounds built on the exponential integral ([`specfun`]).
//!
//! ```
//! use ofdm_dbp::specfun::{ei, ei_inv};
//!
//! let x = ei_inv(5.0).unwrap();
//! assert!((ei(x).unwrap() - 5.0).abs() < 1e-9);
//! ```

pub mod channel;
pub mod config;
pub mod export;
pub mod phy;
pub mod policies;
pub mod queueing;
pub mod selftest;
pub mod sim;
pub mod specfun;
pub mod vcts;

use thiserror::Error;

/// Top-level error, grouped the way the CLI maps them to exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Specfun(#[from] specfun::SpecfunError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Phy(#[from] phy::PhyError),
    #[error(transparent)]
    Queue(#[from] queueing::QueueError),
    #[error(transparent)]
    Vcts(#[from] vcts::VctsError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Export(#[from] export::ExportError),
}

impl Error {
    /// True when the failure comes from leaving a parameter regime in which
    /// the analysis is defined, as opposed to bad input or I/O.
    pub fn is_numerical_regime(&self) -> bool {
        match self {
            Error::Specfun(_) => true,
            Error::Phy(phy::PhyError::Specfun(_)) => true,
            Error::Vcts(e) => e.is_regime(),
            Error::Sim(sim::SimError::Unstable { .. }) => true,
            _ => false,
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/special-functions.md")]
    mod special_functions {}
    #[doc = include_str!("../../../book/src/channel-and-phy.md")]
    mod channel_and_phy {}
    #[doc = include_str!("../../../book/src/policies.md")]
    mod policies {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
