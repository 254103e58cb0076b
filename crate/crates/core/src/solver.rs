//! Name-based registry of every solver configuration.

use std::fmt;
use std::str::FromStr;

use crate::asymptotic::{
    admm_solve, dykstra_solve, hildreth_solve, lsps_solve, uzawa_solve, AdmmOptions, LspsOptions,
};
use crate::cone::ConeSystem;
use crate::error::{Error, Result};
use crate::finite::{block_active_set_solve, critical_index_solve, meyer_solve, mpdb_solve, Init};
use crate::signal::Signal;
use crate::trace::{IterControl, SolverTrace};

/// A solver together with its default start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverId {
    Hildreth,
    Dykstra,
    Lsps,
    Uzawa,
    Admm,
    Mpdb,
    MpdbPav,
    MeyerEmpty,
    MeyerFull,
    MeyerPav,
    CriticalIndex,
    Block,
}

impl SolverId {
    pub const ALL: [SolverId; 12] = [
        Self::Hildreth,
        Self::Dykstra,
        Self::Lsps,
        Self::Uzawa,
        Self::Admm,
        Self::Mpdb,
        Self::MpdbPav,
        Self::MeyerEmpty,
        Self::MeyerFull,
        Self::MeyerPav,
        Self::CriticalIndex,
        Self::Block,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hildreth => "hildreth",
            Self::Dykstra => "dykstra",
            Self::Lsps => "lsps",
            Self::Uzawa => "uzawa",
            Self::Admm => "admm",
            Self::Mpdb => "mpdb",
            Self::MpdbPav => "mpdb-pav",
            Self::MeyerEmpty => "meyer-empty",
            Self::MeyerFull => "meyer-full",
            Self::MeyerPav => "meyer-pav",
            Self::CriticalIndex => "critical-index",
            Self::Block => "block",
        }
    }

    /// Comma-separated list of every id, for diagnostics.
    pub fn names() -> String {
        Self::ALL.map(Self::as_str).join(", ")
    }

    /// Active-set solvers that terminate after finitely many steps.
    pub fn is_finite(self) -> bool {
        !matches!(
            self,
            Self::Hildreth | Self::Dykstra | Self::Lsps | Self::Uzawa | Self::Admm
        )
    }

    /// Whether [`SolverId::run_with_init`] honours a start override.
    pub fn accepts_init(self) -> bool {
        self.default_init().is_some()
    }

    fn default_init(self) -> Option<Init> {
        match self {
            Self::Mpdb | Self::MeyerEmpty | Self::Block => Some(Init::Empty),
            Self::MpdbPav | Self::MeyerPav => Some(Init::Pav),
            Self::MeyerFull => Some(Init::Full),
            _ => None,
        }
    }

    /// Run with default options.
    pub fn run(self, signal: &Signal, cone: &ConeSystem, ctl: &IterControl) -> Result<SolverTrace> {
        self.run_with_init(signal, cone, ctl, None)
    }

    /// Run, replacing the default start of an active-set solver by `init`.
    /// Solvers without a configurable start reject an override.
    pub fn run_with_init(
        self,
        signal: &Signal,
        cone: &ConeSystem,
        ctl: &IterControl,
        init: Option<&Init>,
    ) -> Result<SolverTrace> {
        let default = self.default_init();
        let init = match (init, &default) {
            (Some(i), Some(_)) => i.clone(),
            (Some(_), None) => {
                return Err(Error::InvalidArgument(format!(
                    "solver {self} does not take a starting active set"
                )))
            }
            (None, Some(d)) => d.clone(),
            (None, None) => Init::Empty,
        };
        match self {
            Self::Hildreth => hildreth_solve(signal, cone, ctl, None),
            Self::Dykstra => dykstra_solve(signal, cone, ctl),
            Self::Lsps => lsps_solve(signal, cone, ctl, &LspsOptions::default()),
            Self::Uzawa => uzawa_solve(signal, cone, ctl, None),
            Self::Admm => admm_solve(signal, cone, ctl, &AdmmOptions::default()),
            Self::Mpdb | Self::MpdbPav => mpdb_solve(signal, cone, ctl, &init),
            Self::MeyerEmpty | Self::MeyerFull | Self::MeyerPav => meyer_solve(signal, cone, ctl, &init),
            Self::CriticalIndex => critical_index_solve(signal, cone, ctl),
            Self::Block => block_active_set_solve(signal, cone, ctl, &init),
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == key)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unknown solver '{s}'; valid solvers: {}", Self::names()))
            })
    }
}
