//! Threshold policies: Benjamini-Hochberg, its modified variant, and LORD3.

mod bh;
mod lord;

pub use bh::{bh, bh_bruteforce, bh_lattice, calibration_cardinality, matches_cardinality, mbh, mbh_alpha_prime, BhResult, LatticeBh, MbhConfig};
pub use lord::{lord3_next, GammaSequence, LordParams, LordState, GAMMA_HORIZON};

use crate::level::Level;

/// Window-level policy applied to a block of p-values.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdPolicy {
    Bh { alpha: Level },
    Mbh { alpha: Level, pi_hat: Level },
    Lord3(LordParams),
}

impl ThresholdPolicy {
    pub fn label(&self) -> &'static str {
        match self {
            ThresholdPolicy::Bh { .. } => "bh",
            ThresholdPolicy::Mbh { .. } => "mbh",
            ThresholdPolicy::Lord3(_) => "lord3",
        }
    }

    /// Target level alpha.
    pub fn alpha(&self) -> Level {
        match self {
            ThresholdPolicy::Bh { alpha } | ThresholdPolicy::Mbh { alpha, .. } => *alpha,
            ThresholdPolicy::Lord3(p) => p.alpha,
        }
    }

    /// Level actually fed to the step-up rule on windows of size `m`.
    pub fn effective_alpha(&self, m: usize) -> crate::Result<Level> {
        match self {
            ThresholdPolicy::Bh { alpha } => Ok(*alpha),
            ThresholdPolicy::Mbh { alpha, pi_hat } => mbh_alpha_prime(*alpha, m, *pi_hat),
            ThresholdPolicy::Lord3(p) => Ok(p.alpha),
        }
    }
}
