//! Test-signal families.
//!
//! * `S1`: concave piecewise signal (sine arc, line, cubic).
//! * `S2`: i.i.d. standard normal draws (pure noise).
//! * `S3`: normalised sinc `sin(πt)/(πt)` at `t = 6z/n − 1`, alternating
//!   concave and convex stretches.
//!
//! Abscissae are `z = 1..n`; additive Gaussian noise of standard deviation
//! `sigma` is drawn afterwards from the same stream. The generator is
//! ChaCha8 seeded with `seed`, so a spec maps to bit-identical data on every
//! platform.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    S1,
    S2,
    S3,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::S1, Family::S2, Family::S3];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::S1 => "s1",
            Self::S2 => "s2",
            Self::S3 => "s3",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Self::S1),
            "s2" => Ok(Self::S2),
            "s3" => Ok(Self::S3),
            other => Err(Error::InvalidArgument(format!(
                "unknown signal family '{other}' (expected s1, s2 or s3)"
            ))),
        }
    }
}

/// Family, size, noise level and seed of a generated signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub family: Family,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl SignalSpec {
    pub fn new(family: Family, n: usize, sigma: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            family,
            n,
            sigma,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidArgument(format!("signal size {} below 3", self.n)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise level {} must be >= 0", self.sigma)));
        }
        Ok(())
    }
}

/// Noise-free value of the concave piecewise family at abscissa `z`.
pub fn s1_value(z: f64, n: usize) -> f64 {
    let nf = n as f64;
    let beta = 0.1;
    let alpha = 2.0 * nf * (8.0f64 / 5.0).sin() - beta * nf;
    let gamma = -2.0 / (nf * nf);
    let delta = alpha + beta * 2.0 * nf / 3.0 - gamma * 8.0 * nf.powi(3) / 27.0;
    if z <= nf / 3.0 {
        2.0 * nf * (24.0 * z / (5.0 * nf)).sin()
    } else if z <= 2.0 * nf / 3.0 {
        alpha + beta * z
    } else {
        gamma * z.powi(3) + delta
    }
}

/// Normalised sinc.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let p = std::f64::consts::PI * t;
        p.sin() / p
    }
}

pub fn s3_value(z: f64, n: usize) -> f64 {
    sinc(6.0 * z / n as f64 - 1.0)
}

/// Deterministic signal for `spec`.
pub fn generate_signal(spec: &SignalSpec) -> Result<Signal> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let mut y: Vec<f64> = match spec.family {
        Family::S1 => (1..=n).map(|k| s1_value(k as f64, n)).collect(),
        Family::S2 => (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        Family::S3 => (1..=n).map(|k| s3_value(k as f64, n)).collect(),
    };
    if spec.sigma > 0.0 {
        for v in &mut y {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += spec.sigma * e;
        }
    }
    Signal::uniform(y)
}
