//! Exact probabilities.
//!
//! Significance levels, anomaly proportions and overlap shifts are kept as
//! reduced fractions so that step-up comparisons against lattice p-values
//! `c/n` are decided by integer arithmetic.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;

use crate::error::{Error, Result};

/// A rational number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Level(Ratio<u64>);

impl Level {
    pub const ONE: Level = Level(Ratio::new_raw(1, 1));
    pub const ZERO: Level = Level(Ratio::new_raw(0, 1));

    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::Config("zero denominator".into()));
        }
        if numer > denom {
            return Err(Error::Config(format!("{numer}/{denom} exceeds 1")));
        }
        Ok(Level(Ratio::new(numer, denom)))
    }

    /// Build from a u128 fraction, reducing first.
    pub(crate) fn from_u128(numer: u128, denom: u128) -> Result<Self> {
        let g = numer.gcd(&denom).max(1);
        let (n, d) = (numer / g, denom / g);
        match (u64::try_from(n), u64::try_from(d)) {
            (Ok(n), Ok(d)) => Level::new(n, d),
            _ => Err(Error::Config(format!("fraction {numer}/{denom} too large"))),
        }
    }

    /// Closest fraction with denominator at most 10^9 (continued fractions).
    pub fn from_f64(x: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Config(format!("{x} is not in [0, 1]")));
        }
        let r = Ratio::<i64>::approximate_float(x)
            .filter(|r| *r.denom() <= 1_000_000_000)
            .unwrap_or_else(|| best_rational(x, 1_000_000_000));
        Level::new(*r.numer() as u64, *r.denom() as u64)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    pub fn is_zero(&self) -> bool {
        self.numer() == 0
    }

    /// `floor(self * x)` for a nonnegative integer `x`.
    pub fn floor_mul(&self, x: u64) -> u128 {
        self.numer() as u128 * x as u128 / self.denom() as u128
    }
}

fn best_rational(x: f64, max_den: i64) -> Ratio<i64> {
    // Stern-Brocot style convergents with a denominator cap.
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        let ai = a as i64;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        if q2 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = v - a;
        if frac < 1e-15 {
            break;
        }
        v = 1.0 / frac;
    }
    Ratio::new(p1, q1.max(1))
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Print terminating decimals as decimals, everything else as a fraction.
        let mut d = self.denom();
        while d % 2 == 0 {
            d /= 2;
        }
        while d % 5 == 0 {
            d /= 5;
        }
        if d == 1 {
            write!(f, "{}", self.as_f64())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    /// Accepts decimals (`0.1`, `1e-3`) parsed exactly, and fractions (`1/19`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("cannot parse `{s}` as a probability"));
        if let Some((a, b)) = s.split_once('/') {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            return Level::new(a, b);
        }
        let (mantissa, exp) = match s.split_once(['e', 'E']) {
            Some((m, e)) => (m, e.parse::<i32>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let mut numer: u128 = digits.parse().map_err(|_| bad())?;
        let scale = frac.len() as i32 - exp;
        let mut denom: u128 = 1;
        if scale >= 0 {
            denom = 10u128.checked_pow(scale as u32).ok_or_else(bad)?;
        } else {
            numer = numer.checked_mul(10u128.pow((-scale) as u32)).ok_or_else(bad)?;
        }
        Level::from_u128(numer, denom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!("0.1".parse::<Level>().unwrap(), Level::new(1, 10).unwrap());
        assert_eq!("0.05".parse::<Level>().unwrap(), Level::new(1, 20).unwrap());
        assert_eq!("1e-3".parse::<Level>().unwrap(), Level::new(1, 1000).unwrap());
        assert_eq!("1/19".parse::<Level>().unwrap(), Level::new(1, 19).unwrap());
        assert_eq!("1".parse::<Level>().unwrap(), Level::ONE);
        assert!("1.5".parse::<Level>().is_err());
        assert!("abc".parse::<Level>().is_err());
        assert!("-0.1".parse::<Level>().is_err());
    }

    #[test]
    fn float_conversion_recovers_short_fractions() {
        assert_eq!(Level::from_f64(0.1).unwrap(), Level::new(1, 10).unwrap());
        assert_eq!(Level::from_f64(0.07).unwrap(), Level::new(7, 100).unwrap());
        assert_eq!(Level::from_f64(0.2).unwrap(), Level::new(1, 5).unwrap());
        let third = Level::from_f64(1.0 / 3.0).unwrap();
        assert_eq!(third, Level::new(1, 3).unwrap());
    }

    #[test]
    fn display_round_trips() {
        for s in ["0.1", "0.05", "1/19", "0.25"] {
            let l: Level = s.parse().unwrap();
            assert_eq!(l.to_string().parse::<Level>().unwrap(), l);
        }
    }
}
