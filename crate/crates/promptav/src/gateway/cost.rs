//! Exact cost arithmetic for API usage estimates.
//!
//! Rates are decimal per-1,000-token prices ("0.004"). Costs are computed as
//! exact rationals over `u128` and only rounded once, half-up, when reduced
//! to whole cents — so 2,500,000 tokens at 0.004 is exactly $10.00.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CostError {
    #[error("invalid rate {0:?}: expected a non-negative decimal like \"0.004\"")]
    InvalidRate(String),
    #[error("rate {0:?} has too many digits")]
    RateOverflow(String),
}

/// A per-1,000-token price, kept as an exact decimal
/// (`mantissa / 10^scale` currency units).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rate {
    mantissa: u128,
    scale: u32,
}

impl Rate {
    /// Parse a decimal rate string such as "0.004" or "1.5".
    pub fn parse(text: &str) -> Result<Self, CostError> {
        let invalid = || CostError::InvalidRate(text.to_string());
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('-') || trimmed.starts_with('+') {
            return Err(invalid());
        }
        let (whole, frac) = match trimmed.split_once('.') {
            Some((w, f)) => (w, f),
            None => (trimmed, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return Err(invalid());
        }
        if !whole.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
        {
            return Err(invalid());
        }
        if frac.len() > 18 || whole.len() > 18 {
            return Err(CostError::RateOverflow(text.to_string()));
        }
        let digits = format!("{whole}{frac}");
        let mantissa: u128 = if digits.is_empty() {
            0
        } else {
            digits.parse().map_err(|_| invalid())?
        };
        Ok(Self {
            mantissa,
            scale: frac.len() as u32,
        })
    }
}

impl FromStr for Rate {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rate::parse(s)
    }
}

/// A currency amount held as whole cents; displays as "$10.00".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Money {
    cents: u128,
}

impl Money {
    pub fn from_cents(cents: u128) -> Self {
        Self { cents }
    }

    pub fn cents(&self) -> u128 {
        self.cents
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}.{:02}", self.cents / 100, self.cents % 100)
    }
}

impl Serialize for Money {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let rest = text
            .strip_prefix('$')
            .ok_or_else(|| serde::de::Error::custom("expected a $X.YY amount"))?;
        let (dollars, cents) = rest
            .split_once('.')
            .ok_or_else(|| serde::de::Error::custom("expected a $X.YY amount"))?;
        if cents.len() != 2 {
            return Err(serde::de::Error::custom("expected two cent digits"));
        }
        let dollars: u128 = dollars.parse().map_err(serde::de::Error::custom)?;
        let cents: u128 = cents.parse().map_err(serde::de::Error::custom)?;
        Ok(Money::from_cents(dollars * 100 + cents))
    }
}

/// Cost of `total_tokens` at `rate_per_1k`: tokens / 1000 × rate, computed
/// exactly and rounded half-up to whole cents.
pub fn estimate_cost(total_tokens: u64, rate_per_1k: Rate) -> Money {
    // cents = tokens * mantissa * 100 / (10^scale * 1000), rounded half-up
    let numerator = u128::from(total_tokens) * rate_per_1k.mantissa * 100;
    let denominator = 10u128.pow(rate_per_1k.scale) * 1000;
    let cents = (2 * numerator + denominator) / (2 * denominator);
    Money::from_cents(cents)
}
