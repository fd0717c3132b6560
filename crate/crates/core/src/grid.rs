use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Uniform grid `lo, lo + step, ..., hi` (the last node is `hi` itself when
/// the span is not an exact multiple of `step`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || hi <= lo || step <= 0.0 {
            return Err(domain(format!("invalid grid lo={lo} hi={hi} step={step}")));
        }
        Ok(Self { lo, hi, step })
    }

    /// Grid with `count` nodes spanning `[lo, hi]` inclusive.
    pub fn with_count(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(domain("a grid needs at least two nodes"));
        }
        Self::new(lo, hi, (hi - lo) / (count - 1) as f64)
    }

    pub fn len(&self) -> usize {
        let n = ((self.hi - self.lo) / self.step).floor() as usize;
        let last = self.lo + n as f64 * self.step;
        if (self.hi - last).abs() <= 1e-9 * self.step {
            n + 1
        } else {
            n + 2
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| if i + 1 == n { self.hi } else { self.lo + i as f64 * self.step })
            .collect()
    }

    /// Parses `lo:hi:step`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(domain(format!("grid must be lo:hi:step, got '{text}'")));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| domain(format!("grid component '{s}' is not a number")))
        };
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}
