use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slopes and shifts of the two smooth steps `H(x) = (tanh(slope * x - shift) + 1) / 2`.
///
/// `H1` acts on individual fictitious densities, `H2` on the accumulated ray sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeavisideParams {
    pub slope1: f64,
    pub shift1: f64,
    pub slope2: f64,
    pub shift2: f64,
}

impl Default for HeavisideParams {
    fn default() -> Self {
        Self {
            slope1: 10.0,
            shift1: 3.0,
            slope2: 6.0,
            shift2: 3.0,
        }
    }
}

impl HeavisideParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.slope1, self.shift1, self.slope2, self.shift2]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.slope1 <= 0.0 || self.slope2 <= 0.0 {
            return Err(Error::invalid(format!(
                "heaviside slopes must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn h1(&self, x: f64) -> f64 {
        step(self.slope1, self.shift1, x)
    }

    #[inline]
    pub fn h1_deriv(&self, x: f64) -> f64 {
        step_deriv(self.slope1, self.shift1, x)
    }

    #[inline]
    pub fn h2(&self, x: f64) -> f64 {
        step(self.slope2, self.shift2, x)
    }

    #[inline]
    pub fn h2_deriv(&self, x: f64) -> f64 {
        step_deriv(self.slope2, self.shift2, x)
    }
}

// (tanh(a) + 1) / 2 == 1 / (1 + exp(-2a)); the logistic form keeps relative
// precision in the lower tail where the tanh form cancels.
#[inline]
fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn step(slope: f64, shift: f64, x: f64) -> f64 {
    logistic(2.0 * (slope * x - shift))
}

#[inline]
fn step_deriv(slope: f64, shift: f64, x: f64) -> f64 {
    // slope / 2 * sech^2(a) == 2 * slope * s(2a) * s(-2a)
    let z = 2.0 * (slope * x - shift);
    2.0 * slope * logistic(z) * logistic(-z)
}

/// `(tanh(10x - 3) + 1) / 2`
pub fn heaviside1(x: f64) -> f64 {
    HeavisideParams::default().h1(x)
}

pub fn heaviside1_deriv(x: f64) -> f64 {
    HeavisideParams::default().h1_deriv(x)
}

/// `(tanh(6x - 3) + 1) / 2`
pub fn heaviside2(x: f64) -> f64 {
    HeavisideParams::default().h2(x)
}

pub fn heaviside2_deriv(x: f64) -> f64 {
    HeavisideParams::default().h2_deriv(x)
}
