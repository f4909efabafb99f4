//! Certified real arithmetic: a value/error pair on top of `rug::Float`.
//!
//! Every operation propagates an absolute error bound so that the true result
//! is always contained in `[value - err, value + err]`. Error bounds are kept
//! as low-precision floats (so they survive magnitudes like `exp(10^6)` that
//! overflow `f64`) and inflated after every combination, which keeps them
//! valid despite their own rounding.

use rug::float::Round;
use rug::ops::{AddAssignRound, Pow};
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default working precision in bits.
pub const DEFAULT_PREC: u32 = 128;

/// Precision of error bounds.
const ERR_PREC: u32 = 64;

/// Inflate an error bound to absorb the rounding of the bound arithmetic.
fn up(x: Float) -> Float {
    x * Float::with_val(ERR_PREC, 1.0 + 1e-9)
}

fn err_from_f64(x: f64) -> Float {
    Float::with_val(ERR_PREC, x)
}

/// Absolute rounding error of one correctly rounded MPFR operation at
/// precision `prec` that produced `val`.
fn ulp_of(val: &Float, prec: u32) -> Float {
    if val.is_zero() {
        return Float::with_val(ERR_PREC, 0);
    }
    let mut mag = Float::with_val(ERR_PREC, val.clone().abs());
    mag >>= (prec - 1) as u32;
    up(mag)
}

/// The norm exponent `p` of an `ℓ_p` norm, finite and at least one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormExponent(f64);

impl NormExponent {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::domain("p must be finite (ℓ_∞ is unsupported)"));
        }
        if p < 1.0 {
            return Err(Error::domain(format!("p must be >= 1, got {p}")));
        }
        Ok(NormExponent(p))
    }

    pub fn get(&self) -> f64 {
        self.0
    }

    /// `Some(k)` when `p` is exactly the positive integer `k`.
    pub fn as_integer(&self) -> Option<u32> {
        if self.0.fract() == 0.0 && self.0 <= u32::MAX as f64 {
            Some(self.0 as u32)
        } else {
            None
        }
    }

    pub fn to_float(&self, prec: u32) -> Float {
        Float::with_val(prec, self.0)
    }
}

/// A certified real: the true value lies in `[value - err, value + err]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealApprox {
    pub value: Float,
    pub err: Float,
}

impl RealApprox {
    pub fn exact(value: Float) -> Self {
        RealApprox {
            value,
            err: Float::with_val(ERR_PREC, 0),
        }
    }

    pub fn new(value: Float, err: f64) -> Self {
        debug_assert!(err >= 0.0);
        RealApprox {
            value,
            err: err_from_f64(err),
        }
    }

    pub fn with_err(value: Float, err: Float) -> Self {
        debug_assert!(!err.is_sign_negative());
        RealApprox { value, err }
    }

    pub fn from_f64(x: f64, prec: u32) -> Self {
        RealApprox::exact(Float::with_val(prec, x))
    }

    pub fn from_u64(x: u64, prec: u32) -> Self {
        RealApprox::exact(Float::with_val(prec, x))
    }

    pub fn from_rational(q: &Rational, prec: u32) -> Self {
        let (value, ord) = Float::with_val_round(prec, q, Round::Nearest);
        if ord == std::cmp::Ordering::Equal {
            RealApprox::exact(value)
        } else {
            let err = ulp_of(&value, prec);
            RealApprox { value, err }
        }
    }

    pub fn from_integer(n: &Integer, prec: u32) -> Self {
        let (value, ord) = Float::with_val_round(prec, n, Round::Nearest);
        if ord == std::cmp::Ordering::Equal {
            RealApprox::exact(value)
        } else {
            let err = ulp_of(&value, prec);
            RealApprox { value, err }
        }
    }

    pub fn prec(&self) -> u32 {
        self.value.prec()
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn add_err(&mut self, extra: f64) {
        let mut e = self.err.clone();
        e.add_assign_round(err_from_f64(extra), Round::Up);
        self.err = e;
    }

    /// Certified lower bound on the true value.
    pub fn lo(&self) -> Float {
        let mut v = self.value.clone();
        v.add_assign_round(Float::with_val(ERR_PREC, -&self.err), Round::Down);
        v
    }

    /// Certified upper bound on the true value.
    pub fn hi(&self) -> Float {
        let mut v = self.value.clone();
        v.add_assign_round(self.err.clone(), Round::Up);
        v
    }

    fn abs_hi(&self) -> Float {
        let mut v = Float::with_val(ERR_PREC, self.value.clone().abs());
        v.add_assign_round(self.err.clone(), Round::Up);
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        let value = Float::with_val(prec, &self.value + &other.value);
        let err = up(Float::with_val(ERR_PREC, &self.err + &other.err) + ulp_of(&value, prec));
        RealApprox { value, err }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        let value = Float::with_val(prec, &self.value - &other.value);
        let err = up(Float::with_val(ERR_PREC, &self.err + &other.err) + ulp_of(&value, prec));
        RealApprox { value, err }
    }

    pub fn neg(&self) -> Self {
        RealApprox {
            value: Float::with_val(self.prec(), -&self.value),
            err: self.err.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        let value = Float::with_val(prec, &self.value * &other.value);
        let ax = Float::with_val(ERR_PREC, self.value.clone().abs());
        let ay = Float::with_val(ERR_PREC, other.value.clone().abs());
        let prop = Float::with_val(ERR_PREC, &ax * &other.err)
            + Float::with_val(ERR_PREC, &ay * &self.err)
            + Float::with_val(ERR_PREC, &self.err * &other.err);
        let err = up(prop + ulp_of(&value, prec));
        RealApprox { value, err }
    }

    pub fn mul_f64(&self, k: f64) -> Self {
        let prec = self.prec();
        let value = Float::with_val(prec, &self.value * Float::with_val(prec, k));
        let err = up(Float::with_val(ERR_PREC, &self.err * err_from_f64(k.abs()))
            + ulp_of(&value, prec));
        RealApprox { value, err }
    }

    /// Division; errors if the denominator interval straddles zero.
    pub fn div(&self, other: &Self) -> Result<Self> {
        let prec = self.prec().max(other.prec());
        // directed distance of the denominator interval from zero
        let denom_lo = {
            let mut a = Float::with_val(ERR_PREC + 16, other.value.clone().abs());
            a.add_assign_round(Float::with_val(ERR_PREC, -&other.err), Round::Down);
            a
        };
        if !(denom_lo > 0) {
            return Err(Error::domain("division by an interval containing zero"));
        }
        let value = Float::with_val(prec, &self.value / &other.value);
        let ay = Float::with_val(ERR_PREC, other.value.clone().abs());
        let ratio = Float::with_val(ERR_PREC, self.value.clone().abs()) / ay;
        let prop = (Float::with_val(ERR_PREC, &self.err + up(ratio) * &other.err)) / denom_lo;
        let err = up(prop + ulp_of(&value, prec));
        Ok(RealApprox { value, err })
    }

    pub fn exp(&self) -> Self {
        let prec = self.prec();
        let value = self.value.clone().exp();
        // |e^(x±e) - e^x| <= e^x (e^e - 1)
        let scale = up(Float::with_val(ERR_PREC, &value).abs());
        let growth = Float::with_val(ERR_PREC, &self.err).exp_m1();
        let err = up(scale * growth + ulp_of(&value, prec));
        RealApprox { value, err }
    }

    /// Natural logarithm; requires the interval to be strictly positive.
    pub fn ln(&self) -> Result<Self> {
        let prec = self.prec();
        let lo = self.lo();
        if !(lo > 0) {
            return Err(Error::domain("ln of an interval not strictly positive"));
        }
        let value = self.value.clone().ln();
        let err = up(Float::with_val(ERR_PREC, &self.err / lo) + ulp_of(&value, prec));
        Ok(RealApprox { value, err })
    }

    /// `self^a` for a real exponent; requires a strictly positive interval.
    pub fn pow_f64(&self, a: f64) -> Result<Self> {
        let prec = self.prec();
        let lo = self.lo();
        if !(lo > 0) {
            return Err(Error::domain("pow of an interval not strictly positive"));
        }
        let value = self.value.clone().pow(Float::with_val(prec, a));
        // |d/dx x^a| = |a| x^(a-1), maximized at an interval endpoint
        let edge = if a >= 1.0 { self.hi() } else { lo };
        let deriv = Float::with_val(ERR_PREC, edge.pow(a - 1.0)) * err_from_f64(a.abs());
        let err = up(up(deriv) * &self.err + ulp_of(&value, prec));
        Ok(RealApprox { value, err })
    }

    pub fn sqrt(&self) -> Result<Self> {
        let prec = self.prec();
        let lo = self.lo();
        if !(lo > 0) {
            return Err(Error::domain("sqrt of an interval not strictly positive"));
        }
        let value = self.value.clone().sqrt();
        let root_lo = lo.sqrt();
        let err = up(Float::with_val(ERR_PREC, &self.err / root_lo) / 2u32 + ulp_of(&value, prec));
        Ok(RealApprox { value, err })
    }

    /// Certified comparison against an exact threshold. Returns `None` when
    /// the interval straddles the threshold.
    pub fn cmp_threshold(&self, threshold: &Float) -> Option<std::cmp::Ordering> {
        if self.lo() > *threshold {
            Some(std::cmp::Ordering::Greater)
        } else if self.hi() < *threshold {
            Some(std::cmp::Ordering::Less)
        } else {
            None
        }
    }

    /// Certified strict less-than between two intervals (`None` if they overlap).
    pub fn lt_certified(&self, other: &Self) -> Option<bool> {
        if self.hi() < other.lo() {
            Some(true)
        } else if self.lo() > other.hi() {
            Some(false)
        } else {
            None
        }
    }

    /// Relative error `err / |value|` as `f64` (infinity when value is 0).
    pub fn rel_err(&self) -> f64 {
        (self.err.clone() / self.abs_hi()).to_f64()
    }
}

impl std::fmt::Display for RealApprox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ± {:.3e}", self.value, self.err.to_f64())
    }
}
