//! Shifted theta-function numerics.
//!
//! `Θ_p(τ; t) = Σ_{z∈Z} exp(-τ|z-t|^p)` together with the log-derivative
//! quantities
//!
//! * `μ_p(τ; t)  = E[|X|^p]   = -∂/∂τ log Θ_p`
//! * `V_p(τ; t)  = E[|X|^{2p}] - μ² = ∂²/∂τ² log Θ_p`
//!
//! where `X ~ D_p(τ; t)` is the discrete Gibbs distribution on `Z - t`.
//! All series are truncated with a certified geometric tail bound that is
//! folded into the returned error, so every result is a valid enclosure.
//!
//! On top of these the module computes the hardness constants
//! `W_p = min_τ exp(τ/2^p) Θ_p(τ)`, `C_p = 1/(1 - log₂ W_p)`, and the
//! threshold `p_0` solving `W_{p_0} = 2`, as well as the point-count bounds
//! `N_p(Z^n, r, t⃗) ≤ min_τ exp(τ r^p) Θ_p(τ; t⃗)` and the `H_p` lower bound.

use rug::ops::CompleteRound;
use rug::{Float, Rational};

use crate::error::{Error, Result};
use crate::real::{NormExponent, RealApprox};

/// Guard bits added to the requested precision for internal evaluation.
const GUARD_BITS: u32 = 32;

/// Hard cap on series length; reached only for extremely small `τ`.
const MAX_TERMS: usize = 1 << 24;

/// Canonicalize a shift to `[0, 1/2]` via `t ↦ min(frac(t), 1 - frac(t))`.
pub fn canonical_shift(t: &Rational) -> Rational {
    let mut f = t.clone() - t.clone().floor();
    let one = Rational::from(1);
    let half = Rational::from((1, 2));
    if f > half {
        f = one - f;
    }
    f
}

/// A theta-series evaluation point: `τ > 0` and a canonicalized shift.
#[derive(Debug, Clone)]
pub struct ThetaPoint {
    pub tau: Float,
    pub shift: Rational,
}

impl ThetaPoint {
    pub fn new(tau: Float, shift: Rational) -> Result<Self> {
        if !(tau.is_finite() && tau.is_sign_positive() && !tau.is_zero()) {
            return Err(Error::domain("tau must be positive and finite"));
        }
        Ok(ThetaPoint {
            tau,
            shift: canonical_shift(&shift),
        })
    }
}

/// The three Gibbs sums `S_k = Σ |z-t|^{kp} exp(-τ|z-t|^p)` for `k = 0, 1, 2`.
#[derive(Debug, Clone)]
pub struct GibbsSums {
    pub s0: RealApprox,
    pub s1: RealApprox,
    pub s2: RealApprox,
}

impl GibbsSums {
    pub fn theta(&self) -> RealApprox {
        self.s0.clone()
    }
    pub fn mu(&self) -> Result<RealApprox> {
        self.s1.div(&self.s0)
    }
    pub fn variance(&self) -> Result<RealApprox> {
        let m = self.s1.div(&self.s0)?;
        let m2 = self.s2.div(&self.s0)?;
        Ok(m2.sub(&m.mul(&m)))
    }
}

/// Cached per-shift cost sequence `|z - t|^p`, reusable across many `τ`.
pub struct ShiftSeries {
    p: f64,
    shift: Rational,
    iprec: u32,
    /// costs ordered z = 0, 1, -1, 2, -2, …
    costs: Vec<RealApprox>,
}

impl ShiftSeries {
    pub fn new(p: NormExponent, shift: &Rational, prec: u32) -> Self {
        ShiftSeries {
            p: p.get(),
            shift: canonical_shift(shift),
            iprec: prec + GUARD_BITS,
            costs: Vec::new(),
        }
    }

    fn cost_of(&self, z: i64) -> RealApprox {
        let dist = (Rational::from(z) - &self.shift).abs();
        if dist == 0 {
            return RealApprox::exact(Float::with_val(self.iprec, 0));
        }
        RealApprox::from_rational(&dist, self.iprec)
            .pow_f64(self.p)
            .expect("positive distance")
    }

    fn extend_to(&mut self, k: usize) {
        // index 2j-1 is z = j, index 2j is z = -j
        while self.costs.len() < 2 * k + 1 {
            let idx = self.costs.len();
            let z = if idx == 0 {
                0
            } else if idx % 2 == 1 {
                ((idx + 1) / 2) as i64
            } else {
                -((idx / 2) as i64)
            };
            self.costs.push(self.cost_of(z));
        }
    }

    /// Truncation index `K` (head covers `|z| ≤ K`) so that the certified
    /// tail bounds fall below `2^{-(prec+8)}`.
    fn head_size(&self, tau: f64) -> Result<usize> {
        let tol = 2f64.powi(-((self.iprec - GUARD_BITS) as i32) - 8);
        let p = self.p;
        let mut k = 1usize;
        loop {
            let (t0, t1, t2) = tail_bounds(p, tau, k);
            if t0.max(t1).max(t2) <= tol {
                return Ok(k);
            }
            k += (k / 8).max(1);
            if k > MAX_TERMS {
                return Err(Error::domain(format!(
                    "tau = {tau} too small: series needs more than {MAX_TERMS} terms"
                )));
            }
        }
    }

    /// Evaluate the three Gibbs sums at `τ` with certified truncation error.
    pub fn eval(&mut self, tau: &Float) -> Result<GibbsSums> {
        if !(tau.is_finite() && tau.is_sign_positive() && !tau.is_zero()) {
            return Err(Error::domain("tau must be positive and finite"));
        }
        let tau_f = tau.to_f64();
        let k = self.head_size(tau_f)?;
        self.extend_to(k);
        let taur = RealApprox::exact(Float::with_val(self.iprec, tau));
        let zero = || RealApprox::exact(Float::with_val(self.iprec, 0));
        let (mut s0, mut s1, mut s2) = (zero(), zero(), zero());
        for c in &self.costs[..2 * k + 1] {
            let w = taur.mul(c).neg().exp();
            s0 = s0.add(&w);
            let cw = c.mul(&w);
            s1 = s1.add(&cw);
            s2 = s2.add(&c.mul(&cw));
        }
        let (t0, t1, t2) = tail_bounds(self.p, tau_f, k);
        s0.add_err(t0);
        s1.add_err(t1);
        s2.add_err(t2);
        Ok(GibbsSums { s0, s1, s2 })
    }

    /// `∂Θ_p/∂t` at this shift: `τp [Σ_{z≥1}(z-t)^{p-1}e^{-τ(z-t)^p}
    /// - Σ_{z≤0}(t-z)^{p-1}e^{-τ(t-z)^p}]`.
    pub fn shift_derivative(&mut self, tau: &Float) -> Result<RealApprox> {
        let tau_f = tau.to_f64();
        let k = self.head_size(tau_f)?;
        self.extend_to(k);
        let p = self.p;
        let taur = RealApprox::exact(Float::with_val(self.iprec, tau));
        let mut acc = RealApprox::exact(Float::with_val(self.iprec, 0));
        for z in -(k as i64)..=(k as i64) {
            let dist = Rational::from(z) - &self.shift;
            let sign = if dist > 0 {
                1.0
            } else if dist < 0 {
                -1.0
            } else {
                continue; // derivative term vanishes at zero distance (p > 2 use)
            };
            let d = RealApprox::from_rational(&dist.abs(), self.iprec);
            let dp1 = d.pow_f64(p - 1.0)?;
            let w = d.pow_f64(p)?.mul(&taur).neg().exp();
            acc = acc.add(&dp1.mul(&w).mul_f64(sign));
        }
        // same geometric tail bound shape as for S1 (exponent p-1 ≤ p on |z| ≥ 1)
        let (_, t1, _) = tail_bounds(p, tau_f, k);
        acc.add_err(t1);
        Ok(acc.mul(&taur).mul_f64(p))
    }
}

/// Certified tail bounds `(T0, T1, T2)` for the head `|z| ≤ k`: for `z` beyond
/// the head both branch distances are at least `d = k`, every consecutive term
/// shrinks by at least `exp(-τ p d^{p-1})`, and the `|z-t|^{kp}` weights of the
/// moment sums are absorbed by `max_u u^j exp(-τu/2) = (2j/(eτ))^j`.
fn tail_bounds(p: f64, tau: f64, k: usize) -> (f64, f64, f64) {
    // floor keeps the bounds valid even when the f64 exponentials underflow
    const FLOOR: f64 = 1e-300;
    let d = k as f64;
    let dp = d.powf(p);
    let gap = tau * p * d.powf(p - 1.0);
    let denom_full = -(-gap).exp_m1();
    let denom_half = -(-gap / 2.0).exp_m1();
    let t0 = (2.0 * (-tau * dp).exp() / denom_full).max(FLOOR);
    let b1 = (2.0 / (std::f64::consts::E * tau)).max(1.0);
    let b2 = (4.0 / (std::f64::consts::E * tau)).powi(2).max(1.0);
    let half = (-tau * dp / 2.0).exp();
    let t1 = (2.0 * b1 * half / denom_half).max(FLOOR);
    let t2 = (2.0 * b2 * half / denom_half).max(FLOOR);
    (t0, t1, t2)
}

/// `Θ_p(τ; t)`.
pub fn theta(p: NormExponent, tau: &Float, shift: &Rational, prec: u32) -> Result<RealApprox> {
    Ok(ShiftSeries::new(p, shift, prec).eval(tau)?.s0)
}

/// `μ_p(τ; t)`.
pub fn mu(p: NormExponent, tau: &Float, shift: &Rational, prec: u32) -> Result<RealApprox> {
    ShiftSeries::new(p, shift, prec).eval(tau)?.mu()
}

/// `V_p(τ; t) = E[|X|^{2p}] - μ_p(τ; t)²`.
pub fn variance_v(p: NormExponent, tau: &Float, shift: &Rational, prec: u32) -> Result<RealApprox> {
    ShiftSeries::new(p, shift, prec).eval(tau)?.variance()
}

/// Group a shift vector by canonical value; the per-coordinate factors of
/// `Θ_p(τ; t⃗)` repeat, so products become binary powers.
pub fn group_shifts(shifts: &[Rational]) -> Vec<(Rational, u64)> {
    let mut groups: Vec<(Rational, u64)> = Vec::new();
    for t in shifts {
        let c = canonical_shift(t);
        match groups.iter_mut().find(|(g, _)| *g == c) {
            Some((_, n)) => *n += 1,
            None => groups.push((c, 1)),
        }
    }
    groups
}

/// `Θ_p(τ; t⃗) = Π_i Θ_p(τ; t_i)` over a grouped shift vector.
pub fn theta_vec_grouped(
    p: NormExponent,
    tau: &Float,
    groups: &[(Rational, u64)],
    prec: u32,
) -> Result<RealApprox> {
    let mut acc = RealApprox::exact(Float::with_val(prec + GUARD_BITS, 1));
    for (t, n) in groups {
        let f = theta(p, tau, t, prec)?;
        acc = acc.mul(&pow_u64(&f, *n));
    }
    Ok(acc)
}

/// `Θ_p(τ; t⃗)` over an explicit shift vector (empty product is 1).
pub fn theta_vec(p: NormExponent, tau: &Float, shifts: &[Rational], prec: u32) -> Result<RealApprox> {
    theta_vec_grouped(p, tau, &group_shifts(shifts), prec)
}

/// `μ_p(τ; t⃗) = Σ_i μ_p(τ; t_i)` over a grouped shift vector.
pub fn mu_vec_grouped(
    p: NormExponent,
    tau: &Float,
    groups: &[(Rational, u64)],
    prec: u32,
) -> Result<RealApprox> {
    let mut acc = RealApprox::exact(Float::with_val(prec + GUARD_BITS, 0));
    for (t, n) in groups {
        let m = mu(p, tau, t, prec)?;
        acc = acc.add(&m.mul(&RealApprox::from_u64(*n, prec + GUARD_BITS)));
    }
    Ok(acc)
}

/// `μ_p(τ; t⃗)` over an explicit shift vector.
pub fn mu_vec(p: NormExponent, tau: &Float, shifts: &[Rational], prec: u32) -> Result<RealApprox> {
    mu_vec_grouped(p, tau, &group_shifts(shifts), prec)
}

/// Binary power with certified error propagation.
pub fn pow_u64(x: &RealApprox, mut n: u64) -> RealApprox {
    let mut base = x.clone();
    let mut acc = RealApprox::exact(Float::with_val(x.prec(), 1));
    while n > 0 {
        if n & 1 == 1 {
            acc = acc.mul(&base);
        }
        n >>= 1;
        if n > 0 {
            base = base.mul(&base);
        }
    }
    acc
}

/// `H_p(τ, δ; t⃗) = Θ_p(τ+δ; t⃗) - exp(-δ μ_p(τ; t⃗)) Θ_p(τ; t⃗)
///               - exp(δ μ_p(τ+2δ; t⃗)) Θ_p(τ+2δ; t⃗)`.
pub fn h_func(
    p: NormExponent,
    tau: &Float,
    delta: &Float,
    shifts: &[Rational],
    prec: u32,
) -> Result<RealApprox> {
    h_func_grouped(p, tau, delta, &group_shifts(shifts), prec)
}

pub fn h_func_grouped(
    p: NormExponent,
    tau: &Float,
    delta: &Float,
    groups: &[(Rational, u64)],
    prec: u32,
) -> Result<RealApprox> {
    if !(delta.is_finite() && delta.is_sign_positive() && !delta.is_zero()) {
        return Err(Error::domain("delta must be positive and finite"));
    }
    let iprec = prec + GUARD_BITS;
    let tau1 = Float::with_val(iprec, tau + delta.clone());
    let tau2 = Float::with_val(iprec, tau + Float::with_val(iprec, 2) * delta.clone());
    let th_mid = theta_vec_grouped(p, &tau1, groups, prec)?;
    let th_lo = theta_vec_grouped(p, tau, groups, prec)?;
    let th_hi = theta_vec_grouped(p, &tau2, groups, prec)?;
    let mu_lo = mu_vec_grouped(p, tau, groups, prec)?;
    let mu_hi = mu_vec_grouped(p, &tau2, groups, prec)?;
    let dr = RealApprox::exact(delta.clone());
    let term2 = dr.mul(&mu_lo).neg().exp().mul(&th_lo);
    let term3 = dr.mul(&mu_hi).exp().mul(&th_hi);
    Ok(th_mid.sub(&term2).sub(&term3))
}

/// Certified lower bound `exp(τ μ_p(τ+2δ; t⃗)) H_p(τ, δ; t⃗)` on
/// `N_p(Z^n, μ_p(τ; t⃗)^{1/p}, t⃗)`; may be nonpositive (vacuous) for poor `δ`.
pub fn count_lower_bound_theta(
    p: NormExponent,
    tau: &Float,
    delta: &Float,
    shifts: &[Rational],
    prec: u32,
) -> Result<RealApprox> {
    count_lower_bound_theta_grouped(p, tau, delta, &group_shifts(shifts), prec)
}

pub fn count_lower_bound_theta_grouped(
    p: NormExponent,
    tau: &Float,
    delta: &Float,
    groups: &[(Rational, u64)],
    prec: u32,
) -> Result<RealApprox> {
    let iprec = prec + GUARD_BITS;
    let tau2 = Float::with_val(iprec, tau + Float::with_val(iprec, 2) * delta.clone());
    let mu_hi = mu_vec_grouped(p, &tau2, groups, prec)?;
    let h = h_func_grouped(p, tau, delta, groups, prec)?;
    let taur = RealApprox::exact(Float::with_val(iprec, tau));
    Ok(taur.mul(&mu_hi).exp().mul(&h))
}

/// Result of minimizing `exp(τ r^p) Θ_p(τ; t⃗)` over `τ`.
#[derive(Debug, Clone)]
pub struct ThetaUpperBound {
    pub bound: RealApprox,
    /// Minimizing `τ` when the stationarity equation `μ_p(τ; t⃗) = r^p` has a
    /// root in the bracket; `None` in the limit case.
    pub tau: Option<Float>,
    /// Set when no lattice point lies in the open ball (`r^p ≤ inf_τ μ`), so
    /// the returned value is the bound evaluated at the bracket edge.
    pub limit_case: bool,
}

/// `N_p(Z^n, r, t⃗) ≤ min_τ exp(τ r^p) Θ_p(τ; t⃗)`, minimized by bisection on
/// `μ_p(τ; t⃗) = r^p` (log-convexity makes the stationary point the minimum).
pub fn count_upper_bound_theta(
    p: NormExponent,
    rpow: &RealApprox,
    shifts: &[Rational],
    prec: u32,
) -> Result<ThetaUpperBound> {
    count_upper_bound_theta_grouped(p, rpow, &group_shifts(shifts), prec)
}

pub fn count_upper_bound_theta_grouped(
    p: NormExponent,
    rpow: &RealApprox,
    groups: &[(Rational, u64)],
    prec: u32,
) -> Result<ThetaUpperBound> {
    let iprec = prec + GUARD_BITS;
    if rpow.value < 0 {
        return Err(Error::domain("r^p must be nonnegative"));
    }
    if groups.is_empty() {
        return Ok(ThetaUpperBound {
            bound: RealApprox::exact(Float::with_val(iprec, 1)),
            tau: None,
            limit_case: false,
        });
    }
    let mut series: Vec<(ShiftSeries, u64)> = groups
        .iter()
        .map(|(t, n)| (ShiftSeries::new(p, t, prec), *n))
        .collect();
    let mu_at = |series: &mut Vec<(ShiftSeries, u64)>, tau: &Float| -> Result<RealApprox> {
        let mut acc = RealApprox::exact(Float::with_val(iprec, 0));
        for (s, n) in series.iter_mut() {
            let sums = s.eval(tau)?;
            acc = acc.add(&sums.mu()?.mul(&RealApprox::from_u64(*n, iprec)));
        }
        Ok(acc)
    };
    let eval_bound = |series: &mut Vec<(ShiftSeries, u64)>, tau: &Float| -> Result<RealApprox> {
        let mut acc = RealApprox::exact(Float::with_val(iprec, tau)).mul(rpow).exp();
        for (s, n) in series.iter_mut() {
            acc = acc.mul(&pow_u64(&s.eval(tau)?.s0, *n));
        }
        Ok(acc)
    };

    // inf_tau mu = sum_i t_i^p, the p-th power of the distance to the nearest
    // lattice point; mu decreases to this floor, so r^p at or below it means
    // the stationarity equation has no root (no point in the open ball)
    let mut mu_floor = RealApprox::exact(Float::with_val(iprec, 0));
    for (t, n) in groups.iter() {
        if *t != 0 {
            let tp = RealApprox::from_rational(t, iprec).pow_f64(p.get())?;
            mu_floor = mu_floor.add(&tp.mul(&RealApprox::from_u64(*n, iprec)));
        }
    }
    if !(rpow.lo() > mu_floor.hi()) {
        let gap = (mu_floor.to_f64() - rpow.to_f64()).max(1e-3);
        let tau_lim = Float::with_val(iprec, (512.0 / gap).clamp(1.0, 2f64.powi(40)));
        let bound = eval_bound(&mut series, &tau_lim)?;
        return Ok(ThetaUpperBound {
            bound,
            tau: None,
            limit_case: true,
        });
    }

    // bracket the root of mu(tau) = r^p; mu is strictly decreasing
    let mut tau_lo = Float::with_val(iprec, 1);
    let mut tau_hi = Float::with_val(iprec, 1);
    let max_tau = Float::with_val(iprec, 2f64.powi(40));
    let min_tau = Float::with_val(iprec, 2f64.powi(-40));
    loop {
        let m = mu_at(&mut series, &tau_hi)?;
        if m.hi() < rpow.lo() {
            break;
        }
        tau_hi = Float::with_val(iprec, &tau_hi * 2u32);
        if tau_hi > max_tau {
            // mu still above r^p at the bracket edge; the bound there is valid
            let bound = eval_bound(&mut series, &max_tau)?;
            return Ok(ThetaUpperBound {
                bound,
                tau: None,
                limit_case: true,
            });
        }
    }
    loop {
        let m = mu_at(&mut series, &tau_lo)?;
        if m.lo() > rpow.hi() {
            break;
        }
        tau_lo = Float::with_val(iprec, &tau_lo / 2u32);
        if tau_lo < min_tau {
            let bound = eval_bound(&mut series, &min_tau)?;
            return Ok(ThetaUpperBound {
                bound,
                tau: None,
                limit_case: true,
            });
        }
    }
    let tol = Float::with_val(iprec, 2f64.powi(-50));
    while Float::with_val(iprec, &tau_hi - &tau_lo)
        > (Float::with_val(iprec, &tau_hi) * tol.clone())
    {
        let mid = Float::with_val(iprec, (&tau_lo + &tau_hi).complete(iprec) / 2u32);
        let m = mu_at(&mut series, &mid)?;
        if m.lo() > rpow.hi() {
            tau_lo = mid;
        } else if m.hi() < rpow.lo() {
            tau_hi = mid;
        } else {
            tau_lo = mid.clone();
            tau_hi = mid;
            break;
        }
    }
    let tau_star = Float::with_val(iprec, (&tau_lo + &tau_hi).complete(iprec) / 2u32);
    let bound = eval_bound(&mut series, &tau_star)?;
    Ok(ThetaUpperBound {
        bound,
        tau: Some(tau_star),
        limit_case: false,
    })
}

/// Result of maximizing `Θ_p(τ; t)` over `t ∈ [0, 1/2]`.
#[derive(Debug, Clone)]
pub struct ShiftMax {
    /// Valid upper bound on `max_t Θ_p(τ; t)`.
    pub upper: f64,
    /// Dyadic shift achieving `best_value` (within its enclosure).
    pub best_shift: Rational,
    pub best_value: RealApprox,
}

/// Global bound on `|∂Θ_p/∂t|` over `t ∈ [0, 1/2]`: with `u = |z-t|^p`,
/// `|z-t|^{p-1} = u^{(p-1)/p} ≤ 1 + u`, so the derivative sum is at most
/// `τp (S0 + S1)`, and both Gibbs sums are bounded shift-uniformly through
/// the half-shift series (every distance exceeds the matching `k - 1/2`).
fn theta_shift_lipschitz(p: NormExponent, tau: &Float, prec: u32) -> Result<f64> {
    let half = Rational::from((1, 2));
    let s0_bound = 1.0 + theta(p, tau, &half, prec)?.hi().to_f64();
    let tau_half = Float::with_val(tau.prec(), tau / 2u32);
    let b1 = 2.0 / (std::f64::consts::E * tau.to_f64());
    let s1_bound = b1 * (1.0 + theta(p, &tau_half, &half, prec)?.hi().to_f64());
    Ok(tau.to_f64() * p.get() * (s0_bound + s1_bound) * 1.01)
}

/// Global bound on `|∂²Θ_p/∂t²|` for `p ≥ 2`: term-wise,
/// `|∂²/∂t² e^{-τ|z-t|^p}| ≤ τp(p-1)|z-t|^{p-2} e^{-τ|·|^p}
/// + (τp)² |z-t|^{2p-2} e^{-τ|·|^p}`, and with `u = |z-t|^p` the weights obey
/// `u^{(p-2)/p} ≤ 1 + u` and `u^{2-2/p} ≤ 1 + u²`, so everything reduces to
/// shift-uniform `S0, S1, S2` bounds via the half-shift series.
fn theta_shift_second_derivative_bound(
    p: NormExponent,
    tau: &Float,
    prec: u32,
) -> Result<Option<f64>> {
    if p.get() < 2.0 {
        return Ok(None);
    }
    let half = Rational::from((1, 2));
    let tau_f = tau.to_f64();
    let s0 = 1.0 + theta(p, tau, &half, prec)?.hi().to_f64();
    let tau_half = Float::with_val(tau.prec(), tau / 2u32);
    let th_half = 1.0 + theta(p, &tau_half, &half, prec)?.hi().to_f64();
    let b1 = (2.0 / (std::f64::consts::E * tau_f)).max(1.0);
    let b2 = (4.0 / (std::f64::consts::E * tau_f)).powi(2).max(1.0);
    let s1 = b1 * th_half;
    let s2 = b2 * th_half;
    let pf = p.get();
    let c2 = tau_f * pf * (pf - 1.0) * (s0 + s1) + (tau_f * pf).powi(2) * (s0 + s2);
    Ok(Some(c2 * 1.01))
}

/// Certified maximization of `t ↦ Θ_p(τ; t)` by branch-and-bound on a dyadic
/// grid. Cells are bounded by the cheaper of a global Lipschitz pad and a
/// local Taylor pad `|Θ'(c)| w/2 + C₂ w²/8` (the latter collapses near the
/// flat maximum). `slack` is the absolute gap allowed between `upper` and
/// the best achieved value; pass roughly `0.05/n` when the result is raised
/// to the `n`-th power.
pub fn max_theta_over_shift(
    p: NormExponent,
    tau: &Float,
    slack: f64,
    prec: u32,
) -> Result<ShiftMax> {
    let lip = theta_shift_lipschitz(p, tau, prec)?;
    let c2 = theta_shift_second_derivative_bound(p, tau, prec)?;
    let mut width = Rational::from((1, 64));
    // cell centers at i/64 (children outside [0, 1/2] mirror back by the
    // canonicalization symmetry, so clipping loses nothing)
    let mut cells: Vec<Rational> = (0..=32).map(|i| Rational::from((i, 64))).collect();
    let mut vals: Vec<RealApprox> = cells
        .iter()
        .map(|t| theta(p, tau, t, prec))
        .collect::<Result<_>>()?;
    let min_width = Rational::from((1, 1u64 << 44));
    loop {
        let w_f = width.to_f64();
        let lip_pad = lip * w_f / 2.0;
        let best_lo = vals
            .iter()
            .map(|v| v.lo().to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        // per-cell upper bounds: refine with the local derivative only for
        // cells the global pad cannot discard
        let mut cell_ub = vec![f64::NEG_INFINITY; cells.len()];
        for i in 0..cells.len() {
            let hi = vals[i].hi().to_f64();
            if hi + lip_pad < best_lo {
                cell_ub[i] = hi + lip_pad;
                continue;
            }
            let pad = match c2 {
                Some(c2v) => {
                    let d = ShiftSeries::new(p, &cells[i], prec).shift_derivative(tau)?;
                    let dmag = d.hi().to_f64().abs().max(d.lo().to_f64().abs());
                    (dmag * w_f / 2.0 + c2v * w_f * w_f / 8.0).min(lip_pad)
                }
                None => lip_pad,
            };
            cell_ub[i] = hi + pad;
        }
        let max_ub = cell_ub.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max_ub - best_lo <= slack || width <= min_width {
            let best_i = (0..cells.len())
                .max_by(|&a, &b| vals[a].value.partial_cmp(&vals[b].value).unwrap())
                .unwrap();
            return Ok(ShiftMax {
                upper: max_ub * (1.0 + 1e-14),
                best_shift: cells[best_i].clone(),
                best_value: vals[best_i].clone(),
            });
        }
        let survivors: Vec<usize> = (0..cells.len())
            .filter(|&i| cell_ub[i] >= best_lo)
            .collect();
        // split surviving cells: half width, two children each
        let quarter = width.clone() / Rational::from(4);
        let mut next_cells = Vec::with_capacity(survivors.len() * 2);
        for &i in &survivors {
            for child in [&cells[i] - quarter.clone(), &cells[i] + quarter.clone()] {
                let c: Rational = child;
                if c >= 0 && c <= Rational::from((1, 2)) {
                    next_cells.push(c);
                }
            }
        }
        if next_cells.is_empty() {
            next_cells.push(cells[survivors[0]].clone());
        }
        next_cells.sort();
        next_cells.dedup();
        cells = next_cells;
        vals = cells
            .iter()
            .map(|t| theta(p, tau, t, prec))
            .collect::<Result<_>>()?;
        width /= Rational::from(2);
    }
}

/// The hardness constants attached to one norm exponent.
#[derive(Debug, Clone)]
pub struct HardnessConstants {
    pub p: NormExponent,
    pub w_p: RealApprox,
    pub tau_star: RealApprox,
    /// `1/(1 - log₂ W_p)`; `None` when `W_p ≥ 2` (i.e. `p ≤ p_0`).
    pub c_p: Option<RealApprox>,
}

/// `W_p = min_τ exp(τ/2^p) Θ_p(τ)` via bisection on the stationarity
/// condition `μ_p(τ; 0) = 2^{-p}`, which has a unique root by log-convexity.
pub fn w_p(p: NormExponent, prec: u32) -> Result<HardnessConstants> {
    let iprec = prec + GUARD_BITS;
    let zero_shift = Rational::from(0);
    let mut series = ShiftSeries::new(p, &zero_shift, prec);
    let target = {
        let v = Float::with_val(iprec, -p.get()).exp2();
        let e = v.to_f64() * 2f64.powi(1 - iprec as i32);
        RealApprox::new(v, e.abs())
    };

    let mut tau_lo = Float::with_val(iprec, 1);
    let mut tau_hi = Float::with_val(iprec, 1);
    // expand until mu(tau_hi) < 2^-p < mu(tau_lo)
    for _ in 0..80 {
        let m = series.eval(&tau_hi)?.mu()?;
        if m.hi() < target.lo() {
            break;
        }
        tau_hi = Float::with_val(iprec, &tau_hi * 2u32);
    }
    for _ in 0..80 {
        let m = series.eval(&tau_lo)?.mu()?;
        if m.lo() > target.hi() {
            break;
        }
        tau_lo = Float::with_val(iprec, &tau_lo / 2u32);
    }

    let tol = Float::with_val(iprec, 2f64.powi(-60));
    loop {
        let width = Float::with_val(iprec, &tau_hi - &tau_lo);
        if width <= tol {
            break;
        }
        let mid = Float::with_val(iprec, (&tau_lo + &tau_hi).complete(iprec) / 2u32);
        let m = series.eval(&mid)?.mu()?;
        if m.lo() > target.hi() {
            tau_lo = mid;
        } else if m.hi() < target.lo() {
            tau_hi = mid;
        } else {
            // interval straddles the target: already within the flat region
            tau_lo = mid.clone();
            tau_hi = mid;
            break;
        }
    }
    let tau_star_f = Float::with_val(iprec, (&tau_lo + &tau_hi).complete(iprec) / 2u32);
    let tau_err = Float::with_val(iprec, &tau_hi - &tau_lo).to_f64() + 2f64.powi(-58);
    let tau_star = RealApprox::new(tau_star_f.clone(), tau_err);

    // W = exp(tau* 2^-p) Theta(tau*); the objective is stationary at tau*, so
    // the tau uncertainty enters quadratically: |W(τ̂)-W(τ*)| ≤ W·V·(Δτ)²
    let sums = series.eval(&tau_star_f)?;
    let w = RealApprox::exact(tau_star_f.clone())
        .mul(&target)
        .exp()
        .mul(&sums.s0);
    let v = sums.variance()?.to_f64().abs().max(1.0);
    let quad = w.to_f64().abs() * v * tau_err * tau_err;
    let w = {
        let mut w2 = w.clone();
        w2.add_err(2.0 * quad);
        w2
    };

    let two = Float::with_val(iprec, 2);
    let c_p = if w.hi() < two {
        let log2w = w.ln()?.div(&RealApprox::exact(Float::with_val(iprec, 2).ln()))?;
        let one = RealApprox::exact(Float::with_val(iprec, 1));
        Some(one.div(&one.sub(&log2w))?)
    } else {
        None
    };
    Ok(HardnessConstants {
        p,
        w_p: w,
        tau_star,
        c_p,
    })
}

/// `p_0`, the unique solution of `W_p = 2`, by bisection over `[2, 2.5]`
/// after verifying the sign change at the endpoints.
pub fn find_p0(prec: u32) -> Result<RealApprox> {
    let two = Float::with_val(prec, 2);
    let w_at = |p: f64| -> Result<RealApprox> { Ok(w_p(NormExponent::new(p)?, prec)?.w_p) };
    let mut lo = 2.0f64;
    let mut hi = 2.5f64;
    if !(w_at(lo)?.lo() > two) {
        return Err(Error::internal("W_2 > 2 failed at bracket endpoint"));
    }
    if !(w_at(hi)?.hi() < two) {
        return Err(Error::internal("W_2.5 < 2 failed at bracket endpoint"));
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let w = w_at(mid)?;
        if w.lo() > two {
            lo = mid;
        } else if w.hi() < two {
            hi = mid;
        } else {
            return Err(Error::internal(
                "W_p enclosure too wide to resolve the sign near p0",
            ));
        }
    }
    Ok(RealApprox::new(
        Float::with_val(prec, 0.5 * (lo + hi)),
        (hi - lo) / 2.0 + 1e-15,
    ))
}

/// Closed-form bound `C_p < 1/(1 - 2^{-p}(p + log₂(3e)))`, valid for `p ≥ 3`.
pub fn cp_simple_bound(p: f64) -> Result<f64> {
    if p < 3.0 {
        return Err(Error::domain("cp_simple_bound requires p >= 3"));
    }
    let log2_3e = (3.0 * std::f64::consts::E).log2();
    Ok(1.0 / (1.0 - 2f64.powf(-p) * (p + log2_3e)))
}
