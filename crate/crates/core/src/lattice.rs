//! General lattice primitives at small rank: exact enumeration, `λ_1` and
//! `dist`, primitive- and annoying-vector counting, direct sums, scaling, and
//! random sparsification.
//!
//! A [`Basis`] stores a rational core matrix together with one positive scale
//! factor per row. Reduction instances mix exactly-rational rows with rows
//! scaled by certified irrational constants (the gadget scaling `α`, the
//! `r*` entries of the set-cover matrix); keeping the scale out of the core
//! preserves exact coefficient arithmetic for sparsification and rank checks,
//! while row costs `|v|^p · κ^p` stay certified.
//!
//! Decisions compare `p`-th powers of distances throughout, so radii enter as
//! [`RadiusPow`] budgets. Comparisons that an enclosure cannot resolve are
//! treated as inside (the boundary is included) and flagged on the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::counting::RadiusPow;
use crate::error::{Error, Result};
use crate::real::{NormExponent, RealApprox};

/// Working precision for scaled-row cost arithmetic.
const COST_PREC: u32 = 384;

/// Per-row scale factor.
///
/// `PthRoot(b)` is the scale `κ = b^{1/p}` for the norm exponent the basis is
/// used with: the row cost `|v|^p κ^p = |v|^p b` stays exactly rational, so
/// decisions on such rows never hit enclosure boundaries.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub enum RowScale {
    One,
    Real(RealApprox),
    PthRoot(Rational),
}

/// `κ^p` for one row, exact where the representation allows.
#[derive(Debug, Clone)]
enum ScalePow {
    One,
    Exact(Rational),
    Approx(RealApprox),
}

fn scale_pow_for(scale: &RowScale, p: NormExponent) -> Result<ScalePow> {
    Ok(match scale {
        RowScale::One => ScalePow::One,
        RowScale::Real(r) => ScalePow::Approx(r.pow_f64(p.get())?),
        RowScale::PthRoot(b) => ScalePow::Exact(b.clone()),
    })
}

fn scale_lo_f64(scale: &RowScale, p: NormExponent) -> f64 {
    match scale {
        RowScale::One => 1.0,
        RowScale::Real(r) => r.lo().to_f64(),
        RowScale::PthRoot(b) => b.to_f64().powf(1.0 / p.get()),
    }
}

/// Enumeration limits; exceeding any of them refuses rather than answers.
#[derive(Debug, Clone)]
pub struct EnumLimits {
    pub max_rank: usize,
    pub max_nodes: u64,
    pub max_box_radius: f64,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits {
            max_rank: 14,
            max_nodes: 200_000_000,
            max_box_radius: 1e7,
        }
    }
}

/// A lattice basis: `d × n` rational core of full column rank, with one
/// positive scale per row.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Basis {
    entries: Vec<Vec<Rational>>,
    row_scale: Vec<RowScale>,
    d: usize,
    n: usize,
}

impl Basis {
    pub fn new(entries: Vec<Vec<Rational>>) -> Result<Self> {
        let d = entries.len();
        if d == 0 {
            return Err(Error::domain("basis must have at least one row"));
        }
        let n = entries[0].len();
        if n == 0 || entries.iter().any(|r| r.len() != n) {
            return Err(Error::domain("basis rows must be nonempty and equal length"));
        }
        if n > d {
            return Err(Error::domain("need d >= n (full column rank)"));
        }
        let row_scale = vec![RowScale::One; d];
        let b = Basis {
            entries,
            row_scale,
            d,
            n,
        };
        if b.exact_rank() != n {
            return Err(Error::domain("basis columns are linearly dependent"));
        }
        Ok(b)
    }

    pub fn with_row_scales(entries: Vec<Vec<Rational>>, scales: Vec<RowScale>) -> Result<Self> {
        if scales.len() != entries.len() {
            return Err(Error::domain("one scale per row required"));
        }
        for s in &scales {
            match s {
                RowScale::Real(r) if !(r.lo() > 0) => {
                    return Err(Error::domain("row scales must be certified positive"));
                }
                RowScale::PthRoot(b) if !(*b > 0) => {
                    return Err(Error::domain("PthRoot row scales must be positive"));
                }
                _ => {}
            }
        }
        let mut b = Basis::new(entries)?;
        b.row_scale = scales;
        Ok(b)
    }

    /// Identity basis of `Z^n`.
    pub fn integer_lattice(n: usize) -> Basis {
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Rational::from(u32::from(i == j)))
                    .collect()
            })
            .collect();
        Basis::new(entries).expect("identity is a basis")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &Rational {
        &self.entries[i][j]
    }

    pub fn row_scales(&self) -> &[RowScale] {
        &self.row_scale
    }

    fn exact_rank(&self) -> usize {
        let mut m = self.entries.clone();
        let (rows, cols) = (self.d, self.n);
        let mut rank = 0;
        for col in 0..cols {
            let pivot = (rank..rows).find(|&r| m[r][col] != 0);
            let Some(pr) = pivot else { continue };
            m.swap(rank, pr);
            let inv = Rational::from(1) / m[rank][col].clone();
            for c in col..cols {
                m[rank][c] = Rational::from(&m[rank][c] * &inv);
            }
            for r in 0..rows {
                if r != rank && m[r][col] != 0 {
                    let f = m[r][col].clone();
                    for c in col..cols {
                        let sub = Rational::from(&m[rank][c] * &f);
                        m[r][c] -= sub;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Block-diagonal direct sum; row scales concatenate.
    pub fn direct_sum(&self, other: &Basis) -> Basis {
        let d = self.d + other.d;
        let n = self.n + other.n;
        let mut entries = vec![vec![Rational::from(0); n]; d];
        for i in 0..self.d {
            for j in 0..self.n {
                entries[i][j] = self.entries[i][j].clone();
            }
        }
        for i in 0..other.d {
            for j in 0..other.n {
                entries[self.d + i][self.n + j] = other.entries[i][j].clone();
            }
        }
        let mut row_scale = self.row_scale.clone();
        row_scale.extend(other.row_scale.iter().cloned());
        Basis {
            entries,
            row_scale,
            d,
            n,
        }
    }

    /// Scale every vector by a rational factor (kept exact in the core).
    pub fn scale_rational(&self, alpha: &Rational) -> Result<Basis> {
        if *alpha == 0 {
            return Err(Error::domain("scale factor must be nonzero"));
        }
        let entries = self
            .entries
            .iter()
            .map(|row| row.iter().map(|e| Rational::from(e * alpha)).collect())
            .collect();
        Ok(Basis {
            entries,
            row_scale: self.row_scale.clone(),
            d: self.d,
            n: self.n,
        })
    }

    /// Scale every vector by a certified positive real factor (folded into
    /// the row scales).
    pub fn scale_real(&self, alpha: &RealApprox) -> Result<Basis> {
        if !(alpha.lo() > 0) {
            return Err(Error::domain("scale factor must be certified positive"));
        }
        let mut row_scale = Vec::with_capacity(self.row_scale.len());
        for s in &self.row_scale {
            row_scale.push(match s {
                RowScale::One => RowScale::Real(alpha.clone()),
                RowScale::Real(r) => RowScale::Real(r.mul(alpha)),
                RowScale::PthRoot(_) => {
                    return Err(Error::domain(
                        "cannot real-scale a PthRoot row without the norm exponent",
                    ))
                }
            });
        }
        Ok(Basis {
            entries: self.entries.clone(),
            row_scale,
            d: self.d,
            n: self.n,
        })
    }

    /// The lifted basis `[[B, col], [0, e]]`: appends one column and one new
    /// bottom row holding `e` in the new column.
    pub fn append_column_and_row(
        &self,
        column: Vec<Rational>,
        corner: Rational,
        corner_scale: RowScale,
    ) -> Result<Basis> {
        if column.len() != self.d {
            return Err(Error::domain("appended column must match dimension"));
        }
        if corner == 0 {
            return Err(Error::domain("corner entry must be nonzero"));
        }
        let mut entries = Vec::with_capacity(self.d + 1);
        for (row, extra) in self.entries.iter().zip(&column) {
            let mut r = row.clone();
            r.push(extra.clone());
            entries.push(r);
        }
        let mut last = vec![Rational::from(0); self.n];
        last.push(corner);
        entries.push(last);
        let mut scales = self.row_scale.clone();
        scales.push(corner_scale);
        Basis::with_row_scales(entries, scales)
    }

    /// Exact pseudo-inverse rows of the rational core (`(BᵀB)⁻¹Bᵀ`).
    fn dual_rows(&self) -> Result<Vec<Vec<Rational>>> {
        let n = self.n;
        let mut gram = vec![vec![Rational::from(0); n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = Rational::from(0);
                for r in 0..self.d {
                    s += Rational::from(&self.entries[r][i] * &self.entries[r][j]);
                }
                gram[i][j] = s;
            }
        }
        let inv = invert_rational(&gram)
            .ok_or_else(|| Error::internal("gram matrix singular despite rank check"))?;
        let mut dual = vec![vec![Rational::from(0); self.d]; n];
        for (i, inv_row) in inv.iter().enumerate() {
            for r in 0..self.d {
                let mut s = Rational::from(0);
                for (k, inv_ik) in inv_row.iter().enumerate() {
                    s += Rational::from(inv_ik * &self.entries[r][k]);
                }
                dual[i][r] = s;
            }
        }
        Ok(dual)
    }
}

fn invert_rational(m: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut inv: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Rational::from(u32::from(i == j)))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != 0)?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let pinv = Rational::from(1) / a[col][col].clone();
        for c in 0..n {
            a[col][c] = Rational::from(&a[col][c] * &pinv);
            inv[col][c] = Rational::from(&inv[col][c] * &pinv);
        }
        for r in 0..n {
            if r != col && a[r][col] != 0 {
                let f = a[r][col].clone();
                for c in 0..n {
                    let s1 = Rational::from(&a[col][c] * &f);
                    a[r][c] -= s1;
                    let s2 = Rational::from(&inv[col][c] * &f);
                    inv[r][c] -= s2;
                }
            }
        }
    }
    Some(inv)
}

/// A lattice point found by enumeration.
#[derive(Debug, Clone)]
pub struct FoundPoint {
    pub coeffs: Vec<i64>,
    /// Exact cost `‖y - t‖_p^p` when fully rational.
    pub cost_exact: Option<Rational>,
    pub cost: RealApprox,
    /// Set when the budget comparison was not resolvable at working
    /// precision and the point was included.
    pub boundary: bool,
}

/// The p-th power of a row cost, exact where possible.
enum CostTerm {
    Exact(Rational),
    Approx(RealApprox),
}

struct CostAcc {
    exact: Rational,
    approx_lo: Float,
    approx_hi: Float,
    has_approx: bool,
}

impl CostAcc {
    fn zero() -> Self {
        CostAcc {
            exact: Rational::from(0),
            approx_lo: Float::with_val(COST_PREC, 0),
            approx_hi: Float::with_val(COST_PREC, 0),
            has_approx: false,
        }
    }
    fn add(&mut self, t: &CostTerm) {
        match t {
            CostTerm::Exact(q) => self.exact += q,
            CostTerm::Approx(r) => {
                self.approx_lo += r.lo();
                self.approx_hi += r.hi();
                self.has_approx = true;
            }
        }
    }
    fn sub(&mut self, t: &CostTerm) {
        match t {
            CostTerm::Exact(q) => self.exact -= q,
            CostTerm::Approx(r) => {
                self.approx_lo -= r.lo();
                self.approx_hi -= r.hi();
            }
        }
    }
    fn lo_hi(&self) -> (Float, Float) {
        let e = Float::with_val(COST_PREC, &self.exact);
        (
            Float::with_val(COST_PREC, &e + &self.approx_lo),
            Float::with_val(COST_PREC, &e + &self.approx_hi),
        )
    }
}

enum Budget {
    Exact(Rational),
    Interval { lo: Float, hi: Float },
}

impl Budget {
    fn from_radius_pow(rp: &RadiusPow) -> Budget {
        match rp {
            RadiusPow::Exact(q) => Budget::Exact(q.clone()),
            RadiusPow::Certified(r) => Budget::Interval {
                lo: r.lo(),
                hi: r.hi(),
            },
        }
    }
    fn hi_float(&self) -> Float {
        match self {
            Budget::Exact(q) => Float::with_val(COST_PREC, q),
            Budget::Interval { hi, .. } => hi.clone(),
        }
    }
    /// `Some(true)`: certainly within; `Some(false)`: certainly outside;
    /// `None`: unresolved at working precision.
    fn contains(&self, acc: &CostAcc) -> Option<bool> {
        match self {
            Budget::Exact(q) if !acc.has_approx => Some(acc.exact <= *q),
            _ => {
                let (clo, chi) = acc.lo_hi();
                let (blo, bhi) = match self {
                    Budget::Exact(q) => {
                        let f = Float::with_val(COST_PREC, q);
                        (f.clone(), f)
                    }
                    Budget::Interval { lo, hi } => (lo.clone(), hi.clone()),
                };
                if chi <= blo {
                    Some(true)
                } else if clo > bhi {
                    Some(false)
                } else {
                    None
                }
            }
        }
    }
    fn certainly_above(&self, acc: &CostAcc) -> bool {
        matches!(self.contains(acc), Some(false))
    }
}

fn row_cost(v: &Rational, pk: Option<u32>, p: NormExponent, scale_pow: &ScalePow) -> CostTerm {
    if *v == 0 {
        return CostTerm::Exact(Rational::from(0));
    }
    let a = v.clone().abs();
    match (pk, scale_pow) {
        (Some(k), ScalePow::One) => {
            let c = Rational::from(a.numer().clone().pow(k))
                / Rational::from(a.denom().clone().pow(k));
            CostTerm::Exact(c)
        }
        (Some(k), ScalePow::Exact(b)) => {
            let c = Rational::from(a.numer().clone().pow(k))
                / Rational::from(a.denom().clone().pow(k));
            CostTerm::Exact(c * b)
        }
        (Some(k), ScalePow::Approx(sp)) => {
            let c = Rational::from(a.numer().clone().pow(k))
                / Rational::from(a.denom().clone().pow(k));
            CostTerm::Approx(RealApprox::from_rational(&c, COST_PREC).mul(sp))
        }
        (None, sp) => {
            let base = RealApprox::from_rational(&a, COST_PREC)
                .pow_f64(p.get())
                .expect("positive base");
            match sp {
                ScalePow::One => CostTerm::Approx(base),
                ScalePow::Exact(b) => {
                    CostTerm::Approx(base.mul(&RealApprox::from_rational(b, COST_PREC)))
                }
                ScalePow::Approx(s) => CostTerm::Approx(base.mul(s)),
            }
        }
    }
}

struct EnumCtx<'a, 'b> {
    basis: &'a Basis,
    order: Vec<usize>,
    resolved_at: Vec<Vec<usize>>,
    lo_bound: Vec<i64>,
    hi_bound: Vec<i64>,
    pk: Option<u32>,
    p: NormExponent,
    scale_pow: Vec<ScalePow>,
    budget: Budget,
    max_nodes: u64,
    nodes: u64,
    sink: &'b mut dyn FnMut(FoundPoint),
}

impl EnumCtx<'_, '_> {
    fn dfs(
        &mut self,
        lvl: usize,
        coeffs: &mut Vec<i64>,
        row_vals: &mut [Rational],
        acc: &mut CostAcc,
    ) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(Error::refused("enumeration node budget exceeded"));
        }
        if lvl == self.order.len() {
            match self.budget.contains(acc) {
                Some(true) | None => {
                    let boundary = self.budget.contains(acc).is_none();
                    let (clo, chi) = acc.lo_hi();
                    let mid = Float::with_val(COST_PREC, &clo + &chi) / 2u32;
                    let half = Float::with_val(64, Float::with_val(COST_PREC, &chi - &clo) / 2u32);
                    let cost = RealApprox::with_err(mid, half.abs());
                    let mut x = vec![0i64; self.basis.rank()];
                    for (i, &col) in self.order.iter().enumerate() {
                        x[col] = coeffs[i];
                    }
                    (self.sink)(FoundPoint {
                        coeffs: x,
                        cost_exact: if acc.has_approx {
                            None
                        } else {
                            Some(acc.exact.clone())
                        },
                        cost,
                        boundary,
                    });
                }
                Some(false) => {}
            }
            return Ok(());
        }
        let col = self.order[lvl];
        let touched: Vec<usize> = (0..self.basis.dim())
            .filter(|&r| self.basis.entries[r][col] != 0)
            .collect();
        for x in self.lo_bound[col]..=self.hi_bound[col] {
            coeffs.push(x);
            for &r in &touched {
                row_vals[r] += Rational::from(&self.basis.entries[r][col] * Rational::from(x));
            }
            let mut added: Vec<CostTerm> = Vec::new();
            for &r in &self.resolved_at[lvl] {
                let t = row_cost(&row_vals[r], self.pk, self.p, &self.scale_pow[r]);
                acc.add(&t);
                added.push(t);
            }
            if !self.budget.certainly_above(acc) {
                self.dfs(lvl + 1, coeffs, row_vals, acc)?;
            }
            for t in &added {
                acc.sub(t);
            }
            for &r in &touched {
                row_vals[r] -= Rational::from(&self.basis.entries[r][col] * Rational::from(x));
            }
            coeffs.pop();
        }
        Ok(())
    }
}

/// Exact branch-and-bound enumeration: all lattice vectors `y` with
/// `‖y - target‖_p^p ≤ rpow`, as coefficient vectors. Points whose boundary
/// status cannot be resolved are included and flagged.
pub fn enumerate_points(
    basis: &Basis,
    p: NormExponent,
    rpow: &RadiusPow,
    target: &[Rational],
    limits: &EnumLimits,
) -> Result<Vec<FoundPoint>> {
    let mut out = Vec::new();
    enumerate_points_visit(basis, p, rpow, target, limits, &mut |pt| out.push(pt))?;
    out.sort_by(|a, b| a.coeffs.cmp(&b.coeffs));
    Ok(out)
}

/// Streaming variant of [`enumerate_points`]: feeds each found point to the
/// visitor (construction order, not sorted), never materializing the list.
pub fn enumerate_points_visit(
    basis: &Basis,
    p: NormExponent,
    rpow: &RadiusPow,
    target: &[Rational],
    limits: &EnumLimits,
    visit: &mut dyn FnMut(FoundPoint),
) -> Result<()> {
    if basis.n > limits.max_rank {
        return Err(Error::refused(format!(
            "rank {} above enumeration cap {}",
            basis.n, limits.max_rank
        )));
    }
    if target.len() != basis.d {
        return Err(Error::domain("target dimension must match basis"));
    }
    let budget = Budget::from_radius_pow(rpow);
    let pk = p.as_integer();

    let scale_pow: Vec<ScalePow> = basis
        .row_scale
        .iter()
        .map(|s| scale_pow_for(s, p))
        .collect::<Result<_>>()?;

    // coefficient box: |x_i - <d_i, t>| <= sum_j |d_ij| · r / κ_j
    let dual = basis.dual_rows()?;
    let budget_hi = budget.hi_float();
    if budget_hi < 0 {
        return Ok(());
    }
    let r_hi = Float::with_val(COST_PREC, budget_hi.clone().pow(1.0 / p.get())).to_f64()
        * (1.0 + 1e-9)
        + 1e-300;
    let mut lo_bound = vec![0i64; basis.n];
    let mut hi_bound = vec![0i64; basis.n];
    for i in 0..basis.n {
        let center: f64 = (0..basis.d)
            .map(|r| dual[i][r].to_f64() * target[r].to_f64())
            .sum();
        let mut radius = 0.0f64;
        for r in 0..basis.d {
            let kappa_lo = scale_lo_f64(&basis.row_scale[r], p);
            radius += dual[i][r].to_f64().abs() * (r_hi / kappa_lo);
        }
        radius = radius * (1.0 + 1e-9) + 1e-9;
        if !radius.is_finite() || radius > limits.max_box_radius {
            return Err(Error::refused(format!(
                "coefficient box radius {radius:.3e} exceeds cap"
            )));
        }
        lo_bound[i] = (center - radius).floor() as i64;
        hi_bound[i] = (center + radius).ceil() as i64;
    }

    // column order: greedily pick the column that completes the most rows
    let supports: Vec<Vec<usize>> = (0..basis.d)
        .map(|r| {
            (0..basis.n)
                .filter(|&c| basis.entries[r][c] != 0)
                .collect()
        })
        .collect();
    let mut order: Vec<usize> = Vec::with_capacity(basis.n);
    let mut chosen = vec![false; basis.n];
    for _ in 0..basis.n {
        let mut best = usize::MAX;
        let mut best_score = -1i64;
        for c in 0..basis.n {
            if chosen[c] {
                continue;
            }
            let score = supports
                .iter()
                .filter(|sup| sup.contains(&c) && sup.iter().all(|&cc| cc == c || chosen[cc]))
                .count() as i64;
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        chosen[best] = true;
        order.push(best);
    }
    let mut resolved_at: Vec<Vec<usize>> = vec![Vec::new(); basis.n];
    {
        let mut assigned = vec![false; basis.n];
        for (lvl, &c) in order.iter().enumerate() {
            assigned[c] = true;
            for (r, sup) in supports.iter().enumerate() {
                if !sup.is_empty() && sup.contains(&c) && sup.iter().all(|&cc| assigned[cc]) {
                    resolved_at[lvl].push(r);
                }
            }
        }
    }
    // rows with empty support contribute the fixed target residual
    let mut base_acc = CostAcc::zero();
    for (r, sup) in supports.iter().enumerate() {
        if sup.is_empty() {
            let v = Rational::from(-&target[r]);
            base_acc.add(&row_cost(&v, pk, p, &scale_pow[r]));
        }
    }

    let mut ctx = EnumCtx {
        basis,
        order,
        resolved_at,
        lo_bound,
        hi_bound,
        pk,
        p,
        scale_pow,
        budget,
        max_nodes: limits.max_nodes,
        nodes: 0,
        sink: visit,
    };
    let mut row_vals: Vec<Rational> = target.iter().map(|t| Rational::from(-t)).collect();
    let mut coeffs = Vec::with_capacity(basis.n);
    let mut acc = base_acc;
    ctx.dfs(0, &mut coeffs, &mut row_vals, &mut acc)?;
    Ok(())
}

/// Zero target of the right dimension.
pub fn zero_target(basis: &Basis) -> Vec<Rational> {
    vec![Rational::from(0); basis.dim()]
}

/// `λ_1^{(p)}`: exact minimum over nonzero vectors, as (`λ_1`, `λ_1^p`).
pub fn lambda1(
    basis: &Basis,
    p: NormExponent,
    limits: &EnumLimits,
) -> Result<(RealApprox, RadiusPow)> {
    // the cheapest basis column is an upper bound for lambda_1
    let target = zero_target(basis);
    let mut seed: Option<RealApprox> = None;
    for j in 0..basis.rank() {
        let mut acc = RealApprox::exact(Float::with_val(COST_PREC, 0));
        for r in 0..basis.dim() {
            let v = basis.entries[r][j].clone().abs();
            if v == 0 {
                continue;
            }
            let base = RealApprox::from_rational(&v, COST_PREC)
                .pow_f64(p.get())
                .expect("positive");
            let term = match scale_pow_for(&basis.row_scale[r], p)? {
                ScalePow::One => base,
                ScalePow::Exact(b) => base.mul(&RealApprox::from_rational(&b, COST_PREC)),
                ScalePow::Approx(s) => base.mul(&s),
            };
            acc = acc.add(&term);
        }
        seed = Some(match seed {
            None => acc,
            Some(s) if acc.hi() < s.hi() => acc,
            Some(s) => s,
        });
    }
    let seed = seed.expect("rank >= 1");
    let pts = enumerate_points(basis, p, &RadiusPow::Certified(seed), &target, limits)?;
    let best = pts
        .iter()
        .filter(|pt| pt.coeffs.iter().any(|&c| c != 0))
        .min_by(|a, b| a.cost.value.partial_cmp(&b.cost.value).unwrap())
        .ok_or_else(|| Error::internal("seed radius excluded all basis vectors"))?;
    let lam = best.cost.pow_f64(1.0 / p.get())?;
    let pow = match &best.cost_exact {
        Some(q) => RadiusPow::Exact(q.clone()),
        None => RadiusPow::Certified(best.cost.clone()),
    };
    Ok((lam, pow))
}

/// `dist_p(target, L)`: exact minimum distance, as (`dist`, `dist^p`).
pub fn dist(
    basis: &Basis,
    target: &[Rational],
    p: NormExponent,
    limits: &EnumLimits,
) -> Result<(RealApprox, RadiusPow)> {
    // seed: cost of the rounded dual solve (Babai-style candidate)
    let dual = basis.dual_rows()?;
    let x0: Vec<i64> = (0..basis.rank())
        .map(|i| {
            (0..basis.dim())
                .map(|r| dual[i][r].to_f64() * target[r].to_f64())
                .sum::<f64>()
                .round() as i64
        })
        .collect();
    let mut acc = RealApprox::exact(Float::with_val(COST_PREC, 0));
    let mut all_exact_zero = true;
    for r in 0..basis.dim() {
        let mut v = Rational::from(-&target[r]);
        for (j, &x) in x0.iter().enumerate() {
            v += Rational::from(&basis.entries[r][j] * Rational::from(x));
        }
        let v = v.abs();
        if v == 0 {
            continue;
        }
        all_exact_zero = false;
        let base = RealApprox::from_rational(&v, COST_PREC).pow_f64(p.get())?;
        let term = match scale_pow_for(&basis.row_scale[r], p)? {
            ScalePow::One => base,
            ScalePow::Exact(b) => base.mul(&RealApprox::from_rational(&b, COST_PREC)),
            ScalePow::Approx(s) => base.mul(&s),
        };
        acc = acc.add(&term);
    }
    if all_exact_zero {
        return Ok((
            RealApprox::exact(Float::with_val(COST_PREC, 0)),
            RadiusPow::Exact(Rational::from(0)),
        ));
    }
    let pts = enumerate_points(basis, p, &RadiusPow::Certified(acc), target, limits)?;
    let best = pts
        .iter()
        .min_by(|a, b| a.cost.value.partial_cmp(&b.cost.value).unwrap())
        .ok_or_else(|| Error::internal("seed radius excluded the rounding candidate"))?;
    if best.cost_exact.as_ref().is_some_and(|q| *q == 0) {
        return Ok((
            RealApprox::exact(Float::with_val(COST_PREC, 0)),
            RadiusPow::Exact(Rational::from(0)),
        ));
    }
    let d = best.cost.pow_f64(1.0 / p.get())?;
    let pow = match &best.cost_exact {
        Some(q) => RadiusPow::Exact(q.clone()),
        None => RadiusPow::Certified(best.cost.clone()),
    };
    Ok((d, pow))
}

/// `ξ_p(L, r)`: primitive vectors of length at most `r`, counted up to sign.
pub fn count_primitive(
    basis: &Basis,
    p: NormExponent,
    rpow: &RadiusPow,
    limits: &EnumLimits,
) -> Result<u64> {
    let pts = enumerate_points(basis, p, rpow, &zero_target(basis), limits)?;
    let mut primitive = 0u64;
    for pt in &pts {
        if pt.coeffs.iter().all(|&c| c == 0) {
            continue;
        }
        let mut g = Integer::from(0);
        for &c in &pt.coeffs {
            g = g.gcd(&Integer::from(c));
        }
        if g == 1 {
            primitive += 1;
        }
    }
    debug_assert!(primitive % 2 == 0, "points come in ± pairs");
    Ok(primitive / 2)
}

/// The annoying-vector count
/// `A^{(p)}_{r,s,γ} = Σ_z N_p(L, (γ^p r^p - (z^p - γ^p) s^p)^{1/p}, z t⃗) - 1`,
/// summed over nonnegative `z` with nonnegative radicand. Radii enter as
/// `p`-th powers.
pub fn annoying_count(
    basis: &Basis,
    target: &[Rational],
    p: NormExponent,
    rpow: &RealApprox,
    spow: &RealApprox,
    gamma_pow: &RealApprox,
    limits: &EnumLimits,
) -> Result<Integer> {
    if !(gamma_pow.lo() >= 1) {
        return Err(Error::domain("gamma must be at least 1"));
    }
    let mut total = Integer::from(-1);
    let mut z = 0u32;
    loop {
        // shell radius^p = γ^p r^p - (z^p - γ^p) s^p
        let zp = if z == 0 {
            RealApprox::exact(Float::with_val(COST_PREC, 0))
        } else {
            RealApprox::from_u64(z as u64, COST_PREC).pow_f64(p.get())?
        };
        let shell = gamma_pow.mul(rpow).sub(&zp.sub(gamma_pow).mul(spow));
        if shell.hi() < 0 {
            break;
        }
        let scaled_target: Vec<Rational> = target
            .iter()
            .map(|t| Rational::from(t * Rational::from(z)))
            .collect();
        let pts = enumerate_points(
            basis,
            p,
            &RadiusPow::Certified(shell),
            &scaled_target,
            limits,
        )?;
        total += pts.len() as u64;
        z += 1;
        if z > 1_000_000 {
            return Err(Error::internal("annoying-vector shell index ran away"));
        }
    }
    Ok(total)
}

/// Outcome of one sparsification draw.
#[derive(Debug, Clone)]
pub struct Sparsified {
    pub basis: Basis,
    /// The random linear form `z⃗ ∈ Z_q^n` defining the congruence.
    pub zvec: Vec<u64>,
    /// Coefficient transform: columns generate the congruence sublattice.
    pub transform: Vec<Vec<Integer>>,
    pub q: u64,
}

pub fn is_prime_u64(q: u64) -> bool {
    if q < 1 << 20 {
        if q < 2 {
            return false;
        }
        let mut d = 2u64;
        while d * d <= q {
            if q % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    } else {
        Integer::from(q).is_probably_prime(40) != rug::integer::IsPrime::No
    }
}

/// Whether an old-basis coefficient vector satisfies `⟨z⃗, a⟩ ≡ 0 (mod q)`.
pub fn congruence_holds(zvec: &[u64], q: u64, coeffs: &[i64]) -> bool {
    let mut acc: i128 = 0;
    for (c, z) in coeffs.iter().zip(zvec) {
        acc = (acc + (*c as i128).rem_euclid(q as i128) * (*z as i128)).rem_euclid(q as i128);
    }
    acc == 0
}

/// Random sparsification: draws `z⃗ ∈ Z_q^n` uniformly (seeded) and returns a
/// basis of `{v ∈ L : ⟨z⃗, coeffs(v)⟩ ≡ 0 mod q}` via exact integer column
/// operations. Requires prime `q ≥ 101`.
pub fn sparsify(basis: &Basis, q: u64, seed: u64) -> Result<Sparsified> {
    if q < 101 || !is_prime_u64(q) {
        return Err(Error::precondition("q must be a prime at least 101"));
    }
    let n = basis.rank();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let zvec: Vec<u64> = (0..n).map(|_| rng.random_range(0..q)).collect();
    let transform = congruence_transform(&zvec, q);
    let basis = apply_transform(basis, &transform)?;
    Ok(Sparsified {
        basis,
        zvec,
        transform,
        q,
    })
}

/// Columns generating `{a ∈ Z^n : ⟨z, a⟩ ≡ 0 mod q}` (index q when z ≢ 0).
fn congruence_transform(zvec: &[u64], q: u64) -> Vec<Vec<Integer>> {
    let n = zvec.len();
    let pivot = zvec.iter().position(|&z| z % q != 0);
    let mut cols: Vec<Vec<Integer>> = Vec::with_capacity(n);
    match pivot {
        None => {
            for i in 0..n {
                let mut e = vec![Integer::from(0); n];
                e[i] = Integer::from(1);
                cols.push(e);
            }
        }
        Some(j) => {
            let zj_inv = Integer::from(zvec[j])
                .invert(&Integer::from(q))
                .expect("pivot invertible mod prime");
            for i in 0..n {
                if i == j {
                    let mut e = vec![Integer::from(0); n];
                    e[j] = Integer::from(q);
                    cols.push(e);
                } else {
                    // e_i - (z_i / z_j mod q) e_j
                    let c = Integer::from(zvec[i]) * &zj_inv % Integer::from(q);
                    let mut e = vec![Integer::from(0); n];
                    e[i] = Integer::from(1);
                    e[j] = -c;
                    cols.push(e);
                }
            }
        }
    }
    cols
}

fn apply_transform(basis: &Basis, cols: &[Vec<Integer>]) -> Result<Basis> {
    let n = basis.rank();
    let d = basis.dim();
    let mut entries = vec![vec![Rational::from(0); n]; d];
    for (jnew, col) in cols.iter().enumerate() {
        for (r, row) in entries.iter_mut().enumerate() {
            let mut s = Rational::from(0);
            for (jold, coef) in col.iter().enumerate() {
                if *coef != 0 {
                    s += Rational::from(&basis.entries[r][jold] * Rational::from(coef));
                }
            }
            row[jnew] = s;
        }
    }
    Basis::with_row_scales(entries, basis.row_scale.clone())
}

/// Monte-Carlo estimate of `Pr[λ_1(L') ≤ r]` over seeded sparsification
/// draws. The survival test is exact: the short vectors of `L` are
/// enumerated once and each trial checks the congruence on them.
#[derive(Debug, Clone)]
pub struct SurvivalStats {
    pub hits: u64,
    pub trials: u64,
    pub freq: f64,
    /// `ξ_p(L, r)`, the primitive short-vector count entering the bound.
    pub primitive_count: u64,
    /// Both hypotheses (`N ≤ q/(20 log q)`, `r < q λ_1`) hold.
    pub in_guarantee: bool,
    pub notes: Vec<String>,
}

pub fn sparsify_survival_stats(
    basis: &Basis,
    p: NormExponent,
    rpow: &RadiusPow,
    q: u64,
    trials: u64,
    seed: u64,
    limits: &EnumLimits,
) -> Result<SurvivalStats> {
    if q < 101 || !is_prime_u64(q) {
        return Err(Error::precondition("q must be a prime at least 101"));
    }
    let n_prim = count_primitive(basis, p, rpow, limits)?;
    let mut notes = Vec::new();
    let mut in_guarantee = true;
    let qf = q as f64;
    if (n_prim as f64) > qf / (20.0 * qf.ln()) {
        in_guarantee = false;
        notes.push(format!(
            "N = {n_prim} exceeds q/(20 log q) = {:.3}",
            qf / (20.0 * qf.ln())
        ));
    }
    let (lam, _) = lambda1(basis, p, limits)?;
    let rpow_hi = match rpow {
        RadiusPow::Exact(x) => Float::with_val(COST_PREC, x),
        RadiusPow::Certified(x) => x.hi(),
    };
    let q_lam_pow = lam.mul_f64(qf).pow_f64(p.get())?;
    if !(rpow_hi < q_lam_pow.lo()) {
        in_guarantee = false;
        notes.push(format!(
            "r is not below q·λ1 (λ1 = {})",
            lam.to_f64()
        ));
    }
    let pts = enumerate_points(basis, p, rpow, &zero_target(basis), limits)?;
    let shorts: Vec<Vec<i64>> = pts
        .into_iter()
        .filter(|pt| pt.coeffs.iter().any(|&c| c != 0))
        .map(|pt| pt.coeffs)
        .collect();
    let mut hits = 0u64;
    let mut seed_rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let trial_seed: u64 = seed_rng.random();
        let mut rng = ChaCha20Rng::seed_from_u64(trial_seed);
        let zvec: Vec<u64> = (0..basis.rank()).map(|_| rng.random_range(0..q)).collect();
        if shorts.iter().any(|c| congruence_holds(&zvec, q, c)) {
            hits += 1;
        }
    }
    Ok(SurvivalStats {
        hits,
        trials,
        freq: hits as f64 / trials.max(1) as f64,
        primitive_count: n_prim,
        in_guarantee,
        notes,
    })
}
