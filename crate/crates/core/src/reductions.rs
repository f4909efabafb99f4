//! The executable reduction pipeline:
//!
//! DIMACS CNF → Gap-3-SAT → ExactSetCover → (A,G)-CVP → sparsified SVP,
//! decided at desk scale against the brute-force enumeration oracle, plus the
//! randomized `ℓ_2 → ℓ_p` embedding.
//!
//! Every randomized stage is seeded and the full run is captured in a
//! [`ReductionTranscript`] that replays byte-identically under the same seed.
//! The default parameters (`ℓ = ⌈100 d log M⌉`, `q ≈ 10 M log M`) are far
//! beyond desk scale; test-scale runs use documented overrides that mark the
//! transcript as out-of-guarantee.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::counting::{self, RadiusPow, ShiftSpec, ShiftedBallQuery};
use crate::error::{Error, Result};
use crate::gadgets::{self, ScaleFactorPow, ScaledGadget};
use crate::lattice::{self, Basis, EnumLimits, RowScale};
use crate::oracles::Decision;
use crate::real::{NormExponent, RealApprox};

/// A CNF formula with per-clause deduplicated literals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnfFormula {
    pub num_vars: usize,
    /// Signed 1-based variable indices.
    pub clauses: Vec<Vec<i32>>,
    /// Maximum clause width after deduplication.
    pub width: usize,
    /// `C'`: the maximum number of clauses any single variable appears in.
    pub occurrence_cap: usize,
    /// Number of duplicate literals removed during construction.
    pub dedup_count: usize,
}

impl CnfFormula {
    pub fn new(
        num_vars: usize,
        raw_clauses: Vec<Vec<i32>>,
        declared_width: Option<usize>,
    ) -> Result<Self> {
        if num_vars == 0 {
            return Err(Error::domain("formula needs at least one variable"));
        }
        let mut clauses = Vec::with_capacity(raw_clauses.len());
        let mut dedup_count = 0usize;
        let mut width = 0usize;
        let mut used = vec![false; num_vars + 1];
        for (ci, raw) in raw_clauses.into_iter().enumerate() {
            if raw.is_empty() {
                return Err(Error::domain(format!("clause {} is empty", ci + 1)));
            }
            let mut c = raw;
            for &lit in &c {
                let v = lit.unsigned_abs() as usize;
                if lit == 0 || v > num_vars {
                    return Err(Error::domain(format!(
                        "clause {}: literal {} out of range",
                        ci + 1,
                        lit
                    )));
                }
                used[v] = true;
            }
            c.sort_unstable();
            let before = c.len();
            c.dedup();
            dedup_count += before - c.len();
            if let Some(k) = declared_width {
                if c.len() > k {
                    return Err(Error::domain(format!(
                        "clause {} has width {} above the declared {}",
                        ci + 1,
                        c.len(),
                        k
                    )));
                }
            }
            width = width.max(c.len());
            clauses.push(c);
        }
        if clauses.is_empty() {
            return Err(Error::domain("formula has no clauses"));
        }
        for v in 1..=num_vars {
            if !used[v] {
                return Err(Error::domain(format!("variable {v} appears in no clause")));
            }
        }
        let mut occ = vec![0usize; num_vars + 1];
        for c in &clauses {
            let mut seen = vec![];
            for &lit in c {
                let v = lit.unsigned_abs() as usize;
                if !seen.contains(&v) {
                    occ[v] += 1;
                    seen.push(v);
                }
            }
        }
        let occurrence_cap = occ.into_iter().max().unwrap_or(0);
        Ok(CnfFormula {
            num_vars,
            clauses,
            width,
            occurrence_cap,
            dedup_count,
        })
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Clause indices containing `lit`.
    fn occurrences(&self, lit: i32) -> Vec<usize> {
        self.clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.contains(&lit))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&lit| {
                let v = lit.unsigned_abs() as usize - 1;
                (lit > 0) == assignment[v]
            })
        })
    }
}

/// Parse DIMACS CNF text. Duplicate literals inside a clause are
/// deduplicated and counted; a declared width (when given) is enforced.
pub fn parse_dimacs(text: &str, declared_width: Option<usize>) -> Result<CnfFormula> {
    let mut num_vars: Option<usize> = None;
    let mut num_clauses: Option<usize> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut header_line = 0usize;
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') || trimmed.starts_with('%') {
            continue;
        }
        if trimmed.starts_with('p') {
            if num_vars.is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "duplicate problem line".into(),
                });
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("malformed problem line {trimmed:?}"),
                });
            }
            num_vars = Some(parts[2].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad variable count {:?}", parts[2]),
            })?);
            num_clauses = Some(parts[3].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad clause count {:?}", parts[3]),
            })?);
            header_line = line_no;
            continue;
        }
        if num_vars.is_none() {
            return Err(Error::Parse {
                line: line_no,
                msg: "clause data before the problem line".into(),
            });
        }
        for tok in trimmed.split_whitespace() {
            let lit: i32 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad literal {tok:?}"),
            })?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "empty clause".into(),
                    });
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                current.push(lit);
            }
        }
    }
    if !current.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "clause not terminated by 0".into(),
        });
    }
    let nv = num_vars.ok_or(Error::Parse {
        line: 1,
        msg: "missing problem line".into(),
    })?;
    if let Some(nc) = num_clauses {
        if clauses.len() != nc {
            return Err(Error::Parse {
                line: header_line,
                msg: format!("header declares {nc} clauses, found {}", clauses.len()),
            });
        }
    }
    CnfFormula::new(nv, clauses, declared_width)
}

/// An exact-set-cover instance. Universe elements `0..t` are the clauses and
/// `t..t+n` are the variables of the source formula.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetCoverInstance {
    pub universe_size: usize,
    pub sets: Vec<Vec<usize>>,
    pub size_bound: usize,
    pub eta: Rational,
}

/// Set-cover reduction output with the provenance needed for witness checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SatToCover {
    pub instance: SetCoverInstance,
    pub c_prime: usize,
    pub eta_prime: Rational,
    pub num_clauses: usize,
    pub num_vars: usize,
    /// Per set: the literal it came from and the clause subset it covers.
    pub provenance: Vec<(i32, Vec<usize>)>,
}

/// Per-literal subset blow-up cap.
const OCCURRENCE_LIMIT: usize = 20;

/// Gap-3-SAT → ExactSetCover: universe = clauses ∪ variables; for each
/// literal `b` of `x_i` and each subset `S` of the clauses containing `b`,
/// the set `S ∪ {x_i}`. `η = 1/(1 + (1-η')/(3C'))` and `d = ⌈n/η⌉`, so the
/// YES threshold `ηd` sits at the witness size `n`.
pub fn sat_to_setcover(f: &CnfFormula, eta_prime: &Rational) -> Result<SatToCover> {
    if !(*eta_prime > 0 && *eta_prime < 1) {
        return Err(Error::domain("eta' must lie in (0, 1)"));
    }
    let t = f.num_clauses();
    let n = f.num_vars;
    let c_prime = f.occurrence_cap.max(1);
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut provenance: Vec<(i32, Vec<usize>)> = Vec::new();
    for var in 1..=n as i32 {
        for lit in [var, -var] {
            let occ = f.occurrences(lit);
            if occ.len() > OCCURRENCE_LIMIT {
                return Err(Error::precondition(format!(
                    "literal {lit} occurs in {} clauses (cap {OCCURRENCE_LIMIT}): \
                     the subset blow-up is 2^occurrences",
                    occ.len()
                )));
            }
            for mask in 0u32..(1u32 << occ.len()) {
                let mut set: Vec<usize> = occ
                    .iter()
                    .enumerate()
                    .filter(|(bit, _)| mask >> bit & 1 == 1)
                    .map(|(_, &ci)| ci)
                    .collect();
                provenance.push((lit, set.clone()));
                set.push(t + var as usize - 1);
                sets.push(set);
            }
        }
    }
    // η = 1/(1 + (1-η')/(3C')); d = ⌈n/η⌉ keeps the YES threshold ηd ≥ n
    let one = Rational::from(1);
    let denom = Rational::from(&one + Rational::from(&one - eta_prime) / Rational::from(3 * c_prime as u64));
    let eta = one / denom;
    let d_exact = Rational::from(n as u64) / eta.clone();
    let size_bound = {
        let num = d_exact.numer().clone();
        let den = d_exact.denom().clone();
        let (q, r) = num.div_rem(den);
        (q + Integer::from(u32::from(r != 0))).to_usize().unwrap()
    };
    if size_bound > sets.len() {
        return Err(Error::internal("size bound exceeds the set count"));
    }
    Ok(SatToCover {
        instance: SetCoverInstance {
            universe_size: t + n,
            sets,
            size_bound,
            eta,
        },
        c_prime,
        eta_prime: eta_prime.clone(),
        num_clauses: t,
        num_vars: n,
        provenance,
    })
}

/// The constructive witness from a satisfying assignment: for each variable
/// in order, the set of clauses containing its true literal and none of the
/// earlier ones. Returns set indices; the sets are disjoint and cover the
/// universe exactly when the assignment satisfies the formula.
pub fn greedy_witness(red: &SatToCover, f: &CnfFormula, assignment: &[bool]) -> Option<Vec<usize>> {
    if !f.eval(assignment) {
        return None;
    }
    let mut covered = vec![false; f.num_clauses()];
    let mut witness = Vec::with_capacity(f.num_vars);
    for var in 1..=f.num_vars {
        let lit = if assignment[var - 1] {
            var as i32
        } else {
            -(var as i32)
        };
        let subset: Vec<usize> = f
            .occurrences(lit)
            .into_iter()
            .filter(|&ci| !covered[ci])
            .collect();
        for &ci in &subset {
            covered[ci] = true;
        }
        let idx = red
            .provenance
            .iter()
            .position(|(l, s)| *l == lit && *s == subset)?;
        witness.push(idx);
    }
    covered.iter().all(|&c| c).then_some(witness)
}

/// A CVP instance in the declared `(Φ; I_n)` shape with all-halves bottom
/// target and `r = (n+1)^{1/p}/2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bgs17Instance {
    pub p: NormExponent,
    /// Top block `Φ` ((d-n) × n), possibly empty.
    pub phi: Vec<Vec<Rational>>,
    /// Top target coordinates (length d-n).
    pub target_top: Vec<Rational>,
    pub n: usize,
}

impl Bgs17Instance {
    pub fn new(
        p: NormExponent,
        phi: Vec<Vec<Rational>>,
        target_top: Vec<Rational>,
        n: usize,
    ) -> Result<Self> {
        let mut violations = Vec::new();
        if phi.len() != target_top.len() {
            violations.push("phi row count must match target_top length".to_string());
        }
        for (i, row) in phi.iter().enumerate() {
            if row.len() != n {
                violations.push(format!(
                    "phi row {i} has {} entries, want n = {n}",
                    row.len()
                ));
            }
        }
        if n == 0 {
            violations.push("n must be positive".to_string());
        }
        if violations.is_empty() {
            Ok(Bgs17Instance {
                p,
                phi,
                target_top,
                n,
            })
        } else {
            Err(Error::domain(format!(
                "shape validation failed: {}",
                violations.join("; ")
            )))
        }
    }
}

/// An `(A, G)`-CVP instance: YES when at least `G` lattice vectors lie within
/// `r` of the target, NO when the annoying-vector count is at most `A`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgCvpInstance {
    pub basis: Basis,
    /// Target in row-scale units (same scale vector as the basis rows).
    pub target: Vec<Rational>,
    pub p: NormExponent,
    pub rpow: Rational,
    pub spow: Rational,
    pub gamma_pow: Rational,
    pub a: Integer,
    pub g: Integer,
    pub notes: Vec<String>,
}

/// Pad a shape-declared CVP instance with the all-halves integer gadget
/// `I_{n†}`: `r^p` grows to `(n+n†+1)/2^p`, `s = 1`,
/// `A = ⌈√(n+n†) N_p(Z^{n+n†}, (r^p+1)^{1/p}, 0)⌉`, `G = 2^{n†}`.
pub fn pad_cvp_with_integer_gadget(
    inst: &Bgs17Instance,
    n_dagger: usize,
    prec: u32,
) -> Result<AgCvpInstance> {
    let pk = inst
        .p
        .as_integer()
        .ok_or_else(|| Error::precondition("integer p required for the exact count"))?;
    let n = inst.n;
    let total = n + n_dagger;
    let top = inst.phi.len();
    let d = top + total;
    let mut entries = vec![vec![Rational::from(0); total]; d];
    for (i, row) in inst.phi.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            entries[i][j] = e.clone();
        }
    }
    for j in 0..total {
        entries[top + j][j] = Rational::from(1);
    }
    let basis = Basis::new(entries)?;
    let mut target = inst.target_top.clone();
    target.extend(std::iter::repeat_n(Rational::from((1, 2)), total));
    let rpow = Rational::from((total as u64 + 1, 1u64 << pk));

    // A = ⌈√(n+n†) · N_p(Z^{n+n†}, (r^p+1)^{1/p}, 0)⌉, exact count
    let q = ShiftedBallQuery::new(
        inst.p,
        total,
        RadiusPow::Exact(Rational::from(&rpow + Rational::from(1))),
        ShiftSpec::Uniform(Rational::from(0)),
    )?;
    let count = counting::count_exact(&q)?.hi;
    let a = {
        let root = RealApprox::from_u64(total as u64, prec + 32).sqrt()?;
        let v = root.mul(&RealApprox::from_integer(&count, prec + 32));
        let mut f = v.hi();
        f.ceil_mut();
        f.to_integer()
            .ok_or_else(|| Error::internal("A bound not representable"))?
    };
    let g = Integer::from(1) << n_dagger as u32;
    Ok(AgCvpInstance {
        basis,
        target,
        p: inst.p,
        rpow,
        spow: Rational::from(1),
        gamma_pow: Rational::from(1),
        a,
        g,
        notes: vec![format!("padded with I_{n_dagger} and half-target")],
    })
}

/// ExactSetCover → (A,G)-CVP with an auxiliary gadget: the `(k+m) × m`
/// incidence matrix with `r*` in universe rows, the `m × m` identity below,
/// direct-summed with the scaled gadget lattice.
pub fn setcover_to_agcvp(
    esc: &SetCoverInstance,
    sg: &ScaledGadget,
    allow_out_of_guarantee: bool,
    prec: u32,
) -> Result<AgCvpInstance> {
    let k = esc.universe_size;
    let m = esc.sets.len();
    if sg.m != m || sg.d != esc.size_bound as u64 {
        return Err(Error::domain(
            "gadget was scaled for a different (m, d) than this instance",
        ));
    }
    let mut notes = sg.notes.clone();
    // reduction hypothesis r >= d^{1/p}
    if sg.rpow < Rational::from(esc.size_bound as u64) {
        if !allow_out_of_guarantee {
            return Err(Error::precondition("gadget distance violates r >= d^{1/p}"));
        }
        notes.push("r < d^{1/p}: outside the reduction guarantee".to_string());
    }
    let rstar_pow = sg.rstar_pow();

    // incidence block: k universe rows scaled by r*, m identity rows
    let mut entries = vec![vec![Rational::from(0); m]; k + m];
    for (j, set) in esc.sets.iter().enumerate() {
        for &u in set {
            if u >= k {
                return Err(Error::domain(format!(
                    "set {j} references element {u} >= k"
                )));
            }
            entries[u][j] = Rational::from(1);
        }
        entries[k + j][j] = Rational::from(1);
    }
    let mut scales = vec![RowScale::PthRoot(rstar_pow.clone()); k];
    scales.extend(std::iter::repeat_n(RowScale::One, m));
    let cover_block = Basis::with_row_scales(entries, scales)?;

    // gadget block: I_{n†} scaled by α
    let nd = sg.n_dagger as usize;
    let gadget_block = match &sg.alpha_pow {
        ScaleFactorPow::Exact(apow) if *apow == 1 => Basis::integer_lattice(nd),
        ScaleFactorPow::Exact(apow) => {
            let entries = (0..nd)
                .map(|i| {
                    (0..nd)
                        .map(|j| Rational::from(u32::from(i == j)))
                        .collect()
                })
                .collect();
            Basis::with_row_scales(entries, vec![RowScale::PthRoot(apow.clone()); nd])?
        }
        ScaleFactorPow::Certified(apow) => {
            let alpha = apow.pow_f64(1.0 / sg.p.get())?;
            Basis::integer_lattice(nd).scale_real(&alpha)?
        }
    };
    let basis = cover_block.direct_sum(&gadget_block);

    // target: r* on universe rows, 0 on identity rows, α t̃ on gadget rows
    let mut target = vec![Rational::from(1); k];
    target.extend(std::iter::repeat_n(Rational::from(0), m));
    target.extend(std::iter::repeat_n(sg.shift.clone(), nd));

    let sides = gadgets::gadget_side_bounds(sg, prec)?;
    let g = sides.g_int.clone().max(Integer::from(1));
    let a = sides.a_int.clone().max(Integer::from(1));
    Ok(AgCvpInstance {
        basis,
        target,
        p: sg.p,
        rpow: sg.rpow.clone(),
        spow: sg.spow.clone(),
        gamma_pow: sg.gamma_pow.clone(),
        a,
        g,
        notes,
    })
}

/// Overrides for the sparsification stage; any of them marks the run as
/// out-of-guarantee.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Overrides {
    /// Number of sparsification trials instead of `⌈100 d log M⌉`.
    pub ell: Option<u64>,
    /// Lower edge of the prime search instead of `10 M log M`.
    pub q_min: Option<u64>,
    /// Vote threshold as a fraction of `ell` instead of `δ`.
    pub threshold_frac: Option<f64>,
    /// Accept `G < 1000 A`.
    pub unsafe_ok: bool,
}

/// One emitted SVP instance: the sparsification draw that defines it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvpInstanceRecord {
    pub trial_seed: u64,
    pub zvec: Vec<u64>,
}

/// Full record of the (A,G)-CVP → SVP stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReductionTranscript {
    pub seed: u64,
    pub p: f64,
    pub rank: usize,
    pub dim: usize,
    /// `r'^p = r^p + s^p` of the lifted lattice.
    pub rprime_pow: Rational,
    pub a: Integer,
    pub g: Integer,
    /// `M = 10 √(A G)` (decimal string).
    pub m_value: String,
    pub ell: u64,
    pub ell_default: u64,
    pub q: Integer,
    pub q_is_override: bool,
    pub delta: f64,
    pub threshold: u64,
    pub out_of_guarantee: bool,
    pub notes: Vec<String>,
    pub trial_seeds: Vec<u64>,
    pub instances: Vec<SvpInstanceRecord>,
}

/// Draw the sparsification congruence form; must match `lattice::sparsify`.
fn draw_zvec(rank: usize, q: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..rank).map(|_| rng.random_range(0..q)).collect()
}

/// The lifted basis `B' = [[B, -t], [0, s]]` of an instance.
pub fn lift_basis(inst: &AgCvpInstance) -> Result<Basis> {
    let column: Vec<Rational> = inst.target.iter().map(|t| Rational::from(-t)).collect();
    // bottom-right entry s with s^p = spow: rational core 1, scale s
    let corner_scale = if inst.spow == 1 {
        RowScale::One
    } else {
        RowScale::PthRoot(inst.spow.clone())
    };
    inst.basis
        .append_column_and_row(column, Rational::from(1), corner_scale)
}

/// (A,G)-CVP → SVP by sparsification: lift the instance, fix a prime
/// `q ∈ [10 M log M, 20 M log M]` (or the override), and emit `ℓ` seeded
/// sparsified instances with the vote threshold `⌈δ ℓ⌉`.
pub fn agcvp_to_svp_instances(
    inst: &AgCvpInstance,
    seed: u64,
    ov: &Overrides,
    materialize_cap: usize,
) -> Result<ReductionTranscript> {
    if inst.a < 1 || inst.g < 1 {
        return Err(Error::domain("A and G must be positive"));
    }
    let mut out_of_guarantee = false;
    let mut notes = Vec::new();
    if inst.g < Integer::from(1000) * inst.a.clone() {
        if !ov.unsafe_ok {
            return Err(Error::precondition(
                "G >= 1000 A fails; pass the unsafe override to proceed",
            ));
        }
        out_of_guarantee = true;
        notes.push(format!("G = {} < 1000 A with A = {}", inst.g, inst.a));
    }
    let lifted = lift_basis(inst)?;
    let rank = lifted.rank();
    let dim = lifted.dim();
    let rprime_pow = Rational::from(&inst.rpow + &inst.spow);

    let prec = 192u32;
    let m_float = {
        let ag = Integer::from(&inst.a * &inst.g);
        Float::with_val(prec, &ag).sqrt() * 10u32
    };
    let ln_m = m_float.clone().ln();
    let ell_default = {
        let v = Float::with_val(prec, dim as u64 * 100) * ln_m.clone();
        v.to_f64().ceil().max(1.0) as u64
    };
    let ell = ov.ell.unwrap_or(ell_default);
    if ov.ell.is_some() {
        out_of_guarantee = true;
        notes.push(format!("ell overridden to {ell} (default: {ell_default})"));
    }

    // prime search
    let (q, q_is_override) = match ov.q_min {
        Some(qmin) => {
            out_of_guarantee = true;
            let q = next_prime_at_least(Integer::from(qmin.max(101)))?;
            notes.push(format!("q from override floor {qmin}"));
            (q, true)
        }
        None => {
            let lo = Float::with_val(prec, 10u32 * m_float.clone() * ln_m.clone());
            let hi = Float::with_val(prec, 20u32 * m_float.clone() * ln_m.clone());
            let start = lo
                .ceil()
                .to_integer()
                .ok_or_else(|| Error::internal("q search floor not representable"))?
                .max(Integer::from(101));
            let q = next_prime_at_least(start)?;
            let hi_int = hi
                .floor()
                .to_integer()
                .ok_or_else(|| Error::internal("q search ceiling not representable"))?;
            if q > hi_int {
                return Err(Error::internal("no prime found in the q range"));
            }
            (q, false)
        }
    };

    // δ = M/(20q) - M²/(200 q²)
    let qf = Float::with_val(prec, &q);
    let x = Float::with_val(prec, &m_float / &qf);
    let delta = (x.clone() / 20u32 - x.square() / 200u32).to_f64();
    let threshold = match ov.threshold_frac {
        Some(f) => {
            out_of_guarantee = true;
            notes.push(format!("threshold fraction overridden to {f}"));
            (f * ell as f64).ceil() as u64
        }
        None => (delta * ell as f64).ceil().max(1.0) as u64,
    };

    let mut seed_rng = ChaCha20Rng::seed_from_u64(seed);
    let trial_seeds: Vec<u64> = (0..ell).map(|_| seed_rng.random()).collect();
    let mut instances = Vec::new();
    if let Some(q64) = q.to_u64() {
        for &ts in trial_seeds.iter().take(materialize_cap) {
            instances.push(SvpInstanceRecord {
                trial_seed: ts,
                zvec: draw_zvec(rank, q64, ts),
            });
        }
    } else {
        notes.push("q exceeds u64; instances recorded by seed only".to_string());
    }

    Ok(ReductionTranscript {
        seed,
        p: inst.p.get(),
        rank,
        dim,
        rprime_pow,
        a: inst.a.clone(),
        g: inst.g.clone(),
        m_value: m_float.to_string(),
        ell,
        ell_default,
        q,
        q_is_override,
        delta,
        threshold,
        out_of_guarantee,
        notes,
        trial_seeds,
        instances,
    })
}

fn next_prime_at_least(start: Integer) -> Result<Integer> {
    let mut q = start;
    if q.is_even() {
        q += 1;
    }
    for _ in 0..2_000_000u64 {
        if q.is_probably_prime(40) != rug::integer::IsPrime::No {
            return Ok(q);
        }
        q += 2;
    }
    Err(Error::internal("prime search exhausted"))
}

/// Materialize one sparsified SVP instance from its transcript record.
pub fn materialize_instance(
    inst: &AgCvpInstance,
    transcript: &ReductionTranscript,
    record: &SvpInstanceRecord,
) -> Result<(Basis, Rational)> {
    let q = transcript
        .q
        .to_u64()
        .ok_or_else(|| Error::refused("q exceeds u64; cannot materialize"))?;
    let lifted = lift_basis(inst)?;
    let sp = lattice::sparsify(&lifted, q, record.trial_seed)?;
    if sp.zvec != record.zvec {
        return Err(Error::internal("transcript zvec mismatch on replay"));
    }
    Ok((sp.basis, transcript.rprime_pow.clone()))
}

/// Vote tally of the oracle decision stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub yes_votes: u64,
    pub threshold: u64,
    pub ell: u64,
    pub decision: String,
    pub candidates: usize,
}

/// Decision by majority vote of the brute-force SVP oracle over the
/// sparsified instances. The candidate short vectors of the lifted lattice
/// are enumerated once; each trial then tests the congruence on them, which
/// is exactly the oracle question `λ_1(L'') ≤ r'`.
pub fn decide_by_oracle_votes(
    inst: &AgCvpInstance,
    transcript: &ReductionTranscript,
    limits: &EnumLimits,
) -> Result<VoteOutcome> {
    let candidates = enumerate_svp_candidates(inst, &transcript.rprime_pow, limits)?;
    vote_on_candidates(&candidates, inst.basis.rank() + 1, transcript)
}

/// Enumerate the nonzero vectors of the lifted lattice within `r'`; these are
/// the only vectors whose survival any sparsification trial can observe.
pub fn enumerate_svp_candidates(
    inst: &AgCvpInstance,
    rprime_pow: &Rational,
    limits: &EnumLimits,
) -> Result<Vec<Vec<i64>>> {
    let lifted = lift_basis(inst)?;
    let target = lattice::zero_target(&lifted);
    let budget = RadiusPow::Exact(rprime_pow.clone());
    let mut candidates: Vec<Vec<i64>> = Vec::new();
    let mut boundary = 0u64;
    lattice::enumerate_points_visit(&lifted, inst.p, &budget, &target, limits, &mut |pt| {
        if pt.coeffs.iter().any(|&c| c != 0) {
            if pt.boundary {
                boundary += 1;
            }
            candidates.push(pt.coeffs);
        }
    })?;
    if boundary > 0 {
        return Err(Error::refused(format!(
            "{boundary} candidates sit on the radius within working precision"
        )));
    }
    Ok(candidates)
}

/// Tally the per-trial oracle answers (`λ_1(L'') ≤ r'` iff some candidate
/// satisfies the trial's congruence) against the transcript threshold.
pub fn vote_on_candidates(
    candidates: &[Vec<i64>],
    rank: usize,
    transcript: &ReductionTranscript,
) -> Result<VoteOutcome> {
    let q = transcript
        .q
        .to_u64()
        .ok_or_else(|| Error::refused("q exceeds u64; decisions need overrides"))?;
    let mut yes_votes = 0u64;
    for &ts in &transcript.trial_seeds {
        let zvec = draw_zvec(rank, q, ts);
        let survives = candidates
            .iter()
            .any(|c| lattice::congruence_holds(&zvec, q, c));
        if survives {
            yes_votes += 1;
        }
    }
    let decision = if yes_votes > transcript.threshold {
        Decision::Yes
    } else {
        Decision::No
    };
    Ok(VoteOutcome {
        yes_votes,
        threshold: transcript.threshold,
        ell: transcript.ell,
        decision: decision.to_string(),
        candidates: candidates.len(),
    })
}

/// Gadget profile for the end-to-end pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GadgetProfile {
    /// The closed-form scaling (the guaranteed construction; its derived
    /// gadget ranks are far beyond oracle reach, so this profile emits
    /// instances but cannot be oracle-decided).
    ScaledClosedForm,
    /// The tight half-shift profile at oracle scale (out-of-guarantee).
    TightHalfShift,
}

/// Pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineParams {
    pub eta_prime: Rational,
    pub delta_target: f64,
    pub profile: GadgetProfile,
    pub n_dagger: Option<u64>,
    pub overrides: Overrides,
    pub prec: u32,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            eta_prime: Rational::from((1, 2)),
            delta_target: 0.5,
            profile: GadgetProfile::TightHalfShift,
            n_dagger: None,
            overrides: Overrides {
                ell: Some(40),
                q_min: None,
                threshold_frac: Some(0.5),
                unsafe_ok: true,
            },
            prec: crate::real::DEFAULT_PREC,
        }
    }
}

/// A full pipeline run: the stage artifacts plus the decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineRun {
    pub formula_vars: usize,
    pub formula_clauses: usize,
    pub setcover: SetCoverInstance,
    pub agcvp: AgCvpInstance,
    pub transcript: ReductionTranscript,
    pub vote: VoteOutcome,
    pub decision: String,
    pub seed: u64,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Domain(m) => Error::Domain(format!("[{name}] {m}")),
        Error::Precondition(m) => Error::Precondition(format!("[{name}] {m}")),
        Error::Refused(m) => Error::Refused(format!("[{name}] {m}")),
        Error::Internal(m) => Error::Internal(format!("[{name}] {m}")),
        other => other,
    })
}

/// End-to-end: CNF formula → set cover → (A,G)-CVP with the integer gadget →
/// sparsified SVP instances → oracle-vote decision.
pub fn pipeline_sat_to_svp(
    f: &CnfFormula,
    p: NormExponent,
    params: &PipelineParams,
    seed: u64,
    limits: &EnumLimits,
) -> Result<PipelineRun> {
    let red = stage("sat_to_setcover", sat_to_setcover(f, &params.eta_prime))?;
    let esc = &red.instance;
    let m = esc.sets.len();
    let d = esc.size_bound as u64;
    let gp = stage(
        "integer_gadget_params",
        gadgets::integer_gadget_params(p, params.delta_target, params.prec),
    )?;
    let sg = match params.profile {
        GadgetProfile::TightHalfShift => {
            let nd = params.n_dagger.unwrap_or_else(|| {
                // as large as the oracle rank budget allows
                (limits.max_rank as u64).saturating_sub(m as u64 + 1).max(2)
            });
            stage(
                "tight_half_shift_gadget",
                gadgets::tight_half_shift_gadget(&gp, m, d, &esc.eta, nd),
            )?
        }
        GadgetProfile::ScaledClosedForm => {
            let opts = gadgets::ScaleOptions {
                allow_small: true,
                n_dagger_override: params.n_dagger,
                validate: false,
            };
            stage(
                "scale_gadget",
                gadgets::scale_gadget(&gp, m, d, &esc.eta, &opts, params.prec),
            )?
        }
    };
    let inst = stage(
        "setcover_to_agcvp",
        setcover_to_agcvp(esc, &sg, params.overrides.unsafe_ok, params.prec),
    )?;
    let transcript = stage(
        "agcvp_to_svp",
        agcvp_to_svp_instances(&inst, seed, &params.overrides, 8),
    )?;
    let vote = stage(
        "oracle_decision",
        decide_by_oracle_votes(&inst, &transcript, limits),
    )?;
    let decision = vote.decision.clone();
    Ok(PipelineRun {
        formula_vars: f.num_vars,
        formula_clauses: f.num_clauses(),
        setcover: esc.clone(),
        agcvp: inst,
        transcript,
        vote,
        decision,
        seed,
    })
}

/// Result of the randomized `ℓ_2 → ℓ_p` embedding.
#[derive(Debug, Clone)]
pub struct EmbedResult {
    pub basis: Basis,
    pub dim_out: usize,
    /// Empirical `‖f(x)‖_p / ‖x‖_2` extremes over sampled directions.
    pub distortion_min: f64,
    pub distortion_max: f64,
    pub samples: usize,
}

/// Apply a seeded Gaussian linear map `R^d → R^m`, `m = ⌈oversample·n/ε²⌉`,
/// scaled so a unit vector maps to expected `ℓ_p^p` mass one, and measure
/// the empirical distortion over lattice-derived directions.
pub fn embed_l2_to_lp(
    basis: &Basis,
    p: NormExponent,
    eps: f64,
    seed: u64,
    oversample: f64,
) -> Result<EmbedResult> {
    if !(1.0 <= p.get() && p.get() <= 2.0) {
        return Err(Error::precondition(
            "the embedding reduction applies for 1 <= p <= 2",
        ));
    }
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::domain("eps must lie in (0, 1)"));
    }
    if basis
        .row_scales()
        .iter()
        .any(|s| !matches!(s, RowScale::One))
    {
        return Err(Error::domain("embedding applies to plain rational bases"));
    }
    let n = basis.rank();
    let d = basis.dim();
    let m = ((oversample * n as f64 / (eps * eps)).ceil() as usize).max(n);

    // σ^p = 1 / (m E|g|^p), E|g|^p = 2^{p/2} Γ((p+1)/2) / √π
    let prec = 96u32;
    let pf = p.get();
    let e_abs_g_p = Float::with_val(prec, (pf + 1.0) / 2.0).gamma()
        * Float::with_val(prec, 2.0f64).pow(Float::with_val(prec, pf / 2.0))
        / Float::with_val(prec, rug::float::Constant::Pi).sqrt();
    let sigma = (Float::with_val(prec, 1) / (Float::with_val(prec, m as f64) * e_abs_g_p))
        .pow(Float::with_val(prec, 1.0 / pf))
        .to_f64();

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let map: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    g * sigma
                })
                .collect()
        })
        .collect();

    // transformed core: exact rationals from the f64 map entries
    let mut entries = vec![vec![Rational::from(0); n]; m];
    for (i, map_row) in map.iter().enumerate() {
        for j in 0..n {
            let mut acc = Rational::from(0);
            for (r, coef) in map_row.iter().enumerate() {
                let c = Rational::from_f64(*coef)
                    .ok_or_else(|| Error::internal("map entry not finite"))?;
                acc += c * basis.entry(r, j);
            }
            entries[i][j] = acc;
        }
    }
    let out = Basis::new(entries)?; // full rank verified exactly here

    // empirical distortion over random small-coefficient directions
    let samples = 1000usize;
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for _ in 0..samples {
        let x: Vec<i64> = loop {
            let x: Vec<i64> = (0..n).map(|_| rng.random_range(-3..=3)).collect();
            if x.iter().any(|&v| v != 0) {
                break x;
            }
        };
        let mut l2 = 0.0f64;
        for r in 0..d {
            let mut v = 0.0;
            for (j, &xi) in x.iter().enumerate() {
                v += basis.entry(r, j).to_f64() * xi as f64;
            }
            l2 += v * v;
        }
        let l2 = l2.sqrt();
        let mut lp = 0.0f64;
        for i in 0..m {
            let mut v = 0.0;
            for (j, &xi) in x.iter().enumerate() {
                v += out.entry(i, j).to_f64() * xi as f64;
            }
            lp += v.abs().powf(pf);
        }
        let ratio = lp.powf(1.0 / pf) / l2;
        dmin = dmin.min(ratio);
        dmax = dmax.max(ratio);
    }
    Ok(EmbedResult {
        basis: out,
        dim_out: m,
        distortion_min: dmin,
        distortion_max: dmax,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles;

    fn p(v: f64) -> NormExponent {
        NormExponent::new(v).unwrap()
    }

    fn rat(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn dimacs_roundtrip_and_errors() {
        let f = parse_dimacs("c toy\np cnf 2 1\n1 2 0\n", None).unwrap();
        assert_eq!(f.num_vars, 2);
        assert_eq!(f.clauses, vec![vec![1, 2]]);
        // duplicate literal deduplicated and recorded
        let f = parse_dimacs("p cnf 2 2\n1 1 2 0\n-2 0\n", None).unwrap();
        assert_eq!(f.clauses[0], vec![1, 2]);
        assert_eq!(f.dedup_count, 1);
        // declared width enforcement
        assert!(parse_dimacs("p cnf 3 1\n1 2 3 0\n", Some(2)).is_err());
        // malformed header carries a line number
        match parse_dimacs("p dnf 2 1\n1 0\n", None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        // unused variable rejected
        assert!(parse_dimacs("p cnf 3 1\n1 2 0\n", None).is_err());
    }

    #[test]
    fn sat_to_setcover_bounds_and_witness() {
        // single clause (x1 ∨ x2 ∨ x3)
        let f = CnfFormula::new(3, vec![vec![1, 2, 3]], Some(3)).unwrap();
        let red = sat_to_setcover(&f, &rat(1, 2)).unwrap();
        let esc = &red.instance;
        let n = 3usize;
        let cp = red.c_prime;
        let k = esc.universe_size;
        let m = esc.sets.len();
        assert!(n <= k && k <= (cp + 1) * n);
        assert!(n <= m && m <= (1 << (cp + 1)) * n);
        // satisfiable: the greedy witness is a disjoint exact cover of size n
        let w = greedy_witness(&red, &f, &[true, true, true]).unwrap();
        assert_eq!(w.len(), n);
        let mut covered = vec![false; k];
        for &si in &w {
            for &u in &esc.sets[si] {
                assert!(!covered[u], "witness sets must be disjoint");
                covered[u] = true;
            }
        }
        assert!(covered.iter().all(|&c| c), "witness must cover the universe");
        // cross-check with the exhaustive cover oracle
        let masks: Vec<u64> = esc
            .sets
            .iter()
            .map(|s| s.iter().fold(0u64, |m, &u| m | 1 << u))
            .collect();
        let search = oracles::exact_cover_search(&masks, k, esc.size_bound).unwrap();
        let witness = search.disjoint_witness.expect("cover exists");
        assert!(witness.len() <= n);
    }

    #[test]
    fn sat_to_setcover_unsat_toy_has_no_disjoint_cover() {
        // (x) ∧ (¬x) padded with fresh variables to keep every var used
        let f = CnfFormula::new(3, vec![vec![1], vec![-1], vec![2], vec![3]], Some(3)).unwrap();
        let red = sat_to_setcover(&f, &rat(1, 2)).unwrap();
        let esc = &red.instance;
        let masks: Vec<u64> = esc
            .sets
            .iter()
            .map(|s| s.iter().fold(0u64, |m, &u| m | 1 << u))
            .collect();
        let search =
            oracles::exact_cover_search(&masks, esc.universe_size, esc.sets.len()).unwrap();
        // a disjoint exact cover must pick one literal per variable covering
        // all clauses - impossible for a contradiction
        assert!(search.disjoint_witness.is_none());
    }

    #[test]
    fn occurrence_cap_enforced() {
        let clauses: Vec<Vec<i32>> = (0..21).map(|_| vec![1, 2]).collect();
        let f = CnfFormula::new(2, clauses, None).unwrap();
        let err = sat_to_setcover(&f, &rat(1, 2));
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn pad_cvp_toy_counts() {
        // empty Φ, n = 2: padding by n† multiplies close vectors by 2^{n†}
        let inst = Bgs17Instance::new(p(3.0), vec![], vec![], 2).unwrap();
        let padded0 = pad_cvp_with_integer_gadget(&inst, 0, 128).unwrap();
        let padded3 = pad_cvp_with_integer_gadget(&inst, 3, 128).unwrap();
        assert_eq!(padded3.g, Integer::from(8));
        assert_eq!(padded0.g, Integer::from(1));
        // close-vector product structure: count within r of the half target
        let lim = EnumLimits::default();
        for (inst, expect) in [(&padded0, 4u64), (&padded3, 32u64)] {
            let pts = lattice::enumerate_points(
                &inst.basis,
                inst.p,
                &RadiusPow::Exact(inst.rpow.clone()),
                &inst.target,
                &lim,
            )
            .unwrap();
            assert_eq!(pts.len() as u64, expect);
        }
    }

    #[test]
    fn pad_cvp_a_matches_exact_dp() {
        let inst = Bgs17Instance::new(p(3.0), vec![], vec![], 4).unwrap();
        let padded = pad_cvp_with_integer_gadget(&inst, 8, 128).unwrap();
        // A = ⌈√12 · N_3(Z^12, (r^3+1)^{1/3}, 0)⌉
        let rpow = Rational::from((13, 8));
        let q = ShiftedBallQuery::new(
            p(3.0),
            12,
            RadiusPow::Exact(rpow + Rational::from(1)),
            ShiftSpec::Uniform(Rational::from(0)),
        )
        .unwrap();
        let count = counting::count_exact(&q).unwrap().lo;
        let expect = (12f64.sqrt() * count.to_f64()).ceil() as u64;
        assert_eq!(padded.a, Integer::from(expect));
    }

    #[test]
    fn toy_esc_instance_counts_confirm_yes_and_no() {
        // hand-made set-cover instances with the closed-form gadget at a
        // small override rank; brute-force counts confirm the YES and NO
        // labels against the stored (A, G)
        let limits = EnumLimits::default();
        let prec = 128;
        let gp = gadgets::integer_gadget_params(p(3.0), 0.5, prec).unwrap();
        let eta = rat(1, 2);
        let opts = gadgets::ScaleOptions {
            allow_small: true,
            n_dagger_override: Some(4),
            validate: false,
        };

        // YES: one set covers the whole universe, so a disjoint cover of
        // size 1 <= eta*d exists
        let esc_yes = SetCoverInstance {
            universe_size: 3,
            sets: vec![vec![0, 1, 2], vec![0], vec![1], vec![2]],
            size_bound: 2,
            eta: eta.clone(),
        };
        let sg = gadgets::scale_gadget(&gp, 4, 2, &eta, &opts, prec).unwrap();
        let inst = setcover_to_agcvp(&esc_yes, &sg, true, prec).unwrap();
        let close = lattice::enumerate_points(
            &inst.basis,
            inst.p,
            &RadiusPow::Exact(inst.rpow.clone()),
            &inst.target,
            &limits,
        )
        .unwrap();
        let n_close = Integer::from(close.len() as u64);
        assert!(
            n_close >= inst.g,
            "YES instance must have N >= G: {} < {}",
            n_close,
            inst.g
        );

        // NO: element 2 is never covered, so no collection covers U
        let esc_no = SetCoverInstance {
            universe_size: 3,
            sets: vec![vec![0], vec![1], vec![0, 1], vec![0]],
            size_bound: 2,
            eta: eta.clone(),
        };
        let inst_no = setcover_to_agcvp(&esc_no, &sg, true, prec).unwrap();
        let rpow = RealApprox::from_rational(&inst_no.rpow, 384);
        let spow = RealApprox::from_rational(&inst_no.spow, 384);
        let gpow = RealApprox::from_rational(&inst_no.gamma_pow, 384);
        let annoying = lattice::annoying_count(
            &inst_no.basis,
            &inst_no.target,
            inst_no.p,
            &rpow,
            &spow,
            &gpow,
            &limits,
        )
        .unwrap();
        assert!(
            annoying <= inst_no.a,
            "NO instance must have annoying count <= A: {} > {}",
            annoying,
            inst_no.a
        );
    }

    #[test]
    fn padded_no_case_annoying_bound() {
        // a NO-shaped instance (the top block pushes every lattice vector far
        // from the target): the exact annoying count stays below the padded
        // bound r · N_p(Z^{n+n†}, (r^p+1)^{1/p}, 0)
        let phi = vec![vec![rat(10, 1), rat(10, 1)]];
        let inst = Bgs17Instance::new(p(3.0), phi, vec![rat(5, 1)], 2).unwrap();
        let padded = pad_cvp_with_integer_gadget(&inst, 2, 128).unwrap();
        let lim = EnumLimits::default();
        // no close vectors: the top row alone costs at least 5^3
        let close = lattice::enumerate_points(
            &padded.basis,
            padded.p,
            &RadiusPow::Exact(padded.rpow.clone()),
            &padded.target,
            &lim,
        )
        .unwrap();
        assert!(close.is_empty(), "engineered NO case");
        let prec = 384;
        let annoying = lattice::annoying_count(
            &padded.basis,
            &padded.target,
            padded.p,
            &RealApprox::from_rational(&padded.rpow, prec),
            &RealApprox::from_rational(&padded.spow, prec),
            &RealApprox::from_rational(&padded.gamma_pow, prec),
            &lim,
        )
        .unwrap();
        let q = ShiftedBallQuery::new(
            p(3.0),
            4,
            RadiusPow::Exact(Rational::from(&padded.rpow + Rational::from(1))),
            ShiftSpec::Uniform(Rational::from(0)),
        )
        .unwrap();
        let zn_count = counting::count_exact(&q).unwrap().lo;
        let r = padded.rpow.to_f64().powf(1.0 / 3.0);
        let bound = (r * zn_count.to_f64()).ceil() as u64;
        assert!(
            annoying <= Integer::from(bound),
            "annoying = {annoying} must be at most r·N = {bound}"
        );
    }

    #[test]
    fn setcover_to_agcvp_enforces_radius_hypothesis() {
        // the tight profile violates r >= d^{1/p}; without the explicit
        // out-of-guarantee flag the assembly must refuse
        let esc = SetCoverInstance {
            universe_size: 3,
            sets: vec![vec![0, 1, 2], vec![0], vec![1], vec![2]],
            size_bound: 2,
            eta: rat(1, 2),
        };
        let gp = gadgets::integer_gadget_params(p(3.0), 0.5, 128).unwrap();
        let sg = gadgets::tight_half_shift_gadget(&gp, 4, 2, &rat(1, 2), 2).unwrap();
        assert!(matches!(
            setcover_to_agcvp(&esc, &sg, false, 128),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn incidence_matrix_structure() {
        // column j carries |S_j| entries on r*-scaled universe rows plus a
        // single identity 1 in row k + j
        let esc = SetCoverInstance {
            universe_size: 3,
            sets: vec![vec![0, 1], vec![2], vec![0, 1, 2]],
            size_bound: 2,
            eta: rat(1, 2),
        };
        let gp = gadgets::integer_gadget_params(p(3.0), 0.5, 128).unwrap();
        let sg = gadgets::tight_half_shift_gadget(&gp, 3, 2, &rat(1, 2), 2).unwrap();
        let inst = setcover_to_agcvp(&esc, &sg, true, 128).unwrap();
        let k = esc.universe_size;
        for (j, set) in esc.sets.iter().enumerate() {
            let ones: Vec<usize> = (0..k)
                .filter(|&u| *inst.basis.entry(u, j) == 1)
                .collect();
            assert_eq!(ones.len(), set.len(), "column {j} universe support");
            for u in 0..k {
                let want = u32::from(set.contains(&u));
                assert_eq!(*inst.basis.entry(u, j), Rational::from(want));
            }
            for jj in 0..esc.sets.len() {
                let want = u32::from(jj == j);
                assert_eq!(*inst.basis.entry(k + jj, j), Rational::from(want));
            }
        }
        // universe rows carry the r* scale exactly as (r*)^p
        match &inst.basis.row_scales()[0] {
            lattice::RowScale::PthRoot(b) => assert_eq!(*b, sg.rstar_pow()),
            other => panic!("universe rows must be r*-scaled, got {other:?}"),
        }
        // stage rank arithmetic: rank = m + n†, lifted rank = m + n† + 1
        assert_eq!(inst.basis.rank(), 3 + 2);
        assert_eq!(lift_basis(&inst).unwrap().rank(), 3 + 2 + 1);
    }

    #[test]
    fn default_delta_bound() {
        // with the default q range, δ = M/(20q) - M²/(200q²) lands in
        // [1/(500 ln M), 1/(200 ln M)]
        let inst = {
            let b = Bgs17Instance::new(p(3.0), vec![], vec![], 2).unwrap();
            let mut padded = pad_cvp_with_integer_gadget(&b, 4, 128).unwrap();
            // force G >= 1000 A so the default path runs without overrides
            padded.g = padded.a.clone() * Integer::from(100_000);
            padded
        };
        let transcript =
            agcvp_to_svp_instances(&inst, 1, &Overrides::default(), 0).unwrap();
        assert!(!transcript.out_of_guarantee);
        let m: f64 = transcript.m_value.parse::<f64>().unwrap_or_else(|_| {
            // the value may print in rug's exponent format; recompute
            let ag = Integer::from(&inst.a * &inst.g);
            10.0 * ag.to_f64().sqrt()
        });
        let ln_m = m.ln();
        assert!(
            transcript.delta >= 1.0 / (500.0 * ln_m),
            "delta = {} below 1/(500 ln M)",
            transcript.delta
        );
        assert!(
            transcript.delta <= 1.0 / (200.0 * ln_m) * 1.01,
            "delta = {} above 1/(200 ln M)",
            transcript.delta
        );
        // threshold bookkeeping
        assert_eq!(
            transcript.threshold,
            (transcript.delta * transcript.ell as f64).ceil() as u64
        );
    }

    #[test]
    fn transcript_replays_identically() {
        let f = CnfFormula::new(3, vec![vec![1], vec![2], vec![3], vec![1]], Some(3)).unwrap();
        let params = PipelineParams::default();
        let lim = EnumLimits {
            max_rank: 30,
            ..EnumLimits::default()
        };
        let run1 = pipeline_sat_to_svp(&f, p(11.0), &params, 7, &lim).unwrap();
        let run2 = pipeline_sat_to_svp(&f, p(11.0), &params, 7, &lim).unwrap();
        let j1 = serde_json::to_string(&run1.transcript).unwrap();
        let j2 = serde_json::to_string(&run2.transcript).unwrap();
        assert_eq!(j1, j2, "same seed must replay byte-identically");
        let j3 = serde_json::to_string(
            &pipeline_sat_to_svp(&f, p(11.0), &params, 8, &lim)
                .unwrap()
                .transcript,
        )
        .unwrap();
        assert_ne!(j1, j3, "different seeds must differ");
    }

    #[test]
    fn lifted_vector_length_bound() {
        // naive-lift property: a close vector lifts to length^p <= r^p + s^p
        let inst = Bgs17Instance::new(p(3.0), vec![], vec![], 2).unwrap();
        let padded = pad_cvp_with_integer_gadget(&inst, 2, 128).unwrap();
        let lifted = lift_basis(&padded).unwrap();
        let lim = EnumLimits::default();
        let rprime = Rational::from(&padded.rpow + &padded.spow);
        let pts = lattice::enumerate_points(
            &lifted,
            padded.p,
            &RadiusPow::Exact(rprime.clone()),
            &lattice::zero_target(&lifted),
            &lim,
        )
        .unwrap();
        // every close vector of the base instance appears as a lift (y-t, s)
        let close = lattice::enumerate_points(
            &padded.basis,
            padded.p,
            &RadiusPow::Exact(padded.rpow.clone()),
            &padded.target,
            &lim,
        )
        .unwrap();
        for c in &close {
            let mut want = c.coeffs.clone();
            want.push(1);
            assert!(
                pts.iter().any(|pt| pt.coeffs == want),
                "missing lift of {:?}",
                c.coeffs
            );
        }
    }

    #[test]
    fn embedding_preserves_rank_and_scales() {
        let b = Basis::integer_lattice(4);
        let out = embed_l2_to_lp(&b, p(1.5), 0.25, 3, 1.0).unwrap();
        assert_eq!(out.basis.rank(), 4);
        assert!(out.dim_out >= 4);
        assert!(out.distortion_min > 0.0 && out.distortion_max.is_finite());
        // scaling commutes: the same seed maps α·b to α·(map of b)
        let b2 = b.scale_rational(&rat(3, 1)).unwrap();
        let out2 = embed_l2_to_lp(&b2, p(1.5), 0.25, 3, 1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let x = out.basis.entry(i, j).to_f64();
                let y = out2.basis.entry(i, j).to_f64();
                assert!((y - 3.0 * x).abs() < 1e-9);
            }
        }
        assert!(embed_l2_to_lp(&b, p(3.0), 0.25, 3, 1.0).is_err());
    }

    #[test]
    fn embedding_distortion_near_one_for_p2() {
        let b = Basis::integer_lattice(3);
        let out = embed_l2_to_lp(&b, p(2.0), 0.1, 9, 1.0).unwrap();
        // p = 2 with m = n/eps² rows: distortion within roughly 1 ± 2eps
        assert!(out.distortion_max <= 1.2, "max = {}", out.distortion_max);
        assert!(out.distortion_min >= 0.8, "min = {}", out.distortion_min);
    }
}
