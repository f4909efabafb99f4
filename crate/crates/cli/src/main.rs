//! `svplab` — command-line front end for the theta-engine constants, integer
//! point counting, lattice tools, gadget analysis, the SAT→SVP reduction
//! pipeline, and the brute-force oracles.
//!
//! Every randomized subcommand takes `--seed` and reproduces byte-identical
//! output under it. Machine-readable outputs carry a header with the tool
//! version, working precision, and a hash of the invocation.
//!
//! Exit codes: 0 success, 2 precondition/budget refusal, 1 internal error,
//! 64 usage.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rug::ops::Pow;
use rug::{Integer, Rational};
use serde_json::{json, Value};

use svplab_core::counting::{self, RadiusPow, ShiftSpec, ShiftedBallQuery};
use svplab_core::gadgets;
use svplab_core::lattice::{self, Basis, EnumLimits};
use svplab_core::oracles;
use svplab_core::reductions::{self, GadgetProfile, Overrides, PipelineParams};
use svplab_core::theta;
use svplab_core::{Error, NormExponent, RealApprox, DEFAULT_PREC};

#[derive(Parser)]
#[command(name = "svplab", version, about = "lattice hardness toolkit", disable_help_subcommand = true)]
struct Cli {
    /// Working precision in bits (or env SVPLAB_PRECISION).
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Seed for randomized subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the primary output to this file instead of stdout.
    #[arg(long, global = true)]
    out_file: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Hardness constants W_p, tau*, C_p and the threshold p0.
    Constants(ConstantsArgs),
    /// Count integer points in a shifted lp ball.
    Count(CountArgs),
    /// Lattice tools over instance JSON files.
    Lattice(LatticeArgs),
    /// Gadget constants and Monte-Carlo checks.
    Gadget(GadgetArgs),
    /// Reduction pipeline.
    Reduce(ReduceArgs),
    /// Brute-force oracles.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct ConstantsArgs {
    /// Evaluate at a single p.
    #[arg(long)]
    p: Option<f64>,
    /// Solve W_p = 2 for p0.
    #[arg(long)]
    p0: bool,
    /// Sweep p over lo:hi:step.
    #[arg(long)]
    sweep: Option<String>,
    /// Output format: json or csv.
    #[arg(long, default_value = "json")]
    out: String,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    n: usize,
    /// Radius r (rational or decimal string).
    #[arg(long)]
    radius: String,
    /// Uniform shift t (rational) or @file with a JSON vector of rationals.
    #[arg(long, default_value = "0")]
    shift: String,
    /// Use the exact engine (integer p, rational data).
    #[arg(long)]
    exact: bool,
    /// Resolution for the certified interval engine.
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long, default_value = "json")]
    out: String,
}

#[derive(Args)]
struct LatticeArgs {
    #[command(subcommand)]
    cmd: LatticeCmd,
}

#[derive(Subcommand)]
enum LatticeCmd {
    /// Shortest nonzero vector length.
    Lambda1(LatticeIo),
    /// Distance from the instance target to the lattice.
    Dist(LatticeIo),
    /// Primitive vectors within the instance radius, counted up to sign.
    CountPrimitive(LatticeIo),
    /// Random sparsification by a congruence mod q.
    Sparsify(SparsifyArgs),
    /// Survival statistics of sparsification trials.
    SurvivalStats(SurvivalArgs),
}

#[derive(Args)]
struct LatticeIo {
    #[arg(long = "in")]
    input: String,
}

#[derive(Args)]
struct SparsifyArgs {
    #[arg(long = "in")]
    input: String,
    #[arg(long)]
    q: u64,
}

#[derive(Args)]
struct SurvivalArgs {
    #[arg(long = "in")]
    input: String,
    #[arg(long)]
    q: u64,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
}

#[derive(Args)]
struct GadgetArgs {
    #[command(subcommand)]
    cmd: GadgetCmd,
}

#[derive(Subcommand)]
enum GadgetCmd {
    /// Integer-lattice gadget constants for p > 2.
    Params {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
    },
    /// Monte-Carlo closeness probability for a random shift on the sphere.
    McClose {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Allow hypothesis violations (report-only mode).
        #[arg(long)]
        report_only: bool,
        #[arg(long, default_value = "json")]
        out: String,
    },
}

#[derive(Args)]
struct ReduceArgs {
    #[command(subcommand)]
    cmd: ReduceCmd,
}

#[derive(Subcommand)]
enum ReduceCmd {
    /// Pad a shape-declared CVP instance (JSON with "shape": "bgs17") with
    /// the all-halves integer gadget.
    PadCvp {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        n_dagger: usize,
    },
    /// DIMACS CNF → set cover → (A,G)-CVP → SVP instances → oracle decision.
    SatToSvp {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        p: f64,
        /// Trials override (out-of-guarantee).
        #[arg(long)]
        ell: Option<u64>,
        /// Prime search floor override (out-of-guarantee).
        #[arg(long)]
        q_min: Option<u64>,
        /// Vote threshold fraction override (out-of-guarantee).
        #[arg(long)]
        threshold_frac: Option<f64>,
        /// Accept G < 1000 A and other out-of-guarantee parameters.
        #[arg(long)]
        unsafe_overrides: bool,
        /// Gadget rank override.
        #[arg(long)]
        n_dagger: Option<u64>,
        /// Gadget profile: tight (oracle scale) or scaled (closed forms).
        #[arg(long, default_value = "tight")]
        profile: String,
        /// Skip the oracle decision (emit the transcript only).
        #[arg(long)]
        no_decide: bool,
        /// Enumeration rank cap for the decision oracle.
        #[arg(long, default_value_t = 30)]
        max_rank: usize,
    },
}

#[derive(Args)]
struct OracleArgs {
    #[command(subcommand)]
    cmd: OracleCmd,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Is lambda_1(L) <= r?
    Svp {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        r: Option<String>,
    },
    /// Is dist(t, L) <= r?
    Cvp {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        r: Option<String>,
    },
    /// Exact disjoint cover search over {"universe": k, "sets": [[..]]}.
    Cover {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        size_cap: Option<usize>,
    },
}

fn parse_rational(s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let n = Integer::from_str(a.trim())
            .map_err(|_| Error::domain(format!("bad rational {s:?}")))?;
        let d = Integer::from_str(b.trim())
            .map_err(|_| Error::domain(format!("bad rational {s:?}")))?;
        if d == 0 {
            return Err(Error::domain("zero denominator"));
        }
        return Ok(Rational::from((n, d)));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.trim_start().starts_with('-');
        let int_part = Integer::from_str(if int.is_empty() { "0" } else { int })
            .map_err(|_| Error::domain(format!("bad decimal {s:?}")))?;
        let frac_digits = frac.trim();
        let frac_part = Integer::from_str(if frac_digits.is_empty() { "0" } else { frac_digits })
            .map_err(|_| Error::domain(format!("bad decimal {s:?}")))?;
        let scale = Integer::from(10).pow(frac_digits.len() as u32);
        let mag = Rational::from((int_part.clone().abs() * &scale + frac_part, scale));
        return Ok(if neg { -mag } else { mag });
    }
    Integer::from_str(s)
        .map(Rational::from)
        .map_err(|_| Error::domain(format!("bad number {s:?}")))
}

/// Lattice instance JSON: {"d", "n", "basis" (row-major rational strings),
/// "target"?, "r"?, "p", "shape"?}.
struct InstanceFile {
    basis: Basis,
    target: Option<Vec<Rational>>,
    r: Option<Rational>,
    p: NormExponent,
}

fn load_instance(path: &str) -> Result<InstanceFile, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::domain(format!("cannot read {path}: {e}")))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
    let d = v["d"].as_u64().ok_or_else(|| Error::domain("missing d"))? as usize;
    let n = v["n"].as_u64().ok_or_else(|| Error::domain("missing n"))? as usize;
    let rows = v["basis"]
        .as_array()
        .ok_or_else(|| Error::domain("missing basis"))?;
    if rows.len() != d {
        return Err(Error::domain(format!("basis has {} rows, want d = {d}", rows.len())));
    }
    let mut entries = Vec::with_capacity(d);
    for row in rows {
        let row = row.as_array().ok_or_else(|| Error::domain("basis rows must be arrays"))?;
        if row.len() != n {
            return Err(Error::domain("basis row length must equal n"));
        }
        let parsed: Result<Vec<Rational>, Error> = row
            .iter()
            .map(|e| match e {
                Value::String(s) => parse_rational(s),
                Value::Number(x) => parse_rational(&x.to_string()),
                _ => Err(Error::domain("basis entries must be strings or numbers")),
            })
            .collect();
        entries.push(parsed?);
    }
    let basis = Basis::new(entries)?;
    let target = match v.get("target") {
        None | Some(Value::Null) => None,
        Some(Value::Array(a)) => Some(
            a.iter()
                .map(|e| match e {
                    Value::String(s) => parse_rational(s),
                    Value::Number(x) => parse_rational(&x.to_string()),
                    _ => Err(Error::domain("target entries must be strings or numbers")),
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        _ => return Err(Error::domain("target must be an array")),
    };
    let r = match v.get("r") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(parse_rational(s)?),
        Some(Value::Number(x)) => Some(parse_rational(&x.to_string())?),
        _ => return Err(Error::domain("r must be a string or number")),
    };
    let p = NormExponent::new(v["p"].as_f64().ok_or_else(|| Error::domain("missing p"))?)?;
    Ok(InstanceFile { basis, target, r, p })
}

/// Load a CVP instance declared in the padded shape: bottom n basis rows are
/// the identity, bottom n target coordinates are 1/2, and r = (n+1)^{1/p}/2.
fn load_bgs17(path: &str) -> Result<reductions::Bgs17Instance, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::domain(format!("cannot read {path}: {e}")))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?;
    let mut violations = Vec::new();
    if v.get("shape").and_then(|s| s.as_str()) != Some("bgs17") {
        violations.push("missing \"shape\": \"bgs17\" tag".to_string());
    }
    let inst = load_instance(path)?;
    let n = inst.basis.rank();
    let d = inst.basis.dim();
    let top = d - n;
    for i in 0..n {
        for j in 0..n {
            let want = Rational::from(u32::from(i == j));
            if *inst.basis.entry(top + i, j) != want {
                violations.push(format!("basis row {} is not identity row {i}", top + i));
            }
        }
    }
    let target = inst.target.clone().unwrap_or_default();
    if target.len() != d {
        violations.push("target length must equal d".to_string());
    } else {
        for (i, t) in target.iter().enumerate().skip(top) {
            if *t != Rational::from((1, 2)) {
                violations.push(format!("target coordinate {i} must be 1/2"));
            }
        }
    }
    if let (Some(r), Some(pk)) = (&inst.r, inst.p.as_integer()) {
        // r^p must equal (n+1)/2^p
        let rp = Rational::from(r.numer().clone().pow(pk))
            / Rational::from(r.denom().clone().pow(pk));
        if rp != Rational::from((n as u64 + 1, 1u64 << pk)) {
            violations.push(format!("r^p = {rp} differs from (n+1)/2^p"));
        }
    }
    if !violations.is_empty() {
        return Err(Error::domain(format!(
            "shape validation failed: {}",
            violations.join("; ")
        )));
    }
    let phi: Vec<Vec<Rational>> = (0..top)
        .map(|i| (0..n).map(|j| inst.basis.entry(i, j).clone()).collect())
        .collect();
    let target_top = target[..top].to_vec();
    reductions::Bgs17Instance::new(inst.p, phi, target_top, n).map_err(Into::into)
}

fn rpow_from_radius(r: &Rational, p: NormExponent, prec: u32) -> Result<RadiusPow, Error> {
    if let Some(k) = p.as_integer() {
        let num = Rational::from(r.numer().clone().pow(k));
        let den = Rational::from(r.denom().clone().pow(k));
        Ok(RadiusPow::Exact(num / den))
    } else {
        Ok(RadiusPow::Certified(
            RealApprox::from_rational(r, prec + 32).pow_f64(p.get())?,
        ))
    }
}

fn config_hash(argv: &[String]) -> String {
    // FNV-1a over the invocation, skipping output routing so reruns into
    // different files stay byte-identical
    let mut skip_next = false;
    let filtered: Vec<&String> = argv
        .iter()
        .filter(|a| {
            if skip_next {
                skip_next = false;
                return false;
            }
            if *a == "--out-file" {
                skip_next = true;
                return false;
            }
            true
        })
        .collect();
    let mut h: u64 = 0xcbf29ce484222325;
    for a in filtered {
        for b in a.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h ^= 0x1f;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn meta(precision: u32, seed: u64, argv: &[String]) -> Value {
    json!({
        "tool": "svplab",
        "version": env!("CARGO_PKG_VERSION"),
        "precision": precision,
        "seed": seed,
        "config_hash": config_hash(argv),
    })
}

fn emit(out_file: &Option<String>, text: &str) -> Result<(), Error> {
    match out_file {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::domain(format!("cannot write {path}: {e}"))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn sig15(x: &RealApprox) -> String {
    // 15 significant digits: one leading digit plus 14 decimals
    format!("{:.14e}", x.to_f64())
}

fn run(cli: Cli, argv: &[String]) -> Result<(), Error> {
    let precision = cli
        .precision
        .or_else(|| {
            std::env::var("SVPLAB_PRECISION")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(DEFAULT_PREC);
    let seed = cli.seed;
    let header = meta(precision, seed, argv);

    match cli.cmd {
        Cmd::Constants(a) => {
            if a.p0 {
                let p0 = theta::find_p0(precision)?;
                let text = serde_json::to_string_pretty(&json!({
                    "meta": header,
                    "p0": format!("{:.15}", p0.to_f64()),
                    "err": p0.err.to_f64(),
                }))
                .unwrap();
                return emit(&cli.out_file, &text);
            }
            if let Some(p) = a.p {
                let hc = theta::w_p(NormExponent::new(p)?, precision)?;
                let text = serde_json::to_string_pretty(&json!({
                    "meta": header,
                    "p": p,
                    "W_p": sig15(&hc.w_p),
                    "tau_star": sig15(&hc.tau_star),
                    "C_p": hc.c_p.as_ref().map(sig15),
                }))
                .unwrap();
                return emit(&cli.out_file, &text);
            }
            if let Some(sweep) = a.sweep {
                let parts: Vec<&str> = sweep.split(':').collect();
                if parts.len() != 3 {
                    return Err(Error::domain("sweep must be lo:hi:step"));
                }
                let lo: f64 = parts[0].parse().map_err(|_| Error::domain("bad sweep lo"))?;
                let hi: f64 = parts[1].parse().map_err(|_| Error::domain("bad sweep hi"))?;
                let step: f64 = parts[2].parse().map_err(|_| Error::domain("bad sweep step"))?;
                if step <= 0.0 || hi < lo {
                    return Err(Error::domain("need lo <= hi and step > 0"));
                }
                let mut rows = Vec::new();
                let mut p = lo;
                while p <= hi + 1e-12 {
                    let hc = theta::w_p(NormExponent::new(p)?, precision)?;
                    rows.push((p, hc));
                    p += step;
                }
                if a.out == "csv" {
                    let mut s = String::new();
                    let _ = writeln!(
                        s,
                        "# tool=svplab version={} precision={} config_hash={}",
                        env!("CARGO_PKG_VERSION"),
                        precision,
                        config_hash(argv)
                    );
                    let _ = writeln!(s, "p,W_p,tau_star,C_p");
                    for (p, hc) in &rows {
                        let _ = writeln!(
                            s,
                            "{:.6},{},{},{}",
                            p,
                            sig15(&hc.w_p),
                            sig15(&hc.tau_star),
                            hc.c_p.as_ref().map(sig15).unwrap_or_default()
                        );
                    }
                    return emit(&cli.out_file, s.trim_end());
                }
                let body: Vec<Value> = rows
                    .iter()
                    .map(|(p, hc)| {
                        json!({
                            "p": p,
                            "W_p": sig15(&hc.w_p),
                            "tau_star": sig15(&hc.tau_star),
                            "C_p": hc.c_p.as_ref().map(sig15),
                        })
                    })
                    .collect();
                let text =
                    serde_json::to_string_pretty(&json!({"meta": header, "rows": body})).unwrap();
                return emit(&cli.out_file, &text);
            }
            Err(Error::domain("pass --p, --p0, or --sweep"))
        }
        Cmd::Count(a) => {
            let p = NormExponent::new(a.p)?;
            let shift = if let Some(path) = a.shift.strip_prefix('@') {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::domain(format!("cannot read {path}: {e}")))?;
                let v: Vec<String> = serde_json::from_str(&text)
                    .map_err(|e| Error::domain(format!("bad shift file: {e}")))?;
                ShiftSpec::Vector(
                    v.iter()
                        .map(|s| parse_rational(s))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            } else {
                ShiftSpec::Uniform(parse_rational(&a.shift)?)
            };
            let r = parse_rational(&a.radius)?;
            let rpow = rpow_from_radius(&r, p, precision)?;
            let q = ShiftedBallQuery::new(p, a.n, rpow, shift)?;
            let cb = if a.exact {
                counting::count_exact(&q)?
            } else {
                let res = match &a.resolution {
                    Some(s) => parse_rational(s)?,
                    None => Rational::from((1, 1u64 << 20)),
                };
                counting::count_interval(&q, &res)?
            };
            let text = serde_json::to_string_pretty(&json!({
                "meta": header,
                "lo": cb.lo.to_string(),
                "hi": cb.hi.to_string(),
                "exact": cb.is_exact(),
            }))
            .unwrap();
            emit(&cli.out_file, &text)
        }
        Cmd::Lattice(a) => {
            let limits = EnumLimits::default();
            match a.cmd {
                LatticeCmd::Lambda1(io) => {
                    let inst = load_instance(&io.input)?;
                    let (lam, _) = lattice::lambda1(&inst.basis, inst.p, &limits)?;
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "lambda1": sig15(&lam),
                    }))
                    .unwrap();
                    emit(&cli.out_file, &text)
                }
                LatticeCmd::Dist(io) => {
                    let inst = load_instance(&io.input)?;
                    let target = inst
                        .target
                        .ok_or_else(|| Error::domain("instance has no target"))?;
                    let (d, _) = lattice::dist(&inst.basis, &target, inst.p, &limits)?;
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "dist": sig15(&d),
                    }))
                    .unwrap();
                    emit(&cli.out_file, &text)
                }
                LatticeCmd::CountPrimitive(io) => {
                    let inst = load_instance(&io.input)?;
                    let r = inst.r.ok_or_else(|| Error::domain("instance has no r"))?;
                    let rpow = rpow_from_radius(&r, inst.p, precision)?;
                    let xi = lattice::count_primitive(&inst.basis, inst.p, &rpow, &limits)?;
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "xi": xi,
                    }))
                    .unwrap();
                    emit(&cli.out_file, &text)
                }
                LatticeCmd::Sparsify(sp) => {
                    let inst = load_instance(&sp.input)?;
                    let out = lattice::sparsify(&inst.basis, sp.q, seed)?;
                    let basis_rows: Vec<Vec<String>> = (0..out.basis.dim())
                        .map(|i| {
                            (0..out.basis.rank())
                                .map(|j| out.basis.entry(i, j).to_string())
                                .collect()
                        })
                        .collect();
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "q": sp.q,
                        "zvec": out.zvec,
                        "basis": basis_rows,
                    }))
                    .unwrap();
                    emit(&cli.out_file, &text)
                }
                LatticeCmd::SurvivalStats(sv) => {
                    let inst = load_instance(&sv.input)?;
                    let r = inst.r.ok_or_else(|| Error::domain("instance has no r"))?;
                    let rpow = rpow_from_radius(&r, inst.p, precision)?;
                    let st = lattice::sparsify_survival_stats(
                        &inst.basis,
                        inst.p,
                        &rpow,
                        sv.q,
                        sv.trials,
                        seed,
                        &limits,
                    )?;
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "hits": st.hits,
                        "trials": st.trials,
                        "freq": st.freq,
                        "primitive_count": st.primitive_count,
                        "in_guarantee": st.in_guarantee,
                        "notes": st.notes,
                    }))
                    .unwrap();
                    emit(&cli.out_file, &text)
                }
            }
        }
        Cmd::Gadget(a) => match a.cmd {
            GadgetCmd::Params { p, delta } => {
                let g = gadgets::integer_gadget_params(NormExponent::new(p)?, delta, precision)?;
                let text = serde_json::to_string_pretty(&json!({
                    "meta": header,
                    "p": p,
                    "t_star": g.t_star.to_string()
,
                    "eps": g.eps.to_string(),
                    "delta": g.delta,
                    "C_r_pow": sig15(&g.c_r_pow),
                    "beta": sig15(&g.beta),
                    "alpha_theta_ratio": sig15(&g.theta_ratio),
                }))
                .unwrap();
                emit(&cli.out_file, &text)
            }
            GadgetCmd::McClose {
                n,
                delta,
                eps,
                trials,
                report_only,
                out: _,
            } => {
                let mut v = vec![0.0; n];
                if n > 0 {
                    v[0] = 1.0;
                }
                let r = gadgets::close_prob_mc(&v, delta, eps, trials, seed, report_only)?;
                let text = serde_json::to_string_pretty(&json!({
                    "meta": header,
                    "n": n,
                    "freq": r.freq,
                    "hits": r.hits,
                    "trials": r.trials,
                    "analytic_bound": r.analytic_bound,
                    "sigma": r.sigma,
                    "in_guarantee": r.in_guarantee,
                    "notes": r.notes,
                }))
                .unwrap();
                emit(&cli.out_file, &text)
            }
        },
        Cmd::Reduce(a) => match a.cmd {
            ReduceCmd::PadCvp { input, n_dagger } => {
                let inst = load_bgs17(&input)?;
                let padded = reductions::pad_cvp_with_integer_gadget(&inst, n_dagger, precision)?;
                let text = serde_json::to_string_pretty(&json!({
                    "meta": header,
                    "rank": padded.basis.rank(),
                    "rpow": padded.rpow.to_string(),
                    "spow": padded.spow.to_string(),
                    "A": padded.a.to_string(),
                    "G": padded.g.to_string(),
                    "notes": padded.notes,
                }))
                .unwrap();
                emit(&cli.out_file, &text)
            }
            ReduceCmd::SatToSvp {
                input,
                p,
                ell,
                q_min,
                threshold_frac,
                unsafe_overrides,
                n_dagger,
                profile,
                no_decide,
                max_rank,
            } => {
                let text = std::fs::read_to_string(&input)
                    .map_err(|e| Error::domain(format!("cannot read {input}: {e}")))?;
                let f = reductions::parse_dimacs(&text, Some(3))?;
                let profile = match profile.as_str() {
                    "tight" => GadgetProfile::TightHalfShift,
                    "scaled" => GadgetProfile::ScaledClosedForm,
                    other => return Err(Error::domain(format!("unknown profile {other:?}"))),
                };
                let params = PipelineParams {
                    eta_prime: Rational::from((1, 2)),
                    delta_target: 0.5,
                    profile,
                    n_dagger,
                    overrides: Overrides {
                        ell,
                        q_min,
                        threshold_frac,
                        unsafe_ok: unsafe_overrides,
                    },
                    prec: precision,
                };
                let limits = EnumLimits {
                    max_rank,
                    max_nodes: 2_000_000_000,
                    ..EnumLimits::default()
                };
                if no_decide {
                    // build the transcript without the oracle stage
                    let red = reductions::sat_to_setcover(&f, &params.eta_prime)?;
                    let gp = gadgets::integer_gadget_params(
                        NormExponent::new(p)?,
                        params.delta_target,
                        precision,
                    )?;
                    let esc = &red.instance;
                    let sg = match params.profile {
                        GadgetProfile::TightHalfShift => gadgets::tight_half_shift_gadget(
                            &gp,
                            esc.sets.len(),
                            esc.size_bound as u64,
                            &esc.eta,
                            params.n_dagger.unwrap_or(12),
                        )?,
                        GadgetProfile::ScaledClosedForm => gadgets::scale_gadget(
                            &gp,
                            esc.sets.len(),
                            esc.size_bound as u64,
                            &esc.eta,
                            &gadgets::ScaleOptions {
                                allow_small: true,
                                n_dagger_override: params.n_dagger,
                                validate: false,
                            },
                            precision,
                        )?,
                    };
                    let inst = reductions::setcover_to_agcvp(
                        esc,
                        &sg,
                        params.overrides.unsafe_ok,
                        precision,
                    )?;
                    let transcript = reductions::agcvp_to_svp_instances(
                        &inst,
                        seed,
                        &params.overrides,
                        8,
                    )?;
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "transcript": transcript,
                    }))
                    .unwrap();
                    return emit(&cli.out_file, &text);
                }
                let run = reductions::pipeline_sat_to_svp(
                    &f,
                    NormExponent::new(p)?,
                    &params,
                    seed,
                    &limits,
                )?;
                let text = serde_json::to_string_pretty(&json!({
                    "meta": header,
                    "run": run,
                }))
                .unwrap();
                emit(&cli.out_file, &text)?;
                println!("DECISION={} seed={}", run.decision, seed);
                Ok(())
            }
        },
        Cmd::Oracle(a) => {
            let limits = EnumLimits::default();
            match a.cmd {
                OracleCmd::Svp { input, r } => {
                    let inst = load_instance(&input)?;
                    let radius = match r {
                        Some(s) => parse_rational(&s)?,
                        None => inst.r.clone().ok_or_else(|| Error::domain("need --r"))?,
                    };
                    let rpow = rpow_from_radius(&radius, inst.p, precision)?;
                    let d = oracles::svp_decide(&inst.basis, inst.p, &rpow, &limits)?;
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "decision": d.to_string(),
                    }))
                    .unwrap();
                    emit(&cli.out_file, &text)
                }
                OracleCmd::Cvp { input, r } => {
                    let inst = load_instance(&input)?;
                    let target = inst
                        .target
                        .clone()
                        .ok_or_else(|| Error::domain("instance has no target"))?;
                    let radius = match r {
                        Some(s) => parse_rational(&s)?,
                        None => inst.r.clone().ok_or_else(|| Error::domain("need --r"))?,
                    };
                    let rpow = rpow_from_radius(&radius, inst.p, precision)?;
                    let d = oracles::cvp_decide(&inst.basis, &target, inst.p, &rpow, &limits)?;
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "decision": d.to_string(),
                    }))
                    .unwrap();
                    emit(&cli.out_file, &text)
                }
                OracleCmd::Cover { input, size_cap } => {
                    let text = std::fs::read_to_string(&input)
                        .map_err(|e| Error::domain(format!("cannot read {input}: {e}")))?;
                    let v: Value = serde_json::from_str(&text)
                        .map_err(|e| Error::domain(format!("bad cover file: {e}")))?;
                    let k = v["universe"]
                        .as_u64()
                        .ok_or_else(|| Error::domain("missing universe"))?
                        as usize;
                    let sets: Vec<u64> = v["sets"]
                        .as_array()
                        .ok_or_else(|| Error::domain("missing sets"))?
                        .iter()
                        .map(|s| {
                            s.as_array()
                                .map(|els| {
                                    els.iter()
                                        .filter_map(|e| e.as_u64())
                                        .fold(0u64, |m, e| m | 1 << e)
                                })
                                .ok_or_else(|| Error::domain("sets must be arrays"))
                        })
                        .collect::<Result<_, _>>()?;
                    let cap = size_cap.unwrap_or(sets.len());
                    let out = oracles::exact_cover_search(&sets, k, cap)?;
                    let text = serde_json::to_string_pretty(&json!({
                        "meta": header,
                        "disjoint_witness": out.disjoint_witness,
                        "min_cover_size": out.min_cover_size,
                    }))
                    .unwrap();
                    emit(&cli.out_file, &text)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(64)
            };
        }
    };
    match run(cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Precondition(_) | Error::Refused(_) | Error::Domain(_) | Error::Parse { .. })) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("internal error: {e}");
            ExitCode::from(1)
        }
    }
}
