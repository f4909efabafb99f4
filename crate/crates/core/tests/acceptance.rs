//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its elapsed time and asserting the stated tolerances and runtime budget.
//!
//! Stochastic criteria (6, 7, 9) run fixed seeds, so the suite is fully
//! deterministic and reproducible.

use std::time::{Duration, Instant};

use rug::{Float, Integer, Rational};

use svplab_core::counting::{self, RadiusPow, ShiftSpec, ShiftedBallQuery};
use svplab_core::gadgets;
use svplab_core::lattice::{self, Basis, EnumLimits};
use svplab_core::reductions::{self, GadgetProfile, Overrides, PipelineParams};
use svplab_core::theta;
use svplab_core::{NormExponent, RealApprox, DEFAULT_PREC};

fn p(v: f64) -> NormExponent {
    NormExponent::new(v).unwrap()
}

fn rat(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn fl(v: f64) -> Float {
    Float::with_val(DEFAULT_PREC + 32, v)
}

fn check_runtime(name: &str, elapsed: Duration, budget: Duration) {
    println!("criterion {name}: PASS in {elapsed:.2?} (budget {budget:.2?})");
    assert!(
        elapsed <= budget,
        "criterion {name} exceeded its runtime budget: {elapsed:?} > {budget:?}"
    );
}

#[test]
fn criterion_1_constants() {
    let t0 = Instant::now();
    let p0 = theta::find_p0(DEFAULT_PREC).unwrap();
    assert!(
        (p0.to_f64() - 2.13972134795007).abs() < 1e-9,
        "p0 = {}",
        p0.to_f64()
    );
    let c3 = theta::w_p(p(3.0), DEFAULT_PREC)
        .unwrap()
        .c_p
        .expect("C_3 defined");
    assert!(
        (c3.to_f64() - 3.01717780317660).abs() < 1e-9,
        "C_3 = {}",
        c3.to_f64()
    );
    let c5 = theta::w_p(p(5.0), DEFAULT_PREC)
        .unwrap()
        .c_p
        .expect("C_5 defined");
    assert!(
        (c5.to_f64() - 1.3018669052709).abs() < 1e-9,
        "C_5 = {}",
        c5.to_f64()
    );
    check_runtime("1 (constants)", t0.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_2_threshold_and_claim_bound() {
    let t0 = Instant::now();
    let two = Float::with_val(DEFAULT_PREC + 32, 2);
    for pv in [2.14, 2.2, 2.5, 3.0, 5.0, 10.0] {
        let w = theta::w_p(p(pv), DEFAULT_PREC).unwrap().w_p;
        assert!(w.hi() < two, "W_{pv} must be < 2, got {}", w.to_f64());
    }
    for pv in [1.0, 1.5, 2.0, 2.1] {
        let w = theta::w_p(p(pv), DEFAULT_PREC).unwrap().w_p;
        assert!(w.lo() > two, "W_{pv} must be > 2, got {}", w.to_f64());
    }
    for k in 3..=20u32 {
        let hc = theta::w_p(p(k as f64), DEFAULT_PREC).unwrap();
        let c = hc.c_p.expect("C_p defined for p >= 3").to_f64();
        let bound = theta::cp_simple_bound(k as f64).unwrap();
        assert!(c < bound, "C_{k} = {c} must be below the closed form {bound}");
    }
    check_runtime("2 (threshold + claim)", t0.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_3_counting() {
    let t0 = Instant::now();
    // exact DP: half-shifted ball at r = n^{1/p}/2 holds exactly {0,1}^n
    for pk in [3u32, 5] {
        let n = 20usize;
        let rpow = Rational::from((n as u64, 1u64 << pk));
        let q = ShiftedBallQuery::new(
            p(pk as f64),
            n,
            RadiusPow::Exact(rpow),
            ShiftSpec::Uniform(rat(1, 2)),
        )
        .unwrap();
        let c = counting::count_exact(&q).unwrap();
        assert!(c.is_exact());
        assert_eq!(c.lo, Integer::from(1u64 << n), "p = {pk}");
    }
    // growth constant at n = 256
    let g = counting::growth_constant(p(2.0), 256, &rat(1, 2)).unwrap();
    assert!((2.06..=2.11).contains(&g), "growth constant {g}");
    println!("  growth_constant(2, 256, 1/2) = {g:.6}");
    check_runtime("3 (counting)", t0.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_4_theta_sandwich() {
    let t0 = Instant::now();
    let mut fitted_c: f64 = 0.0;
    for pv in [1.0, 2.0, 3.0] {
        for tau_v in [0.5, 1.0, 2.0] {
            for n in [2u64, 4, 8, 12] {
                // both the centered and half-shifted slices of the grid
                let shift = if n % 4 == 0 {
                    Rational::from((1, 2))
                } else {
                    Rational::from(0)
                };
                let tau = fl(tau_v);
                let groups = vec![(shift.clone(), n)];
                let mu_vec = theta::mu_vec_grouped(p(pv), &tau, &groups, DEFAULT_PREC).unwrap();
                // exact count at r^p = mu: at these shifts the per-coordinate
                // costs land on the 2^-p grid, so the interval engine pins it
                let q = ShiftedBallQuery::new(
                    p(pv),
                    n as usize,
                    RadiusPow::Certified(mu_vec.clone()),
                    ShiftSpec::Uniform(shift.clone()),
                )
                .unwrap();
                let res = Rational::from((1, 1u64 << pv as u32));
                let cb = counting::count_interval(&q, &res).unwrap();
                assert!(cb.is_exact(), "dyadic costs pin the count exactly");
                let count = cb.lo;
                let count_f = Float::with_val(192, &count);
                // upper: exp(tau mu) Theta^n
                let th = theta::theta(p(pv), &tau, &shift, DEFAULT_PREC).unwrap();
                let upper = RealApprox::exact(tau.clone())
                    .mul(&mu_vec)
                    .exp()
                    .mul(&theta::pow_u64(&th, n));
                assert!(
                    upper.hi() >= count_f,
                    "upper bound fails at p={pv} tau={tau_v} n={n}"
                );
                // lower: best H_p bound over a delta grid
                let mut best_lo = Float::with_val(192, -1);
                for c in [0.5f64, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0] {
                    let delta = fl(c / (n as f64).sqrt());
                    let lo = theta::count_lower_bound_theta_grouped(
                        p(pv),
                        &tau,
                        &delta,
                        &groups,
                        DEFAULT_PREC,
                    )
                    .unwrap();
                    if lo.lo() > best_lo {
                        best_lo = lo.lo();
                    }
                }
                assert!(
                    best_lo <= count_f,
                    "H_p lower bound must not exceed the exact count"
                );
                let gap = (upper.value.clone().ln() - count_f.ln()).to_f64();
                fitted_c = fitted_c.max(gap / (n as f64).sqrt());
            }
        }
    }
    println!("  fitted sqrt-n constant c = {fitted_c:.4} (log-gap <= c sqrt(n) on the grid)");
    assert!(fitted_c.is_finite() && fitted_c > 0.0);
    check_runtime("4 (theta sandwich)", t0.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_5_derivative_checks() {
    let t0 = Instant::now();
    let prec = 192;
    let h = 1e-4;
    for pv in [1.0, 2.0, 3.0] {
        for tau_v in [0.5, 1.0, 2.0] {
            for t in [rat(0, 1), rat(1, 4), rat(1, 2)] {
                let lp = theta::theta(p(pv), &fl(tau_v + h), &t, prec)
                    .unwrap()
                    .value
                    .ln();
                let lm = theta::theta(p(pv), &fl(tau_v - h), &t, prec)
                    .unwrap()
                    .value
                    .ln();
                let l0 = theta::theta(p(pv), &fl(tau_v), &t, prec).unwrap().value.ln();
                let fd_mu = -((lp.clone() - lm.clone()) / Float::with_val(prec, 2.0 * h)).to_f64();
                let mu = theta::mu(p(pv), &fl(tau_v), &t, prec).unwrap().to_f64();
                assert!(
                    (fd_mu - mu).abs() / mu.abs().max(1e-12) < 1e-5,
                    "mu mismatch p={pv} tau={tau_v} t={t}: fd={fd_mu} mu={mu}"
                );
                let fd_v = (Float::with_val(prec, Float::with_val(prec, &lp + &lm) - 2 * l0)
                    / Float::with_val(prec, h * h))
                .to_f64();
                let v = theta::variance_v(p(pv), &fl(tau_v), &t, prec).unwrap().to_f64();
                assert!(
                    (fd_v - v).abs() / v.abs().max(1e-12) < 1e-5,
                    "V mismatch p={pv} tau={tau_v} t={t}: fd={fd_v} v={v}"
                );
            }
        }
    }
    check_runtime("5 (derivative checks)", t0.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_6_sparsification_stats() {
    let t0 = Instant::now();
    let stats = lattice::sparsify_survival_stats(
        &Basis::integer_lattice(4),
        p(2.0),
        &RadiusPow::Exact(rat(1, 1)),
        101,
        10_000,
        20260808,
        &EnumLimits::default(),
    )
    .unwrap();
    assert_eq!(stats.primitive_count, 4);
    let n = 4.0f64;
    let q = 101.0f64;
    let sigma = (stats.freq * (1.0 - stats.freq) / stats.trials as f64)
        .sqrt()
        .max(1e-4);
    println!(
        "  empirical {:.5} vs band [{:.5}, {:.5}]",
        stats.freq,
        n / q - n * n / (q * q) - 3.0 * sigma,
        n / q + 3.0 * sigma
    );
    assert!(stats.freq >= n / q - n * n / (q * q) - 3.0 * sigma);
    assert!(stats.freq <= n / q + 3.0 * sigma);
    check_runtime("6 (sparsification stats)", t0.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_7_end_to_end_reduction() {
    let t0 = Instant::now();
    // the satisfiable toy and a padded contradiction, both 3 vars / 4 clauses
    let sat = reductions::CnfFormula::new(3, vec![vec![1], vec![2], vec![3], vec![1]], Some(3))
        .unwrap();
    let unsat =
        reductions::CnfFormula::new(3, vec![vec![1], vec![-1], vec![2], vec![3]], Some(3)).unwrap();
    let pe = p(11.0);
    let limits = EnumLimits {
        max_rank: 30,
        max_nodes: 2_000_000_000,
        ..EnumLimits::default()
    };
    let params = PipelineParams {
        eta_prime: rat(1, 2),
        delta_target: 0.5,
        profile: GadgetProfile::TightHalfShift,
        n_dagger: Some(16),
        overrides: Overrides {
            ell: Some(48),
            q_min: Some(60_000),
            threshold_frac: Some(0.5),
            unsafe_ok: true,
        },
        prec: DEFAULT_PREC,
    };
    for (name, f, want) in [("satisfiable", &sat, "YES"), ("contradiction", &unsat, "NO")] {
        // the instance is deterministic: build once, reuse candidates across seeds
        let red = reductions::sat_to_setcover(f, &params.eta_prime).unwrap();
        let esc = &red.instance;
        let gp = gadgets::integer_gadget_params(pe, params.delta_target, params.prec).unwrap();
        let sg = gadgets::tight_half_shift_gadget(
            &gp,
            esc.sets.len(),
            esc.size_bound as u64,
            &esc.eta,
            params.n_dagger.unwrap(),
        )
        .unwrap();
        let inst = reductions::setcover_to_agcvp(esc, &sg, true, params.prec).unwrap();
        let rprime = Rational::from(&inst.rpow + &inst.spow);
        let candidates = reductions::enumerate_svp_candidates(&inst, &rprime, &limits).unwrap();
        let mut correct = 0u32;
        for seed in 0..20u64 {
            let transcript =
                reductions::agcvp_to_svp_instances(&inst, seed, &params.overrides, 0).unwrap();
            let vote = reductions::vote_on_candidates(
                &candidates,
                inst.basis.rank() + 1,
                &transcript,
            )
            .unwrap();
            if vote.decision == want {
                correct += 1;
            }
        }
        println!("  {name}: {correct}/20 seeds decided {want} ({} candidates)", candidates.len());
        assert!(
            correct >= 18,
            "{name} formula must decide {want} with empirical probability >= 0.9, got {correct}/20"
        );
    }
    check_runtime("7 (end-to-end reduction)", t0.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_8_gadget_inequality() {
    let t0 = Instant::now();
    let gp = gadgets::integer_gadget_params(p(3.0), 0.5, DEFAULT_PREC).unwrap();
    let opts = gadgets::ScaleOptions {
        allow_small: true, // eta*d = 2 < 10 at this toy size
        n_dagger_override: None,
        validate: true,
    };
    let sg = gadgets::scale_gadget(&gp, 6, 4, &rat(1, 2), &opts, DEFAULT_PREC).unwrap();
    let sides = gadgets::gadget_side_bounds(&sg, DEFAULT_PREC).unwrap();
    let lhs = sides.a_hi.mul_f64(2f64.powi(6));
    let certified = lhs.lt_certified(&sides.g_lo);
    println!(
        "  n_dagger = {}, ln(lhs·2^m) = {:.3}, ln(rhs) = {:.3}",
        sg.n_dagger,
        lhs.hi().ln().to_f64(),
        sides.g_lo.lo().ln().to_f64()
    );
    assert_eq!(
        certified,
        Some(true),
        "certified-hi left side must fall below certified-lo right side"
    );
    check_runtime("8 (gadget inequality)", t0.elapsed(), Duration::from_secs(60));
}

#[test]
fn criterion_9_monte_carlo() {
    let t0 = Instant::now();
    let n = 100usize;
    let mut v = vec![0.0; n];
    v[0] = 1.0;
    let delta = 1.0f64 / 200.0;
    let eps = delta.sqrt() / 20.0;
    let out = gadgets::close_prob_mc(&v, delta, eps, 1_000_000, 20260808, false).unwrap();
    assert!(out.in_guarantee);
    println!(
        "  freq = {:.6}, analytic bound = {:.6}, sigma = {:.6}",
        out.freq, out.analytic_bound, out.sigma
    );
    assert!(
        out.freq >= out.analytic_bound - 3.0 * out.sigma,
        "frequency {} below bound {} - 3 sigma",
        out.freq,
        out.analytic_bound
    );
    for n in [100u32, 200] {
        let full = gadgets::angle_integral(n, 1e-12, std::f64::consts::PI - 1e-12).unwrap();
        assert!(full <= 1.0, "angle integral at n = {n}: {full}");
    }
    check_runtime("9 (monte carlo)", t0.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_10_local_minimum_dichotomy() {
    let t0 = Instant::now();
    let one = fl(1.0);
    for pv in [2.5, 3.0, 4.0] {
        let th0 = theta::theta(p(pv), &one, &Rational::from(0), DEFAULT_PREC).unwrap();
        let found = (1..=256).any(|i| {
            let t = Rational::from((i, 512));
            let th = theta::theta(p(pv), &one, &t, DEFAULT_PREC).unwrap();
            th.lo() > th0.hi()
        });
        assert!(found, "p = {pv}: grid must find t with Theta(1;t) > Theta(1;0)");
    }
    for pv in [1.0, 1.5, 2.0] {
        let th0 = theta::theta(p(pv), &one, &Rational::from(0), DEFAULT_PREC).unwrap();
        for i in 1..=256 {
            let t = Rational::from((i, 512));
            let th = theta::theta(p(pv), &one, &t, DEFAULT_PREC).unwrap();
            assert!(
                th.hi() < th0.lo(),
                "p = {pv}: no shift may beat the origin, but t = {t} does"
            );
        }
    }
    check_runtime("10 (local-minimum dichotomy)", t0.elapsed(), Duration::from_secs(30));
}
