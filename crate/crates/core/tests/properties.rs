//! Property tests: randomized batteries checking the module invariants
//! against independent oracles.

use proptest::prelude::*;
use rug::{Integer, Rational};

use svplab_core::counting::{self, RadiusPow, ShiftSpec, ShiftedBallQuery};
use svplab_core::lattice::{self, Basis, EnumLimits};
use svplab_core::theta;
use svplab_core::{NormExponent, DEFAULT_PREC};

fn rat(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

/// Exhaustive oracle: recursive scan with exact rational costs.
fn enum_count(pk: u32, shifts: &[Rational], rpow: &Rational) -> Integer {
    fn cost(z: i64, t: &Rational, pk: u32) -> Rational {
        use rug::ops::Pow;
        let d = (Rational::from(z) - t).abs();
        Rational::from(d.numer().clone().pow(pk)) / Rational::from(d.denom().clone().pow(pk))
    }
    fn rec(i: usize, remaining: Rational, shifts: &[Rational], pk: u32) -> Integer {
        if i == shifts.len() {
            return Integer::from(1);
        }
        let mut total = Integer::from(0);
        let z0 = shifts[i].to_f64().round() as i64;
        for dir in [1i64, -1] {
            let mut z = if dir == 1 { z0 } else { z0 - 1 };
            loop {
                let c = cost(z, &shifts[i], pk);
                if c > remaining {
                    break;
                }
                total += rec(i + 1, remaining.clone() - c, shifts, pk);
                z += dir;
            }
        }
        total
    }
    rec(0, rpow.clone(), shifts, pk)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn count_exact_matches_enumeration(
        pk in 1u32..=3,
        n in 1usize..=5,
        rp_num in 1i64..=40,
        rp_den in 1i64..=4,
        t_num in -6i64..=6,
        t_den in 1i64..=4,
    ) {
        let rpow = rat(rp_num, rp_den);
        let shift = rat(t_num, t_den);
        let q = ShiftedBallQuery::new(
            NormExponent::new(pk as f64).unwrap(),
            n,
            RadiusPow::Exact(rpow.clone()),
            ShiftSpec::Uniform(shift.clone()),
        ).unwrap();
        let got = counting::count_exact(&q).unwrap();
        let canon = theta::canonical_shift(&shift);
        let oracle = enum_count(pk, &vec![canon; n], &rpow);
        prop_assert_eq!(got.lo, oracle);
    }

    #[test]
    fn count_interval_brackets_exact_and_nests(
        pk in 1u32..=3,
        n in 1usize..=4,
        rp_num in 1i64..=20,
        t_num in -3i64..=3,
    ) {
        let rpow = rat(rp_num, 3);
        let shift = rat(t_num, 5);
        let p = NormExponent::new(pk as f64).unwrap();
        let q = ShiftedBallQuery::new(
            p, n,
            RadiusPow::Exact(rpow.clone()),
            ShiftSpec::Uniform(shift.clone()),
        ).unwrap();
        let exact = counting::count_exact(&q).unwrap().lo;
        let coarse = counting::count_interval(&q, &rat(1, 16)).unwrap();
        let fine = counting::count_interval(&q, &rat(1, 32)).unwrap();
        prop_assert!(coarse.lo <= exact && exact <= coarse.hi);
        prop_assert!(fine.lo >= coarse.lo && fine.hi <= coarse.hi);
    }

    #[test]
    fn theta_shift_periodicity_and_symmetry(
        t_num in -40i64..=40,
        t_den in 1i64..=8,
        k in -3i64..=3,
    ) {
        // Θ is invariant under t -> t + k and t -> -t
        let p = NormExponent::new(2.0).unwrap();
        let tau = rug::Float::with_val(DEFAULT_PREC + 32, 1.25);
        let t = rat(t_num, t_den);
        let shifted = t.clone() + Rational::from(k);
        let a = theta::theta(p, &tau, &t, 96).unwrap();
        let b = theta::theta(p, &tau, &shifted, 96).unwrap();
        let c = theta::theta(p, &tau, &(-t), 96).unwrap();
        prop_assert_eq!(a.value.clone(), b.value.clone());
        prop_assert_eq!(a.value, c.value);
    }

    #[test]
    fn log_theta_midpoint_convexity(
        pv in 1.0f64..5.0,
        tau_a in 1u32..40,
        tau_gap in 1u32..40,
        t_num in 0i64..=8,
    ) {
        // midpoint convexity of log Θ in τ, on random (p, τ, t) triples
        let p = NormExponent::new(pv).unwrap();
        let t = rat(t_num, 16);
        let a = tau_a as f64 / 8.0;
        let b = a + tau_gap as f64 / 8.0;
        let f = |x: f64| {
            theta::theta(p, &rug::Float::with_val(DEFAULT_PREC + 32, x), &t, DEFAULT_PREC)
                .unwrap()
                .value
                .ln()
                .to_f64()
        };
        let (la, lb, lm) = (f(a), f(b), f(0.5 * (a + b)));
        prop_assert!(lm <= 0.5 * (la + lb) + 1e-12);
        // and strict monotone decrease
        prop_assert!(lb < la);
    }

    #[test]
    fn interval_engine_refuses_unrepresentable_budgets(
        exp in 20u32..60,
    ) {
        // a budget far beyond the resolution grid must refuse, not wrap
        let q = ShiftedBallQuery::new(
            NormExponent::new(2.0).unwrap(),
            2,
            RadiusPow::Exact(Rational::from(Integer::from(1) << (exp + 64))),
            ShiftSpec::Uniform(rat(0, 1)),
        ).unwrap();
        let res = Rational::from((1, 1u64 << exp));
        let out = counting::count_interval(&q, &res);
        prop_assert!(matches!(out, Err(svplab_core::Error::Refused(_))));
    }

    #[test]
    fn enumeration_negation_closure(seed in 0u64..500) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let entries: Vec<Vec<Rational>> = loop {
            let e: Vec<Vec<Rational>> = (0..3)
                .map(|_| (0..3).map(|_| rat(rng.random_range(-2..=2), 1)).collect())
                .collect();
            if Basis::new(e.clone()).is_ok() {
                break e;
            }
        };
        let b = Basis::new(entries).unwrap();
        let pts = lattice::enumerate_points(
            &b,
            NormExponent::new(2.0).unwrap(),
            &RadiusPow::Exact(rat(5, 1)),
            &lattice::zero_target(&b),
            &EnumLimits::default(),
        ).unwrap();
        for pt in &pts {
            let neg: Vec<i64> = pt.coeffs.iter().map(|&c| -c).collect();
            prop_assert!(pts.iter().any(|q| q.coeffs == neg));
        }
    }

    #[test]
    fn scaled_enumeration_matches_unscaled_at_scaled_budget(
        seed in 0u64..150,
        apow_num in 2i64..=9,
        budget_num in 1i64..=30,
    ) {
        // enumerating α·L within r^p equals enumerating L within r^p/α^p,
        // with α = (apow)^{1/p} entering as an exact PthRoot row scale
        use rand::{Rng, SeedableRng};
        use svplab_core::lattice::RowScale;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let entries: Vec<Vec<Rational>> = loop {
            let e: Vec<Vec<Rational>> = (0..3)
                .map(|_| (0..3).map(|_| rat(rng.random_range(-2..=2), 1)).collect())
                .collect();
            if Basis::new(e.clone()).is_ok() {
                break e;
            }
        };
        let apow = rat(apow_num, 2);
        let budget = rat(budget_num, 4);
        let plain = Basis::new(entries.clone()).unwrap();
        let scaled = Basis::with_row_scales(
            entries,
            vec![RowScale::PthRoot(apow.clone()); 3],
        ).unwrap();
        let p2 = NormExponent::new(2.0).unwrap();
        let lim = EnumLimits::default();
        let a = lattice::enumerate_points(
            &scaled,
            p2,
            &RadiusPow::Exact(budget.clone()),
            &lattice::zero_target(&scaled),
            &lim,
        ).unwrap();
        let b = lattice::enumerate_points(
            &plain,
            p2,
            &RadiusPow::Exact(budget / apow),
            &lattice::zero_target(&plain),
            &lim,
        ).unwrap();
        let ca: Vec<Vec<i64>> = a.iter().map(|pt| pt.coeffs.clone()).collect();
        let cb: Vec<Vec<i64>> = b.iter().map(|pt| pt.coeffs.clone()).collect();
        prop_assert_eq!(ca, cb);
    }

    #[test]
    fn sparsified_index_divides_q(seed in 0u64..200) {
        // det ratio of the coefficient transform is 1 or q exactly
        let b = Basis::integer_lattice(3);
        let s = lattice::sparsify(&b, 103, seed).unwrap();
        let det = {
            let n = 3;
            let mut m: Vec<Vec<Rational>> = (0..n)
                .map(|r| (0..n).map(|c| Rational::from(&s.transform[c][r])).collect())
                .collect();
            let mut det = Rational::from(1);
            for col in 0..n {
                let pivot = (col..n).find(|&r| m[r][col] != 0);
                let Some(pivot) = pivot else {
                    det = Rational::from(0);
                    break;
                };
                if pivot != col {
                    m.swap(col, pivot);
                    det = -det;
                }
                det *= m[col][col].clone();
                let inv = Rational::from(1) / m[col][col].clone();
                let prow = m[col].clone();
                for row in m.iter_mut().skip(col + 1) {
                    if row[col] != 0 {
                        let f = Rational::from(&row[col] * &inv);
                        for cc in col..n {
                            let sub = Rational::from(&prow[cc] * &f);
                            row[cc] -= sub;
                        }
                    }
                }
            }
            det
        };
        let det_abs = det.abs();
        prop_assert!(det_abs == rat(1, 1) || det_abs == rat(103, 1));
    }
}
