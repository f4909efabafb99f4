use rug::Rational;
use svplab_core::lattice::EnumLimits;
use svplab_core::real::NormExponent;
use svplab_core::reductions::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let pv: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(11.0);
    let nd: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(16);
    let qmin: Option<u64> = args.get(3).and_then(|s| s.parse().ok());
    let ell: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(40);
    let seeds: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(20);

    let sat = CnfFormula::new(3, vec![vec![1], vec![2], vec![3], vec![1]], Some(3)).unwrap();
    let unsat = CnfFormula::new(3, vec![vec![1], vec![-1], vec![2], vec![3]], Some(3)).unwrap();
    let p = NormExponent::new(pv).unwrap();
    let lim = EnumLimits { max_rank: 34, max_nodes: 2_000_000_000, ..EnumLimits::default() };
    let params = PipelineParams {
        eta_prime: Rational::from((1, 2)),
        delta_target: 0.5,
        profile: GadgetProfile::TightHalfShift,
        n_dagger: Some(nd),
        overrides: Overrides { ell: Some(ell), q_min: qmin, threshold_frac: Some(0.5), unsafe_ok: true },
        prec: 128,
    };
    for (name, f, want) in [("SAT", &sat, "YES"), ("UNSAT", &unsat, "NO")] {
        let t0 = std::time::Instant::now();
        let mut ok = 0u64;
        let mut votes = vec![];
        for seed in 0..seeds {
            let run = pipeline_sat_to_svp(f, p, &params, seed, &lim).unwrap();
            if run.decision == want { ok += 1; }
            votes.push((run.vote.yes_votes, run.vote.threshold, run.vote.candidates, run.transcript.q.to_string()));
            if seed == 0 {
                eprintln!("{name}: rank={} A={} G={} q={} cand={} thr={}", run.agcvp.basis.rank(),
                    run.agcvp.a, run.agcvp.g, run.transcript.q, run.vote.candidates, run.vote.threshold);
            }
        }
        println!("{name}: {ok}/{seeds} correct ({want}); votes sample: {:?}; elapsed {:?}",
            &votes[..votes.len().min(5)], t0.elapsed());
    }
}
