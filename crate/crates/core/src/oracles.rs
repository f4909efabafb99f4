//! Brute-force ground truth: SVP/CVP decision by exact enumeration and
//! exhaustive exact-cover search. Oracles never approximate — when a budget
//! would be exceeded they refuse, which is an explicit third outcome.

use std::collections::HashMap;

use rug::Rational;

use crate::counting::RadiusPow;
use crate::error::{Error, Result};
use crate::lattice::{enumerate_points, zero_target, Basis, EnumLimits};
use crate::real::NormExponent;

/// Budget for oracle enumeration (rank cap, node cap, coefficient box cap).
pub type OracleBudget = EnumLimits;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Decision::Yes => write!(f, "YES"),
            Decision::No => write!(f, "NO"),
        }
    }
}

/// Exact SVP decision: is `λ_1^{(p)}(L) ≤ r`? Radii enter as `r^p`.
/// Boundary-ambiguous points make the oracle refuse rather than guess.
pub fn svp_decide(
    basis: &Basis,
    p: NormExponent,
    rpow: &RadiusPow,
    budget: &OracleBudget,
) -> Result<Decision> {
    let pts = enumerate_points(basis, p, rpow, &zero_target(basis), budget)?;
    let mut saw_boundary = false;
    for pt in &pts {
        if pt.coeffs.iter().all(|&c| c == 0) {
            continue;
        }
        if pt.boundary {
            saw_boundary = true;
        } else {
            return Ok(Decision::Yes);
        }
    }
    if saw_boundary {
        return Err(Error::refused(
            "shortest candidate sits on the radius within working precision",
        ));
    }
    Ok(Decision::No)
}

/// Exact CVP decision: is `dist_p(t, L) ≤ r`?
pub fn cvp_decide(
    basis: &Basis,
    target: &[Rational],
    p: NormExponent,
    rpow: &RadiusPow,
    budget: &OracleBudget,
) -> Result<Decision> {
    let pts = enumerate_points(basis, p, rpow, target, budget)?;
    let mut saw_boundary = false;
    for pt in &pts {
        if pt.boundary {
            saw_boundary = true;
        } else {
            return Ok(Decision::Yes);
        }
    }
    if saw_boundary {
        return Err(Error::refused(
            "closest candidate sits on the radius within working precision",
        ));
    }
    Ok(Decision::No)
}

/// Result of the exhaustive exact-cover search.
#[derive(Debug, Clone)]
pub struct CoverSearch {
    /// Minimal-size exact disjoint cover (set indices), if one exists within
    /// the size cap.
    pub disjoint_witness: Option<Vec<usize>>,
    /// Minimum number of (not necessarily disjoint) sets covering the
    /// universe, within the cap; `None` if no cover of size ≤ cap exists.
    pub min_cover_size: Option<usize>,
}

/// Exhaustive exact-cover search over bitmask set systems.
///
/// `sets[i]` is the mask of universe elements covered by set `i`; the
/// universe is `{0, …, k-1}` with `k ≤ 24` (or `m ≤ 30`). The disjoint
/// search branches on the lowest uncovered element with memoization; the
/// non-disjoint minimum is a DP over all `2^k` masks.
pub fn exact_cover_search(sets: &[u64], k: usize, size_cap: usize) -> Result<CoverSearch> {
    if k > 24 && sets.len() > 30 {
        return Err(Error::refused(
            "exact cover search requires universe <= 24 or m <= 30",
        ));
    }
    if k >= 63 {
        return Err(Error::refused("universe too large for bitmask search"));
    }
    let full: u64 = if k == 0 { 0 } else { (1u64 << k) - 1 };
    for (i, s) in sets.iter().enumerate() {
        if s & !full != 0 {
            return Err(Error::domain(format!("set {i} exceeds the universe")));
        }
        if *s == 0 {
            return Err(Error::domain(format!("set {i} is empty")));
        }
    }

    // element -> sets containing it
    let mut containing: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, s) in sets.iter().enumerate() {
        for (e, c) in containing.iter_mut().enumerate() {
            if s >> e & 1 == 1 {
                c.push(i);
            }
        }
    }

    // minimal disjoint exact cover: branch on the lowest uncovered element;
    // memo keyed by covered mask stores the best completion size
    fn disjoint_rec(
        covered: u64,
        full: u64,
        sets: &[u64],
        containing: &[Vec<usize>],
        memo: &mut HashMap<u64, Option<Vec<usize>>>,
    ) -> Option<Vec<usize>> {
        if covered == full {
            return Some(Vec::new());
        }
        if let Some(hit) = memo.get(&covered) {
            return hit.clone();
        }
        let lowest = (!covered & full).trailing_zeros() as usize;
        let mut best: Option<Vec<usize>> = None;
        for &i in &containing[lowest] {
            if sets[i] & covered != 0 {
                continue; // not disjoint
            }
            if let Some(mut rest) = disjoint_rec(covered | sets[i], full, sets, containing, memo) {
                rest.push(i);
                if best.as_ref().is_none_or(|b| rest.len() < b.len()) {
                    best = Some(rest);
                }
            }
        }
        memo.insert(covered, best.clone());
        best
    }
    let mut memo = HashMap::new();
    let disjoint_witness = disjoint_rec(0, full, sets, &containing, &mut memo)
        .filter(|w| w.len() <= size_cap)
        .map(|mut v| {
            v.reverse();
            v
        });

    // non-disjoint minimum cover: DP over union masks for k <= 24; layered
    // BFS over reachable unions otherwise
    let min_cover_size = if k <= 24 {
        let mut dp = vec![u32::MAX; 1usize << k];
        dp[0] = 0;
        for mask in 0..(1usize << k) {
            if dp[mask] == u32::MAX {
                continue;
            }
            for s in sets {
                let nm = mask | *s as usize;
                if dp[nm] > dp[mask] + 1 {
                    dp[nm] = dp[mask] + 1;
                }
            }
        }
        let best = dp[full as usize];
        if best == u32::MAX || best as usize > size_cap {
            None
        } else {
            Some(best as usize)
        }
    } else {
        let mut frontier: HashMap<u64, usize> = HashMap::new();
        frontier.insert(0, 0);
        let mut best: Option<usize> = None;
        for depth in 1..=size_cap {
            let mut next: HashMap<u64, usize> = HashMap::new();
            for &mask in frontier.keys() {
                for s in sets {
                    let nm = mask | s;
                    if nm == full {
                        best = Some(depth);
                    }
                    next.entry(nm).or_insert(depth);
                }
            }
            if best.is_some() {
                break;
            }
            frontier = next;
        }
        best
    };

    Ok(CoverSearch {
        disjoint_witness,
        min_cover_size,
    })
}
