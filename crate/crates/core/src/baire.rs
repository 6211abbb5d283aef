//! Budgeted limit operators on Baire-space points.
//!
//! A point is a function p: N -> N. A doubly-indexed family is folded into
//! one point through the Cantor pairing, p_n(k) = p(pair(n, k)), and the
//! limit operator reads the column n -> p_n(k) for a fixed k. Within a
//! finite budget a limit can only be reported as a verdict: either the
//! column locked onto a final constant run long enough to trust, or it kept
//! changing. Nothing here decides a limit; the verdict names exactly what
//! was observed.
//!
//! The same discipline drives the mind-change runner: a stage map
//! s -> phi(s) is scanned up to a budget and the run records every
//! provisional value together with the number of revisions.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Cantor pairing (n + k)(n + k + 1)/2 + k, a bijection N x N -> N.
pub fn pair(n: u64, k: u64) -> u64 {
    let s = n as u128 + k as u128;
    let m = s * (s + 1) / 2 + k as u128;
    u64::try_from(m).expect("pairing overflowed u64")
}

/// Inverse of [`pair`].
pub fn unpair(m: u64) -> (u64, u64) {
    // Triangular root: the float guess is correct to within one and is
    // fixed up exactly in integers.
    let mut s = (((8.0 * m as f64 + 1.0).sqrt() - 1.0) / 2.0) as u64;
    while s * (s + 1) / 2 > m {
        s -= 1;
    }
    while (s + 1) * (s + 2) / 2 <= m {
        s += 1;
    }
    let k = m - s * (s + 1) / 2;
    (s - k, k)
}

/// Tail length a run must hold to be reported as stabilized by default.
pub fn default_tail(budget: u64) -> u64 {
    (budget / 4).max(1)
}

/// What a budgeted scan of one column observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimVerdict {
    /// The column is constant from `since` through the budget, and that
    /// final run is at least the required tail length.
    Stabilized { value: u64, since: u64 },
    /// The column kept moving; `changes` counts consecutive revisions.
    NotStabilized { changes: u64 },
}

/// Scan p_n(k) for n in 0..=budget and report the stabilization verdict.
///
/// Requires budget >= tail >= 1. The verdict is `Stabilized` exactly when
/// the final constant run has length at least `tail`.
pub fn lim_at<P: Fn(u64) -> u64>(p: &P, k: u64, budget: u64, tail: u64) -> LimVerdict {
    assert!(tail >= 1, "tail must be positive");
    assert!(budget >= tail, "budget must cover the required tail");
    let mut value = p(pair(0, k));
    let mut since = 0u64;
    let mut changes = 0u64;
    for n in 1..=budget {
        let next = p(pair(n, k));
        if next != value {
            value = next;
            since = n;
            changes += 1;
        }
    }
    if budget - since + 1 >= tail {
        LimVerdict::Stabilized { value, since }
    } else {
        LimVerdict::NotStabilized { changes }
    }
}

/// Outcome of an iterated limit of the given height.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterVerdict {
    Value(u64),
    /// Some column at `height` failed to stabilize; inner failures surface
    /// before outer ones because evaluation works innermost first.
    FailedAt { height: u32, changes: u64 },
}

/// Iterated limit: height 0 is literally the identity, height h + 1 applies
/// one more [`lim_at`] on top. Every inner column is scanned with the same
/// budget and tail, so the work is (budget + 1)^height point reads.
pub fn iterated_lim<P: Fn(u64) -> u64>(
    p: &P,
    height: u32,
    k: u64,
    budget: u64,
    tail: u64,
) -> IterVerdict {
    if height == 0 {
        return IterVerdict::Value(p(k));
    }
    let mut value = 0u64;
    let mut since = 0u64;
    let mut changes = 0u64;
    for n in 0..=budget {
        let inner = match iterated_lim(p, height - 1, pair(n, k), budget, tail) {
            IterVerdict::Value(v) => v,
            failed => return failed,
        };
        if n == 0 {
            value = inner;
        } else if inner != value {
            value = inner;
            since = n;
            changes += 1;
        }
    }
    if budget - since + 1 >= tail {
        IterVerdict::Value(value)
    } else {
        IterVerdict::FailedAt { height, changes }
    }
}

/// A mind-change run: every provisional value a stage map produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MindChangeRun {
    stages: Vec<i64>,
}

impl MindChangeRun {
    pub fn stages(&self) -> &[i64] {
        &self.stages
    }

    /// The value held after the last stage. Provisional by construction.
    pub fn final_value(&self) -> i64 {
        *self.stages.last().expect("runs have at least one stage")
    }

    /// Number of revisions between consecutive stages.
    pub fn changes(&self) -> usize {
        self.stages.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// `stage,value` rows, one per stage.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage,value\n");
        for (s, v) in self.stages.iter().enumerate() {
            out.push_str(&format!("{s},{v}\n"));
        }
        out
    }
}

/// Run a stage map through stages 0..=budget and record every value.
pub fn fmc_run(stage_map: impl Fn(u64) -> i64, budget: u64) -> MindChangeRun {
    let stages = (0..=budget).map(stage_map).collect();
    MindChangeRun { stages }
}

/// Stage map for computing sgn(q) by approximation: commit to the sign only
/// once it clears the stage-s resolution 2^-s, otherwise report 0.
pub fn sign_stage(q: &BigRational, s: u64) -> i64 {
    let threshold = BigRational::new(BigInt::one(), BigInt::one() << s as usize);
    let abs = if q < &BigRational::zero() { -q.clone() } else { q.clone() };
    if abs > threshold {
        if q > &BigRational::zero() {
            1
        } else {
            -1
        }
    } else {
        0
    }
}

/// Mind-change run of [`sign_stage`]: at most one revision for any input,
/// zero when q = 0.
pub fn sign_run(q: &BigRational, budget: u64) -> MindChangeRun {
    fmc_run(|s| sign_stage(q, s), budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_walks_the_diagonals() {
        assert_eq!(pair(0, 0), 0);
        assert_eq!(pair(1, 0), 1);
        assert_eq!(pair(0, 1), 2);
        assert_eq!(pair(2, 0), 3);
        assert_eq!(pair(1, 1), 4);
        assert_eq!(pair(0, 2), 5);
    }

    #[test]
    fn pairing_round_trips() {
        for m in 0..10_000u64 {
            let (n, k) = unpair(m);
            assert_eq!(pair(n, k), m);
        }
        for n in 0..80u64 {
            for k in 0..80u64 {
                assert_eq!(unpair(pair(n, k)), (n, k));
            }
        }
    }

    #[test]
    fn constant_family_stabilizes_immediately() {
        let p = |_m: u64| 42u64;
        assert_eq!(
            lim_at(&p, 3, 100, default_tail(100)),
            LimVerdict::Stabilized { value: 42, since: 0 }
        );
    }

    #[test]
    fn step_family_reports_the_step_index() {
        let p = |m: u64| u64::from(unpair(m).0 >= 5);
        assert_eq!(
            lim_at(&p, 5, 100, default_tail(100)),
            LimVerdict::Stabilized { value: 1, since: 5 }
        );
    }

    #[test]
    fn alternating_family_counts_every_change() {
        let p = |m: u64| unpair(m).0 % 2;
        assert_eq!(
            lim_at(&p, 0, 100, default_tail(100)),
            LimVerdict::NotStabilized { changes: 100 }
        );
    }

    #[test]
    fn tail_requirement_is_sharp() {
        // Last change at n = 8 leaves a run of length 3 over budget 10.
        let p = |m: u64| u64::from(unpair(m).0 >= 8);
        assert_eq!(
            lim_at(&p, 0, 10, 3),
            LimVerdict::Stabilized { value: 1, since: 8 }
        );
        assert_eq!(lim_at(&p, 0, 10, 4), LimVerdict::NotStabilized { changes: 1 });
    }

    #[test]
    fn height_zero_is_the_identity() {
        let p = |m: u64| m * m + 1;
        for k in 0..20 {
            assert_eq!(iterated_lim(&p, 0, k, 10, 2), IterVerdict::Value(k * k + 1));
        }
    }

    #[test]
    fn height_one_matches_lim_at() {
        let p = |m: u64| u64::from(unpair(m).0 >= 5);
        assert_eq!(iterated_lim(&p, 1, 9, 100, 25), IterVerdict::Value(1));
    }

    #[test]
    fn two_level_step_resolves_under_height_two() {
        // Inner limit at index j is 7 once the n-part of j reaches 3; the
        // inner columns themselves settle from row 2 on.
        let p = |m: u64| {
            let (n_outer, j) = unpair(m);
            if n_outer < 2 {
                0
            } else if unpair(j).0 >= 3 {
                7
            } else {
                0
            }
        };
        assert_eq!(iterated_lim(&p, 2, 0, 20, 4), IterVerdict::Value(7));
    }

    #[test]
    fn inner_failure_propagates_from_its_height() {
        let p = |m: u64| unpair(m).0 % 2;
        assert_eq!(
            iterated_lim(&p, 2, 0, 20, 5),
            IterVerdict::FailedAt { height: 1, changes: 20 }
        );
    }

    #[test]
    fn constant_stage_map_never_changes_its_mind() {
        let run = fmc_run(|_| 0, 50);
        assert_eq!(run.changes(), 0);
        assert_eq!(run.final_value(), 0);
    }

    #[test]
    fn sign_of_minus_one_needs_one_revision() {
        let q = BigRational::from(BigInt::from(-1));
        let run = sign_run(&q, 20);
        assert_eq!(run.final_value(), -1);
        assert!(run.changes() <= 1);
    }

    #[test]
    fn sign_of_zero_never_moves() {
        let run = sign_run(&BigRational::zero(), 20);
        assert_eq!(run.changes(), 0);
        assert_eq!(run.final_value(), 0);
    }

    #[test]
    fn tiny_positive_input_stays_provisionally_zero() {
        let q = BigRational::new(BigInt::one(), BigInt::from(1024));
        let short = sign_run(&q, 5);
        assert_eq!(short.final_value(), 0);
        assert_eq!(short.changes(), 0);
        let long = sign_run(&q, 15);
        assert_eq!(long.final_value(), 1);
        assert_eq!(long.changes(), 1);
    }

    #[test]
    fn csv_lists_one_row_per_stage() {
        let q = BigRational::from(BigInt::from(-1));
        let csv = sign_run(&q, 2).to_csv();
        assert_eq!(csv, "stage,value\n0,0\n1,-1\n2,-1\n");
    }
}
