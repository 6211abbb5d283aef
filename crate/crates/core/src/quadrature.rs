//! Deterministic dyadic partitions of the circle with midpoint samples.
//!
//! Level n tiles [0,1) into 2^n half-open cells of width 2^-n, sampled at
//! their midpoints with uniform weights. Midpoints and weights are exact
//! dyadic rationals in f64, and the midpoint rule integrates the Fourier
//! dictionary exactly below the Nyquist index, so small tests can compare
//! against exact values instead of tolerances.

use thiserror::Error;

/// Largest partition level; 2^24 cells is already 16M samples.
pub const MAX_LEVEL: u32 = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuadratureError {
    #[error("partition level {0} exceeds the resource guard {MAX_LEVEL}")]
    ResourceLimit(u32),
}

/// One dyadic partition level: cells, midpoint samples, uniform weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionLevel {
    pub n: u32,
    samples: Vec<f64>,
    /// Weight of every cell: 2^-n.
    pub weight: f64,
}

impl PartitionLevel {
    /// Midpoints (2j+1)/2^(n+1) in cell order.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Half-open cells [j/2^n, (j+1)/2^n) in order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let w = self.weight;
        (0..self.samples.len()).map(move |j| (j as f64 * w, (j + 1) as f64 * w))
    }

    pub fn cell_count(&self) -> usize {
        self.samples.len()
    }
}

/// Build partition level n (1 <= n <= [`MAX_LEVEL`]).
pub fn partition(n: u32) -> Result<PartitionLevel, QuadratureError> {
    assert!(n >= 1, "partition level must be positive");
    if n > MAX_LEVEL {
        return Err(QuadratureError::ResourceLimit(n));
    }
    let cells = 1usize << n;
    let weight = 1.0 / cells as f64;
    let half = weight / 2.0;
    let samples = (0..cells).map(|j| j as f64 * weight + half).collect();
    Ok(PartitionLevel { n, samples, weight })
}

/// A sample point tagged with the level it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeveledSample {
    pub level: u32,
    pub x: f64,
    pub weight: f64,
}

/// All samples of levels 1..=n with their level tags, coarsest first.
///
/// This is the query set of the stabilized base maps: 2^(n+1) - 2 points,
/// pairwise distinct across levels (midpoints have odd numerators).
pub fn cumulative_samples(n: u32) -> Result<Vec<LeveledSample>, QuadratureError> {
    assert!(n >= 1, "partition level must be positive");
    if n > MAX_LEVEL {
        return Err(QuadratureError::ResourceLimit(n));
    }
    let mut out = Vec::with_capacity((1usize << (n + 1)) - 2);
    for k in 1..=n {
        let level = partition(k)?;
        let weight = level.weight;
        out.extend(
            level
                .samples()
                .iter()
                .map(|&x| LeveledSample { level: k, x, weight }),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn level_one_by_hand() {
        let p = partition(1).unwrap();
        assert_eq!(p.samples(), &[0.25, 0.75]);
        assert_eq!(p.weight, 0.5);
        let cells: Vec<_> = p.cells().collect();
        assert_eq!(cells, vec![(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn weights_sum_to_one_exactly() {
        for n in 1..=12 {
            let p = partition(n).unwrap();
            let sum: f64 = (0..p.cell_count()).map(|_| p.weight).sum();
            assert_eq!(sum, 1.0, "level {n}");
        }
    }

    #[test]
    fn samples_are_distinct_and_inside_cells() {
        let p = partition(4).unwrap();
        let s = p.samples();
        for w in s.windows(2) {
            assert!(w[0] < w[1]);
        }
        for (x, (lo, hi)) in s.iter().zip(p.cells()) {
            assert!(*x > lo && *x < hi);
        }
    }

    #[test]
    fn each_coarse_cell_holds_two_fine_samples() {
        let coarse = partition(1).unwrap();
        let fine = partition(2).unwrap();
        for (lo, hi) in coarse.cells() {
            let inside = fine
                .samples()
                .iter()
                .filter(|&&x| x >= lo && x < hi)
                .count();
            assert_eq!(inside, 2);
        }
    }

    #[test]
    fn cumulative_counts() {
        assert_eq!(cumulative_samples(1).unwrap().len(), 2);
        assert_eq!(cumulative_samples(2).unwrap().len(), 6);
        assert_eq!(cumulative_samples(3).unwrap().len(), 14);
    }

    #[test]
    fn cumulative_samples_are_pairwise_distinct() {
        let all = cumulative_samples(5).unwrap();
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                assert!(a.x != b.x, "levels {} and {} collide at {}", a.level, b.level, a.x);
            }
        }
    }

    #[test]
    fn resource_guard_trips_above_max_level() {
        assert_eq!(
            partition(MAX_LEVEL + 1).unwrap_err(),
            QuadratureError::ResourceLimit(MAX_LEVEL + 1)
        );
        assert!(cumulative_samples(MAX_LEVEL + 1).is_err());
    }

    #[test]
    fn midpoint_rule_is_exact_below_nyquist() {
        // Discrete Fourier orthogonality: sum_P e^(2 pi i j x_P) w(P) equals
        // the Kronecker delta at j=0 for all |j| < 2^n.
        for n in 1..=6u32 {
            let p = partition(n).unwrap();
            let bound = 1i64 << n;
            for j in (-bound + 1)..bound {
                let (mut re, mut im) = (0.0f64, 0.0f64);
                for &x in p.samples() {
                    let phase = TAU * j as f64 * x;
                    re += phase.cos() * p.weight;
                    im += phase.sin() * p.weight;
                }
                let expected = if j == 0 { 1.0 } else { 0.0 };
                assert!(
                    (re - expected).abs() <= 1e-12 && im.abs() <= 1e-12,
                    "n={n} j={j}: got {re}+{im}i"
                );
            }
        }
    }
}
