//! Koopman matrices from point evaluations, residual norms, threshold and
//! stabilized base maps, and tower evaluation with Hausdorff diagnostics.
//!
//! The trial dictionary is the Fourier family theta_j(x) = e^(2 pi i j x)
//! for |j| <= J and the test family is its conjugate with a wider range
//! |i| <= I, I >= J. With the dyadic midpoint rule at a sub-Nyquist level
//! the assembled matrix has exact L2 inner products as entries, so the
//! smallest singular value of A - zE is the exact finite-section residual
//! sigma_inf.
//!
//! Base maps select strict sublevel sets {z in G_n2 : residual < eps - 1/n2}
//! on the lattice G_n2. Towers evaluate a schedule of (n2, n1) indices and
//! report consecutive Hausdorff distances as a Cauchy diagnostic; they never
//! claim a limit, because pointwise limits are not finitely observable.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::dynamics::{evaluate, DomainPoint, DynamicalMap, DynamicsError, Transcript};
use crate::hyperspace::{
    hausdorff_distance, make_grid, threshold_sublevel, ComplexPoint, Grid, Sublevel,
};
use crate::quadrature::{cumulative_samples, partition, QuadratureError};

/// Default test-to-trial range ratio I = 2J.
pub const DEFAULT_TEST_RATIO: u32 = 2;
/// Default grid half-width; covers unit-norm Koopman spectra with margin.
pub const DEFAULT_HALF_WIDTH: f64 = 2.0;
/// Assembled entries are averages of unimodular values: |A_ij| <= 1 + slack.
pub const ENTRY_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum KoopmanError {
    #[error(
        "quadrature level {level} under-resolves the dictionary (need 2J={double_trial} and \
         2I={double_test} below 2^level)"
    )]
    NyquistViolation {
        level: u32,
        double_trial: u32,
        double_test: u32,
    },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("bad tower schedule: {0}")]
    BadSchedule(String),
}

/// Fourier trial range |j| <= trial_max and conjugate test range
/// |i| <= test_max, with trial_max <= test_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dictionary {
    trial_max: u32,
    test_max: u32,
}

impl Dictionary {
    /// Panics if `test_max < trial_max`; the test family must cover trials.
    pub fn new(trial_max: u32, test_max: u32) -> Self {
        assert!(
            test_max >= trial_max,
            "test range must be at least the trial range"
        );
        Dictionary { trial_max, test_max }
    }

    /// The sizing rule the towers use: J(n2) = n2, I = ratio * J.
    pub fn sized_for_level(n2: u32, test_ratio: u32) -> Self {
        assert!(test_ratio >= 1, "test ratio must be at least 1");
        Dictionary::new(n2, test_ratio * n2)
    }

    pub fn trial_max(&self) -> u32 {
        self.trial_max
    }

    pub fn test_max(&self) -> u32 {
        self.test_max
    }

    pub fn trial_count(&self) -> usize {
        2 * self.trial_max as usize + 1
    }

    pub fn test_count(&self) -> usize {
        2 * self.test_max as usize + 1
    }

    /// Sub-Nyquist test: level-k midpoints resolve every dictionary index.
    pub fn nyquist_ok(&self, level: u32) -> bool {
        let cells = 1u64 << level.min(63);
        (2 * self.trial_max as u64) < cells && (2 * self.test_max as u64) < cells
    }

    fn check_nyquist(&self, level: u32) -> Result<(), KoopmanError> {
        if self.nyquist_ok(level) {
            Ok(())
        } else {
            Err(KoopmanError::NyquistViolation {
                level,
                double_trial: 2 * self.trial_max,
                double_test: 2 * self.test_max,
            })
        }
    }
}

/// e^(2 pi i j x).
fn theta(j: i64, x: f64) -> Complex64 {
    Complex64::from_polar(1.0, TAU * j as f64 * x)
}

/// The assembled (2I+1) x (2J+1) matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanMatrix {
    a: DMatrix<Complex64>,
    pub trial_max: u32,
    pub test_max: u32,
    pub quadrature_level: u32,
    pub map_descriptor: String,
}

impl KoopmanMatrix {
    /// Wrap a raw matrix; checks the shape and the unit entry bound.
    pub fn from_matrix(
        a: DMatrix<Complex64>,
        dict: Dictionary,
        quadrature_level: u32,
        map_descriptor: String,
    ) -> Self {
        assert_eq!(a.nrows(), dict.test_count(), "row count must be 2I+1");
        assert_eq!(a.ncols(), dict.trial_count(), "column count must be 2J+1");
        let worst = a.iter().map(|e| e.norm()).fold(0.0, f64::max);
        assert!(
            worst <= 1.0 + ENTRY_BOUND_SLACK,
            "entry modulus {worst} exceeds the unit bound"
        );
        KoopmanMatrix {
            a,
            trial_max: dict.trial_max,
            test_max: dict.test_max,
            quadrature_level,
            map_descriptor,
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    pub fn dictionary(&self) -> Dictionary {
        Dictionary::new(self.trial_max, self.test_max)
    }

    /// Entry for test index i and trial index j (signed dictionary indices).
    pub fn entry(&self, i: i64, j: i64) -> Complex64 {
        let r = (i + self.test_max as i64) as usize;
        let c = (j + self.trial_max as i64) as usize;
        self.a[(r, c)]
    }
}

/// Assemble A_ij = sum_P theta_j(F(x_P)) conj(theta_i(x_P)) w(P) over the
/// level-n1 midpoints, recording exactly one oracle evaluation per sample.
pub fn assemble_matrix(
    f: &DynamicalMap,
    dict: &Dictionary,
    n1: u32,
    transcript: &mut Transcript,
) -> Result<KoopmanMatrix, KoopmanError> {
    dict.check_nyquist(n1)?;
    let level = partition(n1)?;
    let mut pairs = Vec::with_capacity(level.cell_count());
    for &x in level.samples() {
        let xp = DomainPoint::new(x).expect("midpoints lie in [0,1)");
        let fx = evaluate(f, xp, transcript)?;
        pairs.push((x, fx.value()));
    }
    Ok(assemble_from_values(
        &pairs,
        level.weight,
        dict,
        n1,
        f.descriptor(),
    ))
}

/// Rank-one accumulation over already-evaluated (x_P, F(x_P)) pairs.
fn assemble_from_values(
    pairs: &[(f64, f64)],
    weight: f64,
    dict: &Dictionary,
    level: u32,
    descriptor: String,
) -> KoopmanMatrix {
    let rows = dict.test_count();
    let cols = dict.trial_count();
    let imax = dict.test_max as i64;
    let jmax = dict.trial_max as i64;
    let mut a = DMatrix::<Complex64>::zeros(rows, cols);
    let mut tests = vec![Complex64::default(); rows];
    let mut trials = vec![Complex64::default(); cols];
    for &(x, fx) in pairs {
        for (r, slot) in tests.iter_mut().enumerate() {
            *slot = theta(r as i64 - imax, x).conj();
        }
        for (c, slot) in trials.iter_mut().enumerate() {
            *slot = theta(c as i64 - jmax, fx);
        }
        for c in 0..cols {
            let t = trials[c] * weight;
            for r in 0..rows {
                a[(r, c)] += tests[r] * t;
            }
        }
    }
    KoopmanMatrix::from_matrix(a, *dict, level, descriptor)
}

/// Smallest singular value of a raw complex matrix.
pub fn sigma_min(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Residual sigma_inf(A - zE): E is the rectangular identity embedding with
/// E_ij = 1 exactly when trial index j equals test index i.
pub fn residual(a: &KoopmanMatrix, z: ComplexPoint) -> f64 {
    let zc: Complex64 = z.into();
    let mut b = a.a.clone();
    let shift = (a.test_max - a.trial_max) as usize;
    for c in 0..b.ncols() {
        b[(c + shift, c)] -= zc;
    }
    sigma_min(&b)
}

/// The residual evaluated at every point of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualField {
    pub grid: Grid,
    values: Vec<f64>,
}

impl ResidualField {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Strict sublevel selection at `tau`, tied to this field's grid.
    pub fn threshold(&self, tau: f64) -> Sublevel {
        threshold_sublevel(&self.grid, &self.values, tau)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn field_over_grid(a: &KoopmanMatrix, grid: &Grid) -> Vec<f64> {
    grid.points()
        .par_iter()
        .map(|&z| residual(a, z))
        .collect()
}

/// The full residual field z -> sigma_inf(A - zE) on the lattice G_n2: the
/// soft continuous-output alternative to hard thresholding.
pub fn residual_field(
    f: &DynamicalMap,
    dict: &Dictionary,
    n2: u32,
    n1: u32,
    half_width: f64,
    transcript: &mut Transcript,
) -> Result<ResidualField, KoopmanError> {
    let a = assemble_matrix(f, dict, n1, transcript)?;
    let grid = make_grid(n2, half_width);
    let values = field_over_grid(&a, &grid);
    Ok(ResidualField { grid, values })
}

/// Threshold base map: {z in G_n2 : residual(z) < eps - 1/n2}.
pub fn gamma_base(
    f: &DynamicalMap,
    dict: &Dictionary,
    eps: f64,
    n2: u32,
    n1: u32,
    half_width: f64,
    transcript: &mut Transcript,
) -> Result<Sublevel, KoopmanError> {
    let field = residual_field(f, dict, n2, n1, half_width, transcript)?;
    Ok(field.threshold(eps - 1.0 / n2 as f64))
}

/// Stabilized base map: z is selected when the residual at some usable
/// quadrature level k <= n1 drops below eps - 1/n2.
///
/// The map queries the full cumulative sample set of levels 1..=n1 (that is
/// its fixed query set), but only levels that resolve the dictionary
/// (sub-Nyquist: 2J < 2^k and 2I < 2^k) enter the existential. Coarser
/// levels alias the dictionary onto itself and their residuals say nothing
/// about sigma_inf; including them would pin spurious points into the union
/// permanently. The top level n1 must be usable, as for [`gamma_base`].
pub fn gamma_stabilized(
    f: &DynamicalMap,
    dict: &Dictionary,
    eps: f64,
    n2: u32,
    n1: u32,
    half_width: f64,
    transcript: &mut Transcript,
) -> Result<Sublevel, KoopmanError> {
    dict.check_nyquist(n1)?;
    let samples = cumulative_samples(n1)?;
    let mut per_level: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n1 as usize + 1];
    for s in &samples {
        let xp = DomainPoint::new(s.x).expect("midpoints lie in [0,1)");
        let fx = evaluate(f, xp, transcript)?;
        per_level[s.level as usize].push((s.x, fx.value()));
    }
    let grid = make_grid(n2, half_width);
    let mut min_field = vec![f64::INFINITY; grid.points().len()];
    for k in 1..=n1 {
        if !dict.nyquist_ok(k) {
            continue;
        }
        let pairs = &per_level[k as usize];
        let weight = 1.0 / pairs.len() as f64;
        let a = assemble_from_values(pairs, weight, dict, k, f.descriptor());
        let field = field_over_grid(&a, &grid);
        for (slot, v) in min_field.iter_mut().zip(field) {
            if v < *slot {
                *slot = v;
            }
        }
    }
    Ok(threshold_sublevel(&grid, &min_field, eps - 1.0 / n2 as f64))
}

/// One evaluated tower stage.
#[derive(Debug, Clone)]
pub struct TowerStage {
    pub n2: u32,
    pub n1: u32,
    pub outcome: Sublevel,
    /// Oracle evaluations spent on this stage (the transcript length).
    pub queries: usize,
}

/// Hausdorff distance between two consecutive stage outputs, or the reason
/// it was skipped.
#[derive(Debug, Clone, Serialize)]
pub struct ConsecutiveDh {
    pub from_stage: usize,
    pub to_stage: usize,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Tower parameters beyond the schedule itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerParams {
    pub eps: f64,
    pub test_ratio: u32,
    pub half_width: f64,
}

impl TowerParams {
    pub fn new(eps: f64) -> Self {
        TowerParams {
            eps,
            test_ratio: DEFAULT_TEST_RATIO,
            half_width: DEFAULT_HALF_WIDTH,
        }
    }
}

/// A full tower evaluation: per-stage outputs plus Cauchy diagnostics.
#[derive(Debug, Clone)]
pub struct PseudospectrumRun {
    pub eps: f64,
    pub test_ratio: u32,
    pub half_width: f64,
    pub map_descriptor: String,
    pub stabilized: bool,
    pub stages: Vec<TowerStage>,
    pub diagnostics: Vec<ConsecutiveDh>,
}

#[derive(Serialize)]
struct StageReport {
    n2: u32,
    n1: u32,
    points: usize,
    queries: usize,
    empty: bool,
}

#[derive(Serialize)]
struct RunReport<'a> {
    map: &'a str,
    eps: f64,
    test_ratio: u32,
    half_width: f64,
    stabilized: bool,
    stages: Vec<StageReport>,
    hausdorff: &'a [ConsecutiveDh],
}

impl PseudospectrumRun {
    /// Parameters, per-stage point counts, and the d_H tail as JSON.
    pub fn to_json(&self) -> String {
        let report = RunReport {
            map: &self.map_descriptor,
            eps: self.eps,
            test_ratio: self.test_ratio,
            half_width: self.half_width,
            stabilized: self.stabilized,
            stages: self
                .stages
                .iter()
                .map(|s| StageReport {
                    n2: s.n2,
                    n1: s.n1,
                    points: s.outcome.len(),
                    queries: s.queries,
                    empty: s.outcome.is_empty(),
                })
                .collect(),
            hausdorff: &self.diagnostics,
        };
        serde_json::to_string_pretty(&report).expect("report serializes")
    }

    /// CSV for one stage; header-only when the stage selected nothing.
    pub fn stage_csv(&self, stage: usize) -> String {
        match &self.stages[stage].outcome {
            Sublevel::Set(s) => s.to_csv(),
            Sublevel::Empty => "re,im\n".to_string(),
        }
    }

    /// Scatter plot of the final stage as a standalone SVG document.
    pub fn final_svg(&self) -> String {
        let half = self.half_width;
        let margin = 0.1 * half;
        let lo = -(half + margin);
        let size = 2.0 * (half + margin);
        let mut out = String::new();
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{lo} {lo} {size} {size}\" \
             width=\"480\" height=\"480\">\n"
        ));
        out.push_str(&format!(
            "  <rect x=\"{lo}\" y=\"{lo}\" width=\"{size}\" height=\"{size}\" fill=\"white\"/>\n"
        ));
        out.push_str(&format!(
            "  <circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"#cccccc\" \
             stroke-width=\"{}\"/>\n",
            0.01 * half
        ));
        let last = self.stages.last();
        match last.map(|s| &s.outcome) {
            Some(Sublevel::Set(set)) => {
                let spacing = 1.0 / last.unwrap().n2 as f64;
                let r = 0.3 * spacing;
                for p in set.points() {
                    // SVG y grows downward; flip to keep math orientation.
                    out.push_str(&format!(
                        "  <circle cx=\"{}\" cy=\"{}\" r=\"{r}\" fill=\"#1f4e79\"/>\n",
                        p.re, -p.im
                    ));
                }
            }
            _ => {
                out.push_str("  <!-- final stage selected no points -->\n");
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Evaluate the base map along a schedule of (n2, n1) pairs.
///
/// Uses the stabilized variant when F is flagged measure-preserving, the
/// plain threshold map otherwise. Consecutive Hausdorff distances are
/// reported as a Cauchy diagnostic; pairs involving an empty stage are
/// skipped with a note. No limit is ever claimed.
pub fn run_tower(
    f: &DynamicalMap,
    schedule: &[(u32, u32)],
    params: &TowerParams,
) -> Result<PseudospectrumRun, KoopmanError> {
    if schedule.is_empty() {
        return Err(KoopmanError::BadSchedule("schedule is empty".into()));
    }
    for w in schedule.windows(2) {
        if !(w[0].0 < w[1].0 && w[0].1 < w[1].1) {
            return Err(KoopmanError::BadSchedule(format!(
                "indices must increase strictly in both components: ({},{}) then ({},{})",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    let stabilized = f.measure_preserving;
    let mut stages = Vec::with_capacity(schedule.len());
    for &(n2, n1) in schedule {
        let dict = Dictionary::sized_for_level(n2, params.test_ratio);
        let mut transcript = Transcript::new();
        let outcome = if stabilized {
            gamma_stabilized(
                f,
                &dict,
                params.eps,
                n2,
                n1,
                params.half_width,
                &mut transcript,
            )?
        } else {
            gamma_base(
                f,
                &dict,
                params.eps,
                n2,
                n1,
                params.half_width,
                &mut transcript,
            )?
        };
        stages.push(TowerStage {
            n2,
            n1,
            outcome,
            queries: transcript.len(),
        });
    }
    let mut diagnostics = Vec::with_capacity(stages.len().saturating_sub(1));
    for i in 1..stages.len() {
        let (prev, next) = (&stages[i - 1].outcome, &stages[i].outcome);
        let entry = match (prev.as_set(), next.as_set()) {
            (Some(a), Some(b)) => ConsecutiveDh {
                from_stage: i - 1,
                to_stage: i,
                value: Some(hausdorff_distance(a, b).expect("both sets nonempty")),
                note: None,
            },
            _ => ConsecutiveDh {
                from_stage: i - 1,
                to_stage: i,
                value: None,
                note: Some("skipped: at least one stage selected no points".into()),
            },
        };
        diagnostics.push(entry);
    }
    Ok(PseudospectrumRun {
        eps: params.eps,
        test_ratio: params.test_ratio,
        half_width: params.half_width,
        map_descriptor: f.descriptor(),
        stabilized,
        stages,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicalMap;
    use num_rational::Ratio;

    fn rot(n: i64, d: i64) -> DynamicalMap {
        DynamicalMap::rotation(Ratio::new(n, d))
    }

    fn assemble(f: &DynamicalMap, dict: &Dictionary, n1: u32) -> KoopmanMatrix {
        let mut t = Transcript::new();
        assemble_matrix(f, dict, n1, &mut t).unwrap()
    }

    #[test]
    fn identity_map_assembles_to_identity_matrix() {
        let a = assemble(&DynamicalMap::identity(), &Dictionary::new(1, 1), 3);
        for i in -1..=1i64 {
            for j in -1..=1i64 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (a.entry(i, j) - Complex64::new(expect, 0.0)).norm() <= 1e-12,
                    "entry ({i},{j}) = {}",
                    a.entry(i, j)
                );
            }
        }
    }

    #[test]
    fn half_rotation_assembles_to_alternating_diagonal() {
        let a = assemble(&rot(1, 2), &Dictionary::new(1, 1), 3);
        for i in -1..=1i64 {
            for j in -1..=1i64 {
                let expect = if i == j {
                    Complex64::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((a.entry(i, j) - expect).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn constant_map_collapses_to_the_zero_test_row() {
        let zero = DynamicalMap::user_supplied(|_| 0.0);
        let a = assemble(&zero, &Dictionary::new(1, 1), 3);
        for i in -1..=1i64 {
            for j in -1..=1i64 {
                let expect = if i == 0 { 1.0 } else { 0.0 };
                assert!((a.entry(i, j) - Complex64::new(expect, 0.0)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn nyquist_violation_is_reported() {
        let mut t = Transcript::new();
        let err = assemble_matrix(&DynamicalMap::identity(), &Dictionary::new(4, 8), 3, &mut t);
        assert!(matches!(err, Err(KoopmanError::NyquistViolation { .. })));
    }

    #[test]
    fn assembly_queries_each_sample_once() {
        let mut t = Transcript::new();
        assemble_matrix(&DynamicalMap::doubling(), &Dictionary::new(2, 4), 4, &mut t).unwrap();
        assert_eq!(t.len(), 16);
        let mut seen: Vec<f64> = t.entries().iter().map(|(x, _)| x.value()).collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn residual_of_identity_section_at_origin_is_one() {
        let a = assemble(&DynamicalMap::identity(), &Dictionary::new(1, 1), 3);
        let z = ComplexPoint::new(0.0, 0.0).unwrap();
        assert!((residual(&a, z) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sigma_min_of_a_plain_diagonal() {
        // diag(1,-1) shifted by z=1 becomes diag(0,-2).
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-2.0, 0.0),
            ],
        );
        assert!(sigma_min(&m).abs() <= 1e-14);
    }

    #[test]
    fn residual_is_lipschitz_in_z() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let dict = Dictionary::new(2, 3);
        let a = assemble(&rot(1, 3), &dict, 4);
        for _ in 0..50 {
            let z1 = ComplexPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)).unwrap();
            let z2 = ComplexPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)).unwrap();
            let lhs = (residual(&a, z1) - residual(&a, z2)).abs();
            assert!(lhs <= z1.dist(&z2) + 1e-10, "{lhs} vs {}", z1.dist(&z2));
        }
    }

    #[test]
    fn gamma_base_half_rotation_matches_direct_enumeration() {
        // J=8, I=16, n1=6: the section is exactly diagonal with entries
        // (-1)^j, so the residual is dist(z, {-1, 1}).
        let dict = Dictionary::sized_for_level(8, 2);
        let mut t = Transcript::new();
        let out = gamma_base(&rot(1, 2), &dict, 0.4, 8, 6, 2.0, &mut t).unwrap();
        let grid = make_grid(8, 2.0);
        let expect: Vec<ComplexPoint> = grid
            .points()
            .iter()
            .copied()
            .filter(|z| {
                let d1 = z.dist(&ComplexPoint::new(1.0, 0.0).unwrap());
                let d2 = z.dist(&ComplexPoint::new(-1.0, 0.0).unwrap());
                d1.min(d2) < 0.4 - 1.0 / 8.0
            })
            .collect();
        let expect = crate::hyperspace::CompactSet::from_points(expect);
        assert!(out.as_set().unwrap().set_eq(&expect));
    }

    #[test]
    fn gamma_base_identity_is_a_disk_at_one() {
        let dict = Dictionary::sized_for_level(8, 2);
        let mut t = Transcript::new();
        let out = gamma_base(&DynamicalMap::identity(), &dict, 0.4, 8, 6, 2.0, &mut t).unwrap();
        let one = ComplexPoint::new(1.0, 0.0).unwrap();
        let grid = make_grid(8, 2.0);
        let expect: Vec<ComplexPoint> = grid
            .points()
            .iter()
            .copied()
            .filter(|z| z.dist(&one) < 0.275)
            .collect();
        let expect = crate::hyperspace::CompactSet::from_points(expect);
        assert!(out.as_set().unwrap().set_eq(&expect));
    }

    #[test]
    fn gamma_base_below_the_floor_is_empty() {
        // eps - 1/n2 is negative here, so nothing can pass a strict test.
        let dict = Dictionary::sized_for_level(4, 1);
        let mut t = Transcript::new();
        let out = gamma_base(&DynamicalMap::identity(), &dict, 0.05, 4, 4, 2.0, &mut t).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn stabilized_with_trivial_dictionary_equals_base_at_level_one() {
        let dict = Dictionary::new(0, 0);
        let f = rot(1, 3);
        let mut t1 = Transcript::new();
        let base = gamma_base(&f, &dict, 0.6, 4, 1, 2.0, &mut t1).unwrap();
        let mut t2 = Transcript::new();
        let stab = gamma_stabilized(&f, &dict, 0.6, 4, 1, 2.0, &mut t2).unwrap();
        assert_eq!(base, stab);
    }

    #[test]
    fn stabilized_grows_with_the_level_budget() {
        let dict = Dictionary::new(2, 4);
        let f = rot(1, 3);
        let mut t1 = Transcript::new();
        let small = gamma_stabilized(&f, &dict, 0.5, 4, 4, 2.0, &mut t1).unwrap();
        let mut t2 = Transcript::new();
        let large = gamma_stabilized(&f, &dict, 0.5, 4, 5, 2.0, &mut t2).unwrap();
        if let Some(s) = small.as_set() {
            let l = large.as_set().expect("superset cannot be empty");
            for p in s.points() {
                assert!(l.points().iter().any(|q| q.dist(p) <= 1e-12));
            }
        }
    }

    #[test]
    fn stabilized_is_constant_across_fully_resolved_budgets() {
        // All usable levels (k >= 6 for J=8, I=16) assemble the same exact
        // diagonal for a rotation, so the union is the same set.
        let dict = Dictionary::sized_for_level(8, 2);
        let f = rot(1, 2);
        let mut outs = Vec::new();
        for n1 in [6u32, 7, 8] {
            let mut t = Transcript::new();
            outs.push(gamma_stabilized(&f, &dict, 0.4, 8, n1, 2.0, &mut t).unwrap());
        }
        let first = outs[0].as_set().unwrap();
        for o in &outs[1..] {
            assert!(o.as_set().unwrap().set_eq(first));
        }
    }

    #[test]
    fn stabilized_queries_the_cumulative_sample_set() {
        let dict = Dictionary::new(0, 0);
        let mut t = Transcript::new();
        gamma_stabilized(&rot(1, 3), &dict, 0.5, 2, 3, 2.0, &mut t).unwrap();
        assert_eq!(t.len(), 14); // 2 + 4 + 8
    }

    #[test]
    fn tower_reports_one_diagnostic_per_consecutive_pair() {
        let params = TowerParams::new(0.3);
        let run = run_tower(&rot(1, 4), &[(2, 4), (4, 5), (8, 6)], &params).unwrap();
        assert_eq!(run.stages.len(), 3);
        assert_eq!(run.diagnostics.len(), 2);
        assert!(run.stabilized);
    }

    #[test]
    fn tower_rejects_non_increasing_schedules() {
        let params = TowerParams::new(0.3);
        assert!(matches!(
            run_tower(&rot(1, 4), &[(4, 5), (4, 6)], &params),
            Err(KoopmanError::BadSchedule(_))
        ));
        assert!(matches!(
            run_tower(&rot(1, 4), &[], &params),
            Err(KoopmanError::BadSchedule(_))
        ));
    }

    #[test]
    fn identity_tower_concentrates_near_one() {
        let params = TowerParams::new(0.3);
        let f = DynamicalMap::identity();
        let run = run_tower(&f, &[(4, 5), (8, 6)], &params).unwrap();
        let one = ComplexPoint::new(1.0, 0.0).unwrap();
        let last = run.stages.last().unwrap().outcome.as_set().unwrap();
        for p in last.points() {
            assert!(p.dist(&one) <= 0.3, "stray point {p:?}");
        }
    }

    #[test]
    fn run_json_and_csv_are_well_formed() {
        let params = TowerParams::new(0.3);
        let run = run_tower(&rot(1, 4), &[(4, 5), (8, 6)], &params).unwrap();
        let json = run.to_json();
        assert!(json.contains("\"stages\""));
        assert!(json.contains("\"hausdorff\""));
        let csv = run.stage_csv(0);
        assert!(csv.starts_with("re,im\n"));
        let svg = run.final_svg();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}
