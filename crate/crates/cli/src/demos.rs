//! Self-contained demonstrations, one per headline phenomenon. Reports go
//! to stdout as small CSV tables so they are diffable and scriptable.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sci_core::baire::sign_run;
use sci_core::framework::{
    check_general_algorithm, hansen_problem, violation_finder, weak_hansen_instance,
    AlgorithmCheck, BitMatrix,
};
use sci_core::machine::{band_scan, run_exact, run_fram, sgn_program, OracleTable, RunOutcome};

use crate::{CliError, DemoArgs};

pub fn run(args: &DemoArgs) -> Result<(), CliError> {
    match args.name.as_str() {
        "sgn-gap" => sgn_gap(),
        "weak-hansen" => weak_hansen(args.seed),
        "lim-stages" => {
            lim_stages();
            Ok(())
        }
        other => Err(CliError::config(format!(
            "unknown demo \"{other}\": expected sgn-gap, weak-hansen, or lim-stages"
        ))),
    }
}

/// For each precision k: a band input where the exact machine decides the
/// sign but the finite-precision run reaches both verdicts.
fn sgn_gap() -> Result<(), CliError> {
    let prog = sgn_program();
    let oracle = OracleTable::empty();
    println!("k,witness,exact,fram_outcomes");
    for k in [0u64, 1, 3, 7] {
        let witness = band_scan(&prog, &oracle, k, 200, 8).ok_or_else(|| {
            CliError::compute(format!("no fork witness found inside the k={k} band"))
        })?;
        let exact = match run_exact(&prog, &oracle, &[witness.clone()], 200) {
            RunOutcome::Halted(values) if values.len() == 1 => values[0].to_string(),
            other => {
                return Err(CliError::compute(format!(
                    "exact sign run did not halt with one value: {other:?}"
                )))
            }
        };
        let outcomes = run_fram(&prog, &oracle, &[witness.clone()], k, 200)
            .map_err(|e| CliError::compute(e.to_string()))?;
        println!("{k},{witness},{exact},{}", outcomes.len());
    }
    Ok(())
}

/// Per row index: every bounded candidate query set is defeated by a
/// flipped-bit witness, while the truncated map itself passes the
/// fixed-query check on random input pairs at the deepest level.
fn weak_hansen(seed: u64) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = 8u32;
    let deepest = 8usize;
    let pairs = 200usize;
    println!("n,candidates_defeated,pairs_checked,pairs_passed");
    for n in 0..=4usize {
        let prefix: Vec<bool> = (0..=n).map(|_| rng.gen_bool(0.5)).collect();
        let reader = weak_hansen_instance(n, deepest, prefix);
        let defeated = violation_finder(&reader, q)
            .map_err(|e| CliError::compute(e.to_string()))?
            .len();
        let mut passed = 0usize;
        for _ in 0..pairs {
            let x0 = BitMatrix::random(&mut rng, n + 1, 10);
            let mut x1 = BitMatrix::random(&mut rng, n + 1, 10);
            if rng.gen_bool(0.5) {
                for j in 0..=deepest.min(9) {
                    x1.set(n, j, x0.get(n, j));
                }
            }
            let (problem, gamma, policy) = hansen_problem(&reader, &x0, &x1);
            if matches!(
                check_general_algorithm(&gamma, &policy, &problem),
                AlgorithmCheck::Valid
            ) {
                passed += 1;
            }
        }
        println!("{n},{defeated},{pairs},{passed}");
    }
    Ok(())
}

/// The stage trace every budgeted limit reports, on the sign of 1/64: the
/// runner answers 0 until the dyadic threshold crosses the input.
fn lim_stages() {
    let q = BigRational::new(BigInt::from(1), BigInt::from(64));
    print!("{}", sign_run(&q, 12).to_csv());
}
