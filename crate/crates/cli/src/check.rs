//! The problem-check command: load a finite problem document, run the
//! consistency check and both factorization routes, print one JSON report.
//! A verdict of "fails" is still a successful check; only malformed input
//! is an error.

use std::fs;

use serde_json::{json, Value};

use sci_core::framework::{check_consistency, factorize, finite_query_factorization, FiniteProblem};
use sci_core::hyperspace::ComplexPoint;

use crate::{CheckArgs, CliError};

fn row_value(row: &[ComplexPoint]) -> Value {
    Value::Array(row.iter().map(|p| json!([p.re, p.im])).collect())
}

pub fn run(args: &CheckArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.file).map_err(|e| {
        CliError::config(format!("cannot read {}: {e}", args.file.display()))
    })?;
    let problem = FiniteProblem::from_json(&text).map_err(|e| {
        CliError::config(format!("malformed problem {}: {e}", args.file.display()))
    })?;

    let consistency =
        serde_json::to_value(check_consistency(&problem)).expect("verdict serializes");

    let factorization = match factorize(&problem) {
        Ok(f) => {
            let table: Vec<Value> = f
                .table(&problem)
                .into_iter()
                .map(|(row, output)| json!({"row": row_value(&row), "output": output}))
                .collect();
            json!({"status": "factored", "classes": f.class_count(), "table": table})
        }
        Err(e) => json!({"status": "impossible", "left": e.left, "right": e.right}),
    };

    let mut report = json!({
        "consistency": consistency,
        "factorization": factorization,
    });

    if let Some(queries) = &args.queries {
        if queries.is_empty() {
            return Err(CliError::config("queries must list at least one index"));
        }
        if let Some(&bad) = queries.iter().find(|&&j| j >= problem.lambda.len()) {
            return Err(CliError::config(format!(
                "query index {bad} is out of range: the problem has {} evaluations",
                problem.lambda.len()
            )));
        }
        let finite_query = match finite_query_factorization(&problem, queries) {
            Ok(alg) => json!({
                "status": "factored",
                "queries": alg.policy.set_for(0),
                "outputs": alg.gamma,
            }),
            Err(e) => json!({"status": "not-factorable", "left": e.left, "right": e.right}),
        };
        report["finite_query"] = finite_query;
    }

    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}
