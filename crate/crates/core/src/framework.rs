//! Finite computational problems and brute-force checks of their
//! structural properties.
//!
//! A problem bundles a finite input list, an output assignment into a
//! finite metric value set, and a list of evaluation tables (the only
//! channel through which an algorithm may read an input). On such finite
//! instances the interesting structural facts are decidable by exhaustion:
//! whether equal evaluation rows force equal outputs, whether the output
//! map factors through the evaluation rows, whether a candidate algorithm
//! reads only what it queried, and whether a fixed finite query set can
//! ever suffice for a map that genuinely depends on a full row.
//!
//! Everything here is exact: evaluation values compare as stored data and
//! witnesses returned by any check are re-verified before they are handed
//! out.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::hyperspace::ComplexPoint;

#[derive(Debug, Error)]
pub enum FrameworkError {
    #[error("malformed problem: {0}")]
    Shape(String),
    #[error("problem document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("query bound {0} exceeds the exhaustive-search limit 16")]
    ResourceLimit(u32),
}

/// Finite metric on the output value set, stored as a full table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    values: Vec<String>,
    dist: Vec<Vec<f64>>,
}

impl MetricTable {
    /// The discrete metric: distance 1 between distinct values.
    pub fn discrete(values: Vec<String>) -> Self {
        let n = values.len();
        let dist = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        MetricTable { values, dist }
    }

    pub fn from_table(values: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self, FrameworkError> {
        let m = MetricTable { values, dist };
        m.validate()?;
        Ok(m)
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn distance(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.values.iter().position(|v| v == a)?;
        let j = self.values.iter().position(|v| v == b)?;
        Some(self.dist[i][j])
    }

    fn validate(&self) -> Result<(), FrameworkError> {
        let n = self.values.len();
        if n == 0 {
            return Err(FrameworkError::Shape("empty value set".into()));
        }
        let mut sorted = self.values.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(FrameworkError::Shape("duplicate values in value set".into()));
        }
        if self.dist.len() != n || self.dist.iter().any(|r| r.len() != n) {
            return Err(FrameworkError::Shape("metric table is not square".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let d = self.dist[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(FrameworkError::Shape(format!(
                        "metric entry ({i},{j}) = {d} is not a distance"
                    )));
                }
                if (d == 0.0) != (i == j) {
                    return Err(FrameworkError::Shape(format!(
                        "metric entry ({i},{j}) = {d} breaks identity of indiscernibles"
                    )));
                }
                if (self.dist[i][j] - self.dist[j][i]).abs() > 0.0 {
                    return Err(FrameworkError::Shape(format!(
                        "metric table is not symmetric at ({i},{j})"
                    )));
                }
                for k in 0..n {
                    if self.dist[i][j] > self.dist[i][k] + self.dist[k][j] {
                        return Err(FrameworkError::Shape(format!(
                            "triangle inequality fails at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A finite computational problem: inputs, output map, evaluation tables.
///
/// `xi[a]` is the target output for input `a`; `lambda[j][a]` is the value
/// the j-th evaluation reads off input `a`. Algorithms may see inputs only
/// through these evaluation values.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteProblem {
    pub omega: Vec<String>,
    pub xi: Vec<String>,
    pub lambda: Vec<Vec<ComplexPoint>>,
    pub metric: MetricTable,
}

#[derive(Deserialize)]
struct ProblemDoc {
    omega: Vec<String>,
    xi: Vec<String>,
    lambda: Vec<Vec<[f64; 2]>>,
    metric: MetricDoc,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MetricDoc {
    Named(String),
    Table { values: Vec<String>, table: Vec<Vec<f64>> },
}

impl FiniteProblem {
    pub fn new(
        omega: Vec<String>,
        xi: Vec<String>,
        lambda: Vec<Vec<ComplexPoint>>,
        metric: MetricTable,
    ) -> Result<Self, FrameworkError> {
        let p = FiniteProblem { omega, xi, lambda, metric };
        p.validate()?;
        Ok(p)
    }

    /// Parse `{omega, xi, lambda, metric}` where lambda entries are
    /// `[re, im]` pairs and metric is either `"discrete"` or an explicit
    /// `{values, table}` object.
    pub fn from_json(text: &str) -> Result<Self, FrameworkError> {
        let doc: ProblemDoc = serde_json::from_str(text)?;
        let metric = match doc.metric {
            MetricDoc::Named(name) if name == "discrete" => {
                let mut values = doc.xi.clone();
                values.sort();
                values.dedup();
                MetricTable::discrete(values)
            }
            MetricDoc::Named(name) => {
                return Err(FrameworkError::Shape(format!("unknown metric \"{name}\"")))
            }
            MetricDoc::Table { values, table } => MetricTable::from_table(values, table)?,
        };
        let mut lambda = Vec::with_capacity(doc.lambda.len());
        for (j, row) in doc.lambda.into_iter().enumerate() {
            let mut table = Vec::with_capacity(row.len());
            for [re, im] in row {
                table.push(ComplexPoint::new(re, im).map_err(|e| {
                    FrameworkError::Shape(format!("evaluation table {j}: {e}"))
                })?);
            }
            lambda.push(table);
        }
        FiniteProblem::new(doc.omega, doc.xi, lambda, metric)
    }

    fn validate(&self) -> Result<(), FrameworkError> {
        if self.omega.is_empty() {
            return Err(FrameworkError::Shape("no inputs".into()));
        }
        if self.xi.len() != self.omega.len() {
            return Err(FrameworkError::Shape(format!(
                "output table covers {} of {} inputs",
                self.xi.len(),
                self.omega.len()
            )));
        }
        for v in &self.xi {
            if !self.metric.values.iter().any(|w| w == v) {
                return Err(FrameworkError::Shape(format!(
                    "output value \"{v}\" missing from the metric value set"
                )));
            }
        }
        for (j, table) in self.lambda.iter().enumerate() {
            if table.len() != self.omega.len() {
                return Err(FrameworkError::Shape(format!(
                    "evaluation table {j} covers {} of {} inputs",
                    table.len(),
                    self.omega.len()
                )));
            }
        }
        self.metric.validate()
    }

    pub fn input_count(&self) -> usize {
        self.omega.len()
    }

    /// The full evaluation row of one input.
    pub fn row(&self, a: usize) -> Vec<ComplexPoint> {
        self.lambda.iter().map(|t| t[a]).collect()
    }

    fn row_key(&self, a: usize, indices: &[usize]) -> Vec<(u64, u64)> {
        indices
            .iter()
            .map(|&j| {
                let v = self.lambda[j][a];
                (v.re.to_bits(), v.im.to_bits())
            })
            .collect()
    }
}

/// The two-input instance whose single constant evaluation cannot separate
/// its two distinct outputs. The smallest possible failure of consistency.
pub fn two_point_counterexample() -> FiniteProblem {
    FiniteProblem::new(
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into()],
        vec![vec![
            ComplexPoint::new(0.0, 0.0).unwrap(),
            ComplexPoint::new(0.0, 0.0).unwrap(),
        ]],
        MetricTable::discrete(vec!["0".into(), "1".into()]),
    )
    .unwrap()
}

/// Whether equal evaluation rows force equal outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Consistency {
    Holds,
    /// Two inputs with identical evaluation rows but distinct outputs.
    Fails { left: usize, right: usize },
}

/// Brute force over all input pairs: find two inputs every evaluation
/// agrees on whose outputs differ, or certify there are none.
pub fn check_consistency(p: &FiniteProblem) -> Consistency {
    let all: Vec<usize> = (0..p.lambda.len()).collect();
    for a in 0..p.input_count() {
        for b in (a + 1)..p.input_count() {
            if p.row_key(a, &all) == p.row_key(b, &all) && p.xi[a] != p.xi[b] {
                return Consistency::Fails { left: a, right: b };
            }
        }
    }
    Consistency::Holds
}

/// The induced map from evaluation rows to outputs, when it exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    classes: Vec<(Vec<(u64, u64)>, String)>,
}

impl Factorization {
    /// Output assigned to the class of this input's evaluation row.
    pub fn apply(&self, p: &FiniteProblem, a: usize) -> Option<&str> {
        let all: Vec<usize> = (0..p.lambda.len()).collect();
        let key = p.row_key(a, &all);
        self.classes
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// One row per class: a representative input's evaluation row with the
    /// output assigned to that class, in class discovery order.
    pub fn table(&self, p: &FiniteProblem) -> Vec<(Vec<ComplexPoint>, String)> {
        let all: Vec<usize> = (0..p.lambda.len()).collect();
        self.classes
            .iter()
            .map(|(key, v)| {
                let rep = (0..p.input_count())
                    .find(|&a| p.row_key(a, &all) == *key)
                    .expect("every class came from some input");
                (p.row(rep), v.clone())
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no factorization: inputs {left} and {right} share a row but not an output")]
pub struct FactorizationImpossible {
    pub left: usize,
    pub right: usize,
}

/// Group inputs by evaluation row and read the factor map off the groups.
///
/// Succeeds exactly when the output map is constant on each group; the
/// returned map is re-verified against every input before being handed
/// out. Failure carries the same witness pair [`check_consistency`] finds.
pub fn factorize(p: &FiniteProblem) -> Result<Factorization, FactorizationImpossible> {
    let all: Vec<usize> = (0..p.lambda.len()).collect();
    let mut classes: Vec<(Vec<(u64, u64)>, String, usize)> = Vec::new();
    for a in 0..p.input_count() {
        let key = p.row_key(a, &all);
        match classes.iter().find(|(k, _, _)| *k == key) {
            Some((_, v, first)) if *v != p.xi[a] => {
                return Err(FactorizationImpossible { left: *first, right: a });
            }
            Some(_) => {}
            None => classes.push((key, p.xi[a].clone(), a)),
        }
    }
    let f = Factorization {
        classes: classes.into_iter().map(|(k, v, _)| (k, v)).collect(),
    };
    for a in 0..p.input_count() {
        assert_eq!(
            f.apply(p, a),
            Some(p.xi[a].as_str()),
            "factor map must reproduce the output table"
        );
    }
    Ok(f)
}

/// Which evaluation indices an algorithm is allowed to read per input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryPolicy {
    /// One query set shared by every input.
    Fixed(Vec<usize>),
    /// A query set per input, indexed like omega.
    Adaptive(Vec<Vec<usize>>),
}

impl QueryPolicy {
    pub fn fixed(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        QueryPolicy::Fixed(indices)
    }

    pub fn adaptive(sets: Vec<Vec<usize>>) -> Self {
        QueryPolicy::Adaptive(
            sets.into_iter()
                .map(|mut s| {
                    s.sort_unstable();
                    s.dedup();
                    s
                })
                .collect(),
        )
    }

    pub fn set_for(&self, a: usize) -> &[usize] {
        match self {
            QueryPolicy::Fixed(s) => s,
            QueryPolicy::Adaptive(sets) => &sets[a],
        }
    }
}

/// Verdict on a candidate algorithm table against a query policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum AlgorithmCheck {
    Valid,
    /// `right` matches `left` on everything `left` queried, yet the
    /// outputs differ: the table read something it never asked for.
    ViolatesDependence { left: usize, right: usize },
    /// Same agreement, but the query set itself changed.
    ViolatesStability { left: usize, right: usize },
}

/// Check the two defining conditions of an algorithm over evaluation
/// queries: outputs and query sets may depend only on queried values.
///
/// For every ordered input pair (A, B): whenever B agrees with A on all of
/// A's queried evaluations, demand gamma(B) = gamma(A) and equal query
/// sets. The first violation in scan order is reported.
pub fn check_general_algorithm(
    gamma: &[String],
    policy: &QueryPolicy,
    p: &FiniteProblem,
) -> AlgorithmCheck {
    assert_eq!(gamma.len(), p.input_count(), "table must cover all inputs");
    if let QueryPolicy::Adaptive(sets) = policy {
        assert_eq!(sets.len(), p.input_count(), "one query set per input");
    }
    for a in 0..p.input_count() {
        let queried = policy.set_for(a);
        assert!(!queried.is_empty(), "query sets must be nonempty");
        assert!(
            queried.iter().all(|&j| j < p.lambda.len()),
            "query index out of range"
        );
        for b in 0..p.input_count() {
            if a == b || p.row_key(a, queried) != p.row_key(b, queried) {
                continue;
            }
            if gamma[b] != gamma[a] {
                return AlgorithmCheck::ViolatesDependence { left: a, right: b };
            }
            if policy.set_for(b) != queried {
                return AlgorithmCheck::ViolatesStability { left: a, right: b };
            }
        }
    }
    AlgorithmCheck::Valid
}

/// An algorithm that answers from one fixed batch of queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeightZeroAlgorithm {
    pub gamma: Vec<String>,
    pub policy: QueryPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("queried columns do not determine the output: inputs {left} and {right}")]
pub struct NotFactorable {
    pub left: usize,
    pub right: usize,
}

/// Try to answer the whole problem from one fixed query batch.
///
/// Groups inputs by their queried sub-row and succeeds exactly when the
/// output map is constant on each group. The result is a complete
/// algorithm: a fixed nonempty query set and an output table that equals
/// the target outputs pointwise, with no limit on top.
pub fn finite_query_factorization(
    p: &FiniteProblem,
    queries: &[usize],
) -> Result<HeightZeroAlgorithm, NotFactorable> {
    assert!(!queries.is_empty(), "query batch must be nonempty");
    assert!(
        queries.iter().all(|&j| j < p.lambda.len()),
        "query index out of range"
    );
    let policy = QueryPolicy::fixed(queries.to_vec());
    let indices = policy.set_for(0).to_vec();
    let mut seen: HashMap<Vec<(u64, u64)>, usize> = HashMap::new();
    for a in 0..p.input_count() {
        let key = p.row_key(a, &indices);
        match seen.get(&key) {
            Some(&first) if p.xi[first] != p.xi[a] => {
                return Err(NotFactorable { left: first, right: a });
            }
            Some(_) => {}
            None => {
                seen.insert(key, a);
            }
        }
    }
    Ok(HeightZeroAlgorithm { gamma: p.xi.clone(), policy })
}

/// Comparison carried by a decision-tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TestOp {
    Lt,
    Le,
}

impl TestOp {
    fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            TestOp::Lt => lhs < rhs,
            TestOp::Le => lhs <= rhs,
        }
    }
}

/// Finite binary tree: nodes compare a test function against a rational
/// threshold, leaves carry output labels.
#[derive(Debug, Clone, PartialEq)]
pub enum DecisionTree {
    Leaf(String),
    Node {
        test: usize,
        op: TestOp,
        threshold: num_rational::Ratio<i64>,
        yes: Box<DecisionTree>,
        no: Box<DecisionTree>,
    },
}

impl DecisionTree {
    pub fn leaf(label: &str) -> Self {
        DecisionTree::Leaf(label.to_string())
    }

    pub fn node(
        test: usize,
        op: TestOp,
        threshold: num_rational::Ratio<i64>,
        yes: DecisionTree,
        no: DecisionTree,
    ) -> Self {
        DecisionTree::Node {
            test,
            op,
            threshold,
            yes: Box::new(yes),
            no: Box::new(no),
        }
    }

    fn max_test(&self) -> Option<usize> {
        match self {
            DecisionTree::Leaf(_) => None,
            DecisionTree::Node { test, yes, no, .. } => {
                let mut m = *test;
                if let Some(t) = yes.max_test() {
                    m = m.max(t);
                }
                if let Some(t) = no.max_test() {
                    m = m.max(t);
                }
                Some(m)
            }
        }
    }
}

fn ratio_to_f64(q: num_rational::Ratio<i64>) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Follow the unique consistent root-to-leaf path for input `y`.
pub fn decision_tree_eval(tree: &DecisionTree, tests: &[&dyn Fn(f64) -> f64], y: f64) -> String {
    if let Some(m) = tree.max_test() {
        assert!(m < tests.len(), "tree references an undeclared test");
    }
    let mut node = tree;
    loop {
        match node {
            DecisionTree::Leaf(label) => return label.clone(),
            DecisionTree::Node { test, op, threshold, yes, no } => {
                node = if op.eval(tests[*test](y), ratio_to_f64(*threshold)) {
                    yes
                } else {
                    no
                };
            }
        }
    }
}

/// One half-space condition along a path; `complement` negates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfSpaceTest {
    pub test: usize,
    pub op: TestOp,
    pub threshold: num_rational::Ratio<i64>,
    pub complement: bool,
}

/// Disjunction over paths of conjunctions of half-space tests: membership
/// in one tree fiber as an explicit formula.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberFormula {
    pub clauses: Vec<Vec<HalfSpaceTest>>,
}

impl FiberFormula {
    pub fn eval(&self, tests: &[&dyn Fn(f64) -> f64], y: f64) -> bool {
        self.clauses.iter().any(|clause| {
            clause.iter().all(|h| {
                let hold = h.op.eval(tests[h.test](y), ratio_to_f64(h.threshold));
                hold != h.complement
            })
        })
    }
}

/// Collect every root-to-leaf path ending in `label` as one conjunction.
pub fn fiber_formula(tree: &DecisionTree, label: &str) -> FiberFormula {
    fn walk(
        node: &DecisionTree,
        label: &str,
        path: &mut Vec<HalfSpaceTest>,
        out: &mut Vec<Vec<HalfSpaceTest>>,
    ) {
        match node {
            DecisionTree::Leaf(l) => {
                if l == label {
                    out.push(path.clone());
                }
            }
            DecisionTree::Node { test, op, threshold, yes, no } => {
                path.push(HalfSpaceTest {
                    test: *test,
                    op: *op,
                    threshold: *threshold,
                    complement: false,
                });
                walk(yes, label, path, out);
                path.pop();
                path.push(HalfSpaceTest {
                    test: *test,
                    op: *op,
                    threshold: *threshold,
                    complement: true,
                });
                walk(no, label, path, out);
                path.pop();
            }
        }
    }
    let mut clauses = Vec::new();
    walk(tree, label, &mut Vec::new(), &mut clauses);
    FiberFormula { clauses }
}

/// The sign function as a depth-2 tree over the identity test r(y) = y:
/// y < 0 gives -1, otherwise y <= 0 separates 0 from +1.
pub fn sign_tree() -> DecisionTree {
    let zero = num_rational::Ratio::new(0, 1);
    DecisionTree::node(
        0,
        TestOp::Lt,
        zero,
        DecisionTree::leaf("-1"),
        DecisionTree::node(0, TestOp::Le, zero, DecisionTree::leaf("0"), DecisionTree::leaf("1")),
    )
}

/// A finite 0/1 matrix standing for a finitely supported infinite one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must have positive extent");
        BitMatrix { rows, cols, bits: vec![false; rows * cols] }
    }

    pub fn random(rng: &mut impl Rng, rows: usize, cols: usize) -> Self {
        let mut m = BitMatrix::zeros(rows, cols);
        for b in &mut m.bits {
            *b = rng.gen();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i < self.rows && j < self.cols, "index outside support bound");
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        assert!(i < self.rows && j < self.cols, "index outside support bound");
        self.bits[i * self.cols + j] = v;
    }

    pub fn flipped(&self, i: usize, j: usize) -> Self {
        let mut m = self.clone();
        m.set(i, j, !m.get(i, j));
        m
    }
}

/// Output of the row-reading maps: a sequence bit and a row segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowReadout {
    pub p_bit: bool,
    pub row_bits: Vec<bool>,
}

impl RowReadout {
    /// Canonical string encoding, usable as an output value in a
    /// [`FiniteProblem`].
    pub fn encode(&self) -> String {
        let row: String = self
            .row_bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect();
        format!("p={};row={row}", u8::from(self.p_bit))
    }
}

/// The pair of row-reading maps over bit-matrix inputs: the full-row map
/// needs the whole row at once, its truncations read a fixed prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowReader {
    pub row: usize,
    pub trunc: usize,
    p_prefix: Vec<bool>,
}

/// Build the instance for row index `n` and truncation `m`, with the fixed
/// sequence given by its prefix bits. Needs `p_prefix` to cover index `n`.
pub fn weak_hansen_instance(n: usize, m: usize, p_prefix: Vec<bool>) -> RowReader {
    assert!(p_prefix.len() > n, "prefix must cover the row index");
    RowReader { row: n, trunc: m, p_prefix }
}

impl RowReader {
    /// Full-row map: the sequence bit at the row index plus the entire row.
    pub fn gamma_full(&self, x: &BitMatrix) -> RowReadout {
        assert!(x.rows() > self.row, "matrix does not reach the read row");
        RowReadout {
            p_bit: self.p_prefix[self.row],
            row_bits: (0..x.cols()).map(|j| x.get(self.row, j)).collect(),
        }
    }

    /// Truncation at this instance's level.
    pub fn gamma_trunc(&self, x: &BitMatrix) -> RowReadout {
        self.gamma_trunc_at(self.trunc, x)
    }

    /// Truncation at an arbitrary level `m`: sequence bit at min(row, m),
    /// row entries with column index <= m (clipped to the support bound).
    pub fn gamma_trunc_at(&self, m: usize, x: &BitMatrix) -> RowReadout {
        assert!(x.rows() > self.row, "matrix does not reach the read row");
        let upto = m.min(x.cols() - 1);
        RowReadout {
            p_bit: self.p_prefix[self.row.min(m)],
            row_bits: (0..=upto).map(|j| x.get(self.row, j)).collect(),
        }
    }

    /// Flattened evaluation index of coordinate (i, j) for matrices of the
    /// given width, matching [`hansen_problem`]'s table order.
    pub fn coordinate_index(i: usize, j: usize, cols: usize) -> usize {
        i * cols + j
    }

    /// The fixed query set of the truncated map: row-prefix coordinates.
    pub fn trunc_query_set(&self, cols: usize) -> Vec<usize> {
        (0..=self.trunc.min(cols - 1))
            .map(|j| Self::coordinate_index(self.row, j, cols))
            .collect()
    }
}

/// Package two bit matrices as a finite problem whose evaluations are the
/// matrix coordinates, with the truncated map as both the algorithm table
/// and the target output.
pub fn hansen_problem(
    reader: &RowReader,
    x0: &BitMatrix,
    x1: &BitMatrix,
) -> (FiniteProblem, Vec<String>, QueryPolicy) {
    assert_eq!(x0.rows(), x1.rows(), "matrices must share support bounds");
    assert_eq!(x0.cols(), x1.cols(), "matrices must share support bounds");
    let bit = |b: bool| ComplexPoint::new(f64::from(u8::from(b)), 0.0).unwrap();
    let mut lambda = Vec::with_capacity(x0.rows() * x0.cols());
    for i in 0..x0.rows() {
        for j in 0..x0.cols() {
            lambda.push(vec![bit(x0.get(i, j)), bit(x1.get(i, j))]);
        }
    }
    let gamma = vec![
        reader.gamma_trunc(x0).encode(),
        reader.gamma_trunc(x1).encode(),
    ];
    let mut values = gamma.clone();
    values.sort();
    values.dedup();
    let problem = FiniteProblem::new(
        vec!["x0".into(), "x1".into()],
        gamma.clone(),
        lambda,
        MetricTable::discrete(values),
    )
    .expect("coordinate problem is well formed");
    let policy = QueryPolicy::fixed(reader.trunc_query_set(x0.cols()));
    (problem, gamma, policy)
}

/// A candidate query set together with the flipped-bit pair defeating it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependenceWitness {
    /// Columns of the read row the candidate set queries.
    pub candidate: Vec<usize>,
    /// The unqueried column whose bit gets flipped.
    pub flipped_column: usize,
    pub base: BitMatrix,
    pub flipped: BitMatrix,
}

/// Defeat every bounded candidate query set for the full-row map.
///
/// Candidate sets range over the only coordinates that can matter, the
/// first q+1 columns of the read row: a query elsewhere is blind to the
/// output. For each set of size at most q, pigeonhole leaves a column
/// unqueried; flipping that one bit produces two inputs the set cannot
/// tell apart whose outputs differ. Every witness is re-verified before
/// it is returned.
pub fn violation_finder(
    reader: &RowReader,
    q: u32,
) -> Result<Vec<DependenceWitness>, FrameworkError> {
    if q > 16 {
        return Err(FrameworkError::ResourceLimit(q));
    }
    let universe = q as usize + 1;
    let cols = universe;
    let rows = reader.row + 1;
    let mut witnesses = Vec::with_capacity((1usize << universe) - 1);
    for mask in 0..(1u32 << universe) {
        let candidate: Vec<usize> = (0..universe).filter(|&j| mask >> j & 1 == 1).collect();
        if candidate.len() > q as usize {
            continue;
        }
        let flipped_column = (0..universe)
            .find(|&j| mask >> j & 1 == 0)
            .expect("a set of size <= q misses one of q+1 columns");
        let base = BitMatrix::zeros(rows, cols);
        let flipped = base.flipped(reader.row, flipped_column);
        for &j in &candidate {
            assert_eq!(
                base.get(reader.row, j),
                flipped.get(reader.row, j),
                "witness pair must agree on the candidate set"
            );
        }
        assert_ne!(
            reader.gamma_full(&base),
            reader.gamma_full(&flipped),
            "witness pair must separate the full-row map"
        );
        witnesses.push(DependenceWitness { candidate, flipped_column, base, flipped });
    }
    Ok(witnesses)
}

/// Small random instance over a two-letter evaluation alphabet, so that
/// evaluation-row collisions actually occur and both consistency verdicts
/// get exercised.
pub fn random_problem(rng: &mut impl Rng, max_inputs: usize, max_lambda: usize) -> FiniteProblem {
    assert!(max_inputs >= 2 && max_lambda >= 1);
    let n = rng.gen_range(2..=max_inputs);
    let m = rng.gen_range(1..=max_lambda);
    let omega: Vec<String> = (0..n).map(|i| format!("a{i}")).collect();
    let outputs = ["u", "v", "w"];
    let xi: Vec<String> = (0..n)
        .map(|_| outputs[rng.gen_range(0..outputs.len())].to_string())
        .collect();
    let lambda: Vec<Vec<ComplexPoint>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| ComplexPoint::new(f64::from(rng.gen_range(0..2u8)), 0.0).unwrap())
                .collect()
        })
        .collect();
    let values = outputs.iter().map(|s| s.to_string()).collect();
    FiniteProblem::new(omega, xi, lambda, MetricTable::discrete(values)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> ComplexPoint {
        ComplexPoint::new(re, 0.0).unwrap()
    }

    #[test]
    fn counterexample_fails_with_the_first_pair() {
        let p = two_point_counterexample();
        assert_eq!(check_consistency(&p), Consistency::Fails { left: 0, right: 1 });
        assert_eq!(
            factorize(&p).unwrap_err(),
            FactorizationImpossible { left: 0, right: 1 }
        );
    }

    #[test]
    fn injective_evaluation_forces_consistency() {
        let p = FiniteProblem::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["u".into(), "v".into(), "u".into()],
            vec![vec![c(0.0), c(1.0), c(2.0)]],
            MetricTable::discrete(vec!["u".into(), "v".into()]),
        )
        .unwrap();
        assert_eq!(check_consistency(&p), Consistency::Holds);
        let f = factorize(&p).unwrap();
        assert_eq!(f.class_count(), 3);
    }

    #[test]
    fn factor_table_lists_one_representative_row_per_class() {
        let p = FiniteProblem::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["u".into(), "v".into(), "u".into()],
            vec![vec![c(0.0), c(1.0), c(0.0)]],
            MetricTable::discrete(vec!["u".into(), "v".into()]),
        )
        .unwrap();
        let f = factorize(&p).unwrap();
        let table = f.table(&p);
        assert_eq!(
            table,
            vec![
                (vec![c(0.0)], "u".to_string()),
                (vec![c(1.0)], "v".to_string()),
            ]
        );
    }

    #[test]
    fn constant_output_is_always_consistent() {
        let p = FiniteProblem::new(
            vec!["a".into(), "b".into()],
            vec!["u".into(), "u".into()],
            vec![vec![c(0.0), c(0.0)]],
            MetricTable::discrete(vec!["u".into()]),
        )
        .unwrap();
        assert_eq!(check_consistency(&p), Consistency::Holds);
    }

    #[test]
    fn consistency_and_factorization_agree_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut holds = 0;
        let mut fails = 0;
        for _ in 0..200 {
            let p = random_problem(&mut rng, 6, 4);
            match (check_consistency(&p), factorize(&p)) {
                (Consistency::Holds, Ok(f)) => {
                    holds += 1;
                    for a in 0..p.input_count() {
                        assert_eq!(f.apply(&p, a), Some(p.xi[a].as_str()));
                    }
                }
                (Consistency::Fails { .. }, Err(_)) => fails += 1,
                (v, r) => panic!("verdicts disagree: {v:?} vs {r:?}"),
            }
        }
        assert!(holds > 0 && fails > 0, "both verdicts should occur");
    }

    #[test]
    fn fixed_query_composition_is_a_valid_algorithm() {
        let p = FiniteProblem::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec!["u".into(), "v".into(), "u".into()],
            vec![vec![c(0.0), c(1.0), c(0.0)], vec![c(5.0), c(5.0), c(7.0)]],
            MetricTable::discrete(vec!["u".into(), "v".into()]),
        )
        .unwrap();
        let gamma: Vec<String> = vec!["u".into(), "v".into(), "u".into()];
        let policy = QueryPolicy::fixed(vec![0]);
        assert_eq!(check_general_algorithm(&gamma, &policy, &p), AlgorithmCheck::Valid);
    }

    #[test]
    fn reading_an_unqueried_value_is_caught() {
        // Inputs a and b agree on evaluation 0 but the table follows
        // evaluation 1, which was never queried.
        let p = FiniteProblem::new(
            vec!["a".into(), "b".into()],
            vec!["u".into(), "v".into()],
            vec![vec![c(0.0), c(0.0)], vec![c(1.0), c(2.0)]],
            MetricTable::discrete(vec!["u".into(), "v".into()]),
        )
        .unwrap();
        let gamma: Vec<String> = vec!["u".into(), "v".into()];
        let policy = QueryPolicy::fixed(vec![0]);
        assert_eq!(
            check_general_algorithm(&gamma, &policy, &p),
            AlgorithmCheck::ViolatesDependence { left: 0, right: 1 }
        );
    }

    #[test]
    fn query_set_depending_on_an_unqueried_value_is_caught() {
        // Constant table, so only the query sets can misbehave: input b's
        // set differs although b agrees with a on everything a queried.
        let p = FiniteProblem::new(
            vec!["a".into(), "b".into()],
            vec!["u".into(), "u".into()],
            vec![vec![c(0.0), c(0.0)], vec![c(1.0), c(2.0)]],
            MetricTable::discrete(vec!["u".into()]),
        )
        .unwrap();
        let gamma: Vec<String> = vec!["u".into(), "u".into()];
        let policy = QueryPolicy::adaptive(vec![vec![0], vec![0, 1]]);
        assert_eq!(
            check_general_algorithm(&gamma, &policy, &p),
            AlgorithmCheck::ViolatesStability { left: 0, right: 1 }
        );
    }

    #[test]
    fn full_query_batch_answers_any_consistent_problem() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = 0;
        while seen < 50 {
            let p = random_problem(&mut rng, 6, 4);
            if check_consistency(&p) != Consistency::Holds {
                continue;
            }
            seen += 1;
            let all: Vec<usize> = (0..p.lambda.len()).collect();
            let alg = finite_query_factorization(&p, &all).unwrap();
            assert_eq!(alg.gamma, p.xi);
            assert_eq!(
                check_general_algorithm(&alg.gamma, &alg.policy, &p),
                AlgorithmCheck::Valid
            );
        }
    }

    #[test]
    fn constant_column_cannot_answer_a_nonconstant_problem() {
        let p = FiniteProblem::new(
            vec!["a".into(), "b".into()],
            vec!["u".into(), "v".into()],
            vec![vec![c(3.0), c(3.0)], vec![c(0.0), c(1.0)]],
            MetricTable::discrete(vec!["u".into(), "v".into()]),
        )
        .unwrap();
        assert_eq!(
            finite_query_factorization(&p, &[0]).unwrap_err(),
            NotFactorable { left: 0, right: 1 }
        );
    }

    #[test]
    fn factorization_succeeds_exactly_when_columns_separate_fibers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = random_problem(&mut rng, 6, 4);
            if check_consistency(&p) != Consistency::Holds {
                continue;
            }
            let m = p.lambda.len();
            let pick: Vec<usize> = (0..m).filter(|_| rng.gen()).collect();
            if pick.is_empty() {
                continue;
            }
            let separates = (0..p.input_count()).all(|a| {
                (0..p.input_count()).all(|b| {
                    p.xi[a] == p.xi[b] || p.row_key(a, &pick) != p.row_key(b, &pick)
                })
            });
            assert_eq!(finite_query_factorization(&p, &pick).is_ok(), separates);
        }
    }

    #[test]
    fn sign_tree_evaluates_the_three_cases() {
        let id: &dyn Fn(f64) -> f64 = &|y| y;
        let tree = sign_tree();
        assert_eq!(decision_tree_eval(&tree, &[id], -3.0), "-1");
        assert_eq!(decision_tree_eval(&tree, &[id], 0.0), "0");
        assert_eq!(decision_tree_eval(&tree, &[id], 2.5), "1");
    }

    #[test]
    fn fiber_formulas_agree_with_direct_evaluation() {
        use rand::Rng;
        let id: &dyn Fn(f64) -> f64 = &|y| y;
        let tree = sign_tree();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for label in ["-1", "0", "1"] {
            let formula = fiber_formula(&tree, label);
            for _ in 0..1000 {
                let y: f64 = rng.gen_range(-2.0..2.0);
                assert_eq!(
                    formula.eval(&[id], y),
                    decision_tree_eval(&tree, &[id], y) == label
                );
            }
            for k in -8..=8 {
                let y = k as f64 / 4.0;
                assert_eq!(
                    formula.eval(&[id], y),
                    decision_tree_eval(&tree, &[id], y) == label
                );
            }
        }
    }

    #[test]
    fn truncated_row_reader_is_a_valid_fixed_query_algorithm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let reader = weak_hansen_instance(2, 3, vec![true, false, true, true, false]);
        for _ in 0..50 {
            let x0 = BitMatrix::random(&mut rng, 4, 6);
            let mut x1 = BitMatrix::random(&mut rng, 4, 6);
            if rng.gen() {
                // Make the queried prefixes agree half the time so the
                // check is not vacuous.
                for j in 0..=reader.trunc {
                    x1.set(reader.row, j, x0.get(reader.row, j));
                }
            }
            let (problem, gamma, policy) = hansen_problem(&reader, &x0, &x1);
            assert_eq!(
                check_general_algorithm(&gamma, &policy, &problem),
                AlgorithmCheck::Valid
            );
        }
    }

    #[test]
    fn every_bounded_candidate_set_is_defeated() {
        let reader = weak_hansen_instance(1, 2, vec![false, true]);
        let witnesses = violation_finder(&reader, 8).unwrap();
        assert_eq!(witnesses.len(), (1 << 9) - 1);
        for w in &witnesses {
            assert!(!w.candidate.contains(&w.flipped_column));
            assert_ne!(
                reader.gamma_full(&w.base),
                reader.gamma_full(&w.flipped)
            );
        }
    }

    #[test]
    fn violation_search_is_bounded() {
        let reader = weak_hansen_instance(0, 0, vec![true]);
        assert!(matches!(
            violation_finder(&reader, 17),
            Err(FrameworkError::ResourceLimit(17))
        ));
    }

    #[test]
    fn truncations_stabilize_to_the_full_row_map() {
        use crate::baire::{lim_at, LimVerdict};
        let reader = weak_hansen_instance(3, 0, vec![true, true, false, true, false]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = BitMatrix::random(&mut rng, 5, 7);
        let full = reader.gamma_full(&x);
        let coord = |readout: &RowReadout, k: usize| -> u64 {
            if k == 0 {
                u64::from(readout.p_bit)
            } else {
                readout.row_bits.get(k - 1).copied().map(u64::from).unwrap_or(0)
            }
        };
        for k in 0..=x.cols() {
            let family = |idx: u64| {
                let (m, kk) = crate::baire::unpair(idx);
                coord(&reader.gamma_trunc_at(m as usize, &x), kk as usize)
            };
            match lim_at(&family, k as u64, 40, 10) {
                LimVerdict::Stabilized { value, since } => {
                    assert_eq!(value, coord(&full, k));
                    let support = x.cols() - 1;
                    assert!(since as usize <= reader.row.max(support));
                }
                v => panic!("coordinate {k} did not stabilize: {v:?}"),
            }
        }
    }

    #[test]
    fn problem_json_loads_and_validates() {
        let text = r#"{
            "omega": ["0", "1"],
            "xi": ["0", "1"],
            "lambda": [[[0.0, 0.0], [0.0, 0.0]]],
            "metric": "discrete"
        }"#;
        let p = FiniteProblem::from_json(text).unwrap();
        assert_eq!(p, two_point_counterexample());
        assert_eq!(p.metric.distance("0", "1"), Some(1.0));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let short_xi = r#"{
            "omega": ["a", "b"], "xi": ["u"],
            "lambda": [[[0,0],[0,0]]], "metric": "discrete"
        }"#;
        assert!(matches!(
            FiniteProblem::from_json(short_xi),
            Err(FrameworkError::Shape(_))
        ));
        let bad_metric = r#"{
            "omega": ["a"], "xi": ["u"], "lambda": [],
            "metric": {"values": ["u", "v"], "table": [[0, 2], [2, 0]]}
        }"#;
        assert!(FiniteProblem::from_json(bad_metric).is_ok());
        let asym = r#"{
            "omega": ["a"], "xi": ["u"], "lambda": [],
            "metric": {"values": ["u", "v"], "table": [[0, 2], [1, 0]]}
        }"#;
        assert!(matches!(
            FiniteProblem::from_json(asym),
            Err(FrameworkError::Shape(_))
        ));
    }

    #[test]
    fn triangle_inequality_is_enforced() {
        let bad = MetricTable::from_table(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![0.0, 1.0, 5.0],
                vec![1.0, 0.0, 1.0],
                vec![5.0, 1.0, 0.0],
            ],
        );
        assert!(matches!(bad, Err(FrameworkError::Shape(_))));
    }
}
