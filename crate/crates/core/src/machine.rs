//! Interpreter for parameter-free oracle machines over exact rationals,
//! with an alternative finite-precision comparison semantics.
//!
//! Registers come in two banks: real registers hold arbitrary-precision
//! rationals and carry all arithmetic including division; natural registers
//! are exact counters (addition, truncated subtraction, multiplication).
//! The only built-in constants are 0 and 1. Oracle access goes through
//! QUERY, which reads an index from a real register and is defined only
//! when that register holds a natural number the table covers.
//!
//! [`run_exact`] executes with exact comparisons and is deterministic.
//! [`run_fram`] replaces every real comparison x < y with a finite-
//! precision test of uncertainty 1/(k+1): the true branch is possible when
//! x < y, the false branch when x > y - 1/(k+1), and inside the open
//! overlap both branches are explored. Equality tests derive from two such
//! comparisons, so they fork when 0 < |x - y| < 1/(k+1). Natural-register
//! tests stay exact. The result is the set of outcomes over all paths.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Hard cap on explored execution paths in finite-precision mode.
pub const PATH_GUARD: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum MachineError {
    #[error("invalid program: {0}")]
    Validation(String),
    #[error("assembly line {line}: {message}")]
    Assembly { line: usize, message: String },
    #[error("oracle table: {0}")]
    OracleCsv(String),
    #[error("explored {explored} paths without exhausting the branch tree")]
    BranchExplosion { explored: usize },
}

/// A register in one of the two banks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reg {
    /// Real-valued register, exact rational contents.
    R(usize),
    /// Natural-valued register, exact counter.
    N(usize),
}

impl Reg {
    fn same_bank(self, other: Reg) -> bool {
        matches!(
            (self, other),
            (Reg::R(_), Reg::R(_)) | (Reg::N(_), Reg::N(_))
        )
    }
}

impl std::fmt::Display for Reg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Reg::R(i) => write!(f, "r{i}"),
            Reg::N(i) => write!(f, "n{i}"),
        }
    }
}

/// The instruction set. Arithmetic is three-address within one bank;
/// division exists only on the real bank. HALT outputs a contiguous span
/// of real registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Load0(Reg),
    Load1(Reg),
    Add(Reg, Reg, Reg),
    Sub(Reg, Reg, Reg),
    Mul(Reg, Reg, Reg),
    Div(Reg, Reg, Reg),
    Jlt(Reg, Reg, usize),
    Jeq(Reg, Reg, usize),
    Query { index: usize, re: usize, im: usize },
    Jump(usize),
    Halt { first: usize, count: usize },
}

/// A validated program: jump targets in range, arithmetic within one bank,
/// division and queries on the real bank only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineProgram {
    instrs: Vec<Instr>,
    real_count: usize,
    nat_count: usize,
}

impl MachineProgram {
    pub fn new(instrs: Vec<Instr>) -> Result<Self, MachineError> {
        if instrs.is_empty() {
            return Err(MachineError::Validation("empty program".into()));
        }
        let len = instrs.len();
        let mut real_count = 0usize;
        let mut nat_count = 0usize;
        let mut touch = |r: Reg| match r {
            Reg::R(i) => real_count = real_count.max(i + 1),
            Reg::N(i) => nat_count = nat_count.max(i + 1),
        };
        for (pc, ins) in instrs.iter().enumerate() {
            let bad = |msg: String| Err(MachineError::Validation(format!("at {pc}: {msg}")));
            match ins {
                Instr::Load0(r) | Instr::Load1(r) => touch(*r),
                Instr::Add(d, a, b) | Instr::Sub(d, a, b) | Instr::Mul(d, a, b) => {
                    if !(d.same_bank(*a) && d.same_bank(*b)) {
                        return bad(format!("arithmetic mixes banks: {d} {a} {b}"));
                    }
                    touch(*d);
                    touch(*a);
                    touch(*b);
                }
                Instr::Div(d, a, b) => {
                    if !matches!((d, a, b), (Reg::R(_), Reg::R(_), Reg::R(_))) {
                        return bad("division is defined on real registers only".into());
                    }
                    touch(*d);
                    touch(*a);
                    touch(*b);
                }
                Instr::Jlt(a, b, t) | Instr::Jeq(a, b, t) => {
                    if !a.same_bank(*b) {
                        return bad(format!("comparison mixes banks: {a} {b}"));
                    }
                    if *t >= len {
                        return bad(format!("jump target {t} out of range"));
                    }
                    touch(*a);
                    touch(*b);
                }
                Instr::Query { index, re, im } => {
                    touch(Reg::R(*index));
                    touch(Reg::R(*re));
                    touch(Reg::R(*im));
                }
                Instr::Jump(t) => {
                    if *t >= len {
                        return bad(format!("jump target {t} out of range"));
                    }
                }
                Instr::Halt { first, count } => {
                    if *count > 0 {
                        touch(Reg::R(first + count - 1));
                    }
                }
            }
        }
        Ok(MachineProgram { instrs, real_count, nat_count })
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }
}

/// Oracle values by index: exact rational real and imaginary parts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OracleTable {
    entries: BTreeMap<u64, (BigRational, BigRational)>,
}

impl OracleTable {
    pub fn empty() -> Self {
        OracleTable::default()
    }

    pub fn insert(&mut self, index: u64, re: BigRational, im: BigRational) {
        self.entries.insert(index, (re, im));
    }

    pub fn get(&self, index: u64) -> Option<&(BigRational, BigRational)> {
        self.entries.get(&index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parse CSV with header `index,re_num/re_den,im_num/im_den`; fraction
    /// fields accept `a/b` or a bare integer.
    pub fn from_csv(reader: impl std::io::Read) -> Result<Self, MachineError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut table = OracleTable::empty();
        for (rowno, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| MachineError::OracleCsv(e.to_string()))?;
            if record.len() != 3 {
                return Err(MachineError::OracleCsv(format!(
                    "row {}: expected 3 fields, got {}",
                    rowno + 1,
                    record.len()
                )));
            }
            let index: u64 = record[0].trim().parse().map_err(|_| {
                MachineError::OracleCsv(format!("row {}: bad index {:?}", rowno + 1, &record[0]))
            })?;
            let re = parse_fraction(record[1].trim())
                .ok_or_else(|| MachineError::OracleCsv(format!("row {}: bad fraction {:?}", rowno + 1, &record[1])))?;
            let im = parse_fraction(record[2].trim())
                .ok_or_else(|| MachineError::OracleCsv(format!("row {}: bad fraction {:?}", rowno + 1, &record[2])))?;
            table.insert(index, re, im);
        }
        Ok(table)
    }
}

fn parse_fraction(text: &str) -> Option<BigRational> {
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let n: BigInt = num.parse().ok()?;
    let d: BigInt = den.parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

/// How a run ended. Total: every failure mode is an outcome, not a panic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunOutcome {
    Halted(Vec<BigRational>),
    Diverged { reason: String },
    /// QUERY executed while the index register held a non-natural value
    /// (or one the oracle does not cover); `step` is the execution step.
    UndefinedQuery { step: usize },
}

#[derive(Clone)]
struct State {
    pc: usize,
    reals: Vec<BigRational>,
    nats: Vec<u64>,
    fuel: u64,
    step: usize,
}

impl State {
    fn start(prog: &MachineProgram, input: &[BigRational], fuel: u64) -> State {
        let mut reals = vec![BigRational::zero(); prog.real_count.max(input.len())];
        for (slot, v) in reals.iter_mut().zip(input) {
            *slot = v.clone();
        }
        State {
            pc: 0,
            reals,
            nats: vec![0; prog.nat_count],
            fuel,
            step: 0,
        }
    }
}

enum Step {
    Continue,
    /// A real comparison whose finite-precision version forks; `taken` is
    /// the exact branch, `margin` the distance to the forking band edge.
    Branch { target: usize, taken: bool, margin: Option<BigRational> },
    Done(RunOutcome),
}

/// Execute one instruction with exact semantics on `st`.
fn exact_step(prog: &MachineProgram, oracle: &OracleTable, st: &mut State) -> Step {
    if st.fuel == 0 {
        return Step::Done(RunOutcome::Diverged {
            reason: format!("fuel exhausted after {} steps", st.step),
        });
    }
    st.fuel -= 1;
    let step = st.step;
    st.step += 1;
    let ins = prog.instrs[st.pc].clone();
    st.pc += 1;
    match ins {
        Instr::Load0(Reg::R(i)) => st.reals[i] = BigRational::zero(),
        Instr::Load0(Reg::N(i)) => st.nats[i] = 0,
        Instr::Load1(Reg::R(i)) => st.reals[i] = BigRational::from(BigInt::from(1)),
        Instr::Load1(Reg::N(i)) => st.nats[i] = 1,
        Instr::Add(Reg::R(d), Reg::R(a), Reg::R(b)) => {
            st.reals[d] = &st.reals[a] + &st.reals[b];
        }
        Instr::Sub(Reg::R(d), Reg::R(a), Reg::R(b)) => {
            st.reals[d] = &st.reals[a] - &st.reals[b];
        }
        Instr::Mul(Reg::R(d), Reg::R(a), Reg::R(b)) => {
            st.reals[d] = &st.reals[a] * &st.reals[b];
        }
        Instr::Div(Reg::R(d), Reg::R(a), Reg::R(b)) => {
            if st.reals[b].is_zero() {
                return Step::Done(RunOutcome::Diverged {
                    reason: format!("division by zero at step {step}"),
                });
            }
            st.reals[d] = &st.reals[a] / &st.reals[b];
        }
        Instr::Add(Reg::N(d), Reg::N(a), Reg::N(b)) => {
            match st.nats[a].checked_add(st.nats[b]) {
                Some(v) => st.nats[d] = v,
                None => {
                    return Step::Done(RunOutcome::Diverged {
                        reason: format!("natural overflow at step {step}"),
                    })
                }
            }
        }
        // Natural subtraction truncates at zero.
        Instr::Sub(Reg::N(d), Reg::N(a), Reg::N(b)) => {
            st.nats[d] = st.nats[a].saturating_sub(st.nats[b]);
        }
        Instr::Mul(Reg::N(d), Reg::N(a), Reg::N(b)) => {
            match st.nats[a].checked_mul(st.nats[b]) {
                Some(v) => st.nats[d] = v,
                None => {
                    return Step::Done(RunOutcome::Diverged {
                        reason: format!("natural overflow at step {step}"),
                    })
                }
            }
        }
        Instr::Jlt(Reg::R(a), Reg::R(b), t) => {
            let taken = st.reals[a] < st.reals[b];
            // True branch leaves the fork band once y - x reaches the
            // uncertainty; the false branch never forks.
            let margin = taken.then(|| &st.reals[b] - &st.reals[a]);
            return Step::Branch { target: t, taken, margin };
        }
        Instr::Jeq(Reg::R(a), Reg::R(b), t) => {
            let taken = st.reals[a] == st.reals[b];
            // Exact equality never forks; inequality forks while |x - y|
            // is under the uncertainty.
            let margin = (!taken).then(|| (&st.reals[a] - &st.reals[b]).abs());
            return Step::Branch { target: t, taken, margin };
        }
        Instr::Jlt(Reg::N(a), Reg::N(b), t) => {
            let taken = st.nats[a] < st.nats[b];
            return Step::Branch { target: t, taken, margin: None };
        }
        Instr::Jeq(Reg::N(a), Reg::N(b), t) => {
            let taken = st.nats[a] == st.nats[b];
            return Step::Branch { target: t, taken, margin: None };
        }
        Instr::Query { index, re, im } => {
            let v = &st.reals[index];
            let natural = v.is_integer() && !v.is_negative();
            let fetched = natural
                .then(|| v.to_integer().to_u64())
                .flatten()
                .and_then(|n| oracle.get(n).cloned());
            match fetched {
                Some((ore, oim)) => {
                    st.reals[re] = ore;
                    st.reals[im] = oim;
                }
                None => return Step::Done(RunOutcome::UndefinedQuery { step }),
            }
        }
        Instr::Jump(t) => st.pc = t,
        Instr::Halt { first, count } => {
            return Step::Done(RunOutcome::Halted(
                st.reals[first..first + count].to_vec(),
            ));
        }
        other => unreachable!("validation rejects {other:?}"),
    }
    Step::Continue
}

/// Outcome of an exact run together with the smallest finite-precision
/// safety margin seen at any real comparison (None: no comparison had a
/// finite margin, so no precision can make the run fork).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactRun {
    pub outcome: RunOutcome,
    pub min_margin: Option<BigRational>,
}

impl ExactRun {
    /// True when every comparison margin reaches the uncertainty 1/(k+1),
    /// which forces the finite-precision run to follow the exact path and
    /// produce the identical singleton outcome set.
    pub fn fram_coincides(&self, k: u64) -> bool {
        match &self.min_margin {
            None => true,
            Some(m) => {
                let band = BigRational::new(BigInt::from(1), BigInt::from(k + 1));
                *m >= band
            }
        }
    }
}

/// Deterministic exact run, with the margin audit.
pub fn run_exact_audited(
    prog: &MachineProgram,
    oracle: &OracleTable,
    input: &[BigRational],
    fuel: u64,
) -> ExactRun {
    assert!(fuel >= 1, "fuel must be positive");
    let mut st = State::start(prog, input, fuel);
    let mut min_margin: Option<BigRational> = None;
    loop {
        match exact_step(prog, oracle, &mut st) {
            Step::Continue => {}
            Step::Branch { target, taken, margin } => {
                if let Some(m) = margin {
                    min_margin = Some(match min_margin.take() {
                        Some(old) if old <= m => old,
                        _ => m,
                    });
                }
                if taken {
                    st.pc = target;
                }
            }
            Step::Done(outcome) => return ExactRun { outcome, min_margin },
        }
    }
}

/// Deterministic small-step execution with exact rational arithmetic.
pub fn run_exact(
    prog: &MachineProgram,
    oracle: &OracleTable,
    input: &[BigRational],
    fuel: u64,
) -> RunOutcome {
    run_exact_audited(prog, oracle, input, fuel).outcome
}

/// Finite-precision run: explore every branch the k-precision comparisons
/// allow and collect the distinct outcomes.
pub fn run_fram(
    prog: &MachineProgram,
    oracle: &OracleTable,
    input: &[BigRational],
    k: u64,
    fuel: u64,
) -> Result<BTreeSet<RunOutcome>, MachineError> {
    assert!(fuel >= 1, "fuel must be positive");
    let band = BigRational::new(BigInt::from(1), BigInt::from(k + 1));
    let mut outcomes = BTreeSet::new();
    let mut work = vec![State::start(prog, input, fuel)];
    let mut explored = 0usize;
    while let Some(mut st) = work.pop() {
        explored += 1;
        if explored > PATH_GUARD {
            return Err(MachineError::BranchExplosion { explored });
        }
        loop {
            match exact_step(prog, oracle, &mut st) {
                Step::Continue => {}
                Step::Branch { target, taken, margin } => {
                    let forks = match margin {
                        // Margin is the distance from the single-valued
                        // region's edge; strictly inside the band both
                        // branches are possible.
                        Some(m) => m < band,
                        None => false,
                    };
                    if forks {
                        let mut other = st.clone();
                        if taken {
                            // Exact branch jumps; the other falls through.
                            st.pc = target;
                        } else {
                            other.pc = target;
                        }
                        work.push(other);
                    } else if taken {
                        st.pc = target;
                    }
                }
                Step::Done(outcome) => {
                    outcomes.insert(outcome);
                    break;
                }
            }
        }
    }
    Ok(outcomes)
}

/// Scan the open uncertainty band (0, 1/(k+1)) on a grid for an input that
/// makes the finite-precision run ambiguous while the exact run halts.
pub fn band_scan(
    prog: &MachineProgram,
    oracle: &OracleTable,
    k: u64,
    fuel: u64,
    grid: u64,
) -> Option<BigRational> {
    assert!(grid >= 2, "grid must have interior points");
    for j in 1..grid {
        let q = BigRational::new(BigInt::from(j), BigInt::from(grid * (k + 1)));
        let exact = run_exact(prog, oracle, &[q.clone()], fuel);
        if !matches!(exact, RunOutcome::Halted(_)) {
            continue;
        }
        if let Ok(set) = run_fram(prog, oracle, &[q.clone()], k, fuel) {
            if set.len() >= 2 {
                return Some(q);
            }
        }
    }
    None
}

/// Parse line-oriented assembly: one instruction per line, `;` starts a
/// comment, `name:` defines a label usable as a jump target. Registers are
/// written `r<i>` (real) and `n<i>` (natural).
pub fn parse_assembly(text: &str) -> Result<MachineProgram, MachineError> {
    struct Raw<'a> {
        line: usize,
        tokens: Vec<&'a str>,
    }
    let mut labels: BTreeMap<&str, usize> = BTreeMap::new();
    let mut raws: Vec<Raw> = Vec::new();
    for (lineno, full) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut body = full.split(';').next().unwrap_or("").trim();
        while let Some(colon) = body.find(':') {
            let (label, rest) = body.split_at(colon);
            let label = label.trim();
            if label.is_empty() || label.contains(char::is_whitespace) {
                return Err(MachineError::Assembly {
                    line,
                    message: format!("bad label {label:?}"),
                });
            }
            if labels.insert(label, raws.len()).is_some() {
                return Err(MachineError::Assembly {
                    line,
                    message: format!("duplicate label {label:?}"),
                });
            }
            body = rest[1..].trim();
        }
        if body.is_empty() {
            continue;
        }
        raws.push(Raw { line, tokens: body.split_whitespace().collect() });
    }
    let reg = |tok: &str, line: usize| -> Result<Reg, MachineError> {
        let err = || MachineError::Assembly {
            line,
            message: format!("bad register {tok:?}"),
        };
        let (bank, idx) = tok.split_at(1);
        let idx: usize = idx.parse().map_err(|_| err())?;
        match bank {
            "r" => Ok(Reg::R(idx)),
            "n" => Ok(Reg::N(idx)),
            _ => Err(err()),
        }
    };
    let real = |tok: &str, line: usize| -> Result<usize, MachineError> {
        match reg(tok, line)? {
            Reg::R(i) => Ok(i),
            Reg::N(_) => Err(MachineError::Assembly {
                line,
                message: format!("expected a real register, got {tok:?}"),
            }),
        }
    };
    let target = |tok: &str, line: usize| -> Result<usize, MachineError> {
        if let Some(&t) = labels.get(tok) {
            return Ok(t);
        }
        tok.parse().map_err(|_| MachineError::Assembly {
            line,
            message: format!("unknown jump target {tok:?}"),
        })
    };
    let mut instrs = Vec::with_capacity(raws.len());
    for raw in &raws {
        let line = raw.line;
        let t = &raw.tokens;
        let arity = |n: usize| -> Result<(), MachineError> {
            if t.len() == n + 1 {
                Ok(())
            } else {
                Err(MachineError::Assembly {
                    line,
                    message: format!("{} expects {n} operands, got {}", t[0], t.len() - 1),
                })
            }
        };
        let ins = match t[0].to_ascii_uppercase().as_str() {
            "LOAD0" => {
                arity(1)?;
                Instr::Load0(reg(t[1], line)?)
            }
            "LOAD1" => {
                arity(1)?;
                Instr::Load1(reg(t[1], line)?)
            }
            "ADD" => {
                arity(3)?;
                Instr::Add(reg(t[1], line)?, reg(t[2], line)?, reg(t[3], line)?)
            }
            "SUB" => {
                arity(3)?;
                Instr::Sub(reg(t[1], line)?, reg(t[2], line)?, reg(t[3], line)?)
            }
            "MUL" => {
                arity(3)?;
                Instr::Mul(reg(t[1], line)?, reg(t[2], line)?, reg(t[3], line)?)
            }
            "DIV" => {
                arity(3)?;
                Instr::Div(reg(t[1], line)?, reg(t[2], line)?, reg(t[3], line)?)
            }
            "JLT" => {
                arity(3)?;
                Instr::Jlt(reg(t[1], line)?, reg(t[2], line)?, target(t[3], line)?)
            }
            "JEQ" => {
                arity(3)?;
                Instr::Jeq(reg(t[1], line)?, reg(t[2], line)?, target(t[3], line)?)
            }
            "QUERY" => {
                arity(3)?;
                Instr::Query {
                    index: real(t[1], line)?,
                    re: real(t[2], line)?,
                    im: real(t[3], line)?,
                }
            }
            "JUMP" => {
                arity(1)?;
                Instr::Jump(target(t[1], line)?)
            }
            "HALT" => {
                arity(2)?;
                let count: usize = t[2].parse().map_err(|_| MachineError::Assembly {
                    line,
                    message: format!("bad span length {:?}", t[2]),
                })?;
                Instr::Halt { first: real(t[1], line)?, count }
            }
            other => {
                return Err(MachineError::Assembly {
                    line,
                    message: format!("unknown instruction {other:?}"),
                })
            }
        };
        instrs.push(ins);
    }
    MachineProgram::new(instrs)
}

/// Sign of the real input in r0: branches on x < 0 and 0 < x, output in
/// {-1, 0, 1}. Two real comparisons, so the finite-precision run is
/// ambiguous exactly on the open band 0 < x < 1/(k+1).
pub fn sgn_program() -> MachineProgram {
    parse_assembly(
        "\
        LOAD0 r1           ; r1 := 0\n\
        JLT r0 r1 neg      ; x < 0\n\
        JLT r1 r0 pos      ; 0 < x\n\
        HALT r1 1          ; x = 0: output 0\n\
        neg: LOAD1 r2\n\
        SUB r3 r1 r2       ; r3 := -1\n\
        HALT r3 1\n\
        pos: LOAD1 r2\n\
        HALT r2 1\n",
    )
    .expect("fixed program parses")
}
