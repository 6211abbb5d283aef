//! The circle domain X = [0,1) with the wrap metric, the dynamical maps F
//! acting on it, and the point-evaluation transcript an algorithm accrues.
//!
//! Maps carry declared class flags (a linear modulus-of-continuity bound and
//! measure preservation). The flags are declarations about membership in an
//! input class, not something finitely many point values could certify;
//! [`check_modulus`] probes the modulus claim on random pairs, and measure
//! preservation is only ever exercised through downstream residual bounds.

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::hyperspace::ComplexPoint;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("domain point {0} outside [0,1)")]
    OutsideDomain(f64),
    #[error("user-supplied evaluator returned {value} at x={x}, outside [0,1)")]
    DomainViolation { x: f64, value: f64 },
    #[error("affine table invalid: {0}")]
    BadAffineTable(String),
    #[error("affine table io: {0}")]
    AffineIo(#[from] csv::Error),
}

/// A point of the circle [0,1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DomainPoint(f64);

impl DomainPoint {
    pub fn new(x: f64) -> Result<Self, DynamicsError> {
        if (0.0..1.0).contains(&x) {
            Ok(DomainPoint(x))
        } else {
            Err(DynamicsError::OutsideDomain(x))
        }
    }

    /// Reduce an arbitrary finite real mod 1 into [0,1).
    pub fn wrap(x: f64) -> Self {
        let y = x.rem_euclid(1.0);
        // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
        DomainPoint(if y >= 1.0 { 0.0 } else { y })
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Wrap metric d(x,y) = min(|x-y|, 1-|x-y|).
    pub fn dist(&self, other: &DomainPoint) -> f64 {
        let d = (self.0 - other.0).abs();
        d.min(1.0 - d)
    }
}

/// Injective encoding of the circle into the plane: x maps to x + 0i.
pub fn encode(x: DomainPoint) -> ComplexPoint {
    ComplexPoint::new(x.value(), 0.0).expect("domain points are finite")
}

/// One affine piece: applies on [breakpoint, next breakpoint).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct AffinePiece {
    pub breakpoint: f64,
    pub slope: f64,
    pub offset: f64,
}

#[derive(Clone)]
pub enum MapKind {
    /// Rotation by a rational angle, reduced into [0,1).
    Rotation(Ratio<i64>),
    Doubling,
    Identity,
    AffinePiecewise(Vec<AffinePiece>),
    UserSupplied(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapKind::Rotation(a) => write!(f, "Rotation({a})"),
            MapKind::Doubling => write!(f, "Doubling"),
            MapKind::Identity => write!(f, "Identity"),
            MapKind::AffinePiecewise(t) => write!(f, "AffinePiecewise({} pieces)", t.len()),
            MapKind::UserSupplied(_) => write!(f, "UserSupplied"),
        }
    }
}

/// A map F on the circle together with its declared class flags.
#[derive(Debug, Clone)]
pub struct DynamicalMap {
    pub kind: MapKind,
    /// Declared linear modulus bound L in d(F(x),F(y)) <= L d(x,y).
    pub modulus: Option<f64>,
    /// Declared Lebesgue measure preservation.
    pub measure_preserving: bool,
}

impl DynamicalMap {
    pub fn rotation(a: Ratio<i64>) -> Self {
        let a = a - a.floor();
        DynamicalMap {
            kind: MapKind::Rotation(a),
            modulus: Some(1.0),
            measure_preserving: true,
        }
    }

    pub fn doubling() -> Self {
        DynamicalMap {
            kind: MapKind::Doubling,
            modulus: Some(2.0),
            measure_preserving: true,
        }
    }

    pub fn identity() -> Self {
        DynamicalMap {
            kind: MapKind::Identity,
            modulus: Some(1.0),
            measure_preserving: true,
        }
    }

    /// Affine-piecewise map; flags default to undeclared/false.
    pub fn affine(table: Vec<AffinePiece>) -> Result<Self, DynamicsError> {
        validate_affine(&table)?;
        Ok(DynamicalMap {
            kind: MapKind::AffinePiecewise(table),
            modulus: None,
            measure_preserving: false,
        })
    }

    /// User-supplied evaluator; must land in [0,1) on its own.
    pub fn user_supplied(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        DynamicalMap {
            kind: MapKind::UserSupplied(Arc::new(f)),
            modulus: None,
            measure_preserving: false,
        }
    }

    pub fn with_modulus(mut self, l: f64) -> Self {
        self.modulus = Some(l);
        self
    }

    pub fn with_measure_preserving(mut self, flag: bool) -> Self {
        self.measure_preserving = flag;
        self
    }

    /// Short human-readable descriptor for run metadata.
    pub fn descriptor(&self) -> String {
        match &self.kind {
            MapKind::Rotation(a) => format!("rotation({a})"),
            MapKind::Doubling => "doubling".to_string(),
            MapKind::Identity => "identity".to_string(),
            MapKind::AffinePiecewise(t) => format!("affine({} pieces)", t.len()),
            MapKind::UserSupplied(_) => "user-supplied".to_string(),
        }
    }
}

fn validate_affine(table: &[AffinePiece]) -> Result<(), DynamicsError> {
    if table.is_empty() {
        return Err(DynamicsError::BadAffineTable("no pieces".into()));
    }
    if table[0].breakpoint != 0.0 {
        return Err(DynamicsError::BadAffineTable(
            "first breakpoint must be 0".into(),
        ));
    }
    for w in table.windows(2) {
        if !(w[0].breakpoint < w[1].breakpoint) {
            return Err(DynamicsError::BadAffineTable(
                "breakpoints must be strictly increasing".into(),
            ));
        }
    }
    for p in table {
        if !(0.0..1.0).contains(&p.breakpoint) || !p.slope.is_finite() || !p.offset.is_finite() {
            return Err(DynamicsError::BadAffineTable(format!(
                "bad piece at breakpoint {}",
                p.breakpoint
            )));
        }
    }
    Ok(())
}

/// Load an affine table from CSV with header `breakpoint,slope,offset`.
pub fn load_affine_csv(reader: impl std::io::Read) -> Result<Vec<AffinePiece>, DynamicsError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut table = Vec::new();
    for row in rdr.deserialize() {
        let piece: AffinePiece = row?;
        table.push(piece);
    }
    validate_affine(&table)?;
    Ok(table)
}

/// Append-only record of (query point, returned value) pairs for one run.
#[derive(Debug, Clone, Default)]
pub struct Transcript {
    entries: Vec<(DomainPoint, DomainPoint)>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[(DomainPoint, DomainPoint)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Evaluate F at x, reduced mod 1, and record the query in the transcript.
///
/// Built-in kinds never fail. A user-supplied evaluator that leaves [0,1)
/// raises [`DynamicsError::DomainViolation`]; nothing is recorded then.
pub fn evaluate(
    f: &DynamicalMap,
    x: DomainPoint,
    transcript: &mut Transcript,
) -> Result<DomainPoint, DynamicsError> {
    let raw = x.value();
    let y = match &f.kind {
        MapKind::Rotation(a) => {
            let af = (*a.numer() as f64) / (*a.denom() as f64);
            let mut v = raw + af;
            if v >= 1.0 {
                v -= 1.0;
            }
            DomainPoint::wrap(v)
        }
        MapKind::Doubling => {
            let mut v = 2.0 * raw;
            if v >= 1.0 {
                v -= 1.0;
            }
            DomainPoint(v)
        }
        MapKind::Identity => x,
        MapKind::AffinePiecewise(table) => {
            let piece = table
                .iter()
                .rev()
                .find(|p| p.breakpoint <= raw)
                .expect("validated table starts at 0");
            DomainPoint::wrap(piece.slope * raw + piece.offset)
        }
        MapKind::UserSupplied(eval) => {
            let v = eval(raw);
            if !(0.0..1.0).contains(&v) {
                return Err(DynamicsError::DomainViolation { x: raw, value: v });
            }
            DomainPoint(v)
        }
    };
    transcript.entries.push((x, y));
    Ok(y)
}

/// Outcome of a randomized linear-modulus probe.
#[derive(Debug, Clone, PartialEq)]
pub enum ModulusVerdict {
    Pass,
    Fail {
        x: f64,
        y: f64,
        input_dist: f64,
        output_dist: f64,
    },
}

/// Probe d(F(x),F(y)) <= L d(x,y) + 1e-12 on `trials` seeded random pairs.
///
/// Returns the first violating pair as the failure witness.
pub fn check_modulus(
    f: &DynamicalMap,
    l: f64,
    trials: u32,
    seed: u64,
) -> Result<ModulusVerdict, DynamicsError> {
    assert!(l > 0.0, "modulus bound must be positive");
    assert!(trials >= 1, "at least one trial");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = Transcript::new();
    for _ in 0..trials {
        let x = DomainPoint::wrap(rng.gen::<f64>());
        let y = DomainPoint::wrap(rng.gen::<f64>());
        let fx = evaluate(f, x, &mut scratch)?;
        let fy = evaluate(f, y, &mut scratch)?;
        let din = x.dist(&y);
        let dout = fx.dist(&fy);
        if dout > l * din + 1e-12 {
            return Ok(ModulusVerdict::Fail {
                x: x.value(),
                y: y.value(),
                input_dist: din,
                output_dist: dout,
            });
        }
    }
    Ok(ModulusVerdict::Pass)
}
