use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("multiplicity pattern changed between samples: {first:?} vs {other:?}")]
    MultiplicityDrift { first: Vec<usize>, other: Vec<usize> },
    #[error("eigenvalue {value} is not semisimple (rank deficit {deficit})")]
    NotSemisimple { value: String, deficit: usize },
    #[error("boundary is characteristic: |det A_d(0)| = {det:e}")]
    CharacteristicBoundary { det: f64 },
    #[error("frequency is glancing or singular: {0}")]
    GlancingOrSingular(String),
    #[error("uniform stability fails at zeta = {zeta:?} (sigma_min = {sigma_min:e})")]
    StabilityFail { zeta: Vec<f64>, sigma_min: f64 },
    #[error("glancing mode omega = {omega} (d lambda / d xi_d = {slope:e})")]
    GlancingMode { omega: f64, slope: f64 },
    #[error("irregular boundary frequency: {0}")]
    IrregularFrequency(String),
    #[error("mode {0} is elliptic; group velocity undefined")]
    NotHyperbolicMode(usize),
    #[error("degenerate boundary basis (sigma_min = {sigma_min:e})")]
    DegenerateBasis { sigma_min: f64 },
    #[error("characteristic multi-index outside the indexed bound: {0:?}")]
    UnindexedMode(Vec<i32>),
    #[error("resonance classification contradiction: {0}")]
    ClassificationContradiction(String),
    #[error("no convergence after {iterations} iterations (last change {last_change:e}); try T0 <= {t0_suggestion}")]
    NoConvergence { iterations: usize, last_change: f64, t0_suggestion: f64 },
    #[error("CFL violation: {0}")]
    CflViolation(String),
    #[error("missing trace: {0}")]
    MissingTrace(String),
    #[error("support leak: max |sigma| = {0:e} in t <= 0")]
    SupportLeak(f64),
    #[error("boundary residual nonzero: {0:e}")]
    BoundaryResidualNonzero(f64),
    #[error("corrector right-hand side not annihilated by the flat projector (defect {0:e})")]
    NotSolvable(f64),
    #[error("near-singular symbol at alpha {alpha:?} (condition {cond:e})")]
    NearSingular { alpha: Vec<i32>, cond: f64 },
    #[error("solution blew up (norm {0:e})")]
    BlowUp(f64),
    #[error("multi-index outside the sign lattice: {0:?}")]
    SpectrumViolation(Vec<i32>),
}

pub type Result<T> = std::result::Result<T, Error>;
