use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HopfError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not infinitesimally symplectic (residual {0:.3e})")]
    NotHamiltonian(f64),
    #[error("invalid symplectic form: {0}")]
    InvalidForm(String),
    #[error("eigenvalue clustering ambiguous: clusters at distance {0:.3e}")]
    ClusteringAmbiguity(f64),
    #[error("frequency {0} is not resonant with the spectrum")]
    NotResonant(f64),
    #[error("resonance space is trivial")]
    EmptyKernel,
    #[error("H1_VIOLATION: {0}")]
    H1Violation(String),
    #[error("H3_VIOLATION: {0}")]
    H3Violation(String),
    #[error("NONCONVERGENT: {0}")]
    NonConvergent(String),
    #[error("BLOCK_STRUCTURE_VIOLATION: {0}")]
    BlockStructureViolation(String),
    #[error("unsupported jet order {0} (maximum 4)")]
    UnsupportedOrder(usize),
    #[error("homological equation residual {0:.3e}")]
    HomologicalResidual(f64),
    #[error("FIT_RESIDUAL_EXCEEDED: {0:.3e}")]
    FitResidualExceeded(f64),
    #[error("NO_ROOT: {0}")]
    NoRoot(String),
    #[error("RHO_SINGULAR: rho = {0:.3e}")]
    RhoSingular(f64),
    #[error("NEWTON_DIVERGED: {0}")]
    NewtonDiverged(String),
    #[error("SECTION_DEGENERATE: {0}")]
    SectionDegenerate(String),
    #[error("DEGENERATE_COEFFICIENTS: {0}")]
    DegenerateCoefficients(String),
    #[error("CONDITION_VIOLATED: {0}")]
    ConditionViolated(String),
    #[error("RANK_DEFICIENT: {0}")]
    RankDeficient(String),
    #[error("not an isotropy subgroup: {0}")]
    NotIsotropy(String),
    #[error("parity violation: {0}")]
    ParityViolation(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("symmetry violated: {0}")]
    NotInvariant(String),
    #[error("Noether check failed: {0:.3e}")]
    NoetherViolation(f64),
    #[error("H4_VIOLATION: {0}")]
    H4Violation(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl HopfError {
    /// Errors that indicate a failed hypothesis (H1-H4) rather than a bug or bad input.
    pub fn is_hypothesis_failure(&self) -> bool {
        matches!(
            self,
            HopfError::H1Violation(_)
                | HopfError::H3Violation(_)
                | HopfError::H4Violation(_)
                | HopfError::NoRoot(_)
                | HopfError::FitResidualExceeded(_)
        )
    }

    pub fn code(&self) -> &'static str {
        match self {
            HopfError::DimensionMismatch(_) => "DIMENSION_MISMATCH",
            HopfError::NotHamiltonian(_) => "NOT_HAMILTONIAN",
            HopfError::InvalidForm(_) => "INVALID_FORM",
            HopfError::ClusteringAmbiguity(_) => "CLUSTERING_AMBIGUITY",
            HopfError::NotResonant(_) => "NOT_RESONANT",
            HopfError::EmptyKernel => "EMPTY_KERNEL",
            HopfError::H1Violation(_) => "H1_VIOLATION",
            HopfError::H3Violation(_) => "H3_VIOLATION",
            HopfError::NonConvergent(_) => "NONCONVERGENT",
            HopfError::BlockStructureViolation(_) => "BLOCK_STRUCTURE_VIOLATION",
            HopfError::UnsupportedOrder(_) => "UNSUPPORTED_ORDER",
            HopfError::HomologicalResidual(_) => "HOMOLOGICAL_RESIDUAL",
            HopfError::FitResidualExceeded(_) => "FIT_RESIDUAL_EXCEEDED",
            HopfError::NoRoot(_) => "NO_ROOT",
            HopfError::RhoSingular(_) => "RHO_SINGULAR",
            HopfError::NewtonDiverged(_) => "NEWTON_DIVERGED",
            HopfError::SectionDegenerate(_) => "SECTION_DEGENERATE",
            HopfError::DegenerateCoefficients(_) => "DEGENERATE_COEFFICIENTS",
            HopfError::ConditionViolated(_) => "CONDITION_VIOLATED",
            HopfError::RankDeficient(_) => "RANK_DEFICIENT",
            HopfError::NotIsotropy(_) => "NOT_ISOTROPY",
            HopfError::ParityViolation(_) => "PARITY_VIOLATION",
            HopfError::InvalidRotation(_) => "INVALID_ROTATION",
            HopfError::NotInvariant(_) => "NOT_INVARIANT",
            HopfError::NoetherViolation(_) => "NOETHER_VIOLATION",
            HopfError::H4Violation(_) => "H4_VIOLATION",
            HopfError::Invalid(_) => "INVALID_INPUT",
        }
    }
}

pub type Result<T> = std::result::Result<T, HopfError>;
