use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data or arguments.
    Input,
    /// Estimation could not proceed on otherwise valid input.
    Degenerate,
    /// I/O or serialization failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unbalanced panel: unit `{unit}` has no observation for period {period}")]
    UnbalancedPanel { unit: String, period: i64 },
    #[error("non-monotone treatment for unit `{unit}`: treatment switches off at period {period}")]
    NonMonotoneTreatment { unit: String, period: i64 },
    #[error("unit `{unit}` is treated in the first period {period}")]
    TreatedInFirstPeriod { unit: String, period: i64 },
    #[error("duplicate cell: unit `{unit}` appears twice at period {period}")]
    DuplicateCell { unit: String, period: i64 },
    #[error("covariate `{covariate}` varies over time for unit `{unit}`")]
    TimeVaryingCovariate { unit: String, covariate: String },
    #[error("expected exactly 2 periods, found {0}")]
    NotTwoPeriods(usize),
    #[error("no treated units")]
    NoTreatedUnits,
    #[error("no control units")]
    NoControlUnits,
    #[error("period {0} does not exist in the panel")]
    UnknownPeriod(i64),
    #[error("empty treated cohort for g = {0}")]
    EmptyTreatedCohort(i64),
    #[error("empty control group for g = {g}, t_eval = {t_eval}")]
    EmptyControl { g: i64, t_eval: i64 },
    #[error("invalid group-time cell: {0}")]
    InvalidCell(String),
    #[error("singular design matrix (reciprocal condition {rcond:.3e})")]
    SingularDesign { rcond: f64 },
    #[error("only one class present in the binary target")]
    OneClassOnly,
    #[error("fold assignment left a fold without both classes after {attempts} draws")]
    FoldDegenerate { attempts: usize },
    #[error("degenerate treatment groups: {0}")]
    DegenerateGroups(String),
    #[error("nuisance fit carries no treated-outcome predictions")]
    MissingG1,
    #[error("residual outcome variance is zero; bias bound is degenerate")]
    DegenerateSigma,
    #[error("rho must be non-zero for robustness values")]
    RhoZero,
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("no pre-treatment cells available")]
    NoPrePeriods,
    #[error("confounding calibration did not converge after {0} outer iterations")]
    CalibrationDiverged(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            SingularDesign { .. }
            | OneClassOnly
            | FoldDegenerate { .. }
            | DegenerateGroups(_)
            | MissingG1
            | DegenerateSigma
            | CalibrationDiverged(_) => ErrorKind::Degenerate,
            Io(_) => ErrorKind::Io,
            _ => ErrorKind::Input,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            SchemaMismatch(_) => "SchemaMismatch",
            UnbalancedPanel { .. } => "UnbalancedPanel",
            NonMonotoneTreatment { .. } => "NonMonotoneTreatment",
            TreatedInFirstPeriod { .. } => "TreatedInFirstPeriod",
            DuplicateCell { .. } => "DuplicateCell",
            TimeVaryingCovariate { .. } => "TimeVaryingCovariate",
            NotTwoPeriods(_) => "NotTwoPeriods",
            NoTreatedUnits => "NoTreatedUnits",
            NoControlUnits => "NoControlUnits",
            UnknownPeriod(_) => "UnknownPeriod",
            EmptyTreatedCohort(_) => "EmptyTreatedCohort",
            EmptyControl { .. } => "EmptyControl",
            InvalidCell(_) => "InvalidCell",
            SingularDesign { .. } => "SingularDesign",
            OneClassOnly => "OneClassOnly",
            FoldDegenerate { .. } => "FoldDegenerate",
            DegenerateGroups(_) => "DegenerateGroups",
            MissingG1 => "MissingG1",
            DegenerateSigma => "DegenerateSigma",
            RhoZero => "RhoZero",
            UnknownCovariate(_) => "UnknownCovariate",
            NoPrePeriods => "NoPrePeriods",
            CalibrationDiverged(_) => "CalibrationDiverged",
            InvalidArgument(_) => "InvalidArgument",
            Io(_) => "Io",
            Csv(_) => "Csv",
            Json(_) => "Json",
        }
    }
}
