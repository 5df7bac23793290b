use thiserror::Error;

/// Errors shared by all workbench modules.
#[derive(Debug, Error)]
pub enum VlabError {
    #[error("division by zero")]
    DivisionByZero,

    /// An operation needed information below the stored precision of a
    /// truncated element (series tail cancellation, indeterminate residue, ...).
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("element/field mismatch: {0}")]
    FieldMismatch(String),

    #[error("elements belong to different value groups")]
    GroupMismatch,

    #[error("{0} requires a field of positive characteristic")]
    CharacteristicZero(&'static str),

    #[error("polynomial is reducible (a proper factor was found)")]
    Reducible,

    #[error("no Artin-Schreier root in the ground field (trace obstruction)")]
    NoRootInGroundField,

    #[error("field is not orderable")]
    NotOrderable,

    #[error("Hensel condition violated: v(f(x0)) <= 2 v(f'(x0))")]
    HenselConditionViolated,

    #[error("precision cap reached before convergence")]
    PrecisionCapReached,

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("missing annotation: {0}")]
    MissingAnnotation(String),
}

pub type VlabResult<T> = Result<T, VlabError>;
