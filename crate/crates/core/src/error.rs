use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sensing configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid antenna position vector: {0}")]
    InvalidApv(String),

    #[error("invalid target parameters: {0}")]
    InvalidTarget(String),

    #[error(
        "infeasible geometry: {n} antennas at spacing {spacing} need {needed} > segment {segment}"
    )]
    InfeasibleGeometry {
        n: usize,
        spacing: f64,
        needed: f64,
        segment: f64,
    },

    #[error("degenerate array: all antennas coincide, AoA is unidentifiable")]
    DegenerateArray,

    #[error("singular FIM (normalized determinant {ratio:e}); joint estimation needs at least 3 distinct positions")]
    SingularFim { ratio: f64 },

    #[error("no feasible sampling point for antenna {antenna}")]
    EmptyFeasibleSet { antenna: usize },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("invalid sampling grid: {0}")]
    InvalidGrid(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config validation failed on `{field}`: {message}")]
    ConfigValidation { field: String, message: String },

    #[error("missing scheme `{0}` in sweep records")]
    MissingScheme(String),

    #[error("{context}: {source}")]
    Annotated {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short stable name of the error kind, used for CLI diagnostics.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidApv(_) => "InvalidApv",
            Error::InvalidTarget(_) => "InvalidTarget",
            Error::InfeasibleGeometry { .. } => "InfeasibleGeometry",
            Error::DegenerateArray => "DegenerateArray",
            Error::SingularFim { .. } => "SingularFim",
            Error::EmptyFeasibleSet { .. } => "EmptyFeasibleSet",
            Error::EigenNoConvergence { .. } => "EigenNoConvergence",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::ConfigParse { .. } => "ConfigParse",
            Error::ConfigValidation { .. } => "ConfigValidation",
            Error::MissingScheme(_) => "MissingScheme",
            Error::Annotated { source, .. } => source.class(),
            Error::Io(_) => "Io",
        }
    }

    pub(crate) fn annotate(self, context: impl Into<String>) -> Error {
        Error::Annotated {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
