use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Input(String),
    /// Data rejected by a Paley-Wiener / summability gate.
    #[error("gate rejected data: {0}")]
    Gate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("pole of the Weyl function at lambda = {0}")]
    Pole(String),
    #[error("step {step}, vertex v{vertex}: {source}")]
    Step {
        step: &'static str,
        vertex: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn gate(msg: impl Into<String>) -> Self {
        Error::Gate(msg.into())
    }

    pub fn at(self, step: &'static str, vertex: usize) -> Self {
        Error::Step { step, vertex, source: Box::new(self) }
    }

    /// Process exit code: 2 input, 3 gate, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Io(_) => 2,
            Error::Gate(_) => 3,
            Error::Numerical(_) | Error::Pole(_) => 4,
            Error::Step { source, .. } => source.exit_code(),
        }
    }

    pub fn is_gate(&self) -> bool {
        self.exit_code() == 3
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
