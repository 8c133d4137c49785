use std::fmt;

/// Failure classes of the command line, each with its own exit code.
#[derive(Debug)]
pub enum Failure {
    Schema(String),
    MalformedCsv(String),
    NonFinite(String),
    NoResults(String),
    Run(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Run(_) => 1,
            Failure::Schema(_) => 2,
            Failure::MalformedCsv(_) => 3,
            Failure::NonFinite(_) => 4,
            Failure::NoResults(_) => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Run(_) => "run",
            Failure::Schema(_) => "schema",
            Failure::MalformedCsv(_) => "malformed-csv",
            Failure::NonFinite(_) => "non-finite-column",
            Failure::NoResults(_) => "no-results",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Failure::Schema(m)
            | Failure::MalformedCsv(m)
            | Failure::NonFinite(m)
            | Failure::NoResults(m)
            | Failure::Run(m) => m,
        };
        f.write_str(msg)
    }
}

impl From<citlab::Error> for Failure {
    fn from(e: citlab::Error) -> Self {
        use citlab::Error as E;
        match e {
            E::MalformedCsv(_) | E::Csv(_) | E::InvalidDataset(_) => Failure::MalformedCsv(e.to_string()),
            E::NonFiniteColumn { .. } => Failure::NonFinite(e.to_string()),
            E::InvalidArgument(_) => Failure::Schema(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;
