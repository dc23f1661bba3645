use std::fmt;
use std::process::ExitCode;

/// A failed command, carrying the exit status class.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, settings or values: exit 1.
    Usage(anyhow::Error),
    /// Unreadable, missing or malformed data: exit 2.
    Data(anyhow::Error),
    /// Training produced a non-finite loss: exit 3.
    Diverged(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Diverged(_) => 3,
        })
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "usage error: {e:#}"),
            Failure::Data(e) => write!(f, "data error: {e:#}"),
            Failure::Diverged(e) => write!(f, "training diverged: {e:#}"),
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;

pub trait ResultExt<T> {
    fn usage(self) -> CmdResult<T>;
    fn data(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn usage(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn data(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Data(e.into()))
    }
}
