//! Command failures tagged with their exit code.

use std::fmt;
use std::path::Path;

/// A command failure. The variant decides the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, missing or malformed inputs, invalid settings.
    Usage(anyhow::Error),
    /// The generation endpoint was unreachable or kept failing.
    External(anyhow::Error),
    /// Anything else, such as a diverged training run.
    Internal(anyhow::Error),
}

pub type CmdResult<T> = Result<T, Failure>;

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(anyhow::anyhow!("{msg}"))
    }

    pub fn external(msg: impl fmt::Display) -> Self {
        Failure::External(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::External(_) => 3,
            Failure::Internal(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::External(e) | Failure::Internal(e) => e,
        }
    }

    /// Prefixes the message with `context`, keeping the exit code.
    pub fn context(self, context: impl fmt::Display + Send + Sync + 'static) -> Self {
        match self {
            Failure::Usage(e) => Failure::Usage(e.context(context)),
            Failure::External(e) => Failure::External(e.context(context)),
            Failure::Internal(e) => Failure::Internal(e.context(context)),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error())
    }
}

fn is_computational(e: &gradrank_core::Error) -> bool {
    use gradrank_core::Error;
    match e {
        Error::Diverged { .. } | Error::NonFinite(_) => true,
        Error::Row { source, .. } => is_computational(source),
        _ => false,
    }
}

impl From<gradrank_core::Error> for Failure {
    fn from(e: gradrank_core::Error) -> Self {
        if is_computational(&e) {
            Failure::Internal(e.into())
        } else {
            Failure::Usage(e.into())
        }
    }
}

impl From<gradrank_datagen::Error> for Failure {
    fn from(e: gradrank_datagen::Error) -> Self {
        if e.is_external() {
            Failure::External(e.into())
        } else {
            Failure::Usage(e.into())
        }
    }
}

/// Fails with a usage error unless `path` is an existing file.
pub fn require_file(path: &Path, what: &str) -> CmdResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{what} {} does not exist", path.display())))
    }
}

/// Writes `contents`, creating parent directories.
pub fn write_output(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult<()> {
    let wrap = |e: std::io::Error| Failure::usage(format!("writing {}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    std::fs::write(path, contents).map_err(wrap)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl serde::Serialize) -> CmdResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.into()))?;
    text.push('\n');
    write_output(path, text)
}
