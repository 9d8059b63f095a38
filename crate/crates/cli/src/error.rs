use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("memory estimate {estimate} bytes for M = {slots} exceeds the cap of {cap} bytes (raise NMRF_MEMORY_CAP)")]
    MemoryCap { slots: usize, estimate: u128, cap: u64 },

    #[error(transparent)]
    Core(#[from] nmrf_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for configuration problems, 2 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::MemoryCap { .. } => 1,
            CliError::Core(_) | CliError::Io { .. } => 2,
        }
    }
}
