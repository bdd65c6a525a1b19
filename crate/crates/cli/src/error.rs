use std::path::PathBuf;

use infogen_core::counterexample::CexError;
use infogen_core::distill::DistillError;
use infogen_core::fcmi::FcmiError;
use infogen_core::kernels::KernelError;
use infogen_core::labelnoise::NoiseError;
use infogen_core::netkit::NetError;
use infogen_core::numkit::NumError;
use infogen_core::sampleinfo::InfoError;
use infogen_core::synth::SynthError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Write { .. } => 1,
        }
    }

    pub fn config(msg: impl ToString) -> Self {
        CliError::Config(msg.to_string())
    }
}

fn config(e: impl ToString) -> CliError {
    CliError::Config(e.to_string())
}

fn numeric(e: impl ToString) -> CliError {
    CliError::Numeric(e.to_string())
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        numeric(e)
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Diverged { .. } => numeric(e),
            _ => config(e),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::Net(e) => e.into(),
            KernelError::Num(e) => e.into(),
            KernelError::DegenerateProbes => numeric(e),
            _ => config(e),
        }
    }
}

impl From<InfoError> for CliError {
    fn from(e: InfoError) -> Self {
        match e {
            InfoError::Kernel(e) => e.into(),
            InfoError::Num(e) => e.into(),
            InfoError::Singular { .. } | InfoError::SingularSmoothing => numeric(e),
            _ => config(e),
        }
    }
}

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        match e {
            NoiseError::Net(e) => e.into(),
            _ => config(e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Net(e) => e.into(),
            SynthError::Noise(e) => e.into(),
            _ => config(e),
        }
    }
}

impl From<FcmiError> for CliError {
    fn from(e: FcmiError) -> Self {
        match e {
            FcmiError::Net(e) => e.into(),
            FcmiError::Synth(e) => e.into(),
            FcmiError::AllRunsFailed(_) => numeric(e),
            _ => config(e),
        }
    }
}

impl From<CexError> for CliError {
    fn from(e: CexError) -> Self {
        match e {
            CexError::Invariant(_) => numeric(e),
            _ => config(e),
        }
    }
}

impl From<DistillError> for CliError {
    fn from(e: DistillError) -> Self {
        match e {
            DistillError::Kernel(e) => e.into(),
            DistillError::Net(e) => e.into(),
            DistillError::Num(e) => e.into(),
            _ => config(e),
        }
    }
}
