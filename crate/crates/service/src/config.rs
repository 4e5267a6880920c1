use std::path::PathBuf;
use std::str::FromStr;

use crate::error::ServiceError;

pub const ENV_DATA_DIR: &str = "POLICYLOOP_DATA_DIR";
pub const ENV_REGISTRY_DIR: &str = "POLICYLOOP_REGISTRY_DIR";
pub const ENV_PORT: &str = "POLICYLOOP_PORT";
pub const ENV_AUTOTRAIN_N: &str = "POLICYLOOP_AUTOTRAIN_N";
pub const ENV_ROLE: &str = "POLICYLOOP_ROLE";
pub const ENV_EXTRACTION_URL: &str = "POLICYLOOP_EXTRACTION_URL";

pub const DEFAULT_PORT: u16 = 8080;

/// Which half of the system this process runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Role {
    /// Annotation API and extraction in one process.
    #[default]
    Combined,
    /// Annotation API only; extraction is reached over HTTP.
    Annotation,
    /// Extraction API only (`/internal/...`).
    Extraction,
}

impl FromStr for Role {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "combined" => Ok(Role::Combined),
            "annotation" => Ok(Role::Annotation),
            "extraction" => Ok(Role::Extraction),
            other => Err(ServiceError::Config(format!(
                "unknown role `{other}` (expected combined, annotation or extraction)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub registry_dir: PathBuf,
    pub port: u16,
    /// Overrides the registry's retraining threshold.
    pub autotrain_every: Option<usize>,
    pub role: Role,
    pub extraction_url: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data_dir: PathBuf::from("data"),
            registry_dir: PathBuf::from("registry"),
            port: DEFAULT_PORT,
            autotrain_every: None,
            role: Role::Combined,
            extraction_url: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ServiceError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        let mut c = ServiceConfig::default();
        if let Some(v) = get(ENV_DATA_DIR) {
            c.data_dir = v.into();
        }
        if let Some(v) = get(ENV_REGISTRY_DIR) {
            c.registry_dir = v.into();
        }
        if let Some(v) = get(ENV_PORT) {
            c.port = v
                .parse()
                .map_err(|_| ServiceError::Config(format!("{ENV_PORT}={v} is not a port number")))?;
        }
        if let Some(v) = get(ENV_AUTOTRAIN_N) {
            c.autotrain_every = Some(
                v.parse()
                    .map_err(|_| ServiceError::Config(format!("{ENV_AUTOTRAIN_N}={v} is not a count")))?,
            );
        }
        if let Some(v) = get(ENV_ROLE) {
            c.role = v.parse()?;
        }
        c.extraction_url = get(ENV_EXTRACTION_URL);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.role == Role::Annotation && self.extraction_url.is_none() {
            return Err(ServiceError::Config(format!(
                "role `annotation` needs {ENV_EXTRACTION_URL}"
            )));
        }
        Ok(())
    }
}
