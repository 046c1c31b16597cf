use std::net::SocketAddr;
use std::path::PathBuf;

use adlsim_core::gateway::{Credential, DEFAULT_BASE_URL, DEFAULT_MODEL_ID};
use adlsim_core::prompt::DEFAULT_WINDOW;
use adlsim_core::session::DEFAULT_MAX_TURNS;
use thiserror::Error;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "data";

/// Service configuration, read from `ADLSIM_*` environment variables.
#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: SocketAddr,
    pub data_dir: PathBuf,
    /// Offline deterministic backend instead of the live provider.
    pub mock: bool,
    pub api_base_url: String,
    pub credential: Option<Credential>,
    pub model: String,
    /// When set, every `/api` request must present this token.
    pub access_token: Option<String>,
    pub max_turns: u32,
    pub window: usize,
    pub plans_file: Option<PathBuf>,
    pub cors_origin: Option<String>,
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid value for {var}: {reason}")]
pub struct ConfigError {
    pub var: &'static str,
    pub reason: String,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.parse().expect("valid default address"),
            data_dir: PathBuf::from(DEFAULT_DATA_DIR),
            mock: false,
            api_base_url: DEFAULT_BASE_URL.to_owned(),
            credential: None,
            model: DEFAULT_MODEL_ID.to_owned(),
            access_token: None,
            max_turns: DEFAULT_MAX_TURNS,
            window: DEFAULT_WINDOW,
            plans_file: None,
            cors_origin: None,
            ui_dir: None,
        }
    }
}

fn parse_bool(var: &'static str, v: &str) -> Result<bool, ConfigError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" | "" => Ok(false),
        _ => Err(ConfigError { var, reason: format!("`{v}` is not a boolean") }),
    }
}

fn parse_positive<T: std::str::FromStr + PartialOrd + Default>(var: &'static str, v: &str) -> Result<T, ConfigError> {
    match v.trim().parse::<T>() {
        Ok(n) if n > T::default() => Ok(n),
        _ => Err(ConfigError { var, reason: format!("`{v}` is not a positive integer") }),
    }
}

impl ServerConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Builds a configuration from any key lookup; unset or blank keys keep
    /// their defaults.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        let mut cfg = Self::default();
        if let Some(v) = get("ADLSIM_BIND") {
            cfg.bind = v.trim().parse().map_err(|_| ConfigError { var: "ADLSIM_BIND", reason: format!("`{v}` is not host:port") })?;
        }
        if let Some(v) = get("ADLSIM_DATA_DIR") {
            cfg.data_dir = PathBuf::from(v);
        }
        if let Some(v) = get("ADLSIM_MOCK") {
            cfg.mock = parse_bool("ADLSIM_MOCK", &v)?;
        }
        if let Some(v) = get("ADLSIM_API_BASE_URL") {
            cfg.api_base_url = v.trim().to_owned();
        }
        cfg.credential = get("ADLSIM_API_KEY").and_then(Credential::new);
        if let Some(v) = get("ADLSIM_MODEL") {
            cfg.model = v.trim().to_owned();
        }
        cfg.access_token = get("ADLSIM_ACCESS_TOKEN").map(|v| v.trim().to_owned());
        if let Some(v) = get("ADLSIM_MAX_TURNS") {
            cfg.max_turns = parse_positive("ADLSIM_MAX_TURNS", &v)?;
        }
        if let Some(v) = get("ADLSIM_WINDOW") {
            cfg.window = parse_positive("ADLSIM_WINDOW", &v)?;
        }
        cfg.plans_file = get("ADLSIM_PLANS_FILE").map(PathBuf::from);
        cfg.cors_origin = get("ADLSIM_CORS_ORIGIN").map(|v| v.trim().to_owned());
        cfg.ui_dir = get("ADLSIM_UI_DIR").map(PathBuf::from);
        Ok(cfg)
    }
}
