//! The CLI workspace: a directory holding the deployment's CA roster.
//!
//! CAs are stored as (seed, organization list) and re-derived
//! deterministically, so certificates issued across invocations keep
//! verifying. The default location is `$CORRAL_HOME`, falling back to
//! `.corral`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use corral_core::identity::CertificateAuthority;

use crate::CliError;

pub const HOME_ENV: &str = "CORRAL_HOME";
const ROSTER_FILE: &str = "cas.toml";

#[derive(Debug, Serialize, Deserialize)]
pub struct CaRoster {
    pub seed: u64,
    pub orgs: Vec<String>,
}

impl Default for CaRoster {
    fn default() -> Self {
        Self {
            seed: 7,
            orgs: vec!["Org1".to_string(), "Org2".to_string()],
        }
    }
}

pub fn resolve_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(HOME_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(".corral"))
}

/// Load the roster, creating a default one (Org1, Org2) on first use.
pub fn load_or_init(dir: &Path) -> Result<CaRoster, CliError> {
    let path = dir.join(ROSTER_FILE);
    if path.exists() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::runtime(format!("reading {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    } else {
        let roster = CaRoster::default();
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime(format!("creating {}: {e}", dir.display())))?;
        let text = toml::to_string_pretty(&roster).expect("roster serializes");
        std::fs::write(&path, text)
            .map_err(|e| CliError::runtime(format!("writing {}: {e}", path.display())))?;
        Ok(roster)
    }
}

/// Deterministically re-derive the CA for `org`, which must be on the
/// roster.
pub fn ca_for(roster: &CaRoster, org: &str) -> Result<CertificateAuthority, CliError> {
    if !roster.orgs.iter().any(|o| o == org) {
        return Err(CliError::usage(format!(
            "unknown org {org:?}; workspace knows {:?}",
            roster.orgs
        )));
    }
    CertificateAuthority::from_seed(org, roster.seed)
        .map_err(|e| CliError::runtime(e.to_string()))
}
