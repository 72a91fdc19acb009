//! Monte Carlo studies: excess-risk rates of ERM, the scaling of the
//! quantile-plug-in remainder, and the identity suite.
//!
//! Every replication draws from its own child stream of the configured seed
//! and results are collected in replication order, so outputs do not depend
//! on the number of worker threads.

pub mod config;
pub mod decomp;
pub mod families;
pub mod fit;
pub mod identities;
pub mod rates;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use config::{BandConfig, CriterionConfig, DecompConfig, GridConfig, IdentitiesConfig, RateConfig, Reference};
pub use decomp::{decomposition_study, DecompStudyResult};
pub use families::FamilyConfig;
pub use fit::SlopeFit;
pub use identities::{identity_suite, IdentityEntry, IdentityReport};
pub use rates::{rate_study, RateStudyResult};

/// One acceptance check of a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Common surface of the study results.
pub trait Study: Serialize {
    fn checks(&self) -> &[Check];

    fn warnings(&self) -> &[String];

    /// Raw replications as CSV.
    fn write_raw_csv<W: Write>(&self, writer: W) -> Result<()>;

    fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    fn failures(&self) -> Vec<&Check> {
        self.checks().iter().filter(|c| !c.passed).collect()
    }

    fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("study results serialize");
        s.push('\n');
        s
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    fn write_files(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_raw_csv(std::io::BufWriter::new(file))?;
        let json_path = dir.join(format!("{stem}.json"));
        std::fs::write(&json_path, self.summary_json()).map_err(|e| Error::io(&json_path, e))
    }
}

pub(crate) fn write_rows<W: Write, R: Serialize>(writer: W, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}
