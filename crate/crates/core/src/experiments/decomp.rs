//! Scaling of the remainder of the linearized quantile plug-in.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{decompose, sigma_sq, OracleValues};
use crate::error::{Error, Result};
use crate::oracle::{zn_variance, ScoreLaw, SyntheticModel};
use crate::rng::SeedSpec;

use super::config::DecompConfig;
use super::fit::{log_log_slope, mean_se, median, sample_variance, SlopeFit};
use super::{write_rows, Check, Study};

/// Agreement required between the closed-form `sigma^2` and direct
/// integration of the variance.
const SIGMA_ROUTE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompReplication {
    pub n: usize,
    pub rep: usize,
    pub k_hat: f64,
    pub z_n: f64,
    pub lambda_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompPoint {
    pub n: usize,
    pub median_abs_lambda: f64,
    pub mean_lambda: f64,
    pub mean_z: f64,
    pub mean_z_se: Option<f64>,
    /// `n` times the sample variance of `Z_n`.
    pub n_var_z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompStudyResult {
    pub config: DecompConfig,
    pub k: f64,
    pub k_prime: f64,
    pub q: f64,
    pub sigma_sq: f64,
    /// `sigma^2` by direct integration.
    pub sigma_sq_direct: f64,
    pub per_n: Vec<DecompPoint>,
    pub lambda_slope: Option<SlopeFit>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub replications: Vec<DecompReplication>,
}

impl Study for DecompStudyResult {
    fn checks(&self) -> &[Check] {
        &self.checks
    }

    fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn write_raw_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_rows(writer, &self.replications)
    }
}

pub fn decomposition_study(config: &DecompConfig) -> Result<DecompStudyResult> {
    config.grid.validate()?;
    let v = config.v;
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::Config(format!("v = {v} outside (0, 1]")));
    }
    let model = SyntheticModel::from_spec(config.model.clone())?;
    let s = &config.scorer;
    let law = ScoreLaw::new(&model, s)?;
    let (k, q) = law.k(v)?;
    let k_prime = law.k_prime(v)?;
    let sigma = sigma_sq(&v, &k, &k_prime)?;
    let sigma_direct = zn_variance(&model, s, v)?;
    let oracle = OracleValues { k, k_prime, q };

    let seeds = SeedSpec::new(config.grid.seed);
    let mut replications = Vec::new();
    let mut per_n = Vec::new();
    for (ni, &n) in config.grid.n.iter().enumerate() {
        let level = seeds.derive(ni as u64);
        let reps: Vec<DecompReplication> = (0..config.grid.reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = level.child_stream(rep as u64);
                let data = model.sample(n, &mut rng)?;
                let scores = s.score_dataset(&data)?;
                let d = decompose(&scores, data.labels(), &v, &oracle)?;
                Ok(DecompReplication {
                    n,
                    rep,
                    k_hat: d.k_hat,
                    z_n: d.z_n,
                    lambda_n: d.lambda_n,
                })
            })
            .collect::<Result<_>>()?;
        let lambda: Vec<f64> = reps.iter().map(|r| r.lambda_n).collect();
        let abs_lambda: Vec<f64> = lambda.iter().map(|l| l.abs()).collect();
        let z: Vec<f64> = reps.iter().map(|r| r.z_n).collect();
        let (mean_z, mean_z_se) = mean_se(&z);
        per_n.push(DecompPoint {
            n,
            median_abs_lambda: median(&abs_lambda),
            mean_lambda: mean_se(&lambda).0,
            mean_z,
            mean_z_se,
            n_var_z: sample_variance(&z).map(|var| var * n as f64),
        });
        replications.extend(reps);
    }

    let ns: Vec<f64> = per_n.iter().map(|p| p.n as f64).collect();
    let med: Vec<f64> = per_n.iter().map(|p| p.median_abs_lambda).collect();
    let lambda_slope = log_log_slope(&ns, &med);

    let band = &config.band;
    let sigma_gap = (sigma - sigma_direct).abs();
    let mut checks = vec![Check::new(
        "sigma_sq_routes",
        sigma_gap <= SIGMA_ROUTE_TOL,
        format!("closed form {sigma:.8} vs integrated {sigma_direct:.8}"),
    )];
    let mut warnings = Vec::new();
    if config.grid.reps < 30 {
        warnings.push(format!("only {} replications per sample size", config.grid.reps));
    }
    let degenerate = v >= 1.0;
    if degenerate {
        warnings.push("v = 1: the plug-in quantile is the sample maximum; no scaling claims".into());
    } else {
        match &lambda_slope {
            Some(fit) => checks.push(Check::new(
                "lambda_slope_band",
                fit.slope >= band.lambda_slope[0] && fit.slope <= band.lambda_slope[1],
                format!(
                    "slope {:.4} vs band [{}, {}]",
                    fit.slope, band.lambda_slope[0], band.lambda_slope[1]
                ),
            )),
            None => warnings.push("remainder slope undefined".into()),
        }
        for p in per_n.iter().filter(|p| p.n >= band.sigma_min_n) {
            if let Some(nv) = p.n_var_z {
                let rel = (nv - sigma).abs() / sigma;
                checks.push(Check::new(
                    format!("n_var_z_n{}", p.n),
                    nv > 0.0 && rel <= band.sigma_rel_tol,
                    format!("n Var(Z) = {nv:.5} vs sigma^2 = {sigma:.5} (relative gap {rel:.4})"),
                ));
            }
        }
    }

    Ok(DecompStudyResult {
        config: config.clone(),
        k,
        k_prime,
        q,
        sigma_sq: sigma,
        sigma_sq_direct: sigma_direct,
        per_n,
        lambda_slope,
        checks,
        warnings,
        replications,
    })
}
