//! Excess-risk rate of ERM as the sample grows.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::erm::{Criterion, ErmProblem, FamilySpec};
use crate::error::{Error, Result};
use crate::model::ScoringModel;
use crate::oracle::{bayes_report, optimal_scoring, true_report, SyntheticModel, TrueQuantities};
use crate::rate::Rate;
use crate::rng::SeedSpec;

use super::config::{RateConfig, Reference};
use super::fit::{increases, log_log_slope, mean_se, SlopeFit};
use super::{write_rows, Check, Study};

/// Negative excess values above this are attributed to quadrature error and
/// clipped to zero.
pub const CLIP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReplication {
    pub n: usize,
    pub rep: usize,
    /// Family index of the selected scorer (finite families).
    pub selected: Option<usize>,
    pub empirical: f64,
    pub true_value: f64,
    pub excess: f64,
    pub clipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub mean_excess: f64,
    pub se: Option<f64>,
    pub clipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateStudyResult {
    pub config: RateConfig,
    pub family_size: Option<usize>,
    /// True criterion value of the reference scorer.
    pub reference_value: f64,
    /// True excess of each family member (finite families).
    pub member_excess: Option<Vec<f64>>,
    pub per_n: Vec<RatePoint>,
    pub slope: Option<SlopeFit>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub replications: Vec<RateReplication>,
}

impl Study for RateStudyResult {
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

/// Population value of the criterion.
pub fn criterion_truth(criterion: Criterion, t: &TrueQuantities) -> f64 {
    match criterion {
        Criterion::LHat => t.l,
        Criterion::MHat => t.m,
        Criterion::LocAuc => t.locauc,
        Criterion::WHat => t.w,
    }
}

fn truth_of(model: &SyntheticModel, s: &ScoringModel, criterion: Criterion, u0: &Rate<f64>) -> Result<f64> {
    Ok(criterion_truth(criterion, &true_report(model, s, u0)?))
}

/// Excess in the direction of the criterion, clipped near zero.
fn excess(criterion: Criterion, value: f64, reference: f64) -> Result<(f64, bool)> {
    let e = if criterion.maximize() {
        reference - value
    } else {
        value - reference
    };
    if e >= 0.0 {
        Ok((e, false))
    } else if e >= -CLIP_TOL {
        Ok((0.0, true))
    } else {
        Err(Error::Consistency {
            context: "scorer beats the reference".into(),
            difference: -e,
            tolerance: CLIP_TOL,
        })
    }
}

pub fn rate_study(config: &RateConfig) -> Result<RateStudyResult> {
    config.grid.validate()?;
    let model = SyntheticModel::from_spec(config.model.clone())?;
    let u0 = Rate::new(config.criterion.u0)?;
    let criterion = config.criterion.name;
    let family = config.family.build(model.support())?;

    let members = match &family {
        FamilySpec::Finite { members } => Some(members.clone()),
        _ => None,
    };
    let member_truth: Option<Vec<f64>> = members
        .as_ref()
        .map(|ms| {
            ms.par_iter()
                .map(|s| truth_of(&model, s, criterion, &u0))
                .collect::<Result<_>>()
        })
        .transpose()?;

    let reference_value = match (config.criterion.reference, &member_truth) {
        (Reference::Family, Some(t)) => {
            let pick = if criterion.maximize() { f64::max } else { f64::min };
            t.iter().copied().reduce(pick).expect("families are nonempty")
        }
        (Reference::Family, None) => {
            return Err(Error::Config("reference = \"family\" needs a finite family".into()));
        }
        (Reference::Bayes, _) if criterion == Criterion::LHat => bayes_report(&model, &u0)?.l_star,
        (Reference::Bayes, _) => truth_of(&model, &optimal_scoring(&model, &u0)?, criterion, &u0)?,
    };
    let member_excess = member_truth
        .as_ref()
        .map(|t| {
            t.iter()
                .map(|&v| excess(criterion, v, reference_value).map(|e| e.0))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;

    let budget = match (config.search.budget, &members) {
        (Some(b), _) => b,
        (None, Some(m)) => m.len(),
        (None, None) => {
            return Err(Error::Config(
                "search.budget is required for parametric families".into(),
            ))
        }
    };
    let seeds = SeedSpec::new(config.grid.seed);

    let mut replications = Vec::new();
    let mut per_n = Vec::new();
    for (ni, &n) in config.grid.n.iter().enumerate() {
        let level = seeds.derive(ni as u64);
        let reps: Vec<RateReplication> = (0..config.grid.reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = level.child_stream(rep as u64);
                let data = model.sample(n, &mut rng)?;
                let problem = ErmProblem {
                    family: family.clone(),
                    criterion,
                    u0: u0.clone(),
                    budget,
                    restarts: config.search.restarts.unwrap_or(1),
                    seed: rng.random(),
                };
                let fit = problem.solve(&data)?;
                let selected = match &fit.model {
                    ScoringModel::Member { index, .. } => Some(*index),
                    _ => None,
                };
                let true_value = match (selected, &member_truth) {
                    (Some(i), Some(t)) => t[i],
                    _ => truth_of(&model, &fit.model, criterion, &u0)?,
                };
                let (e, clipped) = excess(criterion, true_value, reference_value)?;
                Ok(RateReplication {
                    n,
                    rep,
                    selected,
                    empirical: fit.value,
                    true_value,
                    excess: e,
                    clipped,
                })
            })
            .collect::<Result<_>>()?;
        let values: Vec<f64> = reps.iter().map(|r| r.excess).collect();
        let (mean_excess, se) = mean_se(&values);
        per_n.push(RatePoint {
            n,
            mean_excess,
            se,
            clipped: reps.iter().filter(|r| r.clipped).count(),
        });
        replications.extend(reps);
    }

    let ns: Vec<f64> = per_n.iter().map(|p| p.n as f64).collect();
    let means: Vec<f64> = per_n.iter().map(|p| p.mean_excess).collect();
    let slope = log_log_slope(&ns, &means);

    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    if config.grid.reps < 30 {
        warnings.push(format!(
            "only {} replications per sample size; slopes are unreliable",
            config.grid.reps
        ));
    }
    match (&slope, &config.band) {
        (Some(fit), Some(band)) => checks.push(Check::new(
            "slope_band",
            band.contains(fit.slope),
            format!("slope {:.4} vs band [{}, {}]", fit.slope, band.slope[0], band.slope[1]),
        )),
        (None, _) => warnings.push("slope undefined (fewer than two sample sizes or a zero mean excess)".into()),
        _ => {}
    }
    if per_n.len() > 1 {
        let ups = increases(&means);
        checks.push(Check::new(
            "mean_excess_decreasing",
            ups <= 1,
            format!("{ups} increase(s) across the grid, at most 1 allowed"),
        ));
    }

    Ok(RateStudyResult {
        config: config.clone(),
        family_size: members.map(|m| m.len()),
        reference_value,
        member_excess,
        per_n,
        slope,
        checks,
        warnings,
        replications,
    })
}
