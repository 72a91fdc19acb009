//! The identity suite: population identities by quadrature, finite-sample
//! identities in exact arithmetic, and concentration of the plug-in
//! estimates.

use std::io::Write;

use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{hat_k, hat_k_via_signed_ranks, hat_l};
use crate::data::{ClassCounts, Label};
use crate::error::{Error, Result};
use crate::model::ScoringModel;
use crate::oracle::{
    bayes_report, excess_risk, optimal_scoring, true_report, BayesReport, SyntheticModel, TrueQuantities,
};
use crate::rankcrit::{full_report, hat_auc, t_wilcoxon, trunc_auc, trunc_auc_step, RankStats};
use crate::rate::{Rate, TopRate};
use crate::rng::SeedSpec;
use crate::Exact;

use super::config::IdentitiesConfig;
use super::families::random_piecewise;
use super::{write_rows, Check, Study};

/// Tolerance of the population identities and dominance relations.
pub const POPULATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Population,
    Dominance,
    Exact,
    Concentration,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityEntry {
    pub identity: String,
    pub kind: EntryKind,
    pub scorer: Option<usize>,
    pub u0: Option<f64>,
    pub sample: Option<usize>,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl IdentityEntry {
    fn new(identity: &str, kind: EntryKind, residual: f64, tolerance: f64) -> Self {
        IdentityEntry {
            identity: identity.into(),
            kind,
            scorer: None,
            u0: None,
            sample: None,
            residual,
            tolerance,
            passed: residual.abs() <= tolerance,
            detail: String::new(),
        }
    }

    /// An identity that could not be evaluated.
    fn failed(identity: &str, kind: EntryKind, err: &Error) -> Self {
        let residual = match err {
            Error::Consistency { difference, .. } => *difference,
            _ => f64::NAN,
        };
        IdentityEntry {
            passed: false,
            detail: err.to_string(),
            ..IdentityEntry::new(identity, kind, residual, 0.0)
        }
    }

    fn exact(identity: &str, residual: &Exact) -> Self {
        IdentityEntry {
            passed: residual.is_zero(),
            ..IdentityEntry::new(identity, EntryKind::Exact, residual.to_f64().unwrap_or(f64::NAN), 0.0)
        }
    }

    fn at(mut self, scorer: Option<usize>, u0: Option<f64>, sample: Option<usize>) -> Self {
        self.scorer = scorer;
        self.u0 = u0;
        self.sample = sample;
        self
    }
}

/// The eight population identities of one (model, scorer, u0) plus the
/// agreement of the two excess-risk routes.
pub fn population_identities(model: &SyntheticModel, s: &ScoringModel, u0: &Rate<f64>) -> Vec<IdentityEntry> {
    let mut out = match true_report(model, s, u0) {
        Ok(t) => residual_entries(&t),
        Err(e) => vec![IdentityEntry::failed("true_report", EntryKind::Population, &e)],
    };
    out.push(match excess_risk(model, s, u0) {
        Ok(e) => IdentityEntry::new(
            "excess_risk_routes",
            EntryKind::Population,
            e.value - e.via_risks,
            POPULATION_TOL,
        ),
        Err(e) => IdentityEntry::failed("excess_risk_routes", EntryKind::Population, &e),
    });
    out
}

fn residual_entries(t: &TrueQuantities) -> Vec<IdentityEntry> {
    t.residuals()
        .named()
        .iter()
        .map(|&(name, r)| IdentityEntry::new(name, EntryKind::Population, r, POPULATION_TOL))
        .collect()
}

/// Risk of the optimal rule by formula and by integration, and the two
/// hypothesis-testing forms of that risk.
pub fn optimal_rule_identities(model: &SyntheticModel, u0: &Rate<f64>) -> Vec<IdentityEntry> {
    let b = match bayes_report(model, u0) {
        Ok(b) => b,
        Err(e) => return vec![IdentityEntry::failed("optimal_risk_routes", EntryKind::Population, &e)],
    };
    let (p, u) = (model.p(), b.u0);
    vec![
        IdentityEntry::new(
            "optimal_risk_routes",
            EntryKind::Population,
            b.l_star_formula - b.l_star_direct,
            POPULATION_TOL,
        ),
        IdentityEntry::new(
            "optimal_risk_vs_alpha",
            EntryKind::Population,
            b.l_star - (2.0 * (1.0 - p) * b.alpha + p - u),
            POPULATION_TOL,
        ),
        IdentityEntry::new(
            "optimal_risk_vs_beta",
            EntryKind::Population,
            b.l_star - (2.0 * p * (1.0 - b.beta) - p + u),
            POPULATION_TOL,
        ),
    ]
}

/// Violations (positive parts) of the dominance of the regression function
/// in power and false-alarm rate, and of the optimal scorer in local AUC
/// and `W`.
pub fn dominance_entries(truth: &TrueQuantities, bayes: &BayesReport, optimal: &TrueQuantities) -> Vec<IdentityEntry> {
    let v = |name: &str, excess: f64| IdentityEntry::new(name, EntryKind::Dominance, excess.max(0.0), POPULATION_TOL);
    vec![
        v("power_below_optimal", truth.beta - bayes.beta),
        v("false_alarm_above_optimal", bayes.alpha - truth.alpha),
        v("locauc_below_optimal", truth.locauc - optimal.locauc),
        v("w_below_optimal", truth.w - optimal.w),
    ]
}

/// Dominance checks for one scorer, computing the references on the fly.
pub fn dominance_identities(model: &SyntheticModel, s: &ScoringModel, u0: &Rate<f64>) -> Vec<IdentityEntry> {
    let refs = bayes_report(model, u0).and_then(|b| {
        let star = optimal_scoring(model, u0)?;
        Ok((b, true_report(model, &star, u0)?))
    });
    match (refs, true_report(model, s, u0)) {
        (Ok((b, star)), Ok(t)) => dominance_entries(&t, &b, &star),
        (Err(e), _) | (_, Err(e)) => vec![IdentityEntry::failed("dominance", EntryKind::Dominance, &e)],
    }
}

/// Ranks `1..=n` of distinct scores, as exact numbers.
fn rank_transform(scores: &[f64]) -> Result<Vec<Exact>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    if order.windows(2).any(|w| scores[w[0]] == scores[w[1]]) {
        return Err(Error::TiedScores {
            statistic: "exact identities",
        });
    }
    let mut r = vec![Exact::zero(); scores.len()];
    for (k, &i) in order.iter().enumerate() {
        r[i] = Exact::from_integer(k as i128 + 1);
    }
    Ok(r)
}

/// Nearest multiple of `1e-6`, so that a configured rate is used exactly.
pub fn exact_rate(u0: f64) -> Result<Exact> {
    Rate::new(Exact::new((u0 * 1e6).round() as i128, 1_000_000)).map(|r| *r.u0())
}

/// Ordered discordant pairs with both scores at or above `q`, by direct
/// enumeration.
fn discordant_pairs_brute(s: &[Exact], y: &[Label], q: &Exact) -> usize {
    let mut count = 0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            let top = s[i] >= *q && s[j] >= *q;
            if top && y[i].is_pos() && !y[j].is_pos() && s[i] < s[j] {
                count += 2;
            }
        }
    }
    count
}

/// The finite-sample identities on one sample, evaluated on the ranks in
/// exact arithmetic. Needs distinct scores and both classes.
pub fn exact_identities(scores: &[f64], labels: &[Label], u0: f64) -> Result<Vec<IdentityEntry>> {
    let r = rank_transform(scores)?;
    let c = ClassCounts::of(labels);
    if c.pos == 0 || c.neg == 0 {
        return Err(Error::SingleClass {
            statistic: "exact identities",
            positives: c.pos,
            negatives: c.neg,
        });
    }
    let int = |k: usize| Exact::from_integer(k as i128);
    let n = c.total();
    let rate = Rate::new(exact_rate(u0)?)?;
    let top = TopRate::Local(rate.clone());
    let v0 = rate.v0();
    let mut out = Vec::new();

    let wilcoxon = (int(c.pos * c.neg) * hat_auc(&r, labels)? + int(c.pos * (c.pos + 1) / 2)) / int(n + 1);
    out.push(IdentityEntry::exact(
        "wilcoxon_auc",
        &(wilcoxon - t_wilcoxon(&r, labels)?),
    ));

    let risk = hat_l(&r, labels, &rate)?;
    let boundary = labels
        .iter()
        .zip(&r)
        .filter(|(y, s)| y.is_pos() && **s == risk.q_hat)
        .count();
    let neg_share = Exact::new(c.neg as i128, n as i128);
    let k_hat = hat_k(&r, labels, &v0)?;
    let mut e = IdentityEntry::exact(
        "risk_vs_signed_sum",
        &(risk.l_hat - neg_share - k_hat + Exact::new(boundary as i128, n as i128)),
    );
    e.detail = format!("{boundary} positive(s) at the threshold");
    out.push(e);

    let report = full_report(&r, labels, &top, RankStats::Required)?;
    let q = report.q_hat.expect("local rate has a threshold");
    let r_brute = Exact::new(discordant_pairs_brute(&r, labels, &q) as i128, (n * (n - 1)) as i128);
    out.push(IdentityEntry::exact(
        "m_decomposition",
        &(report.m_hat - r_brute - neg_share * report.l_hat),
    ));

    out.push(IdentityEntry::exact(
        "signed_rank_k",
        &(hat_k(&r, labels, &v0)? - hat_k_via_signed_ranks(&r, labels, &v0)?),
    ));

    out.push(IdentityEntry::exact(
        "trunc_auc_rearrangement",
        &(trunc_auc(&r, labels, &top)? - trunc_auc_step(&r, labels, &top)?),
    ));

    let top_count = r.iter().filter(|s| **s >= q).count();
    out.push(IdentityEntry::exact(
        "empirical_mass_line",
        &(report.p_hat * report.beta_hat + neg_share * report.alpha_hat - Exact::new(top_count as i128, n as i128)),
    ));

    let phi = |x: &Exact| x * x * x + Exact::from_integer(2) * x;
    let warped: Vec<Exact> = r.iter().map(phi).collect();
    let mut other = full_report(&warped, labels, &top, RankStats::Required)?;
    let q_equivariant = other.q_hat == Some(phi(&q));
    other.q_hat = report.q_hat;
    let same = other == report && q_equivariant;
    out.push(IdentityEntry {
        passed: same,
        detail: if same {
            String::new()
        } else {
            "report changed under a monotone map".into()
        },
        ..IdentityEntry::new(
            "transform_invariance",
            EntryKind::Exact,
            if same { 0.0 } else { 1.0 },
            0.0,
        )
    });
    Ok(out)
}

/// Distance of the plug-in local AUC from its population value.
pub fn concentration_entry(
    model: &SyntheticModel,
    s: &ScoringModel,
    u0: &Rate<f64>,
    n: usize,
    tol: f64,
    rng: &mut impl Rng,
) -> IdentityEntry {
    let mut run = || -> Result<f64> {
        let truth = true_report(model, s, u0)?;
        let data = model.sample(n, rng)?;
        let scores = s.score_dataset(&data)?;
        let rep = full_report(&scores, data.labels(), &TopRate::Local(u0.clone()), RankStats::Skip)?;
        Ok(rep.locauc_hat - truth.locauc)
    };
    match run() {
        Ok(d) => IdentityEntry::new("locauc_concentration", EntryKind::Concentration, d, tol),
        Err(e) => IdentityEntry::failed("locauc_concentration", EntryKind::Concentration, &e),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentitySummary {
    pub identity: String,
    pub kind: EntryKind,
    pub count: usize,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub config: IdentitiesConfig,
    pub scorers: Vec<ScoringModel>,
    pub summary: Vec<IdentitySummary>,
    pub skipped_samples: usize,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub entries: Vec<IdentityEntry>,
}

impl Study for IdentityReport {
    fn checks(&self) -> &[Check] {
        &self.checks
    }

    fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn write_raw_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_rows(writer, &self.entries)
    }
}

/// Groups entries by identity, in order of first appearance.
pub fn summarize(entries: &[IdentityEntry]) -> Vec<IdentitySummary> {
    let mut out: Vec<IdentitySummary> = Vec::new();
    for e in entries {
        let idx = match out.iter().position(|s| s.identity == e.identity) {
            Some(i) => i,
            None => {
                out.push(IdentitySummary {
                    identity: e.identity.clone(),
                    kind: e.kind,
                    count: 0,
                    max_abs_residual: 0.0,
                    tolerance: e.tolerance,
                    failures: 0,
                });
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        s.count += 1;
        s.max_abs_residual = if e.residual.is_nan() {
            f64::NAN
        } else {
            s.max_abs_residual.max(e.residual.abs())
        };
        s.tolerance = s.tolerance.max(e.tolerance);
        s.failures += usize::from(!e.passed);
    }
    out
}

pub fn identity_suite(config: &IdentitiesConfig) -> Result<IdentityReport> {
    let model = SyntheticModel::from_spec(config.model.clone())?;
    let suite = &config.suite;
    let seeds = SeedSpec::new(suite.seed);
    let mut scorers = config.scorers.clone();
    let mut rng = seeds.derive(0).child_stream(0);
    for _ in 0..suite.random_scorers {
        scorers.push(random_piecewise(&mut rng, model.support(), suite.random_segments)?);
    }
    if scorers.is_empty() {
        return Err(Error::Config("identity suite needs at least one scorer".into()));
    }
    if suite.u0.is_empty() {
        return Err(Error::Config("identity suite needs at least one u0".into()));
    }
    let rates: Vec<Rate<f64>> = suite.u0.iter().map(|&u| Rate::new(u)).collect::<Result<_>>()?;

    let mut entries = Vec::new();
    for rate in &rates {
        let u = Some(*rate.u0());
        entries.extend(
            optimal_rule_identities(&model, rate)
                .into_iter()
                .map(|e| e.at(None, u, None)),
        );
    }
    let pairs: Vec<(usize, usize)> = (0..rates.len())
        .flat_map(|j| (0..scorers.len()).map(move |i| (i, j)))
        .collect();
    let population: Vec<Vec<IdentityEntry>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (s, rate) = (&scorers[i], &rates[j]);
            let mut v = population_identities(&model, s, rate);
            v.extend(dominance_identities(&model, s, rate));
            v.into_iter().map(|e| e.at(Some(i), Some(*rate.u0()), None)).collect()
        })
        .collect();
    entries.extend(population.into_iter().flatten());

    let exact_stream = seeds.derive(1);
    let exact: Vec<Option<Vec<IdentityEntry>>> = (0..suite.exact_samples)
        .into_par_iter()
        .map(|k| {
            let i = k % scorers.len();
            let u = suite.u0[(k / scorers.len()) % suite.u0.len()];
            let mut rng = exact_stream.child_stream(k as u64);
            let data = model.sample(suite.exact_n.max(2), &mut rng)?;
            let scores = scorers[i].score_dataset(&data)?;
            match exact_identities(&scores, data.labels(), u) {
                Ok(v) => Ok(Some(v.into_iter().map(|e| e.at(Some(i), Some(u), Some(k))).collect())),
                Err(Error::TiedScores { .. } | Error::SingleClass { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let skipped_samples = exact.iter().filter(|e| e.is_none()).count();
    entries.extend(exact.into_iter().flatten().flatten());

    if suite.n_empirical > 0 {
        let conc_stream = seeds.derive(2);
        let conc: Vec<IdentityEntry> = pairs
            .par_iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                let mut rng = conc_stream.child_stream(k as u64);
                let rate = &rates[j];
                concentration_entry(
                    &model,
                    &scorers[i],
                    rate,
                    suite.n_empirical,
                    suite.concentration_tol,
                    &mut rng,
                )
                .at(Some(i), Some(*rate.u0()), None)
            })
            .collect();
        entries.extend(conc);
    }

    let summary = summarize(&entries);
    let checks = summary
        .iter()
        .map(|s| {
            Check::new(
                s.identity.clone(),
                s.failures == 0,
                format!(
                    "{} case(s), max |residual| {:.3e}, tolerance {:.0e}, {} failure(s)",
                    s.count, s.max_abs_residual, s.tolerance, s.failures
                ),
            )
        })
        .collect();
    let mut warnings = Vec::new();
    if skipped_samples > 0 {
        warnings.push(format!(
            "{skipped_samples} exact-identity sample(s) skipped (tied scores or a single class)"
        ));
    }
    Ok(IdentityReport {
        config: config.clone(),
        scorers,
        summary,
        skipped_samples,
        checks,
        warnings,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::from_toml;
    use Label::{Neg, Pos};

    #[test]
    fn uniform_identity_scorer_passes_population_identities() {
        let model = SyntheticModel::uniform_linear();
        let u0 = Rate::new(0.2).unwrap();
        let entries = population_identities(&model, &ScoringModel::identity(), &u0);
        assert_eq!(entries.len(), 9);
        assert!(
            entries.iter().all(|e| e.passed && e.residual.abs() < 1e-9),
            "{entries:?}"
        );
        let opt = optimal_rule_identities(&model, &u0);
        assert!(opt.iter().all(|e| e.passed), "{opt:?}");
    }

    #[test]
    fn dominance_of_the_optimal_scorer() {
        let model = SyntheticModel::uniform_linear();
        let u0 = Rate::new(0.3).unwrap();
        let reversed = ScoringModel::linear(vec![-1.0]).unwrap();
        let e = dominance_identities(&model, &reversed, &u0);
        assert_eq!(e.len(), 4);
        assert!(e.iter().all(|e| e.passed && e.residual == 0.0));
    }

    #[test]
    fn exact_identities_on_a_small_sample() {
        let s = [0.9, 0.7, 0.3, 0.1, 0.55, 0.05];
        let y = [Pos, Neg, Pos, Neg, Pos, Neg];
        let e = exact_identities(&s, &y, 0.5).unwrap();
        assert_eq!(e.len(), 7);
        assert!(e.iter().all(|e| e.passed && e.residual == 0.0), "{e:?}");
        assert!(matches!(
            exact_identities(&[0.1, 0.1], &[Pos, Neg], 0.5),
            Err(Error::TiedScores { .. })
        ));
    }

    #[test]
    fn boundary_positive_is_accounted_for() {
        // the threshold at u0 = 0.5 is the third score, held by a positive
        let s = [0.9, 0.7, 0.5, 0.1];
        let y = [Pos, Neg, Pos, Neg];
        let e = exact_identities(&s, &y, 0.5).unwrap();
        let risk = e.iter().find(|e| e.identity == "risk_vs_signed_sum").unwrap();
        assert!(risk.passed);
        assert!(risk.detail.starts_with('1'));
    }

    #[test]
    fn exact_rate_rounding() {
        assert_eq!(exact_rate(0.2).unwrap(), Exact::new(1, 5));
        assert!(exact_rate(1.0).is_err());
    }

    #[test]
    fn small_suite_runs_clean() {
        let cfg: IdentitiesConfig = from_toml(
            r#"
            [model]
            marginal = "uniform"
            eta = "linear"
            [[scorers]]
            kind = "linear"
            weights = [1.0]
            [suite]
            u0 = [0.2, 0.5]
            n_empirical = 20000
            concentration_tol = 0.02
            exact_samples = 30
            exact_n = 25
            random_scorers = 1
            seed = 4
            "#,
        )
        .unwrap();
        let r = identity_suite(&cfg).unwrap();
        assert!(r.passed(), "{:?}", r.failures());
        assert_eq!(r.scorers.len(), 2);
        let exact = r.summary.iter().find(|s| s.identity == "wilcoxon_auc").unwrap();
        assert_eq!(exact.count, 30 - r.skipped_samples);
        assert_eq!(exact.max_abs_residual, 0.0);
        let conc = r.summary.iter().find(|s| s.identity == "locauc_concentration").unwrap();
        assert_eq!(conc.count, 4);
    }
}
