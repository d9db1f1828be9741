//! Exact Bayesian probabilities for a scenario.
//!
//! Every class likelihood is a known discretized Gaussian and every prior is
//! given, so the mixture marginal, the posterior over the full class universe,
//! and the latent quantities (conditioned on the instance belonging to a seen
//! class) can all be evaluated in closed form. The oracle is the ground truth
//! that trained models are judged against; it never sees data.

use serde::{Deserialize, Serialize};

use crate::dmvn::{pmf_successive, DiscretizedGaussian};
use crate::error::{LcError, Result};

/// Probabilities smaller than this are treated as exact zero. Far-tail PMF
/// products otherwise leave denormal noise in sums that should vanish.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Tolerance for the prior-sum validation.
const PRIOR_SUM_TOL: f64 = 1e-12;

/// One class of a scenario: its label, prior mass, and likelihood parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: usize,
    pub prior: f64,
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

/// A full experimental scenario: the class universe with priors and
/// likelihoods, the seen subset, split sizes, and the generation seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub classes: Vec<ClassSpec>,
    pub seen_labels: Vec<usize>,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

/// The five built-in cases. All share the same likelihoods and seen set; the
/// prior mass of the unseen class grows from 0.1 to 0.94.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseId {
    I,
    II,
    III,
    IV,
    V,
}

impl CaseId {
    pub const ALL: [CaseId; 5] = [CaseId::I, CaseId::II, CaseId::III, CaseId::IV, CaseId::V];

    /// Per-class priors of the built-in case, indexed by label.
    pub fn priors(self) -> [f64; 4] {
        match self {
            CaseId::I => [0.3, 0.3, 0.3, 0.1],
            CaseId::II => [0.2, 0.2, 0.2, 0.4],
            CaseId::III => [0.1, 0.1, 0.1, 0.7],
            CaseId::IV => [0.03, 0.03, 0.03, 0.91],
            CaseId::V => [0.02, 0.02, 0.02, 0.94],
        }
    }

    pub fn index(self) -> usize {
        match self {
            CaseId::I => 0,
            CaseId::II => 1,
            CaseId::III => 2,
            CaseId::IV => 3,
            CaseId::V => 4,
        }
    }
}

impl std::fmt::Display for CaseId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            CaseId::I => "I",
            CaseId::II => "II",
            CaseId::III => "III",
            CaseId::IV => "IV",
            CaseId::V => "V",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for CaseId {
    type Err = LcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(CaseId::I),
            "II" | "2" => Ok(CaseId::II),
            "III" | "3" => Ok(CaseId::III),
            "IV" | "4" => Ok(CaseId::IV),
            "V" | "5" => Ok(CaseId::V),
            other => Err(LcError::InvalidScenario(format!(
                "unknown case {other:?}; expected I..V"
            ))),
        }
    }
}

/// Class means shared by every built-in case; label 3 is the unseen class
/// sitting between the three seen ones.
pub const CASE_MEANS: [[f64; 2]; 4] = [[0.0, 0.0], [9.0, 6.0], [0.0, 12.0], [4.5, 6.0]];

/// Common per-coordinate variance of the built-in classes (sigma = 3).
pub const CASE_VARIANCE: f64 = 9.0;

impl ScenarioConfig {
    /// The built-in scenario for one case: four classes on the plane, labels
    /// 0..2 seen, label 3 unseen, 1500 train and 500 test points.
    pub fn builtin(case: CaseId, seed: u64) -> Self {
        let priors = case.priors();
        let classes = (0..4)
            .map(|label| ClassSpec {
                label,
                prior: priors[label],
                mean: CASE_MEANS[label].to_vec(),
                variances: vec![CASE_VARIANCE, CASE_VARIANCE],
            })
            .collect();
        Self {
            classes,
            seen_labels: vec![0, 1, 2],
            train_size: 1500,
            test_size: 500,
            seed,
        }
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Checks every structural invariant; all other code may assume them.
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(LcError::InvalidScenario("no classes".into()));
        }
        let k = self.classes.len();
        let mut seen_label = vec![false; k];
        for class in &self.classes {
            if class.label >= k {
                return Err(LcError::InvalidScenario(format!(
                    "label {} out of range for {k} classes",
                    class.label
                )));
            }
            if seen_label[class.label] {
                return Err(LcError::InvalidScenario(format!(
                    "duplicate label {}",
                    class.label
                )));
            }
            seen_label[class.label] = true;
            if !(0.0..=1.0).contains(&class.prior) {
                return Err(LcError::InvalidScenario(format!(
                    "prior {} of label {} outside [0, 1]",
                    class.prior, class.label
                )));
            }
            DiscretizedGaussian::new(class.mean.clone(), class.variances.clone())?;
            if class.mean.len() != self.classes[0].mean.len() {
                return Err(LcError::InvalidScenario(
                    "all class likelihoods must share one dimension".into(),
                ));
            }
        }
        let prior_sum: f64 = self.classes.iter().map(|c| c.prior).sum();
        if (prior_sum - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(LcError::InvalidScenario(format!(
                "priors must sum to 1, got {prior_sum:.17}"
            )));
        }
        if self.seen_labels.is_empty() {
            return Err(LcError::InvalidScenario("seen set is empty".into()));
        }
        let mut seen_sorted = self.seen_labels.clone();
        seen_sorted.sort_unstable();
        seen_sorted.dedup();
        if seen_sorted.len() != self.seen_labels.len() {
            return Err(LcError::InvalidScenario("duplicate seen label".into()));
        }
        if seen_sorted.iter().any(|&l| l >= k) {
            return Err(LcError::InvalidScenario("seen label out of range".into()));
        }
        if seen_sorted.len() == k {
            return Err(LcError::InvalidScenario(
                "at least one class must stay unseen".into(),
            ));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return Err(LcError::InvalidScenario(
                "train and test sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Seen labels in ascending order.
    pub fn seen_sorted(&self) -> Vec<usize> {
        let mut seen = self.seen_labels.clone();
        seen.sort_unstable();
        seen
    }

    /// Prior of the class with the given label.
    pub fn prior_of(&self, label: usize) -> Option<f64> {
        self.classes.iter().find(|c| c.label == label).map(|c| c.prior)
    }
}

/// Exact probability evaluator for one validated scenario.
///
/// Immutable after construction and safe to share across threads; every
/// query is a pure function of the scenario parameters.
#[derive(Debug, Clone)]
pub struct ProbabilityOracle {
    // Indexed by label.
    likelihoods: Vec<DiscretizedGaussian>,
    priors: Vec<f64>,
    seen: Vec<bool>,
    latent_prior: f64,
}

/// Split of posterior mass between seen and unseen classes at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeenSplit {
    /// p(s|x): total posterior mass of the seen classes.
    pub seen: f64,
    /// The complement p(s_bar|x) = 1 - p(s|x).
    pub unseen: f64,
}

/// Floors tiny magnitudes to exact zero.
fn floored(p: f64) -> f64 {
    if p < PROBABILITY_FLOOR {
        0.0
    } else {
        p
    }
}

impl ProbabilityOracle {
    pub fn new(scenario: &ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        let k = scenario.class_count();
        let mut likelihoods = vec![None; k];
        let mut priors = vec![0.0; k];
        for class in &scenario.classes {
            likelihoods[class.label] = Some(DiscretizedGaussian::new(
                class.mean.clone(),
                class.variances.clone(),
            )?);
            priors[class.label] = class.prior;
        }
        let mut seen = vec![false; k];
        for &label in &scenario.seen_labels {
            seen[label] = true;
        }
        let latent_prior = (0..k).filter(|&l| seen[l]).map(|l| priors[l]).sum();
        Ok(Self {
            likelihoods: likelihoods.into_iter().map(Option::unwrap).collect(),
            priors,
            seen,
            latent_prior,
        })
    }

    pub fn class_count(&self) -> usize {
        self.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.likelihoods[0].dim()
    }

    pub fn is_seen(&self, label: usize) -> bool {
        self.seen.get(label).copied().unwrap_or(false)
    }

    /// Labels of the seen classes in ascending order.
    pub fn seen_labels(&self) -> Vec<usize> {
        (0..self.class_count()).filter(|&l| self.seen[l]).collect()
    }

    fn weighted_pmf(&self, x: &[i64], label: usize) -> Result<f64> {
        let p = pmf_successive(x, &self.likelihoods[label])?;
        Ok(floored(p * self.priors[label]))
    }

    /// Mixture marginal p(x) over the full class universe.
    pub fn marginal(&self, x: &[i64]) -> Result<f64> {
        let mut total = 0.0;
        for label in 0..self.class_count() {
            total += self.weighted_pmf(x, label)?;
        }
        Ok(floored(total))
    }

    /// Posterior p(y=k|x) for every label k, via Bayes over the mixture.
    pub fn posterior(&self, x: &[i64]) -> Result<Vec<f64>> {
        let marginal = self.marginal(x)?;
        if marginal <= 0.0 {
            return Err(LcError::UndefinedPosterior(x.to_vec()));
        }
        (0..self.class_count())
            .map(|label| Ok(self.weighted_pmf(x, label)? / marginal))
            .collect()
    }

    /// Prior probability p(s) that an instance belongs to a seen class.
    pub fn latent_prior(&self) -> f64 {
        self.latent_prior
    }

    /// Joint p(y=k, x|s): zero for unseen k, else the prior-weighted PMF
    /// renormalized by the seen prior mass.
    pub fn latent_joint(&self, x: &[i64], label: usize) -> Result<f64> {
        if label >= self.class_count() {
            return Err(LcError::UnknownLabel(label));
        }
        if !self.seen[label] {
            return Ok(0.0);
        }
        Ok(floored(self.weighted_pmf(x, label)? / self.latent_prior))
    }

    /// Marginal of x conditioned on the instance being seen.
    pub fn latent_marginal(&self, x: &[i64]) -> Result<f64> {
        let mut total = 0.0;
        for label in self.seen_labels() {
            total += self.latent_joint(x, label)?;
        }
        Ok(floored(total))
    }

    /// Latent posterior p(y=k|x,s) for every label k. Unseen components are
    /// exactly zero by construction, never the result of arithmetic.
    pub fn latent_posterior(&self, x: &[i64]) -> Result<Vec<f64>> {
        let latent_marginal = self.latent_marginal(x)?;
        if latent_marginal <= 0.0 {
            return Err(LcError::UndefinedPosterior(x.to_vec()));
        }
        (0..self.class_count())
            .map(|label| {
                if !self.seen[label] {
                    return Ok(0.0);
                }
                Ok(self.latent_joint(x, label)? / latent_marginal)
            })
            .collect()
    }

    /// Posterior mass split p(s|x) / p(s_bar|x) at a point.
    pub fn seen_posterior(&self, x: &[i64]) -> Result<SeenSplit> {
        let posterior = self.posterior(x)?;
        let seen: f64 = self
            .seen_labels()
            .into_iter()
            .map(|label| posterior[label])
            .sum();
        Ok(SeenSplit {
            seen,
            unseen: 1.0 - seen,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmvn::Rng;

    fn oracle(case: CaseId) -> ProbabilityOracle {
        ProbabilityOracle::new(&ScenarioConfig::builtin(case, 1)).unwrap()
    }

    /// Two-class scenario whose unseen class carries zero prior; the latent
    /// conditioning then changes nothing.
    fn degenerate_config() -> ScenarioConfig {
        ScenarioConfig {
            classes: vec![
                ClassSpec {
                    label: 0,
                    prior: 1.0,
                    mean: vec![0.0, 0.0],
                    variances: vec![9.0, 9.0],
                },
                ClassSpec {
                    label: 1,
                    prior: 0.0,
                    mean: vec![9.0, 6.0],
                    variances: vec![9.0, 9.0],
                },
            ],
            seen_labels: vec![0],
            train_size: 10,
            test_size: 10,
            seed: 0,
        }
    }

    fn class_pmf(case: CaseId, label: usize, x: &[i64]) -> f64 {
        let dist = DiscretizedGaussian::new(
            CASE_MEANS[label].to_vec(),
            vec![CASE_VARIANCE, CASE_VARIANCE],
        )
        .unwrap();
        pmf_successive(x, &dist).unwrap() * case.priors()[label]
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut config = ScenarioConfig::builtin(CaseId::I, 0);
        config.classes[0].prior = 0.5;
        assert!(matches!(
            config.validate(),
            Err(LcError::InvalidScenario(msg)) if msg.contains("sum to 1")
        ));

        let mut config = ScenarioConfig::builtin(CaseId::I, 0);
        config.seen_labels = vec![0, 1, 2, 3];
        assert!(config.validate().is_err());

        let mut config = ScenarioConfig::builtin(CaseId::I, 0);
        config.seen_labels.clear();
        assert!(config.validate().is_err());

        let mut config = ScenarioConfig::builtin(CaseId::I, 0);
        config.seen_labels = vec![0, 0];
        assert!(config.validate().is_err());

        let mut config = ScenarioConfig::builtin(CaseId::I, 0);
        config.classes[2].mean = vec![1.0];
        config.classes[2].variances = vec![1.0];
        assert!(config.validate().is_err());

        let mut config = ScenarioConfig::builtin(CaseId::I, 0);
        config.train_size = 0;
        assert!(config.validate().is_err());

        assert!(ScenarioConfig::builtin(CaseId::III, 0).validate().is_ok());
        assert!(degenerate_config().validate().is_ok());
    }

    #[test]
    fn case_parsing_round_trips() {
        for case in CaseId::ALL {
            let parsed: CaseId = case.to_string().parse().unwrap();
            assert_eq!(parsed, case);
        }
        assert_eq!("iii".parse::<CaseId>().unwrap(), CaseId::III);
        assert_eq!("4".parse::<CaseId>().unwrap(), CaseId::IV);
        assert!("VI".parse::<CaseId>().is_err());
    }

    #[test]
    fn marginal_of_degenerate_mixture_is_the_single_pmf() {
        let oracle = ProbabilityOracle::new(&degenerate_config()).unwrap();
        let dist = DiscretizedGaussian::new(vec![0.0, 0.0], vec![9.0, 9.0]).unwrap();
        for x in [[0i64, 0], [3, -2], [-7, 5]] {
            let want = pmf_successive(&x, &dist).unwrap();
            assert!((oracle.marginal(&x).unwrap() - want).abs() <= 1e-15);
        }
    }

    #[test]
    fn marginal_matches_term_by_term_mixture_sum() {
        let oracle = oracle(CaseId::III);
        let x = [0i64, 0];
        let want: f64 = (0..4).map(|label| class_pmf(CaseId::III, label, &x)).sum();
        assert!((oracle.marginal(&x).unwrap() - want).abs() <= 1e-15);
    }

    #[test]
    fn marginal_normalizes_over_wide_grid() {
        let oracle = oracle(CaseId::II);
        let mut total = 0.0;
        for x1 in -20..=25 {
            for x2 in -20..=25 {
                total += oracle.marginal(&[x1, x2]).unwrap();
            }
        }
        assert!((total - 1.0).abs() <= 1e-4, "grid mass {total:.8}");
    }

    #[test]
    fn posterior_symmetry_for_identical_classes() {
        // Two classes with identical likelihoods and equal priors must share
        // posterior mass at every point.
        let config = ScenarioConfig {
            classes: vec![
                ClassSpec {
                    label: 0,
                    prior: 0.25,
                    mean: vec![1.0, 2.0],
                    variances: vec![4.0, 4.0],
                },
                ClassSpec {
                    label: 1,
                    prior: 0.25,
                    mean: vec![1.0, 2.0],
                    variances: vec![4.0, 4.0],
                },
                ClassSpec {
                    label: 2,
                    prior: 0.5,
                    mean: vec![8.0, -1.0],
                    variances: vec![9.0, 1.0],
                },
            ],
            seen_labels: vec![0, 1],
            train_size: 10,
            test_size: 10,
            seed: 0,
        };
        let oracle = ProbabilityOracle::new(&config).unwrap();
        for x in [[0i64, 0], [4, 1], [-3, 6]] {
            let post = oracle.posterior(&x).unwrap();
            assert!((post[0] - post[1]).abs() <= 1e-15);
        }
    }

    #[test]
    fn posterior_concentrates_deep_in_class_zero() {
        let post = oracle(CaseId::III).posterior(&[-9, -9]).unwrap();
        assert!(post[0] > 0.95, "component 0 = {:.6}", post[0]);
    }

    #[test]
    fn posterior_sums_to_one_at_random_points() {
        // In the far corner of the box every class PMF cancels to zero in
        // f64, so the posterior is undefined there; those points must fail
        // cleanly and stay rare.
        let oracle = oracle(CaseId::IV);
        let mut rng = Rng::seeded(5150);
        let mut undefined = 0;
        for _ in 0..1000 {
            let x = [rng.below(41) as i64 - 15, rng.below(41) as i64 - 15];
            match oracle.posterior(&x) {
                Ok(post) => {
                    let sum: f64 = post.iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-9, "sum {sum:.15} at {x:?}");
                }
                Err(LcError::UndefinedPosterior(_)) => undefined += 1,
                Err(other) => panic!("unexpected error at {x:?}: {other}"),
            }
        }
        assert!(undefined < 50, "{undefined} of 1000 points undefined");
    }

    #[test]
    fn posterior_is_undefined_far_outside_support() {
        assert!(matches!(
            oracle(CaseId::I).posterior(&[100_000, 100_000]),
            Err(LcError::UndefinedPosterior(_))
        ));
    }

    #[test]
    fn latent_prior_matches_case_table() {
        let want = [0.9, 0.6, 0.3, 0.09, 0.06];
        for (case, want) in CaseId::ALL.into_iter().zip(want) {
            let got = oracle(case).latent_prior();
            assert!(
                (got - want).abs() <= 1e-12,
                "case {case}: latent prior {got:.17}, want {want}"
            );
        }
    }

    #[test]
    fn latent_joint_is_zero_for_unseen_and_explicit_for_seen() {
        let oracle = oracle(CaseId::III);
        for x in [[0i64, 0], [5, 5], [-4, 11]] {
            assert_eq!(oracle.latent_joint(&x, 3).unwrap(), 0.0);
            let want = class_pmf(CaseId::III, 0, &x) / 0.3;
            let got = oracle.latent_joint(&x, 0).unwrap();
            assert!((got - want).abs() <= 1e-15);
        }
        assert!(matches!(
            oracle.latent_joint(&[0, 0], 9),
            Err(LcError::UnknownLabel(9))
        ));
    }

    #[test]
    fn latent_joint_normalizes_over_seen_classes_and_grid() {
        let oracle = oracle(CaseId::V);
        let mut total = 0.0;
        for x1 in -20..=25 {
            for x2 in -20..=25 {
                for label in oracle.seen_labels() {
                    total += oracle.latent_joint(&[x1, x2], label).unwrap();
                }
            }
        }
        assert!((total - 1.0).abs() <= 1e-4, "grid joint mass {total:.8}");
    }

    #[test]
    fn latent_marginal_is_sum_of_latent_joints() {
        let oracle = oracle(CaseId::II);
        for x in [[0i64, 0], [9, 6], [2, 9], [-12, 20]] {
            let want: f64 = oracle
                .seen_labels()
                .into_iter()
                .map(|l| oracle.latent_joint(&x, l).unwrap())
                .sum();
            assert!((oracle.latent_marginal(&x).unwrap() - want).abs() <= 1e-15);
        }
    }

    #[test]
    fn latent_marginal_equals_marginal_when_unseen_prior_is_zero() {
        let oracle = ProbabilityOracle::new(&degenerate_config()).unwrap();
        for x in [[0i64, 0], [4, -1], [-6, 7]] {
            let a = oracle.latent_marginal(&x).unwrap();
            let b = oracle.marginal(&x).unwrap();
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn latent_posterior_unseen_component_is_exactly_zero() {
        let oracle = oracle(CaseId::IV);
        let mut rng = Rng::seeded(88);
        for _ in 0..200 {
            let x = [rng.below(31) as i64 - 10, rng.below(31) as i64 - 10];
            let latent = oracle.latent_posterior(&x).unwrap();
            assert_eq!(latent[3], 0.0);
            let seen_sum: f64 = latent[..3].iter().sum();
            assert!((seen_sum - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn latent_posterior_collapses_when_unseen_prior_is_zero() {
        let oracle = ProbabilityOracle::new(&degenerate_config()).unwrap();
        for x in [[0i64, 0], [3, 3], [-2, 5]] {
            let latent = oracle.latent_posterior(&x).unwrap();
            let plain = oracle.posterior(&x).unwrap();
            assert!((latent[0] - plain[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn latent_posterior_agrees_with_renormalized_posterior() {
        // Independent route: restrict the plain posterior to the seen set
        // and renormalize. Both paths must meet within 1e-9.
        let oracle = oracle(CaseId::III);
        for x in [[3i64, 3], [4, 6], [2, 9], [-5, -5], [12, 8]] {
            let latent = oracle.latent_posterior(&x).unwrap();
            let plain = oracle.posterior(&x).unwrap();
            let seen_mass: f64 = plain[..3].iter().sum();
            for k in 0..3 {
                let renorm = plain[k] / seen_mass;
                assert!(
                    (latent[k] - renorm).abs() <= 1e-9,
                    "component {k} at {x:?}: {0:.15} vs {renorm:.15}",
                    latent[k]
                );
            }
        }
    }

    #[test]
    fn seen_posterior_complement_identity() {
        let oracle = oracle(CaseId::II);
        for x in [[0i64, 0], [4, 6], [9, 6], [-8, 14]] {
            let split = oracle.seen_posterior(&x).unwrap();
            assert!((split.seen + split.unseen - 1.0).abs() <= 1e-12);
            assert!((0.0..=1.0).contains(&split.seen));
        }
    }

    #[test]
    fn seen_posterior_is_one_when_unseen_prior_is_zero() {
        let oracle = ProbabilityOracle::new(&degenerate_config()).unwrap();
        assert!((oracle.seen_posterior(&[1, 1]).unwrap().seen - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn seen_posterior_drops_near_the_unseen_center() {
        let oracle = oracle(CaseId::III);
        let near_unseen = oracle.seen_posterior(&[4, 6]).unwrap().seen;
        let deep_seen = oracle.seen_posterior(&[-9, -9]).unwrap().seen;
        assert!(near_unseen < deep_seen);
    }

    #[test]
    fn unseen_posterior_grows_with_unseen_prior() {
        // With likelihoods fixed, raising the unseen prior must raise the
        // unseen class's posterior at a fixed point.
        let mut previous = -1.0;
        for case in CaseId::ALL {
            let p3 = oracle(case).posterior(&[4, 6]).unwrap()[3];
            assert!(p3 >= previous, "case {case}: {p3} < {previous}");
            previous = p3;
        }
    }
}
