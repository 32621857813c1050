//! Multinomial logistic regression (Maximum Entropy) with a Gaussian prior.
//!
//! Used for both the local Good-vs-Bad classifier and the pairwise
//! Same-vs-Different classifier (2-class or 3-class). Training minimizes the
//! regularized negative log-likelihood
//!
//! ```text
//! L(w) = -sum_i log P(y_i | x_i; w) + sum_{k,f} w_{kf}^2 / (2 sigma^2)
//! ```
//!
//! with deterministic full-batch L-BFGS and a backtracking Armijo line
//! search. Bias terms are unregularized. Identical instances, config, and
//! seed produce bitwise-identical weights.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

pub const CLASS_SAME: &str = "Same";
pub const CLASS_DIFFERENT: &str = "Different";
pub const CLASS_SAME_GOOD: &str = "Same-Good";
pub const CLASS_SAME_BAD: &str = "Same-Bad";

const MODEL_FORMAT_VERSION: u32 = 1;
const LBFGS_MEMORY: usize = 10;
const ARMIJO_C1: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum MaxEntError {
    #[error("training requires at least two distinct classes, got {0}")]
    SingleClass(usize),
    #[error("training requires at least one instance")]
    NoInstances,
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("class set mismatch: expected {expected:?}, got {got:?}")]
    ClassSetMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("unsupported model format version {0}")]
    UnknownFormatVersion(u32),
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
}

/// How the pairwise classifier is trained: Same-vs-Different directly, or
/// with Same split into Same-Good and Same-Bad whose probabilities are added
/// back together at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseMode {
    TwoClass,
    ThreeClass,
}

impl PairwiseMode {
    pub fn classes(&self) -> Vec<String> {
        match self {
            PairwiseMode::TwoClass => vec![CLASS_SAME.to_string(), CLASS_DIFFERENT.to_string()],
            PairwiseMode::ThreeClass => vec![
                CLASS_SAME_GOOD.to_string(),
                CLASS_SAME_BAD.to_string(),
                CLASS_DIFFERENT.to_string(),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Standard deviation of the Gaussian prior; larger means weaker
    /// regularization. May be infinite (no penalty).
    pub l2_sigma: f64,
    pub max_iterations: usize,
    /// Training stops when the L2 norm of the gradient drops below this.
    pub convergence_tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2_sigma: 1.0,
            max_iterations: 500,
            convergence_tol: 1e-6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MaxEntError> {
        if !(self.l2_sigma > 0.0) {
            return Err(MaxEntError::InvalidConfig(format!(
                "l2_sigma must be > 0, got {}",
                self.l2_sigma
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(MaxEntError::InvalidConfig(format!(
                "convergence_tol must be > 0, got {}",
                self.convergence_tol
            )));
        }
        Ok(())
    }
}

/// Candidate sigma values for dev-set tuning of the Gaussian prior.
pub fn default_sigma_grid() -> Vec<f64> {
    vec![0.1, 0.3, 1.0, 3.0, 10.0]
}

/// Summary of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    /// Loss after each accepted iteration, starting with the initial loss.
    pub loss_history: Vec<f64>,
}

/// A trained MaxEnt model: per-class weight vectors over a fixed feature
/// name list, plus unregularized biases.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntModel {
    classes: Vec<String>,
    feature_names: Vec<String>,
    feature_index: HashMap<String, usize>,
    /// Flattened `[class * n_features + feature]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    classes: Vec<String>,
    feature_name_list: Vec<String>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    config: TrainConfig,
}

impl MaxEntModel {
    /// A model with all weights and biases zero; predicts the uniform
    /// distribution everywhere.
    pub fn with_zero_weights(
        classes: Vec<String>,
        feature_names: Vec<String>,
        config: TrainConfig,
    ) -> Result<Self, MaxEntError> {
        if classes.len() < 2 {
            return Err(MaxEntError::SingleClass(classes.len()));
        }
        let feature_index = feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let n = classes.len() * feature_names.len();
        Ok(MaxEntModel {
            bias: vec![0.0; classes.len()],
            weights: vec![0.0; n],
            classes,
            feature_names,
            feature_index,
            config,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn class_index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn weight(&self, class: &str, feature: &str) -> Option<f64> {
        let k = self.class_index(class)?;
        let f = *self.feature_index.get(feature)?;
        Some(self.weights[k * self.feature_names.len() + f])
    }

    pub fn set_weight(&mut self, class: &str, feature: &str, value: f64) -> bool {
        let Some(k) = self.class_index(class) else {
            return false;
        };
        let Some(&f) = self.feature_index.get(feature) else {
            return false;
        };
        self.weights[k * self.feature_names.len() + f] = value;
        true
    }

    pub fn bias_of(&self, class: &str) -> Option<f64> {
        Some(self.bias[self.class_index(class)?])
    }

    pub fn set_bias(&mut self, class: &str, value: f64) -> bool {
        let Some(k) = self.class_index(class) else {
            return false;
        };
        self.bias[k] = value;
        true
    }

    fn scores(&self, x: &FeatureVector) -> Vec<f64> {
        let nf = self.feature_names.len();
        let mut scores = self.bias.clone();
        for (name, value) in x.iter() {
            // Feature names unseen at training time are ignored.
            if let Some(&f) = self.feature_index.get(name) {
                for (k, score) in scores.iter_mut().enumerate() {
                    *score += self.weights[k * nf + f] * value;
                }
            }
        }
        scores
    }

    /// Softmax distribution over the model's classes, aligned with
    /// [`Self::classes`]. Sums to 1 within 1e-9.
    pub fn predict_proba(&self, x: &FeatureVector) -> Vec<f64> {
        let scores = self.scores(x);
        softmax(&scores)
    }

    /// Probability of a single class by name.
    pub fn prob_of(&self, x: &FeatureVector, class: &str) -> Result<f64, MaxEntError> {
        let k = self
            .class_index(class)
            .ok_or_else(|| MaxEntError::UnknownClass(class.to_string()))?;
        Ok(self.predict_proba(x)[k])
    }

    /// Versioned JSON document; loading an unknown version fails.
    pub fn to_json(&self) -> String {
        let nf = self.feature_names.len();
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            classes: self.classes.clone(),
            feature_name_list: self.feature_names.clone(),
            weights: self
                .classes
                .iter()
                .enumerate()
                .map(|(k, _)| self.weights[k * nf..(k + 1) * nf].to_vec())
                .collect(),
            bias: self.bias.clone(),
            config: self.config,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MaxEntError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| MaxEntError::InvalidModel(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(MaxEntError::UnknownFormatVersion(file.format_version));
        }
        if file.weights.len() != file.classes.len() || file.bias.len() != file.classes.len() {
            return Err(MaxEntError::InvalidModel(
                "weights/bias shape does not match class count".to_string(),
            ));
        }
        let nf = file.feature_name_list.len();
        let mut weights = Vec::with_capacity(file.classes.len() * nf);
        for row in &file.weights {
            if row.len() != nf {
                return Err(MaxEntError::InvalidModel(
                    "weight row length does not match feature list".to_string(),
                ));
            }
            weights.extend_from_slice(row);
        }
        let feature_index = file
            .feature_name_list
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Ok(MaxEntModel {
            classes: file.classes,
            feature_index,
            feature_names: file.feature_name_list,
            weights,
            bias: file.bias,
            config: file.config,
        })
    }
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    // Keep every probability strictly positive so downstream -log costs are
    // finite even before epsilon flooring.
    exps.iter().map(|e| (e / sum).max(1e-300)).collect()
}

/// Instances indexed against a fixed (class, feature) vocabulary.
struct IndexedProblem {
    n_classes: usize,
    n_features: usize,
    /// (sparse features, class index)
    instances: Vec<(Vec<(usize, f64)>, usize)>,
    inv_sigma2: f64,
}

impl IndexedProblem {
    /// Parameter layout: `n_classes * n_features` weights, then `n_classes`
    /// biases. Biases are excluded from the L2 penalty.
    fn loss_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let (nk, nf) = (self.n_classes, self.n_features);
        let wlen = nk * nf;
        let mut loss = 0.0;
        let mut grad = vec![0.0; params.len()];
        let mut scores = vec![0.0; nk];
        for (feats, y) in &self.instances {
            for (k, score) in scores.iter_mut().enumerate() {
                let mut s = params[wlen + k];
                for &(f, v) in feats {
                    s += params[k * nf + f] * v;
                }
                *score = s;
            }
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            loss += lse - scores[*y];
            for k in 0..nk {
                let p = (scores[k] - lse).exp();
                let coeff = p - if k == *y { 1.0 } else { 0.0 };
                grad[wlen + k] += coeff;
                for &(f, v) in feats {
                    grad[k * nf + f] += coeff * v;
                }
            }
        }
        if self.inv_sigma2 > 0.0 {
            for (i, g) in grad.iter_mut().enumerate().take(wlen) {
                loss += 0.5 * self.inv_sigma2 * params[i] * params[i];
                *g += self.inv_sigma2 * params[i];
            }
        }
        (loss, grad)
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct OptimOutcome {
    params: Vec<f64>,
    report: TrainReport,
}

/// Deterministic L-BFGS with backtracking Armijo line search.
fn lbfgs_minimize<F>(mut params: Vec<f64>, objective: F, cfg: &TrainConfig) -> OptimOutcome
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (mut loss, mut grad) = objective(&params);
    let initial_loss = loss;
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new(); // (s, y, 1/s.y)
    let mut loss_history = vec![loss];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..cfg.max_iterations {
        let gnorm = l2_norm(&grad);
        if gnorm < cfg.convergence_tol {
            converged = true;
            break;
        }

        // Two-loop recursion for the search direction.
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        if !history.is_empty() {
            let mut alphas = Vec::with_capacity(history.len());
            for (s, y, rho) in history.iter().rev() {
                let alpha = rho * dot(s, &dir);
                for (d, yi) in dir.iter_mut().zip(y) {
                    *d -= alpha * yi;
                }
                alphas.push(alpha);
            }
            let (s_last, y_last, _) = history.last().expect("non-empty history");
            let gamma = dot(s_last, y_last) / dot(y_last, y_last);
            for d in dir.iter_mut() {
                *d *= gamma;
            }
            for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
                let beta = rho * dot(y, &dir);
                for (d, si) in dir.iter_mut().zip(s) {
                    *d += (alpha - beta) * si;
                }
            }
        }

        let mut dg = dot(&dir, &grad);
        if dg >= 0.0 || !dg.is_finite() {
            // Not a descent direction; fall back to steepest descent.
            dir = grad.iter().map(|g| -g).collect();
            dg = -gnorm * gnorm;
        }

        let mut step = if iter == 0 { (1.0 + gnorm).recip() } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = params
                .iter()
                .zip(&dir)
                .map(|(p, d)| p + step * d)
                .collect();
            let (trial_loss, trial_grad) = objective(&trial);
            if trial_loss.is_finite() && trial_loss <= loss + ARMIJO_C1 * step * dg {
                accepted = Some((trial, trial_loss, trial_grad));
                break;
            }
            step *= 0.5;
        }
        let Some((new_params, new_loss, new_grad)) = accepted else {
            // Line search cannot improve further at floating-point scale.
            break;
        };

        let s: Vec<f64> = new_params
            .iter()
            .zip(&params)
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            history.push((s, y, sy.recip()));
            if history.len() > LBFGS_MEMORY {
                history.remove(0);
            }
        }

        params = new_params;
        loss = new_loss;
        grad = new_grad;
        loss_history.push(loss);
        iterations = iter + 1;
    }

    let grad_norm = l2_norm(&grad);
    if grad_norm < cfg.convergence_tol {
        converged = true;
    }
    OptimOutcome {
        params,
        report: TrainReport {
            initial_loss,
            final_loss: loss,
            iterations,
            converged,
            grad_norm,
            loss_history,
        },
    }
}

fn index_instances(
    model: &MaxEntModel,
    instances: &[(FeatureVector, String)],
) -> Result<IndexedProblem, MaxEntError> {
    let mut indexed = Vec::with_capacity(instances.len());
    for (x, class) in instances {
        let y = model
            .class_index(class)
            .ok_or_else(|| MaxEntError::UnknownClass(class.clone()))?;
        let feats: Vec<(usize, f64)> = x
            .iter()
            .filter_map(|(name, value)| model.feature_index.get(name).map(|&f| (f, value)))
            .collect();
        indexed.push((feats, y));
    }
    Ok(IndexedProblem {
        n_classes: model.classes.len(),
        n_features: model.feature_names.len(),
        instances: indexed,
        inv_sigma2: inv_sigma2(model.config.l2_sigma),
    })
}

fn inv_sigma2(sigma: f64) -> f64 {
    if sigma.is_infinite() {
        0.0
    } else {
        (sigma * sigma).recip()
    }
}

/// Train a model on `(features, class-name)` instances.
pub fn train(
    instances: &[(FeatureVector, String)],
    cfg: &TrainConfig,
) -> Result<MaxEntModel, MaxEntError> {
    train_with_report(instances, cfg).map(|(model, _)| model)
}

/// Same as [`train`] but also returns the optimization trace.
pub fn train_with_report(
    instances: &[(FeatureVector, String)],
    cfg: &TrainConfig,
) -> Result<(MaxEntModel, TrainReport), MaxEntError> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(MaxEntError::NoInstances);
    }
    let classes: Vec<String> = instances
        .iter()
        .map(|(_, c)| c.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(MaxEntError::SingleClass(classes.len()));
    }
    let feature_names: Vec<String> = instances
        .iter()
        .flat_map(|(x, _)| x.iter().map(|(name, _)| name.to_string()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut model = MaxEntModel::with_zero_weights(classes, feature_names, *cfg)?;
    let problem = index_instances(&model, instances)?;

    let wlen = model.classes.len() * model.feature_names.len();
    let init = vec![0.0; wlen + model.classes.len()];
    let outcome = lbfgs_minimize(init, |p| problem.loss_grad(p), cfg);

    model.weights = outcome.params[..wlen].to_vec();
    model.bias = outcome.params[wlen..].to_vec();
    Ok((model, outcome.report))
}

/// Regularized negative log-likelihood of the model on the instances and its
/// exact gradient, keyed `"class::feature"` (bias entries use
/// `"class::_bias"`). Exposed for gradient checking.
pub fn loss_and_gradient(
    model: &MaxEntModel,
    instances: &[(FeatureVector, String)],
) -> Result<(f64, BTreeMap<String, f64>), MaxEntError> {
    let problem = index_instances(model, instances)?;
    let wlen = model.classes.len() * model.feature_names.len();
    let mut params = Vec::with_capacity(wlen + model.classes.len());
    params.extend_from_slice(&model.weights);
    params.extend_from_slice(&model.bias);
    let (loss, grad) = problem.loss_grad(&params);
    let nf = model.feature_names.len();
    let mut map = BTreeMap::new();
    for (k, class) in model.classes.iter().enumerate() {
        for (f, feature) in model.feature_names.iter().enumerate() {
            map.insert(format!("{class}::{feature}"), grad[k * nf + f]);
        }
        map.insert(format!("{class}::_bias"), grad[wlen + k]);
    }
    Ok((loss, map))
}

/// Probability of the Same outcome under either pairwise mode: taken
/// directly in 2-class mode, or as P(Same-Good) + P(Same-Bad) in 3-class
/// mode.
pub fn collapse_to_same_prob(
    classes: &[String],
    probs: &[f64],
    mode: PairwiseMode,
) -> Result<f64, MaxEntError> {
    let expected = mode.classes();
    let mut sorted_expected = expected.clone();
    sorted_expected.sort();
    let mut sorted_got: Vec<String> = classes.to_vec();
    sorted_got.sort();
    if sorted_expected != sorted_got || probs.len() != classes.len() {
        return Err(MaxEntError::ClassSetMismatch {
            expected,
            got: classes.to_vec(),
        });
    }
    let prob_of = |name: &str| -> f64 {
        classes
            .iter()
            .position(|c| c == name)
            .map(|i| probs[i])
            .expect("class present")
    };
    Ok(match mode {
        PairwiseMode::TwoClass => prob_of(CLASS_SAME),
        PairwiseMode::ThreeClass => prob_of(CLASS_SAME_GOOD) + prob_of(CLASS_SAME_BAD),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fv(entries: &[(&str, f64)]) -> FeatureVector {
        let mut v = FeatureVector::new();
        for (name, value) in entries {
            v.insert(name, *value);
        }
        v
    }

    fn separable_instances() -> Vec<(FeatureVector, String)> {
        let mut out = Vec::new();
        for _ in 0..10 {
            out.push((fv(&[("x", 1.0)]), "A".to_string()));
            out.push((fv(&[]), "B".to_string()));
        }
        out
    }

    #[test]
    fn separable_problem_learns() {
        let cfg = TrainConfig {
            l2_sigma: 10.0,
            ..TrainConfig::default()
        };
        let model = train(&separable_instances(), &cfg).unwrap();
        let p_a = model.prob_of(&fv(&[("x", 1.0)]), "A").unwrap();
        assert!(p_a > 0.9, "P(A|x=1) = {p_a}");
        let p_b = model.prob_of(&fv(&[]), "B").unwrap();
        assert!(p_b > 0.9, "P(B|x=0) = {p_b}");
    }

    #[test]
    fn conflicting_labels_recover_class_frequency() {
        // Intercept-only logistic model: the MLE of P(class) is the
        // empirical class frequency.
        let mut instances = Vec::new();
        for _ in 0..3 {
            instances.push((fv(&[("c", 1.0)]), "A".to_string()));
        }
        for _ in 0..7 {
            instances.push((fv(&[("c", 1.0)]), "B".to_string()));
        }
        let cfg = TrainConfig {
            l2_sigma: f64::INFINITY,
            convergence_tol: 1e-10,
            ..TrainConfig::default()
        };
        let model = train(&instances, &cfg).unwrap();
        let p = model.predict_proba(&fv(&[("c", 1.0)]));
        assert!((p[0] - 0.3).abs() < 1e-4, "P(A) = {}", p[0]);
        assert!((p[1] - 0.7).abs() < 1e-4, "P(B) = {}", p[1]);
    }

    #[test]
    fn tiny_sigma_drives_weights_to_zero() {
        let cfg = TrainConfig {
            l2_sigma: 1e-6,
            ..TrainConfig::default()
        };
        let model = train(&separable_instances(), &cfg).unwrap();
        let w = model.weight("A", "x").unwrap();
        assert!(w.abs() < 1e-3, "weight {w} not shrunk");
        // Biases are unregularized, but with balanced classes they stay
        // symmetric, so predictions are near uniform.
        let p = model.predict_proba(&fv(&[("x", 1.0)]));
        assert!((p[0] - 0.5).abs() < 0.01);
    }

    #[test]
    fn degenerate_training_inputs_error() {
        assert!(matches!(
            train(&[], &TrainConfig::default()),
            Err(MaxEntError::NoInstances)
        ));
        let one_class = vec![(fv(&[("x", 1.0)]), "A".to_string())];
        assert!(matches!(
            train(&one_class, &TrainConfig::default()),
            Err(MaxEntError::SingleClass(1))
        ));
    }

    #[test]
    fn zero_weights_predict_uniform() {
        let model = MaxEntModel::with_zero_weights(
            vec!["A".into(), "B".into(), "C".into()],
            vec!["x".into()],
            TrainConfig::default(),
        )
        .unwrap();
        let p = model.predict_proba(&fv(&[("x", 5.0)]));
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_class_softmax_matches_sigmoid() {
        let mut model = MaxEntModel::with_zero_weights(
            vec!["A".into(), "B".into()],
            vec!["x".into()],
            TrainConfig::default(),
        )
        .unwrap();
        model.set_weight("A", "x", 1.7);
        let x = fv(&[("x", 1.0)]);
        let p = model.predict_proba(&x);
        let d = 1.7f64;
        assert!((p[0] - 1.0 / (1.0 + (-d).exp())).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut model = MaxEntModel::with_zero_weights(
                vec!["A".into(), "B".into(), "C".into()],
                vec!["f0".into(), "f1".into(), "f2".into()],
                TrainConfig::default(),
            )
            .unwrap();
            for class in ["A", "B", "C"] {
                for feat in ["f0", "f1", "f2"] {
                    model.set_weight(class, feat, rng.random_range(-3.0..3.0));
                }
                model.set_bias(class, rng.random_range(-1.0..1.0));
            }
            let x = fv(&[
                ("f0", rng.random_range(-2.0..2.0)),
                ("f1", rng.random_range(-2.0..2.0)),
            ]);
            let p = model.predict_proba(&x);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn unseen_features_are_ignored() {
        let model = train(&separable_instances(), &TrainConfig::default()).unwrap();
        let with_junk = fv(&[("x", 1.0), ("never_seen", 99.0)]);
        let without = fv(&[("x", 1.0)]);
        assert_eq!(
            model.predict_proba(&with_junk),
            model.predict_proba(&without)
        );
    }

    fn random_problem(rng: &mut ChaCha8Rng) -> (MaxEntModel, Vec<(FeatureVector, String)>) {
        let n_classes = rng.random_range(2..=3usize);
        let n_features = rng.random_range(1..=10usize);
        let n_instances = rng.random_range(2..=30usize);
        let classes: Vec<String> = (0..n_classes).map(|k| format!("K{k}")).collect();
        let features: Vec<String> = (0..n_features).map(|f| format!("f{f}")).collect();
        let sigma = [0.5, 1.0, 10.0, f64::INFINITY][rng.random_range(0..4usize)];
        let cfg = TrainConfig {
            l2_sigma: sigma,
            ..TrainConfig::default()
        };
        let mut model =
            MaxEntModel::with_zero_weights(classes.clone(), features.clone(), cfg).unwrap();
        for class in &classes {
            for feature in &features {
                model.set_weight(class, feature, rng.random_range(-2.0..2.0));
            }
            model.set_bias(class, rng.random_range(-1.0..1.0));
        }
        let mut instances = Vec::new();
        for _ in 0..n_instances {
            let mut x = FeatureVector::new();
            for feature in &features {
                if rng.random_bool(0.6) {
                    x.insert(feature, rng.random_range(-2.0..2.0));
                }
            }
            let y = classes[rng.random_range(0..n_classes)].clone();
            instances.push((x, y));
        }
        (model, instances)
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let h = 1e-5;
        for _ in 0..20 {
            let (model, instances) = random_problem(&mut rng);
            let (_, grad) = loss_and_gradient(&model, &instances).unwrap();
            for (key, &g) in &grad {
                let (class, feature) = key.split_once("::").unwrap();
                let mut plus = model.clone();
                let mut minus = model.clone();
                if feature == "_bias" {
                    let b = model.bias_of(class).unwrap();
                    plus.set_bias(class, b + h);
                    minus.set_bias(class, b - h);
                } else {
                    let w = model.weight(class, feature).unwrap();
                    plus.set_weight(class, feature, w + h);
                    minus.set_weight(class, feature, w - h);
                }
                let (lp, _) = loss_and_gradient(&plus, &instances).unwrap();
                let (lm, _) = loss_and_gradient(&minus, &instances).unwrap();
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fd - g).abs() / fd.abs().max(g.abs()).max(1.0);
                assert!(rel < 1e-5, "{key}: fd={fd} analytic={g} rel={rel}");
            }
        }
    }

    #[test]
    fn loss_is_zero_on_empty_instances_without_prior() {
        let model = MaxEntModel::with_zero_weights(
            vec!["A".into(), "B".into()],
            vec!["x".into()],
            TrainConfig {
                l2_sigma: f64::INFINITY,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let (loss, grad) = loss_and_gradient(&model, &[]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.values().all(|&g| g == 0.0));
    }

    #[test]
    fn training_loss_is_non_increasing_and_beats_zero_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (_, instances) = random_problem(&mut rng);
            let classes: BTreeSet<&str> = instances.iter().map(|(_, c)| c.as_str()).collect();
            if classes.len() < 2 {
                continue;
            }
            let (model, report) = train_with_report(&instances, &TrainConfig::default()).unwrap();
            for w in report.loss_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "loss increased: {w:?}");
            }
            assert!(report.final_loss <= report.initial_loss);
            // At convergence the gradient norm meets the tolerance unless the
            // iteration limit was hit.
            if report.converged {
                let (_, grad) = loss_and_gradient(&model, &instances).unwrap();
                let norm = grad.values().map(|g| g * g).sum::<f64>().sqrt();
                assert!(norm < model.config().convergence_tol * 10.0);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let instances = separable_instances();
        let cfg = TrainConfig::default();
        let a = train(&instances, &cfg).unwrap();
        let b = train(&instances, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn monotone_class_response() {
        let model = train(&separable_instances(), &TrainConfig::default()).unwrap();
        let mut last = 0.0;
        for i in 0..5 {
            let p = model.prob_of(&fv(&[("x", i as f64)]), "A").unwrap();
            assert!(p > last, "P(A) not increasing in x");
            last = p;
        }
    }

    #[test]
    fn model_json_round_trip_and_versioning() {
        let model = train(&separable_instances(), &TrainConfig::default()).unwrap();
        let json = model.to_json();
        let loaded = MaxEntModel::from_json(&json).unwrap();
        assert_eq!(model, loaded);
        let bumped = json.replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(matches!(
            MaxEntModel::from_json(&bumped),
            Err(MaxEntError::UnknownFormatVersion(99))
        ));
    }

    #[test]
    fn collapse_same_probability() {
        let three = PairwiseMode::ThreeClass.classes();
        let p = collapse_to_same_prob(&three, &[0.3, 0.4, 0.3], PairwiseMode::ThreeClass).unwrap();
        assert!((p - 0.7).abs() < 1e-12);
        let two = PairwiseMode::TwoClass.classes();
        let p = collapse_to_same_prob(&two, &[0.6, 0.4], PairwiseMode::TwoClass).unwrap();
        assert!((p - 0.6).abs() < 1e-12);
        let uniform =
            collapse_to_same_prob(&three, &[1.0 / 3.0; 3], PairwiseMode::ThreeClass).unwrap();
        assert!((uniform - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            collapse_to_same_prob(&two, &[0.6, 0.4], PairwiseMode::ThreeClass),
            Err(MaxEntError::ClassSetMismatch { .. })
        ));
    }
}
