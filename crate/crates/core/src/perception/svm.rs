//! Linear soft-margin SVM trained by stochastic subgradient descent on the
//! primal hinge loss (Pegasos schedule, bias folded in as a constant
//! feature). The iterate with the lowest primal objective seen at an epoch
//! boundary is returned, so recorded checkpoints never increase.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SvmSettings {
    /// Hinge-loss penalty `C` in `½‖w‖² + C·Σ hinge`.
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmSettings {
    fn default() -> Self {
        Self {
            c: 10.0,
            epochs: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub negative_label: String,
    pub positive_label: String,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmTraining {
    pub model: SvmModel,
    /// Best primal objective after each epoch.
    pub objective_checkpoints: Vec<f64>,
}

impl SvmModel {
    pub fn validate(&self) -> Result<()> {
        let d = self.weights.len();
        Error::check_dim(d, self.feature_mean.len())?;
        Error::check_dim(d, self.feature_scale.len())?;
        let finite = self
            .weights
            .iter()
            .chain(&self.feature_mean)
            .chain(&self.feature_scale)
            .chain(core::iter::once(&self.bias))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("svm model"));
        }
        if self.feature_scale.iter().any(|s| *s <= 0.0) {
            return Err(Error::invalid("feature_scale", "scales must be positive"));
        }
        Ok(())
    }

    /// Signed margin `w·x̂ + b` of a raw feature vector.
    pub fn decision(&self, feature: &[f64]) -> Result<f64> {
        Error::check_dim(self.weights.len(), feature.len())?;
        Ok(feature
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .zip(&self.weights)
            .map(|(((x, m), s), w)| w * (x - m) / s)
            .sum::<f64>()
            + self.bias)
    }

    /// Label and signed score; a zero score goes to the positive class.
    pub fn classify(&self, feature: &[f64]) -> Result<(&str, f64)> {
        let score = self.decision(feature)?;
        let label = if score >= 0.0 {
            self.positive_label.as_str()
        } else {
            self.negative_label.as_str()
        };
        Ok((label, score))
    }
}

/// `svm_classify`.
pub fn svm_classify(model: &SvmModel, feature: &[f64]) -> Result<(String, f64)> {
    model.classify(feature).map(|(l, s)| (l.to_string(), s))
}

fn standardization(features: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = features.len() as f64;
    let d = features[0].len();
    let mut mean = alloc::vec![0.0; d];
    for f in features {
        for (m, x) in mean.iter_mut().zip(f) {
            *m += x / n;
        }
    }
    let mut scale = alloc::vec![0.0; d];
    for f in features {
        for ((s, x), m) in scale.iter_mut().zip(f).zip(&mean) {
            *s += (x - m) * (x - m) / n;
        }
    }
    for s in &mut scale {
        *s = libm::sqrt(*s);
        if !(*s > 1e-12) {
            *s = 1.0;
        }
    }
    (mean, scale)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn primal_objective(w: &[f64], xs: &[Vec<f64>], ys: &[f64], c: f64) -> f64 {
    let hinge: f64 = xs.iter().zip(ys).map(|(x, y)| (1.0 - y * dot(w, x)).max(0.0)).sum();
    0.5 * dot(w, w) + c * hinge
}

/// Trains a binary classifier; `labels[i] == true` marks the positive class.
pub fn svm_train(
    features: &[Vec<f64>],
    labels: &[bool],
    class_names: (&str, &str),
    settings: &SvmSettings,
) -> Result<SvmTraining> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: features.len(),
            right: labels.len(),
        });
    }
    if !labels.iter().any(|l| *l) || labels.iter().all(|l| *l) {
        return Err(Error::SingleClass);
    }
    if !(settings.c > 0.0 && settings.c.is_finite()) {
        return Err(Error::invalid("c", "penalty must be positive"));
    }
    let d = features[0].len();
    for f in features {
        Error::check_dim(d, f.len())?;
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("svm features"));
        }
    }

    let (mean, scale) = standardization(features);
    // standardized features with a trailing constant for the bias
    let xs: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            f.iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((x, m), s)| (x - m) / s)
                .chain(core::iter::once(1.0))
                .collect()
        })
        .collect();
    let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();

    let n = xs.len();
    let reg = 1.0 / (settings.c * n as f64);
    let radius = 1.0 / libm::sqrt(reg);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = alloc::vec![0.0; d + 1];
    let mut best_w = w.clone();
    let mut best_obj = primal_objective(&w, &xs, &ys, settings.c);
    let mut checkpoints = Vec::with_capacity(settings.epochs);
    let mut step = 0usize;
    for _ in 0..settings.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            step += 1;
            let eta = 1.0 / (reg * step as f64);
            let margin = ys[i] * dot(&w, &xs[i]);
            let shrink = 1.0 - eta * reg;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (v, x) in w.iter_mut().zip(&xs[i]) {
                    *v += eta * ys[i] * x;
                }
            }
            let norm = libm::sqrt(dot(&w, &w));
            if norm > radius {
                let f = radius / norm;
                w.iter_mut().for_each(|v| *v *= f);
            }
        }
        let obj = primal_objective(&w, &xs, &ys, settings.c);
        if obj < best_obj {
            best_obj = obj;
            best_w.clone_from(&w);
        }
        checkpoints.push(best_obj);
    }

    let bias = best_w[d];
    best_w.truncate(d);
    Ok(SvmTraining {
        model: SvmModel {
            weights: best_w,
            bias,
            negative_label: class_names.0.to_string(),
            positive_label: class_names.1.to_string(),
            feature_mean: mean,
            feature_scale: scale,
        },
        objective_checkpoints: checkpoints,
    })
}

/// One binary model per class (class vs the rest); highest score wins.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OneVsRest {
    pub models: Vec<SvmModel>,
}

pub const REST_LABEL: &str = "rest";

impl OneVsRest {
    pub fn train(features: &[Vec<f64>], labels: &[&str], settings: &SvmSettings) -> Result<Self> {
        let mut classes: Vec<&str> = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::SingleClass);
        }
        let models = classes
            .iter()
            .map(|class| {
                let binary: Vec<bool> = labels.iter().map(|l| l == class).collect();
                svm_train(features, &binary, (REST_LABEL, class), settings).map(|t| t.model)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { models })
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.models.iter().map(|m| m.positive_label.as_str())
    }

    /// Class with the highest one-vs-rest score, and that score.
    pub fn classify(&self, feature: &[f64]) -> Result<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for m in &self.models {
            let s = m.decision(feature)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((m.positive_label.as_str(), s));
            }
        }
        best.ok_or_else(|| Error::invalid("models", "classifier has no classes"))
    }
}
