//! Trajectory agreement metrics.

use alloc::vec::Vec;

use crate::synergy::SynergyPoint;
use crate::{Error, Result};

fn check_lengths(actual: &[f64], predicted: &[f64], min: usize) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    if actual.len() < min {
        return Err(Error::InsufficientSamples {
            needed: min,
            got: actual.len(),
        });
    }
    Ok(())
}

/// Pearson correlation coefficient, with squared deviations under the radicals.
pub fn pearson_r(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted, 2)?;
    let n = actual.len() as f64;
    let ma = actual.iter().sum::<f64>() / n;
    let mp = predicted.iter().sum::<f64>() / n;
    let (mut sap, mut saa, mut spp) = (0.0, 0.0, 0.0);
    for (a, p) in actual.iter().zip(predicted) {
        let (da, dp) = (a - ma, p - mp);
        sap += da * dp;
        saa += da * da;
        spp += dp * dp;
    }
    if !(saa > 0.0 && spp > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((sap / (libm::sqrt(saa) * libm::sqrt(spp))).clamp(-1.0, 1.0))
}

/// Root mean squared difference.
pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted, 1)?;
    let sum: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(libm::sqrt(sum / actual.len() as f64))
}

/// R and rMSE computed per synergy component and averaged uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentScores {
    pub r: f64,
    pub rmse: f64,
}

pub fn component_scores(actual: &[SynergyPoint], predicted: &[SynergyPoint]) -> Result<ComponentScores> {
    if actual.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: actual.len(),
            right: predicted.len(),
        });
    }
    let dim = actual.first().map_or(0, |p| p.len());
    if dim == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    for p in actual.iter().chain(predicted) {
        Error::check_dim(dim, p.len())?;
    }
    let (mut r, mut e) = (0.0, 0.0);
    for c in 0..dim {
        let a: Vec<f64> = actual.iter().map(|p| p[c]).collect();
        let q: Vec<f64> = predicted.iter().map(|p| p[c]).collect();
        r += pearson_r(&a, &q)?;
        e += rmse(&a, &q)?;
    }
    Ok(ComponentScores {
        r: r / dim as f64,
        rmse: e / dim as f64,
    })
}
