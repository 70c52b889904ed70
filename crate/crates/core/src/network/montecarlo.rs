use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::deploy::{hw_accuracy, Pipeline};
use super::NetworkError;
use crate::io::dataset::Dataset;

/// Independent Gaussian resistance spread on every resistive element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationModel {
    /// Relative 3σ of each resistance.
    pub sigma3: f64,
    pub trials: usize,
    /// Runs take it from the top-level config seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for VariationModel {
    fn default() -> Self {
        Self {
            sigma3: 0.2,
            trials: 100,
            seed: 1,
        }
    }
}

impl VariationModel {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if !(self.sigma3 >= 0.0 && self.sigma3 < 1.0) {
            return Err(NetworkError::InvalidParameter(format!(
                "sigma3 = {} must lie in [0, 1)",
                self.sigma3
            )));
        }
        if self.trials == 0 {
            return Err(NetworkError::InvalidParameter("trials must be positive".into()));
        }
        Ok(())
    }

    /// Resistance multiplier `1 + (σ3/3)ξ`, ξ standard normal truncated at ±3.
    fn factor<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.sigma3 == 0.0 {
            return 1.0;
        }
        loop {
            let xi: f64 = rng.sample(StandardNormal);
            if xi.abs() <= 3.0 {
                return 1.0 + self.sigma3 / 3.0 * xi;
            }
        }
    }
}

/// Copy of `p` with every synapse cell (OFF cells and dummies too), neuron MTJ,
/// heavy-metal load and axon reference perturbed independently.
pub fn apply_variation<R: Rng>(p: &Pipeline, model: &VariationModel, rng: &mut R) -> Pipeline {
    let mut out = p.clone();
    for layer in &mut out.layers {
        layer.xbar.map_conductances(|_, _, _, g| g / model.factor(rng));
        for d in &mut layer.xbar.dummy {
            *d /= model.factor(rng);
        }
        for r in &mut layer.xbar.r_neuron {
            *r *= model.factor(rng);
        }
        for n in &mut layer.neurons {
            *n = n.with_resistance_scale(model.factor(rng));
        }
        for a in &mut layer.axons {
            a.r_ref *= model.factor(rng);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    /// Accuracy of the nominal hardware.
    pub baseline: f64,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl McSummary {
    /// Baseline minus mean, in accuracy points (0..100).
    pub fn degradation_points(&self) -> f64 {
        100.0 * (self.baseline - self.mean)
    }
}

/// Accuracy of `p` on `ds` over `model.trials` varied instances. Trial `t` draws from its
/// own stream, so results do not depend on thread count.
pub fn monte_carlo(p: &Pipeline, ds: &Dataset, model: &VariationModel) -> Result<McSummary, NetworkError> {
    model.validate()?;
    let baseline = hw_accuracy(p, ds)?;
    let accuracies = (0..model.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            rng.set_stream(t as u64);
            let varied = apply_variation(p, model, &mut rng);
            hw_accuracy(&varied, ds)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
    let min = accuracies.iter().copied().fold(f64::INFINITY, f64::min);
    let max = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(McSummary {
        baseline,
        accuracies,
        mean,
        min,
        max,
    })
}
