use rand_distr::{Distribution, StandardNormal};

use crate::config::{MaddpgConfig, NoiseKind};
use crate::seeds::SimRng;

/// Per-agent additive exploration noise on the score vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationNoise {
    pub kind: NoiseKind,
    pub mean: f64,
    pub sigma: f64,
    sigma0: f64,
    state: Vec<f64>,
}

impl ExplorationNoise {
    pub fn new(hp: &MaddpgConfig, dims: usize) -> Self {
        let sigma = hp.noise_var.sqrt();
        Self { kind: hp.noise_kind, mean: hp.noise_mean, sigma, sigma0: sigma, state: vec![0.0; dims] }
    }

    /// Adds one noise draw to each score.
    pub fn perturb(&mut self, scores: &mut [f64], rng: &mut SimRng) {
        for (k, s) in scores.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            *s += match self.kind {
                NoiseKind::Gaussian => self.mean + self.sigma * z,
                NoiseKind::ZeroMeanGaussian => self.sigma * z,
                NoiseKind::OrnsteinUhlenbeck => {
                    let x = &mut self.state[k];
                    *x += -self.mean * *x + self.sigma * z;
                    *x
                }
            };
        }
    }

    /// End-of-episode decay of the std, floored at `floor_frac` of its start.
    pub fn decay(&mut self, factor: f64, floor_frac: f64) {
        self.sigma = (self.sigma * factor).max(self.sigma0 * floor_frac);
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }
}
