use crate::prob::{expit, log1p_exp, RngHandle};

/// Map from an unconstrained sampling coordinate to the parameter's support.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    Identity,
    /// Positive reals, `x = exp(z)`.
    Log,
    /// Unit interval, `x = expit(z)`.
    Logit,
}

impl Transform {
    pub fn forward(self, z: f64) -> f64 {
        match self {
            Transform::Identity => z,
            Transform::Log => z.exp(),
            Transform::Logit => expit(z),
        }
    }

    pub fn inverse(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Logit => (x / (1.0 - x)).ln(),
        }
    }

    /// `log |dx/dz|` at `z`.
    pub fn log_jacobian(self, z: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::Log => z,
            Transform::Logit => -log1p_exp(-z) - log1p_exp(z),
        }
    }
}

/// An unnormalized log posterior together with how it should be sampled.
///
/// `log_posterior` is evaluated on the constrained scale; the sampler adds
/// the Jacobian terms of `transforms` itself.
pub trait LogPosteriorTarget: Sync {
    fn dim(&self) -> usize;

    fn param_names(&self) -> Vec<String>;

    fn log_posterior(&self, x: &[f64]) -> f64;

    fn initial_point(&self) -> Vec<f64>;

    /// Partition of `0..dim` into update blocks.
    fn blocks(&self) -> Vec<Vec<usize>> {
        vec![(0..self.dim()).collect()]
    }

    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Identity; self.dim()]
    }

    /// Names of the retained columns; defaults to the parameters themselves.
    fn output_names(&self) -> Vec<String> {
        self.param_names()
    }

    /// Retained values for a parameter point (derived quantities go here).
    fn output(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    /// Exact draw of block `block` from its full conditional at `x`, when
    /// one is available. Blocks that return `Some` skip the Metropolis step.
    fn conditional_draw(&self, _block: usize, _x: &[f64], _rng: &mut RngHandle) -> Option<Vec<f64>> {
        None
    }

    /// Warnings about the data that travel with the draws.
    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Checks that `blocks` partitions `0..dim` exactly.
pub fn validate_blocks(blocks: &[Vec<usize>], dim: usize) -> Result<(), String> {
    let mut seen = vec![false; dim];
    for b in blocks {
        if b.is_empty() {
            return Err("empty block".into());
        }
        for &i in b {
            if i >= dim {
                return Err(format!("block index {i} outside dimension {dim}"));
            }
            if seen[i] {
                return Err(format!("coordinate {i} appears in two blocks"));
            }
            seen[i] = true;
        }
    }
    match seen.iter().position(|s| !s) {
        Some(i) => Err(format!("coordinate {i} is in no block")),
        None => Ok(()),
    }
}
