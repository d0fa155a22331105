use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected network. Parameters are stored flat, layer by layer, each
/// layer as its row-major `out × in` weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
    pub params: Vec<f64>,
}

impl DenseNet {
    /// Zero-initialized network; `activations[l]` follows layer `l`.
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(BaselineError::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(BaselineError::Shape(format!(
                "{} activations for {} layers",
                activations.len(),
                sizes.len() - 1
            )));
        }
        let count = Self::count_for(&sizes);
        Ok(Self { sizes, activations, params: vec![0.0; count] })
    }

    /// Hidden layers use `hidden`, the output layer is linear.
    pub fn mlp(sizes: Vec<usize>, hidden: Activation) -> Result<Self> {
        let layers = sizes.len().saturating_sub(1);
        let mut acts = vec![hidden; layers];
        if let Some(last) = acts.last_mut() {
            *last = Activation::Identity;
        }
        Self::new(sizes, acts)
    }

    pub fn count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    /// Weights from `U(−1/√fan_in, 1/√fan_in)`, biases zero.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut self.params[offset..offset + fan_in * fan_out] {
                *p = rng.gen_range(-bound..=bound);
            }
            offset += fan_in * fan_out;
            self.params[offset..offset + fan_out].iter_mut().for_each(|b| *b = 0.0);
            offset += fan_out;
        }
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(BaselineError::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Pre-activations and activations of every layer, input first.
    fn trace(&self, params: &[f64], input: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        self.check_params(params)?;
        if input.len() != self.sizes[0] {
            return Err(BaselineError::Shape(format!("input length {} != {}", input.len(), self.sizes[0])));
        }
        let mut pre = Vec::with_capacity(self.activations.len());
        let mut post = vec![input.to_vec()];
        let mut offset = 0;
        for (w, &act) in self.sizes.windows(2).zip(&self.activations) {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[offset..offset + n_in * n_out];
            let bias = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let x = post.last().expect("input pushed");
            let z: Vec<f64> = (0..n_out)
                .map(|o| bias[o] + weights[o * n_in..(o + 1) * n_in].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            let a = z.iter().map(|&v| act.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Ok((pre, post))
    }

    pub fn forward_with(&self, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
        let (_, mut post) = self.trace(params, input)?;
        Ok(post.pop().expect("at least one layer"))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_with(&self.params, input)
    }

    /// Gradient of `upstream · forward(input)` with respect to the flat
    /// parameters.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        let (pre, post) = self.trace(&self.params, input)?;
        let n_layers = self.activations.len();
        if upstream.len() != self.sizes[n_layers] {
            return Err(BaselineError::Shape(format!(
                "upstream length {} != {}",
                upstream.len(),
                self.sizes[n_layers]
            )));
        }
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut delta_out = upstream.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let delta: Vec<f64> = (0..n_out)
                .map(|o| delta_out[o] * self.activations[l].derivative(pre[l][o], post[l + 1][o]))
                .collect();
            let x = &post[l];
            let base = offsets[l];
            for o in 0..n_out {
                for i in 0..n_in {
                    grad[base + o * n_in + i] = delta[o] * x[i];
                }
                grad[base + n_in * n_out + o] = delta[o];
            }
            if l > 0 {
                let weights = &self.params[base..base + n_in * n_out];
                delta_out = (0..n_in).map(|i| (0..n_out).map(|o| weights[o * n_in + i] * delta[o]).sum()).collect();
            }
        }
        Ok(grad)
    }

    pub fn describe(&self) -> String {
        let acts: Vec<String> = self.activations.iter().map(|a| format!("{a:?}").to_lowercase()).collect();
        format!(
            "dense {} ({}) params={}",
            self.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("->"),
            acts.join(","),
            self.params.len()
        )
    }
}
