use rand::Rng;

use super::NnError;

/// Feed-forward network with ReLU hidden layers and a linear output.
///
/// Layer `l` stores its weights input-major (`w[i * out + j]`) followed by
/// its biases. With no hidden layers the network is affine, which on one-hot
/// inputs is a lookup table of logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Layer activations saved by [`Mlp::forward_trace`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[l]` the post-activation of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map_or(&[], Vec::as_slice)
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Network of the given layer sizes with all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self, NnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NnError::EmptyNetwork);
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes)?;
        let mut off = 0;
        for w in net.sizes.clone().windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[0] * w[1]] {
                *p = rng.gen_range(-bound..bound);
            }
            off += w[0] * w[1] + w[1];
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(NnError::Shape {
                expected: net.params.len(),
                found: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::Shape {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn layer(&self, x: &[f64], l: usize, off: usize, out: &mut Vec<f64>) {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[off..off + n_in * n_out];
        let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
        out.clear();
        out.extend_from_slice(b);
        for (i, &xi) in x.iter().enumerate() {
            // one-hot and plane inputs are mostly zeros
            if xi != 0.0 {
                for (o, wij) in out.iter_mut().zip(&w[i * n_out..(i + 1) * n_out]) {
                    *o += xi * wij;
                }
            }
        }
        if l + 2 < self.sizes.len() {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            self.layer(&cur, l, off, &mut next);
            std::mem::swap(&mut cur, &mut next);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace, NnError> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            let mut out = Vec::with_capacity(self.sizes[l + 1]);
            self.layer(&acts[l], l, off, &mut out);
            acts.push(out);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        Ok(Trace { acts })
    }

    /// Adds `d(output . dout)/d params` to `grad`.
    pub fn backward(&self, trace: &Trace, dout: &[f64], grad: &mut [f64]) -> Result<(), NnError> {
        if dout.len() != self.output_dim() {
            return Err(NnError::Shape {
                expected: self.output_dim(),
                found: dout.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(NnError::Shape {
                expected: self.params.len(),
                found: grad.len(),
            });
        }
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = dout.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &trace.acts[l];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (g, d) in gb.iter_mut().zip(&delta) {
                *g += d;
            }
            for (i, &xi) in input.iter().enumerate() {
                if xi != 0.0 {
                    for (g, d) in gw[i * n_out..(i + 1) * n_out].iter_mut().zip(&delta) {
                        *g += xi * d;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (i, p) in prev.iter_mut().enumerate() {
                    // ReLU passes gradient only where the unit was active
                    if input[i] > 0.0 {
                        *p = w[i * n_out..(i + 1) * n_out]
                            .iter()
                            .zip(&delta)
                            .map(|(w, d)| w * d)
                            .sum();
                    }
                }
                delta = prev;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 4, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(net.n_params(), 3 * 4 + 4 + 4 * 4 + 4 + 4 * 2 + 2);
    }

    #[test]
    fn hand_computed_forward() {
        // 1 -> 1 -> 1 -> 1: y = w3 relu(w2 relu(w1 x + b1) + b2) + b3
        let net = Mlp::from_params(&[1, 1, 1, 1], vec![2.0, 0.5, -1.0, 3.0, 4.0, 0.25]).unwrap();
        // x = 1: h1 = 2.5, h2 = relu(-2.5 + 3) = 0.5, y = 4 * 0.5 + 0.25
        assert_eq!(net.forward(&[1.0]).unwrap(), vec![2.25]);
        // x = 2: h1 = 4.5, h2 = relu(-1.5) = 0, y = 0.25
        assert_eq!(net.forward(&[2.0]).unwrap(), vec![0.25]);
    }

    #[test]
    fn linear_net_on_one_hot_is_a_table() {
        let mut rng = stream(1, &[]);
        let net = Mlp::init(&[4, 3], &mut rng).unwrap();
        let y = net.forward(&[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(y, net.params()[6..9].to_vec());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient_and_shapes_are_checked() {
        let mut rng = stream(2, &[]);
        let net = Mlp::init(&[3, 5, 2], &mut rng).unwrap();
        let trace = net.forward_trace(&[0.3, -0.1, 0.7]).unwrap();
        assert_eq!(trace.output(), net.forward(&[0.3, -0.1, 0.7]).unwrap().as_slice());
        let mut g = vec![0.0; net.n_params()];
        net.backward(&trace, &[0.0, 0.0], &mut g).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.backward(&trace, &[1.0], &mut g).is_err());
        assert!(Mlp::zeros(&[3]).is_err());
    }
}
