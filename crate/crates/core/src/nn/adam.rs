use super::NnError;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Adam {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub(crate) fn from_parts(beta1: f64, beta2: f64, eps: f64, m: Vec<f64>, v: Vec<f64>, t: u64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            m,
            v,
            t,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// Applies one descent step `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    ///
    /// A gradient with any non-finite entry is rejected and leaves both the
    /// parameters and the optimizer state untouched.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<(), NnError> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(NnError::InvalidLearningRate(lr));
        }
        for len in [params.len(), grad.len()] {
            if len != self.m.len() {
                return Err(NnError::Shape {
                    expected: self.m.len(),
                    found: len,
                });
            }
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient(i));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut adam = Adam::new(2);
        let mut p = vec![0.0, 0.0];
        adam.step(&mut p, &[3.0, -0.01], 1e-3).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-9);
        assert!((p[1] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut adam = Adam::new(3);
        let mut p = vec![0.5, -1.0, 2.0];
        for _ in 0..100 {
            adam.step(&mut p, &[0.0; 3], 0.1).unwrap();
        }
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn rejects_non_finite_and_bad_lr() {
        let mut adam = Adam::new(2);
        let mut p = vec![1.0, 1.0];
        assert_eq!(
            adam.step(&mut p, &[1.0, f64::NAN], 0.1),
            Err(NnError::NonFiniteGradient(1))
        );
        assert_eq!(adam.steps(), 0);
        assert_eq!(p, vec![1.0, 1.0]);
        assert!(adam.step(&mut p, &[1.0, 1.0], 0.0).is_err());
        assert!(adam.step(&mut p, &[1.0], 0.1).is_err());
    }
}
