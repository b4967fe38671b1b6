//! Central finite-difference checks of analytic gradients.

/// Outcome of comparing an analytic gradient against finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

impl GradCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

/// Central differences `(f(p + h e_i) - f(p - h e_i)) / 2h` for every coordinate.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, params: &[f64], h: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = f(&p);
            p[i] = orig - h;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`; the floor keeps
/// coordinates whose true gradient is zero from dividing by rounding noise.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn check(f: impl FnMut(&[f64]) -> f64, params: &[f64], analytic: &[f64], h: f64) -> GradCheck {
    assert_eq!(params.len(), analytic.len(), "gradient length");
    let numeric = numeric_gradient(f, params, h);
    let mut worst = (0, 0.0f64);
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = relative_error(*a, *n, 1e-6);
        if e > worst.1 {
            worst = (i, e);
        }
    }
    GradCheck {
        numeric,
        max_rel_error: worst.1,
        worst_index: worst.0,
    }
}
