//! Channel capacity: Blahut-Arimoto, the deterministic shortcut and a KKT check.

use super::channel::Channel;
use super::EmpowermentError;

pub const DEFAULT_TOL_BITS: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

const RELAX_GROWTH: f64 = 1.5;
const RELAX_MAX: f64 = 64.0;

/// Capacity of a channel together with a capacity-achieving input distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    pub capacity_bits: f64,
    pub input_distribution: Vec<f64>,
    pub iterations: usize,
    /// Final upper minus lower capacity bound, in bits.
    pub bracket_gap: f64,
    /// False when `max_iter` ran out before the bracket closed to the tolerance.
    pub converged: bool,
}

/// `D(P(.|x) || rho)` in bits, with `0 log 0 = 0`.
pub fn kl_divergence_bits(row: &[f64], rho: &[f64]) -> f64 {
    row.iter()
        .zip(rho)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, r)| p * (p / r).log2())
        .sum()
}

/// `I(X; Y)` in bits for input distribution `q`.
pub fn mutual_information_bits(channel: &Channel, q: &[f64]) -> f64 {
    let rho = channel.output_marginal(q);
    q.iter()
        .zip(channel.rows())
        .filter(|(qa, _)| **qa > 0.0)
        .map(|(qa, row)| qa * kl_divergence_bits(row, &rho))
        .sum()
}

/// Iterator state of the Blahut-Arimoto recursion.
///
/// After every update the per-input divergences `D(x) = D(P(.|x) || rho)`
/// bracket the capacity between `log2 sum_x q(x) 2^D(x)` and `max_x D(x)`.
#[derive(Debug, Clone)]
pub struct BlahutArimoto<'a> {
    channel: &'a Channel,
    q: Vec<f64>,
    neg_entropy: Vec<f64>,
    rho: Vec<f64>,
    log_rho: Vec<f64>,
    divergence: Vec<f64>,
    lower: f64,
    upper: f64,
    iterations: usize,
}

impl<'a> BlahutArimoto<'a> {
    /// Starts from the uniform input distribution.
    pub fn new(channel: &'a Channel) -> Self {
        let n = channel.n_inputs();
        let neg_entropy = channel
            .rows()
            .map(|row| row.iter().filter(|p| **p > 0.0).map(|p| p * p.log2()).sum())
            .collect();
        let mut state = BlahutArimoto {
            channel,
            q: vec![1.0 / n as f64; n],
            neg_entropy,
            rho: vec![0.0; channel.n_outputs()],
            log_rho: vec![0.0; channel.n_outputs()],
            divergence: vec![0.0; n],
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
        };
        state.evaluate();
        state
    }

    fn evaluate(&mut self) {
        let m = self.channel.n_outputs();
        self.rho.fill(0.0);
        for (q, row) in self.q.iter().zip(self.channel.rows()) {
            if *q > 0.0 {
                for (r, p) in self.rho.iter_mut().zip(row) {
                    *r += q * p;
                }
            }
        }
        for (l, r) in self.log_rho.iter_mut().zip(&self.rho) {
            *l = if *r > 0.0 { r.log2() } else { f64::NEG_INFINITY };
        }
        for (a, d) in self.divergence.iter_mut().enumerate() {
            let row = &self.channel.matrix()[a * m..(a + 1) * m];
            let cross: f64 = row
                .iter()
                .zip(&self.log_rho)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, l)| p * l)
                .sum();
            *d = self.neg_entropy[a] - cross;
        }
        self.upper = self.divergence.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: f64 = self
            .q
            .iter()
            .zip(&self.divergence)
            .map(|(q, d)| q * (d - self.upper).exp2())
            .sum();
        self.lower = self.upper + scaled.log2();
    }

    /// One multiplicative update `q(x) <- q(x) 2^D(x) / Z`.
    pub fn step(&mut self) {
        self.update(1.0);
    }

    /// Over-relaxed update `q(x) <- q(x) 2^(mu D(x)) / Z`.
    ///
    /// `mu` grows while the lower bound keeps rising and falls back to the
    /// plain update as soon as it would drop, so the lower bound stays monotone.
    pub fn relaxed_step(&mut self, mu: &mut f64) {
        if *mu > 1.0 {
            let saved = self.q.clone();
            let before = self.lower;
            self.update(*mu);
            if self.lower >= before {
                *mu = (*mu * RELAX_GROWTH).min(RELAX_MAX);
                return;
            }
            self.q = saved;
            self.iterations -= 1;
            self.evaluate();
            *mu = 1.0;
        }
        self.update(1.0);
        *mu = RELAX_GROWTH;
    }

    fn update(&mut self, mu: f64) {
        for (q, d) in self.q.iter_mut().zip(&self.divergence) {
            *q *= (mu * (d - self.upper)).exp2();
        }
        let z: f64 = self.q.iter().sum();
        self.q.iter_mut().for_each(|q| *q /= z);
        self.iterations += 1;
        self.evaluate();
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn input_distribution(&self) -> &[f64] {
        &self.q
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn finish(self, converged: bool) -> CapacityResult {
        CapacityResult {
            capacity_bits: (0.5 * (self.lower + self.upper)).max(0.0),
            bracket_gap: self.upper - self.lower,
            iterations: self.iterations,
            input_distribution: self.q,
            converged,
        }
    }
}

/// Capacity by (over-relaxed) Blahut-Arimoto iteration, stopped once the capacity bracket
/// is narrower than `tol_bits`. Reports the bracket midpoint.
pub fn blahut_arimoto(channel: &Channel, tol_bits: f64, max_iter: usize) -> Result<CapacityResult, EmpowermentError> {
    if !(tol_bits > 0.0) {
        return Err(EmpowermentError::InvalidParameter(format!(
            "tolerance must be positive, got {tol_bits}"
        )));
    }
    if max_iter == 0 {
        return Err(EmpowermentError::InvalidParameter("max_iter must be at least 1".into()));
    }
    let mut ba = BlahutArimoto::new(channel);
    let mut mu = 1.0;
    while ba.gap() > tol_bits {
        if ba.iterations() >= max_iter {
            return Ok(ba.finish(false));
        }
        ba.relaxed_step(&mut mu);
    }
    Ok(ba.finish(true))
}

/// Capacity of a channel whose rows are all point masses: `log2` of the
/// number of distinct outputs, achieved by the uniform distribution over one
/// representative input per output.
pub fn deterministic_capacity(channel: &Channel) -> Result<CapacityResult, EmpowermentError> {
    let mut first_input_for = vec![None; channel.n_outputs()];
    for (a, row) in channel.rows().enumerate() {
        let mut support = row.iter().enumerate().filter(|(_, p)| **p != 0.0);
        let (out, _) = support.next().ok_or(EmpowermentError::NotDeterministic)?;
        if support.next().is_some() {
            return Err(EmpowermentError::NotDeterministic);
        }
        first_input_for[out].get_or_insert(a);
    }
    let reps: Vec<usize> = first_input_for.into_iter().flatten().collect();
    let mut q = vec![0.0; channel.n_inputs()];
    for &a in &reps {
        q[a] = 1.0 / reps.len() as f64;
    }
    Ok(CapacityResult {
        capacity_bits: (reps.len() as f64).log2(),
        input_distribution: q,
        iterations: 0,
        bracket_gap: 0.0,
        converged: true,
    })
}

/// Outcome of [`kkt_certificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub passed: bool,
    pub capacity_bits: f64,
    /// `D(P(.|x) || rho*)` for every input.
    pub divergences: Vec<f64>,
    pub active: Vec<bool>,
    /// Largest violation of the optimality conditions, in bits (<= 0 when satisfied exactly).
    pub worst_violation: f64,
}

/// Checks the optimality conditions of a capacity-achieving distribution:
/// every input with `q(x) > activity_tol` sits at divergence `C` from the
/// output marginal (within `10 * tol_bits`) and no input exceeds `C` by more.
pub fn kkt_certificate(channel: &Channel, result: &CapacityResult, activity_tol: f64, tol_bits: f64) -> KktReport {
    let rho = channel.output_marginal(&result.input_distribution);
    let slack = 10.0 * tol_bits;
    let c = result.capacity_bits;
    let divergences: Vec<f64> = channel.rows().map(|row| kl_divergence_bits(row, &rho)).collect();
    let active: Vec<bool> = result.input_distribution.iter().map(|q| *q > activity_tol).collect();
    let worst_violation = divergences
        .iter()
        .zip(&active)
        .map(|(d, act)| if *act { (d - c).abs() - slack } else { d - c - slack })
        .fold(f64::NEG_INFINITY, f64::max);
    KktReport {
        passed: worst_violation <= 0.0,
        capacity_bits: c,
        divergences,
        active,
        worst_violation,
    }
}
