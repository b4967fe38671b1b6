//! Per-state empowerment over a [`TabularMdp`].

use std::collections::HashSet;

use rayon::prelude::*;

use super::capacity::{blahut_arimoto, DEFAULT_MAX_ITER, DEFAULT_TOL_BITS};
use super::channel::Channel;
use super::horizon::HorizonSpec;
use super::EmpowermentError;
use crate::grid::{TabularMdp, N_ACTIONS};

/// Default cap on the number of enumerated action sequences (`5^7`).
pub const DEFAULT_SEQUENCE_BUDGET: usize = 78_125;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpowermentOptions {
    pub tol_bits: f64,
    pub max_iter: usize,
    pub sequence_budget: usize,
}

impl Default for EmpowermentOptions {
    fn default() -> Self {
        EmpowermentOptions {
            tol_bits: DEFAULT_TOL_BITS,
            max_iter: DEFAULT_MAX_ITER,
            sequence_budget: DEFAULT_SEQUENCE_BUDGET,
        }
    }
}

type SparseRow = Vec<(usize, f64)>;

fn check_budget(n: usize, budget: usize) -> Result<usize, EmpowermentError> {
    let sequences = u32::try_from(n)
        .ok()
        .and_then(|n| N_ACTIONS.checked_pow(n))
        .filter(|s| *s <= budget)
        .ok_or(EmpowermentError::BudgetExceeded { length: n, budget })?;
    Ok(sequences)
}

/// Distributions of `s_{t+k}` for every open-loop sequence of length
/// `k = 1..=n`, indexed with the first action most significant.
fn sequence_levels(mdp: &TabularMdp, state: usize, n: usize) -> Vec<Vec<SparseRow>> {
    let mut scratch = vec![0.0; mdp.n_states()];
    let mut touched = Vec::new();
    let mut levels: Vec<Vec<SparseRow>> = Vec::with_capacity(n);
    let root = vec![vec![(state, 1.0)]];
    for k in 0..n {
        let prev = if k == 0 { &root } else { &levels[k - 1] };
        let mut level = Vec::with_capacity(prev.len() * N_ACTIONS);
        for row in prev {
            for a in 0..N_ACTIONS {
                for &(s, p) in row {
                    for &(s2, q) in mdp.successors(s, a) {
                        if scratch[s2] == 0.0 {
                            touched.push(s2);
                        }
                        scratch[s2] += p * q;
                    }
                }
                touched.sort_unstable();
                level.push(touched.iter().map(|&s2| (s2, scratch[s2])).collect());
                for &s2 in &touched {
                    scratch[s2] = 0.0;
                }
                touched.clear();
            }
        }
        levels.push(level);
    }
    levels
}

/// Channel from action sequences of length `n` (first action most
/// significant in the input index) to the state reached after them.
pub fn compose_n_step_channel(
    mdp: &TabularMdp,
    state: usize,
    n: usize,
    budget: usize,
) -> Result<Channel, EmpowermentError> {
    if n == 0 {
        return Err(EmpowermentError::InvalidHorizon("sequence length must be >= 1".into()));
    }
    check_state(mdp, state)?;
    let sequences = check_budget(n, budget)?;
    let level = sequence_levels(mdp, state, n).pop().expect("n >= 1");
    let m = mdp.n_states();
    let mut matrix = vec![0.0; sequences * m];
    for (i, row) in level.iter().enumerate() {
        for &(s, p) in row {
            matrix[i * m + s] = p;
        }
    }
    Channel::new(sequences, m, matrix)
}

/// Compact channel (duplicate rows merged, unused outputs dropped) built
/// straight from sparse rows.
fn compact_channel(rows: &[SparseRow]) -> Channel {
    let mut outputs: Vec<usize> = rows.iter().flatten().map(|(s, _)| *s).collect();
    outputs.sort_unstable();
    outputs.dedup();
    let column = |s: usize| outputs.binary_search(&s).expect("output collected above");
    let mut seen = HashSet::new();
    let mut matrix = Vec::new();
    let mut n_inputs = 0;
    for row in rows {
        let key: Vec<(usize, i64)> = row.iter().map(|(s, p)| (*s, (p * 1e12).round() as i64)).collect();
        if seen.insert(key) {
            let start = matrix.len();
            matrix.resize(start + outputs.len(), 0.0);
            for &(s, p) in row {
                matrix[start + column(s)] = p;
            }
            n_inputs += 1;
        }
    }
    Channel::new(n_inputs, outputs.len(), matrix).expect("composed rows are stochastic")
}

fn check_state(mdp: &TabularMdp, state: usize) -> Result<(), EmpowermentError> {
    if state >= mdp.n_states() {
        return Err(EmpowermentError::StateOutOfRange(state));
    }
    Ok(())
}

/// Sizes of the reachable sets after exactly `k = 1..=n` actions on a deterministic MDP.
fn reachable_counts(mdp: &TabularMdp, state: usize, n: usize) -> Result<Vec<usize>, EmpowermentError> {
    if !mdp.is_deterministic() {
        return Err(EmpowermentError::StochasticMdp);
    }
    check_state(mdp, state)?;
    let mut frontier = vec![state];
    let mut mark = vec![false; mdp.n_states()];
    let mut counts = Vec::with_capacity(n);
    for _ in 0..n {
        let mut next = Vec::new();
        for &s in &frontier {
            for a in 0..N_ACTIONS {
                let s2 = mdp.next_state(s, a);
                if !mark[s2] {
                    mark[s2] = true;
                    next.push(s2);
                }
            }
        }
        for &s in &next {
            mark[s] = false;
        }
        counts.push(next.len());
        frontier = next;
    }
    Ok(counts)
}

/// Number of states reachable by some action sequence of length `n`.
pub fn reachable_count(mdp: &TabularMdp, state: usize, n: usize) -> Result<usize, EmpowermentError> {
    if n == 0 {
        return Err(EmpowermentError::InvalidHorizon("sequence length must be >= 1".into()));
    }
    Ok(*reachable_counts(mdp, state, n)?.last().expect("n >= 1"))
}

/// Capacities (bits) of the channels for sequence lengths `1..=n` on a stochastic MDP.
fn stochastic_capacities(
    mdp: &TabularMdp,
    state: usize,
    n: usize,
    opts: &EmpowermentOptions,
) -> Result<Vec<f64>, EmpowermentError> {
    check_state(mdp, state)?;
    check_budget(n, opts.sequence_budget)?;
    sequence_levels(mdp, state, n)
        .iter()
        .map(|level| {
            let channel = compact_channel(level);
            Ok(blahut_arimoto(&channel, opts.tol_bits, opts.max_iter)?.capacity_bits)
        })
        .collect()
}

/// Empowerment (bits) over open-loop sequences of `n` actions.
pub fn n_step_empowerment(
    mdp: &TabularMdp,
    state: usize,
    n: usize,
    opts: &EmpowermentOptions,
) -> Result<f64, EmpowermentError> {
    if n == 0 {
        return Err(EmpowermentError::InvalidHorizon("sequence length must be >= 1".into()));
    }
    if mdp.is_deterministic() {
        Ok((reachable_count(mdp, state, n)? as f64).log2())
    } else {
        check_state(mdp, state)?;
        check_budget(n, opts.sequence_budget)?;
        let level = sequence_levels(mdp, state, n).pop().expect("n >= 1");
        Ok(blahut_arimoto(&compact_channel(&level), opts.tol_bits, opts.max_iter)?.capacity_bits)
    }
}

/// `sum_{k=0}^{H} lambda^k E_{k+1}(state)`. On stochastic MDPs terms longer
/// than `k_max` reuse the `k_max`-length value.
pub fn discounted_empowerment(
    mdp: &TabularMdp,
    state: usize,
    spec: &HorizonSpec,
    opts: &EmpowermentOptions,
) -> Result<f64, EmpowermentError> {
    let HorizonSpec::Discounted { lambda, horizon, k_max } = *spec else {
        return Err(EmpowermentError::InvalidHorizon(format!(
            "expected a discounted horizon, got {spec}"
        )));
    };
    spec.validate()?;
    let terms: Vec<f64> = if mdp.is_deterministic() {
        reachable_counts(mdp, state, horizon + 1)?
            .into_iter()
            .map(|c| (c as f64).log2())
            .collect()
    } else {
        stochastic_capacities(mdp, state, k_max.min(horizon + 1), opts)?
    };
    let mut total = 0.0;
    let mut weight = 1.0;
    for k in 0..=horizon {
        total += weight * terms[k.min(terms.len() - 1)];
        weight *= lambda;
    }
    Ok(total)
}

/// Empowerment of one state under any horizon spec.
pub fn state_empowerment(
    mdp: &TabularMdp,
    state: usize,
    spec: &HorizonSpec,
    opts: &EmpowermentOptions,
) -> Result<f64, EmpowermentError> {
    match *spec {
        HorizonSpec::OneStep => n_step_empowerment(mdp, state, 1, opts),
        HorizonSpec::NStep(n) => n_step_empowerment(mdp, state, n, opts),
        HorizonSpec::Discounted { .. } => discounted_empowerment(mdp, state, spec, opts),
    }
}

/// Per-state empowerment values for one horizon spec, tied to the MDP they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpowermentMap {
    values: Vec<f64>,
    spec: HorizonSpec,
    fingerprint: String,
}

impl EmpowermentMap {
    pub fn from_values(values: Vec<f64>, spec: HorizonSpec, fingerprint: String) -> Self {
        EmpowermentMap {
            values,
            spec,
            fingerprint,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> HorizonSpec {
        self.spec
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn matches(&self, mdp: &TabularMdp) -> bool {
        self.values.len() == mdp.n_states() && self.fingerprint == mdp.fingerprint()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lowest-index state with maximal empowerment.
    pub fn argmax(&self) -> usize {
        let max = self.max();
        self.values.iter().position(|v| *v == max).expect("non-empty map")
    }

    /// Values divided by the maximum, so they lie in `[0, 1]` with 1 at the argmax.
    /// A map that is zero everywhere normalizes to all ones.
    pub fn normalized(&self) -> Vec<f64> {
        let max = self.max();
        if max <= 0.0 {
            return vec![1.0; self.values.len()];
        }
        self.values.iter().map(|v| v / max).collect()
    }

    /// `state,row,col,value_bits` rows, one per state.
    pub fn to_csv(&self, mdp: &TabularMdp) -> String {
        let mut out = String::from("state,row,col,value_bits\n");
        for (s, v) in self.values.iter().enumerate() {
            let (r, c) = mdp.coords(s);
            out.push_str(&format!("{s},{r},{c},{v:.12}\n"));
        }
        out
    }
}

/// Empowerment of every state. States are evaluated in parallel; the
/// result does not depend on scheduling.
pub fn empowerment_map(
    mdp: &TabularMdp,
    spec: &HorizonSpec,
    opts: &EmpowermentOptions,
) -> Result<EmpowermentMap, EmpowermentError> {
    spec.validate()?;
    if !mdp.is_deterministic() {
        let longest = match *spec {
            HorizonSpec::Discounted { horizon, k_max, .. } => k_max.min(horizon + 1),
            other => other.max_sequence_length(),
        };
        check_budget(longest, opts.sequence_budget)?;
    }
    let values = (0..mdp.n_states())
        .into_par_iter()
        .map(|s| state_empowerment(mdp, s, spec, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EmpowermentMap::from_values(values, *spec, mdp.fingerprint()))
}

/// Capacity-achieving one-step action distribution of every state.
pub fn capacity_achieving_policies(
    mdp: &TabularMdp,
    opts: &EmpowermentOptions,
) -> Result<Vec<Vec<f64>>, EmpowermentError> {
    (0..mdp.n_states())
        .into_par_iter()
        .map(|s| {
            let channel = compose_n_step_channel(mdp, s, 1, opts.sequence_budget)?;
            Ok(blahut_arimoto(&channel, opts.tol_bits, opts.max_iter)?.input_distribution)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridLayout, SlipSpec};

    fn open(w: usize, h: usize, slip: f64) -> TabularMdp {
        TabularMdp::build(&GridLayout::open(w, h), SlipSpec::new(slip).unwrap())
    }

    #[test]
    fn one_step_channel_is_action_rows() {
        let mdp = open(4, 4, 0.2);
        let ch = compose_n_step_channel(&mdp, 5, 1, 100).unwrap();
        for a in 0..N_ACTIONS {
            assert_eq!(ch.row(a), mdp.row(5, a));
        }
    }

    #[test]
    fn composed_rows_are_stochastic() {
        let mdp = open(5, 5, 0.2);
        for n in 1..=4 {
            let ch = compose_n_step_channel(&mdp, 12, n, 1000).unwrap();
            assert_eq!(ch.n_inputs(), 5usize.pow(n as u32));
        }
    }

    #[test]
    fn two_step_reach_is_manhattan_ball() {
        let mdp = open(9, 9, 0.0);
        let center = mdp.state_at(4, 4).unwrap();
        assert_eq!(reachable_count(&mdp, center, 1).unwrap(), 5);
        assert_eq!(reachable_count(&mdp, center, 2).unwrap(), 13);
        let ch = compose_n_step_channel(&mdp, center, 2, 100).unwrap();
        let distinct: HashSet<usize> = ch.rows().map(|r| r.iter().position(|p| *p == 1.0).unwrap()).collect();
        assert_eq!(distinct.len(), 13);
    }

    #[test]
    fn budget_and_stochastic_errors() {
        let mdp = open(3, 3, 0.2);
        assert_eq!(
            compose_n_step_channel(&mdp, 0, 8, DEFAULT_SEQUENCE_BUDGET),
            Err(EmpowermentError::BudgetExceeded {
                length: 8,
                budget: DEFAULT_SEQUENCE_BUDGET
            })
        );
        assert_eq!(reachable_count(&mdp, 0, 2), Err(EmpowermentError::StochasticMdp));
        assert_eq!(
            n_step_empowerment(&open(3, 3, 0.0), 9, 1, &Default::default()),
            Err(EmpowermentError::StateOutOfRange(9))
        );
    }

    #[test]
    fn stochastic_one_step_equals_ba_on_action_channel() {
        let mdp = open(5, 5, 0.2);
        let opts = EmpowermentOptions::default();
        for s in [0, 7, 12] {
            let ch = compose_n_step_channel(&mdp, s, 1, 10).unwrap();
            let direct = blahut_arimoto(&ch, 1e-9, 10_000).unwrap().capacity_bits;
            let via = n_step_empowerment(&mdp, s, 1, &opts).unwrap();
            assert!((direct - via).abs() < 1e-8);
        }
    }

    #[test]
    fn single_cell_has_zero_empowerment() {
        let mdp = open(1, 1, 0.0);
        let opts = EmpowermentOptions::default();
        for spec in [
            HorizonSpec::OneStep,
            HorizonSpec::NStep(4),
            HorizonSpec::discounted_default(),
        ] {
            assert_eq!(state_empowerment(&mdp, 0, &spec, &opts).unwrap(), 0.0);
        }
        let map = empowerment_map(&mdp, &HorizonSpec::OneStep, &opts).unwrap();
        assert_eq!(map.normalized(), vec![1.0]);
    }

    #[test]
    fn geometric_series_for_constant_capacity() {
        // a 1x2 corridor: one-step reach is 2, and stays 2 for all lengths
        let mdp = open(2, 1, 0.0);
        let (lambda, horizon) = (0.9, 7);
        let spec = HorizonSpec::Discounted {
            lambda,
            horizon,
            k_max: 5,
        };
        let value = discounted_empowerment(&mdp, 0, &spec, &Default::default()).unwrap();
        let c = 1.0;
        let closed = c * (1.0 - lambda.powi(horizon as i32 + 1)) / (1.0 - lambda);
        assert!((value - closed).abs() < 1e-12);
    }

    #[test]
    fn discounted_with_zero_horizon_is_one_step() {
        let opts = EmpowermentOptions::default();
        for slip in [0.0, 0.2] {
            let mdp = open(4, 3, slip);
            for lambda in [0.3, 1.0] {
                let spec = HorizonSpec::Discounted {
                    lambda,
                    horizon: 0,
                    k_max: 3,
                };
                for s in 0..mdp.n_states() {
                    let d = discounted_empowerment(&mdp, s, &spec, &opts).unwrap();
                    let one = n_step_empowerment(&mdp, s, 1, &opts).unwrap();
                    assert!((d - one).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stochastic_tail_extension() {
        let mdp = open(3, 3, 0.2);
        let opts = EmpowermentOptions::default();
        let spec = HorizonSpec::Discounted {
            lambda: 0.5,
            horizon: 4,
            k_max: 2,
        };
        let e1 = n_step_empowerment(&mdp, 4, 1, &opts).unwrap();
        let e2 = n_step_empowerment(&mdp, 4, 2, &opts).unwrap();
        let expected = e1 + e2 * (0.5 + 0.25 + 0.125 + 0.0625);
        let got = discounted_empowerment(&mdp, 4, &spec, &opts).unwrap();
        assert!((got - expected).abs() < 1e-8);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mdp = open(2, 2, 0.0);
        let map = empowerment_map(&mdp, &HorizonSpec::OneStep, &Default::default()).unwrap();
        let csv = map.to_csv(&mdp);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "state,row,col,value_bits");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,0,1.584962500721"));
        assert!(map.matches(&mdp));
    }
}
