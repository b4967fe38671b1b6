use std::collections::HashSet;

use super::EmpowermentError;

/// Row-stochastic matrix `P(output | input)` of a discrete memoryless channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    n_inputs: usize,
    n_outputs: usize,
    matrix: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl Channel {
    /// Builds a channel from a row-major `n_inputs x n_outputs` matrix.
    pub fn new(n_inputs: usize, n_outputs: usize, matrix: Vec<f64>) -> Result<Self, EmpowermentError> {
        if n_inputs == 0 || n_outputs == 0 {
            return Err(EmpowermentError::InvalidChannel("empty channel".into()));
        }
        if matrix.len() != n_inputs * n_outputs {
            return Err(EmpowermentError::InvalidChannel(format!(
                "matrix has {} entries, expected {}x{}",
                matrix.len(),
                n_inputs,
                n_outputs
            )));
        }
        for (i, row) in matrix.chunks(n_outputs).enumerate() {
            if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                return Err(EmpowermentError::InvalidChannel(format!(
                    "row {i} has invalid entry {p}"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(EmpowermentError::InvalidChannel(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Channel {
            n_inputs,
            n_outputs,
            matrix,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EmpowermentError> {
        let n_outputs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_outputs) {
            return Err(EmpowermentError::InvalidChannel("ragged rows".into()));
        }
        Self::new(rows.len(), n_outputs, rows.concat())
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn binary_symmetric(p: f64) -> Result<Self, EmpowermentError> {
        Self::new(2, 2, vec![1.0 - p, p, p, 1.0 - p])
    }

    /// Noiseless `n`-ary channel.
    pub fn identity(n: usize) -> Self {
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            matrix[i * n + i] = 1.0;
        }
        Channel {
            n_inputs: n,
            n_outputs: n,
            matrix,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.matrix[input * self.n_outputs..(input + 1) * self.n_outputs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.matrix.chunks(self.n_outputs)
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Whether every row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.rows().all(|row| row.iter().filter(|p| **p != 0.0).count() == 1)
    }

    /// Output marginal `rho(y) = sum_x q(x) P(y|x)`.
    pub fn output_marginal(&self, input_distribution: &[f64]) -> Vec<f64> {
        let mut rho = vec![0.0; self.n_outputs];
        for (q, row) in input_distribution.iter().zip(self.rows()) {
            if *q > 0.0 {
                for (r, p) in rho.iter_mut().zip(row) {
                    *r += q * p;
                }
            }
        }
        rho
    }

    /// Drops identical rows and never-reached outputs.
    ///
    /// Merging identical inputs and dropping empty outputs leaves the
    /// capacity unchanged. Rows are compared after rounding to 1e-12 so
    /// that products accumulated in different orders still coincide.
    pub fn compacted(&self) -> Channel {
        let used: Vec<usize> = (0..self.n_outputs)
            .filter(|&o| self.rows().any(|row| row[o] > 0.0))
            .collect();
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        let mut matrix = Vec::new();
        let mut n_inputs = 0;
        for row in self.rows() {
            let key: Vec<i64> = used.iter().map(|&o| (row[o] * 1e12).round() as i64).collect();
            if seen.insert(key) {
                matrix.extend(used.iter().map(|&o| row[o]));
                n_inputs += 1;
            }
        }
        Channel {
            n_inputs,
            n_outputs: used.len(),
            matrix,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_rows() {
        assert!(Channel::new(1, 2, vec![0.5, 0.6]).is_err());
        assert!(Channel::new(1, 2, vec![-0.1, 1.1]).is_err());
        assert!(Channel::new(2, 2, vec![1.0, 0.0]).is_err());
        assert!(Channel::from_rows(&[vec![1.0], vec![0.5, 0.5]]).is_err());
        assert!(Channel::binary_symmetric(0.1).is_ok());
    }

    #[test]
    fn compaction_merges_duplicates() {
        let ch = Channel::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        let c = ch.compacted();
        assert_eq!((c.n_inputs(), c.n_outputs()), (2, 2));
        assert!(ch.is_deterministic());
    }
}
