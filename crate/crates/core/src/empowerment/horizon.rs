use std::fmt;
use std::str::FromStr;

use super::EmpowermentError;

/// Default discount over horizons.
pub const DEFAULT_LAMBDA: f64 = 0.95;
/// Default number of discounted terms beyond the first (the episode length).
pub const DEFAULT_HORIZON: usize = 32;
/// Default longest action sequence enumerated on stochastic MDPs.
pub const DEFAULT_K_MAX: usize = 5;

/// Which empowerment quantity to compute per state.
///
/// Lengths count actions in the open-loop sequence: `NStep(1)` is classic
/// one-step empowerment. The discounted sum has `horizon + 1` terms where
/// term `k` uses sequences of length `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HorizonSpec {
    OneStep,
    NStep(usize),
    Discounted {
        lambda: f64,
        horizon: usize,
        /// Longest sequence length enumerated on stochastic MDPs; longer
        /// terms reuse the value at this length.
        k_max: usize,
    },
}

impl HorizonSpec {
    pub fn discounted_default() -> Self {
        HorizonSpec::Discounted {
            lambda: DEFAULT_LAMBDA,
            horizon: DEFAULT_HORIZON,
            k_max: DEFAULT_K_MAX,
        }
    }

    pub fn validate(&self) -> Result<(), EmpowermentError> {
        match *self {
            HorizonSpec::OneStep => Ok(()),
            HorizonSpec::NStep(n) if n >= 1 => Ok(()),
            HorizonSpec::NStep(_) => Err(EmpowermentError::InvalidHorizon("n-step horizon needs n >= 1".into())),
            HorizonSpec::Discounted { lambda, k_max, .. } => {
                if !(lambda > 0.0 && lambda <= 1.0) {
                    Err(EmpowermentError::InvalidHorizon(format!(
                        "lambda must lie in (0, 1], got {lambda}"
                    )))
                } else if k_max == 0 {
                    Err(EmpowermentError::InvalidHorizon("k_max must be >= 1".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Longest action sequence this spec needs on a deterministic MDP.
    pub fn max_sequence_length(&self) -> usize {
        match *self {
            HorizonSpec::OneStep => 1,
            HorizonSpec::NStep(n) => n,
            HorizonSpec::Discounted { horizon, .. } => horizon + 1,
        }
    }
}

impl fmt::Display for HorizonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizonSpec::OneStep => f.write_str("one-step"),
            HorizonSpec::NStep(n) => write!(f, "n:{n}"),
            HorizonSpec::Discounted { lambda, horizon, k_max } => write!(f, "discounted:{lambda}:{horizon}:{k_max}"),
        }
    }
}

impl FromStr for HorizonSpec {
    type Err = EmpowermentError;

    /// Accepts `one-step`, `n:<n>` and `discounted[:lambda[:H[:k_max]]]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EmpowermentError::InvalidHorizon(format!("cannot parse horizon {s:?}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let spec = match parts.as_slice() {
            ["one-step"] => HorizonSpec::OneStep,
            ["n", n] => HorizonSpec::NStep(n.parse().map_err(|_| bad())?),
            ["discounted", rest @ ..] if rest.len() <= 3 => HorizonSpec::Discounted {
                lambda: rest
                    .first()
                    .map_or(Ok(DEFAULT_LAMBDA), |v| v.parse())
                    .map_err(|_| bad())?,
                horizon: rest
                    .get(1)
                    .map_or(Ok(DEFAULT_HORIZON), |v| v.parse())
                    .map_err(|_| bad())?,
                k_max: rest
                    .get(2)
                    .map_or(Ok(DEFAULT_K_MAX), |v| v.parse())
                    .map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        assert_eq!("n:32".parse::<HorizonSpec>().unwrap(), HorizonSpec::NStep(32));
        assert_eq!("one-step".parse::<HorizonSpec>().unwrap(), HorizonSpec::OneStep);
        assert_eq!(
            "discounted".parse::<HorizonSpec>().unwrap(),
            HorizonSpec::discounted_default()
        );
        let spec: HorizonSpec = "discounted:0.9:10:3".parse().unwrap();
        assert_eq!(spec.to_string().parse::<HorizonSpec>().unwrap(), spec);
        for bad in ["n:0", "n:x", "discounted:1.5", "discounted:0.9:3:0", "two-step", ""] {
            assert!(bad.parse::<HorizonSpec>().is_err(), "{bad}");
        }
    }
}
