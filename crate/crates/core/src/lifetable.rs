//! Cohort life tables: one-year death probabilities by age plus the
//! survival arithmetic the rest of the crate builds on.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LifeTableError {
    #[error("life table is empty")]
    Empty,
    #[error("q({age}) = {q} is outside [0, 1]")]
    ProbabilityOutOfRange { age: u32, q: f64 },
    #[error("ages must be contiguous: expected {expected}, found {found}")]
    NonContiguousAges { expected: u32, found: u32 },
    #[error("age {age} is below the first tabulated age {min_age}")]
    AgeBelowTable { age: u32, min_age: u32 },
    #[error("failed to read life table: {0}")]
    Io(#[from] std::io::Error),
    #[error("life table line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One-year death probabilities `q(a)` for ages `min_age ..= max_age`,
/// with death certain at the end of the last tabulated year. The age
/// `max_age + 1`, which nobody reaches, is called the terminal age.
#[derive(Debug, Clone)]
pub struct LifeTable {
    min_age: u32,
    qx: Vec<f64>,
}

impl LifeTable {
    /// Build a table from `q(min_age), q(min_age + 1), ...`.
    ///
    /// The last entry is forced to 1 so the terminal age is always
    /// unreachable; every other entry must lie in `[0, 1]`.
    pub fn new(min_age: u32, mut qx: Vec<f64>) -> Result<Self, LifeTableError> {
        if qx.is_empty() {
            return Err(LifeTableError::Empty);
        }
        for (i, &q) in qx.iter().enumerate() {
            if !(0.0..=1.0).contains(&q) || !q.is_finite() {
                return Err(LifeTableError::ProbabilityOutOfRange { age: min_age + i as u32, q });
            }
        }
        *qx.last_mut().unwrap() = 1.0;
        Ok(Self { min_age, qx })
    }

    /// Parse a `age,qx` CSV (header required, ages contiguous).
    pub fn from_csv_str(text: &str) -> Result<Self, LifeTableError> {
        let mut min_age = None;
        let mut next_age = 0u32;
        let mut qx = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 {
                let lower = line.to_ascii_lowercase();
                if lower.replace(' ', "") != "age,qx" {
                    return Err(LifeTableError::Parse {
                        line: 1,
                        message: format!("expected header 'age,qx', found '{line}'"),
                    });
                }
                continue;
            }
            let mut parts = line.split(',');
            let age: u32 = parts
                .next()
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| LifeTableError::Parse { line: idx + 1, message: format!("bad age: {e}") })?;
            let q: f64 = parts
                .next()
                .ok_or_else(|| LifeTableError::Parse { line: idx + 1, message: "missing qx column".into() })?
                .trim()
                .parse()
                .map_err(|e| LifeTableError::Parse { line: idx + 1, message: format!("bad qx: {e}") })?;
            if parts.next().is_some() {
                return Err(LifeTableError::Parse { line: idx + 1, message: "too many columns".into() });
            }
            match min_age {
                None => {
                    min_age = Some(age);
                    next_age = age + 1;
                }
                Some(_) => {
                    if age != next_age {
                        return Err(LifeTableError::NonContiguousAges { expected: next_age, found: age });
                    }
                    next_age += 1;
                }
            }
            qx.push(q);
        }
        Self::new(min_age.ok_or(LifeTableError::Empty)?, qx)
    }

    /// Load a `age,qx` CSV from disk.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, LifeTableError> {
        Self::from_csv_str(&fs::read_to_string(path)?)
    }

    /// Gompertz–Makeham table: hazard `mu(a) = a0 + b0 * exp(theta * (a - pivot))`,
    /// converted to one-year probabilities via `q = 1 - exp(-integral of mu)`.
    pub fn gompertz_makeham(
        a0: f64,
        b0: f64,
        theta: f64,
        pivot: f64,
        min_age: u32,
        terminal_age: u32,
    ) -> Result<Self, LifeTableError> {
        assert!(terminal_age > min_age, "terminal age must exceed min age");
        let qx = (min_age..terminal_age)
            .map(|age| {
                // integral of mu over [age, age+1]
                let cum = a0 + b0 * (theta * (age as f64 - pivot)).exp() * (theta.exp() - 1.0) / theta;
                (1.0 - (-cum).exp()).min(1.0)
            })
            .collect();
        Self::new(min_age, qx)
    }

    /// The life table bundled with the engine: a Gompertz–Makeham pensioner
    /// table over ages 25..120 calibrated to a cohort expectation of life at
    /// 65 of roughly 18 years.
    pub fn bundled_pensioner() -> Self {
        Self::gompertz_makeham(3.0e-4, 0.013, 0.095, 65.0, 25, 121).expect("bundled table parameters are valid")
    }

    /// Constant-hazard table: `q = 1 - exp(-lambda)` at every age.
    pub fn exponential(lambda: f64, min_age: u32, terminal_age: u32) -> Result<Self, LifeTableError> {
        assert!(terminal_age > min_age, "terminal age must exceed min age");
        let q = 1.0 - (-lambda).exp();
        Self::new(min_age, vec![q; (terminal_age - min_age) as usize])
    }

    /// Copy of the table with mortality switched off below `age`
    /// (members are assumed to reach retirement with certainty).
    pub fn with_no_mortality_below(&self, age: u32) -> Self {
        let mut qx = self.qx.clone();
        for (i, q) in qx.iter_mut().enumerate() {
            if self.min_age + (i as u32) < age {
                *q = 0.0;
            }
        }
        Self::new(self.min_age, qx).expect("modified table stays valid")
    }

    /// First tabulated age.
    pub fn min_age(&self) -> u32 {
        self.min_age
    }

    /// The age nobody reaches: one past the last tabulated age.
    pub fn terminal_age(&self) -> u32 {
        self.min_age + self.qx.len() as u32
    }

    /// One-year death probability. Ages past the table are certain deaths.
    pub fn q(&self, age: u32) -> Result<f64, LifeTableError> {
        if age < self.min_age {
            return Err(LifeTableError::AgeBelowTable { age, min_age: self.min_age });
        }
        Ok(self.qx.get((age - self.min_age) as usize).copied().unwrap_or(1.0))
    }

    /// Probability that a life aged `age` survives `years` more years.
    pub fn survival(&self, age: u32, years: u32) -> Result<f64, LifeTableError> {
        if age < self.min_age {
            return Err(LifeTableError::AgeBelowTable { age, min_age: self.min_age });
        }
        let mut p = 1.0;
        for k in 0..years {
            p *= 1.0 - self.q(age + k)?;
            if p == 0.0 {
                break;
            }
        }
        Ok(p)
    }

    /// Table re-based to start at a scheme's join age, optionally with
    /// mortality removed below the retirement age. Joining below the first
    /// tabulated age is only possible under that convention (the missing
    /// young ages are then irrelevant).
    pub(crate) fn rebased_for_scheme(
        &self,
        join_age: u32,
        retirement_age: u32,
        survive_to_retirement: bool,
    ) -> Result<LifeTable, LifeTableError> {
        if !survive_to_retirement && self.min_age() > join_age {
            return Err(LifeTableError::AgeBelowTable { age: join_age, min_age: self.min_age() });
        }
        let qx = (join_age..self.terminal_age())
            .map(|age| {
                if age < retirement_age && survive_to_retirement {
                    Ok(0.0)
                } else {
                    self.q(age)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        LifeTable::new(join_age, qx)
    }

    /// Curtate expectation of life at `age`: sum of survival probabilities
    /// over all whole future years.
    pub fn curtate_expectation(&self, age: u32) -> Result<f64, LifeTableError> {
        let horizon = self.terminal_age().saturating_sub(age);
        let mut e = 0.0;
        let mut p = 1.0;
        for k in 0..horizon {
            p *= 1.0 - self.q(age + k)?;
            e += p;
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    #[test]
    fn csv_round_trip() {
        let t = LifeTable::from_csv_str("age,qx\n60,0.01\n61,0.02\n62,0.5\n").unwrap();
        assert_eq!(t.min_age(), 60);
        assert_eq!(t.terminal_age(), 63);
        assert_relative_eq!(t.q(60).unwrap(), 0.01);
        // last entry is forced to certain death
        assert_eq!(t.q(62).unwrap(), 1.0);
        assert_eq!(t.q(90).unwrap(), 1.0);
    }

    #[test]
    fn csv_rejects_gaps_and_bad_values() {
        assert!(matches!(
            LifeTable::from_csv_str("age,qx\n60,0.01\n62,0.02\n"),
            Err(LifeTableError::NonContiguousAges { expected: 61, found: 62 })
        ));
        assert!(matches!(
            LifeTable::from_csv_str("age,qx\n60,1.5\n61,0.9\n"),
            Err(LifeTableError::ProbabilityOutOfRange { age: 60, .. })
        ));
        assert!(LifeTable::from_csv_str("years,qx\n60,0.01\n").is_err());
        assert!(LifeTable::from_csv_str("age,qx\n").is_err());
    }

    #[test]
    fn survival_multiplies_one_year_probabilities() {
        let t = LifeTable::new(60, vec![0.1, 0.2, 1.0]).unwrap();
        assert_relative_eq!(t.survival(60, 1).unwrap(), 0.9);
        assert_relative_eq!(t.survival(60, 2).unwrap(), 0.9 * 0.8);
        assert_relative_eq!(t.survival(60, 3).unwrap(), 0.0);
        assert_relative_eq!(t.survival(61, 1).unwrap(), 0.8);
        assert!(t.survival(40, 1).is_err());
    }

    #[test]
    fn exponential_table_has_constant_q() {
        let t = LifeTable::exponential(0.05, 25, 121).unwrap();
        let expected = 1.0 - (-0.05f64).exp();
        assert_relative_eq!(t.q(25).unwrap(), expected);
        assert_relative_eq!(t.q(100).unwrap(), expected);
        // survival over n years is exp(-n*lambda)
        assert_relative_eq!(t.survival(30, 20).unwrap(), (-1.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn bundled_table_shape() {
        let t = LifeTable::bundled_pensioner();
        assert_eq!(t.min_age(), 25);
        assert_eq!(t.terminal_age(), 121);
        assert_eq!(t.q(120).unwrap(), 1.0);
        // hazard grows with age
        assert!(t.q(80).unwrap() > t.q(60).unwrap());
        assert!(t.q(60).unwrap() > t.q(30).unwrap());
        // calibration target: expectation of life at 65 around 18 years
        let e65 = t.curtate_expectation(65).unwrap();
        assert_abs_diff_eq!(e65, 18.07, epsilon = 0.05);
    }

    #[test]
    fn no_mortality_below_retirement() {
        let t = LifeTable::bundled_pensioner().with_no_mortality_below(65);
        assert_eq!(t.q(40).unwrap(), 0.0);
        assert_eq!(t.survival(25, 40).unwrap(), 1.0);
        assert_relative_eq!(t.q(70).unwrap(), LifeTable::bundled_pensioner().q(70).unwrap());
    }

    proptest! {
        // survival is a Markov chain: p(a, j + k) = p(a, j) * p(a + j, k)
        #[test]
        fn survival_is_multiplicative(j in 0u32..50, k in 0u32..50, age in 25u32..90) {
            let t = LifeTable::bundled_pensioner();
            let lhs = t.survival(age, j + k).unwrap();
            let rhs = t.survival(age, j).unwrap() * t.survival(age + j, k).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12, "lhs {lhs} rhs {rhs}");
        }

        // survival is non-increasing in the horizon and within [0, 1]
        #[test]
        fn survival_monotone(age in 25u32..119, years in 1u32..96) {
            let t = LifeTable::bundled_pensioner();
            let shorter = t.survival(age, years - 1).unwrap();
            let longer = t.survival(age, years).unwrap();
            prop_assert!((0.0..=1.0).contains(&longer));
            prop_assert!(longer <= shorter + 1e-15);
        }
    }
}
