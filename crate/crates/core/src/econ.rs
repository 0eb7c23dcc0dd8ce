//! Economic assumptions, scenario generation and investment strategies.
//!
//! Time is annual. A [`ScenarioPath`] holds gross returns indexed so that
//! entry `t` is the return earned over the year `(t-1, t]`; entry 0 is an
//! unused sentinel. Wages and consumer prices grow deterministically,
//! index-linked bonds return their predicted rate, and only equities are
//! random (geometric Brownian motion).

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::util::scenario_rng;

#[derive(Debug, Error)]
pub enum EconError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Central economic assumptions (annual effective rates as decimals).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconParams {
    /// Expected one-year stock return.
    pub stock_growth: f64,
    /// Stock log-return volatility.
    pub stock_vol: f64,
    /// Index-linked bond return (also the riskless rate).
    pub bond_growth: f64,
    /// Wage growth.
    pub wage_growth: f64,
    /// Consumer price inflation.
    pub cpi: f64,
}

impl EconParams {
    /// Baseline assumptions used throughout the examples and tests.
    pub fn baseline() -> Self {
        Self { stock_growth: 0.0773, stock_vol: 0.15, bond_growth: 0.0436, wage_growth: 0.0383, cpi: 0.02 }
    }

    pub fn validate(&self) -> Result<(), EconError> {
        for (name, v) in [
            ("stock_growth", self.stock_growth),
            ("bond_growth", self.bond_growth),
            ("wage_growth", self.wage_growth),
            ("cpi", self.cpi),
        ] {
            if !v.is_finite() || v <= -1.0 {
                return Err(EconError::InvalidParameter(format!("{name} must be a finite rate above -100%, got {v}")));
            }
        }
        if !self.stock_vol.is_finite() || self.stock_vol < 0.0 {
            return Err(EconError::InvalidParameter(format!("stock_vol must be non-negative, got {}", self.stock_vol)));
        }
        Ok(())
    }

    /// Continuously compounded riskless rate, `ln(1 + bond_growth)`.
    pub fn riskless_log(&self) -> f64 {
        self.bond_growth.ln_1p()
    }

    /// Expected one-year return of a portfolio holding proportion `p` in
    /// stocks and the rest in bonds, rebalanced annually.
    pub fn portfolio_return(&self, p: f64) -> f64 {
        p * self.stock_growth + (1.0 - p) * self.bond_growth
    }
}

/// Probability measure for stock return generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Real-world drift: expected gross return `1 + stock_growth`.
    Physical,
    /// Risk-neutral drift: expected gross return `1 + bond_growth`.
    Pricing,
    /// Physical for year increments `t <= last_physical_year`, risk-neutral
    /// afterwards. Used to value transfers conditional on a simulated
    /// history up to some year.
    Mixed { last_physical_year: u32 },
}

impl Measure {
    fn is_physical(&self, year: u32) -> bool {
        match self {
            Measure::Physical => true,
            Measure::Pricing => false,
            Measure::Mixed { last_physical_year } => year <= *last_physical_year,
        }
    }
}

/// One simulated economy: gross returns and index levels for years
/// `0 ..= horizon`. Entry `t > 0` covers the year `(t-1, t]`.
#[derive(Debug, Clone)]
pub struct ScenarioPath {
    /// Gross stock return per year; entry 0 is 1.
    pub stock_gross: Vec<f64>,
    /// Gross index-linked bond return per year; entry 0 is 1.
    pub bond_gross: Vec<f64>,
    /// Realised consumer price inflation per year; entry 0 is 0.
    pub cpi: Vec<f64>,
    /// Price index level: `cpi_index[t]` is the price level at `t`
    /// relative to year 0.
    pub cpi_index: Vec<f64>,
    /// Wage level at `t` relative to year 0 (the salary paid at `t` for a
    /// unit starting salary).
    pub wage_index: Vec<f64>,
}

impl ScenarioPath {
    /// Highest year index on the path.
    pub fn horizon(&self) -> u32 {
        (self.stock_gross.len() - 1) as u32
    }

    /// Gross return over `(t-1, t]` of a portfolio with stock proportion `p`.
    pub fn portfolio_gross(&self, t: u32, p: f64) -> f64 {
        p * self.stock_gross[t as usize] + (1.0 - p) * self.bond_gross[t as usize]
    }
}

fn deterministic_scaffold(params: &EconParams, horizon: u32) -> ScenarioPath {
    let n = horizon as usize + 1;
    let mut cpi_index = Vec::with_capacity(n);
    let mut wage_index = Vec::with_capacity(n);
    let mut cpi = Vec::with_capacity(n);
    cpi_index.push(1.0);
    wage_index.push(1.0);
    cpi.push(0.0);
    for t in 1..n {
        cpi_index.push(cpi_index[t - 1] * (1.0 + params.cpi));
        wage_index.push(wage_index[t - 1] * (1.0 + params.wage_growth));
        cpi.push(params.cpi);
    }
    let mut bond_gross = vec![1.0 + params.bond_growth; n];
    bond_gross[0] = 1.0;
    ScenarioPath { stock_gross: vec![1.0; n], bond_gross, cpi, cpi_index, wage_index }
}

/// Scenario in which every asset earns its predicted return.
pub fn constant_path(params: &EconParams, horizon: u32) -> ScenarioPath {
    let mut path = deterministic_scaffold(params, horizon);
    for t in 1..=horizon as usize {
        path.stock_gross[t] = 1.0 + params.stock_growth;
    }
    path
}

/// Sample a geometric Brownian motion stock path.
///
/// The year drift is chosen so the expected gross return is
/// `1 + stock_growth` under the physical measure (plus `drift_shift`, used
/// by sensitivity experiments) and `1 + bond_growth` under the pricing
/// measure. `steps_per_year` controls sub-annual discretisation; because
/// coefficients are constant within a year the annual law is exact for any
/// value, but the draw count (and hence the sampled path) depends on it.
pub fn black_scholes_path(
    params: &EconParams,
    measure: Measure,
    horizon: u32,
    steps_per_year: u32,
    drift_shift: f64,
    rng: &mut impl Rng,
) -> ScenarioPath {
    assert!(steps_per_year >= 1, "steps_per_year must be at least 1");
    let mut path = deterministic_scaffold(params, horizon);
    let dt = 1.0 / steps_per_year as f64;
    let sqrt_dt = dt.sqrt();
    let mu_phys = (1.0 + params.stock_growth + drift_shift).ln();
    let mu_pricing = params.riskless_log();
    for t in 1..=horizon {
        let mu = if measure.is_physical(t) { mu_phys } else { mu_pricing };
        let mut log_return = 0.0;
        for _ in 0..steps_per_year {
            let z: f64 = rng.sample(StandardNormal);
            log_return += (mu - 0.5 * params.stock_vol * params.stock_vol) * dt + params.stock_vol * sqrt_dt * z;
        }
        path.stock_gross[t as usize] = log_return.exp();
    }
    path
}

/// A reproducible family of scenarios indexed by an integer.
pub trait ScenarioSource: Sync {
    fn horizon(&self) -> u32;
    fn path(&self, scenario: u64) -> ScenarioPath;
}

/// Deterministic source: every scenario is the central path.
#[derive(Debug, Clone)]
pub struct ConstantModel {
    pub params: EconParams,
    pub horizon: u32,
}

impl ScenarioSource for ConstantModel {
    fn horizon(&self) -> u32 {
        self.horizon
    }
    fn path(&self, _scenario: u64) -> ScenarioPath {
        constant_path(&self.params, self.horizon)
    }
}

/// Geometric Brownian motion source with one independent random stream
/// per scenario index.
#[derive(Debug, Clone)]
pub struct BlackScholesModel {
    pub params: EconParams,
    pub measure: Measure,
    pub horizon: u32,
    pub seed: u64,
    pub steps_per_year: u32,
    /// Additive shift applied to the expected stock return under the
    /// physical measure only (see [`black_scholes_path`]).
    pub drift_shift: f64,
}

impl BlackScholesModel {
    pub fn new(params: EconParams, measure: Measure, horizon: u32, seed: u64) -> Self {
        Self { params, measure, horizon, seed, steps_per_year: 1, drift_shift: 0.0 }
    }
}

impl ScenarioSource for BlackScholesModel {
    fn horizon(&self) -> u32 {
        self.horizon
    }
    fn path(&self, scenario: u64) -> ScenarioPath {
        let mut rng = scenario_rng(self.seed, scenario);
        black_scholes_path(&self.params, self.measure, self.horizon, self.steps_per_year, self.drift_shift, &mut rng)
    }
}

/// Stock proportion of the invested portfolio, either by member age or by
/// calendar year.
///
/// Age-indexed strategies describe individual glide paths (lifestyling);
/// time-indexed strategies describe a fund-level allocation such as the
/// common strategy of a multi-employer scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum InvestmentStrategy {
    PerAge { min_age: u32, proportions: Vec<f64> },
    PerTime { proportions: Vec<f64> },
}

impl InvestmentStrategy {
    /// Build an age-indexed strategy from a function of age.
    pub fn per_age_fn(min_age: u32, terminal_age: u32, f: impl Fn(u32) -> f64) -> Self {
        assert!(terminal_age > min_age);
        Self::PerAge { min_age, proportions: (min_age..terminal_age).map(f).collect() }
    }

    /// Fully in stocks before `start_age`, linearly down to zero stocks at
    /// `end_age` and beyond.
    pub fn lifestyle(start_age: u32, end_age: u32, min_age: u32, terminal_age: u32) -> Self {
        Self::taper(start_age, end_age, 0.0, min_age, terminal_age)
    }

    /// Fully in stocks before `start_age`, linear from 1 at `start_age`
    /// to `floor` at `end_age`, constant at `floor` afterwards.
    pub fn taper(start_age: u32, end_age: u32, floor: f64, min_age: u32, terminal_age: u32) -> Self {
        assert!(end_age > start_age, "taper must cover at least one year");
        Self::per_age_fn(min_age, terminal_age, |age| {
            let ramp = (end_age as f64 - age as f64) / (end_age - start_age) as f64;
            floor + (1.0 - floor) * ramp.clamp(0.0, 1.0)
        })
    }

    /// The same stock proportion at every age.
    pub fn constant(p: f64, min_age: u32, terminal_age: u32) -> Self {
        Self::per_age_fn(min_age, terminal_age, |_| p)
    }

    /// A calendar-year strategy; entry `t` applies over `(t, t+1]`.
    pub fn per_time(proportions: Vec<f64>) -> Self {
        assert!(!proportions.is_empty());
        Self::PerTime { proportions }
    }

    pub fn validate(&self) -> Result<(), EconError> {
        let props = match self {
            Self::PerAge { proportions, .. } | Self::PerTime { proportions } => proportions,
        };
        for &p in props {
            if !(0.0..=1.0).contains(&p) {
                return Err(EconError::InvalidParameter(format!("stock proportion {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Stock proportion applying to a member of `age` during calendar year
    /// `(t, t+1]`. Indices beyond either end of the stored vector are
    /// clamped to the nearest entry.
    pub fn proportion(&self, age: u32, t: u32) -> f64 {
        match self {
            Self::PerAge { min_age, proportions } => {
                let idx = (age.saturating_sub(*min_age) as usize).min(proportions.len() - 1);
                proportions[idx]
            }
            Self::PerTime { proportions } => proportions[(t as usize).min(proportions.len() - 1)],
        }
    }

    pub fn is_per_time(&self) -> bool {
        matches!(self, Self::PerTime { .. })
    }
}

/// One-year discount factors compounded along a sequence of predicted
/// portfolio returns: entry `l` is the value at the base point of a unit
/// paid `l` years later.
fn discount_curve(params: &EconParams, max_l: u32, proportion_at_offset: impl Fn(u32) -> f64) -> Vec<f64> {
    let mut curve = Vec::with_capacity(max_l as usize + 1);
    curve.push(1.0);
    for k in 0..max_l {
        let r = params.portfolio_return(proportion_at_offset(k));
        curve.push(curve[k as usize] / (1.0 + r));
    }
    curve
}

/// Discount curve seen by a member aged `age`, following an age-indexed
/// strategy: entry `l` discounts a payment at age `age + l`.
pub fn discount_curve_by_age(params: &EconParams, strategy: &InvestmentStrategy, age: u32, max_l: u32) -> Vec<f64> {
    discount_curve(params, max_l, |k| strategy.proportion(age + k, 0))
}

/// Discount curve at calendar year `t` under a time-indexed strategy:
/// entry `l` discounts a payment at year `t + l`.
pub fn discount_curve_by_time(params: &EconParams, strategy: &InvestmentStrategy, t: u32, max_l: u32) -> Vec<f64> {
    discount_curve(params, max_l, |k| strategy.proportion(0, t + k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::mean_and_stderr;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn baseline_rates() {
        let p = EconParams::baseline();
        assert_relative_eq!(p.stock_growth, 0.0773);
        assert_relative_eq!(p.bond_growth, 0.0436);
        assert_relative_eq!(p.wage_growth, 0.0383);
        assert_relative_eq!(p.cpi, 0.02);
        p.validate().unwrap();
    }

    #[test]
    fn constant_path_levels() {
        let p = EconParams::baseline();
        let path = constant_path(&p, 10);
        assert_eq!(path.horizon(), 10);
        assert_relative_eq!(path.stock_gross[3], 1.0773);
        assert_relative_eq!(path.bond_gross[3], 1.0436);
        assert_relative_eq!(path.wage_index[2], 1.0383 * 1.0383, max_relative = 1e-15);
        assert_relative_eq!(path.cpi_index[10], 1.02f64.powi(10), max_relative = 1e-12);
        assert_relative_eq!(path.portfolio_gross(5, 0.25), 0.25 * 1.0773 + 0.75 * 1.0436);
    }

    #[test]
    fn zero_vol_path_is_deterministic() {
        let mut p = EconParams::baseline();
        p.stock_vol = 0.0;
        let mut rng = scenario_rng(1, 0);
        let path = black_scholes_path(&p, Measure::Physical, 5, 1, 0.0, &mut rng);
        for t in 1..=5 {
            assert_relative_eq!(path.stock_gross[t], 1.0773, max_relative = 1e-15);
        }
        // same under monthly discretisation
        let mut rng = scenario_rng(1, 0);
        let monthly = black_scholes_path(&p, Measure::Physical, 5, 12, 0.0, &mut rng);
        for t in 1..=5 {
            assert_relative_eq!(monthly.stock_gross[t], 1.0773, max_relative = 1e-12);
        }
        // pricing measure drifts at the bond rate instead
        let mut rng = scenario_rng(1, 0);
        let pricing = black_scholes_path(&p, Measure::Pricing, 5, 1, 0.0, &mut rng);
        assert_relative_eq!(pricing.stock_gross[3], 1.0436, max_relative = 1e-15);
    }

    #[test]
    fn drift_shift_moves_expected_return() {
        let mut p = EconParams::baseline();
        p.stock_vol = 0.0;
        let mut rng = scenario_rng(1, 0);
        let path = black_scholes_path(&p, Measure::Physical, 3, 1, 0.01, &mut rng);
        assert_relative_eq!(path.stock_gross[1], 1.0873, max_relative = 1e-15);
    }

    #[test]
    fn pricing_measure_expected_return_is_bond_return() {
        let p = EconParams::baseline();
        let model = BlackScholesModel::new(p, Measure::Pricing, 1, 99);
        let sample: Vec<f64> = (0..40_000).map(|i| model.path(i).stock_gross[1]).collect();
        let (mean, se) = mean_and_stderr(&sample);
        assert!(
            (mean - 1.0436).abs() < 3.0 * se,
            "discounted stock mean {mean} is {} standard errors from 1.0436",
            (mean - 1.0436).abs() / se
        );
    }

    #[test]
    fn mixed_measure_switches_drift() {
        let mut p = EconParams::baseline();
        p.stock_vol = 0.0;
        let mut rng = scenario_rng(1, 0);
        let path = black_scholes_path(&p, Measure::Mixed { last_physical_year: 2 }, 4, 1, 0.0, &mut rng);
        assert_relative_eq!(path.stock_gross[1], 1.0773, max_relative = 1e-15);
        assert_relative_eq!(path.stock_gross[2], 1.0773, max_relative = 1e-15);
        assert_relative_eq!(path.stock_gross[3], 1.0436, max_relative = 1e-15);
        assert_relative_eq!(path.stock_gross[4], 1.0436, max_relative = 1e-15);
    }

    #[test]
    fn scenario_indexing_is_reproducible() {
        let model = BlackScholesModel::new(EconParams::baseline(), Measure::Physical, 10, 7);
        let a = model.path(3);
        let b = model.path(3);
        let c = model.path(4);
        assert_eq!(a.stock_gross, b.stock_gross);
        assert_ne!(a.stock_gross, c.stock_gross);
    }

    #[test]
    fn lifestyle_glide_path() {
        // fully in stocks to 65, linear to zero at 85
        let s = InvestmentStrategy::lifestyle(65, 85, 25, 121);
        assert_relative_eq!(s.proportion(40, 0), 1.0);
        assert_relative_eq!(s.proportion(65, 0), 1.0);
        assert_relative_eq!(s.proportion(75, 0), 0.5);
        assert_relative_eq!(s.proportion(85, 0), 0.0);
        assert_relative_eq!(s.proportion(120, 0), 0.0);
        s.validate().unwrap();

        let pooled = InvestmentStrategy::taper(55, 65, 0.33, 25, 121);
        assert_relative_eq!(pooled.proportion(55, 0), 1.0);
        assert_relative_eq!(pooled.proportion(60, 0), 0.5 + 0.5 * 0.33);
        assert_relative_eq!(pooled.proportion(65, 0), 0.33);
        assert_relative_eq!(pooled.proportion(90, 0), 0.33);
    }

    #[test]
    fn per_time_strategy_clamps() {
        let s = InvestmentStrategy::per_time(vec![0.8, 0.6, 0.4]);
        assert_relative_eq!(s.proportion(0, 0), 0.8);
        assert_relative_eq!(s.proportion(0, 2), 0.4);
        assert_relative_eq!(s.proportion(0, 50), 0.4);
        assert!(s.is_per_time());
    }

    #[test]
    fn discount_curves_compound_predicted_returns() {
        let p = EconParams::baseline();
        let all_bonds = InvestmentStrategy::constant(0.0, 25, 121);
        let curve = discount_curve_by_age(&p, &all_bonds, 60, 3);
        assert_relative_eq!(curve[0], 1.0);
        assert_relative_eq!(curve[2], 1.0 / (1.0436f64 * 1.0436), max_relative = 1e-15);
        // frozen value: 1 / 1.0436 = 0.9582215408202376
        assert_abs_diff_eq!(curve[1], 0.958_221_540_820_237_6, epsilon = 1e-15);

        let all_stocks = InvestmentStrategy::constant(1.0, 25, 121);
        let curve = discount_curve_by_age(&p, &all_stocks, 60, 2);
        // frozen value: 1 / 1.0773^2 = 0.861641643257802
        assert_abs_diff_eq!(curve[2], 0.861_641_643_257_802, epsilon = 1e-14);

        // time-indexed: offsets walk forward through the vector
        let s = InvestmentStrategy::per_time(vec![1.0, 0.0]);
        let curve = discount_curve_by_time(&p, &s, 0, 2);
        assert_relative_eq!(curve[1], 1.0 / 1.0773, max_relative = 1e-15);
        assert_relative_eq!(curve[2], 1.0 / (1.0773 * 1.0436), max_relative = 1e-15);
    }
}
