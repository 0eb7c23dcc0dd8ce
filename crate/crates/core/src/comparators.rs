//! Benchmark pension designs to compare the collective scheme against:
//! individual defined contribution with an annuity purchase at retirement,
//! and a pooled annuity fund (collective drawdown with mortality credits).

use thiserror::Error;

use crate::econ::{EconParams, InvestmentStrategy, ScenarioPath};
use crate::lifetable::{LifeTable, LifeTableError};

#[derive(Debug, Error)]
pub enum ComparatorError {
    #[error("life table error: {0}")]
    Table(#[from] LifeTableError),
    #[error("invalid comparator configuration: {0}")]
    Config(String),
}

/// Price of a unit of yearly index-linked income.
#[derive(Debug, Clone, Copy)]
pub struct AnnuityQuote {
    /// Cost per unit of annual income, first payment immediate.
    pub cost: f64,
    /// Real discount rate used.
    pub discount_rate: f64,
    /// Multiplicative premium (≥ 1).
    pub loading: f64,
}

/// Price an immediate index-linked annuity-due for a life aged `age`:
/// `cost = loading * sum over l of p(age, l) * (1 + rate)^(-l)`.
///
/// Payments are index-linked, so `rate` is a real rate and `cost` buys a
/// unit of income in today's prices each year.
pub fn price_annuity(table: &LifeTable, age: u32, real_rate: f64, loading: f64) -> Result<AnnuityQuote, ComparatorError> {
    if age >= table.terminal_age() {
        return Err(ComparatorError::Config(format!("cannot price an annuity at age {age}: past the terminal age")));
    }
    if loading < 1.0 {
        return Err(ComparatorError::Config(format!("annuity loading {loading} must be at least 1")));
    }
    let d = 1.0 + real_rate;
    let mut cost = 0.0;
    let mut p = 1.0;
    let mut disc = 1.0;
    for l in 0..(table.terminal_age() - age) {
        if l > 0 {
            p *= 1.0 - table.q(age + l - 1)?;
            disc /= d;
        }
        cost += p * disc;
    }
    Ok(AnnuityQuote { cost: loading * cost, discount_rate: real_rate, loading })
}

/// Parameters shared by the individual comparator schemes.
#[derive(Debug, Clone)]
pub struct ComparatorConfig {
    pub join_age: u32,
    pub retirement_age: u32,
    /// Contribution rate as a fraction of salary (normally the CDC
    /// scheme's rate, for like-for-like comparisons).
    pub contribution_rate: f64,
    /// Year the member joins the workforce.
    pub entry_year: u32,
    /// Contributions stop from this year on (mirrors a closing CDC
    /// scheme); `None` means the member contributes a full career.
    pub closure_year: Option<u32>,
    /// De-risking window: fully in stocks before `taper_start`, linear to
    /// the terminal proportion at `taper_end`.
    pub taper_start: u32,
    pub taper_end: u32,
    /// Multiplicative annuity premium at purchase (DC only).
    pub annuity_loading: f64,
    pub survive_to_retirement: bool,
}

impl ComparatorConfig {
    /// Common defaults: taper over the last ten working years, 5%
    /// annuity loading.
    pub fn new(join_age: u32, retirement_age: u32, contribution_rate: f64, entry_year: u32) -> Self {
        Self {
            join_age,
            retirement_age,
            contribution_rate,
            entry_year,
            closure_year: None,
            taper_start: retirement_age - 10,
            taper_end: retirement_age,
            annuity_loading: 1.05,
            survive_to_retirement: true,
        }
    }

    fn working_years(&self) -> u32 {
        self.retirement_age - self.join_age
    }
}

/// A member's retirement income in real (CPI-deflated, time-0) terms.
#[derive(Debug, Clone)]
pub struct IncomeResult {
    /// `(age, real income per survivor)` for each retirement year.
    pub incomes: Vec<(u32, f64)>,
    /// Salary in the final working year, deflated to time-0 prices.
    pub final_salary_real: f64,
    /// Years in which contributions were actually paid.
    pub years_invested: u32,
}

/// Accumulate the contribution pot over the working years at the tapered
/// stock allocation. Returns (pot at retirement, years invested).
fn accumulate_pot(config: &ComparatorConfig, strategy: &InvestmentStrategy, path: &ScenarioPath) -> (f64, u32) {
    let mut pot = 0.0;
    let mut years = 0u32;
    for k in 0..config.working_years() {
        let t = config.entry_year + k;
        let age = config.join_age + k;
        let contributing = config.closure_year.map_or(true, |c| t < c);
        if contributing {
            pot += config.contribution_rate * path.wage_index[t as usize];
            years += 1;
        }
        pot *= path.portfolio_gross(t + 1, strategy.proportion(age, t));
    }
    (pot, years)
}

fn final_salary_real(config: &ComparatorConfig, path: &ScenarioPath) -> f64 {
    let last = (config.entry_year + config.working_years() - 1) as usize;
    path.wage_index[last] / path.cpi_index[last]
}

/// Defined contribution followed by an annuity purchase: contributions
/// accumulate under a lifestyling strategy that is fully de-risked at
/// retirement, when the pot buys a loaded index-linked annuity. Real
/// income is constant from then on.
pub fn simulate_dc_annuity(
    config: &ComparatorConfig,
    path: &ScenarioPath,
    table: &LifeTable,
    params: &EconParams,
) -> Result<IncomeResult, ComparatorError> {
    let table = table.rebased_for_scheme(config.join_age, config.retirement_age, config.survive_to_retirement)?;
    let strategy =
        InvestmentStrategy::lifestyle(config.taper_start, config.taper_end, config.join_age, table.terminal_age());
    let (pot, years_invested) = accumulate_pot(config, &strategy, path);

    // the pot buys index-linked income at the long-bond real rate
    let real_rate = (1.0 + params.bond_growth) / (1.0 + params.cpi) - 1.0;
    let quote = price_annuity(&table, config.retirement_age, real_rate, config.annuity_loading)?;
    let t_ret = config.entry_year + config.working_years();
    let income_real = pot / quote.cost / path.cpi_index[t_ret as usize];

    let incomes = (config.retirement_age..table.terminal_age()).map(|age| (age, income_real)).collect();
    Ok(IncomeResult { incomes, final_salary_real: final_salary_real(config, path), years_invested })
}

/// Pooled annuity fund: same accumulation but tapering to a constant 33%
/// stock allocation held through retirement; decedents' assets stay in
/// the pool. Each year the per-survivor assets are paid out in proportion
/// `1 / C`, where `C` prices an unloaded annuity at the year's expected
/// portfolio return (no loading: the pool carries its own longevity risk).
pub fn simulate_pooled_annuity(
    config: &ComparatorConfig,
    path: &ScenarioPath,
    table: &LifeTable,
    params: &EconParams,
) -> Result<IncomeResult, ComparatorError> {
    const RETIRED_STOCK_PROPORTION: f64 = 0.33;
    let table = table.rebased_for_scheme(config.join_age, config.retirement_age, config.survive_to_retirement)?;
    let strategy = InvestmentStrategy::taper(
        config.taper_start,
        config.taper_end,
        RETIRED_STOCK_PROPORTION,
        config.join_age,
        table.terminal_age(),
    );
    let (mut pot, years_invested) = accumulate_pot(config, &strategy, path);

    let mut incomes = Vec::new();
    for age in config.retirement_age..table.terminal_age() {
        let t = config.entry_year + (age - config.join_age);
        let pi = strategy.proportion(age, t);
        let expected = params.portfolio_return(pi);
        let real_rate = (1.0 + expected) / (1.0 + params.cpi) - 1.0;
        let quote = price_annuity(&table, age, real_rate, 1.0)?;
        let payout = pot / quote.cost;
        incomes.push((age, payout / path.cpi_index[t as usize]));
        // survivors inherit the pool: divide by one-year survival
        let survival = 1.0 - table.q(age)?;
        pot = (pot - payout) * path.portfolio_gross(t + 1, pi);
        if survival > 0.0 {
            pot /= survival;
        } else {
            debug_assert!(pot.abs() < 1e-9, "pool not exhausted at terminal age");
            break;
        }
    }
    Ok(IncomeResult { incomes, final_salary_real: final_salary_real(config, path), years_invested })
}
