//! Risk-neutral measurement of the transfers between generations hidden in
//! a collective scheme: the expected instantaneous profit or loss on each
//! year's accrual, lifetime discounted values per generation, and
//! per-scenario P&L curves via nested Monte Carlo.
//!
//! The accounting object is the marginal cashflow stream of one accrual:
//! a member contributes `C_t` in year `t` and receives in exchange the
//! entitlement `b_t` accrued that year. Because indexation is a common
//! multiplicative factor (every entitlement moves together), the pension
//! cashflows bought by that single accrual are exactly
//! `b_t * prod(factors over (t, s]) * [retired at s]` — no counterfactual
//! runs are needed. Discounting uses the continuous riskless rate
//! `ln(1 + bond_growth)`, matching the pricing-measure drift.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use thiserror::Error;

use crate::econ::{BlackScholesModel, Measure, ScenarioPath, ScenarioSource};
use crate::engine::{EngineError, FundModel, SchemeConfig, YearRecord};
use crate::util::{derive_seed, mean_and_stderr, neumaier_sum};

#[derive(Debug, Error)]
pub enum ValuationError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid valuation request: {0}")]
    Config(String),
}

/// One Monte Carlo estimate of the relative P&L on a single accrual:
/// (risk-neutral value of the pension bought) / (contribution paid) − 1.
#[derive(Debug, Clone, Copy)]
pub struct PnlEstimate {
    pub generation: u32,
    /// Accrual year being valued.
    pub year: u32,
    /// The generation's age in that year.
    pub age: u32,
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
}

impl PnlEstimate {
    /// Normal-approximation 95% confidence interval.
    pub fn confidence_interval(&self) -> (f64, f64) {
        (self.estimate - 1.96 * self.std_error, self.estimate + 1.96 * self.std_error)
    }
}

/// Grid of expected instantaneous P&L over (generation, valuation year).
#[derive(Debug, Clone)]
pub struct PnlSurface {
    pub cells: Vec<PnlEstimate>,
}

/// Per-age accrual P&L curve for one outer (physical) scenario, estimated
/// from the inner pricing-measure continuations.
#[derive(Debug, Clone)]
pub struct ScenarioPnlCurve {
    pub outer_scenario: u64,
    /// One point per contributing age, youngest first.
    pub points: Vec<PnlEstimate>,
}

/// Lifetime discounted value of all of one generation's net cashflows.
#[derive(Debug, Clone, Copy)]
pub struct LifetimeValue {
    pub generation: u32,
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Lifetime values for every generation of a closing scheme, plus the
/// all-generation total estimated from per-scenario sums (so its standard
/// error accounts for the correlation between generations).
#[derive(Debug, Clone)]
pub struct LifetimeQReport {
    pub per_generation: Vec<LifetimeValue>,
    pub total_estimate: f64,
    pub total_std_error: f64,
    pub n: usize,
    pub seed: u64,
}

/// Generations are numbered by retirement order: generation 0 is aged
/// `retirement_age - 1` in year 0 (retires first) and generation `g` is
/// `g` years younger, joining the workforce in year `g - (T - 1)` if that
/// is positive.
pub fn generation_age(scheme: &SchemeConfig, generation: u32, year: u32) -> i64 {
    scheme.retirement_age as i64 - 1 - generation as i64 + year as i64
}

/// Generations with a contributing member in `year` (they still need the
/// scheme to be open for contributions to flow).
pub fn contributing_generations(scheme: &SchemeConfig, year: u32) -> RangeInclusive<u32> {
    year..=year + scheme.working_years() - 1
}

/// Number of generations that ever hold an entitlement in a scheme that
/// closes to new members at `closure_year`.
pub fn generation_count(scheme: &SchemeConfig) -> Result<u32, ValuationError> {
    let closure = scheme.closure_year.ok_or_else(|| {
        ValuationError::Config("lifetime valuation needs a closure year, otherwise generations are unbounded".into())
    })?;
    Ok(scheme.working_years() + closure - 1)
}

/// Age-slot index of `generation` in `year`, if it is alive and joined.
fn generation_slot(scheme: &SchemeConfig, n_ages: usize, generation: u32, year: u32) -> Option<usize> {
    let slot = generation_age(scheme, generation, year) - scheme.join_age as i64;
    (0..n_ages as i64).contains(&slot).then_some(slot as usize)
}

fn is_open(scheme: &SchemeConfig, year: u32) -> bool {
    scheme.closure_year.map_or(true, |c| year < c)
}

/// Value the accruals granted in one recorded year against the indexation
/// factors that follow it. `factors_after[j]` is the common factor applied
/// in year `t + 1 + j`; at least `n_ages - 1` entries are needed (the last
/// year in which this accrual can still pay anything). Returns the relative
/// P&L per working age slot, youngest first.
fn value_accruals(model: &FundModel, record: &YearRecord, factors_after: &[f64]) -> Result<Vec<f64>, ValuationError> {
    let scheme = &model.scheme;
    let n_ages = model.n_ages();
    let working = scheme.working_years() as usize;
    if record.total_contributions <= 0.0 {
        return Err(ValuationError::Config(format!("no contributions were made in year {}", record.year)));
    }
    if factors_after.len() < n_ages - 1 {
        return Err(ValuationError::Config(format!(
            "need {} post-accrual indexation factors, got {}",
            n_ages - 1,
            factors_after.len()
        )));
    }
    let table = model.table();
    let d = 1.0 / (1.0 + model.params.bond_growth);
    let mut pnl = Vec::with_capacity(working);
    for k in 0..working {
        let age = scheme.join_age + k as u32;
        let mut value = 0.0;
        let mut carried = 1.0; // product of factors over (t, t + l]
        let mut disc = 1.0;
        let mut surv = 1.0;
        for l in 1..n_ages - k {
            carried *= factors_after[l - 1];
            disc *= d;
            surv *= 1.0 - table.q(age + l as u32 - 1).expect("age in table");
            if age + l as u32 >= scheme.retirement_age {
                value += carried * disc * surv;
            }
        }
        pnl.push(record.accrual_by_age[k] * value / record.contribution_per_member - 1.0);
    }
    Ok(pnl)
}

/// Relative P&L of the accruals granted in `year`, attributed from a
/// completed simulation: discounted value of the pension cashflows each
/// age's accrual buys (carried through the realised indexation factors),
/// divided by the contribution, minus one.
pub fn attribute_accrual_pnl(
    model: &FundModel,
    records: &[YearRecord],
    year: u32,
) -> Result<Vec<f64>, ValuationError> {
    let t = year as usize;
    let needed = t + model.n_ages();
    if records.len() < needed {
        return Err(ValuationError::Config(format!(
            "records end at year {}, but valuing year {year} accruals needs year {}",
            records.len().saturating_sub(1),
            needed - 1
        )));
    }
    let factors: Vec<f64> = records[t + 1..needed].iter().map(|r| r.factor).collect();
    value_accruals(model, &records[t], &factors)
}

fn check_valuation_year(model: &FundModel, year: u32) -> Result<(), ValuationError> {
    if !is_open(&model.scheme, year) {
        return Err(ValuationError::Config(format!("year {year} is after closure: no accrual to value")));
    }
    let needed = year + model.n_ages() as u32 - 1;
    if model.scheme.horizon < needed {
        return Err(ValuationError::Config(format!(
            "horizon {} is too short to value year-{year} accruals (need {needed})",
            model.scheme.horizon
        )));
    }
    Ok(())
}

/// Expected instantaneous P&L of every generation contributing in `year`,
/// youngest age first, from one mixed-measure Monte Carlo run: scenarios
/// follow the physical drift up to `year` (the state the fund is actually
/// in) and the pricing drift afterwards (the valuation of what that
/// year's accrual buys).
pub fn expected_instantaneous_pnl_by_age(
    model: &FundModel,
    year: u32,
    n_scenarios: usize,
    seed: u64,
) -> Result<Vec<PnlEstimate>, ValuationError> {
    check_valuation_year(model, year)?;
    if n_scenarios < 2 {
        return Err(ValuationError::Config("need at least 2 scenarios for a standard error".into()));
    }
    let source = BlackScholesModel::new(
        model.params.clone(),
        Measure::Mixed { last_physical_year: year },
        model.scheme.horizon,
        seed,
    );
    let samples: Vec<Vec<f64>> = (0..n_scenarios as u64)
        .into_par_iter()
        .map(|s| {
            let trace = model.run(&source.path(s))?;
            attribute_accrual_pnl(model, &trace.records, year)
        })
        .collect::<Result<_, _>>()?;
    Ok(summarise_curve(model, year, &samples, n_scenarios, seed))
}

/// Mean and standard error per age slot from per-scenario P&L curves.
fn summarise_curve(
    model: &FundModel,
    year: u32,
    samples: &[Vec<f64>],
    n: usize,
    seed: u64,
) -> Vec<PnlEstimate> {
    let scheme = &model.scheme;
    let working = scheme.working_years();
    (0..working)
        .map(|k| {
            let slot: Vec<f64> = samples.iter().map(|curve| curve[k as usize]).collect();
            let (estimate, std_error) = mean_and_stderr(&slot);
            PnlEstimate {
                generation: working - 1 - k + year,
                year,
                age: scheme.join_age + k,
                estimate,
                std_error,
                n,
                seed,
            }
        })
        .collect()
}

/// Expected instantaneous P&L for one (generation, year) cell.
pub fn expected_instantaneous_pnl(
    model: &FundModel,
    generation: u32,
    year: u32,
    n_scenarios: usize,
    seed: u64,
) -> Result<PnlEstimate, ValuationError> {
    let slot = generation_slot(&model.scheme, model.n_ages(), generation, year)
        .filter(|&s| s < model.scheme.working_years() as usize && is_open(&model.scheme, year))
        .ok_or_else(|| {
            ValuationError::Config(format!("generation {generation} does not contribute in year {year}"))
        })?;
    let curve = expected_instantaneous_pnl_by_age(model, year, n_scenarios, seed)?;
    Ok(curve[slot])
}

/// Expected instantaneous P&L over a grid of valuation years. Cells from
/// different years use independent derived seeds; cells within one year
/// share that year's scenario batch (each still reports its own standard
/// error).
pub fn pnl_surface(
    model: &FundModel,
    years: &[u32],
    n_scenarios: usize,
    seed: u64,
) -> Result<PnlSurface, ValuationError> {
    let mut cells = Vec::new();
    for &year in years {
        let year_seed = derive_seed(seed, year as u64);
        cells.extend(expected_instantaneous_pnl_by_age(model, year, n_scenarios, year_seed)?);
    }
    Ok(PnlSurface { cells })
}

/// Replace everything after year `t` on `prefix` with the suffix of
/// another path, re-chaining the cumulative price and wage indices across
/// the seam.
fn splice_after(prefix: &ScenarioPath, suffix: &ScenarioPath, t: usize) -> ScenarioPath {
    let n = prefix.stock_gross.len();
    debug_assert_eq!(n, suffix.stock_gross.len(), "paths must share a horizon");
    let join = |pre: &[f64], suf: &[f64]| {
        let mut v = pre.to_vec();
        v[t + 1..].copy_from_slice(&suf[t + 1..]);
        v
    };
    let stock_gross = join(&prefix.stock_gross, &suffix.stock_gross);
    let bond_gross = join(&prefix.bond_gross, &suffix.bond_gross);
    let cpi = join(&prefix.cpi, &suffix.cpi);
    let mut cpi_index = prefix.cpi_index.clone();
    let mut wage_index = prefix.wage_index.clone();
    for u in t + 1..n {
        cpi_index[u] = cpi_index[u - 1] * (1.0 + cpi[u]);
        wage_index[u] = wage_index[u - 1] * (suffix.wage_index[u] / suffix.wage_index[u - 1]);
    }
    ScenarioPath { stock_gross, bond_gross, cpi, cpi_index, wage_index }
}

/// Per-scenario accrual P&L curves for `year`: `n_outer` physical paths
/// decide the fund's state at the valuation year, and for each of them
/// `n_inner` pricing-measure continuations value that year's accrual per
/// contributing age.
pub fn instantaneous_pnl_scenarios(
    model: &FundModel,
    year: u32,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
) -> Result<Vec<ScenarioPnlCurve>, ValuationError> {
    check_valuation_year(model, year)?;
    if n_outer == 0 || n_inner < 2 {
        return Err(ValuationError::Config("need at least 1 outer and 2 inner scenarios".into()));
    }
    let outer_source = BlackScholesModel::new(model.params.clone(), Measure::Physical, model.scheme.horizon, seed);
    // last year in which the valued accrual can still pay a pension
    let t_end = year + model.n_ages() as u32 - 1;
    (0..n_outer as u64)
        .into_par_iter()
        .map(|outer| {
            let outer_path = outer_source.path(outer);
            let mut fund = model.start();
            let mut record_t = None;
            for _ in 0..=year {
                record_t = Some(fund.step(&outer_path)?);
            }
            let record_t = record_t.expect("stepped at least once");

            let inner_seed = derive_seed(seed, 1000 + outer);
            let inner_source =
                BlackScholesModel::new(model.params.clone(), Measure::Pricing, model.scheme.horizon, inner_seed);
            let mut samples = Vec::with_capacity(n_inner);
            for inner in 0..n_inner as u64 {
                let path = splice_after(&outer_path, &inner_source.path(inner), year as usize);
                let mut forked = fund.clone();
                let mut factors = Vec::with_capacity((t_end - year) as usize);
                for _ in year + 1..=t_end {
                    factors.push(forked.step(&path)?.factor);
                }
                samples.push(value_accruals(model, &record_t, &factors)?);
            }
            Ok(ScenarioPnlCurve {
                outer_scenario: outer,
                points: summarise_curve(model, year, &samples, n_inner, inner_seed),
            })
        })
        .collect()
}

/// Lifetime discounted net value of every generation's cashflows under the
/// pricing measure: pensions received minus contributions paid, weighted by
/// expected membership, discounted to year 0.
pub fn lifetime_q_report(model: &FundModel, n_scenarios: usize, seed: u64) -> Result<LifetimeQReport, ValuationError> {
    let scheme = &model.scheme;
    let n_gens = generation_count(scheme)? as usize;
    if n_scenarios < 2 {
        return Err(ValuationError::Config("need at least 2 scenarios for a standard error".into()));
    }
    let working = scheme.working_years() as usize;
    let d = 1.0 / (1.0 + model.params.bond_growth);
    let source = BlackScholesModel::new(model.params.clone(), Measure::Pricing, scheme.horizon, seed);

    let per_scenario: Vec<Vec<f64>> = (0..n_scenarios as u64)
        .into_par_iter()
        .map(|s| {
            let trace = model.run(&source.path(s))?;
            let mut q = vec![0.0; n_gens];
            let mut disc = 1.0;
            for rec in &trace.records {
                if rec.year > 0 {
                    disc *= d;
                }
                let open = is_open(scheme, rec.year);
                for (k, &members) in rec.members_by_age.iter().enumerate() {
                    if members <= 0.0 {
                        continue;
                    }
                    let g = working - 1 + rec.year as usize - k;
                    if k >= working {
                        q[g] += disc * rec.benefit_by_age[k] * members;
                    } else if open {
                        q[g] -= disc * rec.contribution_per_member * members;
                    }
                }
            }
            Ok(q)
        })
        .collect::<Result<_, ValuationError>>()?;

    let totals: Vec<f64> = per_scenario.iter().map(|q| neumaier_sum(q.iter().copied())).collect();
    let (total_estimate, total_std_error) = mean_and_stderr(&totals);
    let per_generation = (0..n_gens)
        .map(|g| {
            let samples: Vec<f64> = per_scenario.iter().map(|q| q[g]).collect();
            let (estimate, std_error) = mean_and_stderr(&samples);
            LifetimeValue { generation: g as u32, estimate, std_error, n: n_scenarios }
        })
        .collect();
    Ok(LifetimeQReport { per_generation, total_estimate, total_std_error, n: n_scenarios, seed })
}

/// Lifetime discounted value for a single generation.
pub fn lifetime_q_value(
    model: &FundModel,
    generation: u32,
    n_scenarios: usize,
    seed: u64,
) -> Result<LifetimeValue, ValuationError> {
    let report = lifetime_q_report(model, n_scenarios, seed)?;
    report.per_generation.get(generation as usize).copied().ok_or_else(|| {
        ValuationError::Config(format!(
            "generation {generation} is out of range (scheme has {} generations)",
            report.per_generation.len()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::{EconParams, InvestmentStrategy};
    use crate::engine::{IndexationMode, SchemeKind};
    use crate::lifetable::LifeTable;
    use crate::steady::{direct_contribution_rate, db_instantaneous_pnl, SchemeShape};
    use approx::assert_abs_diff_eq;

    const JOIN: u32 = 60;
    const RET: u32 = 63;
    const TERMINAL: u32 = 68;

    fn small_table() -> LifeTable {
        LifeTable::exponential(0.08, JOIN, TERMINAL).unwrap()
    }

    fn small_scheme(kind: SchemeKind, mode: IndexationMode, closure: Option<u32>) -> SchemeConfig {
        let horizon = closure.map_or(16, |c| c + (TERMINAL - JOIN));
        SchemeConfig {
            kind,
            join_age: JOIN,
            retirement_age: RET,
            contribution_rate: 0.10,
            accrual_divisor: 40.0,
            target_indexation: 0.0,
            indexation_cap: 0.05,
            nominal_floor: 0.0,
            indexation_mode: mode,
            closure_year: closure,
            horizon,
            survive_to_retirement: true,
        }
    }

    fn lifestyle() -> InvestmentStrategy {
        InvestmentStrategy::lifestyle(RET, RET + 2, JOIN, TERMINAL)
    }

    #[test]
    fn attribution_reconstructs_every_benefit() {
        let scheme = small_scheme(SchemeKind::SingleEmployer, IndexationMode::Solve, Some(4));
        let model = FundModel::new(scheme, EconParams::baseline(), lifestyle(), &small_table()).unwrap();
        let source = BlackScholesModel::new(EconParams::baseline(), Measure::Physical, model.scheme.horizon, 7);
        let trace = model.run(&source.path(0)).unwrap();
        let working = model.scheme.working_years() as usize;

        for (s, rec) in trace.records.iter().enumerate() {
            for (i, &benefit) in rec.benefit_by_age.iter().enumerate() {
                if rec.members_by_age[i] <= 0.0 {
                    continue;
                }
                // every accrual year u contributes its grant carried
                // through the factors of (u, s]
                let mut expected = 0.0;
                for u in 0..=s {
                    let j = i as i64 - s as i64 + u as i64;
                    if !(0..working as i64).contains(&j) {
                        continue;
                    }
                    let mut carried = trace.records[u].accrual_by_age[j as usize];
                    for v in u + 1..=s {
                        carried *= trace.records[v].factor;
                    }
                    expected += carried;
                }
                assert_abs_diff_eq!(benefit, expected, epsilon = 1e-9 * expected.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn riskless_multi_employer_prices_exactly() {
        // with everything in bonds, a multi-employer accrual is priced by
        // the same annuity that defines it: P&L is identically zero
        let scheme = small_scheme(
            SchemeKind::MultiEmployer { initial_indexation: 0.01 },
            IndexationMode::Solve,
            Some(4),
        );
        let strategy = InvestmentStrategy::per_time(vec![0.0]);
        let model = FundModel::new(scheme, EconParams::baseline(), strategy, &small_table()).unwrap();

        for generation in contributing_generations(&model.scheme, 2) {
            let pnl = expected_instantaneous_pnl(&model, generation, 2, 16, 11).unwrap();
            assert!(pnl.estimate.abs() < 1e-9, "generation {generation} P&L {}", pnl.estimate);
            assert!(pnl.std_error < 1e-12, "deterministic case should have no spread");
        }

        let report = lifetime_q_report(&model, 8, 11).unwrap();
        assert_eq!(report.per_generation.len(), generation_count(&model.scheme).unwrap() as usize);
        for v in &report.per_generation {
            assert!(v.estimate.abs() < 1e-9, "generation {} lifetime value {}", v.generation, v.estimate);
        }
        assert!(report.total_estimate.abs() < 1e-9);
    }

    #[test]
    fn fixed_indexation_fund_matches_db_closed_form() {
        // fixed CPI-only indexation and a contribution rate solved for an
        // all-bond portfolio make the accrual value exponential in years of
        // service: the relative P&L is the defined-benefit closed form with
        // r the bond rate and i the CPI rate
        let params = EconParams::baseline();
        let table = small_table();
        let mut scheme = small_scheme(SchemeKind::SingleEmployer, IndexationMode::Fixed(0.0), None);
        let shape = SchemeShape {
            join_age: JOIN,
            retirement_age: RET,
            accrual_divisor: scheme.accrual_divisor,
            target_indexation: 0.0,
            survive_to_retirement: true,
        };
        let riskless = InvestmentStrategy::constant(0.0, JOIN, TERMINAL);
        let alpha = direct_contribution_rate(&table, &riskless, &params, &shape).unwrap().alpha;
        scheme.contribution_rate = alpha;

        let strategy = InvestmentStrategy::constant(1.0, JOIN, TERMINAL); // all risky, irrelevant to benefits
        let model = FundModel::new(scheme, params.clone(), strategy, &table).unwrap();
        let year = 3;
        let curve = expected_instantaneous_pnl_by_age(&model, year, 16, 5).unwrap();
        let n = model.scheme.working_years();
        for (k, point) in curve.iter().enumerate() {
            let closed = db_instantaneous_pnl(k as u32, n, params.bond_growth, params.cpi);
            assert_abs_diff_eq!(point.estimate, closed, epsilon = 1e-10);
            assert!(point.std_error < 1e-12, "P&L should not depend on the asset path");
            assert_eq!(point.age, JOIN + k as u32);
            assert_eq!(point.generation, n - 1 - k as u32 + year);
        }
    }

    #[test]
    fn nested_and_single_pass_agree_without_noise() {
        // sigma = 0 collapses both estimators to the same deterministic
        // valuation: outer scenarios are identical and match the
        // mixed-measure single pass
        let mut params = EconParams::baseline();
        params.stock_vol = 0.0;
        let scheme = small_scheme(SchemeKind::SingleEmployer, IndexationMode::Solve, Some(4));
        let model = FundModel::new(scheme, params, lifestyle(), &small_table()).unwrap();

        let curves = instantaneous_pnl_scenarios(&model, 2, 3, 4, 17).unwrap();
        assert_eq!(curves.len(), 3);
        let single = expected_instantaneous_pnl_by_age(&model, 2, 4, 23).unwrap();
        for curve in &curves {
            for (point, reference) in curve.points.iter().zip(&single) {
                assert_abs_diff_eq!(point.estimate, reference.estimate, epsilon = 1e-10);
                assert!(point.std_error < 1e-12);
            }
        }
    }

    #[test]
    fn lifetime_values_sum_to_zero_within_error() {
        let scheme = small_scheme(SchemeKind::SingleEmployer, IndexationMode::Solve, Some(4));
        let model = FundModel::new(scheme, EconParams::baseline(), lifestyle(), &small_table()).unwrap();
        let report = lifetime_q_report(&model, 400, 29).unwrap();
        assert!(
            report.total_estimate.abs() <= 3.0 * report.total_std_error,
            "sum of lifetime values {} should be 0 within 3 x {}",
            report.total_estimate,
            report.total_std_error
        );
        assert!(report.total_std_error > 0.0);

        // single-generation accessor agrees with the batch report
        let one = lifetime_q_value(&model, 2, 400, 29).unwrap();
        assert_eq!(one.estimate, report.per_generation[2].estimate);
    }

    #[test]
    fn non_contributing_requests_are_rejected() {
        let scheme = small_scheme(SchemeKind::SingleEmployer, IndexationMode::Solve, Some(4));
        let model = FundModel::new(scheme, EconParams::baseline(), lifestyle(), &small_table()).unwrap();
        // generation 0 is retired by year 2 (working years = 3)
        assert!(expected_instantaneous_pnl(&model, 0, 3, 4, 1).is_err());
        // valuation year after closure
        assert!(expected_instantaneous_pnl_by_age(&model, 5, 4, 1).is_err());
        // generation beyond the scheme's span
        assert!(lifetime_q_value(&model, 99, 4, 1).is_err());
    }
}
