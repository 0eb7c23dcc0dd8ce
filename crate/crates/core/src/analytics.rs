//! Scenario post-processing: replacement ratios, lifetime means, fan
//! deciles, and per-generation aggregates across scenarios, for both the
//! collective scheme and the benchmark designs.

use rayon::prelude::*;
use thiserror::Error;

use crate::comparators::{simulate_dc_annuity, simulate_pooled_annuity, ComparatorConfig, ComparatorError, IncomeResult};
use crate::econ::{constant_path, BlackScholesModel, EconParams, Measure, ScenarioPath, ScenarioSource};
use crate::engine::{EngineError, FundModel, FundTrace, SchemeConfig};
use crate::lifetable::LifeTable;
use crate::util::{median, neumaier_sum, quantile};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Comparator(#[from] ComparatorError),
    #[error("invalid analytics request: {0}")]
    Config(String),
}

/// One generation's retirement income in one scenario, in real
/// (CPI-deflated, year-0) terms.
#[derive(Debug, Clone)]
pub struct IncomeTrace {
    pub scenario: u64,
    pub generation: u32,
    /// `(age, real income)` per retirement year.
    pub incomes: Vec<(u32, f64)>,
    /// Salary in the final working year, deflated to year-0 prices.
    pub final_salary_real: f64,
    /// Years in which contributions were actually invested.
    pub years_invested: u32,
}

impl IncomeTrace {
    fn from_result(result: IncomeResult, scenario: u64, generation: u32) -> Self {
        Self {
            scenario,
            generation,
            incomes: result.incomes,
            final_salary_real: result.final_salary_real,
            years_invested: result.years_invested,
        }
    }
}

/// Real income divided by real final salary, per retirement age.
pub fn replacement_ratios(trace: &IncomeTrace) -> Result<Vec<(u32, f64)>, AnalyticsError> {
    if trace.final_salary_real <= 0.0 {
        return Err(AnalyticsError::Config(format!(
            "replacement ratio undefined: final salary is {}",
            trace.final_salary_real
        )));
    }
    Ok(trace.incomes.iter().map(|&(age, income)| (age, income / trace.final_salary_real)).collect())
}

/// Mean replacement ratio over the retirement years, scaled by the share
/// of a full career actually invested — so a half-career member with the
/// same yearly pension as a full-career one scores half as much.
pub fn lifetime_mean_replacement_ratio(trace: &IncomeTrace, full_career_years: u32) -> Result<f64, AnalyticsError> {
    if full_career_years == 0 {
        return Err(AnalyticsError::Config("full career length must be positive".into()));
    }
    let ratios = replacement_ratios(trace)?;
    if ratios.is_empty() {
        return Err(AnalyticsError::Config("no retirement years in trace".into()));
    }
    let mean = neumaier_sum(ratios.iter().map(|&(_, r)| r)) / ratios.len() as f64;
    Ok(mean * trace.years_invested as f64 / full_career_years as f64)
}

/// One row of a fan diagram: the nine deciles of the cross-scenario
/// distribution plus one example scenario (the first sample).
#[derive(Debug, Clone)]
pub struct FanRow {
    pub index: usize,
    pub deciles: [f64; 9],
    pub example: f64,
}

/// Nine deciles (10%..90%, linear interpolation between order statistics)
/// per entry of a per-year sample grid.
pub fn fan_deciles(per_year_samples: &[Vec<f64>]) -> Result<Vec<FanRow>, AnalyticsError> {
    per_year_samples
        .iter()
        .enumerate()
        .map(|(index, samples)| {
            if samples.len() < 10 {
                return Err(AnalyticsError::Config(format!(
                    "fan needs at least 10 samples per year, entry {index} has {}",
                    samples.len()
                )));
            }
            let mut deciles = [0.0; 9];
            for (i, d) in deciles.iter_mut().enumerate() {
                *d = quantile(samples, (i + 1) as f64 / 10.0);
            }
            Ok(FanRow { index, deciles, example: samples[0] })
        })
        .collect()
}

/// Retirement income of one generation extracted from a completed fund
/// simulation. Generation `g` is aged `retirement_age - 1 - g` in year 0
/// (negative meaning it joins later); it retires in year `g + 1`.
pub fn cdc_income_trace(
    scheme: &SchemeConfig,
    trace: &FundTrace,
    path: &ScenarioPath,
    generation: u32,
    scenario: u64,
) -> Result<IncomeTrace, AnalyticsError> {
    let working = scheme.working_years() as usize;
    let n_ages = trace.records.first().map_or(0, |r| r.benefit_by_age.len());
    let terminal = scheme.join_age + n_ages as u32;
    let g = generation as usize;
    let last_year = g + (terminal - scheme.retirement_age) as usize;
    if trace.records.len() <= last_year {
        return Err(AnalyticsError::Config(format!(
            "records end at year {}, generation {generation} needs year {last_year}",
            trace.records.len().saturating_sub(1)
        )));
    }

    let first_contributing_year = (g + 1).saturating_sub(working);
    let mut years_invested = 0u32;
    for s in first_contributing_year..=g {
        let slot = working - 1 - (g - s);
        if trace.records[s].accrual_by_age[slot] > 0.0 {
            years_invested += 1;
        }
    }

    let incomes = (g + 1..=last_year)
        .map(|s| {
            let age = scheme.retirement_age + (s - g - 1) as u32;
            let slot = (age - scheme.join_age) as usize;
            (age, trace.records[s].benefit_by_age[slot] / path.cpi_index[s])
        })
        .collect();

    Ok(IncomeTrace {
        scenario,
        generation,
        incomes,
        final_salary_real: path.wage_index[g] / path.cpi_index[g],
        years_invested,
    })
}

/// Cross-scenario summary of one generation's lifetime-mean replacement
/// ratios.
#[derive(Debug, Clone, Copy)]
pub struct GenerationSummary {
    pub generation: u32,
    pub median: f64,
    pub mean: f64,
    pub n: usize,
}

fn summarise(generation: u32, samples: &[f64]) -> GenerationSummary {
    GenerationSummary {
        generation,
        median: median(samples),
        mean: neumaier_sum(samples.iter().copied()) / samples.len() as f64,
        n: samples.len(),
    }
}

fn check_request(generations: &[u32], n_scenarios: usize) -> Result<(), AnalyticsError> {
    if generations.is_empty() {
        return Err(AnalyticsError::Config("no generations requested".into()));
    }
    if n_scenarios == 0 {
        return Err(AnalyticsError::Config("need at least one scenario".into()));
    }
    Ok(())
}

/// Median and mean lifetime replacement ratios per generation for the
/// collective scheme, simulated under the physical measure with the given
/// drift shift added to expected stock returns. The fund itself keeps
/// pricing and solving with its unshifted central estimates — only the
/// realised paths change — so a nonzero shift measures how the scheme
/// treats members when returns systematically surprise it.
pub fn cdc_generation_summaries(
    model: &FundModel,
    generations: &[u32],
    n_scenarios: usize,
    seed: u64,
    drift_shift: f64,
) -> Result<Vec<GenerationSummary>, AnalyticsError> {
    check_request(generations, n_scenarios)?;
    let source = BlackScholesModel {
        params: model.params.clone(),
        measure: Measure::Physical,
        horizon: model.scheme.horizon,
        seed,
        steps_per_year: 1,
        drift_shift,
    };
    let full_career = model.scheme.working_years();
    let per_scenario: Vec<Vec<f64>> = (0..n_scenarios as u64)
        .into_par_iter()
        .map(|s| {
            let path = source.path(s);
            let trace = model.run(&path)?;
            generations
                .iter()
                .map(|&g| {
                    let income = cdc_income_trace(&model.scheme, &trace, &path, g, s)?;
                    lifetime_mean_replacement_ratio(&income, full_career)
                })
                .collect()
        })
        .collect::<Result<_, AnalyticsError>>()?;
    Ok(collect_summaries(generations, &per_scenario))
}

/// Time-indexed stock proportions read off a reference fund's aggregate
/// allocation on the central path. Imposing these on a multi-employer fund
/// gives every member the same discount curve while keeping the overall
/// allocation in line with the reference scheme's.
pub fn matched_per_time_proportions(reference: &FundModel) -> Result<Vec<f64>, AnalyticsError> {
    let path = constant_path(&reference.params, reference.scheme.horizon);
    let trace = reference.run(&path)?;
    Ok(trace.records.iter().map(|r| r.risky_proportion).collect())
}

/// The CDC experiment of running the fund on paths whose average stock
/// return is shifted by ±1% while the fund is managed as before.
pub fn shifted_return_experiment(
    model: &FundModel,
    generations: &[u32],
    shift: f64,
    n_scenarios: usize,
    seed: u64,
) -> Result<Vec<GenerationSummary>, AnalyticsError> {
    cdc_generation_summaries(model, generations, n_scenarios, seed, shift)
}

/// Benchmark designs a generation's contributions could have gone into
/// instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkKind {
    /// Individual account, de-risked to bonds, buying a loaded
    /// index-linked annuity at retirement.
    DcAnnuity,
    /// Collective drawdown pool with mortality credits.
    PooledAnnuity,
}

/// Comparator configuration for one generation of the collective scheme:
/// same contribution rate, retirement age and closure, with the career
/// truncated to the years the generation can actually invest from year 0.
fn benchmark_config(scheme: &SchemeConfig, taper: (u32, u32), generation: u32) -> ComparatorConfig {
    let working = scheme.working_years();
    let entry_year = (generation + 1).saturating_sub(working);
    // members already mid-career in year 0 start saving at their current age
    let join_age = scheme.retirement_age - 1 - generation + entry_year;
    ComparatorConfig {
        join_age,
        retirement_age: scheme.retirement_age,
        contribution_rate: scheme.contribution_rate,
        entry_year,
        closure_year: scheme.closure_year,
        taper_start: taper.0,
        taper_end: taper.1,
        annuity_loading: 1.05,
        survive_to_retirement: scheme.survive_to_retirement,
    }
}

/// Median and mean lifetime replacement ratios per generation under a
/// benchmark design, on the same scenario family the collective scheme is
/// judged against (same seed, same scenario indices).
pub fn benchmark_generation_summaries(
    kind: BenchmarkKind,
    scheme: &SchemeConfig,
    params: &EconParams,
    table: &LifeTable,
    taper: (u32, u32),
    generations: &[u32],
    n_scenarios: usize,
    seed: u64,
) -> Result<Vec<GenerationSummary>, AnalyticsError> {
    check_request(generations, n_scenarios)?;
    let source = BlackScholesModel::new(params.clone(), Measure::Physical, scheme.horizon, seed);
    let full_career = scheme.working_years();
    let per_scenario: Vec<Vec<f64>> = (0..n_scenarios as u64)
        .into_par_iter()
        .map(|s| {
            let path = source.path(s);
            generations
                .iter()
                .map(|&g| {
                    let config = benchmark_config(scheme, taper, g);
                    let result = match kind {
                        BenchmarkKind::DcAnnuity => simulate_dc_annuity(&config, &path, table, params)?,
                        BenchmarkKind::PooledAnnuity => simulate_pooled_annuity(&config, &path, table, params)?,
                    };
                    lifetime_mean_replacement_ratio(&IncomeTrace::from_result(result, s, g), full_career)
                })
                .collect()
        })
        .collect::<Result<_, AnalyticsError>>()?;
    Ok(collect_summaries(generations, &per_scenario))
}

fn collect_summaries(generations: &[u32], per_scenario: &[Vec<f64>]) -> Vec<GenerationSummary> {
    generations
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let samples: Vec<f64> = per_scenario.iter().map(|row| row[i]).collect();
            summarise(g, samples.as_slice())
        })
        .collect()
}
