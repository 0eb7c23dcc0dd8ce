//! The yearly fund loop: shared-indexation benefit dynamics, the annual
//! indexation solve, accrual, and pension payment.
//!
//! Each member's state is a cumulative yearly pension entitlement. Every
//! year the fund chooses one indexation rate `h` (real, on top of
//! realised consumer price inflation) applied to all entitlements, by
//! equating the marked-to-strategy value of all current entitlements to
//! the available assets:
//!
//! ```text
//!   assets = theta * sum over ages a, horizons l of
//!            N_a * B_a * J(h, l) * P_a(l) * p(a, l) * [a + l >= retirement]
//! ```
//!
//! where `J(h, l)` compounds `l + 1` years of `(1 + cpi)(1 + h)` (the
//! payment due this year has already missed this year's increase, so the
//! current increase applies to it too), `P_a(l)` discounts at the
//! predicted return of the investment strategy and `p(a, l)` is survival.
//! The scale factor `theta` is 1 while `h` stays between the floor and the
//! cap; outside that range `h` pins to the boundary and `theta` absorbs
//! the difference (a one-off uplift above the cap, a one-off cut below the
//! floor).

use thiserror::Error;

use crate::econ::{discount_curve_by_time, EconError, EconParams, InvestmentStrategy, ScenarioPath};
use crate::lifetable::{LifeTable, LifeTableError};
use crate::solver::{brent, SolveError};
use crate::util::neumaier_sum;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scheme configuration: {0}")]
    Config(String),
    #[error("life table error: {0}")]
    Table(#[from] LifeTableError),
    #[error("economic parameter error: {0}")]
    Econ(#[from] EconError),
    #[error("indexation solve failed in year {year}: {source}")]
    Solve { year: u32, source: SolveError },
    #[error("year {year}: fund holds {assets:e} in assets with no remaining liabilities (peak assets {peak:e})")]
    ResidualAssets { year: u32, assets: f64, peak: f64 },
}

/// How new entitlements are priced at accrual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeKind {
    /// Career-average accrual: a year of service buys `salary / accrual_divisor`
    /// of yearly pension regardless of age.
    SingleEmployer,
    /// Age-fair accrual: contributions buy whatever pension they can fund
    /// at the current indexation rate and the common discount curve, so no
    /// value is transferred between cohorts at entry.
    MultiEmployer {
        /// Indexation rate used to price accrual in year 0, before the
        /// first solve has happened.
        initial_indexation: f64,
    },
}

/// How the yearly indexation rate is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IndexationMode {
    /// Solve the balance equation every year (the CDC mechanism).
    Solve,
    /// Apply a fixed real rate with no scaling, regardless of assets
    /// (a defined-benefit promise; assets become a residual account).
    Fixed(f64),
}

/// Which branch the indexation solve ended in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexationRegime {
    /// `h` between floor and cap, `theta = 1`.
    Interior,
    /// `h` pinned at the cap, surplus paid as a one-off `theta > 1`.
    CappedBonus,
    /// `h` pinned at the floor, shortfall taken as a one-off `theta < 1`.
    FlooredCut,
    /// No solve: rate set by [`IndexationMode::Fixed`].
    Fixed,
}

impl IndexationRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            IndexationRegime::Interior => "interior",
            IndexationRegime::CappedBonus => "capped_bonus",
            IndexationRegime::FlooredCut => "floored_cut",
            IndexationRegime::Fixed => "fixed",
        }
    }
}

/// Scheme design parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    /// Age at which members join and start contributing.
    pub join_age: u32,
    /// Age from which pensions are paid (at the start of each year).
    pub retirement_age: u32,
    /// Contribution rate as a fraction of salary.
    pub contribution_rate: f64,
    /// Career-average divisor: one year of service accrues
    /// `salary / accrual_divisor` of yearly pension.
    pub accrual_divisor: f64,
    /// Indexation rate targeted on top of inflation.
    pub target_indexation: f64,
    /// Cap on the solved rate (`f64::INFINITY` disables the cap).
    pub indexation_cap: f64,
    /// Floor on the nominal increase: the solved real rate is not allowed
    /// below `nominal_floor - cpi` (`f64::NEG_INFINITY` disables it).
    pub nominal_floor: f64,
    pub indexation_mode: IndexationMode,
    /// If set, no new members join from this year on and contributions
    /// stop (year 0 counts as open; entrants arrive in years
    /// `1 .. closure_year`).
    pub closure_year: Option<u32>,
    /// Last simulated year.
    pub horizon: u32,
    /// Treat pre-retirement mortality as zero (members reach retirement
    /// with certainty).
    pub survive_to_retirement: bool,
}

impl SchemeConfig {
    /// Number of contributing years of a member who joins at entry age
    /// and works to retirement.
    pub fn working_years(&self) -> u32 {
        self.retirement_age - self.join_age
    }
}

/// Outcome of one year's indexation decision.
#[derive(Debug, Clone, Copy)]
pub struct IndexationOutcome {
    pub h: f64,
    pub theta: f64,
    pub regime: IndexationRegime,
}

/// Everything recorded about one simulated year.
#[derive(Debug, Clone)]
pub struct YearRecord {
    pub year: u32,
    pub indexation: IndexationOutcome,
    /// Common multiplier applied to every entitlement this year:
    /// `(1 + realised cpi) * (1 + h) * theta` (1 in year 0).
    pub factor: f64,
    /// Assets after investment returns, before this year's cashflows.
    pub assets_pre: f64,
    /// Assets after contributions received and pensions paid.
    pub assets_post: f64,
    pub total_contributions: f64,
    pub total_pensions: f64,
    /// Contribution per active member (`contribution_rate * salary`).
    pub contribution_per_member: f64,
    /// Stock proportion chosen for the coming year `(t, t+1]`.
    pub risky_proportion: f64,
    /// Value of all entitlements after this year's payment, at the solved
    /// rate, including this year's accrual.
    pub post_liability: f64,
    /// Value (same basis) of the entitlements accrued this year.
    pub accrual_value: f64,
    /// Pension accrued this year per member, by age slot.
    pub accrual_by_age: Vec<f64>,
    /// Cumulative yearly pension per member, by age slot, after
    /// indexation and accrual.
    pub benefit_by_age: Vec<f64>,
    /// Expected number of members in each age slot.
    pub members_by_age: Vec<f64>,
}

/// A completed simulation: one record per year `0 ..= horizon`.
#[derive(Debug, Clone)]
pub struct FundTrace {
    pub join_age: u32,
    pub records: Vec<YearRecord>,
    pub final_assets: f64,
    pub peak_assets: f64,
}

impl FundTrace {
    /// Age slot index for `age`.
    pub fn slot(&self, age: u32) -> usize {
        (age - self.join_age) as usize
    }
}

/// Immutable precomputed model shared by all scenario runs: the adjusted
/// life table, survival and discount grids, and scheme parameters.
#[derive(Debug)]
pub struct FundModel {
    pub scheme: SchemeConfig,
    pub params: EconParams,
    pub strategy: InvestmentStrategy,
    /// Life table actually used (mortality removed below retirement when
    /// `survive_to_retirement` is set), re-based to start at the join age.
    table: LifeTable,
    /// Ages covered: `join_age + i` for `i in 0..n_ages`.
    n_ages: usize,
    /// `nhat[i]`: probability of surviving from join age to `join_age + i`.
    nhat: Vec<f64>,
    /// Age-indexed strategies: `payment[i][l] = P_a(l) * p(a, l) * [a + l >= ret]`
    /// with the discount curve following the member's own glide path.
    payment: Option<Vec<Vec<f64>>>,
    /// Time-indexed strategies: survival-only part `p(a, l) * [a + l >= ret]`;
    /// the discount curve is rebuilt each year from the calendar strategy.
    survival_part: Option<Vec<Vec<f64>>>,
    /// Stock proportion by age slot (age-indexed strategies only).
    pi_by_age: Vec<f64>,
}

impl FundModel {
    pub fn new(
        scheme: SchemeConfig,
        params: EconParams,
        strategy: InvestmentStrategy,
        table: &LifeTable,
    ) -> Result<Self, EngineError> {
        params.validate()?;
        strategy.validate()?;
        if scheme.retirement_age <= scheme.join_age {
            return Err(EngineError::Config("retirement age must exceed join age".into()));
        }
        if table.terminal_age() <= scheme.retirement_age {
            return Err(EngineError::Config("life table must extend past the retirement age".into()));
        }
        if !(scheme.contribution_rate.is_finite() && scheme.contribution_rate >= 0.0) {
            return Err(EngineError::Config(format!("contribution rate {} must be non-negative", scheme.contribution_rate)));
        }
        if !(scheme.accrual_divisor.is_finite() && scheme.accrual_divisor > 0.0) {
            return Err(EngineError::Config(format!("accrual divisor {} must be positive", scheme.accrual_divisor)));
        }
        if scheme.indexation_cap < scheme.target_indexation {
            return Err(EngineError::Config("indexation cap is below the target".into()));
        }
        if let Some(c) = scheme.closure_year {
            if c == 0 {
                return Err(EngineError::Config("closure year 0 would mean the scheme never operates".into()));
            }
            let needed = c + (table.terminal_age() - scheme.join_age);
            if scheme.horizon < needed {
                return Err(EngineError::Config(format!(
                    "horizon {} is too short to run the closed scheme off (need at least {needed})",
                    scheme.horizon
                )));
            }
        }
        let terminal = table.terminal_age();
        let table = table.rebased_for_scheme(scheme.join_age, scheme.retirement_age, scheme.survive_to_retirement)?;

        let n_ages = (terminal - scheme.join_age) as usize;
        let mut nhat = Vec::with_capacity(n_ages);
        let mut p = 1.0;
        for i in 0..n_ages {
            nhat.push(p);
            p *= 1.0 - table.q(scheme.join_age + i as u32)?;
        }

        // Survival-to-payment grids. Row i covers horizons l = 0 ..
        // terminal - age (exclusive); later horizons are certainly dead.
        let grid = |with_discount: bool| -> Result<Vec<Vec<f64>>, EngineError> {
            (0..n_ages)
                .map(|i| {
                    let age = scheme.join_age + i as u32;
                    let max_l = (terminal - age) as usize;
                    let discounts = if with_discount {
                        Some(crate::econ::discount_curve_by_age(&params, &strategy, age, max_l as u32 - 1))
                    } else {
                        None
                    };
                    let mut row = Vec::with_capacity(max_l);
                    let mut p = 1.0; // survival a -> a + l
                    for l in 0..max_l {
                        if l > 0 {
                            p *= 1.0 - table.q(age + l as u32 - 1)?;
                        }
                        let pays = age + l as u32 >= scheme.retirement_age;
                        let d = discounts.as_ref().map_or(1.0, |ds| ds[l]);
                        row.push(if pays { d * p } else { 0.0 });
                    }
                    Ok(row)
                })
                .collect()
        };

        let (payment, survival_part) = if strategy.is_per_time() {
            (None, Some(grid(false)?))
        } else {
            (Some(grid(true)?), None)
        };

        let pi_by_age = (0..n_ages).map(|i| strategy.proportion(scheme.join_age + i as u32, 0)).collect();

        Ok(Self { scheme, params, strategy, table, n_ages, nhat, payment, survival_part, pi_by_age })
    }

    pub fn table(&self) -> &LifeTable {
        &self.table
    }

    pub fn n_ages(&self) -> usize {
        self.n_ages
    }

    /// Expected number of members who joined `i` years ago.
    pub fn expected_members(&self, i: usize) -> f64 {
        self.nhat[i]
    }

    /// Fresh fund at the start of year 0 with the initial population in
    /// place: one generation at every working age, no pensioners, no
    /// assets and no entitlements.
    pub fn start(&self) -> Fund<'_> {
        let mut members = vec![0.0; self.n_ages];
        let working = self.scheme.working_years() as usize;
        members[..working].copy_from_slice(&self.nhat[..working]);
        Fund {
            model: self,
            next_year: 0,
            benefits: vec![0.0; self.n_ages],
            members,
            assets: 0.0,
            peak_assets: 0.0,
            risky: 0.0,
        }
    }

    /// Run years `0 ..= horizon` against one scenario.
    pub fn run(&self, path: &ScenarioPath) -> Result<FundTrace, EngineError> {
        assert!(path.horizon() >= self.scheme.horizon, "scenario path shorter than the scheme horizon");
        let mut fund = self.start();
        let mut records = Vec::with_capacity(self.scheme.horizon as usize + 1);
        for _ in 0..=self.scheme.horizon {
            records.push(fund.step(path)?);
        }
        Ok(FundTrace {
            join_age: self.scheme.join_age,
            final_assets: fund.assets,
            peak_assets: fund.peak_assets,
            records,
        })
    }

    /// Payment factor `P_a(l) * p(a, l) * [pays]` for slot `i`, given the
    /// year's discount curve when the strategy is time-indexed.
    fn payment_factor(&self, i: usize, l: usize, time_discounts: Option<&[f64]>) -> f64 {
        match (&self.payment, &self.survival_part) {
            (Some(g), _) => g[i][l],
            (_, Some(s)) => time_discounts.expect("time-indexed strategy needs a discount curve")[l] * s[i][l],
            _ => unreachable!("one grid is always built"),
        }
    }

    fn row_len(&self, i: usize) -> usize {
        self.n_ages - i
    }

    /// Tolerance for "the fund is empty": absolute residuals below this
    /// are rounding noise from a full run-off.
    fn residual_tolerance(&self, peak: f64) -> f64 {
        1e-9 * peak.max(1.0)
    }
}

/// Mutable simulation state, stepping one year at a time. Cloneable so a
/// simulation can be forked mid-run (used by nested valuations).
#[derive(Debug, Clone)]
pub struct Fund<'m> {
    model: &'m FundModel,
    next_year: u32,
    /// Cumulative yearly pension per member, by age slot.
    benefits: Vec<f64>,
    /// Expected members per age slot (0 marks an empty slot).
    members: Vec<f64>,
    /// Assets after the previous year's cashflows.
    assets: f64,
    peak_assets: f64,
    /// Stock proportion over the coming year.
    risky: f64,
}

impl<'m> Fund<'m> {
    pub fn next_year(&self) -> u32 {
        self.next_year
    }

    pub fn assets(&self) -> f64 {
        self.assets
    }

    pub fn peak_assets(&self) -> f64 {
        self.peak_assets
    }

    /// Advance one year and return its record.
    pub fn step(&mut self, path: &ScenarioPath) -> Result<YearRecord, EngineError> {
        let t = self.next_year;
        let model = self.model;
        let scheme = &model.scheme;
        let cpi_proj = model.params.cpi;
        let open = scheme.closure_year.map_or(true, |c| t < c);

        // 1. Investment return over (t-1, t], then age the population and
        //    admit the year's entrant. Year 0 is initialisation only.
        if t > 0 {
            self.assets *= path.portfolio_gross(t, self.risky);
            for i in (1..model.n_ages).rev() {
                let q = model.table.q(scheme.join_age + i as u32 - 1).expect("age in table");
                self.members[i] = self.members[i - 1] * (1.0 - q);
                self.benefits[i] = self.benefits[i - 1];
            }
            if open {
                self.members[0] = 1.0;
                self.benefits[0] = 0.0;
            } else {
                self.members[0] = 0.0;
                self.benefits[0] = 0.0;
            }
        }
        let assets_pre = self.assets;

        // 2. Choose the year's indexation.
        let time_discounts = if model.strategy.is_per_time() {
            Some(discount_curve_by_time(&model.params, &model.strategy, t, model.n_ages as u32 - 1))
        } else {
            None
        };
        let outcome = self.solve_indexation(t, assets_pre, time_discounts.as_deref())?;

        // 3. Apply it: every entitlement moves with realised inflation,
        //    the solved rate and the scale factor.
        let factor = if t == 0 {
            1.0
        } else {
            (1.0 + path.cpi[t as usize]) * (1.0 + outcome.h) * outcome.theta
        };
        if t > 0 {
            for b in &mut self.benefits {
                *b *= factor;
            }
        }

        // 4. Accrue new entitlements for active members.
        let salary = path.wage_index[t as usize];
        let contribution_per_member = scheme.contribution_rate * salary;
        let mut accrual_by_age = vec![0.0; model.n_ages];
        let mut total_contributions = 0.0;
        if open {
            let working = scheme.working_years() as usize;
            for i in 0..working {
                if self.members[i] <= 0.0 {
                    continue;
                }
                let accrued = match scheme.kind {
                    SchemeKind::SingleEmployer => salary / scheme.accrual_divisor,
                    SchemeKind::MultiEmployer { .. } => {
                        let annuity = self.unit_annuity(i, outcome.h, time_discounts.as_deref());
                        contribution_per_member / annuity
                    }
                };
                accrual_by_age[i] = accrued;
                self.benefits[i] += accrued;
                total_contributions += contribution_per_member * self.members[i];
            }
        }

        // 5. Pay this year's pensions.
        let retired_from = scheme.working_years() as usize;
        let total_pensions = neumaier_sum(
            (retired_from..model.n_ages).map(|i| self.benefits[i] * self.members[i]),
        );
        self.assets = assets_pre + total_contributions - total_pensions;
        self.peak_assets = self.peak_assets.max(self.assets);

        // 6. Value the post-payment entitlements at the year's rate; the
        //    liability-weighted stock proportion follows from the same sums.
        let y = (1.0 + outcome.h) * (1.0 + cpi_proj);
        let mut post_liability = 0.0;
        let mut accrual_value = 0.0;
        let mut weighted_pi = 0.0;
        for i in 0..model.n_ages {
            if self.members[i] <= 0.0 {
                continue;
            }
            // sum over l >= 1 of y^l * payment factor (the l = 0 payment
            // has just been made)
            let mut s = 0.0;
            let mut yl = 1.0;
            for l in 1..model.row_len(i) {
                yl *= y;
                s += yl * model.payment_factor(i, l, time_discounts.as_deref());
            }
            let value = self.benefits[i] * self.members[i] * s;
            post_liability += value;
            accrual_value += accrual_by_age[i] * self.members[i] * s;
            weighted_pi += model.pi_by_age[i] * value;
        }
        self.risky = if model.strategy.is_per_time() {
            model.strategy.proportion(0, t)
        } else if post_liability > 0.0 {
            weighted_pi / post_liability
        } else {
            0.0
        };

        self.next_year = t + 1;
        Ok(YearRecord {
            year: t,
            indexation: outcome,
            factor,
            assets_pre,
            assets_post: self.assets,
            total_contributions,
            total_pensions,
            contribution_per_member,
            risky_proportion: self.risky,
            post_liability,
            accrual_value,
            accrual_by_age,
            benefit_by_age: self.benefits.clone(),
            members_by_age: self.members.clone(),
        })
    }

    /// Value of a unit of yearly pension for slot `i` at indexation `h`:
    /// the Eq-for-accrual annuity with `l` compounding factors at horizon
    /// `l` (the first payment a retiree would receive this year is not
    /// indexed again).
    fn unit_annuity(&self, i: usize, h: f64, time_discounts: Option<&[f64]>) -> f64 {
        let y = (1.0 + h) * (1.0 + self.model.params.cpi);
        let mut s = 0.0;
        let mut yl = 1.0;
        for l in 0..self.model.row_len(i) {
            if l > 0 {
                yl *= y;
            }
            s += yl * self.model.payment_factor(i, l, time_discounts);
        }
        s
    }

    /// Solve the balance equation for `(h, theta)` given pre-cashflow
    /// assets. Entitlement weights are the carried values `B_a * N_a`; the
    /// liability as a function of `u = 1 + h` is the monotone polynomial
    /// `L(u) = sum over l of c_l * u^(l+1)`.
    fn solve_indexation(
        &self,
        t: u32,
        assets: f64,
        time_discounts: Option<&[f64]>,
    ) -> Result<IndexationOutcome, EngineError> {
        let model = self.model;
        let scheme = &model.scheme;

        if t == 0 {
            // Nothing to index yet. The recorded rate is what accrual
            // pricing uses before the first solve.
            let h0 = match scheme.kind {
                SchemeKind::MultiEmployer { initial_indexation } => initial_indexation,
                SchemeKind::SingleEmployer => scheme.target_indexation,
            };
            return Ok(IndexationOutcome { h: h0, theta: 1.0, regime: IndexationRegime::Fixed });
        }
        if let IndexationMode::Fixed(h) = scheme.indexation_mode {
            return Ok(IndexationOutcome { h, theta: 1.0, regime: IndexationRegime::Fixed });
        }

        // Collapse ages into per-horizon coefficients:
        // c[l] = (1 + cpi)^(l+1) * sum over slots of B * N * payment factor.
        let cpi_proj = model.params.cpi;
        let mut c = vec![0.0; model.n_ages];
        for i in 0..model.n_ages {
            let w = self.benefits[i] * self.members[i];
            if w == 0.0 {
                continue;
            }
            for l in 0..model.row_len(i) {
                c[l] += w * model.payment_factor(i, l, time_discounts);
            }
        }
        let mut cpi_pow = 1.0;
        for coef in c.iter_mut() {
            cpi_pow *= 1.0 + cpi_proj;
            *coef *= cpi_pow;
        }
        // Horner evaluation of sum c[l] * u^(l+1)
        let liability = |u: f64| -> f64 {
            let mut acc = 0.0;
            for &coef in c.iter().rev() {
                acc = acc * u + coef;
            }
            acc * u
        };

        let total_weight = neumaier_sum(c.iter().copied());
        if total_weight == 0.0 {
            // No entitlements left. A truly empty fund idles; leftover
            // assets beyond rounding noise mean the run-off failed.
            if assets.abs() > model.residual_tolerance(self.peak_assets) {
                return Err(EngineError::ResidualAssets { year: t, assets, peak: self.peak_assets });
            }
            return Ok(IndexationOutcome { h: 0.0, theta: 1.0, regime: IndexationRegime::Interior });
        }

        // Floor: the real rate may not drop below nominal_floor - cpi.
        let u_floor = if scheme.nominal_floor.is_finite() {
            (1.0 + scheme.nominal_floor - cpi_proj).max(1e-9)
        } else {
            1e-9
        };
        let l_floor = liability(u_floor);
        if assets < l_floor {
            return Ok(IndexationOutcome {
                h: u_floor - 1.0,
                theta: if assets > 0.0 { assets / l_floor } else { 0.0 },
                regime: IndexationRegime::FlooredCut,
            });
        }

        // Cap, or an expanding bracket when uncapped.
        let u_cap = if scheme.indexation_cap.is_finite() {
            let u = 1.0 + scheme.indexation_cap;
            if assets > liability(u) {
                return Ok(IndexationOutcome {
                    h: scheme.indexation_cap,
                    theta: assets / liability(u),
                    regime: IndexationRegime::CappedBonus,
                });
            }
            u
        } else {
            let mut u = (1.0 + scheme.target_indexation).max(u_floor * 2.0).max(1.1);
            let mut tries = 0;
            while liability(u) < assets {
                u *= 2.0;
                tries += 1;
                if tries > 200 {
                    return Err(EngineError::Solve {
                        year: t,
                        source: SolveError::NotBracketed { lo: u_floor, hi: u, flo: l_floor - assets, fhi: liability(u) - assets },
                    });
                }
            }
            u
        };

        let ftol = 1e-13 * assets.max(1.0);
        let u = brent(|u| liability(u) - assets, u_floor, u_cap, 1e-15, ftol)
            .map_err(|source| EngineError::Solve { year: t, source })?;
        Ok(IndexationOutcome { h: u - 1.0, theta: 1.0, regime: IndexationRegime::Interior })
    }
}

/// Fund-level stock proportions realised by a simulation, as a
/// calendar-year strategy a multi-employer scheme can adopt.
pub fn derive_per_time_strategy(trace: &FundTrace) -> InvestmentStrategy {
    InvestmentStrategy::per_time(trace.records.iter().map(|r| r.risky_proportion).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::{constant_path, ConstantModel, ScenarioSource};
    use crate::steady;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn base_scheme() -> SchemeConfig {
        SchemeConfig {
            kind: SchemeKind::SingleEmployer,
            join_age: 25,
            retirement_age: 65,
            contribution_rate: 0.1,
            accrual_divisor: 80.0,
            target_indexation: 0.0,
            indexation_cap: 0.05,
            nominal_floor: 0.0,
            indexation_mode: IndexationMode::Solve,
            closure_year: Some(100),
            horizon: 196,
            survive_to_retirement: true,
        }
    }

    fn model_with(scheme: SchemeConfig) -> FundModel {
        let table = LifeTable::bundled_pensioner();
        let strategy = InvestmentStrategy::lifestyle(65, 85, 25, table.terminal_age());
        FundModel::new(scheme, EconParams::baseline(), strategy, &table).unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        let table = LifeTable::bundled_pensioner();
        let strategy = InvestmentStrategy::lifestyle(65, 85, 25, 121);
        let mut s = base_scheme();
        s.retirement_age = 20;
        assert!(FundModel::new(s, EconParams::baseline(), strategy.clone(), &table).is_err());

        let mut s = base_scheme();
        s.horizon = 100; // too short to run the closed scheme off
        assert!(FundModel::new(s, EconParams::baseline(), strategy.clone(), &table).is_err());

        let mut s = base_scheme();
        s.indexation_cap = -0.1; // below the zero target
        assert!(FundModel::new(s, EconParams::baseline(), strategy, &table).is_err());
    }

    #[test]
    fn year_zero_collects_contributions_and_pays_nothing() {
        let model = model_with(base_scheme());
        let path = constant_path(&model.params, model.scheme.horizon);
        let mut fund = model.start();
        let rec = fund.step(&path).unwrap();
        assert_eq!(rec.year, 0);
        // 40 working generations, salary 1, rate 10%
        assert_relative_eq!(rec.total_contributions, 4.0, max_relative = 1e-12);
        assert_eq!(rec.total_pensions, 0.0);
        assert_relative_eq!(rec.assets_post, 4.0, max_relative = 1e-12);
        assert_relative_eq!(rec.accrual_by_age[0], 1.0 / 80.0);
        assert_eq!(rec.factor, 1.0);
    }

    #[test]
    fn members_age_through_slots() {
        let model = model_with(base_scheme());
        let path = constant_path(&model.params, model.scheme.horizon);
        let mut fund = model.start();
        let mut last = fund.step(&path).unwrap();
        for _ in 0..5 {
            last = fund.step(&path).unwrap();
        }
        // year 5: the initial oldest generation is now 69; everyone
        // reaches retirement (survive_to_retirement), pensioner slots decay
        let slot69 = (69 - 25) as usize;
        assert!(last.members_by_age[slot69] > 0.0 && last.members_by_age[slot69] < 1.0);
        assert_eq!(last.members_by_age[slot69 + 1], 0.0); // nobody is 70 yet
        assert_relative_eq!(last.members_by_age[0], 1.0); // fresh entrant
        // five pensioner cohorts (ages 65..69) are being paid
        assert!(last.total_pensions > 0.0);
    }

    #[test]
    fn balance_identity_holds_every_year() {
        // post-payment assets equal the post-payment value of entitlements
        // excluding the (unfunded part of the) year's accrual:
        // A_post = L_post - accrual_value + contributions
        let model = model_with(base_scheme());
        let path = constant_path(&model.params, model.scheme.horizon);
        let trace = model.run(&path).unwrap();
        for rec in trace.records.iter().skip(1) {
            let implied = rec.post_liability - rec.accrual_value + rec.total_contributions;
            let scale = rec.post_liability.max(1.0);
            assert!(
                (rec.assets_post - implied).abs() <= 1e-9 * scale,
                "year {}: assets {} vs implied {}",
                rec.year,
                rec.assets_post,
                implied
            );
        }
    }

    #[test]
    fn closed_fund_runs_off_to_zero() {
        let model = model_with(base_scheme());
        let path = constant_path(&model.params, model.scheme.horizon);
        let trace = model.run(&path).unwrap();
        assert!(trace.final_assets.abs() <= 1e-9 * trace.peak_assets);
        // after everyone has died nothing moves
        let last = trace.records.last().unwrap();
        assert_eq!(last.total_pensions, 0.0);
        assert_eq!(last.total_contributions, 0.0);
    }

    #[test]
    fn capped_year_pays_bonus() {
        // a fund handed a windfall must hit the cap with theta > 1
        let mut scheme = base_scheme();
        scheme.indexation_cap = 0.01;
        let model = model_with(scheme);
        let path = constant_path(&model.params, model.scheme.horizon);
        let mut fund = model.start();
        fund.step(&path).unwrap();
        fund.assets *= 10.0;
        let rec = fund.step(&path).unwrap();
        assert_eq!(rec.indexation.regime, IndexationRegime::CappedBonus);
        assert_relative_eq!(rec.indexation.h, 0.01);
        assert!(rec.indexation.theta > 1.0);
    }

    #[test]
    fn depleted_year_cuts() {
        let model = model_with(base_scheme());
        let path = constant_path(&model.params, model.scheme.horizon);
        let mut fund = model.start();
        for _ in 0..30 {
            fund.step(&path).unwrap();
        }
        fund.assets *= 0.05;
        let rec = fund.step(&path).unwrap();
        assert_eq!(rec.indexation.regime, IndexationRegime::FlooredCut);
        assert_relative_eq!(rec.indexation.h, -model.params.cpi, max_relative = 1e-12);
        assert!(rec.indexation.theta < 1.0 && rec.indexation.theta > 0.0);
        // balance identity still holds in the cut regime
        let implied = rec.post_liability - rec.accrual_value + rec.total_contributions;
        assert_abs_diff_eq!(rec.assets_post, implied, epsilon = 1e-9 * rec.post_liability);
    }

    #[test]
    fn empty_fund_with_assets_is_an_error() {
        let model = model_with(base_scheme());
        let path = constant_path(&model.params, model.scheme.horizon);
        let mut fund = model.start();
        fund.step(&path).unwrap();
        // silently drop all members and entitlements but keep the cash
        fund.members.iter_mut().for_each(|m| *m = 0.0);
        fund.benefits.iter_mut().for_each(|b| *b = 0.0);
        fund.next_year = 120; // past closure so no new entrant arrives
        let err = fund.step(&path).unwrap_err();
        assert!(matches!(err, EngineError::ResidualAssets { .. }), "got {err:?}");
    }

    #[test]
    fn fixed_mode_ignores_assets() {
        let mut scheme = base_scheme();
        scheme.indexation_mode = IndexationMode::Fixed(0.0);
        let model = model_with(scheme);
        let path = constant_path(&model.params, model.scheme.horizon);
        let trace = model.run(&path).unwrap();
        for rec in trace.records.iter() {
            assert_eq!(rec.indexation.regime, IndexationRegime::Fixed);
            assert_eq!(rec.indexation.h, 0.0);
            assert_eq!(rec.indexation.theta, 1.0);
        }
        // benefits grow with inflation only
        let r10 = &trace.records[10];
        assert_relative_eq!(r10.factor, 1.02, max_relative = 1e-12);
    }

    #[test]
    fn multi_employer_accrual_is_cost_neutral() {
        // pricing accrual at the solved rate makes the balance identity
        // hold including the new accrual: A_post = L_post exactly
        let mut scheme = base_scheme();
        scheme.kind = SchemeKind::MultiEmployer { initial_indexation: 0.0 };
        let table = LifeTable::bundled_pensioner();
        // a calendar strategy: mostly stocks early, mostly bonds late
        let props: Vec<f64> = (0..=196).map(|t| if t < 60 { 0.7 } else { 0.2 }).collect();
        let strategy = InvestmentStrategy::per_time(props);
        let model = FundModel::new(scheme, EconParams::baseline(), strategy, &table).unwrap();
        let path = constant_path(&model.params, model.scheme.horizon);
        let trace = model.run(&path).unwrap();
        for rec in trace.records.iter() {
            assert_relative_eq!(rec.accrual_value, rec.total_contributions, max_relative = 1e-9);
            let scale = rec.post_liability.max(1.0);
            assert!(
                (rec.assets_post - rec.post_liability).abs() <= 1e-8 * scale,
                "year {}: assets {} vs liability {}",
                rec.year,
                rec.assets_post,
                rec.post_liability
            );
        }
    }

    #[test]
    fn per_time_strategy_is_derived_from_trace() {
        let model = model_with(base_scheme());
        let path = constant_path(&model.params, model.scheme.horizon);
        let trace = model.run(&path).unwrap();
        let derived = derive_per_time_strategy(&trace);
        assert!(derived.is_per_time());
        assert_relative_eq!(derived.proportion(0, 7), trace.records[7].risky_proportion);
        // early years are liability-weighted towards young members: mostly stocks
        assert!(trace.records[5].risky_proportion > 0.9);
    }

    #[test]
    fn indexation_locks_to_target_on_the_central_path() {
        // With the cost-neutral contribution rate and every asset earning
        // its predicted return, the solve must return the target rate
        // exactly, year after year, while the scheme is open.
        let table = LifeTable::bundled_pensioner();
        let strategy = InvestmentStrategy::lifestyle(65, 85, 25, table.terminal_age());
        let params = EconParams::baseline();
        let mut scheme = base_scheme();
        scheme.contribution_rate =
            steady::cost_neutral_contribution_rate(&table, &strategy, &params, &steady::SchemeShape::from_config(&scheme))
                .unwrap();
        let model = FundModel::new(scheme, params, strategy, &table).unwrap();
        let source = ConstantModel { params, horizon: model.scheme.horizon };
        let trace = model.run(&source.path(0)).unwrap();
        for rec in trace.records.iter().take(100).skip(1) {
            assert!(
                (rec.indexation.h - model.scheme.target_indexation).abs() < 1e-9,
                "year {}: h = {}",
                rec.year,
                rec.indexation.h
            );
            assert_eq!(rec.indexation.regime, IndexationRegime::Interior);
        }
    }
}
