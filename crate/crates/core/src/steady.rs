//! Steady-state analysis: the cost-neutral contribution rate (two
//! independent routes), the recursive assets/liabilities ledger, shock
//! sensitivity, and closed forms for the defined-benefit comparison.
//!
//! "Steady state" means an open scheme observed at one instant: one
//! generation at every age, salaries grown at `g` per year of seniority of
//! the *scheme* (everyone's current salary is the same `S`; past salaries
//! were lower), and indexation pinned at its target. Everything here is
//! deterministic and independent of the scenario machinery, which is what
//! makes these functions useful as oracles for the simulation engine.

use thiserror::Error;

use crate::econ::{EconParams, InvestmentStrategy};
use crate::engine::SchemeConfig;
use crate::lifetable::{LifeTable, LifeTableError};
use crate::solver::{brent, SolveError};

#[derive(Debug, Error)]
pub enum SteadyError {
    #[error("life table error: {0}")]
    Table(#[from] LifeTableError),
    #[error("infeasible configuration: {0}")]
    Infeasible(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("root finding failed: {0}")]
    Solve(#[from] SolveError),
}

/// The scheme geometry the steady-state computations need (a subset of
/// [`SchemeConfig`]; closure and horizon are irrelevant here).
#[derive(Debug, Clone, Copy)]
pub struct SchemeShape {
    pub join_age: u32,
    pub retirement_age: u32,
    pub accrual_divisor: f64,
    /// Real indexation target on top of CPI.
    pub target_indexation: f64,
    pub survive_to_retirement: bool,
}

impl SchemeShape {
    pub fn from_config(config: &SchemeConfig) -> Self {
        Self {
            join_age: config.join_age,
            retirement_age: config.retirement_age,
            accrual_divisor: config.accrual_divisor,
            target_indexation: config.target_indexation,
            survive_to_retirement: config.survive_to_retirement,
        }
    }

    fn working_years(&self) -> usize {
        (self.retirement_age - self.join_age) as usize
    }

    /// Nominal indexation at target: `(1 + h)(1 + cpi) - 1`.
    fn nominal_indexation(&self, params: &EconParams) -> f64 {
        (1.0 + self.target_indexation) * (1.0 + params.cpi) - 1.0
    }
}

/// Shared precomputation: rebased table, survival from join age,
/// strategy-implied predicted return and discount factors per age.
struct Grids {
    join: usize,
    terminal: usize,
    /// `cum[i]`: survival from join age to `join + i`; length terminal-join+1.
    cum: Vec<f64>,
    /// `q[i]`: one-year death probability at `join + i`.
    q: Vec<f64>,
    /// `rate[i]`: predicted portfolio return over age-year `join + i`.
    rate: Vec<f64>,
    /// `discount[i][l]`: value at age `join+i` of a unit at age `join+i+l`.
    discount: Vec<Vec<f64>>,
}

impl Grids {
    fn build(
        table: &LifeTable,
        strategy: &InvestmentStrategy,
        params: &EconParams,
        shape: &SchemeShape,
    ) -> Result<Self, SteadyError> {
        if strategy.is_per_time() {
            return Err(SteadyError::Domain(
                "steady-state analysis needs an age-indexed investment strategy".into(),
            ));
        }
        params.validate().map_err(|e| SteadyError::Domain(e.to_string()))?;
        if shape.retirement_age <= shape.join_age {
            return Err(SteadyError::Domain("retirement age must exceed join age".into()));
        }
        if table.terminal_age() <= shape.retirement_age {
            return Err(SteadyError::Domain("life table must extend past retirement".into()));
        }
        let table = table.rebased_for_scheme(shape.join_age, shape.retirement_age, shape.survive_to_retirement)?;
        let join = shape.join_age as usize;
        let terminal = table.terminal_age() as usize;
        let n = terminal - join;
        let mut q = Vec::with_capacity(n);
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(1.0);
        for i in 0..n {
            let qi = table.q((join + i) as u32)?;
            q.push(qi);
            cum.push(cum[i] * (1.0 - qi));
        }
        let rate: Vec<f64> =
            (0..n).map(|i| params.portfolio_return(strategy.proportion((join + i) as u32, 0))).collect();
        let mut discount = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n - i + 1);
            row.push(1.0);
            for l in 1..=(n - i) {
                row.push(row[l - 1] / (1.0 + rate[i + l - 1]));
            }
            discount.push(row);
        }
        Ok(Self { join, terminal, cum, q, rate, discount })
    }

    fn n_ages(&self) -> usize {
        self.terminal - self.join
    }
}

/// Result of the direct contribution-rate solve, with the
/// liability-weighted strategy aggregates it defines along the way.
#[derive(Debug, Clone, Copy)]
pub struct ContributionSolution {
    /// Cost-neutral contribution rate as a fraction of salary.
    pub alpha: f64,
    /// Liability-weighted stock proportion of the steady-state fund.
    pub weighted_pi: f64,
    /// Predicted return at that weighting.
    pub weighted_return: f64,
}

/// Cost-neutral contribution rate from the steady-state balance equation
/// (the direct, non-recursive route).
///
/// The equation is linear in the contribution rate: the value (per current
/// salary) of the net growth of all entitlements over one steady-state
/// year must be funded by the contributions collected from all active
/// members. Seniority-`i` accrual history enters through the factor
/// `sum over i of ((1+g)/(1+h_nominal))^i` (past accruals were bought on
/// lower salaries but have been indexed since).
pub fn direct_contribution_rate(
    table: &LifeTable,
    strategy: &InvestmentStrategy,
    params: &EconParams,
    shape: &SchemeShape,
) -> Result<ContributionSolution, SteadyError> {
    let g = Grids::build(table, strategy, params, shape)?;
    let n = g.n_ages();
    let ret = shape.retirement_age as usize - g.join;
    let working = shape.working_years();
    let hn = shape.nominal_indexation(params);
    let growth = 1.0 + params.wage_growth;

    // accumulated entitlement per (salary/divisor), by age index:
    // bhat[i] = sum over past accrual years j of (growth / (1+hn))^j
    let ratio = growth / (1.0 + hn);
    let mut bhat = Vec::with_capacity(n);
    for i in 0..n {
        let terms = working.min(i + 1);
        let mut s = 0.0;
        let mut f = 1.0;
        for _ in 0..terms {
            s += f;
            f *= ratio;
        }
        bhat.push(s);
    }

    // post-payment liability profile (for the strategy weighting):
    // value carried by the generation now aged join + i
    let mut weighted_pi_num = 0.0;
    let mut liability_total = 0.0;
    let value_factor = |i: usize| -> f64 {
        // sum over l >= 1 of (1+hn)^(i+l) * discount * survival-from-join,
        // payments from retirement only
        let mut s = 0.0;
        for l in 1..(n - i) {
            if i + l >= ret {
                s += (1.0 + hn).powi((i + l) as i32) * g.discount[i][l] * g.cum[i + l];
            }
        }
        s
    };
    for i in 0..n {
        if g.cum[i] == 0.0 {
            continue;
        }
        let v = growth.powi(-(i as i32)) * bhat[i] * value_factor(i);
        liability_total += v;
        weighted_pi_num += strategy.proportion((g.join + i) as u32, 0) * v;
    }
    if liability_total <= 0.0 {
        return Err(SteadyError::Infeasible("steady-state liability is not positive".into()));
    }
    let weighted_pi = weighted_pi_num / liability_total;
    let weighted_return = params.portfolio_return(weighted_pi);

    // Balance equation, linear in alpha. Left side: value of one year's
    // entitlement growth across the membership, per (salary/divisor).
    let mut lhs = 0.0;
    for i in 0..n {
        let ga = growth.powi(-(i as i32));
        // next year's carried entitlement, valued after one year of
        // predicted fund growth at the weighted return
        let mut s1 = 0.0;
        if i + 1 < n {
            for l in 0..(n - i - 1) {
                if i + 1 + l >= ret {
                    s1 += (1.0 + hn).powi((i + 1 + l) as i32) / (1.0 + weighted_return)
                        * g.discount[i + 1][l]
                        * g.cum[i + 1 + l];
                }
            }
        }
        s1 *= ga * bhat[i];
        // this year's carried entitlement (what last year already funded)
        let mut s2 = 0.0;
        let bprev = if i >= 1 { bhat[i - 1] } else { 0.0 };
        for l in 1..(n - i) {
            if i + l >= ret {
                s2 += (1.0 + hn).powi((i + l) as i32) * g.discount[i][l] * g.cum[i + l];
            }
        }
        s2 *= ga * bprev;
        lhs += (s1 - s2) / shape.accrual_divisor;
    }

    let contributors: f64 = (0..working).map(|i| g.cum[i]).sum();
    let alpha = lhs / contributors;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(SteadyError::Infeasible(format!("solved contribution rate {alpha} is not positive")));
    }
    Ok(ContributionSolution { alpha, weighted_pi, weighted_return })
}

/// Convenience wrapper returning only the rate.
pub fn cost_neutral_contribution_rate(
    table: &LifeTable,
    strategy: &InvestmentStrategy,
    params: &EconParams,
    shape: &SchemeShape,
) -> Result<f64, SteadyError> {
    Ok(direct_contribution_rate(table, strategy, params, shape)?.alpha)
}

/// One ledger row of the recursive steady state. Ages run from one year
/// before joining (`join_age - 1`, all zeros) to the terminal age.
#[derive(Debug, Clone, Copy)]
pub struct SteadyStateRow {
    pub age: i64,
    /// Expected members at this age (1 at and below the join age).
    pub members: f64,
    /// 1 while contributing, else 0.
    pub contributing: f64,
    /// 1 while drawing a pension, else 0.
    pub retired: f64,
    /// Entitlement bought this year (salary / divisor while contributing).
    pub accrual: f64,
    /// Carried entitlement before this year's accrual.
    pub cum_benefit_pre: f64,
    /// Carried entitlement after this year's accrual.
    pub cum_benefit: f64,
    /// Annuity factor: value per unit of carried entitlement.
    pub annuity: f64,
    /// Liability attributed to this age: annuity * cum_benefit_pre * members.
    pub liability: f64,
    /// Pension outgo at this age.
    pub outgo: f64,
    /// Contribution income at this age.
    pub income: f64,
    /// Assets backing this age: liability - outgo + income.
    pub assets: f64,
    /// Those assets after one year's predicted investment growth.
    pub assets_grown: f64,
}

/// The recursive steady-state ledger and its balance diagnostics.
#[derive(Debug, Clone)]
pub struct SteadyStateProfile {
    pub rows: Vec<SteadyStateRow>,
    pub alpha: f64,
    /// Real indexation used.
    pub h: f64,
    /// `(1+g) * total liability - total grown assets` (zero in a
    /// consistent steady state).
    pub balance_residual: f64,
}

impl SteadyStateProfile {
    pub fn total_liability(&self) -> f64 {
        self.rows.iter().map(|r| r.liability).sum()
    }
}

/// Build the steady-state ledger age by age for a given contribution rate
/// and real indexation `h`.
///
/// Recursions (salary normalised to 1 at every age *today*; younger ages'
/// past accruals deflated by wage growth and re-indexed):
///
/// ```text
///   cum_benefit_pre(a) = cum_benefit(a-1) * (1 + hn) / (1 + g)
///   annuity(omega) = 0;  annuity(a) = annuity(a+1) * p_a * (1 + hn) / (1 + r_a) + retired(a)
/// ```
pub fn recursive_steady_state(
    alpha: f64,
    h: f64,
    table: &LifeTable,
    strategy: &InvestmentStrategy,
    params: &EconParams,
    shape: &SchemeShape,
) -> Result<SteadyStateProfile, SteadyError> {
    let g = Grids::build(table, strategy, params, shape)?;
    let shape_h = SchemeShape { target_indexation: h, ..*shape };
    let hn = shape_h.nominal_indexation(params);
    let growth = 1.0 + params.wage_growth;
    let n = g.n_ages();
    let join = g.join as i64;
    // rows for ages join-1 ..= terminal
    let m = n + 2;
    let age_of = |j: usize| join - 1 + j as i64;
    let ret = shape.retirement_age as i64;

    let members = |a: i64| -> f64 {
        if a < join {
            1.0
        } else {
            g.cum[((a - join) as usize).min(n)]
        }
    };
    let p_of = |a: i64| -> f64 {
        if a < join {
            1.0
        } else if a >= join + n as i64 {
            0.0
        } else {
            1.0 - g.q[(a - join) as usize]
        }
    };
    let r_of = |a: i64| -> f64 {
        let i = (a - join).clamp(0, n as i64 - 1) as usize;
        g.rate[i]
    };

    // annuity factors, backwards from the terminal age
    let mut annuity = vec![0.0; m];
    for j in (0..m - 1).rev() {
        let a = age_of(j);
        let retired = if a >= ret { 1.0 } else { 0.0 };
        annuity[j] = annuity[j + 1] * p_of(a) * (1.0 + hn) / (1.0 + r_of(a)) + retired;
    }

    let mut rows = Vec::with_capacity(m);
    let mut cum_prev = 0.0;
    for j in 0..m {
        let a = age_of(j);
        let contributing = if a >= join && a < ret { 1.0 } else { 0.0 };
        let retired = if a >= ret { 1.0 } else { 0.0 };
        let nmem = members(a);
        let accrual = contributing / shape.accrual_divisor;
        let cum_pre = if j == 0 { 0.0 } else { cum_prev * (1.0 + hn) / growth };
        let cum = cum_pre + accrual;
        let liability = annuity[j] * cum_pre * nmem;
        let outgo = retired * cum * nmem;
        let income = alpha * contributing * nmem;
        let assets = liability - outgo + income;
        rows.push(SteadyStateRow {
            age: a,
            members: nmem,
            contributing,
            retired,
            accrual,
            cum_benefit_pre: cum_pre,
            cum_benefit: cum,
            annuity: annuity[j],
            liability,
            outgo,
            income,
            assets,
            assets_grown: assets * (1.0 + r_of(a)),
        });
        cum_prev = cum;
    }

    // balance over ages >= join (the j=0 row is the pre-entry zero row)
    let total_l: f64 = rows[1..].iter().map(|r| r.liability).sum();
    let total_grown: f64 = rows[1..].iter().map(|r| r.assets_grown).sum();
    Ok(SteadyStateProfile { rows, alpha, h, balance_residual: growth * total_l - total_grown })
}

/// Contribution rate from the recursive ledger: the rate at which one
/// year's growth of everyone's backing assets reproduces the liability
/// profile, found by root-finding the balance residual. Independent of
/// [`direct_contribution_rate`] (the two act as mutual oracles).
pub fn recursive_contribution_rate(
    table: &LifeTable,
    strategy: &InvestmentStrategy,
    params: &EconParams,
    shape: &SchemeShape,
) -> Result<f64, SteadyError> {
    let residual = |alpha: f64| -> Result<f64, SteadyError> {
        Ok(recursive_steady_state(alpha, shape.target_indexation, table, strategy, params, shape)?.balance_residual)
    };
    // the residual is linear in alpha; bracket by expansion just in case
    let mut hi = 1.0;
    let f_lo = residual(0.0)?;
    let mut f_hi = residual(hi)?;
    let mut tries = 0;
    while f_lo.signum() == f_hi.signum() {
        hi *= 2.0;
        f_hi = residual(hi)?;
        tries += 1;
        if tries > 60 {
            return Err(SteadyError::Infeasible("could not bracket the contribution rate".into()));
        }
    }
    let mut err: Option<SteadyError> = None;
    let alpha = brent(
        |a| match residual(a) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        0.0,
        hi,
        1e-15,
        1e-12,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    if alpha <= 0.0 {
        return Err(SteadyError::Infeasible(format!("solved contribution rate {alpha} is not positive")));
    }
    Ok(alpha)
}

/// Re-solve the steady state's indexation after an instantaneous change
/// in total asset value.
#[derive(Debug, Clone)]
pub struct ShockReport {
    /// Real indexation rate that re-balances the shocked fund.
    pub new_h: f64,
    /// Relative change in the liability attributed to each age
    /// (`(age, change)`, ages with no entitlement omitted).
    pub liability_changes: Vec<(i64, f64)>,
}

/// Shock the steady-state fund's assets by `shock` (e.g. `0.10` for +10%)
/// and report the indexation rate that restores balance, together with
/// each generation's liability change at that rate.
pub fn shock_sensitivity(
    profile: &SteadyStateProfile,
    table: &LifeTable,
    strategy: &InvestmentStrategy,
    params: &EconParams,
    shape: &SchemeShape,
    shock: f64,
) -> Result<ShockReport, SteadyError> {
    let g = Grids::build(table, strategy, params, shape)?;
    let n = g.n_ages();
    let join = g.join as i64;
    let ret = shape.retirement_age as i64;
    let growth = 1.0 + params.wage_growth;

    // liability profile revalued at nominal indexation hn, holding the
    // carried entitlements (cum_benefit of the previous age) fixed
    let liability_at = |hn: f64| -> (f64, Vec<f64>) {
        let m = profile.rows.len();
        let mut annuity = vec![0.0; m];
        for j in (0..m - 1).rev() {
            let a = join - 1 + j as i64;
            let p = if a < join {
                1.0
            } else if a >= join + n as i64 {
                0.0
            } else {
                1.0 - g.q[(a - join) as usize]
            };
            let r = g.rate[(a - join).clamp(0, n as i64 - 1) as usize];
            let retired = if a >= ret { 1.0 } else { 0.0 };
            annuity[j] = annuity[j + 1] * p * (1.0 + hn) / (1.0 + r) + retired;
        }
        let mut per_age = vec![0.0; m];
        let mut total = 0.0;
        for j in 1..m {
            let cum_pre = profile.rows[j - 1].cum_benefit * (1.0 + hn) / growth;
            per_age[j] = annuity[j] * cum_pre * profile.rows[j].members;
            total += per_age[j];
        }
        (total, per_age)
    };

    let hn0 = (1.0 + profile.h) * (1.0 + params.cpi) - 1.0;
    let (l0, per0) = liability_at(hn0);
    if l0 <= 0.0 {
        return Err(SteadyError::Infeasible("profile carries no liability to shock".into()));
    }
    let target = (1.0 + shock) * l0;
    let hn_of = |h: f64| (1.0 + h) * (1.0 + params.cpi) - 1.0;
    let new_h = brent(|h| liability_at(hn_of(h)).0 - target, -0.9, 1.0, 1e-14, 1e-10 * target)?;
    let (_, per1) = liability_at(hn_of(new_h));
    let liability_changes = profile
        .rows
        .iter()
        .enumerate()
        .filter(|(j, _)| per0[*j] > 0.0)
        .map(|(j, r)| (r.age, per1[j] / per0[j] - 1.0))
        .collect();
    Ok(ShockReport { new_h, liability_changes })
}

/// Instantaneous percentage profit or loss of a member with `k` years of
/// service in a career-average defined-benefit scheme with `n`-year
/// careers, constant discount rate `r` and benefit indexation `i`.
///
/// With `a = (1+r)/(1+i)`, the value of the member's yearly accrual is
/// `a^k` times the youngest member's, while everyone pays the same
/// contribution (the scheme-average cost):
///
/// ```text
///   pnl(k) = n * a^k / (1 + a + ... + a^(n-1)) - 1
/// ```
///
/// The explicit sum keeps the `r = i` limit (`pnl = 0`) exact.
pub fn db_instantaneous_pnl(k: u32, n: u32, r: f64, i: f64) -> f64 {
    assert!(k < n, "service years must be below the career length");
    let a = (1.0 + r) / (1.0 + i);
    let mut sum = 0.0;
    let mut pow = 1.0;
    let mut a_k = 1.0;
    for j in 0..n {
        if j == k {
            a_k = pow;
        }
        sum += pow;
        pow *= a;
    }
    n as f64 * a_k / sum - 1.0
}

/// Homogeneous difference quotient `(x^n - y^n) / (x - y)` computed as the
/// stable sum `Σ_{j<n} x^j y^(n-1-j)` (exact at `x = y`).
fn power_difference_quotient(x: f64, y: f64, n: u32) -> f64 {
    let mut sum = 0.0;
    let mut xp = 1.0;
    for j in 0..n {
        sum += xp * y.powi((n - 1 - j) as i32);
        xp *= x;
    }
    sum
}

/// Ratio of the pension bought by a career in the career-average
/// defined-benefit scheme to the pension the same contributions would buy
/// in a defined-contribution scheme earning `r`, with benefit indexation
/// `i` and wage growth `g` (both pensions priced at `r` at retirement).
///
/// Tends to 1 as `r -> g`; the difference quotients keep the `r = i` and
/// `i = g` limits finite.
pub fn db_to_dc_ratio(n: u32, r: f64, i: f64, g: f64) -> f64 {
    assert!(n >= 1);
    let a = (1.0 + r) / (1.0 + i);
    let numer = n as f64 * a.powi(n as i32) * (1.0 + i) * power_difference_quotient(1.0 + i, 1.0 + g, n);
    let mut sum_a = 0.0;
    let mut pow = 1.0;
    for _ in 0..n {
        sum_a += pow;
        pow *= a;
    }
    let denom = (1.0 + r) * sum_a * power_difference_quotient(1.0 + r, 1.0 + g, n);
    numer / denom
}

/// Relative sensitivity of an individual's liability to the indexation
/// level, for a member `T` years from retirement under exponential
/// mortality `λ`, continuous rates (indexation `ī + h̄`, discounting
/// `μ̄`): `(1/L) dL/dh̄ = (-1 + cT) / c` with `c = ī + h̄ - μ̄ - λ`.
///
/// Requires `c < 0` so the underlying integral converges.
pub fn liability_h_duration_exponential(
    i_bar: f64,
    h_bar: f64,
    mu_bar: f64,
    lambda: f64,
    t_to_retirement: f64,
) -> Result<f64, SteadyError> {
    let c = i_bar + h_bar - mu_bar - lambda;
    if c >= 0.0 {
        return Err(SteadyError::Domain(format!(
            "indexation less discount and mortality must be negative for the liability to converge (got {c})"
        )));
    }
    Ok((-1.0 + c * t_to_retirement) / c)
}
