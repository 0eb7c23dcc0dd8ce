//! Declarative experiment configuration: a TOML file with named sections
//! for the run, the economic model, the scheme, mortality and the
//! investment strategy, plus per-experiment sections. Field names map
//! one-to-one onto the core library types.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cdc_core::analytics::matched_per_time_proportions;
use cdc_core::econ::EconParams;
use cdc_core::engine::{FundModel, IndexationMode, SchemeConfig, SchemeKind};
use cdc_core::steady::{direct_contribution_rate, SchemeShape};
use cdc_core::{InvestmentStrategy, LifeTable};
use serde::Deserialize;

pub const SUPPORTED_SPEC_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: u32,
    pub run: RunSection,
    pub economics: EconomicsSection,
    pub scheme: SchemeSection,
    pub mortality: MortalitySection,
    pub strategy: StrategySection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub pnl_surface: Option<PnlSurfaceSection>,
    #[serde(default)]
    pub pnl_scenarios: Option<PnlScenariosSection>,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub shock: ShockSection,
    #[serde(default)]
    pub shifted_returns: ShiftedReturnsSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Master seed; every random stream derives from it (there is no
    /// wall-clock seeding anywhere).
    pub seed: u64,
    pub scenarios: usize,
    /// Worker threads; 0 means machine width. Results do not depend on it.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicsSection {
    pub stock_growth: f64,
    pub stock_vol: f64,
    pub bond_growth: f64,
    pub wage_growth: f64,
    pub cpi: f64,
    /// "black_scholes" (default) or "constant"; the constant model is the
    /// zero-volatility limit, all other risk factors being deterministic.
    #[serde(default = "default_model")]
    pub model: String,
}

fn default_model() -> String {
    "black_scholes".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    /// "single" or "multi".
    #[serde(default = "default_kind")]
    pub kind: String,
    /// Multi-employer only: the indexation assumption priced into year-0
    /// accruals. Defaults to the target.
    pub initial_indexation: Option<f64>,
    pub join_age: u32,
    pub retirement_age: u32,
    /// Omit to solve the cost-neutral rate from the steady-state equation.
    pub contribution_rate: Option<f64>,
    pub accrual_divisor: f64,
    #[serde(default)]
    pub target_indexation: f64,
    #[serde(default = "default_cap")]
    pub indexation_cap: f64,
    #[serde(default)]
    pub nominal_floor: f64,
    /// "solve" (default) or "fixed".
    #[serde(default = "default_indexation")]
    pub indexation: String,
    /// Rate above CPI granted every year when `indexation = "fixed"`.
    #[serde(default)]
    pub fixed_rate: f64,
    pub closure_year: Option<u32>,
    /// Defaults to `closure_year + (terminal age - join age)`; required for
    /// schemes that never close.
    pub horizon: Option<u32>,
    #[serde(default = "default_true")]
    pub survive_to_retirement: bool,
}

fn default_kind() -> String {
    "single".into()
}

fn default_cap() -> f64 {
    0.05
}

fn default_indexation() -> String {
    "solve".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MortalitySection {
    /// "bundled", "gompertz", "exponential" or "file".
    pub kind: String,
    pub path: Option<PathBuf>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub theta: Option<f64>,
    pub pivot_age: Option<f64>,
    pub lambda: Option<f64>,
    pub min_age: Option<u32>,
    pub terminal_age: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    /// "lifestyle", "taper", "constant", "per_time" or "matched".
    /// "matched" runs a single-employer reference fund with the lifestyle
    /// given by start_age/end_age on the central path and imposes its
    /// aggregate stock proportion as a time-indexed strategy — the usual
    /// way to give every member of a multi-employer fund one discount
    /// curve.
    pub kind: String,
    pub start_age: Option<u32>,
    pub end_age: Option<u32>,
    pub floor: Option<f64>,
    pub proportion: Option<f64>,
    pub proportions: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Generations whose incomes are traced; defaults to the first
    /// generation with a full career.
    pub generations: Option<Vec<u32>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnlSurfaceSection {
    pub years: Vec<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnlScenariosSection {
    pub year: u32,
    #[serde(default = "default_outer")]
    pub outer: usize,
    #[serde(default = "default_inner")]
    pub inner: usize,
}

fn default_outer() -> usize {
    50
}

fn default_inner() -> usize {
    1000
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub generations: Option<Vec<u32>>,
    /// De-risking window of the benchmark schemes (defaults to the last
    /// ten working years).
    pub taper_start: Option<u32>,
    pub taper_end: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockSection {
    #[serde(default = "default_shock")]
    pub relative: f64,
}

impl Default for ShockSection {
    fn default() -> Self {
        Self { relative: default_shock() }
    }
}

fn default_shock() -> f64 {
    0.10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftedReturnsSection {
    #[serde(default = "default_shift")]
    pub shift: f64,
    pub generations: Option<Vec<u32>>,
}

impl Default for ShiftedReturnsSection {
    fn default() -> Self {
        Self { shift: default_shift(), generations: None }
    }
}

fn default_shift() -> f64 {
    0.01
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if config.spec_version != SUPPORTED_SPEC_VERSION {
            bail!(
                "config {} has spec_version {}, this build supports {SUPPORTED_SPEC_VERSION}",
                path.display(),
                config.spec_version
            );
        }
        if config.run.scenarios == 0 {
            bail!("[run] scenarios must be positive");
        }
        Ok(config)
    }

    /// Economic parameters; choosing the constant model zeroes the stock
    /// volatility (its exact equivalent).
    pub fn econ_params(&self) -> Result<EconParams> {
        let e = &self.economics;
        let stock_vol = match e.model.as_str() {
            "black_scholes" => e.stock_vol,
            "constant" => 0.0,
            other => bail!("[economics] model must be \"black_scholes\" or \"constant\", got \"{other}\""),
        };
        let params = EconParams {
            stock_growth: e.stock_growth,
            stock_vol,
            bond_growth: e.bond_growth,
            wage_growth: e.wage_growth,
            cpi: e.cpi,
        };
        params.validate().context("[economics]")?;
        Ok(params)
    }

    pub fn life_table(&self) -> Result<LifeTable> {
        let m = &self.mortality;
        let table = match m.kind.as_str() {
            "bundled" => LifeTable::bundled_pensioner(),
            "gompertz" => {
                let (Some(a), Some(b), Some(theta)) = (m.a, m.b, m.theta) else {
                    bail!("[mortality] gompertz needs a, b and theta");
                };
                LifeTable::gompertz_makeham(
                    a,
                    b,
                    theta,
                    m.pivot_age.unwrap_or(65.0),
                    m.min_age.unwrap_or(self.scheme.join_age),
                    m.terminal_age.unwrap_or(121),
                )?
            }
            "exponential" => {
                let Some(lambda) = m.lambda else {
                    bail!("[mortality] exponential needs lambda");
                };
                LifeTable::exponential(lambda, m.min_age.unwrap_or(self.scheme.join_age), m.terminal_age.unwrap_or(121))?
            }
            "file" => {
                let Some(path) = &m.path else {
                    bail!("[mortality] kind = \"file\" needs a path");
                };
                LifeTable::from_csv_path(path).with_context(|| format!("life table {}", path.display()))?
            }
            other => bail!("[mortality] kind \"{other}\" is not one of bundled/gompertz/exponential/file"),
        };
        Ok(table)
    }

    pub fn strategy(&self, table: &LifeTable) -> Result<InvestmentStrategy> {
        let s = &self.strategy;
        let min_age = self.scheme.join_age;
        let terminal = table.terminal_age();
        let strategy = match s.kind.as_str() {
            // for steady-state analysis a "matched" strategy is its
            // age-indexed reference lifestyle; only the stochastic fund
            // swaps in the derived time-indexed allocation
            "lifestyle" | "matched" => {
                let (Some(start), Some(end)) = (s.start_age, s.end_age) else {
                    bail!("[strategy] {} needs start_age and end_age", s.kind);
                };
                InvestmentStrategy::lifestyle(start, end, min_age, terminal)
            }
            "taper" => {
                let (Some(start), Some(end), Some(floor)) = (s.start_age, s.end_age, s.floor) else {
                    bail!("[strategy] taper needs start_age, end_age and floor");
                };
                InvestmentStrategy::taper(start, end, floor, min_age, terminal)
            }
            "constant" => {
                let Some(p) = s.proportion else {
                    bail!("[strategy] constant needs proportion");
                };
                InvestmentStrategy::constant(p, min_age, terminal)
            }
            "per_time" => {
                let Some(props) = s.proportions.clone() else {
                    bail!("[strategy] per_time needs proportions");
                };
                InvestmentStrategy::per_time(props)
            }
            other => bail!("[strategy] kind \"{other}\" is not one of lifestyle/taper/constant/per_time/matched"),
        };
        strategy.validate().context("[strategy]")?;
        Ok(strategy)
    }

    pub fn scheme_shape(&self) -> SchemeShape {
        SchemeShape {
            join_age: self.scheme.join_age,
            retirement_age: self.scheme.retirement_age,
            accrual_divisor: self.scheme.accrual_divisor,
            target_indexation: self.scheme.target_indexation,
            survive_to_retirement: self.scheme.survive_to_retirement,
        }
    }

    /// Assemble the scheme, solving the cost-neutral contribution rate
    /// when none is configured. Returns the scheme and the solved rate (if
    /// it was solved, for the manifest).
    pub fn scheme_config(
        &self,
        table: &LifeTable,
        strategy: &InvestmentStrategy,
        params: &EconParams,
    ) -> Result<(SchemeConfig, Option<f64>)> {
        let s = &self.scheme;
        let kind = match s.kind.as_str() {
            "single" => SchemeKind::SingleEmployer,
            "multi" => SchemeKind::MultiEmployer {
                initial_indexation: s.initial_indexation.unwrap_or(s.target_indexation),
            },
            other => bail!("[scheme] kind must be \"single\" or \"multi\", got \"{other}\""),
        };
        let indexation_mode = match s.indexation.as_str() {
            "solve" => IndexationMode::Solve,
            "fixed" => IndexationMode::Fixed(s.fixed_rate),
            other => bail!("[scheme] indexation must be \"solve\" or \"fixed\", got \"{other}\""),
        };
        let horizon = match (s.horizon, s.closure_year) {
            (Some(h), _) => h,
            (None, Some(c)) => c + (table.terminal_age() - s.join_age),
            (None, None) => bail!("[scheme] horizon is required when the scheme never closes"),
        };
        let (contribution_rate, solved) = match s.contribution_rate {
            Some(rate) => (rate, None),
            None => {
                let solution = direct_contribution_rate(table, strategy, params, &self.scheme_shape())
                    .context("solving the cost-neutral contribution rate")?;
                (solution.alpha, Some(solution.alpha))
            }
        };
        let scheme = SchemeConfig {
            kind,
            join_age: s.join_age,
            retirement_age: s.retirement_age,
            contribution_rate,
            accrual_divisor: s.accrual_divisor,
            target_indexation: s.target_indexation,
            indexation_cap: s.indexation_cap,
            nominal_floor: s.nominal_floor,
            indexation_mode,
            closure_year: s.closure_year,
            horizon,
            survive_to_retirement: s.survive_to_retirement,
        };
        Ok((scheme, solved))
    }

    /// Build everything needed to run the fund. With a "matched" strategy
    /// the contribution rate is solved on the age-indexed reference
    /// lifestyle and the fund itself runs on the time-indexed allocation
    /// observed in the reference fund's central-path run.
    pub fn fund_model(&self) -> Result<(FundModel, LifeTable, Option<f64>)> {
        let params = self.econ_params()?;
        let table = self.life_table()?;
        let reference = self.strategy(&table)?;
        let (scheme, solved) = self.scheme_config(&table, &reference, &params)?;
        let strategy = if self.strategy.kind == "matched" {
            let mut single = scheme.clone();
            single.kind = SchemeKind::SingleEmployer;
            single.indexation_mode = IndexationMode::Solve;
            let reference_model = FundModel::new(single, params.clone(), reference, &table)
                .context("assembling the reference fund for the matched strategy")?;
            InvestmentStrategy::per_time(matched_per_time_proportions(&reference_model)?)
        } else {
            reference
        };
        let model = FundModel::new(scheme, params, strategy, &table).context("assembling the fund")?;
        Ok((model, table, solved))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"
spec_version = 1

[run]
seed = 42
scenarios = 100

[economics]
stock_growth = 0.0773
stock_vol = 0.15
bond_growth = 0.0436
wage_growth = 0.0383
cpi = 0.02

[scheme]
join_age = 25
retirement_age = 65
accrual_divisor = 80.0
closure_year = 100

[mortality]
kind = "bundled"

[strategy]
kind = "lifestyle"
start_age = 65
end_age = 85
"#
        .to_string()
    }

    fn parse(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = toml::from_str(text)?;
        Ok(config)
    }

    #[test]
    fn minimal_config_builds_a_fund() {
        let config = parse(&minimal()).unwrap();
        let (model, _, solved) = config.fund_model().unwrap();
        assert_eq!(model.scheme.horizon, 100 + 121 - 25);
        let alpha = solved.expect("rate was solved");
        assert!(alpha > 0.05 && alpha < 0.08, "alpha {alpha}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = minimal().replace("[run]\nseed = 42", "[run]\nseed = 42\nfrobnicate = 1");
        let err = parse(&bad).unwrap_err().to_string();
        assert!(err.contains("frobnicate"), "diagnostic should name the field: {err}");
    }

    #[test]
    fn missing_seed_is_rejected() {
        let bad = minimal().replace("seed = 42\n", "");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn horizon_required_for_open_schemes() {
        let open = minimal().replace("closure_year = 100\n", "");
        let config = parse(&open).unwrap();
        let err = config.fund_model().unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");
    }

    #[test]
    fn constant_model_zeroes_volatility() {
        let text = minimal().replace("cpi = 0.02", "cpi = 0.02\nmodel = \"constant\"");
        let config = parse(&text).unwrap();
        assert_eq!(config.econ_params().unwrap().stock_vol, 0.0);
    }

    #[test]
    fn matched_strategy_becomes_time_indexed() {
        let text = minimal().replace("kind = \"lifestyle\"", "kind = \"matched\"");
        let config = parse(&text).unwrap();
        let (model, _, _) = config.fund_model().unwrap();
        assert!(matches!(model.strategy, InvestmentStrategy::PerTime { .. }));
        // the steady-state view still sees the age-indexed reference
        let table = config.life_table().unwrap();
        assert!(matches!(config.strategy(&table).unwrap(), InvestmentStrategy::PerAge { .. }));
    }
}
