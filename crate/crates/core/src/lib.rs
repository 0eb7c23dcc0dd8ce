//! Simulation and valuation engine for collective defined contribution
//! (CDC) pension schemes with shared indexation.
//!
//! The crate is organised around a yearly fund loop ([`engine`]) driven by
//! economic scenarios ([`econ`]) and a cohort life table ([`lifetable`]).
//! On top of the loop sit steady-state solvers for the cost-neutral
//! contribution rate ([`steady`]), risk-neutral valuation of accrual-year
//! transfers ([`valuation`]), benchmark schemes for comparison
//! ([`comparators`]) and scenario post-processing ([`analytics`]).

pub mod analytics;
pub mod comparators;
pub mod econ;
pub mod engine;
pub mod lifetable;
pub mod solver;
pub mod steady;
pub mod util;
pub mod valuation;

pub use econ::{EconParams, InvestmentStrategy, Measure, ScenarioPath};
pub use engine::{
    Fund, FundModel, FundTrace, IndexationMode, IndexationRegime, SchemeConfig, SchemeKind, YearRecord,
};
pub use lifetable::LifeTable;
