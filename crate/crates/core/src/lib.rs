//! Deterministic peer-to-peer retail electricity market simulator.
//!
//! A prosumer with PV, a stationary battery and an EV optimizes a sell offer
//! against a forecast market clearing price, trades through a per-interval
//! double auction and records cleared trades on a hash-chained ledger.
//!
//! The numerical core is generic over [`scalar::Scalar`]; the aliases below
//! fix it to `f64`, which is what the scenario runner uses.

pub mod devices;
pub mod forecast;
pub mod ledger;
pub mod market;
pub mod scalar;
pub mod sim;
pub mod strategy;

pub use scalar::Scalar;

pub type Battery = devices::BatteryStorage<f64>;
pub type Ev = devices::ElectricVehicle<f64>;
pub type Pv = devices::PvArray<f64>;
pub type Dr = devices::DrProgram<f64>;
pub type Prices = forecast::PriceSeries<f64>;
pub type Loads = forecast::LoadSeries<f64>;
pub type Day = strategy::DayModel<f64>;
pub type Trace = strategy::DayTrace<f64>;
pub type Strategy = strategy::StrategyConfig<f64>;
pub type Outcome = strategy::StrategyOutcome<f64>;
pub type MarketOrder = market::Order<f64>;
pub type Clearing = market::ClearingResult<f64>;
