//! Day-ahead price and load estimates.
//!
//! The shipped [`HistoricalMean`] forecaster averages cleared prices already
//! recorded on the ledger per market interval and falls back to a lookup
//! table where there is no history. Loads are a base profile with the
//! prosumer's scheduled tasks superimposed.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ledger::Ledger;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("{what}: value {value} at interval {index} must be finite and non-negative")]
    InvalidValue {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("interval length must be positive")]
    InvalidInterval,
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("task over intervals {start}..={end} falls outside horizon of {horizon}")]
    TaskOutOfHorizon { start: usize, end: usize, horizon: usize },
    #[error("total energy is zero")]
    ZeroEnergy,
}

fn check_values<T: Scalar>(what: &'static str, values: &[T], interval_hours: T) -> Result<(), ForecastError> {
    if !(interval_hours.is_finite() && interval_hours > T::zero()) {
        return Err(ForecastError::InvalidInterval);
    }
    match values.iter().position(|v| !v.is_finite() || *v < T::zero()) {
        Some(index) => Err(ForecastError::InvalidValue {
            what,
            index,
            value: values[index].as_f64(),
        }),
        None => Ok(()),
    }
}

/// Per-interval market clearing price in $/kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<T> {
    values: Vec<T>,
    interval_hours: T,
}

impl<T: Scalar> PriceSeries<T> {
    pub fn new(values: Vec<T>, interval_hours: T) -> Result<Self, ForecastError> {
        check_values("price", &values, interval_hours)?;
        Ok(PriceSeries { values, interval_hours })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn interval_hours(&self) -> T {
        self.interval_hours
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }
}

/// Per-interval household load in kW.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries<T> {
    values: Vec<T>,
    interval_hours: T,
}

impl<T: Scalar> LoadSeries<T> {
    pub fn new(values: Vec<T>, interval_hours: T) -> Result<Self, ForecastError> {
        check_values("load", &values, interval_hours)?;
        Ok(LoadSeries { values, interval_hours })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn interval_hours(&self) -> T {
        self.interval_hours
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A flexible task the prosumer queues for the day: extra `kw` over the
/// inclusive interval range `start..=end`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledTask<T> {
    pub start: usize,
    pub end: usize,
    pub kw: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserDayAheadInputs<T> {
    pub scheduled_tasks: Vec<ScheduledTask<T>>,
    pub ev_departure_interval: usize,
    /// Fraction of load the prosumer will not curtail below.
    pub dr_floor: T,
}

impl<T: Scalar> Default for UserDayAheadInputs<T> {
    fn default() -> Self {
        UserDayAheadInputs {
            scheduled_tasks: Vec::new(),
            ev_departure_interval: 0,
            dr_floor: T::zero(),
        }
    }
}

/// Source of the Step-1 estimates. Implementations must be deterministic.
pub trait Forecaster<T: Scalar> {
    fn estimate_mcp(&self, history: &Ledger, fallback: &PriceSeries<T>) -> PriceSeries<T>;

    fn estimate_load(
        &self,
        base: &LoadSeries<T>,
        inputs: &UserDayAheadInputs<T>,
    ) -> Result<LoadSeries<T>, ForecastError>;
}

/// Ledger-history mean with lookup-table fallback.
#[derive(Debug, Clone, Copy, Default)]
pub struct HistoricalMean;

impl<T: Scalar> Forecaster<T> for HistoricalMean {
    fn estimate_mcp(&self, history: &Ledger, fallback: &PriceSeries<T>) -> PriceSeries<T> {
        estimate_mcp(history, fallback)
    }

    fn estimate_load(
        &self,
        base: &LoadSeries<T>,
        inputs: &UserDayAheadInputs<T>,
    ) -> Result<LoadSeries<T>, ForecastError> {
        estimate_load(base, inputs)
    }
}

/// Mean recorded trade price per interval of the day. Transactions from
/// earlier days map onto `interval_index % horizon`.
pub fn estimate_mcp<T: Scalar>(history: &Ledger, fallback: &PriceSeries<T>) -> PriceSeries<T> {
    let horizon = fallback.len();
    if horizon == 0 {
        return fallback.clone();
    }
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for tx in history.transactions() {
        let slot = (tx.interval_index % horizon as u64) as usize;
        let e = sums.entry(slot).or_insert((0.0, 0));
        e.0 += tx.price_per_kwh();
        e.1 += 1;
    }
    let values = fallback
        .values()
        .iter()
        .enumerate()
        .map(|(i, fb)| match sums.get(&i) {
            Some((sum, n)) => T::lit(sum / *n as f64),
            None => *fb,
        })
        .collect();
    PriceSeries {
        values,
        interval_hours: fallback.interval_hours,
    }
}

pub fn estimate_load<T: Scalar>(
    base: &LoadSeries<T>,
    inputs: &UserDayAheadInputs<T>,
) -> Result<LoadSeries<T>, ForecastError> {
    let horizon = base.len();
    let mut values = base.values.clone();
    for task in &inputs.scheduled_tasks {
        if task.start > task.end || task.end >= horizon {
            return Err(ForecastError::TaskOutOfHorizon {
                start: task.start,
                end: task.end,
                horizon,
            });
        }
        for v in &mut values[task.start..=task.end] {
            *v = *v + task.kw;
        }
    }
    LoadSeries::new(values, base.interval_hours)
}

/// Energy-weighted mean price: Σ load·price·dt / Σ load·dt.
pub fn average_consumption_cost<T: Scalar>(load: &LoadSeries<T>, mcp: &PriceSeries<T>) -> Result<T, ForecastError> {
    if load.len() != mcp.len() {
        return Err(ForecastError::LengthMismatch {
            left: load.len(),
            right: mcp.len(),
        });
    }
    let dt = load.interval_hours;
    let (cost, energy) = load
        .values
        .iter()
        .zip(&mcp.values)
        .fold((T::zero(), T::zero()), |(c, e), (l, p)| (c + *l * *p * dt, e + *l * dt));
    if energy <= T::zero() {
        return Err(ForecastError::ZeroEnergy);
    }
    Ok(cost / energy)
}
