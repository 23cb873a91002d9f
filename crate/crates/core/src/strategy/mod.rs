//! The prosumer trading algorithm.
//!
//! A first-pass offer is the energy-weighted average forecast cost. Trade
//! windows are the intervals whose usage cost is strictly above the offer;
//! inside them the load is curtailed and served from PV and the battery.
//! A Newton solve moves the offer until the battery ends the day at its
//! target SOC, then an outer loop lowers the offer while the battery ends
//! above the target band and removes window intervals while the EV misses
//! its deadline target.

mod action;
mod day;
mod ev_schedule;
mod newton;
mod windows;

pub use action::{decide_interval_action, ActionKind, IntervalAction};
pub use day::{DayModel, DayTrace, IntervalRecord};
pub use ev_schedule::{schedule_ev_charging, EvSchedule, EV_TARGET_MARGIN_KWH};
pub use newton::{fd_step, newton_raphson, NewtonConfig, NewtonOutcome, StepKind};
pub use windows::{find_trade_windows, mask_from_windows, total_window_intervals, windows_from_mask, TradeWindow};

use thiserror::Error;

use crate::devices::DeviceError;
use crate::forecast::{average_consumption_cost, ForecastError};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error("invalid day model: {0}")]
    InvalidModel(String),
}

/// Price and quantity the prosumer commits to for an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidOffer<T> {
    pub price_per_kwh: T,
    pub quantity_kwh: T,
    pub interval_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyConfig<T> {
    /// Fractional offer cut per refine step while the battery is under-used.
    pub delta: T,
    /// Width of the accepted band above the battery end target (SOC points).
    pub slack: T,
    /// Newton tolerance on the battery residual (SOC points).
    pub tol: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for StrategyConfig<T> {
    fn default() -> Self {
        StrategyConfig {
            delta: T::lit(0.05),
            slack: T::lit(2.0),
            tol: T::lit(0.5),
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationState<T> {
    pub iteration: usize,
    pub offer: T,
    pub windows: Vec<TradeWindow>,
    /// Intervals removed from the windows to free EV charging time.
    pub excluded: Vec<usize>,
    pub battery_end_soc: T,
    pub ev_end_soc: T,
    pub converged: bool,
    /// Highest offer seen that left the battery below its target.
    pub offer_floor: Option<T>,
    /// Lowest offer seen that left the battery above the band.
    pub offer_ceiling: Option<T>,
}

/// The first-pass offer is the average estimated consumption cost.
pub fn initial_offer<T: Scalar>(avg_cost: T) -> T {
    avg_cost
}

fn is_converged<T: Scalar>(model: &DayModel<T>, cfg: &StrategyConfig<T>, battery_end: T, ev_end: T) -> bool {
    let target = model.battery.end_target_min;
    battery_end >= target && battery_end <= target + cfg.slack && ev_end >= model.ev.end_target_min
}

/// Replays the day and packages the result as an iteration state.
pub fn evaluate<T: Scalar>(
    model: &DayModel<T>,
    cfg: &StrategyConfig<T>,
    offer: T,
    excluded: Vec<usize>,
    iteration: usize,
) -> Result<IterationState<T>, StrategyError> {
    let trace = model.simulate(offer, &excluded)?;
    Ok(IterationState {
        iteration,
        offer,
        windows: trace.windows,
        excluded,
        battery_end_soc: trace.battery_end_soc,
        ev_end_soc: trace.ev_deadline_soc,
        converged: is_converged(model, cfg, trace.battery_end_soc, trace.ev_deadline_soc),
        offer_floor: None,
        offer_ceiling: None,
    })
}

/// Solves battery end SOC error = 0 for the offer.
pub fn newton_raphson_offer<T: Scalar>(
    model: &DayModel<T>,
    initial: T,
    cfg: &NewtonConfig<T>,
    excluded: &[usize],
) -> Result<NewtonOutcome<T>, StrategyError> {
    newton_raphson(
        |offer| model.soc_end_error(offer, excluded).map(|(e_bs, _)| e_bs),
        initial,
        cfg,
    )
}

/// One outer iteration.
///
/// Battery above the band: cut the offer by `delta`, never below a
/// previously seen too-low offer (bisect toward it instead). Battery below
/// target: raise the offer halfway to the lowest too-high offer, or by
/// `delta` when none is known. EV short at the deadline: drop the cheapest
/// window intervals where the EV could charge until their charging
/// capacity covers the deficit.
pub fn refine<T: Scalar>(
    state: &IterationState<T>,
    model: &DayModel<T>,
    cfg: &StrategyConfig<T>,
) -> Result<IterationState<T>, StrategyError> {
    if state.converged || state.iteration >= cfg.max_iterations {
        return Ok(state.clone());
    }
    let target = model.battery.end_target_min;
    let mut offer = state.offer;
    let mut floor = state.offer_floor;
    let mut ceiling = state.offer_ceiling;

    if state.battery_end_soc > target + cfg.slack {
        ceiling = Some(ceiling.map_or(offer, |c| c.min(offer)));
        let mut next = offer * (T::one() - cfg.delta);
        if let Some(f) = floor {
            if next <= f {
                next = (f + offer) * T::half();
            }
        }
        offer = next;
    } else if state.battery_end_soc < target {
        floor = Some(floor.map_or(offer, |f| f.max(offer)));
        offer = match ceiling {
            Some(c) => (offer + c) * T::half(),
            None if offer > T::zero() => offer / (T::one() - cfg.delta),
            None => cfg.delta * model.offer_ceiling(),
        };
    }

    let mut excluded = state.excluded.clone();
    let ev = &model.ev;
    if state.ev_end_soc < ev.end_target_min {
        let deficit = (ev.end_target_min - state.ev_end_soc) * ev.capacity_kwh / T::hundred();
        let mask = mask_from_windows(&state.windows, model.horizon());
        let mut candidates: Vec<usize> = (0..ev.deadline_interval.min(model.horizon()))
            .filter(|&i| mask[i] && ev.is_available(i))
            .collect();
        let mcp = model.mcp.values();
        candidates.sort_by(|&a, &b| mcp[a].partial_cmp(&mcp[b]).expect("finite prices").then(a.cmp(&b)));
        let per_slot = ev.max_charge_kw * model.dt();
        let mut freed = T::zero();
        for i in candidates {
            if freed >= deficit {
                break;
            }
            excluded.push(i);
            freed = freed + per_slot;
        }
        excluded.sort_unstable();
        excluded.dedup();
    }

    let mut next = evaluate(model, cfg, offer, excluded, state.iteration + 1)?;
    next.offer_floor = floor;
    next.offer_ceiling = ceiling;
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome<T> {
    pub average_cost: T,
    pub initial_offer: T,
    /// Day replay at the first-pass offer.
    pub first_pass: DayTrace<T>,
    pub newton: NewtonOutcome<T>,
    /// Iteration 0 is the Newton offer; each later entry is one refine step.
    pub iterations: Vec<IterationState<T>>,
    pub final_trace: DayTrace<T>,
}

impl<T: Scalar> StrategyOutcome<T> {
    pub fn final_state(&self) -> &IterationState<T> {
        self.iterations.last().expect("at least one iteration")
    }

    pub fn converged(&self) -> bool {
        self.final_state().converged
    }

    /// Offer quantity: energy the battery discharges across the final windows.
    pub fn offer_quantity_kwh(&self, dt: T) -> T {
        self.final_trace
            .records
            .iter()
            .filter(|r| r.in_window)
            .map(|r| r.action.battery_discharge_kw * dt)
            .sum()
    }
}

/// Runs the whole strategy: first-pass offer, Newton solve, refine loop.
pub fn optimize<T: Scalar>(model: &DayModel<T>, cfg: &StrategyConfig<T>) -> Result<StrategyOutcome<T>, StrategyError> {
    model.validate()?;
    let average_cost = average_consumption_cost(&model.load, &model.mcp)?;
    let initial = initial_offer(average_cost);
    let first_pass = model.simulate(initial, &[])?;
    let newton_cfg = NewtonConfig {
        tol: cfg.tol,
        max_iter: cfg.max_iterations,
        lower: T::zero(),
        upper: model.offer_ceiling(),
    };
    let newton = newton_raphson_offer(model, initial, &newton_cfg, &[])?;
    let mut state = evaluate(model, cfg, newton.x, Vec::new(), 0)?;
    let mut iterations = vec![state.clone()];
    while !state.converged && state.iteration < cfg.max_iterations {
        state = refine(&state, model, cfg)?;
        iterations.push(state.clone());
    }
    let final_trace = model.simulate(state.offer, &state.excluded)?;
    Ok(StrategyOutcome {
        average_cost,
        initial_offer: initial,
        first_pass,
        newton,
        iterations,
        final_trace,
    })
}
