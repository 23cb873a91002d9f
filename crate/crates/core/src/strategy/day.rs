use crate::devices::{BatteryStorage, DeviceState, DrProgram, ElectricVehicle};
use crate::forecast::{LoadSeries, PriceSeries};
use crate::scalar::Scalar;

use super::action::{decide_interval_action, IntervalAction};
use super::ev_schedule::schedule_ev_charging;
use super::windows::{windows_from_mask, TradeWindow};
use super::StrategyError;

/// Everything a deterministic day replay needs: forecasts, PV output per
/// interval and the devices in their start-of-day state.
#[derive(Debug, Clone, PartialEq)]
pub struct DayModel<T> {
    /// Forecast MCP, also the prosumer's grid usage cost.
    pub mcp: PriceSeries<T>,
    pub load: LoadSeries<T>,
    pub pv_kw: Vec<T>,
    pub battery: BatteryStorage<T>,
    pub ev: ElectricVehicle<T>,
    pub dr: DrProgram<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord<T> {
    pub interval: usize,
    pub mcp: T,
    pub load_kw: T,
    pub in_window: bool,
    pub action: IntervalAction<T>,
    /// SOC at the end of the interval.
    pub battery_soc: T,
    pub ev_soc: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayTrace<T> {
    pub offer: T,
    pub windows: Vec<TradeWindow>,
    pub records: Vec<IntervalRecord<T>>,
    pub battery_end_soc: T,
    /// EV SOC at the start of the deadline interval.
    pub ev_deadline_soc: T,
    pub ev_shortfall_kwh: T,
}

impl<T: Scalar> DayTrace<T> {
    pub fn max_import_kw(&self) -> T {
        self.records
            .iter()
            .map(|r| r.action.import_kw())
            .fold(T::zero(), T::max)
    }
}

impl<T: Scalar> DayModel<T> {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let n = self.mcp.len();
        if n == 0 {
            return Err(StrategyError::InvalidModel("empty horizon".into()));
        }
        if self.load.len() != n || self.pv_kw.len() != n {
            return Err(StrategyError::InvalidModel(format!(
                "horizon mismatch: mcp {n}, load {}, pv {}",
                self.load.len(),
                self.pv_kw.len()
            )));
        }
        if self.pv_kw.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(StrategyError::InvalidModel(
                "pv output must be finite and non-negative".into(),
            ));
        }
        if self.ev.deadline_interval > n {
            return Err(StrategyError::InvalidModel(format!(
                "EV deadline {} beyond horizon {n}",
                self.ev.deadline_interval
            )));
        }
        self.battery.validate()?;
        self.ev.validate()?;
        self.ev.check_deadline_feasible(self.dt())?;
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.mcp.len()
    }

    pub fn dt(&self) -> T {
        self.mcp.interval_hours()
    }

    /// Offer above every usage cost: no trade windows at or beyond it.
    pub fn offer_ceiling(&self) -> T {
        self.mcp.max() + T::lit(0.01)
    }

    /// Window mask: usage cost strictly above `offer`, minus `excluded`.
    pub fn window_mask(&self, offer: T, excluded: &[usize]) -> Vec<bool> {
        self.mcp
            .values()
            .iter()
            .enumerate()
            .map(|(i, c)| *c > offer && !excluded.contains(&i))
            .collect()
    }

    /// Replays the day at `offer` with refine-removed intervals `excluded`.
    pub fn simulate(&self, offer: T, excluded: &[usize]) -> Result<DayTrace<T>, StrategyError> {
        let mask = self.window_mask(offer, excluded);
        let dt = self.dt();
        let schedule = schedule_ev_charging(self.mcp.values(), &self.ev, &mask, dt)?;
        let mut battery = self.battery.clone();
        let mut ev = self.ev.clone();
        let mut ev_deadline_soc = if self.ev.deadline_interval == 0 {
            ev.soc
        } else {
            T::nan()
        };
        let mut records = Vec::with_capacity(self.horizon());

        for (i, &in_window) in mask.iter().enumerate() {
            let state = DeviceState {
                battery: battery.clone(),
                ev: ev.clone(),
                pv_kw: self.pv_kw[i],
                load_kw: self.load.values()[i],
                dr: self.dr.clone(),
            };
            let mcp = self.mcp.values()[i];
            let action = decide_interval_action(mcp, offer, &state, in_window, schedule.power_kw[i], dt);
            battery = battery.step(action.battery_kw(), dt)?;
            ev = ev.step(action.ev_charge_kw, dt, i)?;
            if i + 1 == self.ev.deadline_interval {
                ev_deadline_soc = ev.soc;
            }
            records.push(IntervalRecord {
                interval: i,
                mcp,
                load_kw: state.load_kw,
                in_window,
                action,
                battery_soc: battery.soc,
                ev_soc: ev.soc,
            });
        }
        Ok(DayTrace {
            offer,
            windows: windows_from_mask(&mask),
            records,
            battery_end_soc: battery.soc,
            ev_deadline_soc,
            ev_shortfall_kwh: schedule.shortfall_kwh,
        })
    }

    /// Grid-only reference day: no windows, no DR, battery idle, EV charged
    /// flat out from the first plugged-in interval until the target.
    pub fn simulate_baseline(&self) -> Result<DayTrace<T>, StrategyError> {
        let dt = self.dt();
        let mut ev = self.ev.clone();
        let mut needed = ev.energy_needed_kwh();
        let mut ev_deadline_soc = if self.ev.deadline_interval == 0 {
            ev.soc
        } else {
            T::nan()
        };
        let mut records = Vec::with_capacity(self.horizon());
        for i in 0..self.horizon() {
            let mut ev_kw = T::zero();
            if i < self.ev.deadline_interval && ev.is_available(i) && needed > T::zero() {
                let full = ev.max_charge_kw * dt;
                let e = if needed >= full {
                    full
                } else {
                    (needed + T::lit(super::EV_TARGET_MARGIN_KWH)).min(full)
                };
                ev_kw = e / dt;
                needed = needed - e;
            }
            let load = self.load.values()[i];
            let pv = self.pv_kw[i];
            let mut kinds = Vec::new();
            if ev_kw > T::zero() {
                kinds.push(super::ActionKind::ChargeEv);
            }
            let grid = load + ev_kw - pv;
            if grid > T::zero() {
                kinds.push(super::ActionKind::GridSupply);
            }
            if kinds.is_empty() {
                kinds.push(super::ActionKind::Idle);
            }
            ev = ev.step(ev_kw, dt, i)?;
            if i + 1 == self.ev.deadline_interval {
                ev_deadline_soc = ev.soc;
            }
            records.push(IntervalRecord {
                interval: i,
                mcp: self.mcp.values()[i],
                load_kw: load,
                in_window: false,
                action: IntervalAction {
                    kinds,
                    served_load_kw: load,
                    pv_kw: pv,
                    grid_kw: grid,
                    battery_charge_kw: T::zero(),
                    battery_discharge_kw: T::zero(),
                    ev_charge_kw: ev_kw,
                },
                battery_soc: self.battery.soc,
                ev_soc: ev.soc,
            });
        }
        Ok(DayTrace {
            offer: T::infinity(),
            windows: Vec::new(),
            records,
            battery_end_soc: self.battery.soc,
            ev_deadline_soc,
            ev_shortfall_kwh: needed.max(T::zero()),
        })
    }

    /// SOC errors at `offer`: battery end-of-horizon SOC minus its end
    /// target, and EV SOC at the deadline minus its target.
    pub fn soc_end_error(&self, offer: T, excluded: &[usize]) -> Result<(T, T), StrategyError> {
        let trace = self.simulate(offer, excluded)?;
        Ok((
            trace.battery_end_soc - self.battery.end_target_min,
            trace.ev_deadline_soc - self.ev.end_target_min,
        ))
    }
}
