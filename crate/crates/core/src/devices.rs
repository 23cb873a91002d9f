//! Storage, EV, PV and demand-response models.
//!
//! State-of-charge values are percentages. Positive power charges storage.
//! Steps that would leave the allowed SOC band fail instead of clamping so
//! the strategy sees infeasibility.

use thiserror::Error;

use crate::scalar::Scalar;

/// Numerical slack, in SOC percentage points, absorbed by snapping to a bound.
const SOC_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DeviceError {
    #[error("{device}: invalid parameter {field}: {reason}")]
    InvalidParameter {
        device: &'static str,
        field: &'static str,
        reason: String,
    },
    #[error("{device}: power {power_kw} kW exceeds the {limit_kw} kW rate limit")]
    RateLimit {
        device: &'static str,
        power_kw: f64,
        limit_kw: f64,
    },
    #[error("{device}: SOC would reach {soc}% outside [{min}%, {max}%]")]
    SocBound {
        device: &'static str,
        soc: f64,
        min: f64,
        max: f64,
    },
    #[error("EV is not plugged in at interval {interval}")]
    NotAvailable { interval: usize },
    #[error("EV needs {needed_kwh} kWh before interval {deadline} but can take at most {capacity_kwh} kWh")]
    DeadlineInfeasible {
        needed_kwh: f64,
        capacity_kwh: f64,
        deadline: usize,
    },
}

fn param<T: Scalar>(device: &'static str, field: &'static str, ok: bool, v: T) -> Result<(), DeviceError> {
    if ok && v.is_finite() {
        Ok(())
    } else {
        Err(DeviceError::InvalidParameter {
            device,
            field,
            reason: format!("value {v} out of range"),
        })
    }
}

/// Applies the SOC band with snapping for round-off.
fn bounded<T: Scalar>(device: &'static str, soc: T, min: T, max: T) -> Result<T, DeviceError> {
    let eps = T::lit(SOC_EPS);
    if soc < min - eps || soc > max + eps || soc.is_nan() {
        return Err(DeviceError::SocBound {
            device,
            soc: soc.as_f64(),
            min: min.as_f64(),
            max: max.as_f64(),
        });
    }
    Ok(soc.max(min).min(max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryStorage<T> {
    pub capacity_kwh: T,
    pub soc: T,
    pub soc_min: T,
    pub soc_max: T,
    /// Minimum SOC required at the end of the horizon.
    pub end_target_min: T,
    pub max_charge_kw: T,
    pub max_discharge_kw: T,
    pub round_trip_efficiency: T,
}

impl<T: Scalar> BatteryStorage<T> {
    pub fn validate(&self) -> Result<(), DeviceError> {
        const D: &str = "battery";
        let hundred = T::hundred();
        param(D, "capacity_kwh", self.capacity_kwh > T::zero(), self.capacity_kwh)?;
        param(D, "soc_min", self.soc_min >= T::zero(), self.soc_min)?;
        param(
            D,
            "soc_max",
            self.soc_max <= hundred && self.soc_max >= self.soc_min,
            self.soc_max,
        )?;
        param(D, "soc", self.soc >= self.soc_min && self.soc <= self.soc_max, self.soc)?;
        param(
            D,
            "end_target_min",
            self.end_target_min >= self.soc_min && self.end_target_min <= self.soc_max,
            self.end_target_min,
        )?;
        param(D, "max_charge_kw", self.max_charge_kw > T::zero(), self.max_charge_kw)?;
        param(
            D,
            "max_discharge_kw",
            self.max_discharge_kw > T::zero(),
            self.max_discharge_kw,
        )?;
        param(
            D,
            "round_trip_efficiency",
            self.round_trip_efficiency > T::zero() && self.round_trip_efficiency <= T::one(),
            self.round_trip_efficiency,
        )
    }

    pub fn stored_kwh(&self) -> T {
        self.soc * self.capacity_kwh / T::hundred()
    }

    fn one_way_efficiency(&self) -> T {
        self.round_trip_efficiency.sqrt()
    }

    /// Largest discharge power (kW, positive) sustainable for `dt` hours.
    pub fn max_discharge_power(&self, dt: T) -> T {
        let above_min = (self.soc - self.soc_min).max(T::zero()) * self.capacity_kwh / T::hundred();
        (above_min * self.one_way_efficiency() / dt).min(self.max_discharge_kw)
    }

    /// Largest charge power (kW) accepted for `dt` hours.
    pub fn max_charge_power(&self, dt: T) -> T {
        let headroom = (self.soc_max - self.soc).max(T::zero()) * self.capacity_kwh / T::hundred();
        (headroom / (self.one_way_efficiency() * dt)).min(self.max_charge_kw)
    }

    /// Advances the battery by `dt` hours at `power_kw` (positive charges).
    pub fn step(&self, power_kw: T, dt: T) -> Result<Self, DeviceError> {
        let (limit, eff) = if power_kw >= T::zero() {
            (self.max_charge_kw, self.one_way_efficiency())
        } else {
            (self.max_discharge_kw, T::one() / self.one_way_efficiency())
        };
        if power_kw.abs() > limit || power_kw.is_nan() {
            return Err(DeviceError::RateLimit {
                device: "battery",
                power_kw: power_kw.as_f64(),
                limit_kw: limit.as_f64(),
            });
        }
        let soc = self.soc + T::hundred() * power_kw * dt * eff / self.capacity_kwh;
        Ok(BatteryStorage {
            soc: bounded("battery", soc, self.soc_min, self.soc_max)?,
            ..self.clone()
        })
    }
}

/// Free-function form of [`BatteryStorage::step`].
pub fn step_battery<T: Scalar>(b: &BatteryStorage<T>, power_kw: T, dt: T) -> Result<BatteryStorage<T>, DeviceError> {
    b.step(power_kw, dt)
}

/// Instantaneous SOC drop applied at the end of `interval` (driving).
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionEvent<T> {
    pub interval: usize,
    pub soc_drop: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectricVehicle<T> {
    pub capacity_kwh: T,
    pub soc: T,
    pub soc_min: T,
    pub soc_max: T,
    /// Minimum SOC required by `deadline_interval`.
    pub end_target_min: T,
    /// The target must hold at the start of this interval.
    pub deadline_interval: usize,
    /// Plugged-in flag per interval; missing entries count as unplugged.
    pub availability: Vec<bool>,
    pub max_charge_kw: T,
    pub consumption_events: Vec<ConsumptionEvent<T>>,
}

impl<T: Scalar> ElectricVehicle<T> {
    pub fn validate(&self) -> Result<(), DeviceError> {
        const D: &str = "ev";
        let hundred = T::hundred();
        param(D, "capacity_kwh", self.capacity_kwh > T::zero(), self.capacity_kwh)?;
        param(D, "soc_min", self.soc_min >= T::zero(), self.soc_min)?;
        param(
            D,
            "soc_max",
            self.soc_max <= hundred && self.soc_max >= self.soc_min,
            self.soc_max,
        )?;
        param(D, "soc", self.soc >= self.soc_min && self.soc <= self.soc_max, self.soc)?;
        param(
            D,
            "end_target_min",
            self.end_target_min >= self.soc_min && self.end_target_min <= self.soc_max,
            self.end_target_min,
        )?;
        param(D, "max_charge_kw", self.max_charge_kw > T::zero(), self.max_charge_kw)?;
        for ev in &self.consumption_events {
            param(D, "consumption_events.soc_drop", ev.soc_drop >= T::zero(), ev.soc_drop)?;
        }
        Ok(())
    }

    pub fn is_available(&self, interval: usize) -> bool {
        self.availability.get(interval).copied().unwrap_or(false)
    }

    /// Energy still needed to reach the deadline target, counting any
    /// driving before the deadline.
    pub fn energy_needed_kwh(&self) -> T {
        let drops: T = self
            .consumption_events
            .iter()
            .filter(|e| e.interval < self.deadline_interval)
            .map(|e| e.soc_drop)
            .sum();
        ((self.end_target_min - self.soc + drops) * self.capacity_kwh / T::hundred()).max(T::zero())
    }

    /// Flags scenarios where even charging flat out at every plugged-in
    /// interval before the deadline cannot reach the target.
    pub fn check_deadline_feasible(&self, dt: T) -> Result<(), DeviceError> {
        let slots = (0..self.deadline_interval).filter(|i| self.is_available(*i)).count();
        let capacity = self.max_charge_kw * dt * T::lit(slots as f64);
        let needed = self.energy_needed_kwh();
        if capacity < needed {
            return Err(DeviceError::DeadlineInfeasible {
                needed_kwh: needed.as_f64(),
                capacity_kwh: capacity.as_f64(),
                deadline: self.deadline_interval,
            });
        }
        Ok(())
    }

    /// Largest charge power (kW) accepted for `dt` hours at `interval`.
    pub fn max_charge_power(&self, interval: usize, dt: T) -> T {
        if !self.is_available(interval) {
            return T::zero();
        }
        let headroom = (self.soc_max - self.soc).max(T::zero()) * self.capacity_kwh / T::hundred();
        (headroom / dt).min(self.max_charge_kw)
    }

    /// Charges at `power_kw` through `interval`, then applies that
    /// interval's consumption events.
    pub fn step(&self, power_kw: T, dt: T, interval: usize) -> Result<Self, DeviceError> {
        if power_kw < T::zero() || power_kw > self.max_charge_kw || power_kw.is_nan() {
            return Err(DeviceError::RateLimit {
                device: "ev",
                power_kw: power_kw.as_f64(),
                limit_kw: self.max_charge_kw.as_f64(),
            });
        }
        if power_kw > T::zero() && !self.is_available(interval) {
            return Err(DeviceError::NotAvailable { interval });
        }
        let charged = self.soc + T::hundred() * power_kw * dt / self.capacity_kwh;
        let mut soc = bounded("ev", charged, self.soc_min, self.soc_max)?;
        for e in self.consumption_events.iter().filter(|e| e.interval == interval) {
            soc = bounded("ev", soc - e.soc_drop, self.soc_min, self.soc_max)?;
        }
        Ok(ElectricVehicle { soc, ..self.clone() })
    }
}

pub fn step_ev<T: Scalar>(
    ev: &ElectricVehicle<T>,
    power_kw: T,
    dt: T,
    interval: usize,
) -> Result<ElectricVehicle<T>, DeviceError> {
    ev.step(power_kw, dt, interval)
}

/// PV output from a (hour-of-day, kW per panel) lookup, linearly
/// interpolated and zero outside the table.
#[derive(Debug, Clone, PartialEq)]
pub struct PvArray<T> {
    table: Vec<(T, T)>,
    pub panel_count: u32,
}

impl<T: Scalar> PvArray<T> {
    pub fn new(mut table: Vec<(T, T)>, panel_count: u32) -> Result<Self, DeviceError> {
        for (h, kw) in &table {
            param("pv", "table.hour", h.is_finite(), *h)?;
            param("pv", "table.kw", *kw >= T::zero(), *kw)?;
        }
        table.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite hours"));
        if table.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(DeviceError::InvalidParameter {
                device: "pv",
                field: "table",
                reason: "duplicate hour entries".into(),
            });
        }
        Ok(PvArray { table, panel_count })
    }

    pub fn table(&self) -> &[(T, T)] {
        &self.table
    }

    pub fn power_at_hour(&self, hour: T) -> T {
        let per_panel = match self.table.iter().position(|(h, _)| *h >= hour) {
            None => T::zero(),
            Some(0) if self.table[0].0 > hour => T::zero(),
            Some(0) => self.table[0].1,
            Some(i) => {
                let (h0, p0) = self.table[i - 1];
                let (h1, p1) = self.table[i];
                p0 + (p1 - p0) * (hour - h0) / (h1 - h0)
            }
        };
        per_panel * T::lit(self.panel_count as f64)
    }

    /// Output at the start of `interval`.
    pub fn power(&self, interval: usize, interval_hours: T) -> T {
        self.power_at_hour(T::lit(interval as f64) * interval_hours)
    }
}

pub fn pv_power<T: Scalar>(pv: &PvArray<T>, interval: usize, interval_hours: T) -> T {
    pv.power(interval, interval_hours)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrProgram<T> {
    pub reduction_fraction: T,
    /// Share of load the prosumer keeps no matter what.
    pub floor: T,
}

impl<T: Scalar> DrProgram<T> {
    pub fn new(reduction_fraction: T, floor: T) -> Result<Self, DeviceError> {
        param("dr", "floor", floor >= T::zero() && floor <= T::one(), floor)?;
        param(
            "dr",
            "reduction_fraction",
            reduction_fraction >= T::zero() && reduction_fraction <= T::one() - floor,
            reduction_fraction,
        )?;
        Ok(DrProgram {
            reduction_fraction,
            floor,
        })
    }

    pub fn apply(&self, load_kw: T, triggered: bool) -> T {
        if triggered {
            load_kw * (T::one() - self.reduction_fraction)
        } else {
            load_kw
        }
    }
}

pub fn apply_dr<T: Scalar>(load_kw: T, dr: &DrProgram<T>, triggered: bool) -> T {
    dr.apply(load_kw, triggered)
}

/// Snapshot of everything the per-interval decision looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState<T> {
    pub battery: BatteryStorage<T>,
    pub ev: ElectricVehicle<T>,
    pub pv_kw: T,
    pub load_kw: T,
    pub dr: DrProgram<T>,
}
