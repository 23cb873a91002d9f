use crate::devices::{DeviceError, ElectricVehicle};
use crate::scalar::Scalar;

/// Extra energy, in kWh, scheduled so the deadline SOC lands on or above
/// the target after floating-point accumulation.
pub const EV_TARGET_MARGIN_KWH: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EvSchedule<T> {
    /// Charge power per interval (kW).
    pub power_kw: Vec<T>,
    /// Energy the blocked-out schedule could not place before the deadline.
    pub shortfall_kwh: T,
}

impl<T: Scalar> EvSchedule<T> {
    pub fn charging_intervals(&self) -> Vec<usize> {
        self.power_kw
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > T::zero())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Fills the cheapest plugged-in intervals before the deadline at full
/// rate (the last one partially) until the target is reachable. Ties go to
/// the earlier interval. Intervals flagged in `blocked` (trade windows) are
/// skipped; energy that then cannot be placed is reported as shortfall.
///
/// Errors when the target is unreachable even with no blocked intervals.
pub fn schedule_ev_charging<T: Scalar>(
    mcp: &[T],
    ev: &ElectricVehicle<T>,
    blocked: &[bool],
    dt: T,
) -> Result<EvSchedule<T>, DeviceError> {
    ev.check_deadline_feasible(dt)?;
    let horizon = mcp.len();
    let mut power = vec![T::zero(); horizon];
    let needed = ev.energy_needed_kwh();
    if needed <= T::zero() {
        return Ok(EvSchedule {
            power_kw: power,
            shortfall_kwh: T::zero(),
        });
    }
    let headroom = (ev.soc_max - ev.soc) * ev.capacity_kwh / T::hundred();
    let margin = T::lit(EV_TARGET_MARGIN_KWH);
    let mut remaining = needed;

    let mut slots: Vec<usize> = (0..ev.deadline_interval.min(horizon))
        .filter(|&i| ev.is_available(i) && !blocked.get(i).copied().unwrap_or(false))
        .collect();
    slots.sort_by(|&a, &b| mcp[a].partial_cmp(&mcp[b]).expect("finite prices").then(a.cmp(&b)));

    let full = ev.max_charge_kw * dt;
    for i in slots {
        if remaining <= T::zero() {
            break;
        }
        if remaining >= full {
            power[i] = ev.max_charge_kw;
            remaining = remaining - full;
        } else {
            // the partial slot carries the margin, within the SOC headroom
            let energy = (remaining + margin).min(full).min(headroom.max(remaining));
            power[i] = energy / dt;
            remaining = T::zero();
        }
    }
    Ok(EvSchedule {
        power_kw: power,
        shortfall_kwh: remaining.max(T::zero()),
    })
}
