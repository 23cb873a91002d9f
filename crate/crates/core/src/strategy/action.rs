use serde::Serialize;

use crate::devices::DeviceState;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    GridSupply,
    TradeDischarge,
    DrReduce,
    ChargeEv,
    ChargeBattery,
    Idle,
}

impl ActionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::GridSupply => "GRID_SUPPLY",
            ActionKind::TradeDischarge => "TRADE_DISCHARGE",
            ActionKind::DrReduce => "DR_REDUCE",
            ActionKind::ChargeEv => "CHARGE_EV",
            ActionKind::ChargeBattery => "CHARGE_BATTERY",
            ActionKind::Idle => "IDLE",
        }
    }
}

/// Switching decision for one interval with the resulting power flows.
///
/// `grid_kw` is signed (import positive) and closes the balance
/// `pv + grid + battery_discharge = served_load + battery_charge + ev_charge`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalAction<T> {
    pub kinds: Vec<ActionKind>,
    pub served_load_kw: T,
    pub pv_kw: T,
    pub grid_kw: T,
    pub battery_charge_kw: T,
    pub battery_discharge_kw: T,
    pub ev_charge_kw: T,
}

impl<T: Scalar> IntervalAction<T> {
    pub fn has(&self, kind: ActionKind) -> bool {
        self.kinds.contains(&kind)
    }

    /// Net battery power, positive when charging.
    pub fn battery_kw(&self) -> T {
        self.battery_charge_kw - self.battery_discharge_kw
    }

    pub fn export_kw(&self) -> T {
        (-self.grid_kw).max(T::zero())
    }

    pub fn import_kw(&self) -> T {
        self.grid_kw.max(T::zero())
    }

    /// Supply minus demand; zero up to round-off.
    pub fn balance_residual(&self) -> T {
        self.pv_kw + self.grid_kw + self.battery_discharge_kw
            - self.served_load_kw
            - self.battery_charge_kw
            - self.ev_charge_kw
    }

    pub fn label(&self) -> String {
        self.kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("+")
    }
}

/// Per-interval dispatch.
///
/// Inside a trade window with the price above the offer the load is first
/// curtailed by the DR program, then the battery discharges at the highest
/// rate its SOC floor allows; whatever the battery and PV do not cover comes
/// from the grid and anything beyond the load is exported. Otherwise the
/// grid supplies the load and surplus PV charges the battery. `ev_charge_kw`
/// is the EV schedule's power for this interval (zero outside the cheap set).
pub fn decide_interval_action<T: Scalar>(
    mcp: T,
    offer: T,
    devices: &DeviceState<T>,
    in_window: bool,
    ev_charge_kw: T,
    dt: T,
) -> IntervalAction<T> {
    let mut kinds = Vec::new();
    let trading = in_window && mcp > offer;
    let served = devices.dr.apply(devices.load_kw, trading);
    let pv = devices.pv_kw;
    let ev = ev_charge_kw.max(T::zero());

    let (charge, discharge) = if trading {
        kinds.push(ActionKind::DrReduce);
        let d = devices.battery.max_discharge_power(dt);
        if d > T::zero() {
            kinds.push(ActionKind::TradeDischarge);
        }
        (T::zero(), d)
    } else {
        let surplus = pv - served - ev;
        let c = if surplus > T::zero() {
            surplus.min(devices.battery.max_charge_power(dt))
        } else {
            T::zero()
        };
        if c > T::zero() {
            kinds.push(ActionKind::ChargeBattery);
        }
        (c, T::zero())
    };
    if ev > T::zero() {
        kinds.push(ActionKind::ChargeEv);
    }
    let grid = served + charge + ev - pv - discharge;
    if grid > T::zero() {
        kinds.push(ActionKind::GridSupply);
    }
    if kinds.is_empty() {
        kinds.push(ActionKind::Idle);
    }
    IntervalAction {
        kinds,
        served_load_kw: served,
        pv_kw: pv,
        grid_kw: grid,
        battery_charge_kw: charge,
        battery_discharge_kw: discharge,
        ev_charge_kw: ev,
    }
}
