//! Scenario files: one TOML document plus CSV lookup tables referenced by
//! relative path.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::devices::{BatteryStorage, ConsumptionEvent, DrProgram, ElectricVehicle, PvArray};
use crate::forecast::{estimate_load, estimate_mcp, LoadSeries, PriceSeries, ScheduledTask, UserDayAheadInputs};
use crate::ledger::{EndorsementPolicy, Ledger};
use crate::strategy::{DayModel, StrategyConfig};

use super::SimError;

/// Name of the scenario document inside a scenario directory.
pub const SCENARIO_FILE: &str = "scenario.toml";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    pub intervals: usize,
    pub interval_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablesSpec {
    /// `hour,kw` per panel, linearly interpolated.
    pub solar: PathBuf,
    /// `interval,kw` base household load.
    pub load: PathBuf,
    /// `interval,price` fallback MCP in $/kWh.
    pub mcp: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    pub capacity_kwh: f64,
    pub initial_soc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub end_target_min: f64,
    pub max_charge_kw: f64,
    pub max_discharge_kw: f64,
    #[serde(default = "one")]
    pub round_trip_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumptionSpec {
    pub interval: usize,
    pub soc_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvSpec {
    pub capacity_kwh: f64,
    pub initial_soc: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub end_target_min: f64,
    pub deadline_interval: usize,
    pub max_charge_kw: f64,
    /// Inclusive `[first, last]` plugged-in interval ranges.
    pub available: Vec<[usize; 2]>,
    #[serde(default)]
    pub consumption: Vec<ConsumptionSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSpec {
    pub panel_count: u32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrSpec {
    pub reduction: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub delta: f64,
    pub slack: f64,
    pub tol: f64,
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub prosumer_id: String,
    pub utility_id: String,
    /// Utility buy price as a fraction of the interval's MCP.
    #[serde(default = "one")]
    pub feed_in_ratio: f64,
    /// Half-width of the uniform relative error in each endorser's view of
    /// seller availability.
    #[serde(default)]
    pub view_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndorsementSpec {
    pub peers: Vec<String>,
    pub quorum: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub start: usize,
    pub end: usize,
    pub kw: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSpec {
    /// Ledger dump of earlier trades; its mean prices override the MCP table.
    pub history: Option<PathBuf>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

fn one() -> f64 {
    1.0
}

/// The scenario document as written.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub seed: u64,
    pub horizon: HorizonSpec,
    pub tables: TablesSpec,
    pub battery: BatterySpec,
    pub ev: EvSpec,
    pub pv: PvSpec,
    pub dr: DrSpec,
    pub strategy: StrategySpec,
    pub market: MarketSpec,
    pub endorsement: EndorsementSpec,
    #[serde(default)]
    pub forecast: ForecastSpec,
}

/// A validated scenario with its tables resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub interval_seconds: u64,
    pub model: DayModel<f64>,
    /// Forecast inputs before history and tasks were applied.
    pub mcp_table: PriceSeries<f64>,
    pub load_table: LoadSeries<f64>,
    pub pv: PvArray<f64>,
    pub strategy: StrategyConfig<f64>,
    pub policy: EndorsementPolicy,
    pub market: MarketSpec,
    pub history: Ledger,
}

impl ScenarioConfig {
    pub fn horizon(&self) -> usize {
        self.model.horizon()
    }

    pub fn interval_hours(&self) -> f64 {
        self.model.dt()
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> SimError {
    SimError::InvalidField {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Reads a two-column CSV with the given header.
pub fn read_table(path: &Path, header: [&str; 2]) -> Result<Vec<(f64, f64)>, SimError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| SimError::Table {
            file: file.clone(),
            line: 0,
            message: e.to_string(),
        })?;
    let found = reader.headers().map_err(|e| SimError::Table {
        file: file.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    if found.len() != 2 || found.get(0) != Some(header[0]) || found.get(1) != Some(header[1]) {
        return Err(SimError::Table {
            file,
            line: 1,
            message: format!("expected header `{},{}`", header[0], header[1]),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| SimError::Table {
            file: file.clone(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cell = |k: usize| -> Result<f64, SimError> {
            let raw = record.get(k).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| SimError::Table {
                    file: file.clone(),
                    line,
                    message: format!("{}: `{raw}` is not a finite number", header[k]),
                })
        };
        rows.push((cell(0)?, cell(1)?));
    }
    Ok(rows)
}

/// Turns `interval,value` rows into a dense series covering `0..horizon`.
fn interval_series(rows: &[(f64, f64)], horizon: usize, field: &str) -> Result<Vec<f64>, SimError> {
    if rows.len() != horizon {
        return Err(invalid(
            field,
            format!("{} rows for a horizon of {horizon} intervals", rows.len()),
        ));
    }
    let mut out = vec![f64::NAN; horizon];
    for (idx, v) in rows {
        let i = *idx as usize;
        if idx.fract() != 0.0 || *idx < 0.0 || i >= horizon {
            return Err(invalid(field, format!("interval {idx} outside 0..{horizon}")));
        }
        if !out[i].is_nan() {
            return Err(invalid(field, format!("interval {i} listed twice")));
        }
        out[i] = *v;
    }
    Ok(out)
}

/// Parses a scenario document; `base` resolves relative table paths.
pub fn parse_scenario(text: &str, base: &Path) -> Result<ScenarioConfig, SimError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    build(file, base)
}

/// Loads `path`, which is either a scenario directory or a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, SimError> {
    let file = if path.is_dir() {
        path.join(SCENARIO_FILE)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|e| SimError::Io {
        path: file.display().to_string(),
        message: e.to_string(),
    })?;
    let base = file.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base)
}

fn build(f: ScenarioFile, base: &Path) -> Result<ScenarioConfig, SimError> {
    let n = f.horizon.intervals;
    if n == 0 {
        return Err(invalid("horizon.intervals", "must be at least 1"));
    }
    if f.horizon.interval_seconds == 0 {
        return Err(invalid("horizon.interval_seconds", "must be positive"));
    }
    let dt = f.horizon.interval_seconds as f64 / 3600.0;

    let solar_rows = read_table(&base.join(&f.tables.solar), ["hour", "kw"])?;
    let load_rows = read_table(&base.join(&f.tables.load), ["interval", "kw"])?;
    let mcp_rows = read_table(&base.join(&f.tables.mcp), ["interval", "price"])?;

    let pv = PvArray::new(solar_rows, f.pv.panel_count).map_err(|e| invalid("tables.solar", e.to_string()))?;
    let load_table = LoadSeries::new(interval_series(&load_rows, n, "tables.load")?, dt)
        .map_err(|e| invalid("tables.load", e.to_string()))?;
    let mcp_table = PriceSeries::new(interval_series(&mcp_rows, n, "tables.mcp")?, dt)
        .map_err(|e| invalid("tables.mcp", e.to_string()))?;

    let history = match &f.forecast.history {
        None => Ledger::new(),
        Some(p) => {
            let path = base.join(p);
            let reader = fs::File::open(&path).map_err(|e| SimError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let ledger = Ledger::read_jsonl(std::io::BufReader::new(reader))
                .map_err(|e| invalid("forecast.history", e.to_string()))?;
            if !ledger.validate_chain() {
                return Err(invalid("forecast.history", "ledger dump fails chain validation"));
            }
            ledger
        }
    };

    let b = &f.battery;
    let battery = BatteryStorage {
        capacity_kwh: b.capacity_kwh,
        soc: b.initial_soc,
        soc_min: b.soc_min,
        soc_max: b.soc_max,
        end_target_min: b.end_target_min,
        max_charge_kw: b.max_charge_kw,
        max_discharge_kw: b.max_discharge_kw,
        round_trip_efficiency: b.round_trip_efficiency,
    };
    battery.validate().map_err(|e| invalid("battery", e.to_string()))?;

    let e = &f.ev;
    let mut availability = vec![false; n];
    for [first, last] in &e.available {
        if first > last || *last >= n {
            return Err(invalid(
                "ev.available",
                format!("range [{first}, {last}] outside 0..{n}"),
            ));
        }
        availability[*first..=*last].iter_mut().for_each(|a| *a = true);
    }
    if e.consumption.iter().any(|c| c.interval >= n) {
        return Err(invalid("ev.consumption", format!("interval outside 0..{n}")));
    }
    let ev = ElectricVehicle {
        capacity_kwh: e.capacity_kwh,
        soc: e.initial_soc,
        soc_min: e.soc_min,
        soc_max: e.soc_max,
        end_target_min: e.end_target_min,
        deadline_interval: e.deadline_interval,
        availability,
        max_charge_kw: e.max_charge_kw,
        consumption_events: e
            .consumption
            .iter()
            .map(|c| ConsumptionEvent {
                interval: c.interval,
                soc_drop: c.soc_drop,
            })
            .collect(),
    };
    ev.validate().map_err(|err| invalid("ev", err.to_string()))?;
    if e.deadline_interval > n {
        return Err(invalid(
            "ev.deadline_interval",
            format!("{} beyond horizon {n}", e.deadline_interval),
        ));
    }

    let dr = DrProgram::new(f.dr.reduction, f.dr.floor).map_err(|err| invalid("dr", err.to_string()))?;

    let s = &f.strategy;
    for (field, v) in [
        ("strategy.delta", s.delta),
        ("strategy.slack", s.slack),
        ("strategy.tol", s.tol),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(field, format!("{v} must be positive")));
        }
    }
    if s.delta >= 1.0 {
        return Err(invalid("strategy.delta", "must be below 1"));
    }
    let strategy = StrategyConfig {
        delta: s.delta,
        slack: s.slack,
        tol: s.tol,
        max_iterations: s.max_iterations,
    };

    let m = &f.market;
    if m.prosumer_id.is_empty() || m.utility_id.is_empty() || m.prosumer_id == m.utility_id {
        return Err(invalid(
            "market",
            "prosumer_id and utility_id must be distinct and non-empty",
        ));
    }
    if !(m.feed_in_ratio.is_finite() && (0.0..=1.0).contains(&m.feed_in_ratio)) {
        return Err(invalid("market.feed_in_ratio", "must lie in [0, 1]"));
    }
    if !(m.view_jitter.is_finite() && (0.0..1.0).contains(&m.view_jitter)) {
        return Err(invalid("market.view_jitter", "must lie in [0, 1)"));
    }
    let policy = EndorsementPolicy::new(f.endorsement.peers.iter().cloned(), f.endorsement.quorum)
        .map_err(|err| invalid("endorsement", err.to_string()))?;

    let inputs = UserDayAheadInputs {
        scheduled_tasks: f
            .forecast
            .tasks
            .iter()
            .map(|t| ScheduledTask {
                start: t.start,
                end: t.end,
                kw: t.kw,
            })
            .collect(),
        ev_departure_interval: e.deadline_interval,
        dr_floor: f.dr.floor,
    };
    let load = estimate_load(&load_table, &inputs).map_err(|err| invalid("forecast.tasks", err.to_string()))?;
    let mcp = estimate_mcp(&history, &mcp_table);
    let pv_kw = (0..n).map(|i| pv.power(i, dt)).collect();

    let model = DayModel {
        mcp,
        load,
        pv_kw,
        battery,
        ev,
        dr,
    };
    model.validate().map_err(|err| invalid("scenario", err.to_string()))?;

    Ok(ScenarioConfig {
        name: f.name,
        seed: f.seed,
        interval_seconds: f.horizon.interval_seconds,
        model,
        mcp_table,
        load_table,
        pv,
        strategy,
        policy,
        market: f.market,
        history,
    })
}
