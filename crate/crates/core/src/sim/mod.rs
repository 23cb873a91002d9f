//! Scenario runner: strategy passes, market settlement and reporting.
//!
//! A run replays the day twice. The baseline pass has no strategy (grid
//! only, EV charged on arrival); the strategy pass uses the optimized offer.
//! Every interval where the strategy pass exports energy posts an offer at
//! the optimized price against the utility's feed-in bid, and cleared trades
//! are endorsed and chained onto a fresh ledger, one block per interval.

mod config;
mod output;

pub use config::{
    load_scenario, parse_scenario, read_table, BatterySpec, ConsumptionSpec, DrSpec, EndorsementSpec, EvSpec,
    ForecastSpec, HorizonSpec, MarketSpec, PvSpec, ScenarioConfig, ScenarioFile, StrategySpec, TablesSpec, TaskSpec,
    SCENARIO_FILE,
};
pub use output::{write_outputs, OutputFiles};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ledger::{Ledger, PeerView, PeerViews};
use crate::market::{clear_interval, settle, MarketError, Order, Side};
use crate::strategy::{optimize, DayTrace, StrategyError, StrategyOutcome, TradeWindow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("{file} line {line}: {message}")]
    Table { file: String, line: usize, message: String },
    #[error("{field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

/// One reported interval. Power columns are kW averages over the interval;
/// money columns are dollars.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalRow {
    pub interval: usize,
    pub mcp: f64,
    /// Uniform price of this interval's market clearing, when it traded.
    pub cleared_price: Option<f64>,
    pub offer: f64,
    pub in_window: bool,
    pub dr_active: bool,
    pub action: String,
    pub load_kw: f64,
    pub served_load_kw: f64,
    pub pv_kw: f64,
    /// Signed, import positive.
    pub grid_kw: f64,
    pub baseline_grid_kw: f64,
    /// Signed, charge positive.
    pub battery_kw: f64,
    pub ev_kw: f64,
    pub battery_soc: f64,
    pub ev_soc: f64,
    pub traded_kwh: f64,
    pub cost: f64,
    pub baseline_cost: f64,
    pub revenue: f64,
    pub cum_cost: f64,
    pub cum_baseline_cost: f64,
    pub cum_revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub offer: f64,
    pub windows: String,
    pub excluded: String,
    pub battery_end_soc: f64,
    pub ev_deadline_soc: f64,
    pub converged: bool,
}

/// Columns for plotting one strategy pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotRow {
    pub interval: usize,
    pub mcp: f64,
    pub offer: f64,
    pub in_window: bool,
    pub load_kw: f64,
    pub served_load_kw: f64,
    pub pv_kw: f64,
    pub grid_kw: f64,
    pub battery_kw: f64,
    pub ev_kw: f64,
    pub battery_soc: f64,
    pub ev_soc: f64,
}

/// Quantities derived purely from the interval rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Totals {
    pub baseline_peak_kw: f64,
    pub strategy_peak_kw: f64,
    pub peak_reduction_pct: f64,
    pub total_cost: f64,
    pub baseline_cost: f64,
    pub trade_revenue: f64,
    /// Trade revenue minus the change in grid cost against the baseline.
    pub net_earnings: f64,
    pub traded_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub average_cost: f64,
    pub initial_offer: f64,
    pub newton_offer: f64,
    pub newton_converged: bool,
    pub final_offer: f64,
    pub offer_quantity_kwh: f64,
    pub battery_end_soc: f64,
    pub ev_deadline_soc: f64,
    pub trades: usize,
    pub rejected_trades: usize,
    pub blocks: usize,
    pub ledger_valid: bool,
    pub ledger_path: String,
    pub totals: Totals,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: Summary,
    pub intervals: Vec<IntervalRow>,
    pub iterations: Vec<IterationRow>,
    pub plot_initial: Vec<PlotRow>,
    pub plot_final: Vec<PlotRow>,
    pub ledger: Ledger,
    pub outcome: StrategyOutcome<f64>,
    pub baseline: DayTrace<f64>,
}

/// File name of the ledger dump next to the other outputs.
pub const LEDGER_FILE: &str = "ledger.jsonl";

fn format_windows(windows: &[TradeWindow]) -> String {
    windows
        .iter()
        .map(|w| format!("{}-{}", w.entry_interval, w.exit_interval))
        .collect::<Vec<_>>()
        .join(" ")
}

fn plot_rows(trace: &DayTrace<f64>) -> Vec<PlotRow> {
    trace
        .records
        .iter()
        .map(|r| PlotRow {
            interval: r.interval,
            mcp: r.mcp,
            offer: trace.offer,
            in_window: r.in_window,
            load_kw: r.load_kw,
            served_load_kw: r.action.served_load_kw,
            pv_kw: r.action.pv_kw,
            grid_kw: r.action.grid_kw,
            battery_kw: r.action.battery_kw(),
            ev_kw: r.action.ev_charge_kw,
            battery_soc: r.battery_soc,
            ev_soc: r.ev_soc,
        })
        .collect()
}

/// Each endorser's view of how much the prosumer can deliver: the true
/// export scaled by an independent uniform error of half-width `jitter`.
fn peer_views(config: &ScenarioConfig, rng: &mut ChaCha8Rng, available_kwh: f64) -> PeerViews {
    let jitter = config.market.view_jitter;
    config
        .policy
        .peer_ids()
        .map(|peer| {
            let scale = if jitter > 0.0 {
                1.0 + rng.gen_range(-jitter..=jitter)
            } else {
                1.0
            };
            (
                peer.to_string(),
                PeerView::from([(config.market.prosumer_id.clone(), available_kwh * scale)]),
            )
        })
        .collect()
}

/// Recomputes the summary totals from interval rows.
pub fn summarize(rows: &[IntervalRow]) -> Totals {
    let peak = |f: fn(&IntervalRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    let baseline_peak_kw = peak(|r| r.baseline_grid_kw);
    let strategy_peak_kw = peak(|r| r.grid_kw);
    let peak_reduction_pct = if baseline_peak_kw > 0.0 {
        100.0 * (baseline_peak_kw - strategy_peak_kw) / baseline_peak_kw
    } else {
        0.0
    };
    let total_cost: f64 = rows.iter().map(|r| r.cost).sum();
    let baseline_cost: f64 = rows.iter().map(|r| r.baseline_cost).sum();
    let trade_revenue: f64 = rows.iter().map(|r| r.revenue).sum();
    Totals {
        baseline_peak_kw,
        strategy_peak_kw,
        peak_reduction_pct,
        total_cost,
        baseline_cost,
        trade_revenue,
        net_earnings: trade_revenue - (total_cost - baseline_cost),
        traded_kwh: rows.iter().map(|r| r.traded_kwh).sum(),
    }
}

/// Runs one scenario end to end. Deterministic given the config, which
/// includes the seed.
pub fn run(config: &ScenarioConfig) -> Result<RunReport, SimError> {
    let model = &config.model;
    let dt = model.dt();
    let outcome = optimize(model, &config.strategy)?;
    let baseline = model.simulate_baseline()?;
    let trace = &outcome.final_trace;
    let offer = trace.offer;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ledger = Ledger::new();
    let mut trades = 0;
    let mut rejected_trades = 0;
    let mut rows = Vec::with_capacity(model.horizon());
    let (mut cum_cost, mut cum_baseline_cost, mut cum_revenue) = (0.0, 0.0, 0.0);

    for (r, b) in trace.records.iter().zip(&baseline.records) {
        let i = r.interval;
        let tick = i as u64;
        let export_kwh = r.action.export_kw() * dt;
        let mut cleared_price = None;
        let mut traded_kwh = 0.0;
        let mut revenue = 0.0;
        if export_kwh > 0.0 {
            let ask = Order::new(
                config.market.prosumer_id.clone(),
                Side::Offer,
                offer,
                export_kwh,
                i,
                tick,
            )?;
            let bid = Order::new(
                config.market.utility_id.clone(),
                Side::Bid,
                r.mcp * config.market.feed_in_ratio,
                f64::INFINITY,
                i,
                tick,
            )?;
            let clearing = clear_interval(&[bid], &[ask])?;
            if !clearing.matches.is_empty() {
                let views = peer_views(config, &mut rng, export_kwh);
                let settled = settle(&clearing, ledger, &views, &config.policy, tick)?;
                ledger = settled.ledger;
                trades += settled.accepted.len();
                rejected_trades += settled.rejected.len();
                if !settled.accepted.is_empty() {
                    cleared_price = clearing.clearing_price;
                }
                traded_kwh = settled.accepted.iter().map(|t| t.energy_kwh()).sum();
                revenue = settled.accepted.iter().map(|t| t.value()).sum();
            }
        }
        let cost = r.action.import_kw() * dt * r.mcp;
        let baseline_cost = b.action.import_kw() * dt * b.mcp;
        cum_cost += cost;
        cum_baseline_cost += baseline_cost;
        cum_revenue += revenue;
        rows.push(IntervalRow {
            interval: i,
            mcp: r.mcp,
            cleared_price,
            offer,
            in_window: r.in_window,
            dr_active: r.action.has(crate::strategy::ActionKind::DrReduce),
            action: r.action.label(),
            load_kw: r.load_kw,
            served_load_kw: r.action.served_load_kw,
            pv_kw: r.action.pv_kw,
            grid_kw: r.action.grid_kw,
            baseline_grid_kw: b.action.grid_kw,
            battery_kw: r.action.battery_kw(),
            ev_kw: r.action.ev_charge_kw,
            battery_soc: r.battery_soc,
            ev_soc: r.ev_soc,
            traded_kwh,
            cost,
            baseline_cost,
            revenue,
            cum_cost,
            cum_baseline_cost,
            cum_revenue,
        });
    }

    let iterations = outcome
        .iterations
        .iter()
        .map(|s| IterationRow {
            iteration: s.iteration,
            offer: s.offer,
            windows: format_windows(&s.windows),
            excluded: s.excluded.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "),
            battery_end_soc: s.battery_end_soc,
            ev_deadline_soc: s.ev_end_soc,
            converged: s.converged,
        })
        .collect();

    let final_state = outcome.final_state();
    let summary = Summary {
        scenario: config.name.clone(),
        seed: config.seed,
        converged: outcome.converged(),
        iterations: final_state.iteration,
        average_cost: outcome.average_cost,
        initial_offer: outcome.initial_offer,
        newton_offer: outcome.newton.x,
        newton_converged: outcome.newton.converged,
        final_offer: offer,
        offer_quantity_kwh: outcome.offer_quantity_kwh(dt),
        battery_end_soc: trace.battery_end_soc,
        ev_deadline_soc: trace.ev_deadline_soc,
        trades,
        rejected_trades,
        blocks: ledger.len(),
        ledger_valid: ledger.validate_chain(),
        ledger_path: LEDGER_FILE.to_string(),
        totals: summarize(&rows),
    };

    Ok(RunReport {
        summary,
        intervals: rows,
        iterations,
        plot_initial: plot_rows(&outcome.first_pass),
        plot_final: plot_rows(trace),
        ledger,
        baseline,
        outcome,
    })
}
