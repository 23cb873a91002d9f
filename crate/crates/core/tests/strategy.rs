mod common;

use common::{ref_replay_table1, table1, LOAD, MCP};
use peerledger::devices::{BatteryStorage, DrProgram, ElectricVehicle};
use peerledger::forecast::{LoadSeries, PriceSeries};
use peerledger::strategy::{
    evaluate, find_trade_windows, newton_raphson_offer, optimize, refine, total_window_intervals, DayModel,
    NewtonConfig, StrategyConfig,
};
use proptest::prelude::*;

fn battery(soc: f64) -> BatteryStorage<f64> {
    BatteryStorage {
        capacity_kwh: 250.0,
        soc,
        soc_min: 20.0,
        soc_max: 95.0,
        end_target_min: 60.0,
        max_charge_kw: 5.0,
        max_discharge_kw: 4.0,
        round_trip_efficiency: 1.0,
    }
}

fn ev() -> ElectricVehicle<f64> {
    let availability = (0..24).map(|i| !(6..17).contains(&i)).collect();
    ElectricVehicle {
        capacity_kwh: 80.0,
        soc: 50.0,
        soc_min: 20.0,
        soc_max: 100.0,
        end_target_min: 80.0,
        deadline_interval: 6,
        availability,
        max_charge_kw: 7.2,
        consumption_events: vec![],
    }
}

/// Flat 2 kW day without PV; `mcp` supplies the prices.
fn model(mcp: Vec<f64>, battery_soc: f64) -> DayModel<f64> {
    DayModel {
        mcp: PriceSeries::new(mcp, 1.0).unwrap(),
        load: LoadSeries::new(vec![2.0; 24], 1.0).unwrap(),
        pv_kw: vec![0.0; 24],
        battery: battery(battery_soc),
        ev: ev(),
        dr: DrProgram::new(0.1, 0.8).unwrap(),
    }
}

#[test]
fn first_pass_offer_is_energy_weighted_average() {
    let cfg = table1();
    let out = optimize(&cfg.model, &cfg.strategy).unwrap();
    let num: f64 = LOAD.iter().zip(MCP).map(|(l, p)| l * p).sum();
    let den: f64 = LOAD.iter().sum();
    assert!((out.initial_offer - num / den).abs() < 1e-12);
    assert_eq!(out.initial_offer, out.average_cost);
}

#[test]
fn table1_first_pass_matches_replay() {
    let cfg = table1();
    let out = optimize(&cfg.model, &cfg.strategy).unwrap();
    let trace = &out.first_pass;
    let (bat, ev, grid) = ref_replay_table1(out.initial_offer);
    assert!(
        (trace.battery_end_soc - bat).abs() < 1e-9,
        "{} vs {bat}",
        trace.battery_end_soc
    );
    assert!((trace.ev_deadline_soc - ev).abs() < 1e-9);
    for (r, g) in trace.records.iter().zip(&grid) {
        assert!((r.action.grid_kw - g).abs() < 1e-9, "interval {}", r.interval);
    }
}

#[test]
fn table1_final_offer_matches_replay() {
    let cfg = table1();
    let out = optimize(&cfg.model, &cfg.strategy).unwrap();
    let (bat, ev, _) = ref_replay_table1(out.final_trace.offer);
    assert!((out.final_trace.battery_end_soc - bat).abs() < 1e-9);
    assert!((out.final_trace.ev_deadline_soc - ev).abs() < 1e-9);
}

#[test]
fn soc_error_bounds_over_offer_range() {
    let cfg = table1();
    let m = &cfg.model;
    let (above, _) = m.soc_end_error(m.offer_ceiling(), &[]).unwrap();
    assert!(above >= 0.0);
    let (at_zero, _) = m.soc_end_error(0.0, &[]).unwrap();
    let mut x = 0.0;
    while x <= m.offer_ceiling() {
        let (e, _) = m.soc_end_error(x, &[]).unwrap();
        assert!(at_zero <= e + 1e-12, "offer {x}: {e} < {at_zero}");
        x += 0.001;
    }
}

#[test]
fn newton_agrees_with_grid_search_on_table1() {
    let cfg = table1();
    let m = &cfg.model;
    let ncfg = NewtonConfig {
        tol: cfg.strategy.tol,
        max_iter: 50,
        lower: 0.0,
        upper: m.offer_ceiling(),
    };
    let out = newton_raphson_offer(m, 0.19, &ncfg, &[]).unwrap();
    assert!(out.converged);
    let mut best = (f64::MAX, 0.0);
    let steps = (m.offer_ceiling() / 0.001).floor() as usize;
    for k in 0..=steps {
        let x = k as f64 * 0.001;
        let (e, _) = m.soc_end_error(x, &[]).unwrap();
        if e.abs() < best.0 {
            best = (e.abs(), x);
        }
    }
    assert!((out.x - best.1).abs() <= cfg.strategy.tol.max(0.001));
    assert!(out.residual.abs() <= cfg.strategy.tol.max(best.0));
}

#[test]
fn refine_fixed_point() {
    let cfg = table1();
    let s = evaluate(&cfg.model, &cfg.strategy, 0.2068, vec![], 3).unwrap();
    assert!(s.converged);
    assert_eq!(refine(&s, &cfg.model, &cfg.strategy).unwrap(), s);
}

#[test]
fn refine_lowers_offer_when_battery_underused() {
    let m = model(vec![0.1; 24], 75.0);
    let c = StrategyConfig::default();
    let s = evaluate(&m, &c, 0.5, vec![], 0).unwrap();
    assert_eq!(s.battery_end_soc, 75.0);
    let next = refine(&s, &m, &c).unwrap();
    assert!(next.offer < s.offer);
    assert_eq!(next.iteration, 1);
}

#[test]
fn refine_shortens_windows_for_ev() {
    // expensive night: every pre-deadline interval is a window
    let mut mcp = vec![0.10; 24];
    mcp[..6].copy_from_slice(&[0.25, 0.26, 0.24, 0.27, 0.25, 0.26]);
    let m = model(mcp, 70.0);
    let c = StrategyConfig::default();
    let s = evaluate(&m, &c, 0.2, vec![], 0).unwrap();
    assert!(s.ev_end_soc < 80.0);
    let next = refine(&s, &m, &c).unwrap();
    assert!(total_window_intervals(&next.windows) < total_window_intervals(&s.windows));
    // cheapest window intervals go first: 0.24 at 2, then 0.25 at 0 and 4
    assert_eq!(&next.excluded[..], &[0, 1, 2, 4]);
    assert!(next.ev_end_soc >= 80.0);
}

#[test]
fn optimize_converges_with_exclusions() {
    // expensive night, then prices stepping down by half a cent per hour
    let mut mcp: Vec<f64> = (0..24).map(|i| 0.22 - 0.005 * i as f64).collect();
    mcp[..6].copy_from_slice(&[0.25, 0.26, 0.24, 0.27, 0.25, 0.26]);
    let m = model(mcp, 70.0);
    let out = optimize(&m, &StrategyConfig::default()).unwrap();
    assert!(out.converged(), "{:?}", out.final_state());
    let f = out.final_state();
    assert!(f.battery_end_soc >= 60.0 && f.battery_end_soc <= 62.0);
    assert!(f.ev_end_soc >= 80.0);
    assert!(!f.excluded.is_empty());
}

#[test]
fn single_precision_pipeline_converges_on_table1() {
    let cfg = table1();
    let m = &cfg.model;
    let f = |v: &[f64]| v.iter().map(|x| *x as f32).collect::<Vec<f32>>();
    let b = &m.battery;
    let e = &m.ev;
    let m32 = DayModel::<f32> {
        mcp: PriceSeries::new(f(m.mcp.values()), 1.0).unwrap(),
        load: LoadSeries::new(f(m.load.values()), 1.0).unwrap(),
        pv_kw: f(&m.pv_kw),
        battery: BatteryStorage {
            capacity_kwh: b.capacity_kwh as f32,
            soc: b.soc as f32,
            soc_min: b.soc_min as f32,
            soc_max: b.soc_max as f32,
            end_target_min: b.end_target_min as f32,
            max_charge_kw: b.max_charge_kw as f32,
            max_discharge_kw: b.max_discharge_kw as f32,
            round_trip_efficiency: b.round_trip_efficiency as f32,
        },
        ev: ElectricVehicle {
            capacity_kwh: e.capacity_kwh as f32,
            soc: e.soc as f32,
            soc_min: e.soc_min as f32,
            soc_max: e.soc_max as f32,
            end_target_min: e.end_target_min as f32,
            deadline_interval: e.deadline_interval,
            availability: e.availability.clone(),
            max_charge_kw: e.max_charge_kw as f32,
            consumption_events: e
                .consumption_events
                .iter()
                .map(|c| peerledger::devices::ConsumptionEvent {
                    interval: c.interval,
                    soc_drop: c.soc_drop as f32,
                })
                .collect(),
        },
        dr: DrProgram::new(0.1f32, 0.8).unwrap(),
    };
    let out = optimize(&m32, &StrategyConfig::default()).unwrap();
    assert!(out.converged());
    let out64 = optimize(m, &cfg.strategy).unwrap();
    assert_eq!(out.final_state().windows, out64.final_state().windows);
}

#[test]
fn energy_balance_every_interval_table1() {
    let cfg = table1();
    let out = optimize(&cfg.model, &cfg.strategy).unwrap();
    for trace in [&out.first_pass, &out.final_trace] {
        for r in &trace.records {
            assert!(r.action.balance_residual().abs() <= 1e-6);
        }
    }
}

proptest! {
    #[test]
    fn windows_are_exactly_the_expensive_intervals(
        cost in prop::collection::vec(0u32..50, 1..48),
        offer in 0u32..50,
    ) {
        let cost: Vec<f64> = cost.iter().map(|c| *c as f64 / 100.0).collect();
        let offer = offer as f64 / 100.0;
        let ws = find_trade_windows(&cost, offer);
        let mut inside = vec![false; cost.len()];
        let mut last_exit: Option<usize> = None;
        for w in &ws {
            prop_assert!(w.entry_interval <= w.exit_interval);
            if let Some(e) = last_exit {
                // sorted, disjoint and maximal: a gap separates windows
                prop_assert!(w.entry_interval > e + 1);
            }
            last_exit = Some(w.exit_interval);
            inside[w.entry_interval..=w.exit_interval].fill(true);
        }
        for (i, c) in cost.iter().enumerate() {
            prop_assert_eq!(inside[i], *c > offer);
        }
    }

    #[test]
    fn lowering_offer_never_shrinks_windows(
        cost in prop::collection::vec(0u32..50, 1..48),
        hi in 0u32..50,
        drop in 0u32..50,
    ) {
        let cost: Vec<f64> = cost.iter().map(|c| *c as f64 / 100.0).collect();
        let hi = hi as f64 / 100.0;
        let lo = hi - drop as f64 / 100.0;
        let mask = |o: f64| {
            let mut m = vec![false; cost.len()];
            for w in find_trade_windows(&cost, o) {
                m[w.entry_interval..=w.exit_interval].fill(true);
            }
            m
        };
        let (a, b) = (mask(hi), mask(lo));
        for i in 0..cost.len() {
            prop_assert!(!a[i] || b[i]);
        }
    }

    #[test]
    fn battery_cycle_never_gains(eta in 0.5f64..=1.0, kw in 0.1f64..4.0, soc in 30.0f64..80.0) {
        let mut b = battery(soc);
        b.round_trip_efficiency = eta;
        let charged = b.step(kw, 1.0).unwrap();
        let stored = charged.stored_kwh() - b.stored_kwh();
        // withdraw the energy that went in, as seen from the grid side
        let back = charged.step(-(stored * eta.sqrt()).min(4.0), 1.0).unwrap();
        prop_assert!(back.soc <= soc + 1e-9);
    }
}
