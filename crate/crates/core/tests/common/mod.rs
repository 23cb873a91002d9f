//! Test-only oracles, written independently of the library code paths they
//! check.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use peerledger::ledger::Transaction;
use peerledger::sim::{load_scenario, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn field(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u32).to_be_bytes());
    out.extend_from_slice(b);
}

/// Reference leaf hash built from the documented byte layout.
pub fn ref_leaf(tx: &Transaction) -> [u8; 32] {
    let mut b = Vec::new();
    field(&mut b, tx.tx_id.as_bytes());
    field(&mut b, tx.seller_id.as_bytes());
    field(&mut b, tx.buyer_id.as_bytes());
    field(&mut b, &tx.energy_nkwh.to_be_bytes());
    field(&mut b, &tx.price_nusd_per_kwh.to_be_bytes());
    field(&mut b, &tx.interval_index.to_be_bytes());
    field(&mut b, &tx.timestamp.to_be_bytes());
    Sha256::digest(&b).into()
}

/// Level-by-level pairwise reduction; an odd node pairs with itself.
pub fn ref_merkle(txs: &[Transaction]) -> [u8; 32] {
    let leaves: Vec<[u8; 32]> = txs.iter().map(ref_leaf).collect();
    fn reduce(nodes: Vec<[u8; 32]>) -> [u8; 32] {
        if nodes.len() == 1 {
            return nodes[0];
        }
        let mut next = Vec::new();
        let mut i = 0;
        while i < nodes.len() {
            let l = nodes[i];
            let r = if i + 1 < nodes.len() { nodes[i + 1] } else { nodes[i] };
            let mut h = Sha256::new();
            h.update(l);
            h.update(r);
            next.push(h.finalize().into());
            i += 2;
        }
        reduce(next)
    }
    reduce(leaves)
}

pub fn ref_header(height: u64, prev: &[u8; 32], root: &[u8; 32], ts: u64) -> [u8; 32] {
    let mut b = Vec::new();
    field(&mut b, &height.to_be_bytes());
    field(&mut b, prev);
    field(&mut b, root);
    field(&mut b, &ts.to_be_bytes());
    Sha256::digest(&b).into()
}

pub fn table1_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/table1")
}

pub fn table1() -> ScenarioConfig {
    load_scenario(&table1_dir()).expect("shipped scenario loads")
}

/// Base hourly profiles of the shipped scenario.
pub const MCP: [f64; 24] = [
    0.090, 0.082, 0.075, 0.071, 0.073, 0.085, 0.118, 0.162, 0.171, 0.149, 0.131, 0.124, 0.121, 0.127, 0.139, 0.158,
    0.197, 0.243, 0.286, 0.312, 0.274, 0.219, 0.153, 0.108,
];
pub const LOAD: [f64; 24] = [
    1.4, 1.0, 0.7, 0.6, 0.7, 1.0, 2.4, 3.6, 3.1, 2.2, 1.9, 2.0, 2.3, 2.1, 2.0, 2.4, 3.5, 3.9, 5.2, 5.9, 5.5, 4.0, 3.2,
    2.0,
];
pub const PV: [f64; 25] = [
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 1.2, 2.6, 4.0, 5.1, 5.8, 6.0, 5.7, 4.9, 3.7, 2.3, 0.9, 0.2, 0.0, 0.0, 0.0, 0.0,
    0.0, 0.0,
];

/// Writes a perturbed copy of the shipped scenario into `dir`: prices,
/// load and PV are scaled per interval, and battery, EV and market settings
/// are drawn around the shipped values.
pub fn write_random_scenario(dir: &Path, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mcp = String::from("interval,price\n");
    for (i, p) in MCP.iter().enumerate() {
        let v: f64 = p * rng.gen_range(0.75..1.25);
        writeln!(mcp, "{i},{:.4}", v).unwrap();
    }
    let mut load = String::from("interval,kw\n");
    for (i, l) in LOAD.iter().enumerate() {
        writeln!(load, "{i},{:.3}", l * rng.gen_range(0.7..1.3)).unwrap();
    }
    let pv_scale = rng.gen_range(0.6..1.4);
    let mut solar = String::from("hour,kw\n");
    for (h, p) in PV.iter().enumerate() {
        writeln!(solar, "{h},{:.3}", p * pv_scale).unwrap();
    }
    fs::write(dir.join("mcp.csv"), mcp).unwrap();
    fs::write(dir.join("load.csv"), load).unwrap();
    fs::write(dir.join("solar.csv"), solar).unwrap();
    let toml = format!(
        r#"name = "random-{seed}"
seed = {seed}

[horizon]
intervals = 24
interval_seconds = 3600

[tables]
solar = "solar.csv"
load = "load.csv"
mcp = "mcp.csv"

[battery]
capacity_kwh = {cap:.1}
initial_soc = {bsoc:.2}
soc_min = 20.0
soc_max = 95.0
end_target_min = 60.0
max_charge_kw = 5.0
max_discharge_kw = {dis:.2}
round_trip_efficiency = {eff:.3}

[ev]
capacity_kwh = 80.0
initial_soc = {evsoc:.2}
soc_min = 20.0
soc_max = 100.0
end_target_min = 80.0
deadline_interval = 6
max_charge_kw = 7.2
available = [[0, 5], [17, 23]]

[[ev.consumption]]
interval = 16
soc_drop = 30.0

[pv]
panel_count = 1

[dr]
reduction = 0.10
floor = 0.80

[strategy]
delta = 0.05
slack = 2.0
tol = 0.5
max_iterations = 50

[market]
prosumer_id = "prosumer-1"
utility_id = "utility"
feed_in_ratio = {fir:.2}
view_jitter = {jit:.3}

[endorsement]
peers = ["peer-a", "peer-b", "peer-c"]
quorum = 2
"#,
        cap = rng.gen_range(150.0..300.0),
        bsoc = rng.gen_range(50.0..68.0),
        dis = rng.gen_range(2.0..6.0),
        eff = rng.gen_range(0.85..1.0),
        evsoc = rng.gen_range(40.0..70.0),
        fir = rng.gen_range(0.8..1.0),
        jit = rng.gen_range(0.0..0.3),
    );
    let path = dir.join("scenario.toml");
    fs::write(&path, toml).unwrap();
    path
}

/// Maximum gains from trade over all integer-unit allocations, by
/// exhaustive enumeration. Quantities are small integers.
pub fn ref_max_welfare(bids: &[(f64, u32)], offers: &[(f64, u32)]) -> (f64, u32) {
    // allocation matrix enumerated cell by cell
    let cells: Vec<(usize, usize)> = (0..bids.len())
        .flat_map(|i| (0..offers.len()).map(move |j| (i, j)))
        .collect();
    let mut best = (0.0f64, 0u32);
    let mut alloc = vec![0u32; cells.len()];
    fn rec(
        k: usize,
        cells: &[(usize, usize)],
        alloc: &mut Vec<u32>,
        bids: &[(f64, u32)],
        offers: &[(f64, u32)],
        best: &mut (f64, u32),
    ) {
        if k == cells.len() {
            let mut w = 0.0;
            let mut vol = 0;
            for (c, (i, j)) in cells.iter().enumerate() {
                w += alloc[c] as f64 * (bids[*i].0 - offers[*j].0);
                vol += alloc[c];
            }
            if w > best.0 + 1e-12 || ((w - best.0).abs() <= 1e-12 && vol > best.1) {
                *best = (w, vol);
            }
            return;
        }
        let (i, j) = cells[k];
        let used_b: u32 = cells
            .iter()
            .zip(alloc.iter())
            .filter(|((bi, _), _)| *bi == i)
            .map(|(_, a)| a)
            .sum();
        let used_o: u32 = cells
            .iter()
            .zip(alloc.iter())
            .filter(|((_, oj), _)| *oj == j)
            .map(|(_, a)| a)
            .sum();
        let cap = (bids[i].1 - used_b).min(offers[j].1 - used_o);
        for q in 0..=cap {
            alloc[k] = q;
            rec(k + 1, cells, alloc, bids, offers, best);
        }
        alloc[k] = 0;
    }
    rec(0, &cells, &mut alloc, bids, offers, &mut best);
    best
}

/// Hourly replay of the shipped scenario written straight from the
/// dispatch rules, for unit round-trip efficiency. Returns the battery SOC
/// at the end of the day, the EV SOC at 6 AM and the grid power per hour.
pub fn ref_replay_table1(offer: f64) -> (f64, f64, Vec<f64>) {
    let pv: Vec<f64> = (0..24).map(|h| PV[h]).collect();
    let window: Vec<bool> = MCP.iter().map(|c| *c > offer).collect();

    // EV: 24 kWh needed before 6 AM, 7.2 kW charger, plugged in 0..=5
    let mut ev_kw = [0.0; 24];
    let mut slots: Vec<usize> = (0..6).filter(|i| !window[*i]).collect();
    slots.sort_by(|a, b| MCP[*a].partial_cmp(&MCP[*b]).unwrap().then(a.cmp(b)));
    let mut need = (80.0 - 50.0) * 80.0 / 100.0;
    for i in slots {
        if need <= 0.0 {
            break;
        }
        if need >= 7.2 {
            ev_kw[i] = 7.2;
            need -= 7.2;
        } else {
            ev_kw[i] = (need + 1e-6f64).min(7.2);
            need = 0.0;
        }
    }

    let mut soc = 60.0f64;
    let mut ev = 50.0f64;
    let mut ev_at_6 = f64::NAN;
    let mut grid = Vec::new();
    for h in 0..24 {
        let (served, charge, discharge);
        if window[h] {
            served = 0.9 * LOAD[h];
            charge = 0.0;
            discharge = f64::min(4.0, (soc - 20.0) * 250.0 / 100.0);
        } else {
            served = LOAD[h];
            let surplus = pv[h] - served - ev_kw[h];
            charge = if surplus > 0.0 {
                surplus.min(5.0).min((95.0 - soc) * 2.5)
            } else {
                0.0
            };
            discharge = 0.0;
        }
        grid.push(served + charge + ev_kw[h] - pv[h] - discharge);
        soc += 100.0 * (charge - discharge) / 250.0;
        ev += 100.0 * ev_kw[h] / 80.0;
        if h == 16 {
            ev -= 30.0;
        }
        if h == 5 {
            ev_at_6 = ev;
        }
    }
    (soc, ev_at_6, grid)
}
