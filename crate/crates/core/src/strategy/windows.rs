use serde::Serialize;

use crate::scalar::Scalar;

/// Inclusive run of intervals during which local DER serves the load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TradeWindow {
    pub entry_interval: usize,
    pub exit_interval: usize,
}

impl TradeWindow {
    pub fn len(&self) -> usize {
        self.exit_interval - self.entry_interval + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, interval: usize) -> bool {
        (self.entry_interval..=self.exit_interval).contains(&interval)
    }
}

/// Maximal runs of consecutive `true` entries.
pub fn windows_from_mask(mask: &[bool]) -> Vec<TradeWindow> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().chain(std::iter::once(&false)).enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(TradeWindow {
                    entry_interval: s,
                    exit_interval: i - 1,
                });
                start = None;
            }
            _ => {}
        }
    }
    out
}

pub fn mask_from_windows(windows: &[TradeWindow], horizon: usize) -> Vec<bool> {
    let mut mask = vec![false; horizon];
    for w in windows {
        for m in &mut mask[w.entry_interval..=w.exit_interval.min(horizon.saturating_sub(1))] {
            *m = true;
        }
    }
    mask
}

/// Maximal runs where usage cost is strictly above the offer.
pub fn find_trade_windows<T: Scalar>(usage_cost: &[T], offer: T) -> Vec<TradeWindow> {
    let mask: Vec<bool> = usage_cost.iter().map(|c| *c > offer).collect();
    windows_from_mask(&mask)
}

pub fn total_window_intervals(windows: &[TradeWindow]) -> usize {
    windows.iter().map(TradeWindow::len).sum()
}
