//! Per-interval uniform-price double auction and settlement onto the ledger.
//!
//! Matching runs on the ledger's fixed-point units, so every fill, the
//! clearing price and the conservation check are exact integers.

use std::cmp::Ordering;

use thiserror::Error;

use crate::ledger::{
    endorse, EndorsementPolicy, EndorsementResult, Ledger, LedgerError, PeerViews, Transaction, ENERGY_UNITS_PER_KWH,
    PRICE_UNITS_PER_DOLLAR,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("order from {peer_id}: {reason}")]
    InvalidOrder { peer_id: String, reason: String },
    #[error("orders span intervals {first} and {other}")]
    MixedIntervals { first: usize, other: usize },
    #[error("peer {0} would trade with itself")]
    SelfTrade(String),
    #[error("unbounded bid from {bid} meets unbounded offer from {offer}")]
    UnboundedMatch { bid: String, offer: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PeerRole {
    Prosumer,
    Consumer,
    Utility,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Peer {
    pub peer_id: String,
    pub role: PeerRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Bid,
    Offer,
}

/// A limit order for one interval. An infinite quantity is an infinitely
/// elastic order.
#[derive(Debug, Clone, PartialEq)]
pub struct Order<T> {
    pub peer_id: String,
    pub side: Side,
    pub price_per_kwh: T,
    pub quantity_kwh: T,
    pub interval_index: usize,
    pub submit_tick: u64,
}

impl<T: Scalar> Order<T> {
    pub fn new(
        peer_id: impl Into<String>,
        side: Side,
        price_per_kwh: T,
        quantity_kwh: T,
        interval_index: usize,
        submit_tick: u64,
    ) -> Result<Self, MarketError> {
        let order = Order {
            peer_id: peer_id.into(),
            side,
            price_per_kwh,
            quantity_kwh,
            interval_index,
            submit_tick,
        };
        order.validate()?;
        Ok(order)
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        let bad = |reason: &str| {
            Err(MarketError::InvalidOrder {
                peer_id: self.peer_id.clone(),
                reason: reason.to_string(),
            })
        };
        if !self.price_per_kwh.is_finite() || self.price_per_kwh < T::zero() {
            return bad("price must be finite and non-negative");
        }
        if self.quantity_kwh.is_nan() || self.quantity_kwh < T::zero() {
            return bad("quantity must be non-negative");
        }
        Ok(())
    }

    pub fn is_unbounded(&self) -> bool {
        self.quantity_kwh.is_infinite()
    }

    fn price_units(&self) -> u64 {
        (self.price_per_kwh.as_f64() * PRICE_UNITS_PER_DOLLAR).round() as u64
    }

    /// Quantity in energy units; `u64::MAX` stands for unbounded.
    fn quantity_units(&self) -> u64 {
        if self.is_unbounded() {
            u64::MAX
        } else {
            (self.quantity_kwh.as_f64() * ENERGY_UNITS_PER_KWH).round() as u64
        }
    }
}

/// The utility's infinitely elastic orders: it sells at the grid tariff and
/// buys at the feed-in price.
pub fn utility_orders<T: Scalar>(
    utility_id: &str,
    tariff: T,
    feed_in: T,
    interval_index: usize,
    submit_tick: u64,
) -> Result<(Order<T>, Order<T>), MarketError> {
    Ok((
        Order::new(
            utility_id,
            Side::Bid,
            feed_in,
            T::infinity(),
            interval_index,
            submit_tick,
        )?,
        Order::new(
            utility_id,
            Side::Offer,
            tariff,
            T::infinity(),
            interval_index,
            submit_tick,
        )?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearingResult<T> {
    pub interval_index: usize,
    /// `None` when no bid crosses an offer.
    pub clearing_price: Option<T>,
    pub matches: Vec<Transaction>,
    /// Orders with quantity left over, carrying only the residual.
    pub unmatched: Vec<Order<T>>,
}

impl<T: Scalar> ClearingResult<T> {
    pub fn volume_kwh(&self) -> f64 {
        self.matched_units() as f64 / ENERGY_UNITS_PER_KWH
    }

    /// Total matched energy in fixed-point units.
    pub fn matched_units(&self) -> u64 {
        self.matches.iter().map(|t| t.energy_nkwh).sum()
    }
}

/// Priority key: price first, then (submit_tick, peer_id), then quantity so
/// the order is total and clearing is permutation invariant.
fn priority<T: Scalar>(a: &Order<T>, b: &Order<T>, best_first: impl Fn(u64, u64) -> Ordering) -> Ordering {
    best_first(a.price_units(), b.price_units())
        .then(a.submit_tick.cmp(&b.submit_tick))
        .then_with(|| a.peer_id.cmp(&b.peer_id))
        .then(a.quantity_units().cmp(&b.quantity_units()))
}

fn transaction_id(interval: usize, seq: usize) -> String {
    format!("tx-{interval:04}-{seq:04}")
}

/// Uniform-price double auction for one interval.
///
/// Bids are walked from highest price and offers from lowest, filling while
/// bid ≥ offer. Every fill executes at the midpoint of the last crossing
/// pair, which lies within every matched limit. Transaction ids are
/// sequential within the interval.
pub fn clear_interval<T: Scalar>(bids: &[Order<T>], offers: &[Order<T>]) -> Result<ClearingResult<T>, MarketError> {
    let mut interval = None;
    for o in bids.iter().chain(offers) {
        o.validate()?;
        match interval {
            None => interval = Some(o.interval_index),
            Some(first) if first != o.interval_index => {
                return Err(MarketError::MixedIntervals {
                    first,
                    other: o.interval_index,
                })
            }
            _ => {}
        }
    }
    let interval_index = interval.unwrap_or(0);

    let mut bids: Vec<Order<T>> = bids.iter().filter(|o| o.side == Side::Bid).cloned().collect();
    let mut offers: Vec<Order<T>> = offers.iter().filter(|o| o.side == Side::Offer).cloned().collect();
    bids.sort_by(|a, b| priority(a, b, |x, y| y.cmp(&x)));
    offers.sort_by(|a, b| priority(a, b, |x, y| x.cmp(&y)));

    let mut bid_left: Vec<u64> = bids.iter().map(Order::quantity_units).collect();
    let mut offer_left: Vec<u64> = offers.iter().map(Order::quantity_units).collect();
    // (bid index, offer index, units)
    let mut fills: Vec<(usize, usize, u64)> = Vec::new();
    let mut last_cross = None;
    let (mut i, mut j) = (0, 0);
    while i < bids.len() && j < offers.len() {
        if bid_left[i] == 0 {
            i += 1;
            continue;
        }
        if offer_left[j] == 0 {
            j += 1;
            continue;
        }
        let (b, o) = (&bids[i], &offers[j]);
        if b.price_units() < o.price_units() {
            break;
        }
        if b.peer_id == o.peer_id {
            return Err(MarketError::SelfTrade(b.peer_id.clone()));
        }
        if b.is_unbounded() && o.is_unbounded() {
            return Err(MarketError::UnboundedMatch {
                bid: b.peer_id.clone(),
                offer: o.peer_id.clone(),
            });
        }
        let q = bid_left[i].min(offer_left[j]);
        fills.push((i, j, q));
        last_cross = Some((b.price_units(), o.price_units()));
        if !b.is_unbounded() {
            bid_left[i] -= q;
        }
        if !o.is_unbounded() {
            offer_left[j] -= q;
        }
    }

    let price_units = last_cross.map(|(b, o)| o + (b - o) / 2);
    let mut matches = Vec::with_capacity(fills.len());
    if let Some(p) = price_units {
        for (seq, (bi, oi, q)) in fills.iter().enumerate() {
            matches.push(Transaction::from_units(
                transaction_id(interval_index, seq),
                offers[*oi].peer_id.clone(),
                bids[*bi].peer_id.clone(),
                *q,
                p,
                interval_index as u64,
                bids[*bi].submit_tick.max(offers[*oi].submit_tick),
            )?);
        }
    }

    let residual = |orders: &[Order<T>], left: &[u64]| -> Vec<Order<T>> {
        orders
            .iter()
            .zip(left)
            .filter(|(_, l)| **l > 0)
            .map(|(o, l)| Order {
                quantity_kwh: if o.is_unbounded() {
                    T::infinity()
                } else {
                    T::lit(*l as f64 / ENERGY_UNITS_PER_KWH)
                },
                ..o.clone()
            })
            .collect()
    };
    let mut unmatched = residual(&bids, &bid_left);
    unmatched.extend(residual(&offers, &offer_left));

    Ok(ClearingResult {
        interval_index,
        clearing_price: price_units.map(|p| T::lit(p as f64 / PRICE_UNITS_PER_DOLLAR)),
        matches,
        unmatched,
    })
}

#[derive(Debug, Clone)]
pub struct Settlement {
    pub ledger: Ledger,
    /// Endorsed transactions, in clearing order; these form the new block.
    pub accepted: Vec<Transaction>,
    pub rejected: Vec<(Transaction, EndorsementResult)>,
}

/// Endorses every match and appends the accepted ones as one block stamped
/// `timestamp`. Nothing is appended when every match is rejected.
pub fn settle<T: Scalar>(
    result: &ClearingResult<T>,
    ledger: Ledger,
    views: &PeerViews,
    policy: &EndorsementPolicy,
    timestamp: u64,
) -> Result<Settlement, MarketError> {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for tx in &result.matches {
        let verdict = endorse(tx, &ledger, views, policy);
        if verdict.accepted {
            accepted.push(tx.clone());
        } else {
            rejected.push((tx.clone(), verdict));
        }
    }
    let ledger = if accepted.is_empty() {
        ledger
    } else {
        ledger.append_block(accepted.clone(), timestamp)?
    };
    Ok(Settlement {
        ledger,
        accepted,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::PeerView;

    fn bid(peer: &str, price: f64, q: f64) -> Order<f64> {
        Order::new(peer, Side::Bid, price, q, 5, 0).unwrap()
    }

    fn offer(peer: &str, price: f64, q: f64) -> Order<f64> {
        Order::new(peer, Side::Offer, price, q, 5, 0).unwrap()
    }

    #[test]
    fn single_cross_at_midpoint() {
        let r = clear_interval(&[bid("b", 0.30, 10.0)], &[offer("s", 0.20, 10.0)]).unwrap();
        assert_eq!(r.clearing_price, Some(0.25));
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].energy_kwh(), 10.0);
        assert_eq!(r.matches[0].seller_id, "s");
        assert_eq!(r.matches[0].buyer_id, "b");
        assert!(r.unmatched.is_empty());
    }

    #[test]
    fn no_cross_no_match() {
        let r = clear_interval(&[bid("b", 0.10, 10.0)], &[offer("s", 0.20, 10.0)]).unwrap();
        assert_eq!(r.clearing_price, None);
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched.len(), 2);
    }

    #[test]
    fn partial_fill_leaves_residual() {
        let r = clear_interval(&[bid("b", 0.30, 4.0)], &[offer("s", 0.20, 10.0)]).unwrap();
        assert_eq!(r.volume_kwh(), 4.0);
        assert_eq!(r.unmatched, vec![offer("s", 0.20, 6.0)]);
    }

    #[test]
    fn unbounded_bid_takes_everything_offered() {
        let r = clear_interval(&[bid("utility", 0.15, f64::INFINITY)], &[offer("p", 0.10, 3.5)]).unwrap();
        assert_eq!(r.volume_kwh(), 3.5);
        assert_eq!(r.clearing_price, Some(0.125));
        assert!(r.unmatched[0].quantity_kwh.is_infinite());
    }

    #[test]
    fn self_trade_is_rejected() {
        let e = clear_interval(&[bid("p", 0.30, 1.0)], &[offer("p", 0.20, 1.0)]).unwrap_err();
        assert!(matches!(e, MarketError::SelfTrade(_)));
    }

    #[test]
    fn mixed_intervals_rejected() {
        let mut o = offer("s", 0.2, 1.0);
        o.interval_index = 6;
        assert!(matches!(
            clear_interval(&[bid("b", 0.3, 1.0)], &[o]),
            Err(MarketError::MixedIntervals { .. })
        ));
    }

    #[test]
    fn negative_quantity_rejected() {
        assert!(Order::new("x", Side::Bid, 0.1, -1.0, 0, 0).is_err());
        assert!(Order::new("x", Side::Bid, f64::NAN, 1.0, 0, 0).is_err());
    }

    #[test]
    fn settle_all_rejected_appends_nothing() {
        let r = clear_interval(&[bid("b", 0.30, 10.0)], &[offer("s", 0.20, 10.0)]).unwrap();
        let policy = EndorsementPolicy::new(["v1"], 1).unwrap();
        let views = PeerViews::from([("v1".to_string(), PeerView::from([("s".to_string(), 1.0)]))]);
        let s = settle(&r, Ledger::new(), &views, &policy, 5).unwrap();
        assert_eq!(s.ledger.len(), 1);
        assert!(s.accepted.is_empty());
        assert_eq!(s.rejected.len(), 1);
    }
}
