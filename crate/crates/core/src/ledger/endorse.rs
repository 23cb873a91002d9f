//! In-process simulation of peer endorsement.
//!
//! Every validating peer holds its own view of how much energy each seller
//! can deliver. A peer approves a transaction when the transaction is well
//! formed, not already on the chain, and the seller's available energy in
//! that peer's view covers the traded amount.

use std::collections::{BTreeMap, BTreeSet};

use super::chain::Ledger;
use super::transaction::Transaction;
use super::LedgerError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndorsementPolicy {
    peer_ids: BTreeSet<String>,
    quorum: usize,
}

impl EndorsementPolicy {
    pub fn new<I, S>(peer_ids: I, quorum: usize) -> Result<Self, LedgerError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let peer_ids: BTreeSet<String> = peer_ids.into_iter().map(Into::into).collect();
        if quorum == 0 || quorum > peer_ids.len() {
            return Err(LedgerError::InvalidPolicy {
                quorum,
                peers: peer_ids.len(),
            });
        }
        Ok(EndorsementPolicy { peer_ids, quorum })
    }

    pub fn peer_ids(&self) -> impl Iterator<Item = &str> {
        self.peer_ids.iter().map(String::as_str)
    }

    pub fn quorum(&self) -> usize {
        self.quorum
    }
}

/// One peer's view: seller id -> energy (kWh) the seller can deliver.
pub type PeerView = BTreeMap<String, f64>;

/// Views keyed by validating peer id.
pub type PeerViews = BTreeMap<String, PeerView>;

#[derive(Debug, Clone, PartialEq)]
pub struct EndorsementResult {
    pub accepted: bool,
    /// Vote per policy peer, in peer-id order.
    pub votes: Vec<(String, bool)>,
}

impl EndorsementResult {
    pub fn approvals(&self) -> usize {
        self.votes.iter().filter(|(_, v)| *v).count()
    }
}

fn peer_approves(tx: &Transaction, ledger: &Ledger, view: Option<&PeerView>) -> bool {
    if tx.validate().is_err() || ledger.contains_tx(&tx.tx_id) {
        return false;
    }
    let Some(available) = view.and_then(|v| v.get(&tx.seller_id)) else {
        return false;
    };
    // Compare in fixed-point units so the check matches what is recorded.
    let available_units = (available * super::ENERGY_UNITS_PER_KWH).round();
    available_units >= tx.energy_nkwh as f64
}

/// Collects one vote per policy peer. A peer with no view of the seller
/// denies.
pub fn endorse(tx: &Transaction, ledger: &Ledger, views: &PeerViews, policy: &EndorsementPolicy) -> EndorsementResult {
    let votes: Vec<(String, bool)> = policy
        .peer_ids
        .iter()
        .map(|peer| (peer.clone(), peer_approves(tx, ledger, views.get(peer))))
        .collect();
    let approvals = votes.iter().filter(|(_, v)| *v).count();
    EndorsementResult {
        accepted: approvals >= policy.quorum,
        votes,
    }
}
