//! Hash-chained block ledger with Merkle-committed transactions and
//! simulated quorum endorsement.

mod chain;
mod digest;
mod endorse;
mod export;
mod merkle;
mod transaction;

pub use chain::{empty_root, Block, BlockHeader, Ledger};
pub use digest::{hash_pair, sha256, Digest};
pub use endorse::{endorse, EndorsementPolicy, EndorsementResult, PeerView, PeerViews};
pub use merkle::merkle_root;
pub use transaction::{hash_transaction, Transaction, ENERGY_UNITS_PER_KWH, PRICE_UNITS_PER_DOLLAR};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("a block needs at least one transaction")]
    EmptyBlock,
    #[error("ledger has no genesis block")]
    MissingGenesis,
    #[error("invalid transaction: {0}")]
    InvalidTransaction(String),
    #[error("quorum {quorum} is not within 1..={peers}")]
    InvalidPolicy { quorum: usize, peers: usize },
    #[error("ledger dump line {line}: {message}")]
    Import { line: usize, message: String },
    #[error("ledger export: {0}")]
    Export(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
