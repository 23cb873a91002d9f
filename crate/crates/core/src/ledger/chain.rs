use serde::{Deserialize, Serialize};

use super::digest::{sha256, Digest};
use super::merkle::merkle_root;
use super::transaction::{put_field, Transaction};
use super::LedgerError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_hash: Digest,
    pub merkle_root: Digest,
    pub timestamp: u64,
    pub block_hash: Digest,
}

impl BlockHeader {
    fn sealed(height: u64, prev_hash: Digest, merkle_root: Digest, timestamp: u64) -> Self {
        let block_hash = header_hash(height, &prev_hash, &merkle_root, timestamp);
        BlockHeader {
            height,
            prev_hash,
            merkle_root,
            timestamp,
            block_hash,
        }
    }

    /// Recomputes the header hash from the other header fields.
    pub fn compute_hash(&self) -> Digest {
        header_hash(self.height, &self.prev_hash, &self.merkle_root, self.timestamp)
    }
}

/// height ‖ prev_hash ‖ merkle_root ‖ timestamp, each length-prefixed like
/// transaction fields.
fn header_hash(height: u64, prev_hash: &Digest, merkle_root: &Digest, timestamp: u64) -> Digest {
    let mut bytes = Vec::with_capacity(4 * 4 + 8 + 32 + 32 + 8);
    put_field(&mut bytes, &height.to_be_bytes());
    put_field(&mut bytes, prev_hash.as_bytes());
    put_field(&mut bytes, merkle_root.as_bytes());
    put_field(&mut bytes, &timestamp.to_be_bytes());
    sha256(&bytes)
}

/// Merkle root placeholder carried by the genesis block.
pub fn empty_root() -> Digest {
    sha256(&[])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn genesis() -> Self {
        Block {
            header: BlockHeader::sealed(0, Digest::zero(), empty_root(), 0),
            transactions: Vec::new(),
        }
    }

    fn is_self_consistent(&self) -> bool {
        let root_ok = if self.header.height == 0 {
            self.transactions.is_empty() && self.header.merkle_root == empty_root()
        } else {
            merkle_root(&self.transactions).is_ok_and(|r| r == self.header.merkle_root)
        };
        root_ok && self.header.compute_hash() == self.header.block_hash
    }
}

/// Append-only chain of blocks starting at a genesis block.
///
/// A `Ledger` is a value: appending consumes it and returns the extended
/// chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ledger {
    blocks: Vec<Block>,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl Ledger {
    /// A chain holding only the genesis block.
    pub fn new() -> Self {
        Ledger {
            blocks: vec![Block::genesis()],
        }
    }

    /// Wraps blocks without checking them; use [`Ledger::validate_chain`].
    pub fn from_blocks(blocks: Vec<Block>) -> Self {
        Ledger { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Block> {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn transactions(&self) -> impl Iterator<Item = &Transaction> {
        self.blocks.iter().flat_map(|b| b.transactions.iter())
    }

    pub fn contains_tx(&self, tx_id: &str) -> bool {
        self.transactions().any(|t| t.tx_id == tx_id)
    }

    pub fn append_block(mut self, txs: Vec<Transaction>, timestamp: u64) -> Result<Ledger, LedgerError> {
        for tx in &txs {
            tx.validate()?;
        }
        let root = merkle_root(&txs)?;
        let tip = self.blocks.last().ok_or(LedgerError::MissingGenesis)?;
        let header = BlockHeader::sealed(tip.header.height + 1, tip.header.block_hash, root, timestamp);
        self.blocks.push(Block {
            header,
            transactions: txs,
        });
        Ok(self)
    }

    pub fn validate_chain(&self) -> bool {
        !self.blocks.is_empty() && self.first_invalid_height().is_none()
    }

    /// Index of the first block that fails recomputation or linkage.
    pub fn first_invalid_height(&self) -> Option<u64> {
        let mut prev: Option<&Block> = None;
        for (i, block) in self.blocks.iter().enumerate() {
            let h = &block.header;
            let linked = match prev {
                None => h.height == 0 && h.prev_hash == Digest::zero(),
                Some(p) => h.height == p.header.height + 1 && h.prev_hash == p.header.block_hash,
            };
            if !linked || h.height != i as u64 || !block.is_self_consistent() {
                return Some(i as u64);
            }
            prev = Some(block);
        }
        None
    }
}
