//! Line-delimited JSON dump of a ledger, one block per line.
//!
//! Field order per line: `height`, `timestamp`, `prev_hash`, `merkle_root`,
//! `block_hash` (lowercase hex), then `transactions` as an array of objects
//! with `tx_id`, `seller_id`, `buyer_id`, `energy_nkwh`,
//! `price_nusd_per_kwh`, `interval_index`, `timestamp`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::chain::{Block, BlockHeader, Ledger};
use super::digest::Digest;
use super::transaction::Transaction;
use super::LedgerError;

#[derive(Serialize, Deserialize)]
struct BlockLine {
    height: u64,
    timestamp: u64,
    prev_hash: Digest,
    merkle_root: Digest,
    block_hash: Digest,
    transactions: Vec<Transaction>,
}

impl From<&Block> for BlockLine {
    fn from(b: &Block) -> Self {
        BlockLine {
            height: b.header.height,
            timestamp: b.header.timestamp,
            prev_hash: b.header.prev_hash,
            merkle_root: b.header.merkle_root,
            block_hash: b.header.block_hash,
            transactions: b.transactions.clone(),
        }
    }
}

impl From<BlockLine> for Block {
    fn from(l: BlockLine) -> Self {
        Block {
            header: BlockHeader {
                height: l.height,
                prev_hash: l.prev_hash,
                merkle_root: l.merkle_root,
                timestamp: l.timestamp,
                block_hash: l.block_hash,
            },
            transactions: l.transactions,
        }
    }
}

impl Ledger {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), LedgerError> {
        for block in self.blocks() {
            let line =
                serde_json::to_string(&BlockLine::from(block)).map_err(|e| LedgerError::Export(e.to_string()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parses a dump without validating it.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Ledger, LedgerError> {
        let mut blocks = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: BlockLine = serde_json::from_str(&line).map_err(|e| LedgerError::Import {
                line: i + 1,
                message: e.to_string(),
            })?;
            blocks.push(parsed.into());
        }
        Ok(Ledger::from_blocks(blocks))
    }
}
