use super::digest::{hash_pair, Digest};
use super::transaction::{hash_transaction, Transaction};
use super::LedgerError;

/// Merkle root over the ordered transaction list.
///
/// A single transaction's root is its own leaf hash. At every level with an
/// odd number of nodes the last node is paired with itself.
pub fn merkle_root(txs: &[Transaction]) -> Result<Digest, LedgerError> {
    if txs.is_empty() {
        return Err(LedgerError::EmptyBlock);
    }
    let mut level: Vec<Digest> = txs.iter().map(hash_transaction).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [l, r] => hash_pair(l, r),
                [l] => hash_pair(l, l),
                _ => unreachable!(),
            })
            .collect();
    }
    Ok(level[0])
}
