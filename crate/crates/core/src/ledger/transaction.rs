use serde::{Deserialize, Serialize};

use super::digest::{sha256, Digest};
use super::LedgerError;

/// Fixed-point resolution of transaction energy: 1 unit = 1e-9 kWh.
pub const ENERGY_UNITS_PER_KWH: f64 = 1e9;
/// Fixed-point resolution of transaction prices: 1 unit = 1e-9 $/kWh.
pub const PRICE_UNITS_PER_DOLLAR: f64 = 1e9;

/// One executed energy trade as recorded on the ledger.
///
/// Quantities are stored in fixed-point units so the hashed bytes are exactly
/// the stored values. Fields are public so audits can inspect and rebuild
/// blocks; [`Transaction::new`] and [`Transaction::validate`] enforce the
/// invariants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: String,
    pub seller_id: String,
    pub buyer_id: String,
    pub energy_nkwh: u64,
    pub price_nusd_per_kwh: u64,
    pub interval_index: u64,
    pub timestamp: u64,
}

fn to_units(value: f64, scale: f64, field: &'static str) -> Result<u64, LedgerError> {
    if !value.is_finite() || value < 0.0 {
        return Err(LedgerError::InvalidTransaction(format!(
            "{field} must be finite and non-negative, got {value}"
        )));
    }
    let units = (value * scale).round();
    if units > u64::MAX as f64 {
        return Err(LedgerError::InvalidTransaction(format!(
            "{field} overflows fixed-point range"
        )));
    }
    Ok(units as u64)
}

impl Transaction {
    pub fn new(
        tx_id: impl Into<String>,
        seller_id: impl Into<String>,
        buyer_id: impl Into<String>,
        energy_kwh: f64,
        price_per_kwh: f64,
        interval_index: u64,
        timestamp: u64,
    ) -> Result<Self, LedgerError> {
        let tx = Transaction {
            tx_id: tx_id.into(),
            seller_id: seller_id.into(),
            buyer_id: buyer_id.into(),
            energy_nkwh: to_units(energy_kwh, ENERGY_UNITS_PER_KWH, "energy_kwh")?,
            price_nusd_per_kwh: to_units(price_per_kwh, PRICE_UNITS_PER_DOLLAR, "price_per_kwh")?,
            interval_index,
            timestamp,
        };
        tx.validate()?;
        Ok(tx)
    }

    /// Builds a transaction directly from fixed-point units.
    pub fn from_units(
        tx_id: impl Into<String>,
        seller_id: impl Into<String>,
        buyer_id: impl Into<String>,
        energy_nkwh: u64,
        price_nusd_per_kwh: u64,
        interval_index: u64,
        timestamp: u64,
    ) -> Result<Self, LedgerError> {
        let tx = Transaction {
            tx_id: tx_id.into(),
            seller_id: seller_id.into(),
            buyer_id: buyer_id.into(),
            energy_nkwh,
            price_nusd_per_kwh,
            interval_index,
            timestamp,
        };
        tx.validate()?;
        Ok(tx)
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        if self.tx_id.is_empty() {
            return Err(LedgerError::InvalidTransaction("empty tx_id".into()));
        }
        if self.energy_nkwh == 0 {
            return Err(LedgerError::InvalidTransaction(format!(
                "{}: energy must be > 0",
                self.tx_id
            )));
        }
        if self.seller_id == self.buyer_id {
            return Err(LedgerError::InvalidTransaction(format!(
                "{}: seller and buyer are both {}",
                self.tx_id, self.seller_id
            )));
        }
        Ok(())
    }

    pub fn energy_kwh(&self) -> f64 {
        self.energy_nkwh as f64 / ENERGY_UNITS_PER_KWH
    }

    pub fn price_per_kwh(&self) -> f64 {
        self.price_nusd_per_kwh as f64 / PRICE_UNITS_PER_DOLLAR
    }

    /// Value of the trade in dollars.
    pub fn value(&self) -> f64 {
        self.energy_kwh() * self.price_per_kwh()
    }

    /// Canonical byte encoding: every field, in declaration order, as a
    /// 4-byte big-endian length followed by the field bytes. Strings are UTF-8,
    /// integers are 8-byte big-endian.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(96 + self.tx_id.len() + self.seller_id.len() + self.buyer_id.len());
        put_field(&mut out, self.tx_id.as_bytes());
        put_field(&mut out, self.seller_id.as_bytes());
        put_field(&mut out, self.buyer_id.as_bytes());
        put_field(&mut out, &self.energy_nkwh.to_be_bytes());
        put_field(&mut out, &self.price_nusd_per_kwh.to_be_bytes());
        put_field(&mut out, &self.interval_index.to_be_bytes());
        put_field(&mut out, &self.timestamp.to_be_bytes());
        out
    }
}

pub(crate) fn put_field(out: &mut Vec<u8>, bytes: &[u8]) {
    let len = u32::try_from(bytes.len()).expect("field longer than 4 GiB");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(bytes);
}

/// Leaf digest of a transaction.
pub fn hash_transaction(tx: &Transaction) -> Digest {
    sha256(&tx.canonical_bytes())
}
