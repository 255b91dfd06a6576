use serde::{Deserialize, Serialize};

use crate::analysis::{validate_params, DEFAULT_RATIO};
use crate::encode::Constellation;
use crate::error::{Error, Result};
use crate::phys::CoherentStateParams;

pub const DEFAULT_SAFETY_BITS: usize = 32;
pub const DEFAULT_RECONCILIATION_BLOCK: usize = 64;
pub const MIN_RECONCILIATION_BLOCK: usize = 8;

/// Everything both parties must agree on before the first block.
///
/// `block_length` is the length of the shared seed `K0` and therefore of the
/// first block; later blocks follow the (shrinking) length of the key that
/// keys them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    pub avg_photon_number: f64,
    pub delta_phi: f64,
    pub resolution_bits: u8,
    pub block_length: usize,
    pub safety_bits: usize,
    pub reconciliation_block: usize,
    /// Run the parity reconciliation step. Off only for leak-budget studies in
    /// the error-free regime, where it would otherwise dominate the ledger.
    pub reconcile: bool,
}

impl SessionParams {
    /// Parameters with the default safety margin and reconciliation block.
    pub fn new(avg_photon_number: f64, delta_phi: f64, resolution_bits: u8, block_length: usize) -> Self {
        Self {
            avg_photon_number,
            delta_phi,
            resolution_bits,
            block_length,
            safety_bits: DEFAULT_SAFETY_BITS,
            reconciliation_block: DEFAULT_RECONCILIATION_BLOCK.min(block_length),
            reconcile: true,
        }
    }

    pub fn with_safety_bits(mut self, safety_bits: usize) -> Self {
        self.safety_bits = safety_bits;
        self
    }

    pub fn with_reconciliation_block(mut self, bits: usize) -> Self {
        self.reconciliation_block = bits;
        self
    }

    pub fn without_reconciliation(mut self) -> Self {
        self.reconcile = false;
        self
    }

    pub fn coherent_state(&self) -> Result<CoherentStateParams> {
        CoherentStateParams::new(self.avg_photon_number)
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::new(self.delta_phi, self.resolution_bits)
    }

    /// Operating condition at ratio 8, grid resolution and block sizes.
    pub fn validate(&self) -> Result<()> {
        let state = self.coherent_state()?;
        let c = self.constellation()?;
        validate_params(state, &c, DEFAULT_RATIO).into_result()?;
        if self.reconciliation_block < MIN_RECONCILIATION_BLOCK || self.block_length < self.reconciliation_block {
            return Err(Error::InvalidParams(format!(
                "need block_length ({}) >= reconciliation_block ({}) >= {MIN_RECONCILIATION_BLOCK}",
                self.block_length, self.reconciliation_block
            )));
        }
        Ok(())
    }
}
