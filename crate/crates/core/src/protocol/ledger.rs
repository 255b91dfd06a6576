use serde::Serialize;

/// Running estimate of what the eavesdropper may know about the session's keys.
///
/// `charged_bits` is the part of the estimate already removed by privacy
/// amplification. Amplification always removes `ceil(total) - charged_bits`,
/// so fractional leak carries over between blocks instead of being rounded up
/// every time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LeakLedger {
    statistical_leak: f64,
    disclosed_parity_bits: u64,
    charged_bits: u64,
    symbols_sent: u64,
}

impl LeakLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Charges `symbols` transmitted symbols at `leak_per_symbol` bits each.
    pub fn record_symbols(&mut self, symbols: usize, leak_per_symbol: f64) {
        debug_assert!(leak_per_symbol >= 0.0);
        self.symbols_sent += symbols as u64;
        self.statistical_leak += symbols as f64 * leak_per_symbol;
    }

    pub fn record_parities(&mut self, count: usize) {
        self.disclosed_parity_bits += count as u64;
    }

    pub fn statistical_leak(&self) -> f64 {
        self.statistical_leak
    }

    pub fn disclosed_parity_bits(&self) -> u64 {
        self.disclosed_parity_bits
    }

    pub fn symbols_sent(&self) -> u64 {
        self.symbols_sent
    }

    pub fn charged_bits(&self) -> u64 {
        self.charged_bits
    }

    pub fn total(&self) -> f64 {
        self.statistical_leak + self.disclosed_parity_bits as f64
    }

    /// Whole bits of leak not yet removed by amplification.
    pub fn uncharged_bits(&self) -> u64 {
        (self.total().ceil() as u64).saturating_sub(self.charged_bits)
    }

    pub(crate) fn charge(&mut self, bits: u64) {
        self.charged_bits += bits;
    }
}
