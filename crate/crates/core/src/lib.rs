//! Key boosting over a noisy public channel.
//!
//! Two parties who share a short random seed `K0` grow it into a long chain
//! of one-time-pad keys. Each fresh key is sent encoded in one of two phase
//! alphabets chosen by the previous key. The alphabets differ by a tiny
//! offset `delta_phi`, far below the phase noise of a weak coherent state,
//! so an eavesdropper who records everything still cannot tell which
//! alphabet was used, while the legitimate receiver, who knows it, reads
//! the bits with negligible error.
//!
//! * [`phys`]: coherent-state noise and discrimination bounds.
//! * [`encode`]: the dual-basis phase constellation and quantization.
//! * [`analysis`]: leak per symbol, minimum secure length, parameter checks, figure surfaces.
//! * [`protocol`]: key chain, leak ledger, reconciliation, privacy amplification, parties.
//! * [`attacker`]: what a passive recorder can and cannot learn.
//! * [`transport`]: framed wire format and the networked session.
//!
//! ```
//! use noisepad::protocol::{run_cycle, Party, Role, SessionParams};
//! use noisepad::Bits;
//!
//! let params = SessionParams::new(1e4, 2f64.powi(-10), 32, 256);
//! let k0: Bits = (0..256).map(|i| i % 3 == 0).collect();
//! let mut alice = Party::new(Role::Alice, params.clone(), k0.clone(), 1).unwrap();
//! let mut bob = Party::new(Role::Bob, params, k0, 2).unwrap();
//! let (k1, k2) = run_cycle(&mut alice, &mut bob).unwrap();
//! assert_eq!(alice.chain().key(1), Some(&k1));
//! assert_eq!(bob.chain().key(2), Some(&k2));
//! ```

pub mod analysis;
pub mod attacker;
mod bits;
pub mod encode;
mod error;
pub mod phys;
pub mod protocol;
pub mod transport;

pub use bits::Bits;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/physics.md")]
    mod physics {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/leak.md")]
    mod leak {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/eavesdropper.md")]
    mod eavesdropper {}
    #[doc = include_str!("../../../book/src/wire.md")]
    mod wire {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
