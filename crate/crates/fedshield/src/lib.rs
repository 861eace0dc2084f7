//! Secure aggregation for federated learning with verifiable, attack-free
//! model updates.
//!
//! The library combines four building blocks:
//!
//! * [`he`] — a generalized Paillier (Damgård–Jurik) cryptosystem with
//!   additive homomorphism and `(t, n)`-threshold decryption,
//! * [`encoding`] — ciphertext compression: polynomial packing of model
//!   vectors into few large plaintexts, and a KEM-DEM hybrid for
//!   cryptosystems with small plaintext spaces,
//! * [`pedersen`] — additively homomorphic commitments used to check that
//!   the decrypted aggregate is consistent with the per-user submissions,
//! * [`zkp`] — a non-interactive zero-knowledge proof, built from an
//!   emulated 3-party 2-private MPC, that a committed model update passes
//!   the neuron-pruning backdoor check of [`model`].
//!
//! [`protocol`] wires these into the round state machines run by users and
//! the server, and [`harness`] provides deterministic simulation, fixture
//! generation, adversary scripts and benchmark CSV emission. The `fedshield`
//! binary is a thin CLI over the harness; the `examples/` directory holds
//! one runnable example per capability.
//!
//! Everything is seeded and bit-reproducible: every operation that needs
//! randomness takes an explicit RNG handle, and all protocol messages are
//! recorded in replayable transcripts.
//!
//! This is research-grade code: arithmetic is not constant-time and no
//! attempt is made to resist side channels.

pub mod encoding;
pub mod error;
pub mod harness;
pub mod he;
pub mod math;
pub mod model;
pub mod pedersen;
pub mod protocol;
pub mod wire;
pub mod zkp;

pub use error::{Error, Result};
