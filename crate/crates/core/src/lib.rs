// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Frequency estimation under local differential privacy with shuffle
//! amplification.
//!
//! The crate is organised bottom-up:
//!
//! * [`mechanisms`]: local randomizers (GRR, SOLH, unary encodings) and their
//!   unbiased aggregators.
//! * [`amplification`]: closed-form amplification bounds, variances and the
//!   parameter planner.
//! * [`crypto`]: additive secret sharing, additively homomorphic encryption
//!   and onion encryption.
//! * [`shuffle`]: the multi-party oblivious shuffle and a sequential baseline.
//! * [`protocol`]: the end-to-end protocol with fake reports, adversary views
//!   and audit helpers.
//! * [`treehist`]: heavy-hitter discovery over large domains.
//!
//! All randomness flows from caller-provided RNGs. [`rng`] derives
//! independent, reproducible streams from a single master seed.

pub mod amplification;
pub mod crypto;
pub mod error;
pub mod mechanisms;
pub mod protocol;
pub mod rng;
pub mod shuffle;
pub mod treehist;

pub use amplification::{AmplificationParams, PlanResult, PlanTargets, VarianceEstimate};
pub use crypto::{Ahe, IdentityAhe, PaillierPublicKey, PaillierSecretKey, Ring};
pub use error::{Error, Result};
pub use mechanisms::{
    choose_mechanism, BitVector, FrequencyVector, GrrConfig, Mechanism, MechanismTag, Report,
    SolhConfig, UeConfig,
};
pub use protocol::{peos_run, AdversaryModel, PeosConfig, PeosOutput, Transcript};
pub use shuffle::{PartyId, ShuffleConfig};
pub use treehist::{treehist_run, TreeHistConfig, TreeHistMode};
