//! Hybrid channel-hopping rendezvous for cognitive-radio networks.
//!
//! A node hops over licensed channels `1..=N` following a channel-hopping
//! (CH) sequence. Sequence-based protocols guarantee a bounded
//! time-to-rendezvous but meet slowly on average; random hopping meets fast
//! on average but has no worst-case bound. This crate interleaves the two:
//! a neighbor-discovery wake-up schedule decides, slot by slot, whether a
//! node follows its base sequence (awake) or hops at random (asleep).
//!
//! Layout:
//!
//! - [`channel`], [`sequence`], [`rendezvous`], [`dump`]: slot/channel
//!   types, the sequence abstraction and pairwise rendezvous detection.
//! - [`protocols`]: random CH, CRSEQ, Jump-Stay and a modular baseline.
//! - [`wakeup`]: wake-up schedules, rotations and discovery verification.
//! - [`interleave`]: channel padding and hybrid sequence generation.
//! - [`metrics`]: MTTR, ATTR and rendezvous diversity.
//! - [`pumodel`], [`simulator`], [`config`]: primary-user traffic and the
//!   sweep harness behind the `hybridch` binary.

pub mod channel;
pub mod config;
pub mod dump;
pub mod interleave;
pub mod metrics;
pub mod protocols;
pub mod pumodel;
pub mod rendezvous;
pub mod rng;
pub mod sequence;
pub mod simulator;
pub mod wakeup;

pub use channel::{ChannelId, ChannelSet, ClockDrift};
pub use interleave::{pad_channels, AliasPolicy, HybridProtocol, PaddedChannelSet};
pub use metrics::{MetricReport, Ttr};
pub use protocols::{detect_period, NodeId, ProtocolKind};
pub use rendezvous::{first_rendezvous, rendezvous_slots, RendezvousSlotSet};
pub use sequence::{ChSequence, Hop, HopKind, RandomPolicy, SequenceKind};
pub use wakeup::{generate_schedule, verify_discovery, OverlapCertificate, WakeUpSchedule};
