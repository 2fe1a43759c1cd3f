//! Orchestration protocol: one JSON object per line.
//!
//! The schema is documented in `docs/protocol.md` at the repository root.

pub mod codec;
pub mod message;
pub mod transport;

pub use codec::{decode, encode, encode_line, DecodeError};
pub use message::{
    Body, Capability, GotoEntry, Message, Pose, StatusKind, TaskState, Value, Waypoint,
    PROTOCOL_VERSION,
};
pub use transport::{
    connect, loopback, split, Deduplicator, LineReader, LineWriter, LoopbackEnd, TransportError,
};
