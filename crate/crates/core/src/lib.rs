//! Intraocular lens kinematics from cataract-surgery mask, detection and
//! phase streams, with the cross-brand statistics built on top of them.

pub mod evalmetrics;
pub mod geometry;
pub mod hookpose;
pub mod ingest;
pub mod kinematics;
pub mod phase;
pub mod pipeline;
pub mod stats;
pub mod synth;
