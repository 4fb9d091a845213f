//! Dataset IO, pipeline stages and the command-line front end for
//! `emofuse-core`.

pub mod dataio;
pub mod pipeline;
pub mod report;
pub mod synth;
