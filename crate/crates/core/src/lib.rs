pub mod config;
pub mod embed;
pub mod family;
pub mod ingest;
pub mod ipc;
pub mod mesh;
pub mod names;
pub mod pairing;
pub mod pipeline;
pub mod ranking;
pub mod refs;
pub mod review;
pub mod synth;
pub mod threshold;
