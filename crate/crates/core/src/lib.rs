pub mod analysis;
pub mod config;
pub mod context;
pub mod dialogue;
pub mod engine;
pub mod intent;
pub mod knowledge;
pub mod metrics;
pub mod nlg;
pub mod responders;
pub mod rng;
pub mod turn;
