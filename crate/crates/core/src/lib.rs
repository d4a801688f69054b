pub mod assemble;
pub mod config;
pub mod curie;
pub mod engine;
pub mod executor;
pub mod metakg;
pub mod planner;
pub mod query;
pub mod registry;
pub mod resolve;
pub mod score;
pub mod simnet;

pub use curie::Curie;
