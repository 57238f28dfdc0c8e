pub mod bench;
pub mod checker;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod table;
