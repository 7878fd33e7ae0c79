pub mod agenda;
pub mod classify;
pub mod dialog;
pub mod encoder;
pub mod listening;
pub mod metrics;
pub mod pipeline;
pub mod sidetalk;
pub mod sim;
pub mod text;
pub mod transcript;
