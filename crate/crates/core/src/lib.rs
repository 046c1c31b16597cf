//! Core of a stage-conditioned simulator for caregiver conversations with a
//! person living with dementia during activities of daily living.
//!
//! The pieces compose bottom-up: a validated [`scenario::ScenarioConfig`]
//! selects a [`task_plan::TaskPlan`]; [`prompt`] renders patient and
//! suggestion prompts; [`gateway`] calls the model; [`session::Engine`]
//! drives the rate-then-respond turn loop and writes every step to a
//! [`store::Store`]; [`export`] and [`analysis`] read the log back.

pub mod analysis;
pub mod export;
pub mod gateway;
pub mod prompt;
pub mod scenario;
pub mod session;
pub mod store;
pub mod strategy;
pub mod task_plan;
pub mod utterance;
