//! Rule models for complex event processing: validation, EPL and DRL
//! generation, and a reference engine that runs rules over recorded streams.

pub mod api;
pub mod cli;
pub mod codegen;
pub mod document;
pub mod engine;
pub mod model;
pub mod validator;
