//! Detects cryptographic API use in decompiled Android sources (Java, Kotlin,
//! smali), labels each use for post-quantum safety, aggregates corpus tables,
//! and plans and validates migrations away from legacy primitives.

pub mod classify;
pub mod dataflow;
pub mod gateway;
pub mod lexer;
pub mod migrate;
pub mod model;
pub mod patch;
pub mod pipeline;
pub mod report;
pub mod ruleset;
pub mod scanner;
pub mod smali;
