//! Config-driven experiment driver for nonlocal-core: parse a strict
//! `key = value` config, execute one command, emit CSV plus named checks.

pub mod config;
pub mod run;
pub mod table;
