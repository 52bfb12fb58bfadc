//! Deterministic discrete-event simulator of an intercontinental grid testbed.

pub mod broker;
pub mod datagrid;
pub mod digest;
pub mod fabric;
pub mod grid;
pub mod ids;
pub mod infosys;
pub mod jdl;
pub mod parallel;
pub mod production;
pub mod simcore;
pub mod time;
pub mod topology;
pub mod vomgmt;

pub use time::SimTime;
