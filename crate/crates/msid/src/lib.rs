//! Monte Carlo harness and file plumbing behind the `msid` command-line
//! tool. The estimation machinery lives in `msid-core`; this crate adds the
//! case-study scenario drivers, CSV/JSON emission, and schema checks.

pub mod artifacts;
pub mod config;
pub mod csvio;
pub mod mc;
pub mod schema;
