//! Deterministic grid-world navigation with a two-speed control stack: a
//! fast low-level policy that steps the agent every tick and a slow
//! frontier planner consulted every fixed number of ticks, with its reply
//! applied after a configurable logical latency.
//!
//! Module map:
//! - [`world`]: grid, actions, episode rules, sensing, scenario files.
//! - [`mapping`]: accumulated belief map and frontier clustering.
//! - [`planner`]: exact-cost A*, waypoint interpolation, geodesic fields.
//! - [`views`]: egocentric patch rendering, embeddings, similarity pruning.
//! - [`policy`]: fast/slow policy interfaces, the scripted fast policy, the
//!   geodesic oracle, and the wire-protocol client.
//! - [`scheduler`]: the episode loop coordinating both systems.
//! - [`spatial_loss`]: spatially-regularized action loss and its gradient.
//! - [`metrics`]: navigation metric suite and report rendering.
//! - [`trajectory`]: episode logs as newline-delimited JSON.
//! - [`export`]: PPM and SVG renderers, atomic file writes.
//! - [`scenario_gen`]: seeded maze generation.
//!
//! Suite runs fan out across threads when the `parallel` feature (on by
//! default) is enabled; disabling it degrades every entry point to
//! sequential execution with identical results.

pub mod export;
pub mod mapping;
pub mod metrics;
pub mod planner;
pub mod policy;
pub mod scenario_gen;
pub mod scheduler;
pub mod spatial_loss;
pub mod trajectory;
pub mod views;
pub mod world;
