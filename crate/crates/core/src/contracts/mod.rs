//! Native contract implementations hosted by the runtime.

pub mod factory;
pub mod identity;
pub mod registry;
