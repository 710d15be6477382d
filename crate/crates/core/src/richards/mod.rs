//! Soil-water physics for the Richards equation with a root-uptake sink.
//!
//! Coordinates: `z` is elevation relative to the surface (negative below
//! ground, positive up) as used by the solver and the data; the sink and the
//! soil layers work with depth `|z|`.

mod residual;
mod sink;
mod soil;

pub use residual::{richards_residual, residual_parts, ResidualParts, StateDerivatives};
pub use sink::{
    feddes_alpha, root_density, sink, sink_with_gradient, EnvironmentModel, FeddesParams,
    RootGrowth, Series, SinkParams, DEFAULT_TRANSPIRATION, SECONDS_PER_DAY,
};
pub use soil::{
    conductivity_from_head, effective_saturation, head_from_water_content,
    hydraulic_conductivity, specific_capacity, water_content_from_head, Constitutive,
    SoilLayerParams, SoilProfile, HEAD_FLOOR,
};
