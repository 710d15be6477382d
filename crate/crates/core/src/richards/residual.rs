//! The Richards operator written as a function of `f` and its partials.

use super::sink::{sink_with_gradient, EnvironmentModel, SinkParams};
use super::soil::{Constitutive, SoilProfile};
use crate::error::Result;

/// `omega = (f, df/dz, df/dt, d2f/dz2)` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateDerivatives {
    pub f: f64,
    pub df_dz: f64,
    pub df_dt: f64,
    pub d2f_dz2: f64,
}

impl StateDerivatives {
    pub fn new(f: f64, df_dz: f64, df_dt: f64, d2f_dz2: f64) -> Self {
        Self {
            f,
            df_dz,
            df_dt,
            d2f_dz2,
        }
    }
}

/// The theta-free pieces of the residual at one point: `G = base + S`, where
/// `S = intensity * root_density(depth)` depends on theta.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualParts {
    pub base: f64,
    pub h: f64,
    /// `alpha(h, A(t)) T_p(t)`.
    pub intensity: f64,
}

/// Residual without the sink: `df/dt - [k_z h_z + k h_zz + k_z]` with all
/// spatial derivatives expanded by the chain rule in `f`.
pub fn residual_parts(
    omega: &StateDerivatives,
    z: f64,
    t: f64,
    profile: &SoilProfile,
    env: &EnvironmentModel,
) -> Result<ResidualParts> {
    let soil = profile.layer_at(z.abs())?;
    let c = Constitutive::at(omega.f, soil)?;
    let fz = omega.df_dz;
    let k_z = c.dk_df * fz;
    let h_z = c.dh_df * fz;
    let h_zz = c.d2h_df2 * fz * fz + c.dh_df * omega.d2f_dz2;
    let flux_div = k_z * h_z + c.k * h_zz + k_z;
    Ok(ResidualParts {
        base: omega.df_dt - flux_div,
        h: c.h,
        intensity: env.uptake_intensity(c.h, t),
    })
}

/// `G((z, t), omega; theta)`; zero when `omega` satisfies the PDE at `(z, t)`.
pub fn richards_residual(
    omega: &StateDerivatives,
    z: f64,
    t: f64,
    theta: &SinkParams,
    profile: &SoilProfile,
    env: &EnvironmentModel,
) -> Result<f64> {
    let parts = residual_parts(omega, z, t, profile, env)?;
    env.rooting_depth(theta, t)?;
    let (s, _) = sink_with_gradient(parts.intensity, z, env.root_fraction(t), theta);
    Ok(parts.base + s)
}
