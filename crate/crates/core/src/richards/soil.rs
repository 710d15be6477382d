//! van Genuchten retention and conductivity, plus the chain-rule factors that
//! turn derivatives in `f` into derivatives in head and conductivity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Heads below this are reported as this value.
pub const HEAD_FLOOR: f64 = -1e6;

/// Hydraulic constants for one depth interval `(z_lo, z_hi]` (depth positive
/// down, meters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoilLayerParams {
    pub z_lo: f64,
    pub z_hi: f64,
    pub c_r: f64,
    pub c_s: f64,
    pub gamma: f64,
    pub nu: f64,
    pub k_sat: f64,
}

impl SoilLayerParams {
    /// Homogeneous soil used in the simulation study.
    pub fn loam(z_hi: f64) -> Self {
        Self {
            z_lo: 0.0,
            z_hi,
            c_r: 0.156,
            c_s: 0.60,
            gamma: 5.87,
            nu: 0.273,
            k_sat: 6e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.z_lo.is_finite()
            && self.z_hi.is_finite()
            && self.z_lo >= 0.0
            && self.z_hi > self.z_lo
            && (0.0..=1.0).contains(&self.c_r)
            && (0.0..=1.0).contains(&self.c_s)
            && self.c_r < self.c_s
            && self.gamma > 0.0
            && self.nu > 0.0
            && self.nu < 1.0
            && self.k_sat > 0.0
            && self.k_sat.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid soil layer {self:?}")))
        }
    }

    fn n_exp(&self) -> f64 {
        1.0 / (1.0 - self.nu)
    }

    fn delta(&self) -> f64 {
        self.c_s - self.c_r
    }
}

/// Stack of layers partitioning `(0, z_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoilProfile {
    layers: Vec<SoilLayerParams>,
}

impl SoilProfile {
    pub fn new(mut layers: Vec<SoilLayerParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("soil profile has no layers".into()));
        }
        layers.sort_by(|a, b| a.z_lo.total_cmp(&b.z_lo));
        for l in &layers {
            l.validate()?;
        }
        if layers[0].z_lo != 0.0 {
            return Err(Error::InvalidArgument("soil profile must start at depth 0".into()));
        }
        for w in layers.windows(2) {
            if (w[0].z_hi - w[1].z_lo).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "soil layers leave a gap or overlap at depth {}",
                    w[0].z_hi
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn homogeneous(soil: SoilLayerParams) -> Result<Self> {
        Self::new(vec![soil])
    }

    /// The layered profile of the field site; only its top two layers reach
    /// into a 0.3 m column.
    pub fn field_site() -> Self {
        let top = |z_lo, z_hi, k_sat| SoilLayerParams {
            z_lo,
            z_hi,
            c_r: 0.156,
            c_s: 0.600,
            gamma: 5.870,
            nu: 0.273,
            k_sat,
        };
        let deep = |z_lo, z_hi, k_sat| SoilLayerParams {
            z_lo,
            z_hi,
            c_r: 0.001,
            c_s: 0.560,
            gamma: 0.362,
            nu: 0.171,
            k_sat,
        };
        Self::new(vec![
            top(0.0, 0.15, 2.82e-5),
            top(0.15, 0.30, 6.73e-6),
            deep(0.30, 0.46, 1.46e-6),
            deep(0.46, 0.61, 3.50e-7),
            deep(0.61, 0.76, 8.36e-8),
            deep(0.76, 3.00, 2.00e-8),
        ])
        .expect("built-in profile is valid")
    }

    pub fn layers(&self) -> &[SoilLayerParams] {
        &self.layers
    }

    pub fn max_depth(&self) -> f64 {
        self.layers.last().map_or(0.0, |l| l.z_hi)
    }

    /// Layer containing `depth`. A depth on an interface belongs to the
    /// shallower layer; depth 0 belongs to the top layer.
    pub fn layer_at(&self, depth: f64) -> Result<&SoilLayerParams> {
        if !(depth.is_finite() && depth >= 0.0) {
            return Err(Error::OutOfRange {
                what: "depth",
                value: depth,
                lo: 0.0,
                hi: self.max_depth(),
            });
        }
        self.layers
            .iter()
            .find(|l| depth <= l.z_hi + 1e-12)
            .ok_or(Error::OutOfRange {
                what: "depth",
                value: depth,
                lo: 0.0,
                hi: self.max_depth(),
            })
    }
}

pub fn effective_saturation(f: f64, soil: &SoilLayerParams) -> Result<f64> {
    if !(f >= soil.c_r && f <= soil.c_s) {
        return Err(Error::OutOfRange {
            what: "water content",
            value: f,
            lo: soil.c_r,
            hi: soil.c_s,
        });
    }
    Ok((f - soil.c_r) / soil.delta())
}

pub fn water_content_from_head(h: f64, soil: &SoilLayerParams) -> f64 {
    if h >= 0.0 {
        return soil.c_s;
    }
    let u = (soil.gamma * h).abs();
    soil.c_r + soil.delta() * (1.0 + u.powf(soil.n_exp())).powf(-soil.nu)
}

/// `(C^{-1/nu} - 1)`; the recurring factor in the inverse retention curve.
fn inv_factor(c: f64, nu: f64) -> f64 {
    c.powf(-1.0 / nu) - 1.0
}

pub fn head_from_water_content(f: f64, soil: &SoilLayerParams) -> Result<f64> {
    if !(f > soil.c_r && f < soil.c_s) {
        return Err(Error::OutOfRange {
            what: "water content",
            value: f,
            lo: soil.c_r,
            hi: soil.c_s,
        });
    }
    let c = (f - soil.c_r) / soil.delta();
    let h = -inv_factor(c, soil.nu).powf(1.0 - soil.nu) / soil.gamma;
    Ok(h.max(HEAD_FLOOR))
}

pub fn hydraulic_conductivity(c: f64, soil: &SoilLayerParams) -> f64 {
    let c = c.clamp(0.0, 1.0);
    let g = 1.0 - (1.0 - c.powf(1.0 / soil.nu)).powf(soil.nu);
    soil.k_sat * c.sqrt() * g * g
}

pub fn conductivity_from_head(h: f64, soil: &SoilLayerParams) -> f64 {
    let f = water_content_from_head(h, soil);
    hydraulic_conductivity((f - soil.c_r) / soil.delta(), soil)
}

/// `df/dh`; zero on the saturated plateau `h >= 0`.
pub fn specific_capacity(h: f64, soil: &SoilLayerParams) -> f64 {
    if h >= 0.0 {
        return 0.0;
    }
    let n = soil.n_exp();
    let u = (soil.gamma * h).abs();
    let un = u.powf(n);
    soil.delta() * soil.nu * n * soil.gamma * u.powf(n - 1.0) * (1.0 + un).powf(-soil.nu - 1.0)
}

/// Head, conductivity and their `f`-derivatives at one water content.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constitutive {
    pub h: f64,
    pub dh_df: f64,
    pub d2h_df2: f64,
    pub k: f64,
    pub dk_df: f64,
}

impl Constitutive {
    pub fn at(f: f64, soil: &SoilLayerParams) -> Result<Self> {
        let h = head_from_water_content(f, soil)?;
        let nu = soil.nu;
        let d = soil.delta();
        let c = (f - soil.c_r) / d;
        let x = inv_factor(c, nu);
        let a = (1.0 - nu) / (soil.gamma * nu);
        let dh_dc = a * c.powf(-(1.0 + nu) / nu) * x.powf(-nu);
        let d2h_dc2 = a
            * (-(1.0 / nu + 1.0) * c.powf(-(1.0 + 2.0 * nu) / nu) * x.powf(-nu)
                + c.powf(-2.0 * (nu + 1.0) / nu) * x.powf(-nu - 1.0));

        let w = 1.0 - c.powf(1.0 / nu);
        let g = 1.0 - w.powf(nu);
        let k = soil.k_sat * c.sqrt() * g * g;
        let dk_dc = soil.k_sat
            * (2.0 * c.sqrt() * g * w.powf(nu - 1.0) * c.powf(1.0 / nu - 1.0)
                + 0.5 * g * g / c.sqrt());
        Ok(Self {
            h,
            dh_df: dh_dc / d,
            d2h_df2: d2h_dc2 / (d * d),
            k,
            dk_df: dk_dc / d,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soil() -> SoilLayerParams {
        SoilLayerParams::loam(0.3)
    }

    #[test]
    fn saturation_endpoints_and_midpoint() {
        let s = soil();
        assert_eq!(effective_saturation(0.60, &s).unwrap(), 1.0);
        assert_eq!(effective_saturation(0.156, &s).unwrap(), 0.0);
        assert!((effective_saturation(0.378, &s).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            effective_saturation(0.7, &s),
            Err(Error::OutOfRange { value, .. }) if value == 0.7
        ));
    }

    #[test]
    fn retention_limits() {
        let s = soil();
        assert_eq!(water_content_from_head(0.0, &s), s.c_s);
        assert!((water_content_from_head(-1e-9, &s) - s.c_s).abs() < 1e-9);
        // far tail: S_e ~ (gamma |h|)^(-nu / (1 - nu))
        let h = -1e9;
        let tail = (s.gamma * -h).powf(-s.nu / (1.0 - s.nu));
        let se = (water_content_from_head(h, &s) - s.c_r) / (s.c_s - s.c_r);
        assert!((se / tail - 1.0).abs() < 1e-6);
        assert!(head_from_water_content(s.c_s - 1e-12, &s).unwrap() > -1e-6);
        assert_eq!(head_from_water_content(s.c_r + 1e-14, &s).unwrap(), HEAD_FLOOR);
        assert!(head_from_water_content(s.c_s, &s).is_err());
    }

    #[test]
    fn conductivity_endpoints() {
        let s = soil();
        assert_eq!(hydraulic_conductivity(1.0, &s), s.k_sat);
        assert_eq!(hydraulic_conductivity(0.0, &s), 0.0);
    }

    #[test]
    fn capacity_vanishes_when_saturated() {
        let s = soil();
        assert_eq!(specific_capacity(0.0, &s), 0.0);
        assert_eq!(specific_capacity(0.5, &s), 0.0);
        assert!(specific_capacity(-1e12, &s) < 1e-12);
    }

    #[test]
    fn layer_lookup_prefers_shallower_layer() {
        let p = SoilProfile::field_site();
        assert_eq!(p.layer_at(0.0).unwrap().k_sat, 2.82e-5);
        assert_eq!(p.layer_at(0.15).unwrap().k_sat, 2.82e-5);
        assert_eq!(p.layer_at(0.150001).unwrap().k_sat, 6.73e-6);
        assert!(p.layer_at(3.5).is_err());
    }

    #[test]
    fn gapped_profile_rejected() {
        let mut a = soil();
        a.z_hi = 0.1;
        let mut b = soil();
        b.z_lo = 0.2;
        assert!(SoilProfile::new(vec![a, b]).is_err());
    }
}
