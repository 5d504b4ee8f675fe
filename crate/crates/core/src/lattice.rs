//! One-dimensional tight-binding waveguides and their analytic band properties.
//!
//! A chain with hopping `xi` and on-site energy `band_center` has the band
//! `omega(k) = band_center + 2 xi cos k`, `k` in `[-pi, pi]`. Frequencies are
//! considered propagating only when they lie strictly inside the band, i.e.
//! `|omega - band_center| <= 2 xi (1 - BAND_EDGE_MARGIN)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance from a band edge below which a frequency counts as
/// being on the edge (the density of states diverges there).
pub const BAND_EDGE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum Boundary {
    #[default]
    HardWall,
    /// Imaginary on-site potential `-i V(x)` with a quartic ramp over `width`
    /// sites at both ends of the chain. `strength` is the peak of `V`; when
    /// absent, [`DEFAULT_ABSORBER_STRENGTH`] times the hopping is used.
    Absorbing {
        width: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strength: Option<f64>,
    },
}


/// Peak absorber strength in units of the chain hopping.
pub const DEFAULT_ABSORBER_STRENGTH: f64 = 1.0;

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn is_zero_i64(x: &i64) -> bool {
    *x == 0
}

fn is_hard_wall(b: &Boundary) -> bool {
    *b == Boundary::HardWall
}

/// A finite tight-binding waveguide.
///
/// Storage index `i` holds the logical site `origin + i`, so negative
/// logical coordinates are available by choosing a negative origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub id: String,
    pub num_sites: usize,
    /// Logical coordinate of the first stored site.
    #[serde(default, skip_serializing_if = "is_zero_i64")]
    pub origin: i64,
    pub hopping: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub band_center: f64,
    #[serde(default, skip_serializing_if = "is_hard_wall")]
    pub boundary: Boundary,
}

impl ChainSpec {
    /// Hard-wall chain centered on logical site 0.
    pub fn new(id: impl Into<String>, num_sites: usize, hopping: f64) -> Self {
        ChainSpec {
            id: id.into(),
            num_sites,
            origin: -((num_sites / 2) as i64),
            hopping,
            band_center: 0.0,
            boundary: Boundary::HardWall,
        }
    }

    pub fn with_origin(mut self, origin: i64) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_band_center(mut self, center: f64) -> Self {
        self.band_center = center;
        self
    }

    pub fn with_absorbing(mut self, width: usize, strength: Option<f64>) -> Self {
        self.boundary = Boundary::Absorbing { width, strength };
        self
    }

    pub fn validate(&self) -> Result<()> {
        let path = format!("chains[{}]", self.id);
        if self.id.is_empty() {
            return Err(Error::config("chains[].id", "waveguide id must not be empty"));
        }
        if self.num_sites < 3 {
            return Err(Error::config(
                format!("{path}.num_sites"),
                format!("need at least 3 sites, got {}", self.num_sites),
            ));
        }
        if !(self.hopping.is_finite() && self.hopping > 0.0) {
            return Err(Error::config(
                format!("{path}.hopping"),
                format!("hopping must be positive and finite, got {}", self.hopping),
            ));
        }
        if !self.band_center.is_finite() {
            return Err(Error::config(format!("{path}.band_center"), "must be finite"));
        }
        if let Boundary::Absorbing { width, strength } = self.boundary {
            if width == 0 || 4 * width >= self.num_sites {
                return Err(Error::config(
                    format!("{path}.boundary.absorbing.width"),
                    format!(
                        "absorbing width must be in 1..{} (a quarter of the chain), got {width}",
                        self.num_sites.div_ceil(4)
                    ),
                ));
            }
            if let Some(s) = strength {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::config(
                        format!("{path}.boundary.absorbing.strength"),
                        "absorber strength must be positive",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Lowest and highest frequency of the band.
    pub fn band(&self) -> (f64, f64) {
        let half = 2.0 * self.hopping;
        (self.band_center - half, self.band_center + half)
    }

    pub fn in_band(&self, omega: f64) -> bool {
        (omega - self.band_center).abs() <= 2.0 * self.hopping * (1.0 - BAND_EDGE_MARGIN)
    }

    fn require_in_band(&self, omega: f64) -> Result<f64> {
        if !omega.is_finite() || !self.in_band(omega) {
            let (lower, upper) = self.band();
            return Err(Error::OutOfBand {
                waveguide: self.id.clone(),
                frequency: omega,
                lower,
                upper,
            });
        }
        Ok((omega - self.band_center) / (2.0 * self.hopping))
    }

    pub fn dispersion(&self, k: f64) -> f64 {
        self.band_center + 2.0 * self.hopping * k.cos()
    }

    /// Wavevector in `(0, pi)` carrying frequency `omega`.
    pub fn wavevector_of(&self, omega: f64) -> Result<f64> {
        let x = self.require_in_band(omega)?;
        Ok(x.acos())
    }

    /// Magnitude of the group velocity in sites per unit time.
    pub fn group_velocity(&self, omega: f64) -> Result<f64> {
        let x = self.require_in_band(omega)?;
        Ok(2.0 * self.hopping * (1.0 - x * x).sqrt())
    }

    /// Density of states per site, normalized to one over the band.
    pub fn density_of_states(&self, omega: f64) -> Result<f64> {
        let x = self.require_in_band(omega)?;
        Ok(1.0 / (2.0 * PI * self.hopping * (1.0 - x * x).sqrt()))
    }

    /// Infinite-chain retarded Green's function `<n + d| (omega + i0 - H)^-1 |n>`.
    ///
    /// Outgoing waves move away from the source, which for this dispersion
    /// means the phase `exp(-i k |d|)` with `k` in `(0, pi)`.
    pub fn retarded_greens_function(&self, omega: f64, separation: i64) -> Result<Complex64> {
        let k = self.wavevector_of(omega)?;
        let denom = 2.0 * self.hopping * k.sin();
        let phase = Complex64::from_polar(1.0, -k * separation.unsigned_abs() as f64);
        Ok(Complex64::new(0.0, -1.0) * phase / denom)
    }

    /// Logical coordinate of the last stored site.
    pub fn last_site(&self) -> i64 {
        self.origin + self.num_sites as i64 - 1
    }

    pub fn contains_site(&self, site: i64) -> bool {
        site >= self.origin && site <= self.last_site()
    }

    pub fn storage_index(&self, site: i64) -> Option<usize> {
        self.contains_site(site).then(|| (site - self.origin) as usize)
    }

    pub fn logical_site(&self, index: usize) -> i64 {
        self.origin + index as i64
    }

    pub fn absorber_width(&self) -> usize {
        match self.boundary {
            Boundary::HardWall => 0,
            Boundary::Absorbing { width, .. } => width,
        }
    }

    pub fn is_absorbing(&self) -> bool {
        matches!(self.boundary, Boundary::Absorbing { .. })
    }

    /// Absorbing potential `V >= 0` at a storage index (the on-site term is `-i V`).
    pub fn absorbing_potential(&self, index: usize) -> f64 {
        let Boundary::Absorbing { width, strength } = self.boundary else {
            return 0.0;
        };
        let peak = strength.unwrap_or(DEFAULT_ABSORBER_STRENGTH * self.hopping);
        let last = self.num_sites - 1;
        let depth = if index < width {
            width - index
        } else if index > last - width {
            index - (last - width)
        } else {
            return 0.0;
        };
        let r = depth as f64 / width as f64;
        peak * r.powi(4)
    }

    /// Sites needed so that nothing launched from a span of `span` sites can
    /// reach a hard wall and return within `t_total` (with a 10% margin).
    pub fn light_cone_sites(&self, t_total: f64, span: u64) -> usize {
        (1.1 * (2.0 * self.hopping * t_total.max(0.0) + span as f64)).ceil() as usize
    }
}
