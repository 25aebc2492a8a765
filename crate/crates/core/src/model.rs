//! Geometry and channel model of a movable linear array sensing a point
//! target in its radiating near field.
//!
//! All lengths share the unit of `wavelength`; the defaults use
//! `wavelength = 1`, so every length is expressed in wavelengths.

use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack for boundary and spacing comparisons, in wavelengths.
pub const POSITION_TOL: f64 = 1e-12;

/// Physical and system parameters shared by every computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig {
    pub wavelength: f64,
    pub num_antennas: usize,
    /// Length `A` of the movement segment.
    pub segment_length: f64,
    /// Minimum inter-antenna spacing `d`.
    pub min_spacing: f64,
    pub num_snapshots: usize,
    pub transmit_power: f64,
    pub noise_power: f64,
    /// Magnitude of the complex channel gain.
    pub channel_gain: f64,
}

impl Default for SensingConfig {
    /// 16 antennas on a 10-wavelength segment, half-wavelength spacing,
    /// one snapshot, 20 dB received SNR.
    fn default() -> Self {
        Self {
            wavelength: 1.0,
            num_antennas: 16,
            segment_length: 10.0,
            min_spacing: 0.5,
            num_snapshots: 1,
            transmit_power: 1.0,
            noise_power: 0.01,
            channel_gain: 1.0,
        }
    }
}

impl SensingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return bad(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            ));
        }
        if self.num_antennas < 2 {
            return bad(format!(
                "need at least 2 antennas, got {}",
                self.num_antennas
            ));
        }
        if !(self.segment_length > 0.0 && self.segment_length.is_finite()) {
            return bad(format!(
                "segment length must be positive, got {}",
                self.segment_length
            ));
        }
        if !(self.min_spacing > 0.0 && self.min_spacing.is_finite()) {
            return bad(format!(
                "minimum spacing must be positive, got {}",
                self.min_spacing
            ));
        }
        let needed = (self.num_antennas - 1) as f64 * self.min_spacing;
        if needed > self.segment_length + POSITION_TOL {
            return Err(Error::InfeasibleGeometry {
                n: self.num_antennas,
                spacing: self.min_spacing,
                needed,
                segment: self.segment_length,
            });
        }
        if self.num_snapshots < 1 {
            return bad("need at least one snapshot".into());
        }
        for (name, v) in [
            ("transmit power", self.transmit_power),
            ("noise power", self.noise_power),
            ("channel gain", self.channel_gain),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    /// Received SNR `P|β|²/σ²` (linear).
    pub fn snr(&self) -> f64 {
        self.transmit_power * self.channel_gain * self.channel_gain / self.noise_power
    }

    /// Returns a copy whose noise power realizes the given received SNR.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let snr = 10f64.powf(snr_db / 10.0);
        self.noise_power = self.transmit_power * self.channel_gain * self.channel_gain / snr;
        self
    }

    /// The common CRB scale `σ²λ² / (8π² T P N |β|²)`.
    pub fn kappa(&self) -> f64 {
        self.noise_power * self.wavelength * self.wavelength
            / (8.0
                * PI
                * PI
                * self.num_snapshots as f64
                * self.transmit_power
                * self.num_antennas as f64
                * self.channel_gain
                * self.channel_gain)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn fresnel_distance(&self) -> f64 {
        fresnel_distance(self)
    }

    pub fn rayleigh_distance(&self) -> f64 {
        rayleigh_distance(self)
    }
}

/// Inner boundary of the radiating near field, `(A/2)(A/λ)^{1/3}`.
pub fn fresnel_distance(cfg: &SensingConfig) -> f64 {
    0.5 * cfg.segment_length * (cfg.segment_length / cfg.wavelength).cbrt()
}

/// Outer boundary of the near field, `2A²/λ`.
pub fn rayleigh_distance(cfg: &SensingConfig) -> f64 {
    2.0 * cfg.segment_length * cfg.segment_length / cfg.wavelength
}

/// Sorted antenna positions satisfying the segment and spacing constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Apv(Vec<f64>);

impl Apv {
    /// Validates `positions` against `[0, segment]` and a minimum spacing.
    pub fn new(positions: Vec<f64>, segment: f64, min_spacing: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidApv("no positions".into()));
        }
        if let Some(p) = positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidApv(format!("non-finite position {p}")));
        }
        let first = positions[0];
        let last = positions[positions.len() - 1];
        if first < -POSITION_TOL || last > segment + POSITION_TOL {
            return Err(Error::InvalidApv(format!(
                "positions [{first}, {last}] leave the segment [0, {segment}]"
            )));
        }
        for (i, w) in positions.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::InvalidApv(format!(
                    "positions not strictly ascending at index {}",
                    i + 1
                )));
            }
            if w[1] - w[0] < min_spacing - POSITION_TOL {
                return Err(Error::InvalidApv(format!(
                    "spacing {} between antennas {} and {} is below {min_spacing}",
                    w[1] - w[0],
                    i,
                    i + 1
                )));
            }
        }
        Ok(Self(positions))
    }

    /// Validates against the segment, spacing and antenna count of `cfg`.
    pub fn for_config(positions: Vec<f64>, cfg: &SensingConfig) -> Result<Self> {
        if positions.len() != cfg.num_antennas {
            return Err(Error::InvalidApv(format!(
                "expected {} positions, got {}",
                cfg.num_antennas,
                positions.len()
            )));
        }
        Self::new(positions, cfg.segment_length, cfg.min_spacing)
    }

    /// Sorts `positions` first, then validates.
    pub fn from_unsorted(mut positions: Vec<f64>, segment: f64, min_spacing: f64) -> Result<Self> {
        positions.sort_by(f64::total_cmp);
        Self::new(positions, segment, min_spacing)
    }

    pub fn positions(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Effective aperture `x_N - x_1`.
    pub fn aperture(&self) -> f64 {
        self.0[self.0.len() - 1] - self.0[0]
    }
}

impl Deref for Apv {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Target parameters: spatial AoA `u = cos θ` and range `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetParams {
    pub u: f64,
    pub r: f64,
}

impl TargetParams {
    pub fn new(u: f64, r: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::InvalidTarget(format!("u = {u} outside [0, 1)")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidTarget(format!(
                "range must be positive, got {r}"
            )));
        }
        Ok(Self { u, r })
    }

    /// Physical angle in radians.
    pub fn theta(&self) -> f64 {
        self.u.acos()
    }

    /// Checks that the range lies between the Fresnel and Rayleigh distances.
    pub fn check_near_field(&self, cfg: &SensingConfig) -> Result<()> {
        let (lo, hi) = (fresnel_distance(cfg), rayleigh_distance(cfg));
        if self.r < lo - POSITION_TOL || self.r > hi + POSITION_TOL {
            return Err(Error::InvalidTarget(format!(
                "range {} outside the near-field region [{lo}, {hi}]",
                self.r
            )));
        }
        Ok(())
    }
}

/// Exact antenna-to-target distance `sqrt(r² - 2 r x u + x²)`.
pub fn exact_distance(x_n: f64, eta: &TargetParams) -> f64 {
    (eta.r * eta.r - 2.0 * eta.r * x_n * eta.u + x_n * x_n).sqrt()
}

/// Second-order (Fresnel) expansion of [`exact_distance`].
pub fn fresnel_approx_distance(x_n: f64, eta: &TargetParams) -> f64 {
    eta.r - x_n * eta.u + x_n * x_n * (1.0 - eta.u * eta.u) / (2.0 * eta.r)
}

/// Phase of steering entry `n`: `(2π/λ)(x u - x²(1-u²)/(2r))`.
#[inline]
pub fn steering_phase(x_n: f64, u: f64, r: f64, wavenumber: f64) -> f64 {
    wavenumber * (x_n * u - x_n * x_n * (1.0 - u * u) / (2.0 * r))
}

/// Unit-modulus near-field steering vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(Vec<Complex64>);

impl SteeringVector {
    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// `αᴴα`.
    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }
}

impl Deref for SteeringVector {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

pub fn steering_vector(x: &[f64], eta: &TargetParams, cfg: &SensingConfig) -> SteeringVector {
    let k = cfg.wavenumber();
    SteeringVector(
        x.iter()
            .map(|&xn| Complex64::from_polar(1.0, steering_phase(xn, eta.u, eta.r, k)))
            .collect(),
    )
}

/// Complex channel gain `|β| exp(-j 2π r / λ)`.
pub fn channel_gain(eta: &TargetParams, cfg: &SensingConfig) -> Complex64 {
    Complex64::from_polar(cfg.channel_gain, -cfg.wavenumber() * eta.r)
}

/// Channel vector `h = β α`.
pub fn channel_vector(x: &[f64], eta: &TargetParams, cfg: &SensingConfig) -> Vec<Complex64> {
    let beta = channel_gain(eta, cfg);
    steering_vector(x, eta, cfg)
        .iter()
        .map(|a| beta * a)
        .collect()
}
