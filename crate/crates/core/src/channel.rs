//! Radio models: 3GPP path loss for the macro and small-cell tiers, the
//! LoS/NLoS backhaul model and Shannon-rate evaluation.
//!
//! Unit conventions: distances are kilometres inside the formulas, powers are
//! linear watts, path losses are dB and noise is given as a dBm/Hz density.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ChannelError;
use crate::scalar::Real;

/// How the backhaul path loss treats the LoS/NLoS split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackhaulMode {
    /// LoS-probability weighted mixture of the two linear gains.
    #[default]
    Expected,
    LosOnly,
    NlosOnly,
    /// Draw LoS with probability [`los_probability`] from a supplied generator.
    BernoulliSampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub noise_psd_dbm_per_hz: f64,
    /// Transmit power spectral density in W/Hz.
    pub psd_zeta: f64,
    pub mbs_height_m: f64,
    pub rabs_height_m: f64,
    pub user_height_m: f64,
    pub backhaul_mode: BackhaulMode,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            noise_psd_dbm_per_hz: -174.0,
            psd_zeta: 1e-6,
            mbs_height_m: 25.0,
            rabs_height_m: 5.0,
            user_height_m: 1.5,
            backhaul_mode: BackhaulMode::Expected,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.psd_zeta > 0.0) || !self.psd_zeta.is_finite() {
            return Err(ChannelError::InvalidParam("psd_zeta must be positive"));
        }
        if !self.noise_psd_dbm_per_hz.is_finite() {
            return Err(ChannelError::InvalidParam("noise PSD must be finite"));
        }
        for h in [self.mbs_height_m, self.rabs_height_m, self.user_height_m] {
            if !(h >= 0.0) || !h.is_finite() {
                return Err(ChannelError::InvalidParam("heights must be non-negative"));
            }
        }
        Ok(())
    }

    /// Noise power in watts integrated over `bandwidth_hz`.
    pub fn noise_power_w(&self, bandwidth_hz: f64) -> f64 {
        noise_power_w(self.noise_psd_dbm_per_hz, bandwidth_hz)
    }
}

/// Strictly positive 3D link distance in kilometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<T> {
    distance_km: T,
}

impl<T: Real> LinkGeometry<T> {
    pub fn new(distance_km: T) -> Result<Self, ChannelError> {
        if distance_km > T::zero() && distance_km.is_finite() {
            Ok(Self { distance_km })
        } else {
            Err(ChannelError::NonPositiveDistance(distance_km.to_f64_lossy()))
        }
    }

    /// Distance between two points given in metres, horizontal offset plus
    /// height difference.
    pub fn between_m(dx_m: T, dy_m: T, dh_m: T) -> Result<Self, ChannelError> {
        let d = (dx_m * dx_m + dy_m * dy_m + dh_m * dh_m).sqrt() / T::of(1000.0);
        Self::new(d)
    }

    pub fn km(&self) -> T {
        self.distance_km
    }
}

/// Macro-cell path loss, `128.1 + 37.6 log10(d)`.
pub fn pathloss_macro_db<T: Real>(d: LinkGeometry<T>) -> T {
    T::of(128.1) + T::of(37.6) * d.km().log10()
}

/// Small-cell path loss, `140.7 + 36.7 log10(d)`.
pub fn pathloss_small_db<T: Real>(d: LinkGeometry<T>) -> T {
    T::of(140.7) + T::of(36.7) * d.km().log10()
}

pub fn backhaul_los_pathloss_db<T: Real>(d: LinkGeometry<T>) -> T {
    T::of(100.7) + T::of(23.5) * d.km().log10()
}

pub fn backhaul_nlos_pathloss_db<T: Real>(d: LinkGeometry<T>) -> T {
    T::of(125.2) + T::of(36.3) * d.km().log10()
}

/// `min(0.018/d, 1)(1 - exp(-d/0.072)) + exp(-d/0.072)`.
pub fn los_probability<T: Real>(d: LinkGeometry<T>) -> T {
    let km = d.km();
    let near = (T::of(0.018) / km).min(T::one());
    let decay = (-km / T::of(0.072)).exp();
    near * (T::one() - decay) + decay
}

/// Backhaul path loss under `mode`. Only [`BackhaulMode::BernoulliSampled`]
/// consumes randomness from `rng`.
pub fn backhaul_pathloss_db<T: Real, R: Rng + ?Sized>(
    d: LinkGeometry<T>,
    mode: BackhaulMode,
    rng: &mut R,
) -> T {
    match mode {
        BackhaulMode::LosOnly => backhaul_los_pathloss_db(d),
        BackhaulMode::NlosOnly => backhaul_nlos_pathloss_db(d),
        BackhaulMode::Expected => {
            let p = los_probability(d);
            let gain = p * channel_gain(backhaul_los_pathloss_db(d))
                + (T::one() - p) * channel_gain(backhaul_nlos_pathloss_db(d));
            -T::of(10.0) * gain.log10()
        }
        BackhaulMode::BernoulliSampled => {
            let p = los_probability(d).to_f64_lossy();
            if rng.random::<f64>() < p {
                backhaul_los_pathloss_db(d)
            } else {
                backhaul_nlos_pathloss_db(d)
            }
        }
    }
}

/// Linear gain `10^(-pl/10)`.
pub fn channel_gain<T: Real>(pl_db: T) -> T {
    T::of(10.0).powf(-pl_db / T::of(10.0))
}

/// Thermal noise in watts for a dBm/Hz density over `bandwidth_hz`.
pub fn noise_power_w(noise_psd_dbm_per_hz: f64, bandwidth_hz: f64) -> f64 {
    let dbm = noise_psd_dbm_per_hz + 10.0 * bandwidth_hz.log10();
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Shannon rate `b log2(1 + p h / noise)` in bit/s.
pub fn link_rate_bps<T: Real>(bandwidth_hz: T, power_w: T, gain: T, noise_w: T) -> T {
    bandwidth_hz * (T::one() + power_w * gain / noise_w).log2()
}

/// Capacity of the MBS to RABS wireless backhaul at distance `d`.
pub fn backhaul_capacity_bps<R: Rng + ?Sized>(
    d: LinkGeometry<f64>,
    b_back_hz: f64,
    p_back_w: f64,
    params: &ChannelParams,
    rng: &mut R,
) -> f64 {
    let gain = channel_gain(backhaul_pathloss_db(d, params.backhaul_mode, rng));
    link_rate_bps(b_back_hz, p_back_w, gain, params.noise_power_w(b_back_hz))
}
