//! Noise-limited link model: 3GPP-style path loss, Shannon rate, and the
//! size-proportional spectrum split shared by every transmitting task.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances below this are clamped before evaluating path loss (km).
pub const MIN_DISTANCE_KM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Antenna height (m).
    pub antenna_height_m: f64,
    /// Carrier frequency (MHz).
    pub carrier_mhz: f64,
    /// Transmit power (W).
    pub tx_power_w: f64,
    /// Noise power (W).
    pub noise_w: f64,
    /// System bandwidth shared by all concurrent transfers (Hz).
    pub bandwidth_hz: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            antenna_height_m: 1.5,
            carrier_mhz: 2800.0,
            tx_power_w: 1.0,
            noise_w: 5e-13,
            bandwidth_hz: 5e6,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("channel.antenna_height_m", self.antenna_height_m),
            ("channel.carrier_mhz", self.carrier_mhz),
            ("channel.tx_power_w", self.tx_power_w),
            ("channel.noise_w", self.noise_w),
            ("channel.bandwidth_hz", self.bandwidth_hz),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::error::invalid(name, format!("{v} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Path loss in dB at distance `d_km`.
pub fn path_loss(d_km: f64, params: &ChannelParams) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::Domain(d_km));
    }
    let h = params.antenna_height_m;
    Ok(40.0 * (1.0 - 4e-3 * h) * d_km.log10() - 18.0 * h.log10()
        + 21.0 * params.carrier_mhz.log10()
        + 80.0)
}

/// Received SNR (linear) at distance `d_km`.
pub fn snr(d_km: f64, params: &ChannelParams) -> Result<f64> {
    let loss_db = path_loss(d_km, params)?;
    Ok(params.tx_power_w * 10f64.powf(-loss_db / 10.0) / params.noise_w)
}

/// Achievable rate in bit/s over `bandwidth_hz` at distance `d_km`.
pub fn link_rate(d_km: f64, bandwidth_hz: f64, params: &ChannelParams) -> Result<f64> {
    let snr = snr(d_km, params)?;
    Ok(bandwidth_hz * (1.0 + snr).log2())
}

/// Like [`link_rate`] but takes metres and applies the 1 m clamp.
pub fn hop_rate(distance_m: f64, bandwidth_hz: f64, params: &ChannelParams) -> f64 {
    let d_km = (distance_m / 1000.0).max(MIN_DISTANCE_KM);
    // clamped distance is always > 0
    link_rate(d_km, bandwidth_hz, params).unwrap_or(0.0)
}

/// Per-task bandwidth shares, in the order of the input.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkAllocation {
    shares: Vec<(u64, f64)>,
}

impl LinkAllocation {
    pub fn get(&self, task_id: u64) -> Option<f64> {
        self.shares
            .iter()
            .find(|(id, _)| *id == task_id)
            .map(|&(_, b)| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.shares.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.shares.iter().map(|&(_, b)| b).sum()
    }
}

/// Splits `total_hz` among active transfers in proportion to their sizes.
pub fn allocate_bandwidth(active: &[(u64, f64)], total_hz: f64) -> LinkAllocation {
    let sum: f64 = active.iter().map(|&(_, w)| w).sum();
    let shares = active
        .iter()
        .map(|&(id, w)| (id, if sum > 0.0 { total_hz * (w / sum) } else { 0.0 }))
        .collect();
    LinkAllocation { shares }
}
