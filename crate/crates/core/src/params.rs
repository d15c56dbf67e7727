//! Physical and system-level parameters shared by every stage of the
//! pipeline, plus the dB/dBm unit conversions they depend on.

use crate::error::{Error, Result};

/// Reference distance for the path loss model, in meters. Link distances
/// below this are outside the model's validity range, so layout generation
/// enforces it as a floor.
pub const REF_DISTANCE_M: f64 = 1.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Peak boresight gain of the directional pattern with rolloff exponent `p`.
/// The constant is fixed by requiring the pattern to radiate the same total
/// power as an isotropic element.
pub fn peak_gain(directivity: u32) -> f64 {
    2.0 * (2.0 * f64::from(directivity) + 1.0)
}

/// Everything needed to describe one network instance: geometry bounds,
/// radio constants, and the antenna pattern shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Number of access points, `L`.
    pub num_aps: usize,
    /// Number of users, `K`. Must not exceed `num_aps`.
    pub num_users: usize,
    /// Per-AP transmit power in dBm.
    pub tx_power_dbm: f64,
    /// Noise power in dBm.
    pub noise_dbm: f64,
    /// Path gain at the reference distance, in dB.
    pub ref_gain_db: f64,
    /// Path loss exponent.
    pub pathloss_exp: f64,
    /// Rician K-factor (linear).
    pub rician_k: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Pattern rolloff exponent `p`; the gain falls off as cos^(2p).
    pub directivity: u32,
    /// Sharpness of the softplus surrogate for the pattern cutoff.
    pub smoothness: f64,
    /// Side length of the square deployment area, in meters.
    pub area_side: f64,
    /// AP height above the user plane origin, in meters.
    pub ap_height: f64,
    /// User terminal height, in meters.
    pub user_height: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            num_aps: 30,
            num_users: 5,
            tx_power_dbm: 24.0,
            noise_dbm: -94.0,
            ref_gain_db: -40.0,
            pathloss_exp: 3.2,
            rician_k: 7.94,
            wavelength: 0.125,
            directivity: 2,
            smoothness: 20.0,
            area_side: 300.0,
            ap_height: 10.0,
            user_height: 1.5,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") })
            }
        }
        if self.num_aps == 0 {
            return Err(Error::InvalidParameter { name: "num_aps", reason: "must be at least 1".into() });
        }
        if self.num_users == 0 {
            return Err(Error::InvalidParameter { name: "num_users", reason: "must be at least 1".into() });
        }
        if self.num_users > self.num_aps {
            return Err(Error::InvalidParameter {
                name: "num_users",
                reason: format!("must not exceed num_aps ({} > {})", self.num_users, self.num_aps),
            });
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::InvalidParameter { name: "tx_power_dbm", reason: "must be finite".into() });
        }
        if !self.noise_dbm.is_finite() {
            return Err(Error::InvalidParameter { name: "noise_dbm", reason: "must be finite".into() });
        }
        if !self.ref_gain_db.is_finite() {
            return Err(Error::InvalidParameter { name: "ref_gain_db", reason: "must be finite".into() });
        }
        positive("pathloss_exp", self.pathloss_exp)?;
        if !self.rician_k.is_finite() || self.rician_k < 0.0 {
            return Err(Error::InvalidParameter { name: "rician_k", reason: format!("must be >= 0, got {}", self.rician_k) });
        }
        positive("wavelength", self.wavelength)?;
        positive("smoothness", self.smoothness)?;
        positive("area_side", self.area_side)?;
        positive("ap_height", self.ap_height)?;
        if !self.user_height.is_finite() || self.user_height < 0.0 {
            return Err(Error::InvalidParameter { name: "user_height", reason: format!("must be >= 0, got {}", self.user_height) });
        }
        Ok(())
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn ref_gain_linear(&self) -> f64 {
        db_to_linear(self.ref_gain_db)
    }

    pub fn peak_gain(&self) -> f64 {
        peak_gain(self.directivity)
    }
}
