//! Path loss times first-order autoregressive Rayleigh fading, and the
//! per-RB Shannon rates derived from it.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::env::UserId;
use crate::error::{Error, Result};
use crate::population::Position;
use crate::rng::{stream, SimRng, Stream};

/// Users closer than this to the access point are clamped to it.
pub const MIN_DISTANCE_M: f64 = 1.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadioParams {
    /// System bandwidth in Hz.
    pub bandwidth: f64,
    /// Transmit power in watts.
    pub tx_power: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    pub n_rbs: usize,
    pub path_loss_exponent: f64,
    pub fading_correlation: f64,
    pub cell_radius: f64,
}

impl RadioParams {
    /// 20 MHz, 23 dBm, -174 dBm/Hz, exponent 3.38, correlation 0.9.
    pub fn defaults(n_rbs: usize, cell_radius: f64) -> Self {
        RadioParams {
            bandwidth: 20e6,
            tx_power: dbm_to_watts(23.0),
            noise_psd: dbm_to_watts(-174.0),
            n_rbs,
            path_loss_exponent: 3.38,
            fading_correlation: 0.9,
            cell_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Domain(format!("radio parameter {what} out of range")));
        if self.bandwidth.is_nan() || self.bandwidth <= 0.0 {
            return bad("bandwidth");
        }
        if self.tx_power.is_nan() || self.tx_power <= 0.0 {
            return bad("tx_power");
        }
        if self.noise_psd.is_nan() || self.noise_psd <= 0.0 {
            return bad("noise_psd");
        }
        if self.n_rbs == 0 {
            return bad("n_rbs");
        }
        if self.path_loss_exponent.is_nan() || self.path_loss_exponent < 2.0 {
            return bad("path_loss_exponent");
        }
        if !(0.0..1.0).contains(&self.fading_correlation) {
            return bad("fading_correlation");
        }
        Ok(())
    }

    /// Bandwidth of one RB.
    pub fn rb_bandwidth(&self) -> f64 {
        self.bandwidth / self.n_rbs as f64
    }
}

/// Large-scale gain `max(||u||, 1 m)^-rho`.
pub fn path_gain(position: Position, rho: f64) -> f64 {
    position.norm().max(MIN_DISTANCE_M).powf(-rho)
}

/// Draw from `CN(0, variance)`.
pub fn complex_normal<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `h(t) = xi h(t-1) + delta`, `delta ~ CN(0, 1 - xi^2)`.
pub fn evolve_coefficient<R: Rng + ?Sized>(h: Complex64, xi: f64, rng: &mut R) -> Complex64 {
    xi * h + complex_normal(1.0 - xi * xi, rng)
}

/// Fading coefficients of one user, one independent stream per RB.
#[derive(Clone, Debug)]
pub struct UserFading {
    pub h: Vec<Complex64>,
    streams: Vec<SimRng>,
}

impl UserFading {
    /// Coefficients start at `CN(0, 1)`.
    pub fn new(master_seed: u64, user: UserId, n_rbs: usize) -> Self {
        let mut streams: Vec<SimRng> = (0..n_rbs)
            .map(|n| stream(master_seed, Stream::Fading, ((user.0 as u64) << 16) | n as u64))
            .collect();
        let h = streams.iter_mut().map(|r| complex_normal(1.0, r)).collect();
        UserFading { h, streams }
    }

    pub fn evolve(&mut self, xi: f64) {
        for (h, r) in self.h.iter_mut().zip(self.streams.iter_mut()) {
            *h = evolve_coefficient(*h, xi, r);
        }
    }
}

/// Fading state of every active user.
#[derive(Clone, Debug, Default)]
pub struct FadingState {
    pub users: BTreeMap<UserId, UserFading>,
}

impl FadingState {
    pub fn admit(&mut self, master_seed: u64, user: UserId, n_rbs: usize) {
        self.users.entry(user).or_insert_with(|| UserFading::new(master_seed, user, n_rbs));
    }

    pub fn remove(&mut self, user: UserId) {
        self.users.remove(&user);
    }

    pub fn evolve(&mut self, xi: f64) {
        self.users.values_mut().for_each(|u| u.evolve(xi));
    }
}

/// `(W/N) log2(1 + g P / ((W/N) N0))` in bits/s.
pub fn shannon_rate(gain: f64, params: &RadioParams) -> f64 {
    let w = params.rb_bandwidth();
    w * (1.0 + gain * params.tx_power / (w * params.noise_psd)).log2()
}

/// Per-user, per-RB achievable rates for one slot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateTable {
    pub rates: BTreeMap<UserId, Vec<f64>>,
}

impl RateTable {
    pub fn row(&self, user: UserId) -> Option<&[f64]> {
        self.rates.get(&user).map(Vec::as_slice)
    }

    /// Row divided by its maximum.
    pub fn normalized_row(&self, user: UserId) -> Option<Vec<f64>> {
        self.row(user).map(|r| {
            let best = r.iter().copied().fold(0.0, f64::max);
            r.iter().map(|&c| if best > 0.0 { c / best } else { 0.0 }).collect()
        })
    }
}

pub fn rate_table(
    positions: &BTreeMap<UserId, Position>,
    fading: &FadingState,
    params: &RadioParams,
    t: u64,
) -> Result<RateTable> {
    let mut rates = BTreeMap::new();
    for (&user, uf) in &fading.users {
        let pos = positions.get(&user).ok_or(Error::Trajectory { user, slot: t })?;
        let pl = path_gain(*pos, params.path_loss_exponent);
        let row = uf.h.iter().map(|h| shannon_rate(pl * h.norm_sqr(), params)).collect();
        rates.insert(user, row);
    }
    Ok(RateTable { rates })
}
