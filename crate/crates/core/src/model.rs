//! Actors, strategy sets and bandwidth requests.
//!
//! Every type here is an immutable value validated at construction. Bandwidths
//! are in Mb/s, file sizes in Mb and times in seconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the `x + y = 1` sensitivity dualities.
pub const DUALITY_TOL: f64 = 1e-12;

/// Grid values are rounded to this many decimals so that floating-point grids
/// compare exactly.
pub const GRID_DECIMALS: i32 = 10;

pub(crate) fn round_grid(x: f64) -> f64 {
    let scale = 10f64.powi(GRID_DECIMALS);
    let r = (x * scale).round() / scale;
    // normalise -0.0
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn check_unit(field: &str, value: f64) -> Result<()> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(Error::validation(field, format!("{value} is outside [0, 1]")));
    }
    Ok(())
}

/// The sharing customer (femto-cell owner).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpcProfile {
    /// Gain sensitivity.
    pub mu: f64,
    /// QoS sensitivity, `1 - mu`.
    pub gamma: f64,
    /// Share of `b_s` offered as green (non-preemptable) bandwidth.
    pub psi: f64,
    /// Total shared bandwidth.
    pub b_s: f64,
    /// Revenue/cost discount on preemptable yellow connections.
    pub delta: f64,
}

impl SpcProfile {
    pub fn new(mu: f64, gamma: f64, psi: f64, b_s: f64, delta: f64) -> Result<Self> {
        check_unit("spc.mu", mu)?;
        check_unit("spc.gamma", gamma)?;
        check_unit("spc.psi", psi)?;
        if (mu + gamma - 1.0).abs() > DUALITY_TOL {
            return Err(Error::validation(
                "spc.gamma",
                format!("mu + gamma must equal 1, got {}", mu + gamma),
            ));
        }
        if (mu - 0.5).abs() <= DUALITY_TOL {
            return Err(Error::validation(
                "spc.mu",
                "mu = 0.5 makes every allocation score identically",
            ));
        }
        if !(b_s.is_finite() && b_s > 0.0) {
            return Err(Error::validation("spc.b_s", format!("{b_s} must be > 0")));
        }
        if !(delta.is_finite() && (0.0..1.0).contains(&delta)) {
            return Err(Error::validation("spc.delta", format!("{delta} is outside [0, 1)")));
        }
        Ok(Self {
            mu,
            gamma,
            psi,
            b_s,
            delta,
        })
    }

    pub fn green_capacity(&self) -> f64 {
        self.psi * self.b_s
    }

    pub fn yellow_capacity(&self) -> f64 {
        (1.0 - self.psi) * self.b_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `alpha > 0.5`: strategies are revenue floors, requests anchor at `bw_max`.
    QosSensitive,
    /// `alpha <= 0.5`: strategies are cost ceilings, requests anchor at `bw_min`.
    PriceSensitive,
}

/// A requesting customer (mobile user).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrcProfile {
    /// QoS sensitivity.
    pub alpha: f64,
    /// Price sensitivity, `1 - alpha`.
    pub beta: f64,
    /// Slack between `alpha` and the strategy threshold.
    pub kappa: f64,
    /// Strategy grid step.
    pub epsilon: f64,
}

impl SrcProfile {
    pub fn new(alpha: f64, beta: f64, kappa: f64, epsilon: f64) -> Result<Self> {
        let profile = Self {
            alpha,
            beta,
            kappa,
            epsilon,
        };
        profile.validate("src")?;
        Ok(profile)
    }

    /// Convenience constructor with `beta = 1 - alpha`.
    pub fn with_alpha(alpha: f64, kappa: f64, epsilon: f64) -> Result<Self> {
        Self::new(alpha, 1.0 - alpha, kappa, epsilon)
    }

    pub(crate) fn validate(&self, prefix: &str) -> Result<()> {
        check_unit(&format!("{prefix}.alpha"), self.alpha)?;
        check_unit(&format!("{prefix}.beta"), self.beta)?;
        check_unit(&format!("{prefix}.kappa"), self.kappa)?;
        if (self.alpha + self.beta - 1.0).abs() > DUALITY_TOL {
            return Err(Error::validation(
                format!("{prefix}.beta"),
                format!("alpha + beta must equal 1, got {}", self.alpha + self.beta),
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::validation(
                format!("{prefix}.epsilon"),
                format!("{} is outside (0, 1]", self.epsilon),
            ));
        }
        let th = self.threshold();
        if !(-DUALITY_TOL..=1.0 + DUALITY_TOL).contains(&th) {
            return Err(Error::validation(
                format!("{prefix}.kappa"),
                format!("derived threshold {th} is outside [0, 1]"),
            ));
        }
        Ok(())
    }

    pub fn orientation(&self) -> Orientation {
        if self.alpha > 0.5 {
            Orientation::QosSensitive
        } else {
            Orientation::PriceSensitive
        }
    }

    /// Revenue floor `alpha - kappa` for QoS-sensitive customers, cost ceiling
    /// `alpha + kappa` otherwise.
    pub fn threshold(&self) -> f64 {
        match self.orientation() {
            Orientation::QosSensitive => self.alpha - self.kappa,
            Orientation::PriceSensitive => self.alpha + self.kappa,
        }
    }
}

/// Admissible bandwidth window for a file transfer finishing between `t1` and `t2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosBounds {
    pub bw_min: f64,
    pub bw_max: f64,
    pub file_size: f64,
    pub t1: f64,
    pub t2: f64,
}

pub fn qos_bounds(file_size: f64, t1: f64, t2: f64) -> Result<QosBounds> {
    if !(file_size.is_finite() && file_size > 0.0) {
        return Err(Error::validation("qos.file_size", format!("{file_size} must be > 0")));
    }
    if !(t1.is_finite() && t1 > 0.0) {
        return Err(Error::validation("qos.t1", format!("{t1} must be > 0")));
    }
    if !(t2.is_finite() && t2 > t1) {
        return Err(Error::validation(
            "qos.t2",
            format!("t2 = {t2} must exceed t1 = {t1}"),
        ));
    }
    Ok(QosBounds {
        bw_min: file_size / t2,
        bw_max: file_size / t1,
        file_size,
        t1,
        t2,
    })
}

impl QosBounds {
    pub fn clamp(&self, bw: f64) -> f64 {
        bw.clamp(self.bw_min, self.bw_max)
    }
}

/// Ordered pure strategies of one customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySet {
    pub owner: usize,
    pub values: Vec<f64>,
    pub orientation: Orientation,
}

impl StrategySet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Index of `value` in the set, compared after grid rounding.
    pub fn index_of(&self, value: f64) -> Option<usize> {
        let v = round_grid(value);
        self.values.iter().position(|&x| x == v)
    }
}

/// Builds the strategy grid: `{th, th+eps, ..., 1}` for QoS-sensitive customers
/// and `{0, ..., th-eps, th}` for price-sensitive ones. The grid is anchored at
/// the threshold; the far boundary (1 or 0) may be closer than `eps`.
pub fn build_strategy_set(owner: usize, profile: &SrcProfile) -> Result<StrategySet> {
    profile.validate(&format!("srcs[{owner}]"))?;
    let th = profile.threshold().clamp(0.0, 1.0);
    let eps = profile.epsilon;
    let orientation = profile.orientation();
    let values = match orientation {
        Orientation::QosSensitive => {
            let steps = ((1.0 - th) / eps).round() as usize;
            let mut v: Vec<f64> = (0..steps).map(|k| round_grid(th + k as f64 * eps)).collect();
            v.push(if steps == 0 { round_grid(th) } else { 1.0 });
            v
        }
        Orientation::PriceSensitive => {
            let steps = (th / eps).round() as usize;
            let mut v: Vec<f64> = (0..steps).map(|k| round_grid(th - k as f64 * eps)).collect();
            v.push(if steps == 0 { round_grid(th) } else { 0.0 });
            v.reverse();
            v
        }
    };
    Ok(StrategySet {
        owner,
        values,
        orientation,
    })
}

/// Closed bandwidth interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn contains(&self, bw: f64) -> bool {
        bw >= self.min - 1e-12 && bw <= self.max + 1e-12
    }
}

/// Green and yellow request intervals sent by one customer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRequest {
    pub green: Interval,
    pub yellow: Interval,
}

/// Maps a pure strategy to its green/yellow request.
///
/// QoS-sensitive: green `[s*bw_max, bw_max]`, yellow `[s*bw_max*(1-delta), bw_max]`.
/// Price-sensitive: green `[bw_min, s*bw_max]`, yellow `[bw_min, s*bw_max*(1-delta)]`.
/// The threshold-derived endpoint is clamped into `[bw_min, bw_max]`.
pub fn request_from_strategy(
    profile: &SrcProfile,
    s: f64,
    bounds: &QosBounds,
    delta: f64,
) -> BandwidthRequest {
    let anchor = bounds.clamp(s * bounds.bw_max);
    let anchor_yellow = bounds.clamp(s * bounds.bw_max * (1.0 - delta));
    let (green, yellow) = match profile.orientation() {
        Orientation::QosSensitive => (
            Interval {
                min: round_grid(anchor),
                max: round_grid(bounds.bw_max),
            },
            Interval {
                min: round_grid(anchor_yellow),
                max: round_grid(bounds.bw_max),
            },
        ),
        Orientation::PriceSensitive => (
            Interval {
                min: round_grid(bounds.bw_min),
                max: round_grid(anchor),
            },
            Interval {
                min: round_grid(bounds.bw_min),
                max: round_grid(anchor_yellow),
            },
        ),
    };
    BandwidthRequest { green, yellow }
}
