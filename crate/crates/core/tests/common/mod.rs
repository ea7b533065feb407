//! Helpers shared by the integration tests: an independent brute-force
//! allocation oracle, random instance generators and scenario paths.

#![allow(dead_code)]

use std::path::PathBuf;

use femto_share::allocator::{AllocationConfig, SolutionSet};
use femto_share::model::{BandwidthRequest, Interval, SpcProfile};
use rand::Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

/// Colour tag and exact bit pattern of a grant, so solution sets compare exactly.
pub type Grant = (u8, u64);

const DENY: u8 = 0;
const GREEN: u8 = 1;
const YELLOW: u8 = 2;

fn round10(x: f64) -> f64 {
    (x * 1e10).round() / 1e10
}

/// Lattice `lo, lo + step, ...` strictly below `hi`, then `hi` itself.
fn lattice(iv: &Interval, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let x = iv.min + f64::from(k) * step;
        if x >= iv.max - 1e-9 {
            break;
        }
        out.push(round10(x));
        k += 1;
    }
    out.push(round10(iv.max));
    out
}

fn options(req: &BandwidthRequest, step: f64) -> Vec<(u8, f64)> {
    let mut v = vec![(DENY, 0.0)];
    v.extend(lattice(&req.green, step).into_iter().map(|x| (GREEN, x)));
    v.extend(lattice(&req.yellow, step).into_iter().map(|x| (YELLOW, x)));
    v
}

/// Result of the literal scan over the full Cartesian product.
#[derive(Debug)]
pub struct ScanResult {
    pub best: f64,
    pub sol: Vec<Vec<Grant>>,
}

/// Enumerates every combination of per-customer options (feasible or not),
/// keeps the feasible ones and returns the maximum outcome with its ties.
pub fn full_product_scan(requests: &[BandwidthRequest], spc: &SpcProfile, step: f64) -> ScanResult {
    let per: Vec<Vec<(u8, f64)>> = requests.iter().map(|r| options(r, step)).collect();
    let total: usize = per.iter().map(Vec::len).product();
    let mut scored: Vec<(f64, Vec<Grant>)> = Vec::new();
    for mut code in 0..total {
        let mut pick = vec![(DENY, 0.0); per.len()];
        for i in (0..per.len()).rev() {
            pick[i] = per[i][code % per[i].len()];
            code /= per[i].len();
        }
        let green: f64 = pick.iter().filter(|p| p.0 == GREEN).map(|p| p.1).sum();
        let yellow: f64 = pick.iter().filter(|p| p.0 == YELLOW).map(|p| p.1).sum();
        if green > spc.psi * spc.b_s + 1e-9 || yellow > (1.0 - spc.psi) * spc.b_s + 1e-9 {
            continue;
        }
        let mut value = 0.0;
        for &(colour, bw) in &pick {
            let w = match colour {
                GREEN => 1.0,
                YELLOW => 1.0 - spc.delta,
                _ => 0.0,
            };
            value += bw / spc.b_s * (spc.mu - spc.gamma) * w;
        }
        scored.push((value, pick.iter().map(|&(c, bw)| (c, bw.to_bits())).collect()));
    }
    let best = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let mut sol: Vec<Vec<Grant>> = scored
        .into_iter()
        .filter(|s| s.0 >= best - 1e-9)
        .map(|s| s.1)
        .collect();
    sol.sort();
    ScanResult { best, sol }
}

pub fn grants(config: &AllocationConfig) -> Vec<Grant> {
    config
        .answers
        .iter()
        .map(|a| {
            let colour = if a.green {
                GREEN
            } else if a.yellow {
                YELLOW
            } else {
                DENY
            };
            (colour, a.bw.to_bits())
        })
        .collect()
}

pub fn sorted_sol(sol: &SolutionSet) -> Vec<Vec<Grant>> {
    let mut v: Vec<Vec<Grant>> = sol.configs.iter().map(grants).collect();
    v.sort();
    v
}

/// Random allocation instance with 1–3 customers and at most five grid
/// points per interval. Half the instances live on a coarse lattice so that
/// exact ties are common.
pub fn random_instance<R: Rng>(rng: &mut R) -> (Vec<BandwidthRequest>, SpcProfile, f64) {
    let lattice = rng.random_bool(0.5);
    let step = if lattice {
        [0.25, 0.5, 1.0][rng.random_range(0..3)]
    } else {
        rng.random_range(0.1..1.0)
    };
    let interval = |rng: &mut R| {
        let (min, width) = if lattice {
            (0.25 * f64::from(rng.random_range(0u32..12)), step * f64::from(rng.random_range(0u32..=4)))
        } else {
            (rng.random_range(0.0..3.0), rng.random_range(0.0..4.0) * step)
        };
        Interval { min: round10(min), max: round10(min + width) }
    };
    let n = rng.random_range(1..=3);
    let requests = (0..n)
        .map(|_| BandwidthRequest { green: interval(rng), yellow: interval(rng) })
        .collect();
    let mu = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.55..1.0) };
    let b_s = if lattice { f64::from(rng.random_range(2u32..=12)) } else { rng.random_range(1.0..12.0) };
    let psi = if lattice { 0.5 } else { rng.random_range(0.2..0.8) };
    let delta = if lattice { 0.1 } else { rng.random_range(0.0..0.5) };
    let spc = SpcProfile::new(mu, 1.0 - mu, psi, b_s, delta).unwrap();
    (requests, spc, step)
}

/// Uniform point on the probability simplex of dimension `n`.
pub fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}
