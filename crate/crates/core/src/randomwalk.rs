//! Gillespie simulation of the jump process behind a generator.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::DensityField;
use crate::error::{Error, Result};
use crate::generator::JumpChain;

#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    /// `(state, holding time)`; the last segment is cut at the horizon.
    pub segments: Vec<(usize, f64)>,
    pub horizon: f64,
}

impl WalkPath {
    pub fn n_jumps(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }
}

/// Random source for path `path` of an ensemble keyed by `seed`. Each path
/// gets its own ChaCha stream, so ensembles do not depend on generation order.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Simulates one path from `start` up to time `horizon`.
pub fn gillespie(chain: &JumpChain, start: usize, horizon: f64, seed: u64) -> Result<WalkPath> {
    gillespie_with(chain, start, horizon, &mut path_rng(seed, 0))
}

pub fn gillespie_with(chain: &JumpChain, start: usize, horizon: f64, rng: &mut impl Rng) -> Result<WalkPath> {
    if start >= chain.n() {
        return Err(Error::InvalidState {
            state: start,
            n: chain.n(),
        });
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let mut segments = Vec::new();
    let mut state = start;
    let mut t = 0.0;
    loop {
        if chain.is_absorbing(state) {
            segments.push((state, horizon - t));
            break;
        }
        let u: f64 = rng.gen();
        let hold = -(1.0 - u).ln() / chain.lambda()[state];
        if t + hold >= horizon {
            segments.push((state, horizon - t));
            break;
        }
        segments.push((state, hold));
        t += hold;

        let r: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = None;
        for (j, p) in chain.transitions(state) {
            acc += p;
            next = Some(j);
            if r < acc {
                break;
            }
        }
        state = next.expect("non-absorbing state has a transition");
    }
    Ok(WalkPath { segments, horizon })
}

/// `count` paths with starts chosen by `start(path_index, rng)`, each using
/// the stream [`path_rng`]`(seed, index)`.
pub fn ensemble(
    chain: &JumpChain,
    count: usize,
    horizon: f64,
    seed: u64,
    mut start: impl FnMut(usize, &mut ChaCha8Rng) -> usize,
) -> Result<Vec<WalkPath>> {
    (0..count)
        .map(|k| {
            let mut rng = path_rng(seed, k as u64);
            let s = start(k, &mut rng);
            gillespie_with(chain, s, horizon, &mut rng)
        })
        .collect()
}

/// Draws a state from a mass vector.
pub fn sample_state(mass: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = mass.iter().sum();
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, m) in mass.iter().enumerate() {
        acc += m;
        if r < acc {
            return i;
        }
    }
    mass.iter().rposition(|m| *m > 0.0).unwrap_or(0)
}

/// Time-weighted occupation fractions over all paths, as a unit mass vector.
pub fn occupation_measure(paths: &[WalkPath], n_states: usize) -> Result<DensityField> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no paths given".into()));
    }
    let mut occ = vec![0.0; n_states];
    for path in paths {
        for &(s, h) in &path.segments {
            if s >= n_states {
                return Err(Error::InvalidState { state: s, n: n_states });
            }
            occ[s] += h;
        }
    }
    DensityField::from_mass(occ)?.normalized()
}

/// Total variation distance `½ Σ|p − q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// CSV with header `path_id,state,holding_time`.
pub fn paths_csv(paths: &[WalkPath]) -> String {
    let mut out = String::from("path_id,state,holding_time\n");
    for (k, path) in paths.iter().enumerate() {
        for (s, h) in &path.segments {
            let _ = writeln!(out, "{k},{s},{h:e}");
        }
    }
    out
}
