//! Deterministic sampling: seeded streams, shrinking shells around a point, sample clouds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Norm, Region};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of tags into one 64-bit seed.
pub(crate) fn mix(tags: &[u64]) -> u64 {
    tags.iter().fold(0x5EED_u64, |acc, t| splitmix(acc ^ splitmix(*t)))
}

pub(crate) fn point_tag(x: &[f64]) -> u64 {
    mix(&x.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
}

/// A ChaCha stream determined by `tags`.
pub(crate) fn stream(tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(tags))
}

/// Unit vector in `norm` drawn from a rotation-invariant direction.
pub(crate) fn random_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize, norm: Norm) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm.norm(&v);
        if len > 1e-12 {
            return v.into_iter().map(|c| c / len).collect();
        }
    }
}

/// Shrinking-shell sampling plan used by all limsup / liminf estimators.
///
/// Shell `j` holds points at distance between `r0·decay^(j+1)` and `r0·decay^j` from the
/// centre. Every point is a pure function of `(seed, centre, j, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    pub r0: f64,
    pub decay: f64,
    pub shells: usize,
    pub samples_per_shell: usize,
    pub seed: u64,
}

impl SamplingSchedule {
    /// `r0 = 1`, `decay = 0.5`, 20 shells, `64·dim` samples per shell, seed 0.
    pub fn default_for(dim: usize) -> Self {
        SamplingSchedule {
            r0: 1.0,
            decay: 0.5,
            shells: 20,
            samples_per_shell: 64 * dim.max(1),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = r0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(Error::Config(format!("r0 must be positive, got {}", self.r0)));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::Config(format!("decay must lie in (0,1), got {}", self.decay)));
        }
        if self.shells < 3 {
            return Err(Error::Config("at least 3 shells are required".into()));
        }
        if self.samples_per_shell < 8 {
            return Err(Error::Config("at least 8 samples per shell are required".into()));
        }
        Ok(())
    }

    /// Outer radius of shell `j`.
    pub fn radius(&self, j: usize) -> f64 {
        self.r0 * self.decay.powi(j as i32)
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.shells).map(|j| self.radius(j)).collect()
    }

    /// Index of the first tail shell; the tail is the last ⌈J/3⌉ shells.
    pub fn tail_start(&self) -> usize {
        self.shells - tail_len(self.shells)
    }

    /// Points of shell `j` around `center`: `samples_per_shell` random points followed by
    /// `2·dim` coordinate probes at the shell's mid radius.
    pub fn shell_points(&self, center: &[f64], j: usize, norm: Norm) -> Vec<Vec<f64>> {
        let dim = center.len();
        let outer = self.radius(j);
        let inner = outer * self.decay;
        let mut rng = stream(&[self.seed, point_tag(center), j as u64]);
        let mut pts = Vec::with_capacity(self.samples_per_shell + 2 * dim);
        for _ in 0..self.samples_per_shell {
            let dir = random_direction(&mut rng, dim, norm);
            let r = inner + (outer - inner) * rng.random::<f64>();
            pts.push(center.iter().zip(&dir).map(|(c, d)| c + r * d).collect());
        }
        let mid = 0.5 * (inner + outer);
        for i in 0..dim {
            for sign in [1.0, -1.0] {
                let mut y = center.to_vec();
                y[i] += sign * mid;
                pts.push(y);
            }
        }
        pts
    }
}

/// ⌈len/3⌉, at least one.
pub fn tail_len(len: usize) -> usize {
    len.div_ceil(3).max(1)
}

/// Deterministic uniform cloud of `n` points in `region`; a prefix of the cloud for `m > n`.
pub(crate) fn cloud(region: &Region, n: usize, tags: &[u64]) -> Vec<Vec<f64>> {
    let mut rng = stream(tags);
    (0..n).map(|_| region.sample(&mut rng)).collect()
}
