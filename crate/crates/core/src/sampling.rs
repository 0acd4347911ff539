//! Deterministic sampling from ellipsoidal supports.
//!
//! Verification draws both interior points (uniform over the ellipsoid)
//! and boundary points (normalized Gaussians mapped through `Σ^{1/2}`);
//! robust-constraint violations live on the boundary, expectations need
//! the interior. Each sample index gets its own counter-derived RNG
//! stream so parallel evaluation stays bit-reproducible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::Result;

/// Sampler for `{z : zᵀ Σ⁻¹ z ≤ 1}`.
#[derive(Debug, Clone)]
pub struct EllipsoidSampler {
    sqrt_sigma: DMatrix<f64>,
    dim: usize,
}

impl EllipsoidSampler {
    pub fn new(sigma: &DMatrix<f64>) -> Result<Self> {
        linalg::check_positive_definite(sigma, "sampler Sigma")?;
        Ok(Self {
            sqrt_sigma: linalg::symmetric_sqrt(sigma, linalg::EIG_FLOOR),
            dim: sigma.nrows(),
        })
    }

    /// Sampler from a precomputed symmetric square root.
    pub fn from_sqrt(sqrt_sigma: DMatrix<f64>) -> Self {
        let dim = sqrt_sigma.nrows();
        Self { sqrt_sigma, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn unit_direction(&self, rng: &mut impl Rng) -> DVector<f64> {
        loop {
            let g = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let n = g.norm();
            if n > 1e-300 {
                return g / n;
            }
        }
    }

    /// Uniform sample from the interior (ball transform through the
    /// shape square root).
    pub fn interior(&self, rng: &mut impl Rng) -> DVector<f64> {
        let dir = self.unit_direction(rng);
        let radius = rng.gen_range(0.0f64..1.0).powf(1.0 / self.dim as f64);
        &self.sqrt_sigma * (dir * radius)
    }

    /// Sample from the boundary surface.
    pub fn boundary(&self, rng: &mut impl Rng) -> DVector<f64> {
        &self.sqrt_sigma * self.unit_direction(rng)
    }

    /// 50/50 interior/boundary mix, keyed by sample index parity.
    pub fn mixed(&self, rng: &mut impl Rng, index: usize) -> DVector<f64> {
        if index % 2 == 0 {
            self.interior(rng)
        } else {
            self.boundary(rng)
        }
    }
}

/// RNG for one sample of one experiment: the seed picks the experiment,
/// the stream picks the sample.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
