//! Deterministic synthetic embedding generators.
//!
//! All generators draw from `ChaCha8Rng` seeded with `seed_from_u64(seed)`,
//! a counter-based stream cipher generator, and produce rows sequentially so
//! output is bit-identical for a given seed. Rows are built in binary64 and
//! rounded to float32 once, after normalization.

mod npy;

pub use npy::{
    decode_npy, npy_header_bytes, parse_npy_header, read_array, read_npy, read_raw, write_array,
    write_npy, write_raw, NpyHeader,
};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution as _, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::EmbeddingMatrix;

/// Iteration cap for the vMF radial rejection loop. The acceptance rate of
/// the envelope is well above 1/2 for every `(κ, d)`, so hitting this means a
/// bug rather than unlucky data.
pub const VMF_MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SphereDistribution {
    UniformSphere,
    VonMisesFisher,
    Orthogonal,
    Sparse,
}

impl std::str::FromStr for SphereDistribution {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Self::UniformSphere),
            "vmf" => Ok(Self::VonMisesFisher),
            "orthogonal" => Ok(Self::Orthogonal),
            "sparse" => Ok(Self::Sparse),
            other => Err(format!(
                "unknown distribution {other:?} (expected uniform, vmf, orthogonal or sparse)"
            )),
        }
    }
}

/// Full description of a synthetic matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GenSpec {
    pub distribution: SphereDistribution,
    pub n: usize,
    pub d: usize,
    pub kappa: f64,
    pub clusters: usize,
    pub density: f64,
    pub seed: u64,
}

impl GenSpec {
    pub fn uniform(n: usize, d: usize, seed: u64) -> Self {
        Self {
            distribution: SphereDistribution::UniformSphere,
            n,
            d,
            kappa: 0.0,
            clusters: 1,
            density: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if self.d < 2 {
            return Err(Error::DimensionTooSmall { d: self.d });
        }
        if !self.kappa.is_finite() || self.kappa < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa {} must be finite and ≥ 0",
                self.kappa
            )));
        }
        if self.clusters == 0 {
            return Err(Error::InvalidParameter(
                "clusters must be at least 1".into(),
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<EmbeddingMatrix<f32>> {
        self.validate()?;
        match self.distribution {
            SphereDistribution::UniformSphere => Ok(gen_uniform(self.n, self.d, self.seed)),
            SphereDistribution::VonMisesFisher => {
                gen_vmf(self.n, self.d, self.kappa, self.clusters, self.seed)
            }
            SphereDistribution::Orthogonal => gen_orthogonal(self.n, self.d, self.seed),
            SphereDistribution::Sparse => gen_sparse(self.n, self.d, self.density, self.seed),
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Normalizes in binary64 and appends the float32 row. Returns false for a
/// zero vector.
fn push_unit_row(out: &mut Vec<f32>, v: &[f64]) -> bool {
    let r = norm(v);
    if r == 0.0 {
        return false;
    }
    out.extend(v.iter().map(|x| (x / r) as f32));
    true
}

fn random_direction(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let r = norm(&v);
        if r > 0.0 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Rows uniform on `S^{d−1}`: normalized standard Gaussian vectors.
pub fn gen_uniform(n: usize, d: usize, seed: u64) -> EmbeddingMatrix<f32> {
    let mut rng = rng_for(seed);
    let mut data = Vec::with_capacity(n * d);
    while data.len() < n * d {
        let v = gaussian_vec(&mut rng, d);
        push_unit_row(&mut data, &v);
    }
    EmbeddingMatrix::from_vec(n, d, data).expect("generator shape")
}

/// Envelope-rejection sampler for the cosine `w = μ·x` of a von Mises–Fisher
/// draw on `S^{d−1}`, whose density is `∝ exp(κw)(1 − w²)^{(d−3)/2}`.
#[derive(Debug, Clone)]
pub struct VmfRadial {
    kappa: f64,
    dm1: f64,
    b: f64,
    x0: f64,
    c: f64,
    beta: Beta<f64>,
}

impl VmfRadial {
    pub fn new(d: usize, kappa: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall { d });
        }
        let dm1 = (d - 1) as f64;
        // b = (−2κ + √(4κ² + (d−1)²)) / (d−1), written to avoid cancellation
        let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + dm1 * (1.0 - x0 * x0).ln();
        let beta = Beta::new(dm1 / 2.0, dm1 / 2.0)
            .map_err(|e| Error::InvalidParameter(format!("beta envelope: {e}")))?;
        Ok(Self {
            kappa,
            dm1,
            b,
            x0,
            c,
            beta,
        })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<f64> {
        for _ in 0..VMF_MAX_REJECTIONS {
            let z = self.beta.sample(rng);
            let w = (1.0 - (1.0 + self.b) * z) / (1.0 - (1.0 - self.b) * z);
            let u: f64 = rng.random();
            if self.kappa * w + self.dm1 * (1.0 - self.x0 * w).ln() - self.c >= u.ln() {
                return Ok(w.clamp(-1.0, 1.0));
            }
        }
        Err(Error::NonConvergence(VMF_MAX_REJECTIONS))
    }
}

/// von Mises–Fisher rows around `clusters` uniform mean directions, assigned
/// round-robin (row `i` uses mean `i mod clusters`).
pub fn gen_vmf(
    n: usize,
    d: usize,
    kappa: f64,
    clusters: usize,
    seed: u64,
) -> Result<EmbeddingMatrix<f32>> {
    if clusters == 0 {
        return Err(Error::InvalidParameter(
            "clusters must be at least 1".into(),
        ));
    }
    if kappa.is_nan() || kappa < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "kappa {kappa} must be ≥ 0"
        )));
    }
    let mut rng = rng_for(seed);
    let means: Vec<Vec<f64>> = (0..clusters)
        .map(|_| random_direction(&mut rng, d))
        .collect();
    let radial = VmfRadial::new(d, kappa)?;

    let mut data = Vec::with_capacity(n * d);
    let mut row = vec![0.0f64; d];
    for i in 0..n {
        let mu = &means[i % clusters];
        loop {
            let w = radial.sample(&mut rng)?;
            // uniform tangent direction: project a Gaussian off μ
            let mut v = gaussian_vec(&mut rng, d);
            let proj: f64 = v.iter().zip(mu).map(|(a, b)| a * b).sum();
            for (vi, mi) in v.iter_mut().zip(mu) {
                *vi -= proj * mi;
            }
            let vn = norm(&v);
            if vn == 0.0 {
                continue;
            }
            let t = (1.0 - w * w).max(0.0).sqrt();
            for ((r, mi), vi) in row.iter_mut().zip(mu).zip(&v) {
                *r = w * mi + t * vi / vn;
            }
            if push_unit_row(&mut data, &row) {
                break;
            }
        }
    }
    EmbeddingMatrix::from_vec(n, d, data)
}

/// First `n` rows of an orthonormal basis from Gram–Schmidt (two passes) on
/// a Gaussian matrix.
pub fn gen_orthogonal(n: usize, d: usize, seed: u64) -> Result<EmbeddingMatrix<f32>> {
    if n > d {
        return Err(Error::TooManyRows { n, d });
    }
    let mut rng = rng_for(seed);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v = gaussian_vec(&mut rng, d);
        for _ in 0..2 {
            for q in &basis {
                let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let r = norm(&v);
        // a draw (numerically) inside the current span is discarded
        if r > 1e-8 {
            basis.push(v.into_iter().map(|x| x / r).collect());
        }
    }
    let mut data = Vec::with_capacity(n * d);
    for q in &basis {
        push_unit_row(&mut data, q);
    }
    EmbeddingMatrix::from_vec(n, d, data)
}

/// Nonzeros per row for a given density: `⌈density · d⌉`, at least one.
pub fn sparse_nonzeros(d: usize, density: f64) -> usize {
    // round away representation noise such as 0.1·768 = 76.80000000000001
    let exact = density * d as f64;
    let snapped = (exact * 1e9).round() / 1e9;
    (snapped.ceil() as usize).clamp(1, d)
}

/// Rows with exactly `⌈density · d⌉` Gaussian nonzeros at uniformly chosen
/// positions.
pub fn gen_sparse(n: usize, d: usize, density: f64, seed: u64) -> Result<EmbeddingMatrix<f32>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "density {density} outside (0, 1]"
        )));
    }
    let k = sparse_nonzeros(d, density);
    let mut rng = rng_for(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut row = vec![0.0f64; d];
    while data.len() < n * d {
        row.iter_mut().for_each(|v| *v = 0.0);
        for pos in index::sample(&mut rng, d, k) {
            row[pos] = rng.sample(StandardNormal);
        }
        push_unit_row(&mut data, &row);
    }
    EmbeddingMatrix::from_vec(n, d, data)
}

/// Mean of `x_i · x_j` over all pairs `i < j`, computed in `O(n·d)` from the
/// row sum: `(‖Σx‖² − Σ‖x‖²) / (n(n−1))`.
pub fn mean_pairwise_cosine(x: &EmbeddingMatrix<f32>) -> f64 {
    let n = x.n();
    if n < 2 {
        return 0.0;
    }
    let mut sum = vec![0.0f64; x.d()];
    let mut sq = 0.0f64;
    for row in x.rows() {
        for (s, v) in sum.iter_mut().zip(row) {
            *s += *v as f64;
            sq += (*v as f64) * (*v as f64);
        }
    }
    let total: f64 = sum.iter().map(|s| s * s).sum();
    (total - sq) / (n as f64 * (n as f64 - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_norm_dev(x: &EmbeddingMatrix<f32>) -> f64 {
        x.rows()
            .map(|r| (r.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn brute_mean_cos(x: &EmbeddingMatrix<f32>) -> f64 {
        let n = x.n();
        let mut acc = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                acc += x
                    .row(i)
                    .iter()
                    .zip(x.row(j))
                    .map(|(a, b)| *a as f64 * *b as f64)
                    .sum::<f64>();
            }
        }
        acc / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn pairwise_mean_matches_brute_force() {
        let x = gen_vmf(60, 12, 5.0, 2, 3).unwrap();
        assert!((mean_pairwise_cosine(&x) - brute_mean_cos(&x)).abs() < 1e-9);
    }

    #[test]
    fn uniform_is_unit_and_deterministic() {
        let a = gen_uniform(50, 33, 9);
        assert!(max_norm_dev(&a) < 1e-6);
        assert_eq!(a, gen_uniform(50, 33, 9));
        assert_ne!(a, gen_uniform(50, 33, 10));
    }

    #[test]
    fn orthogonal_rows() {
        let x = gen_orthogonal(100, 768, 1).unwrap();
        assert!(max_norm_dev(&x) < 1e-6);
        for i in 0..100 {
            for j in i + 1..100 {
                let dot: f64 = x
                    .row(i)
                    .iter()
                    .zip(x.row(j))
                    .map(|(a, b)| *a as f64 * *b as f64)
                    .sum();
                assert!(dot.abs() < 1e-6, "rows {i},{j}: {dot}");
            }
        }
        assert!(matches!(
            gen_orthogonal(769, 768, 1),
            Err(Error::TooManyRows { n: 769, d: 768 })
        ));
        assert_eq!(gen_orthogonal(4, 4, 2).unwrap().n(), 4);
    }

    #[test]
    fn sparse_counts() {
        assert_eq!(sparse_nonzeros(768, 0.1), 77);
        assert_eq!(sparse_nonzeros(768, 0.5), 384);
        assert_eq!(sparse_nonzeros(10, 1e-6), 1);
        assert_eq!(sparse_nonzeros(10, 1.0), 10);
        let x = gen_sparse(20, 768, 0.1, 4).unwrap();
        assert!(max_norm_dev(&x) < 1e-6);
        for row in x.rows() {
            assert_eq!(row.iter().filter(|v| **v != 0.0).count(), 77);
        }
        assert!(gen_sparse(2, 8, 0.0, 1).is_err());
        assert!(gen_sparse(2, 8, 1.5, 1).is_err());
    }

    #[test]
    fn vmf_kappa_zero_is_uniform() {
        let x = gen_vmf(2000, 64, 0.0, 1, 5).unwrap();
        assert!(max_norm_dev(&x) < 1e-6);
        assert!(mean_pairwise_cosine(&x).abs() < 0.01);
    }

    #[test]
    fn vmf_radial_mean_matches_quadrature() {
        // E[w] under ∝ exp(κw)(1−w²)^{(d−3)/2} on [−1, 1], by midpoint rule
        let (d, kappa) = (10usize, 8.0f64);
        let steps = 200_000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..steps {
            let w = -1.0 + (i as f64 + 0.5) * 2.0 / steps as f64;
            let p = (kappa * w).exp() * (1.0 - w * w).powf((d as f64 - 3.0) / 2.0);
            num += w * p;
            den += p;
        }
        let expected = num / den;
        let radial = VmfRadial::new(d, kappa).unwrap();
        let mut rng = rng_for(11);
        let m = 200_000;
        let mean: f64 = (0..m)
            .map(|_| radial.sample(&mut rng).unwrap())
            .sum::<f64>()
            / m as f64;
        assert!((mean - expected).abs() < 3e-3, "{mean} vs {expected}");
    }

    #[test]
    fn spec_validation() {
        let mut s = GenSpec::uniform(2, 4, 0);
        assert!(s.generate().is_ok());
        s.d = 1;
        assert!(s.validate().is_err());
        s.d = 4;
        s.distribution = SphereDistribution::VonMisesFisher;
        s.clusters = 0;
        assert!(s.generate().is_err());
        assert_eq!(
            "vmf".parse::<SphereDistribution>().unwrap(),
            SphereDistribution::VonMisesFisher
        );
        assert!("gauss".parse::<SphereDistribution>().is_err());
    }
}
