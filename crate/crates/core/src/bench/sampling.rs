//! Seeded samplers with fixed, documented algorithms.
//!
//! All variates derive from a ChaCha8 keystream (`seed_from_u64(seed)`,
//! stream id = replicate index), so a `(seed, stream)` pair reproduces the
//! same data on every platform:
//!
//! * uniform: top 53 bits of a `u64`, shifted to the open interval (0, 1);
//! * normal: Box–Muller, cosine branch only (two uniforms per variate);
//! * Poisson: sequential inverse-CDF search, rates above 30 split into a sum
//!   of independent Poisson(≤ 30) draws;
//! * binomial: sequential inverse-CDF search on `min(p, 1−p)`, trial counts
//!   above 64 split into independent chunks of at most 64 trials;
//! * gamma: Marsaglia–Tsang for shape ≥ 1, boosted by `U^{1/k}` below 1.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

const POISSON_CHUNK: f64 = 30.0;
const BINOMIAL_CHUNK: u32 = 64;

impl Sampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Sampler { rng }
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn poisson(&mut self, rate: f64) -> f64 {
        let mut remaining = rate;
        let mut total = 0.0;
        while remaining > 0.0 {
            let lambda = remaining.min(POISSON_CHUNK);
            remaining -= lambda;
            total += self.poisson_small(lambda);
        }
        total
    }

    fn poisson_small(&mut self, lambda: f64) -> f64 {
        let u = self.uniform();
        let mut k = 0u32;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        while u > cdf {
            k += 1;
            p *= lambda / k as f64;
            cdf += p;
            if p == 0.0 && cdf < u {
                // Rounding left the CDF short of u; stop at the last mass point.
                break;
            }
        }
        k as f64
    }

    pub fn binomial(&mut self, trials: u32, p: f64) -> f64 {
        let mut left = trials;
        let mut total = 0u32;
        while left > 0 {
            let n = left.min(BINOMIAL_CHUNK);
            left -= n;
            total += self.binomial_small(n, p);
        }
        total as f64
    }

    fn binomial_small(&mut self, n: u32, p: f64) -> u32 {
        let flip = p > 0.5;
        let q = if flip { 1.0 - p } else { p };
        let u = self.uniform();
        let ratio = q / (1.0 - q);
        let mut k = 0u32;
        let mut pmf = (1.0 - q).powi(n as i32);
        let mut cdf = pmf;
        while u > cdf && k < n {
            pmf *= ratio * (n - k) as f64 / (k + 1) as f64;
            k += 1;
            cdf += pmf;
        }
        if flip {
            n - k
        } else {
            k
        }
    }

    /// Gamma variate with the given shape and scale (mean `shape·scale`).
    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        if shape < 1.0 {
            let boost = self.uniform().powf(1.0 / shape);
            return self.gamma(shape + 1.0, scale) * boost;
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = self.normal();
            let v = 1.0 + c * z;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
                return d * v * scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn reproducible_and_stream_separated() {
        let a: Vec<f64> = {
            let mut s = Sampler::new(7, 0);
            (0..10).map(|_| s.uniform()).collect()
        };
        let b: Vec<f64> = {
            let mut s = Sampler::new(7, 0);
            (0..10).map(|_| s.uniform()).collect()
        };
        let c: Vec<f64> = {
            let mut s = Sampler::new(7, 1);
            (0..10).map(|_| s.uniform()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn sampler_moments() {
        let n = 200_000;
        let mut s = Sampler::new(3, 0);
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let (m, v) = moments(&xs);
        assert!(m.abs() < 5.0 / (n as f64).sqrt());
        assert!((v - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());

        for rate in [0.3, 4.0, 75.0] {
            let xs: Vec<f64> = (0..n).map(|_| s.poisson(rate)).collect();
            let (m, v) = moments(&xs);
            assert!(
                (m - rate).abs() < 5.0 * (rate / n as f64).sqrt(),
                "{rate} {m}"
            );
            assert!((v / rate - 1.0).abs() < 0.05);
        }
        for (trials, p) in [(1, 0.5), (10, 0.8), (200, 0.03)] {
            let xs: Vec<f64> = (0..n).map(|_| s.binomial(trials, p)).collect();
            let (m, v) = moments(&xs);
            let mean = trials as f64 * p;
            let var = mean * (1.0 - p);
            assert!(
                (m - mean).abs() < 5.0 * (var / n as f64).sqrt(),
                "{trials} {p}"
            );
            assert!((v / var - 1.0).abs() < 0.05);
        }
        for (k, scale) in [(0.5, 2.0), (1.0, 1.0), (3.0, 0.5)] {
            let xs: Vec<f64> = (0..n).map(|_| s.gamma(k, scale)).collect();
            let (m, v) = moments(&xs);
            let mean = k * scale;
            let var = k * scale * scale;
            assert!((m - mean).abs() < 5.0 * (var / n as f64).sqrt(), "{k}");
            assert!((v / var - 1.0).abs() < 0.06, "{k} {v}");
            assert!(xs.iter().all(|&x| x > 0.0));
        }
    }
}
