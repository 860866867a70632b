//! The family `pi(1) = a`, `pi(k) ∝ 1 / (k^2 log^2 k)` for `k >= k0`.
//!
//! Its mean is finite but `sum pi(k) k log k` diverges. Sums over
//! `k >= HEAD` use Euler-Maclaurin with a numerically integrated main term.

use rand_distr::{Binomial, Distribution};

use crate::error::{BmcError, Result};
use crate::quadrature::integrate;
use crate::rng::StreamRng;

/// Head sums are explicit below this index.
pub const HEAD: u64 = 4096;
/// Draws at or below this many are made one at a time in `sample_sum`.
const SMALL: u64 = 16;

#[inline]
pub fn h(k: f64) -> f64 {
    let l = k.ln();
    1.0 / (k * k * l * l)
}

/// `sum_{k >= n} f(k)` for smooth decreasing `f`, `n >= HEAD`, given the
/// integral `int_n^inf f`.
fn euler_maclaurin(f: impl Fn(f64) -> f64, n: f64, integral: f64) -> f64 {
    let step = 1e-3 * n;
    let d1 = (f(n + step) - f(n - step)) / (2.0 * step);
    integral + 0.5 * f(n) - d1 / 12.0
}

/// `sum_{k >= n} h(k)`.
pub fn tail_h(n: u64) -> f64 {
    let nf = n as f64;
    let ln_n = nf.ln();
    // With x = n e^t: int_n^inf h = (1/n) int_0^inf e^{-t} / (ln n + t)^2 dt.
    let integral = integrate(|t| (-t).exp() / (ln_n + t).powi(2), 0.0, 60.0, 1e-18, 1e-14)
        .expect("smooth integrand")
        / nf;
    euler_maclaurin(h, nf, integral)
}

/// `sum_{k >= n} k h(k)`; the integral is exactly `1 / ln n`.
pub fn tail_kh(n: u64) -> f64 {
    let nf = n as f64;
    euler_maclaurin(|x| x * h(x), nf, 1.0 / nf.ln())
}

#[derive(Clone, Debug)]
pub struct HeavyTail {
    mean: f64,
    k0: u64,
    k_max: u64,
    atom: f64,
    z: f64,
    /// Categories: index 0 is the atom at 1, then `k0..HEAD` one by one, then
    /// dyadic blocks up to `k_max`. `(lo, hi)` inclusive.
    cats: Vec<(u64, u64)>,
    /// Probability of each category under the law truncated at `k_max`.
    probs: Vec<f64>,
    /// `suffix[i] = sum probs[i..]`.
    suffix: Vec<f64>,
    truncated_mass: f64,
    truncated_mean: f64,
}

impl HeavyTail {
    pub fn new(mean: f64, k0: u64, k_max: u64) -> Result<Self> {
        if !(2..HEAD).contains(&k0) {
            return Err(BmcError::InvalidPmf(format!("heavy-tail k0 must lie in 2..{HEAD}")));
        }
        if k_max < 2 * HEAD || k_max > 1 << 62 {
            return Err(BmcError::InvalidPmf(format!(
                "heavy-tail k_max must lie in {}..=2^62",
                2 * HEAD
            )));
        }
        let head_h: f64 = (k0..HEAD).map(|k| h(k as f64)).sum();
        let head_kh: f64 = (k0..HEAD).map(|k| k as f64 * h(k as f64)).sum();
        let z = head_h + tail_h(HEAD);
        let mu = (head_kh + tail_kh(HEAD)) / z;
        if !(mean > 1.0 && mean < mu) {
            return Err(BmcError::InvalidPmf(format!(
                "heavy-tail mean must lie in (1, {mu:.6}) for k0 = {k0}, got {mean}"
            )));
        }
        let atom = (mu - mean) / (mu - 1.0);
        let w = (1.0 - atom) / z;

        let mut cats = vec![(1, 1)];
        let mut probs = vec![atom];
        for k in k0..HEAD {
            cats.push((k, k));
            probs.push(w * h(k as f64));
        }
        let mut lo = HEAD;
        let mut tail_lo = tail_h(HEAD);
        while lo <= k_max {
            let hi = if lo > k_max / 2 { k_max } else { (2 * lo - 1).min(k_max) };
            let tail_hi = tail_h(hi + 1);
            cats.push((lo, hi));
            probs.push(w * (tail_lo - tail_hi));
            tail_lo = tail_hi;
            if hi == k_max {
                break;
            }
            lo = hi + 1;
        }
        let truncated_mass: f64 = probs.iter().sum();
        let missing_mean = w * tail_kh(k_max + 1);
        for p in probs.iter_mut() {
            *p /= truncated_mass;
        }
        let mut suffix = vec![0.0; probs.len() + 1];
        for i in (0..probs.len()).rev() {
            suffix[i] = suffix[i + 1] + probs[i];
        }
        Ok(HeavyTail {
            mean,
            k0,
            k_max,
            atom,
            z,
            cats,
            probs,
            suffix,
            truncated_mass,
            truncated_mean: (mean - missing_mean) / truncated_mass,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn k0(&self) -> u64 {
        self.k0
    }

    pub fn k_max(&self) -> u64 {
        self.k_max
    }

    /// Probability of the atom at 1.
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// Normaliser `sum_{k >= k0} h(k)`.
    pub fn normaliser(&self) -> f64 {
        self.z
    }

    /// Mean of the law actually sampled (conditioned on `k <= k_max`).
    pub fn truncated_mean(&self) -> f64 {
        self.truncated_mean
    }

    /// Mass of the untruncated law above `k_max`.
    pub fn truncated_away(&self) -> f64 {
        1.0 - self.truncated_mass
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match k {
            1 => self.atom,
            k if k >= self.k0 => (1.0 - self.atom) * h(k as f64) / self.z,
            _ => 0.0,
        }
    }

    /// `P(X >= n)` for the untruncated law.
    pub fn tail(&self, n: u64) -> f64 {
        if n <= 1 {
            return 1.0;
        }
        let w = (1.0 - self.atom) / self.z;
        if n <= self.k0 {
            return 1.0 - self.atom;
        }
        if n < HEAD {
            let head: f64 = (n..HEAD).map(|k| h(k as f64)).sum();
            w * (head + tail_h(HEAD))
        } else {
            w * tail_h(n)
        }
    }

    /// `sum_{k >= n} pmf(k) k`.
    pub fn mean_tail(&self, n: u64) -> f64 {
        let w = (1.0 - self.atom) / self.z;
        let n = n.max(self.k0);
        if n < HEAD {
            let head: f64 = (n..HEAD).map(|k| k as f64 * h(k as f64)).sum();
            w * (head + tail_kh(HEAD))
        } else {
            w * tail_kh(n)
        }
    }

    fn draw_in(&self, cat: usize, rng: &mut StreamRng) -> u64 {
        let (lo, hi) = self.cats[cat];
        if lo == hi {
            return lo;
        }
        let top = h(lo as f64);
        loop {
            let k = lo + rng.below(hi - lo + 1);
            if rng.uniform() * top <= h(k as f64) {
                return k;
            }
        }
    }

    /// Draw from categories `from..` conditioned on landing there.
    fn draw_from(&self, from: usize, rng: &mut StreamRng) -> u64 {
        let target = rng.uniform() * self.suffix[from];
        // suffix is decreasing; find the category whose slice contains target.
        let mut lo = from;
        let mut hi = self.probs.len() - 1;
        let base = self.suffix[from];
        while lo < hi {
            let mid = (lo + hi) / 2;
            if base - self.suffix[mid + 1] > target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        self.draw_in(lo, rng)
    }

    pub fn sample(&self, rng: &mut StreamRng) -> u64 {
        self.draw_from(0, rng)
    }

    /// Sum of `c` independent draws: sequential binomial splitting over the
    /// categories, then single draws once few remain.
    pub fn sample_sum(&self, c: u64, rng: &mut StreamRng) -> Result<u64> {
        let mut total: u64 = 0;
        let mut remaining = c;
        let mut cat = 0;
        while remaining > 0 {
            if remaining <= SMALL || cat + 1 == self.probs.len() {
                for _ in 0..remaining {
                    total = total.checked_add(self.draw_from(cat, rng)).ok_or(BmcError::CountOverflow)?;
                }
                break;
            }
            let p = (self.probs[cat] / self.suffix[cat]).clamp(0.0, 1.0);
            let n = Binomial::new(remaining, p).expect("valid binomial").sample(rng);
            if n > 0 {
                let (lo, hi) = self.cats[cat];
                if lo == hi {
                    total = n
                        .checked_mul(lo)
                        .and_then(|v| total.checked_add(v))
                        .ok_or(BmcError::CountOverflow)?;
                } else {
                    for _ in 0..n {
                        total = total.checked_add(self.draw_in(cat, rng)).ok_or(BmcError::CountOverflow)?;
                    }
                }
            }
            remaining -= n;
            cat += 1;
        }
        Ok(total)
    }
}
