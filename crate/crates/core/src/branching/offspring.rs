//! Offspring distributions on `{1, 2, ...}`.

use std::sync::Arc;

use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use super::heavy_tail::{HeavyTail, HEAD};
use crate::error::{BmcError, Result};
use crate::rng::StreamRng;

const PMF_TOL: f64 = 1e-12;
/// At or below this many draws, `sample_sum` draws one at a time.
const SMALL: u64 = 16;

/// Value of `sum pi(k) k log k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Llogl {
    Finite(f64),
    Divergent,
}

impl Llogl {
    pub fn is_finite(&self) -> bool {
        matches!(self, Llogl::Finite(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub llogl: Llogl,
}

#[derive(Clone, Debug)]
pub enum OffspringPmf {
    Delta(u64),
    /// `pi(k) = (1-q)^(k-1) q` on `{1, 2, ...}`.
    Geometric(f64),
    /// Finite support, strictly increasing, all `>= 1`.
    Explicit { support: Vec<u64>, probs: Vec<f64> },
    HeavyTail(Arc<HeavyTail>),
    /// Tail function `n -> max_i P_i(X >= n)`.
    Envelope(Vec<OffspringPmf>),
}

/// Coarse tail class, ordered by heaviness.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
enum TailClass {
    Finite(u64),
    Geometric(f64),
    Heavy,
}

impl OffspringPmf {
    pub fn delta(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(BmcError::InvalidPmf("pi(0) must be 0: populations cannot die out".into()));
        }
        Ok(OffspringPmf::Delta(k))
    }

    pub fn geometric(q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(BmcError::InvalidPmf(format!("geometric parameter must lie in (0,1], got {q}")));
        }
        Ok(OffspringPmf::Geometric(q))
    }

    pub fn explicit(support: Vec<u64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(BmcError::InvalidPmf("support and probs must be nonempty and of equal length".into()));
        }
        if support.contains(&0) {
            return Err(BmcError::InvalidPmf("pi(0) must be 0: populations cannot die out".into()));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BmcError::InvalidPmf("support must be strictly increasing".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(BmcError::InvalidPmf("probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(BmcError::InvalidPmf(format!("probabilities sum to {total}, not 1")));
        }
        let (support, probs) = support.into_iter().zip(probs).filter(|&(_, p)| p > 0.0).unzip();
        Ok(OffspringPmf::Explicit { support, probs })
    }

    pub fn heavy_tail(mean: f64, k0: u64, k_max: u64) -> Result<Self> {
        Ok(OffspringPmf::HeavyTail(Arc::new(HeavyTail::new(mean, k0, k_max)?)))
    }

    /// `pi(k)`.
    pub fn pmf(&self, k: u64) -> f64 {
        match self {
            OffspringPmf::Delta(d) => (k == *d) as u8 as f64,
            OffspringPmf::Geometric(q) => {
                if k == 0 {
                    0.0
                } else {
                    (1.0 - q).powf((k - 1) as f64) * q
                }
            }
            OffspringPmf::Explicit { support, probs } => {
                support.binary_search(&k).map(|i| probs[i]).unwrap_or(0.0)
            }
            OffspringPmf::HeavyTail(h) => h.pmf(k),
            OffspringPmf::Envelope(_) => (self.tail(k) - self.tail(k + 1)).max(0.0),
        }
    }

    /// `P(X >= n)`.
    pub fn tail(&self, n: u64) -> f64 {
        if n == 0 {
            return 1.0;
        }
        match self {
            OffspringPmf::Delta(d) => (*d >= n) as u8 as f64,
            OffspringPmf::Geometric(q) => (1.0 - q).powf((n - 1) as f64),
            OffspringPmf::Explicit { support, probs } => {
                let i = support.partition_point(|&k| k < n);
                probs[i..].iter().sum()
            }
            OffspringPmf::HeavyTail(h) => h.tail(n),
            OffspringPmf::Envelope(members) => members.iter().map(|m| m.tail(n)).fold(0.0, f64::max),
        }
    }

    /// Largest support point, if finite.
    pub fn max_support(&self) -> Option<u64> {
        match self {
            OffspringPmf::Delta(d) => Some(*d),
            OffspringPmf::Geometric(q) => (*q == 1.0).then_some(1),
            OffspringPmf::Explicit { support, .. } => support.last().copied(),
            OffspringPmf::HeavyTail(_) => None,
            OffspringPmf::Envelope(ms) => ms.iter().map(|m| m.max_support()).try_fold(0, |a, b| b.map(|b| a.max(b))),
        }
    }

    /// Support points, if finitely many.
    fn finite_points(&self) -> Option<Vec<u64>> {
        match self {
            OffspringPmf::Delta(d) => Some(vec![*d]),
            OffspringPmf::Geometric(q) => (*q == 1.0).then(|| vec![1]),
            OffspringPmf::Explicit { support, .. } => Some(support.clone()),
            _ => None,
        }
    }

    /// Finite support as `(k, pi(k))` pairs.
    pub fn finite_support(&self) -> Option<Vec<(u64, f64)>> {
        let points = match self {
            OffspringPmf::Envelope(_) => (1..=self.max_support()?).collect(),
            other => other.finite_points()?,
        };
        Some(points.into_iter().map(|k| (k, self.pmf(k))).filter(|&(_, p)| p > 0.0).collect())
    }

    fn class(&self) -> TailClass {
        match self {
            OffspringPmf::Geometric(q) if *q < 1.0 => TailClass::Geometric(1.0 - q),
            OffspringPmf::HeavyTail(_) => TailClass::Heavy,
            OffspringPmf::Envelope(ms) => ms
                .iter()
                .map(|m| m.class())
                .fold(TailClass::Finite(0), |a, b| if b > a { b } else { a }),
            other => TailClass::Finite(other.max_support().expect("finite")),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            OffspringPmf::Delta(d) => *d as f64,
            OffspringPmf::Geometric(q) => 1.0 / q,
            OffspringPmf::Explicit { support, probs } => {
                support.iter().zip(probs).map(|(&k, &p)| k as f64 * p).sum()
            }
            OffspringPmf::HeavyTail(h) => h.mean(),
            OffspringPmf::Envelope(ms) => {
                // E X = sum_{n>=1} P(X >= n); the heavy part beyond the cut is
                // bounded by the heaviest member's mean tail.
                let cut = self.sum_cut();
                let head: f64 = (1..=cut).map(|n| self.tail(n)).sum();
                let rest = ms
                    .iter()
                    .filter_map(|m| match m {
                        OffspringPmf::HeavyTail(h) => Some(h.mean_tail(cut + 1)),
                        _ => None,
                    })
                    .fold(0.0, f64::max);
                head + rest
            }
        }
    }

    /// Index beyond which all non-heavy members of an envelope carry
    /// negligible tail mass.
    fn sum_cut(&self) -> u64 {
        match self.class() {
            TailClass::Finite(k) => k,
            TailClass::Geometric(r) => {
                let mut n = 1u64;
                while r.powf(n as f64) * (n as f64).powi(2) > 1e-18 {
                    n += 1;
                }
                n.max(self.max_finite_member())
            }
            TailClass::Heavy => HEAD.max(self.max_finite_member()),
        }
    }

    fn max_finite_member(&self) -> u64 {
        match self {
            OffspringPmf::Envelope(ms) => ms.iter().filter_map(|m| m.max_support()).max().unwrap_or(1),
            other => other.max_support().unwrap_or(1),
        }
    }

    /// Mean and L log L moment. Finite explicit sums larger than
    /// `partial_sum_bound` are reported divergent.
    pub fn moments_with_bound(&self, partial_sum_bound: f64) -> Moments {
        let klogk = |k: u64| k as f64 * (k as f64).ln();
        let llogl = match self {
            OffspringPmf::Delta(d) => Llogl::Finite(klogk(*d)),
            OffspringPmf::Explicit { support, probs } => {
                Llogl::Finite(support.iter().zip(probs).map(|(&k, &p)| p * klogk(k)).sum())
            }
            OffspringPmf::Geometric(q) => Llogl::Finite(geometric_llogl(*q)),
            OffspringPmf::HeavyTail(_) => Llogl::Divergent,
            OffspringPmf::Envelope(_) => match self.class() {
                TailClass::Heavy => Llogl::Divergent,
                _ => {
                    let cut = self.sum_cut();
                    Llogl::Finite((2..=cut).map(|k| self.pmf(k) * klogk(k)).sum())
                }
            },
        };
        let llogl = match llogl {
            Llogl::Finite(v) if v > partial_sum_bound => Llogl::Divergent,
            other => other,
        };
        Moments { mean: self.mean(), llogl }
    }

    pub fn moments(&self) -> Moments {
        self.moments_with_bound(DEFAULT_PARTIAL_SUM_BOUND)
    }

    /// `self` dominates `other`: `other[n, inf) <= self[n, inf)` for all `n`.
    pub fn dominates(&self, other: &OffspringPmf) -> bool {
        const EPS: f64 = 1e-15;
        let (mine, theirs) = (self.class(), other.class());
        let class_ok = match (mine, theirs) {
            (_, TailClass::Finite(_)) => true,
            (TailClass::Geometric(r), TailClass::Geometric(r2)) => r2 <= r,
            (TailClass::Heavy, TailClass::Geometric(_)) => true,
            (TailClass::Heavy, TailClass::Heavy) => true,
            _ => false,
        };
        if !class_ok {
            return false;
        }
        if let (OffspringPmf::HeavyTail(a), OffspringPmf::HeavyTail(b)) = (self, other) {
            if a.k0() == b.k0() {
                return b.atom() >= a.atom() - EPS;
            }
        }
        if let (OffspringPmf::Geometric(q), OffspringPmf::Geometric(q2)) = (self, other) {
            return q2 >= q;
        }
        // Pointwise on the head, then on a geometric grid using
        // monotonicity: other(n) <= other(n_j) <= self(n_{j+1}) <= self(n).
        let head = match theirs {
            TailClass::Finite(k) => k + 1,
            _ => HEAD,
        };
        if (1..=head).any(|n| other.tail(n) > self.tail(n) + EPS) {
            return false;
        }
        if let TailClass::Finite(_) = theirs {
            return true;
        }
        let mut n = head;
        loop {
            let next = n + n / 8;
            let t = other.tail(n);
            if t < 1e-300 || n > 1 << 60 {
                return true;
            }
            if t > self.tail(next) + EPS {
                return false;
            }
            n = next;
        }
    }

    /// Single draw.
    pub fn sample(&self, rng: &mut StreamRng) -> u64 {
        match self {
            OffspringPmf::Delta(d) => *d,
            OffspringPmf::Geometric(q) => geometric_draw(*q, rng),
            OffspringPmf::Explicit { support, probs } => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for (&k, &p) in support.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return k;
                    }
                }
                *support.last().expect("nonempty")
            }
            OffspringPmf::HeavyTail(h) => h.sample(rng),
            OffspringPmf::Envelope(_) => {
                // X >= n iff U < tail(n).
                let u = rng.uniform();
                let mut hi = 2u64;
                while self.tail(hi) > u {
                    hi *= 2;
                }
                let mut lo = hi / 2;
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if self.tail(mid) > u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        }
    }

    /// Sum of `c` independent draws.
    pub fn sample_sum(&self, c: u64, rng: &mut StreamRng) -> Result<u64> {
        match self {
            OffspringPmf::Delta(d) => d.checked_mul(c).ok_or(BmcError::CountOverflow),
            OffspringPmf::Geometric(q) => {
                if c <= SMALL {
                    return Ok((0..c).map(|_| geometric_draw(*q, rng)).sum());
                }
                if *q == 1.0 {
                    return Ok(c);
                }
                // Failures before the c-th success: Poisson-Gamma mixture.
                let lambda = Gamma::new(c as f64, (1.0 - q) / q).expect("valid gamma").sample(rng);
                let extra = if lambda > 0.0 {
                    Poisson::new(lambda).map_err(|_| BmcError::CountOverflow)?.sample(rng)
                } else {
                    0.0
                };
                if extra >= u64::MAX as f64 {
                    return Err(BmcError::CountOverflow);
                }
                c.checked_add(extra as u64).ok_or(BmcError::CountOverflow)
            }
            OffspringPmf::Explicit { support, probs } => {
                if c <= SMALL {
                    return Ok((0..c).map(|_| self.sample(rng)).sum());
                }
                let mut remaining = c;
                let mut mass_left = 1.0;
                let mut total: u64 = 0;
                for (i, (&k, &p)) in support.iter().zip(probs).enumerate() {
                    let n = if i + 1 == support.len() {
                        remaining
                    } else {
                        let pr = (p / mass_left).clamp(0.0, 1.0);
                        Binomial::new(remaining, pr).expect("valid binomial").sample(rng)
                    };
                    total = n.checked_mul(k).and_then(|v| total.checked_add(v)).ok_or(BmcError::CountOverflow)?;
                    remaining -= n;
                    mass_left -= p;
                    if remaining == 0 {
                        break;
                    }
                }
                Ok(total)
            }
            OffspringPmf::HeavyTail(h) => h.sample_sum(c, rng),
            OffspringPmf::Envelope(_) => {
                let mut total: u64 = 0;
                for _ in 0..c {
                    total = total.checked_add(self.sample(rng)).ok_or(BmcError::CountOverflow)?;
                }
                Ok(total)
            }
        }
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match self {
            OffspringPmf::Delta(k) => format!("delta({k})"),
            OffspringPmf::Geometric(q) => format!("geometric({q})"),
            OffspringPmf::Explicit { support, probs } => format!("explicit({support:?}, {probs:?})"),
            OffspringPmf::HeavyTail(h) => format!("heavy_tail(mean={}, k0={}, k_max={})", h.mean(), h.k0(), h.k_max()),
            OffspringPmf::Envelope(ms) => {
                format!("envelope[{}]", ms.iter().map(|m| m.describe()).collect::<Vec<_>>().join(", "))
            }
        }
    }
}

pub const DEFAULT_PARTIAL_SUM_BOUND: f64 = 1e9;

#[inline]
fn geometric_draw(q: f64, rng: &mut StreamRng) -> u64 {
    if q >= 1.0 {
        return 1;
    }
    1 + (rng.uniform_pos().ln() / (1.0 - q).ln()).floor() as u64
}

/// `sum_k (1-q)^(k-1) q k ln k`, summed until the remaining tail, bounded
/// by the ratio test, is below `1e-16` relative.
fn geometric_llogl(q: f64) -> f64 {
    if q >= 1.0 {
        return 0.0;
    }
    let r = 1.0 - q;
    let mut sum = 0.0;
    let mut k = 2u64;
    loop {
        let kf = k as f64;
        let term = r.powf(kf - 1.0) * q * kf * kf.ln();
        sum += term;
        // Successive term ratio r (1+1/k) ln(k+1)/ln k decreases towards r.
        let ratio = r * (1.0 + 1.0 / kf) * (kf + 1.0).ln() / kf.ln();
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < 1e-16 * sum {
            return sum;
        }
        k += 1;
    }
}

/// Pointwise supremum of tails over a family.
///
/// Finite families of finite-support laws give an explicit pmf, purely
/// geometric families the heaviest geometric. Mixed families give the
/// [`OffspringPmf::Envelope`] variant. Fails when the envelope mean (the
/// sum of its tail) exceeds `partial_sum_bound`, which is how a family with
/// unbounded means shows up at finite size.
pub fn envelope(family: &[OffspringPmf], partial_sum_bound: f64) -> Result<OffspringPmf> {
    if family.is_empty() {
        return Err(BmcError::EnvelopeFailure("empty family".into()));
    }
    if family.len() == 1 {
        return Ok(family[0].clone());
    }
    let flat: Vec<OffspringPmf> = family
        .iter()
        .flat_map(|m| match m {
            OffspringPmf::Envelope(ms) => ms.clone(),
            other => vec![other.clone()],
        })
        .collect();
    let candidate = if let Some(supports) = flat.iter().map(|m| m.finite_points()).collect::<Option<Vec<_>>>() {
        // The sup-tail only drops just after a member's support point.
        let mut points: Vec<u64> = supports.into_iter().flatten().collect();
        points.sort_unstable();
        points.dedup();
        let tail = |n: u64| flat.iter().map(|m| m.tail(n)).fold(0.0, f64::max);
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for k in points {
            let p = tail(k) - tail(k + 1);
            if p > 0.0 {
                support.push(k);
                probs.push(p);
            }
        }
        OffspringPmf::Explicit { support, probs }
    } else if let Some(qs) = flat
        .iter()
        .map(|m| match m {
            OffspringPmf::Geometric(q) => Some(*q),
            _ => None,
        })
        .collect::<Option<Vec<_>>>()
    {
        OffspringPmf::Geometric(qs.into_iter().fold(1.0, f64::min))
    } else if let Some(dominant) = flat.iter().find(|m| flat.iter().all(|o| m.dominates(o))) {
        dominant.clone()
    } else {
        OffspringPmf::Envelope(flat)
    };
    let mean = candidate.mean();
    if !mean.is_finite() || mean > partial_sum_bound {
        return Err(EnvelopeFailure::too_heavy(mean, partial_sum_bound));
    }
    Ok(candidate)
}

struct EnvelopeFailure;

impl EnvelopeFailure {
    fn too_heavy(mean: f64, bound: f64) -> BmcError {
        BmcError::EnvelopeFailure(format!(
            "sup-tail sum {mean:.3e} exceeds the partial-sum bound {bound:.3e}"
        ))
    }
}
