//! Laplace transforms `G(s) = E e^{-sX}` and their remainders
//! `R(s) = G(s) - 1 + mean * s = E psi(sX)`.

use super::heavy_tail::{h, HEAD};
use super::offspring::OffspringPmf;
use crate::error::{BmcError, Result};
use crate::quadrature::{bisect, integrate};

/// `psi(t) = e^{-t} - 1 + t`, accurate near zero.
pub fn psi(t: f64) -> f64 {
    if t.abs() < 0.1 {
        // Alternating series; 10 terms reach 1e-17 relative at |t| = 0.1.
        let mut term = t * t / 2.0;
        let mut sum = 0.0;
        for n in 3..13 {
            sum += term;
            term *= -t / n as f64;
        }
        sum
    } else {
        (-t).exp_m1() + t
    }
}

#[derive(Clone, Debug)]
pub struct LaplaceToolkit {
    theta: OffspringPmf,
    mean: f64,
}

/// `G`, `R` and `s0` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RemainderSuite {
    pub g: f64,
    pub r: f64,
    pub s0: f64,
}

impl LaplaceToolkit {
    pub fn new(theta: OffspringPmf) -> Self {
        let mean = theta.mean();
        LaplaceToolkit { theta, mean }
    }

    pub fn theta(&self) -> &OffspringPmf {
        &self.theta
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `R(s) = sum_k theta(k) psi(sk)`.
    pub fn r(&self, s: f64) -> f64 {
        match &self.theta {
            OffspringPmf::Delta(k) => psi(s * *k as f64),
            OffspringPmf::Explicit { support, probs } => {
                support.iter().zip(probs).map(|(&k, &p)| p * psi(s * k as f64)).sum()
            }
            OffspringPmf::Geometric(q) => {
                let r = 1.0 - q;
                let mut sum = 0.0;
                let mut w = *q;
                let mut k = 1.0;
                loop {
                    let term = w * psi(s * k);
                    sum += term;
                    // Next terms are bounded by a geometric series in r (1 + 1/k).
                    if w < 1e-300 || (term * r * 2.0 / (1.0 - r).max(1e-300) <= 1e-17 * sum && k > 2.0) {
                        return sum;
                    }
                    w *= r;
                    k += 1.0;
                }
            }
            OffspringPmf::HeavyTail(ht) => {
                let w = (1.0 - ht.atom()) / ht.normaliser();
                let head: f64 = (ht.k0()..HEAD).map(|k| h(k as f64) * psi(s * k as f64)).sum();
                ht.atom() * psi(s) + w * (head + heavy_tail_remainder(s))
            }
            OffspringPmf::Envelope(_) => {
                let top = self.theta.max_support().unwrap_or(1 << 20);
                (1..=top.min(1 << 20)).map(|k| self.theta.pmf(k) * psi(s * k as f64)).sum()
            }
        }
    }

    /// `G(s) = E e^{-sX}`.
    pub fn g(&self, s: f64) -> f64 {
        match &self.theta {
            OffspringPmf::Delta(k) => (-s * *k as f64).exp(),
            OffspringPmf::Explicit { support, probs } => {
                support.iter().zip(probs).map(|(&k, &p)| p * (-s * k as f64).exp()).sum()
            }
            OffspringPmf::Geometric(q) => {
                let e = (-s).exp();
                q * e / (1.0 - (1.0 - q) * e)
            }
            _ => 1.0 - self.mean * s + self.r(s),
        }
    }

    /// `s0 = min(1/rho, sup{s : R(s) <= rho s})`, bisected to `1e-9`.
    pub fn s0(&self, rho: f64) -> f64 {
        let cap = 1.0 / rho;
        if self.r(cap) <= rho * cap {
            return cap;
        }
        bisect(|s| self.r(s) - rho * s, 0.0, cap, 1e-9)
    }

    pub fn remainder_suite(&self, s: f64, rho: f64) -> Result<RemainderSuite> {
        if !(s >= 0.0) {
            return Err(BmcError::OutOfRange(format!("s must be non-negative, got {s}")));
        }
        Ok(RemainderSuite { g: self.g(s), r: self.r(s), s0: self.s0(rho) })
    }

    /// `int_lo^hi R(s)/s^2 ds`, integrated in `u = -ln s`.
    pub fn integral_r_over_s2(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(0.0 <= lo && lo < hi) {
            return Err(BmcError::OutOfRange(format!("need 0 <= lo < hi, got [{lo}, {hi}]")));
        }
        let u_lo = -hi.ln();
        let u_hi = if lo == 0.0 { u_lo + 80.0 } else { -lo.ln() };
        let f = |u: f64| self.r((-u).exp()) * u.exp();
        integrate(f, u_lo, u_hi, 1e-15, 1e-11)
    }

    /// Right side of the telescoped Laplace inequality:
    /// `e^{-s} + s / (rho ln rho) * int_0^s R(x)/x^2 dx`.
    pub fn telescoped_bound(&self, s: f64, rho: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok((-s).exp() + s / (rho * rho.ln()) * self.integral_r_over_s2(0.0, s)?)
    }

    /// Increments `int_{u}^{2u} R(e^{-v}) e^{v} dv` for `u` in `us`. For an
    /// L log L-finite law they decay to zero; for the heavy-tail family they
    /// stay near a positive constant times `ln 2`.
    pub fn llogl_increments(&self, us: &[f64]) -> Result<Vec<f64>> {
        us.iter()
            .map(|&u| integrate(|v| self.r((-v).exp()) * v.exp(), u, 2.0 * u, 1e-15, 1e-10))
            .collect()
    }
}

/// `sum_{k >= HEAD} h(k) psi(sk)` by Euler-Maclaurin; the integral is taken
/// in `y = ln x`, with the exact large-`y` tail `psi = s e^y - 1`.
fn heavy_tail_remainder(s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let f = |x: f64| h(x) * psi(s * x);
    let y0 = (HEAD as f64).ln();
    let y1 = y0.max(-s.ln() + 40.0);
    let g = |y: f64| (-y).exp() * psi(s * y.exp()) / (y * y);
    let body = integrate(g, y0, y1, 1e-300_f64.max(1e-18 * s * s), 1e-12).expect("smooth integrand");
    let far = s / y1 - (-y1).exp() / (y1 * y1);
    let n = HEAD as f64;
    let step = 1e-3 * n;
    let d1 = (f(n + step) - f(n - step)) / (2.0 * step);
    body + far + 0.5 * f(n) - d1 / 12.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom_half() -> LaplaceToolkit {
        LaplaceToolkit::new(OffspringPmf::Geometric(0.5))
    }

    #[test]
    fn psi_branches_agree() {
        for t in [0.099_999, 0.1, 0.100_001] {
            assert!((psi(t) - ((-t).exp() - 1.0 + t)).abs() < 1e-15);
        }
        assert_eq!(psi(0.0), 0.0);
        assert!(psi(1e-10) > 0.0);
    }

    #[test]
    fn delta_one_is_psi() {
        let t = LaplaceToolkit::new(OffspringPmf::Delta(1));
        for s in [0.01, 0.3, 2.0] {
            assert!((t.g(s) - (-s).exp()).abs() < 1e-15);
            assert!((t.r(s) - psi(s)).abs() < 1e-15);
        }
        assert_eq!(t.r(0.0), 0.0);
    }

    #[test]
    fn geometric_reference_values() {
        let t = geom_half();
        for (s, want) in [
            (0.1, 0.026_212_868_242_123_56),
            (0.5, 0.435_266_598_393_583_9),
            (1.0, 1.225_399_673_560_564),
            (2f64.powi(-20), 2.728_480_346_756_423e-12),
        ] {
            assert!((t.r(s) - want).abs() < 1e-12 * want, "R({s}) = {} vs {want}", t.r(s));
        }
        // Closed-form G agrees with the remainder representation.
        for s in [0.1, 0.5, 1.0] {
            assert!((t.g(s) - (1.0 - 2.0 * s + t.r(s))).abs() < 1e-14);
        }
    }

    #[test]
    fn remainder_monotonicity_on_grid() {
        let grid: Vec<f64> = (-20..=4).map(|j| 2f64.powi(j)).collect();
        for t in [geom_half(), LaplaceToolkit::new(OffspringPmf::heavy_tail(2.0, 2, 1 << 32).unwrap())] {
            for w in grid.windows(2) {
                assert!(t.r(w[1]) >= t.r(w[0]));
                assert!(t.r(w[1]) / w[1] >= t.r(w[0]) / w[0]);
            }
        }
    }

    #[test]
    fn heavy_tail_remainder_matches_direct_sum() {
        let ht = OffspringPmf::heavy_tail(2.0, 2, 1 << 40).unwrap();
        let t = LaplaceToolkit::new(ht.clone());
        // At s = 0.01 terms beyond 10^5 are tiny in relative terms.
        let s = 0.01;
        let direct: f64 = (1..2_000_000u64).map(|k| ht.pmf(k) * psi(s * k as f64)).sum();
        let OffspringPmf::HeavyTail(h) = &ht else { unreachable!() };
        let tail = s * h.mean_tail(2_000_000) - h.tail(2_000_000);
        assert!(((direct + tail) - t.r(s)).abs() < 1e-7 * t.r(s), "{} vs {}", direct + tail, t.r(s));
    }

    #[test]
    fn s0_is_inverse_rho_for_proper_laws() {
        let t = geom_half();
        assert!((t.s0(2.0) - 0.5).abs() < 1e-9);
        assert!(t.remainder_suite(-1.0, 2.0).is_err());
    }

    #[test]
    fn llogl_dichotomy() {
        let us = [8.0, 16.0, 32.0, 64.0];
        let finite = geom_half().llogl_increments(&us).unwrap();
        assert!(finite.windows(2).all(|w| w[1] < w[0]));
        assert!(finite[3] < 1e-10);
        let heavy = LaplaceToolkit::new(OffspringPmf::heavy_tail(2.0, 2, 1 << 32).unwrap())
            .llogl_increments(&us)
            .unwrap();
        assert!(heavy.iter().all(|&v| v > 0.2), "{heavy:?}");
    }
}
