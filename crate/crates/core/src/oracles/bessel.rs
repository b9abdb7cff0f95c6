//! Order-one Bessel functions of the first and second kind.
//!
//! For `u <= 20` the power series are summed in double-double arithmetic
//! (the alternating terms reach ~1e7 near `u = 20`, so plain `f64` would lose
//! about nine digits). Beyond the crossover the Hankel asymptotic expansion is
//! used, truncated at its smallest term.

use crate::error::{Error, Result};

pub const SERIES_LIMIT: f64 = 20.0;

const EULER_GAMMA: Dd = Dd { hi: 0.577_215_664_901_532_9, lo: -4.942_915_152_430_612e-18 };
const PI: Dd = Dd { hi: std::f64::consts::PI, lo: 1.224_646_799_147_353_2e-16 };

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub(crate) const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub(crate) fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub(crate) fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }

    pub(crate) fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    pub(crate) fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub(crate) fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub(crate) fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub(crate) fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul_f64(q1));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul_f64(q2));
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from_f64(q3))
    }

    pub(crate) fn div_f64(self, b: f64) -> Dd {
        self.div(Dd::from_f64(b))
    }
}

/// Series terms `(x/2)^{2k+1} / (k!(k+1)!)` with alternating sign, in double-double.
struct SeriesTerms {
    term: Dd,
    x2: Dd,
    k: u32,
}

impl SeriesTerms {
    fn new(u: f64) -> Self {
        let half = Dd::from_f64(u * 0.5);
        SeriesTerms { term: half, x2: half.mul(half), k: 0 }
    }
}

impl Iterator for SeriesTerms {
    type Item = (u32, Dd);
    fn next(&mut self) -> Option<(u32, Dd)> {
        let out = (self.k, self.term);
        let k = f64::from(self.k);
        self.term = self.term.mul(self.x2).div_f64((k + 1.0) * (k + 2.0)).neg();
        self.k += 1;
        Some(out)
    }
}

fn j1_series_dd(u: f64) -> Dd {
    let mut sum = Dd::ZERO;
    for (_, t) in SeriesTerms::new(u) {
        sum = sum.add(t);
        if t.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) || t.hi == 0.0 {
            break;
        }
    }
    sum
}

/// `Y1(u) = (2/pi) J1(u) (ln(u/2) + gamma) - 2/(pi u) - (1/pi) sum_k (-1)^k (H_k + H_{k+1}) t_k`
fn y1_series(u: f64) -> f64 {
    let j1 = j1_series_dd(u);
    let mut s = Dd::ZERO;
    let mut h_k = Dd::ZERO;
    for (k, t) in SeriesTerms::new(u) {
        let h_k1 = h_k.add(Dd::from_f64(1.0).div_f64(f64::from(k + 1)));
        let term = t.mul(h_k.add(h_k1));
        s = s.add(term);
        h_k = h_k1;
        if term.hi.abs() < 1e-34 * s.hi.abs().max(1e-300) || term.hi == 0.0 {
            break;
        }
    }
    let log_part = Dd::from_f64((u * 0.5).ln()).add(EULER_GAMMA);
    let two = Dd::from_f64(2.0);
    let a = two.mul(j1).mul(log_part);
    let b = two.div_f64(u);
    a.sub(b).sub(s).div(PI).to_f64()
}

/// Hankel expansion returning `(P, Q)` for order one.
fn hankel_pq(x: f64) -> (f64, f64) {
    let mu = 4.0;
    let eight_x = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    // a_k = prod_{i=1..k} (mu - (2i-1)^2) / (k! (8x)^k)
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200u32 {
        let odd = f64::from(2 * k - 1);
        a *= (mu - odd * odd) / (f64::from(k) * eight_x);
        if a.abs() >= prev {
            break;
        }
        prev = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-18 {
            break;
        }
    }
    (p, q)
}

fn asymptotic(x: f64) -> (f64, f64) {
    let (p, q) = hankel_pq(x);
    let (s, c) = x.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    // chi = x - 3pi/4
    let cos_chi = r * (s - c);
    let sin_chi = -r * (s + c);
    let amp = (2.0 / (std::f64::consts::PI * x)).sqrt();
    (amp * (p * cos_chi - q * sin_chi), amp * (p * sin_chi + q * cos_chi))
}

/// Which representation an evaluation used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselMethod {
    Series,
    Asymptotic,
}

pub fn bessel_method(u: f64) -> BesselMethod {
    if u <= SERIES_LIMIT {
        BesselMethod::Series
    } else {
        BesselMethod::Asymptotic
    }
}

/// First-kind Bessel function of order one, `u >= 0`. Odd extension for negative input.
pub fn bessel_j1(u: f64) -> f64 {
    if u < 0.0 {
        return -bessel_j1(-u);
    }
    if u == 0.0 {
        return 0.0;
    }
    match bessel_method(u) {
        BesselMethod::Series => j1_series_dd(u).to_f64(),
        BesselMethod::Asymptotic => asymptotic(u).0,
    }
}

/// Second-kind Bessel function of order one, `u > 0`.
pub fn bessel_y1(u: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Singularity(format!("bessel_y1 requires u > 0, got {u}")));
    }
    Ok(match bessel_method(u) {
        BesselMethod::Series => y1_series(u),
        BesselMethod::Asymptotic => asymptotic(u).1,
    })
}

/// `2 J1(t) / t`, continuous at `t = 0` with value 1.
pub fn two_j1_over_t(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - t * t / 8.0
    } else {
        2.0 * bessel_j1(t) / t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_div_is_accurate() {
        let third = Dd::from_f64(1.0).div_f64(3.0);
        let back = third.mul_f64(3.0).sub(Dd::from_f64(1.0));
        assert!(back.to_f64().abs() < 1e-31);
    }

    #[test]
    fn hankel_matches_series_at_crossover() {
        for &u in &[15.0, 18.0, 20.0] {
            let (ja, ya) = asymptotic(u);
            assert!((ja - j1_series_dd(u).to_f64()).abs() < 1e-12, "J1 at {u}");
            assert!((ya - y1_series(u)).abs() < 1e-12, "Y1 at {u}");
        }
    }
}
