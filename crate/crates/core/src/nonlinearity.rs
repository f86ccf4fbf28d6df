//! Odd power-sum nonlinearities `f(t) = Σ a_j |t|^{p_j-2} t` and their dual
//! counterparts.
//!
//! With every `a_j > 0` and `p_j > 2`, `f` is odd, strictly increasing and
//! convex on `t > 0`, with `f(0) = f′(0) = 0`. Its inverse `h` is therefore
//! odd, increasing and concave on `t > 0`, and `H(t) = ∫₀ᵗ h` is even.
//!
//! `H` is evaluated through the identity `H(t) = t·h(t) − F(h(t))` (integrate
//! `∫₀^{h(t)} r f′(r) dr` by parts), which costs one inversion and no
//! quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `a·|t|^{p-2}·t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub a: f64,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Nonlinearity {
    terms: Vec<Term>,
    /// Largest exponent.
    p: f64,
    /// Smallest exponent.
    q: f64,
    /// Coefficient of the largest-exponent term(s); `f(t)/t^{p-1} → c0`.
    c0: f64,
    /// Coefficient of the smallest-exponent term(s); `f(t)/t^{q-1} → b0` at 0.
    b0: f64,
}

impl TryFrom<Vec<(f64, f64)>> for Nonlinearity {
    type Error = Error;

    fn try_from(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Nonlinearity::new(pairs.into_iter().map(|(a, p)| Term { a, p }).collect())
    }
}

impl From<Nonlinearity> for Vec<(f64, f64)> {
    fn from(nl: Nonlinearity) -> Self {
        nl.terms.iter().map(|t| (t.a, t.p)).collect()
    }
}

const NEWTON_MAX_ITERS: usize = 200;

impl Nonlinearity {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidNonlinearity("nonlinearity required".into()));
        }
        for t in &terms {
            if !(t.a.is_finite() && t.a > 0.0) {
                return Err(Error::InvalidNonlinearity(format!(
                    "coefficient must be positive, got {}",
                    t.a
                )));
            }
            if !(t.p.is_finite() && t.p > 2.0) {
                return Err(Error::InvalidNonlinearity(format!(
                    "exponent must exceed 2, got {}",
                    t.p
                )));
            }
        }
        let p = terms.iter().map(|t| t.p).fold(f64::NEG_INFINITY, f64::max);
        let q = terms.iter().map(|t| t.p).fold(f64::INFINITY, f64::min);
        let c0 = terms.iter().filter(|t| t.p == p).map(|t| t.a).sum();
        let b0 = terms.iter().filter(|t| t.p == q).map(|t| t.a).sum();
        Ok(Self { terms, p, q, c0, b0 })
    }

    /// `f(t) = |t|^{p-2} t`.
    pub fn pure_power(p: f64) -> Result<Self> {
        Self::new(vec![Term { a: 1.0, p }])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    /// Conjugate exponent `p/(p-1)` of the dual space.
    pub fn dual_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn f(&self, t: f64) -> f64 {
        let x = t.abs();
        let v: f64 = self.terms.iter().map(|m| m.a * x.powf(m.p - 1.0)).sum();
        v.copysign(t)
    }

    pub fn f_prime(&self, t: f64) -> f64 {
        let x = t.abs();
        self.terms.iter().map(|m| m.a * (m.p - 1.0) * x.powf(m.p - 2.0)).sum()
    }

    /// `F(t) = ∫₀ᵗ f = Σ a_j |t|^{p_j}/p_j`.
    pub fn f_primitive(&self, t: f64) -> f64 {
        let x = t.abs();
        self.terms.iter().map(|m| m.a * x.powf(m.p) / m.p).sum()
    }

    /// `h = f⁻¹`.
    pub fn h(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let x = t.abs();
        let s = if let [m] = self.terms.as_slice() {
            (x / m.a).powf(1.0 / (m.p - 1.0))
        } else {
            self.invert_positive(x)?
        };
        Ok(s.copysign(t))
    }

    /// Solve `f(s) = x` for `s > 0` by Newton's method safeguarded with
    /// bisection. `f(s) ≥ c0 s^{p-1}` and `f(s) ≥ b0 s^{q-1}`, so the
    /// smaller of the two power-law inverses bounds the root from above.
    /// Since `f` is convex there, Newton from the upper bound decreases
    /// monotonically onto the root.
    fn invert_positive(&self, x: f64) -> Result<f64> {
        let upper = (x / self.c0)
            .powf(1.0 / (self.p - 1.0))
            .min((x / self.b0).powf(1.0 / (self.q - 1.0)));
        let (mut lo, mut hi) = (0.0_f64, upper);
        let mut s = upper;
        for _ in 0..NEWTON_MAX_ITERS {
            let r = self.f(s) - x;
            if r == 0.0 {
                return Ok(s);
            }
            if r > 0.0 {
                hi = hi.min(s);
            } else {
                lo = lo.max(s);
            }
            let mut next = s - r / self.f_prime(s);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 2.0 * f64::EPSILON * s {
                s = next;
                break;
            }
            s = next;
        }
        let residual = (self.f(s) - x).abs();
        if residual <= 1e-12 * (1.0 + x) && residual <= 1e-10 * x {
            Ok(s)
        } else {
            Err(Error::InverseNotConverged { t: x, residual })
        }
    }

    /// `h′(t) = 1/f′(h(t))`, undefined at 0 because `f′(0) = 0`.
    pub fn h_prime(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Err(Error::SingularDerivative);
        }
        Ok(1.0 / self.f_prime(self.h(t)?))
    }

    /// `H(t) = ∫₀ᵗ h = t·h(t) − F(h(t))`.
    pub fn h_primitive(&self, t: f64) -> Result<f64> {
        let x = t.abs();
        let s = self.h(x)?;
        Ok(x * s - self.f_primitive(s))
    }

    /// Spot-check the structural hypotheses on log-spaced samples.
    pub fn validate(&self) -> Diagnostics {
        Validator::new(self, log_samples(1e-6, 1e6, 1000)).run()
    }
}

/// `n` samples log-spaced over `[lo, hi]`.
pub fn log_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub description: &'static str,
    pub passed: bool,
    /// Sample point where the check came closest to failing (or failed).
    pub worst_t: f64,
    pub worst_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub checks: Vec<HypothesisCheck>,
}

impl Diagnostics {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Validator<'a> {
    nl: &'a Nonlinearity,
    ts: Vec<f64>,
    checks: Vec<HypothesisCheck>,
}

impl<'a> Validator<'a> {
    fn new(nl: &'a Nonlinearity, ts: Vec<f64>) -> Self {
        Self {
            nl,
            ts,
            checks: Vec::new(),
        }
    }

    fn push(&mut self, name: &'static str, description: &'static str, passed: bool, worst: (f64, f64)) {
        self.checks.push(HypothesisCheck {
            name,
            description,
            passed,
            worst_t: worst.0,
            worst_value: worst.1,
        });
    }

    /// `(t, margin)` with the smallest margin; passes when all margins > 0.
    fn min_margin(pairs: impl Iterator<Item = (f64, f64)>) -> (bool, (f64, f64)) {
        let worst = pairs.fold((f64::NAN, f64::INFINITY), |acc, (t, m)| {
            if m.is_nan() || m < acc.1 {
                (t, if m.is_nan() { f64::NEG_INFINITY } else { m })
            } else {
                acc
            }
        });
        (worst.1 > 0.0, worst)
    }

    /// Margins for `g` strictly increasing over consecutive samples.
    fn increasing(ts: &[f64], g: impl Fn(f64) -> f64) -> (bool, (f64, f64)) {
        let vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
        Self::min_margin(ts.windows(2).zip(vals.windows(2)).map(|(t, v)| (t[1], v[1] - v[0])))
    }

    fn run(mut self) -> Diagnostics {
        let nl = self.nl;
        let ts = self.ts.clone();
        let h = |t: f64| nl.h(t).unwrap_or(f64::NAN);
        let big_h = |t: f64| nl.h_primitive(t).unwrap_or(f64::NAN);

        let f1 = nl.f(0.0) == 0.0 && nl.f_prime(0.0) == 0.0;
        self.push("f1", "f(0) = f'(0) = 0", f1, (0.0, nl.f_prime(0.0)));

        let (ok, worst) = Self::min_margin(
            ts.iter()
                .map(|&t| (t, 1e-14 * nl.f(t).abs() - (nl.f(-t) + nl.f(t)).abs())),
        );
        let ok = ok || worst.1 == 0.0;
        self.push("f2", "f is odd", ok, worst);

        // deviation from the leading power law is monotone in the limit direction
        let (upper, lower) = (&ts[ts.len() / 2..], &ts[..=ts.len() / 2]);
        let dev_inf = |t: f64| (nl.f(t) / (nl.c0 * t.powf(nl.p - 1.0)) - 1.0).abs();
        let (mono, _) = Self::increasing(upper, |t| -dev_inf(t));
        let last = *upper.last().unwrap();
        let ok = dev_inf(last) <= 1e-12 || (mono && dev_inf(last) < dev_inf(upper[0]));
        self.push("f3", "f(t)/t^(p-1) -> c0 as t -> infinity", ok, (last, dev_inf(last)));

        let dev_0 = |t: f64| (nl.f(t) / (nl.b0 * t.powf(nl.q - 1.0)) - 1.0).abs();
        let (mono, _) = Self::increasing(lower, dev_0);
        let first = lower[0];
        let ok = dev_0(first) <= 1e-12 || (mono && dev_0(first) < dev_0(*lower.last().unwrap()));
        self.push("f4", "f(t)/t^(q-1) -> b0 as t -> 0+", ok, (first, dev_0(first)));

        let (ok, worst) = Self::increasing(&ts, |t| nl.f(t) / t);
        self.push("f5", "f(t)/t is increasing for t > 0", ok, worst);

        let (ok, worst) = Self::min_margin(ts.iter().map(|&t| (t, if h(-t) == -h(t) { 1.0 } else { -1.0 })));
        self.push("h0", "h(0) = 0 and h is odd", ok && h(0.0) == 0.0, worst);

        let (ok, worst) = Self::min_margin(ts.iter().map(|&t| {
            let fwd = 1e-12 * (1.0 + t) - (nl.f(h(t)) - t).abs();
            let back = 1e-10 * (1.0 + t) - (h(nl.f(t)) - t).abs();
            (t, fwd.min(back))
        }));
        self.push("inverse", "f(h(t)) = t and h(f(t)) = t", ok, worst);

        let (ok, worst) = Self::increasing(&ts, |t| -h(t) / t);
        self.push("h_ratio", "h(t)/t is decreasing for t > 0", ok, worst);

        // f(s) >= c0 s^(p-1) gives H(t) <= (p-1)/p c0^(-1/(p-1)) t^(p/(p-1))
        let pe = nl.dual_exponent();
        let c1 = (nl.p - 1.0) / nl.p * nl.c0.powf(-1.0 / (nl.p - 1.0));
        let (ok, worst) = Self::min_margin(
            ts.iter()
                .map(|&t| (t, c1 * (1.0 + 1e-12) - big_h(t) / t.powf(pe))),
        );
        self.push("h3_upper", "H(t) <= c1 t^(p/(p-1)) for t >= 0", ok, worst);

        let (ok, worst) = Self::min_margin(ts.iter().map(|&t| (t, big_h(t) - 0.5 * h(t) * t)));
        self.push("h2", "H(t) - h(t)t/2 > 0 for t > 0", ok, worst);

        let (ok, worst) = Self::increasing(&ts, |t| big_h(t) - 0.5 * h(t) * t);
        self.push("h4", "H(t) - h(t)t/2 is increasing for t > 0", ok, worst);

        let (ok, worst) = Self::min_margin(ts.iter().map(|&t| {
            let hp = nl.h_prime(t).unwrap_or(f64::NAN);
            (t, (h(t) * t - hp * t * t) / (h(t) * t))
        }));
        self.push("h_prime", "h(t)t > h'(t)t^2 for t != 0", ok, worst);

        Diagnostics { checks: self.checks }
    }
}
