//! Closed-form probability and step bounds.

use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::graph::Digraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub d_max_out: usize,
    pub diam: u32,
    pub d_prime: u64,
    pub p0: f64,
    pub u_v: u32,
    /// `M = eta_max + 1`.
    pub m_levels: u64,
}

impl BoundInputs {
    /// Graph-derived fields from `g`; `D' = D`.
    pub fn from_graph(g: &Digraph, p0: f64, u_v: u32, m_levels: u64) -> Result<Self, crate::GraphError> {
        let diam = g.diameter()?;
        Ok(BoundInputs {
            n: g.node_count(),
            d_max_out: g.max_out_degree(),
            diam,
            d_prime: u64::from(diam),
            p0,
            u_v,
            m_levels,
        })
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(BoundError::Inapplicable(format!("p0 = {} must lie in (0, 1)", self.p0)));
        }
        if self.n < 2 || self.d_max_out == 0 || self.diam == 0 || self.d_prime == 0 {
            return Err(BoundError::Inapplicable("n >= 2 and positive D+max, D, D' required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BoundError {
    #[error("bound inapplicable: {0}")]
    Inapplicable(String),
}

/// An exact bound value. `vacuous` marks values outside `[0, 1]`, which are
/// kept unclamped here and only clamped by [`Bound::clamped`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    pub exact: BigRational,
    pub vacuous: bool,
}

impl Bound {
    fn new(exact: BigRational) -> Self {
        let vacuous = exact.is_negative() || exact > BigRational::one();
        Bound { exact, vacuous }
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.exact)
    }

    pub fn clamped(&self) -> BigRational {
        if self.exact.is_negative() {
            BigRational::zero()
        } else if self.exact > BigRational::one() {
            BigRational::one()
        } else {
            self.exact.clone()
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ {:.12e}", self.exact, self.to_f64())?;
        if self.vacuous {
            write!(f, " (vacuous; clamped to {})", self.clamped())?;
        }
        Ok(())
    }
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn int(v: impl Into<BigInt>) -> BigRational {
    BigRational::from_integer(v.into())
}

fn inv_pow(base: u64, exp: u64) -> BigRational {
    let den = num_traits::pow(BigInt::from(base), exp as usize);
    BigRational::new(BigInt::one(), den)
}

/// `(1 + D+max)^(-D)`.
pub fn lemma1_bound(inputs: &BoundInputs) -> BigRational {
    inv_pow(1 + inputs.d_max_out as u64, u64::from(inputs.diam))
}

/// `n (1 + D+max)^(-2D)`.
pub fn lemma2_bound(inputs: &BoundInputs) -> Bound {
    Bound::new(int(inputs.n as u64) * inv_pow(1 + inputs.d_max_out as u64, 2 * u64::from(inputs.diam)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct K0 {
    pub epsilon_prime: f64,
    pub tau_prime: u64,
    pub epsilon_dprime: f64,
    pub tau_dprime: u64,
    pub k0: u64,
}

/// Largest admissible `eps' = eps'' = 1 - 2^(log2 sqrt(p0) / (n - 1))`, i.e.
/// `1 - p0^(1 / (2 (n - 1)))`.
pub fn epsilon(p0: f64, n: usize) -> f64 {
    -(p0.ln() / (2.0 * (n as f64 - 1.0))).exp_m1()
}

fn tau(eps: f64, success: &BigRational) -> Result<u64, BoundError> {
    if success >= &BigRational::one() {
        return Err(BoundError::Inapplicable("per-window success bound is at least 1".into()));
    }
    // ln(1 - x) through ln_1p keeps precision for tiny x
    let denom = (-ratio_to_f64(success)).ln_1p();
    let t = (eps.ln() / denom).ceil();
    if !t.is_finite() || t >= 2f64.powi(62) {
        return Err(BoundError::Inapplicable(format!("tau overflows ({t})")));
    }
    Ok((t as u64).max(1))
}

/// `k0 = (n-1) tau' D + (n-1) tau'' D + D'`.
pub fn theorem2_k0(inputs: &BoundInputs) -> Result<K0, BoundError> {
    inputs.validate()?;
    let l2 = lemma2_bound(inputs);
    if l2.exact >= BigRational::one() {
        return Err(BoundError::Inapplicable(format!(
            "pair-meeting bound {} is at least 1, so log(1 - bound) is undefined",
            l2.exact
        )));
    }
    let eps = epsilon(inputs.p0, inputs.n);
    let tau_prime = tau(eps, &l2.exact)?;
    let tau_dprime = tau(eps, &lemma1_bound(inputs))?;
    let m = inputs.n as u64 - 1;
    let d = u64::from(inputs.diam);
    let k0 = m
        .checked_mul(tau_prime)
        .and_then(|a| a.checked_mul(d))
        .and_then(|a| m.checked_mul(tau_dprime).and_then(|b| b.checked_mul(d)).and_then(|b| a.checked_add(b)))
        .and_then(|a| a.checked_add(inputs.d_prime))
        .ok_or_else(|| BoundError::Inapplicable("k0 overflows".into()))?;
    Ok(K0 { epsilon_prime: eps, tau_prime, epsilon_dprime: eps, tau_dprime, k0 })
}

fn binomial(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn elimination_p(m_levels: u64) -> (BigRational, BigRational) {
    let q = BigRational::new(BigInt::one(), BigInt::from(m_levels));
    (BigRational::one() - &q, q)
}

/// `1 - (n-1) C(U_v, n-1) p^(n-1) (1-p)^(U_v-n+1)` with `p = 1 - 1/M`;
/// requires `U_v > 2(n-1)` and `M >= 2`.
pub fn leader_success_lower_bound(u_v: u32, n: usize, m_levels: u64) -> Result<Bound, BoundError> {
    let (u, n) = (u64::from(u_v), n as u64);
    if n < 2 {
        return Err(BoundError::Inapplicable("n >= 2 required".into()));
    }
    if u <= 2 * (n - 1) {
        return Err(BoundError::Inapplicable(format!("U_v = {u} must exceed 2(n - 1) = {}", 2 * (n - 1))));
    }
    if m_levels < 2 {
        return Err(BoundError::Inapplicable(format!("M = {m_levels} must be at least 2")));
    }
    let (p, q) = elimination_p(m_levels);
    let term = int(n - 1)
        * BigRational::from_integer(binomial(u, n - 1))
        * num_traits::pow(p, (n - 1) as usize)
        * num_traits::pow(q, (u - n + 1) as usize);
    Ok(Bound::new(BigRational::one() - term))
}

/// `sum_{k >= n-1} C(U_v, k) p^k (1-p)^(U_v-k)`: at least `n - 1`
/// eliminations in `U_v` independent rounds. No precondition on `U_v`.
pub fn leader_binomial_tail(u_v: u32, n: usize, m_levels: u64) -> BigRational {
    let (u, n) = (u64::from(u_v), n as u64);
    let (p, q) = elimination_p(m_levels.max(1));
    let lo = n.saturating_sub(1);
    (lo..=u)
        .map(|k| {
            BigRational::from_integer(binomial(u, k))
                * num_traits::pow(p.clone(), k as usize)
                * num_traits::pow(q.clone(), (u - k) as usize)
        })
        .fold(BigRational::zero(), |a, b| a + b)
}

/// Structured plain-text report of every bound for `inputs`.
pub fn bound_report(inputs: &BoundInputs) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "inputs: n={} dmax={} diam={} d_prime={} p0={} uv={} levels={}",
        inputs.n, inputs.d_max_out, inputs.diam, inputs.d_prime, inputs.p0, inputs.u_v, inputs.m_levels
    );
    let l1 = lemma1_bound(inputs);
    let _ = writeln!(s, "lemma1: {} ~ {:.12e}", l1, ratio_to_f64(&l1));
    let _ = writeln!(s, "lemma2: {}", lemma2_bound(inputs));
    match theorem2_k0(inputs) {
        Ok(k) => {
            let _ = writeln!(s, "epsilon_prime: {:.12e}", k.epsilon_prime);
            let _ = writeln!(s, "tau_prime: {}", k.tau_prime);
            let _ = writeln!(s, "epsilon_dprime: {:.12e}", k.epsilon_dprime);
            let _ = writeln!(s, "tau_dprime: {}", k.tau_dprime);
            let _ = writeln!(s, "k0: {}", k.k0);
        }
        Err(e) => {
            let _ = writeln!(s, "k0: {e}");
        }
    }
    match leader_success_lower_bound(inputs.u_v, inputs.n, inputs.m_levels) {
        Ok(b) => {
            let _ = writeln!(s, "leader: {b}");
        }
        Err(e) => {
            let _ = writeln!(s, "leader: {e}");
        }
    }
    s
}
