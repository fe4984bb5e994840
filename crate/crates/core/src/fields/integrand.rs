use alloc::format;
use alloc::string::String;
use core::fmt;

use super::field::SymMatrix;
use crate::error::{invalid, Result};
use crate::math;

/// Convex integrand `f(p)` of the horizontal gradient, homogeneous of
/// degree `α ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrand {
    /// `f(p) = Σ p_i²`.
    SquaredNorm,
    /// `f(p) = |p|^α`.
    Power(f64),
}

impl Default for Integrand {
    fn default() -> Self {
        Integrand::SquaredNorm
    }
}

impl Integrand {
    pub fn power(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha >= 1.0 {
            Ok(Integrand::Power(alpha))
        } else {
            Err(invalid("alpha", format!("{alpha} must be finite and >= 1")))
        }
    }

    /// Parses `squared_norm` or `power:<alpha>`.
    pub fn parse(id: &str) -> Result<Self> {
        let id = id.trim();
        if id == "squared_norm" {
            return Ok(Integrand::SquaredNorm);
        }
        match id.strip_prefix("power:").map(|a| a.trim().parse::<f64>()) {
            Some(Ok(alpha)) => Integrand::power(alpha),
            _ => Err(invalid(
                "integrand",
                format!("`{id}` is not `squared_norm` or `power:<alpha>`"),
            )),
        }
    }

    pub fn id(&self) -> String {
        format!("{self}")
    }

    /// Homogeneity degree `α`.
    pub fn degree(&self) -> f64 {
        match self {
            Integrand::SquaredNorm => 2.0,
            Integrand::Power(a) => *a,
        }
    }

    /// Uniform lower bound on `D²f`, when one exists.
    pub fn convexity_constant(&self) -> Option<f64> {
        match self {
            Integrand::SquaredNorm => Some(2.0),
            Integrand::Power(a) if *a == 2.0 => Some(2.0),
            Integrand::Power(_) => None,
        }
    }

    /// True where the Hessian is undefined: `α < 2` at `p = 0`.
    pub fn is_singular(&self, p: &[f64]) -> bool {
        match self {
            Integrand::SquaredNorm => false,
            Integrand::Power(a) => *a < 2.0 && p.iter().all(|&v| v == 0.0),
        }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        let sq: f64 = p.iter().map(|v| v * v).sum();
        match self {
            Integrand::SquaredNorm => sq,
            Integrand::Power(a) => math::pow(sq, 0.5 * a),
        }
    }

    /// `f_p(p)`; zero at `p = 0`.
    pub fn gradient_into(&self, p: &[f64], out: &mut [f64]) {
        let scale = match self {
            Integrand::SquaredNorm => 2.0,
            Integrand::Power(a) => {
                let sq: f64 = p.iter().map(|v| v * v).sum();
                if sq == 0.0 {
                    0.0
                } else {
                    a * math::pow(sq, 0.5 * a - 1.0)
                }
            }
        };
        for (o, v) in out.iter_mut().zip(p) {
            *o = scale * v;
        }
    }

    pub fn gradient(&self, p: &[f64]) -> alloc::vec::Vec<f64> {
        let mut out = alloc::vec![0.0; p.len()];
        self.gradient_into(p, &mut out);
        out
    }

    /// `f_pp(p)`; zero where [`Integrand::is_singular`] holds.
    pub fn hessian(&self, p: &[f64]) -> SymMatrix {
        let m = p.len();
        match self {
            Integrand::SquaredNorm => SymMatrix::identity(m).scale(2.0),
            Integrand::Power(a) => {
                let sq: f64 = p.iter().map(|v| v * v).sum();
                let mut h = SymMatrix::zeros(m);
                if sq == 0.0 {
                    if *a == 2.0 {
                        return SymMatrix::identity(m).scale(2.0);
                    }
                    return h;
                }
                let base = a * math::pow(sq, 0.5 * a - 1.0);
                for i in 0..m {
                    for j in i..m {
                        let mut v = (a - 2.0) * p[i] * p[j] / sq;
                        if i == j {
                            v += 1.0;
                        }
                        h.set(i, j, base * v);
                    }
                }
                h
            }
        }
    }

    /// `(f^{k-1}(p) f_p(p) - f^{k-1}(q) f_p(q)) · (p - q)`.
    pub fn monotonicity_gap(&self, p: &[f64], q: &[f64], k: u32) -> f64 {
        let e = k.saturating_sub(1) as i32;
        let fp = math::powi(self.value(p), e);
        let fq = math::powi(self.value(q), e);
        let gp = self.gradient(p);
        let gq = self.gradient(q);
        (0..p.len())
            .map(|i| (fp * gp[i] - fq * gq[i]) * (p[i] - q[i]))
            .sum()
    }
}

impl fmt::Display for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Integrand::SquaredNorm => f.write_str("squared_norm"),
            Integrand::Power(a) => write!(f, "power:{a}"),
        }
    }
}
