//! Uniformly convex terms, their scaffolds and the composite prox step
//! `argmin_u <z, u> + A psi(u) + m0 phi(u)`.

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::dot;
use crate::spaces::{NormedSpace, SpaceKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegKind {
    /// `lambda/(2(p-1)) |x - x0|_p^2` for `p <= 2`, `lambda/p |x - x0|_p^p` above.
    PowerOfNorm,
    /// `lambda2/2 |x|_2^2 + lambda1 |x|_1`.
    ElasticNet,
    /// `lambda1 |x|_1`.
    L1Only,
    /// The power-of-norm form applied to singular values.
    SchattenPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub kind: RegKind,
    pub space: NormedSpace,
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub center: Vec<f64>,
}

/// `psi = lambda * power_weight(p) * (1/q) |x - x0|^q` with `q = max(2, p)`.
pub fn power_weight(p: f64) -> f64 {
    if p <= 2.0 {
        1.0 / (p - 1.0)
    } else {
        1.0
    }
}

/// Definition-2 constant of `power_weight(p) * (1/q) |.|_p^q`.
///
/// Equals 1 for `p <= 2`. For `p > 2` the sharp constant of `(1/p)|t|^p` is
/// `2^(2-p)`, attained at `x = -y`.
pub fn power_modulus(p: f64) -> f64 {
    if p <= 2.0 {
        1.0
    } else {
        2f64.powf(2.0 - p)
    }
}

fn soft(t: f64, tau: f64) -> f64 {
    t.signum() * (t.abs() - tau).max(0.0)
}

impl Regularizer {
    pub fn power_of_norm(space: NormedSpace, lambda: f64, center: Vec<f64>) -> Result<Self> {
        if space.kind != SpaceKind::VectorLp {
            return Err(invalid("power_of_norm expects an lp space"));
        }
        Self::power(RegKind::PowerOfNorm, space, lambda, center)
    }

    pub fn schatten_power(space: NormedSpace, lambda: f64, center: Vec<f64>) -> Result<Self> {
        if space.kind != SpaceKind::SchattenP {
            return Err(invalid("schatten_power expects a Schatten space"));
        }
        Self::power(RegKind::SchattenPower, space, lambda, center)
    }

    fn power(kind: RegKind, space: NormedSpace, lambda: f64, center: Vec<f64>) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and nonnegative, got {lambda}")));
        }
        if center.len() != space.dim() {
            return Err(mismatch("center does not match the space dimension"));
        }
        Ok(Regularizer { kind, space, lambda, lambda1: 0.0, lambda2: 0.0, center })
    }

    pub fn elastic_net(dim: usize, lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1.is_finite() && lambda2.is_finite()) {
            return Err(invalid("elastic net penalties must be finite and nonnegative"));
        }
        Ok(Regularizer {
            kind: RegKind::ElasticNet,
            space: NormedSpace::lp(2.0, dim)?,
            lambda: lambda2,
            lambda1,
            lambda2,
            center: vec![0.0; dim],
        })
    }

    pub fn l1_only(dim: usize, lambda1: f64) -> Result<Self> {
        let mut r = Self::elastic_net(dim, lambda1, 0.0)?;
        r.kind = RegKind::L1Only;
        r.lambda = 0.0;
        Ok(r)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn is_power(&self) -> bool {
        matches!(self.kind, RegKind::PowerOfNorm | RegKind::SchattenPower)
    }

    pub fn q(&self) -> f64 {
        if self.is_power() {
            self.space.p.max(2.0)
        } else {
            2.0
        }
    }

    /// Uniform-convexity constant usable in Definition 2 with exponent `q()`.
    pub fn modulus(&self) -> f64 {
        match self.kind {
            RegKind::PowerOfNorm | RegKind::SchattenPower => self.lambda * power_modulus(self.space.p),
            RegKind::ElasticNet => self.lambda2,
            RegKind::L1Only => 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self.kind {
            RegKind::PowerOfNorm | RegKind::SchattenPower => {
                if self.lambda == 0.0 {
                    return Ok(0.0);
                }
                let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
                let q = self.q();
                Ok(self.lambda * power_weight(self.space.p) * self.space.norm(&d)?.powf(q) / q)
            }
            RegKind::ElasticNet | RegKind::L1Only => {
                let l1: f64 = x.iter().map(|v| v.abs()).sum();
                Ok(0.5 * self.lambda2 * dot(x, x) + self.lambda1 * l1)
            }
        }
    }

    /// Gradient of a differentiable regularizer.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.is_power() {
            return Err(Error::Unsupported("gradient of an l1-containing regularizer".into()));
        }
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let s = self.lambda * power_weight(self.space.p);
        Ok(self.space.duality_map(&d, self.q())?.into_iter().map(|g| s * g).collect())
    }

    /// `D(u, v) = psi(u) - psi(v) - <grad psi(v), u - v>`.
    pub fn bregman(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.gradient(v)?;
        let du: f64 = u.iter().zip(v).zip(&g).map(|((a, b), gi)| gi * (a - b)).sum();
        Ok((self.eval(u)? - self.eval(v)? - du).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ScaffoldKind {
    /// `weight/q |u - c|^q` in `space`.
    Power { space: NormedSpace, q: f64, weight: f64 },
    /// `1/2 |u - c|_2^2`.
    Euclidean,
}

/// The function `phi` anchoring the v-step, with `phi(u) >= (1/q)|u - c|^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaffold {
    pub kind: ScaffoldKind,
    pub center: Vec<f64>,
}

impl Scaffold {
    /// Scaffold matched to `reg`, centered at `center` (the solver start).
    ///
    /// Power kinds use `phi = psi/lambda`, which for `lambda = 0` is the
    /// `(1/(qbar min(p-1, 1))) |u - c|^qbar` power with `qbar = max(2, p)`.
    pub fn for_regularizer(reg: &Regularizer, center: &[f64]) -> Result<Self> {
        if center.len() != reg.dim() {
            return Err(mismatch("scaffold center does not match the regularizer"));
        }
        let kind = if reg.is_power() {
            ScaffoldKind::Power { space: reg.space, q: reg.q(), weight: power_weight(reg.space.p) }
        } else {
            ScaffoldKind::Euclidean
        };
        Ok(Scaffold { kind, center: center.to_vec() })
    }

    pub fn q(&self) -> f64 {
        match &self.kind {
            ScaffoldKind::Power { q, .. } => *q,
            ScaffoldKind::Euclidean => 2.0,
        }
    }

    /// Definition-2 constant of `phi` with exponent `q()`.
    pub fn modulus(&self) -> f64 {
        match &self.kind {
            ScaffoldKind::Power { space, weight, .. } => {
                if space.p <= 2.0 {
                    weight * (space.p - 1.0)
                } else {
                    weight * power_modulus(space.p)
                }
            }
            ScaffoldKind::Euclidean => 1.0,
        }
    }

    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        let d: Vec<f64> = u.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        match &self.kind {
            ScaffoldKind::Power { space, q, weight } => Ok(weight * space.norm(&d)?.powf(*q) / q),
            ScaffoldKind::Euclidean => Ok(0.5 * dot(&d, &d)),
        }
    }

    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let d: Vec<f64> = u.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        match &self.kind {
            ScaffoldKind::Power { space, q, weight } => {
                Ok(space.duality_map(&d, *q)?.into_iter().map(|g| weight * g).collect())
            }
            ScaffoldKind::Euclidean => Ok(d),
        }
    }

    /// Norm in which the lower bound `phi >= (1/q)|u - c|^q` holds.
    pub fn space(&self) -> Option<NormedSpace> {
        match &self.kind {
            ScaffoldKind::Power { space, .. } => Some(*space),
            ScaffoldKind::Euclidean => None,
        }
    }
}

/// `<z, u> + A psi(u) + m0 phi(u)`.
pub fn prox_objective(reg: &Regularizer, sc: &Scaffold, z: &[f64], a: f64, m0: f64, u: &[f64]) -> Result<f64> {
    let mut v = dot(z, u);
    if a != 0.0 {
        v += a * reg.eval(u)?;
    }
    if m0 != 0.0 {
        v += m0 * sc.eval(u)?;
    }
    Ok(v)
}

/// Exact minimizer of `<z, u> + A psi(u) + m0 phi(u)`.
pub fn composite_prox(reg: &Regularizer, sc: &Scaffold, z: &[f64], a: f64, m0: f64) -> Result<Vec<f64>> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(invalid(format!("prox weight A must be positive, got {a}")));
    }
    if !(m0 >= 0.0 && m0.is_finite()) {
        return Err(invalid(format!("scaffold weight must be nonnegative, got {m0}")));
    }
    if z.len() != reg.dim() || sc.center.len() != reg.dim() {
        return Err(mismatch("prox inputs disagree in dimension"));
    }
    if reg.is_power() {
        power_prox(reg, sc, z, a, m0)
    } else {
        l1_prox(reg, sc, z, a, m0)
    }
}

fn power_prox(reg: &Regularizer, sc: &Scaffold, z: &[f64], a: f64, m0: f64) -> Result<Vec<f64>> {
    let (space, q, w_phi) = match &sc.kind {
        ScaffoldKind::Power { space, q, weight } => (*space, *q, *weight),
        ScaffoldKind::Euclidean => return Err(invalid("power regularizer needs a power scaffold")),
    };
    if space != reg.space || q != reg.q() {
        return Err(invalid("scaffold and regularizer live in different geometries"));
    }
    let c_psi = a * reg.lambda * power_weight(reg.space.p);
    let c_phi = m0 * w_phi;
    let c = c_psi + c_phi;
    let same_center = reg.center == sc.center;
    if c == 0.0 {
        if z.iter().all(|v| *v == 0.0) {
            return Ok(sc.center.clone());
        }
        return Err(Error::Unbounded("linear term with zero curvature".into()));
    }
    if !same_center {
        if space.p == 2.0 {
            // Two Euclidean quadratics merge into one centered at the weighted mean.
            return Ok((0..z.len())
                .map(|i| (c_psi * reg.center[i] + c_phi * sc.center[i] - z[i]) / c)
                .collect());
        }
        if c_psi != 0.0 && c_phi != 0.0 {
            return Err(Error::Unsupported("power prox with distinct centers and p != 2".into()));
        }
    }
    let center = if c_phi == 0.0 { &reg.center } else { &sc.center };
    let w: Vec<f64> = z.iter().map(|v| -v / c).collect();
    let step = space.inverse_duality_map(&w, q)?;
    Ok(center.iter().zip(step).map(|(x, s)| x + s).collect())
}

fn l1_prox(reg: &Regularizer, sc: &Scaffold, z: &[f64], a: f64, m0: f64) -> Result<Vec<f64>> {
    if sc.kind != ScaffoldKind::Euclidean {
        return Err(invalid("l1 regularizers need the Euclidean scaffold"));
    }
    let tau = a * reg.lambda1;
    let denom = a * reg.lambda2 + m0;
    z.iter()
        .zip(&sc.center)
        .map(|(zi, ci)| {
            let t = -(zi - m0 * ci);
            if denom > 0.0 {
                Ok(soft(t, tau) / denom)
            } else if t.abs() <= tau {
                Ok(0.0)
            } else {
                Err(Error::Unbounded("linear term exceeds the l1 penalty".into()))
            }
        })
        .collect()
}
