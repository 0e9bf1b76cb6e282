//! Component sets, distance-generating functions, Bregman distances and prox mappings.
//!
//! Each block `i` of the feasible set carries a [`BlockGeometry`]: a compact convex
//! set `X_i`, a distance-generating function `omega_i` with strong-convexity modulus
//! `mu_omega` and smoothness modulus `l_omega`, and the norm pair in which both moduli
//! are measured. The prox mapping is
//!
//! ```text
//! P(x, y) = argmin_{z in X_i} <y, z> + D(x, z),   D(x, z) = omega(z) - omega(x) - <grad omega(x), z - x>.
//! ```
//!
//! All prox mappings are closed forms: Euclidean projection (clamp, sorting-based simplex
//! projection, radial scaling) for the Euclidean generator and exponential weights for the
//! negative entropy. The entropy generator only has a finite `l_omega` away from the simplex
//! boundary, so it works on the interior `{x_j >= ENTROPY_EPS}`: points are clamped to that
//! interior and renormalised before any logarithm is taken, and `l_omega = 1/ENTROPY_EPS`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::block::{dot, norm2};
use crate::error::{check_finite, check_len, Result, ScviError};

/// Lower clamp for entropy coordinates.
pub const ENTROPY_EPS: f64 = 1e-12;

const SIMPLEX_TOL: f64 = 1e-9;

/// A nonempty, closed, convex and bounded component set `X_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// The probability simplex `{x >= 0, sum x = 1}`.
    Simplex { dim: usize },
}

impl ComponentSet {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let s = ComponentSet::Box { lower, upper };
        s.validate()?;
        Ok(s)
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(vec![lo; n], vec![hi; n])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let s = ComponentSet::Ball { center, radius };
        s.validate()?;
        Ok(s)
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        let s = ComponentSet::Simplex { dim };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ComponentSet::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(ScviError::InvalidSet(format!(
                        "box bounds of lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                check_finite(lower, "box lower bound")?;
                check_finite(upper, "box upper bound")?;
                if lower.iter().zip(upper).any(|(l, u)| l > u) {
                    return Err(ScviError::InvalidSet("box with lower > upper".into()));
                }
            }
            ComponentSet::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(ScviError::InvalidSet("ball of dimension 0".into()));
                }
                check_finite(center, "ball center")?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(ScviError::InvalidSet(format!("ball radius {radius}")));
                }
            }
            ComponentSet::Simplex { dim } => {
                if *dim == 0 {
                    return Err(ScviError::InvalidSet("simplex of dimension 0".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ComponentSet::Box { lower, .. } => lower.len(),
            ComponentSet::Ball { center, .. } => center.len(),
            ComponentSet::Simplex { dim } => *dim,
        }
    }

    /// `B` with `||x|| <= B` for every member, in the given norm.
    pub fn bound(&self, norm: Norm) -> f64 {
        match self {
            ComponentSet::Box { lower, upper } => {
                let m = lower.iter().zip(upper).map(|(l, u)| l.abs().max(u.abs()));
                match norm {
                    Norm::L2 => m.map(|v| v * v).sum::<f64>().sqrt(),
                    Norm::L1 => m.sum(),
                }
            }
            ComponentSet::Ball { center, radius } => match norm {
                Norm::L2 => norm2(center) + radius,
                Norm::L1 => {
                    center.iter().map(|c| c.abs()).sum::<f64>() + radius * (center.len() as f64).sqrt()
                }
            },
            ComponentSet::Simplex { .. } => 1.0,
        }
    }

    pub fn center(&self) -> Vec<f64> {
        match self {
            ComponentSet::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
            }
            ComponentSet::Ball { center, .. } => center.clone(),
            ComponentSet::Simplex { dim } => vec![1.0 / *dim as f64; *dim],
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ComponentSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ComponentSet::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2.sqrt() <= radius + tol
            }
            ComponentSet::Simplex { .. } => {
                x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol.max(SIMPLEX_TOL)
            }
        }
    }

    /// Euclidean projection of `p` onto the set.
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.project_into(p, &mut out)?;
        Ok(out)
    }

    pub fn project_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dim(), p.len())?;
        check_len(self.dim(), out.len())?;
        check_finite(p, "projection input")?;
        match self {
            ComponentSet::Box { lower, upper } => {
                for (o, (v, (l, u))) in out.iter_mut().zip(p.iter().zip(lower.iter().zip(upper))) {
                    *o = v.clamp(*l, *u);
                }
            }
            ComponentSet::Ball { center, radius } => {
                let d2: f64 = p.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                let dist = d2.sqrt();
                if dist <= *radius {
                    out.copy_from_slice(p);
                } else {
                    let s = radius / dist;
                    for (o, (v, c)) in out.iter_mut().zip(p.iter().zip(center)) {
                        *o = c + s * (v - c);
                    }
                }
            }
            ComponentSet::Simplex { .. } => project_simplex(p, out),
        }
        Ok(())
    }

    /// A maximiser of `<g, z>` over the set.
    pub fn linear_maximizer(&self, g: &[f64]) -> Vec<f64> {
        match self {
            ComponentSet::Box { lower, upper } => g
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(gi, (l, u))| if *gi > 0.0 { *u } else { *l })
                .collect(),
            ComponentSet::Ball { center, radius } => {
                let n = norm2(g);
                if n == 0.0 {
                    center.clone()
                } else {
                    center.iter().zip(g).map(|(c, gi)| c + radius * gi / n).collect()
                }
            }
            ComponentSet::Simplex { dim } => {
                let mut best = 0;
                for (j, v) in g.iter().enumerate() {
                    if *v > g[best] {
                        best = j;
                    }
                }
                let mut e = vec![0.0; *dim];
                e[best] = 1.0;
                e
            }
        }
    }

    /// `max_{z in X} <g, z>`.
    pub fn support(&self, g: &[f64]) -> f64 {
        dot(g, &self.linear_maximizer(g))
    }

    /// Uniform sample (flat Dirichlet for the simplex).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ComponentSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
            ComponentSet::Ball { center, radius } => {
                let n = center.len();
                let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let dn = norm2(&dir).max(f64::MIN_POSITIVE);
                let rho = radius * rng.random::<f64>().powf(1.0 / n as f64);
                center.iter().zip(&dir).map(|(c, v)| c + rho * v / dn).collect()
            }
            ComponentSet::Simplex { dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
        }
    }

    /// A random point strictly inside the set, kept away from the boundary.
    pub fn interior_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            ComponentSet::Box { lower, upper } => {
                if lower.iter().zip(upper).any(|(l, u)| !(u > l)) {
                    return Err(ScviError::InvalidSet(
                        "degenerate box has no interior point".into(),
                    ));
                }
                Ok(lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| {
                        let c = 0.5 * (l + u);
                        let h = 0.5 * (u - l);
                        c + h * (rng.random::<f64>() - 0.5)
                    })
                    .collect())
            }
            ComponentSet::Ball { center, radius } => {
                let n = center.len();
                let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let dn = norm2(&dir).max(f64::MIN_POSITIVE);
                let rho = 0.5 * radius * rng.random::<f64>();
                Ok(center.iter().zip(&dir).map(|(c, v)| c + rho * v / dn).collect())
            }
            ComponentSet::Simplex { dim } => {
                let n = *dim as f64;
                let d = self.sample(rng);
                Ok(d.into_iter().map(|v| 0.5 / n + 0.5 * v).collect())
            }
        }
    }
}

/// Sorting-based Euclidean projection onto the probability simplex.
fn project_simplex(p: &[f64], out: &mut [f64]) {
    let mut u = p.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, v) in u.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    for (o, v) in out.iter_mut().zip(p) {
        *o = (v - theta).max(0.0);
    }
}

/// Primal norm of a block; the dual norm is implied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    /// Self-dual Euclidean norm.
    L2,
    /// `l1` primal with `l_inf` dual.
    L1,
}

impl Norm {
    pub fn primal(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => norm2(v),
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
        }
    }

    pub fn dual(self, v: &[f64]) -> f64 {
        match self {
            Norm::L2 => norm2(v),
            Norm::L1 => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgf {
    /// `omega(z) = ||z||^2 / 2`.
    Euclidean,
    /// `omega(z) = sum z_j ln z_j` on the simplex.
    NegativeEntropy,
}

/// Set, distance-generating function and norm of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockGeometry {
    pub set: ComponentSet,
    pub dgf: Dgf,
    pub norm: Norm,
    pub mu_omega: f64,
    pub l_omega: f64,
}

impl BlockGeometry {
    pub fn euclidean(set: ComponentSet) -> Self {
        Self {
            set,
            dgf: Dgf::Euclidean,
            norm: Norm::L2,
            mu_omega: 1.0,
            l_omega: 1.0,
        }
    }

    /// Negative entropy on the `dim`-simplex with the `l1` norm (Pinsker modulus 1).
    pub fn entropy_simplex(dim: usize) -> Result<Self> {
        Ok(Self {
            set: ComponentSet::simplex(dim)?,
            dgf: Dgf::NegativeEntropy,
            norm: Norm::L1,
            mu_omega: 1.0,
            l_omega: 1.0 / ENTROPY_EPS,
        })
    }

    pub fn new(set: ComponentSet, dgf: Dgf) -> Result<Self> {
        match dgf {
            Dgf::Euclidean => {
                set.validate()?;
                Ok(Self::euclidean(set))
            }
            Dgf::NegativeEntropy => match set {
                ComponentSet::Simplex { dim } => Self::entropy_simplex(dim),
                _ => Err(ScviError::InvalidGeometry(
                    "negative entropy is only supported on the simplex".into(),
                )),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.set.validate()?;
        let expected = Self::new(self.set.clone(), self.dgf)?;
        if expected.norm != self.norm
            || expected.mu_omega != self.mu_omega
            || expected.l_omega != self.l_omega
        {
            return Err(ScviError::InvalidGeometry(format!(
                "{:?} generator requires norm {:?}, mu_omega {}, l_omega {}",
                self.dgf, expected.norm, expected.mu_omega, expected.l_omega
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn bound(&self) -> f64 {
        self.set.bound(self.norm)
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        self.norm.primal(v)
    }

    pub fn dual_norm(&self, v: &[f64]) -> Result<f64> {
        check_len(self.dim(), v.len())?;
        Ok(self.norm.dual(v))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.set.contains(x, tol)
    }

    /// Uniform sample; entropy geometries are pulled into the working interior.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = self.set.sample(rng);
        if self.dgf == Dgf::NegativeEntropy {
            clamp_interior(&mut x);
        }
        x
    }

    pub fn omega(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        check_finite(x, "omega argument")?;
        Ok(match self.dgf {
            Dgf::Euclidean => 0.5 * dot(x, x),
            Dgf::NegativeEntropy => x.iter().map(|&v| xlogx(v.max(0.0))).sum(),
        })
    }

    pub fn grad_omega(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        check_finite(x, "omega gradient argument")?;
        Ok(match self.dgf {
            Dgf::Euclidean => x.to_vec(),
            Dgf::NegativeEntropy => {
                let xh = self.interior_anchor(x)?;
                xh.iter().map(|v| v.ln() + 1.0).collect()
            }
        })
    }

    /// `D(x, y) = omega(y) - omega(x) - <grad omega(x), y - x>`.
    pub fn bregman_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), y.len())?;
        check_finite(x, "Bregman anchor")?;
        check_finite(y, "Bregman argument")?;
        match self.dgf {
            Dgf::Euclidean => Ok(0.5
                * x.iter()
                    .zip(y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()),
            Dgf::NegativeEntropy => {
                let xh = self.interior_anchor(x)?;
                if !self.set.contains(y, SIMPLEX_TOL) {
                    return Err(ScviError::OutsideInterior {
                        min: y.iter().cloned().fold(f64::INFINITY, f64::min),
                        sum: y.iter().sum(),
                    });
                }
                let mut d = 0.0;
                for (&a, &b) in xh.iter().zip(y) {
                    let b = b.max(0.0);
                    if b > 0.0 {
                        d += b * (b / a).ln();
                    }
                    d += a - b;
                }
                Ok(d.max(0.0))
            }
        }
    }

    /// `P(x, y) = argmin_{z in X} <y, z> + D(x, z)`.
    pub fn prox_map(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.prox_map_into(x, y, &mut out)?;
        Ok(out)
    }

    pub fn prox_map_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), y.len())?;
        check_len(self.dim(), out.len())?;
        check_finite(x, "prox anchor")?;
        check_finite(y, "prox dual step")?;
        match self.dgf {
            Dgf::Euclidean => {
                for (o, (a, b)) in out.iter_mut().zip(x.iter().zip(y)) {
                    *o = a - b;
                }
                let shifted = out.to_vec();
                self.set.project_into(&shifted, out)
            }
            Dgf::NegativeEntropy => {
                let xh = self.interior_anchor(x)?;
                let mut m = f64::NEG_INFINITY;
                for (o, (a, b)) in out.iter_mut().zip(xh.iter().zip(y)) {
                    *o = a.ln() - b;
                    m = m.max(*o);
                }
                let mut s = 0.0;
                for o in out.iter_mut() {
                    *o = (*o - m).exp();
                    s += *o;
                }
                for o in out.iter_mut() {
                    *o /= s;
                }
                clamp_interior(out);
                Ok(())
            }
        }
    }

    /// Clamped and renormalised copy of a simplex point, rejecting points off the simplex.
    fn interior_anchor(&self, x: &[f64]) -> Result<Vec<f64>> {
        let sum: f64 = x.iter().sum();
        let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -SIMPLEX_TOL || (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(ScviError::OutsideInterior { min, sum });
        }
        let mut xh = x.to_vec();
        clamp_interior(&mut xh);
        Ok(xh)
    }
}

/// Clamp simplex coordinates to `[ENTROPY_EPS, 1]` and renormalise.
pub fn clamp_interior(x: &mut [f64]) {
    let mut s = 0.0;
    for v in x.iter_mut() {
        *v = v.clamp(ENTROPY_EPS, 1.0);
        s += *v;
    }
    for v in x.iter_mut() {
        *v /= s;
    }
}

fn xlogx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}
