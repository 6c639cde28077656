//! Uniformly (λ,Λ)-elliptic operators on symmetric matrices: the Pucci
//! extremal operators, the trace (Laplace) operator, user-supplied rules,
//! and the sampled ellipticity certificate.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Side};
use crate::rng::Rng;

/// Symmetric n×n matrix, n ∈ {1,2}, stored as the upper triangle
/// (a11, a12, a22); `a12` and `a22` are ignored for n = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    pub n: usize,
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMatrix {
    pub fn zero(n: usize) -> SymMatrix {
        SymMatrix { n, a11: 0.0, a12: 0.0, a22: 0.0 }
    }

    pub fn scalar(v: f64) -> SymMatrix {
        SymMatrix { n: 1, a11: v, a12: 0.0, a22: 0.0 }
    }

    pub fn new2(a11: f64, a12: f64, a22: f64) -> SymMatrix {
        SymMatrix { n: 2, a11, a12, a22 }
    }

    pub fn diag(n: usize, d1: f64, d2: f64) -> SymMatrix {
        SymMatrix { n, a11: d1, a12: 0.0, a22: d2 }
    }

    pub fn identity(n: usize) -> SymMatrix {
        SymMatrix::diag(n, 1.0, 1.0)
    }

    pub fn trace(&self) -> f64 {
        if self.n == 1 {
            self.a11
        } else {
            self.a11 + self.a22
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && (self.n == 1 || (self.a12.is_finite() && self.a22.is_finite()))
    }

    /// Eigenvalues in ascending order, by the closed-form quadratic for n = 2.
    pub fn eigenvalues(&self) -> [f64; 2] {
        if self.n == 1 {
            return [self.a11, self.a11];
        }
        let m = 0.5 * (self.a11 + self.a22);
        let d = (0.25 * (self.a11 - self.a22) * (self.a11 - self.a22) + self.a12 * self.a12).sqrt();
        [m - d, m + d]
    }

    /// Largest absolute eigenvalue (spectral norm).
    pub fn spectral_norm(&self) -> f64 {
        let [lo, hi] = self.eigenvalues();
        lo.abs().max(hi.abs())
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            a11: self.a11 + other.a11,
            a12: self.a12 + other.a12,
            a22: self.a22 + other.a22,
        }
    }

    pub fn neg(&self) -> SymMatrix {
        SymMatrix { n: self.n, a11: -self.a11, a12: -self.a12, a22: -self.a22 }
    }
}

/// Pucci maximal operator M⁺(M) = Λ·Σ eig⁺ − λ·Σ eig⁻.
pub fn pucci_plus(m: &SymMatrix, lambda: f64, lambda_up: f64) -> Result<f64> {
    check_constants(lambda, lambda_up)?;
    let mut v = 0.0;
    for e in eigen_iter(m) {
        v += if e >= 0.0 { lambda_up * e } else { lambda * e };
    }
    Ok(v)
}

/// Pucci minimal operator M⁻(M) = λ·Σ eig⁺ − Λ·Σ eig⁻.
pub fn pucci_minus(m: &SymMatrix, lambda: f64, lambda_up: f64) -> Result<f64> {
    check_constants(lambda, lambda_up)?;
    let mut v = 0.0;
    for e in eigen_iter(m) {
        v += if e >= 0.0 { lambda * e } else { lambda_up * e };
    }
    Ok(v)
}

fn eigen_iter(m: &SymMatrix) -> impl Iterator<Item = f64> {
    let evs = m.eigenvalues();
    let take = if m.n == 1 { 1 } else { 2 };
    evs.into_iter().take(take)
}

fn check_constants(lambda: f64, lambda_up: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda_up >= lambda) {
        return Err(Error::Operator(format!(
            "ellipticity constants need 0 < lambda <= Lambda, got ({lambda}, {lambda_up})"
        )));
    }
    Ok(())
}

/// Operator kinds selectable from configuration; `custom` carries a code-only
/// evaluation rule and is not serializable.
#[derive(Clone)]
pub enum OperatorKind {
    PucciPlus,
    PucciMinus,
    TraceLaplace,
    Custom(Arc<dyn Fn(&SymMatrix) -> f64 + Send + Sync>),
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::PucciPlus => write!(f, "PucciPlus"),
            OperatorKind::PucciMinus => write!(f, "PucciMinus"),
            OperatorKind::TraceLaplace => write!(f, "TraceLaplace"),
            OperatorKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A uniformly (λ,Λ)-elliptic operator with F(0) = 0, validated at
/// construction by a sampled ellipticity certificate.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    kind: OperatorKind,
    lambda: f64,
    lambda_up: f64,
}

/// Serializable description of a built-in operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorConfig {
    PucciPlus { lambda: f64, #[serde(rename = "Lambda")] lambda_up: f64 },
    PucciMinus { lambda: f64, #[serde(rename = "Lambda")] lambda_up: f64 },
    TraceLaplace,
}

impl OperatorSpec {
    pub fn new(kind: OperatorKind, lambda: f64, lambda_up: f64) -> Result<OperatorSpec> {
        check_constants(lambda, lambda_up)?;
        let spec = OperatorSpec { kind, lambda, lambda_up };
        for n in [1usize, 2] {
            let z = spec.evaluate(&SymMatrix::zero(n))?;
            if z.abs() > 1e-12 {
                return Err(Error::Operator(format!("F(0) = {z} != 0")));
            }
        }
        let report = spec.check_ellipticity(64)?;
        if !report.passed {
            return Err(Error::Operator(format!(
                "ellipticity spot-check failed: {}",
                report.describe_witness()
            )));
        }
        Ok(spec)
    }

    pub fn pucci_plus(lambda: f64, lambda_up: f64) -> Result<OperatorSpec> {
        OperatorSpec::new(OperatorKind::PucciPlus, lambda, lambda_up)
    }
    pub fn pucci_minus(lambda: f64, lambda_up: f64) -> Result<OperatorSpec> {
        OperatorSpec::new(OperatorKind::PucciMinus, lambda, lambda_up)
    }
    pub fn trace_laplace() -> OperatorSpec {
        OperatorSpec::new(OperatorKind::TraceLaplace, 1.0, 1.0).expect("trace operator is elliptic")
    }
    pub fn custom(
        rule: impl Fn(&SymMatrix) -> f64 + Send + Sync + 'static,
        lambda: f64,
        lambda_up: f64,
    ) -> Result<OperatorSpec> {
        OperatorSpec::new(OperatorKind::Custom(Arc::new(rule)), lambda, lambda_up)
    }

    pub fn from_config(cfg: &OperatorConfig) -> Result<OperatorSpec> {
        match *cfg {
            OperatorConfig::PucciPlus { lambda, lambda_up } => Self::pucci_plus(lambda, lambda_up),
            OperatorConfig::PucciMinus { lambda, lambda_up } => Self::pucci_minus(lambda, lambda_up),
            OperatorConfig::TraceLaplace => Ok(Self::trace_laplace()),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn lambda_up(&self) -> f64 {
        self.lambda_up
    }

    /// Whether two specs are the same built-in rule with the same constants
    /// (custom rules are never considered equal).
    pub fn same_builtin(&self, other: &OperatorSpec) -> bool {
        let kind_eq = matches!(
            (&self.kind, &other.kind),
            (OperatorKind::PucciPlus, OperatorKind::PucciPlus)
                | (OperatorKind::PucciMinus, OperatorKind::PucciMinus)
                | (OperatorKind::TraceLaplace, OperatorKind::TraceLaplace)
        );
        kind_eq && self.lambda == other.lambda && self.lambda_up == other.lambda_up
    }

    /// Operator value F(M).
    pub fn evaluate(&self, m: &SymMatrix) -> Result<f64> {
        if !m.is_finite() {
            return Err(Error::Operator("non-finite matrix entries".into()));
        }
        let v = match &self.kind {
            OperatorKind::PucciPlus => pucci_plus(m, self.lambda, self.lambda_up)?,
            OperatorKind::PucciMinus => pucci_minus(m, self.lambda, self.lambda_up)?,
            OperatorKind::TraceLaplace => m.trace(),
            OperatorKind::Custom(rule) => rule(m),
        };
        if !v.is_finite() {
            return Err(Error::Operator(format!("operator returned non-finite value at {m:?}")));
        }
        Ok(v)
    }

    /// Sampled degenerate-ellipticity certificate: for random M and random
    /// rank-one N = s·vvᵀ ≥ 0 (where the spectral norm is s), checks
    /// λ‖N‖ ≤ F(M+N) − F(M) ≤ Λ‖N‖ to 1e-10 relative tolerance. Rank-one
    /// increments make the check sharp for the extremal operators.
    pub fn check_ellipticity(&self, samples: usize) -> Result<EllipticityReport> {
        if samples == 0 {
            return Err(Error::Operator("need at least one sample".into()));
        }
        let mut rng = Rng::stream(0xE11, 0x1);
        for i in 0..samples {
            let n = if i % 2 == 0 { 1 } else { 2 };
            let m = random_sym(&mut rng, n, 4.0);
            let s = rng.range(0.05, 3.0);
            let nmat = rank_one(&mut rng, n, s);
            let inc = self.evaluate(&m.add(&nmat))? - self.evaluate(&m)?;
            let tol = 1e-10 * (1.0 + inc.abs().max(self.lambda_up * s));
            if inc < self.lambda * s - tol || inc > self.lambda_up * s + tol {
                return Ok(EllipticityReport {
                    passed: false,
                    samples_run: i + 1,
                    witness: Some(EllipticityWitness {
                        m,
                        n: nmat,
                        increment: inc,
                        lower: self.lambda * s,
                        upper: self.lambda_up * s,
                    }),
                });
            }
        }
        Ok(EllipticityReport { passed: true, samples_run: samples, witness: None })
    }

    /// Discrete Hessian of `u` at node `(s, k)` seen from `side`: central
    /// second differences on the diagonal, the 4-point corner difference for
    /// the cross term. Errors when the stencil leaves the grid or a needed
    /// value is missing on that side.
    pub fn discrete_hessian(u: &Field, s: usize, k: usize, side: Side) -> Result<SymMatrix> {
        let g = u.grid();
        let n = g.n();
        let h = g.h();
        let i = g.space_multi(s);
        let nx = g.nx();
        let val = |i: [usize; 2]| -> Result<f64> {
            let sl = g.space_index(i);
            if !g.in_ball(sl) {
                return Err(Error::Operator("hessian stencil leaves the ball".into()));
            }
            u.get_on(sl, k, side)
                .ok_or_else(|| Error::Operator("hessian stencil crosses the interface".into()))
        };
        for j in 0..n {
            if i[j] == 0 || i[j] + 1 >= nx[j] {
                return Err(Error::Operator("hessian stencil leaves the grid".into()));
            }
        }
        let c = val(i)?;
        let shift = |j: usize, d: isize| {
            let mut ii = i;
            ii[j] = (ii[j] as isize + d) as usize;
            ii
        };
        let d11 = (val(shift(0, 1))? - 2.0 * c + val(shift(0, -1))?) / (h * h);
        if n == 1 {
            return Ok(SymMatrix::scalar(d11));
        }
        let d22 = (val(shift(1, 1))? - 2.0 * c + val(shift(1, -1))?) / (h * h);
        let corner = |d0: isize, d1: isize| {
            let mut ii = i;
            ii[0] = (ii[0] as isize + d0) as usize;
            ii[1] = (ii[1] as isize + d1) as usize;
            val(ii)
        };
        let d12 = (corner(1, 1)? + corner(-1, -1)? - corner(1, -1)? - corner(-1, 1)?) / (4.0 * h * h);
        Ok(SymMatrix::new2(d11, d12, d22))
    }
}

#[derive(Debug, Clone)]
pub struct EllipticityWitness {
    pub m: SymMatrix,
    pub n: SymMatrix,
    pub increment: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct EllipticityReport {
    pub passed: bool,
    pub samples_run: usize,
    pub witness: Option<EllipticityWitness>,
}

impl EllipticityReport {
    pub fn describe_witness(&self) -> String {
        match &self.witness {
            None => "no violation".into(),
            Some(w) => format!(
                "increment {} outside [{}, {}] at M={:?}, N={:?}",
                w.increment, w.lower, w.upper, w.m, w.n
            ),
        }
    }
}

pub fn random_sym(rng: &mut Rng, n: usize, scale: f64) -> SymMatrix {
    if n == 1 {
        SymMatrix::scalar(rng.range(-scale, scale))
    } else {
        SymMatrix::new2(rng.range(-scale, scale), rng.range(-scale, scale), rng.range(-scale, scale))
    }
}

fn rank_one(rng: &mut Rng, n: usize, s: f64) -> SymMatrix {
    if n == 1 {
        SymMatrix::scalar(s)
    } else {
        let phi = rng.range(0.0, std::f64::consts::TAU);
        let (c, si) = (phi.cos(), phi.sin());
        SymMatrix::new2(s * c * c, s * c * si, s * si * si)
    }
}
