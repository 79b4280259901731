//! Coefficient objects of the regularized equations.
//!
//! Three families share the regularization `s = eps^2 + |q|^2`:
//!
//! * p-Laplace: `u_t = s^{(p-2)/2} (delta_ij + (p-2) q_i q_j / s) u_ij`
//! * fully nonlinear: `u_t = s^{gamma/2} F(D^2 u)` for a smooth elliptic `F`
//! * general quasilinear: `u_t = s^{gamma/2} (delta_ij + (p-2) q_i q_j / s) u_ij`

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticityPair {
    pub lambda: f64,
    pub big_lambda: f64,
}

impl EllipticityPair {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= big_lambda && big_lambda.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "ellipticity pair ({lambda}, {big_lambda}) must satisfy 0 < lambda <= Lambda"
            )));
        }
        Ok(Self { lambda, big_lambda })
    }

    /// `(min{p-1, 1}, max{p-1, 1})`.
    pub fn p_laplace(p: f64) -> Self {
        Self {
            lambda: (p - 1.0).min(1.0),
            big_lambda: (p - 1.0).max(1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PucciSign {
    Plus,
    Minus,
}

/// Pucci extremal operator via the eigenvalue formula.
pub fn pucci(ell: EllipticityPair, m: &SymMatrix, sign: PucciSign) -> Result<f64> {
    if !m.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let (pos_w, neg_w) = match sign {
        PucciSign::Plus => (ell.big_lambda, ell.lambda),
        PucciSign::Minus => (ell.lambda, ell.big_lambda),
    };
    Ok(m
        .eigenvalues()
        .into_iter()
        .map(|e| if e > 0.0 { pos_w * e } else { neg_w * e })
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    Trace,
    /// `s log sum_k exp(tr(A_k M) / s) - s log K`: a smoothed maximum of
    /// linear operators, convex and normalized so that `F(0) = 0`.
    BellmanSmooth { operators: Vec<SymMatrix>, scale: f64 },
}

/// A smooth, uniformly elliptic, convex `F` with `F(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothOperatorF {
    kind: OperatorKind,
    ellipticity: EllipticityPair,
}

impl SmoothOperatorF {
    pub fn trace() -> Self {
        Self {
            kind: OperatorKind::Trace,
            ellipticity: EllipticityPair {
                lambda: 1.0,
                big_lambda: 1.0,
            },
        }
    }

    /// The ellipticity pair is the spectral envelope of the `A_k`.
    pub fn bellman_smooth(operators: Vec<SymMatrix>, scale: f64) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::InvalidParams("Bellman operator needs at least one matrix".into()));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidParams(format!("smoothing scale {scale} must be positive")));
        }
        let dim = operators[0].dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in &operators {
            if a.dim() != dim {
                return Err(Error::InvalidParams("Bellman matrices differ in dimension".into()));
            }
            if !a.is_symmetric() {
                return Err(Error::NotSymmetric);
            }
            let ev = a.eigenvalues();
            lo = lo.min(ev[0]);
            hi = hi.max(ev[ev.len() - 1]);
        }
        let ellipticity = EllipticityPair::new(lo, hi)?;
        Ok(Self {
            kind: OperatorKind::BellmanSmooth { operators, scale },
            ellipticity,
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn ellipticity(&self) -> EllipticityPair {
        self.ellipticity
    }

    fn softmax_weights(operators: &[SymMatrix], scale: f64, m: &SymMatrix) -> (Vec<f64>, f64) {
        let lin: Vec<f64> = operators.iter().map(|a| a.contract(m)).collect();
        let top = lin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = lin.iter().map(|l| ((l - top) / scale).exp()).collect();
        let total: f64 = w.iter().sum();
        let lse = top + scale * total.ln();
        (w.into_iter().map(|x| x / total).collect(), lse)
    }

    pub fn evaluate(&self, m: &SymMatrix) -> f64 {
        match &self.kind {
            OperatorKind::Trace => m.trace(),
            OperatorKind::BellmanSmooth { operators, scale } => {
                let (_, lse) = Self::softmax_weights(operators, *scale, m);
                let (_, at_zero) = Self::softmax_weights(operators, *scale, &SymMatrix::zeros(m.dim()));
                lse - at_zero
            }
        }
    }

    /// `dF/dM_ij` at `m`.
    pub fn derivative(&self, m: &SymMatrix) -> SymMatrix {
        match &self.kind {
            OperatorKind::Trace => SymMatrix::identity(m.dim()),
            OperatorKind::BellmanSmooth { operators, scale } => {
                let (w, _) = Self::softmax_weights(operators, *scale, m);
                operators
                    .iter()
                    .zip(w)
                    .fold(SymMatrix::zeros(m.dim()), |acc, (a, wk)| acc.add(&a.scale(wk)))
            }
        }
    }
}

/// `F(M)` for symmetric `M`.
pub fn evaluate_f(f: &SmoothOperatorF, m: &SymMatrix) -> Result<f64> {
    if !m.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    Ok(f.evaluate(m))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    PLaplace { p: f64 },
    FullyNonlinear { gamma: f64, operator: SmoothOperatorF },
    GeneralQuasilinear { gamma: f64, p: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientParams {
    pub family: Family,
    pub epsilon: f64,
}

impl CoefficientParams {
    pub fn new(family: Family, epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!("epsilon = {epsilon} must be >= 0")));
        }
        match &family {
            Family::PLaplace { p } if !(*p > 1.0) => {
                return Err(Error::InvalidParams(format!("p = {p} must exceed 1")))
            }
            Family::FullyNonlinear { gamma, .. } if !(*gamma > -1.0) => {
                return Err(Error::InvalidParams(format!("gamma = {gamma} must exceed -1")))
            }
            Family::GeneralQuasilinear { gamma, p } if !(*gamma > 0.0 && *p > 1.0) => {
                return Err(Error::InvalidParams(format!(
                    "general quasilinear family needs gamma > 0 and p > 1 (got gamma = {gamma}, p = {p})"
                )))
            }
            _ => {}
        }
        Ok(Self { family, epsilon })
    }

    pub fn p_laplace(p: f64, epsilon: f64) -> Result<Self> {
        Self::new(Family::PLaplace { p }, epsilon)
    }

    pub fn fully_nonlinear(gamma: f64, operator: SmoothOperatorF, epsilon: f64) -> Result<Self> {
        Self::new(Family::FullyNonlinear { gamma, operator }, epsilon)
    }

    pub fn general_quasilinear(gamma: f64, p: f64, epsilon: f64) -> Result<Self> {
        Self::new(Family::GeneralQuasilinear { gamma, p }, epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            family: self.family.clone(),
            epsilon,
        }
    }

    /// Exponent of the degenerate multiplier `s^{k/2}`: `p - 2` or `gamma`.
    pub fn degeneracy_exponent(&self) -> f64 {
        match &self.family {
            Family::PLaplace { p } => p - 2.0,
            Family::FullyNonlinear { gamma, .. } | Family::GeneralQuasilinear { gamma, .. } => *gamma,
        }
    }

    /// Time rescaling exponent of the intrinsic cylinder: `2 - p`, or `-gamma`.
    pub fn intrinsic_time_exponent(&self) -> f64 {
        -self.degeneracy_exponent()
    }

    /// `s^{k/2}` with exact shortcuts for the common integer exponents.
    pub(crate) fn half_power(s: f64, k: f64) -> f64 {
        if k == 0.0 {
            1.0
        } else if k == 1.0 {
            s.sqrt()
        } else if k == 2.0 {
            s
        } else {
            s.powf(0.5 * k)
        }
    }

    fn s(&self, q: &Vector) -> f64 {
        self.epsilon * self.epsilon + q.norm_sq()
    }

    /// `(eps^2 + |q|^2)^{k/2}` with `k` the family's degeneracy exponent.
    pub fn multiplier(&self, q: &Vector) -> Result<f64> {
        let s = self.s(q);
        let k = self.degeneracy_exponent();
        if s == 0.0 && k < 0.0 {
            return Err(Error::Singular("eps = 0 and q = 0 with a negative exponent"));
        }
        Ok(Self::half_power(s, k))
    }

    fn quasilinear_p(&self) -> Result<f64> {
        match &self.family {
            Family::PLaplace { p } | Family::GeneralQuasilinear { p, .. } => Ok(*p),
            Family::FullyNonlinear { .. } => Err(Error::WrongFamily {
                expected: "quasilinear",
            }),
        }
    }

    /// Lower and upper ellipticity constants of the bracketed operator.
    pub fn ellipticity(&self) -> EllipticityPair {
        match &self.family {
            Family::PLaplace { p } | Family::GeneralQuasilinear { p, .. } => EllipticityPair::p_laplace(*p),
            Family::FullyNonlinear { operator, .. } => operator.ellipticity(),
        }
    }

    /// Right-hand side of the regularized equation at the jet `(q, M)`.
    /// Callers guarantee `eps > 0` or `q != 0`.
    pub fn evolution_rate(&self, q: &Vector, m: &SymMatrix) -> f64 {
        match &self.family {
            Family::FullyNonlinear { gamma, operator } => {
                Self::half_power(self.s(q), *gamma) * operator.evaluate(m)
            }
            Family::PLaplace { p } | Family::GeneralQuasilinear { p, .. } => {
                let s = self.s(q);
                if s == 0.0 {
                    return if *p == 2.0 { m.trace() } else { 0.0 };
                }
                let mult = Self::half_power(s, self.degeneracy_exponent());
                mult * (m.trace() + (p - 2.0) * m.quad_form(q) / s)
            }
        }
    }
}

/// `a_eps^{ij}(q)` for the quasilinear families.
pub fn a_tensor(params: &CoefficientParams, q: &Vector) -> Result<SymMatrix> {
    let p = params.quasilinear_p()?;
    let n = q.dim();
    let s = params.s(q);
    let k = params.degeneracy_exponent();
    if s == 0.0 {
        return if k < 0.0 {
            Err(Error::Singular("eps = 0 and q = 0 with p < 2"))
        } else if k == 0.0 {
            Ok(SymMatrix::identity(n))
        } else {
            Ok(SymMatrix::zeros(n))
        };
    }
    let mult = s.powf(0.5 * k);
    Ok(SymMatrix::identity(n)
        .add(&SymMatrix::outer(q).scale((p - 2.0) / s))
        .scale(mult))
}

/// `d a^{ij} / d q_l`, one symmetric matrix per `l`.
pub fn a_tensor_gradient(params: &CoefficientParams, q: &Vector) -> Result<Vec<SymMatrix>> {
    let p = params.quasilinear_p()?;
    let n = q.dim();
    let s = params.s(q);
    if s == 0.0 {
        return Err(Error::Singular("eps = 0 and q = 0"));
    }
    let k = params.degeneracy_exponent();
    let a = a_tensor(params, q)?;
    let mult = s.powf(0.5 * k);
    Ok((0..n)
        .map(|l| {
            let mut d = a.scale(k * q[l] / s);
            for i in 0..n {
                for j in 0..=i {
                    let kron_il = if i == l { q[j] } else { 0.0 };
                    let kron_jl = if j == l { q[i] } else { 0.0 };
                    let second =
                        (p - 2.0) * mult * ((kron_il + kron_jl) / s - 2.0 * q[i] * q[j] * q[l] / (s * s));
                    d.set(i, j, d.get(i, j) + second);
                }
            }
            d
        })
        .collect())
}

/// `(eps^2 + |q|^2)^{gamma/2}`.
pub fn degenerate_multiplier(params: &CoefficientParams, q: &Vector) -> Result<f64> {
    params.multiplier(q)
}

pub fn ellipticity_of(params: &CoefficientParams) -> EllipticityPair {
    params.ellipticity()
}
