//! Poisson problems with nonhomogeneous Dirichlet data, harmonic replacement
//! and the penalized projection of arc data.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{assemble, assemble_on_ball, assemble_on_interval, classify_nodes, Convention, FormPair, Mesh, NodeSets};
use crate::linalg::{solve_spd, CyclicTri, Ldlt};
use crate::mmspace::{BallSpec, SpaceDescriptor};
use crate::numfmt::fmt15;
use crate::spectral::dirichlet_spectrum;

/// λ₁ at or below this value makes the problem non-coercive.
pub const COERCIVITY_TOL: f64 = 1e-10;

/// One inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + 1e-12) + 1e-14,
        }
    }
}

/// A-priori estimates on the ball, with `G(u) = ‖√Γ(u)‖`, `N(u) = ‖u‖` and
/// `λ = λ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundChecks {
    /// `G(f̂) ≤ 2 G(f) + N(g)/λ`.
    pub gradient: BoundCheck,
    /// `N(f̂) ≤ N(f) + G(f)/λ + N(g)/λ²`.
    pub l2: BoundCheck,
    /// `G(f̂) ≤ 2 G(f) + N(g)/√λ`.
    pub gradient_scaled: BoundCheck,
    /// `N(f̂) ≤ N(f) + G(f)/√λ + N(g)/λ`.
    pub l2_scaled: BoundCheck,
}

impl BoundChecks {
    pub fn all_hold(&self) -> bool {
        self.gradient.holds && self.l2.holds && self.gradient_scaled.holds && self.l2_scaled.holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `max_i |(A f̂ + M g)_i|` over free nodes `i`, relative to
    /// `‖A f̂‖ + ‖M g‖` over all nodes.
    pub galerkin_residual: f64,
    /// `∫_{B} Γ(f̂)`.
    pub energy_value: f64,
    pub bound_checks: BoundChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticSolution {
    pub coordinates: Vec<f64>,
    pub solution: Vec<f64>,
    pub boundary_data: Vec<f64>,
    pub source: Vec<f64>,
    pub convention: Convention,
    pub lambda1: f64,
    pub diagnostics: Diagnostics,
}

impl EllipticSolution {
    /// CSV with header `coordinate,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coordinate,value\n");
        for (t, v) in self.coordinates.iter().zip(&self.solution) {
            out.push_str(&format!("{},{}\n", fmt15(*t), fmt15(*v)));
        }
        out
    }
}

/// A Dirichlet problem on a ball with its factorization, reusable across data.
#[derive(Debug, Clone)]
pub struct PoissonProblem {
    mesh: Mesh,
    sets: NodeSets,
    forms: FormPair,
    ball_forms: FormPair,
    reduced: CyclicTri,
    factor: Ldlt,
    lambda1: f64,
}

impl PoissonProblem {
    pub fn new(space: &SpaceDescriptor, mesh: &Mesh, ball: &BallSpec, convention: Convention) -> Result<Self> {
        let sets = classify_nodes(space, mesh, ball, convention)?;
        if sets.free.is_empty() {
            return Err(Error::TrivialBall);
        }
        let lambda1 = dirichlet_spectrum(space, mesh, ball, convention, 1)?.eigenvalues[0];
        if lambda1 <= COERCIVITY_TOL {
            return Err(Error::NonCoercive(lambda1));
        }
        let forms = assemble(space, mesh)?;
        let ball_forms = assemble_on_ball(space, mesh)?;
        let reduced = forms.stiffness.reduce(&sets.free);
        let factor = reduced.ldlt();
        if !factor.is_positive_definite() {
            return Err(Error::Factorization("reduced stiffness is not positive definite".into()));
        }
        Ok(Self {
            mesh: mesh.clone(),
            sets,
            forms,
            ball_forms,
            reduced,
            factor,
            lambda1,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn sets(&self) -> &NodeSets {
        &self.sets
    }

    pub fn forms(&self) -> &FormPair {
        &self.forms
    }

    /// Forms restricted to the closed ball.
    pub fn ball_forms(&self) -> &FormPair {
        &self.ball_forms
    }

    /// `½ uᵀ A u + uᵀ M g`, minimized by the solution among fields with the
    /// same constrained values.
    pub fn functional(&self, u: &[f64], g: &[f64]) -> f64 {
        0.5 * self.forms.stiffness.quad(u, u) + self.forms.mass.quad(u, g)
    }

    /// Solves `Δ f̂ = g` with `f̂ − f` supported on free nodes: `A f̂ + M g`
    /// is orthogonal to every free hat function.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<EllipticSolution> {
        let n = self.mesh.len();
        for v in [f, g] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
        }
        let af = self.forms.stiffness.matvec(f);
        let mg = self.forms.mass.matvec(g);
        let rhs: Vec<f64> = self.sets.free.iter().map(|&i| -(af[i] + mg[i])).collect();
        let v = self.factor.solve(&rhs);
        // one step of iterative refinement
        let r = self.reduced.matvec(&v);
        let corr: Vec<f64> = rhs.iter().zip(&r).map(|(b, x)| b - x).collect();
        let dv = self.factor.solve(&corr);
        let mut sol = f.to_vec();
        for ((&i, x), d) in self.sets.free.iter().zip(&v).zip(&dv) {
            sol[i] += x + d;
        }

        let asol = self.forms.stiffness.matvec(&sol);
        let worst = self
            .sets
            .free
            .iter()
            .map(|&i| (asol[i] + mg[i]).abs())
            .fold(0.0f64, f64::max);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = norm(&asol) + norm(&mg);
        let galerkin_residual = if scale > 0.0 { worst / scale } else { worst };

        let b = &self.ball_forms;
        let grad = |u: &[f64]| b.stiffness.quad(u, u).max(0.0).sqrt();
        let l2 = |u: &[f64]| b.mass.quad(u, u).max(0.0).sqrt();
        let lam = self.lambda1;
        let (gf, gfh, nf, nfh, ng) = (grad(f), grad(&sol), l2(f), l2(&sol), l2(g));
        let bound_checks = BoundChecks {
            gradient: BoundCheck::new(gfh, 2.0 * gf + ng / lam),
            l2: BoundCheck::new(nfh, nf + gf / lam + ng / (lam * lam)),
            gradient_scaled: BoundCheck::new(gfh, 2.0 * gf + ng / lam.sqrt()),
            l2_scaled: BoundCheck::new(nfh, nf + gf / lam.sqrt() + ng / lam),
        };
        Ok(EllipticSolution {
            coordinates: self.mesh.nodes().to_vec(),
            solution: sol,
            boundary_data: f.to_vec(),
            source: g.to_vec(),
            convention: self.sets.convention,
            lambda1: lam,
            diagnostics: Diagnostics {
                galerkin_residual,
                energy_value: gfh * gfh,
                bound_checks,
            },
        })
    }
}

/// Solves `Δ f̂ = g` on the ball with `f̂ − f` in the chosen Sobolev class.
pub fn poisson_dirichlet(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    ball: &BallSpec,
    convention: Convention,
    f: &[f64],
    g: &[f64],
) -> Result<EllipticSolution> {
    PoissonProblem::new(space, mesh, ball, convention)?.solve(f, g)
}

/// The harmonic replacement of `f` on the ball.
pub fn harmonic_replacement(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    ball: &BallSpec,
    convention: Convention,
    f: &[f64],
) -> Result<EllipticSolution> {
    let zero = vec![0.0; f.len()];
    poisson_dirichlet(space, mesh, ball, convention, f, &zero)
}

/// Discrete H¹ norm `(fᵀMf + fᵀAf)^{1/2}`.
pub fn h1_norm(forms: &FormPair, f: &[f64]) -> f64 {
    (forms.mass.quad(f, f) + forms.stiffness.quad(f, f)).max(0.0).sqrt()
}

/// Minimizes `uᵀAu + uᵀMu + (1/τ) ‖u − g‖²` over all mesh fields, with the
/// penalty taken over the chart interval `[lo, hi]`. Returns the minimizer
/// and its H¹ norm.
pub fn penalized_projection(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    lo: f64,
    hi: f64,
    g: &[f64],
    tau: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::ParameterOutOfRange {
            name: "tau".into(),
            reason: format!("penalty must be positive, got {tau}"),
        });
    }
    let n = mesh.len();
    if g.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: g.len() });
    }
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("empty subregion [{lo}, {hi}]")));
    }
    let forms = assemble(space, mesh)?;
    let sub = assemble_on_interval(space, mesh, lo, hi)?;
    let k = forms.stiffness.plus(1.0, &forms.mass).plus(1.0 / tau, &sub.mass);
    let all: Vec<usize> = (0..n).collect();
    let rhs: Vec<f64> = sub.mass.matvec(g).iter().map(|v| v / tau).collect();
    let u = solve_spd(&k.reduce(&all), &rhs)?;
    let norm = h1_norm(&forms, &u);
    Ok((u, norm))
}

/// The excess field `e(z) = d(far, base) − d(far, z)` sampled on the mesh.
pub fn excess_field(space: &SpaceDescriptor, mesh: &Mesh, far: f64, base: f64) -> Result<Vec<f64>> {
    let d0 = space.distance(far, base)?;
    mesh.nodes().iter().map(|&z| Ok(d0 - space.distance(far, z)?)).collect()
}

const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Weighted H¹ distance between a mesh field and an exact function `u`
/// (with derivative `du`) over the chart interval `[lo, hi]`, by 5-point
/// Gauss quadrature on each element.
pub fn h1_error(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    field: &[f64],
    u: impl Fn(f64) -> f64,
    du: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> f64 {
    let tol = 1e-12 * (lo.abs() + hi.abs()).max(1.0);
    let mut acc = 0.0;
    for (i, j, a, b) in mesh.elements() {
        if a < lo - tol || b > hi + tol {
            continue;
        }
        let h = b - a;
        let slope = (field[j] - field[i]) / h;
        for &(x, w) in &GAUSS5 {
            let s = 0.5 * (x + 1.0);
            let t = a + s * h;
            let val = field[i] + slope * (t - a);
            let wt = 0.5 * h * w * space.density(t);
            acc += wt * ((val - u(t)).powi(2) + (slope - du(t)).powi(2));
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_mesh;
    use crate::mmspace::Weight;

    #[test]
    fn quadratic_on_unit_interval() {
        let s = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let ball = BallSpec::new(0.5, 0.5);
        let mesh = build_mesh(&s, &ball, 0.01).unwrap();
        let zero = vec![0.0; mesh.len()];
        let one = vec![1.0; mesh.len()];
        let sol = poisson_dirichlet(&s, &mesh, &ball, Convention::H0, &zero, &one).unwrap();
        // P1 Galerkin is nodally exact in 1D
        for (t, v) in mesh.nodes().iter().zip(&sol.solution) {
            assert!((v - t * (t - 1.0) / 2.0).abs() < 1e-12);
        }
        let mid = mesh.interpolate(&sol.solution, 0.5).unwrap();
        assert!((mid + 0.125).abs() < 1e-12);
        assert!(sol.diagnostics.galerkin_residual < 1e-10);
    }

    #[test]
    fn affine_data_is_harmonic() {
        let s = SpaceDescriptor::line();
        let ball = BallSpec::new(1.0, 2.0);
        let mesh = build_mesh(&s, &ball, 0.05).unwrap();
        let f = mesh.sample(|t| 3.0 * t - 1.0);
        let sol = harmonic_replacement(&s, &mesh, &ball, Convention::H0, &f).unwrap();
        for (a, b) in sol.solution.iter().zip(&f) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn circle_full_ball_is_non_coercive() {
        let s = SpaceDescriptor::circle(2.0 * std::f64::consts::PI).unwrap();
        let ball = BallSpec::new(0.0, std::f64::consts::PI);
        let mesh = build_mesh(&s, &ball, 0.05).unwrap();
        let z = vec![0.0; mesh.len()];
        assert!(matches!(
            poisson_dirichlet(&s, &mesh, &ball, Convention::Hhat0, &z, &z),
            Err(Error::NonCoercive(_))
        ));
        assert!(poisson_dirichlet(&s, &mesh, &ball, Convention::H0, &z, &z).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let s = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let ball = BallSpec::new(0.5, 0.5);
        let mesh = build_mesh(&s, &ball, 0.1).unwrap();
        let err = poisson_dirichlet(&s, &mesh, &ball, Convention::H0, &[0.0; 3], &[0.0; 3]);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn excess_field_is_affine_on_far_ball() {
        let s = SpaceDescriptor::line();
        let ball = BallSpec::new(3.0, 1.0);
        let mesh = build_mesh(&s, &ball, 0.1).unwrap();
        let e = excess_field(&s, &mesh, 0.0, 3.0).unwrap();
        for (t, v) in mesh.nodes().iter().zip(&e) {
            assert!((v - (3.0 - t)).abs() < 1e-14);
        }
        let sol = harmonic_replacement(&s, &mesh, &ball, Convention::H0, &e).unwrap();
        for (a, b) in sol.solution.iter().zip(&e) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn h1_error_of_interpolant() {
        let s = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let ball = BallSpec::new(0.5, 0.5);
        let mesh = build_mesh(&s, &ball, 0.25).unwrap();
        let f = mesh.sample(|t| 2.0 * t);
        assert!(h1_error(&s, &mesh, &f, |t| 2.0 * t, |_| 2.0, 0.0, 1.0) < 1e-14);
        let w = s.clone().with_weight(Weight::Power { exponent: 2.0, origin: 0.0 }).unwrap();
        // ∫ t² (1)² dt on [0,1] with field 0 against u = t
        let z = vec![0.0; mesh.len()];
        let e = h1_error(&w, &mesh, &z, |_| 0.0, |_| 1.0, 0.0, 1.0);
        assert!((e * e - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn penalty_vanishing_drives_projection_to_zero() {
        let s = SpaceDescriptor::circle(2.0 * std::f64::consts::PI).unwrap();
        let ball = BallSpec::new(0.0, std::f64::consts::PI);
        let mesh = build_mesh(&s, &ball, 0.05).unwrap();
        let g = mesh.sample(|t| t.cos());
        let (_, small) = penalized_projection(&s, &mesh, -2.0, 2.0, &g, 1e8).unwrap();
        let (_, big) = penalized_projection(&s, &mesh, -2.0, 2.0, &g, 1e-3).unwrap();
        assert!(small < 1e-6);
        assert!(big > 0.5);
    }
}
