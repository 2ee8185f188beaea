//! Dirichlet spectra of balls, Rayleigh quotients and the spectral heat flow.

use crate::error::{Error, Result};
use crate::fem::{assemble_with, classify_nodes, Convention, FormPair, MassKind, Mesh, NodeSets};
use crate::linalg::{all_eigenpairs, smallest_eigenpairs, CyclicTri, Eigenpairs};
use crate::mmspace::{BallSpec, SpaceDescriptor};
use crate::numfmt::fmt15;

/// Relative tolerance for grouping equal eigenvalues.
pub const MULTIPLICITY_RTOL: f64 = 1e-8;

/// Ordered Dirichlet eigenpairs of a ball.
///
/// Eigenvectors live on the full mesh, vanish on constrained nodes and are
/// M-orthonormal.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖A u − λ M u‖ / ‖M u‖` on the free set.
    pub residuals: Vec<f64>,
    pub convention: Convention,
    pub ball: BallSpec,
    pub sets: NodeSets,
    pub mesh: Mesh,
    pub space: SpaceDescriptor,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// True when every free-dimension eigenpair is present.
    pub fn is_complete(&self) -> bool {
        self.eigenvalues.len() == self.sets.free.len()
    }

    /// Index groups of numerically equal eigenvalues.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        group_multiplicities(&self.eigenvalues, MULTIPLICITY_RTOL)
    }

    /// CSV with header `k,lambda,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,lambda,residual\n");
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, fmt15(*l), fmt15(*r)));
        }
        out
    }

    /// CSV with header `coordinate,u_1,...,u_k`.
    pub fn vectors_csv(&self) -> String {
        let mut out = String::from("coordinate");
        for k in 1..=self.len() {
            out.push_str(&format!(",u_{k}"));
        }
        out.push('\n');
        for (i, t) in self.mesh.nodes().iter().enumerate() {
            out.push_str(&fmt15(*t));
            for v in &self.eigenvectors {
                out.push(',');
                out.push_str(&fmt15(v[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Groups indices of an ascending sequence whose consecutive values agree to
/// relative `rtol`.
pub fn group_multiplicities(values: &[f64], rtol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if {
                let prev = values[*g.last().unwrap()];
                (v - prev).abs() <= rtol * v.abs().max(prev.abs()).max(rtol)
            } =>
            {
                g.push(i)
            }
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn reduced(forms: &FormPair, sets: &NodeSets) -> (CyclicTri, CyclicTri) {
    (forms.stiffness.reduce(&sets.free), forms.mass.reduce(&sets.free))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn build_spectrum(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    ball: &BallSpec,
    sets: NodeSets,
    forms: &FormPair,
    pairs: Eigenpairs,
) -> Spectrum {
    let (a, m) = reduced(forms, &sets);
    let n = mesh.len();
    let mut polished = Vec::with_capacity(pairs.values.len());
    for v in &pairs.vectors {
        let mut full = vec![0.0; n];
        for (&i, &x) in sets.free.iter().zip(v) {
            full[i] = x;
        }
        // the Rayleigh quotient in difference form is accurate to a few ulps
        // relative to λ; the solver's eigenvalue carries an error of order
        // ulp·λ_max
        let lambda = forms.stiffness.energy(&full) / forms.mass.energy(&full);
        polished.push((lambda, v, full));
    }
    polished.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut values = Vec::with_capacity(polished.len());
    let mut residuals = Vec::with_capacity(polished.len());
    let mut vectors = Vec::with_capacity(polished.len());
    for (lambda, v, full) in polished {
        let av = a.matvec(v);
        let mv = m.matvec(v);
        let r: Vec<f64> = av.iter().zip(&mv).map(|(x, y)| x - lambda * y).collect();
        residuals.push(norm2(&r) / norm2(&mv));
        values.push(lambda);
        vectors.push(full);
    }
    Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
        convention: sets.convention,
        ball: *ball,
        sets,
        mesh: mesh.clone(),
        space: space.clone(),
    }
}

fn prepare(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    ball: &BallSpec,
    convention: Convention,
    mass_kind: MassKind,
) -> Result<(NodeSets, FormPair)> {
    let sets = classify_nodes(space, mesh, ball, convention)?;
    if sets.free.is_empty() {
        return Err(Error::TrivialBall);
    }
    let forms = assemble_with(space, mesh, mass_kind)?;
    Ok((sets, forms))
}

/// First `k` eigenpairs of the Dirichlet problem on `ball`.
pub fn dirichlet_spectrum(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    ball: &BallSpec,
    convention: Convention,
    k: usize,
) -> Result<Spectrum> {
    dirichlet_spectrum_with(space, mesh, ball, convention, k, MassKind::Consistent)
}

pub fn dirichlet_spectrum_with(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    ball: &BallSpec,
    convention: Convention,
    k: usize,
    mass_kind: MassKind,
) -> Result<Spectrum> {
    let (sets, forms) = prepare(space, mesh, ball, convention, mass_kind)?;
    if k == 0 || k > sets.free.len() {
        return Err(Error::TooManyEigenpairs {
            requested: k,
            available: sets.free.len(),
        });
    }
    let (a, m) = reduced(&forms, &sets);
    let pairs = smallest_eigenpairs(&a, &m, k)?;
    Ok(build_spectrum(space, mesh, ball, sets, &forms, pairs))
}

/// Every eigenpair of the reduced problem (dense route).
pub fn complete_spectrum(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    ball: &BallSpec,
    convention: Convention,
    mass_kind: MassKind,
) -> Result<(Spectrum, FormPair)> {
    let (sets, forms) = prepare(space, mesh, ball, convention, mass_kind)?;
    let (a, m) = reduced(&forms, &sets);
    let pairs = all_eigenpairs(&a, &m)?;
    let spectrum = build_spectrum(space, mesh, ball, sets, &forms, pairs);
    Ok((spectrum, forms))
}

/// `fᵀAf / fᵀMf` for a field vanishing on the constrained nodes.
pub fn rayleigh(forms: &FormPair, sets: &NodeSets, f: &[f64]) -> Result<f64> {
    let n = forms.mass.len();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: f.len() });
    }
    if sets.constrained.iter().any(|&i| f[i] != 0.0) {
        return Err(Error::InvalidArgument("field is nonzero on constrained nodes".into()));
    }
    let mass = forms.mass.quad(f, f);
    if !(mass > 0.0) {
        return Err(Error::InvalidArgument("field has zero mass norm".into()));
    }
    Ok(forms.stiffness.quad(f, f) / mass)
}

/// The Dirichlet heat semigroup evaluated through a complete spectrum.
#[derive(Debug, Clone)]
pub struct HeatFlow {
    spectrum: Spectrum,
    forms: FormPair,
}

impl HeatFlow {
    pub fn new(spectrum: Spectrum, forms: FormPair) -> Result<Self> {
        if !spectrum.is_complete() {
            return Err(Error::IncompleteSpectrum {
                have: spectrum.len(),
                need: spectrum.sets.free.len(),
            });
        }
        Ok(Self { spectrum, forms })
    }

    pub fn from_problem(
        space: &SpaceDescriptor,
        mesh: &Mesh,
        ball: &BallSpec,
        convention: Convention,
        mass_kind: MassKind,
    ) -> Result<Self> {
        let (spectrum, forms) = complete_spectrum(space, mesh, ball, convention, mass_kind)?;
        Self::new(spectrum, forms)
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn forms(&self) -> &FormPair {
        &self.forms
    }

    /// `L²` norm of a field.
    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.forms.mass.quad(f, f).max(0.0).sqrt()
    }

    /// Modal coefficients `u_kᵀ M f0`.
    pub fn coefficients(&self, f0: &[f64]) -> Result<Vec<f64>> {
        let n = self.forms.mass.len();
        if f0.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: f0.len() });
        }
        let mf = self.forms.mass.matvec(f0);
        Ok(self
            .spectrum
            .eigenvectors
            .iter()
            .map(|u| u.iter().zip(&mf).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::ParameterOutOfRange {
                name: "t".into(),
                reason: format!("time must be finite and >= 0, got {t}"),
            });
        }
        Ok(())
    }

    fn combine(&self, weights: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.forms.mass.len()];
        for (w, u) in weights.zip(&self.spectrum.eigenvectors) {
            out.iter_mut().zip(u).for_each(|(o, x)| *o += w * x);
        }
        out
    }

    /// `u(t) = Σ e^{−λ_k t} (u_kᵀ M f0) u_k`.
    pub fn evolve(&self, f0: &[f64], t: f64) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        let c = self.coefficients(f0)?;
        let lam = &self.spectrum.eigenvalues;
        Ok(self.combine(c.iter().zip(lam).map(|(c, l)| c * (-l * t).exp())))
    }

    /// `Δ u(t) = −Σ λ_k e^{−λ_k t} c_k u_k`.
    pub fn laplacian(&self, f0: &[f64], t: f64) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        let c = self.coefficients(f0)?;
        let lam = &self.spectrum.eigenvalues;
        Ok(self.combine(c.iter().zip(lam).map(|(c, l)| -l * c * (-l * t).exp())))
    }

    /// `‖Δ u(t)‖_{L²}`.
    pub fn laplacian_norm(&self, f0: &[f64], t: f64) -> Result<f64> {
        Self::check_time(t)?;
        let c = self.coefficients(f0)?;
        let s: f64 = c
            .iter()
            .zip(&self.spectrum.eigenvalues)
            .map(|(c, l)| (l * c * (-l * t).exp()).powi(2))
            .sum();
        Ok(s.sqrt())
    }

    /// `2 Ch(u(t)) = u(t)ᵀ A u(t)`.
    pub fn energy(&self, f0: &[f64], t: f64) -> Result<f64> {
        Self::check_time(t)?;
        let c = self.coefficients(f0)?;
        Ok(c.iter()
            .zip(&self.spectrum.eigenvalues)
            .map(|(c, l)| l.max(0.0) * c * c * (-2.0 * l * t).exp())
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, build_mesh};
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn half_line_gap() {
        let s = SpaceDescriptor::half_line(0.0).unwrap();
        let ball = BallSpec::new(PI / 4.0, PI / 4.0);
        let mesh = build_mesh(&s, &ball, 2e-3).unwrap();
        let h0 = dirichlet_spectrum(&s, &mesh, &ball, Convention::H0, 2).unwrap();
        let hh = dirichlet_spectrum(&s, &mesh, &ball, Convention::Hhat0, 2).unwrap();
        assert!(rel(h0.eigenvalues[0], 4.0) < 1e-4);
        assert!(rel(hh.eigenvalues[0], 1.0) < 1e-4);
        assert!(rel(hh.eigenvalues[1], 9.0) < 1e-4);
        assert!(h0.residuals.iter().all(|&r| r < 1e-9));
    }

    #[test]
    fn circle_full_ball_has_zero_eigenvalue() {
        let s = SpaceDescriptor::circle(2.0 * PI).unwrap();
        let ball = BallSpec::new(0.0, PI);
        let mesh = build_mesh(&s, &ball, 0.02).unwrap();
        let sp = dirichlet_spectrum(&s, &mesh, &ball, Convention::Hhat0, 3).unwrap();
        assert!(sp.eigenvalues[0].abs() <= 1e-8);
        assert_eq!(sp.clusters()[1].len(), 2, "{:?}", sp.eigenvalues);
        let forms = assemble(&s, &mesh).unwrap();
        let one = vec![1.0; mesh.len()];
        assert!(rayleigh(&forms, &sp.sets, &one).unwrap().abs() < 1e-10);
    }

    #[test]
    fn heat_flow_of_eigenvector_decays() {
        let s = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let ball = BallSpec::new(0.5, 0.5);
        let mesh = build_mesh(&s, &ball, 0.02).unwrap();
        let heat = HeatFlow::from_problem(&s, &mesh, &ball, Convention::H0, MassKind::Consistent).unwrap();
        let u1 = heat.spectrum().eigenvectors[0].clone();
        let l1 = heat.spectrum().eigenvalues[0];
        let u = heat.evolve(&u1, 0.05).unwrap();
        for (a, b) in u.iter().zip(&u1) {
            assert!((a - (-l1 * 0.05).exp() * b).abs() < 1e-10);
        }
        let back = heat.evolve(&u1, 0.0).unwrap();
        for (a, b) in back.iter().zip(&u1) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn incomplete_spectrum_rejected() {
        let s = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let ball = BallSpec::new(0.5, 0.5);
        let mesh = build_mesh(&s, &ball, 0.1).unwrap();
        let sp = dirichlet_spectrum(&s, &mesh, &ball, Convention::H0, 2).unwrap();
        let forms = assemble(&s, &mesh).unwrap();
        assert!(matches!(HeatFlow::new(sp, forms), Err(Error::IncompleteSpectrum { .. })));
    }

    #[test]
    fn errors() {
        let s = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let ball = BallSpec::new(0.5, 0.5);
        let mesh = build_mesh(&s, &ball, 0.25).unwrap();
        assert!(matches!(
            dirichlet_spectrum(&s, &mesh, &ball, Convention::H0, 4),
            Err(Error::TooManyEigenpairs { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn multiplicity_groups() {
        let g = group_multiplicities(&[0.0, 1.0, 1.0 + 1e-12, 4.0, 4.0], 1e-8);
        assert_eq!(g, vec![vec![0], vec![1, 2], vec![3, 4]]);
    }

    #[test]
    fn csv_header() {
        let s = SpaceDescriptor::interval(0.0, 1.0).unwrap();
        let ball = BallSpec::new(0.5, 0.5);
        let mesh = build_mesh(&s, &ball, 0.25).unwrap();
        let sp = dirichlet_spectrum(&s, &mesh, &ball, Convention::H0, 2).unwrap();
        assert!(sp.to_csv().starts_with("k,lambda,residual\n1,"));
        assert!(sp.vectors_csv().starts_with("coordinate,u_1,u_2\n0,0,0\n"));
    }
}
