//! Parameter families of ball problems: eigenvalue curves, jump scans between
//! the two conventions, eigenfunction tracking and the cone pullback.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{assemble, build_mesh, classify_nodes, Convention, Mesh};
use crate::mmspace::{BallSpec, SpaceDescriptor, Topology};
use crate::numfmt::fmt15;
use crate::spectral::{dirichlet_spectrum, Spectrum};

/// Default relative tolerance of a jump.
pub const JUMP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub param: f64,
    pub lambdas: Vec<f64>,
    /// Solver error for this row, if any.
    pub error: Option<String>,
}

/// First `k` eigenvalues along a parameter family, ordered by parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub k: usize,
    pub rows: Vec<CurveRow>,
}

impl Curve {
    /// CSV with header `param,lambda_1,...,lambda_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param");
        for j in 1..=self.k {
            out.push_str(&format!(",lambda_{j}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&fmt15(row.param));
            for j in 0..self.k {
                out.push(',');
                out.push_str(&row.lambdas.get(j).map_or("NaN".to_string(), |v| fmt15(*v)));
            }
            out.push('\n');
        }
        out
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.lambdas.get(j).copied().unwrap_or(f64::NAN))
            .collect()
    }
}

/// Evaluates `family(param)` for every parameter and records the first `k`
/// eigenvalues on a ball-aware mesh of size `h`.
pub fn spectrum_curve<F>(params: &[f64], family: F, convention: Convention, k: usize, h: f64) -> Curve
where
    F: Fn(f64) -> Result<(SpaceDescriptor, BallSpec)> + Sync,
{
    let mut rows: Vec<CurveRow> = params
        .par_iter()
        .map(|&p| {
            let run = || -> Result<Vec<f64>> {
                let (space, ball) = family(p)?;
                let mesh = build_mesh(&space, &ball, h)?;
                Ok(dirichlet_spectrum(&space, &mesh, &ball, convention, k)?.eigenvalues)
            };
            match run() {
                Ok(lambdas) => CurveRow { param: p, lambdas, error: None },
                Err(e) => CurveRow {
                    param: p,
                    lambdas: Vec::new(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.param.partial_cmp(&b.param).unwrap_or(std::cmp::Ordering::Equal));
    Curve { k, rows }
}

/// Radii at which the two conventions can differ for balls around `center`:
/// the ball boundary reaches a boundary point of the space, or the ball
/// closes up around a circle.
pub fn exceptional_candidates(space: &SpaceDescriptor, center: f64) -> Vec<f64> {
    let mut c = match space.topology() {
        Topology::Interval { a, b } => vec![center - a, b - center],
        Topology::HalfLine { a } => vec![center - a],
        Topology::Line => vec![],
        Topology::Circle { circumference } => vec![0.5 * circumference],
    };
    c.retain(|r| *r > 0.0);
    c.sort_by(|a, b| a.partial_cmp(b).unwrap());
    c.dedup();
    c
}

/// Snaps grid radii that match a candidate to it exactly and drops radii
/// within one mesh cell of a candidate. Returns `(kept, excluded)`.
pub fn prepare_grid(space: &SpaceDescriptor, center: f64, radii: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let cands = exceptional_candidates(space, center);
    let (mut kept, mut excluded) = (Vec::new(), Vec::new());
    for &r in radii {
        let snap = cands.iter().find(|&&c| (r - c).abs() <= 1e-9 * c.max(1.0));
        if let Some(&c) = snap {
            kept.push(c);
        } else if cands.iter().any(|&c| (r - c).abs() < h) {
            excluded.push(r);
        } else {
            kept.push(r);
        }
    }
    (kept, excluded)
}

/// Evenly spaced grid of `count` radii over the half-open interval `(lo, hi]`.
pub fn radius_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|i| if i == count { hi } else { lo + (hi - lo) * i as f64 / count as f64 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub radius: f64,
    pub lambda_h0: Vec<f64>,
    pub lambda_hhat0: Vec<f64>,
    /// `λ^{H0}` at the slightly larger radius used by the envelope check.
    pub lambda_h0_right: Vec<f64>,
    pub free_sets_differ: bool,
    /// `max_j |λ_j^{H0} − λ_j^{Hhat0}| / max(λ_j^{Hhat0}, 1)` over `j ≤ k`.
    pub rel_gap: f64,
    pub exceptional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpScan {
    pub k: usize,
    pub tol: f64,
    pub mesh_h: f64,
    /// Radius increment of the envelope check.
    pub right_step: f64,
    pub points: Vec<ScanPoint>,
    pub excluded: Vec<f64>,
    pub exceptional: Vec<f64>,
}

impl JumpScan {
    /// Largest relative disagreement of the conventions away from the
    /// exceptional radii.
    pub fn max_regular_gap(&self) -> f64 {
        self.points
            .iter()
            .filter(|p| !p.exceptional)
            .fold(0.0, |m, p| m.max(p.rel_gap))
    }

    /// Largest `|λ^{Hhat0}(R) − λ^{H0}(R + step)| / max(|·|, |·|, 1e-6)`.
    pub fn max_envelope_gap(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in &self.points {
            for (a, b) in p.lambda_hhat0.iter().zip(&p.lambda_h0_right) {
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-6));
            }
        }
        worst
    }

    /// Number of `(radius, j)` pairs with `λ^{H0} < λ^{Hhat0}` beyond
    /// relative `rtol`.
    pub fn ordering_violations(&self, rtol: f64) -> usize {
        self.points
            .iter()
            .map(|p| {
                p.lambda_h0
                    .iter()
                    .zip(&p.lambda_hhat0)
                    .filter(|(a, b)| **a < **b - rtol * b.abs().max(1.0))
                    .count()
            })
            .sum()
    }

    /// Number of consecutive radius pairs along which some `λ_j` increases.
    pub fn monotonicity_violations(&self, rtol: f64) -> usize {
        let mut bad = 0;
        for w in self.points.windows(2) {
            for (prev, next) in [
                (&w[0].lambda_h0, &w[1].lambda_h0),
                (&w[0].lambda_hhat0, &w[1].lambda_hhat0),
            ] {
                if prev.iter().zip(next).any(|(a, b)| *b > *a + rtol * a.abs().max(1.0)) {
                    bad += 1;
                }
            }
        }
        bad
    }

    /// CSV: `radius,gap,exceptional,h0_1..,hhat0_1..`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,rel_gap,exceptional");
        let m = self.points.first().map_or(0, |p| p.lambda_h0.len());
        for j in 1..=m {
            out.push_str(&format!(",h0_lambda_{j}"));
        }
        for j in 1..=m {
            out.push_str(&format!(",hhat0_lambda_{j}"));
        }
        out.push('\n');
        for p in &self.points {
            out.push_str(&format!("{},{},{}", fmt15(p.radius), fmt15(p.rel_gap), p.exceptional as u8));
            for v in p.lambda_h0.iter().chain(&p.lambda_hhat0) {
                out.push(',');
                out.push_str(&fmt15(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Scans radii around `center`, comparing the first `k` eigenvalues of the
/// two conventions on each radius's ball-aware mesh.
///
/// A radius is exceptional when the free sets differ and the relative gap
/// exceeds `tol`. Each point also carries `k_envelope` eigenvalues of H0 at
/// `R + step`, with `step` a hundred geometric tolerances.
pub fn jump_scan(
    space: &SpaceDescriptor,
    center: f64,
    radii: &[f64],
    k: usize,
    k_envelope: usize,
    h: f64,
    tol: f64,
) -> Result<JumpScan> {
    if !(tol > 0.0) {
        return Err(Error::ParameterOutOfRange {
            name: "tol".into(),
            reason: "must be positive".into(),
        });
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radius grid must be strictly increasing".into()));
    }
    let (kept, excluded) = prepare_grid(space, center, radii, h);
    let kk = k.max(k_envelope);
    let right_step = 100.0 * space.geometric_tolerance(&BallSpec::new(center, *kept.last().unwrap_or(&1.0)));
    // Grid radii are often multiples of `h`; a slightly smaller target puts
    // segment lengths clear of the rounding threshold so that the meshes at
    // `R` and `R + step` have the same element counts.
    let target = h * (1.0 - 1e-7);
    let points: Vec<Result<ScanPoint>> = kept
        .par_iter()
        .map(|&r| {
            let ball = BallSpec::new(center, r);
            let mesh = build_mesh(space, &ball, target)?;
            let s0 = classify_nodes(space, &mesh, &ball, Convention::H0)?;
            let s1 = classify_nodes(space, &mesh, &ball, Convention::Hhat0)?;
            let l0 = dirichlet_spectrum(space, &mesh, &ball, Convention::H0, kk)?.eigenvalues;
            let l1 = dirichlet_spectrum(space, &mesh, &ball, Convention::Hhat0, kk)?.eigenvalues;
            let right = BallSpec::new(center, r + right_step);
            let right_mesh = build_mesh(space, &right, target)?;
            let lr = dirichlet_spectrum(space, &right_mesh, &right, Convention::H0, k_envelope)?.eigenvalues;
            let rel_gap = l0
                .iter()
                .zip(&l1)
                .take(k)
                .map(|(a, b)| (a - b).abs() / b.max(1.0))
                .fold(0.0, f64::max);
            let differ = s0.free != s1.free;
            Ok(ScanPoint {
                radius: r,
                lambda_h0: l0,
                lambda_hhat0: l1[..k_envelope.min(l1.len())].to_vec(),
                lambda_h0_right: lr,
                free_sets_differ: differ,
                rel_gap,
                exceptional: differ && rel_gap > tol,
            })
        })
        .collect();
    let points: Vec<ScanPoint> = points.into_iter().collect::<Result<_>>()?;
    let exceptional = points.iter().filter(|p| p.exceptional).map(|p| p.radius).collect();
    Ok(JumpScan {
        k,
        tol,
        mesh_h: h,
        right_step,
        points,
        excluded,
        exceptional,
    })
}

fn check_chart(a: &Spectrum, b: &Spectrum) -> Result<()> {
    if a.space.period() != b.space.period() {
        return Err(Error::ChartMismatch(format!(
            "periods {:?} and {:?} differ",
            a.space.period(),
            b.space.period()
        )));
    }
    if let (Some(_), ca, cb) = (a.space.period(), a.space.chart_center(&a.ball), b.space.chart_center(&b.ball)) {
        if (ca - cb).abs() > 1e-12 * a.space.period().unwrap() {
            return Err(Error::ChartMismatch("circle charts are centered at different points".into()));
        }
    }
    Ok(())
}

fn transfer(field: &[f64], from: &Mesh, to: &Mesh) -> Vec<f64> {
    to.nodes()
        .iter()
        .map(|&t| from.interpolate(field, t).unwrap_or(0.0))
        .collect()
}

fn cluster_of(s: &Spectrum, idx: usize) -> Vec<usize> {
    s.clusters().into_iter().find(|g| g.contains(&idx)).unwrap_or_else(|| vec![idx])
}

/// `L²` distance between the k-th (1-based) eigenfunctions of two spectra on
/// a common chart, after interpolation onto the finer mesh and sign
/// alignment. Within a multiple eigenvalue the Hilbert–Schmidt distance of
/// the spectral projections is returned instead.
pub fn eigfun_distance(a: &Spectrum, b: &Spectrum, k: usize) -> Result<f64> {
    check_chart(a, b)?;
    for s in [a, b] {
        if k == 0 || s.len() < k {
            return Err(Error::IncompleteSpectrum { have: s.len(), need: k });
        }
    }
    let (fine, coarse) = if a.mesh.len() >= b.mesh.len() { (a, b) } else { (b, a) };
    let mass = assemble(&fine.space, &fine.mesh)?.mass;
    let ga = cluster_of(fine, k - 1);
    let gb = cluster_of(coarse, k - 1);
    let on_fine = |s: &Spectrum, idx: &[usize]| -> Vec<Vec<f64>> {
        idx.iter()
            .map(|&i| {
                if std::ptr::eq(s, fine) {
                    s.eigenvectors[i].clone()
                } else {
                    transfer(&s.eigenvectors[i], &s.mesh, &fine.mesh)
                }
            })
            .collect()
    };
    let orthonormal = |vs: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for mut v in vs {
            for q in &out {
                let c = mass.quad(q, &v);
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            let n = mass.quad(&v, &v).max(0.0).sqrt();
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
                out.push(v);
            }
        }
        out
    };
    let ua = orthonormal(on_fine(fine, &ga));
    let ub = orthonormal(on_fine(coarse, &gb));
    if ua.len() == 1 && ub.len() == 1 {
        let c = mass.quad(&ua[0], &ub[0]);
        let s = if c < 0.0 { -1.0 } else { 1.0 };
        let d: Vec<f64> = ua[0].iter().zip(&ub[0]).map(|(x, y)| x - s * y).collect();
        return Ok(mass.quad(&d, &d).max(0.0).sqrt());
    }
    let mut overlap = 0.0;
    for u in &ua {
        for v in &ub {
            overlap += mass.quad(u, v).powi(2);
        }
    }
    Ok((ua.len() as f64 + ub.len() as f64 - 2.0 * overlap).max(0.0).sqrt())
}

/// `g_ε(t) = f(o + (1 − ε)(t − o))` with `o` the pole, by linear
/// interpolation; zero where the argument leaves the mesh.
pub fn pullback_scale(space: &SpaceDescriptor, mesh: &Mesh, f: &[f64], eps: f64) -> Result<Vec<f64>> {
    let pole = space.pole().ok_or(Error::NoPole)?;
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::ParameterOutOfRange {
            name: "eps".into(),
            reason: format!("must lie in [0, 1), got {eps}"),
        });
    }
    if f.len() != mesh.len() {
        return Err(Error::DimensionMismatch {
            expected: mesh.len(),
            found: f.len(),
        });
    }
    if eps == 0.0 {
        return Ok(f.to_vec());
    }
    Ok(mesh
        .nodes()
        .iter()
        .map(|&t| mesh.interpolate(f, pole + (1.0 - eps) * (t - pole)).unwrap_or(0.0))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn candidates() {
        let s = SpaceDescriptor::interval(0.0, 10.0).unwrap();
        assert_eq!(exceptional_candidates(&s, 5.0), vec![5.0]);
        let s = SpaceDescriptor::half_line(0.0).unwrap();
        assert_eq!(exceptional_candidates(&s, 1.0), vec![1.0]);
        let s = SpaceDescriptor::circle(2.0 * PI).unwrap();
        assert_eq!(exceptional_candidates(&s, 0.3), vec![PI]);
        assert!(exceptional_candidates(&SpaceDescriptor::line(), 0.0).is_empty());
    }

    #[test]
    fn grid_snaps_and_excludes() {
        let s = SpaceDescriptor::half_line(0.0).unwrap();
        let (kept, excluded) = prepare_grid(&s, 1.0, &[0.5, 0.998, 1.0 + 1e-12, 1.004, 1.5], 0.005);
        assert_eq!(kept, vec![0.5, 1.0, 1.5]);
        assert_eq!(excluded, vec![0.998, 1.004]);
        let g = radius_grid(0.5, PI, 200);
        assert_eq!(g.len(), 200);
        assert_eq!(*g.last().unwrap(), PI);
    }

    #[test]
    fn curve_is_ordered_and_constant_family_is_constant() {
        let fam = |_: f64| Ok((SpaceDescriptor::interval(0.0, 1.0)?, BallSpec::new(0.5, 0.5)));
        let c = spectrum_curve(&[0.3, 0.1, 0.2], fam, Convention::H0, 2, 0.01);
        assert_eq!(c.rows.iter().map(|r| r.param).collect::<Vec<_>>(), vec![0.1, 0.2, 0.3]);
        assert_eq!(c.column(0)[0], c.column(0)[2]);
        assert!(c.to_csv().starts_with("param,lambda_1,lambda_2\n0.1,"));
    }

    #[test]
    fn pullback_basics() {
        let s = SpaceDescriptor::cone(3.0).unwrap();
        let ball = BallSpec::new(0.0, 1.0);
        let mesh = build_mesh(&s, &ball, 0.1).unwrap();
        let f = mesh.sample(|t| t);
        assert_eq!(pullback_scale(&s, &mesh, &f, 0.0).unwrap(), f);
        let g = pullback_scale(&s, &mesh, &f, 0.25).unwrap();
        for (t, v) in mesh.nodes().iter().zip(&g) {
            assert!((v - 0.75 * t).abs() < 1e-14);
        }
        assert!(pullback_scale(&s, &mesh, &f, 1.0).is_err());
        let plain = SpaceDescriptor::interval(0.0, 2.0).unwrap();
        assert!(matches!(pullback_scale(&plain, &mesh, &f, 0.1), Err(Error::NoPole)));
    }

    #[test]
    fn distance_of_identical_and_flipped() {
        let s = SpaceDescriptor::circle(2.0 * PI).unwrap();
        let ball = BallSpec::new(0.0, 2.0);
        let mesh = build_mesh(&s, &ball, 0.05).unwrap();
        let sp = dirichlet_spectrum(&s, &mesh, &ball, Convention::H0, 2).unwrap();
        assert!(eigfun_distance(&sp, &sp, 1).unwrap() < 1e-12);
        let mut flipped = sp.clone();
        flipped.eigenvectors[0].iter_mut().for_each(|x| *x = -*x);
        assert!(eigfun_distance(&sp, &flipped, 1).unwrap() < 1e-12);
        let line = SpaceDescriptor::line();
        let lb = BallSpec::new(0.0, 2.0);
        let lm = build_mesh(&line, &lb, 0.05).unwrap();
        let ls = dirichlet_spectrum(&line, &lm, &lb, Convention::H0, 2).unwrap();
        assert!(matches!(eigfun_distance(&sp, &ls, 1), Err(Error::ChartMismatch(_))));
    }
}
