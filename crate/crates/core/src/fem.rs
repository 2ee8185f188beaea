//! Ball-aware P1 meshes, weighted mass/stiffness assembly and the free/
//! constrained node partition for the two Dirichlet conventions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::TriForm;
use crate::mmspace::{BallSpec, EndpointTag, SpaceDescriptor, Weight};

/// 2-point Gauss–Legendre nodes on `[0, 1]` (weights 1/2 each).
const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// A 1D mesh of the ball's closure plus a one-element collar.
///
/// On a circle the whole circle is meshed in the chart centered at the ball
/// center: nodes lie in `[c - L/2, c + L/2)`, node 0 is the antipode and the
/// last element wraps back to node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    nodes: Vec<f64>,
    period: Option<f64>,
    h_max: f64,
    ball: BallSpec,
    ball_endpoint_nodes: Vec<usize>,
}

impl Mesh {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// The ball this mesh was generated for.
    pub fn ball(&self) -> BallSpec {
        self.ball
    }

    pub fn ball_endpoint_nodes(&self) -> &[usize] {
        &self.ball_endpoint_nodes
    }

    pub fn element_count(&self) -> usize {
        if self.is_periodic() {
            self.nodes.len()
        } else {
            self.nodes.len() - 1
        }
    }

    /// Element `e` as `(i, j, a, b)`: node indices and chart coordinates with
    /// `b > a` (the wrapping element of a circle has `b = a + length`).
    pub fn element(&self, e: usize) -> (usize, usize, f64, f64) {
        let n = self.nodes.len();
        let j = (e + 1) % n;
        let a = self.nodes[e];
        let b = if j == 0 { self.nodes[0] + self.period.unwrap_or(0.0) } else { self.nodes[j] };
        (e, j, a, b)
    }

    pub fn elements(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.element_count()).map(move |e| self.element(e))
    }

    /// Chart coordinate range covered by the mesh.
    pub fn span(&self) -> (f64, f64) {
        let lo = self.nodes[0];
        match self.period {
            Some(p) => (lo, lo + p),
            None => (lo, *self.nodes.last().unwrap()),
        }
    }

    /// Linear interpolation of a nodal field at chart coordinate `t`; `None`
    /// outside the mesh span.
    pub fn interpolate(&self, field: &[f64], t: f64) -> Option<f64> {
        let (lo, hi) = self.span();
        let mut t = t;
        if let Some(p) = self.period {
            t = lo + (t - lo).rem_euclid(p);
        }
        if t < lo || t > hi {
            return None;
        }
        let k = self.nodes.partition_point(|&x| x <= t);
        let e = k.saturating_sub(1).min(self.element_count() - 1);
        let (i, j, a, b) = self.element(e);
        let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
        Some(field[i] * (1.0 - s) + field[j] * s)
    }

    /// Nodal interpolant of `f` (evaluated at chart coordinates).
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&t| f(t)).collect()
    }
}

fn subdivide(breaks: &[f64], target_h: f64, out: &mut Vec<f64>) {
    for w in breaks.windows(2) {
        let (p, q) = (w[0], w[1]);
        // lengths within a few ulps of a multiple of target_h keep that
        // multiple, so scaled copies of a ball get the same counts
        let x = (q - p) / target_h;
        let m = if x - x.floor() <= 8.0 * f64::EPSILON * x { x.floor() } else { x.ceil() };
        let m = m.max(1.0) as usize;
        for s in 0..m {
            out.push(p + (q - p) * (s as f64) / (m as f64));
        }
    }
}

/// Sorts and merges breakpoints closer than `tol`, keeping the earliest
/// listed (priority) value of each cluster.
fn merge_breaks(mut pts: Vec<f64>, tol: f64) -> Vec<f64> {
    let mut merged: Vec<f64> = Vec::new();
    for p in pts.drain(..) {
        if !merged.iter().any(|&m| (m - p).abs() <= tol) {
            merged.push(p);
        }
    }
    merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
    merged
}

/// Builds a mesh whose nodes include every ball endpoint, the center and, for
/// power weights, the weight origin.
pub fn build_mesh(space: &SpaceDescriptor, ball: &BallSpec, target_h: f64) -> Result<Mesh> {
    if !(target_h.is_finite() && target_h > 0.0) {
        return Err(Error::InvalidArgument(format!("target_h must be > 0, got {target_h}")));
    }
    let region = space.ball_region(ball)?;
    let span = region.span();
    if span.length() <= 0.0 {
        return Err(Error::Mesh("empty ball region".into()));
    }
    if target_h > 2.0 * ball.radius {
        return Err(Error::Mesh(format!(
            "target_h {target_h} exceeds the ball diameter {}",
            2.0 * ball.radius
        )));
    }
    let tol = space.geometric_tolerance(ball);
    let c = span.lo + 0.5 * span.length();
    let center = match space.period() {
        Some(_) => c,
        None => ball.center,
    };

    let (nodes, period) = match space.period() {
        Some(l) => {
            let antipode = center - 0.5 * l;
            let mut breaks = vec![antipode, center];
            if span.lo_tag == EndpointTag::BallBoundary {
                breaks.push(span.lo);
                breaks.push(span.hi);
            }
            let mut breaks = merge_breaks(breaks, tol);
            breaks.push(antipode + l);
            let mut nodes = Vec::new();
            subdivide(&breaks, target_h, &mut nodes);
            if nodes.len() < 3 {
                return Err(Error::Mesh("circle mesh needs at least 3 nodes".into()));
            }
            (nodes, Some(l))
        }
        None => {
            let (dlo, dhi) = space.bounds();
            let lo = if span.lo_tag == EndpointTag::SpaceBoundaryCovered || (span.lo - dlo).abs() <= tol {
                span.lo
            } else {
                (span.lo - target_h).max(dlo)
            };
            let hi = if span.hi_tag == EndpointTag::SpaceBoundaryCovered || (span.hi - dhi).abs() <= tol {
                span.hi
            } else {
                (span.hi + target_h).min(dhi)
            };
            let mut breaks = vec![span.lo, span.hi, lo, hi, center];
            if let Weight::Power { origin, .. } = space.weight() {
                if origin > lo && origin < hi {
                    breaks.push(origin);
                }
            }
            let breaks = merge_breaks(breaks, tol);
            let mut nodes = Vec::new();
            subdivide(&breaks, target_h, &mut nodes);
            nodes.push(*breaks.last().unwrap());
            (nodes, None)
        }
    };

    let mut mesh = Mesh {
        nodes,
        period,
        h_max: 0.0,
        ball: *ball,
        ball_endpoint_nodes: Vec::new(),
    };
    let mut h_max = 0.0f64;
    for (e, (_, _, a, b)) in mesh.elements().enumerate() {
        if !(b - a > 0.0) {
            return Err(Error::DegenerateElement(e));
        }
        h_max = h_max.max(b - a);
    }
    mesh.h_max = h_max;
    for (end, tag) in [(span.lo, span.lo_tag), (span.hi, span.hi_tag)] {
        if !matches!(tag, EndpointTag::BallBoundary | EndpointTag::WrapCut) {
            continue;
        }
        let idx = if period.is_some() && (end - mesh.span().1).abs() <= tol {
            Some(0)
        } else {
            mesh.nodes.iter().position(|&x| (x - end).abs() <= tol)
        };
        let i = idx.ok_or_else(|| Error::Mesh(format!("ball endpoint {end} is not a mesh node")))?;
        if !mesh.ball_endpoint_nodes.contains(&i) {
            mesh.ball_endpoint_nodes.push(i);
        }
    }
    Ok(mesh)
}

/// Mass and stiffness forms on a mesh.
///
/// `xᵀ A y = ∫ w x' y' dt` realizes `∫ Γ(x, y) dm` (so `xᵀ A x = 2 Ch(x)`),
/// and `xᵀ M y = ∫ w x y dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormPair {
    pub mass: TriForm,
    pub stiffness: TriForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassKind {
    #[default]
    Consistent,
    Lumped,
}

/// `(∫w, ∫w φ_a², ∫w φ_a φ_b, ∫w φ_b²)` on element `[a, b]` with the linear
/// basis `φ_a(a) = 1`, `φ_b(b) = 1`.
fn element_moments(weight: &Weight, a: f64, b: f64) -> (f64, f64, f64, f64) {
    let h = b - a;
    match *weight {
        Weight::Constant { density } => (density * h, density * h / 3.0, density * h / 6.0, density * h / 3.0),
        Weight::Power { exponent, origin } if a == origin || b == origin => {
            // exact: moments of s^p on [0, h] with s the distance to the origin
            let mu = |j: i32| h.powf(exponent + j as f64 + 1.0) / (exponent + j as f64 + 1.0);
            let (m0, m1, m2) = (mu(0), mu(1), mu(2));
            let near = m0 - 2.0 * m1 / h + m2 / (h * h);
            let cross = m1 / h - m2 / (h * h);
            let far = m2 / (h * h);
            if a == origin {
                (m0, near, cross, far)
            } else {
                (m0, far, cross, near)
            }
        }
        Weight::Power { .. } => {
            let mut acc = (0.0, 0.0, 0.0, 0.0);
            for &g in &GAUSS2 {
                let w = 0.5 * h * weight.density(a + g * h);
                let (pa, pb) = (1.0 - g, g);
                acc.0 += w;
                acc.1 += w * pa * pa;
                acc.2 += w * pa * pb;
                acc.3 += w * pb * pb;
            }
            acc
        }
    }
}

fn assemble_filtered(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    mass_kind: MassKind,
    keep: impl Fn(f64, f64) -> bool,
) -> Result<FormPair> {
    let n = mesh.len();
    let periodic = mesh.is_periodic();
    let mut a = TriForm::zeros(n, periodic);
    let mut m = TriForm::zeros(n, periodic);
    let weight = space.weight();
    for (e, (i, j, lo, hi)) in mesh.elements().enumerate() {
        let h = hi - lo;
        if !(h > 0.0) {
            return Err(Error::DegenerateElement(e));
        }
        if !keep(lo, hi) {
            continue;
        }
        let (w0, mii, mij, mjj) = element_moments(&weight, lo, hi);
        let k = w0 / (h * h);
        a.add_element(e, i, j, k, -k, k);
        match mass_kind {
            MassKind::Consistent => m.add_element(e, i, j, mii, mij, mjj),
            MassKind::Lumped => m.add_element(e, i, j, mii + mij, 0.0, mjj + mij),
        }
    }
    Ok(FormPair { mass: m, stiffness: a })
}

/// Assembles the weighted P1 forms with consistent mass.
pub fn assemble(space: &SpaceDescriptor, mesh: &Mesh) -> Result<FormPair> {
    assemble_filtered(space, mesh, MassKind::Consistent, |_, _| true)
}

pub fn assemble_with(space: &SpaceDescriptor, mesh: &Mesh, mass_kind: MassKind) -> Result<FormPair> {
    assemble_filtered(space, mesh, mass_kind, |_, _| true)
}

/// Forms restricted to the elements inside the closed ball the mesh was built
/// for; these give `L²(B_R(x))` and `∫_{B_R(x)} Γ` norms.
pub fn assemble_on_ball(space: &SpaceDescriptor, mesh: &Mesh) -> Result<FormPair> {
    let ball = mesh.ball();
    let c = space.chart_center(&ball);
    assemble_filtered(space, mesh, MassKind::Consistent, |lo, hi| {
        space.raw_distance(c, 0.5 * (lo + hi)) < ball.radius
    })
}

/// Forms restricted to elements inside the chart interval `[lo, hi]`.
pub fn assemble_on_interval(space: &SpaceDescriptor, mesh: &Mesh, lo: f64, hi: f64) -> Result<FormPair> {
    let tol = 1e-12 * (lo.abs() + hi.abs()).max(1.0);
    assemble_filtered(space, mesh, MassKind::Consistent, |a, b| a >= lo - tol && b <= hi + tol)
}

/// The two Sobolev conventions for Dirichlet data on a ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    /// Closure of compactly supported Lipschitz functions on the open ball.
    H0,
    /// Global Sobolev functions vanishing a.e. outside the ball.
    Hhat0,
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convention::H0 => "H0",
            Convention::Hhat0 => "Hhat0",
        })
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H0" | "h0" => Ok(Convention::H0),
            "Hhat0" | "hhat0" | "HHAT0" => Ok(Convention::Hhat0),
            _ => Err(Error::Parse(format!("unknown convention '{s}' (expected H0 or Hhat0)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSets {
    pub convention: Convention,
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
}

impl NodeSets {
    pub fn free_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.free {
            mask[i] = true;
        }
        mask
    }
}

/// Partitions mesh nodes into free and constrained sets.
///
/// H0: a node is free iff it lies in the open ball.
/// Hhat0: a node is constrained iff an incident element lies outside the
/// closed ball.
pub fn classify_nodes(
    space: &SpaceDescriptor,
    mesh: &Mesh,
    ball: &BallSpec,
    convention: Convention,
) -> Result<NodeSets> {
    space.validate_ball(ball)?;
    let tol = space.geometric_tolerance(ball);
    let built = mesh.ball();
    if (built.radius - ball.radius).abs() > tol
        || space.raw_distance(space.chart_center(&built), space.chart_center(ball)) > tol
    {
        return Err(Error::MeshBallMismatch(format!(
            "mesh built for B_{}({}), asked for B_{}({})",
            built.radius, built.center, ball.radius, ball.center
        )));
    }
    let c = space.chart_center(ball);
    let r = ball.radius;
    let n = mesh.len();
    let mut constrained = vec![false; n];
    match convention {
        Convention::H0 => {
            for (i, &t) in mesh.nodes().iter().enumerate() {
                constrained[i] = space.raw_distance(c, t) >= r - tol;
            }
        }
        Convention::Hhat0 => {
            for (i, j, a, b) in mesh.elements() {
                let outside = space.raw_distance(c, 0.5 * (a + b)) > r + tol;
                if outside {
                    constrained[i] = true;
                    constrained[j] = true;
                }
            }
        }
    }
    let (mut free, mut cons) = (Vec::new(), Vec::new());
    for (i, &is_c) in constrained.iter().enumerate() {
        if is_c {
            cons.push(i);
        } else {
            free.push(i);
        }
    }
    Ok(NodeSets { convention, free, constrained: cons })
}
