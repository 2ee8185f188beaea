//! Weighted one-dimensional metric measure spaces.
//!
//! A space is a topology (interval, half-line, line or circle) carrying the
//! Euclidean or arc-length distance and the measure `w(t) dt`. The weight is
//! either a positive constant or a power `|t - origin|^p`, which realizes the
//! radial part of a metric cone with `p = N - 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::parse_real;

/// Relative geometric tolerance used for endpoint classification.
pub const GEOM_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Interval { a: f64, b: f64 },
    HalfLine { a: f64 },
    Line,
    Circle { circumference: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Constant { density: f64 },
    Power { exponent: f64, origin: f64 },
}

impl Weight {
    /// Density at `t`, with `0^0 = 1`.
    pub fn density(&self, t: f64) -> f64 {
        match *self {
            Weight::Constant { density } => density,
            Weight::Power { exponent, origin } => {
                if exponent == 0.0 {
                    1.0
                } else {
                    (t - origin).abs().powf(exponent)
                }
            }
        }
    }

    /// Exact `∫_lo^hi w(t) dt`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Weight::Constant { density } => density * (hi - lo),
            Weight::Power { exponent, origin } => {
                let anti = |t: f64| {
                    let s = t - origin;
                    s.signum() * s.abs().powf(exponent + 1.0) / (exponent + 1.0)
                };
                anti(hi) - anti(lo)
            }
        }
    }

    /// Smallest and largest density over the closed interval `[lo, hi]`.
    pub fn range_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        match *self {
            Weight::Constant { density } => (density, density),
            Weight::Power { origin, .. } => {
                let (a, b) = ((lo - origin).abs(), (hi - origin).abs());
                let far = a.max(b);
                let near = if lo <= origin && origin <= hi {
                    0.0
                } else {
                    a.min(b)
                };
                (
                    self.density(origin + near),
                    self.density(origin + far),
                )
            }
        }
    }
}

/// A weighted 1D metric measure space `(X, d, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    topology: Topology,
    weight: Weight,
    label: String,
}

/// An open metric ball `B_R(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: f64,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: f64, radius: f64) -> Self {
        Self { center, radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointTag {
    /// The space ends inside the ball; there is no exterior on this side.
    SpaceBoundaryCovered,
    /// The endpoint is at distance exactly `radius` from the center.
    BallBoundary,
    /// Circle ball of radius half the circumference, cut at the antipode.
    WrapCut,
    /// Chart seam of a ball covering the whole circle; not a real endpoint.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPiece {
    pub lo: f64,
    pub hi: f64,
    pub lo_tag: EndpointTag,
    pub hi_tag: EndpointTag,
}

impl RegionPiece {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A ball realized as coordinate intervals.
///
/// Circle regions are expressed in the chart centered at the ball center,
/// i.e. coordinates in `[c - L/2, c + L/2]`, so they never wrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub pieces: Vec<RegionPiece>,
}

impl Region {
    pub fn length(&self) -> f64 {
        self.pieces.iter().map(RegionPiece::length).sum()
    }

    /// The single coordinate interval of a 1D ball.
    pub fn span(&self) -> RegionPiece {
        self.pieces[0]
    }
}

impl SpaceDescriptor {
    pub fn new(topology: Topology, weight: Weight, label: impl Into<String>) -> Result<Self> {
        match topology {
            Topology::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && b > a) {
                    return Err(Error::InvalidSpace(format!("interval requires b > a, got [{a}, {b}]")));
                }
            }
            Topology::HalfLine { a } => {
                if !a.is_finite() {
                    return Err(Error::InvalidSpace("half-line start must be finite".into()));
                }
            }
            Topology::Line => {}
            Topology::Circle { circumference } => {
                if !(circumference.is_finite() && circumference > 0.0) {
                    return Err(Error::InvalidSpace(format!(
                        "circle requires a positive circumference, got {circumference}"
                    )));
                }
            }
        }
        match weight {
            Weight::Constant { density } => {
                if !(density.is_finite() && density > 0.0) {
                    return Err(Error::InvalidSpace(format!("constant density must be > 0, got {density}")));
                }
            }
            Weight::Power { exponent, origin } => {
                // exponent >= 0 keeps |t - o|^p locally integrable
                if !(exponent.is_finite() && exponent >= 0.0 && origin.is_finite()) {
                    return Err(Error::InvalidSpace(format!(
                        "power weight needs a finite exponent >= 0, got {exponent}"
                    )));
                }
                if matches!(topology, Topology::Circle { .. }) {
                    return Err(Error::InvalidSpace("power weights are not supported on circles".into()));
                }
            }
        }
        let label = label.into();
        if label.contains('\n') {
            return Err(Error::InvalidSpace("label must be a single line".into()));
        }
        Ok(Self { topology, weight, label })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(Topology::Interval { a, b }, Weight::Constant { density: 1.0 }, "interval")
    }

    pub fn half_line(a: f64) -> Result<Self> {
        Self::new(Topology::HalfLine { a }, Weight::Constant { density: 1.0 }, "half-line")
    }

    pub fn line() -> Self {
        Self {
            topology: Topology::Line,
            weight: Weight::Constant { density: 1.0 },
            label: "line".into(),
        }
    }

    pub fn circle(circumference: f64) -> Result<Self> {
        Self::new(Topology::Circle { circumference }, Weight::Constant { density: 1.0 }, "circle")
    }

    /// Radial model of an `N`-dimensional metric cone: the line with weight
    /// `|r|^(N-1)` and pole at 0.
    pub fn cone(dimension: f64) -> Result<Self> {
        Self::new(
            Topology::Line,
            Weight::Power { exponent: dimension - 1.0, origin: 0.0 },
            format!("cone-N{dimension}"),
        )
    }

    pub fn with_weight(self, weight: Weight) -> Result<Self> {
        Self::new(self.topology, weight, self.label)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn weight(&self) -> Weight {
        self.weight
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn period(&self) -> Option<f64> {
        match self.topology {
            Topology::Circle { circumference } => Some(circumference),
            _ => None,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.period().is_some()
    }

    /// Coordinate bounds of the domain; infinite for unbounded sides and
    /// `[0, L]` for a circle.
    pub fn bounds(&self) -> (f64, f64) {
        match self.topology {
            Topology::Interval { a, b } => (a, b),
            Topology::HalfLine { a } => (a, f64::INFINITY),
            Topology::Line => (f64::NEG_INFINITY, f64::INFINITY),
            Topology::Circle { circumference } => (0.0, circumference),
        }
    }

    /// Circle coordinates are taken modulo the circumference.
    pub fn contains(&self, t: f64) -> bool {
        if !t.is_finite() {
            return false;
        }
        match self.topology {
            Topology::Circle { .. } => true,
            _ => {
                let (lo, hi) = self.bounds();
                lo <= t && t <= hi
            }
        }
    }

    /// The origin of a power weight, which plays the role of the cone pole.
    pub fn pole(&self) -> Option<f64> {
        match self.weight {
            Weight::Power { origin, .. } => Some(origin),
            Weight::Constant { .. } => None,
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        self.weight.density(t)
    }

    pub fn distance(&self, p: f64, q: f64) -> Result<f64> {
        for t in [p, q] {
            if !self.contains(t) {
                return Err(Error::OutsideDomain(t));
            }
        }
        Ok(self.raw_distance(p, q))
    }

    /// Distance without domain checks; used on mesh charts.
    pub(crate) fn raw_distance(&self, p: f64, q: f64) -> f64 {
        match self.topology {
            Topology::Circle { circumference } => {
                let d = (p - q).abs() % circumference;
                d.min(circumference - d)
            }
            _ => (p - q).abs(),
        }
    }

    pub fn validate_ball(&self, ball: &BallSpec) -> Result<()> {
        if !self.contains(ball.center) {
            return Err(Error::InvalidBall(format!("center {} is outside the domain", ball.center)));
        }
        if !(ball.radius.is_finite() && ball.radius > 0.0) {
            return Err(Error::InvalidBall(format!("radius must be finite and > 0, got {}", ball.radius)));
        }
        Ok(())
    }

    /// Center used for the chart: reduced modulo the circumference on circles.
    pub(crate) fn chart_center(&self, ball: &BallSpec) -> f64 {
        match self.topology {
            Topology::Circle { circumference } => ball.center.rem_euclid(circumference),
            _ => ball.center,
        }
    }

    /// `τ_geom` for a ball: `1e-12` times the characteristic length.
    pub fn geometric_tolerance(&self, ball: &BallSpec) -> f64 {
        let scale = match self.topology {
            Topology::Circle { circumference } => circumference,
            _ => (ball.center.abs() + ball.radius).max(1.0),
        };
        GEOM_RTOL * scale
    }

    pub fn ball_region(&self, ball: &BallSpec) -> Result<Region> {
        self.validate_ball(ball)?;
        let tol = self.geometric_tolerance(ball);
        let c = self.chart_center(ball);
        let r = ball.radius;
        let piece = match self.topology {
            Topology::Circle { circumference } => {
                let half = 0.5 * circumference;
                if r > half + tol {
                    RegionPiece {
                        lo: c - half,
                        hi: c + half,
                        lo_tag: EndpointTag::Periodic,
                        hi_tag: EndpointTag::Periodic,
                    }
                } else if (r - half).abs() <= tol {
                    RegionPiece {
                        lo: c - half,
                        hi: c + half,
                        lo_tag: EndpointTag::WrapCut,
                        hi_tag: EndpointTag::WrapCut,
                    }
                } else {
                    RegionPiece {
                        lo: c - r,
                        hi: c + r,
                        lo_tag: EndpointTag::BallBoundary,
                        hi_tag: EndpointTag::BallBoundary,
                    }
                }
            }
            _ => {
                let (dlo, dhi) = self.bounds();
                let side = |raw: f64, bound: f64, outside: bool| {
                    if outside && (raw - bound).abs() > tol {
                        (bound, EndpointTag::SpaceBoundaryCovered)
                    } else if (raw - bound).abs() <= tol {
                        (bound, EndpointTag::BallBoundary)
                    } else {
                        (raw, EndpointTag::BallBoundary)
                    }
                };
                let (lo, lo_tag) = side(c - r, dlo, c - r < dlo);
                let (hi, hi_tag) = side(c + r, dhi, c + r > dhi);
                RegionPiece { lo, hi, lo_tag, hi_tag }
            }
        };
        Ok(Region { pieces: vec![piece] })
    }

    pub fn measure_of(&self, region: &Region) -> f64 {
        region.pieces.iter().map(|p| self.weight.integral(p.lo, p.hi)).sum()
    }

    pub fn ball_measure(&self, ball: &BallSpec) -> Result<f64> {
        Ok(self.measure_of(&self.ball_region(ball)?))
    }

    /// Measure of the annulus `B_r \ B_{(1-δ)r}`.
    pub fn annulus_measure(&self, ball: &BallSpec, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("annulus fraction must lie in (0, 1), got {delta}")));
        }
        let outer = self.ball_region(ball)?.span();
        let inner_ball = BallSpec::new(ball.center, (1.0 - delta) * ball.radius);
        let inner = self.ball_region(&inner_ball)?.span();
        let left = self.weight.integral(outer.lo, inner.lo.max(outer.lo));
        let right = self.weight.integral(inner.hi.min(outer.hi), outer.hi);
        Ok(left + right)
    }

    /// `m(B_r \ B_{(1-δ)r}) / m(B_r)`.
    pub fn annulus_ratio(&self, ball: &BallSpec, delta: f64) -> Result<f64> {
        let total = self.ball_measure(ball)?;
        if total <= 0.0 {
            return Err(Error::ZeroMeasure);
        }
        Ok(self.annulus_measure(ball, delta)? / total)
    }

    /// A constant `C` with `annulus_ratio(δ) <= C δ` for every δ, from the
    /// extreme densities on the ball: the annulus is at most `2δr` long.
    pub fn annulus_ratio_bound(&self, ball: &BallSpec) -> Result<f64> {
        let span = self.ball_region(ball)?.span();
        let (wmin, wmax) = self.weight.range_on(span.lo, span.hi);
        if wmin <= 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(2.0 * ball.radius * wmax / (wmin * span.length()))
    }
}

impl fmt::Display for SpaceDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.topology {
            Topology::Interval { a, b } => write!(f, "topology=interval a={a} b={b}")?,
            Topology::HalfLine { a } => write!(f, "topology=half_line a={a}")?,
            Topology::Line => write!(f, "topology=line")?,
            Topology::Circle { circumference } => write!(f, "topology=circle circumference={circumference}")?,
        }
        match self.weight {
            Weight::Constant { density } => write!(f, " weight=constant c={density}")?,
            Weight::Power { exponent, origin } => write!(f, " weight=power exponent={exponent} origin={origin}")?,
        }
        write!(f, " label={}", self.label)
    }
}

impl FromStr for SpaceDescriptor {
    type Err = Error;

    /// Parses the key-value form written by `Display`, e.g.
    /// `topology=half_line a=0 weight=power exponent=2 origin=0 label=cone-N3`.
    /// Everything after `label=` is the label.
    fn from_str(s: &str) -> Result<Self> {
        let (fields, label) = match s.find("label=") {
            Some(i) => (&s[..i], s[i + 6..].trim().to_string()),
            None => (s, String::new()),
        };
        let mut map = std::collections::BTreeMap::new();
        for tok in fields.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got '{tok}'")))?;
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Parse(format!("duplicate key '{k}'")));
            }
        }
        let num = |key: &str| -> Result<f64> {
            let v = map.get(key).ok_or_else(|| Error::Parse(format!("missing key '{key}'")))?;
            parse_real(v)
        };
        let topology = match map.get("topology").map(String::as_str) {
            Some("interval") => Topology::Interval { a: num("a")?, b: num("b")? },
            Some("half_line") => Topology::HalfLine { a: num("a")? },
            Some("line") => Topology::Line,
            Some("circle") => Topology::Circle { circumference: num("circumference")? },
            Some(other) => return Err(Error::Parse(format!("unknown topology '{other}'"))),
            None => return Err(Error::Parse("missing key 'topology'".into())),
        };
        let weight = match map.get("weight").map(String::as_str) {
            None => Weight::Constant { density: 1.0 },
            Some("constant") => Weight::Constant {
                density: if map.contains_key("c") { num("c")? } else { 1.0 },
            },
            Some("power") => Weight::Power {
                exponent: num("exponent")?,
                origin: if map.contains_key("origin") { num("origin")? } else { 0.0 },
            },
            Some(other) => return Err(Error::Parse(format!("unknown weight '{other}'"))),
        };
        SpaceDescriptor::new(topology, weight, label)
    }
}
