//! Flux nonlinearities `f` and piecewise-constant coefficients `k`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect_exact;

/// Shape class of a flux curve on its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FluxKind {
    /// Strictly concave, vanishing at both ends, single interior maximizer.
    ConcaveH1,
    /// Continuous, piecewise C¹ with finitely many inflection points.
    General,
    /// Linear interpolant of a node list.
    PiecewiseLinear,
}

/// Monotone branch of a concave flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `[u₁, u^m]`, where `f' ≥ 0`.
    Increasing,
    /// `[u^m, u₂]`, where `f' ≤ 0`.
    Decreasing,
}

/// Which envelope to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    ConvexBelow,
    ConcaveAbove,
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    /// `c (u - lo)(hi - u)`.
    Quadratic { c: f64 },
    /// `Σ cᵢ uⁱ`.
    Polynomial { coeffs: Vec<f64>, dcoeffs: Vec<f64> },
    Table(MonotoneCubic),
    PiecewiseLinear { u: Vec<f64>, f: Vec<f64> },
    Callback { f: ScalarFn, df: ScalarFn },
}

/// A flux nonlinearity on `[lo, hi]` with the analytic queries the solvers need.
#[derive(Clone)]
pub struct FluxCurve {
    lo: f64,
    hi: f64,
    repr: Repr,
    kind: FluxKind,
    um: Option<f64>,
    fmax: Option<f64>,
    inflections: Vec<f64>,
    lip_df: f64,
}

impl fmt::Debug for FluxCurve {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        let repr = match &self.repr {
            Repr::Quadratic { c } => format!("quadratic(c={c})"),
            Repr::Polynomial { coeffs, .. } => format!("polynomial({coeffs:?})"),
            Repr::Table(t) => format!("table({} samples)", t.x.len()),
            Repr::PiecewiseLinear { u, .. } => format!("piecewise-linear({} nodes)", u.len()),
            Repr::Callback { .. } => "callback".to_string(),
        };
        fm.debug_struct("FluxCurve")
            .field("domain", &(self.lo, self.hi))
            .field("repr", &repr)
            .field("kind", &self.kind)
            .field("um", &self.um)
            .finish()
    }
}

const CLASSIFY_SAMPLES: usize = 2048;

impl FluxCurve {
    /// `c (u - lo)(hi - u)`, concave with closed-form branch inverses.
    pub fn quadratic(c: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(c > 0.0) || !(hi > lo) {
            return Err(Error::Input(format!("quadratic flux needs c>0 and hi>lo, got c={c}, [{lo},{hi}]")));
        }
        let um = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        Ok(FluxCurve {
            lo,
            hi,
            repr: Repr::Quadratic { c },
            kind: FluxKind::ConcaveH1,
            um: Some(um),
            fmax: Some(c * h * h),
            inflections: Vec::new(),
            lip_df: 2.0 * c,
        })
    }

    /// The traffic flux `u (1 - u)` on `[0, 1]`.
    pub fn greenshields() -> Self {
        Self::quadratic(1.0, 0.0, 1.0).expect("valid constants")
    }

    /// Polynomial `Σ coeffs[i] uⁱ` on `[lo, hi]`; the kind is detected by sampling.
    pub fn polynomial(coeffs: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if coeffs.is_empty() || !(hi > lo) {
            return Err(Error::Input("polynomial flux needs coefficients and hi>lo".into()));
        }
        let dcoeffs: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
        Self::finish(lo, hi, Repr::Polynomial { coeffs, dcoeffs })
    }

    /// Flux given by evaluator and derivative callbacks.
    pub fn from_fn<F, D>(lo: f64, hi: f64, f: F, df: D) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(hi > lo) {
            return Err(Error::Input("callback flux needs hi>lo".into()));
        }
        Self::finish(lo, hi, Repr::Callback { f: Arc::new(f), df: Arc::new(df) })
    }

    /// Dense sampled table reconstructed with a monotone cubic.
    pub fn from_table(u: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if u.len() < 1024 {
            return Err(Error::Input(format!("flux table needs at least 1024 samples, got {}", u.len())));
        }
        let t = MonotoneCubic::new(u, f)?;
        let (lo, hi) = (t.x[0], *t.x.last().unwrap());
        Self::finish(lo, hi, Repr::Table(t))
    }

    /// Linear interpolant of `(u, f)` nodes with strictly increasing abscissas.
    pub fn piecewise_linear(nodes: &[(f64, f64)]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Input("piecewise-linear flux needs at least two nodes".into()));
        }
        for w in nodes.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Input(format!(
                    "node abscissas must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        let u: Vec<f64> = nodes.iter().map(|n| n.0).collect();
        let f: Vec<f64> = nodes.iter().map(|n| n.1).collect();
        let mut lip: f64 = 0.0;
        let slopes: Vec<f64> = (0..u.len() - 1).map(|i| (f[i + 1] - f[i]) / (u[i + 1] - u[i])).collect();
        for i in 1..slopes.len() {
            let h = 0.5 * (u[i + 1] - u[i - 1]);
            lip = lip.max((slopes[i] - slopes[i - 1]).abs() / h);
        }
        Ok(FluxCurve {
            lo: u[0],
            hi: *u.last().unwrap(),
            repr: Repr::PiecewiseLinear { u, f },
            kind: FluxKind::PiecewiseLinear,
            um: None,
            fmax: None,
            inflections: Vec::new(),
            lip_df: lip,
        })
    }

    fn finish(lo: f64, hi: f64, repr: Repr) -> Result<Self> {
        let mut c = FluxCurve {
            lo,
            hi,
            repr,
            kind: FluxKind::General,
            um: None,
            fmax: None,
            inflections: Vec::new(),
            lip_df: 0.0,
        };
        c.lip_df = c.estimate_lip_df();
        c.inflections = c.locate_inflections();
        if c.looks_concave_h1() {
            c.kind = FluxKind::ConcaveH1;
            let um = bisect_exact(|u| c.deriv(u), lo, hi)?;
            c.um = Some(um);
            c.fmax = Some(c.eval(um));
            c.inflections.clear();
        }
        Ok(c)
    }

    fn looks_concave_h1(&self) -> bool {
        let n = CLASSIFY_SAMPLES;
        let h = (self.hi - self.lo) / n as f64;
        let mut scale: f64 = 0.0;
        for i in 0..=n {
            scale = scale.max(self.eval(self.lo + i as f64 * h).abs());
        }
        if scale == 0.0 {
            return false;
        }
        if self.eval(self.lo).abs() > 1e-12 * scale || self.eval(self.hi).abs() > 1e-12 * scale {
            return false;
        }
        let mut prev_d = self.deriv(self.lo);
        for i in 1..=n {
            let u = self.lo + i as f64 * h;
            if i < n && self.eval(u) <= 0.0 {
                return false;
            }
            let d = self.deriv(u);
            if !(d < prev_d) {
                return false;
            }
            prev_d = d;
        }
        self.deriv(self.lo) > 0.0 && self.deriv(self.hi) < 0.0
    }

    fn second_diff(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Quadratic { c } => -2.0 * c,
            Repr::Polynomial { dcoeffs, .. } => dcoeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * u + c * i as f64),
            _ => {
                let h = 1e-6 * (self.hi - self.lo);
                let a = (u - h).max(self.lo);
                let b = (u + h).min(self.hi);
                (self.deriv(b) - self.deriv(a)) / (b - a)
            }
        }
    }

    fn estimate_lip_df(&self) -> f64 {
        let n = 4096;
        let h = (self.hi - self.lo) / n as f64;
        let mut m: f64 = 0.0;
        let mut prev = self.deriv(self.lo);
        for i in 1..=n {
            let d = self.deriv(self.lo + i as f64 * h);
            m = m.max((d - prev).abs() / h);
            prev = d;
        }
        m * 1.02
    }

    fn locate_inflections(&self) -> Vec<f64> {
        let n = CLASSIFY_SAMPLES;
        let h = (self.hi - self.lo) / n as f64;
        let mut out = Vec::new();
        let mut prev = self.second_diff(self.lo + 0.5 * h);
        for i in 1..n {
            let u = self.lo + (i as f64 + 0.5) * h;
            let s = self.second_diff(u);
            if s.signum() != prev.signum() && s != 0.0 && prev != 0.0 {
                if let Ok(r) = bisect_exact(|v| self.second_diff(v), u - h, u) {
                    out.push(r);
                }
            }
            prev = s;
        }
        out
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn kind(&self) -> FluxKind {
        self.kind
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.repr, Repr::Quadratic { .. })
    }

    /// Quadratic coefficient `c` when the flux is `c (u - lo)(hi - u)`.
    pub fn quadratic_coefficient(&self) -> Option<f64> {
        match self.repr {
            Repr::Quadratic { c } => Some(c),
            _ => None,
        }
    }

    /// Node list of a piecewise-linear flux.
    pub fn nodes(&self) -> Option<Vec<(f64, f64)>> {
        match &self.repr {
            Repr::PiecewiseLinear { u, f } => Some(u.iter().copied().zip(f.iter().copied()).collect()),
            _ => None,
        }
    }

    /// Sorted interior inflection points (empty for concave fluxes).
    pub fn inflections(&self) -> &[f64] {
        &self.inflections
    }

    /// Upper bound on the Lipschitz constant of `f'` (per smooth piece for tables).
    pub fn lip_derivative(&self) -> f64 {
        self.lip_df
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Quadratic { c } => c * (u - self.lo) * (self.hi - u),
            Repr::Polynomial { coeffs, .. } => horner(coeffs, u),
            Repr::Table(t) => t.eval(u),
            Repr::PiecewiseLinear { u: xs, f } => {
                let i = segment_index(xs, u);
                let s = (f[i + 1] - f[i]) / (xs[i + 1] - xs[i]);
                f[i] + s * (u - xs[i])
            }
            Repr::Callback { f, .. } => f(u),
        }
    }

    /// `f'(u)`; for piecewise-linear fluxes the slope of the segment to the right of a node.
    pub fn deriv(&self, u: f64) -> f64 {
        match &self.repr {
            Repr::Quadratic { c } => c * (self.lo + self.hi - 2.0 * u),
            Repr::Polynomial { dcoeffs, .. } => horner(dcoeffs, u),
            Repr::Table(t) => t.deriv(u),
            Repr::PiecewiseLinear { u: xs, f } => {
                let i = segment_index(xs, u);
                (f[i + 1] - f[i]) / (xs[i + 1] - xs[i])
            }
            Repr::Callback { df, .. } => df(u),
        }
    }

    /// Secant slope between two states, falling back to `f'` when they coincide.
    pub fn chord(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return self.deriv(a);
        }
        if let Repr::Quadratic { c } = self.repr {
            return c * (self.lo + self.hi - a - b);
        }
        (self.eval(b) - self.eval(a)) / (b - a)
    }

    fn require_concave(&self, what: &str) -> Result<()> {
        if self.kind != FluxKind::ConcaveH1 {
            return Err(Error::KindMismatch(format!("{what} needs a strictly concave flux vanishing at both ends")));
        }
        Ok(())
    }

    /// The unique maximizer `u^m` of a concave flux.
    pub fn maximizer(&self) -> Result<f64> {
        self.require_concave("maximizer")?;
        Ok(self.um.expect("concave curves cache u^m"))
    }

    /// `f(u^m)`.
    pub fn max_value(&self) -> Result<f64> {
        self.require_concave("max_value")?;
        Ok(self.fmax.expect("concave curves cache f(u^m)"))
    }

    /// Solves `f(u) = y` on the requested monotone branch.
    pub fn branch_inverse(&self, y: f64, branch: Branch) -> Result<f64> {
        self.require_concave("branch_inverse")?;
        let um = self.um.unwrap();
        let fmax = self.fmax.unwrap();
        if y < -1e-14 * fmax {
            return Err(Error::Domain(format!("negative flux level {y:e}")));
        }
        if y > fmax * (1.0 + 1e-12) {
            return Err(Error::NoSolution { level: y, max: fmax });
        }
        let y = y.clamp(0.0, fmax);
        if y == fmax {
            return Ok(um);
        }
        if y == 0.0 {
            return Ok(match branch {
                Branch::Increasing => self.lo,
                Branch::Decreasing => self.hi,
            });
        }
        if let Repr::Quadratic { c } = self.repr {
            let h = 0.5 * (self.hi - self.lo);
            let d = (h * h - y / c).max(0.0).sqrt();
            let off = (y / c) / (h + d);
            return Ok(match branch {
                Branch::Increasing => self.lo + off,
                Branch::Decreasing => self.hi - off,
            });
        }
        let r = match branch {
            Branch::Increasing => bisect_exact(|u| self.eval(u) - y, self.lo, um)?,
            Branch::Decreasing => bisect_exact(|u| self.eval(u) - y, um, self.hi)?,
        };
        Ok(r)
    }

    /// The state on the opposite branch with the same flux value.
    pub fn companion(&self, u: f64) -> Result<f64> {
        self.require_concave("companion")?;
        if u < self.lo - 1e-14 || u > self.hi + 1e-14 {
            return Err(Error::Domain(format!("state {u} outside [{}, {}]", self.lo, self.hi)));
        }
        if self.is_quadratic() {
            return Ok(self.lo + self.hi - u);
        }
        let um = self.um.unwrap();
        if u == um {
            return Ok(um);
        }
        let y = self.eval(u).max(0.0);
        if u < um {
            self.branch_inverse(y, Branch::Decreasing)
        } else {
            self.branch_inverse(y, Branch::Increasing)
        }
    }

    /// Convex envelope from below or concave envelope from above on `[u_lo, u_hi]`.
    pub fn envelope(&self, u_lo: f64, u_hi: f64, kind: EnvelopeKind) -> Result<Envelope> {
        if !(u_hi > u_lo) {
            return Err(Error::Input(format!("envelope needs u_lo < u_hi, got [{u_lo}, {u_hi}]")));
        }
        let sign = match kind {
            EnvelopeKind::ConvexBelow => 1.0,
            EnvelopeKind::ConcaveAbove => -1.0,
        };
        let pieces = match self.kind {
            FluxKind::ConcaveH1 => match kind {
                EnvelopeKind::ConcaveAbove => vec![EnvPiece::Contact { u0: u_lo, u1: u_hi }],
                EnvelopeKind::ConvexBelow => vec![EnvPiece::Affine {
                    u0: u_lo,
                    u1: u_hi,
                    slope: self.chord(u_lo, u_hi),
                }],
            },
            FluxKind::PiecewiseLinear => {
                let mut pts = vec![u_lo];
                if let Repr::PiecewiseLinear { u, .. } = &self.repr {
                    pts.extend(u.iter().copied().filter(|&x| x > u_lo && x < u_hi));
                }
                pts.push(u_hi);
                let g: Vec<f64> = pts.iter().map(|&x| sign * self.eval(x)).collect();
                let hull = lower_hull(&pts, &g);
                hull.windows(2)
                    .map(|w| EnvPiece::Affine {
                        u0: pts[w[0]],
                        u1: pts[w[1]],
                        slope: self.chord(pts[w[0]], pts[w[1]]),
                    })
                    .collect()
            }
            FluxKind::General => self.smooth_envelope(u_lo, u_hi, sign),
        };
        Ok(Envelope { kind, lo: u_lo, hi: u_hi, pieces })
    }

    fn smooth_envelope(&self, u_lo: f64, u_hi: f64, sign: f64) -> Vec<EnvPiece> {
        let n = 2048;
        let mut pts: Vec<f64> = (0..=n).map(|i| u_lo + (u_hi - u_lo) * i as f64 / n as f64).collect();
        pts[n] = u_hi;
        for &p in &self.inflections {
            if p > u_lo && p < u_hi {
                pts.push(p);
            }
        }
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        let g: Vec<f64> = pts.iter().map(|&x| sign * self.eval(x)).collect();
        let hull = lower_hull(&pts, &g);
        let gf = |x: f64| sign * self.eval(x);
        let gd = |x: f64| sign * self.deriv(x);

        // Raw pieces: runs of adjacent samples are contact arcs, longer edges are affine.
        let mut raw: Vec<(bool, usize, usize)> = Vec::new();
        for w in hull.windows(2) {
            let contact = w[1] == w[0] + 1;
            match raw.last_mut() {
                Some(last) if last.0 && contact => last.2 = w[1],
                _ => raw.push((contact, w[0], w[1])),
            }
        }
        let mut ends: Vec<(f64, f64)> = raw.iter().map(|r| (pts[r.1], pts[r.2])).collect();
        for (k, r) in raw.iter().enumerate() {
            if r.0 {
                continue;
            }
            let (mut p, mut q) = ends[k];
            let p_free = r.1 != 0;
            let q_free = r.2 != pts.len() - 1;
            let bracket = |idx: usize| {
                let a = pts[idx.saturating_sub(2)];
                let b = pts[(idx + 2).min(pts.len() - 1)];
                (a, b)
            };
            for _ in 0..30 {
                let (p0, q0) = (p, q);
                if p_free {
                    let (a, b) = bracket(r.1);
                    let phi = |u: f64| gd(u) * (q - u) - (gf(q) - gf(u));
                    if let Ok(root) = bisect_exact(phi, a, b.min(q)) {
                        p = root;
                    }
                }
                if q_free {
                    let (a, b) = bracket(r.2);
                    let phi = |u: f64| gd(u) * (u - p) - (gf(u) - gf(p));
                    if let Ok(root) = bisect_exact(phi, a.max(p), b) {
                        q = root;
                    }
                }
                if p == p0 && q == q0 {
                    break;
                }
            }
            ends[k] = (p, q);
            if k > 0 {
                ends[k - 1].1 = p;
            }
            if k + 1 < ends.len() {
                ends[k + 1].0 = q;
            }
        }
        raw.iter()
            .zip(ends.iter())
            .filter(|(_, e)| e.1 > e.0)
            .map(|(r, e)| {
                if r.0 {
                    EnvPiece::Contact { u0: e.0, u1: e.1 }
                } else {
                    EnvPiece::Affine { u0: e.0, u1: e.1, slope: self.chord(e.0, e.1) }
                }
            })
            .collect()
    }

    /// Largest discrepancy between `f'` and a centred difference of `f` on a grid.
    pub fn derivative_consistency(&self, samples: usize) -> f64 {
        let h = 1e-6 * (self.hi - self.lo);
        let mut worst: f64 = 0.0;
        for i in 1..samples {
            let u = self.lo + (self.hi - self.lo) * i as f64 / samples as f64;
            if let Repr::PiecewiseLinear { u: xs, .. } = &self.repr {
                if xs.iter().any(|&x| (x - u).abs() <= 2.0 * h) {
                    continue;
                }
            }
            let fd = (self.eval(u + h) - self.eval(u - h)) / (2.0 * h);
            worst = worst.max((fd - self.deriv(u)).abs());
        }
        worst
    }
}

fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * u + ci)
}

fn segment_index(xs: &[f64], u: f64) -> usize {
    let n = xs.len();
    match xs.binary_search_by(|x| x.total_cmp(&u)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    }
}

/// Indices of the lower convex hull of points with increasing abscissas.
fn lower_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while h.len() >= 2 {
            let a = h[h.len() - 2];
            let b = h[h.len() - 1];
            let cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if cross <= 0.0 {
                h.pop();
            } else {
                break;
            }
        }
        h.push(i);
    }
    h
}

/// One piece of an envelope: where it touches `f` or spans a chord.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvPiece {
    Contact { u0: f64, u1: f64 },
    Affine { u0: f64, u1: f64, slope: f64 },
}

impl EnvPiece {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            EnvPiece::Contact { u0, u1 } | EnvPiece::Affine { u0, u1, .. } => (u0, u1),
        }
    }
}

/// Convex or concave envelope of a flux on an interval, ordered by increasing state.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub lo: f64,
    pub hi: f64,
    pub pieces: Vec<EnvPiece>,
}

impl Envelope {
    pub fn eval(&self, f: &FluxCurve, u: f64) -> f64 {
        for p in &self.pieces {
            let (a, b) = p.bounds();
            if u >= a && u <= b {
                return match *p {
                    EnvPiece::Contact { .. } => f.eval(u),
                    EnvPiece::Affine { u0, slope, .. } => f.eval(u0) + slope * (u - u0),
                };
            }
        }
        f.eval(u)
    }

    /// Intervals where the envelope coincides with `f`.
    pub fn contact_set(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for p in &self.pieces {
            let (a, b) = p.bounds();
            match p {
                EnvPiece::Contact { .. } => out.push((a, b)),
                EnvPiece::Affine { .. } => {
                    out.push((a, a));
                    out.push((b, b));
                }
            }
        }
        out
    }
}

/// Piecewise-linear interpolant through the given nodes.
pub fn interpolate_nodes(nodes: &[(f64, f64)]) -> Result<FluxCurve> {
    FluxCurve::piecewise_linear(nodes)
}

/// Grid estimate of the Lipschitz constant of `f - g`, i.e. `sup |f' - g'|`,
/// padded by the change between a coarse and a fine grid.
pub fn lip_of_difference(f: &FluxCurve, g: &FluxCurve) -> f64 {
    let lo = f.lo().max(g.lo());
    let hi = f.hi().min(g.hi());
    let scan = |n: usize| {
        let mut m: f64 = 0.0;
        let mut probe = |u: f64| {
            if u >= lo && u <= hi {
                m = m.max((f.deriv(u) - g.deriv(u)).abs());
            }
        };
        for i in 0..=n {
            probe(lo + (hi - lo) * i as f64 / n as f64);
        }
        for c in [f, g] {
            if let Some(nodes) = c.nodes() {
                let eps = 1e-12 * (hi - lo);
                for (u, _) in nodes {
                    probe(u - eps);
                    probe(u + eps);
                }
            }
        }
        m
    };
    let coarse = scan(4096);
    let fine = scan(8192);
    fine + (fine - coarse).max(0.0)
}

/// Fritsch–Carlson monotone cubic Hermite interpolant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Input("table columns must have equal length ≥ 2".into()));
        }
        for w in x.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Input(format!("table abscissas must increase strictly ({} then {})", w[0], w[1])));
            }
        }
        let n = x.len();
        let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for i in 1..n - 1 {
            m[i] = if d[i - 1] * d[i] <= 0.0 { 0.0 } else { 0.5 * (d[i - 1] + d[i]) };
        }
        for i in 0..n - 1 {
            if d[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / d[i];
            let b = m[i + 1] / d[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                m[i] = t * a * d[i];
                m[i + 1] = t * b * d[i];
            }
        }
        Ok(MonotoneCubic { x, y, m })
    }

    fn locate(&self, u: f64) -> (usize, f64, f64) {
        let i = segment_index(&self.x, u);
        let h = self.x[i + 1] - self.x[i];
        (i, h, (u - self.x[i]) / h)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let (i, h, t) = self.locate(u);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.y[i]
            + (t3 - 2.0 * t2 + t) * h * self.m[i]
            + (-2.0 * t3 + 3.0 * t2) * self.y[i + 1]
            + (t3 - t2) * h * self.m[i + 1]
    }

    pub fn deriv(&self, u: f64) -> f64 {
        let (i, h, t) = self.locate(u);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.y[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.m[i]
            + (-6.0 * t2 + 6.0 * t) * self.y[i + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.m[i + 1])
            / h
    }
}

/// Piecewise-constant positive coefficient with finitely many jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialCoeff {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl SpatialCoeff {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Input(format!(
                "coefficient needs one more value than breakpoints ({} values, {} breakpoints)",
                values.len(),
                breakpoints.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Input(format!("coefficient values must be positive, got {v}")));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Input(format!("breakpoints must increase strictly ({} then {})", w[0], w[1])));
            }
        }
        for w in values.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Input(format!("adjacent coefficient values must differ (both {})", w[0])));
            }
        }
        Ok(SpatialCoeff { breakpoints, values })
    }

    /// Like [`SpatialCoeff::new`] but silently removes jumps between equal values.
    pub fn new_merged(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Input("coefficient needs one more value than breakpoints".into()));
        }
        let mut bp = Vec::new();
        let mut vals = vec![values[0]];
        for (i, &x) in breakpoints.iter().enumerate() {
            if values[i + 1] != *vals.last().unwrap() {
                bp.push(x);
                vals.push(values[i + 1]);
            }
        }
        Self::new(bp, vals)
    }

    pub fn constant(k: f64) -> Self {
        SpatialCoeff { breakpoints: Vec::new(), values: vec![k] }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value just left of `x`.
    pub fn left_of(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b < x);
        self.values[i]
    }

    /// Value just right of `x`.
    pub fn right_of(&self, x: f64) -> f64 {
        let i = self.breakpoints.partition_point(|&b| b <= x);
        self.values[i]
    }

    /// Value at a point that is not a breakpoint (right value otherwise).
    pub fn value_at(&self, x: f64) -> f64 {
        self.right_of(x)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Breakpoints inside the closed interval `[lo, hi]`.
    pub fn jumps_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.breakpoints.iter().copied().filter(|&x| x >= lo && x <= hi).collect()
    }

    /// `Σ length / k` over `[lo, hi]`: the transit-time weight of the interval.
    pub fn transit_weight(&self, lo: f64, hi: f64) -> f64 {
        let mut edges = vec![lo];
        edges.extend(self.breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
        edges.push(hi);
        edges.windows(2).map(|w| (w[1] - w[0]) / self.value_at(0.5 * (w[0] + w[1]))).sum()
    }
}

/// A single obstruction `k = k₁` on `(ξ₁, ξ₂)` and `k_o` elsewhere, inside `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstruction {
    pub k1: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub k_o: f64,
    pub a: f64,
    pub b: f64,
}

impl Obstruction {
    pub fn new(k1: f64, xi1: f64, xi2: f64, k_o: f64, a: f64, b: f64) -> Result<Self> {
        if !(k1 > 0.0 && k1 < k_o) {
            return Err(Error::Input(format!("obstruction needs 0 < k1 < k_o, got k1={k1}, k_o={k_o}")));
        }
        if !(a <= xi1 && xi1 < xi2 && xi2 <= b) {
            return Err(Error::Input(format!("obstruction needs a <= xi1 < xi2 <= b, got {a}, {xi1}, {xi2}, {b}")));
        }
        Ok(Obstruction { k1, xi1, xi2, k_o, a, b })
    }

    pub fn coefficient(&self) -> SpatialCoeff {
        SpatialCoeff { breakpoints: vec![self.xi1, self.xi2], values: vec![self.k_o, self.k1, self.k_o] }
    }
}
