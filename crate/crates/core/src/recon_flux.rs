//! Piecewise-affine flux reconstruction from single-time snapshots of the
//! Riemann problems `u_h | u_{h+1}` on a uniform state grid.
//!
//! Every jump at `x` between `v` and `v'` contributes `(v' - v) x / T` to the
//! flux increment (Rankine–Hugoniot), and every continuous arc is first
//! replaced by the equivalent jump given by the area formula
//! `ξ = (u₁x₁ - u₀x₀ - ∫ u dx) / (u₁ - u₀)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fluxlib::{interpolate_nodes, FluxCurve, SpatialCoeff};
use crate::fronttrack::{Profile, Scenario};
use crate::riemann::{solve_homogeneous, Wave};

/// One feature of an observed monotone snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Jump { x: f64, ul: f64, ur: f64 },
    /// Continuous monotone arc from `u0` at `x0` to `u1` at `x1`, with `∫_{x0}^{x1} u dx`.
    Arc { x0: f64, x1: f64, u0: f64, u1: f64, integral: f64 },
}

impl Piece {
    fn states(&self) -> (f64, f64) {
        match *self {
            Piece::Jump { ul, ur, .. } => (ul, ur),
            Piece::Arc { u0, u1, .. } => (u0, u1),
        }
    }

    /// Position of the single jump that carries the same flux increment.
    pub fn equivalent_position(&self) -> f64 {
        match *self {
            Piece::Jump { x, .. } => x,
            Piece::Arc { x0, x1, u0, u1, integral } => (u1 * x1 - u0 * x0 - integral) / (u1 - u0),
        }
    }
}

/// Snapshot at time `t` of a Riemann solution, as an ordered list of features.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSnapshot {
    pub t: f64,
    pub pieces: Vec<Piece>,
    /// Jumps wider than this in state are known to be shocks rather than rarefaction steps.
    pub shock_threshold: f64,
}

impl ObservedSnapshot {
    /// Every breakpoint of a piecewise-constant profile becomes a jump.
    pub fn from_profile(p: &Profile, shock_threshold: f64) -> Self {
        let pieces = p.jumps().map(|(x, ul, ur)| Piece::Jump { x, ul, ur }).collect();
        ObservedSnapshot { t: p.time, pieces, shock_threshold }
    }

    /// Plateau values `v₁, …, v_{M+1}`, checked to be strictly monotone.
    pub fn plateaus(&self) -> Result<Vec<f64>> {
        let first = self
            .pieces
            .first()
            .ok_or_else(|| Error::InconsistentObservation("snapshot has no waves".into()))?;
        let mut v = vec![first.states().0];
        for p in &self.pieces {
            let (a, b) = p.states();
            if a != *v.last().unwrap() {
                return Err(Error::InconsistentObservation(format!(
                    "snapshot pieces do not chain ({} then {a})",
                    v.last().unwrap()
                )));
            }
            v.push(b);
        }
        let up = v[1] > v[0];
        for w in v.windows(2) {
            if (w[1] > w[0]) != up || w[1] == w[0] {
                return Err(Error::InconsistentObservation("plateau values are not strictly monotone".into()));
            }
        }
        Ok(v)
    }

    pub fn has_shock(&self) -> bool {
        self.pieces.iter().any(|p| match *p {
            Piece::Jump { ul, ur, .. } => (ur - ul).abs() > self.shock_threshold,
            Piece::Arc { .. } => false,
        })
    }
}

/// Which construction produced a node value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Shock,
    Rarefaction,
    General,
}

/// Outcome of one increment: the new node value plus exact values at interior plateaus.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub value: f64,
    pub kind: StepKind,
    pub plateau_nodes: Vec<(f64, f64)>,
}

/// Single shock at `x_h`: `f(u_{h+1}) = f(u_h) + δ x_h / T`.
pub fn shock_step(snap: &ObservedSnapshot, f_h: f64) -> Result<f64> {
    match snap.pieces.as_slice() {
        [Piece::Jump { x, ul, ur }] => Ok(f_h + (ur - ul) * x / snap.t),
        _ => Err(Error::Input("shock_step needs a snapshot with exactly one jump".into())),
    }
}

/// Single continuous wave (an arc, or a staircase treated through its area).
pub fn rarefaction_step(snap: &ObservedSnapshot, f_h: f64) -> Result<f64> {
    let v = snap.plateaus()?;
    let (u0, u1) = (v[0], *v.last().unwrap());
    let (x0, x1, integral) = match snap.pieces.as_slice() {
        [Piece::Arc { x0, x1, integral, .. }] => (*x0, *x1, *integral),
        pieces if pieces.iter().all(|p| matches!(p, Piece::Jump { .. })) => {
            let xs: Vec<f64> = pieces.iter().map(|p| p.equivalent_position()).collect();
            let integral = xs.windows(2).zip(v[1..].iter()).map(|(w, u)| (w[1] - w[0]) * u).sum();
            (xs[0], *xs.last().unwrap(), integral)
        }
        _ => return Err(Error::Input("rarefaction_step needs a single arc or a staircase".into())),
    };
    let xi = (u1 * x1 - u0 * x0 - integral) / (u1 - u0);
    Ok(f_h + (u1 - u0) * xi / snap.t)
}

/// General monotone snapshot with jumps and arcs.
pub fn general_step(snap: &ObservedSnapshot, f_h: f64) -> Result<StepResult> {
    let v = snap.plateaus()?;
    let mut acc = f_h;
    let mut nodes = Vec::with_capacity(snap.pieces.len());
    for (p, w) in snap.pieces.iter().zip(v.windows(2)) {
        acc += (w[1] - w[0]) * p.equivalent_position() / snap.t;
        nodes.push((w[1], acc));
    }
    nodes.pop();
    let kind = match snap.pieces.as_slice() {
        [Piece::Jump { .. }] => StepKind::Shock,
        [Piece::Arc { .. }] => StepKind::Rarefaction,
        _ if !snap.has_shock() => StepKind::Rarefaction,
        _ => StepKind::General,
    };
    Ok(StepResult { value: acc, kind, plateau_nodes: nodes })
}

/// Uniform state grid `u_α = u_* + α δ`, `δ = 2^{-ν}(u^* - u_*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionGrid {
    pub u_lo: f64,
    pub u_hi: f64,
    pub nu: u32,
    pub anchor: f64,
    pub t_obs: f64,
}

impl ReconstructionGrid {
    pub fn new(u_lo: f64, u_hi: f64, nu: u32, anchor: f64, t_obs: f64) -> Result<Self> {
        if !(u_hi > u_lo) || !(t_obs > 0.0) || nu > 30 {
            return Err(Error::Input(format!(
                "grid needs u_lo < u_hi, T > 0 and nu <= 30, got [{u_lo}, {u_hi}], T={t_obs}, nu={nu}"
            )));
        }
        Ok(ReconstructionGrid { u_lo, u_hi, nu, anchor, t_obs })
    }

    pub fn intervals(&self) -> usize {
        1usize << self.nu
    }

    pub fn delta(&self) -> f64 {
        (self.u_hi - self.u_lo) / self.intervals() as f64
    }

    pub fn node(&self, h: usize) -> f64 {
        if h == self.intervals() {
            self.u_hi
        } else {
            self.u_lo + h as f64 * self.delta()
        }
    }
}

/// Source of observed Riemann snapshots.
pub trait RiemannOracle: Sync {
    fn observe(&self, ul: f64, ur: f64, t: f64) -> Result<ObservedSnapshot>;
}

/// Observes front-tracking solutions with rarefaction step `delta`.
#[derive(Debug, Clone)]
pub struct FrontTrackingOracle {
    pub flux: FluxCurve,
    pub delta: f64,
}

impl RiemannOracle for FrontTrackingOracle {
    fn observe(&self, ul: f64, ur: f64, t: f64) -> Result<ObservedSnapshot> {
        let s = Scenario::new(self.flux.clone(), SpatialCoeff::constant(1.0), Profile::riemann(ul, ur, 0.0), self.delta, t)?;
        let h = s.run()?;
        Ok(ObservedSnapshot::from_profile(&h.snapshot(t), self.delta * (1.0 + 1e-9)))
    }
}

/// Observes the exact self-similar fan; arc areas come from Gauss–Legendre quadrature of the inverse profile.
#[derive(Debug, Clone)]
pub struct AnalyticOracle {
    pub flux: FluxCurve,
}

impl RiemannOracle for AnalyticOracle {
    fn observe(&self, ul: f64, ur: f64, t: f64) -> Result<ObservedSnapshot> {
        let fan = solve_homogeneous(&self.flux, 1.0, ul, ur);
        let mut pieces = Vec::new();
        for w in &fan.waves {
            match *w {
                Wave::Shock { ul, ur, speed, .. } => pieces.push(Piece::Jump { x: speed * t, ul, ur }),
                Wave::Rarefaction { ul, ur, k } => {
                    let (s0, s1) = w.speed_range(&self.flux);
                    let (x0, x1) = (s0 * t, s1 * t);
                    // ∫ u dx = u₁x₁ - u₀x₀ - ∫ x du; the inverse profile x(u) = t k f'(u) is smooth
                    // where u(x) has a square-root singularity at an inflection point
                    let inverse = gauss_legendre(|u| t * k * self.flux.deriv(u), ul, ur, 256);
                    let integral = ur * x1 - ul * x0 - inverse;
                    pieces.push(Piece::Arc { x0, x1, u0: ul, u1: ur, integral });
                }
                Wave::KWave { .. } => unreachable!("constant coefficient"),
            }
        }
        Ok(ObservedSnapshot { t, pieces, shock_threshold: 0.0 })
    }
}

fn gauss_legendre<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for i in 0..panels {
        let c = a + (i as f64 + 0.5) * h;
        for j in 0..5 {
            s += W[j] * g(c + 0.5 * h * X[j]);
        }
    }
    0.5 * h * s
}

/// Which abscissas enter the interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodePolicy {
    /// Only the grid nodes `u_α`.
    #[default]
    Grid,
    /// Grid nodes plus every interior plateau value seen in a snapshot.
    WithPlateaus,
}

/// Reconstructed flux and its bookkeeping.
#[derive(Debug, Clone)]
pub struct FluxReconstruction {
    pub grid: ReconstructionGrid,
    /// `(u, f_ν(u))`, sorted by `u`.
    pub nodes: Vec<(f64, f64)>,
    /// Per grid interval: which construction was used.
    pub kinds: Vec<StepKind>,
    /// Per grid interval: whether the snapshot contained a shock.
    pub shock_intervals: Vec<bool>,
    /// Grid intervals whose observation failed; nodes after the first gap are missing.
    pub gaps: Vec<usize>,
    pub curve: FluxCurve,
}

impl FluxReconstruction {
    /// `Lip(f') δ`, the guaranteed bound on `sup |f_ν' - f'|`.
    pub fn derivative_bound(&self, lip_df: f64) -> f64 {
        lip_df * self.grid.delta()
    }
}

/// Builds `f_ν` from the `2^ν` Riemann observations.
pub fn reconstruct<O: RiemannOracle>(grid: &ReconstructionGrid, oracle: &O, policy: NodePolicy) -> Result<FluxReconstruction> {
    let n = grid.intervals();
    let snaps: Vec<Result<ObservedSnapshot>> =
        (0..n).into_par_iter().map(|h| oracle.observe(grid.node(h), grid.node(h + 1), grid.t_obs)).collect();
    let mut nodes = vec![(grid.u_lo, grid.anchor)];
    let mut kinds = Vec::with_capacity(n);
    let mut shocks = Vec::with_capacity(n);
    let mut gaps = Vec::new();
    for (h, snap) in snaps.into_iter().enumerate() {
        let step = snap.and_then(|s| general_step(&s, nodes.last().unwrap().1).map(|r| (r, s.has_shock())));
        match step {
            Ok((r, shock)) if gaps.is_empty() => {
                if policy == NodePolicy::WithPlateaus {
                    nodes.extend(r.plateau_nodes.iter().copied());
                }
                nodes.push((grid.node(h + 1), r.value));
                kinds.push(r.kind);
                shocks.push(shock);
            }
            Ok((r, shock)) => {
                kinds.push(r.kind);
                shocks.push(shock);
            }
            Err(_) => {
                gaps.push(h);
                kinds.push(StepKind::General);
                shocks.push(true);
            }
        }
    }
    let curve = interpolate_nodes(&nodes)?;
    Ok(FluxReconstruction { grid: *grid, nodes, kinds, shock_intervals: shocks, gaps, curve })
}

/// Re-runs the construction at resolution `nu2` only inside intervals that contained shocks.
pub fn refine<O: RiemannOracle>(prev: &FluxReconstruction, nu2: u32, oracle: &O) -> Result<FluxReconstruction> {
    if nu2 <= prev.grid.nu {
        return Err(Error::Input(format!("refinement needs nu' > nu ({nu2} <= {})", prev.grid.nu)));
    }
    let coarse = prev.grid;
    let ratio = 1usize << (nu2 - coarse.nu);
    let mut nodes: Vec<(f64, f64)> = prev.nodes.clone();
    let mut extra = Vec::new();
    for (h, &flagged) in prev.shock_intervals.iter().enumerate() {
        if !flagged {
            continue;
        }
        let u0 = coarse.node(h);
        let f0 = prev
            .nodes
            .iter()
            .find(|n| n.0 == u0)
            .map(|n| n.1)
            .ok_or_else(|| Error::InconsistentObservation(format!("no coarse node at u={u0}")))?;
        let fine = ReconstructionGrid::new(u0, coarse.node(h + 1), (ratio as f64).log2() as u32, f0, coarse.t_obs)?;
        let sub = reconstruct(&fine, oracle, NodePolicy::Grid)?;
        extra.extend(sub.nodes[1..sub.nodes.len() - 1].iter().copied());
    }
    if extra.is_empty() {
        return Ok(prev.clone());
    }
    nodes.extend(extra);
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes.dedup_by(|a, b| a.0 == b.0);
    let curve = interpolate_nodes(&nodes)?;
    Ok(FluxReconstruction { nodes, curve, ..prev.clone() })
}
