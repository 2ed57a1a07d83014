//! Recovery of a single obstruction `(k₁, ξ₁, ξ₂)` hidden inside a window `(a, b)`
//! from what crosses `x = a` and `x = b`.
//!
//! Two protocols are provided. The stationary one sends a rarefaction from the left
//! into a known stationary state (after first emptying the window); the constant one
//! observes the waves an obstruction creates in uniform data.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluxlib::{Branch, FluxCurve, Obstruction, SpatialCoeff};
use crate::fronttrack::{History, Profile, Scenario, Trace};
use crate::numeric::{bisect_exact, dopri45};
use crate::observe::{Mode, Observer};
use crate::riemann::rarefaction_state;
use crate::tol;

/// State comparisons on observed traces.
const STATE_TOL: f64 = 1e-10;

/// The hidden world an experiment runs in: flux, true coefficient and solver settings.
#[derive(Debug, Clone)]
pub struct World {
    pub flux: FluxCurve,
    pub coeff: SpatialCoeff,
    pub delta: f64,
    pub horizon: f64,
    pub a: f64,
    pub b: f64,
}

impl World {
    pub fn from_obstruction(flux: FluxCurve, obs: &Obstruction, delta: f64, horizon: f64) -> Self {
        World { flux, coeff: obs.coefficient(), delta, horizon, a: obs.a, b: obs.b }
    }

    /// Runs `initial` and hands back the hidden history together with a masked observer.
    pub fn run(&self, initial: Profile) -> Result<(History, Observer)> {
        let s = Scenario::new(self.flux.clone(), self.coeff.clone(), initial, self.delta, self.horizon)?;
        let h = s.run()?;
        let o = Observer::new(h.clone(), Mode::Partial { a: self.a, b: self.b }, self.delta)?;
        Ok((h, o))
    }
}

/// `left` for `x < a`, `right` for `x > a`.
pub fn join_at(left: &Profile, a: f64, right: &Profile) -> Result<Profile> {
    let mut bps = Vec::new();
    let mut vals = vec![left.values[0]];
    let push = |x: f64, v: f64, bps: &mut Vec<f64>, vals: &mut Vec<f64>| {
        if *vals.last().unwrap() != v {
            if bps.last() == Some(&x) {
                *vals.last_mut().unwrap() = v;
            } else {
                bps.push(x);
                vals.push(v);
            }
        }
    };
    for (i, &x) in left.breakpoints.iter().enumerate() {
        if x < a {
            push(x, left.values[i + 1], &mut bps, &mut vals);
        }
    }
    push(a, right.value_right(a), &mut bps, &mut vals);
    for (i, &x) in right.breakpoints.iter().enumerate() {
        if x > a {
            push(x, right.values[i + 1], &mut bps, &mut vals);
        }
    }
    Profile::new(bps, vals, 0.0)
}

/// Builds a profile from `(value, right end)` pieces; the last piece extends to `+∞`.
fn pieces(first: f64, rest: &[(f64, f64)]) -> Result<Profile> {
    let mut bps: Vec<f64> = Vec::new();
    let mut vals = vec![first];
    for &(x, v) in rest {
        if v == *vals.last().unwrap() {
            continue;
        }
        if bps.last() == Some(&x) {
            *vals.last_mut().unwrap() = v;
            continue;
        }
        bps.push(x);
        vals.push(v);
    }
    Profile::new(bps, vals, 0.0)
}

/// Stationary states `(ω, u_o(b))` completing `u_o(a)` across a non-congested obstruction.
pub fn stationary_fill(f: &FluxCurve, obs: &Obstruction, u_a: f64) -> Result<(f64, f64)> {
    let um = f.maximizer()?;
    let level = obs.k_o * f.eval(u_a) / obs.k1;
    let branch = if u_a <= um { Branch::Increasing } else { Branch::Decreasing };
    let omega = f.branch_inverse(level, branch)?;
    Ok((omega, u_a))
}

/// Hidden stationary profile: `u_a` left of `ξ₁`, `ω` inside, `u_b` right of `ξ₂`.
pub fn stationary_profile(obs: &Obstruction, u_a: f64, omega: f64, u_b: f64) -> Result<Profile> {
    pieces(u_a, &[(obs.xi1, omega), (obs.xi2, u_b)])
}

/// What is known about a stationary state on `[a, ∞)` from outside the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryAmbient {
    pub k_o: f64,
    pub u_a: f64,
    pub u_b: f64,
    pub a: f64,
    pub b: f64,
}

impl StationaryAmbient {
    pub fn new(f: &FluxCurve, k_o: f64, u_a: f64, u_b: f64, a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !(k_o > 0.0) {
            return Err(Error::Input(format!("ambient needs a < b and k_o > 0, got ({a}, {b}), k_o={k_o}")));
        }
        for u in [u_a, u_b] {
            if u < f.lo() || u > f.hi() {
                return Err(Error::Domain(format!("ambient state {u} outside [{}, {}]", f.lo(), f.hi())));
            }
        }
        let scale = f.max_value()?;
        if (f.eval(u_a) - f.eval(u_b)).abs() > 1e-12 * scale {
            return Err(Error::Input(format!(
                "ambient is not stationary: f(u_o(a))={} differs from f(u_o(b))={}",
                f.eval(u_a),
                f.eval(u_b)
            )));
        }
        Ok(StationaryAmbient { k_o, u_a, u_b, a, b })
    }

    /// Refuses the degenerate ambients where nothing can be reconstructed.
    pub fn check_reconstructible(&self, f: &FluxCurve) -> Result<()> {
        let hi = f.hi();
        if (self.u_a - hi).abs() <= STATE_TOL || (self.u_b - hi).abs() <= STATE_TOL {
            return Err(Error::Congestion(format!(
                "the ambient is fully congested at an edge of ({}, {}); k1 cannot be determined",
                self.a, self.b
            )));
        }
        if (self.u_a - f.maximizer()?).abs() <= STATE_TOL {
            return Err(Error::Input("u_o(a) = u^m leaves no obstruction to reconstruct".into()));
        }
        Ok(())
    }
}

/// Probe datum `u^m | u₁ | u_o(a)` placed left of `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryProbe {
    pub x_tilde: f64,
    pub y_tilde: f64,
    /// `v̄_a`: same flux as `u_o(a)` on the other branch.
    pub companion: f64,
    /// Centre of the probing rarefaction, `a - x̃ - ỹ`.
    pub origin: f64,
    /// Data for `x < a`.
    pub left: Profile,
}

impl StationaryProbe {
    /// Full initial datum given the hidden state on `(a, ∞)`.
    pub fn initial_data(&self, a: f64, tail: &Profile) -> Result<Profile> {
        join_at(&self.left, a, tail)
    }
}

pub fn probe_stationary(f: &FluxCurve, amb: &StationaryAmbient, x_tilde: f64) -> Result<StationaryProbe> {
    if !(x_tilde > 0.0) {
        return Err(Error::Input(format!("x_tilde must be positive, got {x_tilde}")));
    }
    amb.check_reconstructible(f)?;
    let (u1, um) = (f.lo(), f.maximizer()?);
    let companion = f.companion(amb.u_a)?;
    let y_tilde = if amb.u_a > u1 + STATE_TOL && amb.u_a < f.hi() {
        let m = amb.u_a.max(companion);
        (m - u1) / f.eval(amb.u_a) * f.deriv(u1) * (amb.b - amb.a + x_tilde)
    } else {
        0.0
    };
    let origin = amb.a - x_tilde - y_tilde;
    let left = pieces(um, &[(origin, u1), (amb.a - x_tilde, amb.u_a)])?;
    Ok(StationaryProbe { x_tilde, y_tilde, companion, origin, left })
}

/// Upper bound for the emptying time from the slowest admissible shock speed.
pub fn emptying_bound(f: &FluxCurve, amb: &StationaryAmbient, probe: &StationaryProbe) -> f64 {
    let u1 = f.lo();
    if amb.u_a <= u1 + STATE_TOL {
        return 0.0;
    }
    let m = amb.u_a.max(probe.companion);
    (m - u1) / (amb.k_o * f.eval(amb.u_a)) * (amb.b - amb.a + probe.x_tilde)
}

/// First time the state at `b` drops to `u₁`; the window is then empty.
pub fn emptying_time(o: &Observer, f: &FluxCurve, amb: &StationaryAmbient, probe: &StationaryProbe) -> Result<f64> {
    let (u1, u2) = (f.lo(), f.hi());
    let tr_b = o.trace(amb.b)?;
    let i = tr_b.right.iter().position(|&u| (u - u1).abs() <= STATE_TOL).ok_or_else(|| {
        Error::HorizonTooShort(format!(
            "the window was not emptied by t={}; the emptying lemma bounds the time by {}",
            o.horizon(),
            emptying_bound(f, amb, probe)
        ))
    })?;
    let tau = tr_b.times[i];
    let tr_a = o.trace(amb.a)?;
    for (k, &t) in tr_a.times.iter().enumerate() {
        if t <= tau && tr_a.left[k] >= u2 - STATE_TOL {
            return Err(Error::Congestion(format!("the fully congested state reached x={} at t={t}", amb.a)));
        }
    }
    let bound = emptying_bound(f, amb, probe);
    if tau > bound * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::InconsistentObservation(format!("emptying took {tau}, beyond the bound {bound}")));
    }
    Ok(tau)
}

/// Incoming rarefaction field left of the obstruction, as needed to trace the reflected shock back.
pub trait Fan {
    /// `u(t, x-)` of the incoming field.
    fn state(&self, t: f64, x: f64) -> f64;
    /// The line `x = x_ref + s (t - t_ref)` along which the reflection is triggered, as `(t_ref, x_ref, s)`.
    fn trigger_line(&self, f: &FluxCurve, k_o: f64, w_prime: f64) -> Result<(f64, f64, f64)>;
    /// Follows the reflected shock (right state `w'`) backward from `(t0, x0)` to time `t1 < t0`.
    fn trace_back(&self, f: &FluxCurve, k_o: f64, w_prime: f64, t0: f64, x0: f64, t1: f64) -> Result<f64>;
}

/// Exact centred rarefaction from `(t0, origin)`, `u_left` behind and `u_right` ahead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticFan {
    pub origin: f64,
    pub t0: f64,
    pub u_left: f64,
    pub u_right: f64,
    pub k_o: f64,
    pub flux_is: (),
}

impl AnalyticFan {
    pub fn new(origin: f64, t0: f64, u_left: f64, u_right: f64, k_o: f64) -> Self {
        AnalyticFan { origin, t0, u_left, u_right, k_o, flux_is: () }
    }

    fn eval(&self, f: &FluxCurve, t: f64, x: f64) -> f64 {
        if t <= self.t0 {
            return if x < self.origin { self.u_left } else { self.u_right };
        }
        rarefaction_state(f, self.k_o, self.u_left, self.u_right, (x - self.origin) / (t - self.t0))
    }
}

/// [`AnalyticFan`] bound to its flux.
#[derive(Debug, Clone)]
pub struct BoundAnalyticFan<'f> {
    pub fan: AnalyticFan,
    pub flux: &'f FluxCurve,
}

impl Fan for BoundAnalyticFan<'_> {
    fn state(&self, t: f64, x: f64) -> f64 {
        self.fan.eval(self.flux, t, x)
    }

    fn trigger_line(&self, f: &FluxCurve, k_o: f64, w_prime: f64) -> Result<(f64, f64, f64)> {
        let w = f.companion(w_prime)?;
        Ok((self.fan.t0, self.fan.origin, k_o * f.deriv(w)))
    }

    fn trace_back(&self, f: &FluxCurve, k_o: f64, w_prime: f64, t0: f64, x0: f64, t1: f64) -> Result<f64> {
        let (x, _) = dopri45(|t, x| k_o * f.chord(self.state(t, x), w_prime), t0, x0, t1, 1e-13, 1e-14)?;
        Ok(x)
    }
}

/// One step of an observed staircase, crossing `x = a` at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanStep {
    pub t: f64,
    pub speed: f64,
    /// State behind the step (the larger one).
    pub state: f64,
}

/// Step fan reconstructed from its crossings of `x = a`; steps are straight lines.
#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseFan {
    pub a: f64,
    pub background: f64,
    pub steps: Vec<FanStep>,
}

impl StaircaseFan {
    fn position(&self, j: usize, t: f64) -> f64 {
        let s = &self.steps[j];
        self.a + s.speed * (t - s.t)
    }

    /// Number of steps at or right of `x` at time `t`.
    fn passed(&self, t: f64, x: f64) -> usize {
        let mut lo = 0;
        let mut hi = self.steps.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.position(mid, t) >= x {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn level(&self, j: usize) -> f64 {
        if j == 0 {
            self.background
        } else {
            self.steps[j - 1].state
        }
    }
}

impl Fan for StaircaseFan {
    fn state(&self, t: f64, x: f64) -> f64 {
        self.level(self.passed(t, x))
    }

    fn trigger_line(&self, f: &FluxCurve, _k_o: f64, w_prime: f64) -> Result<(f64, f64, f64)> {
        let cap = f.eval(w_prime);
        let s = self.steps.iter().find(|s| f.eval(s.state) > cap).ok_or_else(|| {
            Error::InconsistentObservation("no observed step carries enough flux to trigger the reflection".into())
        })?;
        Ok((s.t, self.a, s.speed))
    }

    fn trace_back(&self, f: &FluxCurve, k_o: f64, w_prime: f64, t0: f64, x0: f64, t1: f64) -> Result<f64> {
        let (mut t, mut x) = (t0, x0);
        let mut j = self.passed(t0, x0);
        loop {
            let sigma = k_o * f.chord(self.level(j), w_prime);
            if j == 0 {
                return Ok(x + sigma * (t1 - t));
            }
            let st = &self.steps[j - 1];
            let tm = (self.a - st.speed * st.t - x + sigma * t) / (sigma - st.speed);
            if !(tm > t1) || !(tm <= t) {
                return Ok(x + sigma * (t1 - t));
            }
            x += sigma * (tm - t);
            t = tm;
            j -= 1;
        }
    }
}

/// Generation point of the reflected shock observed at `(τ_a, a)` with right state `w'`.
///
/// Finds the zero of `χ(ξ₁) = ξ₁ - ξ(τ̄(ξ₁))`, where `ξ` is the shock path traced back
/// from `(τ_a, a)` and `τ̄(ξ₁)` the time the triggering line reaches `ξ₁`. `χ` increases
/// strictly, so the zero is bracketed by `a` and the trigger position at `τ_a`.
/// Returns `(ξ₁, τ̄)`.
pub fn solve_xi1<F: Fan>(fan: &F, f: &FluxCurve, k_o: f64, a: f64, tau_a: f64, w_prime: f64) -> Result<(f64, f64)> {
    let (t_ref, x_ref, s) = fan.trigger_line(f, k_o, w_prime)?;
    if !(s > 0.0) {
        return Err(Error::InconsistentObservation(format!("triggering characteristic has speed {s}")));
    }
    let tbar = |xi: f64| t_ref + (xi - x_ref) / s;
    let hi = x_ref + s * (tau_a - t_ref);
    let xtol = 1e-12 * 1f64.max(a.abs());
    if hi < a - xtol {
        return Err(Error::InconsistentObservation(format!(
            "triggering characteristic is still left of x={a} at t={tau_a}"
        )));
    }
    if hi <= a + xtol {
        return Ok((a, tau_a));
    }
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let chi = |xi: f64| match fan.trace_back(f, k_o, w_prime, tau_a, a, tbar(xi)) {
        Ok(x) => xi - x,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let (c_lo, c_hi) = (chi(a), chi(hi));
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    if c_lo == 0.0 {
        return Ok((a, tbar(a)));
    }
    if !(c_lo < 0.0 && c_hi > 0.0) {
        return Err(Error::Bracket(format!(
            "χ must change sign from negative to positive on [{a}, {hi}], got χ(a)={c_lo:e}, χ(hi)={c_hi:e}"
        )));
    }
    let xi1 = bisect_exact(chi, a, hi)?;
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    Ok((xi1, tbar(xi1)))
}

/// Closed form of [`solve_xi1`] for a quadratic flux and an exact centred fan from `(0, origin)`.
///
/// Along the fan the shock path obeys `y' = A + y/(2t)` with `y = ξ - origin`, so
/// `y = 2At + C√t`; it meets the triggering line `y = s_w t` (with `s_w = -2A`) at `√τ̄ = C/(2 s_w)`.
pub fn xi1_quadratic(f: &FluxCurve, k_o: f64, origin: f64, a: f64, tau_a: f64, w_prime: f64) -> Result<(f64, f64)> {
    let c = f
        .quadratic_coefficient()
        .ok_or_else(|| Error::KindMismatch("the closed form needs a quadratic flux".into()))?;
    let big_a = k_o * c * (0.5 * (f.lo() + f.hi()) - w_prime);
    let l = a - origin;
    let cc = (l - 2.0 * big_a * tau_a) / tau_a.sqrt();
    let s_w = -2.0 * big_a;
    let root = cc / (2.0 * s_w);
    let tbar = root * root;
    Ok((origin + s_w * tbar, tbar))
}

/// Width `ξ₂ - ξ₁` from the transit time `dt` of the leading edge across `[a, b]`, given its
/// speeds left of, inside and right of the obstruction.
pub fn transit_width(dt: f64, xi1: f64, a: f64, b: f64, s_a: f64, s_in: f64, s_b: f64) -> Result<f64> {
    let den = 1.0 / s_in - 1.0 / s_b;
    if !(den.abs() > 1e-14 / s_in.abs()) {
        return Err(Error::Resonance(format!("edge speeds inside ({s_in}) and outside ({s_b}) coincide")));
    }
    Ok((dt - (xi1 - a) / s_a - (b - xi1) / s_b) / den)
}

/// Width from the exact edge speeds `k_o f'(u₁)` outside and `k₁ f'(ω)` inside:
/// `k_o k₁ f'(ω) / (k_o f'(u₁) - k₁ f'(ω)) · [(τ_b - τ_o) f'(u₁) - (b - a)/k_o]`.
pub fn width_exact_edges(f: &FluxCurve, k_o: f64, k1: f64, dt: f64, a: f64, b: f64) -> Result<f64> {
    let u1 = f.lo();
    if (k_o - k1).abs() <= 1e-15 * k_o {
        return Ok(0.0);
    }
    let omega = f.branch_inverse(k_o * f.eval(u1) / k1, Branch::Increasing)?;
    let (d1, dw) = (f.deriv(u1), f.deriv(omega));
    let den = k_o * d1 - k1 * dw;
    if den.abs() <= 1e-15 * k_o * d1.abs() {
        return Err(Error::Resonance("k_o f'(u1) = k1 f'(omega)".into()));
    }
    Ok(k_o * k1 * dw / den * (dt * d1 - (b - a) / k_o))
}

/// `k₁ = k_o f(w') / f(u^m)` from the right state of the reflected shock.
pub fn k1_from_reflection(f: &FluxCurve, k_o: f64, w_prime: f64) -> Result<f64> {
    Ok(k_o * f.eval(w_prime) / f.max_value()?)
}

/// Everything measured and derived by the stationary protocols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub tau_tilde: f64,
    pub tau_o: f64,
    pub tau_a: f64,
    pub tau_b: f64,
    pub tau_bar: f64,
    /// States around the reflected shock at `(τ_a, a)` and the companion of `w'`.
    pub v: f64,
    pub w: f64,
    pub w_prime: f64,
    /// Leading-edge states seen at `a` and at `b`.
    pub edge_a: f64,
    pub edge_b: f64,
    pub k1: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub steps: usize,
}

impl StationaryReport {
    pub fn obstruction(&self, k_o: f64, a: f64, b: f64) -> Result<Obstruction> {
        Obstruction::new(self.k1, self.xi1, self.xi2, k_o, a, b)
    }
}

/// Inverts the observations of a rarefaction sent from the left into a window whose
/// background states (from `t_start` on) are `bg_a` left of the obstruction and `bg_b` right of it.
fn invert_fan_probe(
    o: &Observer,
    f: &FluxCurve,
    k_o: f64,
    a: f64,
    b: f64,
    t_start: f64,
    bg_a: f64,
    bg_b: f64,
) -> Result<StationaryReport> {
    let (um, u2) = (f.maximizer()?, f.hi());
    let tr_a = o.trace(a)?;
    let mut steps = Vec::new();
    let mut reflection = None;
    for i in 1..tr_a.times.len() {
        if tr_a.times[i] <= t_start {
            continue;
        }
        let (prev, cur) = (tr_a.left[i - 1], tr_a.left[i]);
        if cur > um + STATE_TOL {
            reflection = Some((tr_a.times[i], prev, cur));
            break;
        }
        if cur > prev + STATE_TOL {
            steps.push(FanStep { t: tr_a.times[i], speed: k_o * f.chord(cur, prev), state: cur });
        } else if cur < prev - STATE_TOL {
            return Err(Error::InconsistentObservation(format!(
                "state at x={a} decreased from {prev} to {cur} at t={} while the probe was arriving",
                tr_a.times[i]
            )));
        }
    }
    let (tau_a, v, w_prime) = reflection.ok_or_else(|| {
        Error::HorizonTooShort(format!("no reflected shock reached x={a} by t={}", o.horizon()))
    })?;
    if w_prime >= u2 - STATE_TOL {
        return Err(Error::Congestion(format!(
            "the reflected state at x={a} is the fully congested state; k1 cannot be determined"
        )));
    }
    let first = *steps.first().ok_or_else(|| {
        Error::InconsistentObservation(format!("the reflection reached x={a} before any rarefaction step"))
    })?;
    let k1 = k1_from_reflection(f, k_o, w_prime)?;
    let tr_b = o.trace(b)?;
    let (tau_b, edge_b) = first_rise(&tr_b, t_start, bg_b).ok_or_else(|| {
        Error::HorizonTooShort(format!("the rarefaction did not reach x={b} by t={}", o.horizon()))
    })?;
    let fan = StaircaseFan { a, background: bg_a, steps };
    let (xi1, tau_bar) = solve_xi1(&fan, f, k_o, a, tau_a, w_prime)?;
    let omega = f.branch_inverse(k_o * f.eval(bg_a) / k1, Branch::Increasing)?;
    let w_in = f.branch_inverse(k_o * f.eval(edge_b) / k1, Branch::Increasing)?;
    let s_a = k_o * f.chord(first.state, bg_a);
    let s_in = k1 * f.chord(w_in, omega);
    let s_b = k_o * f.chord(edge_b, bg_b);
    let width = transit_width(tau_b - first.t, xi1, a, b, s_a, s_in, s_b)?;
    let xi2 = xi1 + width;
    if !(width > 0.0) || xi2 > b + 1e-9 * (b - a) {
        return Err(Error::InconsistentObservation(format!("recovered obstruction [{xi1}, {xi2}] does not fit in [{a}, {b}]")));
    }
    Ok(StationaryReport {
        tau_tilde: t_start,
        tau_o: first.t,
        tau_a,
        tau_b,
        tau_bar,
        v,
        w: f.companion(w_prime)?,
        w_prime,
        edge_a: first.state,
        edge_b,
        k1,
        xi1,
        xi2: xi2.min(b),
        steps: fan.steps.len(),
    })
}

/// First time after `t0` at which the right limit rises above `bg`, with the new state.
fn first_rise(tr: &Trace, t0: f64, bg: f64) -> Option<(f64, f64)> {
    (1..tr.times.len()).find(|&i| tr.times[i] > t0 && tr.right[i] > bg + STATE_TOL).map(|i| (tr.times[i], tr.right[i]))
}

/// Reconstruction from the emptying probe.
pub fn reconstruct_stationary(
    o: &Observer,
    f: &FluxCurve,
    amb: &StationaryAmbient,
    probe: &StationaryProbe,
) -> Result<StationaryReport> {
    amb.check_reconstructible(f)?;
    let tau_tilde = emptying_time(o, f, amb, probe)?;
    let u1 = f.lo();
    invert_fan_probe(o, f, amb.k_o, amb.a, amb.b, tau_tilde, u1, u1)
}

/// Data `u^m | u_o(a)` left of `a`, usable when neither edge is congested.
pub fn fast_probe_data(f: &FluxCurve, amb: &StationaryAmbient, x_tilde: f64) -> Result<Profile> {
    let um = f.maximizer()?;
    if amb.u_a.max(amb.u_b) >= um {
        return Err(Error::Input(format!(
            "the direct probe needs max(u_o(a), u_o(b)) < u^m, got {} and {}",
            amb.u_a, amb.u_b
        )));
    }
    if !(x_tilde > 0.0) {
        return Err(Error::Input(format!("x_tilde must be positive, got {x_tilde}")));
    }
    pieces(um, &[(amb.a - x_tilde, amb.u_a)])
}

/// Result of the direct probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FastOutcome {
    Completed(StationaryReport),
    /// The first reflection carries exactly the ambient flux: the obstruction was congested.
    Congested { tau: f64, w_prime: f64, k1: f64 },
}

pub fn reconstruct_fast(o: &Observer, f: &FluxCurve, amb: &StationaryAmbient) -> Result<FastOutcome> {
    let um = f.maximizer()?;
    let tr_a = o.trace(amb.a)?;
    if let Some(i) = (1..tr_a.times.len()).find(|&i| tr_a.left[i] > um + STATE_TOL) {
        let w_prime = tr_a.left[i];
        if (f.eval(w_prime) - f.eval(amb.u_a)).abs() <= 1e-10 * f.max_value()? {
            return Ok(FastOutcome::Congested {
                tau: tr_a.times[i],
                w_prime,
                k1: k1_from_reflection(f, amb.k_o, w_prime)?,
            });
        }
    }
    invert_fan_probe(o, f, amb.k_o, amb.a, amb.b, 0.0, amb.u_a, amb.u_b).map(FastOutcome::Completed)
}

/// Outcome of running a stationary protocol inside a world.
#[derive(Debug, Clone)]
pub struct StationaryRun {
    pub report: StationaryReport,
    /// Time of the restart, if the direct probe revealed congestion first.
    pub restarted_at: Option<f64>,
    pub observer: Observer,
}

/// Emptying probe against a hidden stationary tail.
pub fn run_stationary(
    world: &World,
    amb: &StationaryAmbient,
    tail: &Profile,
    x_tilde: f64,
) -> Result<StationaryRun> {
    let probe = probe_stationary(&world.flux, amb, x_tilde)?;
    let (_, o) = world.run(probe.initial_data(amb.a, tail)?)?;
    let report = reconstruct_stationary(&o, &world.flux, amb, &probe)?;
    Ok(StationaryRun { report, restarted_at: None, observer: o })
}

/// Direct probe, restarting with the emptying probe when the obstruction turns out congested.
pub fn run_fast(world: &World, amb: &StationaryAmbient, tail: &Profile, x_tilde: f64) -> Result<StationaryRun> {
    let left = fast_probe_data(&world.flux, amb, x_tilde)?;
    let (hist, o) = world.run(join_at(&left, amb.a, tail)?)?;
    match reconstruct_fast(&o, &world.flux, amb)? {
        FastOutcome::Completed(report) => Ok(StationaryRun { report, restarted_at: None, observer: o }),
        FastOutcome::Congested { tau, w_prime, k1 } => {
            let now = hist.snapshot(tau);
            let amb2 = StationaryAmbient::new(&world.flux, amb.k_o, w_prime, amb.u_b, amb.a, amb.b)?;
            let mut run = run_stationary(world, &amb2, &now, x_tilde)?;
            if (run.report.k1 - k1).abs() > 1e-9 * k1 {
                return Err(Error::InconsistentObservation(format!(
                    "congested reflection gave k1={k1} but the restart gave {}",
                    run.report.k1
                )));
            }
            run.restarted_at = Some(tau);
            Ok(run)
        }
    }
}

/// Which waves a uniform datum produced outside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstantCase {
    /// A shock came back out through `a`.
    Reflective,
    /// Only waves through `b`.
    Transmissive,
    Invisible,
}

/// A jump crossing a window edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpArrival {
    pub time: f64,
    pub left: f64,
    pub right: f64,
    pub speed: f64,
}

/// Features of the traces at `a` and `b` for uniform initial data `ū`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantObservables {
    pub u_bar: f64,
    pub k_o: f64,
    pub a: f64,
    pub b: f64,
    pub horizon: f64,
    /// Shock `ū | v_o` leaving through `a`.
    pub reflection: Option<JumpArrival>,
    /// First shock `v₁ | ū` leaving through `b`.
    pub exit_shock: Option<JumpArrival>,
    /// First rise at `b` after the exit shock.
    pub exit_rarefaction: Option<JumpArrival>,
}

pub fn observe_constant(o: &Observer, f: &FluxCurve, u_bar: f64, k_o: f64, a: f64, b: f64) -> Result<ConstantObservables> {
    let tr_a = o.trace(a)?;
    let reflection = (1..tr_a.times.len()).find(|&i| tr_a.left[i] > u_bar + STATE_TOL).map(|i| {
        let (l, r) = (tr_a.left[i - 1], tr_a.left[i]);
        JumpArrival { time: tr_a.times[i], left: l, right: r, speed: k_o * f.chord(l, r) }
    });
    let tr_b = o.trace(b)?;
    let exit = (1..tr_b.times.len()).find(|&i| tr_b.right[i] < u_bar - STATE_TOL);
    let exit_shock = exit.map(|i| {
        let (l, r) = (tr_b.right[i], tr_b.right[i - 1]);
        JumpArrival { time: tr_b.times[i], left: l, right: r, speed: k_o * f.chord(l, r) }
    });
    let exit_rarefaction = exit.and_then(|i0| {
        (i0 + 1..tr_b.times.len()).find(|&i| tr_b.right[i] > tr_b.right[i - 1] + STATE_TOL).map(|i| {
            let (l, r) = (tr_b.right[i], tr_b.right[i - 1]);
            JumpArrival { time: tr_b.times[i], left: l, right: r, speed: k_o * f.chord(l, r) }
        })
    });
    Ok(ConstantObservables { u_bar, k_o, a, b, horizon: o.horizon(), reflection, exit_shock, exit_rarefaction })
}

pub fn classify_constant_case(obs: &ConstantObservables) -> ConstantCase {
    if obs.reflection.is_some() {
        ConstantCase::Reflective
    } else if obs.exit_shock.is_some() {
        ConstantCase::Transmissive
    } else {
        ConstantCase::Invisible
    }
}

/// How a location was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    /// Straight-line back-projection of a shock that met no other wave.
    Direct,
    /// Back-projection although the consistency check failed and no better estimate exists.
    DirectUnverified,
    /// Transit relation of the rarefaction edge with exact characteristic speeds.
    Transit,
    /// Transit estimate refined by re-simulation until the observed arrival time is matched.
    Shooting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantReport {
    pub case: ConstantCase,
    pub k1: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub xi1_source: Source,
    pub xi2_source: Source,
    /// `b - σ_b T` for the exit shock.
    pub xi2_direct: Option<f64>,
    /// Whether the exit shock carries the flux ratio of an undisturbed obstruction shock.
    pub verified: Option<bool>,
    pub unique: bool,
}

/// Forward model used to refine locations by matching arrival times.
#[derive(Debug, Clone)]
pub struct Resimulator {
    pub flux: FluxCurve,
    pub delta: f64,
    pub horizon: f64,
}

impl Resimulator {
    pub fn observe(&self, u_bar: f64, obs: &Obstruction) -> Result<ConstantObservables> {
        let s = Scenario::new(self.flux.clone(), obs.coefficient(), Profile::constant(u_bar), self.delta, self.horizon)?;
        let o = Observer::new(s.run()?, Mode::Partial { a: obs.a, b: obs.b }, self.delta)?;
        observe_constant(&o, &self.flux, u_bar, obs.k_o, obs.a, obs.b)
    }
}

/// Bisection for a decreasing arrival-time map; `None` (no arrival) counts as later than any target.
fn shoot<G: FnMut(f64) -> Result<Option<f64>>>(mut arrival: G, target: f64, lo: f64, hi: f64) -> Result<f64> {
    let mut g = |x: f64| -> Result<f64> { Ok(arrival(x)?.map_or(f64::INFINITY, |t| t - target)) };
    let (mut l, mut h) = (lo, hi);
    let (gl, gh) = (g(l)?, g(h)?);
    if !(gl > 0.0 && gh < 0.0) {
        return Err(Error::Bracket(format!(
            "arrival time minus target must go from positive to negative on [{lo}, {hi}], got {gl:e}, {gh:e}"
        )));
    }
    let tol = 1e-14 * (hi - lo).abs().max(1.0);
    while h - l > tol {
        let m = 0.5 * (l + h);
        if m <= l || m >= h {
            break;
        }
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if gm > 0.0 {
            l = m;
        } else {
            h = m;
        }
    }
    Ok(0.5 * (l + h))
}

/// Reconstruction from uniform data. With a [`Resimulator`], locations that the
/// closed formulas only give approximately are refined by matching arrival times.
pub fn reconstruct_constant_data(
    obs: &ConstantObservables,
    f: &FluxCurve,
    refine: Option<&Resimulator>,
) -> Result<ConstantReport> {
    let (um, fmax) = (f.maximizer()?, f.max_value()?);
    let (k_o, a, b, u_bar) = (obs.k_o, obs.a, obs.b, obs.u_bar);
    if !(u_bar >= f.lo() && u_bar < um) {
        return Err(Error::Input(format!("uniform datum must lie in [{}, {um}), got {u_bar}", f.lo())));
    }
    let exit = |what: &str| {
        obs.exit_shock
            .ok_or_else(|| Error::HorizonTooShort(format!("no shock left through x={b} by t={} ({what})", obs.horizon)))
    };
    match classify_constant_case(obs) {
        ConstantCase::Invisible => Err(Error::Input(format!(
            "no wave left ({a}, {b}) by t={}; the obstruction is invisible to uniform data",
            obs.horizon
        ))),
        ConstantCase::Reflective => {
            let r = obs.reflection.unwrap();
            if !(r.speed < 0.0) || !(r.right > um) {
                return Err(Error::InconsistentObservation(format!(
                    "a reflected shock must move left into congested states, got speed {} and state {}",
                    r.speed, r.right
                )));
            }
            let k1 = k_o * f.eval(r.right) / fmax;
            let xi1 = a - r.speed * r.time;
            let e = exit("reflective case")?;
            if !(e.speed > 0.0) {
                return Err(Error::InconsistentObservation(format!("exit shock speed {} is not positive", e.speed)));
            }
            let xi2_direct = b - e.speed * e.time;
            let verified = (k_o * f.eval(e.left) / f.eval(u_bar) - k1).abs() <= 1e-9 * k1;
            let (mut xi2, mut source) = if verified {
                (xi2_direct, Source::Direct)
            } else {
                let w1 = f.branch_inverse(k_o * f.eval(e.left) / k1, Branch::Increasing)?;
                let (s_in, s_out) = (k1 * f.deriv(w1), k_o * f.deriv(e.left));
                let est = (xi1 + s_in * e.time - b * s_in / s_out) / (1.0 - s_in / s_out);
                if s_out > 0.0 && est > xi1 && est <= b {
                    (est, Source::Transit)
                } else {
                    (xi2_direct, Source::DirectUnverified)
                }
            };
            if let (Some(rs), false) = (refine, verified) {
                let span = b - xi1;
                xi2 = shoot(
                    |x2| {
                        let o = Obstruction::new(k1, xi1, x2, k_o, a, b)?;
                        Ok(rs.observe(u_bar, &o)?.exit_shock.map(|s| s.time))
                    },
                    e.time,
                    xi1 + 1e-9 * span,
                    b,
                )?;
                source = Source::Shooting;
            }
            Ok(ConstantReport {
                case: ConstantCase::Reflective,
                k1,
                xi1,
                xi2,
                xi1_source: Source::Direct,
                xi2_source: source,
                xi2_direct: Some(xi2_direct),
                verified: Some(verified),
                unique: true,
            })
        }
        ConstantCase::Transmissive => {
            let e = exit("transmissive case")?;
            if !(e.speed > 0.0) {
                return Err(Error::InconsistentObservation(format!("exit shock speed {} is not positive", e.speed)));
            }
            let k1 = k_o * f.eval(e.left) / f.eval(u_bar);
            if !(k1 < k_o) {
                return Err(Error::InconsistentObservation(format!(
                    "exit shock implies k1={k1}, which is no obstruction for k_o={k_o}"
                )));
            }
            if k1 * fmax < k_o * f.eval(u_bar) * (1.0 - 1e-12) {
                // over capacity: a queue is growing towards a but has not reached it yet
                return Err(Error::HorizonTooShort(format!(
                    "exit shock implies k1={k1} below the inflow, but no reflected shock reached x={a} by t={}",
                    obs.horizon
                )));
            }
            let xi2 = b - e.speed * e.time;
            let rare = obs.exit_rarefaction.ok_or_else(|| {
                Error::HorizonTooShort(format!("no rarefaction reached x={b} by t={}", obs.horizon))
            })?;
            let w_o = f.branch_inverse(k_o * f.eval(e.left) / k1, Branch::Increasing)?;
            let (s_in, s_out) = (k1 * f.deriv(w_o), k_o * f.deriv(e.left));
            let mut xi1 = (xi2 - (rare.time - (b - xi2) / s_out) * s_in).clamp(a, xi2);
            let mut source = Source::Transit;
            let mut unique = rare.time > e.time;
            if let Some(rs) = refine {
                let span = xi2 - a;
                xi1 = shoot(
                    |x1| {
                        let o = Obstruction::new(k1, x1, xi2, k_o, a, b)?;
                        Ok(rs.observe(u_bar, &o)?.exit_rarefaction.map(|s| s.time))
                    },
                    rare.time,
                    a,
                    xi2 - 1e-9 * span,
                )?;
                source = Source::Shooting;
                let check = rs.observe(u_bar, &Obstruction::new(k1, xi1, xi2, k_o, a, b)?)?;
                unique = check.exit_shock.is_some_and(|s| {
                    (s.time - e.time).abs() <= 1e-9 * e.time.max(1.0) && (s.left - e.left).abs() <= STATE_TOL
                });
            }
            Ok(ConstantReport {
                case: ConstantCase::Transmissive,
                k1,
                xi1,
                xi2,
                xi1_source: source,
                xi2_source: Source::Direct,
                xi2_direct: Some(xi2),
                verified: None,
                unique,
            })
        }
    }
}

/// Simulates uniform data in `world` and reconstructs.
pub fn run_constant(world: &World, u_bar: f64, k_o: f64, refine: bool) -> Result<(ConstantReport, ConstantObservables)> {
    let (_, o) = world.run(Profile::constant(u_bar))?;
    let obs = observe_constant(&o, &world.flux, u_bar, k_o, world.a, world.b)?;
    let rs = Resimulator { flux: world.flux.clone(), delta: world.delta, horizon: world.horizon };
    let report = reconstruct_constant_data(&obs, &world.flux, refine.then_some(&rs))?;
    Ok((report, obs))
}

/// Position tolerance used when comparing recovered locations (exported for callers' reports).
pub const LOCATION_EQ: f64 = tol::POSITION_EQ;
