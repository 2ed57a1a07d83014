//! Event-driven front tracking for piecewise-constant data and coefficient.
//!
//! Rarefactions are split into steps of state width at most `delta`; each step
//! travels at the Rankine–Hugoniot speed of its two states, so every front is
//! an exact weak discontinuity and mass is conserved to roundoff.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluxlib::{FluxCurve, FluxKind, SpatialCoeff};
use crate::riemann::{solve_homogeneous, solve_two_k, Wave, WaveFan};
use crate::tol;

/// Piecewise-constant function of `x` at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Profile {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::Input(format!(
                "profile needs one more value than breakpoints ({} values, {} breakpoints)",
                values.len(),
                breakpoints.len()
            )));
        }
        for w in breakpoints.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Input(format!("profile breakpoints must increase strictly ({} then {})", w[0], w[1])));
            }
        }
        if values.iter().chain(breakpoints.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("profile contains non-finite entries".into()));
        }
        Ok(Profile { breakpoints, values, time })
    }

    pub fn constant(u: f64) -> Self {
        Profile { breakpoints: Vec::new(), values: vec![u], time: 0.0 }
    }

    /// Riemann datum `ul` for `x < x0`, `ur` for `x > x0`.
    pub fn riemann(ul: f64, ur: f64, x0: f64) -> Self {
        if ul == ur {
            return Self::constant(ul);
        }
        Profile { breakpoints: vec![x0], values: vec![ul, ur], time: 0.0 }
    }

    /// Piecewise-constant datum with `inside` on `[lo, hi]` and `outside` elsewhere.
    pub fn plateau(outside: f64, inside: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![outside, inside, outside], 0.0)
    }

    pub fn value_left(&self, x: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b < x)]
    }

    pub fn value_right(&self, x: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b <= x)]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫_lo^hi u dx`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let mut edges = vec![lo];
        edges.extend(self.breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
        edges.push(hi);
        edges.windows(2).map(|w| (w[1] - w[0]) * self.value_right(w[0])).sum()
    }

    /// `∫ (u - reference) dx` over the real line; requires both far fields to equal `reference`.
    pub fn mass(&self, reference: f64) -> Result<f64> {
        if self.values[0] != reference || *self.values.last().unwrap() != reference {
            return Err(Error::Input("mass needs both far fields equal to the reference state".into()));
        }
        Ok(self
            .breakpoints
            .windows(2)
            .zip(self.values[1..].iter())
            .map(|(w, v)| (w[1] - w[0]) * (v - reference))
            .sum())
    }

    /// `∫_lo^hi |u - v| dx`.
    pub fn l1_distance(&self, other: &Profile, lo: f64, hi: f64) -> f64 {
        let mut edges = vec![lo];
        edges.extend(self.breakpoints.iter().chain(other.breakpoints.iter()).copied().filter(|&x| x > lo && x < hi));
        edges.push(hi);
        edges.sort_by(f64::total_cmp);
        edges.windows(2).map(|w| (w[1] - w[0]) * (self.value_right(w[0]) - other.value_right(w[0])).abs()).sum()
    }

    /// Total variation.
    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Jumps `(x, u_left, u_right)`.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.breakpoints.iter().enumerate().map(move |(i, &x)| (x, self.values[i], self.values[i + 1]))
    }
}

/// A forward problem: flux, coefficient, initial data, rarefaction step and horizon.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub flux: FluxCurve,
    pub coeff: SpatialCoeff,
    pub initial: Profile,
    pub delta: f64,
    pub horizon: f64,
}

impl Scenario {
    pub fn new(flux: FluxCurve, coeff: SpatialCoeff, initial: Profile, delta: f64, horizon: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::Input(format!("rarefaction step must be positive, got {delta}")));
        }
        if !(horizon >= 0.0) {
            return Err(Error::Input(format!("horizon must be nonnegative, got {horizon}")));
        }
        if flux.kind() == FluxKind::ConcaveH1 {
            let slack = 1e-14 * (flux.hi() - flux.lo());
            if initial.min_value() < flux.lo() - slack || initial.max_value() > flux.hi() + slack {
                return Err(Error::Input(format!(
                    "initial values must lie in [{}, {}], got [{}, {}]",
                    flux.lo(),
                    flux.hi(),
                    initial.min_value(),
                    initial.max_value()
                )));
            }
        }
        if !coeff.breakpoints().is_empty() && flux.kind() != FluxKind::ConcaveH1 {
            return Err(Error::KindMismatch("a discontinuous coefficient needs a strictly concave flux".into()));
        }
        Ok(Scenario { flux, coeff, initial, delta, horizon })
    }

    /// Evolves to the horizon and returns the recorded history.
    pub fn run(&self) -> Result<History> {
        let mut fs = FrontSet::initialize(self)?;
        fs.advance(self.horizon)?;
        Ok(fs.into_history())
    }
}

/// Kind of a tracked discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrontKind {
    Shock,
    RarefactionStep,
    KFront,
}

/// One straight front segment `x(t) = x0 + speed (t - t0)` on `[t0, t_end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub t0: f64,
    pub t_end: f64,
    pub speed: f64,
    pub ul: f64,
    pub ur: f64,
    pub kl: f64,
    pub kr: f64,
    pub kind: FrontKind,
}

impl Segment {
    pub fn position(&self, t: f64) -> f64 {
        if self.speed == 0.0 {
            self.x0
        } else {
            self.x0 + self.speed * (t - self.t0)
        }
    }

    pub fn alive_at(&self, t: f64) -> bool {
        self.t0 <= t && t < self.t_end
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    l: usize,
    r: usize,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    fn cmp(&self, o: &Self) -> Ordering {
        self.t.total_cmp(&o.t).then(self.l.cmp(&o.l)).then(self.r.cmp(&o.r))
    }
}

const NONE: usize = usize::MAX;

/// Live front-tracking state: fronts in spatial order plus the collision queue.
#[derive(Debug, Clone)]
pub struct FrontSet {
    flux: FluxCurve,
    delta: f64,
    segs: Vec<Segment>,
    prev: Vec<usize>,
    next: Vec<usize>,
    head: usize,
    heap: BinaryHeap<Reverse<Event>>,
    time: f64,
    far_left: f64,
    events: usize,
    first_event: Option<f64>,
}

impl FrontSet {
    /// Inserts the Riemann fan at every initial discontinuity of `u` or `k`.
    pub fn initialize(s: &Scenario) -> Result<Self> {
        let mut fs = FrontSet {
            flux: s.flux.clone(),
            delta: s.delta,
            segs: Vec::new(),
            prev: Vec::new(),
            next: Vec::new(),
            head: NONE,
            heap: BinaryHeap::new(),
            time: 0.0,
            far_left: s.initial.values[0],
            events: 0,
            first_event: None,
        };
        let mut pos: Vec<f64> = s.initial.breakpoints.iter().chain(s.coeff.breakpoints().iter()).copied().collect();
        pos.sort_by(f64::total_cmp);
        pos.dedup();
        let mut order = Vec::new();
        for p in pos {
            let ul = s.initial.value_left(p);
            let ur = s.initial.value_right(p);
            let kl = s.coeff.left_of(p);
            let kr = s.coeff.right_of(p);
            let fan = if kl != kr {
                solve_two_k(&s.flux, kl, ul, kr, ur)?
            } else if ul != ur {
                solve_homogeneous(&s.flux, kl, ul, ur)
            } else {
                continue;
            };
            order.extend(fs.emit(&fan, p, 0.0));
        }
        fs.link_run(NONE, &order, NONE);
        for w in order.windows(2) {
            fs.schedule(w[0], w[1]);
        }
        Ok(fs)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events_processed(&self) -> usize {
        self.events
    }

    /// Live fronts in spatial order.
    pub fn fronts(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut i = self.head;
        while i != NONE {
            out.push(self.segs[i]);
            i = self.next[i];
        }
        out
    }

    /// Converts a fan into new front records born at `(x, t)`; returns their ids in order.
    fn emit(&mut self, fan: &WaveFan, x: f64, t: f64) -> Vec<usize> {
        let mut protos: Vec<Segment> = Vec::new();
        let mut seen_k = false;
        for w in &fan.waves {
            let mut pieces = Vec::new();
            match *w {
                Wave::KWave { kl, kr, ur, .. } => {
                    // zero-speed waves just left of the jump are folded into it
                    while protos.last().map_or(false, |p| p.speed >= 0.0) {
                        protos.pop();
                    }
                    let ul = protos.last().map_or(fan.ul, |p| p.ur);
                    protos.push(Segment {
                        x0: x,
                        t0: t,
                        t_end: f64::INFINITY,
                        speed: 0.0,
                        ul,
                        ur,
                        kl,
                        kr,
                        kind: FrontKind::KFront,
                    });
                    seen_k = true;
                    continue;
                }
                Wave::Shock { ul, ur, k, speed } => pieces.push((ul, ur, k, speed, FrontKind::Shock)),
                Wave::Rarefaction { ul, ur, k } => {
                    let n = (((ur - ul).abs() / self.delta) - 1e-9).ceil().max(1.0) as usize;
                    let mut a = ul;
                    for j in 1..=n {
                        let b = if j == n { ur } else { ul + (ur - ul) * j as f64 / n as f64 };
                        pieces.push((a, b, k, k * self.flux.chord(a, b), FrontKind::RarefactionStep));
                        a = b;
                    }
                }
            }
            for (ul, ur, k, speed, kind) in pieces {
                if seen_k && speed <= 0.0 {
                    if let Some(kf) = protos.last_mut().filter(|p| p.kind == FrontKind::KFront) {
                        kf.ur = ur;
                        continue;
                    }
                }
                protos.push(Segment { x0: x, t0: t, t_end: f64::INFINITY, speed, ul, ur, kl: k, kr: k, kind });
            }
        }
        protos
            .into_iter()
            .map(|s| {
                self.segs.push(s);
                self.prev.push(NONE);
                self.next.push(NONE);
                self.segs.len() - 1
            })
            .collect()
    }

    fn link_run(&mut self, before: usize, run: &[usize], after: usize) {
        let mut p = before;
        for &i in run {
            self.prev[i] = p;
            if p == NONE {
                self.head = i;
            } else {
                self.next[p] = i;
            }
            p = i;
        }
        if p == NONE {
            self.head = after;
        } else {
            self.next[p] = after;
        }
        if after != NONE {
            self.prev[after] = p;
        }
    }

    fn schedule(&mut self, l: usize, r: usize) {
        if l == NONE || r == NONE {
            return;
        }
        let (a, b) = (&self.segs[l], &self.segs[r]);
        let rel = a.speed - b.speed;
        let scale = 1f64.max(a.speed.abs()).max(b.speed.abs());
        if rel <= tol::PARALLEL * scale {
            return;
        }
        let ca = a.x0 - a.speed * a.t0;
        let cb = b.x0 - b.speed * b.t0;
        let t = ((cb - ca) / rel).max(self.time);
        self.heap.push(Reverse(Event { t, l, r }));
    }

    fn kill(&mut self, i: usize, t: f64) {
        self.segs[i].t_end = t;
    }

    fn alive(&self, i: usize) -> bool {
        self.segs[i].t_end == f64::INFINITY
    }

    /// Processes every collision up to `t_target`.
    pub fn advance(&mut self, t_target: f64) -> Result<()> {
        if t_target < self.time {
            return Err(Error::Input(format!("cannot advance backwards from {} to {t_target}", self.time)));
        }
        while let Some(Reverse(ev)) = self.heap.peek().copied() {
            if ev.t > t_target {
                break;
            }
            self.heap.pop();
            if !self.alive(ev.l) || !self.alive(ev.r) || self.next[ev.l] != ev.r {
                continue;
            }
            self.events += 1;
            if self.events > tol::MAX_EVENTS {
                return Err(Error::Livelock(format!(
                    "more than {} interactions before t={}",
                    tol::MAX_EVENTS,
                    self.time
                )));
            }
            let t = ev.t.max(self.time);
            self.time = t;
            self.first_event.get_or_insert(t);
            self.interact(ev.l, ev.r, t)?;
        }
        self.time = t_target;
        Ok(())
    }

    fn interact(&mut self, l: usize, r: usize, t: f64) -> Result<()> {
        let mut x = self.segs[l].position(t);
        let mut first = l;
        let mut last = r;
        let near = |a: f64, b: f64| (a - b).abs() <= tol::COLLISION_MERGE * 1f64.max(b.abs());
        loop {
            let p = self.prev[first];
            if p != NONE && near(self.segs[p].position(t), x) {
                first = p;
            } else {
                break;
            }
        }
        loop {
            let n = self.next[last];
            if n != NONE && near(self.segs[n].position(t), x) {
                last = n;
            } else {
                break;
            }
        }
        let mut cluster = vec![first];
        while *cluster.last().unwrap() != last {
            let n = self.next[*cluster.last().unwrap()];
            cluster.push(n);
        }
        let kf: Vec<usize> = cluster.iter().copied().filter(|&i| self.segs[i].kind == FrontKind::KFront).collect();
        let ul = self.segs[first].ul;
        let ur = self.segs[last].ur;
        let kl = self.segs[first].kl;
        let kr = self.segs[last].kr;
        let fan = if let Some(&k) = kf.first() {
            x = self.segs[k].x0;
            solve_two_k(&self.flux, kl, ul, kr, ur)?
        } else {
            solve_homogeneous(&self.flux, kl, ul, ur)
        };
        let before = self.prev[first];
        let after = self.next[last];
        for &i in &cluster {
            self.kill(i, t);
        }
        let born = self.emit(&fan, x, t);
        self.link_run(before, &born, after);
        if born.is_empty() {
            self.schedule(before, after);
        } else {
            self.schedule(before, born[0]);
            self.schedule(*born.last().unwrap(), after);
        }
        Ok(())
    }

    pub fn into_history(self) -> History {
        History {
            flux: self.flux,
            segments: self.segs,
            far_left: self.far_left,
            first_event: self.first_event,
            t_reached: self.time,
            events: self.events,
        }
    }

    pub fn history(&self) -> History {
        self.clone().into_history()
    }
}

/// Complete record of a front-tracking run: every segment with its lifetime.
#[derive(Debug, Clone)]
pub struct History {
    pub flux: FluxCurve,
    pub segments: Vec<Segment>,
    pub far_left: f64,
    pub first_event: Option<f64>,
    pub t_reached: f64,
    pub events: usize,
}

/// Time series of the one-sided limits `u(t, x-)`, `u(t, x+)` at a fixed position.
///
/// Values on `[times[i], times[i+1])` are `left[i]`, `right[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub x: f64,
    pub times: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub horizon: f64,
}

impl Trace {
    fn index(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn left_at(&self, t: f64) -> f64 {
        self.left[self.index(t)]
    }

    pub fn right_at(&self, t: f64) -> f64 {
        self.right[self.index(t)]
    }

    /// Samples on a time grid as `(t, u_left, u_right)` rows.
    pub fn sample(&self, grid: &[f64]) -> Vec<(f64, f64, f64)> {
        grid.iter().map(|&t| (t, self.left_at(t), self.right_at(t))).collect()
    }
}

impl History {
    fn alive_sorted(&self, t: f64) -> Vec<(f64, usize)> {
        let mut v: Vec<(f64, usize)> = self
            .segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.alive_at(t) || (t == self.t_reached && s.t_end == f64::INFINITY && s.t0 <= t))
            .map(|(i, s)| (s.position(t), i))
            .collect();
        v.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(self.segments[a.1].speed.total_cmp(&self.segments[b.1].speed))
                .then(a.1.cmp(&b.1))
        });
        v
    }

    /// Fronts alive at time `t` in spatial order, with their positions.
    pub fn fronts_at(&self, t: f64) -> Vec<(f64, Segment)> {
        self.alive_sorted(t).into_iter().map(|(x, i)| (x, self.segments[i])).collect()
    }

    /// Exact snapshot of `u(t, ·)`; coincident fronts are collapsed.
    pub fn snapshot(&self, t: f64) -> Profile {
        let mut bps: Vec<f64> = Vec::new();
        let mut vals = vec![self.far_left];
        for (x, i) in self.alive_sorted(t) {
            let ur = self.segments[i].ur;
            if bps.last() == Some(&x) {
                *vals.last_mut().unwrap() = ur;
            } else if *vals.last().unwrap() != ur {
                bps.push(x);
                vals.push(ur);
            }
        }
        // drop breakpoints that collapsed to no change
        let mut b2 = Vec::with_capacity(bps.len());
        let mut v2 = vec![vals[0]];
        for (i, &x) in bps.iter().enumerate() {
            if vals[i + 1] != *v2.last().unwrap() {
                b2.push(x);
                v2.push(vals[i + 1]);
            }
        }
        Profile { breakpoints: b2, values: v2, time: t }
    }

    /// Exact trace at `x` over `[0, t_reached]`.
    pub fn trace(&self, x: f64) -> Trace {
        let snap0 = self.snapshot(0.0);
        let mut base: Vec<(f64, f64, f64)> = Vec::new();
        let mut stationary: Vec<(f64, f64, f64, f64)> = Vec::new();
        let xt = tol::POSITION_EQ * 1e-2 * 1f64.max(x.abs());
        for s in &self.segments {
            if s.speed == 0.0 {
                if (s.x0 - x).abs() <= xt {
                    stationary.push((s.t0, s.t_end.min(self.t_reached), s.ul, s.ur));
                }
                continue;
            }
            let tc = s.t0 + (x - s.x0) / s.speed;
            let born_here = (s.x0 - x).abs() <= xt && s.t0 <= s.t_end;
            let tc = if born_here { s.t0 } else { tc };
            if tc >= s.t0 && tc < s.t_end && tc <= self.t_reached && (tc > s.t0 || born_here) {
                base.push((tc, s.speed, if s.speed > 0.0 { s.ul } else { s.ur }));
            }
        }
        // several fronts crossing at one instant: the state at x is between the fastest
        // left-mover and the slowest right-mover
        base.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut times = vec![0.0];
        let mut vals = vec![if snap0.breakpoints.contains(&x) { f64::NAN } else { snap0.value_right(x) }];
        let mut i = 0;
        while i < base.len() {
            let t = base[i].0;
            let mut j = i;
            while j < base.len() && base[j].0 == t {
                j += 1;
            }
            let group = &base[i..j];
            let v = match group.iter().find(|g| g.1 > 0.0) {
                Some(g) => g.2,
                None => group.last().unwrap().2,
            };
            if t == *times.last().unwrap() {
                *vals.last_mut().unwrap() = v;
            } else {
                times.push(t);
                vals.push(v);
            }
            i = j;
        }
        if vals[0].is_nan() {
            vals[0] = snap0.value_right(x);
        }
        let mut left = vals.clone();
        let mut right = vals;
        // overlay stationary fronts sitting at x
        stationary.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(t0, t1, ul, ur) in &stationary {
            if t1 <= t0 && t1 != self.t_reached {
                continue;
            }
            for (t_split, _) in [(t0, 0), (t1, 1)] {
                let k = times.partition_point(|&s| s < t_split);
                if k < times.len() && times[k] == t_split {
                    continue;
                }
                if k == 0 {
                    continue;
                }
                times.insert(k, t_split);
                left.insert(k, left[k - 1]);
                right.insert(k, right[k - 1]);
            }
            for k in 0..times.len() {
                if times[k] >= t0 && (times[k] < t1 || (t1 == self.t_reached && times[k] == t1)) {
                    left[k] = ul;
                    right[k] = ur;
                }
            }
        }
        // merge repeated values
        let mut tt = vec![times[0]];
        let mut ll = vec![left[0]];
        let mut rr = vec![right[0]];
        for k in 1..times.len() {
            if left[k] != *ll.last().unwrap() || right[k] != *rr.last().unwrap() {
                tt.push(times[k]);
                ll.push(left[k]);
                rr.push(right[k]);
            }
        }
        Trace { x, times: tt, left: ll, right: rr, horizon: self.t_reached }
    }

    /// The moving front that passes `x` at time `t` and changes the state there from `before` to `after`.
    pub fn crossing(&self, x: f64, t: f64, before: f64, after: f64) -> Option<Segment> {
        let xt = tol::POSITION_EQ * 1f64.max(x.abs());
        let mut fallback = None;
        for s in &self.segments {
            if s.speed == 0.0 || !(s.t0 <= t && t <= s.t_end) || (s.position(t) - x).abs() > xt {
                continue;
            }
            let (b, a) = if s.speed > 0.0 { (s.ur, s.ul) } else { (s.ul, s.ur) };
            if b == before && a == after {
                return Some(*s);
            }
            if s.t_end > t {
                fallback = fallback.or(Some(*s));
            }
        }
        fallback
    }

    /// `∫ (u - reference) dx` at time `t`.
    pub fn mass(&self, t: f64, reference: f64) -> Result<f64> {
        self.snapshot(t).mass(reference)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traffic_scenario(coeff: SpatialCoeff, initial: Profile, t: f64) -> Scenario {
        Scenario::new(FluxCurve::greenshields(), coeff, initial, 1e-2, t).unwrap()
    }

    #[test]
    fn constant_data_has_no_fronts() {
        let s = traffic_scenario(SpatialCoeff::constant(1.0), Profile::constant(0.3), 1.0);
        assert!(FrontSet::initialize(&s).unwrap().fronts().is_empty());
    }

    #[test]
    fn single_shock_moves_linearly() {
        let s = traffic_scenario(SpatialCoeff::constant(1.0), Profile::riemann(1.0 / 3.0, 5.0 / 6.0, 0.0), 3.0);
        let h = s.run().unwrap();
        let fr = h.fronts_at(3.0);
        assert_eq!(fr.len(), 1);
        assert!((fr[0].1.speed + 1.0 / 6.0).abs() < 1e-15);
        assert!((fr[0].0 + 0.5).abs() < 1e-14);
    }

    #[test]
    fn obstruction_census_on_constant_data() {
        let k = SpatialCoeff::new(vec![0.0, 1.0], vec![1.0, 5.0 / 9.0, 1.0]).unwrap();
        let s = traffic_scenario(k, Profile::constant(1.0 / 3.0), 0.0);
        let fr = FrontSet::initialize(&s).unwrap().fronts();
        let at0: Vec<_> = fr.iter().filter(|f| f.x0 == 0.0).collect();
        let at1: Vec<_> = fr.iter().filter(|f| f.x0 == 1.0).collect();
        // demand 2/9 exceeds the obstructed capacity 5/36, so a shock is reflected
        assert_eq!(at0[0].kind, FrontKind::Shock);
        assert!((at0[0].speed + 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(at0[1].kind, FrontKind::KFront);
        assert!(at0[2..].iter().all(|f| f.kind == FrontKind::RarefactionStep));
        assert!(at0.len() > 3);
        assert_eq!(at1.len(), 2);
        assert_eq!(at1[0].kind, FrontKind::KFront);
        assert_eq!(at1[1].kind, FrontKind::Shock);
    }

    #[test]
    fn snapshot_at_zero_is_initial_data() {
        let init = Profile::new(vec![-1.0, 0.5, 2.0], vec![0.1, 0.7, 0.2, 0.1], 0.0).unwrap();
        let s = traffic_scenario(SpatialCoeff::constant(1.0), init.clone(), 1.0);
        let h = s.run().unwrap();
        assert_eq!(h.snapshot(0.0).breakpoints, init.breakpoints);
        assert_eq!(h.snapshot(0.0).values, init.values);
    }

    #[test]
    fn mass_is_conserved() {
        let init = Profile::new(vec![-1.0, 0.5, 2.0], vec![0.0, 0.9, 0.3, 0.0], 0.0).unwrap();
        let k = SpatialCoeff::new(vec![0.0, 1.5], vec![1.0, 0.4, 0.8]).unwrap();
        let s = traffic_scenario(k, init.clone(), 6.0);
        let h = s.run().unwrap();
        let m0 = init.mass(0.0).unwrap();
        for t in [0.5, 1.0, 2.5, 6.0] {
            assert!((h.mass(t, 0.0).unwrap() - m0).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn trace_reports_both_limits_at_a_stationary_jump() {
        let k = SpatialCoeff::new(vec![0.0], vec![1.0, 0.5]).unwrap();
        let s = traffic_scenario(k, Profile::constant(1.0 / 3.0), 1.0);
        let h = s.run().unwrap();
        let tr = h.trace(0.0);
        let vpp = (1.0 + 0.5f64.sqrt()) / 2.0;
        assert!((tr.left_at(0.5) - vpp).abs() < 1e-14);
        assert_eq!(tr.right_at(0.5), 0.5);
    }
}
