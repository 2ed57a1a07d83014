//! Observation oracles over a finished simulation: full observability, or
//! everything outside a masked window `(a, b)`.

use crate::error::{Error, Result};
use crate::fronttrack::{FrontKind, History, Profile, Scenario, Trace};
use crate::tol;

/// What the observer is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Full,
    Partial { a: f64, b: f64 },
}

/// How a wave reached a probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalKind {
    Shock,
    RarefactionEdge,
}

/// A wave crossing a probe position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveArrival {
    pub x: f64,
    pub time: f64,
    /// State at the probe just before and just after the crossing.
    pub before: f64,
    pub after: f64,
    /// States on the left and right of the wave itself.
    pub left: f64,
    pub right: f64,
    /// Speed measured by differencing the wave position in two snapshots.
    pub speed: f64,
    pub kind: ArrivalKind,
}

/// Profile restricted to the observable part of the line.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedProfile {
    pub a: f64,
    pub b: f64,
    /// Valid for `x <= a` (right limit at `a` withheld).
    pub left: Profile,
    /// Valid for `x >= b` (left limit at `b` withheld).
    pub right: Profile,
}

/// Read-only view over a completed simulation.
#[derive(Debug, Clone)]
pub struct Observer {
    history: History,
    mode: Mode,
    horizon: f64,
    delta: f64,
}

impl Observer {
    pub fn new(history: History, mode: Mode, delta: f64) -> Result<Self> {
        if let Mode::Partial { a, b } = mode {
            if !(a < b) {
                return Err(Error::Input(format!("mask needs a < b, got ({a}, {b})")));
            }
        }
        let horizon = history.t_reached;
        Ok(Observer { history, mode, horizon, delta })
    }

    /// Runs the scenario to its horizon and wraps the result.
    pub fn simulate(s: &Scenario, mode: Mode) -> Result<Self> {
        Self::new(s.run()?, mode, s.delta)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Rarefaction step width of the underlying simulation.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Time of the first wave interaction, if any occurred before the horizon.
    pub fn first_interaction(&self) -> Option<f64> {
        self.history.first_event
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < 0.0 || t > self.horizon {
            return Err(Error::Input(format!("time {t} outside [0, {}]", self.horizon)));
        }
        Ok(())
    }

    fn check_position(&self, x: f64) -> Result<()> {
        if let Mode::Partial { a, b } = self.mode {
            if x > a && x < b {
                return Err(Error::AccessViolation { x, a, b });
            }
        }
        Ok(())
    }

    /// Full snapshot; refused in partial mode.
    pub fn snapshot(&self, t: f64) -> Result<Profile> {
        self.check_time(t)?;
        if let Mode::Partial { a, b } = self.mode {
            return Err(Error::AccessViolation { x: 0.5 * (a + b), a, b });
        }
        Ok(self.history.snapshot(t))
    }

    /// Snapshot with the window withheld (works in either mode).
    pub fn snapshot_outside(&self, t: f64, a: f64, b: f64) -> Result<MaskedProfile> {
        self.check_time(t)?;
        let (a, b) = match self.mode {
            Mode::Partial { a: ma, b: mb } => (a.min(ma), b.max(mb)),
            Mode::Full => (a, b),
        };
        let p = self.history.snapshot(t);
        let mut lb = Vec::new();
        let mut lv = vec![p.values[0]];
        let mut rb = Vec::new();
        let mut rv = Vec::new();
        for (x, ul, ur) in p.jumps() {
            if x <= a {
                lb.push(x);
                lv.push(ur);
            } else if x >= b {
                if rv.is_empty() {
                    rv.push(ul);
                }
                rb.push(x);
                rv.push(ur);
            }
        }
        if rv.is_empty() {
            rv.push(p.value_right(b));
        }
        Ok(MaskedProfile {
            a,
            b,
            left: Profile { breakpoints: lb, values: lv, time: t },
            right: Profile { breakpoints: rb, values: rv, time: t },
        })
    }

    /// One-sided value `u(t, x+)`.
    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        self.check_position(x)?;
        self.check_time(t)?;
        Ok(self.history.snapshot(t).value_right(x))
    }

    /// Exact trace of both one-sided limits at `x`.
    pub fn trace(&self, x: f64) -> Result<Trace> {
        self.check_position(x)?;
        Ok(self.history.trace(x))
    }

    /// Positions where `u` jumps with identical one-sided states at `t1` and `t2`.
    pub fn detect_stationary_jumps(&self, t1: f64, t2: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if !(0.0 < t1 && t1 < t2) {
            return Err(Error::Input(format!("need 0 < t1 < t2, got {t1}, {t2}")));
        }
        self.check_time(t2)?;
        if let Mode::Partial { a, b } = self.mode {
            if lo < b && hi > a {
                return Err(Error::AccessViolation { x: lo.max(a), a, b });
            }
        }
        let p1 = self.history.snapshot(t1);
        let p2 = self.history.snapshot(t2);
        let j2: Vec<(f64, f64, f64)> = p2.jumps().collect();
        let mut out = Vec::new();
        for (x, ul, ur) in p1.jumps() {
            if x < lo || x > hi {
                continue;
            }
            let tolx = tol::POSITION_EQ * 1f64.max(x.abs());
            let i = j2.partition_point(|j| j.0 < x - tolx);
            if let Some(&(x2, ul2, ur2)) = j2.get(i) {
                if (x2 - x).abs() <= tolx
                    && (ul2 - ul).abs() <= tol::STATE_EQ
                    && (ur2 - ur).abs() <= tol::STATE_EQ
                    && (ur - ul).abs() > tol::STATE_EQ
                {
                    out.push(x);
                }
            }
        }
        Ok(out)
    }

    /// First time after `t0` at which `pred` holds for `u(t, x+)` having failed just before.
    pub fn first_arrival<P: Fn(f64) -> bool>(&self, x: f64, t0: f64, pred: P) -> Result<WaveArrival> {
        let tr = self.trace(x)?;
        let mut held = pred(tr.right_at(t0));
        for i in 0..tr.times.len() {
            let t = tr.times[i];
            if t <= t0 {
                continue;
            }
            let now = pred(tr.right[i]);
            if now && !held {
                return self.describe_arrival(&tr, i);
            }
            held = now;
        }
        Err(Error::NotFound(format!("no arrival at x={x} after t={t0} up to t={}", self.horizon)))
    }

    /// Every change of the trace at `x` after `t0`, described as arrivals.
    pub fn arrivals(&self, x: f64, t0: f64) -> Result<Vec<WaveArrival>> {
        let tr = self.trace(x)?;
        let mut out = Vec::new();
        for i in 1..tr.times.len() {
            if tr.times[i] > t0 {
                out.push(self.describe_arrival(&tr, i)?);
            }
        }
        Ok(out)
    }

    fn describe_arrival(&self, tr: &Trace, i: usize) -> Result<WaveArrival> {
        let t = tr.times[i];
        let before = tr.right[i - 1];
        let after = tr.right[i];
        let seg = self
            .history
            .crossing(tr.x, t, before, after)
            .ok_or_else(|| Error::InconsistentObservation(format!("no front crosses x={} at t={t}", tr.x)))?;
        let (left, right) = if seg.speed > 0.0 { (after, before) } else { (before, after) };
        let kind = match seg.kind {
            FrontKind::RarefactionStep => ArrivalKind::RarefactionEdge,
            _ => ArrivalKind::Shock,
        };
        let speed = self.measure_speed(tr.x, t, left, right)?;
        Ok(WaveArrival { x: tr.x, time: t, before, after, left, right, speed, kind })
    }

    /// Differences the position of the jump `(left | right)` near `x` in two snapshots.
    fn measure_speed(&self, x: f64, t: f64, left: f64, right: f64) -> Result<f64> {
        let locate = |s: f64| -> Option<f64> {
            let p = self.history.snapshot(s);
            p.jumps()
                .filter(|j| (j.1 - left).abs() <= tol::STATE_EQ && (j.2 - right).abs() <= tol::STATE_EQ)
                .map(|j| j.0)
                .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
        };
        let scale = 1f64.max(self.horizon);
        for h in [1e-6, 1e-8, 1e-10] {
            let h = h * scale;
            let (t1, t2) = if t + 2.0 * h <= self.horizon { (t + h, t + 2.0 * h) } else { (t - 2.0 * h, t - h) };
            if t1 < 0.0 {
                continue;
            }
            if let (Some(p1), Some(p2)) = (locate(t1), locate(t2)) {
                let hidden = |p: f64| matches!(self.mode, Mode::Partial { a, b } if p > a && p < b);
                if hidden(p1) || hidden(p2) {
                    continue;
                }
                return Ok((p2 - p1) / (t2 - t1));
            }
        }
        Err(Error::InconsistentObservation(format!(
            "cannot follow the wave ({left} | {right}) near x={x}, t={t}"
        )))
    }
}

/// Which one-sided limit of a trace to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// `∫_{t0}^{t1} |p(t) - q(t)| dt` for two exact traces, on the chosen side.
pub fn trace_l1(p: &Trace, q: &Trace, t0: f64, t1: f64, side: Side) -> f64 {
    let mut cuts: Vec<f64> = p.times.iter().chain(q.times.iter()).copied().filter(|&t| t > t0 && t < t1).collect();
    cuts.push(t0);
    cuts.push(t1);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let value = |tr: &Trace, t: f64| match side {
        Side::Left => tr.left_at(t),
        Side::Right => tr.right_at(t),
    };
    cuts.windows(2).map(|w| (w[1] - w[0]) * (value(p, w[0]) - value(q, w[0])).abs()).sum()
}

/// Largest pointwise difference of two traces on `[t0, t1)`.
pub fn trace_sup(p: &Trace, q: &Trace, t0: f64, t1: f64, side: Side) -> f64 {
    let mut cuts: Vec<f64> = p.times.iter().chain(q.times.iter()).copied().filter(|&t| t > t0 && t < t1).collect();
    cuts.push(t0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let value = |tr: &Trace, t: f64| match side {
        Side::Left => tr.left_at(t),
        Side::Right => tr.right_at(t),
    };
    cuts.iter().map(|&t| (value(p, t) - value(q, t)).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluxlib::{FluxCurve, SpatialCoeff};

    #[test]
    fn trace_distance_of_shifted_steps() {
        let p = Trace { x: 0.0, times: vec![0.0, 1.0], left: vec![0.0, 1.0], right: vec![0.0, 1.0], horizon: 3.0 };
        let q = Trace { x: 0.0, times: vec![0.0, 1.5], left: vec![0.0, 1.0], right: vec![0.0, 1.0], horizon: 3.0 };
        assert!((trace_l1(&p, &q, 0.0, 3.0, Side::Right) - 0.5).abs() < 1e-15);
        assert_eq!(trace_l1(&p, &p, 0.0, 3.0, Side::Left), 0.0);
        assert_eq!(trace_sup(&p, &q, 0.0, 3.0, Side::Left), 1.0);
        assert_eq!(trace_sup(&p, &q, 1.5, 3.0, Side::Left), 0.0);
    }

    fn accident() -> Observer {
        let k = SpatialCoeff::new(vec![1.0 / 12.0, 1.67], vec![1.0, 5.0 / 9.0, 1.0]).unwrap();
        let s = Scenario::new(FluxCurve::greenshields(), k, Profile::constant(1.0 / 3.0), 1e-3, 1.0).unwrap();
        Observer::simulate(&s, Mode::Partial { a: 0.0, b: 2.0 }).unwrap()
    }

    #[test]
    fn masked_queries_are_refused() {
        let o = accident();
        assert!(matches!(o.trace(1.0), Err(Error::AccessViolation { .. })));
        assert!(matches!(o.value(0.5, 1.0), Err(Error::AccessViolation { .. })));
        assert!(o.snapshot(0.5).is_err());
        assert!(o.trace(0.0).is_ok());
    }

    #[test]
    fn reflected_shock_arrives_at_left_probe() {
        let o = accident();
        let um = 0.5;
        let arr = o.first_arrival(0.0, 0.0, |u| u > um).unwrap();
        assert!((arr.time - 0.5).abs() < 1e-12);
        assert!((arr.left - 1.0 / 3.0).abs() < 1e-14);
        assert!((arr.right - 5.0 / 6.0).abs() < 1e-14);
        assert!((arr.speed + 1.0 / 6.0).abs() < 1e-9);
        assert_eq!(arr.kind, ArrivalKind::Shock);
    }

    #[test]
    fn constant_solution_has_no_arrival() {
        let s = Scenario::new(FluxCurve::greenshields(), SpatialCoeff::constant(1.0), Profile::constant(0.2), 1e-2, 1.0)
            .unwrap();
        let o = Observer::simulate(&s, Mode::Full).unwrap();
        assert!(matches!(o.first_arrival(0.0, 0.0, |u| u > 0.5), Err(Error::NotFound(_))));
    }

    #[test]
    fn stationary_jumps_found_at_breakpoints() {
        let k = SpatialCoeff::new(vec![0.3], vec![1.0, 0.7]).unwrap();
        let init = Profile::new(vec![-1.0, 2.0], vec![0.0, 1.0 / 3.0, 0.0], 0.0).unwrap();
        let s = Scenario::new(FluxCurve::greenshields(), k, init, 1e-2, 0.2).unwrap();
        let o = Observer::simulate(&s, Mode::Full).unwrap();
        assert_eq!(o.detect_stationary_jumps(0.05, 0.1, 0.0, 1.0).unwrap(), vec![0.3]);
    }
}
