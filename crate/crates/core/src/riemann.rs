//! Riemann solvers: homogeneous (single `k`) for general fluxes and the
//! two-coefficient solver with the smallest-jump admissibility rule.

use crate::error::{Error, Result};
use crate::fluxlib::{Branch, EnvPiece, EnvelopeKind, FluxCurve, FluxKind};
use crate::numeric::bisect_exact;
use crate::tol;

/// One elementary wave of a self-similar Riemann solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wave {
    Shock { ul: f64, ur: f64, k: f64, speed: f64 },
    /// Centred fan along a contact arc; speeds run from `k f'(ul)` to `k f'(ur)`.
    Rarefaction { ul: f64, ur: f64, k: f64 },
    /// Stationary jump where `k` changes.
    KWave { kl: f64, kr: f64, ul: f64, ur: f64 },
}

impl Wave {
    pub fn left_state(&self) -> f64 {
        match *self {
            Wave::Shock { ul, .. } | Wave::Rarefaction { ul, .. } | Wave::KWave { ul, .. } => ul,
        }
    }

    pub fn right_state(&self) -> f64 {
        match *self {
            Wave::Shock { ur, .. } | Wave::Rarefaction { ur, .. } | Wave::KWave { ur, .. } => ur,
        }
    }

    pub fn left_k(&self) -> f64 {
        match *self {
            Wave::Shock { k, .. } | Wave::Rarefaction { k, .. } => k,
            Wave::KWave { kl, .. } => kl,
        }
    }

    pub fn right_k(&self) -> f64 {
        match *self {
            Wave::Shock { k, .. } | Wave::Rarefaction { k, .. } => k,
            Wave::KWave { kr, .. } => kr,
        }
    }

    /// Slowest and fastest speed carried by the wave.
    pub fn speed_range(&self, f: &FluxCurve) -> (f64, f64) {
        match *self {
            Wave::Shock { speed, .. } => (speed, speed),
            Wave::Rarefaction { ul, ur, k } => (k * f.deriv(ul), k * f.deriv(ur)),
            Wave::KWave { .. } => (0.0, 0.0),
        }
    }
}

/// Self-similar solution of a Riemann problem, waves ordered left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFan {
    pub ul: f64,
    pub kl: f64,
    pub ur: f64,
    pub kr: f64,
    pub waves: Vec<Wave>,
}

impl WaveFan {
    fn empty(u: f64, k: f64) -> Self {
        WaveFan { ul: u, kl: k, ur: u, kr: k, waves: Vec::new() }
    }

    fn push(&mut self, w: Wave) {
        let keep = match w {
            Wave::KWave { .. } => true,
            _ => (w.right_state() - w.left_state()).abs() >= tol::ZERO_WAVE,
        };
        if keep {
            self.waves.push(w);
        }
    }

    fn extend(&mut self, other: WaveFan) {
        for w in other.waves {
            self.push(w);
        }
    }

    /// State and coefficient at `x / t = xi`, taking the right limit at a jump.
    pub fn sample(&self, f: &FluxCurve, xi: f64) -> (f64, f64) {
        let mut u = self.ul;
        let mut k = self.kl;
        for w in &self.waves {
            let (s0, s1) = w.speed_range(f);
            if xi < s0 {
                return (u, k);
            }
            if let Wave::Rarefaction { ul, ur, k: kw } = *w {
                if xi < s1 {
                    return (rarefaction_state(f, kw, ul, ur, xi), kw);
                }
            }
            u = w.right_state();
            k = w.right_k();
        }
        (u, k)
    }

    /// Flux `k f(u)` just right of `x = 0`.
    pub fn flux_at_origin(&self, f: &FluxCurve) -> f64 {
        let (u, k) = self.sample(f, 0.0);
        k * f.eval(u)
    }

    /// Checks chaining, speed ordering and the jump conditions; returns the first violation.
    pub fn validate(&self, f: &FluxCurve) -> std::result::Result<(), String> {
        let mut u = self.ul;
        let mut k = self.kl;
        let mut last_speed = f64::NEG_INFINITY;
        for (i, w) in self.waves.iter().enumerate() {
            if w.left_state() != u || w.left_k() != k {
                return Err(format!("wave {i} does not chain: expected ({u}, {k}), got {w:?}"));
            }
            let (s0, s1) = w.speed_range(f);
            let slack = 1e-12 * (1.0 + s0.abs());
            if s0 < last_speed - slack || s1 < s0 - slack {
                return Err(format!("wave {i} breaks speed ordering ({s0}, {s1} after {last_speed})"));
            }
            match *w {
                Wave::Shock { ul, ur, k, speed } => {
                    let r = speed * (ur - ul) - k * (f.eval(ur) - f.eval(ul));
                    if r.abs() > 1e-12 {
                        return Err(format!("wave {i} violates Rankine-Hugoniot by {r:e}"));
                    }
                }
                Wave::KWave { kl, kr, ul, ur } => {
                    let r = kl * f.eval(ul) - kr * f.eval(ur);
                    if r.abs() > 1e-12 {
                        return Err(format!("stationary wave {i} violates flux continuity by {r:e}"));
                    }
                }
                Wave::Rarefaction { .. } => {}
            }
            last_speed = s1;
            u = w.right_state();
            k = w.right_k();
        }
        if u != self.ur || k != self.kr {
            return Err(format!("fan ends at ({u}, {k}) instead of ({}, {})", self.ur, self.kr));
        }
        Ok(())
    }
}

/// State inside a rarefaction where `k f'(u) = xi`.
pub fn rarefaction_state(f: &FluxCurve, k: f64, ul: f64, ur: f64, xi: f64) -> f64 {
    if let Some(c) = f.quadratic_coefficient() {
        let u = 0.5 * (f.lo() + f.hi() - xi / (k * c));
        return u.clamp(ul.min(ur), ul.max(ur));
    }
    let (s0, s1) = (k * f.deriv(ul), k * f.deriv(ur));
    if xi <= s0 {
        return ul;
    }
    if xi >= s1 {
        return ur;
    }
    bisect_exact(|u| k * f.deriv(u) - xi, ul, ur).unwrap_or(0.5 * (ul + ur))
}

/// Entropy solution with a single coefficient `k`.
pub fn solve_homogeneous(f: &FluxCurve, k: f64, ul: f64, ur: f64) -> WaveFan {
    if (ur - ul).abs() < tol::ZERO_WAVE {
        return WaveFan::empty(ul, k);
    }
    let mut fan = WaveFan { ul, kl: k, ur, kr: k, waves: Vec::new() };
    if f.kind() == FluxKind::ConcaveH1 {
        if ul < ur {
            fan.push(Wave::Shock { ul, ur, k, speed: k * f.chord(ul, ur) });
        } else {
            fan.push(Wave::Rarefaction { ul, ur, k });
        }
        return fan;
    }
    let (lo, hi, kind) = if ul < ur {
        (ul, ur, EnvelopeKind::ConvexBelow)
    } else {
        (ur, ul, EnvelopeKind::ConcaveAbove)
    };
    let env = f.envelope(lo, hi, kind).expect("nondegenerate interval");
    let mut pieces = env.pieces.clone();
    if ul > ur {
        pieces.reverse();
    }
    for p in pieces {
        let (a, b) = p.bounds();
        let (wl, wr) = if ul < ur { (a, b) } else { (b, a) };
        match p {
            EnvPiece::Affine { slope, .. } => fan.push(Wave::Shock { ul: wl, ur: wr, k, speed: k * slope }),
            EnvPiece::Contact { .. } => fan.push(Wave::Rarefaction { ul: wl, ur: wr, k }),
        }
    }
    fan
}

/// Which side's state is given to [`stationary_pairs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GivenSide {
    Left,
    Right,
}

/// All partner states across a stationary jump from `k_left` to `k_right`.
pub fn stationary_pairs(
    f: &FluxCurve,
    k_left: f64,
    k_right: f64,
    u: f64,
    side: GivenSide,
) -> Result<Vec<(f64, Branch)>> {
    let fmax = f.max_value()?;
    let (level, k_other) = match side {
        GivenSide::Left => (k_left * f.eval(u), k_right),
        GivenSide::Right => (k_right * f.eval(u), k_left),
    };
    let y = level / k_other;
    if y > fmax * (1.0 + tol::ROOT) {
        return Ok(Vec::new());
    }
    let a = f.branch_inverse(y, Branch::Increasing)?;
    let b = f.branch_inverse(y, Branch::Decreasing)?;
    if a == b {
        return Ok(vec![(a, Branch::Increasing)]);
    }
    Ok(vec![(a, Branch::Increasing), (b, Branch::Decreasing)])
}

fn tie_scale(a: f64, b: f64) -> f64 {
    tol::CASE * 1f64.max(a.abs()).max(b.abs())
}

/// `a < b`, with near-ties counted as true.
fn lt_or_tie(a: f64, b: f64) -> bool {
    a < b + tie_scale(a, b)
}

/// `a > b`, with near-ties counted as true.
fn gt_or_tie(a: f64, b: f64) -> bool {
    a > b - tie_scale(a, b)
}

/// Solution of the Riemann problem with a coefficient jump at the origin.
pub fn solve_two_k(f: &FluxCurve, kl: f64, ul: f64, kr: f64, ur: f64) -> Result<WaveFan> {
    if kl == kr {
        return Ok(solve_homogeneous(f, kl, ul, ur));
    }
    if !(kl > 0.0 && kr > 0.0) {
        return Err(Error::Input(format!("coefficients must be positive, got {kl} and {kr}")));
    }
    let um = f.maximizer()?;
    let fmax = f.max_value()?;
    let lvl_l = kl * f.eval(ul);
    let lvl_r = kr * f.eval(ur);
    let inv = |level: f64, k: f64, br: Branch| f.branch_inverse((level / k).min(fmax), br);
    let mut fan = WaveFan { ul, kl, ur, kr, waves: Vec::new() };

    if kl < kr {
        if lt_or_tie(ul, um) {
            if lt_or_tie(ur, um) || lt_or_tie(lvl_l, lvl_r) {
                let v = inv(lvl_l, kr, Branch::Increasing)?;
                fan.push(Wave::KWave { kl, kr, ul, ur: v });
                fan.extend(solve_homogeneous(f, kr, v, ur));
            } else {
                let w = inv(lvl_r, kl, Branch::Decreasing)?;
                fan.push(Wave::Shock { ul, ur: w, k: kl, speed: kl * f.chord(ul, w) });
                fan.push(Wave::KWave { kl, kr, ul: w, ur });
            }
        } else if lt_or_tie(ur, um) || gt_or_tie(lvl_r, kl * fmax) {
            let vp = inv(kl * fmax, kr, Branch::Increasing)?;
            fan.push(Wave::Rarefaction { ul, ur: um, k: kl });
            fan.push(Wave::KWave { kl, kr, ul: um, ur: vp });
            fan.extend(solve_homogeneous(f, kr, vp, ur));
        } else {
            let wp = inv(lvl_r, kl, Branch::Decreasing)?;
            fan.extend(solve_homogeneous(f, kl, ul, wp));
            fan.push(Wave::KWave { kl, kr, ul: wp, ur });
        }
    } else if lt_or_tie(ur, um) {
        if gt_or_tie(ul, um) || gt_or_tie(lvl_l, kr * fmax) {
            let vpp = inv(kr * fmax, kl, Branch::Decreasing)?;
            fan.extend(solve_homogeneous(f, kl, ul, vpp));
            fan.push(Wave::KWave { kl, kr, ul: vpp, ur: um });
            fan.extend(solve_homogeneous(f, kr, um, ur));
        } else {
            let wpp = inv(lvl_l, kr, Branch::Increasing)?;
            fan.push(Wave::KWave { kl, kr, ul, ur: wpp });
            fan.extend(solve_homogeneous(f, kr, wpp, ur));
        }
    } else if gt_or_tie(ul, um) || gt_or_tie(lvl_l, lvl_r) {
        let vppp = inv(lvl_r, kl, Branch::Decreasing)?;
        fan.extend(solve_homogeneous(f, kl, ul, vppp));
        fan.push(Wave::KWave { kl, kr, ul: vppp, ur });
    } else {
        let wppp = inv(lvl_l, kr, Branch::Increasing)?;
        fan.push(Wave::KWave { kl, kr, ul, ur: wppp });
        fan.push(Wave::Shock { ul: wppp, ur, k: kr, speed: kr * f.chord(wppp, ur) });
    }
    fan.waves.retain(|w| match w {
        Wave::KWave { .. } => true,
        _ => (w.right_state() - w.left_state()).abs() >= tol::ZERO_WAVE,
    });
    Ok(fan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traffic() -> FluxCurve {
        FluxCurve::greenshields()
    }

    #[test]
    fn homogeneous_shock_speed() {
        let fan = solve_homogeneous(&traffic(), 1.0, 1.0 / 3.0, 5.0 / 6.0);
        assert_eq!(fan.waves.len(), 1);
        match fan.waves[0] {
            Wave::Shock { speed, .. } => assert!((speed + 1.0 / 6.0).abs() < 1e-15),
            _ => panic!("expected a shock"),
        }
        assert!(solve_homogeneous(&traffic(), 1.0, 0.4, 0.4).waves.is_empty());
    }

    #[test]
    fn stationary_pair_examples() {
        let f = traffic();
        let p = stationary_pairs(&f, 5.0 / 9.0, 1.0, 0.5, GivenSide::Left).unwrap();
        assert_eq!(p.len(), 2);
        assert!((p[0].0 - 1.0 / 6.0).abs() < 1e-14 && (p[1].0 - 5.0 / 6.0).abs() < 1e-14);
        let same = stationary_pairs(&f, 1.0, 1.0, 0.2, GivenSide::Left).unwrap();
        assert!((same[0].0 - 0.2).abs() < 1e-14 && (same[1].0 - 0.8).abs() < 1e-14);
        assert!(stationary_pairs(&f, 1.0, 5.0 / 9.0, 0.5, GivenSide::Left).unwrap().is_empty());
    }

    #[test]
    fn reflected_shock_when_demand_exceeds_downstream_capacity() {
        let f = traffic();
        let fan = solve_two_k(&f, 1.0, 1.0 / 3.0, 0.5, 1.0 / 3.0).unwrap();
        fan.validate(&f).unwrap();
        let vpp = (1.0 + 0.5f64.sqrt()) / 2.0;
        assert_eq!(fan.waves.len(), 3);
        match fan.waves[0] {
            Wave::Shock { ur, speed, .. } => {
                assert!((ur - vpp).abs() < 1e-14);
                // oracle: RH speed from the closed-form state
                let s = (vpp * (1.0 - vpp) - 2.0 / 9.0) / (vpp - 1.0 / 3.0);
                assert!((speed - s).abs() < 1e-14);
                assert!((speed + 0.18689).abs() < 5e-6);
            }
            w => panic!("expected shock, got {w:?}"),
        }
        assert!(matches!(fan.waves[1], Wave::KWave { ur, .. } if ur == 0.5));
        assert!(matches!(fan.waves[2], Wave::Rarefaction { ul, ur, .. } if ul == 0.5 && ur == 1.0 / 3.0));
    }

    #[test]
    fn transmitted_stationary_jump_then_forward_shock() {
        let f = traffic();
        let fan = solve_two_k(&f, 5.0 / 9.0, 1.0 / 3.0, 1.0, 1.0 / 3.0).unwrap();
        fan.validate(&f).unwrap();
        let v = (1.0 - 41f64.sqrt() / 9.0) / 2.0;
        assert_eq!(fan.waves.len(), 2);
        assert!(matches!(fan.waves[0], Wave::KWave { ur, .. } if (ur - v).abs() < 1e-14));
        assert!(matches!(fan.waves[1], Wave::Shock { speed, .. } if speed > 0.0));
    }

    #[test]
    fn equal_data_gives_empty_fan() {
        let fan = solve_two_k(&traffic(), 1.0, 0.5, 1.0, 0.5).unwrap();
        assert!(fan.waves.is_empty());
    }

    #[test]
    fn sampling_is_self_similar() {
        let f = traffic();
        let fan = solve_two_k(&f, 1.0, 0.9, 0.6, 0.1).unwrap();
        for i in -40..=40 {
            let xi = i as f64 / 20.0;
            assert_eq!(fan.sample(&f, xi), fan.sample(&f, (2.0 * xi) / 2.0));
        }
    }

    #[test]
    fn composite_wave_for_inflected_flux() {
        // concave on [0, 1/2], convex on [1/2, 1]
        let f = FluxCurve::polynomial(vec![0.0, 1.0, -1.5, 1.0], 0.0, 1.0).unwrap();
        let fan = solve_homogeneous(&f, 1.0, 0.0, 1.0);
        fan.validate(&f).unwrap();
        assert_eq!(fan.waves.len(), 2);
        assert!(matches!(fan.waves[0], Wave::Shock { .. }));
        assert!(matches!(fan.waves[1], Wave::Rarefaction { .. }));
    }
}
