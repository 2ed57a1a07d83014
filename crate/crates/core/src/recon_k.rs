//! Exact recovery of a piecewise-constant coefficient on a compact interval
//! from two early snapshots of a single fully observed probe solution.

use crate::error::{Error, Result};
use crate::fluxlib::{FluxCurve, SpatialCoeff};
use crate::fronttrack::{Profile, Scenario};
use crate::observe::{Mode, Observer};
use crate::tol;

/// Probe datum: `ũ` on `I = (min J - λT, max J + λT)`, `u₁` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeDesign {
    pub j_lo: f64,
    pub j_hi: f64,
    pub horizon: f64,
    pub u_tilde: f64,
    pub lambda: f64,
    pub i_lo: f64,
    pub i_hi: f64,
}

impl ProbeDesign {
    pub fn initial_data(&self, f: &FluxCurve) -> Result<Profile> {
        Profile::plateau(f.lo(), self.u_tilde, self.i_lo, self.i_hi)
    }
}

/// Builds the probe. `k_bound` is an upper bound for `k` (the wave-speed margin is `k_bound · max|f'|`);
/// `u_tilde` defaults to the midpoint of `(u₁, u^m)`.
pub fn design_probe(
    f: &FluxCurve,
    j_lo: f64,
    j_hi: f64,
    horizon: f64,
    u_tilde: Option<f64>,
    k_bound: f64,
) -> Result<ProbeDesign> {
    let um = f.maximizer()?;
    let u_tilde = u_tilde.unwrap_or(0.5 * (f.lo() + um));
    if !(u_tilde > f.lo() && u_tilde < um) {
        return Err(Error::Input(format!("probe state must lie in ({}, {um}), got {u_tilde}", f.lo())));
    }
    if !(j_hi >= j_lo) || !(horizon > 0.0) || !(k_bound > 0.0) {
        return Err(Error::Input("probe needs J nonempty, T > 0 and a positive k bound".into()));
    }
    let lambda = k_bound * f.deriv(f.lo()).abs().max(f.deriv(f.hi()).abs());
    Ok(ProbeDesign {
        j_lo,
        j_hi,
        horizon,
        u_tilde,
        lambda,
        i_lo: j_lo - lambda * horizon,
        i_hi: j_hi + lambda * horizon,
    })
}

/// Half the first interaction time, capped at `T`.
pub fn choose_pre_interaction_time(o: &Observer, horizon: f64) -> f64 {
    match o.first_interaction() {
        Some(t) => (0.5 * t).min(horizon),
        None => horizon,
    }
}

/// Solves `κ_{α-1} f(u(τ', x_α-)) = κ_α f(u(τ', x_α+))` right to left from `κ_M`.
/// Returns the values `κ_0..κ_M` and the flux-continuity residual at each jump.
pub fn recover_kappa_chain(o: &Observer, f: &FluxCurve, jumps: &[f64], tau: f64, kappa_m: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let snap = o.snapshot(tau)?;
    let mut kappa = vec![0.0; jumps.len() + 1];
    kappa[jumps.len()] = kappa_m;
    let floor = 1e-12 * f.max_value()?;
    let mut residuals = vec![0.0; jumps.len()];
    for (i, &x) in jumps.iter().enumerate().rev() {
        let fl = f.eval(snap.value_left(x));
        let fr = f.eval(snap.value_right(x));
        if fl <= floor || fr <= floor {
            return Err(Error::InconsistentObservation(format!(
                "vanishing flux next to the stationary jump at x={x}; the probe state must stay above u1"
            )));
        }
        kappa[i] = kappa[i + 1] * fr / fl;
        residuals[i] = kappa[i] * fl - kappa[i + 1] * fr;
    }
    Ok((kappa, residuals))
}

/// Coefficient just right of `x_s` from the speed of the wave leaving it.
///
/// The wave is the first jump right of `x_s` that has `ũ` on one side (right side
/// if `right_state_is_tilde`, left side otherwise); its speed `σ = (y - x_s)/τ'`
/// and its states give `κ = σ / chord`.
pub fn anchor_last_kappa(
    o: &Observer,
    f: &FluxCurve,
    x_s: f64,
    tau: f64,
    u_tilde: f64,
    right_state_is_tilde: bool,
) -> Result<f64> {
    let snap = o.snapshot(tau)?;
    let tolx = tol::POSITION_EQ * 1f64.max(x_s.abs());
    for (y, ul, ur) in snap.jumps() {
        if y <= x_s + tolx {
            continue;
        }
        let (hit, other) = if right_state_is_tilde {
            ((ur - u_tilde).abs() <= tol::STATE_EQ, ul)
        } else {
            ((ul - u_tilde).abs() <= tol::STATE_EQ, ur)
        };
        if hit {
            let sigma = (y - x_s) / tau;
            return Ok(sigma / f.chord(u_tilde, other));
        }
    }
    Err(Error::InconsistentObservation(format!("no wave leaving x={x_s} is visible at t={tau}")))
}

/// Result of the coefficient reconstruction.
#[derive(Debug, Clone)]
pub struct KReconstruction {
    pub design: ProbeDesign,
    pub tau: f64,
    /// Stationary jumps found in `J`.
    pub jumps: Vec<f64>,
    /// `κ` on each cell of `J`, left to right.
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    pub coeff: SpatialCoeff,
    /// Coefficient on the whole probe interval `I`; it determines the solution on `J × [0, T]`.
    pub on_probe: SpatialCoeff,
}

/// Inverts an already simulated probe observation.
pub fn reconstruct_from_observer(o: &Observer, f: &FluxCurve, design: &ProbeDesign) -> Result<KReconstruction> {
    let tau = choose_pre_interaction_time(o, design.horizon);
    let all = o.detect_stationary_jumps(0.5 * tau, tau, design.i_lo, design.i_hi)?;
    let (anchor, _) = match all.last() {
        Some(&xm) => (anchor_last_kappa(o, f, xm, tau, design.u_tilde, true)?, xm),
        None => (anchor_last_kappa(o, f, design.i_hi, tau, design.u_tilde, false)?, design.i_hi),
    };
    let (kappa, residuals) = recover_kappa_chain(o, f, &all, tau, anchor)?;
    // restrict to J: keep jumps inside J, and the cell values around them
    let first = all.partition_point(|&x| x < design.j_lo);
    let last = all.partition_point(|&x| x <= design.j_hi);
    let jumps = all[first..last].to_vec();
    let values = kappa[first..=last].to_vec();
    let coeff = SpatialCoeff::new_merged(jumps.clone(), values.clone())?;
    let on_probe = SpatialCoeff::new_merged(all.clone(), kappa.clone())?;
    Ok(KReconstruction { design: *design, tau, jumps, values, residuals: residuals[first..last].to_vec(), coeff, on_probe })
}

/// Full pipeline: design the probe, run it against the hidden coefficient, invert.
pub fn reconstruct_k(
    f: &FluxCurve,
    hidden: &SpatialCoeff,
    j_lo: f64,
    j_hi: f64,
    horizon: f64,
    u_tilde: Option<f64>,
    delta: f64,
) -> Result<(KReconstruction, Observer)> {
    let design = design_probe(f, j_lo, j_hi, horizon, u_tilde, hidden.max_value().max(1.0))?;
    let s = Scenario::new(f.clone(), hidden.clone(), design.initial_data(f)?, delta, horizon)?;
    let o = Observer::simulate(&s, Mode::Full)?;
    let r = reconstruct_from_observer(&o, f, &design)?;
    Ok((r, o))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probe_interval_for_traffic_flux() {
        let d = design_probe(&FluxCurve::greenshields(), 0.0, 1.0, 0.1, Some(1.0 / 3.0), 1.0).unwrap();
        assert_eq!(d.lambda, 1.0);
        assert!((d.i_lo + 0.1).abs() < 1e-15 && (d.i_hi - 1.1).abs() < 1e-15);
        assert!(design_probe(&FluxCurve::greenshields(), 0.0, 1.0, 0.1, Some(0.5), 1.0).is_err());
    }

    #[test]
    fn constant_coefficient_recovered() {
        let f = FluxCurve::greenshields();
        let (r, _) = reconstruct_k(&f, &SpatialCoeff::constant(0.7), 0.0, 1.0, 0.2, None, 1e-3).unwrap();
        assert!(r.jumps.is_empty());
        assert!((r.values[0] - 0.7).abs() < 1e-12, "{:?}", r.values);
        assert_eq!(r.tau, 0.2);
    }

    #[test]
    fn single_drop_recovered() {
        let f = FluxCurve::greenshields();
        let k = SpatialCoeff::new(vec![0.3], vec![1.0, 5.0 / 9.0]).unwrap();
        let (r, _) = reconstruct_k(&f, &k, 0.0, 1.0, 0.2, Some(1.0 / 3.0), 1e-3).unwrap();
        assert_eq!(r.jumps, vec![0.3]);
        assert!((r.values[0] - 1.0).abs() < 1e-12 && (r.values[1] - 5.0 / 9.0).abs() < 1e-12, "{:?}", r.values);
        assert!(r.residuals[0].abs() <= 1e-12);
    }

    #[test]
    fn mixed_staircase_recovered() {
        let f = FluxCurve::greenshields();
        let bp = vec![0.1, 0.25, 0.5, 0.7, 0.9];
        let vals = vec![0.8, 1.6, 0.3, 1.1, 1.9, 0.6];
        let k = SpatialCoeff::new(bp.clone(), vals.clone()).unwrap();
        let (r, _) = reconstruct_k(&f, &k, 0.0, 1.0, 0.5, None, 1e-3).unwrap();
        assert_eq!(r.jumps.len(), 5);
        for (a, b) in r.jumps.iter().zip(&bp) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in r.values.iter().zip(&vals) {
            assert!((a - b).abs() < 1e-10, "{:?}", r.values);
        }
        assert!(r.tau < 0.5);
    }

    #[test]
    fn shock_anchor_arithmetic() {
        // ũ = 1/3 with u(y-) = 1/6: chord = (f(1/3) - f(1/6)) / (1/6) = 1/2, so κ = 2σ
        let f = FluxCurve::greenshields();
        assert!((1.0 / f.chord(1.0 / 3.0, 1.0 / 6.0) - 2.0).abs() < 1e-14);
    }
}
