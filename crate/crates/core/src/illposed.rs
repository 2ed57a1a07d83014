//! Coefficients that cannot be told apart from outside `(a, b)`.
//!
//! Every state crossing a staircase of spans `χᵢ` with values `kᵢ` spends a time
//! proportional to `Σ χᵢ/kᵢ` inside it. Rearranging spans or trading length
//! against value while keeping that sum fixed leaves the solution outside the
//! window unchanged for data that start empty on `(a, ∞)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluxlib::{Branch, FluxCurve, SpatialCoeff};
use crate::fronttrack::{Profile, Scenario};
use crate::observe::{trace_l1, trace_sup, Side};

/// `k_o` outside `(start, start + Σχ)`, then spans `(χᵢ, kᵢ)` left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    pub k_o: f64,
    pub start: f64,
    pub spans: Vec<(f64, f64)>,
}

impl Staircase {
    pub fn new(k_o: f64, start: f64, spans: Vec<(f64, f64)>) -> Result<Self> {
        if !(k_o > 0.0) || spans.is_empty() {
            return Err(Error::Input("a staircase needs k_o > 0 and at least one span".into()));
        }
        for &(chi, k) in &spans {
            if !(chi > 0.0) || !(k > 0.0) {
                return Err(Error::Input(format!("span ({chi}, {k}) must have positive length and value")));
            }
        }
        Ok(Staircase { k_o, start, spans })
    }

    pub fn length(&self) -> f64 {
        self.spans.iter().map(|s| s.0).sum()
    }

    pub fn end(&self) -> f64 {
        self.start + self.length()
    }

    /// `Σ χᵢ/kᵢ`.
    pub fn transit_sum(&self) -> f64 {
        self.spans.iter().map(|&(chi, k)| chi / k).sum()
    }

    /// `Σ χᵢ/kᵢ + (b - a - Σ χᵢ)/k_o`, the transit weight of the whole window.
    pub fn window_transit(&self, a: f64, b: f64) -> f64 {
        self.transit_sum() + (b - a - self.length()) / self.k_o
    }

    pub fn fits(&self, a: f64, b: f64) -> bool {
        self.start >= a && self.end() <= b
    }

    pub fn coefficient(&self) -> Result<SpatialCoeff> {
        let mut bps = vec![self.start];
        let mut vals = vec![self.k_o];
        let mut x = self.start;
        for &(chi, k) in &self.spans {
            x += chi;
            bps.push(x);
            vals.push(k);
        }
        vals.push(self.k_o);
        SpatialCoeff::new_merged(bps, vals)
    }
}

fn expect_spans(base: &Staircase, n: usize) -> Result<()> {
    if base.spans.len() != n {
        return Err(Error::Input(format!("expected {n} spans, got {}", base.spans.len())));
    }
    Ok(())
}

fn check_increasing(base: &Staircase) -> Result<()> {
    let mut prev = 0.0;
    for &(_, k) in &base.spans {
        if !(k > prev) {
            return Err(Error::Input("span values must increase strictly from left to right".into()));
        }
        prev = k;
    }
    if !(prev < base.k_o) {
        return Err(Error::Input("span values must stay below k_o".into()));
    }
    Ok(())
}

/// `Σχ / Σ(χ/k)`: the single value with the same transit weight as `spans`.
pub fn harmonic_merge(spans: &[(f64, f64)]) -> f64 {
    let len: f64 = spans.iter().map(|s| s.0).sum();
    len / spans.iter().map(|&(chi, k)| chi / k).sum::<f64>()
}

/// Extends the second span by `ε` into the `k_o` region, lowering its value to
/// `k_ε = (χ₂ + ε)/(χ₂/k₂ + ε/k_o)`.
pub fn widen_family(base: &Staircase, eps: f64, a: f64, b: f64) -> Result<Staircase> {
    expect_spans(base, 2)?;
    check_increasing(base)?;
    if eps < 0.0 {
        return Err(Error::Input(format!("ε must be non-negative, got {eps}")));
    }
    if eps == 0.0 {
        return Ok(base.clone());
    }
    let (chi1, k1) = base.spans[0];
    let (chi2, k2) = base.spans[1];
    let k_eps = (chi2 + eps) / (chi2 / k2 + eps / base.k_o);
    let out = Staircase::new(base.k_o, base.start, vec![(chi1, k1), (chi2 + eps, k_eps)])?;
    if !out.fits(a, b) {
        return Err(Error::SupportOverflow(format!("ε={eps} pushes the staircase end to {} beyond b={b}", out.end())));
    }
    Ok(out)
}

/// Moves the first interior jump left by `ρ`, giving the second span the value
/// `k_ρ = (χ₂ + ρ)/(χ₂/k₂ + ρ/k₁)`.
pub fn shift_family(base: &Staircase, rho: f64) -> Result<Staircase> {
    expect_spans(base, 2)?;
    check_increasing(base)?;
    let (chi1, k1) = base.spans[0];
    let (chi2, k2) = base.spans[1];
    if rho < 0.0 || rho >= chi1 {
        return Err(Error::SupportOverflow(format!("ρ must lie in [0, χ₁={chi1}), got {rho}")));
    }
    if rho == 0.0 {
        return Ok(base.clone());
    }
    let k_rho = (chi2 + rho) / (chi2 / k2 + rho / k1);
    Staircase::new(base.k_o, base.start, vec![(chi1 - rho, k1), (chi2 + rho, k_rho)])
}

/// Members derived from a three-span staircase by merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeFamily {
    /// Jump between the last two spans moved left by `ε`, with values `k̂`, `k̃`.
    pub shifted: Staircase,
    /// `k₁` then `ℓ` on the last two spans.
    pub merged: Staircase,
    /// `ℓ'` on the whole support: a single obstruction.
    pub collapsed: Staircase,
    pub ell: f64,
    pub ell_prime: f64,
}

/// `k̂` is free (it defaults to `ℓ`); `k̃` follows from the transit identity.
pub fn merge_family(base: &Staircase, eps: f64, k_hat: Option<f64>) -> Result<MergeFamily> {
    expect_spans(base, 3)?;
    check_increasing(base)?;
    let [(chi1, k1), (chi2, k2), (chi3, k3)] = [base.spans[0], base.spans[1], base.spans[2]];
    if !(0.0..chi2).contains(&eps) {
        return Err(Error::SupportOverflow(format!("ε must lie in [0, χ₂={chi2}), got {eps}")));
    }
    let ell = harmonic_merge(&[(chi2, k2), (chi3, k3)]);
    let ell_prime = harmonic_merge(&[(chi1, k1), (chi2 + chi3, ell)]);
    let k_hat = k_hat.unwrap_or(ell);
    let rest = chi2 / k2 + chi3 / k3 - (chi2 - eps) / k_hat;
    if !(rest > 0.0) {
        return Err(Error::Input(format!("k̂={k_hat} leaves no transit time for the last span")));
    }
    let k_tilde = (chi3 + eps) / rest;
    let mut spans = vec![(chi1, k1)];
    if chi2 - eps > 0.0 {
        spans.push((chi2 - eps, k_hat));
    }
    spans.push((chi3 + eps, k_tilde));
    Ok(MergeFamily {
        shifted: Staircase::new(base.k_o, base.start, spans)?,
        merged: Staircase::new(base.k_o, base.start, vec![(chi1, k1), (chi2 + chi3, ell)])?,
        collapsed: Staircase::new(base.k_o, base.start, vec![(chi1 + chi2 + chi3, ell_prime)])?,
        ell,
        ell_prime,
    })
}

/// Exchanges the second and third spans together with their values.
pub fn swap_family(base: &Staircase) -> Result<Staircase> {
    expect_spans(base, 3)?;
    check_increasing(base)?;
    let s = &base.spans;
    Staircase::new(base.k_o, base.start, vec![s[0], s[2], s[1]])
}

/// Transit-time comparison of a family member with its base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub base_sum: f64,
    pub member_sum: f64,
    pub base_length: f64,
    pub member_length: f64,
}

impl Certificate {
    pub fn new(name: &str, base: &Staircase, member: &Staircase) -> Self {
        Certificate {
            name: name.to_string(),
            base_sum: base.window_transit(base.start, base.end().max(member.end())),
            member_sum: member.window_transit(base.start, base.end().max(member.end())),
            base_length: base.length(),
            member_length: member.length(),
        }
    }

    pub fn gap(&self) -> f64 {
        (self.base_sum - self.member_sum).abs()
    }
}

/// Time a state `u` (entering at `a`, below the bottleneck) needs to cross `[a, b]`
/// travelling at characteristic speed: `Σ χ/(k f'(w))`, where `k f(w) = k_o f(u)` on each piece.
///
/// The transit sums of two family members agree, yet these times agree only as `u → u₁`:
/// the state inside each span changes with `k`, and so does its speed.
pub fn state_transit_time(f: &FluxCurve, st: &Staircase, a: f64, b: f64, u: f64) -> Result<f64> {
    let level = st.k_o * f.eval(u);
    let mut t = (b - a - st.length()) / (st.k_o * f.deriv(u));
    for &(chi, k) in &st.spans {
        let w = f.branch_inverse(level / k, Branch::Increasing)?;
        t += chi / (k * f.deriv(w));
    }
    Ok(t)
}

/// Trace differences at `a` (left limit) and `b` (right limit) over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// `∫|Δu| dt / T`.
    pub mean_a: f64,
    pub mean_b: f64,
    pub sup_a: f64,
    pub sup_b: f64,
}

impl Deviation {
    pub fn mean(&self) -> f64 {
        self.mean_a.max(self.mean_b)
    }

    pub fn sup(&self) -> f64 {
        self.sup_a.max(self.sup_b)
    }
}

/// Simulates the same datum under two coefficients and compares what is seen at the window edges.
pub fn indistinguishable(
    f: &FluxCurve,
    coeff_a: &SpatialCoeff,
    coeff_b: &SpatialCoeff,
    window: (f64, f64),
    initial: &Profile,
    horizon: f64,
    delta: f64,
) -> Result<Deviation> {
    let (a, b) = window;
    let run = |k: &SpatialCoeff| -> Result<_> {
        let h = Scenario::new(f.clone(), k.clone(), initial.clone(), delta, horizon)?.run()?;
        Ok((h.trace(a), h.trace(b)))
    };
    let (pa, pb) = run(coeff_a)?;
    let (qa, qb) = run(coeff_b)?;
    Ok(Deviation {
        mean_a: trace_l1(&pa, &qa, 0.0, horizon, Side::Left) / horizon,
        mean_b: trace_l1(&pb, &qb, 0.0, horizon, Side::Right) / horizon,
        sup_a: trace_sup(&pa, &qa, 0.0, horizon, Side::Left),
        sup_b: trace_sup(&pb, &qb, 0.0, horizon, Side::Right),
    })
}

/// Empty road on `(a, ∞)` fed by a plateau `ω` on `(a - width, a)`.
pub fn empty_road_datum(f: &FluxCurve, a: f64, omega: f64, width: f64) -> Result<Profile> {
    Profile::plateau(f.lo(), omega, a - width, a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_span() -> Staircase {
        Staircase::new(1.0, 0.5, vec![(1.0, 0.25), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn widen_value() {
        let m = widen_family(&two_span(), 1.0, 0.0, 4.0).unwrap();
        assert!((m.spans[1].1 - 2.0 / 3.0).abs() < 1e-15);
        // (χ₂+ε)/k_ε = χ₂/k₂ + ε/k_o
        assert!((2.0 / m.spans[1].1 - (2.0 + 1.0)).abs() < 1e-14);
        assert_eq!(widen_family(&two_span(), 0.0, 0.0, 4.0).unwrap(), two_span());
        assert!(matches!(widen_family(&two_span(), 3.0, 0.0, 4.0), Err(Error::SupportOverflow(_))));
    }

    #[test]
    fn shift_value() {
        let base = Staircase::new(1.0, 0.5, vec![(1.5, 0.25), (1.0, 0.5)]).unwrap();
        let m = shift_family(&base, 1.0).unwrap();
        assert!((m.spans[1].1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.length(), base.length());
        assert_eq!(shift_family(&base, 0.0).unwrap(), base);
        assert!(shift_family(&base, 1.5).is_err());
    }

    #[test]
    fn merge_values() {
        assert!((harmonic_merge(&[(1.0, 0.5), (1.0, 1.0)]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(harmonic_merge(&[(0.7, 0.4), (0.7, 0.4)]), 0.4);
        let base = Staircase::new(1.0, 0.0, vec![(0.3, 0.2), (0.4, 0.5), (0.2, 0.8)]).unwrap();
        let fam = merge_family(&base, 0.1, None).unwrap();
        assert!(fam.ell > 0.5 && fam.ell < 0.8);
        assert!(fam.ell_prime > 0.2 && fam.ell_prime < fam.ell);
        for m in [&fam.shifted, &fam.merged, &fam.collapsed] {
            assert!((m.transit_sum() - base.transit_sum()).abs() < 1e-14);
            assert!((m.length() - base.length()).abs() < 1e-15);
        }
        let free = merge_family(&base, 0.1, Some(0.6)).unwrap();
        assert!((free.shifted.transit_sum() - base.transit_sum()).abs() < 1e-14);
        let unordered = Staircase::new(1.0, 0.0, vec![(0.3, 0.5), (0.4, 0.2), (0.2, 0.8)]).unwrap();
        assert!(matches!(merge_family(&unordered, 0.1, None), Err(Error::Input(_))));
    }

    #[test]
    fn swap_keeps_span_and_sum() {
        let base = Staircase::new(1.0, 0.0, vec![(0.3, 0.2), (0.4, 0.5), (0.2, 0.8)]).unwrap();
        let s = swap_family(&base).unwrap();
        assert_eq!(s.spans, vec![(0.3, 0.2), (0.2, 0.8), (0.4, 0.5)]);
        assert!((s.length() - base.length()).abs() < 1e-15);
        assert!(Certificate::new("swap", &base, &s).gap() < 1e-15);
    }

    #[test]
    fn same_coefficient_has_zero_deviation() {
        let f = FluxCurve::greenshields();
        let k = two_span().coefficient().unwrap();
        let d = indistinguishable(&f, &k, &k, (0.0, 3.0), &empty_road_datum(&f, 0.0, 0.1, 1.0).unwrap(), 4.0, 1e-2)
            .unwrap();
        assert_eq!(d.sup(), 0.0);
        assert_eq!(d.mean(), 0.0);
    }

    #[test]
    fn arrival_times_agree_only_at_the_leading_edge() {
        let f = FluxCurve::greenshields();
        let base = Staircase::new(1.0, 0.5, vec![(0.6, 0.4), (0.6, 0.7)]).unwrap();
        let member = widen_family(&base, 0.4, 0.0, 3.0).unwrap();
        let gap = |u: f64| {
            state_transit_time(&f, &base, 0.0, 3.0, u).unwrap() - state_transit_time(&f, &member, 0.0, 3.0, u).unwrap()
        };
        let lead = base.window_transit(0.0, 3.0);
        assert!((state_transit_time(&f, &base, 0.0, 3.0, 1e-12).unwrap() - lead).abs() < 1e-9);
        assert!(gap(1e-9).abs() < 1e-9);
        // the gap grows linearly with u
        assert!(gap(0.1).abs() > 1e-2, "{}", gap(0.1));
        assert!((gap(0.02) / gap(0.01) - 2.0).abs() < 0.3, "{}", gap(0.02) / gap(0.01));
    }
}
