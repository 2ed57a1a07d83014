//! Shared test oracles: an independent finite-volume solver and small helpers.
#![allow(dead_code)]

use fluxrecon::{FluxCurve, Profile, SpatialCoeff};

/// Cell averages on a uniform grid over `[lo, hi]`.
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Grid {
    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.dx()
    }

    /// Cell averages of `g` by `m`-point midpoint sampling.
    pub fn project<G: Fn(f64) -> f64>(&self, g: G, m: usize) -> Vec<f64> {
        let dx = self.dx();
        (0..self.cells)
            .map(|i| {
                let x0 = self.lo + i as f64 * dx;
                (0..m).map(|j| g(x0 + (j as f64 + 0.5) * dx / m as f64)).sum::<f64>() / m as f64
            })
            .collect()
    }

    /// Exact cell averages of a piecewise-constant profile.
    pub fn average(&self, p: &Profile) -> Vec<f64> {
        let dx = self.dx();
        (0..self.cells)
            .map(|i| {
                let x0 = self.lo + i as f64 * dx;
                p.integral(x0, x0 + dx) / dx
            })
            .collect()
    }

    pub fn l1(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.dx()
    }
}

/// Supply–demand Godunov scheme for `u_t + (k(x) f(u))_x = 0` with concave `f`
/// maximal at `um`; `k` is sampled at cell centres, far fields are transmissive.
pub fn godunov_concave(f: &dyn Fn(f64) -> f64, df_max: f64, um: f64, k: &[f64], u0: &[f64], dx: f64, t_end: f64) -> Vec<f64> {
    let kmax = k.iter().cloned().fold(0.0, f64::max);
    let dt_max = 0.45 * dx / (kmax * df_max);
    let demand = |i: usize, u: f64| k[i] * f(u.min(um));
    let supply = |i: usize, u: f64| k[i] * f(u.max(um));
    march(u0, dx, t_end, dt_max, |u, i| demand(i, u[i]).min(supply(i + 1, u[i + 1])))
}

/// Exact Godunov scheme for a single coefficient and a cubic flux `c₀ + c₁u + c₂u² + c₃u³`.
pub fn godunov_cubic(c: [f64; 4], k: f64, u0: &[f64], dx: f64, t_end: f64, df_max: f64) -> Vec<f64> {
    let f = move |u: f64| c[0] + u * (c[1] + u * (c[2] + u * c[3]));
    // stationary points of the cubic: roots of c₁ + 2c₂u + 3c₃u²
    let crit: Vec<f64> = {
        let (a, b, cc) = (3.0 * c[3], 2.0 * c[2], c[1]);
        if a == 0.0 {
            if b == 0.0 { vec![] } else { vec![-cc / b] }
        } else {
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                vec![]
            } else {
                vec![(-b - disc.sqrt()) / (2.0 * a), (-b + disc.sqrt()) / (2.0 * a)]
            }
        }
    };
    let flux = move |ul: f64, ur: f64| {
        let (lo, hi) = (ul.min(ur), ul.max(ur));
        let mut cands = vec![f(ul), f(ur)];
        cands.extend(crit.iter().filter(|&&x| x > lo && x < hi).map(|&x| f(x)));
        if ul <= ur {
            k * cands.into_iter().fold(f64::INFINITY, f64::min)
        } else {
            k * cands.into_iter().fold(f64::NEG_INFINITY, f64::max)
        }
    };
    march(u0, dx, t_end, 0.45 * dx / (k * df_max), |u, i| flux(u[i], u[i + 1]))
}

fn march<F: Fn(&[f64], usize) -> f64>(u0: &[f64], dx: f64, t_end: f64, dt_max: f64, face: F) -> Vec<f64> {
    let n = u0.len();
    let mut u = u0.to_vec();
    let mut fl = vec![0.0; n - 1];
    let mut t = 0.0;
    while t < t_end {
        let dt = dt_max.min(t_end - t);
        for (i, slot) in fl.iter_mut().enumerate() {
            *slot = face(&u, i);
        }
        // transmissive ends: the boundary faces carry the same flux as the cell itself
        for i in 1..n - 1 {
            u[i] -= dt / dx * (fl[i] - fl[i - 1]);
        }
        t += dt;
    }
    u
}

/// Coefficient sampled at the cell centres of `g`.
pub fn sample_coeff(g: &Grid, k: &SpatialCoeff) -> Vec<f64> {
    (0..g.cells).map(|i| k.value_at(g.center(i))).collect()
}

pub fn greenshields() -> FluxCurve {
    FluxCurve::greenshields()
}

/// `u - u³` on `[0, 1]`: strictly concave, vanishing at both ends, maximal at `1/√3`.
pub fn skewed() -> FluxCurve {
    FluxCurve::polynomial(vec![0.0, 1.0, 0.0, -1.0], 0.0, 1.0).unwrap()
}
