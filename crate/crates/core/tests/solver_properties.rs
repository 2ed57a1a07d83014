mod common;

use common::{godunov_concave, godunov_cubic, greenshields, sample_coeff, skewed, Grid};
use fluxrecon::fluxlib::{interpolate_nodes, lip_of_difference, EnvelopeKind};
use fluxrecon::riemann::{solve_homogeneous, solve_two_k, stationary_pairs, GivenSide, Wave};
use fluxrecon::{Branch, FluxCurve, Profile, Scenario, SpatialCoeff};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sedimentation() -> FluxCurve {
    FluxCurve::polynomial(vec![0.0, 0.0, 3.0, -2.0], 0.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn branch_inverse_undoes_the_flux(u in 0.0f64..=1.0, skew in proptest::bool::ANY) {
        let f = if skew { skewed() } else { greenshields() };
        let um = f.maximizer().unwrap();
        let branch = if u <= um { Branch::Increasing } else { Branch::Decreasing };
        let v = f.branch_inverse(f.eval(u), branch).unwrap();
        prop_assert!((f.eval(v) - f.eval(u)).abs() <= 1e-12 * f.max_value().unwrap());
        if (u - um).abs() > 1e-4 {
            prop_assert!((v - u).abs() <= 1e-10, "{} -> {}", u, v);
        }
    }

    #[test]
    fn companion_is_an_involution(u in 0.0f64..=1.0, skew in proptest::bool::ANY) {
        let f = if skew { skewed() } else { greenshields() };
        let c = f.companion(u).unwrap();
        prop_assert!((f.eval(c) - f.eval(u)).abs() <= 1e-12);
        prop_assert!(f.deriv(u) * f.deriv(c) <= 1e-12);
        if (u - f.maximizer().unwrap()).abs() > 1e-4 {
            prop_assert!((f.companion(c).unwrap() - u).abs() <= 1e-10);
        }
    }

    #[test]
    fn envelope_matches_discrete_hull(lo in 0.0f64..0.9, len in 0.05f64..1.0, convex in proptest::bool::ANY) {
        let f = sedimentation();
        let hi = (lo + len).min(1.0);
        let kind = if convex { EnvelopeKind::ConvexBelow } else { EnvelopeKind::ConcaveAbove };
        let env = f.envelope(lo, hi, kind).unwrap();
        let hull = discrete_hull(&f, lo, hi, 10_000, convex);
        let n = 2000;
        for i in 0..=n {
            let u = lo + (hi - lo) * i as f64 / n as f64;
            let e = env.eval(&f, u);
            if convex {
                prop_assert!(e <= f.eval(u) + 1e-12);
            } else {
                prop_assert!(e >= f.eval(u) - 1e-12);
            }
            prop_assert!((e - hull(u)).abs() <= 1e-6, "u={} env={} hull={}", u, e, hull(u));
        }
        for (a, b) in env.contact_set() {
            for u in [a, 0.5 * (a + b), b] {
                prop_assert!((env.eval(&f, u) - f.eval(u)).abs() <= 1e-12);
            }
        }
    }
}

/// Lower (or upper) hull of `f` sampled on `n + 1` points, by the monotone chain.
fn discrete_hull(f: &FluxCurve, lo: f64, hi: f64, n: usize, convex: bool) -> impl Fn(f64) -> f64 {
    let s = if convex { 1.0 } else { -1.0 };
    let pts: Vec<(f64, f64)> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).map(|u| (u, s * f.eval(u))).collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            if (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    move |u: f64| {
        let i = hull.partition_point(|q| q.0 < u).clamp(1, hull.len() - 1);
        let (a, b) = (hull[i - 1], hull[i]);
        s * (a.1 + (b.1 - a.1) * (u - a.0) / (b.0 - a.0))
    }
}

#[test]
fn chord_interpolant_converges_at_second_order() {
    let f = greenshields();
    let err = |n: usize| {
        let nodes: Vec<(f64, f64)> = (0..=n).map(|i| i as f64 / n as f64).map(|u| (u, f.eval(u))).collect();
        let g = interpolate_nodes(&nodes).unwrap();
        (0..=10 * n).map(|i| i as f64 / (10 * n) as f64).fold(0.0f64, |m, u| m.max((g.eval(u) - f.eval(u)).abs()))
    };
    let e: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| err(n)).collect();
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.9..=4.1).contains(&ratio), "{e:?}");
    }
}

#[test]
fn chord_interpolant_derivative_gap_is_bounded() {
    let f = greenshields();
    for n in [4usize, 16, 64] {
        let delta = 1.0 / n as f64;
        let nodes: Vec<(f64, f64)> = (0..=n).map(|i| i as f64 * delta).map(|u| (u, f.eval(u))).collect();
        let lip = lip_of_difference(&f, &interpolate_nodes(&nodes).unwrap());
        // the chord slope differs from f' by at most δ on each cell, and reaches it at the nodes
        assert!(lip <= 2.0 * delta && lip >= 0.99 * delta, "n={n}: {lip}");
    }
}

fn draw_two_k(rng: &mut ChaCha8Rng) -> (FluxCurve, f64, f64, f64, f64) {
    let f = if rng.gen_bool(0.5) { greenshields() } else { skewed() };
    let kl: f64 = rng.gen_range(0.3..2.0);
    let mut kr: f64 = rng.gen_range(0.3..2.0);
    if (kr - kl).abs() < 1e-3 {
        kr += 0.1;
    }
    // a few draws sit exactly on special states
    let pick = |rng: &mut ChaCha8Rng| match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        2 => f.maximizer().unwrap(),
        _ => rng.gen_range(0.0..1.0),
    };
    let (ul, ur) = (pick(rng), pick(rng));
    (f, kl, ul, kr, ur)
}

/// Every k-wave partner is the nearer of the two flux-matching candidates, seen from either side.
fn assert_smallest_jump(f: &FluxCurve, w: &Wave, case: usize) {
    if let Wave::KWave { kl, kr, ul: lo, ur: hi } = *w {
        let cands = stationary_pairs(f, kl, kr, lo, GivenSide::Left).unwrap();
        // roots near u^m are only determined to about the square root of machine precision
        assert!(cands.iter().any(|c| (c.0 - hi).abs() <= 1e-7), "case {case}: {hi} not among {cands:?}");
        for c in &cands {
            assert!((hi - lo).abs() <= (c.0 - lo).abs() + 1e-7, "case {case}: {w:?} vs {c:?}");
        }
        for c in &stationary_pairs(f, kl, kr, hi, GivenSide::Right).unwrap() {
            assert!((hi - lo).abs() <= (c.0 - hi).abs() + 1e-7, "case {case}: {w:?} vs {c:?}");
        }
    }
}

#[test]
fn fuzzed_two_coefficient_fans_are_admissible() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let (f, kl, ul, kr, ur) = draw_two_k(&mut rng);
        let fan = solve_two_k(&f, kl, ul, kr, ur).unwrap();
        fan.validate(&f).unwrap_or_else(|e| panic!("case {case} ({kl}, {ul}) | ({kr}, {ur}): {e}"));
        let kwaves = fan.waves.iter().filter(|w| matches!(w, Wave::KWave { .. })).count();
        assert_eq!(kwaves, 1, "case {case}: {fan:?}");
        for w in &fan.waves {
            if let Wave::Shock { ul, ur, k, speed } = *w {
                assert!(ul < ur, "case {case}: non-entropic shock {w:?}");
                assert!(k * f.deriv(ul) >= speed - 1e-12 && speed + 1e-12 >= k * f.deriv(ur), "case {case}: Lax fails {w:?}");
            }
            if f.is_quadratic() {
                assert_smallest_jump(&f, w, case);
            }
        }
        let (u0l, k0l) = fan.sample(&f, -1e-9);
        let (u0r, k0r) = fan.sample(&f, 1e-9);
        assert!((k0l * f.eval(u0l) - k0r * f.eval(u0r)).abs() <= 1e-12, "case {case}: flux jumps at the origin");
    }
}

#[test]
fn skewed_flux_leaves_capacity_on_the_free_branch() {
    // left side at capacity, wider road on the right: the partner is the free state even
    // though the congested candidate is nearer to u^m for this asymmetric flux
    let f = skewed();
    let um = f.maximizer().unwrap();
    let fan = solve_two_k(&f, 0.32, 0.9, 0.8, 0.1).unwrap();
    let (lo, hi) = fan
        .waves
        .iter()
        .find_map(|w| match *w {
            Wave::KWave { ul, ur, .. } => Some((ul, ur)),
            _ => None,
        })
        .unwrap();
    assert!((lo - um).abs() < 1e-12 && hi < um);
    let cands = stationary_pairs(&f, 0.32, 0.8, um, GivenSide::Left).unwrap();
    let congested = cands.iter().find(|c| c.1 == Branch::Decreasing).unwrap().0;
    assert!((congested - um).abs() < (hi - um).abs());
}

#[test]
fn fuzzed_fans_are_self_similar() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let (f, kl, ul, kr, ur) = draw_two_k(&mut rng);
        let fan = solve_two_k(&f, kl, ul, kr, ur).unwrap();
        for _ in 0..20 {
            let x = rng.gen_range(-2.5..2.5);
            let t = rng.gen_range(0.1..2.0);
            let s = rng.gen_range(0.5..4.0);
            let (p, q) = (fan.sample(&f, x / t), fan.sample(&f, (s * x) / (s * t)));
            assert!((p.0 - q.0).abs() <= 1e-12 && p.1 == q.1, "case {case}: {p:?} vs {q:?}");
        }
        // front tracking of the same datum: the snapshot at 2t is the one at t stretched by 2
        let coeff = SpatialCoeff::new(vec![0.0], vec![kl, kr]).unwrap();
        let h = Scenario::new(f.clone(), coeff, Profile::riemann(ul, ur, 0.0), 0.05, 2.0).unwrap().run().unwrap();
        let (p, q) = (h.snapshot(1.0), h.snapshot(2.0));
        assert_eq!(p.values, q.values, "case {case}");
        for (a, b) in p.breakpoints.iter().zip(&q.breakpoints) {
            assert!((2.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()), "case {case}: {a} vs {b}");
        }
    }
}

#[test]
fn stationary_pair_fixtures() {
    let f = greenshields();
    let p = stationary_pairs(&f, 5.0 / 9.0, 1.0, 0.5, GivenSide::Left).unwrap();
    assert_eq!(p.len(), 2);
    assert!((p[0].0 - 1.0 / 6.0).abs() < 1e-12 && (p[1].0 - 5.0 / 6.0).abs() < 1e-12);
    let p = stationary_pairs(&f, 0.7, 0.7, 0.2, GivenSide::Left).unwrap();
    assert!((p[0].0 - 0.2).abs() < 1e-12 && (p[1].0 - 0.8).abs() < 1e-12);
    assert!(stationary_pairs(&f, 1.0, 5.0 / 9.0, 0.5, GivenSide::Left).unwrap().is_empty());
}

#[test]
fn capacity_drop_reflects_a_shock() {
    let f = greenshields();
    let fan = solve_two_k(&f, 1.0, 1.0 / 3.0, 0.5, 1.0 / 3.0).unwrap();
    let v2 = 0.5 * (1.0 + 0.5f64.sqrt());
    match fan.waves.as_slice() {
        [Wave::Shock { ur, speed, .. }, Wave::KWave { ul, ur: w, .. }, Wave::Rarefaction { ul: r0, ur: r1, .. }] => {
            assert!((ur - v2).abs() < 1e-12 && (ul - v2).abs() < 1e-12);
            let exact = (f.eval(v2) - 2.0 / 9.0) / (v2 - 1.0 / 3.0);
            assert!((speed - exact).abs() < 1e-12);
            assert_eq!(format!("{speed:.5}"), "-0.18689");
            assert!((w - 0.5).abs() < 1e-12 && (r0 - 0.5).abs() < 1e-12 && (r1 - 1.0 / 3.0).abs() < 1e-12);
        }
        other => panic!("unexpected wave pattern {other:?}"),
    }
    let fan = solve_two_k(&f, 5.0 / 9.0, 1.0 / 3.0, 1.0, 1.0 / 3.0).unwrap();
    let v = 0.5 * (1.0 - 41f64.sqrt() / 9.0);
    match fan.waves.as_slice() {
        [Wave::KWave { ur, .. }, Wave::Shock { ul, ur: r, .. }] => {
            assert!((ur - v).abs() < 1e-12 && (ul - v).abs() < 1e-12 && (r - 1.0 / 3.0).abs() < 1e-12);
        }
        other => panic!("unexpected wave pattern {other:?}"),
    }
}

#[test]
fn two_coefficient_fans_match_finite_volumes() {
    let g = Grid { lo: -3.0, hi: 3.0, cells: 4000 };
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut cases = vec![(1.0, 1.0 / 3.0, 0.5, 1.0 / 3.0), (5.0 / 9.0, 1.0 / 3.0, 1.0, 1.0 / 3.0), (1.0, 0.9, 0.6, 0.1), (0.32, 0.9, 0.8, 0.1)];
    for _ in 0..5 {
        cases.push((rng.gen_range(0.3..1.5), rng.gen_range(0.0..1.0), rng.gen_range(0.3..1.5), rng.gen_range(0.0..1.0)));
    }
    for (kl, ul, kr, ur) in cases {
        for f in [greenshields(), skewed()] {
            let fan = solve_two_k(&f, kl, ul, kr, ur).unwrap();
            let exact = g.project(|x| fan.sample(&f, x).0, 8);
            let coeff = SpatialCoeff::new(vec![0.0], vec![kl, kr]).unwrap();
            let u0 = g.project(|x| if x < 0.0 { ul } else { ur }, 1);
            let eval = |u: f64| f.eval(u);
            let fv = godunov_concave(&eval, 3.0, f.maximizer().unwrap(), &sample_coeff(&g, &coeff), &u0, g.dx(), 1.0);
            let d = g.l1(&exact, &fv);
            assert!(d <= 5.0 * g.dx(), "({kl}, {ul}) | ({kr}, {ur}): L1 {d:e} > {:e}", 5.0 * g.dx());
        }
    }
}

#[test]
fn inflection_fan_matches_finite_volumes() {
    let g = Grid { lo: -3.0, hi: 3.0, cells: 4000 };
    let f = sedimentation();
    for (ul, ur) in [(0.1, 0.9), (0.9, 0.1), (0.0, 0.6), (0.7, 0.2)] {
        let fan = solve_homogeneous(&f, 1.0, ul, ur);
        fan.validate(&f).unwrap();
        if ul < ur && ul < 0.5 && ur > 0.5 {
            // rising data across the inflection: rarefaction up to the tangency point, then a shock
            assert!(matches!(fan.waves.as_slice(), [Wave::Rarefaction { .. }, Wave::Shock { .. }]), "{fan:?}");
        }
        let exact = g.project(|x| fan.sample(&f, x).0, 8);
        let u0 = g.project(|x| if x < 0.0 { ul } else { ur }, 1);
        let fv = godunov_cubic([0.0, 0.0, 3.0, -2.0], 1.0, &u0, g.dx(), 1.0, 1.5);
        let d = g.l1(&exact, &fv);
        assert!(d <= 5.0 * g.dx(), "{ul} | {ur}: L1 {d:e}");
    }
}

fn random_staircase(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> SpatialCoeff {
    let n = rng.gen_range(0..5);
    let mut bps: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let vals = (0..=bps.len()).map(|_| rng.gen_range(0.4..1.6)).collect();
    SpatialCoeff::new_merged(bps, vals).unwrap()
}

fn random_datum(rng: &mut ChaCha8Rng, f: &FluxCurve, lo: f64, hi: f64) -> Profile {
    let n = rng.gen_range(1..6);
    let mut bps: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(lo..hi)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut vals: Vec<f64> = (0..=bps.len()).map(|_| rng.gen_range(f.lo()..f.hi())).collect();
    vals[0] = f.lo();
    *vals.last_mut().unwrap() = f.lo();
    Profile::new(bps, vals, 0.0).unwrap()
}

#[test]
fn mass_is_conserved_and_states_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..30 {
        let f = if case % 2 == 0 { greenshields() } else { skewed() };
        let k = random_staircase(&mut rng, -1.0, 1.0);
        let u0 = random_datum(&mut rng, &f, -1.0, 1.0);
        let s = Scenario::new(f.clone(), k.clone(), u0.clone(), 0.02, 1.5).unwrap();
        let h = s.run().unwrap();
        let m0 = u0.mass(f.lo()).unwrap();
        for t in [0.25, 0.75, 1.5] {
            let m = h.mass(t, f.lo()).unwrap();
            assert!((m - m0).abs() <= 1e-10, "case {case}: mass {m} vs {m0} at t={t}");
            let p = h.snapshot(t);
            assert!(p.min_value() >= f.lo() - 1e-12 && p.max_value() <= f.hi() + 1e-12, "case {case}");
        }
    }
}

#[test]
fn constant_coefficient_obeys_the_maximum_principle() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for case in 0..30 {
        let f = if case % 2 == 0 { greenshields() } else { sedimentation() };
        let u0 = random_datum(&mut rng, &f, -1.0, 1.0);
        let (lo, hi) = (u0.min_value(), u0.max_value());
        let h = Scenario::new(f, SpatialCoeff::constant(rng.gen_range(0.5..1.5)), u0, 0.02, 1.0).unwrap().run().unwrap();
        for t in [0.1, 0.5, 1.0] {
            let p = h.snapshot(t);
            assert!(p.min_value() >= lo - 1e-12 && p.max_value() <= hi + 1e-12, "case {case} at t={t}");
        }
    }
}

#[test]
fn halving_delta_halves_the_error() {
    let f = greenshields();
    let k = SpatialCoeff::new(vec![0.3], vec![1.0, 0.6]).unwrap();
    // a rarefaction that reaches a capacity drop and reflects
    let u0 = Profile::new(vec![-1.0, -0.5], vec![0.0, 0.9, 0.0], 0.0).unwrap();
    let run = |d: f64| Scenario::new(f.clone(), k.clone(), u0.clone(), d, 2.0).unwrap().run().unwrap().snapshot(2.0);
    let reference = run(0.0025);
    let err = |d: f64| run(d).l1_distance(&reference, -5.0, 5.0);
    let (e1, e2) = (err(0.04), err(0.02));
    assert!(e1 / e2 >= 1.8, "{e1:e} / {e2:e} = {}", e1 / e2);
}

#[test]
fn solution_gap_is_bounded_by_the_flux_gap() {
    let f0 = greenshields();
    let chord = |n: usize| {
        let nodes: Vec<(f64, f64)> = (0..=n).map(|i| i as f64 / n as f64).map(|u| (u, f0.eval(u))).collect();
        interpolate_nodes(&nodes).unwrap()
    };
    let (f, g) = (chord(8), chord(32));
    let u0 = Profile::new(vec![-1.0, -0.4, 0.2, 0.8], vec![0.0, 0.7, 0.3, 0.9, 0.0], 0.0).unwrap();
    let lip = lip_of_difference(&f, &g);
    for t_end in [0.5, 1.0] {
        let run = |c: &FluxCurve| Scenario::new(c.clone(), SpatialCoeff::constant(1.0), u0.clone(), 1e-3, t_end).unwrap().run().unwrap().snapshot(t_end);
        let d = run(&f).l1_distance(&run(&g), -5.0, 5.0);
        let bound = u0.total_variation() * t_end * lip;
        assert!(d <= bound, "t={t_end}: {d:e} > {bound:e}");
        assert!(d > 0.0);
    }
}

#[test]
fn accident_trace_jumps_at_half() {
    let f = greenshields();
    let k = SpatialCoeff::new(vec![1.0 / 12.0, 1.67], vec![1.0, 5.0 / 9.0, 1.0]).unwrap();
    let h = Scenario::new(f, k, Profile::constant(1.0 / 3.0), 1e-3, 1.0).unwrap().run().unwrap();
    let tr = h.trace(0.0);
    assert_eq!(tr.left_at(0.49), 1.0 / 3.0);
    assert!((tr.left_at(0.51) - 5.0 / 6.0).abs() < 1e-12);
    let jump = tr.times.iter().zip(&tr.left).find(|(_, &u)| u > 0.5).map(|(t, _)| *t).unwrap();
    assert!((jump - 0.5).abs() < 1e-12, "{jump}");
}
