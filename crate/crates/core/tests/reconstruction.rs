use fluxrecon::fluxlib::interpolate_nodes;
use fluxrecon::observe::{Mode, Observer};
use fluxrecon::recon_flux::{reconstruct, AnalyticOracle, FrontTrackingOracle, NodePolicy, ReconstructionGrid};
use fluxrecon::recon_k::reconstruct_k;
use fluxrecon::recon_obstruction::{run_constant, run_stationary, StationaryAmbient, World};
use fluxrecon::{Error, FluxCurve, Obstruction, Profile, Scenario, SpatialCoeff};
use proptest::prelude::*;

#[test]
fn concave_flux_nodes_are_exact() {
    let f = FluxCurve::greenshields();
    let grid = ReconstructionGrid::new(0.0, 1.0, 4, 0.0, 1.0).unwrap();
    let r = reconstruct(&grid, &FrontTrackingOracle { flux: f.clone(), delta: 1e-3 }, NodePolicy::Grid).unwrap();
    assert!(r.gaps.is_empty());
    for (u, v) in &r.nodes {
        assert!((v - f.eval(*u)).abs() <= 1e-12, "u={u}: {v}");
    }
}

#[test]
fn plateau_nodes_come_for_free() {
    let f = FluxCurve::polynomial(vec![0.0, 0.0, 3.0, -2.0], 0.0, 1.0).unwrap();
    let grid = ReconstructionGrid::new(0.0, 1.0, 3, 0.0, 1.0).unwrap();
    let coarse = reconstruct(&grid, &AnalyticOracle { flux: f.clone() }, NodePolicy::Grid).unwrap();
    let rich = reconstruct(&grid, &AnalyticOracle { flux: f.clone() }, NodePolicy::WithPlateaus).unwrap();
    assert!(rich.nodes.len() >= coarse.nodes.len());
    for (u, v) in &rich.nodes {
        assert!((v - f.eval(*u)).abs() <= 1e-9, "u={u}: {v} vs {}", f.eval(*u));
    }
}

#[test]
fn piecewise_linear_flux_round_trips_through_front_tracking() {
    let nodes = [(0.0, 0.0), (0.25, 0.75), (0.5, 1.0), (0.75, 0.8), (1.0, 0.0)];
    let f = interpolate_nodes(&nodes).unwrap();
    let grid = ReconstructionGrid::new(0.0, 1.0, 2, 0.0, 1.0).unwrap();
    let r = reconstruct(&grid, &FrontTrackingOracle { flux: f, delta: 1e-3 }, NodePolicy::Grid).unwrap();
    for (a, b) in r.nodes.iter().zip(&nodes) {
        assert!((a.1 - b.1).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn staircases_round_trip(
        cuts in proptest::collection::vec(0.05f64..0.95, 1..5),
        vals in proptest::collection::vec(0.3f64..1.8, 6),
    ) {
        let f = FluxCurve::greenshields();
        let mut bps = cuts.clone();
        bps.sort_by(f64::total_cmp);
        bps.dedup_by(|a, b| (*a - *b).abs() < 0.02);
        let vals = vals[..=bps.len()].to_vec();
        let k = SpatialCoeff::new_merged(bps, vals).unwrap();
        let (r, _) = reconstruct_k(&f, &k, 0.0, 1.0, 0.5, None, 1e-3).unwrap();
        prop_assert_eq!(r.jumps.len(), k.breakpoints().len());
        for (a, b) in r.jumps.iter().zip(k.breakpoints()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        for (a, b) in r.values.iter().zip(k.values()) {
            prop_assert!((a - b).abs() <= 1e-8 * b, "{:?} vs {:?}", r.values, k.values());
        }
    }
}

#[test]
fn partial_observer_refuses_the_window() {
    let f = FluxCurve::greenshields();
    let obs = Obstruction::new(0.5, 0.3, 0.7, 1.0, 0.0, 1.0).unwrap();
    let s = Scenario::new(f, obs.coefficient(), Profile::constant(0.3), 1e-2, 2.0).unwrap();
    let o = Observer::simulate(&s, Mode::Partial { a: 0.0, b: 1.0 }).unwrap();
    assert!(matches!(o.value(1.0, 0.5), Err(Error::AccessViolation { .. })));
    assert!(matches!(o.trace(0.3), Err(Error::AccessViolation { .. })));
    assert!(matches!(o.snapshot(1.0), Err(Error::AccessViolation { .. })));
    assert!(o.value(1.0, 0.0).is_ok() && o.value(1.0, 1.0).is_ok() && o.trace(-0.5).is_ok());
    let m = o.snapshot_outside(1.0, 0.0, 1.0).unwrap();
    assert!(m.left.breakpoints.iter().all(|&x| x <= 0.0));
    assert!(m.right.breakpoints.iter().all(|&x| x >= 1.0));
}

#[test]
fn both_protocols_recover_the_same_obstruction() {
    let f = FluxCurve::greenshields();
    let obs = Obstruction::new(0.45, 0.2, 0.6, 1.0, 0.0, 1.0).unwrap();
    let world = World::from_obstruction(f.clone(), &obs, 1e-3, 40.0);
    let amb = StationaryAmbient::new(&f, 1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
    let st = run_stationary(&world, &amb, &Profile::constant(0.0), 0.5).unwrap().report;
    let world = World { horizon: 8.0, ..world };
    let (ct, _) = run_constant(&world, 0.3, 1.0, true).unwrap();
    for (got, want) in [(st.k1, obs.k1), (st.xi1, obs.xi1), (st.xi2, obs.xi2), (ct.k1, obs.k1), (ct.xi1, obs.xi1), (ct.xi2, obs.xi2)] {
        assert!((got - want).abs() <= 1e-8, "{got} vs {want}");
    }
}
