use std::f64::consts::PI;
use std::sync::Arc;

use hmcf::audit::{minkowski_audit, nesting_audit};
use hmcf::closedform::{phi, sphere_quantities};
use hmcf::flow::{run, FlowConfig};
use hmcf::parallel::{parallel_surface, steiner_audit, surface_integrals};
use hmcf::surface::snapshot;
use hmcf::{gauss_bonnet_residual, perturbed_sphere, Grid, Mode, ModelSpace, RadialSurface};
use proptest::prelude::*;

fn grid(nt: usize, np: usize) -> Arc<Grid> {
    Arc::new(Grid::legendre(nt, np).unwrap())
}

fn modes() -> impl Strategy<Value = Vec<Mode>> {
    prop::collection::vec((2usize..=4, -4i32..=4, -0.03f64..0.03), 1..3)
        .prop_map(|v| v.into_iter().map(|(l, m, amp)| Mode::new(l, m.clamp(-(l as i32), l as i32), amp)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn snapshot_round_trip_preserves_integrals(a in -1.5f64..=0.0, rho in 0.6f64..1.5, ms in modes()) {
        let space = ModelSpace::new(a).unwrap();
        let s = perturbed_sphere(space, space.origin(), rho, &ms, grid(16, 32)).unwrap();
        let back = snapshot::read(snapshot::to_string(&s).as_bytes()).unwrap();
        prop_assert_eq!(surface_integrals(&s).unwrap(), surface_integrals(&back).unwrap());
    }

    #[test]
    fn euclidean_outer_parallels_follow_steiner_polynomial(rho in 0.6f64..1.5, ms in modes(), t in 0.05f64..0.8) {
        let space = ModelSpace::euclidean();
        let s = perturbed_sphere(space, space.origin(), rho, &ms, grid(24, 48)).unwrap();
        let i = surface_integrals(&s).unwrap();
        let p = surface_integrals(&parallel_surface(&s, t).unwrap()).unwrap();
        let want = i.area + i.m * t + 4.0 * PI * t * t;
        prop_assert!((p.area - want).abs() < 1e-5 * want, "{} vs {}", p.area, want);
        prop_assert!(steiner_audit(&s, &[t]).unwrap()[0].pass);
    }

    #[test]
    fn outer_parallels_nest_and_satisfy_minkowski(a in -1.0f64..=0.0, ms in modes(), t in 0.05f64..0.6) {
        let space = ModelSpace::new(a).unwrap();
        let s = perturbed_sphere(space, space.origin(), 1.0, &ms, grid(16, 32)).unwrap();
        let inner = surface_integrals(&s).unwrap();
        let outer = surface_integrals(&parallel_surface(&s, t).unwrap()).unwrap();
        prop_assert!(nesting_audit(&inner, &outer).iter().all(|r| r.pass));
        prop_assert!(minkowski_audit(&outer, a).pass);
    }
}

#[test]
fn short_flow_decreases_area_and_phi() {
    let space = ModelSpace::new(-1.0).unwrap();
    let s = perturbed_sphere(space, space.origin(), 1.0, &[Mode::new(2, 1, 0.04), Mode::new(3, -2, 0.02)], grid(16, 32)).unwrap();
    let tr = run(&s, &FlowConfig { end_time: Some(0.1), ..FlowConfig::default() }).unwrap();
    for w in tr.samples.windows(2) {
        assert!(w[1].integrals.area < w[0].integrals.area);
        assert!(w[1].phi <= w[0].phi + 1e-6 * w[0].phi.abs().max(1.0));
    }
    let first = &tr.samples[0];
    assert_eq!(first.phi, phi(first.integrals.m, first.integrals.area, -1.0, 2.0));
}

#[test]
fn sphere_quadrature_matches_closed_forms_through_public_api() {
    for (a, rho) in [(0.0, 1.0), (-1.0, 1.0), (-2.0, 0.5)] {
        let s = RadialSurface::sphere(ModelSpace::new(a).unwrap(), rho, grid(32, 64)).unwrap();
        let i = surface_integrals(&s).unwrap();
        let q = sphere_quantities(a, rho).unwrap();
        for (x, y) in [(i.area, q.area), (i.m, q.m), (i.gtot, q.gtot), (i.volume, q.volume)] {
            assert!((x - y).abs() < 1e-10 * y, "a={a} rho={rho}: {x} vs {y}");
        }
        assert!(gauss_bonnet_residual(&i, a) < 1e-10 * i.gtot);
    }
}
