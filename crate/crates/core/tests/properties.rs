//! Property tests for invariants that hold across models, energies and
//! sources.

use endscatter::counterexample::hd_eigen;
use endscatter::geometry::{
    effective_potential, eval_metric, integrate_flow, AngularSpace, EndChart, LineGeometry,
    ManifoldModel, Potential, WarpProfile,
};
use endscatter::modes::{build_mode_basis, BoundaryData, ModeBasis, ModeFunction};
use endscatter::smatrix::{build_smatrix, end_swap_defect, frobenius_distance};
use endscatter::solver::{besov_norms, solve_resolvent, BoundaryCondition, LineGrid, SourceSpec};
use endscatter::C64;
use proptest::prelude::*;

fn warped(kind: u8) -> (ManifoldModel, fn(f64) -> f64) {
    let (f, liouville): (WarpProfile, fn(f64) -> f64) = match kind % 3 {
        0 => (WarpProfile::linear(1.0), |r| -1.0 / (8.0 * r * r)),
        1 => (WarpProfile::exponential(), |_| 0.125),
        _ => (WarpProfile::constant(1.0), |_| 0.0),
    };
    let m = ManifoldModel::single(
        EndChart::warped(2, f, AngularSpace::Circle, 1.0, 40.0),
        Potential::Zero,
    );
    (m, liouville)
}

struct Line {
    geom: LineGeometry,
    basis: ModeBasis,
    grid: LineGrid,
}

fn small_line(depth: f64) -> Line {
    let m = ManifoldModel::line(
        13.0,
        Potential::SquareWell {
            depth,
            half_width: 1.0,
        },
    );
    let geom = LineGeometry::new(&m).unwrap();
    let basis = build_mode_basis(&m, 1).unwrap();
    let grid = LineGrid::with_points(&geom, 321).unwrap();
    Line { geom, basis, grid }
}

fn gaussian(s: &Line, c: f64, w: f64) -> ModeFunction {
    SourceSpec::Gaussian {
        center: c,
        width: w,
        mode: 0,
    }
    .build(&s.geom, &s.grid, &s.basis.labels())
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn warped_potential_is_the_liouville_term(kind in 0u8..3, r in 1.2f64..39.0, theta in -3.0f64..3.0) {
        let (m, liouville) = warped(kind);
        let q = effective_potential(&m, 0, (r, theta)).unwrap().q;
        prop_assert!((q - liouville(r)).abs() < 1e-10);
    }

    #[test]
    fn spherical_tensor_is_between_zero_and_the_metric(
        kind in 0u8..4,
        r in 9.0f64..400.0,
        theta in -0.9f64..0.9,
        v in (-5.0f64..5.0, -5.0f64..5.0),
    ) {
        let m = if kind == 3 { ManifoldModel::parabolic(0.5, 8.0, 512.0) } else { warped(kind).0 };
        let r = if kind == 3 { r } else { r.min(39.0) };
        let md = eval_metric(&m, 0, (r, theta)).unwrap();
        let l = md.ell();
        let lvv = l[0] * v.0 * v.0 + 2.0 * l[1] * v.0 * v.1 + l[2] * v.1 * v.1;
        let gvv = md.g[0] * v.0 * v.0 + md.g[1] * v.1 * v.1;
        prop_assert!(lvv >= 0.0);
        prop_assert!(lvv <= gvv * (1.0 + 1e-12));
    }

    #[test]
    fn flow_advances_r_by_the_elapsed_time(kind in 0u8..4, r in 2.0f64..20.0, theta in -0.8f64..0.8, t in 0.5f64..15.0) {
        let tol = 1e-9;
        let (m, start) = if kind == 3 {
            (ManifoldModel::parabolic(0.5, 8.0, 512.0), (r + 8.0, theta))
        } else {
            (warped(kind).0, (r, theta))
        };
        let orbit = integrate_flow(&m, 0, start, t, tol, 1.0).unwrap();
        prop_assert!(orbit.affinity_defect <= 10.0 * tol, "{}", orbit.affinity_defect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coefficient_norm_equals_reference_sphere_norm(
        interval in any::<bool>(),
        coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5),
    ) {
        let angular = if interval { AngularSpace::Interval } else { AngularSpace::Circle };
        let m = ManifoldModel::single(EndChart::warped(2, WarpProfile::linear(1.0), angular, 1.0, 16.0), Potential::Zero);
        let basis = build_mode_basis(&m, 2).unwrap();
        let labels = basis.labels();
        let mut xi = BoundaryData::zeros(1.0, 1, &labels);
        for (c, (re, im)) in xi.coeffs[0].iter_mut().zip(&coeffs) {
            *c = C64::new(*re, *im);
        }
        let (a, b) = (xi.norm_sq(), xi.quadrature_norm_sq(&basis));
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-300), "{a} vs {b}");
    }

    #[test]
    fn resolvent_adjoint_identity(
        lambda in 0.2f64..3.0,
        gamma in prop_oneof![Just(0.0), 1e-3f64..2.0],
        c1 in -6.0f64..6.0, w1 in 0.5f64..2.0,
        c2 in -6.0f64..6.0, w2 in 0.5f64..2.0,
    ) {
        let s = small_line(1.0);
        let (p1, p2) = (gaussian(&s, c1, w1), gaussian(&s, c2, w2));
        let z = C64::new(lambda, gamma);
        let (bc, bc_conj) = if gamma == 0.0 {
            (BoundaryCondition::RadiationOutgoing, BoundaryCondition::RadiationIncoming)
        } else {
            (BoundaryCondition::Damped, BoundaryCondition::Damped)
        };
        let r1 = solve_resolvent(&s.geom, &s.basis, &s.grid, &p1, z, bc).unwrap().phi;
        let r2 = solve_resolvent(&s.geom, &s.basis, &s.grid, &p2, z.conj(), bc_conj).unwrap().phi;
        let lhs = p2.inner(&r1).unwrap();
        let rhs = r2.inner(&p1).unwrap();
        let scale = (p1.norm_sq() * p2.norm_sq()).sqrt() * r1.norm_sq().sqrt().max(1.0);
        prop_assert!((lhs - rhs).norm() <= 1e-8 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn herglotz_sign_and_duality(
        lambda in -1.0f64..3.0,
        gamma in 1e-3f64..5.0,
        c in -6.0f64..6.0,
        w in 0.3f64..2.0,
        depth in -1.0f64..2.0,
    ) {
        let s = small_line(depth);
        let p = gaussian(&s, c, w);
        let sol = solve_resolvent(&s.geom, &s.basis, &s.grid, &p, C64::new(lambda, gamma), BoundaryCondition::Damped).unwrap();
        let pair = p.inner(&sol.phi).unwrap();
        prop_assert!(pair.im >= 0.0, "{pair}");
        let pb = besov_norms(&sol.source, &s.geom).unwrap().b;
        let fb = besov_norms(&sol.phi, &s.geom).unwrap().b_star;
        prop_assert!(sol.source.inner(&sol.phi).unwrap().norm() <= pb * fb * (1.0 + 1e-12));
    }

    #[test]
    fn scattering_columns_conserve_flux(lambda in 0.3f64..3.0, depth in -0.5f64..2.0) {
        let m = ManifoldModel::line(1601f64.sqrt(), Potential::SquareWell { depth, half_width: 1.0 });
        let geom = LineGeometry::new(&m).unwrap();
        let basis = build_mode_basis(&m, 1).unwrap();
        let grid = LineGrid::new(&geom, 0.05).unwrap();
        let s = build_smatrix(&geom, &basis, &grid, lambda).unwrap();
        // an unconverged limit is reported, not asserted on
        prop_assume!(s.converged);
        for d in &s.column_norm_defects {
            prop_assert!(*d < 1e-2, "{d}");
        }
        prop_assert!(s.unitarity_defect < 1e-2);
        // the well is symmetric under x -> -x
        let swap = end_swap_defect(&s).unwrap();
        prop_assert!(swap <= 2.0 * s.unitarity_defect + 1e-9, "{swap} vs {}", s.unitarity_defect);
        // continuity in the energy
        let t = build_smatrix(&geom, &basis, &grid, lambda + 1e-3).unwrap();
        prop_assert!(frobenius_distance(&s, &t).unwrap() < 0.05);
    }

    #[test]
    fn angular_eigenvalues_order(lambda in 0.2f64..4.0, k in 1usize..4) {
        let a = hd_eigen(0.5, lambda, k).unwrap().mu;
        let b = hd_eigen(0.5, lambda, k + 1).unwrap().mu;
        let c = hd_eigen(0.5, lambda + 0.1, k).unwrap().mu;
        prop_assert!(a < b);
        prop_assert!(c < a);
    }
}
