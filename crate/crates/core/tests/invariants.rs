use proptest::prelude::*;

use wz_core::grid::{gaussian_bump, GridFunction, SpatialGrid};
use wz_core::noise::{
    approximate, area_process, bn_process, polygonal_approx, sample_wiener, smoothed_approx, sn_identity_residual,
    sn_process, sup_distance, MultiPath, NoiseBundle, PathKind, Scheme, TimeGrid,
};
use wz_core::problem::{apply_l, apply_m, stratonovich_drift, CoefficientField, ProblemSpec};
use wz_core::solver::{oracle_constant, solve_approximating, SolveRequest, Target};

fn trig_field(coeffs: &[(f64, f64)]) -> CoefficientField {
    let terms: Vec<(u32, f64, f64)> = coeffs.iter().enumerate().map(|(m, &(c, s))| (m as u32, c, s)).collect();
    CoefficientField::trig(&terms)
}

fn trig_function(grid: &SpatialGrid, coeffs: &[(f64, f64)]) -> GridFunction {
    trig_field(coeffs).evaluate(grid).unwrap()
}

fn coeff_list(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn scaling_is_exact(seed in any::<u64>(), c in -3.0f64..3.0, n in prop::sample::select(vec![4usize, 8, 16])) {
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let w = sample_wiener(seed, 2, grid).unwrap();
        let cw = w.scaled(c);
        for scheme in [Scheme::Polygonal, Scheme::Smoothed] {
            let wn = approximate(&w, scheme, n).unwrap();
            let cwn = approximate(&cw, scheme, n).unwrap();
            let d = sup_distance(&w, &wn).unwrap();
            let cd = sup_distance(&cw, &cwn).unwrap();
            prop_assert!((cd - c.abs() * d).abs() <= 1e-12 * (1.0 + cd));
            let (a, an) = (area_process(&w), area_process(&wn));
            let (ca, can) = (area_process(&cw), area_process(&cwn));
            let (bn, _) = bn_process(&w, &wn).unwrap();
            let (cbn, _) = bn_process(&cw, &cwn).unwrap();
            let sn = sn_process(&w, &wn).unwrap();
            let csn = sn_process(&cw, &cwn).unwrap();
            let c2 = c * c;
            for m in (0..grid.n_points()).step_by(17) {
                let t = grid.t(m);
                let tol = 1e-11 * (1.0 + c2);
                prop_assert!((ca.get(0, 1, m) - c2 * a.get(0, 1, m)).abs() <= tol);
                prop_assert!((can.get(0, 1, m) - c2 * an.get(0, 1, m)).abs() <= tol);
                for i in 0..2 {
                    for j in 0..2 {
                        prop_assert!((cbn.get(i, j, m) - c2 * bn.get(i, j, m)).abs() <= tol);
                        let shift = if i == j { 0.5 * t } else { 0.0 };
                        prop_assert!(((csn.get(i, j, m) + shift) - c2 * (sn.get(i, j, m) + shift)).abs() <= tol);
                    }
                }
            }
        }
    }

    #[test]
    fn area_is_antisymmetric(seed in any::<u64>(), d1 in 1usize..4, n in prop::sample::select(vec![4usize, 8, 32])) {
        let w = sample_wiener(seed, d1, TimeGrid::new(0.7, 128).unwrap()).unwrap();
        let b = NoiseBundle::build(w, Scheme::Polygonal, n).unwrap();
        for m in 0..b.area.n_points() {
            for i in 0..d1 {
                prop_assert_eq!(b.area.get(i, i, m), 0.0);
                prop_assert_eq!(b.area_n.get(i, i, m), 0.0);
                for j in 0..d1 {
                    prop_assert_eq!(b.area.get(i, j, m) + b.area.get(j, i, m), 0.0);
                    prop_assert_eq!(b.area_n.get(i, j, m) + b.area_n.get(j, i, m), 0.0);
                }
            }
        }
        if d1 == 1 {
            prop_assert_eq!(b.sup_a_err, 0.0);
        }
    }

    #[test]
    fn polygonal_knots_and_adaptedness(seed in any::<u64>(), n in prop::sample::select(vec![2usize, 4, 8, 16]), k_frac in 0.0f64..1.0) {
        let grid = TimeGrid::new(2.0, 128).unwrap();
        let w = sample_wiener(seed, 1, grid).unwrap();
        let wn = polygonal_approx(&w, n).unwrap();
        let stride = 128 / n;
        for k in 0..n {
            prop_assert_eq!(wn.component(0)[(k + 1) * stride], w.component(0)[k * stride]);
        }
        // Perturb W strictly after knot k; W_n must not move on [0, t_{k+1}].
        let k = ((k_frac * n as f64) as usize).min(n - 1);
        let cut = k * stride;
        let mut row = w.component(0).to_vec();
        for v in row.iter_mut().skip(cut + 1) {
            *v += 1.0;
        }
        let perturbed = MultiPath::from_samples(grid, PathKind::Wiener, vec![row]).unwrap();
        let pn = polygonal_approx(&perturbed, n).unwrap();
        let end = ((k + 1) * stride).min(128);
        prop_assert_eq!(&pn.component(0)[..=end], &wn.component(0)[..=end]);
    }

    #[test]
    fn smoothed_approximant_is_adapted(seed in any::<u64>(), cut in 1usize..255) {
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let w = sample_wiener(seed, 1, grid).unwrap();
        let wn = smoothed_approx(&w, 8).unwrap();
        let mut row = w.component(0).to_vec();
        for v in row.iter_mut().skip(cut + 1) {
            *v -= 0.5;
        }
        let perturbed = MultiPath::from_samples(grid, PathKind::Wiener, vec![row]).unwrap();
        let pn = smoothed_approx(&perturbed, 8).unwrap();
        prop_assert_eq!(&pn.component(0)[..=cut], &wn.component(0)[..=cut]);
    }

    #[test]
    fn seeded_quantities_are_pure(seed in any::<u64>()) {
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let a = NoiseBundle::build(sample_wiener(seed, 2, grid).unwrap(), Scheme::Smoothed, 8).unwrap();
        let b = NoiseBundle::build(sample_wiener(seed, 2, grid).unwrap(), Scheme::Smoothed, 8).unwrap();
        prop_assert_eq!(a.w, b.w);
        prop_assert_eq!(a.wn, b.wn);
        prop_assert_eq!(a.sup_a_err, b.sup_a_err);
        prop_assert_eq!(a.bn_variation, b.bn_variation);
    }

    #[test]
    fn parseval_round_trip_and_monotonicity(coeffs in coeff_list(6), len in 1.0f64..30.0) {
        let g = SpatialGrid::new(32, len).unwrap();
        let u = trig_function(&g, &coeffs);
        let back = GridFunction::from_spectrum(&g, u.spectrum()).unwrap();
        let scale = u.max_abs().max(1e-300);
        prop_assert!(back.sub(&u).unwrap().max_abs() <= 1e-12 * scale);
        for m in 0..4u32 {
            let spectral = u.sobolev_norm_sq(m);
            let quadrature = u.sobolev_norm_sq_grid(m);
            prop_assert!(rel(spectral, quadrature) <= 1e-12, "m = {}: {} vs {}", m, spectral, quadrature);
            let next = u.sobolev_norm_sq(m + 1);
            prop_assert!(u.sobolev_norm(m) <= u.sobolev_norm(m + 1));
            let top = u.derivative(m + 1).sobolev_norm_sq(0);
            prop_assert!((next - (spectral + top)).abs() <= 1e-12 * next.max(1e-300));
        }
    }

    #[test]
    fn integration_by_parts(b in coeff_list(3), b0 in coeff_list(3), u in coeff_list(5), v in coeff_list(5)) {
        let g = SpatialGrid::new(64, 6.0).unwrap();
        let spec = ProblemSpec::builder(&g, 1)
            .a(CoefficientField::Constant(1.0))
            .b(vec![trig_field(&b)])
            .b0(vec![trig_field(&b0)])
            .build()
            .unwrap();
        let (u, v) = (trig_function(&g, &u), trig_function(&g, &v));
        let lhs = apply_m(&spec, 0, &u).unwrap().inner_grid(&v).unwrap()
            + u.inner_grid(&apply_m(&spec, 0, &v).unwrap()).unwrap();
        let rhs = spec.mbar(0).unwrap().mul(&u).unwrap().inner_grid(&v).unwrap();
        let scale = 1.0 + u.sobolev_norm(1) * v.sobolev_norm(1) * 10.0;
        prop_assert!((lhs - rhs).abs() <= 1e-11 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn constant_vector_fields_commute(b1 in -2.0f64..2.0, b2 in -2.0f64..2.0, u in coeff_list(6)) {
        let g = SpatialGrid::new(32, 4.0).unwrap();
        let spec = ProblemSpec::builder(&g, 2)
            .a(CoefficientField::Constant(1.0))
            .b(vec![CoefficientField::Constant(b1), CoefficientField::Constant(b2)])
            .build()
            .unwrap();
        let u = trig_function(&g, &u);
        let a = apply_m(&spec, 0, &apply_m(&spec, 1, &u).unwrap()).unwrap();
        let b = apply_m(&spec, 1, &apply_m(&spec, 0, &u).unwrap()).unwrap();
        prop_assert!(a.sub(&b).unwrap().max_abs() <= 1e-12 * (1.0 + a.max_abs()));
    }

    #[test]
    fn operators_are_linear(alpha in -2.0f64..2.0, beta in -2.0f64..2.0, u in coeff_list(5), v in coeff_list(5), b in coeff_list(2)) {
        let g = SpatialGrid::new(32, 5.0).unwrap();
        let spec = ProblemSpec::builder(&g, 1)
            .a(trig_field(&[(1.0, 0.0), (0.2, 0.1)]))
            .a1(CoefficientField::Constant(0.3))
            .a0(CoefficientField::Constant(-0.1))
            .b(vec![trig_field(&b)])
            .b0(vec![CoefficientField::Constant(0.4)])
            .build()
            .unwrap();
        let (u, v) = (trig_function(&g, &u), trig_function(&g, &v));
        let combo = u.scale(alpha).add(&v.scale(beta)).unwrap();
        type Op = fn(&ProblemSpec, &GridFunction) -> GridFunction;
        let ops: [Op; 3] = [
            |s, x| apply_l(s, x).unwrap(),
            |s, x| apply_m(s, 0, x).unwrap(),
            |s, x| stratonovich_drift(s, x).unwrap(),
        ];
        for op in ops {
            let lhs = op(&spec, &combo);
            let rhs = op(&spec, &u).scale(alpha).add(&op(&spec, &v).scale(beta)).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-11 * (1.0 + lhs.max_abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn solver_is_linear_in_the_data(seed in any::<u64>(), alpha in -2.0f64..2.0, c1 in 2.0f64..18.0, c2 in 2.0f64..18.0) {
        let g = SpatialGrid::new(64, 20.0).unwrap();
        let u = gaussian_bump(&g, c1, 1.0, 1.0).unwrap();
        let v = gaussian_bump(&g, c2, 1.5, 0.5).unwrap();
        let build = |u0: GridFunction| {
            ProblemSpec::builder(&g, 1)
                .a(trig_field(&[(0.5, 0.0), (0.1, 0.0)]))
                .b(vec![trig_field(&[(0.5, 0.0), (0.2, 0.1)])])
                .b0(vec![CoefficientField::Constant(0.3)])
                .u0(u0)
                .build()
                .unwrap()
        };
        let w = sample_wiener(seed, 1, TimeGrid::new(0.5, 256).unwrap()).unwrap();
        let wn = polygonal_approx(&w, 16).unwrap();
        let run = |spec: &ProblemSpec| {
            let mut req = SolveRequest::new(spec, &wn, Target::Approximating);
            req.record_every = 256;
            solve_approximating(&req).unwrap().terminal().unwrap().clone()
        };
        let lhs = run(&build(u.scale(alpha).add(&v).unwrap()));
        let rhs = run(&build(u.clone())).scale(alpha).add(&run(&build(v.clone()))).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() <= 1e-11 * (1.0 + lhs.max_abs()));
    }

    #[test]
    fn transport_preserves_every_norm(seed in any::<u64>(), b in -1.5f64..1.5, n in prop::sample::select(vec![8usize, 32]), smoothed in any::<bool>()) {
        let g = SpatialGrid::new(128, 20.0).unwrap();
        let spec = ProblemSpec::builder(&g, 1)
            .sigma(vec![CoefficientField::Constant(0.0)])
            .b(vec![CoefficientField::Constant(b)])
            .u0(gaussian_bump(&g, 10.0, 1.0, 1.0).unwrap())
            .build()
            .unwrap();
        let w = sample_wiener(seed, 1, TimeGrid::new(1.0, 512).unwrap()).unwrap();
        let scheme = if smoothed { Scheme::Smoothed } else { Scheme::Polygonal };
        let wn = approximate(&w, scheme, n).unwrap();
        // RK4 damps imaginary modes by O((hρ)^6) per step; four substeps keep that below the tolerance.
        for m in 0..3u32 {
            let mut req = SolveRequest::new(&spec, &wn, Target::Approximating);
            req.source = Some(&w);
            req.substeps = 4;
            req.record_every = 16;
            req.sobolev_m = m;
            req.keep_states = false;
            let tr = solve_approximating(&req).unwrap();
            let n0 = spec.u0().sobolev_norm(m);
            for &nm in &tr.norms {
                prop_assert!(rel(nm, n0) <= 1e-9, "m = {}: {} vs {}", m, nm, n0);
            }
        }
    }
}

#[test]
fn sn_identity_residual_shrinks_with_the_fine_step() {
    // Matched paths: the 2^14 path is the 2^16 path subsampled. The residual is a
    // quadratic-variation error of order dt^{1/2}, so a fourfold refinement halves it.
    let replicas = 16;
    let (mut coarse, mut fine) = (0.0, 0.0);
    for r in 0..replicas {
        let w = sample_wiener(wz_core::noise::replica_seed(404, r), 2, TimeGrid::new(1.0, 1 << 16).unwrap()).unwrap();
        let wc = w.subsample(4).unwrap();
        let max = |b: &NoiseBundle| sn_identity_residual(b).into_iter().fold(0.0, f64::max);
        fine += max(&NoiseBundle::build(w, Scheme::Polygonal, 16).unwrap());
        coarse += max(&NoiseBundle::build(wc, Scheme::Polygonal, 16).unwrap());
    }
    let ratio = fine / coarse;
    assert!(ratio <= 0.6, "residual ratio {ratio}");
}

#[test]
fn oracle_transport_translates_by_the_path() {
    let g = SpatialGrid::new(64, 20.0).unwrap();
    let spec = ProblemSpec::builder(&g, 1)
        .sigma(vec![CoefficientField::Constant(0.0)])
        .b(vec![CoefficientField::Constant(1.0)])
        .u0(gaussian_bump(&g, 10.0, 1.0, 1.0).unwrap())
        .build()
        .unwrap();
    let path = MultiPath::from_fn(TimeGrid::new(1.0, 8).unwrap(), 1, |_, t| 3.0 * t).unwrap();
    let tr = oracle_constant(&spec, &path, 8, 0).unwrap();
    let moved = spec.u0().translate(3.0);
    assert!(tr.terminal().unwrap().sub(&moved).unwrap().max_abs() < 1e-12);
}
