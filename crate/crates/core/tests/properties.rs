use proptest::prelude::*;
use seaice_ot::fields::principal_value;
use seaice_ot::prelude::*;
use seaice_ot::raster::io::{encode_pgm, parse_pgm};

fn raster_from(w: usize, h: usize, values: Vec<f64>) -> IntensityRaster {
    IntensityRaster::new(GridGeometry::new(w, h, 250.0).unwrap(), values, 0.0).unwrap()
}

fn grid_values(max_side: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (2..=max_side, 2..=max_side).prop_flat_map(|(w, h)| {
        (Just(w), Just(h), prop::collection::vec(0u8..=255, w * h))
            .prop_map(|(w, h, v)| (w, h, v.into_iter().map(f64::from).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalized_mass_is_a_positive_distribution(
        (w, h, mut values) in grid_values(12),
        floor in 1e-12f64..1e-3,
    ) {
        values[0] += 1.0;
        let m = normalize_to_mass(&raster_from(w, h, values), floor, None).unwrap();
        let total: f64 = m.mass().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(m.mass().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn pgm_round_trip((w, h, values) in grid_values(20)) {
        let r = raster_from(w, h, values.clone());
        let bytes = encode_pgm(&r);
        let (pw, ph, pixels) = parse_pgm(&bytes).unwrap();
        prop_assert_eq!((pw, ph), (w, h));
        let back: Vec<f64> = pixels.iter().map(|&b| f64::from(b)).collect();
        prop_assert_eq!(back, values);
    }

    #[test]
    fn strain_is_linear_in_velocity(
        a in -3.0f64..3.0,
        v1 in prop::collection::vec(-1e-2f64..1e-2, 2 * 5 * 4),
        v2 in prop::collection::vec(-1e-2f64..1e-2, 2 * 5 * 4),
    ) {
        let g = GridGeometry::new(5, 4, 250.0).unwrap();
        let dt = 3600.0;
        let field = |v: &[f64]| VelocityField { vx: v[..20].to_vec(), vy: v[20..].to_vec(), dt };
        let mix: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| a * x + y).collect();
        let (s1, s2, sm) = (
            strain(&field(&v1), &g, dt).unwrap(),
            strain(&field(&v2), &g, dt).unwrap(),
            strain(&field(&mix), &g, dt).unwrap(),
        );
        for i in 0..g.len() {
            for (m, x, y) in [(&sm.exx, &s1.exx, &s2.exx), (&sm.eyy, &s1.eyy, &s2.eyy), (&sm.exy, &s1.exy, &s2.exy)] {
                prop_assert!((m[i] - (a * x[i] + y[i])).abs() <= 1e-9 * (1.0 + m[i].abs()));
            }
        }
    }

    #[test]
    fn principal_value_is_rotation_invariant(
        exx in -1.0f64..1.0, eyy in -1.0f64..1.0, exy in -1.0f64..1.0,
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let (s, c) = theta.sin_cos();
        // R E Rᵀ
        let rxx = c * c * exx - 2.0 * s * c * exy + s * s * eyy;
        let ryy = s * s * exx + 2.0 * s * c * exy + c * c * eyy;
        let rxy = s * c * (exx - eyy) + (c * c - s * s) * exy;
        let (a, b) = (principal_value(exx, eyy, exy), principal_value(rxx, ryy, rxy));
        // Eigenvalue magnitudes may tie, in which case the sign choice is
        // resolved independently on each side.
        prop_assert!((a.abs() - b.abs()).abs() <= 1e-12);
        let tie = (0.5 * (exx + eyy)).abs() <= 1e-9;
        prop_assert!(tie || (a - b).abs() <= 1e-12);
    }

    #[test]
    fn regularized_value_is_symmetric(
        a in prop::collection::vec(0.1f64..1.0, 9),
        b in prop::collection::vec(0.1f64..1.0, 9),
        eps in 0.05f64..0.5,
    ) {
        let g = GridGeometry::new(3, 3, 1.0).unwrap();
        let mass = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            MassField::from_mass(g, v.iter().map(|x| x / s).collect(), 1e-12).unwrap()
        };
        let (p, q) = (mass(&a), mass(&b));
        let kernel = GibbsKernel::new(KernelSpec::dense(eps), g).unwrap();
        let opts = SinkhornOptions { tol: 1e-13, max_iter: 20_000, ..SinkhornOptions::default() };
        let pq = sinkhorn(&p, &q, &kernel, &opts).unwrap();
        let qp = sinkhorn(&q, &p, &kernel, &opts).unwrap();
        prop_assume!(pq.converged && qp.converged);
        let (x, y) = (wasserstein_value(&p, &q, &pq).unwrap(), wasserstein_value(&q, &p, &qp).unwrap());
        prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
    }

    #[test]
    fn ncc_is_invariant_to_affine_intensity(
        gain in 0.2f64..5.0,
        offset in 0.0f64..100.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 32;
        let src = raster_from(n, n, (0..n * n).map(|_| rng.gen_range(0.0..255.0)).collect());
        let tgt = raster_from(n, n, (0..n * n).map(|_| rng.gen_range(0.0..255.0)).collect());
        let scaled = tgt.with_values(tgt.values().iter().map(|v| gain * v + offset).collect()).unwrap();
        let mut params = NccParams::new(8);
        params.threshold = -1.0;
        let a = ncc_displacements(&src, &tgt, &params).unwrap();
        let b = ncc_displacements(&src, &scaled, &params).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.correlation - y.correlation).abs() <= 1e-9);
        }
    }
}
