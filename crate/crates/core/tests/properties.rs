use cscdmd_core::datasets::{decode_field, encode_field};
use cscdmd_core::dictionary::{ConvDictionary, DictionaryGeometry, DictionaryInit};
use cscdmd_core::dmd::DmdModel;
use cscdmd_core::estimation::{project_ball, StateLayout};
use cscdmd_core::field::{CoeffTensor, Field};
use cscdmd_core::sparse::soft_threshold;
use proptest::prelude::*;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn shape() -> impl Strategy<Value = [usize; 3]> {
    (1usize..5, 1usize..6, 1usize..4).prop_map(|(a, b, c)| [a, b, c])
}

fn field(shape: [usize; 3]) -> impl Strategy<Value = Field> {
    prop::collection::vec(-10.0f64..10.0, shape.iter().product::<usize>())
        .prop_map(move |v| Field::from_vec(shape, v).unwrap())
}

fn geometry() -> impl Strategy<Value = DictionaryGeometry> {
    (
        (1usize..3, 1usize..3, 1usize..3),
        0usize..4,
        (0usize..3, 0usize..3, 0usize..2),
        (2usize..4, 2usize..4, 1usize..3),
    )
        .prop_map(|((my, mx, mz), extra, (ny, nx, nz), (gy, gx, gz))| {
            let decimation = [my, mx, mz];
            let m = my * mx * mz;
            DictionaryGeometry {
                decimation,
                channels: (m + extra).max(2),
                polyphase_order: [ny, nx, nz],
                field_shape: [my * gy, mx * gx, mz * gz],
            }
        })
}

proptest! {
    #[test]
    fn soft_threshold_is_the_l1_prox(v in prop::collection::vec(-5.0f64..5.0, 1..20), sigma in 0.0f64..2.0) {
        let t = sigma * sigma;
        let out = soft_threshold(&v, sigma);
        for (&x, &u) in v.iter().zip(&out) {
            prop_assert!(u.abs() <= x.abs());
            prop_assert!(u == 0.0 || u.signum() == x.signum());
            if u == 0.0 {
                prop_assert!(x.abs() <= t + 1e-12);
            } else {
                prop_assert!(((x - u) - t * u.signum()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn ball_projection_is_feasible_idempotent_and_nonexpansive(
        x in prop::collection::vec(-5.0f64..5.0, 8),
        y in prop::collection::vec(-5.0f64..5.0, 8),
        c in prop::collection::vec(-1.0f64..1.0, 8),
        eps in 0.0f64..3.0,
    ) {
        let px = project_ball(&x, &c, eps);
        let py = project_ball(&y, &c, eps);
        prop_assert!(dist(&px, &c) <= eps * (1.0 + 1e-12) + 1e-15);
        prop_assert!(dist(&project_ball(&px, &c, eps), &px) <= 1e-12);
        prop_assert!(dist(&px, &py) <= dist(&x, &y) + 1e-12);
        if dist(&x, &c) <= eps {
            prop_assert_eq!(&px, &x);
        }
    }

    #[test]
    fn surface_and_bed_selectors_partition_the_state(
        (s, x) in shape().prop_flat_map(|s| (Just(s), field(s))),
        planes in 0usize..4,
    ) {
        let layout = StateLayout::new(s, planes.min(s[2])).unwrap();
        let x = x.as_slice();
        let p = layout.observe(x);
        let q = layout.bed(x);
        prop_assert_eq!(p.len() + q.len(), x.len());
        prop_assert_eq!(&layout.observe(&layout.observe_adjoint(&p)), &p);
        prop_assert_eq!(&layout.bed(&layout.bed_adjoint(&q)), &q);
        let back: Vec<f64> = layout
            .observe_adjoint(&p)
            .iter()
            .zip(layout.bed_adjoint(&q))
            .map(|(a, b)| a + b)
            .collect();
        prop_assert_eq!(&back, &x.to_vec());
    }

    #[test]
    fn field_files_round_trip_exactly((s, f) in shape().prop_flat_map(|s| (Just(s), field(s)))) {
        let back = decode_field(&encode_field(&f)).unwrap();
        prop_assert_eq!(back.shape(), s);
        prop_assert_eq!(back.as_slice(), f.as_slice());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lattice_dictionaries_are_parseval_and_adjoint(g in geometry(), seed in any::<u64>(), scale in 0.0f64..3.0) {
        let d = ConvDictionary::new(g, DictionaryInit::Random { seed, scale }).unwrap();
        prop_assert!(d.check_tightness(3, seed) < 1e-12);
        prop_assert!(d.dc_leakage() < 1e-12);

        let x = Field::from_fn(g.field_shape, |r, c, z| ((r * 7 + c * 3 + z) as f64).sin());
        let mut y = d.zero_coeffs();
        y.as_mut_slice()
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = (i as f64 * 0.37).cos());
        let lhs = dot(d.synthesize(&y).unwrap().as_slice(), x.as_slice());
        let rhs = dot(y.as_slice(), d.analyze(&x).unwrap().as_slice());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn dmd_reproduces_linear_trajectories(
        rho in 0.6f64..0.99,
        theta in 0.1f64..1.0,
        mu in 0.3f64..0.9,
        y0 in prop::collection::vec(0.5f64..2.0, 3),
    ) {
        let (c, s) = (rho * theta.cos(), rho * theta.sin());
        let mut y = y0.clone();
        let mut snaps = Vec::new();
        for _ in 0..12 {
            snaps.push(CoeffTensor::from_vec(1, [3, 1, 1], y.clone()).unwrap());
            y = vec![c * y[0] - s * y[1], s * y[0] + c * y[1], mu * y[2]];
        }
        let model = DmdModel::fit(&snaps, 1.0, 3).unwrap();
        prop_assert_eq!(model.rank(), 3);
        let b = model.initial_amplitudes(&y0).unwrap();
        for (k, snap) in snaps.iter().enumerate() {
            let pred: Vec<f64> = model.evolve(&b, k as u32).unwrap().iter().map(|z| z.re).collect();
            prop_assert!(dist(&pred, snap.as_slice()) <= 1e-8);
        }
        for pair in snaps.windows(2) {
            let next = model.step_features(pair[0].as_slice()).unwrap();
            prop_assert!(dist(&next, pair[1].as_slice()) <= 1e-8);
        }
    }
}
