use fraclab_core::kplane::{compute_q, transform};
use fraclab_core::measures::{make_cantor_measure, product_measure, pushforward_affine, uniform_grid_measure};
use fraclab_core::projections::{check_duality_identity, duality_bound};
use fraclab_core::spectral::{fourier_transform, shell_energy, FourierKernel};
use fraclab_core::unions::{rasterize_union, sumset_section};
use fraclab_core::{AtomBudget, CantorSpec, DiscreteMeasure, GridField, PlaneParam, PlaneSet, ProjectionParam};
use num_complex::Complex64;
use proptest::prelude::*;

fn measure_1d(atoms: &[(f64, f64)]) -> DiscreteMeasure {
    let points = atoms.iter().map(|a| vec![a.0]).collect();
    let weights = atoms.iter().map(|a| a.1).collect();
    DiscreteMeasure::new(1, points, weights).unwrap()
}

fn atoms_2d() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.01f64..1.0), 1..40)
}

fn measure_2d(atoms: &[(f64, f64, f64)]) -> DiscreteMeasure {
    let points = atoms.iter().map(|a| vec![a.0, a.1]).collect();
    let weights = atoms.iter().map(|a| a.2).collect();
    DiscreteMeasure::new(2, points, weights).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duality_holds_within_bound(
        (n, l) in (2usize..=8).prop_flat_map(|n| (Just(n), 1..n)),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-50.0..50.0)).collect() };
        let x = ProjectionParam::new(n, l, draw(l * (n - l))).unwrap();
        let (xi, p) = (draw(l), draw(n));
        prop_assert!(check_duality_identity(&x, &xi, &p).unwrap() <= duality_bound(&x, &xi, &p));
    }

    #[test]
    fn transform_is_bounded_by_mass(atoms in atoms_2d(), xi in prop::array::uniform2(-200.0f64..200.0)) {
        let mu = measure_2d(&atoms);
        let v = fourier_transform(&mu, &xi, None).unwrap();
        prop_assert!(v.norm() <= mu.mass() * (1.0 + 1e-12));
    }

    #[test]
    fn zero_frequency_returns_mass(atoms in atoms_2d()) {
        let mu = measure_2d(&atoms);
        let v = fourier_transform(&mu, &[0.0, 0.0], None).unwrap();
        let direct: f64 = atoms.iter().map(|a| a.2).sum();
        prop_assert!((v.re - direct).abs() <= 1e-12 * direct);
        prop_assert_eq!(v.im, 0.0);
    }

    #[test]
    fn transform_is_linear_in_the_density(
        atoms in atoms_2d(),
        xi in prop::array::uniform2(-50.0f64..50.0),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mu = measure_2d(&atoms);
        let g1: Vec<Complex64> = (0..atoms.len()).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let g2: Vec<Complex64> = (0..atoms.len()).map(|i| Complex64::new(1.0, -(i as f64).sqrt())).collect();
        let mix: Vec<Complex64> = g1.iter().zip(&g2).map(|(u, v)| u * a + v * b).collect();
        let lhs = fourier_transform(&mu, &xi, Some(&mix)).unwrap();
        let rhs = fourier_transform(&mu, &xi, Some(&g1)).unwrap() * a + fourier_transform(&mu, &xi, Some(&g2)).unwrap() * b;
        let scale = mix.iter().zip(mu.weights()).map(|(g, w)| g.norm() * w).sum::<f64>() + 1.0;
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
    }

    #[test]
    fn product_and_pushforward_conserve_mass(
        a in prop::collection::vec((-1.0f64..1.0, 0.01f64..1.0), 1..20),
        b in prop::collection::vec((-1.0f64..1.0, 0.01f64..1.0), 1..20),
        m in prop::array::uniform2(-2.0f64..2.0),
    ) {
        let (ma, mb) = (measure_1d(&a), measure_1d(&b));
        let prod = product_measure(&ma, &mb, AtomBudget::DEFAULT).unwrap();
        prop_assert!((prod.mass() - ma.mass() * mb.mass()).abs() <= 1e-12 * prod.mass());
        let pushed = pushforward_affine(&prod, &[m.to_vec()], &[0.5]).unwrap();
        prop_assert!((pushed.mass() - prod.mass()).abs() <= 1e-12 * prod.mass());
        let sum = sumset_section(&ma, &mb, m[0], AtomBudget::DEFAULT).unwrap();
        prop_assert!((sum.mass() - ma.mass() * mb.mass()).abs() <= 1e-12 * sum.mass());
    }

    #[test]
    fn plane_transform_is_linear_and_bounded(
        values in prop::collection::vec(-5.0f64..5.0, 16 * 16),
        other in prop::collection::vec(-5.0f64..5.0, 16 * 16),
        y0 in -1.0f64..1.0,
        y1 in -1.0f64..1.0,
        c in -4.0f64..4.0,
    ) {
        let bounds = vec![(0.0, 1.0), (-3.0, 3.0)];
        let f = GridField::new(vec![16, 16], bounds.clone(), values.clone()).unwrap();
        let g = GridField::new(vec![16, 16], bounds.clone(), other.clone()).unwrap();
        let mix: Vec<f64> = values.iter().zip(&other).map(|(u, v)| u + c * v).collect();
        let h = GridField::new(vec![16, 16], bounds, mix).unwrap();
        let y = PlaneParam::new(2, 1, vec![y0, y1]).unwrap();
        let (tf, tg, th) = (transform(&f, &y, 64).unwrap(), transform(&g, &y, 64).unwrap(), transform(&h, &y, 64).unwrap());
        prop_assert!((th - (tf + c * tg)).abs() <= 1e-10 * (1.0 + th.abs()));
        let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(tf.abs() <= sup * (1.0 + 1e-12));
    }

    #[test]
    fn rasterization_is_monotone_in_the_plane_set(
        planes in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..12),
        extra in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..6),
        per_axis in 2usize..40,
    ) {
        let clip = [(0.0, 1.0), (0.0, 2.0)];
        let small = PlaneSet::new(2, 1, measure_2d(&planes.iter().map(|p| (p.0, p.1, 1.0)).collect::<Vec<_>>())).unwrap();
        let all: Vec<(f64, f64, f64)> = planes.iter().chain(&extra).map(|p| (p.0, p.1, 1.0)).collect();
        let big = PlaneSet::new(2, 1, measure_2d(&all)).unwrap();
        let a = rasterize_union(&small, &clip, per_axis).unwrap();
        let b = rasterize_union(&big, &clip, per_axis).unwrap();
        for (u, v) in a.values().iter().zip(b.values()) {
            prop_assert!(*u <= *v);
            prop_assert!(*v == 0.0 || *v == 1.0);
        }
    }

    #[test]
    fn computed_q_satisfies_its_identity(
        (d, k) in (2usize..=5).prop_flat_map(|d| (Just(d), 1..d)),
        t in 0.05f64..0.95,
        e in 0.05f64..0.95,
    ) {
        let big_n = ((k + 1) * (d - k)) as f64;
        let alpha = big_n - k as f64 + t * k as f64;
        let epsilon = e * (alpha - big_n + k as f64);
        let c = compute_q(d, k, alpha, epsilon).unwrap();
        let rhs = (alpha - big_n + k as f64 - epsilon) / (2.0 * (d - k) as f64);
        prop_assert!(((0.5 - 1.0 / c.q) - rhs).abs() <= 1e-12);
        prop_assert!((1.0 / c.q + 1.0 / c.q_conj - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn shell_energy_ignores_worker_count() {
    let c = make_cantor_measure(&CantorSpec::middle_thirds(7), AtomBudget::DEFAULT).unwrap();
    let mu = product_measure(&c, &c, AtomBudget::DEFAULT).unwrap();
    let kernel = FourierKernel::new(&mu, None).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| shell_energy(&kernel, 4, 0.5, 3000, 11).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.0.to_bits(), b.0.to_bits());
    assert_eq!(a.1.to_bits(), b.1.to_bits());
}

#[test]
fn rasterization_ignores_worker_count() {
    let planes = PlaneSet::new(2, 1, uniform_grid_measure(2, 40, AtomBudget::DEFAULT).unwrap()).unwrap();
    let clip = [(0.0, 1.0), (0.0, 2.0)];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| rasterize_union(&planes, &clip, 97).unwrap())
    };
    assert_eq!(run(1).values(), run(4).values());
}
