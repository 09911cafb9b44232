use nalgebra::DMatrix;
use nmcool::hilbert::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn truncated_commutator_defect_sits_in_the_corner() {
    for dim in [2, 5, 12] {
        let a = single_mode_annihilation(dim);
        let ad = a.adjoint();
        let comm = &a * &ad - &ad * &a;
        for i in 0..dim {
            for j in 0..dim {
                let want = if i != j {
                    0.0
                } else if i == dim - 1 {
                    1.0 - dim as f64
                } else {
                    1.0
                };
                assert!((comm[(i, j)] - c(want, 0.0)).norm() < 1e-12, "dim {dim} ({i},{j})");
            }
        }
    }
}

#[test]
fn thermal_population_converges_with_dim() {
    for n in [0.1, 0.5, 1.0] {
        for dim in [12, 16] {
            let small = DensityMatrix::thermal(FockSpace::new(dim, 2).unwrap(), n, 0.0).unwrap();
            let big = DensityMatrix::thermal(FockSpace::new(2 * dim, 2).unwrap(), n, 0.0).unwrap();
            let (p, q) = (small.population(Mode::Magnon), big.population(Mode::Magnon));
            assert!((p / q - 1.0).abs() < 1e-3, "n {n} dim {dim}: {p} vs {q}");
        }
    }
}

#[test]
fn thermal_entropy_matches_numeric_entropy() {
    for n in [0.01, 0.2, 0.7, 1.0] {
        let space = FockSpace::new(12, 3).unwrap();
        let rho = DensityMatrix::thermal(space, n, 0.0).unwrap();
        let s = rho.partial_trace(Mode::Magnon).entropy();
        assert!((s - thermal_entropy(n).unwrap()).abs() < 1e-3, "n {n}");
        // photon in vacuum, so the joint entropy is the magnon one
        assert!((rho.entropy() - s).abs() < 1e-10);
    }
}

#[test]
fn thermal_entropy_values() {
    assert_eq!(thermal_entropy(0.0).unwrap(), 0.0);
    assert!((thermal_entropy(1.0).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
    assert!(thermal_entropy(-0.1).is_err());
    let mut prev = 0.0;
    for k in 1..50 {
        let s = thermal_entropy(0.1 * k as f64).unwrap();
        assert!(s > prev);
        prev = s;
    }
}

#[test]
fn partial_trace_of_product_state() {
    let space = FockSpace::new(4, 3).unwrap();
    let rho = DensityMatrix::thermal(space, 0.8, 0.3).unwrap();
    let m = rho.partial_trace(Mode::Magnon);
    let p = rho.partial_trace(Mode::Photon);
    assert_eq!((m.dim(), p.dim()), (4, 3));
    let wm = thermal_weights(0.8, 4).unwrap();
    let wp = thermal_weights(0.3, 3).unwrap();
    for (k, w) in wm.iter().enumerate() {
        assert!((m.matrix()[(k, k)].re - w).abs() < 1e-14);
    }
    for (k, w) in wp.iter().enumerate() {
        assert!((p.matrix()[(k, k)].re - w).abs() < 1e-14);
    }
}

#[test]
fn fock_index_is_magnon_major() {
    let space = FockSpace::new(3, 5).unwrap();
    assert_eq!(space.index(2, 1), 11);
    assert_eq!(space.levels(11), (2, 1));
    let rho = DensityMatrix::fock(space, 2, 1).unwrap();
    assert_eq!(rho.matrix()[(11, 11)], c(1.0, 0.0));
    assert!((rho.population(Mode::Magnon) - 2.0).abs() < 1e-15);
    assert!((rho.population(Mode::Photon) - 1.0).abs() < 1e-15);
}

#[test]
fn rejects_invalid_states() {
    let space = FockSpace::new(2, 2).unwrap();
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    m[(0, 0)] = c(0.5, 0.0);
    assert!(DensityMatrix::new(space, m.clone()).is_err());
    m[(1, 1)] = c(0.5, 0.0);
    m[(0, 1)] = c(0.0, 0.1);
    assert!(DensityMatrix::new(space, m.clone()).is_err());
    m[(1, 0)] = c(0.0, -0.1);
    assert!(DensityMatrix::new(space, m.clone()).is_ok());
    m[(0, 0)] = c(1.2, 0.0);
    m[(1, 1)] = c(-0.2, 0.0);
    assert!(DensityMatrix::new(space, m).is_err());
    assert!(FockSpace::new(1, 4).is_err());
}

fn random_state(dm: usize, dp: usize, entries: &[(f64, f64)]) -> DensityMatrix {
    let d = dm * dp;
    let a = DMatrix::from_fn(d, d, |i, j| {
        let (re, im) = entries[(i * d + j) % entries.len()];
        c(re + 0.1 * i as f64, im - 0.05 * j as f64)
    });
    let mut rho = &a * a.adjoint();
    let tr = trace(&rho).re;
    rho /= c(tr, 0.0);
    DensityMatrix::new(FockSpace::new(dm, dp).unwrap(), hermitian_part(&rho)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_trace_is_a_valid_state(
        dm in 2usize..5,
        dp in 2usize..5,
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40),
    ) {
        let rho = random_state(dm, dp, &entries);
        for mode in [Mode::Magnon, Mode::Photon] {
            let r = rho.partial_trace(mode);
            prop_assert!(r.validate().is_ok());
            prop_assert!((trace(r.matrix()).re - 1.0).abs() < 1e-10);
            prop_assert!(hermiticity_defect(r.matrix()) < 1e-12);
            prop_assert!(hermitian_spectrum(r.matrix()).iter().all(|&x| x > MIN_EIGENVALUE_TOL));
            prop_assert!((r.population() - rho.population(mode)).abs() < 1e-10);
        }
    }

    #[test]
    fn entropy_is_bounded(
        entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40),
    ) {
        let rho = random_state(3, 3, &entries);
        let s = rho.entropy();
        prop_assert!(s.is_finite());
        prop_assert!(s >= -1e-12 && s <= 9f64.ln() + 1e-12);
    }
}
