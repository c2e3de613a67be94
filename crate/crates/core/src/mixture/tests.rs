use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;

fn unit_normal() -> GaussianMixture {
    GaussianMixture::single(GaussianComponent::from_slices(&[0.0], &[1.0]).unwrap())
}

fn half_normal() -> GaussianMixture {
    GaussianMixture::new(
        vec![1.0],
        vec![GaussianComponent::from_slices(&[0.0], &[1.0]).unwrap()],
        Some(TruncationBox::positive_orthant(1)),
    )
    .unwrap()
}

fn column(xs: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(xs.len(), 1, xs)
}

#[test]
fn density_examples() {
    let peak = 1.0 / (2.0 * PI).sqrt();
    assert!((unit_normal().density(&[0.0]).unwrap() - peak).abs() < 1e-15);

    let twin = GaussianMixture::new(
        vec![0.5, 0.5],
        vec![GaussianComponent::from_slices(&[0.0], &[1.0]).unwrap(); 2],
        None,
    )
    .unwrap();
    assert!((twin.density(&[0.0]).unwrap() - peak).abs() < 1e-15);

    let h = half_normal();
    assert_eq!(h.density(&[-1.0]).unwrap(), 0.0);
    assert!((h.density(&[0.0]).unwrap() - 2.0 * peak).abs() < 1e-15);

    assert_eq!(unit_normal().density(&[0.0, 1.0]), Err(MixtureError::DimensionMismatch { expected: 1, got: 2 }));
}

#[test]
fn log_likelihood_examples() {
    let m = unit_normal();
    let one = m.log_likelihood(&column(&[0.0])).unwrap();
    assert!((one - (-0.918_938_533_204_672_7)).abs() < 1e-12);
    assert_eq!(m.log_likelihood(&DMatrix::zeros(0, 1)).unwrap(), 0.0);
    assert_eq!(m.log_likelihood(&column(&[0.3, 0.3])).unwrap(), 2.0 * m.log_likelihood(&column(&[0.3])).unwrap());
    assert_eq!(half_normal().log_likelihood(&column(&[0.3, -0.1])), Err(MixtureError::OutsideBox));
}

fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| f(lo + h * i as f64)).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

#[test]
fn densities_integrate_to_one() {
    let m = GaussianMixture::new(
        vec![0.3, 0.7],
        vec![
            GaussianComponent::from_slices(&[0.5], &[0.25]).unwrap(),
            GaussianComponent::from_slices(&[2.0], &[1.5]).unwrap(),
        ],
        Some(TruncationBox::new(vec![0.0], vec![3.0]).unwrap()),
    )
    .unwrap();
    let total = trapezoid(|x| m.density(&[x]).unwrap(), 0.0, 3.0, 20_000);
    assert!((total - 1.0).abs() < 1e-6, "{total}");
    let total = trapezoid(|x| m.untruncated().density(&[x]).unwrap(), -12.0, 14.0, 20_000);
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn truncated_density_monte_carlo_normalization_2d() {
    // importance check: E_q[f/q] with q a broad uniform over a box containing the bulk
    let m = GaussianMixture::new(
        vec![0.5, 0.5],
        vec![
            GaussianComponent::from_slices(&[0.3, 0.5], &[0.5, 0.3, 0.3, 0.6]).unwrap(),
            GaussianComponent::from_slices(&[2.0, 0.2], &[0.4, -0.1, -0.1, 0.3]).unwrap(),
        ],
        Some(TruncationBox::positive_orthant(2)),
    )
    .unwrap();
    let (w, h) = (8.0, 8.0);
    use rand::Rng as _;
    let mut rng = crate::seed::rng_from(17);
    let n = 1_000_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let x = rng.random::<f64>() * w;
        let y = rng.random::<f64>() * h;
        acc += m.density(&[x, y]).unwrap() * w * h;
    }
    let total = acc / n as f64;
    assert!((total - 1.0).abs() < 0.01, "{total}");
}

#[test]
fn marginalize_examples() {
    let g = GaussianMixture::single(GaussianComponent::from_slices(&[1.0, 2.0], &[3.0, 0.0, 0.0, 4.0]).unwrap());
    let m0 = g.marginalize(&[0]).unwrap();
    assert_eq!(m0.components()[0].mean()[0], 1.0);
    assert_eq!(m0.components()[0].covariance()[(0, 0)], 3.0);
    assert_eq!(g.marginalize(&[0, 1]).unwrap(), g);
    assert!(matches!(g.marginalize(&[]), Err(MixtureError::InvalidDims(_))));
    assert!(matches!(g.marginalize(&[2]), Err(MixtureError::InvalidDims(_))));
}

fn two_component_2d() -> GaussianMixture {
    GaussianMixture::new(
        vec![0.35, 0.65],
        vec![
            GaussianComponent::from_slices(&[0.0, 1.0], &[1.0, 0.6, 0.6, 0.8]).unwrap(),
            GaussianComponent::from_slices(&[2.0, -1.0], &[0.5, -0.2, -0.2, 1.2]).unwrap(),
        ],
        None,
    )
    .unwrap()
}

#[test]
fn marginal_matches_quadrature() {
    let g = two_component_2d();
    let m1 = g.marginalize(&[1]).unwrap();
    for y in [-3.0, -1.0, 0.0, 0.7, 2.5] {
        let oracle = trapezoid(|x| g.density(&[x, y]).unwrap(), -12.0, 14.0, 4000);
        assert!((m1.density(&[y]).unwrap() - oracle).abs() < 1e-6);
    }
}

#[test]
fn condition_examples() {
    let g = GaussianMixture::single(GaussianComponent::from_slices(&[0.0, 0.0], &[1.0, 0.5, 0.5, 1.0]).unwrap());
    let c = g.condition(&[1], &[1.0]).unwrap();
    assert_eq!(c.weights(), &[1.0]);
    assert!((c.components()[0].mean()[0] - 0.5).abs() < 1e-15);
    assert!((c.components()[0].covariance()[(0, 0)] - 0.75).abs() < 1e-15);

    assert!(matches!(g.condition(&[0, 1], &[0.0, 0.0]), Err(MixtureError::InvalidDims(_))));
    assert!(matches!(g.condition(&[], &[]), Err(MixtureError::InvalidDims(_))));
}

#[test]
fn diagonal_condition_equals_free_marginal() {
    let g = GaussianMixture::new(
        vec![0.4, 0.6],
        vec![
            GaussianComponent::from_slices(&[0.0, 0.0], &[1.0, 0.0, 0.0, 2.0]).unwrap(),
            GaussianComponent::from_slices(&[3.0, 1.0], &[0.5, 0.0, 0.0, 0.3]).unwrap(),
        ],
        None,
    )
    .unwrap();
    let c = g.condition(&[0], &[1.2]).unwrap();
    let marginal = g.marginalize(&[1]).unwrap();
    for (a, b) in c.components().iter().zip(marginal.components()) {
        assert_eq!(a, b);
    }
    // weights shift towards the component that explains y0
    assert!(c.weights()[1] != 0.6);
    // grid oracle: conditional pdf equals the renormalized joint slice
    let z = trapezoid(|y| g.density(&[1.2, y]).unwrap(), -15.0, 15.0, 6000);
    for y in [-1.0, 0.0, 0.5, 1.0, 2.0] {
        let slice = g.density(&[1.2, y]).unwrap() / z;
        assert!((c.density(&[y]).unwrap() - slice).abs() < 1e-7);
    }
}

#[test]
fn truncated_condition_stays_truncated() {
    let m = GaussianMixture::new(
        vec![1.0],
        vec![GaussianComponent::from_slices(&[1.0, 1.0], &[1.0, 0.3, 0.3, 1.0]).unwrap()],
        Some(TruncationBox::positive_orthant(2)),
    )
    .unwrap();
    let c = m.condition(&[0], &[0.5]).unwrap();
    assert_eq!(c.truncation(), Some(&TruncationBox::positive_orthant(1)));
    assert_eq!(c.density(&[-0.1]).unwrap(), 0.0);
    assert_eq!(m.condition(&[0], &[-0.5]), Err(MixtureError::OutsideBox));
}

#[test]
fn sample_examples() {
    assert_eq!(unit_normal().sample(0, 1).unwrap().nrows(), 0);

    let xs = unit_normal().sample(100_000, 42).unwrap();
    let n = xs.nrows() as f64;
    let mean = xs.sum() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.02, "{mean}");
    assert!((var - 1.0).abs() < 0.03, "{var}");

    let hs = half_normal().sample(100_000, 43).unwrap();
    assert!(hs.iter().all(|x| *x >= 0.0));
    let hmean = hs.sum() / hs.nrows() as f64;
    assert!((hmean - (2.0 / PI).sqrt()).abs() < 0.02, "{hmean}");

    assert_eq!(unit_normal().sample(50, 7).unwrap(), unit_normal().sample(50, 7).unwrap());
}

#[test]
fn sampling_stalls_on_empty_support() {
    let far = GaussianMixture::new(
        vec![1.0],
        vec![GaussianComponent::from_slices(&[0.0], &[1.0]).unwrap()],
        Some(TruncationBox::new(vec![30.0], vec![f64::INFINITY]).unwrap()),
    );
    // box mass ~5e-198: legal model, but rejection sampling cannot reach it
    let far = far.unwrap();
    assert_eq!(far.sample(1, 0), Err(MixtureError::RejectionStall));
}

#[test]
fn mode_examples() {
    let g = GaussianMixture::single(GaussianComponent::from_slices(&[1.234_567], &[0.7]).unwrap());
    assert!((g.mode_in(-3.0, 4.0).unwrap() - 1.234_567).abs() < 1e-6);

    let bimodal = GaussianMixture::new(
        vec![0.5, 0.5],
        vec![
            GaussianComponent::from_slices(&[-2.0], &[1.0]).unwrap(),
            GaussianComponent::from_slices(&[2.0], &[1.0]).unwrap(),
        ],
        None,
    )
    .unwrap();
    let m = bimodal.mode_in(-5.0, 5.0).unwrap();
    // the overlap pulls each peak inward by ~4·exp(-8); the fine-grid argmax is the oracle
    let grid_best = (0..=200_000)
        .map(|i| -5.0 + 5.0 * i as f64 / 200_000.0)
        .max_by(|a, b| bimodal.density(&[*a]).unwrap().partial_cmp(&bimodal.density(&[*b]).unwrap()).unwrap())
        .unwrap();
    assert!((grid_best + 1.998_66).abs() < 1e-4, "{grid_best}");
    assert!((m.abs() - grid_best.abs()).abs() < 1e-4, "{m} vs {grid_best}");

    // mass concentrated right of the interval: boundary wins
    assert_eq!(g.mode_in(-3.0, -1.0).unwrap(), -1.0);
    assert_eq!(g.mode_in(1.0, 1.0), Err(MixtureError::EmptyInterval));
}

fn arb_mixture_2d() -> impl Strategy<Value = GaussianMixture> {
    let comp = (-3.0f64..3.0, -3.0f64..3.0, 0.2f64..2.0, 0.2f64..2.0, -0.9f64..0.9).prop_map(|(m0, m1, s0, s1, rho)| {
        let c = rho * s0 * s1;
        GaussianComponent::from_slices(&[m0, m1], &[s0 * s0, c, c, s1 * s1]).unwrap()
    });
    prop::collection::vec((comp, 0.1f64..1.0), 1..=3).prop_map(|cs| {
        let total: f64 = cs.iter().map(|c| c.1).sum();
        let weights = cs.iter().map(|c| c.1 / total).collect();
        GaussianMixture::new(weights, cs.into_iter().map(|c| c.0).collect(), None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn conditional_matches_renormalized_slice(m in arb_mixture_2d(), obs in -2.0f64..2.0, dim in 0usize..2) {
        let c = m.condition(&[dim], &[obs]).unwrap();
        let joint = |free: f64| if dim == 0 { m.density(&[obs, free]).unwrap() } else { m.density(&[free, obs]).unwrap() };
        let z = trapezoid(joint, -20.0, 20.0, 8000);
        let total: f64 = c.weights().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        for i in 0..512 {
            let y = -6.0 + 12.0 * i as f64 / 511.0;
            prop_assert!((c.density(&[y]).unwrap() - joint(y) / z).abs() < 1e-6);
        }
    }

    #[test]
    fn joint_factorizes_into_marginal_and_conditional(m in arb_mixture_2d(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let joint = m.density(&[a, b]).unwrap();
        let marginal = m.marginalize(&[1]).unwrap().density(&[b]).unwrap();
        let conditional = m.condition(&[1], &[b]).unwrap().density(&[a]).unwrap();
        prop_assert!((joint - marginal * conditional).abs() <= 1e-9 * joint.max(1e-300));
    }

    #[test]
    fn sampling_is_deterministic(m in arb_mixture_2d(), seed in any::<u64>()) {
        let a = m.sample(20, seed).unwrap();
        let b = m.sample(20, seed).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
