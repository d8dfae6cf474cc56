//! Property tests over randomized fields.

use jmgt::field::{lp_norm, LpExponent, SpectralField};
use jmgt::grid::SpectralGrid;
use proptest::prelude::*;

fn arb_samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Parseval equality holds for arbitrary bounded real sample arrays.
    #[test]
    fn parseval_holds(samples in arb_samples(32)) {
        let grid = SpectralGrid::shared(1, 32, 5.0).unwrap();
        let field = SpectralField::forward_transform(&grid, &samples).unwrap();
        let coeff_norm = field.sobolev_seminorm(0);
        let sample_norm = lp_norm(&grid, &samples, LpExponent::P(2)).unwrap();
        prop_assert!((coeff_norm - sample_norm).abs() <= 1e-12 * sample_norm.max(1.0));
    }

    /// Transforms of real data are Hermitian-symmetric and round-trip.
    #[test]
    fn real_fields_hermitian_and_invertible(samples in arb_samples(32)) {
        let grid = SpectralGrid::shared(1, 32, 2.0).unwrap();
        let field = SpectralField::forward_transform(&grid, &samples).unwrap();
        prop_assert!(field.hermitian_defect() < 1e-12);
        let back = field.inverse_transform();
        let worst = samples
            .iter()
            .zip(back.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(worst < 1e-12 * 10.0);
    }

    /// The dealiased product is commutative and distributes over addition.
    #[test]
    fn product_commutative_and_bilinear(
        a in arb_samples(16),
        b in arb_samples(16),
        c in arb_samples(16),
        scale in -3.0f64..3.0,
    ) {
        let grid = SpectralGrid::shared(1, 16, 1.0).unwrap();
        let fa = SpectralField::forward_transform(&grid, &a).unwrap();
        let fb = SpectralField::forward_transform(&grid, &b).unwrap();
        let fc = SpectralField::forward_transform(&grid, &c).unwrap();

        let ab = fa.pointwise_product(&fb).unwrap();
        let ba = fb.pointwise_product(&fa).unwrap();
        let mut d = ab.clone();
        d.axpy(-1.0, &ba);
        prop_assert!(d.max_coeff_norm() < 1e-10);

        // (a + s c) b = a b + s (c b)
        let mut asc = fa.clone();
        asc.axpy(scale, &fc);
        let lhs = asc.pointwise_product(&fb).unwrap();
        let cb = fc.pointwise_product(&fb).unwrap();
        let mut rhs = ab;
        rhs.axpy(scale, &cb);
        let mut d = lhs;
        d.axpy(-1.0, &rhs);
        prop_assert!(d.max_coeff_norm() < 1e-9);
    }
}
