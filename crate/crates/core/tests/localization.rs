use ensemble_da::localization::{gaspari_cohn, gc_inner, gc_outer, TaperMatrix};
use ensemble_da::{GridSpec, Point};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn taper_shape() {
    assert_eq!(gaspari_cohn(0.0).unwrap(), 1.0);
    assert!((gc_inner(1.0) - 5.0 / 24.0).abs() < 1e-12);
    assert!((gc_outer(1.0) - 5.0 / 24.0).abs() < 1e-12);
    for r in [2.0, 2.5, 10.0] {
        assert_eq!(gaspari_cohn(r).unwrap(), 0.0);
    }
    let values: Vec<f64> = (0..=10_000).map(|i| gaspari_cohn(2.0 * i as f64 / 10_000.0).unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn first_derivatives_match_at_the_knot() {
    let h = 1e-6;
    let inner = (gc_inner(1.0) - gc_inner(1.0 - h)) / h;
    let outer = (gc_outer(1.0 + h) - gc_outer(1.0)) / h;
    assert!((inner - outer).abs() < 1e-4, "{inner} vs {outer}");
}

#[test]
fn taper_is_positive_semidefinite_in_three_dimensions() {
    // the function is a valid correlation in R^3
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pts: Vec<[f64; 3]> = (0..120).map(|_| [rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)]).collect();
    let c = DMatrix::from_fn(120, 120, |a, b| {
        let d: f64 = (0..3).map(|k| (pts[a][k] - pts[b][k]).powi(2)).sum::<f64>().sqrt();
        gaspari_cohn(d).unwrap()
    });
    let min = SymmetricEigen::new(c).eigenvalues.min();
    assert!(min > -1e-10, "smallest eigenvalue {min}");
}

#[test]
fn taper_matrix_follows_distances() {
    let grid = GridSpec::new(12).unwrap();
    let wells = vec![Point::new(1.25, 1.25), Point::new(4.75, 3.25)];
    let taper = TaperMatrix::build(&grid, &wells, 1.5).unwrap();
    for l in 0..grid.num_cells() {
        for (k, w) in wells.iter().enumerate() {
            let expect = gaspari_cohn(grid.center(l).distance(w) / 1.5).unwrap();
            assert!((taper.entries()[(l, k)] - expect).abs() < 1e-15);
        }
    }
}
