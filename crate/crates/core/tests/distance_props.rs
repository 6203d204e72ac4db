mod common;

use common::{heis_distance, line_distance, randers_value};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subfinsler::distance::{
    hopf_rinow_probe, shoot, sphere_map, sphere_points, ProbeOptions, ShootOptions, ShootStatus,
};
use subfinsler::flow::IntegrateOptions;
use subfinsler::{Domain, Error, ManifoldSpec, MinkowskiNorm};

fn arr3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

fn quadratic_plane() -> ManifoldSpec {
    let g = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
    ManifoldSpec::flat(2, Domain::Unbounded, MinkowskiNorm::quadratic(g).unwrap()).unwrap()
}

fn randers_plane(b: [f64; 2]) -> ManifoldSpec {
    let norm = MinkowskiNorm::randers(DMatrix::identity(2, 2), DVector::from_row_slice(&b)).unwrap();
    ManifoldSpec::flat(2, Domain::Unbounded, norm).unwrap()
}

#[test]
fn heisenberg_distances_match_closed_form() {
    let spec = ManifoldSpec::heisenberg();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let opts = ShootOptions::default();
    for _ in 0..6 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = shoot(&spec, &x, &y, &opts).unwrap();
        let d = heis_distance(arr3(&x), arr3(&y));
        assert_eq!(g.status, ShootStatus::Reached);
        assert!(g.residual <= opts.tol);
        assert!((g.length - d).abs() <= 1e-3 * d, "{x:?} -> {y:?}: {} vs {d}", g.length);
    }
}

#[test]
fn reversible_norms_give_symmetric_distances() {
    let spec = quadratic_plane();
    let opts = ShootOptions::default();
    let f = |w: [f64; 2]| (4.0 * w[0] * w[0] + w[1] * w[1]).sqrt();
    for (x, y) in [([0.0, 0.0], [1.0, 1.0]), ([-0.5, 2.0], [0.3, -1.0])] {
        let fwd = shoot(&spec, &x, &y, &opts).unwrap();
        let bwd = shoot(&spec, &y, &x, &opts).unwrap();
        let d = line_distance(f, x, y);
        assert!((fwd.length - d).abs() <= 1e-6 * d);
        assert!((fwd.length - bwd.length).abs() <= 1e-6 * d);
    }

    let h = ManifoldSpec::heisenberg();
    let (x, y) = ([0.1, -0.2, 0.3], [0.5, 0.4, -0.2]);
    let fwd = shoot(&h, &x, &y, &opts).unwrap();
    let bwd = shoot(&h, &y, &x, &opts).unwrap();
    assert!((fwd.length - bwd.length).abs() <= 1e-6);
}

#[test]
fn randers_distances_are_asymmetric() {
    let b = [0.5, 0.0];
    let spec = randers_plane(b);
    let opts = ShootOptions::default();
    let f = |w: [f64; 2]| randers_value([[1.0, 0.0], [0.0, 1.0]], b, w);
    let (x, y) = ([0.0, 0.0], [1.0, 0.0]);
    let fwd = shoot(&spec, &x, &y, &opts).unwrap();
    let bwd = shoot(&spec, &y, &x, &opts).unwrap();
    assert!((fwd.length - line_distance(f, x, y)).abs() <= 1e-6);
    assert!((bwd.length - line_distance(f, y, x)).abs() <= 1e-6);
    assert!((fwd.length - bwd.length).abs() >= 0.3);

    // Forward sphere points sit at forward distance r but not backward.
    let pts = sphere_map(&spec, &x, 1.0, 16, 4, &IntegrateOptions::default()).unwrap();
    let mut max_gap: f64 = 0.0;
    for s in &pts {
        let y = [s.point[0], s.point[1]];
        assert!((line_distance(f, x, y) - 1.0).abs() <= 1e-8);
        max_gap = max_gap.max((line_distance(f, y, x) - 1.0).abs());
    }
    assert!(max_gap > 0.1);
}

#[test]
fn heisenberg_sphere_points_are_at_distance_r() {
    let spec = ManifoldSpec::heisenberg();
    let x = [0.2, -0.1, 0.4];
    for r in [0.5, 1.0] {
        let pts = sphere_map(&spec, &x, r, 32, 7, &IntegrateOptions::default()).unwrap();
        assert_eq!(pts.len(), 32);
        for s in &pts {
            let d = heis_distance(x, arr3(&s.point));
            assert!((d - r).abs() <= 1e-6 * r, "{:?}: {d}", s.p);
        }
    }

    let plane = ManifoldSpec::flat(2, Domain::Unbounded, MinkowskiNorm::euclidean(2)).unwrap();
    let dirs: Vec<DVector<f64>> =
        (0..8).map(|i| f64::from(i) * std::f64::consts::FRAC_PI_4).map(|t| DVector::from_vec(vec![t.cos(), t.sin()])).collect();
    let pts = sphere_points(&plane, &[1.0, 1.0], 2.0, &dirs, &IntegrateOptions::default()).unwrap();
    for s in &pts {
        assert!(((s.point[0] - 1.0).hypot(s.point[1] - 1.0) - 2.0).abs() < 1e-12);
    }
}

#[test]
fn shooting_is_deterministic_across_pool_sizes() {
    let spec = ManifoldSpec::heisenberg();
    let opts = ShootOptions { seed: 9, ..ShootOptions::default() };
    let (x, y) = ([0.0, 0.0, 0.0], [0.3, -0.6, 0.2]);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| shoot(&spec, &x, &y, &opts).unwrap())
    };
    let a = run(1);
    let b = run(3);
    let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.p0), bits(&b.p0));
    assert_eq!(a, b);
}

#[test]
fn shooting_failures_and_errors() {
    let opts = ShootOptions::default();
    let inv = ManifoldSpec::involutive_plane();
    let g = shoot(&inv, &[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &ShootOptions { n_starts: 8, ..opts }).unwrap();
    assert_eq!(g.status, ShootStatus::Unreached);
    assert!(g.residual >= 0.5);
    assert_eq!(g.converged_starts, 0);

    let h = ManifoldSpec::heisenberg();
    assert!(matches!(shoot(&h, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &opts), Err(Error::InvalidArgument(_))));

    let disk = ManifoldSpec::flat(2, Domain::Ball { center: vec![0.0, 0.0], radius: 1.0 }, MinkowskiNorm::euclidean(2))
        .unwrap();
    assert!(matches!(shoot(&disk, &[0.0, 0.0], &[2.0, 0.0], &opts), Err(Error::Domain(_))));
    let g = shoot(&disk, &[-0.5, 0.0], &[0.0, 0.5], &opts).unwrap();
    assert_eq!(g.status, ShootStatus::Reached);
    assert!((g.length - 0.5f64.hypot(0.5)).abs() < 1e-8);
}

#[test]
fn probe_on_the_plane() {
    let spec = quadratic_plane();
    let region = [(-1.0, 1.0), (-1.0, 1.0)];
    let opts = ProbeOptions { t_max: 10.0, ..ProbeOptions::default() };
    let report = hopf_rinow_probe(&spec, &region, 5, 3, &opts).unwrap();
    assert_eq!(report.kind, "estimate");
    assert_eq!(report.success_fraction, 1.0);
    assert_eq!(report.triangle.checked, 5);
    assert_eq!(report.triangle.violations, 0);
    assert_eq!(report.lower_bound.violations, 0);
    assert!(report.asymmetry.max_abs <= 1e-6);
    assert_eq!(report.completeness.completed, report.completeness.directions);
    // The norm is bounded below by |w|, so |A w| / F(w) <= 1.
    assert!(report.lower_bound.max_speed_ratio <= 1.0);
    assert!(report.bracket.generating);

    let again = hopf_rinow_probe(&spec, &region, 5, 3, &opts).unwrap();
    assert_eq!(report, again);
}

#[test]
fn probe_on_heisenberg() {
    let spec = ManifoldSpec::heisenberg();
    let region = [(-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)];
    let opts = ProbeOptions { t_max: 20.0, ..ProbeOptions::default() };
    let report = hopf_rinow_probe(&spec, &region, 3, 1, &opts).unwrap();
    assert_eq!(report.success_fraction, 1.0);
    assert_eq!(report.triangle.violations, 0);
    assert_eq!(report.lower_bound.violations, 0);
    assert!(report.max_residual <= opts.shoot.tol);
    for pair in &report.pairs {
        let d = heis_distance(arr3(&pair.x), arr3(&pair.y));
        assert!((pair.forward.length - d).abs() <= 1e-3 * d);
    }
}
