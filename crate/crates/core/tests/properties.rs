use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kinfrac::density::{DensityField, Grid};
use kinfrac::equilibrium::Equilibrium;
use kinfrac::geometry::{DomainSpec, Vec2};
use kinfrac::grid_solver::{assemble, evolve, AssemblyParams};
use kinfrac::jump_mc::sample_jump;
use kinfrac::{Domain, Point};

fn interior_point(domain: &Domain, seed: u64) -> Point {
    domain.sample_uniform(&mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disk_exit_matches_chord(seed in any::<u64>(), theta in 0.0..std::f64::consts::TAU) {
        let disk = DomainSpec::unit_disk();
        let x = interior_point(&disk, seed);
        let s = Vec2::from_angle(theta);
        let d = disk.exit_distance(x, s).unwrap();
        let b = x.dot(s);
        let chord = -b + (b * b - x.norm_sq() + 1.0).sqrt();
        prop_assert!((d - chord).abs() < 1e-12);
    }

    #[test]
    fn exit_point_is_on_the_boundary(seed in any::<u64>(), theta in 0.0..std::f64::consts::TAU) {
        for domain in [DomainSpec::l_shape(), DomainSpec::unit_disk()] {
            let x = interior_point(&domain, seed);
            let hit = domain.ray_exit(x, Vec2::from_angle(theta)).unwrap();
            prop_assert!(domain.boundary_gap(hit.point) < 1e-9);
            prop_assert!(hit.distance > 0.0);
            // everything strictly before the exit is visible
            let before = x + Vec2::from_angle(theta) * (0.99 * hit.distance);
            prop_assert!(domain.segment_inside(x, before));
        }
    }

    #[test]
    fn boundary_distance_bounds_every_exit(seed in any::<u64>(), theta in 0.0..std::f64::consts::TAU) {
        let l = DomainSpec::l_shape();
        let x = interior_point(&l, seed);
        let delta = l.boundary_distance(x).unwrap();
        prop_assert!(l.exit_distance(x, Vec2::from_angle(theta)).unwrap() >= delta - 1e-12);
    }

    #[test]
    fn free_path_scales_inversely_with_speed(seed in any::<u64>(), theta in 0.0..std::f64::consts::TAU, speed in 0.01..100.0f64) {
        let disk = DomainSpec::unit_disk();
        let x = interior_point(&disk, seed);
        let s = Vec2::from_angle(theta);
        let r = disk.free_path(x, s * speed).unwrap();
        assert_relative_eq!(r * speed, disk.exit_distance(x, s).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn speed_cdf_is_a_distribution(alpha in 0.05..1.95f64, dim in 1usize..=2, s in 0.0..50.0f64, ds in 0.0..5.0f64) {
        let m = Equilibrium::normalized(alpha, dim).unwrap();
        let (lo, hi) = (m.speed_cdf(s), m.speed_cdf(s + ds));
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(lo <= hi + 1e-15);
        // continuous where the plateau meets the tail
        prop_assert!((m.speed_cdf(1.0 - 1e-12) - m.speed_cdf(1.0)).abs() < 1e-9);
        assert_relative_eq!(m.speed_cdf(1.0), m.inner_probability(), max_relative = 1e-12);
    }

    #[test]
    fn equilibrium_is_radial_and_normalized(alpha in 0.05..1.95f64, theta in 0.0..std::f64::consts::TAU, r in 0.0..20.0f64) {
        let m = Equilibrium::normalized(alpha, 2).unwrap();
        let v = Vec2::from_angle(theta) * r;
        prop_assert_eq!(m.density(v), m.density(-v));
        prop_assert!(m.density(v) > 0.0);
        assert_relative_eq!(m.mass(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn jumps_never_shorter_than_r_min(seed in any::<u64>(), alpha in 0.1..1.9f64, r_min in 1e-4..0.5f64, dim in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..32 {
            let y: Point = sample_jump(&mut rng, alpha, r_min, dim);
            let len = if dim == 1 { y.x.abs() } else { y.norm() };
            prop_assert!(len >= r_min * (1.0 - 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn matrix_is_a_sub_markov_generator(alpha in 0.2..1.8f64, cells in 24usize..48) {
        let domain = DomainSpec::interval(-1.0, 1.0).unwrap();
        let grid = Grid::covering(&domain, cells);
        let m = assemble(&domain, &grid, alpha, &AssemblyParams::default()).unwrap();
        prop_assert!(m.min_off_diagonal() >= 0.0);
        for i in 0..m.size() {
            prop_assert!(m.diagonal()[i] < 0.0);
            prop_assert!(m.row_sum(i) <= 1e-12 * m.max_abs_diagonal());
        }
    }

    #[test]
    fn euler_keeps_nonnegative_data_nonnegative(alpha in 0.2..1.8f64, seed in any::<u64>()) {
        use rand::Rng;
        let domain = DomainSpec::interval(-1.0, 1.0).unwrap();
        let grid = Grid::covering(&domain, 40);
        let m = assemble(&domain, &grid, alpha, &AssemblyParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut field = DensityField::from_fn(grid, 0.0, |_| 0.0);
        for c in 0..field.values.len() {
            if field.grid.inside[c] {
                field.values[c] = rng.random::<f64>();
            }
        }
        let traj = evolve(&field, &m, 0.05, m.stable_step()).unwrap();
        prop_assert!(traj.min_value() >= 0.0);
        prop_assert_eq!(traj.l2_increases(), 0);
        prop_assert_eq!(traj.mass_increases(), 0);
    }
}

#[test]
fn single_precision_instantiation() {
    let m = Equilibrium::<f32>::normalized(1.0, 2).unwrap();
    assert!((m.mass() - 1.0).abs() < 1e-5);
    let disk = DomainSpec::<f32>::unit_disk();
    let d = disk.exit_distance(Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0)).unwrap();
    assert!((d - 0.5).abs() < 1e-5);
}
