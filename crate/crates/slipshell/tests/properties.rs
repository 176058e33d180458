use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slipshell::config::SimConfig;
use slipshell::coupling::Mollifier;
use slipshell::forms::korn_ratio;
use slipshell::galerkin::min_eig;
use slipshell::geometry::{domain_map, jacobian, to_cartesian, ReferenceGeometry};
use slipshell::numerics::{cross3, norm3};
use slipshell::spaces::{ShellBasis, ShellJet, SurfaceGrid, VolumeGrid};
use slipshell::verify::{random_shell, CartesianField};

fn jet() -> impl Strategy<Value = ShellJet> {
    (-0.5..0.5f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(value, d_theta, d_z)| ShellJet {
        value,
        d_theta,
        d_z,
        ..ShellJet::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobian_is_the_tangent_cross_product(jets in prop::collection::vec(jet(), 1..20)) {
        let geom = ReferenceGeometry::with_defaults(1.0, 2.0);
        let jac = jacobian(&geom, &jets).unwrap();
        for (j, e) in jac.iter().zip(&jets) {
            let c = norm3(&cross3(&[e.d_theta, 1.0 + e.value, 0.0], &[e.d_z, 0.0, 1.0]));
            prop_assert!((j - c).abs() <= 1e-13 * c);
        }
    }

    #[test]
    fn mollifier_dominates_and_stays_bounded(
        amp in 0.0..0.3f64,
        freq in 0.5..30.0f64,
        phase in 0.0..6.3f64,
        eps in 0.01..0.2f64,
        levels in 5usize..60,
    ) {
        let dt = 0.01;
        let samples: Vec<Vec<f64>> = (0..levels)
            .map(|j| {
                let t = j as f64 * dt;
                vec![amp * (freq * t + phase).sin(), amp * (freq * t).cos().abs(), -amp]
            })
            .collect();
        let mol = Mollifier::new(eps, dt, levels as f64 * dt).unwrap();
        let out = mol.apply(&samples, dt).unwrap();
        prop_assert!(mol.check(&samples, &out.values).is_ok());
        prop_assert!(out.convolution_error <= 0.5 * eps);
    }

    #[test]
    fn korn_ratio_is_scale_invariant(seed in any::<u64>(), factor in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let geom = ReferenceGeometry::with_defaults(1.0, 2.0);
        let grid = VolumeGrid::midpoint(1.0, 2.0, 6, 8, 6);
        let basis = ShellBasis::build(2.0, 2, 2);
        let surf = grid.surface();
        let eta = random_shell(&mut rng, &basis, basis.len(), 0.1, &SurfaceGrid::gauss(2.0, 16, 8));
        let map = domain_map(&geom, &grid, &eta.eval_grid(&surf), None).unwrap();
        let w = map.volume_weights();
        let points: Vec<[f64; 3]> = map.nodes.iter().map(|n| to_cartesian(n.mapped())).collect();
        let q = CartesianField::random(&mut rng).table(&points);
        let a = korn_ratio(&q, &w, 2.0, 1.5).unwrap();
        let b = korn_ratio(&q.scale(factor), &w, 2.0, 1.5).unwrap();
        prop_assert!(a.is_finite() && a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn config_round_trips(
        radius in 0.5..3.0f64,
        length in 0.5..5.0f64,
        dt in 1e-4..1e-1f64,
        slip in 0.01..10.0f64,
        amplitude in -5.0..5.0f64,
        n in 1usize..5,
    ) {
        let text = format!(
            "[geometry]\nradius = {radius}\nlength = {length}\n[physics]\nslip_length = {slip}\n\
             [discretization]\nbasis_size = {}\ndt = {dt}\n[forcing]\ninlet = \"pulse(0.0,0.2,{amplitude})\"\n",
            2 * n
        );
        let cfg = SimConfig::from_toml(&text).unwrap();
        let again = SimConfig::from_toml(&cfg.to_toml()).unwrap();
        prop_assert_eq!(cfg, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(coeffs in prop::collection::vec(-1.0..1.0f64, 4), rates in prop::collection::vec(-1.0..1.0f64, 4)) {
        let g = SimConfig::default().galerkin(None).unwrap();
        let sup: f64 = (0..4)
            .map(|i| {
                let mut c = vec![0.0; 4];
                c[i] = 1.0;
                coeffs[i].abs() * g.shell_jets_of(&c).iter().fold(0.0_f64, |m, j| m.max(j.value.abs()))
            })
            .sum();
        let scale = if sup > 0.0 { 0.2 / sup } else { 0.0 };
        let c: Vec<f64> = coeffs.iter().map(|x| x * scale).collect();
        let lvl = g.level(0.0, &g.shell_field(&c), &g.shell_field(&rates), None).unwrap();
        let m = g.block(&lvl, &lvl.basis).unwrap().mass;
        prop_assert!((&m - m.transpose()).amax() <= 1e-14 * m.amax());
        prop_assert!(min_eig(&m) > 0.0);
    }
}
