use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;
use uniconn::connection::{deformation_h, deformation_h_terms, transpose_torsion, torsion};
use uniconn::curvature::antisymmetry_residual;
use uniconn::prelude::*;
use uniconn::tensor::normalized_residual;

fn manifold(which: usize, seed: u64) -> Manifold {
    match which {
        0 => preset_manifold("euclidean", &[3.0]).unwrap(),
        1 => preset_manifold("sphere2", &[1.5]).unwrap(),
        2 => preset_manifold("half_plane", &[0.7]).unwrap(),
        _ => preset_manifold("bumpy", &[3.0, 0.08, seed as f64]).unwrap(),
    }
}

fn context(which: usize, seed: u64) -> PointContext {
    let m = manifold(which, seed);
    let spec = ConnectionSpec::random(m.chart.dim(), &mut ChaCha8Rng::seed_from_u64(seed));
    let p = m.chart.sample_points(1, seed ^ 0x5a5a).remove(0);
    PointContext::evaluate(&m.chart, &m.metric, &spec, &p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn torsion_and_metricity_laws(which in 0usize..4, seed in any::<u64>()) {
        let ctx = context(which, seed);
        let gt = gamma_tilde(&ctx, &HScales::default());
        prop_assert!(check_torsion(&ctx, &gt).residual < 1e-10);
        prop_assert!(check_nonmetricity(&ctx, &gt).residual < 1e-10);
        let t = torsion(&gt).t;
        prop_assert!(transpose_torsion(&ctx, &t).residual < 1e-10);
    }

    #[test]
    fn h_is_the_sum_of_its_terms(which in 0usize..4, seed in any::<u64>()) {
        let ctx = context(which, seed);
        let h = deformation_h(&ctx, &HScales::default());
        let n = ctx.dim();
        let sum = deformation_h_terms(&ctx).into_iter().fold(Tensor3::zeros(n), |acc, (_, t)| acc.add(&t));
        prop_assert!(normalized_residual(&h, &sum) < 1e-13);
    }

    #[test]
    fn phi_split_is_self_adjoint_plus_skew(which in 0usize..4, seed in any::<u64>()) {
        let ctx = context(which, seed);
        let b1 = ctx.split.big_phi1_values();
        let b2 = ctx.split.big_phi2_values();
        prop_assert!(normalized_residual(&b1, &b1.transpose()) < 1e-13);
        prop_assert!(normalized_residual(&b2, &b2.transpose().scale(-1.0)) < 1e-13);
        let whole = ctx.split.phi1.values().add(&ctx.split.phi2.values());
        prop_assert!(normalized_residual(&whole, &ctx.jets.phi.values()) < 1e-13);
    }

    #[test]
    fn closed_form_curvature_matches_direct(which in 0usize..4, seed in any::<u64>()) {
        let ctx = context(which, seed);
        let out = curvature_formula(&ctx, &FormulaOptions::default()).unwrap();
        let direct = curvature_direct(&ctx, &HScales::default()).unwrap();
        prop_assert!(normalized_residual(&out.total, &direct) < 1e-8);
        prop_assert_eq!(antisymmetry_residual(&direct), 0.0);
        let n = ctx.dim();
        let sum = out.groups.iter().fold(Tensor4::zeros(n), |acc, (_, t)| acc.add(t));
        prop_assert!(normalized_residual(&out.total, &sum) < 1e-13);
    }

    #[test]
    fn dropping_a_nonzero_group_breaks_agreement(seed in any::<u64>(), g in 0usize..14) {
        let ctx = context(3, seed);
        let group = TermGroup::ALL[g];
        let out = curvature_formula(&ctx, &FormulaOptions::default().without(group)).unwrap();
        let direct = curvature_direct(&ctx, &HScales::default()).unwrap();
        let full = curvature_formula(&ctx, &FormulaOptions::default()).unwrap();
        let size = full.group(group).max_abs();
        prop_assume!(size > 1e-4);
        prop_assert!(normalized_residual(&out.total, &direct) > 1e-8);
    }
}
