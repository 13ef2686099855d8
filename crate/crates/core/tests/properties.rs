use doro::data::{inject_outliers, synth_subpop, OutlierMode, SyntheticSpec};
use doro::oracle::{
    cvar_primal_exact, default_resolution, doro_risk_discrete, dro_primal_bruteforce, dro_risk,
    empirical_moment, huber_mix, moment_gap, radius_covers_domains, tv_ball_dro_infimum,
    tv_distance, worst_case_risk, DiscreteDistribution, GroupedPopulation,
};
use doro::risk::{
    doro_batch_risk, dual_objective, minimize_eta, CressieReadSpec, Divergence, LossBatch,
    DEFAULT_ETA_TOL,
};
use doro::train::{stability_stat, train, Method, MetricsRecord, TrainConfig, TrainRun};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = Divergence> {
    prop_oneof![
        Just(Divergence::Cvar),
        Just(Divergence::ChiSquare),
        Just(Divergence::CressieRead(4.0)),
    ]
}

fn distribution(max_atoms: usize, max_loss: f64) -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec((0.0..=max_loss, 0.05..1.0f64), 1..=max_atoms).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        DiscreteDistribution::new(atoms.into_iter().map(|(l, m)| (l, m / total))).unwrap()
    })
}

fn batch() -> impl Strategy<Value = LossBatch> {
    prop::collection::vec(0.0..10.0f64, 1..40).prop_map(|l| LossBatch::uniform(l).unwrap())
}

fn risk(batch: &LossBatch, spec: &CressieReadSpec) -> f64 {
    minimize_eta(batch, spec, DEFAULT_ETA_TOL).unwrap().risk
}

fn population() -> impl Strategy<Value = GroupedPopulation> {
    (2usize..=6, 1usize..=4)
        .prop_flat_map(|(n, k)| {
            (
                prop::collection::vec(0.0..=10.0f64, n),
                prop::collection::vec(0.05..1.0f64, n),
                prop::collection::vec((prop::collection::vec(any::<bool>(), n), 0..n), k),
            )
        })
        .prop_map(|(losses, masses, domains)| {
            let total: f64 = masses.iter().sum();
            let domains = domains
                .into_iter()
                .map(|(mut m, forced)| {
                    m[forced] = true;
                    m
                })
                .collect();
            GroupedPopulation::new(losses, masses.iter().map(|m| m / total).collect(), domains)
                .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cvar_dual_matches_sorted_primal(p in distribution(8, 10.0), alpha in 0.01..=1.0f64) {
        let spec = CressieReadSpec::from_alpha(Divergence::Cvar, alpha).unwrap();
        let dual = risk(&p.to_batch(), &spec);
        prop_assert!((dual - cvar_primal_exact(&p, alpha).unwrap()).abs() <= 1e-6);
    }

    #[test]
    fn smooth_dual_matches_brute_force_primal(
        p in distribution(4, 10.0),
        alpha in 0.05..=1.0f64,
        beta in prop_oneof![Just(Divergence::ChiSquare), Just(Divergence::CressieRead(4.0))],
    ) {
        let spec = CressieReadSpec::from_alpha(beta, alpha).unwrap();
        let primal = dro_primal_bruteforce(&p, &spec, default_resolution(p.support_size())).unwrap();
        prop_assert!((risk(&p.to_batch(), &spec) - primal).abs() <= 1e-3);
    }

    #[test]
    fn risk_lies_between_mean_and_max(b in batch(), k in kind(), alpha in 0.01..=1.0f64) {
        let r = risk(&b, &CressieReadSpec::from_alpha(k, alpha).unwrap());
        prop_assert!(r >= b.mean() - 1e-9 && r <= b.max() + 1e-9, "{} not in [{}, {}]", r, b.mean(), b.max());
    }

    #[test]
    fn risk_grows_as_alpha_shrinks(b in batch(), k in kind(), a in 0.01..=1.0f64, t in 0.0..=1.0f64) {
        let smaller = a * t.max(0.01);
        let r = |alpha| risk(&b, &CressieReadSpec::from_alpha(k, alpha).unwrap());
        prop_assert!(r(smaller) >= r(a) - 1e-7);
    }

    #[test]
    fn doro_risk_shrinks_as_eps_grows(b in batch(), k in kind(), alpha in 0.05..=1.0f64, e1 in 0.0..0.49f64, e2 in 0.0..0.49f64) {
        let spec = CressieReadSpec::from_alpha(k, alpha).unwrap();
        let (lo, hi) = (e1.min(e2), e1.max(e2));
        let r = |eps| doro_batch_risk(&b, &spec, eps, DEFAULT_ETA_TOL).unwrap().risk;
        prop_assert!(r(hi) <= r(lo) + 1e-9 * (1.0 + r(lo).abs()));
    }

    #[test]
    fn ordering_holds_when_radius_covers_domains(pop in population(), beta in prop_oneof![Just(2.0), Just(4.0)]) {
        let alpha = pop.min_domain_mass();
        let p = pop.distribution();
        let (r_max, _) = worst_case_risk(&pop);
        let cvar = cvar_primal_exact(&p, alpha).unwrap();
        prop_assert!(r_max <= cvar + 1e-9);
        let kind = if beta == 2.0 { Divergence::ChiSquare } else { Divergence::CressieRead(beta) };
        let spec = CressieReadSpec::from_alpha(kind, alpha).unwrap();
        if radius_covers_domains(&spec) {
            let dro = dro_risk(&p, &spec).unwrap();
            prop_assert!(r_max <= dro + 1e-7, "{} > {}", r_max, dro);
            if beta == 2.0 {
                prop_assert!(cvar <= dro + 1e-7);
            }
        }
    }

    #[test]
    fn translation_and_scaling_equivariance(b in batch(), k in kind(), alpha in 0.01..=1.0f64, shift in 0.0..20.0f64, scale in 0.1..10.0f64) {
        let spec = CressieReadSpec::from_alpha(k, alpha).unwrap();
        let base = risk(&b, &spec);
        let tol = 1e-6 * (1.0 + base.abs() + shift.abs());
        prop_assert!((risk(&b.shifted(shift).unwrap(), &spec) - (base + shift)).abs() <= tol);
        prop_assert!((risk(&b.scaled(scale).unwrap(), &spec) - scale * base).abs() <= tol * scale);
    }

    #[test]
    fn eta_star_minimizes_the_dual(b in batch(), k in kind(), alpha in 0.01..=1.0f64, eta in -30.0..15.0f64) {
        let spec = CressieReadSpec::from_alpha(k, alpha).unwrap();
        let sol = minimize_eta(&b, &spec, DEFAULT_ETA_TOL).unwrap();
        prop_assert!(dual_objective(&b, eta, &spec) >= sol.risk - 1e-7);
        prop_assert!((dual_objective(&b, sol.eta_star, &spec) - sol.risk).abs() <= 1e-6 * (1.0 + sol.risk.abs()));
    }

    #[test]
    fn huber_mixture_is_within_eps_in_tv(p in distribution(5, 10.0), q in distribution(5, 100.0), eps in 0.0..0.5f64) {
        let mixed = huber_mix(&p, &q, eps).unwrap();
        prop_assert!(tv_distance(&p, &mixed) <= eps + 1e-12);
    }

    #[test]
    fn moments_are_non_decreasing(p in distribution(6, 50.0)) {
        let m: Vec<f64> = [2, 4, 6, 8].iter().map(|&k| empirical_moment(&p, k).unwrap()).collect();
        prop_assert!(m.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)), "{:?}", m);
    }

    #[test]
    fn doro_dominates_tv_ball_infimum(
        p in distribution(5, 10.0),
        outlier in distribution(3, 100.0),
        eps in 0.01..0.45f64,
        k in kind(),
        alpha in 0.05..=1.0f64,
    ) {
        let spec = CressieReadSpec::from_alpha(k, alpha).unwrap();
        let train = huber_mix(&p, &outlier, eps).unwrap();
        let doro = doro_risk_discrete(&train, &spec, eps).unwrap();
        let inf = tv_ball_dro_infimum(&p, eps / (1.0 - eps), 0.0, &spec).unwrap();
        prop_assert!(doro >= inf - 1e-7 * (1.0 + inf.abs()), "{} < {}", doro, inf);
    }

    #[test]
    fn moment_gap_inequality(
        atoms in prop::collection::vec((0.0..=20.0f64, 0.05..1.0f64, 0.05..1.0f64), 1..=6),
        eta in 0.0..10.0f64,
        bk in prop_oneof![Just((1.0, 1u32)), Just((1.0, 2)), Just((2.0, 2))],
    ) {
        let (sp, sq) = (atoms.iter().map(|a| a.1).sum::<f64>(), atoms.iter().map(|a| a.2).sum::<f64>());
        let p = DiscreteDistribution::new(atoms.iter().map(|a| (a.0, a.1 / sp))).unwrap();
        let q = DiscreteDistribution::new(atoms.iter().map(|a| (a.0, a.2 / sq))).unwrap();
        let gap = moment_gap(&p, &q, eta, bk.0, bk.1).unwrap();
        prop_assert!(gap.holds(1e-9), "{:?}", gap);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn outlier_count_is_exact(n in 20usize..300, eps in 0.0..0.5f64, seed in any::<u64>()) {
        let ds = synth_subpop(&SyntheticSpec { n_samples: n, seed, ..SyntheticSpec::default() }).unwrap();
        let out = inject_outliers(&ds, eps, OutlierMode::LabelFlip, seed).unwrap();
        let expected = ((eps * ds.len() as f64) + 1e-9).floor() as usize;
        prop_assert_eq!(out.metadata().contaminated.len(), expected);
        let changed = (0..ds.len()).filter(|&i| ds.labels()[i] != out.labels()[i]).count();
        prop_assert_eq!(changed, expected);
    }

    #[test]
    fn stability_ignores_epoch_order(
        accs in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 2..30),
        rotate in 0usize..30,
    ) {
        let run = |accs: &[(f64, f64)]| TrainRun {
            params: doro::model::ModelParams::zeros(doro::model::Architecture::Linear, 1).unwrap(),
            history: accs
                .iter()
                .enumerate()
                .map(|(epoch, &(avg, worst))| MetricsRecord {
                    epoch,
                    avg_accuracy: avg,
                    worst_accuracy: worst,
                    per_domain_accuracy: vec![worst],
                    train_risk: 0.0,
                    eta_star: None,
                })
                .collect(),
            checkpoints: Vec::new(),
        };
        let mut shuffled = accs.clone();
        shuffled.rotate_left(rotate % accs.len());
        shuffled.reverse();
        let (a, b) = (stability_stat(&run(&accs)).unwrap(), stability_stat(&run(&shuffled)).unwrap());
        prop_assert!((a.0 - b.0).abs() <= 1e-12 && (a.1 - b.1).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn erm_training_risk_trends_down(seed in 0u64..1000) {
        let ds = synth_subpop(&SyntheticSpec { n_samples: 300, seed, ..SyntheticSpec::default() }).unwrap();
        let config = TrainConfig { method: Method::Erm, epochs: 15, seed, ..TrainConfig::default() };
        let run = train(&ds, &ds, &config).unwrap();
        let risks: Vec<f64> = run.history.iter().map(|r| r.train_risk).collect();
        let head = risks[..3].iter().sum::<f64>() / 3.0;
        let tail = risks[risks.len() - 3..].iter().sum::<f64>() / 3.0;
        prop_assert!(tail < head, "{:?}", risks);
    }
}
