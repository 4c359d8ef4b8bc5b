use proptest::prelude::*;

use plna_yield::budget::{
    cascade_iip3, cascade_noise, db_to_linear, dbm_to_mw, derive_stage2_limits, linear_to_db,
    mw_to_dbm, receiver_metrics,
};
use plna_yield::designs::config::{parse_config, Config};
use plna_yield::designs::paper::{paper_plna, paper_traditional};
use plna_yield::explorer::{explore, PerformanceModel, Surrogate, SweepConstraints};
use plna_yield::montecarlo::generate_population;
use plna_yield::report::deltas;
use plna_yield::selection::{apply_with, dynamic_range_score, Selector};
use plna_yield::statmodel::{
    CorrelationTargets, Knob, LatentDieModel, MarginalSpec, ModeMarginals, RfParam,
};
use plna_yield::{
    classify_receiver, DiePopulation, DieSample, LinearGain, LnaSpecCorner, LnaSpecCornerF32,
    NoiseFactor, PlnaMode, PowerMw, ReceiverTargets, ReceiverTargetsF32, RfQuantities,
    RfQuantitiesF32, SelectionStrategy,
};

fn limits() -> (ReceiverTargets, plna_yield::StageTwoLimits) {
    let t = ReceiverTargets::default();
    (
        t,
        derive_stage2_limits(&LnaSpecCorner::default(), &t).unwrap(),
    )
}

fn rf() -> impl Strategy<Value = RfQuantities> {
    (
        8.0..13.5f64,
        1.5..4.0f64,
        -10.0..6.0f64,
        -30.0..-8.0f64,
        -25.0..-5.0f64,
    )
        .prop_map(|(g, nf, i, s11, s22)| RfQuantities {
            gain_db: g,
            nf_db: nf,
            iip3_dbm: i,
            s11_db: s11,
            s22_db: s22,
        })
}

fn die() -> impl Strategy<Value = [RfQuantities; 3]> {
    [rf(), rf(), rf()]
}

fn population(dies: Vec<[RfQuantities; 3]>) -> DiePopulation {
    DiePopulation {
        design_id: "hand".into(),
        seed: 0,
        mode_labels: PlnaMode::ALL
            .iter()
            .map(|m| m.label().to_string())
            .collect(),
        dies: dies
            .into_iter()
            .enumerate()
            .map(|(i, m)| DieSample {
                index: i as u64,
                factors: vec![],
                modes: m.to_vec(),
            })
            .collect(),
    }
}

proptest! {
    #[test]
    fn db_round_trips(x in -60.0..60.0f64) {
        let back = linear_to_db(db_to_linear(x).unwrap()).unwrap();
        prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
        let back = mw_to_dbm(dbm_to_mw(x).unwrap()).unwrap();
        prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn noise_cascade_decreases_with_gain(f in 1.0..10.0f64, f2 in 1.0..1000.0f64, g in 0.1..100.0f64, dg in 0.01..10.0f64) {
        let at = |g| cascade_noise(NoiseFactor::new(f).unwrap(), LinearGain::new(g).unwrap(), NoiseFactor::new(f2).unwrap()).unwrap().value();
        prop_assert!(at(g) >= f);
        if f2 > 1.0 {
            prop_assert!(at(g + dg) < at(g));
        }
    }

    #[test]
    fn iip3_cascade_bounded_by_each_stage(a in 1e-3..100.0f64, g in 0.1..100.0f64, b in 1e-3..100.0f64) {
        let r = cascade_iip3(PowerMw::new(a).unwrap(), LinearGain::new(g).unwrap(), PowerMw::new(b).unwrap()).unwrap().value();
        prop_assert!(r <= a * (1.0 + 1e-15));
        prop_assert!(r <= b / g * (1.0 + 1e-15));
    }

    #[test]
    fn nf_boundary_near_ten_db(g in 8.0..13.0f64) {
        let (t, l) = limits();
        let q = RfQuantities { gain_db: g, nf_db: 2.8, iip3_dbm: 5.0, s11_db: -20.0, s22_db: -20.0 };
        let pass = classify_receiver(&q, &l, &t).nf_pass;
        if g < 9.98 { prop_assert!(!pass); }
        if g > 10.0 { prop_assert!(pass); }
    }

    #[test]
    fn spec_corner_closes_with_zero_margin(
        gmin in 8.0..11.0f64, width in 0.2..3.0f64, nf in 1.0..5.0f64, iip3 in -10.0..5.0f64,
        nf_room in 1.0..15.0f64, iip3_room in 1.0..15.0f64,
    ) {
        let spec = LnaSpecCorner { gain_min_db: gmin, gain_max_db: gmin + width, nf_max_db: nf, iip3_min_dbm: iip3, ..Default::default() };
        let t = ReceiverTargets { nf_rx_max_db: nf + nf_room, iip3_rx_min_dbm: iip3 - iip3_room };
        let l = derive_stage2_limits(&spec, &t).unwrap();
        let noise_corner = RfQuantities { gain_db: gmin, nf_db: nf, iip3_dbm: iip3, s11_db: -20.0, s22_db: -20.0 };
        let lin_corner = RfQuantities { gain_db: gmin + width, ..noise_corner };
        let m = receiver_metrics(&noise_corner, &l);
        prop_assert!((m.noise_factor / t.f_rx_max() - 1.0).abs() < 1e-9);
        let m = receiver_metrics(&lin_corner, &l);
        prop_assert!((m.iip3_mw / t.iip3_rx_min_mw() - 1.0).abs() < 1e-9);
        prop_assert!(classify_receiver(&noise_corner, &l, &t).nf_pass);
        prop_assert!(classify_receiver(&lin_corner, &l, &t).iip3_pass);
    }

    #[test]
    fn single_precision_agrees_away_from_threshold(q in rf()) {
        let (t, l) = limits();
        let f64_flags = classify_receiver(&q, &l, &t);
        let q32 = RfQuantitiesF32 {
            gain_db: q.gain_db as f32, nf_db: q.nf_db as f32, iip3_dbm: q.iip3_dbm as f32,
            s11_db: q.s11_db as f32, s22_db: q.s22_db as f32,
        };
        let t32 = ReceiverTargetsF32 { nf_rx_max_db: 15.5, iip3_rx_min_dbm: -10.0 };
        let l32 = derive_stage2_limits(&LnaSpecCornerF32::default(), &t32).unwrap();
        let f32_flags = classify_receiver(&q32, &l32, &t32);
        let m = receiver_metrics(&q, &l);
        if (m.nf_db() - 15.5).abs() > 1e-3 { prop_assert_eq!(f64_flags.nf_pass, f32_flags.nf_pass); }
        if (m.iip3_dbm() + 10.0).abs() > 1e-3 { prop_assert_eq!(f64_flags.iip3_pass, f32_flags.iip3_pass); }
    }

    #[test]
    fn best_gain_matches_brute_force(modes in die(), target in 9.0..12.0f64) {
        let sel = Selector::new([0.672, 0.516, 0.672], target);
        let chosen = sel.best_gain(&modes).index();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let da = (modes[a].gain_db - target).abs();
            let db = (modes[b].gain_db - target).abs();
            da.partial_cmp(&db).unwrap()
                .then(sel.powers_mw[a].partial_cmp(&sel.powers_mw[b]).unwrap())
                .then(a.cmp(&b))
        });
        prop_assert_eq!(chosen, order[0]);
    }

    #[test]
    fn best_receiver_matches_brute_force(modes in die()) {
        let (t, l) = limits();
        let sel = Selector::new([0.672, 0.516, 0.672], 10.5);
        let chosen = sel.best_receiver(&modes, &l, &t).index();
        let flags: Vec<_> = modes.iter().map(|q| classify_receiver(q, &l, &t)).collect();
        let key = |i: usize| {
            let tier = if flags[i].both() { 0 } else if flags[i].nf_pass { 1 } else { 2 };
            let score = if tier == 2 { -dynamic_range_score(&modes[i], &l, &t) } else { 0.0 };
            (tier, score, sel.powers_mw[i], (modes[i].gain_db - 10.5).abs(), i)
        };
        let best = (0..3).min_by(|&a, &b| key(a).partial_cmp(&key(b)).unwrap()).unwrap();
        prop_assert_eq!(chosen, best);
        // Dominance per die.
        if flags.iter().any(|f| f.both()) { prop_assert!(flags[chosen].both()); }
        if flags.iter().any(|f| f.nf_pass) { prop_assert!(flags[chosen].nf_pass); }
    }

    #[test]
    fn average_power_within_mode_range(dies in prop::collection::vec(die(), 1..60)) {
        let (t, l) = limits();
        let pop = population(dies);
        let design = paper_plna();
        let sel = Selector::for_design(&design, 10.5);
        for s in [SelectionStrategy::best_gain(), SelectionStrategy::best_receiver()] {
            let r = apply_with(&pop, s, &l, &t, &sel).unwrap();
            prop_assert!(r.average_power_mw >= 0.516 - 1e-12 && r.average_power_mw <= 0.672 + 1e-12);
            prop_assert!((r.occupancy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let br = apply_with(&pop, SelectionStrategy::best_receiver(), &l, &t, &sel).unwrap();
        for mode in PlnaMode::ALL {
            let f = apply_with(&pop, SelectionStrategy::FixedMode { mode }, &l, &t, &sel).unwrap();
            prop_assert!(br.compliance >= f.compliance);
        }
    }

    #[test]
    fn deltas_are_antisymmetric_in_compliance(a in 0.0..1.0f64, b in 0.0..1.0f64, pa in 0.1..1.0f64, pb in 0.1..1.0f64) {
        let (ds, dp) = deltas(a, pa, b, pb);
        let (ds2, dp2) = deltas(b, pb, a, pa);
        prop_assert!((ds + ds2).abs() < 1e-15);
        prop_assert_eq!(dp > 0.0, pa > pb);
        prop_assert!(dp2 > -1.0 && dp > -1.0);
    }

    #[test]
    fn config_round_trips_with_overridden_targets(nf in 10.0..20.0f64, iip3 in -15.0..-5.0f64, target in 9.5..11.5f64) {
        let mut c = Config::paper();
        c.targets = ReceiverTargets { nf_rx_max_db: nf, iip3_rx_min_dbm: iip3 };
        c.target_gain_db = target;
        let back = parse_config(&c.to_json()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.digest(), c.digest());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn variance_identity_after_knob_moves(
        sigmas in prop::collection::vec(0.05..3.0f64, 3),
        gx in 0.0..0.999f64, nx in 0.0..0.999f64, ix in 0.0..0.999f64, gi in -0.95..0.95f64,
    ) {
        let mut model = paper_plna().latent_model().unwrap();
        for (m, s) in sigmas.iter().enumerate() {
            Knob::Sigma { mode: m, param: RfParam::Gain }.set(&mut model, *s).unwrap();
        }
        for (k, v) in [(Knob::GainCrossMode, gx), (Knob::NfCrossMode, nx), (Knob::Iip3CrossMode, ix), (Knob::GainIip3, gi)] {
            let _ = k.set(&mut model, v);
        }
        model.validate().unwrap();
        for block in &model.modes {
            for row in &block.rows {
                let sigma = block.marginals.get(row.param).sigma;
                prop_assert!((row.variance() - sigma * sigma).abs() <= 1e-9 * sigma.max(1.0).powi(2));
            }
        }
    }

    #[test]
    fn explorer_selection_ignores_grid_order(seed in 0u64..1000, n_i in 1usize..6, n_w in 1usize..20) {
        let currents: Vec<f64> = (0..n_i).map(|k| 0.3 + 0.1 * ((seed as usize + 3 * k) % 6) as f64).collect();
        let widths: Vec<f64> = (0..n_w).map(|k| 20.0 + 3.0 * ((seed as usize * 7 + 5 * k) % 20) as f64).collect();
        let s = Surrogate::default();
        let c = SweepConstraints::default();
        let a = explore(&currents, &widths, &c, &s).unwrap();
        let mut rc = currents.clone();
        rc.reverse();
        let mut rw = widths.clone();
        rw.rotate_left(seed as usize % n_w);
        rw.reverse();
        let b = explore(&rc, &rw, &c, &s).unwrap();
        prop_assert_eq!(a.selected, b.selected);
    }

    #[test]
    fn tighter_constraints_never_admit_more(iip3_min in -8.0..2.0f64, extra in 0.0..3.0f64, shrink in 0.0..0.3f64) {
        let s = Surrogate::default();
        let currents = [0.3, 0.4, 0.5, 0.6, 0.7];
        let widths: Vec<f64> = (0..31).map(|k| 20.0 + 2.0 * k as f64).collect();
        let loose = SweepConstraints { iip3_min_dbm: iip3_min, ..Default::default() };
        let tight = SweepConstraints {
            iip3_min_dbm: iip3_min + extra,
            gain_min_db: loose.gain_min_db + shrink,
            gain_max_db: loose.gain_max_db - shrink,
            ..loose
        };
        let a = explore(&currents, &widths, &loose, &s).unwrap();
        let b = explore(&currents, &widths, &tight, &s).unwrap();
        for (fa, fb) in a.feasible.iter().zip(&b.feasible) {
            prop_assert!(!fb || *fa);
        }
        for k in b.selected.keys() {
            prop_assert!(a.selected.contains_key(k));
        }
        let _ = s.evaluate(0.4, 40.0).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sampler_mean_within_three_sigma(mean in -10.0..10.0f64, sigma in 0.01..3.0f64, seed in 0u64..u64::MAX) {
        let spec = MarginalSpec::new(mean, sigma);
        let mm = ModeMarginals { gain: spec, nf: MarginalSpec::new(2.8, 0.1), iip3: spec, s11: MarginalSpec::new(-20.0, 1.0), s22: MarginalSpec::new(-20.0, 1.0) };
        let model = LatentDieModel::from_marginals([("NOM", mm)], CorrelationTargets::default()).unwrap();
        let n = 20_000;
        let pop = generate_population("p", &model, n, seed).unwrap();
        let m = pop.dies.iter().map(|d| d.modes[0].gain_db).sum::<f64>() / n as f64;
        // 4 sigma of the sample mean keeps the false-alarm rate negligible.
        prop_assert!((m - mean).abs() < 4.0 * sigma / (n as f64).sqrt());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn cross_mode_correlation_matches_model(gx in 0.45..0.99f64, seed in 0u64..1000) {
        let mut model = paper_plna().latent_model().unwrap();
        Knob::GainCrossMode.set(&mut model, gx).unwrap();
        let pop = generate_population("p", &model, 100_000, seed).unwrap();
        let xs: Vec<f64> = pop.mode_values(0).map(|q| q.gain_db).collect();
        let ys: Vec<f64> = pop.mode_values(1).map(|q| q.gain_db).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let r = sxy / (sxx * syy).sqrt();
        let implied = model.implied_correlation(0, RfParam::Gain, 1, RfParam::Gain);
        prop_assert!((r - implied).abs() < 0.03, "empirical {} vs implied {}", r, implied);
    }

    #[test]
    fn fitted_tail_recovered_by_sampler(seed in 0u64..1000) {
        let d = paper_traditional(0.4);
        let pop = generate_population(&d.id, &d.latent_model().unwrap(), 100_000, seed).unwrap();
        let g = d.variability.gain;
        let below = pop.mode_values(0).filter(|q| q.gain_db < 10.0).count() as f64 / 1e5;
        let sigma_back = plna_yield::statmodel::fit_sigma_from_quantile(g.mean, 10.0, below).unwrap();
        prop_assert!((sigma_back - g.sigma).abs() / g.sigma < 0.03);
    }
}
