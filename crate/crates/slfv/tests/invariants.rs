use proptest::prelude::*;

use slfv::driftload::equilibrium_lambda;
use slfv::events::{
    replay_events, run_trajectory_logged, total_event_rate, EventApplier, EventLaw, EventLogReader, EventLogWriter,
    KindWeights, LogHeader, RadiusLaw, RngStream, SelectionModel, Snapshots, TrajectoryConfig,
};
use slfv::experiment::{parse_config, ConfigDocument, ExperimentConfig};
use slfv::lattice::{
    ball_average, decode_snapshot, double_ball_average, encode_snapshot, pair, FrequencyField, GridFn, TestFunction,
    TorusGrid,
};

fn grid_1d() -> TorusGrid {
    TorusGrid::new(1, 85, 10.0).unwrap()
}

fn model_and_weights(diploid: bool, s: f64) -> (SelectionModel, KindWeights) {
    if diploid {
        let (s1, s2, nu) = (0.4 * s, 0.6 * s, 0.05 * s);
        (SelectionModel::Overdominance { s1, s2, nu1: nu, nu2: nu }, KindWeights::Diploid { s1, s2, nu1: nu, nu2: nu })
    } else {
        (SelectionModel::Genic, KindWeights::Haploid { s })
    }
}

fn radius(stable: bool) -> RadiusLaw {
    if stable {
        RadiusLaw::StablePareto { alpha: 0.5, r_max: 3.0 }
    } else {
        RadiusLaw::Fixed(1.0)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn events_keep_range_and_jump_bound(
        u in 0.0f64..=1.0,
        s in 0.0f64..0.8,
        diploid in any::<bool>(),
        stable in any::<bool>(),
        values in prop::collection::vec(0.0f64..=1.0, 85),
        seed in any::<u64>(),
    ) {
        let g = grid_1d();
        let (model, weights) = model_and_weights(diploid, s);
        let law = EventLaw::new(u, weights, radius(stable), 1).unwrap();
        let phi = TestFunction::gaussian(g, &[4.0], 1.3);
        let mut app = EventApplier::new(g, law, model).unwrap();
        let rate = total_event_rate(&law, &g);
        let mut rng = RngStream::new(seed, 0);
        let mut q = FrequencyField::new(g, values).unwrap();
        let mut t = 0.0;
        for _ in 0..200 {
            let ev = app.draw(&mut rng, t, rate);
            let before = pair(&q, &phi).unwrap();
            app.apply(&mut q, &ev).unwrap();
            let (lo, hi) = q.min_max();
            prop_assert!(lo >= 0.0 && hi <= 1.0);
            prop_assert!((pair(&q, &phi).unwrap() - before).abs() <= u * phi.l1() * (1.0 + 1e-12));
            t = ev.t;
        }
    }

    #[test]
    fn averages_conserve_mass_and_stay_in_hull(
        values in prop::collection::vec(0.0f64..=1.0, 64 * 64),
        r in 0.55f64..1.6,
    ) {
        let g = TorusGrid::new(2, 64, 4.0).unwrap();
        let f = GridFn::new(g, values).unwrap();
        let (lo, hi) = f.values.iter().fold((1.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        let r = r * 8.0 * g.h();
        for avg in [ball_average(&f, r).unwrap(), double_ball_average(&f, r).unwrap()] {
            prop_assert!((avg.integral() - f.integral()).abs() <= 1e-12);
            prop_assert!(avg.values.iter().all(|v| *v >= lo - 1e-15 && *v <= hi + 1e-15));
        }
    }

    #[test]
    fn logged_runs_replay_bitwise(
        u in 0.05f64..=0.9,
        s in 0.0f64..0.5,
        diploid in any::<bool>(),
        stable in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let g = grid_1d();
        let (model, weights) = model_and_weights(diploid, s);
        let law = EventLaw::new(u, weights, radius(stable), 1).unwrap();
        let q0 = FrequencyField::from_fn(g, |x| 0.5 + 0.4 * (x[0]).sin()).unwrap();
        let times = vec![2.0, 4.0, 6.0];
        let cfg = TrajectoryConfig::new(6.0, times.clone(), seed, 3);
        let mut w = EventLogWriter::new(Vec::new(), LogHeader { d: 1, config_hash: [1; 32] }).unwrap();
        let rec = run_trajectory_logged(q0.clone(), &law, &model, &cfg, &mut Snapshots, Some(&mut w)).unwrap();
        let reader = EventLogReader::new(std::io::Cursor::new(w.finish().unwrap())).unwrap();
        let (outs, fin, n) = replay_events(q0, &law, &model, 6.0, &times, reader, &mut Snapshots).unwrap();
        prop_assert_eq!(n, rec.events);
        prop_assert_eq!(&outs, &rec.outputs);
        let bits = |f: &FrequencyField| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&fin), bits(&rec.final_field));
    }

    #[test]
    fn snapshots_round_trip(values in prop::collection::vec(-1e300f64..1e300, 8 * 8)) {
        let g = TorusGrid::new(2, 8, 3.0).unwrap();
        let f = GridFn::new(g, values).unwrap();
        let back = decode_snapshot(&encode_snapshot(&f)).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn equilibrium_is_a_stable_root(s1 in 0.05f64..0.5, s2 in 0.05f64..0.5, nu1 in 0.0f64..0.05, nu2 in 0.0f64..0.05) {
        let lambda = equilibrium_lambda(s1, s2, nu1, nu2).unwrap();
        prop_assert!(lambda > 0.0 && lambda < 1.0);
        let m = SelectionModel::Overdominance { s1, s2, nu1, nu2 };
        prop_assert!(m.f(lambda).abs() < 1e-10);
        prop_assert!(m.f_prime(lambda) > 0.0);
    }

    #[test]
    fn canonical_config_reparses_to_same_hash(
        seed in any::<u64>(),
        u in 0.01f64..1.0,
        horizon in 0.1f64..10.0,
        model in prop::sample::select(vec!["genic", "overdominance"]),
    ) {
        let text = format!("kind = trajectory\nseed = {seed}\nu = {u}\nhorizon = {horizon}\nmodel = {model}\n");
        let cfg = parse_config(&text).unwrap();
        let again = ExperimentConfig::from_document(&ConfigDocument::parse(&cfg.canonical_text()).unwrap()).unwrap();
        prop_assert_eq!(cfg.hash(), again.hash());
        prop_assert_eq!(cfg, again);
    }
}
