use irsopt::algorithms::*;
use irsopt::channel::*;
use irsopt::robust::*;
use std::time::Instant;

fn cluster(nt: usize, m: usize, k: usize, gamma_db: f64, sigma2: f64) -> ScenarioConfig {
    ScenarioConfig {
        nt,
        m_l: vec![m],
        k,
        sigma2: vec![sigma2; k],
        gamma: vec![10f64.powf(gamma_db / 10.0); k],
        user_center: Some((52.0, 0.0)),
        user_radius: Some(4.0),
        seed: 7,
        ..Default::default()
    }
}

#[test]
fn probe_randomization_outage() {
    use irsopt::sdp::gaussian_randomize;
    use irsopt::state::PhaseState;
    for m in [4usize, 6, 8, 10, 12] {
        let cfg = cluster(6, m, 4, 2.0, 1e-12);
        let opts = AlgoOptions::from_scenario(&cfg);
        let mut bad = 0usize;
        let mut total = 0usize;
        for drop in 0..5 {
            let ch = generate_channels(&cfg, drop).unwrap();
            let data = ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2);
            let mut rng = scenario_rng(cfg.seed, drop, RngPurpose::PhaseInit);
            let ps = PhaseState::random(m, &mut rng);
            let beams = beamforming_fixed_phase(&data, Some(&ps), opts.tol).unwrap();
            let v = phase_feasibility_sdp(&data, &beams.mats, opts.tol).unwrap();
            let tight = beamforming_fixed_v(&data, &v, opts.tol).unwrap();
            let mut rrng = scenario_rng(cfg.seed, drop, RngPurpose::Randomization);
            let draws = gaussian_randomize(&v, 100, &mut rrng);
            bad += draws
                .iter()
                .filter(|d| data.min_vector_slack(&tight.w, d) < 0.0)
                .count();
            total += draws.len();
        }
        println!("m={m} tight violations pooled={bad}/{total}");
    }
}

#[test]
fn probe_nonrobust_outage() {
    use irsopt::state::PhaseState as _;
    for (nt, m, k) in [(3usize, 4usize, 2usize), (4, 6, 4)] {
        let cfg = cluster(nt, m, k, 2.0, 1e-12);
        let ch = generate_channels(&cfg, 0).unwrap();
        let mut crng = scenario_rng(cfg.seed, 0, RngPurpose::CsiError);
        let est = degrade_csi(&ch, 0.1, &mut crng).unwrap();
        let data = ProblemData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let opts = AlgoOptions::from_scenario(&cfg);
        let mut rng = scenario_rng(cfg.seed, 0, RngPurpose::PhaseInit);
        let (b, ps, _) = penalty_altmin(&data, &opts, &mut rng).unwrap();
        let mut arng = scenario_rng(cfg.seed, 0, RngPurpose::Adversarial);
        let mut hit = 0usize;
        for _ in 0..200 {
            let (slack, _) = verify_worst_case(
                &b.w, &ps, &est, &cfg.gamma, &cfg.sigma2, 1, 1e-5, &mut arng,
            );
            if slack < 0.0 {
                hit += 1;
            }
        }
        println!("nt={nt} m={m} k={k} outage samples={hit}/200");
    }
}

#[test]
fn probe_robust_small() {
    let _ = env_logger::builder().filter_level(log::LevelFilter::Debug).try_init();
    let cfg = cluster(3, 4, 2, 2.0, 1e-12);
    let ch = generate_channels(&cfg, 0).unwrap();
    let mut crng = scenario_rng(cfg.seed, 0, RngPurpose::CsiError);
    let est = degrade_csi(&ch, 0.05, &mut crng).unwrap();
    let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
    let opts = AlgoOptions::from_scenario(&cfg);
    let mut rng = scenario_rng(cfg.seed, 0, RngPurpose::PhaseInit);
    let t0 = Instant::now();
    match robust_penalty_altmin(&data, &opts, &mut rng) {
        Ok((b, ps, tr)) => {
            println!(
                "robust ok power={:.4e} iters={} t={:.1}s mono={}",
                b.power,
                tr.iterations(),
                t0.elapsed().as_secs_f64(),
                tr.is_non_increasing(1e-7)
            );
            for r in &tr.rows {
                println!(
                    "  it={} obj={:.6e} gap={:.2e} inner={} status={:?} ms={:.0}",
                    r.iteration, r.objective, r.rank_gap, r.inner_iterations, r.status, r.millis
                );
            }
            let mut arng = scenario_rng(cfg.seed, 0, RngPurpose::Adversarial);
            let (min_slack, viol) = verify_worst_case(
                &b.w, &ps, &est, &cfg.gamma, &cfg.sigma2, 1000, 1e-5, &mut arng,
            );
            println!("verify min_slack={min_slack:.3e} viol={viol}");
        }
        Err(e) => println!("robust err {e:?} t={:.1}s", t0.elapsed().as_secs_f64()),
    }
}

#[test]
fn probe_robust_drop() {
    let cfg = cluster(4, 6, 4, 2.0, 1e-12);
    let ch = generate_channels(&cfg, 0).unwrap();
    let mut crng = scenario_rng(cfg.seed, 0, RngPurpose::CsiError);
    let est = degrade_csi(&ch, 0.05, &mut crng).unwrap();
    let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
    let opts = AlgoOptions::from_scenario(&cfg);
    let mut rng = scenario_rng(cfg.seed, 0, RngPurpose::PhaseInit);
    let t0 = Instant::now();
    match robust_penalty_altmin(&data, &opts, &mut rng) {
        Ok((b, ps, tr)) => {
            println!(
                "robust ok power={:.4e} iters={} t={:.1}s mono={}",
                b.power,
                tr.iterations(),
                t0.elapsed().as_secs_f64(),
                tr.is_non_increasing(1e-7)
            );
            let mut arng = scenario_rng(cfg.seed, 0, RngPurpose::Adversarial);
            let (min_slack, viol) = verify_worst_case(
                &b.w, &ps, &est, &cfg.gamma, &cfg.sigma2, 1000, 1e-5, &mut arng,
            );
            println!("verify min_slack={min_slack:.3e} viol={viol}");
        }
        Err(e) => println!("robust err {e:?} t={:.1}s", t0.elapsed().as_secs_f64()),
    }
}

#[test]
fn probe_sdr_large() {
    let cfg = cluster(10, 10, 3, 2.0, 1e-12);
    let opts = AlgoOptions::from_scenario(&cfg);
    for drop in 0..3 {
        let ch = generate_channels(&cfg, drop).unwrap();
        let data = ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2);
        let mut rng = scenario_rng(cfg.seed, drop, RngPurpose::PhaseInit);
        let t0 = Instant::now();
        match sdr_altmin(&data, 15, &opts, &mut rng) {
            Ok((b, _, tr)) => println!(
                "sdr drop={drop} power={:.4e} iters={} mono={} t={:.1}s",
                b.power,
                tr.iterations(),
                tr.is_non_increasing(1e-7),
                t0.elapsed().as_secs_f64()
            ),
            Err(e) => println!("sdr drop={drop} err {e:?}"),
        }
    }
}

#[test]
fn probe_antenna_sweep() {
    for nt in [2usize, 3, 4, 5, 6, 7, 8, 9, 10] {
        let cfg = cluster(nt, 4, 2, 10.0, 1e-12);
        let opts = AlgoOptions::from_scenario(&cfg);
        let mut mean = 0.0;
        let drops = 3;
        let t0 = Instant::now();
        for drop in 0..drops {
            let ch = generate_channels(&cfg, drop).unwrap();
            let data = ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2);
            let mut rng = scenario_rng(cfg.seed, drop, RngPurpose::PhaseInit);
            let (b, _, _) = penalty_altmin(&data, &opts, &mut rng).unwrap();
            mean += b.power / drops as f64;
        }
        let ptot = irsopt::harness::total_power(mean, nt, 4, 1.0, 0.034, 0.08, 0.005).unwrap();
        println!(
            "nt={nt} mean_p={mean:.4e} p_total={ptot:.4} t={:.1}s",
            t0.elapsed().as_secs_f64()
        );
    }
}

#[test]
fn probe_ia_drop2() {
    let _ = env_logger::builder().is_test(true).try_init();
    let cfg = cluster(4, 6, 4, 2.0, 1e-12);
    let opts = AlgoOptions::from_scenario(&cfg);
    for drop in 0..20 {
        let ch = generate_channels(&cfg, drop).unwrap();
        let data = ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2);
        let mut rng = scenario_rng(7, drop, RngPurpose::PhaseInit);
        let t0 = Instant::now();
        match ia_solve(&data, &opts, &mut rng) {
            Ok((b, _, tr)) => eprintln!(
                "drop {drop}: ok power {:.4} iters {} gap {:.2e} in {:?}",
                b.power, tr.iterations(), tr.rows.last().unwrap().rank_gap, t0.elapsed()
            ),
            Err(e) => eprintln!("drop {drop}: FAILED {e:?} in {:?}", t0.elapsed()),
        }
    }
}
