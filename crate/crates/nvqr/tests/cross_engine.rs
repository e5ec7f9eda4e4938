//! Engine equivalence: the Monte Carlo sampler must reproduce the dense
//! engine's QBERs and acceptance within statistical error, and be
//! deterministic across worker counts.

use nvqr::protocols::{
    build_trajectory, decode, run_chain, ChainModel, Decoder, Engine, FinalState, RepeaterConfig,
    SystemParams,
};
use nvqr::timing::Protocol;

fn assert_within(label: &str, sampled: f64, se: f64, exact: f64, n_sigma: f64) {
    let tol = n_sigma * se.max(1e-9);
    assert!(
        (sampled - exact).abs() <= tol,
        "{label}: sampled {sampled} ± {se}, exact {exact} (> {n_sigma}σ)"
    );
}

#[test]
fn monte_carlo_matches_dense_at_n1() {
    let params = SystemParams::nominal(100.0f64, 0.3);
    for protocol in Protocol::ALL {
        let dense_cfg = RepeaterConfig::new(protocol, 1, Engine::Dense);
        let dense = run_chain(&dense_cfg, &params).unwrap();

        let mut mc_cfg = RepeaterConfig::new(protocol, 1, Engine::Pauli);
        mc_cfg.samples = 100_000;
        mc_cfg.seed = 20_250_808;
        let sampled = run_chain(&mc_cfg, &params).unwrap();

        for decoder in [Decoder::Majority, Decoder::ErrorDetect] {
            let d = decode(&dense, decoder).unwrap();
            let s = decode(&sampled, decoder).unwrap();
            let label = format!("{protocol:?} {decoder:?}");
            assert_within(&format!("{label} Qz"), s.q_z, s.stderr_qz, d.q_z, 3.0);
            assert_within(&format!("{label} Qx"), s.q_x, s.stderr_qx, d.q_x, 3.0);
            // acceptance: binomial se on the sampled side
            let acc_se =
                (s.acceptance * (1.0 - s.acceptance) / mc_cfg.samples as f64).sqrt();
            assert_within(&format!("{label} acc"), s.acceptance, acc_se, d.acceptance, 3.0);
        }
    }
}

#[test]
fn monte_carlo_matches_dense_encoded_n2() {
    // Two doubling levels of the fully encoded protocol.
    let params = SystemParams::nominal(100.0f64, 0.4);
    let dense_cfg = RepeaterConfig::new(Protocol::P1, 2, Engine::Dense);
    let dense = run_chain(&dense_cfg, &params).unwrap();
    let mut mc_cfg = RepeaterConfig::new(Protocol::P1, 2, Engine::Pauli);
    mc_cfg.samples = 100_000;
    mc_cfg.seed = 11;
    let sampled = run_chain(&mc_cfg, &params).unwrap();
    let d = decode(&dense, Decoder::Majority).unwrap();
    let s = decode(&sampled, Decoder::Majority).unwrap();
    assert_within("P1 n=2 Qz", s.q_z, s.stderr_qz, d.q_z, 3.0);
    assert_within("P1 n=2 Qx", s.q_x, s.stderr_qx, d.q_x, 3.0);
    let acc_se = (s.acceptance * (1.0 - s.acceptance) / mc_cfg.samples as f64).sqrt();
    assert_within("P1 n=2 acc", s.acceptance, acc_se, d.acceptance, 3.0);
}

#[test]
fn monte_carlo_matches_dense_partially_encoded_n2() {
    // P2 at n=2 exercises a remote-mediated merge followed by the end
    // teleport in one chain.
    let params = SystemParams::nominal(120.0f64, 0.4);
    let dense_cfg = RepeaterConfig::new(Protocol::P2, 2, Engine::Dense);
    let dense = run_chain(&dense_cfg, &params).unwrap();
    let mut mc_cfg = RepeaterConfig::new(Protocol::P2, 2, Engine::Pauli);
    mc_cfg.samples = 100_000;
    mc_cfg.seed = 212;
    let sampled = run_chain(&mc_cfg, &params).unwrap();
    let d = decode(&dense, Decoder::Majority).unwrap();
    let s = decode(&sampled, Decoder::Majority).unwrap();
    assert_within("P2 n=2 Qz", s.q_z, s.stderr_qz, d.q_z, 3.0);
    assert_within("P2 n=2 Qx", s.q_x, s.stderr_qx, d.q_x, 3.0);
    let acc_se = (s.acceptance * (1.0 - s.acceptance) / mc_cfg.samples as f64).sqrt();
    assert_within("P2 n=2 acc", s.acceptance, acc_se, d.acceptance, 3.0);
}

#[test]
fn sampler_is_deterministic_across_worker_counts() {
    let params = SystemParams::nominal(100.0f64, 0.3);
    let config = RepeaterConfig::new(Protocol::P1, 1, Engine::Pauli);
    let model = ChainModel::build(&config, &params).unwrap();
    let spec = build_trajectory(&model).unwrap();

    let run_with_threads = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| nvqr::pauli::estimate_qber(&spec, 3, 50_000, 77).unwrap().counts)
    };
    let one = run_with_threads(1);
    let four = run_with_threads(4);
    let eight = run_with_threads(8);
    assert_eq!(one, four);
    assert_eq!(four, eight);
}

#[test]
fn sampled_final_state_variant_is_returned() {
    let params = SystemParams::nominal(100.0f64, 0.3);
    let mut config = RepeaterConfig::new(Protocol::P3, 1, Engine::Pauli);
    config.samples = 1000;
    match run_chain(&config, &params).unwrap() {
        FinalState::Sampled(est) => assert_eq!(est.counts.samples, 1000),
        FinalState::Dense(_) => panic!("expected sampled result"),
    }
}
