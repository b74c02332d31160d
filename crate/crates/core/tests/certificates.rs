mod common;

use bomp::certificates::{
    check_comparison_chain, check_noiseless, check_noisy_block, check_omp_condition,
    check_step_bounds, comparison_chain_report, decompose_noise, noiseless_fraction,
    step_bounds_report, PrefixSplit,
};
use bomp::recovery::{bomp, StoppingRule};
use bomp::{BlockSparseSignal, CoherenceProfile, Vector};
use common::*;
use rand::Rng;

#[test]
fn zero_noise_decomposes_trivially() {
    let mut rng = rng(41);
    let p = random_problem(&mut rng, 30, 10, 3, 2, 0.0, false);
    let dec = decompose_noise(&p.dict, &p.signal, &Vector::zeros(30)).unwrap();
    assert_eq!(dec.x_tilde_nz, p.signal.nonzero_part().as_slice());
    assert!(dec.w_tilde.iter().all(|&v| v == 0.0));
    assert_eq!(dec.omega, 0.0);
}

#[test]
fn noise_in_signal_span_is_absorbed() {
    let mut rng = rng(42);
    let p = random_problem(&mut rng, 30, 10, 3, 2, 0.0, false);
    let a_nz = p.dict.gather(p.signal.support().indices());
    let c = gaussian_vector(&mut rng, 6, 0.3);
    let w = &a_nz * &c;
    let dec = decompose_noise(&p.dict, &p.signal, &w).unwrap();
    assert!(norm2(&dec.w_tilde) <= 1e-12);
    assert!(dec.omega <= 1e-12);
    let x_nz = p.signal.nonzero_part();
    for i in 0..6 {
        assert!((dec.x_tilde_nz[i] - x_nz[i] - c[i]).abs() <= 1e-10);
    }
}

#[test]
fn random_decomposition_matches_oracles() {
    let mut rng = rng(43);
    for _ in 0..50 {
        let d = rng.random_range(1..5);
        let k = rng.random_range(1..4);
        let p = random_problem(&mut rng, 30, 8, d, k, 0.3, false);
        let dec = decompose_noise(&p.dict, &p.signal, &p.noise).unwrap();
        let support = p.signal.support().indices();
        let a_nz = p.dict.gather(support);

        let absorbed = oracle_least_squares(&a_nz, &p.noise);
        let x_nz = p.signal.nonzero_part();
        for i in 0..k * d {
            assert!((dec.x_tilde_nz[i] - x_nz[i] - absorbed[i]).abs() <= 1e-9);
        }
        let w_tilde = Vector::from_column_slice(&dec.w_tilde);
        assert!(a_nz.tr_mul(&w_tilde).amax() <= 1e-8);
        let rebuilt = &a_nz * Vector::from_column_slice(&dec.x_tilde_nz) + &w_tilde;
        assert!((rebuilt - &p.y).amax() <= 1e-8 * p.y.norm());

        let omega = oracle_max_block_corr(p.dict.matrix(), d, &dec.w_tilde);
        assert!((dec.omega - omega).abs() <= 1e-12);
        let x_block_min = dec
            .x_tilde_nz
            .chunks(d)
            .map(norm2)
            .fold(f64::INFINITY, f64::min);
        assert!((dec.x_block_min - x_block_min).abs() <= 1e-14);
        let inf_corr = (0..p.dict.cols())
            .map(|j| dot(&column(p.dict.matrix(), j), &dec.w_tilde).abs())
            .fold(0.0, f64::max);
        assert!((dec.inf_noise_corr - inf_corr).abs() <= 1e-12);
        assert!(dec.omega_off_support <= dec.omega);
    }
}

#[test]
fn decomposition_rejects_bad_inputs() {
    let mut rng = rng(44);
    let p = random_problem(&mut rng, 6, 4, 2, 1, 0.0, false);
    assert!(decompose_noise(&p.dict, &p.signal, &Vector::zeros(5)).is_err());
    let wide = random_problem(&mut rng, 3, 4, 2, 2, 0.0, false);
    assert!(decompose_noise(&wide.dict, &wide.signal, &Vector::zeros(3)).is_err());
    let empty = BlockSparseSignal::new(Vector::zeros(8), 2).unwrap();
    assert!(decompose_noise(&p.dict, &empty, &Vector::zeros(6)).is_err());
}

#[test]
fn fraction_and_margin_forms_agree() {
    let mut compared = 0;
    for i in 0..=60 {
        let mu_b = i as f64 * 0.005;
        for j in 0..=12 {
            let nu = j as f64 * 0.025;
            for k in 1..=6 {
                for d in [1, 2, 3, 4, 8] {
                    let nu = if d == 1 { 0.0 } else { nu };
                    let c = check_noiseless(mu_b, nu, k, d);
                    let Some(frac) = noiseless_fraction(mu_b, nu, k, d) else {
                        assert!(!c.verdict);
                        continue;
                    };
                    if c.condition_i_margin.abs() < 1e-9 {
                        continue;
                    }
                    compared += 1;
                    assert_eq!(frac < 1.0, c.verdict, "mu_b={mu_b} nu={nu} K={k} d={d}");
                }
            }
        }
    }
    assert!(compared > 1000);
}

#[test]
fn omp_condition_boundaries() {
    for k in 1..5 {
        for d in [1, 2, 4] {
            let edge = 1.0 / (2.0 * (k * d) as f64);
            assert!(!check_omp_condition(edge, k, d, 0.0, 1.0).unwrap().verdict);
            assert!(
                check_omp_condition(edge * 0.99, k, d, 0.0, 1.0)
                    .unwrap()
                    .verdict
            );
        }
    }
    assert!(check_omp_condition(0.01, 1, 1, 0.0, 0.0).is_err());
    assert!(check_noisy_block(0.01, 0.0, 1, 1, 0.0, -1.0).is_err());
}

#[test]
fn chain_holds_on_orthonormal_blocks() {
    let mut dense_seen = 0;
    for seed in 0..150u64 {
        let mut rng = rng(4_400 + seed);
        let m = rng.random_range(40..200);
        let k = rng.random_range(1..4);
        let sigma = [0.0, 0.01, 0.1][seed as usize % 3];
        let p = random_problem(&mut rng, m, 12, 4, k, sigma, true);
        let report = check_comparison_chain(&p.dict, &p.signal, &p.noise)
            .unwrap_or_else(|e| panic!("seed {}: {e}", 4_400 + seed));
        if report.dense {
            dense_seen += 1;
            assert!(report.links.iter().all(|l| l.holds));
        }
        assert!(report.mu_block <= report.mu + 1e-12);
    }
    assert!(dense_seen > 100);
}

#[test]
fn chain_identities_for_single_atoms() {
    let mut rng = rng(45);
    for _ in 0..20 {
        let p = random_problem(&mut rng, 30, 20, 1, 3, 0.05, false);
        let r = comparison_chain_report(&p.dict, &p.signal, &p.noise).unwrap();
        assert_eq!(r.omega, r.inf_noise_corr);
        assert_eq!(r.x_block_min, r.x_min);
        assert!(r.links.iter().all(|l| !l.is_violation()));
    }
}

#[test]
fn chain_with_zero_noise_and_bad_dictionaries() {
    let mut rng = rng(46);
    let p = random_problem(&mut rng, 60, 10, 4, 2, 0.0, true);
    let r = check_comparison_chain(&p.dict, &p.signal, &Vector::zeros(60)).unwrap();
    assert_eq!(r.omega, 0.0);
    assert_eq!(r.inf_noise_corr, 0.0);
    let raw = random_problem(&mut rng, 60, 10, 4, 2, 0.0, false);
    assert!(check_comparison_chain(&raw.dict, &raw.signal, &raw.noise).is_err());
}

#[test]
fn sparse_blocks_only_report_the_sqrt_d_link() {
    let mut rng = rng(47);
    let p = random_problem(&mut rng, 60, 10, 4, 2, 0.0, true);
    let mut x = p.signal.x().clone();
    let l = p.signal.support().indices()[0];
    x[l * 4] = 0.0;
    let signal = BlockSparseSignal::new(x, 4).unwrap();
    let r = comparison_chain_report(&p.dict, &signal, &Vector::zeros(60)).unwrap();
    assert!(!r.dense);
    let link = r
        .links
        .iter()
        .find(|c| c.label == "x_block_min_ge_sqrt_d_x_min")
        .unwrap();
    assert!(!link.asserted);
}

#[test]
fn step_bound_edge_cases() {
    let mut rng = rng(48);
    let p = random_problem(&mut rng, 400, 6, 2, 2, 0.01, true);
    let r =
        step_bounds_report(&p.dict, &p.signal, &p.noise, 0, &PrefixSplit::IndexOrder, 1).unwrap();
    let b = r.bounds.iter().find(|c| c.label.starts_with("b_")).unwrap();
    assert_eq!(b.lhs, 0.0);
    assert!(r.chosen.is_empty());
    assert!(
        step_bounds_report(&p.dict, &p.signal, &p.noise, 2, &PrefixSplit::IndexOrder, 1).is_err()
    );
    let wrong = (0..6).find(|l| !p.signal.support().contains(*l)).unwrap();
    let replay = PrefixSplit::Replay(vec![wrong]);
    assert!(step_bounds_report(&p.dict, &p.signal, &p.noise, 1, &replay, 1).is_err());
}

#[test]
fn single_block_floor_bound() {
    let mut rng = rng(49);
    for _ in 0..20 {
        let p = random_problem(&mut rng, 200, 5, 3, 1, 0.0, false);
        let profile = CoherenceProfile::compute(&p.dict).unwrap();
        let r = step_bounds_report(&p.dict, &p.signal, &p.noise, 0, &PrefixSplit::IndexOrder, 2)
            .unwrap();
        let a = &r.bounds[0];
        // With one block the bound reads ‖A_lᵀA_l x_l‖ ≥ (1 − (d−1)ν − dμ_B)‖x_l‖,
        // weaker than the Gershgorin floor alone.
        let l = p.signal.support().indices()[0];
        let gx = p
            .dict
            .block(l)
            .tr_mul(&(p.dict.block(l) * Vector::from_column_slice(p.signal.block(l))));
        assert!((a.lhs - gx.norm()).abs() <= 1e-10);
        let xl = norm2(p.signal.block(l));
        assert!(gx.norm() >= profile.gershgorin_floor * xl - 1e-10);
        if r.conditioned {
            assert!(a.holds);
        }
    }
}

/// Conditioned instances with both the index-order and the replayed
/// selection prefix; every bound must hold.
#[test]
fn step_bound_campaign() {
    let mut conditioned = 0;
    for seed in 0..120u64 {
        let mut rng = rng(9_000 + seed);
        let d = [2, 4][seed as usize % 2];
        let k = 2 + seed as usize % 2;
        let sigma = [0.0, 0.01, 0.05][seed as usize % 3];
        let p = random_problem(&mut rng, 1500, 6, d, k, sigma, d == 4);
        let trace = bomp(&p.y, &p.dict, StoppingRule::known_k(k), None).unwrap();
        let correct_prefix = trace
            .chosen
            .iter()
            .take_while(|&&l| p.signal.support().contains(l))
            .count();
        for j in 0..k {
            let report = check_step_bounds(
                &p.dict,
                &p.signal,
                &p.noise,
                j,
                &PrefixSplit::IndexOrder,
                seed,
            )
            .unwrap_or_else(|e| panic!("seed {seed} k={j}: {e}"));
            if report.conditioned {
                conditioned += 1;
            }
            if j <= correct_prefix {
                let replay = PrefixSplit::Replay(trace.chosen.clone());
                check_step_bounds(&p.dict, &p.signal, &p.noise, j, &replay, seed)
                    .unwrap_or_else(|e| panic!("seed {seed} replay k={j}: {e}"));
            }
        }
    }
    assert!(conditioned >= 100, "only {conditioned} conditioned checks");
}
