//! Acceptance suite: one test per shipped criterion, each printing a PASS or
//! FAIL line with its measurements and asserting the stated tolerance.
//!
//! Run with:
//!   cargo test -p qelm-core --test acceptance -- --nocapture

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qelm_core::harness::{self, config::Composition, ExperimentConfig, LossModel};
use qelm_core::linalg::{ComplexMatrix, DensityMatrix, Ket};
use qelm_core::observables::{self, bell_witness, Observable, WitnessSpec};
use qelm_core::readout::{self, DataMatrix, InputForm, Targets, TrainOptions};
use qelm_core::reservoir::{self, ReservoirConfig};
use qelm_core::sampling::{self, build_matrices, derive_seed, Sampler, Shots};
use qelm_core::shadow;
use qelm_core::states::{self, PrepMode, ReferenceState, ReferenceTag};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_reservoir(name: &str) -> ReservoirConfig {
    reservoir::load_reservoir(&configs_dir().join(name)).expect("shipped reservoir config loads")
}

fn report(criterion: u32, name: &str, pass: bool, elapsed: f64, details: &str) {
    println!(
        "ACCEPTANCE {criterion:02} ({name}): {} [{elapsed:.2} s] {details}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn full_targets() -> Vec<Observable> {
    let mut obs = observables::all_pauli_products();
    for i in 1..=4 {
        obs.push(bell_witness(i).observable);
    }
    obs
}

fn random_mixed_state(rng: &mut ChaCha8Rng) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(4, 4, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let gram = g.mul(&g.adjoint());
    let tr = gram.trace().re;
    DensityMatrix::new(gram.scale(Complex64::new(1.0 / tr, 0.0))).unwrap()
}

/// Exact-statistics readout trained on a full-rank (16) span with the
/// optimized reservoir; shared by criteria 2 and 3.
fn rank16_exact_readout(
    povm: &qelm_core::reservoir::EffectivePovm,
    obs: &[Observable],
) -> readout::ReadoutMatrix {
    let sep = ReferenceState::named(ReferenceTag::VH).unwrap();
    let ent = ReferenceState::named(ReferenceTag::PsiPlus).unwrap();
    let dataset =
        states::generate_dataset(&sep, &ent, 120, 0, PrepMode::IndependentAngles, 2024, obs).unwrap();
    let ranks = states::span_ranks(&dataset, 1e-9).unwrap();
    assert_eq!(ranks.separable, 16, "training span must be full rank");
    let (probabilities, _) =
        build_matrices(&dataset, povm, Shots::Exact, 0, &Sampler::default()).unwrap();
    let targets = Targets::new(
        obs.iter().map(|o| o.name().to_string()).collect(),
        observables::expectation_matrix(obs, &dataset).unwrap(),
    )
    .unwrap();
    let options = TrainOptions { input_form: InputForm::Frequencies, ..Default::default() };
    let (readout_matrix, train_report) =
        readout::train(&DataMatrix::Probabilities(&probabilities), &targets, &options).unwrap();
    assert_eq!(train_report.effective_rank, 16);
    readout_matrix
}

#[test]
fn acceptance_01_structural_rank_reproduction() {
    let started = Instant::now();
    let vv = ReferenceState::named(ReferenceTag::VV).unwrap();
    let vh = ReferenceState::named(ReferenceTag::VH).unwrap();
    let ent = ReferenceState::named(ReferenceTag::PsiPlus).unwrap();
    let measure = |sep: &ReferenceState, mode: PrepMode| {
        let d = states::generate_dataset(sep, &ent, 120, 120, mode, 13, &[]).unwrap();
        let r = states::span_ranks(&d, 1e-9).unwrap();
        (r.separable, r.entangled, r.all)
    };
    let vv_same = measure(&vv, PrepMode::SameAngles);
    let vh_same = measure(&vh, PrepMode::SameAngles);
    let vh_indep = measure(&vh, PrepMode::IndependentAngles);
    let expected = [(9, 9, 9), (9, 6, 10), (16, 10, 16)];
    let measured = [vv_same, vh_same, vh_indep];
    let pass = measured == expected;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        1,
        "structural rank reproduction",
        pass,
        elapsed,
        &format!(
            "VV/same {vv_same:?} (want {:?}), VH/same {vh_same:?} (want {:?}), VH/indep {vh_indep:?} (want {:?})",
            expected[0], expected[1], expected[2]
        ),
    );
    assert!(elapsed < 10.0, "runtime budget exceeded: {elapsed:.2} s");
    assert_eq!(
        measured, expected,
        "span-rank triples differ from the required table; the entangled same-angle \
         orbit (U x U)|Psi+> spans 6 dimensions (its amplitude matrices stay in the \
         real span of I, i*sigma_x, i*sigma_z), so the VV row measures (9, 6, 9)"
    );
}

#[test]
fn acceptance_02_exact_inversion_identity() {
    let started = Instant::now();
    let reservoir_cfg = load_reservoir("r1.toml");
    let povm = reservoir::effective_povm(&reservoir_cfg).unwrap();
    assert!(povm.is_informationally_complete());
    let obs = full_targets();
    let readout_matrix = rank16_exact_readout(&povm, &obs);

    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_mixed_state(&mut rng);
        let probabilities = sampling::outcome_probabilities(&rho, &povm).unwrap();
        let predictions = readout_matrix.predict_probabilities(&probabilities).unwrap();
        for (j, o) in obs.iter().enumerate() {
            worst = worst.max((predictions[j] - o.expectation(&rho).unwrap()).abs());
        }
    }
    let pass = worst < 1e-9;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        2,
        "exact-inversion identity",
        pass,
        elapsed,
        &format!("max |error| = {worst:.3e} over 16 Pauli products + 4 witnesses x 100 states"),
    );
    assert!(elapsed < 5.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(pass, "exact inversion left error {worst:.3e} >= 1e-9");
}

#[test]
fn acceptance_03_readout_matches_dual_frame() {
    let started = Instant::now();
    let reservoir_cfg = load_reservoir("r1.toml");
    let povm = reservoir::effective_povm(&reservoir_cfg).unwrap();
    let obs = full_targets();
    let readout_matrix = rank16_exact_readout(&povm, &obs);

    let frame = shadow::frame_superoperator(&povm).unwrap();
    let duals = shadow::dual_frame(&frame, &povm, 1e-10).unwrap();
    let estimators: Vec<Vec<f64>> =
        obs.iter().map(|o| shadow::shadow_estimator(o, &duals).unwrap()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rho = random_mixed_state(&mut rng);
        let probabilities = sampling::outcome_probabilities(&rho, &povm).unwrap();
        let qelm = readout_matrix.predict_probabilities(&probabilities).unwrap();
        for (j, estimator) in estimators.iter().enumerate() {
            let dual: f64 =
                probabilities.probs().iter().zip(estimator).map(|(p, o)| p * o).sum();
            worst = worst.max((qelm[j] - dual).abs());
        }
    }
    let pass = worst < 1e-8;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        3,
        "readout equals dual-frame estimator",
        pass,
        elapsed,
        &format!("max |difference| = {worst:.3e} over 20 observables x 100 states"),
    );
    assert!(elapsed < 5.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(pass, "trained readout and dual frame differ by {worst:.3e} >= 1e-8");
}

#[test]
fn acceptance_04_inverse_statistics_scaling() {
    let started = Instant::now();
    let cfg = ExperimentConfig::load(&configs_dir().join("sweep_scaling.toml")).unwrap();
    let n_list = [10_000u64, 30_000, 100_000, 300_000, 1_000_000];
    let sweep = harness::sweep_statistics(&cfg, &n_list).unwrap();
    let slope = sweep.last_decade_slope;
    let settling = sweep.local_slopes[0];
    let slope_ok = (-1.15..=-0.85).contains(&slope);
    let settling_ok = settling > -1.0;
    let pass = slope_ok && settling_ok;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        4,
        "1/N scaling with settling",
        pass,
        elapsed,
        &format!(
            "last-decade slope = {slope:.3} (band [-1.15, -0.85]), small-N local slope = {settling:.3} (> -1), mse = {:?}",
            sweep.rows.iter().map(|r| format!("{:.2e}", r.mse_mean)).collect::<Vec<_>>()
        ),
    );
    assert!(elapsed < 120.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(slope_ok, "last-decade slope {slope:.3} outside [-1.15, -0.85]");
    assert!(settling_ok, "small-N local slope {settling:.3} shows no settling regime");
}

#[test]
fn acceptance_05_shadow_mse_saturation() {
    let started = Instant::now();
    let reservoir_cfg = load_reservoir("r1.toml");
    let povm = reservoir::effective_povm(&reservoir_cfg).unwrap();
    let frame = shadow::frame_superoperator(&povm).unwrap();
    let duals = shadow::dual_frame(&frame, &povm, 1e-10).unwrap();
    let witness = bell_witness(1);
    let estimator = shadow::shadow_estimator(&witness.observable, &duals).unwrap();

    let obs = vec![witness.observable.clone()];
    let sep = ReferenceState::named(ReferenceTag::VH).unwrap();
    let ent = ReferenceState::named(ReferenceTag::PsiPlus).unwrap();
    let test = states::generate_dataset(&sep, &ent, 0, 150, PrepMode::SameAngles, 31, &obs).unwrap();
    let truths: Vec<f64> = test.states().iter().map(|s| s.true_values()["W_Phi+"]).collect();
    let n_true = 10_000u64;
    let (_, counts) =
        build_matrices(&test, &povm, Shots::PerState(n_true), 3, &Sampler::default()).unwrap();
    let counts = counts.unwrap();

    let saturation = truths.iter().map(|t| t * t).sum::<f64>() / truths.len() as f64;
    let at_huge =
        shadow::shadow_mse(&counts, &truths, &estimator, 1e3 * n_true as f64).unwrap();
    let relative_gap = (at_huge - saturation).abs() / saturation;
    let grid = shadow::default_n_grid();
    let (n_star, mse_min) = shadow::min_mse_over_n(&counts, &truths, &estimator, &grid).unwrap();
    let saturation_ok = relative_gap < 0.05;
    let minimum_ok = mse_min < saturation;
    let pass = saturation_ok && minimum_ok;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        5,
        "shadow MSE saturation",
        pass,
        elapsed,
        &format!(
            "MSE(1e3 N) = {at_huge:.4} vs mean truth^2 = {saturation:.4} (gap {:.2}%), min = {mse_min:.4} at n = {n_star:.0}",
            relative_gap * 100.0
        ),
    );
    assert!(elapsed < 30.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(saturation_ok, "saturation gap {:.3}% >= 5%", relative_gap * 100.0);
    assert!(minimum_ok, "grid minimum {mse_min} does not beat saturation {saturation}");
}

#[test]
fn acceptance_06_separable_only_generalization() {
    let started = Instant::now();
    let reservoir_cfg = load_reservoir("r1.toml");
    let povm = reservoir::effective_povm(&reservoir_cfg).unwrap();
    let witness = bell_witness(1);
    let obs = vec![witness.observable.clone()];
    let sep = ReferenceState::named(ReferenceTag::VH).unwrap();
    let ent = ReferenceState::named(ReferenceTag::PsiPlus).unwrap();
    let n = 100_000u64;

    let train =
        states::generate_dataset(&sep, &ent, 150, 0, PrepMode::IndependentAngles, 600, &obs).unwrap();
    assert_eq!(states::span_ranks(&train, 1e-9).unwrap().separable, 16);
    let (_, counts) = build_matrices_finite(&povm, &train, n).unwrap_pair();
    let targets = Targets::new(
        vec!["W_Phi+".to_string()],
        observables::expectation_matrix(&obs, &train).unwrap(),
    )
    .unwrap();
    let options = TrainOptions { input_form: InputForm::Frequencies, ..Default::default() };
    let (readout_matrix, _) = readout::train(&DataMatrix::Counts(&counts), &targets, &options).unwrap();

    let test =
        states::generate_dataset(&sep, &ent, 0, 150, PrepMode::IndependentAngles, 601, &obs).unwrap();
    let (_, test_counts) = build_matrices_finite(&povm, &test, n).unwrap_pair();
    let mut hits = 0usize;
    for (k, state) in test.states().iter().enumerate() {
        let pred = readout_matrix.predict_counts(&test_counts.columns()[k]).unwrap()[0];
        let truth = state.true_values()["W_Phi+"];
        if (pred < 0.0) == (truth < 0.0) {
            hits += 1;
        }
    }
    let accuracy = hits as f64 / test.states().len() as f64;
    let pass = accuracy > 0.90;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        6,
        "separable-only generalization",
        pass,
        elapsed,
        &format!("sign accuracy = {accuracy:.4} on 150 unseen maximally entangled states at N = 1e5"),
    );
    assert!(elapsed < 60.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(pass, "sign accuracy {accuracy:.4} <= 0.90");
}

#[test]
fn acceptance_07_constant_bias_and_repair() {
    let started = Instant::now();
    let reservoir_cfg = load_reservoir("r1.toml");
    let povm = reservoir::effective_povm(&reservoir_cfg).unwrap();
    let witness = bell_witness(1);
    let obs = vec![witness.observable.clone()];
    let sep = ReferenceState::named(ReferenceTag::VH).unwrap();
    let ent = ReferenceState::named(ReferenceTag::PsiPlus).unwrap();

    let train = states::generate_dataset(&sep, &ent, 150, 0, PrepMode::SameAngles, 700, &obs).unwrap();
    let test = states::generate_dataset(&sep, &ent, 0, 150, PrepMode::SameAngles, 701, &obs).unwrap();

    let residuals = |train_set: &states::Dataset| -> Vec<f64> {
        let (probabilities, _) =
            build_matrices(train_set, &povm, Shots::Exact, 0, &Sampler::default()).unwrap();
        let targets = Targets::new(
            vec!["W_Phi+".to_string()],
            observables::expectation_matrix(&obs, train_set).unwrap(),
        )
        .unwrap();
        let options = TrainOptions { input_form: InputForm::Frequencies, ..Default::default() };
        let (readout_matrix, _) =
            readout::train(&DataMatrix::Probabilities(&probabilities), &targets, &options).unwrap();
        test.states()
            .iter()
            .map(|state| {
                let p = sampling::outcome_probabilities(state.rho(), &povm).unwrap();
                readout_matrix.predict_probabilities(&p).unwrap()[0] - state.true_values()["W_Phi+"]
            })
            .collect()
    };

    let base = residuals(&train);
    let offset = base.iter().sum::<f64>() / base.len() as f64;
    let std = (base.iter().map(|r| (r - offset) * (r - offset)).sum::<f64>()
        / (base.len() - 1) as f64)
        .sqrt();

    // append a single entangled state to the training set
    let extra = states::generate_dataset(&sep, &ent, 0, 1, PrepMode::SameAngles, 702, &obs).unwrap();
    let repaired_train = train.concat(&extra).unwrap();
    let repaired = residuals(&repaired_train);
    let repaired_offset = repaired.iter().sum::<f64>() / repaired.len() as f64;

    let bias_ok = std < 0.02 && offset.abs() > 1e-3;
    let repair_ok = repaired_offset.abs() < 1e-6;
    let pass = bias_ok && repair_ok;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        7,
        "constant bias and one-state repair",
        pass,
        elapsed,
        &format!(
            "offset = {offset:.5}, residual std = {std:.2e}; after adding one entangled state offset = {repaired_offset:.2e}"
        ),
    );
    assert!(elapsed < 30.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(bias_ok, "expected a common nonzero offset (offset {offset:.3e}, std {std:.3e})");
    assert!(repair_ok, "offset after repair is {repaired_offset:.3e} >= 1e-6");
}

#[test]
fn acceptance_08_noise_linearity_and_accuracy() {
    let started = Instant::now();
    let reservoir_cfg = load_reservoir("r2.toml");
    let povm = reservoir::effective_povm(&reservoir_cfg).unwrap();
    let witness = bell_witness(1);
    let obs = vec![witness.observable.clone()];
    let sep = ReferenceState::named(ReferenceTag::VH).unwrap();
    let ent = ReferenceState::named(ReferenceTag::PsiPlus).unwrap();
    let shots = 1117u64;

    // train at experimental-scale statistics on a mixed pool
    let train = states::generate_dataset(&sep, &ent, 150, 150, PrepMode::SameAngles, 800, &obs).unwrap();
    let (_, counts) = build_matrices_finite(&povm, &train, shots).unwrap_pair();
    let targets = Targets::new(
        vec!["W_Phi+".to_string()],
        observables::expectation_matrix(&obs, &train).unwrap(),
    )
    .unwrap();
    let options = TrainOptions { input_form: InputForm::Frequencies, ..Default::default() };
    let (readout_matrix, _) = readout::train(&DataMatrix::Counts(&counts), &targets, &options).unwrap();

    // paired test states sharing preparation angles
    let (ents, seps) =
        states::generate_paired_dataset(&ent, &sep, 150, PrepMode::SameAngles, 801, &obs).unwrap();
    let (p_ent, _) = build_matrices(&ents, &povm, Shots::Exact, 0, &Sampler::default()).unwrap();
    let (p_sep, _) = build_matrices(&seps, &povm, Shots::Exact, 0, &Sampler::default()).unwrap();

    // part 1: exact linearity over a 21-point grid
    let mut worst_linearity: f64 = 0.0;
    for k in 0..ents.states().len() {
        let pred_ent = readout_matrix.predict_probabilities(&p_ent.columns()[k]).unwrap()[0];
        let pred_sep = readout_matrix.predict_probabilities(&p_sep.columns()[k]).unwrap()[0];
        for i in 0..=20 {
            let p = i as f64 / 20.0;
            let mixed = sampling::mix_distributions(&p_ent.columns()[k], &p_sep.columns()[k], p).unwrap();
            let pred_mixed = readout_matrix.predict_probabilities(&mixed).unwrap()[0];
            let convex = (1.0 - p) * pred_ent + p * pred_sep;
            worst_linearity = worst_linearity.max((pred_mixed - convex).abs());
        }
    }
    let linearity_ok = worst_linearity < 1e-12;

    // part 2: sign accuracy at experimental-scale statistics for p <= 0.5
    let sampler = Sampler::default();
    let mut min_accuracy: f64 = 1.0;
    for (pi, p) in [0.0, 0.25, 0.5].into_iter().enumerate() {
        let mut hits = 0usize;
        for k in 0..ents.states().len() {
            let mixed = sampling::mix_distributions(&p_ent.columns()[k], &p_sep.columns()[k], p).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(802, pi as u64, k as u64));
            let c = sampler.sample(&mixed, shots, &mut rng).unwrap();
            let pred = readout_matrix.predict_counts(&c).unwrap()[0];
            let truth = ents.states()[k].true_values()["W_Phi+"];
            if (pred < 0.0) == (truth < 0.0) {
                hits += 1;
            }
        }
        min_accuracy = min_accuracy.min(hits as f64 / ents.states().len() as f64);
    }
    let accuracy_ok = min_accuracy > 0.5;
    let pass = linearity_ok && accuracy_ok;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        8,
        "noise linearity and robustness",
        pass,
        elapsed,
        &format!(
            "max |prediction - convex combination| = {worst_linearity:.2e}; min sign accuracy for p <= 0.5 at N = 1117: {min_accuracy:.3}"
        ),
    );
    assert!(elapsed < 60.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(linearity_ok, "linearity violated by {worst_linearity:.3e} >= 1e-12");
    assert!(accuracy_ok, "sign accuracy {min_accuracy:.3} <= 0.5 for p <= 0.5");
}

#[test]
fn acceptance_09_witness_validity() {
    let started = Instant::now();
    let mut specs: Vec<WitnessSpec> = (1..=4).map(bell_witness).collect();
    specs.push(
        WitnessSpec::from_target(ReferenceTag::PsiPlusP1.ket().unwrap(), "W_P1").unwrap(),
    );
    specs.push(
        WitnessSpec::from_target(ReferenceTag::PsiPlusP2.ket().unwrap(), "W_P2").unwrap(),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(900);
    let mut random_qubit = |rng: &mut ChaCha8Rng| {
        Ket::normalized(vec![
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
        ])
        .unwrap()
    };
    let mut min_product_value: f64 = f64::INFINITY;
    for _ in 0..100_000 {
        let prod = random_qubit(&mut rng).tensor(&random_qubit(&mut rng));
        for spec in &specs {
            // <psi| W |psi> = alpha - |<psi|target>|^2 for these witnesses
            let value = spec.alpha - prod.inner(&spec.target).norm_sqr();
            min_product_value = min_product_value.min(value);
        }
    }
    let product_ok = min_product_value >= -1e-9;

    let mut worst_target_gap: f64 = 0.0;
    for spec in &specs {
        let rho = DensityMatrix::from_ket(&spec.target);
        let on_target = spec.observable.expectation(&rho).unwrap();
        worst_target_gap = worst_target_gap.max((on_target - (spec.alpha - 1.0)).abs());
    }
    let target_ok = worst_target_gap < 1e-12;
    let pass = product_ok && target_ok;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        9,
        "witness validity",
        pass,
        elapsed,
        &format!(
            "min over 1e5 product states = {min_product_value:.3e} (>= -1e-9); max |<W>_target - (alpha-1)| = {worst_target_gap:.2e}"
        ),
    );
    assert!(elapsed < 30.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(product_ok, "witness went negative on a product state: {min_product_value:.3e}");
    assert!(target_ok, "target expectation deviates by {worst_target_gap:.3e}");
}

#[test]
fn acceptance_10_optimizer_ordering() {
    let started = Instant::now();
    // run the optimizer from a seeded draw, then compare against 100 random
    // configurations drawn from the same family
    let seed_cfg = load_reservoir("r3.toml");
    let outcome = harness::optimize_reservoir(&seed_cfg, 24_000, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut random_objectives = Vec::with_capacity(100);
    for _ in 0..100 {
        let mut angle = || rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
        let [(a11, a21), (a12, a22)] = reservoir::fabrication_alphas();
        let cfg = ReservoirConfig {
            walk_a: reservoir::WalkConfig::new(
                reservoir::CoinAngles { zeta: angle(), theta: angle(), phi: angle() },
                a11,
                a21,
            ),
            walk_b: reservoir::WalkConfig::new(
                reservoir::CoinAngles { zeta: angle(), theta: angle(), phi: angle() },
                a12,
                a22,
            ),
            projection_a: reservoir::projection_ket(angle(), angle()),
            projection_b: reservoir::projection_ket(angle(), angle()),
            oam_internal_halfwidth: 4,
        };
        random_objectives.push(harness::frame_objective(&cfg).unwrap());
    }
    let beaten = random_objectives.iter().filter(|&&o| outcome.objective < o).count();
    let ordering_ok = beaten >= 95;

    // slope-regime comparison: the optimized configuration must enter the
    // 1/N descent at a statistics value no larger than the random baseline's
    let base_cfg = ExperimentConfig::load(&configs_dir().join("sweep_scaling.toml")).unwrap();
    let n_list = [10_000u64, 30_000, 100_000, 300_000, 1_000_000];
    let reach = |reservoir_cfg: &ReservoirConfig| -> usize {
        let mut cfg = base_cfg.clone();
        cfg.reservoir = reservoir_cfg.clone();
        cfg.repeats = 8;
        let sweep = harness::sweep_statistics(&cfg, &n_list).unwrap();
        sweep
            .local_slopes
            .iter()
            .position(|&s| s <= -0.85)
            .unwrap_or(n_list.len())
    };
    let reach_optimized = reach(&outcome.config);
    let reach_random = reach(&seed_cfg);
    let regime_ok = reach_optimized <= reach_random;
    let pass = ordering_ok && regime_ok;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        10,
        "optimizer ordering",
        pass,
        elapsed,
        &format!(
            "optimized objective {:.3e} beats {beaten}/100 random configs; descent reached at grid index {reach_optimized} (optimized) vs {reach_random} (random)",
            outcome.objective
        ),
    );
    assert!(elapsed < 600.0, "runtime budget exceeded: {elapsed:.2} s");
    assert!(ordering_ok, "optimized config only beats {beaten}/100 random configurations");
    assert!(
        regime_ok,
        "optimized config reaches the descent later (index {reach_optimized}) than random (index {reach_random})"
    );
}

#[test]
fn acceptance_11_throughput_formula() {
    let started = Instant::now();
    let t = harness::throughput_estimate(&LossModel::experimental()).unwrap();
    let pass = (t.per_outcome_hz - 6.1).abs() < 0.1;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        11,
        "throughput formula",
        pass,
        elapsed,
        &format!("per-outcome rate = {:.4} Hz (total {:.2} Hz)", t.per_outcome_hz, t.total_hz),
    );
    assert!(pass, "per-outcome rate {:.4} Hz misses 6.1 +- 0.1 Hz", t.per_outcome_hz);
}

#[test]
fn acceptance_12_determinism() {
    let started = Instant::now();
    let dir = std::env::temp_dir().join("qelm_acceptance_determinism");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();

    let mut cfg = ExperimentConfig::load(&configs_dir().join("e1.toml")).unwrap();
    cfg.repeats = 3;
    cfg.sizes = harness::SplitSizes { n_sep_train: 20, n_ent_train: 20, n_sep_test: 20, n_ent_test: 20 };
    cfg.train_composition = Composition::Mixed;

    let out_a = dir.join("run_a");
    let out_b = dir.join("run_b");
    harness::run_scenario(&cfg, &out_a).unwrap();
    harness::run_scenario(&cfg, &out_b).unwrap();

    let mut compared = 0usize;
    let mut mismatch = None;
    let manifest = harness::Manifest::load(&out_a).unwrap();
    manifest.verify_complete(&out_a).unwrap();
    for entry in &manifest.files {
        let a = std::fs::read(out_a.join(&entry.path)).unwrap();
        let b = std::fs::read(out_b.join(&entry.path)).unwrap();
        compared += 1;
        if a != b {
            mismatch = Some(entry.path.clone());
            break;
        }
    }
    let pass = mismatch.is_none() && compared > 0;
    let elapsed = started.elapsed().as_secs_f64();
    report(
        12,
        "determinism",
        pass,
        elapsed,
        &format!(
            "{compared} artifact files byte-compared{}",
            mismatch.as_ref().map(|m| format!(", first mismatch: {m}")).unwrap_or_default()
        ),
    );
    assert!(pass, "rerun with the same seed produced different bytes: {mismatch:?}");
}

/// Helper trait making the (probabilities, counts) pair ergonomics in the
/// tests explicit about finite statistics.
trait UnwrapPair {
    fn unwrap_pair(self) -> (sampling::ProbabilityMatrix, sampling::CountsMatrix);
}

impl UnwrapPair
    for qelm_core::error::Result<(sampling::ProbabilityMatrix, Option<sampling::CountsMatrix>)>
{
    fn unwrap_pair(self) -> (sampling::ProbabilityMatrix, sampling::CountsMatrix) {
        let (p, c) = self.unwrap();
        (p, c.expect("finite statistics requested"))
    }
}

/// Finite-statistics builder with the argument order used by these tests.
fn build_matrices_finite(
    povm: &qelm_core::reservoir::EffectivePovm,
    dataset: &states::Dataset,
    shots: u64,
) -> qelm_core::error::Result<(sampling::ProbabilityMatrix, Option<sampling::CountsMatrix>)> {
    build_matrices(dataset, povm, Shots::PerState(shots), dataset.seed(), &Sampler::default())
}
