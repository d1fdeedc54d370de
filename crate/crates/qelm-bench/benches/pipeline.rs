use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qelm_core::observables::{self, bell_witness};
use qelm_core::readout::{self, DataMatrix, InputForm, Targets, TrainOptions};
use qelm_core::reservoir::{self, CoinAngles, ReservoirConfig, WalkConfig};
use qelm_core::sampling::{self, build_matrices, Sampler, Shots};
use qelm_core::shadow;
use qelm_core::states::{self, PrepMode, ReferenceState, ReferenceTag};

fn sample_config(seed: u64) -> ReservoirConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut angle = || rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    let [(a11, a21), (a12, a22)] = reservoir::fabrication_alphas();
    ReservoirConfig {
        walk_a: WalkConfig::new(CoinAngles { zeta: angle(), theta: angle(), phi: angle() }, a11, a21),
        walk_b: WalkConfig::new(CoinAngles { zeta: angle(), theta: angle(), phi: angle() }, a12, a22),
        projection_a: reservoir::projection_ket(angle(), angle()),
        projection_b: reservoir::projection_ket(angle(), angle()),
        oam_internal_halfwidth: 4,
    }
}

fn bench_pipeline(c: &mut Criterion) {
    let cfg = sample_config(3);
    let povm = reservoir::effective_povm(&cfg).unwrap();
    let obs = vec![bell_witness(1).observable];
    let sep = ReferenceState::named(ReferenceTag::VV).unwrap();
    let ent = ReferenceState::named(ReferenceTag::PsiPlus).unwrap();
    let dataset =
        states::generate_dataset(&sep, &ent, 150, 150, PrepMode::SameAngles, 5, &obs).unwrap();
    let sampler = Sampler::default();
    let (probabilities, counts) =
        build_matrices(&dataset, &povm, Shots::PerState(100_000), 7, &sampler).unwrap();
    let counts = counts.unwrap();
    let targets = Targets::new(
        vec!["W_Phi+".to_string()],
        observables::expectation_matrix(&obs, &dataset).unwrap(),
    )
    .unwrap();

    c.bench_function("effective_povm", |b| {
        b.iter(|| reservoir::effective_povm(&cfg).unwrap())
    });

    c.bench_function("outcome_probabilities_300_states", |b| {
        b.iter(|| {
            for state in dataset.states() {
                sampling::outcome_probabilities(state.rho(), &povm).unwrap();
            }
        })
    });

    c.bench_function("multinomial_sampling_300x100k", |b| {
        b.iter(|| build_matrices(&dataset, &povm, Shots::PerState(100_000), 7, &sampler).unwrap())
    });

    c.bench_function("train_pinv_25x300", |b| {
        let options = TrainOptions { input_form: InputForm::Frequencies, ..Default::default() };
        b.iter(|| readout::train(&DataMatrix::Counts(&counts), &targets, &options).unwrap())
    });

    c.bench_function("frame_superoperator_and_duals", |b| {
        b.iter(|| {
            let f = shadow::frame_superoperator(&povm).unwrap();
            shadow::dual_frame(&f, &povm, 1e-10).unwrap()
        })
    });

    let _ = probabilities;
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
