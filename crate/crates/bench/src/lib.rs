//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use sphereqc::diffmap::ChartParams;
use sphereqc::{synth, LossWeights, Registration, SolverConfig, StandardSphere, TaskContext, C64};

/// Per-face coefficients with random phase and modulus below `max`.
pub fn random_face_mu(faces: usize, max: f64, seed: u64) -> Vec<C64> {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..faces)
        .map(|_| C64::from_polar(max * r.random::<f64>(), std::f64::consts::TAU * r.random::<f64>()))
        .collect()
}

/// Chart parameters with small random raw coefficients.
pub fn random_params(num_vertices: usize, seed: u64) -> ChartParams {
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut p = ChartParams::identity(num_vertices);
    for m in p.mu_raw.iter_mut() {
        *m = C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5) * 0.3;
    }
    p
}

/// The two-pair twist problem on a standard sphere with `rings` rings.
pub fn twist_registration(rings: usize) -> Registration {
    let case = synth::twist(2, 0).expect("valid twist case");
    let sphere = StandardSphere::new(rings).expect("valid ring count");
    let task = TaskContext {
        landmarks: Some(
            sphereqc::boost::LandmarkTask::new(&sphere, case.spec, &case.mesh.vertices).expect("landmarks locate"),
        ),
        ..TaskContext::default()
    };
    Registration::new(sphere, task, LossWeights::default(), SolverConfig::default()).expect("valid registration")
}
