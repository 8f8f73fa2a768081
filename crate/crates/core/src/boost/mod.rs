//! The registration loop: two chart maps glued into one sphere deformation,
//! the total objective, and its gradient-based optimization.

mod objective;
mod optimize;
mod sphere;
mod task;

pub use objective::{Evaluation, LossBreakdown, Registration};
pub use optimize::{Adam, BoostState, RegistrationResult, SphericalMap, StopConfig, MIN_POSITIVE_PARAM};
pub use sphere::{ChartPoint, DiskPoint, SeamMesh, StandardSphere};
pub use task::{transfer_field, ChartTables, IntensityTask, LabelTask, LandmarkTask, TaskContext};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffmap::ChartParams;
    use crate::geom::{normalize, Vec3, C64};
    use crate::losses::{CurveDistance, CurvePoints, LandmarkCurve, LandmarkSpec, LossWeights};
    use crate::lsqc::SolverConfig;
    use crate::mesh::icosphere;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn landmark_task(sphere: &StandardSphere, seed: u64) -> TaskContext {
        let mut r = rng(seed);
        let mut pts = Vec::new();
        let mut tgt = Vec::new();
        for _ in 0..6 {
            let p = normalize([r.random::<f64>() - 0.5, r.random::<f64>() - 0.5, r.random::<f64>() - 0.5]);
            let q = normalize([p[0] + 0.1 * (r.random::<f64>() - 0.5), p[1] + 0.1, p[2] - 0.05]);
            pts.push(p);
            tgt.push(q);
        }
        let spec = LandmarkSpec {
            curves: vec![LandmarkCurve {
                moving: CurvePoints::Points(pts),
                target: tgt,
                endpoints: false,
            }],
            distance: CurveDistance::L2,
        };
        TaskContext {
            landmarks: Some(LandmarkTask::new(sphere, spec, &[]).unwrap()),
            ..TaskContext::default()
        }
    }

    fn intensity_task(sphere: &StandardSphere) -> TaskContext {
        let m = icosphere(2).unwrap();
        let f = |p: &Vec3, s: f64| (3.0 * p[0] + s).sin() * (2.0 * p[1]).cos() + p[2];
        let mv: Vec<f64> = m.vertices.iter().map(|p| f(p, 0.0)).collect();
        let fx: Vec<f64> = m.vertices.iter().map(|p| f(p, 0.3)).collect();
        TaskContext {
            intensity: Some(IntensityTask::new(sphere, &m, &mv, &m, &fx).unwrap()),
            ..TaskContext::default()
        }
    }

    fn random_params(nv: usize, r: &mut rand_chacha::ChaCha8Rng) -> ChartParams {
        let mut p = ChartParams::identity(nv);
        for m in p.mu_raw.iter_mut() {
            *m = C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5) * 0.3;
        }
        p.temp_bc = 0.9 + 0.2 * r.random::<f64>();
        p.pins_raw = [C64::new(0.02, 0.01), C64::new(1.5, 0.05)];
        p.temp_pin = 0.95 + 0.1 * r.random::<f64>();
        p.rot = 0.1 * (r.random::<f64>() - 0.5);
        p.scale = 1.0 + 0.1 * (r.random::<f64>() - 0.5);
        p.trans = C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5) * 0.05;
        p
    }

    fn fd_check(reg: &mut Registration, seed: u64) {
        let nv = reg.num_disk_vertices();
        let mut r = rng(seed);
        let south = random_params(nv, &mut r);
        let north = random_params(nv, &mut r);
        let ev = reg.evaluate(&south, &north, true).unwrap();
        assert_eq!(ev.breakdown.folds, 0);
        let (gs, gn) = ev.grads.unwrap();
        let half = ChartParams::flat_len(nv);
        let mut idx: Vec<usize> = (0..4).map(|_| r.random_range(0..2 * nv)).collect();
        idx.extend(2 * nv..half);
        for (chart, g) in [(0, gs.flatten()), (1, gn.flatten())] {
            for &k in &idx {
                let h = 1e-5;
                let mut eval = |d: f64| {
                    let mut v = if chart == 0 { south.flatten() } else { north.flatten() };
                    v[k] += d;
                    let p = ChartParams::unflatten(nv, &v).unwrap();
                    let (s, n) = if chart == 0 { (&p, &north) } else { (&south, &p) };
                    reg.evaluate(s, n, false).unwrap().breakdown.total
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
                assert!(rel < 1e-3, "seed {seed} chart {chart} param {k}: {} vs fd {fd}", g[k]);
            }
        }
    }

    #[test]
    fn full_gradient_matches_fd_landmarks() {
        let s = StandardSphere::new(3).unwrap();
        let task = landmark_task(&s, 1);
        let mut reg = Registration::new(s, task, LossWeights::default(), SolverConfig::default()).unwrap();
        for seed in 0..3 {
            fd_check(&mut reg, seed);
        }
    }

    #[test]
    fn full_gradient_matches_fd_intensity() {
        let s = StandardSphere::new(3).unwrap();
        let task = intensity_task(&s);
        let mut reg = Registration::new(s, task, LossWeights::default(), SolverConfig::default()).unwrap();
        fd_check(&mut reg, 7);
    }

    #[test]
    fn identity_start_is_stationary() {
        let s = StandardSphere::new(4).unwrap();
        let nv = s.disk.num_vertices();
        let mut reg = Registration::new(s, TaskContext::identity(), LossWeights::default(), SolverConfig::default()).unwrap();
        let id = ChartParams::identity(nv);
        let ev = reg.evaluate(&id, &id, false).unwrap();
        let b = ev.breakdown;
        assert!(b.bm < 1e-20 && b.folding == 0.0 && b.bc == 0.0 && b.bs < 1e-20, "{b:?}");
        for (p, q) in ev.positions.iter().zip(&reg.sphere.sphere.vertices) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-10);
            }
        }
        let mut state = BoostState::identity(nv, 1e-2).unwrap();
        let res = reg.optimize(&mut state, StopConfig::default(), |_, _| {}).unwrap();
        assert!(res.converged && res.iterations <= 200, "{}", res.iterations);
        assert!(res.breakdown.total < 1e-6);
        assert_eq!(res.folds, 0);

        // landmarks that already sit on their targets
        let s = StandardSphere::new(4).unwrap();
        let pts: Vec<Vec3> = s.sphere.vertices.iter().step_by(7).copied().collect();
        let spec = LandmarkSpec {
            curves: vec![LandmarkCurve {
                moving: CurvePoints::Points(pts.clone()),
                target: pts,
                endpoints: false,
            }],
            distance: CurveDistance::L2,
        };
        let task = TaskContext {
            landmarks: Some(LandmarkTask::new(&s, spec, &[]).unwrap()),
            ..TaskContext::default()
        };
        let mut reg = Registration::new(s, task, LossWeights::default(), SolverConfig::default()).unwrap();
        let mut state = BoostState::identity(nv, 1e-2).unwrap();
        let res = reg.optimize(&mut state, StopConfig::default(), |_, _| {}).unwrap();
        assert!(res.converged && res.iterations <= 200, "{}", res.iterations);
        let b = res.breakdown;
        for v in [b.task, b.bm, b.folding, b.bs, b.bc, b.smooth] {
            assert!(v < 1e-6, "{b:?}");
        }
    }

    #[test]
    fn breakdown_recombines_and_scales() {
        let s = StandardSphere::new(3).unwrap();
        let nv = s.disk.num_vertices();
        let task = landmark_task(&s, 2);
        let mut r = rng(4);
        let (a, b) = (random_params(nv, &mut r), random_params(nv, &mut r));
        let mut reg = Registration::new(s.clone(), task.clone(), LossWeights::default(), SolverConfig::default()).unwrap();
        let e1 = reg.evaluate(&a, &b, false).unwrap().breakdown;
        let w = LossWeights::default();
        let manual = 5.0 * e1.task + e1.bm + 20.0 * e1.folding + 0.5 * e1.bs + 0.1 * e1.bc + 0.01 * e1.smooth;
        assert!((manual - e1.total).abs() < 1e-12);
        let mut w2 = w;
        w2.task *= 2.0;
        let mut reg2 = Registration::new(s, task, w2, SolverConfig::default()).unwrap();
        let e2 = reg2.evaluate(&a, &b, false).unwrap().breakdown;
        assert!((e2.total - e1.total - 5.0 * e1.task).abs() < 1e-12);
    }

    #[test]
    fn seam_rotation_is_consistent() {
        let s = StandardSphere::new(3).unwrap();
        let nv = s.disk.num_vertices();
        let mut reg = Registration::new(s, TaskContext::identity(), LossWeights::default(), SolverConfig::default()).unwrap();
        let mut a = ChartParams::identity(nv);
        let mut b = ChartParams::identity(nv);
        a.rot = 0.2;
        b.rot = -0.2;
        let ev = reg.evaluate(&a, &b, false).unwrap();
        assert!(ev.breakdown.bm < 1e-20);
        for &(sv, _) in &reg.sphere.seam_pairs {
            assert_eq!(ev.positions[sv], crate::charts::ChartId::South.lift(ev.south.positions[sv]));
            let n = ev.positions[sv];
            assert!(((n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gradient_leaves_state() {
        let mut st = BoostState::identity(7, 1e-2).unwrap();
        let before = st.clone();
        let z = crate::diffmap::ChartGrads::zeros(7);
        st.apply(&z, &z).unwrap();
        assert_eq!(st.iteration, 1);
        assert_eq!(st.theta_south, before.theta_south);
        assert_eq!(st.theta_north, before.theta_north);
    }

    #[test]
    fn regularizers_descend() {
        let s = StandardSphere::new(3).unwrap();
        let nv = s.disk.num_vertices();
        let w = LossWeights {
            task: 0.0,
            ..LossWeights::default()
        };
        let mut reg = Registration::new(s, TaskContext::identity(), w, SolverConfig::default()).unwrap();
        let mut st = BoostState::identity(nv, 1e-3).unwrap();
        let mut r = rng(12);
        for m in st.theta_south.mu_raw.iter_mut().chain(st.theta_north.mu_raw.iter_mut()) {
            *m = C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5) * 0.1;
        }
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let t = reg.step(&mut st).unwrap().breakdown.total;
            assert!(t <= last * (1.0 + 1e-9), "{t} > {last}");
            last = t;
        }
    }

    #[test]
    fn extraction_matches_glue_on_standard_mesh() {
        let s = StandardSphere::new(4).unwrap();
        let nv = s.disk.num_vertices();
        let task = landmark_task(&s, 3);
        let mut reg = Registration::new(s, task, LossWeights::default(), SolverConfig::default()).unwrap();
        let mut st = BoostState::identity(nv, 1e-2).unwrap();
        let stop = StopConfig {
            max_iters: 30,
            ..StopConfig::default()
        };
        let res = reg.optimize(&mut st, stop, |_, _| {}).unwrap();
        let (x, mu) = res.extract_map(&reg.sphere.sphere).unwrap();
        for (i, (p, q)) in x.iter().zip(&res.map.positions).enumerate() {
            if reg.sphere.sources[i].0 == crate::charts::ChartId::North || reg.sphere.sphere.vertices[i][2] > 1e-12 {
                for k in 0..3 {
                    assert!((p[k] - q[k]).abs() < 1e-12, "{i}");
                }
            }
        }
        assert_eq!(mu.len(), reg.sphere.sphere.num_faces());
        // identity result leaves an unrelated mesh in place
        let id = StandardSphere::new(4).unwrap();
        let mut reg = Registration::new(id, TaskContext::identity(), LossWeights::default(), SolverConfig::default()).unwrap();
        let mut st = BoostState::identity(nv, 1e-2).unwrap();
        let res = reg.optimize(&mut st, StopConfig { max_iters: 0, ..StopConfig::default() }, |_, _| {}).unwrap();
        let ico = icosphere(3).unwrap();
        let (x, _) = res.extract_map(&ico).unwrap();
        for (p, q) in x.iter().zip(&ico.vertices) {
            for k in 0..3 {
                assert!((p[k] - q[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let run = || {
            let s = StandardSphere::new(3).unwrap();
            let nv = s.disk.num_vertices();
            let task = landmark_task(&s, 5);
            let mut reg = Registration::new(s, task, LossWeights::default(), SolverConfig::default()).unwrap();
            let mut st = BoostState::identity(nv, 1e-2).unwrap();
            let stop = StopConfig {
                max_iters: 20,
                ..StopConfig::default()
            };
            reg.optimize(&mut st, stop, |_, _| {}).unwrap().history
        };
        assert_eq!(run(), run());
    }
}
