#![allow(dead_code)]

use hamforge_core::dynamics::flow_matrix;
use hamforge_core::lagrangian::{build_model, build_structure_qp, QuadraticModel};
use hamforge_core::linalg::{Mat, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn uniform_vector(rng: &mut impl Rng, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| rng.random_range(-1.0..1.0))
}

fn positive_definite(rng: &mut impl Rng, n: usize) -> Mat {
    let a = uniform_matrix(rng, n, n);
    a.transpose() * a + Mat::identity(n, n) * 0.5
}

fn spectral_radius(k: &Mat) -> f64 {
    k.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random model with positive definite `T`, `V` and bounded flow; every other one has `V = T`.
pub fn random_model(rng: &mut impl Rng, n: usize, v_equals_t: bool) -> QuadraticModel {
    loop {
        let t = positive_definite(rng, n);
        let g = uniform_matrix(rng, n, n) * 2.0;
        let theta = &g - g.transpose();
        let v = if v_equals_t { t.clone() } else { positive_definite(rng, n) };
        let model = build_model(t, theta, v).expect("valid random model");
        let k = flow_matrix(&build_structure_qp(&model).expect("qp chart"));
        if spectral_radius(&k) < 10.0 {
            return model;
        }
    }
}

/// Classical RK4 on `q̈ = T⁻¹(Θ q̇ − V q)`, sampled every `every` steps.
pub fn second_order_rk4(model: &QuadraticModel, q0: &Vector, qdot0: &Vector, dt: f64, steps: usize, every: usize) -> Vec<Vector> {
    let t_inv = model.t.clone().try_inverse().expect("invertible T");
    let accel = |q: &Vector, v: &Vector| -> Vector { &t_inv * (&model.theta * v - &model.v * q) };
    let (mut q, mut v) = (q0.clone(), qdot0.clone());
    let mut out = vec![q.clone()];
    for step in 1..=steps {
        let k1q = v.clone();
        let k1v = accel(&q, &v);
        let k2q = &v + &k1v * (dt / 2.0);
        let k2v = accel(&(&q + &k1q * (dt / 2.0)), &k2q);
        let k3q = &v + &k2v * (dt / 2.0);
        let k3v = accel(&(&q + &k2q * (dt / 2.0)), &k3q);
        let k4q = &v + &k3v * dt;
        let k4v = accel(&(&q + &k3q * dt), &k4q);
        q += (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
        if step % every == 0 {
            out.push(q.clone());
        }
    }
    out
}
