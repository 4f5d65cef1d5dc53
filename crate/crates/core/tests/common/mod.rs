//! Independent oracles and instance generators shared by the integration
//! tests. Sphere geometry here is written against plain slices with its own
//! formulas so that it does not reuse library code paths.

#![allow(dead_code)]

use manikkt_core::manifold::tangent_basis;
use manikkt_core::problem::affine_field;
use manikkt_core::{ManifoldKind, Point, ScalarField, TangentVector};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

/// Angle via the tangential component and the dot product.
pub fn sphere_dist(p: &[f64], q: &[f64]) -> f64 {
    let c = dot(p, q);
    let w: Vec<f64> = q.iter().zip(p).map(|(qi, pi)| qi - c * pi).collect();
    norm(&w).atan2(c)
}

pub fn sphere_exp(p: &[f64], v: &[f64]) -> Vec<f64> {
    let t = norm(v);
    if t == 0.0 {
        return p.to_vec();
    }
    p.iter().zip(v).map(|(pi, vi)| t.cos() * pi + t.sin() * vi / t).collect()
}

pub fn sphere_log(p: &[f64], q: &[f64]) -> Vec<f64> {
    let c = dot(p, q);
    let w: Vec<f64> = q.iter().zip(p).map(|(qi, pi)| qi - c * pi).collect();
    let nw = norm(&w);
    if nw == 0.0 {
        return vec![0.0; p.len()];
    }
    let theta = nw.atan2(c);
    w.iter().map(|x| theta * x / nw).collect()
}

/// Karcher mean by the fixed-point iteration `p <- exp_p(mean_i log_p d_i)`.
pub fn karcher_mean(data: &[Vec<f64>], start: &[f64]) -> Vec<f64> {
    let mut p = normalize(start);
    for _ in 0..100_000 {
        let mut step = vec![0.0; p.len()];
        for d in data {
            for (s, l) in step.iter_mut().zip(sphere_log(&p, d)) {
                *s += l / data.len() as f64;
            }
        }
        p = normalize(&sphere_exp(&p, &step));
        if norm(&step) < 1e-15 {
            break;
        }
    }
    p
}

pub fn mean_sq_dist(data: &[Vec<f64>], p: &[f64]) -> f64 {
    data.iter().map(|d| sphere_dist(p, d).powi(2)).sum::<f64>() / data.len() as f64
}

/// Riemannian gradient on the sphere from central differences along the
/// curves `normalize(p + t e_k)`; the `k`-th difference quotient is the
/// `k`-th ambient coordinate of the gradient.
pub fn fd_sphere_gradient(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let n = p.len();
    let mut g = vec![0.0; n];
    for k in 0..n {
        let mut plus = p.to_vec();
        plus[k] += h;
        let mut minus = p.to_vec();
        minus[k] -= h;
        g[k] = (f(&normalize(&plus)) - f(&normalize(&minus))) / (2.0 * h);
    }
    let c = dot(&g, p);
    g.iter().zip(p).map(|(gi, pi)| gi - c * pi).collect()
}

/// Mean colatitude of the uniform distribution on the `S^2` cap of angular
/// radius `alpha`.
pub fn cap_mean_colatitude(alpha: f64) -> f64 {
    (alpha.sin() - alpha * alpha.cos()) / (1.0 - alpha.cos())
}

/// Two data points `(cos b, +-sin b, 0)` and the cap around
/// `(cos g, 0, sin g)` of radius `r < g`: the constrained mean is the
/// boundary point on the meridian, `(cos(g - r), 0, sin(g - r))`.
pub struct TwoPointInstance {
    pub data: [Vec<f64>; 2],
    pub center: Vec<f64>,
    pub radius: f64,
    pub minimizer: Vec<f64>,
}

pub fn two_point_instance(beta: f64, gamma: f64, radius: f64) -> TwoPointInstance {
    assert!(radius < gamma);
    let theta = gamma - radius;
    TwoPointInstance {
        data: [vec![beta.cos(), beta.sin(), 0.0], vec![beta.cos(), -beta.sin(), 0.0]],
        center: vec![gamma.cos(), 0.0, gamma.sin()],
        radius,
        minimizer: vec![theta.cos(), 0.0, theta.sin()],
    }
}

pub fn sphere(n_ambient: usize) -> ManifoldKind {
    ManifoldKind::sphere(n_ambient).unwrap()
}

pub fn point(m: ManifoldKind, c: &[f64]) -> Point {
    Point::from_slice(m, c).unwrap()
}

pub fn random_unit<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if norm(&g) > 1e-6 {
            return normalize(&g);
        }
    }
}

pub fn random_sphere_point<R: Rng>(m: ManifoldKind, rng: &mut R) -> Point {
    point(m, &random_unit(m.ambient_dim(), rng))
}

/// Uniformly random unit tangent vector at `p`.
pub fn random_unit_tangent<R: Rng>(p: &Point, rng: &mut R) -> TangentVector {
    let basis = tangent_basis(p);
    let c = random_unit(basis.len(), rng);
    let mut v = DVector::zeros(p.coords().len());
    for (e, ci) in basis.iter().zip(&c) {
        v += e.vec() * *ci;
    }
    TangentVector::new(p.clone(), v).unwrap()
}

/// Random tangent vector at `p` with i.i.d. Gaussian frame coordinates.
pub fn random_tangent<R: Rng>(p: &Point, rng: &mut R) -> TangentVector {
    let basis = tangent_basis(p);
    let mut v = DVector::zeros(p.coords().len());
    for e in &basis {
        v += e.vec() * rng.sample::<f64, _>(StandardNormal);
    }
    TangentVector::new(p.clone(), v).unwrap()
}

/// Affine field whose Riemannian gradient at `p` is `grad` and whose value
/// at `p` is zero.
pub fn active_affine(p: &Point, grad: &TangentVector) -> ScalarField {
    let a = grad.to_vec();
    let b = -dot(&a, &p.to_vec());
    affine_field(p.manifold(), &a, b).unwrap()
}

pub fn tangent_combination(p: &Point, terms: &[(f64, &TangentVector)]) -> TangentVector {
    let mut v = TangentVector::zero(p);
    for (c, t) in terms {
        v = v.axpy(*c, t).unwrap();
    }
    v
}

/// Orthonormal frame at `base` from a random rotation of the standard basis.
pub fn random_frame<R: Rng>(base: &Point, rng: &mut R) -> Vec<TangentVector> {
    let basis = tangent_basis(base);
    let k = basis.len();
    let gauss = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = gauss.qr().q();
    (0..k)
        .map(|j| {
            let terms: Vec<(f64, &TangentVector)> = (0..k).map(|i| (q[(i, j)], &basis[i])).collect();
            tangent_combination(base, &terms)
        })
        .collect()
}

/// Verdict of the grid oracle on a multiplier set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridVerdict {
    Empty,
    Bounded,
    Unbounded,
}

/// Scans a uniform grid over `[0, B]^m x [-B, B]^q` for multipliers whose
/// Lagrangian residual `|f + sum mu_i g_i + sum lambda_j h_j|` is within the
/// grid's own resolution bound. Reaching the outer face of the box means
/// unbounded.
///
/// `g` and `h` are coordinate vectors of the active inequality and equality
/// gradients, `f` that of the objective gradient.
pub fn grid_multiplier_verdict(f: &[f64], g: &[Vec<f64>], h: &[Vec<f64>], bound: f64, steps: usize) -> GridVerdict {
    let cols: Vec<&Vec<f64>> = g.iter().chain(h).collect();
    let k = cols.len();
    assert!(k <= 3, "grid oracle handles at most three multipliers");
    let m = g.len();
    let spacing = |j: usize| if j < m { bound / (steps - 1) as f64 } else { 2.0 * bound / (steps - 1) as f64 };
    // the nearest grid point to any solution is within half a cell per axis
    let tol: f64 = (0..k).map(|j| 0.5 * spacing(j) * norm(cols[j])).sum::<f64>() + 1e-12;
    let mut idx = vec![0usize; k];
    let total = steps.pow(k as u32);
    let mut found = false;
    let mut touches_face = false;
    for _ in 0..total {
        let x: Vec<f64> = (0..k)
            .map(|j| if j < m { idx[j] as f64 * spacing(j) } else { -bound + idx[j] as f64 * spacing(j) })
            .collect();
        let mut r = f.to_vec();
        for (j, c) in cols.iter().enumerate() {
            for (ri, ci) in r.iter_mut().zip(c.iter()) {
                *ri += x[j] * ci;
            }
        }
        if norm(&r) <= tol {
            found = true;
            let outer = (0..k).any(|j| idx[j] == steps - 1 || (j >= m && idx[j] == 0));
            touches_face |= outer;
        }
        for d in idx.iter_mut() {
            *d += 1;
            if *d < steps {
                break;
            }
            *d = 0;
        }
    }
    match (found, touches_face) {
        (false, _) => GridVerdict::Empty,
        (true, false) => GridVerdict::Bounded,
        (true, true) => GridVerdict::Unbounded,
    }
}
