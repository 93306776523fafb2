//! Deterministic point sets: shifted Halton sequences, the spherical
//! Fibonacci lattice, and counter-derived random substreams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Independent substream `stream` of the generator seeded by `seed`.
/// Parallel consumers index streams by work item so results never depend on
/// scheduling.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton sequence in [0,1)^dim with a Cranley–Patterson rotation drawn from
/// `seed`. The first few points of the raw sequence are skipped.
pub struct Halton {
    dim: usize,
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports up to 16 dimensions");
        let mut rng = substream(seed, 0x4a17);
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        Halton { dim, shift, index: 20 }
    }

    pub fn next_into(&mut self, out: &mut [f64]) {
        self.index += 1;
        for (k, o) in out.iter_mut().enumerate().take(self.dim) {
            let v = radical_inverse(self.index, PRIMES[k]) + self.shift[k];
            *o = v - v.floor();
        }
    }
}

/// `n` nearly uniform unit vectors on S² (spherical Fibonacci lattice),
/// rotated by a seeded random rotation.
pub fn fibonacci_sphere(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let rot = random_rotation3(seed);
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (i as f64 / golden).fract();
            let p = [r * phi.cos(), r * phi.sin(), z];
            let mut q = [0.0; 3];
            for a in 0..3 {
                q[a] = (0..3).map(|b| rot[a][b] * p[b]).sum();
            }
            q
        })
        .collect()
}

fn random_rotation3(seed: u64) -> [[f64; 3]; 3] {
    let mut rng = substream(seed, 0x0f1b);
    let g = gaussian_vector(&mut rng, 3);
    let h = gaussian_vector(&mut rng, 3);
    let e1 = normalized(&g);
    let mut e2: Vec<f64> = h.clone();
    let d = dot(&e2, &e1);
    for k in 0..3 {
        e2[k] -= d * e1[k];
    }
    let e2 = normalized(&e2);
    let e3 = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    [[e1[0], e2[0], e3[0]], [e1[1], e2[1], e3[1]], [e1[2], e2[2], e3[2]]]
}

/// Standard normal vector.
pub fn gaussian_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vector(rng, dim);
        if norm(&g) > 1e-8 {
            return normalized(&g);
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

/// Orthonormal basis of the Euclidean complement of the unit vector `u`.
pub fn orthonormal_complement(u: &[f64]) -> Vec<Vec<f64>> {
    let d = u.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    // Gram–Schmidt over the coordinate axes, skipping the one most aligned with u.
    let skip = (0..d).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap();
    for k in (0..d).filter(|&k| k != skip) {
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        for _ in 0..2 {
            let c = dot(&v, u);
            for i in 0..d {
                v[i] -= c * u[i];
            }
            for b in &basis {
                let c = dot(&v, b);
                for i in 0..d {
                    v[i] -= c * b[i];
                }
            }
        }
        basis.push(normalized(&v));
    }
    basis
}

/// Euclidean volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}

/// Euclidean area of the unit sphere S^{d-1} ⊂ R^d.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}
