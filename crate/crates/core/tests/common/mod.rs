//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use trimode::fock::{Block, Mode};

/// `{0, step, 2·step, …, t_end}`.
pub fn uniform(t_end: f64, step: f64) -> Vec<f64> {
    let n = (t_end / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Dense `H` of one block, built directly from the ladder-operator matrix
/// elements `⟨n+1| a_h† a_w a_c |n⟩`.
pub fn dense_block_hamiltonian(block: Block) -> DMatrix<Complex<f64>> {
    let d = block.dim();
    let mut h = DMatrix::zeros(d, d);
    for n in 0..d.saturating_sub(1) {
        let [nh, nw, nc] = block.occupations(n);
        let amp = ((nh + 1) as f64 * nw as f64 * nc as f64).sqrt();
        h[(n + 1, n)] = Complex::new(amp, 0.0);
        h[(n, n + 1)] = Complex::new(amp, 0.0);
    }
    h
}

/// Populations at time `t` from a diagonal initial state, by the matrix
/// exponential `U = exp(−iHt)`.
pub fn expm_populations(block: Block, p0: &[f64], t: f64) -> Vec<f64> {
    let u = (dense_block_hamiltonian(block) * Complex::new(0.0, -t)).exp();
    (0..block.dim())
        .map(|n| (0..block.dim()).map(|k| u[(n, k)].norm_sqr() * p0[k]).sum())
        .collect()
}

/// Mean occupation of `mode` in a block population vector.
pub fn block_occupation(block: Block, p: &[f64], mode: Mode) -> f64 {
    p.iter().enumerate().map(|(n, x)| block.occupation(mode, n) as f64 * x).sum()
}

/// Geometric distribution with mean `nbar`, cut where the tail is below
/// `1e-300`.
pub fn thermal_distribution(nbar: f64) -> Vec<f64> {
    let q = nbar / (1.0 + nbar);
    let mut out = Vec::new();
    let mut p = 1.0 / (1.0 + nbar);
    while p > 1e-300 && out.len() < 100_000 {
        out.push(p);
        p *= q;
    }
    out
}

/// Classical time average of `ι_h` over one period, from the roots
/// `c ≤ b ≤ a` of `(ι − a)(ι − b)(ι − c)`. With `ι = c + (b − c) sin²θ`
/// the period integral becomes `∫ dθ / √(a − ι)`, which is smooth and
/// periodic in θ, so the trapezoid rule converges geometrically.
pub fn period_average_quadrature(a: f64, b: f64, c: f64, nodes: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..nodes {
        let theta = std::f64::consts::PI * (i as f64 + 0.5) / nodes as f64;
        let iota = c + (b - c) * theta.sin().powi(2);
        let w = 1.0 / (a - iota).sqrt();
        num += iota * w;
        den += w;
    }
    num / den
}

/// Hamilton's equations for the actions and phases, integrated with RK4 on
/// the complex amplitudes: `α̇_h = −i α_w α_c`, `α̇_w = −i α_h α_c*`,
/// `α̇_c = −i α_h α_w*`. Returns the actions at every requested time.
pub fn classical_rk4(alpha: [Complex<f64>; 3], times: &[f64], step: f64) -> Vec<[f64; 3]> {
    let f = |a: [Complex<f64>; 3]| -> [Complex<f64>; 3] {
        let mi = Complex::new(0.0, -1.0);
        [mi * a[1] * a[2], mi * a[0] * a[2].conj(), mi * a[0] * a[1].conj()]
    };
    let add = |a: [Complex<f64>; 3], k: [Complex<f64>; 3], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s, a[2] + k[2] * s];
    let mut y = alpha;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while now < t - 1e-15 {
            let h = step.min(t - now);
            let k1 = f(y);
            let k2 = f(add(y, k1, h / 2.0));
            let k3 = f(add(y, k2, h / 2.0));
            let k4 = f(add(y, k3, h));
            for i in 0..3 {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }
            now += h;
        }
        out.push(y.map(|z| z.norm_sqr()));
    }
    out
}
