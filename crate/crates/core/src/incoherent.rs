//! Incoherent reference models on the invariant blocks.
//!
//! Spontaneous exchange `γ(D[L] + D[L†])` with `L = a_h† a_w a_c` acts on
//! diagonal block states as a symmetric birth–death chain. Random
//! switching of the interaction gives the dephasing model
//! `ρ̇ = γ(XρX − ½{X², ρ})`, `X = H/g`, which is solved in closed form in
//! the eigenbasis of `X`.

use crate::error::{Error, Result};
use crate::fock::{Block, BlockEnsemble, ModeTriple};
use crate::scalar::Real;
use crate::trace::EnergyTrace;
use crate::tridiag::SymTridiagonal;
use crate::unitary::{accumulate_blocks, exchange_amplitude, trace_from_hot_series, BlockHamiltonian, EigenCache};

/// Default exchange rate, equal to the coherent coupling.
pub const DEFAULT_GAMMA: f64 = 1.0;

/// Rate matrix of the spontaneous-exchange model on one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BirthDeathGenerator<T> {
    pub block: Block,
    pub gamma: T,
    /// `rates[n]` is the rate of both `n → n+1` and `n+1 → n`.
    rates: Vec<T>,
}

impl<T: Real> BirthDeathGenerator<T> {
    pub fn new(block: Block, gamma: T) -> Result<Self> {
        check_gamma("BirthDeathGenerator::new", gamma)?;
        let rates = (0..block.dim() - 1)
            .map(|n| gamma * exchange_amplitude::<T>(block, n).powi(2))
            .collect();
        Ok(Self { block, gamma, rates })
    }

    /// `w_{n→n+1} = γ(n+1)(N−n)(M−n)`.
    pub fn up_rates(&self) -> &[T] {
        &self.rates
    }

    /// `w_{n+1→n}`, identical to the up rates.
    pub fn down_rates(&self) -> &[T] {
        &self.rates
    }

    /// `dp/dt`.
    pub fn apply(&self, p: &[T]) -> Vec<T> {
        let d = self.block.dim();
        assert_eq!(p.len(), d);
        let mut out = vec![T::zero(); d];
        for (n, &r) in self.rates.iter().enumerate() {
            let flow = r * (p[n] - p[n + 1]);
            out[n] = out[n] - flow;
            out[n + 1] = out[n + 1] + flow;
        }
        out
    }

    /// The negated generator `−G`, symmetric and positive semidefinite.
    pub fn negated(&self) -> SymTridiagonal<T> {
        let d = self.block.dim();
        let diag = (0..d)
            .map(|n| {
                let left = if n > 0 { self.rates[n - 1] } else { T::zero() };
                let right = if n + 1 < d { self.rates[n] } else { T::zero() };
                left + right
            })
            .collect();
        let off = self.rates.iter().map(|&r| -r).collect();
        SymTridiagonal::new(diag, off).expect("consistent generator shape")
    }
}

fn check_gamma<T: Real>(op: &'static str, gamma: T) -> Result<()> {
    if !(gamma > T::zero() && gamma.is_finite()) {
        return Err(Error::domain(op, "gamma must be positive and finite"));
    }
    Ok(())
}

/// Spectral form of the rate equation: `p(t) = Σ_j e^{−λ_j t} v_j (v_jᵀ p0)`.
#[derive(Clone, Debug)]
pub struct BirthDeathPropagator<T> {
    rates: Vec<T>,
    vectors: Vec<T>,
}

impl<T: Real> BirthDeathPropagator<T> {
    pub fn new(generator: &BirthDeathGenerator<T>) -> Result<Self> {
        let eig = generator.negated().eigh(true)?;
        // Clip the rounding-level negative part of the zero mode.
        let rates = eig.values.iter().map(|&l| l.max(T::zero())).collect();
        Ok(Self {
            rates,
            vectors: eig.vectors.expect("vectors requested"),
        })
    }

    pub fn populations_at(&self, p0: &[T], t: T) -> Vec<T> {
        let d = self.rates.len();
        let proj: Vec<T> = (0..d)
            .map(|j| (0..d).fold(T::zero(), |acc, n| acc + self.vectors[n * d + j] * p0[n]))
            .collect();
        (0..d)
            .map(|n| {
                (0..d).fold(T::zero(), |acc, j| {
                    acc + self.vectors[n * d + j] * proj[j] * (-self.rates[j] * t).exp()
                })
            })
            .collect()
    }
}

/// Spontaneous-exchange evolution, model tag `spontaneous`.
pub fn evolve_spontaneous<T: Real>(
    ensemble: &BlockEnsemble<T>,
    modes: &ModeTriple<T>,
    gamma: T,
    times: &[T],
) -> Result<EnergyTrace<T>> {
    check_gamma("evolve_spontaneous", gamma)?;
    let hot = accumulate_blocks(ensemble, times.len(), |b| {
        let d = b.block.dim();
        if d == 1 {
            return Ok(vec![T::zero(); times.len()]);
        }
        let prop = BirthDeathPropagator::new(&BirthDeathGenerator::new(b.block, gamma)?)?;
        // ⟨n_h(t)⟩ = Σ_j e^{−λ_j t} (Σ_n n v_nj)(Σ_n v_nj p_n).
        let weights: Vec<T> = (0..d)
            .map(|j| {
                let (mut occ, mut pop) = (T::zero(), T::zero());
                for n in 0..d {
                    let v = prop.vectors[n * d + j];
                    occ = occ + T::from_count(n) * v;
                    pop = pop + b.populations[n] * v;
                }
                occ * pop
            })
            .collect();
        Ok(times
            .iter()
            .map(|&t| {
                weights
                    .iter()
                    .zip(&prop.rates)
                    .fold(T::zero(), |acc, (&w, &l)| acc + w * (-l * t).exp())
            })
            .collect())
    })?;
    Ok(trace_from_hot_series(ensemble, modes, times, hot, "spontaneous"))
}

/// Dephasing evolution in closed form, model tag `dephasing`. Eigenbasis
/// coherences decay as `exp(−(γ/2)(x_j − x_k)² t)`; there is no coherent
/// rotation.
pub fn evolve_dephasing<T: Real>(
    ensemble: &BlockEnsemble<T>,
    modes: &ModeTriple<T>,
    gamma: T,
    times: &[T],
) -> Result<EnergyTrace<T>> {
    let cache = EigenCache::for_ensemble(ensemble)?;
    evolve_dephasing_cached(ensemble, &cache, modes, gamma, times)
}

pub fn evolve_dephasing_cached<T: Real>(
    ensemble: &BlockEnsemble<T>,
    cache: &EigenCache<T>,
    modes: &ModeTriple<T>,
    gamma: T,
    times: &[T],
) -> Result<EnergyTrace<T>> {
    check_gamma("evolve_dephasing", gamma)?;
    let half = T::lit(0.5);
    let hot = accumulate_blocks(ensemble, times.len(), |b| {
        let eig = cache.get(b.block)?;
        let c = eig.hot_coefficients(&b.populations);
        let d = eig.dim();
        let diagonal = (0..d).fold(T::zero(), |acc, j| acc + c[j * d + j]);
        Ok(times
            .iter()
            .map(|&t| {
                let mut acc = diagonal;
                for j in 0..d {
                    for k in j + 1..d {
                        let gap = eig.eigenvalues[j] - eig.eigenvalues[k];
                        let decay = (-half * gamma * gap * gap * t).exp();
                        acc = acc + T::lit(2.0) * c[j * d + k] * decay;
                    }
                }
                acc
            })
            .collect())
    })?;
    Ok(trace_from_hot_series(ensemble, modes, times, hot, "dephasing"))
}

// Dense product of row-major square matrices.
fn matmul<T: Real>(a: &[T], b: &[T], d: usize) -> Vec<T> {
    let mut out = vec![T::zero(); d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..d {
                out[i * d + j] = out[i * d + j] + aik * b[k * d + j];
            }
        }
    }
    out
}

fn dense_interaction<T: Real>(block: Block) -> Vec<T> {
    let h = BlockHamiltonian::<T>::new(block);
    let d = block.dim();
    let mut x = vec![T::zero(); d * d];
    for (n, &v) in h.off_diagonal().iter().enumerate() {
        x[n * d + n + 1] = v;
        x[(n + 1) * d + n] = v;
    }
    x
}

/// Dephasing master-equation right-hand side `γ(XρX − ½{X², ρ})` for a
/// real symmetric block density matrix in the Fock basis.
pub fn dephasing_rhs<T: Real>(block: Block, gamma: T, rho: &[T]) -> Vec<T> {
    let d = block.dim();
    assert_eq!(rho.len(), d * d);
    let x = dense_interaction::<T>(block);
    let x2 = matmul(&x, &x, d);
    let xrx = matmul(&matmul(&x, rho, d), &x, d);
    let x2r = matmul(&x2, rho, d);
    let rx2 = matmul(rho, &x2, d);
    let half = T::lit(0.5);
    (0..d * d)
        .map(|i| gamma * (xrx[i] - half * (x2r[i] + rx2[i])))
        .collect()
}

/// Spontaneous-exchange right-hand side `γ(D[L]ρ + D[L†]ρ)` for a real
/// symmetric block density matrix in the Fock basis.
pub fn spontaneous_rhs<T: Real>(block: Block, gamma: T, rho: &[T]) -> Vec<T> {
    let d = block.dim();
    assert_eq!(rho.len(), d * d);
    // L raises n by one with amplitude h_n; L† lowers it.
    let mut l = vec![T::zero(); d * d];
    for n in 0..d - 1 {
        l[(n + 1) * d + n] = exchange_amplitude(block, n);
    }
    let lt: Vec<T> = (0..d * d).map(|i| l[(i % d) * d + i / d]).collect();
    let half = T::lit(0.5);
    let dissipator = |a: &[T], at: &[T]| -> Vec<T> {
        let jump = matmul(&matmul(a, rho, d), at, d);
        let ata = matmul(at, a, d);
        let left = matmul(&ata, rho, d);
        let right = matmul(rho, &ata, d);
        (0..d * d).map(|i| jump[i] - half * (left[i] + right[i])).collect()
    };
    let down = dissipator(&l, &lt);
    let up = dissipator(&lt, &l);
    (0..d * d).map(|i| gamma * (down[i] + up[i])).collect()
}
