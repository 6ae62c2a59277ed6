//! Exact closed-system evolution inside the invariant blocks.
//!
//! Each block Hamiltonian is a zero-diagonal symmetric tridiagonal matrix.
//! After one diagonalization per block every observable becomes a finite
//! Fourier sum over eigenvalue differences, evaluated directly at the
//! requested times.

use std::collections::HashMap;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{Block, BlockEnsemble, BlockPopulation, Mode, ModeTriple};
use crate::scalar::Real;
use crate::summation::{compensated_sum, CompensatedSum};
use crate::trace::{EnergyTrace, TraceMetadata};
use crate::tridiag::SymTridiagonal;

// Blocks per parallel work item. Fixed so that the reduction tree, and hence
// every rounding, is the same for any number of threads.
const BLOCK_CHUNK: usize = 8;

/// Matrix element `⟨n+1| a_h† a_w a_c |n⟩ = √((n+1)(N−n)(M−n))` in units of g.
#[inline]
pub fn exchange_amplitude<T: Real>(block: Block, n: usize) -> T {
    let prod = (n + 1) as f64 * (block.n_sum - n) as f64 * (block.m_sum - n) as f64;
    T::lit(crate::fock::COUPLING * prod.sqrt())
}

/// Interaction Hamiltonian restricted to one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockHamiltonian<T> {
    pub block: Block,
    matrix: SymTridiagonal<T>,
}

impl<T: Real> BlockHamiltonian<T> {
    pub fn new(block: Block) -> Self {
        let d = block.dim();
        let off = (0..d - 1).map(|n| exchange_amplitude(block, n)).collect();
        let matrix = SymTridiagonal::new(vec![T::zero(); d], off).expect("consistent block shape");
        Self { block, matrix }
    }

    pub fn off_diagonal(&self) -> &[T] {
        self.matrix.off_diagonal()
    }

    pub fn matrix(&self) -> &SymTridiagonal<T> {
        &self.matrix
    }

    pub fn diagonalize(&self) -> Result<BlockEigensystem<T>> {
        let eig = self.matrix.eigh(true)?;
        Ok(BlockEigensystem {
            block: self.block,
            eigenvalues: eig.values,
            vectors: eig.vectors.expect("vectors requested"),
        })
    }

    /// Eigenvalues only, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        Ok(self.matrix.eigh(false)?.values)
    }
}

pub fn build_block_hamiltonian<T: Real>(block: Block) -> BlockHamiltonian<T> {
    BlockHamiltonian::new(block)
}

/// Spectral decomposition `H = V Λ Vᵀ` of one block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEigensystem<T> {
    pub block: Block,
    /// Ascending eigenvalues in units of g.
    pub eigenvalues: Vec<T>,
    /// Row-major `V`: `vectors[n * d + j]` is component `n` of eigenvector `j`.
    pub vectors: Vec<T>,
}

impl<T: Real> BlockEigensystem<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    #[inline]
    pub fn vector(&self, n: usize, j: usize) -> T {
        self.vectors[n * self.dim() + j]
    }

    /// `Vᵀ diag(p) V`, the diagonal Fock-basis state in the eigenbasis.
    pub fn to_eigenbasis(&self, p: &[T]) -> Vec<T> {
        let d = self.dim();
        assert_eq!(p.len(), d);
        let mut out = vec![T::zero(); d * d];
        for j in 0..d {
            for k in j..d {
                let v = (0..d).fold(T::zero(), |acc, n| {
                    acc + self.vectors[n * d + j] * self.vectors[n * d + k] * p[n]
                });
                out[j * d + k] = v;
                out[k * d + j] = v;
            }
        }
        out
    }

    /// Populations of the dephased state: eigenbasis coherences removed.
    pub fn dephase(&self, p: &[T]) -> Vec<T> {
        let d = self.dim();
        let w: Vec<T> = (0..d)
            .map(|j| (0..d).fold(T::zero(), |acc, n| acc + self.vector(n, j).powi(2) * p[n]))
            .collect();
        (0..d)
            .map(|n| (0..d).fold(T::zero(), |acc, j| acc + self.vector(n, j).powi(2) * w[j]))
            .collect()
    }

    /// Pinching of a full real symmetric block density matrix (row-major,
    /// Fock basis) onto the eigenbasis diagonal.
    pub fn dephase_matrix(&self, rho: &[T]) -> Vec<T> {
        let d = self.dim();
        assert_eq!(rho.len(), d * d);
        let w: Vec<T> = (0..d)
            .map(|j| {
                let col: Vec<T> = (0..d).map(|n| self.vector(n, j)).collect();
                quadratic_form(rho, &col)
            })
            .collect();
        let mut out = vec![T::zero(); d * d];
        for n in 0..d {
            for m in 0..d {
                out[n * d + m] = (0..d).fold(T::zero(), |acc, j| {
                    acc + self.vector(n, j) * self.vector(m, j) * w[j]
                });
            }
        }
        out
    }

    /// Fock-basis populations at time `t` of a state that is diagonal at t=0.
    pub fn populations_at(&self, p: &[T], t: T) -> Vec<T> {
        let d = self.dim();
        let rho = self.to_eigenbasis(p);
        let (cos, sin) = self.phases(t);
        (0..d)
            .map(|n| {
                let a: Vec<T> = (0..d).map(|j| self.vector(n, j) * cos[j]).collect();
                let b: Vec<T> = (0..d).map(|j| self.vector(n, j) * sin[j]).collect();
                quadratic_form(&rho, &a) + quadratic_form(&rho, &b)
            })
            .collect()
    }

    /// Amplitudes `V e^{−iΛt} Vᵀ c0` of a pure state. Exact at `t = 0`.
    pub fn amplitudes_at(&self, c0: &[T], t: T) -> Vec<Complex<T>> {
        let d = self.dim();
        if t == T::zero() {
            return c0.iter().map(|&c| Complex::new(c, T::zero())).collect();
        }
        let (cos, sin) = self.phases(t);
        let proj: Vec<T> = (0..d)
            .map(|j| (0..d).fold(T::zero(), |acc, n| acc + self.vector(n, j) * c0[n]))
            .collect();
        (0..d)
            .map(|n| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for j in 0..d {
                    let w = self.vector(n, j) * proj[j];
                    acc = acc + Complex::new(w * cos[j], -w * sin[j]);
                }
                acc
            })
            .collect()
    }

    /// Coefficients `C_jk = ρ̃_jk Õ_jk` with `O = n̂_h`, so that
    /// `⟨n_h(t)⟩ = Σ_jk C_jk cos((E_j − E_k) t)` within the block.
    pub fn hot_coefficients(&self, p: &[T]) -> Vec<T> {
        let d = self.dim();
        let occ: Vec<T> = (0..d).map(T::from_count).collect();
        let rho = self.to_eigenbasis(p);
        let obs = self.to_eigenbasis(&occ);
        rho.iter().zip(&obs).map(|(r, o)| *r * *o).collect()
    }

    /// `Σ_jk C_jk cos((E_j − E_k) t)` for symmetric `C`.
    pub fn coherent_sum(&self, coeffs: &[T], t: T) -> T {
        let (cos, sin) = self.phases(t);
        quadratic_form(coeffs, &cos) + quadratic_form(coeffs, &sin)
    }

    fn phases(&self, t: T) -> (Vec<T>, Vec<T>) {
        self.eigenvalues.iter().map(|&e| {
            let (s, c) = (e * t).sin_cos();
            (c, s)
        }).unzip()
    }
}

// xᵀ A x for a row-major square A.
#[inline]
fn quadratic_form<T: Real>(a: &[T], x: &[T]) -> T {
    let d = x.len();
    let mut total = T::zero();
    for j in 0..d {
        let row = &a[j * d..(j + 1) * d];
        let mut y = T::zero();
        for k in 0..d {
            y = y + row[k] * x[k];
        }
        total = total + x[j] * y;
    }
    total
}

/// Diagonalized blocks, shared between experiments that revisit them.
#[derive(Clone, Debug, Default)]
pub struct EigenCache<T> {
    systems: HashMap<Block, BlockEigensystem<T>>,
}

impl<T: Real> EigenCache<T> {
    pub fn new() -> Self {
        Self {
            systems: HashMap::new(),
        }
    }

    pub fn for_ensemble(ensemble: &BlockEnsemble<T>) -> Result<Self> {
        let mut cache = Self::new();
        cache.ensure(ensemble.blocks().iter().map(|b| b.block))?;
        Ok(cache)
    }

    /// Diagonalizes every listed block not yet present, in parallel.
    pub fn ensure(&mut self, blocks: impl IntoIterator<Item = Block>) -> Result<()> {
        let mut missing: Vec<Block> = blocks
            .into_iter()
            .filter(|b| !self.systems.contains_key(b))
            .collect();
        missing.sort_unstable();
        missing.dedup();
        let fresh = missing
            .par_iter()
            .map(|&b| BlockHamiltonian::new(b).diagonalize())
            .collect::<Result<Vec<_>>>()?;
        for sys in fresh {
            self.systems.insert(sys.block, sys);
        }
        Ok(())
    }

    pub fn get(&self, block: Block) -> Result<&BlockEigensystem<T>> {
        self.systems.get(&block).ok_or_else(|| {
            Error::domain(
                "EigenCache::get",
                format!("block ({}, {}) has not been diagonalized", block.n_sum, block.m_sum),
            )
        })
    }

    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }
}

/// Sums per-block series of length `len` over the ensemble. Blocks are
/// processed in parallel chunks and combined in block order.
pub(crate) fn accumulate_blocks<T, F>(ensemble: &BlockEnsemble<T>, len: usize, kernel: F) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(&BlockPopulation<T>) -> Result<Vec<T>> + Sync,
{
    let partials = ensemble
        .blocks()
        .par_chunks(BLOCK_CHUNK)
        .map(|chunk| {
            let mut acc = vec![CompensatedSum::new(); len];
            for b in chunk {
                for (a, v) in acc.iter_mut().zip(kernel(b)?) {
                    a.add(v);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![CompensatedSum::new(); len];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total.iter().map(CompensatedSum::value).collect())
}

/// Builds a trace from the hot-mode series; the other modes follow from the
/// conserved sums `n_w = N − n_h`, `n_c = M − n_h`.
pub(crate) fn trace_from_hot_series<T: Real>(
    ensemble: &BlockEnsemble<T>,
    modes: &ModeTriple<T>,
    times: &[T],
    hot: Vec<T>,
    model: &str,
) -> EnergyTrace<T> {
    let (n_mean, m_mean) = ensemble.conserved_means();
    let work = hot.iter().map(|&h| n_mean - h).collect();
    let cold = hot.iter().map(|&h| m_mean - h).collect();
    let [h0, w0, c0] = ensemble.occupations();
    let metadata = TraceMetadata {
        model: model.to_string(),
        init_nbar: [h0.as_f64(), w0.as_f64(), c0.as_f64()],
        omega: modes.as_array().map(Real::as_f64),
        truncated_weight: Some(ensemble.truncated_weight().as_f64()),
        ..Default::default()
    };
    EnergyTrace::from_occupations(times.to_vec(), [hot, work, cold], modes, metadata)
}

fn check_times<T: Real>(op: &'static str, times: &[T]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= T::zero())) {
        return Err(Error::domain(op, "times must be finite and non-negative"));
    }
    Ok(())
}

/// Unitary evolution of a block ensemble, sampled at `times`.
pub fn evolve<T: Real>(ensemble: &BlockEnsemble<T>, modes: &ModeTriple<T>, times: &[T]) -> Result<EnergyTrace<T>> {
    let cache = EigenCache::for_ensemble(ensemble)?;
    evolve_cached(ensemble, &cache, modes, times)
}

/// [`evolve`] with precomputed eigensystems.
pub fn evolve_cached<T: Real>(
    ensemble: &BlockEnsemble<T>,
    cache: &EigenCache<T>,
    modes: &ModeTriple<T>,
    times: &[T],
) -> Result<EnergyTrace<T>> {
    check_times("evolve", times)?;
    let hot = accumulate_blocks(ensemble, times.len(), |b| {
        let eig = cache.get(b.block)?;
        let coeffs = eig.hot_coefficients(&b.populations);
        Ok(times.iter().map(|&t| eig.coherent_sum(&coeffs, t)).collect())
    })?;
    Ok(trace_from_hot_series(ensemble, modes, times, hot, "unitary"))
}

/// Running means `(1/t) ∫₀ᵗ n̄_i(s) ds` of the unitary evolution, evaluated
/// in closed form (each Fourier term integrates to a sinc).
pub fn cumulative_mean<T: Real>(
    ensemble: &BlockEnsemble<T>,
    cache: &EigenCache<T>,
    modes: &ModeTriple<T>,
    times: &[T],
) -> Result<EnergyTrace<T>> {
    check_times("cumulative_mean", times)?;
    let hot = accumulate_blocks(ensemble, times.len(), |b| {
        let eig = cache.get(b.block)?;
        let c = eig.hot_coefficients(&b.populations);
        let d = eig.dim();
        Ok(times
            .iter()
            .map(|&t| {
                let mut acc = T::zero();
                for j in 0..d {
                    for k in 0..d {
                        let x = (eig.eigenvalues[j] - eig.eigenvalues[k]) * t;
                        let sinc = if x.abs() < T::lit(1e-8) { T::one() } else { x.sin() / x };
                        acc = acc + c[j * d + k] * sinc;
                    }
                }
                acc
            })
            .collect())
    })?;
    Ok(trace_from_hot_series(ensemble, modes, times, hot, "unitary:cumulative-mean"))
}

/// The infinite-time-averaged state σ, block by block.
pub fn time_averaged_state<T: Real>(ensemble: &BlockEnsemble<T>) -> Result<BlockEnsemble<T>> {
    let cache = EigenCache::for_ensemble(ensemble)?;
    time_averaged_state_cached(ensemble, &cache)
}

pub fn time_averaged_state_cached<T: Real>(
    ensemble: &BlockEnsemble<T>,
    cache: &EigenCache<T>,
) -> Result<BlockEnsemble<T>> {
    ensemble.map_populations(|b| Ok(cache.get(b.block)?.dephase(&b.populations)))
}

/// Marginal occupation distribution of one mode, `P(n_mode = k)`, in
/// absolute probabilities (sums to the retained weight).
pub fn reduced_distribution<T: Real>(ensemble: &BlockEnsemble<T>, mode: Mode) -> Vec<T> {
    let max = ensemble
        .blocks()
        .iter()
        .map(|b| (0..b.block.dim()).map(|n| b.block.occupation(mode, n)).max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    let mut acc = vec![CompensatedSum::new(); max + 1];
    for b in ensemble.blocks() {
        for (n, &p) in b.populations.iter().enumerate() {
            acc[b.block.occupation(mode, n)].add(p);
        }
    }
    acc.iter().map(CompensatedSum::value).collect()
}

/// Moments and information measures of an occupation distribution,
/// normalized by its total weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistributionStatistics<T> {
    pub weight: T,
    pub mean: T,
    pub variance: T,
    /// `Var/(n̄(n̄+1)) − 1`; zero for thermal statistics and for the vacuum.
    pub fano: T,
    /// Shannon entropy in nats.
    pub entropy: T,
    pub purity: T,
}

pub fn distribution_statistics<T: Real>(dist: &[T]) -> Result<DistributionStatistics<T>> {
    if dist.iter().any(|p| !(p.is_finite() && *p >= T::zero())) {
        return Err(Error::domain("distribution_statistics", "probabilities must be finite and non-negative"));
    }
    let weight = compensated_sum(dist.iter().copied());
    if weight <= T::zero() {
        return Err(Error::domain("distribution_statistics", "distribution has zero weight"));
    }
    let probs: Vec<T> = dist.iter().map(|&p| p / weight).collect();
    let mean = compensated_sum(probs.iter().enumerate().map(|(k, &p)| T::from_count(k) * p));
    let variance = compensated_sum(
        probs
            .iter()
            .enumerate()
            .map(|(k, &p)| (T::from_count(k) - mean).powi(2) * p),
    );
    let fano = if mean == T::zero() {
        T::zero()
    } else {
        variance / (mean * (mean + T::one())) - T::one()
    };
    let entropy = -compensated_sum(
        probs
            .iter()
            .filter(|p| **p > T::zero())
            .map(|&p| p * p.ln()),
    );
    let purity = compensated_sum(probs.iter().map(|&p| p * p));
    Ok(DistributionStatistics {
        weight,
        mean,
        variance,
        fano,
        entropy,
        purity,
    })
}

/// Entropy of a thermal (geometric) distribution with mean `nbar`.
pub fn thermal_entropy<T: Real>(nbar: T) -> T {
    if nbar <= T::zero() {
        return T::zero();
    }
    (nbar + T::one()) * (nbar + T::one()).ln() - nbar * nbar.ln()
}

/// Single-mode observables of a block ensemble.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeObservables<T> {
    /// Mean occupation of the retained state (not renormalized).
    pub nbar: T,
    pub energy: T,
    /// Statistics of the reduced distribution, renormalized to unit weight.
    pub stats: DistributionStatistics<T>,
}

pub fn observables<T: Real>(ensemble: &BlockEnsemble<T>, modes: &ModeTriple<T>) -> Result<[ModeObservables<T>; 3]> {
    let nbar = ensemble.occupations();
    let mut out = Vec::with_capacity(3);
    for mode in Mode::ALL {
        let stats = distribution_statistics(&reduced_distribution(ensemble, mode))?;
        let n = nbar[mode.index()];
        out.push(ModeObservables {
            nbar: n,
            energy: modes.energy(mode, n),
            stats,
        });
    }
    Ok([out[0], out[1], out[2]])
}

/// Excursions below this size count as a stationary trace.
pub const STATIONARY_EXCURSION: f64 = 1e-6;
/// Coarsest sampling step accepted by [`transient_extremum`].
pub const EXTREMUM_MAX_STEP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extremum<T> {
    pub time: T,
    pub value: T,
    /// True for a minimum, false for a maximum.
    pub is_minimum: bool,
}

/// First local extremum of the mode energy that is also the global extremum
/// of its kind over the trace. `None` for stationary traces and for traces
/// that only move monotonically in the initial direction.
pub fn transient_extremum<T: Real>(trace: &EnergyTrace<T>, mode: Mode) -> Result<Option<Extremum<T>>> {
    const OP: &str = "transient_extremum";
    let times = &trace.times;
    let series = trace.energy(mode);
    if times.len() < 3 {
        return Err(Error::domain(OP, "need at least three samples"));
    }
    let step = times[1] - times[0];
    let slack = T::lit(1e-9) * step.max(T::one());
    if !(step > T::zero()) || step > T::lit(EXTREMUM_MAX_STEP) + slack {
        return Err(Error::domain(OP, format!("sampling step must lie in (0, {EXTREMUM_MAX_STEP}]")));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - step).abs() > T::lit(1e-6) * step {
            return Err(Error::domain(OP, "sampling grid is not uniform"));
        }
    }
    let (lo, hi) = series
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < T::lit(STATIONARY_EXCURSION) {
        return Ok(None);
    }
    // Kind of extremum given by the first motion away from the start.
    let Some(first_move) = series.iter().find(|&&v| v != series[0]) else {
        return Ok(None);
    };
    let is_minimum = *first_move < series[0];
    let target = if is_minimum { lo } else { hi };
    let idx = series.iter().position(|&v| v == target).expect("extremum present");
    if idx == 0 || idx + 1 == series.len() {
        return Ok(None);
    }
    Ok(Some(Extremum {
        time: times[idx],
        value: series[idx],
        is_minimum,
    }))
}

/// Reduced purity of one mode for a pure Fock initial state in one block.
#[derive(Clone, Debug, PartialEq)]
pub struct PurityDecay<T> {
    pub block: Block,
    pub initial_index: usize,
    pub times: Vec<T>,
    pub purity: Vec<T>,
    /// Purity of the reduced dephased state.
    pub dephased_purity: T,
}

impl<T: Real> PurityDecay<T> {
    /// Mean of the sampled purities at times `≥ from`.
    pub fn mean_after(&self, from: T) -> Option<T> {
        let late: Vec<T> = self
            .times
            .iter()
            .zip(&self.purity)
            .filter(|(t, _)| **t >= from)
            .map(|(_, p)| *p)
            .collect();
        (!late.is_empty()).then(|| compensated_sum(late.iter().copied()) / T::from_count(late.len()))
    }
}

/// Purity `Σ_k |c_k(t)|⁴` of the reduced single-mode state for the initial
/// Fock state `|n, N − n, M − n⟩`. Within one block every mode's reduced
/// state has the same spectrum, so the result holds for all three modes.
pub fn purity_decay<T: Real>(n: usize, n_sum: usize, m_sum: usize, times: &[T]) -> Result<PurityDecay<T>> {
    let block = Block::new(n_sum, m_sum);
    if n >= block.dim() {
        return Err(Error::domain(
            "purity_decay",
            format!("index {n} outside block ({n_sum}, {m_sum}) of dimension {}", block.dim()),
        ));
    }
    check_times("purity_decay", times)?;
    let eig = BlockHamiltonian::<T>::new(block).diagonalize()?;
    let d = block.dim();
    let mut c0 = vec![T::zero(); d];
    c0[n] = T::one();
    let purity = times
        .par_iter()
        .map(|&t| {
            let c = eig.amplitudes_at(&c0, t);
            compensated_sum(c.iter().map(|a| a.norm_sqr().powi(2)))
        })
        .collect();
    let dephased = eig.dephase(&c0);
    let dephased_purity = compensated_sum(dephased.iter().map(|&p| p * p));
    Ok(PurityDecay {
        block,
        initial_index: n,
        times: times.to_vec(),
        purity,
        dephased_purity,
    })
}

/// Histogram of consecutive eigenvalue gaps of one block.
#[derive(Clone, Debug, PartialEq)]
pub struct GapHistogram<T> {
    pub block: Block,
    pub bin_width: T,
    /// `counts[i]` gaps fall in `[i·w, (i+1)·w)`.
    pub counts: Vec<usize>,
    pub gaps: Vec<T>,
}

impl<T: Real> GapHistogram<T> {
    /// Index of the most populated bin (first one on ties).
    pub fn mode_bin(&self) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|&c| c == max).unwrap_or(0)
    }
}

pub fn gap_histogram<T: Real>(n_sum: usize, m_sum: usize, bin_width: T) -> Result<GapHistogram<T>> {
    let block = Block::new(n_sum, m_sum);
    if block.dim() < 2 {
        return Err(Error::domain("gap_histogram", "block dimension must be at least 2"));
    }
    if !(bin_width > T::zero() && bin_width.is_finite()) {
        return Err(Error::domain("gap_histogram", "bin width must be positive"));
    }
    let values = BlockHamiltonian::<T>::new(block).eigenvalues()?;
    let gaps: Vec<T> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut counts = Vec::new();
    for &g in &gaps {
        let bin = (g / bin_width).floor().to_usize().unwrap_or(0);
        if counts.len() <= bin {
            counts.resize(bin + 1, 0);
        }
        counts[bin] += 1;
    }
    Ok(GapHistogram {
        block,
        bin_width,
        counts,
        gaps,
    })
}
