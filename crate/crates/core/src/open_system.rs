//! Trilinear exchange with local thermal damping on every mode,
//!
//! `ρ̇ = −i[H, ρ] + Σ_j κ(1+n̄_j) D[a_j]ρ + κ n̄_j D[a_j†]ρ`,
//! `D[L]ρ = LρL† − ½{L†L, ρ}`, on a product Fock space truncated at
//! per-mode cutoffs. Ladder operators are truncated consistently, so the
//! generator stays trace preserving.
//!
//! Local damping maps the sector of fixed `(N, M)` onto its neighbours but
//! never creates coherences between sectors. A state that starts diagonal
//! in the Fock basis therefore stays block diagonal, and [`SectorState`]
//! stores only those blocks; [`TruncatedState`] is the dense reference.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fock::{thermal_population_unchecked, BlockEnsemble, Mode, ModeTriple, ThermalInit};
use crate::scalar::Real;
use crate::summation::CompensatedSum;
use crate::trace::{EnergyTrace, TraceMetadata};
use crate::unitary::exchange_amplitude;

/// Default RK4 step in units of 1/g.
pub const DEFAULT_STEP: f64 = 0.005;
/// Default cutoffs `(c_h, c_w, c_c)`.
pub const DEFAULT_CUTOFFS: [usize; 3] = [8, 12, 10];
/// Cutoff-level population that triggers a warning.
pub const LEAKAGE_WARNING: f64 = 1e-3;
/// Cutoff-level population that aborts the integration.
pub const LEAKAGE_LIMIT: f64 = 1e-2;

/// Product Fock space `⊗_i {0, …, c_i}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TruncatedSpace {
    cutoffs: [usize; 3],
}

impl TruncatedSpace {
    pub fn new(cutoffs: [usize; 3]) -> Self {
        Self { cutoffs }
    }

    pub fn cutoffs(&self) -> [usize; 3] {
        self.cutoffs
    }

    pub fn cutoff(&self, mode: Mode) -> usize {
        self.cutoffs[mode.index()]
    }

    pub fn dim(&self) -> usize {
        self.cutoffs.iter().map(|c| c + 1).product()
    }

    /// Position of `|n_h, n_w, n_c⟩`, or `None` beyond a cutoff.
    pub fn index(&self, occ: [usize; 3]) -> Option<usize> {
        let [ch, cw, cc] = self.cutoffs;
        if occ[0] > ch || occ[1] > cw || occ[2] > cc {
            return None;
        }
        Some((occ[0] * (cw + 1) + occ[1]) * (cc + 1) + occ[2])
    }

    pub fn occupations(&self, index: usize) -> [usize; 3] {
        let [_, cw, cc] = self.cutoffs;
        let c = index % (cc + 1);
        let rest = index / (cc + 1);
        [rest / (cw + 1), rest % (cw + 1), c]
    }

    /// Probability that the product thermal state lies outside the space.
    pub fn thermal_tail<T: Real>(&self, init: &ThermalInit<T>) -> T {
        let inside = Mode::ALL.iter().fold(T::one(), |acc, &mode| {
            let n = init.nbar(mode);
            let q = n / (T::one() + n);
            acc * (T::one() - q.powi(self.cutoff(mode) as i32 + 1))
        });
        T::one() - inside
    }

    /// Smallest cutoffs whose thermal tails `P(n_i > c_i)` stay below
    /// `tail`. The hot mode is populated by the exchange itself, so its
    /// cutoff is raised to at least half of the smaller of the other two.
    pub fn suggest<T: Real>(init: &ThermalInit<T>, tail: T) -> Result<Self> {
        if !(tail > T::zero() && tail < T::one()) {
            return Err(Error::domain("TruncatedSpace::suggest", "tail must lie in (0, 1)"));
        }
        let cut = |n: T| -> usize {
            if n == T::zero() {
                return 0;
            }
            let q = n / (T::one() + n);
            // q^(c+1) < tail.
            let c = (tail.ln() / q.ln()).ceil().to_usize().unwrap_or(0);
            c.saturating_sub(1).max(1)
        };
        let [h, w, c] = init.occupations().map(cut);
        Ok(Self::new([h.max(w.min(c) / 2), w, c]))
    }
}

/// Jump rates `(κ(1+n̄_j), κ n̄_j)` for lowering and raising each mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DampingRates<T> {
    pub down: [T; 3],
    pub up: [T; 3],
}

impl<T: Real> DampingRates<T> {
    pub fn new(baths: &ThermalInit<T>, kappa: T) -> Result<Self> {
        if !(kappa >= T::zero() && kappa.is_finite()) {
            return Err(Error::domain("DampingRates::new", "kappa must be finite and non-negative"));
        }
        let n = baths.occupations();
        Ok(Self {
            down: n.map(|x| kappa * (T::one() + x)),
            up: n.map(|x| kappa * x),
        })
    }
}

/// Dense density matrix on a [`TruncatedSpace`], row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedState<T> {
    pub space: TruncatedSpace,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> TruncatedState<T> {
    pub fn zeros(space: TruncatedSpace) -> Self {
        let d = space.dim();
        Self {
            space,
            data: vec![Complex::new(T::zero(), T::zero()); d * d],
        }
    }

    /// Product thermal state restricted to the space and renormalized.
    pub fn thermal(space: TruncatedSpace, init: &ThermalInit<T>) -> Self {
        let mut state = Self::zeros(space);
        let d = space.dim();
        let mut total = CompensatedSum::new();
        for i in 0..d {
            let p = thermal_weight(init, space.occupations(i));
            total.add(p);
            state.data[i * d + i] = Complex::new(p, T::zero());
        }
        let norm = total.value();
        for i in 0..d {
            state.data[i * d + i] = state.data[i * d + i] / norm;
        }
        state
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.data[i * self.dim() + j]
    }

    pub fn trace(&self) -> Complex<T> {
        let d = self.dim();
        (0..d).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self.data[i * d + i])
    }

    pub fn occupation(&self, mode: Mode) -> T {
        let d = self.dim();
        let mut acc = CompensatedSum::new();
        for i in 0..d {
            acc.add(T::from_count(self.space.occupations(i)[mode.index()]) * self.data[i * d + i].re);
        }
        acc.value()
    }

    /// Population of level `level` of one mode.
    pub fn level_population(&self, mode: Mode, level: usize) -> T {
        let d = self.dim();
        let mut acc = CompensatedSum::new();
        for i in 0..d {
            if self.space.occupations(i)[mode.index()] == level {
                acc.add(self.data[i * d + i].re);
            }
        }
        acc.value()
    }

    /// Largest `|ρ_ij − ρ_ji*|`.
    pub fn hermiticity_error(&self) -> T {
        let d = self.dim();
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.data[i * d + j] - self.data[j * d + i].conj()).norm());
            }
        }
        worst
    }

    /// Replaces `ρ` by `(ρ + ρ†)/2`.
    pub fn symmetrize(&mut self) {
        let d = self.dim();
        let half = T::lit(0.5);
        for i in 0..d {
            for j in i..d {
                let v = (self.data[i * d + j] + self.data[j * d + i].conj()) * half;
                self.data[i * d + j] = v;
                self.data[j * d + i] = v.conj();
            }
        }
    }

    /// Smallest eigenvalue, computed in double precision.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_min_eigenvalue(self.dim(), &self.data)
    }
}

fn thermal_weight<T: Real>(init: &ThermalInit<T>, occ: [usize; 3]) -> T {
    Mode::ALL.iter().fold(T::one(), |acc, &m| {
        acc * thermal_population_unchecked(init.nbar(m), occ[m.index()])
    })
}

fn hermitian_min_eigenvalue<T: Real>(d: usize, data: &[Complex<T>]) -> f64 {
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| {
        let z = data[i * d + j];
        nalgebra::Complex::new(z.re.as_f64(), z.im.as_f64())
    });
    let eig = nalgebra::SymmetricEigen::new(m);
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `dρ/dt` for a dense truncated state.
pub fn liouvillian_apply<T: Real>(rho: &TruncatedState<T>, baths: &ThermalInit<T>, kappa: T) -> Result<TruncatedState<T>> {
    let rates = DampingRates::new(baths, kappa)?;
    let space = rho.space;
    let d = space.dim();
    let cut = space.cutoffs();
    let zero = Complex::new(T::zero(), T::zero());
    let minus_i = Complex::new(T::zero(), -T::one());
    let half = T::lit(0.5);

    // Sparse rows of H: (column, amplitude).
    let neighbours: Vec<Vec<(usize, T)>> = (0..d)
        .map(|i| {
            let [h, w, c] = space.occupations(i);
            let mut row = Vec::new();
            if w > 0 && c > 0 {
                if let Some(j) = space.index([h + 1, w - 1, c - 1]) {
                    row.push((j, exchange_amplitude(crate::fock::Block::containing(h, w, c), h)));
                }
            }
            if h > 0 {
                if let Some(j) = space.index([h - 1, w + 1, c + 1]) {
                    row.push((j, exchange_amplitude(crate::fock::Block::containing(h, w, c), h - 1)));
                }
            }
            row
        })
        .collect();

    let mut out = TruncatedState::zeros(space);
    for i in 0..d {
        let oi = space.occupations(i);
        for j in 0..d {
            let oj = space.occupations(j);
            let mut v = zero;
            let mut hr = zero;
            for &(k, a) in &neighbours[i] {
                hr = hr + rho.get(k, j) * a;
            }
            let mut rh = zero;
            for &(k, a) in &neighbours[j] {
                rh = rh + rho.get(i, k) * a;
            }
            v = v + minus_i * (hr - rh);
            for k in 0..3 {
                let (ni, nj) = (oi[k], oj[k]);
                let mi = if ni < cut[k] { ni + 1 } else { 0 };
                let mj = if nj < cut[k] { nj + 1 } else { 0 };
                let decay = half
                    * (rates.down[k] * T::from_count(ni + nj) + rates.up[k] * T::from_count(mi + mj));
                v = v - rho.get(i, j) * decay;
                // a ρ a† pulls from the raised pair.
                if ni < cut[k] && nj < cut[k] {
                    let (mut ui, mut uj) = (oi, oj);
                    ui[k] += 1;
                    uj[k] += 1;
                    let (iu, ju) = (space.index(ui).unwrap(), space.index(uj).unwrap());
                    let f = (T::from_count((ni + 1) * (nj + 1))).sqrt();
                    v = v + rho.get(iu, ju) * (rates.down[k] * f);
                }
                // a† ρ a pulls from the lowered pair.
                if ni > 0 && nj > 0 {
                    let (mut li, mut lj) = (oi, oj);
                    li[k] -= 1;
                    lj[k] -= 1;
                    let (il, jl) = (space.index(li).unwrap(), space.index(lj).unwrap());
                    let f = (T::from_count(ni * nj)).sqrt();
                    v = v + rho.get(il, jl) * (rates.up[k] * f);
                }
            }
            out.data[i * d + j] = v;
        }
    }
    Ok(out)
}

// One (N, M) sector: states n_h ∈ [lo, lo + dim).
#[derive(Clone, Debug)]
struct Sector {
    n_sum: usize,
    m_sum: usize,
    lo: usize,
    dim: usize,
    offset: usize,
    // amps[p] couples local p and p+1.
    amps: Vec<f64>,
    // [mode][down/up] neighbour sector.
    neighbours: [[Option<usize>; 2]; 3],
}

impl Sector {
    fn occupation(&self, mode: usize, p: usize) -> usize {
        let nh = self.lo + p;
        match mode {
            0 => nh,
            1 => self.n_sum - nh,
            _ => self.m_sum - nh,
        }
    }
}

/// Sector structure of a truncated space.
#[derive(Clone, Debug)]
pub struct SectorLayout {
    space: TruncatedSpace,
    sectors: Vec<Sector>,
    len: usize,
    max_amplitude: f64,
}

impl SectorLayout {
    pub fn new(space: TruncatedSpace) -> Self {
        let [ch, cw, cc] = space.cutoffs();
        let (n_max, m_max) = (ch + cw, ch + cc);
        let mut lookup = vec![None; (n_max + 1) * (m_max + 1)];
        let mut sectors = Vec::new();
        let mut offset = 0;
        let mut max_amplitude = 0.0f64;
        for n_sum in 0..=n_max {
            for m_sum in 0..=m_max {
                let lo = n_sum.saturating_sub(cw).max(m_sum.saturating_sub(cc));
                let hi = ch.min(n_sum).min(m_sum);
                if lo > hi {
                    continue;
                }
                let dim = hi - lo + 1;
                let block = crate::fock::Block::new(n_sum, m_sum);
                let amps: Vec<f64> = (0..dim - 1).map(|p| exchange_amplitude::<f64>(block, lo + p)).collect();
                max_amplitude = amps.iter().copied().fold(max_amplitude, f64::max);
                lookup[n_sum * (m_max + 1) + m_sum] = Some(sectors.len());
                sectors.push(Sector {
                    n_sum,
                    m_sum,
                    lo,
                    dim,
                    offset,
                    amps,
                    neighbours: [[None; 2]; 3],
                });
                offset += dim * dim;
            }
        }
        let find = |n: Option<usize>, m: Option<usize>| -> Option<usize> {
            let (n, m) = (n?, m?);
            if n > n_max || m > m_max {
                return None;
            }
            lookup[n * (m_max + 1) + m]
        };
        for s in &mut sectors {
            let (n, m) = (s.n_sum, s.m_sum);
            s.neighbours = [
                [find(n.checked_sub(1), m.checked_sub(1)), find(Some(n + 1), Some(m + 1))],
                [find(n.checked_sub(1), Some(m)), find(Some(n + 1), Some(m))],
                [find(Some(n), m.checked_sub(1)), find(Some(n), Some(m + 1))],
            ];
        }
        Self {
            space,
            sectors,
            len: offset,
            max_amplitude,
        }
    }

    pub fn space(&self) -> TruncatedSpace {
        self.space
    }

    pub fn sector_count(&self) -> usize {
        self.sectors.len()
    }

    /// Number of stored matrix entries.
    pub fn stored_len(&self) -> usize {
        self.len
    }

    fn local_index(&self, s: &Sector, mode: usize, raise: bool, p: usize) -> usize {
        let target = &self.sectors[s.neighbours[mode][raise as usize].expect("neighbour sector")];
        let nh = s.lo + p;
        let nh = if mode == 0 {
            if raise { nh + 1 } else { nh - 1 }
        } else {
            nh
        };
        nh - target.lo
    }
}

/// Block-diagonal state on a [`SectorLayout`].
#[derive(Clone, Debug)]
pub struct SectorState<T> {
    layout: Arc<SectorLayout>,
    data: Vec<Complex<T>>,
}

impl<T: Real> SectorState<T> {
    pub fn zeros(layout: Arc<SectorLayout>) -> Self {
        let len = layout.len;
        Self {
            layout,
            data: vec![Complex::new(T::zero(), T::zero()); len],
        }
    }

    /// Renormalized product thermal state.
    pub fn thermal(layout: Arc<SectorLayout>, init: &ThermalInit<T>) -> Self {
        let mut state = Self::zeros(layout);
        let mut total = CompensatedSum::new();
        for s in state.layout.sectors.clone() {
            for p in 0..s.dim {
                let occ = [0, 1, 2].map(|k| s.occupation(k, p));
                let w = thermal_weight(init, occ);
                total.add(w);
                state.data[s.offset + p * s.dim + p] = Complex::new(w, T::zero());
            }
        }
        let norm = total.value();
        for z in &mut state.data {
            *z = *z / norm;
        }
        state
    }

    /// Copies the block populations of an ensemble. Every block must fit
    /// inside the cutoffs entirely, otherwise the truncated dynamics would
    /// differ from the block dynamics.
    pub fn from_block_ensemble(layout: Arc<SectorLayout>, ensemble: &BlockEnsemble<T>) -> Result<Self> {
        let mut state = Self::zeros(layout);
        for b in ensemble.blocks() {
            let (n, m) = (b.block.n_sum, b.block.m_sum);
            let s = state
                .layout
                .sectors
                .iter()
                .find(|s| s.n_sum == n && s.m_sum == m)
                .cloned();
            match s {
                Some(s) if s.lo == 0 && s.dim == b.block.dim() => {
                    for (p, &x) in b.populations.iter().enumerate() {
                        state.data[s.offset + p * s.dim + p] = Complex::new(x, T::zero());
                    }
                }
                _ => {
                    return Err(Error::domain(
                        "SectorState::from_block_ensemble",
                        format!("block ({n}, {m}) does not fit inside the cutoffs"),
                    ))
                }
            }
        }
        Ok(state)
    }

    pub fn layout(&self) -> &Arc<SectorLayout> {
        &self.layout
    }

    pub fn to_dense(&self) -> TruncatedState<T> {
        let space = self.layout.space;
        let mut dense = TruncatedState::zeros(space);
        let d = space.dim();
        for s in &self.layout.sectors {
            for p in 0..s.dim {
                let i = space.index([0, 1, 2].map(|k| s.occupation(k, p))).unwrap();
                for q in 0..s.dim {
                    let j = space.index([0, 1, 2].map(|k| s.occupation(k, q))).unwrap();
                    dense.data[i * d + j] = self.data[s.offset + p * s.dim + q];
                }
            }
        }
        dense
    }

    pub fn trace(&self) -> T {
        let mut acc = CompensatedSum::new();
        for s in &self.layout.sectors {
            for p in 0..s.dim {
                acc.add(self.data[s.offset + p * s.dim + p].re);
            }
        }
        acc.value()
    }

    pub fn occupations(&self) -> [T; 3] {
        let mut acc = [CompensatedSum::new(); 3];
        for s in &self.layout.sectors {
            for p in 0..s.dim {
                let x = self.data[s.offset + p * s.dim + p].re;
                for (k, a) in acc.iter_mut().enumerate() {
                    a.add(T::from_count(s.occupation(k, p)) * x);
                }
            }
        }
        acc.map(|a| a.value())
    }

    /// Population of the top retained level of each mode.
    pub fn cutoff_populations(&self) -> [T; 3] {
        let cut = self.layout.space.cutoffs();
        let mut acc = [CompensatedSum::new(); 3];
        for s in &self.layout.sectors {
            for p in 0..s.dim {
                let x = self.data[s.offset + p * s.dim + p].re;
                for (k, a) in acc.iter_mut().enumerate() {
                    if s.occupation(k, p) == cut[k] {
                        a.add(x);
                    }
                }
            }
        }
        acc.map(|a| a.value())
    }

    /// Replaces every block by its Hermitian part.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for s in &self.layout.sectors {
            let d = s.dim;
            for p in 0..d {
                for q in p..d {
                    let (a, b) = (s.offset + p * d + q, s.offset + q * d + p);
                    let v = (self.data[a] + self.data[b].conj()) * half;
                    self.data[a] = v;
                    self.data[b] = v.conj();
                }
            }
        }
    }

    /// Smallest eigenvalue over all blocks, in double precision.
    pub fn min_eigenvalue(&self) -> f64 {
        self.layout
            .sectors
            .iter()
            .map(|s| hermitian_min_eigenvalue(s.dim, &self.data[s.offset..s.offset + s.dim * s.dim]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `dρ/dt` written into `out`.
    pub fn apply_into(&self, rates: &DampingRates<T>, out: &mut Self) {
        let layout = &*self.layout;
        let cut = layout.space.cutoffs();
        let src = &self.data;
        let zero = Complex::new(T::zero(), T::zero());
        let half = T::lit(0.5);
        for s in &layout.sectors {
            let d = s.dim;
            let occ: Vec<[usize; 3]> = (0..d).map(|p| [0, 1, 2].map(|k| s.occupation(k, p))).collect();
            let amps: Vec<T> = s.amps.iter().map(|&a| T::lit(a)).collect();
            let at = |p: usize, q: usize| src[s.offset + p * d + q];
            for p in 0..d {
                for q in 0..d {
                    let mut hr = zero;
                    if p > 0 {
                        hr = hr + at(p - 1, q) * amps[p - 1];
                    }
                    if p + 1 < d {
                        hr = hr + at(p + 1, q) * amps[p];
                    }
                    let mut rh = zero;
                    if q > 0 {
                        rh = rh + at(p, q - 1) * amps[q - 1];
                    }
                    if q + 1 < d {
                        rh = rh + at(p, q + 1) * amps[q];
                    }
                    let diff = hr - rh;
                    // −i(Hρ − ρH)
                    let mut v = Complex::new(diff.im, -diff.re);
                    let rho = at(p, q);
                    for k in 0..3 {
                        let (ni, nj) = (occ[p][k], occ[q][k]);
                        let mi = if ni < cut[k] { ni + 1 } else { 0 };
                        let mj = if nj < cut[k] { nj + 1 } else { 0 };
                        let decay = half
                            * (rates.down[k] * T::from_count(ni + nj) + rates.up[k] * T::from_count(mi + mj));
                        v = v - rho * decay;
                        if rates.down[k] > T::zero() && ni < cut[k] && nj < cut[k] {
                            let t = &layout.sectors[s.neighbours[k][1].expect("raised sector")];
                            let (pu, qu) = (layout.local_index(s, k, true, p), layout.local_index(s, k, true, q));
                            let f = T::from_count((ni + 1) * (nj + 1)).sqrt();
                            v = v + src[t.offset + pu * t.dim + qu] * (rates.down[k] * f);
                        }
                        if rates.up[k] > T::zero() && ni > 0 && nj > 0 {
                            let t = &layout.sectors[s.neighbours[k][0].expect("lowered sector")];
                            let (pl, ql) = (layout.local_index(s, k, false, p), layout.local_index(s, k, false, q));
                            let f = T::from_count(ni * nj).sqrt();
                            v = v + src[t.offset + pl * t.dim + ql] * (rates.up[k] * f);
                        }
                    }
                    out.data[s.offset + p * d + q] = v;
                }
            }
        }
    }

    fn axpy(&mut self, a: T, x: &Self, y: &Self) {
        for ((o, xi), yi) in self.data.iter_mut().zip(&x.data).zip(&y.data) {
            *o = *yi + *xi * a;
        }
    }

    fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).norm()))
    }
}

// Classical RK4 with reusable work buffers.
struct Rk4<T> {
    k: [SectorState<T>; 4],
    tmp: SectorState<T>,
}

impl<T: Real> Rk4<T> {
    fn new(layout: &Arc<SectorLayout>) -> Self {
        let z = || SectorState::zeros(layout.clone());
        Self {
            k: [z(), z(), z(), z()],
            tmp: z(),
        }
    }

    fn step(&mut self, y: &mut SectorState<T>, rates: &DampingRates<T>, h: T) {
        let half = h * T::lit(0.5);
        let [k1, k2, k3, k4] = &mut self.k;
        y.apply_into(rates, k1);
        self.tmp.axpy(half, k1, y);
        self.tmp.apply_into(rates, k2);
        self.tmp.axpy(half, k2, y);
        self.tmp.apply_into(rates, k3);
        self.tmp.axpy(h, k3, y);
        self.tmp.apply_into(rates, k4);
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        for i in 0..y.data.len() {
            y.data[i] = y.data[i] + (k1.data[i] + (k2.data[i] + k3.data[i]) * two + k4.data[i]) * sixth;
        }
        y.symmetrize();
    }
}

/// Integration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpenSystemOptions<T> {
    /// Explicit cutoffs; `None` selects [`TruncatedSpace::suggest`] with
    /// `auto_tail`.
    pub cutoffs: Option<[usize; 3]>,
    pub auto_tail: T,
    /// Largest RK4 step. It is shortened further when the generator's
    /// spectral bound requires it for stability.
    pub step: T,
    /// Steps between step-halving error checks; 0 disables them.
    pub spot_check_every: usize,
    /// Sample stride of the positivity monitor; 0 disables it.
    pub positivity_every: usize,
}

impl<T: Real> Default for OpenSystemOptions<T> {
    fn default() -> Self {
        Self {
            cutoffs: Some(DEFAULT_CUTOFFS),
            auto_tail: T::lit(1e-4),
            step: T::lit(DEFAULT_STEP),
            spot_check_every: 500,
            positivity_every: 10,
        }
    }
}

/// Result of one open-system integration.
#[derive(Clone, Debug)]
pub struct OpenSystemRun<T> {
    pub trace: EnergyTrace<T>,
    pub cutoffs: [usize; 3],
    /// Step actually used.
    pub step: T,
    /// Thermal probability outside the cutoffs before renormalization.
    pub initial_truncated_weight: T,
    pub max_trace_drift: T,
    pub max_cutoff_population: [T; 3],
    /// Largest entry change between one step and two half steps.
    pub spot_check_error: T,
    pub min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

/// Upper bound on the Liouvillian spectral radius used to cap the step.
fn spectral_bound<T: Real>(layout: &SectorLayout, rates: &DampingRates<T>) -> T {
    let cut = layout.space.cutoffs();
    let damping = (0..3).fold(T::zero(), |acc, k| {
        acc + rates.down[k] * T::from_count(cut[k]) + rates.up[k] * T::from_count(cut[k] + 1)
    });
    T::lit(4.0 * layout.max_amplitude) + T::lit(2.0) * damping
}

/// Integrates from the renormalized truncated thermal state of `init`,
/// with baths at the same occupations. Model tag `open:kappa=<κ>`.
pub fn integrate<T: Real>(
    init: &ThermalInit<T>,
    modes: &ModeTriple<T>,
    kappa: T,
    times: &[T],
    options: &OpenSystemOptions<T>,
) -> Result<OpenSystemRun<T>> {
    let space = match options.cutoffs {
        Some(c) => TruncatedSpace::new(c),
        None => TruncatedSpace::suggest(init, options.auto_tail)?,
    };
    let layout = Arc::new(SectorLayout::new(space));
    let state = SectorState::thermal(layout, init);
    let mut run = integrate_state(state, init, modes, kappa, times, options)?;
    run.initial_truncated_weight = space.thermal_tail(init);
    run.trace.metadata.init_nbar = init.occupations().map(Real::as_f64);
    Ok(run)
}

/// Integrates an explicit initial state.
pub fn integrate_state<T: Real>(
    mut state: SectorState<T>,
    baths: &ThermalInit<T>,
    modes: &ModeTriple<T>,
    kappa: T,
    times: &[T],
    options: &OpenSystemOptions<T>,
) -> Result<OpenSystemRun<T>> {
    const OP: &str = "open_system::integrate";
    if times.iter().any(|t| !(t.is_finite() && *t >= T::zero())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain(OP, "times must be finite, non-negative and sorted"));
    }
    if !(options.step > T::zero()) {
        return Err(Error::domain(OP, "step must be positive"));
    }
    let rates = DampingRates::new(baths, kappa)?;
    let layout = state.layout.clone();
    let space = layout.space;
    let bound = spectral_bound(&layout, &rates);
    let step = options.step.min(T::lit(2.5) / bound);
    let mut warnings = Vec::new();
    if step < options.step {
        warnings.push(format!("step reduced to {step} for stability"));
    }

    let initial_trace = state.trace();
    let mut rk = Rk4::new(&layout);
    let mut probe = SectorState::zeros(layout.clone());
    let mut halves = SectorState::zeros(layout.clone());
    let mut nbar: [Vec<T>; 3] = Default::default();
    let mut max_drift = T::zero();
    let mut max_cut = [T::zero(); 3];
    let mut warned = [false; 3];
    let mut spot = T::zero();
    let mut min_eig = f64::INFINITY;
    let mut now = T::zero();
    let mut steps = 0usize;

    for (sample, &target) in times.iter().enumerate() {
        while now < target {
            let h = step.min(target - now);
            if options.spot_check_every > 0 && steps % options.spot_check_every == 0 {
                probe.data.clone_from(&state.data);
                rk.step(&mut probe, &rates, h);
                halves.data.clone_from(&state.data);
                rk.step(&mut halves, &rates, h * T::lit(0.5));
                rk.step(&mut halves, &rates, h * T::lit(0.5));
                spot = spot.max(probe.max_abs_diff(&halves));
            }
            rk.step(&mut state, &rates, h);
            steps += 1;
            now = if target - now - h <= T::epsilon() * target { target } else { now + h };
        }
        let occ = state.occupations();
        for k in 0..3 {
            nbar[k].push(occ[k]);
        }
        max_drift = max_drift.max((state.trace() - initial_trace).abs());
        let top = state.cutoff_populations();
        for (k, mode) in Mode::ALL.iter().enumerate() {
            max_cut[k] = max_cut[k].max(top[k]);
            if top[k] > T::lit(LEAKAGE_LIMIT) {
                return Err(Error::Leakage {
                    mode: mode.label(),
                    population: top[k].as_f64(),
                    limit: LEAKAGE_LIMIT,
                });
            }
            if top[k] > T::lit(LEAKAGE_WARNING) && !warned[k] {
                warned[k] = true;
                let msg = format!(
                    "mode {} cutoff level holds {:.2e} at t = {}; consider a larger cutoff",
                    mode.label(),
                    top[k].as_f64(),
                    target
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        if options.positivity_every > 0 && (sample % options.positivity_every == 0 || sample + 1 == times.len()) {
            min_eig = min_eig.min(state.min_eigenvalue());
        }
    }
    if min_eig < -1e-6 {
        warnings.push(format!("state lost positivity: minimum eigenvalue {min_eig:.3e}"));
    }

    let metadata = TraceMetadata {
        model: format!("open:kappa={kappa}"),
        init_nbar: baths.occupations().map(Real::as_f64),
        omega: modes.as_array().map(Real::as_f64),
        truncated_weight: Some(space.thermal_tail(baths).as_f64()),
        ..Default::default()
    };
    let trace = EnergyTrace::from_occupations(times.to_vec(), nbar, modes, metadata);
    Ok(OpenSystemRun {
        trace,
        cutoffs: space.cutoffs(),
        step,
        initial_truncated_weight: T::one() - initial_trace,
        max_trace_drift: max_drift,
        max_cutoff_population: max_cut,
        spot_check_error: spot,
        min_eigenvalue: min_eig,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Block;
    use crate::fock::BlockPopulation;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_hermitian(space: TruncatedSpace, seed: u64) -> TruncatedState<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut s = TruncatedState::zeros(space);
        for z in &mut s.data {
            *z = Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        s.symmetrize();
        s
    }

    #[test]
    fn space_indexing_round_trips() {
        let space = TruncatedSpace::new([2, 3, 1]);
        assert_eq!(space.dim(), 24);
        for i in 0..space.dim() {
            assert_eq!(space.index(space.occupations(i)), Some(i));
        }
        assert_eq!(space.index([3, 0, 0]), None);
    }

    #[test]
    fn suggested_cutoffs_bound_the_tail() {
        let init = ThermalInit::<f64>::from_occupations(0.5, 2.5, 2.0).unwrap();
        let space = TruncatedSpace::suggest(&init, 1e-4).unwrap();
        assert!(space.thermal_tail(&init) < 3e-4);
        assert_eq!(space.cutoffs(), [11, 27, 22]);
    }

    #[test]
    fn trace_free_derivative() {
        let space = TruncatedSpace::new([2, 2, 3]);
        let baths = ThermalInit::from_occupations(0.3, 1.2, 0.7).unwrap();
        for seed in 0..5 {
            let rho = random_hermitian(space, seed);
            let d = liouvillian_apply(&rho, &baths, 0.8).unwrap();
            assert!(d.trace().norm() < 1e-12);
            assert!(d.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn thermal_state_is_fixed_without_coupling() {
        // Without the exchange term only the dissipators act; evaluate
        // them on a state whose Hamiltonian part vanishes: one mode only.
        let space = TruncatedSpace::new([6, 0, 0]);
        let baths = ThermalInit::from_occupations(0.7, 0.0, 0.0).unwrap();
        let rho = TruncatedState::thermal(space, &baths);
        let d = liouvillian_apply(&rho, &baths, 2.0).unwrap();
        assert!(d.data.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn sector_and_dense_generators_agree() {
        let space = TruncatedSpace::new([2, 3, 3]);
        let layout = Arc::new(SectorLayout::new(space));
        let baths = ThermalInit::<f64>::from_occupations(0.4, 1.1, 0.9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut s = SectorState::zeros(layout.clone());
        for z in &mut s.data {
            *z = Complex::new(rng.random::<f64>(), rng.random::<f64>());
        }
        s.symmetrize();
        let mut out = SectorState::zeros(layout);
        let rates = DampingRates::new(&baths, 0.6).unwrap();
        s.apply_into(&rates, &mut out);
        let dense = liouvillian_apply(&s.to_dense(), &baths, 0.6).unwrap();
        let back = out.to_dense();
        for (a, b) in dense.data.iter().zip(&back.data) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn closed_evolution_matches_block_solver() {
        let init = ThermalInit::from_occupations(0.2, 0.5, 0.5).unwrap();
        let space = TruncatedSpace::new([4, 5, 5]);
        let layout = Arc::new(SectorLayout::new(space));
        // Populate only the blocks that fit completely inside the cutoffs.
        let blocks: Vec<BlockPopulation<f64>> = (0..=5)
            .flat_map(|n| (0..=5).map(move |m| Block::new(n, m)))
            .filter(|b| b.dim() <= 5)
            .map(|b| BlockPopulation {
                block: b,
                populations: (0..b.dim()).map(|p| thermal_weight(&init, b.occupations(p))).collect(),
            })
            .collect();
        let retained: f64 = blocks.iter().map(|b| b.weight()).sum();
        let ens = BlockEnsemble::new(blocks, 1.0 - retained).unwrap();
        let state = SectorState::from_block_ensemble(layout, &ens).unwrap();
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let modes = ModeTriple::default();
        let opts = OpenSystemOptions {
            cutoffs: None,
            ..Default::default()
        };
        let open = integrate_state(state, &init, &modes, 0.0, &times, &opts).unwrap();
        let exact = crate::unitary::evolve(&ens, &modes, &times).unwrap();
        for mode in Mode::ALL {
            for (a, b) in open.trace.occupation(mode).iter().zip(exact.occupation(mode)) {
                assert!((a - b).abs() < 1e-6, "{mode:?}: {a} vs {b}");
            }
        }
        assert!(open.max_trace_drift < 1e-12);
    }

    #[test]
    fn leakage_beyond_limit_is_an_error() {
        let init = ThermalInit::from_occupations(0.5, 2.5, 2.0).unwrap();
        let opts = OpenSystemOptions {
            cutoffs: Some([2, 3, 3]),
            ..Default::default()
        };
        let err = integrate(&init, &ModeTriple::default(), 0.1, &[0.0, 0.1], &opts).unwrap_err();
        assert!(matches!(err, Error::Leakage { .. }), "{err}");
    }

    proptest! {
        #[test]
        fn dense_derivative_preserves_trace(seed in 0u64..1000, kappa in 0.0f64..5.0) {
            let space = TruncatedSpace::new([1, 2, 2]);
            let baths = ThermalInit::from_occupations(0.5, 0.9, 1.3).unwrap();
            let rho = random_hermitian(space, seed);
            let d = liouvillian_apply(&rho, &baths, kappa).unwrap();
            prop_assert!(d.trace().norm() < 1e-12);
        }
    }
}
