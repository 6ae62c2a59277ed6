//! Mode configuration, thermal initial states and the decomposition of the
//! three-mode Fock space into blocks of fixed `N = n_h + n_w` and
//! `M = n_h + n_c`.
//!
//! Units: `ħ = k_B = 1` and the coupling `g = 1`, so times are measured in
//! `1/g`. Mode frequencies only enter temperature conversions and the
//! displayed energies `ε_i = ω_i (n̄_i + 1/2)`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::summation::{compensated_sum, CompensatedSum};

/// Trilinear coupling constant. All times are in units of `1/g`.
pub const COUPLING: f64 = 1.0;

/// Default truncation threshold on single Fock-state populations.
pub const DEFAULT_THRESHOLD: f64 = 1e-4;

/// The three modes, in the fixed order hot, work, cold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Hot,
    Work,
    Cold,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Hot, Mode::Work, Mode::Cold];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Mode::Hot => 0,
            Mode::Work => 1,
            Mode::Cold => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Mode::Hot => "h",
            Mode::Work => "w",
            Mode::Cold => "c",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" | "hot" => Ok(Mode::Hot),
            "w" | "work" => Ok(Mode::Work),
            "c" | "cold" => Ok(Mode::Cold),
            other => Err(Error::domain("Mode::from_str", format!("unknown mode {other:?}"))),
        }
    }
}

/// Angular frequencies of the hot, work and cold modes, on resonance
/// `ω_h = ω_w + ω_c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeTriple<T> {
    omega: [T; 3],
}

impl<T: Real> ModeTriple<T> {
    pub fn new(omega_h: T, omega_w: T, omega_c: T) -> Result<Self> {
        const OP: &str = "ModeTriple::new";
        for (name, w) in [("omega_h", omega_h), ("omega_w", omega_w), ("omega_c", omega_c)] {
            if !(w.is_finite() && w > T::zero()) {
                return Err(Error::domain(OP, format!("{name} = {w} must be positive")));
            }
        }
        let detuning = omega_h - omega_w - omega_c;
        if detuning.abs() > T::lit(1e-12) * omega_h {
            return Err(Error::domain(
                OP,
                format!("off resonance: omega_h - omega_w - omega_c = {detuning}"),
            ));
        }
        Ok(Self {
            omega: [omega_h, omega_w, omega_c],
        })
    }

    #[inline]
    pub fn omega(&self, mode: Mode) -> T {
        self.omega[mode.index()]
    }

    pub fn as_array(&self) -> [T; 3] {
        self.omega
    }

    /// Mean energy `ω (n̄ + 1/2)` of a mode with occupation `n̄`.
    #[inline]
    pub fn energy(&self, mode: Mode, nbar: T) -> T {
        self.omega(mode) * (nbar + T::lit(0.5))
    }
}

impl<T: Real> Default for ModeTriple<T> {
    /// `(ω_h, ω_w, ω_c) = (2, 1, 1)`.
    fn default() -> Self {
        Self {
            omega: [T::lit(2.0), T::one(), T::one()],
        }
    }
}

/// Mean occupation for temperature `temp` at frequency `omega`,
/// `n̄ = 1/(exp(ω/T) − 1)`; zero temperature gives vacuum.
pub fn occupation_from_temperature<T: Real>(omega: T, temp: T) -> Result<T> {
    if !(temp >= T::zero()) || temp.is_nan() {
        return Err(Error::domain(
            "occupation_from_temperature",
            format!("temperature {temp} is negative"),
        ));
    }
    if temp == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::one() / (omega / temp).exp_m1())
}

/// Temperature of a thermal mode, `T = ω / ln(1 + 1/n̄)`; vacuum gives zero.
pub fn temperature_from_occupation<T: Real>(omega: T, nbar: T) -> Result<T> {
    if !(nbar >= T::zero()) || !nbar.is_finite() {
        return Err(Error::domain(
            "temperature_from_occupation",
            format!("occupation {nbar} is negative or not finite"),
        ));
    }
    if nbar == T::zero() {
        return Ok(T::zero());
    }
    Ok(omega / (T::one() / nbar).ln_1p())
}

/// Product of thermal states, described by the mean occupations of the hot,
/// work and cold modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalInit<T> {
    nbar: [T; 3],
}

impl<T: Real> ThermalInit<T> {
    pub fn from_occupations(nbar_h: T, nbar_w: T, nbar_c: T) -> Result<Self> {
        for (name, n) in [("nbar_h", nbar_h), ("nbar_w", nbar_w), ("nbar_c", nbar_c)] {
            if !(n.is_finite() && n >= T::zero()) {
                return Err(Error::domain(
                    "ThermalInit::from_occupations",
                    format!("{name} = {n} must be finite and non-negative"),
                ));
            }
        }
        Ok(Self {
            nbar: [nbar_h, nbar_w, nbar_c],
        })
    }

    /// Thermal state with mean energies `ε_i = ω_i (n̄_i + 1/2)`, given in
    /// units of the respective quanta `ω_i`.
    pub fn from_energy_quanta(eps_h: T, eps_w: T, eps_c: T) -> Result<Self> {
        let half = T::lit(0.5);
        Self::from_occupations(eps_h - half, eps_w - half, eps_c - half)
    }

    pub fn from_temperatures(temps: [T; 3], modes: &ModeTriple<T>) -> Result<Self> {
        let mut nbar = [T::zero(); 3];
        for mode in Mode::ALL {
            nbar[mode.index()] = occupation_from_temperature(modes.omega(mode), temps[mode.index()])?;
        }
        Self::from_occupations(nbar[0], nbar[1], nbar[2])
    }

    #[inline]
    pub fn nbar(&self, mode: Mode) -> T {
        self.nbar[mode.index()]
    }

    pub fn occupations(&self) -> [T; 3] {
        self.nbar
    }

    pub fn temperatures(&self, modes: &ModeTriple<T>) -> [T; 3] {
        Mode::ALL.map(|mode| {
            temperature_from_occupation(modes.omega(mode), self.nbar(mode))
                .expect("occupations are validated on construction")
        })
    }

    /// Initial energies `ε_i = ω_i (n̄_i + 1/2)`.
    pub fn energies(&self, modes: &ModeTriple<T>) -> [T; 3] {
        Mode::ALL.map(|mode| modes.energy(mode, self.nbar(mode)))
    }
}

/// Thermal (geometric) occupation probability `n̄ᵏ / (1 + n̄)^{k+1}`.
pub fn thermal_population<T: Real>(nbar: T, k: usize) -> Result<T> {
    if !(nbar.is_finite() && nbar >= T::zero()) {
        return Err(Error::domain(
            "thermal_population",
            format!("occupation {nbar} must be finite and non-negative"),
        ));
    }
    Ok(thermal_population_unchecked(nbar, k))
}

#[inline]
pub(crate) fn thermal_population_unchecked<T: Real>(nbar: T, k: usize) -> T {
    if nbar == T::zero() {
        return if k == 0 { T::one() } else { T::zero() };
    }
    let norm = T::one() / (T::one() + nbar);
    let ratio = nbar * norm;
    norm * (T::from_count(k) * ratio.ln()).exp()
}

/// Largest `k` whose thermal population is at least `threshold`.
fn max_retained_level<T: Real>(nbar: T, threshold: T) -> Option<usize> {
    if thermal_population_unchecked(nbar, 0) < threshold {
        return None;
    }
    if nbar == T::zero() {
        return Some(0);
    }
    // p(k) = (1−r) r^k with r = n̄/(1+n̄); solve p(k) >= threshold.
    let norm = T::one() / (T::one() + nbar);
    let ratio = nbar * norm;
    let bound = ((threshold / norm).ln() / ratio.ln()).floor();
    let mut k = bound.to_usize().unwrap_or(0);
    while thermal_population_unchecked(nbar, k + 1) >= threshold {
        k += 1;
    }
    while k > 0 && thermal_population_unchecked(nbar, k) < threshold {
        k -= 1;
    }
    Some(k)
}

/// Invariant subspace of fixed `N = n_h + n_w` and `M = n_h + n_c`.
///
/// Its basis vectors are indexed by `n ∈ [0, d)` with `d = min(N, M) + 1`
/// and correspond to `|n, N − n, M − n⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Block {
    pub n_sum: usize,
    pub m_sum: usize,
}

impl Block {
    pub fn new(n_sum: usize, m_sum: usize) -> Self {
        Self { n_sum, m_sum }
    }

    /// Block containing the Fock state `|n_h, n_w, n_c⟩`.
    pub fn containing(n_h: usize, n_w: usize, n_c: usize) -> Self {
        Self::new(n_h + n_w, n_h + n_c)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n_sum.min(self.m_sum) + 1
    }

    /// Fock occupations `(n_h, n_w, n_c)` of basis vector `n`.
    #[inline]
    pub fn occupations(&self, n: usize) -> [usize; 3] {
        debug_assert!(n < self.dim());
        [n, self.n_sum - n, self.m_sum - n]
    }

    /// Occupation of `mode` in basis vector `n`.
    #[inline]
    pub fn occupation(&self, mode: Mode, n: usize) -> usize {
        self.occupations(n)[mode.index()]
    }
}

/// Populations of one block. Probabilities are absolute: they carry the
/// block's weight in the global state.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPopulation<T> {
    pub block: Block,
    pub populations: Vec<T>,
}

impl<T: Real> BlockPopulation<T> {
    pub fn weight(&self) -> T {
        compensated_sum(self.populations.iter().copied())
    }
}

/// A state that is diagonal in the invariant blocks, described by the
/// populations inside each retained block.
///
/// Block populations are absolute probabilities, so
/// `Σ_blocks Σ_n p_n + truncated_weight = 1`. Retained populations are not
/// renormalized; observables carry the truncation deficit.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEnsemble<T> {
    pub(crate) blocks: Vec<BlockPopulation<T>>,
    pub(crate) truncated_weight: T,
}

impl<T: Real> BlockEnsemble<T> {
    /// Builds an ensemble, checking that populations are non-negative, have
    /// the block dimension and that blocks are unique. Blocks are stored in
    /// ascending `(N, M)` order.
    pub fn new(mut blocks: Vec<BlockPopulation<T>>, truncated_weight: T) -> Result<Self> {
        const OP: &str = "BlockEnsemble::new";
        blocks.sort_by_key(|b| b.block);
        for pair in blocks.windows(2) {
            if pair[0].block == pair[1].block {
                return Err(Error::domain(OP, format!("duplicate block {:?}", pair[0].block)));
            }
        }
        for b in &blocks {
            if b.populations.len() != b.block.dim() {
                return Err(Error::domain(
                    OP,
                    format!("block {:?} has {} populations, expected {}", b.block, b.populations.len(), b.block.dim()),
                ));
            }
            if b.populations.iter().any(|p| !(p.is_finite() && *p >= T::zero())) {
                return Err(Error::domain(OP, format!("block {:?} has invalid populations", b.block)));
            }
        }
        if !(truncated_weight.is_finite() && truncated_weight >= -T::lit(1e-12)) {
            return Err(Error::domain(OP, format!("truncated weight {truncated_weight} is invalid")));
        }
        Ok(Self {
            blocks,
            truncated_weight,
        })
    }

    /// A single pure Fock state `|n_h, n_w, n_c⟩`.
    pub fn fock_state(n_h: usize, n_w: usize, n_c: usize) -> Self {
        let block = Block::containing(n_h, n_w, n_c);
        let mut populations = vec![T::zero(); block.dim()];
        populations[n_h] = T::one();
        Self {
            blocks: vec![BlockPopulation { block, populations }],
            truncated_weight: T::zero(),
        }
    }

    pub fn blocks(&self) -> &[BlockPopulation<T>] {
        &self.blocks
    }

    pub fn truncated_weight(&self) -> T {
        self.truncated_weight
    }

    /// Total retained probability.
    pub fn retained_weight(&self) -> T {
        let mut acc = CompensatedSum::new();
        for b in &self.blocks {
            for &p in &b.populations {
                acc.add(p);
            }
        }
        acc.value()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn largest_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.block.dim()).max().unwrap_or(0)
    }

    /// Mean occupations `⟨n_h⟩, ⟨n_w⟩, ⟨n_c⟩` of the retained state.
    pub fn occupations(&self) -> [T; 3] {
        let mut acc = [CompensatedSum::new(); 3];
        for b in &self.blocks {
            for (n, &p) in b.populations.iter().enumerate() {
                for mode in Mode::ALL {
                    acc[mode.index()].add(T::from_count(b.block.occupation(mode, n)) * p);
                }
            }
        }
        acc.map(|a| a.value())
    }

    /// Mean conserved quantities `(N̄, M̄)`.
    pub fn conserved_means(&self) -> (T, T) {
        let mut n_acc = CompensatedSum::new();
        let mut m_acc = CompensatedSum::new();
        for b in &self.blocks {
            let w = b.weight();
            n_acc.add(T::from_count(b.block.n_sum) * w);
            m_acc.add(T::from_count(b.block.m_sum) * w);
        }
        (n_acc.value(), m_acc.value())
    }

    /// Returns a copy with each block's populations replaced by `f(block, populations)`.
    pub(crate) fn map_populations(
        &self,
        mut f: impl FnMut(&BlockPopulation<T>) -> Result<Vec<T>>,
    ) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                Ok(BlockPopulation {
                    block: b.block,
                    populations: f(b)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            blocks,
            truncated_weight: self.truncated_weight,
        })
    }
}

/// Decomposes a product thermal state into invariant blocks.
///
/// Every Fock state whose product population is at least `threshold` is
/// retained together with its whole block; the remaining probability is
/// reported as the truncated weight.
pub fn decompose<T: Real>(init: &ThermalInit<T>, threshold: T) -> Result<BlockEnsemble<T>> {
    if !(threshold > T::zero() && threshold < T::one()) {
        return Err(Error::domain(
            "decompose",
            format!("threshold {threshold} must lie in (0, 1)"),
        ));
    }
    let [nh, nw, nc] = init.occupations();
    let levels = [nh, nw, nc].map(|n| max_retained_level(n, threshold));
    let (Some(kh), Some(kw), Some(kc)) = (levels[0], levels[1], levels[2]) else {
        return Err(Error::EmptyEnsemble {
            threshold: threshold.as_f64(),
        });
    };

    let ph: Vec<T> = (0..=kh).map(|k| thermal_population_unchecked(nh, k)).collect();
    let pw: Vec<T> = (0..=kw).map(|k| thermal_population_unchecked(nw, k)).collect();
    let pc: Vec<T> = (0..=kc).map(|k| thermal_population_unchecked(nc, k)).collect();

    let mut selected = BTreeSet::new();
    for (h, &a) in ph.iter().enumerate() {
        for (w, &b) in pw.iter().enumerate() {
            let ab = a * b;
            if ab < threshold {
                break;
            }
            for (c, &p) in pc.iter().enumerate() {
                if ab * p < threshold {
                    break;
                }
                selected.insert(Block::containing(h, w, c));
            }
        }
    }
    if selected.is_empty() {
        return Err(Error::EmptyEnsemble {
            threshold: threshold.as_f64(),
        });
    }

    let mut retained = CompensatedSum::new();
    let blocks: Vec<BlockPopulation<T>> = selected
        .into_iter()
        .map(|block| {
            let populations: Vec<T> = (0..block.dim())
                .map(|n| {
                    let [h, w, c] = block.occupations(n);
                    thermal_population_unchecked(nh, h)
                        * thermal_population_unchecked(nw, w)
                        * thermal_population_unchecked(nc, c)
                })
                .collect();
            for &p in &populations {
                retained.add(p);
            }
            BlockPopulation { block, populations }
        })
        .collect();
    let truncated_weight = (T::one() - retained.value()).max(T::zero());
    Ok(BlockEnsemble {
        blocks,
        truncated_weight,
    })
}

/// Relative tolerance used by [`cooling_predicate`] to detect stationarity.
pub const STATIONARY_TOLERANCE: f64 = 1e-9;

// n̄_w (n̄_c − n̄_h) − n̄_h (1 + n̄_c): positive for cooling, zero on the
// stationary manifold. Equals n̄_h n̄_w n̄_c times the residual of
// (1/n̄_h + 1) − (1/n̄_w + 1)(1/n̄_c + 1).
fn exchange_balance<T: Real>(init: &ThermalInit<T>) -> T {
    let [h, w, c] = init.occupations();
    w * (c - h) - h * (T::one() + c)
}

/// Whether the product thermal state commutes with the interaction.
///
/// For positive occupations this tests
/// `|(1/n̄_h + 1) − (1/n̄_w + 1)(1/n̄_c + 1)| ≤ tol · (1/n̄_h + 1)`.
/// If any occupation vanishes the state is stationary exactly when no
/// exchange process is populated: `n̄_h = 0` and `n̄_w n̄_c = 0`.
pub fn is_stationary<T: Real>(init: &ThermalInit<T>, tol: T) -> bool {
    let [h, w, c] = init.occupations();
    if h == T::zero() || w == T::zero() || c == T::zero() {
        return exchange_balance(init) == T::zero();
    }
    let lhs = T::one() / h + T::one();
    let rhs = (T::one() / w + T::one()) * (T::one() / c + T::one());
    (lhs - rhs).abs() <= tol * lhs
}

/// Direction of the net energy change of the cold mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoolingVerdict {
    Cooling,
    Heating,
    Stationary,
}

/// Classifies an initial condition by the cooling inequality
/// `n̄_w > n̄_h (1 + n̄_c)/(n̄_c − n̄_h)` with `n̄_c > n̄_h`.
///
/// States on the stationary manifold (tolerance [`STATIONARY_TOLERANCE`])
/// are `Stationary`; `n̄_c ≤ n̄_h` never cools.
pub fn cooling_predicate<T: Real>(init: &ThermalInit<T>) -> CoolingVerdict {
    if is_stationary(init, T::lit(STATIONARY_TOLERANCE)) {
        return CoolingVerdict::Stationary;
    }
    if exchange_balance(init) > T::zero() {
        CoolingVerdict::Cooling
    } else {
        CoolingVerdict::Heating
    }
}

/// Virtual temperature of the hot/work transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VirtualTemperature<T> {
    /// `T_v`, or a signed infinity when the denominator vanishes.
    pub value: T,
    /// Set when `ω_h/T_h = ω_w/T_w` and `T_v` diverges.
    pub divergent: bool,
}

/// `T_v = (ω_h − ω_w)/(ω_h/T_h − ω_w/T_w)` from explicit temperatures.
/// `T_w` may be `+∞`.
pub fn virtual_temperature_from_temperatures<T: Real>(
    temp_h: T,
    temp_w: T,
    modes: &ModeTriple<T>,
) -> Result<VirtualTemperature<T>> {
    const OP: &str = "virtual_temperature";
    if !(temp_h > T::zero() && temp_w > T::zero()) {
        return Err(Error::domain(OP, "temperatures must be positive"));
    }
    let (wh, ww) = (modes.omega(Mode::Hot), modes.omega(Mode::Work));
    if wh == ww {
        return Err(Error::domain(OP, "omega_h must differ from omega_w"));
    }
    let denominator = wh / temp_h - ww / temp_w;
    let numerator = wh - ww;
    if denominator == T::zero() {
        return Ok(VirtualTemperature {
            value: T::infinity().copysign(numerator),
            divergent: true,
        });
    }
    Ok(VirtualTemperature {
        value: numerator / denominator,
        divergent: false,
    })
}

/// Virtual temperature of a thermal initial state. All occupations must be
/// positive so that the temperatures are defined.
pub fn virtual_temperature<T: Real>(
    init: &ThermalInit<T>,
    modes: &ModeTriple<T>,
) -> Result<VirtualTemperature<T>> {
    if init.occupations().iter().any(|n| *n <= T::zero()) {
        return Err(Error::domain(
            "virtual_temperature",
            "all occupations must be positive",
        ));
    }
    let temps = init.temperatures(modes);
    virtual_temperature_from_temperatures(temps[0], temps[1], modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn init(h: f64, w: f64, c: f64) -> ThermalInit<f64> {
        ThermalInit::from_occupations(h, w, c).unwrap()
    }

    #[test]
    fn thermal_population_values() {
        assert_eq!(thermal_population(1.0f64, 0).unwrap(), 0.5);
        assert_eq!(thermal_population(0.0f64, 0).unwrap(), 1.0);
        assert_eq!(thermal_population(0.0f64, 3).unwrap(), 0.0);
        assert!((thermal_population(2.0f64, 1).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!(thermal_population(-1.0f64, 0).is_err());
        let total: f64 = (0..2000).map(|k| thermal_population(3.0f64, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mode_triple_enforces_resonance() {
        assert!(ModeTriple::new(2.0f64, 1.0, 1.0).is_ok());
        assert!(ModeTriple::new(3.0f64, 1.0, 1.0).is_err());
        assert!(ModeTriple::new(1.0f64, 1.0, 0.0).is_err());
        let m = ModeTriple::<f64>::default();
        assert_eq!(m.as_array(), [2.0, 1.0, 1.0]);
        assert_eq!(m.energy(Mode::Cold, 2.0), 2.5);
    }

    #[test]
    fn temperature_conversion_round_trips() {
        let modes = ModeTriple::new(3.0f64, 1.75, 1.25).unwrap();
        let th = init(0.5, 2.5, 2.0);
        let back = ThermalInit::from_temperatures(th.temperatures(&modes), &modes).unwrap();
        for mode in Mode::ALL {
            let (a, b) = (th.nbar(mode), back.nbar(mode));
            assert!((a - b).abs() <= 1e-12 * a, "{mode:?}: {a} vs {b}");
        }
        let vacuum = init(0.0, 1.0, 1.0);
        assert_eq!(vacuum.temperatures(&modes)[0], 0.0);
    }

    #[test]
    fn vacuum_decomposes_to_single_block() {
        let e = decompose(&init(0.0, 0.0, 0.0), 1e-4).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e.blocks()[0].block, Block::new(0, 0));
        assert_eq!(e.blocks()[0].populations, vec![1.0]);
        assert_eq!(e.truncated_weight(), 0.0);
    }

    #[test]
    fn figure_one_decomposition_reproduces_conserved_means() {
        let e = decompose(&init(0.5, 2.5, 2.0), 1e-4).unwrap();
        let tw = e.truncated_weight();
        // Brute-force enumeration of the same per-state rule with block closure.
        assert!((tw - 0.015_150_304_457_889_45).abs() < 1e-12, "truncated weight {tw}");
        assert!((e.retained_weight() + tw - 1.0).abs() < 1e-12);
        let (n_mean, m_mean) = e.conserved_means();
        let max_n = e.blocks().iter().map(|b| b.block.n_sum.max(b.block.m_sum)).max().unwrap() as f64;
        assert!((n_mean - 3.0).abs() <= tw * max_n + 1e-12, "N̄ = {n_mean}");
        assert!((m_mean - 2.5).abs() <= tw * max_n + 1e-12, "M̄ = {m_mean}");
    }

    #[test]
    fn large_threshold_gives_empty_ensemble() {
        let err = decompose(&init(0.5, 2.5, 2.0), 0.9).unwrap_err();
        assert!(matches!(err, Error::EmptyEnsemble { .. }));
        assert!(decompose(&init(0.5, 2.5, 2.0), 0.0).is_err());
    }

    #[test]
    fn populations_are_products_of_thermal_factors() {
        let th = init(1.0, 5.0, 2.0);
        let e = decompose(&th, 1e-4).unwrap();
        for b in e.blocks() {
            for (n, &p) in b.populations.iter().enumerate() {
                let [h, w, c] = b.block.occupations(n);
                let expect = thermal_population(1.0, h).unwrap()
                    * thermal_population(5.0, w).unwrap()
                    * thermal_population(2.0, c).unwrap();
                assert!((p - expect).abs() <= 1e-14 * expect.max(1e-300) + 1e-300);
            }
        }
    }

    #[test]
    fn stationarity_examples() {
        assert!(is_stationary(&init(1.0, 3.0, 2.0), 1e-12));
        assert!(!is_stationary(&init(0.5, 2.5, 2.0), 1e-6));
        // Vacuum hot mode: stationary only when work or cold is also empty.
        assert!(is_stationary(&init(0.0, 0.0, 2.0), 1e-12));
        assert!(is_stationary(&init(0.0, 1.5, 0.0), 1e-12));
        assert!(!is_stationary(&init(0.0, 1.5, 2.0), 1e-12));
        assert!(!is_stationary(&init(1.0, 0.0, 2.0), 1e-12));
    }

    #[test]
    fn cooling_examples() {
        assert_eq!(cooling_predicate(&init(1.0, 5.0, 2.0)), CoolingVerdict::Cooling);
        assert_eq!(cooling_predicate(&init(1.0, 1.0, 2.0)), CoolingVerdict::Heating);
        assert_eq!(cooling_predicate(&init(1.0, 3.0, 2.0)), CoolingVerdict::Stationary);
        // n̄_c <= n̄_h can never cool.
        assert_eq!(cooling_predicate(&init(2.0, 50.0, 2.0)), CoolingVerdict::Heating);
        assert_eq!(cooling_predicate(&init(0.0, 1.0, 1.0)), CoolingVerdict::Cooling);
    }

    #[test]
    fn virtual_temperature_identities() {
        let modes = ModeTriple::<f64>::default();
        let tv = virtual_temperature_from_temperatures(1.7, 1.7, &modes).unwrap();
        assert!((tv.value - 1.7).abs() < 1e-14);
        // (ω_h − ω_w)/(ω_h/T_h) = 1/2.
        let tv = virtual_temperature_from_temperatures(1.0, f64::INFINITY, &modes).unwrap();
        assert!((tv.value - 0.5).abs() < 1e-15);
        // ω_h/T_h = ω_w/T_w.
        let tv = virtual_temperature_from_temperatures(2.0, 1.0, &modes).unwrap();
        assert!(tv.divergent && tv.value == f64::INFINITY);
        assert!(virtual_temperature(&init(0.0, 1.0, 1.0), &modes).is_err());
    }

    #[test]
    fn virtual_temperature_matches_cold_on_stationary_manifold() {
        let modes = ModeTriple::new(2.5f64, 1.5, 1.0).unwrap();
        for i in 1..=12 {
            for j in 1..=12 {
                let h = 0.25 * i as f64;
                let c = 0.4 * j as f64;
                if c <= h {
                    continue;
                }
                let w = h * (1.0 + c) / (c - h);
                let th = init(h, w, c);
                assert!(is_stationary(&th, 1e-10));
                let tv = virtual_temperature(&th, &modes).unwrap().value;
                let tc = th.temperatures(&modes)[2];
                assert!((tv - tc).abs() <= 1e-9 * tc, "{tv} vs {tc}");
                // Off the manifold, T_v < T_c exactly when cooling.
                for w2 in [0.5 * w, 2.0 * w] {
                    let th2 = init(h, w2, c);
                    let tv2 = virtual_temperature(&th2, &modes).unwrap().value;
                    let cooling = cooling_predicate(&th2) == CoolingVerdict::Cooling;
                    assert_eq!(cooling, tv2 >= 0.0 && tv2 < tc, "h={h} w={w2} c={c}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn decompose_conserves_probability(h in 0.0f64..3.0, w in 0.0f64..3.0, c in 0.0f64..3.0, th in 1e-6f64..1e-2) {
            let e = decompose(&init(h, w, c), th).unwrap();
            prop_assert!((e.retained_weight() + e.truncated_weight() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn lower_threshold_keeps_blocks(h in 0.0f64..2.0, w in 0.0f64..3.0, c in 0.0f64..3.0, th in 1e-5f64..1e-2) {
            let coarse = decompose(&init(h, w, c), th).unwrap();
            let fine = decompose(&init(h, w, c), th / 3.0).unwrap();
            let fine_blocks: BTreeSet<Block> = fine.blocks().iter().map(|b| b.block).collect();
            for b in coarse.blocks() {
                prop_assert!(fine_blocks.contains(&b.block));
            }
        }

        #[test]
        fn stationary_verdicts_lie_on_manifold(h in 0.05f64..3.0, c in 0.05f64..4.0, scale in 0.2f64..5.0) {
            let w = scale * h * (1.0 + c) / (c - h).abs().max(0.05);
            let th = init(h, w, c);
            if cooling_predicate(&th) == CoolingVerdict::Stationary {
                prop_assert!(exchange_balance(&th).abs() <= 1e-8 * (h * w * c));
            }
        }
    }
}
