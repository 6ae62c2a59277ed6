//! Classical three-wave dynamics.
//!
//! With `α_i = √ι_i e^{iφ_i}` the interaction-picture Hamilton function
//! `g(α_h* α_w α_c + c.c.)` gives
//! `α̇_h = −iα_wα_c`, `α̇_w = −iα_hα_c*`, `α̇_c = −iα_hα_w*`.
//! The sums `I₁ = ι_h + ι_w`, `I₂ = ι_h + ι_c` and
//! `L = ι_hι_wι_c cos²Φ`, `Φ = φ_w + φ_c − φ_h`, are conserved and
//! `ι̇_h² = 4(x−a)(x−b)(x−c)` at `x = ι_h`, so that
//! `ι_h(t) = c + (b−c) sn²(±√(a−c) t + θ₀ | m)` with `m = (b−c)/(a−c)`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{Mode, ModeTriple, ThermalInit};
use crate::scalar::Real;
use crate::specfun::{carlson_rd, ellint_f, ellint_k, ordered_cubic_roots, CubicRoots, EllipticParameter, JacobiSn};
use crate::summation::CompensatedSum;
use crate::trace::{EnergyTrace, TraceMetadata};

/// Action–angle coordinates of the three modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalPoint<T> {
    /// Actions `ι_h, ι_w, ι_c` in quanta.
    pub iota: [T; 3],
    /// Angles in `[0, 2π)`.
    pub phi: [T; 3],
}

impl<T: Real> ClassicalPoint<T> {
    pub fn new(iota: [T; 3], phi: [T; 3]) -> Result<Self> {
        if iota.iter().chain(&phi).any(|v| !v.is_finite()) {
            return Err(Error::domain("ClassicalPoint::new", "coordinates must be finite"));
        }
        if iota.iter().any(|v| *v < T::zero()) {
            return Err(Error::domain("ClassicalPoint::new", "actions must be non-negative"));
        }
        Ok(Self {
            iota,
            phi: phi.map(wrap_angle),
        })
    }

    pub fn from_amplitudes(alpha: [Complex<T>; 3]) -> Self {
        Self {
            iota: alpha.map(|a| a.norm_sqr()),
            phi: alpha.map(|a| wrap_angle(a.arg())),
        }
    }

    pub fn amplitudes(&self) -> [Complex<T>; 3] {
        [0, 1, 2].map(|i| Complex::from_polar(self.iota[i].sqrt(), self.phi[i]))
    }

    /// `Φ = φ_w + φ_c − φ_h` in `[0, 2π)`.
    pub fn total_phase(&self) -> T {
        wrap_angle(self.phi[1] + self.phi[2] - self.phi[0])
    }

    /// Conserved `(I₁, I₂, L)`.
    pub fn invariants(&self) -> (T, T, T) {
        let [h, w, c] = self.iota;
        let cos = self.total_phase().cos();
        (h + w, h + c, h * w * c * cos * cos)
    }
}

fn wrap_angle<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let r = x % tau;
    let r = if r < T::zero() { r + tau } else { r };
    if r >= tau { T::zero() } else { r }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// `ι_h` oscillates between the roots `c` and `b`.
    Oscillating,
    /// Degenerate band `b − c ≈ 0`: `ι_h` stays at its initial value.
    Constant,
    /// At least two actions vanish and the flow is identically zero.
    FixedPoint,
}

// Relative width below which the oscillation band counts as degenerate.
const DEGENERATE_BAND: f64 = 1e-12;

/// Closed-form solution of one classical trajectory.
#[derive(Clone, Copy, Debug)]
pub struct ClassicalTrajectory<T> {
    pub kind: TrajectoryKind,
    pub i1: T,
    pub i2: T,
    pub l: T,
    pub roots: CubicRoots<T>,
    pub m: EllipticParameter<T>,
    pub theta0: T,
    /// `+1` or `−1`, the sign of `ι̇_h(0)`; `+1` at turning points.
    pub sign: T,
    pub iota_h0: T,
    rate: T,
    sn: JacobiSn<T>,
}

pub fn trajectory_from_initial<T: Real>(p: &ClassicalPoint<T>) -> Result<ClassicalTrajectory<T>> {
    let (i1, i2, l) = p.invariants();
    let iota_h0 = p.iota[0];
    let zeros = p.iota.iter().filter(|v| **v == T::zero()).count();
    let mut traj = ClassicalTrajectory {
        kind: TrajectoryKind::FixedPoint,
        i1,
        i2,
        l,
        roots: CubicRoots {
            a: iota_h0,
            b: iota_h0,
            c: iota_h0,
        },
        m: EllipticParameter::clamped(T::zero()),
        theta0: T::zero(),
        sign: T::one(),
        iota_h0,
        rate: T::zero(),
        sn: JacobiSn::new(T::zero())?,
    };
    if zeros >= 2 {
        return Ok(traj);
    }
    let roots = ordered_cubic_roots(i1, i2, l)?;
    traj.roots = roots;
    let CubicRoots { a, b, c } = roots;
    let band = b - c;
    if band <= T::lit(DEGENERATE_BAND) * a.max(T::one()) {
        traj.kind = TrajectoryKind::Constant;
        return Ok(traj);
    }
    let m = EllipticParameter::clamped(band / (a - c));
    let ratio = ((iota_h0 - c) / band).max(T::zero()).min(T::one());
    traj.kind = TrajectoryKind::Oscillating;
    traj.m = m;
    traj.theta0 = ellint_f(ratio.sqrt().asin(), m.value())?;
    // ι̇_h = 2√(ι_hι_wι_c) sin Φ under the equations of motion above.
    traj.sign = if p.total_phase().sin() < T::zero() { -T::one() } else { T::one() };
    traj.rate = (a - c).sqrt();
    traj.sn = JacobiSn::new(m.value())?;
    Ok(traj)
}

impl<T: Real> ClassicalTrajectory<T> {
    pub fn iota_h_at(&self, t: T) -> T {
        match self.kind {
            TrajectoryKind::FixedPoint | TrajectoryKind::Constant => self.iota_h0,
            TrajectoryKind::Oscillating => {
                let s = self.sn.eval(self.sign * self.rate * t + self.theta0);
                self.roots.c + (self.roots.b - self.roots.c) * s * s
            }
        }
    }

    /// `(ι_h, ι_w, ι_c)` at time `t`.
    pub fn actions_at(&self, t: T) -> [T; 3] {
        let h = self.iota_h_at(t);
        [h, self.i1 - h, self.i2 - h]
    }

    /// Period `2K(m)/√(a−c)` of `ι_h`; `None` when it is constant.
    pub fn period(&self) -> Option<T> {
        match self.kind {
            TrajectoryKind::Oscillating => {
                let k = ellint_k(self.m.value()).ok()?;
                Some(T::lit(2.0) * k / self.rate)
            }
            _ => None,
        }
    }

    /// One-period average `c + (b−c)(1 − E/K)/m` of `ι_h`.
    ///
    /// Evaluated as `c + (b−c) R_D(0, 1−m, 1)/(3K)`, which equals the
    /// closed form and stays accurate as `m → 0` where it tends to the
    /// mean of `sin²`.
    pub fn time_average(&self) -> Result<T> {
        match self.kind {
            TrajectoryKind::Oscillating => {
                let m = self.m.value();
                let k = ellint_k(m)?;
                let rd = carlson_rd(T::zero(), T::one() - m, T::one())?;
                Ok(self.roots.c + (self.roots.b - self.roots.c) * rd / (T::lit(3.0) * k))
            }
            _ => Ok(self.iota_h0),
        }
    }
}

/// Draws one phase-space point: uniform angles and exponentially
/// distributed actions with the given means. A zero mean gives a zero
/// action.
pub fn sample_point<T: Real, R: Rng + ?Sized>(rng: &mut R, means: [T; 3]) -> ClassicalPoint<T> {
    let iota = means.map(|mean| {
        let e: f64 = Exp1.sample(rng);
        mean * T::lit(e)
    });
    let phi = means.map(|_| T::lit(rng.random::<f64>() * std::f64::consts::TAU));
    ClassicalPoint {
        iota,
        phi: phi.map(|p| if p >= T::TAU() { T::zero() } else { p }),
    }
}

/// Generator for trajectory `index`: seeded by `seed`, with the index as
/// the ChaCha stream so draws do not depend on scheduling.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Initial point of trajectory `index` for the given seed.
pub fn sample_initial<T: Real>(seed: u64, index: u64, means: [T; 3]) -> Result<ClassicalPoint<T>> {
    if means.iter().any(|m| !(m.is_finite() && *m >= T::zero())) {
        return Err(Error::domain("sample_initial", "means must be finite and non-negative"));
    }
    Ok(sample_point(&mut trajectory_rng(seed, index), means))
}

/// How classical mean actions are matched to the quantum initial state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Matching {
    /// `ῑ_i = n̄_i + 1/2`: equal mean energies.
    MatchEnergies,
    /// `ῑ_i = k_B T_i/ℏω_i = 1/ln(1 + 1/n̄_i)`: equal temperatures.
    MatchTemperatures,
}

impl Matching {
    pub fn label(self) -> &'static str {
        match self {
            Matching::MatchEnergies => "energies",
            Matching::MatchTemperatures => "temperatures",
        }
    }

    pub fn mean_actions<T: Real>(self, init: &ThermalInit<T>) -> [T; 3] {
        init.occupations().map(|n| match self {
            Matching::MatchEnergies => n + T::lit(0.5),
            Matching::MatchTemperatures => {
                if n == T::zero() {
                    T::zero()
                } else {
                    T::one() / (T::one() / n).ln_1p()
                }
            }
        })
    }
}

impl std::str::FromStr for Matching {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energies" | "match-energies" => Ok(Matching::MatchEnergies),
            "temperatures" | "match-temperatures" => Ok(Matching::MatchTemperatures),
            other => Err(Error::domain("Matching::from_str", format!("unknown matching '{other}'"))),
        }
    }
}

/// Trajectories per work item; fixed for reproducible reductions.
const TRAJECTORY_CHUNK: u64 = 4096;

/// Ensemble-averaged classical dynamics.
#[derive(Clone, Debug)]
pub struct MonteCarloResult<T> {
    /// Mean energies `ω_i⟨ι_i(t)⟩` with standard errors. The `nbar`
    /// columns hold the mean actions `⟨ι_i(t)⟩`.
    pub trace: EnergyTrace<T>,
    /// Ensemble mean of each trajectory's infinite-time average energy.
    pub time_average: [T; 3],
    pub time_average_stderr: [T; 3],
    /// Mean conserved sums `⟨I₁⟩, ⟨I₂⟩`, constant in time.
    pub mean_i1: T,
    pub mean_i2: T,
    pub n_traj: u64,
}

#[derive(Clone)]
struct Moments<T> {
    // Per time and mode: Σx and Σx².
    sums: Vec<[CompensatedSum<T>; 6]>,
    // Time averages of ι_h, and the two invariants.
    extra: [CompensatedSum<T>; 4],
}

impl<T: Real> Moments<T> {
    fn new(len: usize) -> Self {
        Self {
            sums: vec![[CompensatedSum::new(); 6]; len],
            extra: [CompensatedSum::new(); 4],
        }
    }

    fn merge(&mut self, other: &Self) {
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            for k in 0..6 {
                a[k].merge(&b[k]);
            }
        }
        for k in 0..4 {
            self.extra[k].merge(&other.extra[k]);
        }
    }
}

/// Thermal Monte-Carlo average of the closed-form trajectories; model tag
/// `classical:<matching>`.
pub fn monte_carlo<T: Real>(
    init: &ThermalInit<T>,
    matching: Matching,
    modes: &ModeTriple<T>,
    times: &[T],
    n_traj: u64,
    seed: u64,
) -> Result<MonteCarloResult<T>> {
    if n_traj == 0 {
        return Err(Error::domain("monte_carlo", "need at least one trajectory"));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::domain("monte_carlo", "times must be finite"));
    }
    let means = matching.mean_actions(init);
    let n_chunks = n_traj.div_ceil(TRAJECTORY_CHUNK);
    let partials = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut acc = Moments::new(times.len());
            let end = ((chunk + 1) * TRAJECTORY_CHUNK).min(n_traj);
            for index in chunk * TRAJECTORY_CHUNK..end {
                let point = sample_point(&mut trajectory_rng(seed, index), means);
                let traj = trajectory_from_initial(&point)?;
                for (slot, &t) in acc.sums.iter_mut().zip(times) {
                    let iota = traj.actions_at(t);
                    for k in 0..3 {
                        slot[k].add(iota[k]);
                        slot[3 + k].add(iota[k] * iota[k]);
                    }
                }
                let avg = traj.time_average()?;
                acc.extra[0].add(avg);
                acc.extra[1].add(avg * avg);
                acc.extra[2].add(traj.i1);
                acc.extra[3].add(traj.i2);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Moments::new(times.len());
    for p in &partials {
        total.merge(p);
    }

    let n = T::lit(n_traj as f64);
    let mean_and_stderr = |sum: T, sq: T| -> (T, T) {
        let mean = sum / n;
        if n_traj < 2 {
            return (mean, T::zero());
        }
        let var = ((sq - sum * mean) / (n - T::one())).max(T::zero());
        (mean, (var / n).sqrt())
    };
    let omega = modes.as_array();
    let mut nbar: [Vec<T>; 3] = Default::default();
    let mut stderr: [Vec<T>; 3] = Default::default();
    for slot in &total.sums {
        for k in 0..3 {
            let (mean, se) = mean_and_stderr(slot[k].value(), slot[3 + k].value());
            nbar[k].push(mean);
            stderr[k].push(omega[k] * se);
        }
    }
    let eps = [0, 1, 2].map(|k| nbar[k].iter().map(|&x| omega[k] * x).collect());
    let mut metadata = TraceMetadata::new(format!("classical:{}", matching.label()), init, modes);
    metadata.seed = Some(seed);
    metadata
        .extra
        .insert("n_traj".into(), serde_json::Value::from(n_traj));
    let trace = EnergyTrace {
        times: times.to_vec(),
        nbar,
        eps,
        stderr: Some(stderr),
        metadata,
    };

    let (avg_h, avg_h_se) = mean_and_stderr(total.extra[0].value(), total.extra[1].value());
    let mean_i1 = total.extra[2].value() / n;
    let mean_i2 = total.extra[3].value() / n;
    let wh = omega[Mode::Hot.index()];
    let ww = omega[Mode::Work.index()];
    let wc = omega[Mode::Cold.index()];
    Ok(MonteCarloResult {
        trace,
        time_average: [wh * avg_h, ww * (mean_i1 - avg_h), wc * (mean_i2 - avg_h)],
        time_average_stderr: [wh * avg_h_se, ww * avg_h_se, wc * avg_h_se],
        mean_i1,
        mean_i2,
        n_traj,
    })
}

/// Step of the Runge–Kutta oracle, in units of 1/g.
pub const ODE_STEP: f64 = 1e-3;

fn amplitude_rhs<T: Real>(a: &[Complex<T>; 3]) -> [Complex<T>; 3] {
    let mi = Complex::new(T::zero(), -T::one());
    [
        mi * a[1] * a[2],
        mi * a[0] * a[2].conj(),
        mi * a[0] * a[1].conj(),
    ]
}

fn rk4_step<T: Real>(a: &[Complex<T>; 3], h: T) -> [Complex<T>; 3] {
    let half = T::lit(0.5);
    let add = |x: &[Complex<T>; 3], k: &[Complex<T>; 3], s: T| [0, 1, 2].map(|i| x[i] + k[i] * s);
    let k1 = amplitude_rhs(a);
    let k2 = amplitude_rhs(&add(a, &k1, h * half));
    let k3 = amplitude_rhs(&add(a, &k2, h * half));
    let k4 = amplitude_rhs(&add(a, &k3, h));
    let sixth = h / T::lit(6.0);
    [0, 1, 2].map(|i| a[i] + (k1[i] + (k2[i] + k3[i]) * T::lit(2.0) + k4[i]) * sixth)
}

/// Integrates the amplitude equations with classical RK4 (step
/// [`ODE_STEP`], shortened to land on each sample) and returns the phase
/// space point at every requested time. Times must be non-negative and
/// non-decreasing.
pub fn ode_oracle<T: Real>(p: &ClassicalPoint<T>, times: &[T]) -> Result<Vec<ClassicalPoint<T>>> {
    if times.iter().any(|t| !(t.is_finite() && *t >= T::zero())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("ode_oracle", "times must be finite, non-negative and sorted"));
    }
    let step = T::lit(ODE_STEP);
    let mut state = p.amplitudes();
    let mut now = T::zero();
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while now < target {
            let h = step.min(target - now);
            state = rk4_step(&state, h);
            // Land exactly on the target once the remainder is rounding.
            now = if target - now - h <= T::epsilon() * target { target } else { now + h };
        }
        out.push(ClassicalPoint::from_amplitudes(state));
    }
    Ok(out)
}
