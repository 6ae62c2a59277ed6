//! Elliptic integrals, the Jacobi elliptic sine and the ordered real roots of
//! the cubic that governs the classical action dynamics.
//!
//! All functions use the parameter convention `m = k²`, as in
//! Abramowitz & Stegun chapter 17: `K(m) = ∫₀^{π/2} dθ / √(1 − m sin²θ)`.
//!
//! Complete and incomplete integrals go through Carlson's symmetric forms
//! `R_F` and `R_D`, which stay well conditioned as `m → 1`. The elliptic sine
//! uses the descending Landen (arithmetic-geometric mean) scheme.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest parameter passed to [`ellint_k`] by callers that clamp nearly
/// degenerate orbits, `1 − 1e-15`.
pub const MAX_CLAMPED_PARAMETER: f64 = 1.0 - 1e-15;

/// Parameter `m` of the Jacobi elliptic functions, validated to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct EllipticParameter<T>(T);

impl<T: Real> EllipticParameter<T> {
    pub fn new(m: T) -> Result<Self> {
        if !m.is_finite() || m < T::zero() || m > T::one() {
            return Err(Error::domain(
                "EllipticParameter::new",
                format!("m = {m} is outside [0, 1]"),
            ));
        }
        Ok(Self(m))
    }

    /// Builds a parameter from a value that may have drifted slightly outside
    /// `[0, 1]` through rounding, clamping it to `[0, 1 − 1e-15]`.
    pub fn clamped(m: T) -> Self {
        let hi = T::lit(MAX_CLAMPED_PARAMETER);
        Self(m.max(T::zero()).min(hi))
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Ordered roots `a ≥ b ≥ c` of `x³ − (I₁+I₂)x² + I₁I₂x − L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicRoots<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

fn check_finite<T: Real>(op: &'static str, name: &str, x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(op, format!("{name} = {x} is not finite")))
    }
}

// Duplication stops once all relative deviations fall below eps^(1/6); the
// truncated series is then accurate to a few ulps.
fn carlson_tolerance<T: Real>(scale: f64) -> T {
    T::epsilon().powf(T::lit(1.0 / 6.0)) * T::lit(scale)
}

const MAX_DUPLICATIONS: usize = 200;

/// Carlson's symmetric integral `R_F(x, y, z)`.
///
/// Requires non-negative arguments with at most one of them zero.
pub fn carlson_rf<T: Real>(x: T, y: T, z: T) -> Result<T> {
    const OP: &str = "carlson_rf";
    for (name, v) in [("x", x), ("y", y), ("z", z)] {
        check_finite(OP, name, v)?;
        if v < T::zero() {
            return Err(Error::domain(OP, format!("{name} = {v} is negative")));
        }
    }
    let zeros = [x, y, z].iter().filter(|v| **v == T::zero()).count();
    if zeros > 1 {
        return Err(Error::Divergent {
            op: OP,
            reason: "two arguments vanish".into(),
        });
    }

    let tol = carlson_tolerance::<T>(1.0);
    let third = T::one() / T::lit(3.0);
    let quarter = T::lit(0.25);
    let (mut x, mut y, mut z) = (x, y, z);
    for _ in 0..MAX_DUPLICATIONS {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = (x + lambda) * quarter;
        y = (y + lambda) * quarter;
        z = (z + lambda) * quarter;
        let mu = (x + y + z) * third;
        let dx = (mu - x) / mu;
        let dy = (mu - y) / mu;
        let dz = (mu - z) / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()) < tol {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            let series = T::one()
                + (e2 * (T::one() / T::lit(24.0)) - T::lit(0.1) - T::lit(3.0 / 44.0) * e3) * e2
                + e3 / T::lit(14.0);
            return Ok(series / mu.sqrt());
        }
    }
    Err(Error::NoConvergence {
        op: OP,
        iterations: MAX_DUPLICATIONS,
    })
}

/// Carlson's degenerate integral `R_D(x, y, z)`.
///
/// Requires `x, y ≥ 0` with at most one zero and `z > 0`.
pub fn carlson_rd<T: Real>(x: T, y: T, z: T) -> Result<T> {
    const OP: &str = "carlson_rd";
    for (name, v) in [("x", x), ("y", y), ("z", z)] {
        check_finite(OP, name, v)?;
        if v < T::zero() {
            return Err(Error::domain(OP, format!("{name} = {v} is negative")));
        }
    }
    if z == T::zero() || (x == T::zero() && y == T::zero()) {
        return Err(Error::Divergent {
            op: OP,
            reason: "z = 0 or x = y = 0".into(),
        });
    }

    let tol = carlson_tolerance::<T>(0.6);
    let quarter = T::lit(0.25);
    let (c1, c2, c3, c4) = (
        T::lit(3.0 / 14.0),
        T::lit(1.0 / 6.0),
        T::lit(9.0 / 22.0),
        T::lit(3.0 / 26.0),
    );
    let c5 = T::lit(0.25) * c3;
    let c6 = T::lit(1.5) * c4;

    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = T::zero();
    let mut fac = T::one();
    for _ in 0..MAX_DUPLICATIONS {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        sum = sum + fac / (sz * (z + lambda));
        fac = fac * quarter;
        x = (x + lambda) * quarter;
        y = (y + lambda) * quarter;
        z = (z + lambda) * quarter;
        let mu = (x + y + T::lit(3.0) * z) * T::lit(0.2);
        let dx = (mu - x) / mu;
        let dy = (mu - y) / mu;
        let dz = (mu - z) / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()) < tol {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - T::lit(6.0) * eb;
            let ee = ed + ec + ec;
            let series = T::one()
                + ed * (-c1 + c5 * ed - c6 * dz * ee)
                + dz * (c2 * ee + dz * (-c3 * ec + dz * c4 * ea));
            return Ok(T::lit(3.0) * sum + fac * series / (mu * mu.sqrt()));
        }
    }
    Err(Error::NoConvergence {
        op: OP,
        iterations: MAX_DUPLICATIONS,
    })
}

/// Complete elliptic integral of the first kind, `K(m)`, for `0 ≤ m < 1`.
pub fn ellint_k<T: Real>(m: T) -> Result<T> {
    const OP: &str = "ellint_k";
    check_finite(OP, "m", m)?;
    if m < T::zero() {
        return Err(Error::domain(OP, format!("m = {m} is negative")));
    }
    if m >= T::one() {
        return Err(Error::Divergent {
            op: OP,
            reason: format!("K(m) diverges for m = {m} >= 1"),
        });
    }
    carlson_rf(T::zero(), T::one() - m, T::one())
}

/// Complete elliptic integral of the second kind, `E(m)`, for `0 ≤ m ≤ 1`.
pub fn ellint_e<T: Real>(m: T) -> Result<T> {
    const OP: &str = "ellint_e";
    check_finite(OP, "m", m)?;
    if m < T::zero() || m > T::one() {
        return Err(Error::domain(OP, format!("m = {m} is outside [0, 1]")));
    }
    if m == T::one() {
        return Ok(T::one());
    }
    let y = T::one() - m;
    let rf = carlson_rf(T::zero(), y, T::one())?;
    let rd = carlson_rd(T::zero(), y, T::one())?;
    Ok(rf - m / T::lit(3.0) * rd)
}

/// Incomplete elliptic integral of the first kind, `F(φ | m)`, for
/// `|φ| ≤ π/2` and `0 ≤ m < 1`.
pub fn ellint_f<T: Real>(phi: T, m: T) -> Result<T> {
    const OP: &str = "ellint_f";
    check_finite(OP, "phi", phi)?;
    check_finite(OP, "m", m)?;
    // Allow a couple of ulps so that arcsin(1) is accepted.
    let half_pi = T::FRAC_PI_2() * (T::one() + T::lit(4.0) * T::epsilon());
    if phi.abs() > half_pi {
        return Err(Error::domain(OP, format!("|phi| = {} exceeds pi/2", phi.abs())));
    }
    if m < T::zero() || m >= T::one() {
        return Err(Error::domain(OP, format!("m = {m} is outside [0, 1)")));
    }
    if phi == T::zero() {
        return Ok(T::zero());
    }
    let s = phi.sin();
    let c = phi.cos();
    let magnitude = s.abs() * carlson_rf(c * c, T::one() - m * s * s, T::one())?;
    Ok(magnitude.copysign(phi))
}

const MAX_AGM_STEPS: usize = 64;

/// Jacobi elliptic sine `sn(u | m)` for finite `u` and `0 ≤ m ≤ 1`.
pub fn jacobi_sn<T: Real>(u: T, m: T) -> Result<T> {
    check_finite("jacobi_sn", "u", u)?;
    Ok(JacobiSn::new(m)?.eval(u))
}

/// `sn(· | m)` with the descending Landen sequence for a fixed parameter
/// precomputed, for repeated evaluation along one trajectory.
#[derive(Clone, Copy, Debug)]
pub struct JacobiSn<T> {
    m: T,
    steps: usize,
    a: [T; MAX_AGM_STEPS + 1],
    c: [T; MAX_AGM_STEPS + 1],
}

impl<T: Real> JacobiSn<T> {
    pub fn new(m: T) -> Result<Self> {
        const OP: &str = "jacobi_sn";
        check_finite(OP, "m", m)?;
        if m < T::zero() || m > T::one() {
            return Err(Error::domain(OP, format!("m = {m} is outside [0, 1]")));
        }
        let mut a = [T::zero(); MAX_AGM_STEPS + 1];
        let mut c = [T::zero(); MAX_AGM_STEPS + 1];
        let mut n = 0;
        if m > T::zero() && m < T::one() {
            // a_{n+1} = (a+b)/2, b_{n+1} = √(ab), c_{n+1} = (a−b)/2,
            // started from (1, √(1−m), √m).
            a[0] = T::one();
            c[0] = m.sqrt();
            let mut b = (T::one() - m).sqrt();
            while c[n].abs() > T::epsilon() * a[n] {
                if n == MAX_AGM_STEPS {
                    return Err(Error::NoConvergence {
                        op: OP,
                        iterations: MAX_AGM_STEPS,
                    });
                }
                let an = a[n];
                a[n + 1] = (an + b) * T::lit(0.5);
                c[n + 1] = (an - b) * T::lit(0.5);
                b = (an * b).sqrt();
                n += 1;
            }
        }
        Ok(Self { m, steps: n, a, c })
    }

    pub fn parameter(&self) -> T {
        self.m
    }

    /// `sn(u | m)`. Non-finite `u` propagates as NaN.
    pub fn eval(&self, u: T) -> T {
        if self.m == T::zero() {
            return u.sin();
        }
        if self.m == T::one() {
            return u.tanh();
        }
        let n = self.steps;
        let mut phi = T::lit(2.0).powi(n as i32) * self.a[n] * u;
        for k in (1..=n).rev() {
            let ratio = (self.c[k] / self.a[k] * phi.sin()).max(-T::one()).min(T::one());
            phi = (phi + ratio.asin()) * T::lit(0.5);
        }
        phi.sin()
    }
}

/// Real roots of `x³ − (I₁+I₂)x² + I₁I₂x − L`, sorted descending.
///
/// For non-negative sums and `0 ≤ L ≤ max ι_h ι_w ι_c` on the level set the
/// three roots are real; otherwise a domain error is returned. The smallest
/// root is recomputed from `abc = L` so that it keeps full relative accuracy
/// when `L` is small.
pub fn ordered_cubic_roots<T: Real>(i1: T, i2: T, l: T) -> Result<CubicRoots<T>> {
    const OP: &str = "ordered_cubic_roots";
    for (name, v) in [("I1", i1), ("I2", i2), ("L", l)] {
        check_finite(OP, name, v)?;
        if v < T::zero() {
            return Err(Error::domain(OP, format!("{name} = {v} is negative")));
        }
    }
    let (hi, lo) = if i1 >= i2 { (i1, i2) } else { (i2, i1) };
    if l == T::zero() {
        return Ok(CubicRoots {
            a: hi,
            b: lo,
            c: T::zero(),
        });
    }

    let three = T::lit(3.0);
    let s1 = i1 + i2;
    let s2 = i1 * i2;
    let shift = s1 / three;
    // Depressed cubic y³ + p y + q with x = y + shift.
    let p = s2 - s1 * s1 / three;
    let q = -T::lit(2.0) * s1 * s1 * s1 / T::lit(27.0) + s1 * s2 / three - l;

    let scale = s1.max(T::min_positive_value());
    let slack = T::lit(64.0) * T::epsilon();
    if p > slack * scale * scale {
        return Err(Error::domain(OP, "complex roots: depressed cubic is monotone"));
    }
    let roots = if p.abs() <= slack * scale * scale {
        if q.abs() > slack * scale * scale * scale {
            return Err(Error::domain(OP, "complex roots: L is out of range"));
        }
        [shift; 3]
    } else {
        let r = (-p / three).sqrt();
        let mut arg = q / (T::lit(-2.0) * r * r * r);
        let arg_slack = T::lit(1e3) * T::epsilon();
        if arg.abs() > T::one() + arg_slack {
            return Err(Error::domain(
                OP,
                format!("complex roots: L = {l} exceeds the attainable maximum"),
            ));
        }
        arg = arg.max(-T::one()).min(T::one());
        let theta = arg.acos() / three;
        let tau = T::TAU() / three;
        [
            shift + T::lit(2.0) * r * theta.cos(),
            shift + T::lit(2.0) * r * (theta - tau).cos(),
            shift + T::lit(2.0) * r * (theta + tau).cos(),
        ]
    };

    let mut roots = roots.map(|x| polish_root(x, s1, s2, l));
    roots.sort_by(|x, y| y.partial_cmp(x).expect("finite roots"));
    let [a, b, mut c] = roots;
    if a * b > T::zero() {
        c = l / (a * b);
    }
    let c = c.max(T::zero()).min(b);
    Ok(CubicRoots { a, b, c })
}

fn polish_root<T: Real>(x: T, s1: T, s2: T, l: T) -> T {
    let eval = |x: T| ((x - s1) * x + s2) * x - l;
    let deriv = |x: T| (T::lit(3.0) * x - T::lit(2.0) * s1) * x + s2;
    let mut x = x;
    for _ in 0..2 {
        let f = eval(x);
        let df = deriv(x);
        if df == T::zero() {
            break;
        }
        let candidate = x - f / df;
        if eval(candidate).abs() < f.abs() {
            x = candidate;
        } else {
            break;
        }
    }
    x
}
