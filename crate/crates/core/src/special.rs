//! Error function, Gaussian CDF/PDF and the Υ time integrals.
//!
//! `erf`/`erfc` follow the classic SunPro rational approximations (the same
//! ones behind most libm implementations), written once for any [`Scalar`].

#![allow(clippy::excessive_precision)]

use crate::quadrature::{integrate, QuadConfig};
use crate::scalar::Scalar;

const ERX: f64 = 8.45062911510467529297e-01;
const EFX: f64 = 1.28379167095512586316e-01;
const PP: [f64; 5] = [
    1.28379167095512558561e-01,
    -3.25042107247001499370e-01,
    -2.84817495755985104766e-02,
    -5.77027029648944159157e-03,
    -2.37630166566501626084e-05,
];
const QQ: [f64; 5] = [
    3.97917223959155352819e-01,
    6.50222499887672944485e-02,
    5.08130628187576562776e-03,
    1.32494738004321644526e-04,
    -3.96022827877536812320e-06,
];
const PA: [f64; 7] = [
    -2.36211856075265944077e-03,
    4.14856118683748331666e-01,
    -3.72207876035701323847e-01,
    3.18346619901161753674e-01,
    -1.10894694282396677476e-01,
    3.54783043256182359371e-02,
    -2.16637559486879084300e-03,
];
const QA: [f64; 6] = [
    1.06420880400844228286e-01,
    5.40397917702171048937e-01,
    7.18286544141962662868e-02,
    1.26171219808761642112e-01,
    1.36370839120290507362e-02,
    1.19844998467991074170e-02,
];
const RA: [f64; 8] = [
    -9.86494403484714822705e-03,
    -6.93858572707181764372e-01,
    -1.05586262253232909814e+01,
    -6.23753324503260060396e+01,
    -1.62396669462573470355e+02,
    -1.84605092906711035994e+02,
    -8.12874355063065934246e+01,
    -9.81432934416914548592e+00,
];
const SA: [f64; 8] = [
    1.96512716674392571292e+01,
    1.37657754143519042600e+02,
    4.34565877475229228821e+02,
    6.45387271733267880336e+02,
    4.29008140027567833386e+02,
    1.08635005541779435134e+02,
    6.57024977031928170135e+00,
    -6.04244152148580987438e-02,
];
const RB: [f64; 7] = [
    -9.86494292470009928597e-03,
    -7.99283237680523006574e-01,
    -1.77579549177547519889e+01,
    -1.60636384855821916062e+02,
    -6.37566443368389627722e+02,
    -1.02509513161107724954e+03,
    -4.83519191608651397019e+02,
];
const SB: [f64; 7] = [
    3.03380607434824582924e+01,
    3.25792512996573918826e+02,
    1.53672958608443695994e+03,
    3.19985821950859553908e+03,
    2.55305040643316442583e+03,
    4.74528541206955367215e+02,
    -2.24409524465858183362e+01,
];

/// Horner evaluation of `c[0] + c[1] z + ...`.
fn poly<T: Scalar>(z: T, c: &[f64]) -> T {
    c.iter().rev().fold(T::zero(), |acc, &k| acc * z + T::c(k))
}

/// `1 + z * poly(z, c)`, the denominator shape used by every branch.
fn poly1<T: Scalar>(z: T, c: &[f64]) -> T {
    T::one() + z * poly(z, c)
}

/// erfc(x)·x for x ≥ 1.25, i.e. exp(-x² - 0.5625 + R/S).
fn erfc_tail<T: Scalar>(x: T) -> T {
    let s = (x * x).recip();
    let (r, q) = if x < T::c(1.0 / 0.35) { (poly(s, &RA), poly1(s, &SA)) } else { (poly(s, &RB), poly1(s, &SB)) };
    // Split x so that z*z is exact and the large exponent loses no bits.
    let z = (x * T::c(4096.0)).trunc() / T::c(4096.0);
    (-z * z - T::c(0.5625)).exp() * ((z - x) * (z + x) + r / q).exp()
}

/// Error function.
pub fn erf<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let v = if ax < T::c(0.84375) {
        if ax < T::c(3.7252902984619140625e-9) {
            ax + T::c(EFX) * ax
        } else {
            let z = ax * ax;
            ax + ax * (poly(z, &PP) / poly1(z, &QQ))
        }
    } else if ax < T::c(1.25) {
        let s = ax - T::one();
        T::c(ERX) + poly(s, &PA) / poly1(s, &QA)
    } else if ax >= T::c(6.0) {
        T::one()
    } else {
        T::one() - erfc_tail(ax) / ax
    };
    if x.is_sign_negative() {
        -v
    } else {
        v
    }
}

/// Complementary error function, accurate in the far right tail.
pub fn erfc<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    let neg = x.is_sign_negative();
    if ax < T::c(0.84375) {
        let z = ax * ax;
        let y = poly(z, &PP) / poly1(z, &QQ);
        let e = ax + ax * y;
        return if neg { T::one() + e } else { T::one() - e };
    }
    if ax < T::c(1.25) {
        let s = ax - T::one();
        let p = poly(s, &PA) / poly1(s, &QA);
        return if neg { T::one() + T::c(ERX) + p } else { T::one() - T::c(ERX) - p };
    }
    if ax >= T::c(28.0) {
        return if neg { T::c(2.0) } else { T::zero() };
    }
    let tail = erfc_tail(ax) / ax;
    if neg {
        T::c(2.0) - tail
    } else {
        tail
    }
}

/// Standard normal density φ.
pub fn norm_pdf<T: Scalar>(x: T) -> T {
    (-(x * x) * T::c(0.5)).exp() * T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::c(0.5)
}

/// Standard normal distribution function Φ.
pub fn norm_cdf<T: Scalar>(x: T) -> T {
    T::c(0.5) * erfc(-x * T::FRAC_1_SQRT_2())
}

/// Φ(a) − ½ without cancellation near zero.
pub fn norm_cdf_centered<T: Scalar>(a: T) -> T {
    T::c(0.5) * erf(a * T::FRAC_1_SQRT_2())
}

fn inv_sqrt_2pi<T: Scalar>() -> T {
    T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::c(0.5)
}

/// Direct quadrature of Υ(t,x,y,z) = ∫₀ᵗ e^{−xu} Φ(y√u + z/√u) du.
///
/// Integrated in w = √u, which makes the integrand smooth at the origin when
/// `z = 0`. Used as the fallback branch of [`upsilon0`] and as a reference.
pub fn upsilon_integral<T: Scalar>(t: T, x: T, y: T, z: T, cfg: &QuadConfig) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    let two = T::c(2.0);
    let f = |w: T| {
        if w == T::zero() {
            return T::zero();
        }
        two * w * (-x * w * w).exp() * norm_cdf(y * w + z / w)
    };
    let upper = t.sqrt();
    // Splitting at the jump region of Φ(z/w) helps when z is small.
    let split = if z != T::zero() { (z.abs() * T::c(4.0)).min(upper * T::c(0.5)) } else { T::zero() };
    let run = |a: T, b: T| integrate(f, a, b, cfg).map(|r| r.value).unwrap_or_else(|_| T::nan());
    if split > T::zero() {
        run(T::zero(), split) + run(split, upper)
    } else {
        run(T::zero(), upper)
    }
}

fn fallback_cfg(t: f64) -> QuadConfig {
    QuadConfig { abs_tol: 1e-14 * t.max(1.0), max_depth: 30 }
}

/// ∫₀ᵗ Φ(y√u) du, the x → 0 limit of [`upsilon0`].
fn upsilon0_x0<T: Scalar>(t: T, y: T) -> T {
    if y == T::zero() {
        return t * T::c(0.5);
    }
    let a = y.abs() * t.sqrt();
    // ∫₀ᵃ v² φ(v) dv
    let moment = if a < T::c(0.5) {
        let a2 = a * a;
        let mut term = a2 * a; // a^{2k+3} / (2^k k!) at k = 0
        let mut sum = term / T::c(3.0);
        for k in 1..30 {
            let kf = T::c(k as f64);
            term = -term * a2 / (T::c(2.0) * kf);
            let add = term / (T::c(2.0) * kf + T::c(3.0));
            sum = sum + add;
            if add.abs() < T::epsilon() * sum.abs() {
                break;
            }
        }
        sum * inv_sqrt_2pi::<T>()
    } else {
        norm_cdf_centered(a) - a * norm_pdf(a)
    };
    t * norm_cdf(y * t.sqrt()) - y.signum() * moment / (y * y)
}

/// Υ₀(t,x,y) = ∫₀ᵗ e^{−xu} Φ(y√u) du in closed form.
///
/// With c = 2x + y² the closed form needs c > 0 and x ≠ 0. Exactly x = 0 uses
/// the analytic limit; c ≤ 0 and |x|·t < 1e−3 (where the two 1/x terms cancel
/// catastrophically) use direct quadrature.
pub fn upsilon0<T: Scalar>(t: T, x: T, y: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    if y == T::zero() {
        if x == T::zero() {
            return t * T::c(0.5);
        }
        return -(-x * t).exp_m1() / (T::c(2.0) * x);
    }
    if x == T::zero() {
        return upsilon0_x0(t, y);
    }
    let c = T::c(2.0) * x + y * y;
    if c <= T::zero() || (x * t).abs() < T::c(1e-3) {
        let cfg = fallback_cfg(t.to_f64().unwrap_or(1.0));
        return upsilon_integral(t, x, y, T::zero(), &cfg);
    }
    let sc = c.sqrt();
    let st = t.sqrt();
    let em1 = (-x * t).exp_m1();
    let first = y / (x * sc) * norm_cdf_centered(sc * st);
    let second = ((T::one() + em1) * norm_cdf_centered(y * st) + T::c(0.5) * em1) / x;
    first - second
}

/// ∫₀^{√t} e^{−c v²/2} dv / √(2π), equal to (Φ(√(ct)) − ½)/√c for c > 0.
pub fn gaussian_window<T: Scalar>(t: T, c: T) -> T {
    if t <= T::zero() {
        return T::zero();
    }
    if c > T::zero() {
        let sc = c.sqrt();
        return norm_cdf_centered(sc * t.sqrt()) / sc;
    }
    if c == T::zero() {
        return t.sqrt() * inv_sqrt_2pi::<T>();
    }
    let cfg = fallback_cfg(t.to_f64().unwrap_or(1.0));
    integrate(|v: T| (-c * v * v * T::c(0.5)).exp(), T::zero(), t.sqrt(), &cfg)
        .map(|r| r.value * inv_sqrt_2pi::<T>())
        .unwrap_or_else(|_| T::nan())
}

/// Small-z expansion of Υ(t,x,y,z) about z = 0:
/// Υ₀ + 2·window(t,c)·(z − y z²/2).
pub fn upsilon_tilde<T: Scalar>(t: T, x: T, y: T, z: T) -> T {
    let c = T::c(2.0) * x + y * y;
    upsilon0(t, x, y) + T::c(2.0) * gaussian_window(t, c) * (z - y * z * z * T::c(0.5))
}
