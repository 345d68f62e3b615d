//! Composite Simpson, Gauss-Legendre rules and adaptive Gauss-Kronrod (G7/K15).

use crate::error::{Error, Result};
use crate::scalar::{c, to_f64, Real};

/// Composite Simpson rule with `n_panels` (even) subintervals.
pub fn simpson<T, F>(f: F, a: T, b: T, n_panels: usize) -> Result<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    if n_panels == 0 || n_panels % 2 == 1 {
        return Err(Error::Quadrature {
            reason: format!("Simpson needs an even, positive panel count, got {n_panels}"),
            partial: f64::NAN,
        });
    }
    if a == b {
        return Ok(T::zero());
    }
    let h = (b - a) / c(n_panels as f64);
    let mut odd = T::zero();
    let mut even = T::zero();
    for i in 1..n_panels {
        let x = a + h * c(i as f64);
        if i % 2 == 1 {
            odd = odd + f(x);
        } else {
            even = even + f(x);
        }
    }
    Ok(h / c(3.0) * (f(a) + f(b) + c::<T>(4.0) * odd + c::<T>(2.0) * even))
}

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GlRule<T> {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate<F: Fn(T) -> T>(&self, f: F, a: T, b: T) -> T {
        let half = (b - a) / c(2.0);
        let mid = (a + b) / c(2.0);
        let s = self.nodes.iter().zip(&self.weights).fold(T::zero(), |acc, (&x, &w)| acc + w * f(mid + half * x));
        half * s
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < f64::EPSILON {
        // endpoint derivative n(n+1)/2 * x^(n+1)
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// `order`-point Gauss-Legendre rule computed by Newton iteration on `P_order`.
pub fn gauss_legendre<T: Real>(order: usize) -> Result<GlRule<T>> {
    if order == 0 {
        return Err(Error::Quadrature { reason: "Gauss-Legendre order must be positive".into(), partial: f64::NAN });
    }
    let n = order;
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(GlRule { nodes: nodes.into_iter().map(c).collect(), weights: weights.into_iter().map(c).collect() })
}

// Kronrod abscissae (positive half, last is the centre) and weights; Gauss
// weights belong to the odd-indexed Kronrod nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Maximum bisection depth of [`gauss_kronrod`].
pub const MAX_DEPTH: u32 = 50;

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
    abs: T,
    depth: u32,
}

fn g7k15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, depth: u32) -> Segment<T> {
    let half = (b - a) / c(2.0);
    let mid = (a + b) / c(2.0);
    let fc = f(mid);
    let mut fv = [(T::zero(), T::zero()); 7];
    let mut k = fc * c(WGK[7]);
    let mut g = fc * c(WG[3]);
    let mut abs = fc.abs() * c(WGK[7]);
    for j in 0..7 {
        let dx = half * c(XGK[j]);
        let (f1, f2) = (f(mid - dx), f(mid + dx));
        fv[j] = (f1, f2);
        k = k + (f1 + f2) * c(WGK[j]);
        abs = abs + (f1.abs() + f2.abs()) * c(WGK[j]);
        if j % 2 == 1 {
            g = g + (f1 + f2) * c(WG[j / 2]);
        }
    }
    // QUADPACK error scaling: |K - G| measured against the spread of f
    let centre = k / c(2.0);
    let mut asc = (fc - centre).abs() * c(WGK[7]);
    for (j, &(f1, f2)) in fv.iter().enumerate() {
        asc = asc + ((f1 - centre).abs() + (f2 - centre).abs()) * c(WGK[j]);
    }
    let (asc, abs_seg) = (asc * half.abs(), abs * half.abs());
    let mut error = ((k - g) * half).abs();
    if asc > T::zero() && error > T::zero() {
        error = asc * T::one().min((c::<T>(200.0) * error / asc).powf(c(1.5)));
    }
    if abs_seg > T::min_positive_value() / (c::<T>(50.0) * T::epsilon()) {
        error = error.max(c::<T>(50.0) * T::epsilon() * abs_seg);
    }
    Segment { a, b, value: k * half, error, abs: abs_seg, depth }
}

/// Adaptive G7/K15 quadrature. The interval is mapped to `[-1, 1]` by
/// `x = (b-a)/4 t (3 - t^2) + (a+b)/2`, which flattens integrable endpoint
/// singularities, then the segment with the largest error estimate is bisected
/// until the summed estimate is within `rel_tol` of the integral.
/// Returns `(value, error_estimate)`.
pub fn gauss_kronrod<T, F>(f: F, a: T, b: T, rel_tol: T) -> Result<(T, T)>
where
    T: Real,
    F: Fn(T) -> T,
{
    if a == b {
        return Ok((T::zero(), T::zero()));
    }
    let quarter = (b - a) / c(4.0);
    let f = |t: T| {
        // measured from the nearer endpoint so that x never rounds onto it
        let x = if t < T::zero() {
            a + quarter * (T::one() + t).powi(2) * (c::<T>(2.0) - t)
        } else {
            b - quarter * (T::one() - t).powi(2) * (c::<T>(2.0) + t)
        };
        let y = f(x);
        if y == T::zero() {
            y
        } else {
            y * c::<T>(3.0) * quarter * (T::one() - t * t)
        }
    };
    let mut segs = vec![g7k15(&f, -T::one(), T::one(), 0)];
    let floor = c::<T>(50.0) * T::epsilon();
    loop {
        let value = segs.iter().fold(T::zero(), |s, g| s + g.value);
        let error = segs.iter().fold(T::zero(), |s, g| s + g.error);
        let abs = segs.iter().fold(T::zero(), |s, g| s + g.abs);
        if !value.is_finite() || !error.is_finite() {
            let partial = segs.iter().filter(|g| g.value.is_finite()).fold(T::zero(), |s, g| s + g.value);
            return Err(Error::Quadrature { reason: "integrand is not finite".into(), partial: to_f64(partial) });
        }
        if error <= (rel_tol * value.abs()).max(floor * abs) {
            return Ok((value, error));
        }
        let (worst, _) =
            segs.iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, be), (i, s)| if s.error > be { (i, s.error) } else { (bi, be) });
        let s = segs.swap_remove(worst);
        if s.depth >= MAX_DEPTH {
            return Err(Error::Quadrature {
                reason: format!("subdivision depth {MAX_DEPTH} exceeded"),
                partial: to_f64(value),
            });
        }
        let m = (s.a + s.b) / c(2.0);
        segs.push(g7k15(&f, s.a, m, s.depth + 1));
        segs.push(g7k15(&f, m, s.b, s.depth + 1));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simpson_examples() {
        let v = simpson(|x: f64| x * x, 0.0, 1.0, 2).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        let v = simpson(|x: f64| x * x * x - x, -1.0, 2.0, 4).unwrap();
        assert!((v - 2.25).abs() < 1e-13);
        let v = simpson(f64::sin, 0.0, PI, 128).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
        assert_eq!(simpson(f64::sin, 1.0, 1.0, 8).unwrap(), 0.0);
        assert!(simpson(f64::sin, 0.0, 1.0, 7).is_err());
    }

    #[test]
    fn gauss_legendre_examples() {
        let r = gauss_legendre::<f64>(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);

        let r = gauss_legendre::<f64>(15).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for i in 0..15 {
            assert!((r.nodes[i] + r.nodes[14 - i]).abs() < 1e-14);
            assert!(r.weights[i] > 0.0);
            assert!(legendre(15, r.nodes[i]).0.abs() < 1e-12);
        }
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        let v = r.integrate(|x| x.powi(28), -1.0, 1.0);
        assert!((v - 2.0 / 29.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_matches_tabulated_three_point_rule() {
        let r = gauss_legendre::<f64>(3).unwrap();
        assert!((r.nodes[2] - 0.6f64.sqrt()).abs() < 1e-15);
        assert!((r.weights[0] - 5.0 / 9.0).abs() < 1e-15);
        assert!((r.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_constants_are_consistent() {
        // the 7 Gauss nodes are roots of P_7 and the weights match the rule
        let g7 = gauss_legendre::<f64>(7).unwrap();
        for (j, &x) in XGK.iter().enumerate().filter(|(j, _)| j % 2 == 1) {
            assert!(legendre(7, x).0.abs() < 1e-14, "{x}");
            assert!((g7.weights[3 + (7 - j) / 2] - WG[j / 2]).abs() < 1e-14);
        }
        let total = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        assert!((total - 2.0).abs() < 1e-14);
        let total_g = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((total_g - 2.0).abs() < 1e-14);
        // K15 is exact to degree 22
        let s = g7k15(&|x: f64| x.powi(22), -1.0, 1.0, 0);
        assert!((s.value - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn kronrod_examples() {
        let (v, _) = gauss_kronrod(f64::exp, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-10);
        let (v, _) = gauss_kronrod(|x: f64| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, 1e-8).unwrap();
        assert!((v - 2.0).abs() < 1e-6);
        assert_eq!(gauss_kronrod(f64::exp, 2.0, 2.0, 1e-8).unwrap().0, 0.0);
    }

    #[test]
    fn kronrod_reports_partial_estimate_on_failure() {
        let err = gauss_kronrod(|x: f64| 1.0 / x, 0.0, 1.0, 1e-12).unwrap_err();
        match err {
            Error::Quadrature { partial, .. } => assert!(partial.is_finite() && partial > 0.0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn linearity_and_additivity() {
        let f = |x: f64| (x * 1.3).cos() + x * x;
        let k = 3.7;
        let s1 = simpson(f, 0.0, 2.0, 64).unwrap();
        let s2 = simpson(|x| k * f(x), 0.0, 2.0, 64).unwrap();
        assert!((s2 - k * s1).abs() <= 1e-13 * s2.abs());
        let (k1, _) = gauss_kronrod(f, 0.0, 2.0, 1e-12).unwrap();
        let (k2, _) = gauss_kronrod(|x| k * f(x), 0.0, 2.0, 1e-12).unwrap();
        assert!((k2 - k * k1).abs() <= 1e-13 * k2.abs());
        let (left, _) = gauss_kronrod(f, 0.0, 0.7, 1e-12).unwrap();
        let (right, _) = gauss_kronrod(f, 0.7, 2.0, 1e-12).unwrap();
        assert!((left + right - k1).abs() < 1e-11);
        let g = gauss_legendre::<f64>(15).unwrap();
        let i = g.integrate(f, 0.0, 2.0);
        assert!((g.integrate(|x| k * f(x), 0.0, 2.0) - k * i).abs() <= 1e-13 * i.abs());
    }

    #[test]
    fn works_in_single_precision() {
        let r = gauss_legendre::<f32>(15).unwrap();
        let v = r.integrate(|x| x * x, 0.0f32, 1.0);
        assert!((v - 1.0 / 3.0).abs() < 1e-6);
        let (v, _) = gauss_kronrod(|x: f32| x.exp(), 0.0, 1.0, 1e-6).unwrap();
        assert!((v - (1f32.exp() - 1.0)).abs() < 1e-5);
    }
}
