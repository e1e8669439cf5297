//! Monotone profile functions `g`, their linear-growth extension and the
//! Legendre transform of the antiderivative.

use crate::error::{Error, Result};

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes),
/// continued linearly beyond the end knots.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneTable {
    s: Vec<f64>,
    g: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneTable {
    pub fn new(s: Vec<f64>, g: Vec<f64>) -> Result<MonotoneTable> {
        let n = s.len();
        if n < 2 || g.len() != n {
            return Err(Error::InvalidInput("table needs at least two (s, g) pairs of equal length".into()));
        }
        if s.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("table entry".into()));
        }
        if s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("table abscissae must be strictly increasing".into()));
        }
        if g.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("tabulated g is not monotone".into()));
        }
        let delta: Vec<f64> = (0..n - 1).map(|k| (g[k + 1] - g[k]) / (s[k + 1] - s[k])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            d[k] = if delta[k - 1] * delta[k] <= 0.0 {
                0.0
            } else {
                // Weighted harmonic mean keeps the interpolant monotone.
                let (h0, h1) = (s[k] - s[k - 1], s[k + 1] - s[k]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k])
            };
        }
        Ok(MonotoneTable { s, g, d })
    }

    pub fn knots(&self) -> &[f64] {
        &self.s
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    fn segment(&self, x: f64) -> usize {
        match self.s.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => k.min(self.s.len() - 2),
            Err(k) => k.saturating_sub(1).min(self.s.len() - 2),
        }
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.s.len();
        if x <= self.s[0] {
            return (self.g[0] + self.d[0] * (x - self.s[0]), self.d[0]);
        }
        if x >= self.s[n - 1] {
            return (self.g[n - 1] + self.d[n - 1] * (x - self.s[n - 1]), self.d[n - 1]);
        }
        let k = self.segment(x);
        let hk = self.s[k + 1] - self.s[k];
        let t = (x - self.s[k]) / hk;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let v = h00 * self.g[k] + h10 * hk * self.d[k] + h01 * self.g[k + 1] + h11 * hk * self.d[k + 1];
        let dh00 = 6.0 * t2 - 6.0 * t;
        let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
        let dh01 = -6.0 * t2 + 6.0 * t;
        let dh11 = 3.0 * t2 - 2.0 * t;
        let dv = (dh00 * self.g[k] + dh01 * self.g[k + 1]) / hk + dh10 * self.d[k] + dh11 * self.d[k + 1];
        (v, dv)
    }

    /// Extremes of the derivative over `[a, b]`.
    fn slope_range(&self, a: f64, b: f64) -> (f64, f64) {
        let mut pts = vec![a, b];
        for k in 0..self.s.len() - 1 {
            let (s0, s1) = (self.s[k], self.s[k + 1]);
            if s1 < a || s0 > b {
                continue;
            }
            pts.push(s0.clamp(a, b));
            pts.push(s1.clamp(a, b));
            // The derivative is quadratic in t; add its vertex.
            let hk = s1 - s0;
            let (g0, g1, d0, d1) = (self.g[k], self.g[k + 1], self.d[k], self.d[k + 1]);
            let a2 = 3.0 * (2.0 * (g0 - g1) / hk + d0 + d1);
            let a1 = 2.0 * (3.0 * (g1 - g0) / hk - 2.0 * d0 - d1);
            if a2 != 0.0 {
                let t = -a1 / (2.0 * a2);
                if (0.0..=1.0).contains(&t) {
                    pts.push((s0 + t * hk).clamp(a, b));
                }
            }
        }
        pts.iter().map(|&x| self.eval(x).1).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Linear-growth extension outside `[lo, hi]`: quadratic C1 collars of unit
/// width, then straight lines with slopes `c1` (above) and `c2` (below).
#[derive(Clone, Debug, PartialEq)]
pub struct Extension {
    pub lo: f64,
    pub hi: f64,
    pub c1: f64,
    pub c2: f64,
    g_lo: f64,
    d_lo: f64,
    g_hi: f64,
    d_hi: f64,
}

impl Extension {
    /// Slope outside `[lo, hi]` at distance `t` beyond the upper or lower end.
    fn slope_above(&self, t: f64) -> f64 {
        if t <= COLLAR {
            self.d_hi + (self.c1 - self.d_hi) * t
        } else {
            self.c1
        }
    }

    fn slope_below(&self, t: f64) -> f64 {
        if t <= COLLAR {
            self.d_lo + (self.c2 - self.d_lo) * t
        } else {
            self.c2
        }
    }
}

pub const COLLAR: f64 = 1.0;

/// Nondecreasing profile function `g`.
#[derive(Clone, Debug, PartialEq)]
pub enum GFunc {
    Linear { kappa: f64 },
    Affine { kappa: f64, c: f64 },
    Table(MonotoneTable),
    /// `inner` on `[lo, hi]`, linear growth outside.
    Extended(Box<GFunc>, Extension),
}

impl GFunc {
    pub fn linear(kappa: f64) -> GFunc {
        GFunc::Linear { kappa }
    }

    pub fn affine(kappa: f64, c: f64) -> GFunc {
        GFunc::Affine { kappa, c }
    }

    pub fn constant(c: f64) -> GFunc {
        GFunc::affine(0.0, c)
    }

    pub fn tabulated(s: Vec<f64>, g: Vec<f64>) -> Result<GFunc> {
        Ok(GFunc::Table(MonotoneTable::new(s, g)?))
    }

    pub fn extension(&self) -> Option<&Extension> {
        match self {
            GFunc::Extended(_, e) => Some(e),
            _ => None,
        }
    }

    /// The innermost (unextended) profile.
    pub fn base(&self) -> &GFunc {
        match self {
            GFunc::Extended(inner, _) => inner.base(),
            g => g,
        }
    }

    /// `(g(s), g'(s))`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        match self {
            GFunc::Linear { kappa } => (kappa * s, *kappa),
            GFunc::Affine { kappa, c } => (kappa * s + c, *kappa),
            GFunc::Table(t) => t.eval(s),
            GFunc::Extended(inner, e) => {
                if s > e.hi {
                    let t = s - e.hi;
                    if t <= COLLAR {
                        (e.g_hi + e.d_hi * t + 0.5 * (e.c1 - e.d_hi) * t * t, e.slope_above(t))
                    } else {
                        let top = e.g_hi + e.d_hi + 0.5 * (e.c1 - e.d_hi);
                        (top + e.c1 * (t - COLLAR), e.c1)
                    }
                } else if s < e.lo {
                    let t = e.lo - s;
                    if t <= COLLAR {
                        (e.g_lo - e.d_lo * t - 0.5 * (e.c2 - e.d_lo) * t * t, e.slope_below(t))
                    } else {
                        let bottom = e.g_lo - e.d_lo - 0.5 * (e.c2 - e.d_lo);
                        (bottom - e.c2 * (t - COLLAR), e.c2)
                    }
                } else {
                    inner.eval(s)
                }
            }
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }

    pub fn deriv(&self, s: f64) -> f64 {
        self.eval(s).1
    }

    /// Points where the piecewise polynomial description changes.
    fn breakpoints(&self) -> Vec<f64> {
        let mut b = match self {
            GFunc::Table(t) => t.knots().to_vec(),
            GFunc::Extended(inner, e) => {
                let mut b = inner.breakpoints();
                b.retain(|x| *x > e.lo && *x < e.hi);
                b.extend_from_slice(&[e.lo - COLLAR, e.lo, e.hi, e.hi + COLLAR]);
                b
            }
            _ => vec![],
        };
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup();
        b
    }

    /// `int_x^y g`, exact: every piece is a polynomial of degree <= 3, which
    /// Simpson's rule integrates exactly.
    pub fn integral(&self, x: f64, y: f64) -> f64 {
        if x == y {
            return 0.0;
        }
        if y < x {
            return -self.integral(y, x);
        }
        match self {
            GFunc::Linear { kappa } => return 0.5 * kappa * (y * y - x * x),
            GFunc::Affine { kappa, c } => return 0.5 * kappa * (y * y - x * x) + c * (y - x),
            _ => {}
        }
        let mut pts = vec![x];
        pts.extend(self.breakpoints().into_iter().filter(|b| *b > x && *b < y));
        pts.push(y);
        pts.windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                (b - a) / 6.0 * (self.value(a) + 4.0 * self.value(0.5 * (a + b)) + self.value(b))
            })
            .sum()
    }

    /// `G(s) = int_0^s g`.
    pub fn antideriv(&self, s: f64) -> f64 {
        self.integral(0.0, s)
    }

    /// Extremes of `g'` over `[a, b]`.
    pub fn slope_range(&self, a: f64, b: f64) -> (f64, f64) {
        match self {
            GFunc::Linear { kappa } | GFunc::Affine { kappa, .. } => (*kappa, *kappa),
            GFunc::Table(t) => t.slope_range(a, b),
            GFunc::Extended(inner, e) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut take = |v: f64| {
                    lo = lo.min(v);
                    hi = hi.max(v);
                };
                let (ia, ib) = (a.max(e.lo), b.min(e.hi));
                if ia <= ib {
                    let (l, h) = inner.slope_range(ia, ib);
                    take(l);
                    take(h);
                }
                if b > e.hi {
                    // Collar slopes are monotone in t, so the ends suffice.
                    take(e.slope_above((a - e.hi).max(0.0)));
                    take(e.slope_above(b - e.hi));
                }
                if a < e.lo {
                    take(e.slope_below((e.lo - b).max(0.0)));
                    take(e.slope_below(e.lo - a));
                }
                (lo, hi)
            }
        }
    }

    /// Infimum and supremum of `g'` over the real line.
    pub fn slope_bounds(&self) -> (f64, f64) {
        match self {
            GFunc::Table(t) => t.slope_range(t.knots()[0], *t.knots().last().unwrap()),
            _ => self.slope_range(-f64::MAX, f64::MAX),
        }
    }

    /// Slopes of the two tails (upper, lower); both must be positive for the
    /// Legendre machinery.
    pub fn tail_slopes(&self) -> (f64, f64) {
        match self {
            GFunc::Extended(_, e) => (e.c1, e.c2),
            GFunc::Linear { kappa } | GFunc::Affine { kappa, .. } => (*kappa, *kappa),
            GFunc::Table(t) => (*t.d.last().unwrap(), t.d[0]),
        }
    }

    /// Median knot slope of the base profile, used as a linear surrogate.
    pub fn median_slope(&self) -> f64 {
        match self.base() {
            GFunc::Linear { kappa } | GFunc::Affine { kappa, .. } => *kappa,
            GFunc::Table(t) => {
                let mut d = t.d.clone();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                d[d.len() / 2]
            }
            GFunc::Extended(..) => unreachable!("base is never extended"),
        }
    }
}

/// Extends `g` beyond `[lo, hi]` with collars and linear tails of slopes
/// `c1 = max(g'(hi), 1)` and `c2 = max(g'(lo), 1)`.
pub fn extend_g(g: &GFunc, lo: f64, hi: f64) -> Result<GFunc> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidInput(format!("extension interval [{lo}, {hi}] is invalid")));
    }
    let (dmin, _) = g.slope_range(lo, hi);
    if dmin < -1e-12 {
        return Err(Error::InvalidInput(format!(
            "g is not increasing on [{lo}, {hi}] (min slope {dmin:.3e})"
        )));
    }
    let (g_lo, d_lo) = g.eval(lo);
    let (g_hi, d_hi) = g.eval(hi);
    let (d_lo, d_hi) = (d_lo.max(0.0), d_hi.max(0.0));
    let ext = Extension { lo, hi, c1: d_hi.max(1.0), c2: d_lo.max(1.0), g_lo, d_lo, g_hi, d_hi };
    Ok(GFunc::Extended(Box::new(g.clone()), ext))
}

/// Antiderivative, its Legendre transform and the generalised inverse of an
/// extended profile.
#[derive(Clone, Debug)]
pub struct LegendrePair {
    g: GFunc,
    ghat0: f64,
}

const BISECT_LIMIT: f64 = 1.0e18;

impl LegendrePair {
    pub fn g(&self) -> &GFunc {
        &self.g
    }

    /// `G(tau) = int_0^tau g`.
    pub fn big_g(&self, tau: f64) -> f64 {
        self.g.antideriv(tau)
    }

    /// `f(s) = inf { tau : g(tau) = s }` by bisection.
    pub fn f(&self, s: f64) -> Result<f64> {
        let g = |t: f64| self.g.value(t);
        let mut lo = -1.0;
        let mut hi = 1.0;
        while g(lo) >= s {
            lo *= 2.0;
            if lo.abs() > BISECT_LIMIT {
                return Err(Error::Bracket(format!("no lower bracket for g(tau) = {s}")));
            }
        }
        while g(hi) < s {
            hi *= 2.0;
            if hi > BISECT_LIMIT {
                return Err(Error::Bracket(format!("no upper bracket for g(tau) = {s}")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) >= s {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `Ghat(s) = sup_tau (s tau - G(tau)) = s f(s) - G(f(s))`.
    pub fn ghat(&self, s: f64) -> Result<f64> {
        let t = self.f(s)?;
        Ok(s * t - self.big_g(t))
    }

    /// `Ghat(0)`, found by golden-section minimisation of `G`.
    pub fn ghat0(&self) -> f64 {
        self.ghat0
    }

    /// `F(s) = int_0^s f = Ghat(s) - Ghat(0)`.
    pub fn big_f(&self, s: f64) -> Result<f64> {
        Ok(self.ghat(s)? - self.ghat0)
    }

    /// `Ghat(s)` by adaptive Simpson quadrature of `f` plus `Ghat(0)`, the
    /// independent route used to cross-check [`LegendrePair::ghat`].
    pub fn ghat_quadrature(&self, s: f64, tol: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(self.ghat0);
        }
        let (a, b) = if s > 0.0 { (0.0, s) } else { (s, 0.0) };
        let fa = self.f(a)?;
        let fb = self.f(b)?;
        let m = 0.5 * (a + b);
        let fm = self.f(m)?;
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let v = self.simpson(a, b, fa, fm, fb, whole, tol, 50)?;
        Ok(self.ghat0 + if s > 0.0 { v } else { -v })
    }

    #[allow(clippy::too_many_arguments)]
    fn simpson(&self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (self.f(lm)?, self.f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return Ok(left + right + (left + right - whole) / 15.0);
        }
        Ok(self.simpson(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + self.simpson(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
}

/// Builds the Legendre pair of an extended profile.
pub fn legendre(g: &GFunc) -> Result<LegendrePair> {
    let (c1, c2) = g.tail_slopes();
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::Bracket(format!(
            "g needs linear growth at both ends (tail slopes {c1}, {c2}); extend it first"
        )));
    }
    let gf = g.clone();
    // Bracket the minimiser of G: g changes sign across it.
    let mut lo = -1.0;
    let mut hi = 1.0;
    while gf.value(lo) > 0.0 {
        lo *= 2.0;
        if lo.abs() > BISECT_LIMIT {
            return Err(Error::Bracket("G has no minimiser below".into()));
        }
    }
    while gf.value(hi) < 0.0 {
        hi *= 2.0;
        if hi > BISECT_LIMIT {
            return Err(Error::Bracket("G has no minimiser above".into()));
        }
    }
    let big_g = |t: f64| gf.antideriv(t);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (big_g(x1), big_g(x2));
    for _ in 0..300 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = big_g(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = big_g(x2);
        }
    }
    let min_g = [f1, f2, big_g(a), big_g(b)].into_iter().fold(f64::INFINITY, f64::min);
    Ok(LegendrePair { g: gf, ghat0: -min_g })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_extension_is_identity() {
        let g = extend_g(&GFunc::linear(1.0), 0.0, 1.0).unwrap();
        for i in -300..300 {
            let s = i as f64 * 0.01;
            assert!((g.value(s) - s).abs() < 1e-14);
            assert!((g.deriv(s) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_profile_extension() {
        let g = extend_g(&GFunc::constant(0.0), 0.0, 1.0).unwrap();
        for i in 0..=100 {
            assert_eq!(g.value(i as f64 * 0.01), 0.0);
        }
        // Strictly increasing outside, slope tending to one.
        let mut prev = g.value(-5.0);
        for i in 1..1000 {
            let s = -5.0 + i as f64 * 0.011;
            let v = g.value(s);
            if !(0.0..=1.0).contains(&s) {
                assert!(v > prev || (s > 0.0 && s <= 1.0 + 0.011));
            }
            prev = v;
        }
        assert_eq!(g.deriv(10.0), 1.0);
        assert_eq!(g.deriv(-10.0), 1.0);
        // C1 at the collar knots.
        for k in [-1.0, 0.0, 1.0, 2.0] {
            let e = 1e-7;
            assert!((g.value(k + e) - g.value(k - e)).abs() < 1e-6);
            assert!((g.deriv(k + e) - g.deriv(k - e)).abs() < 1e-6);
        }
    }

    #[test]
    fn antiderivative_matches_numeric() {
        let g = extend_g(&GFunc::tabulated(vec![-1.0, 0.0, 0.5, 2.0], vec![-2.0, -0.5, 0.0, 3.0]).unwrap(), -0.5, 1.5).unwrap();
        let n = 200_000;
        let (a, b) = (-4.0, 5.0);
        let dx = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            s += g.value(a + (i as f64 + 0.5) * dx) * dx;
        }
        assert!((g.integral(a, b) - s).abs() < 1e-7);
    }

    #[test]
    fn legendre_quadratics() {
        let lp = legendre(&GFunc::linear(1.0)).unwrap();
        assert!((lp.ghat(1.0).unwrap() - 0.5).abs() < 1e-14);
        let lp = legendre(&GFunc::linear(2.0)).unwrap();
        for s in [-3.0, -0.2, 0.7, 4.0] {
            let exact = s * s / 4.0;
            assert!((lp.ghat(s).unwrap() - exact).abs() < 1e-12);
            assert!((lp.ghat_quadrature(s, 1e-10).unwrap() - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn table_rejects_non_monotone() {
        assert!(GFunc::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).is_err());
    }
}
