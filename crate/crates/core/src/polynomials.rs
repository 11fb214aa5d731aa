//! Complex polynomials in a shifted and scaled monomial basis.
//!
//! A polynomial is stored as `Σ a_k t^k` with `t = (z - center) / scale`.
//! The plain monomial basis is the frame `center = 0`, `scale = 1`.  Fits on
//! sets far from the origin lose every digit when written about `0`, so the
//! approximation engine expands about the middle of its pieces instead.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest modulus an evaluation may return before it counts as overflow.
pub const OVERFLOW_LIMIT: f64 = 1e300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("evaluation overflowed at z = {0}")]
    Overflow(C64),
    #[error("malformed polynomial file: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Ascending coefficients in the variable `t = (z - center) / scale`.
/// Trailing zeros are trimmed so the leading coefficient is nonzero unless
/// the polynomial is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<C64>,
    #[serde(default)]
    center: C64,
    #[serde(default = "unit_scale")]
    scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

fn trimmed(mut coeffs: Vec<C64>) -> Vec<C64> {
    assert!(coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()), "non-finite coefficient");
    while coeffs.len() > 1 && coeffs.last() == Some(&C64::new(0.0, 0.0)) {
        coeffs.pop();
    }
    if coeffs.is_empty() {
        coeffs.push(C64::new(0.0, 0.0));
    }
    coeffs
}

impl Polynomial {
    /// Plain monomial coefficients, ascending.
    pub fn new(coeffs: Vec<C64>) -> Self {
        Polynomial { coeffs: trimmed(coeffs), center: C64::new(0.0, 0.0), scale: 1.0 }
    }

    /// Coefficients in `t = (z - center) / scale`.
    pub fn in_frame(coeffs: Vec<C64>, center: C64, scale: f64) -> Self {
        assert!(scale.is_finite() && scale > 0.0, "frame scale must be positive");
        assert!(center.re.is_finite() && center.im.is_finite(), "frame center must be finite");
        Polynomial { coeffs: trimmed(coeffs), center, scale }
    }

    pub fn zero() -> Self {
        Polynomial::new(vec![])
    }

    pub fn constant(c: C64) -> Self {
        Polynomial::new(vec![c])
    }

    /// `alpha z + beta`.
    pub fn linear(alpha: C64, beta: C64) -> Self {
        Polynomial::new(vec![beta, alpha])
    }

    pub fn identity() -> Self {
        Polynomial::linear(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    /// Coefficients in the polynomial's own frame.
    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn center(&self) -> C64 {
        self.center
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_plain(&self) -> bool {
        self.center == C64::new(0.0, 0.0) && self.scale == 1.0
    }

    /// The same polynomial expanded in another frame.
    pub fn reframe(&self, center: C64, scale: f64) -> Polynomial {
        if center == self.center && scale == self.scale {
            return self.clone();
        }
        // Old variable in terms of the new one: t = alpha u + beta.
        let alpha = C64::new(scale / self.scale, 0.0);
        let beta = (center - self.center) / self.scale;
        let mut acc: Vec<C64> = vec![C64::new(0.0, 0.0)];
        for &a in self.coeffs.iter().rev() {
            let mut next = vec![C64::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k + 1] += c * alpha;
                next[k] += c * beta;
            }
            next[0] += a;
            acc = next;
        }
        Polynomial::in_frame(acc, center, scale)
    }

    /// Ascending coefficients about the origin.
    pub fn monomial(&self) -> Polynomial {
        self.reframe(C64::new(0.0, 0.0), 1.0)
    }

    #[inline]
    fn local(&self, z: C64) -> C64 {
        (z - self.center) / self.scale
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == C64::new(0.0, 0.0)
    }

    /// Horner evaluation without an overflow check.
    #[inline]
    pub fn horner(&self, z: C64) -> C64 {
        let z = self.local(z);
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Value and first derivative in one pass.
    #[inline]
    pub fn horner2(&self, z: C64) -> (C64, C64) {
        let z = self.local(z);
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp / self.scale)
    }

    /// Horner evaluation; `Overflow` once the result leaves the finite range.
    pub fn eval(&self, z: C64) -> Result<C64, PolyError> {
        let v = self.horner(z);
        if v.re.is_finite() && v.im.is_finite() && v.norm() <= OVERFLOW_LIMIT {
            Ok(v)
        } else {
            Err(PolyError::Overflow(z))
        }
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::in_frame(vec![], self.center, self.scale);
        }
        let coeffs = self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * (k as f64 / self.scale)).collect();
        Polynomial::in_frame(coeffs, self.center, self.scale)
    }

    /// `s · p`.
    pub fn scaled(&self, s: C64) -> Polynomial {
        Polynomial::in_frame(self.coeffs.iter().map(|&c| c * s).collect(), self.center, self.scale)
    }

    /// Product with the monic factor `(z - a)`, kept in the same frame.
    pub fn mul_linear(&self, a: C64) -> Polynomial {
        // z - a = scale·t + (center - a)
        let lead = C64::new(self.scale, 0.0);
        let off = self.center - a;
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k + 1] += c * lead;
            out[k] += c * off;
        }
        Polynomial::in_frame(out, self.center, self.scale)
    }

    /// Writes the `.poly` text form.  A polynomial outside the plain frame
    /// gets one extra `frame <re> <im> <scale>` line after the header.
    pub fn to_poly_string(&self) -> String {
        let mut s = format!("degree {}\n", self.degree());
        if !self.is_plain() {
            writeln!(s, "frame {:?} {:?} {:?}", self.center.re, self.center.im, self.scale).expect("writing to a String");
        }
        for c in &self.coeffs {
            writeln!(s, "{:?} {:?}", c.re, c.im).expect("writing to a String");
        }
        s
    }

    pub fn from_poly_str(text: &str) -> Result<Polynomial, PolyError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let head = lines.next().ok_or_else(|| PolyError::Parse("empty file".into()))?;
        let d: usize = head
            .strip_prefix("degree")
            .map(str::trim)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PolyError::Parse(format!("bad header {head:?}")))?;
        let parse = |t: &str| t.parse::<f64>().map_err(|e| PolyError::Parse(format!("{t:?}: {e}")));
        let mut lines = lines.peekable();
        let mut center = C64::new(0.0, 0.0);
        let mut scale = 1.0;
        if let Some(rest) = lines.peek().and_then(|l| l.strip_prefix("frame")) {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [re, im, s] = parts.as_slice() else {
                return Err(PolyError::Parse(format!("bad frame line {rest:?}")));
            };
            center = C64::new(parse(re)?, parse(im)?);
            scale = parse(s)?;
            if !(center.re.is_finite() && center.im.is_finite() && scale.is_finite() && scale > 0.0) {
                return Err(PolyError::Parse("frame must be finite with positive scale".into()));
            }
            lines.next();
        }
        let mut coeffs = Vec::with_capacity(d + 1);
        for line in lines {
            let mut parts = line.split_whitespace();
            let (Some(re), Some(im), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(PolyError::Parse(format!("bad coefficient line {line:?}")));
            };
            let c = C64::new(parse(re)?, parse(im)?);
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(PolyError::Parse(format!("non-finite coefficient {line:?}")));
            }
            coeffs.push(c);
        }
        if coeffs.len() != d + 1 {
            return Err(PolyError::Parse(format!("expected {} coefficients, found {}", d + 1, coeffs.len())));
        }
        // Keep the file's degree even if the leading coefficient is zero.
        Ok(Polynomial { coeffs, center, scale })
    }

    pub fn write_poly(&self, path: &Path) -> Result<(), PolyError> {
        std::fs::write(path, self.to_poly_string()).map_err(|e| PolyError::Io(e.to_string()))
    }

    pub fn read_poly(path: &Path) -> Result<Polynomial, PolyError> {
        let text = std::fs::read_to_string(path).map_err(|e| PolyError::Io(e.to_string()))?;
        Polynomial::from_poly_str(&text)
    }
}

// Binary operations return a result in the left operand's frame.
impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let rhs = rhs.reframe(self.center, self.scale);
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let get = |v: &[C64], k: usize| v.get(k).copied().unwrap_or_default();
        Polynomial::in_frame((0..n).map(|k| get(&self.coeffs, k) + get(&rhs.coeffs, k)).collect(), self.center, self.scale)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scaled(C64::new(-1.0, 0.0))
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let rhs = rhs.reframe(self.center, self.scale);
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::in_frame(out, self.center, self.scale)
    }
}

/// `base, f(base), f²(base), …`, stopping early at overflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTable {
    pub base: C64,
    /// `iterates[j] = f^j(base)`, starting with `j = 0`.
    pub iterates: Vec<C64>,
    pub map_stage: usize,
    pub overflowed: bool,
}

impl OrbitTable {
    pub fn last(&self) -> C64 {
        *self.iterates.last().expect("orbit always holds its base point")
    }
}

/// Iterates `p` on `z` up to `n` times.
pub fn orbit(p: &Polynomial, z: C64, n: usize) -> OrbitTable {
    orbit_at_stage(p, z, n, 0)
}

pub fn orbit_at_stage(p: &Polynomial, z: C64, n: usize, stage: usize) -> OrbitTable {
    let mut iterates = Vec::with_capacity(n + 1);
    iterates.push(z);
    let mut w = z;
    let mut overflowed = false;
    for _ in 0..n {
        match p.eval(w) {
            Ok(v) => {
                w = v;
                iterates.push(v);
            }
            Err(_) => {
                overflowed = true;
                break;
            }
        }
    }
    OrbitTable { base: z, iterates, map_stage: stage, overflowed }
}

/// `p^n(z)` or `None` on overflow.
pub fn iterate(p: &Polynomial, z: C64, n: usize) -> Option<C64> {
    let mut w = z;
    for _ in 0..n {
        w = p.eval(w).ok()?;
    }
    Some(w)
}

/// `(p^n(z), (p^n)'(z))` by the chain rule, or `None` on overflow.
pub fn iterate_with_derivative(p: &Polynomial, z: C64, n: usize) -> Option<(C64, C64)> {
    let mut w = z;
    let mut d = C64::new(1.0, 0.0);
    for _ in 0..n {
        let (v, dv) = p.horner2(w);
        if !(v.re.is_finite() && v.im.is_finite()) || v.norm() > OVERFLOW_LIMIT {
            return None;
        }
        d *= dv;
        w = v;
    }
    d.re.is_finite().then_some((w, d))
}

/// Largest `|p(z) - target(z)|` over the samples.
pub fn sup_deviation(p: &Polynomial, target: &Polynomial, samples: &[C64]) -> f64 {
    samples.iter().map(|&z| (p.horner(z) - target.horner(z)).norm()).fold(0.0, f64::max)
}
