//! Points, hyperplanes and point-to-hyperplane residuals.
//!
//! A hyperplane is `{y : alpha + beta^T y = 0}`. Two canonical scalings are
//! used by the solvers: the vertical gauge (`beta[d-1] = -1`, so the last
//! coordinate is an affine function of the others) and the sup-norm gauge
//! (`max |beta_l| = 1`), under which the l1 residual needs no denominator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualKind {
    Vertical,
    L1,
    L2,
    LInf,
}

impl ResidualKind {
    /// Kinds with an exact optimization encoding.
    pub fn is_solvable(self) -> bool {
        matches!(self, ResidualKind::Vertical | ResidualKind::L1)
    }

    pub fn require_solvable(self) -> Result<()> {
        if self.is_solvable() {
            Ok(())
        } else {
            Err(Error::UnsupportedResidual(self))
        }
    }

    pub fn gauge(self) -> Gauge {
        match self {
            ResidualKind::Vertical => Gauge::Vertical,
            ResidualKind::L1 => Gauge::LInf,
            _ => Gauge::Raw,
        }
    }
}

impl std::str::FromStr for ResidualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vertical" | "v" => Ok(ResidualKind::Vertical),
            "l1" => Ok(ResidualKind::L1),
            "l2" => Ok(ResidualKind::L2),
            "linf" => Ok(ResidualKind::LInf),
            other => Err(Error::BadParam(format!("unknown residual kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    Vertical,
    LInf,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub beta: Vec<f64>,
    pub alpha: f64,
    pub gauge: Gauge,
}

impl Hyperplane {
    pub fn new(beta: Vec<f64>, alpha: f64) -> Result<Self> {
        if beta.iter().all(|&b| b == 0.0) {
            return Err(Error::Gauge("beta is the zero vector".into()));
        }
        if beta.iter().any(|b| !b.is_finite()) || !alpha.is_finite() {
            return Err(Error::Gauge("non-finite coefficients".into()));
        }
        Ok(Hyperplane { beta, alpha, gauge: Gauge::Raw })
    }

    /// `x_d = intercept + sum_l slopes[l] x_l`.
    pub fn vertical(slopes: &[f64], intercept: f64) -> Self {
        let mut beta = slopes.to_vec();
        beta.push(-1.0);
        Hyperplane { beta, alpha: intercept, gauge: Gauge::Vertical }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// `alpha + beta^T x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.alpha + self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn to_vertical(&self) -> Result<Self> {
        let bd = *self.beta.last().expect("nonempty beta");
        if bd == 0.0 {
            return Err(Error::Gauge("vertical residual undefined: beta_d = 0".into()));
        }
        let s = -1.0 / bd;
        let mut beta: Vec<f64> = self.beta.iter().map(|b| b * s).collect();
        *beta.last_mut().unwrap() = -1.0;
        Ok(Hyperplane { beta, alpha: self.alpha * s, gauge: Gauge::Vertical })
    }

    pub fn to_linf(&self) -> Self {
        let m = sup_norm(&self.beta);
        let mut beta: Vec<f64> = self.beta.iter().map(|b| b / m).collect();
        // Pin the largest entry to exactly +-1.
        let l = argmax_abs(&beta);
        beta[l] = beta[l].signum();
        Hyperplane { beta, alpha: self.alpha / m, gauge: Gauge::LInf }
    }

    pub fn to_gauge(&self, g: Gauge) -> Result<Self> {
        match g {
            Gauge::Vertical => self.to_vertical(),
            Gauge::LInf => Ok(self.to_linf()),
            Gauge::Raw => Ok(Hyperplane { gauge: Gauge::Raw, ..self.clone() }),
        }
    }

    /// Slopes and intercept of the vertical form.
    pub fn slopes(&self) -> Result<(Vec<f64>, f64)> {
        let v = self.to_vertical()?;
        let d = v.dim();
        Ok((v.beta[..d - 1].to_vec(), v.alpha))
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.is_finite() && self.beta.iter().all(|b| b.is_finite())
    }

    /// Coefficient-wise closeness after both are put in the same gauge.
    pub fn approx_eq(&self, other: &Hyperplane, tol: f64) -> bool {
        self.beta.len() == other.beta.len()
            && (self.alpha - other.alpha).abs() <= tol
            && self.beta.iter().zip(&other.beta).all(|(a, b)| (a - b).abs() <= tol)
    }
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (l, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = l;
        }
    }
    best
}

/// Dual norm of `beta` matching the residual kind.
pub fn dual_norm(beta: &[f64], kind: ResidualKind) -> f64 {
    match kind {
        ResidualKind::L1 => sup_norm(beta),
        ResidualKind::L2 => beta.iter().map(|b| b * b).sum::<f64>().sqrt(),
        ResidualKind::LInf => beta.iter().map(|b| b.abs()).sum(),
        ResidualKind::Vertical => beta.last().map(|b| b.abs()).unwrap_or(0.0),
    }
}

pub fn residual_vertical(x: &[f64], h: &Hyperplane) -> Result<f64> {
    if h.gauge == Gauge::Vertical {
        let d = h.dim();
        let fit = h.alpha + h.beta[..d - 1].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        return Ok((x[d - 1] - fit).abs());
    }
    let bd = *h.beta.last().unwrap();
    if bd == 0.0 {
        return Err(Error::Gauge("vertical residual undefined: beta_d = 0".into()));
    }
    Ok(h.value(x).abs() / bd.abs())
}

/// `|alpha + beta^T x| / ||beta||_*` for the norm-based kinds.
pub fn residual_norm(x: &[f64], h: &Hyperplane, kind: ResidualKind) -> f64 {
    if kind == ResidualKind::L1 && h.gauge == Gauge::LInf {
        return h.value(x).abs();
    }
    h.value(x).abs() / dual_norm(&h.beta, kind)
}

/// Residual of any kind. A vertical residual against a hyperplane parallel
/// to the last axis is infinite.
pub fn residual(x: &[f64], h: &Hyperplane, kind: ResidualKind) -> f64 {
    match kind {
        ResidualKind::Vertical => residual_vertical(x, h).unwrap_or(f64::INFINITY),
        _ => residual_norm(x, h, kind),
    }
}

pub fn residuals(points: &[Point], h: &Hyperplane, kind: ResidualKind) -> Vec<f64> {
    points.iter().map(|x| residual(x, h, kind)).collect()
}

/// Distance between two points. For `Vertical` it is finite only when the
/// points differ in the last coordinate alone.
pub fn distance(x: &[f64], y: &[f64], kind: ResidualKind) -> f64 {
    let diff = x.iter().zip(y).map(|(a, b)| a - b);
    match kind {
        ResidualKind::L1 => diff.map(f64::abs).sum(),
        ResidualKind::L2 => diff.map(|v| v * v).sum::<f64>().sqrt(),
        ResidualKind::LInf => diff.fold(0.0, |a: f64, v| a.max(v.abs())),
        ResidualKind::Vertical => {
            let d = x.len();
            if x[..d - 1] == y[..d - 1] {
                (x[d - 1] - y[d - 1]).abs()
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Closest point of `h` to `x` in the metric of `kind`.
pub fn project(x: &[f64], h: &Hyperplane, kind: ResidualKind) -> Point {
    let v = h.value(x);
    let d = x.len();
    let mut y = x.to_vec();
    match kind {
        ResidualKind::Vertical => {
            let bd = h.beta[d - 1];
            y[d - 1] -= v / bd;
        }
        ResidualKind::L1 => {
            let l = argmax_abs(&h.beta);
            y[l] -= v / h.beta[l];
        }
        ResidualKind::L2 => {
            let nn: f64 = h.beta.iter().map(|b| b * b).sum();
            for (yl, b) in y.iter_mut().zip(&h.beta) {
                *yl -= v * b / nn;
            }
        }
        ResidualKind::LInf => {
            let n1: f64 = h.beta.iter().map(|b| b.abs()).sum();
            for (yl, b) in y.iter_mut().zip(&h.beta) {
                let s = if *b > 0.0 {
                    1.0
                } else if *b < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                *yl -= v * s / n1;
            }
        }
    }
    y
}

/// Validated point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    points: Vec<Point>,
    d: usize,
}

impl Instance {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let d = points.first().map(|p| p.len()).ok_or_else(|| Error::BadParam("empty point set".into()))?;
        if d < 2 {
            return Err(Error::BadParam(format!("dimension must be at least 2, got {d}")));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::DimensionMismatch { row: i, expected: d, got: p.len() });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::BadParam(format!("point {i} has a non-finite coordinate")));
            }
        }
        Ok(Instance { points, d })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn subset(&self, idx: &[usize]) -> Vec<Point> {
        idx.iter().map(|&i| self.points[i].clone()).collect()
    }

    /// Largest absolute coordinate sum, used for coefficient boxes.
    pub fn max_l1(&self) -> f64 {
        self.points.iter().map(|p| p.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn ranges(&self) -> Vec<(f64, f64)> {
        (0..self.d)
            .map(|l| {
                self.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[l]), hi.max(p[l])))
            })
            .collect()
    }
}

/// A chart of hyperplanes by `d` free parameters `theta`, on which every
/// residual is `|w_i . theta - b_i|`.
///
/// * `Vertical`: `theta = (alpha, beta_1..beta_{d-1})`, `beta_d = -1`.
/// * `L1 { pivot }`: `beta_pivot = 1`, `theta = (alpha, beta_l for l != pivot)`
///   with every slope in `[-1, 1]`. The `d` pivots together cover the
///   sup-norm sphere up to sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Vertical,
    L1 { pivot: usize },
}

impl Chart {
    pub fn all(kind: ResidualKind, d: usize) -> Result<Vec<Chart>> {
        match kind {
            ResidualKind::Vertical => Ok(vec![Chart::Vertical]),
            ResidualKind::L1 => Ok((0..d).rev().map(|pivot| Chart::L1 { pivot }).collect()),
            other => Err(Error::UnsupportedResidual(other)),
        }
    }

    /// `(w, b)` with `residual = |w . theta - b|`.
    pub fn row(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let d = x.len();
        match *self {
            Chart::Vertical => {
                let mut w = Vec::with_capacity(d);
                w.push(1.0);
                w.extend_from_slice(&x[..d - 1]);
                (w, x[d - 1])
            }
            Chart::L1 { pivot } => {
                let mut w = Vec::with_capacity(d);
                w.push(1.0);
                for (l, &v) in x.iter().enumerate() {
                    if l != pivot {
                        w.push(v);
                    }
                }
                (w, -x[pivot])
            }
        }
    }

    /// Slopes must stay within `[-1, 1]` on sup-norm charts.
    pub fn slope_box(&self) -> Option<f64> {
        match self {
            Chart::Vertical => None,
            Chart::L1 { .. } => Some(1.0),
        }
    }

    pub fn hyperplane(&self, theta: &[f64]) -> Hyperplane {
        match *self {
            Chart::Vertical => Hyperplane::vertical(&theta[1..], theta[0]),
            Chart::L1 { pivot } => {
                let d = theta.len();
                let mut beta = Vec::with_capacity(d);
                let mut k = 1;
                for l in 0..d {
                    if l == pivot {
                        beta.push(1.0);
                    } else {
                        beta.push(theta[k].clamp(-1.0, 1.0));
                        k += 1;
                    }
                }
                Hyperplane { beta, alpha: theta[0], gauge: Gauge::LInf }
            }
        }
    }

    /// Residual `|w . theta - b|` computed directly from `x`.
    #[inline]
    pub fn residual(&self, x: &[f64], theta: &[f64]) -> f64 {
        let d = x.len();
        match *self {
            Chart::Vertical => {
                let mut s = theta[0];
                for l in 0..d - 1 {
                    s += theta[l + 1] * x[l];
                }
                (s - x[d - 1]).abs()
            }
            Chart::L1 { pivot } => {
                let mut s = theta[0] + x[pivot];
                let mut k = 1;
                for (l, &v) in x.iter().enumerate() {
                    if l != pivot {
                        s += theta[k] * v;
                        k += 1;
                    }
                }
                s.abs()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vertical_examples() {
        let h = Hyperplane::new(vec![0.7, -1.0], 2.5).unwrap();
        assert!((residual_vertical(&[1.0, 2.0], &h).unwrap() - 1.2).abs() < 1e-12);
        let h = Hyperplane::new(vec![1.0, 1.0, -1.0], 0.0).unwrap();
        assert_eq!(residual_vertical(&[1.0, 2.0, 3.0], &h).unwrap(), 0.0);
        let flat = Hyperplane::new(vec![1.0, 0.0], 0.0).unwrap();
        assert!(matches!(residual_vertical(&[1.0, 1.0], &flat), Err(Error::Gauge(_))));
    }

    #[test]
    fn vertical_matches_line_evaluation() {
        // Line x2 = 1.7 - 0.25 x1, evaluated at x1 = 3.1.
        let h = Hyperplane::new(vec![-0.25, -1.0], 1.7).unwrap();
        let on_line: f64 = 1.7 - 0.25 * 3.1;
        let r = residual_vertical(&[3.1, 0.4], &h).unwrap();
        assert!((r - (0.4 - on_line).abs()).abs() < 1e-12);
        assert!((r - 0.525).abs() < 1e-12);
    }

    #[test]
    fn norm_examples() {
        let h = Hyperplane::new(vec![1.0, -1.0], 0.0).unwrap();
        assert_eq!(residual_norm(&[2.0, 0.0], &h, ResidualKind::L1), 2.0);
        let h = Hyperplane::new(vec![2.0, 1.0], -5.0).unwrap();
        for k in [ResidualKind::L1, ResidualKind::L2, ResidualKind::LInf] {
            assert_eq!(residual_norm(&[2.0, 1.0], &h, k), 0.0);
        }
        // |2 + 1 - 5| / max(2, 1)
        assert!((residual_norm(&[1.0, 1.0], &h, ResidualKind::L1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_projection_moves_along_largest_coefficient() {
        let h = Hyperplane::new(vec![0.5, 1.0], -1.0).unwrap();
        assert_eq!(project(&[0.0, 0.0], &h, ResidualKind::L1), vec![0.0, 1.0]);
        let x = vec![2.0, 0.0];
        assert_eq!(project(&x, &h, ResidualKind::L1), x);
        // Tie: smallest index wins.
        let h = Hyperplane::new(vec![1.0, -1.0], 1.0).unwrap();
        assert_eq!(project(&[0.0, 0.0], &h, ResidualKind::L1), vec![-1.0, 0.0]);
    }

    #[test]
    fn gauge_conversions() {
        let h = Hyperplane::new(vec![2.0, 4.0], -6.0).unwrap();
        let v = h.to_vertical().unwrap();
        assert_eq!(v.beta, vec![-0.5, -1.0]);
        assert_eq!(v.alpha, 1.5);
        let l = h.to_linf();
        assert_eq!(l.beta, vec![0.5, 1.0]);
        assert!(Hyperplane::new(vec![0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn charts_reproduce_residuals() {
        let x = [0.3, -1.2, 2.5];
        let theta = [0.4, 0.9, -0.2];
        for c in Chart::all(ResidualKind::L1, 3).unwrap() {
            let h = c.hyperplane(&theta);
            let (w, b) = c.row(&x);
            let lin: f64 = w.iter().zip(&theta).map(|(a, t)| a * t).sum::<f64>() - b;
            assert!((c.residual(&x, &theta) - lin.abs()).abs() < 1e-12);
            assert!((residual(&x, &h, ResidualKind::L1) - lin.abs()).abs() < 1e-12);
        }
        let c = Chart::Vertical;
        let h = c.hyperplane(&theta);
        assert!((c.residual(&x, &theta) - residual(&x, &h, ResidualKind::Vertical)).abs() < 1e-12);
    }

    #[test]
    fn instance_validation() {
        assert!(Instance::new(vec![]).is_err());
        assert!(Instance::new(vec![vec![1.0]]).is_err());
        assert!(matches!(
            Instance::new(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(Error::DimensionMismatch { row: 1, .. })
        ));
        assert!(Instance::new(vec![vec![1.0, f64::NAN]]).is_err());
    }

    fn coords(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0..10.0f64, d)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn residuals_are_scale_invariant(
            x in coords(3), beta in coords(3), alpha in -5.0..5.0f64, s in 0.01..100.0f64
        ) {
            prop_assume!(sup_norm(&beta) > 1e-3 && beta[2].abs() > 1e-3);
            let h = Hyperplane::new(beta.clone(), alpha).unwrap();
            let g = Hyperplane::new(beta.iter().map(|b| b * s).collect(), alpha * s).unwrap();
            for k in [ResidualKind::Vertical, ResidualKind::L1, ResidualKind::L2, ResidualKind::LInf] {
                let a = residual(&x, &h, k);
                let b = residual(&x, &g, k);
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn residual_is_definitional_quotient(x in coords(2), beta in coords(2), alpha in -5.0..5.0f64) {
            prop_assume!(sup_norm(&beta) > 1e-3);
            let h = Hyperplane::new(beta.clone(), alpha).unwrap();
            for k in [ResidualKind::L1, ResidualKind::L2, ResidualKind::LInf] {
                let expect = (alpha + (beta[0] * x[0] + beta[1] * x[1])).abs() / dual_norm(&beta, k);
                let got = residual_norm(&x, &h, k);
                prop_assert!((got - expect).abs() <= 1e-14 * (1.0 + expect));
            }
        }

        #[test]
        fn projection_lands_on_plane_at_residual_distance(
            x in coords(3), beta in coords(3), alpha in -5.0..5.0f64
        ) {
            prop_assume!(sup_norm(&beta) > 1e-2);
            let h = Hyperplane::new(beta.clone(), alpha).unwrap();
            let nb: f64 = beta.iter().map(|b| b.abs()).sum();
            for k in [ResidualKind::L1, ResidualKind::L2, ResidualKind::LInf] {
                let y = project(&x, &h, k);
                prop_assert!(h.value(&y).abs() <= 1e-9 * (1.0 + nb) * (1.0 + sup_norm(&x)));
                let r = residual_norm(&x, &h, k);
                prop_assert!((distance(&x, &y, k) - r).abs() <= 1e-9 * (1.0 + r));
            }
        }
    }
}
