//! Ordered median aggregation of residual vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LpModel, RowId, Sense, VarId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Weber,
    Center,
    KCentrum(usize),
    Centdian(f64),
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderedWeights {
    lambda: Vec<f64>,
    preset: Preset,
}

impl OrderedWeights {
    /// Custom weights; must be finite, nonnegative and non-increasing.
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::BadParam("empty weight vector".into()));
        }
        for (k, &l) in lambda.iter().enumerate() {
            if !l.is_finite() || l < 0.0 || (k > 0 && l > lambda[k - 1]) {
                return Err(Error::NonMonotoneWeights(k));
            }
        }
        Ok(OrderedWeights { lambda, preset: Preset::Custom })
    }

    pub fn preset(kind: Preset, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::BadParam("n must be positive".into()));
        }
        let lambda = match kind {
            Preset::Weber => vec![1.0; n],
            Preset::Center => {
                let mut l = vec![0.0; n];
                l[0] = 1.0;
                l
            }
            Preset::KCentrum(k) => {
                if k == 0 || k > n {
                    return Err(Error::BadParam(format!("k-centrum needs 1 <= k <= n, got k = {k}, n = {n}")));
                }
                (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect()
            }
            Preset::Centdian(rho) => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(Error::BadParam(format!("centdian needs 0 < rho < 1, got {rho}")));
                }
                let mut l = vec![rho; n];
                l[0] = 1.0;
                l
            }
            Preset::Custom => return Err(Error::BadParam("custom weights need explicit values".into())),
        };
        Ok(OrderedWeights { lambda, preset: kind })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn kind(&self) -> &Preset {
        &self.preset
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// `OM(e)`, panicking on length mismatch. See [`om_eval`].
    pub fn eval(&self, e: &[f64]) -> f64 {
        om_eval(self, e).expect("residual vector length must match weights")
    }

    /// Same weights re-targeted to `n` points, for presets. Custom weights
    /// are returned as-is and must already have length `n`.
    pub fn resized(&self, n: usize) -> Result<Self> {
        match self.preset {
            Preset::Custom => {
                if self.lambda.len() != n {
                    return Err(Error::LengthMismatch { expected: n, got: self.lambda.len() });
                }
                Ok(self.clone())
            }
            ref p => Self::preset(p.clone(), n),
        }
    }

    /// Decomposition `lambda = sum_k w_k * (1^k, 0, ...)` with `w_k > 0`,
    /// i.e. OM as a positive combination of k-centrum values.
    pub fn breakpoints(&self) -> Vec<(usize, f64)> {
        let n = self.lambda.len();
        let mut out = Vec::new();
        for k in 1..=n {
            let next = if k < n { self.lambda[k] } else { 0.0 };
            let w = self.lambda[k - 1] - next;
            if w > 0.0 {
                out.push((k, w));
            }
        }
        out
    }
}

/// Sum of the `k` largest entries.
pub fn k_centrum(e: &[f64], k: usize) -> f64 {
    let mut s = e.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s.iter().take(k).sum()
}

/// `sum_i lambda_i e_(i)` with `e` sorted in non-increasing order.
pub fn om_eval(w: &OrderedWeights, e: &[f64]) -> Result<f64> {
    if e.len() != w.lambda.len() {
        return Err(Error::LengthMismatch { expected: w.lambda.len(), got: e.len() });
    }
    let mut idx: Vec<usize> = (0..e.len()).collect();
    idx.sort_by(|&a, &b| e[b].total_cmp(&e[a]).then(a.cmp(&b)));
    Ok(idx.iter().zip(&w.lambda).map(|(&i, l)| l * e[i]).sum())
}

/// Handles of the u/v block inside a larger model.
#[derive(Clone, Debug)]
pub struct UvBlock {
    pub u: Vec<VarId>,
    pub v: Vec<VarId>,
    /// `rows[i][k]` is `u_k + v_i - lambda_k e_i >= 0`.
    pub rows: Vec<Vec<RowId>>,
}

/// Adds free `u`, `v`, objective `sum u + sum v` and rows
/// `u_k + v_i - lambda_k * e_i >= 0`. `e` gives the variables standing for
/// each residual; pass `None` to leave the residual term out (it can then
/// be supplied column by column).
pub fn add_uv_block(model: &mut LpModel, w: &OrderedWeights, e: Option<&[VarId]>) -> Result<UvBlock> {
    let n = w.len();
    let u: Vec<VarId> = (0..n).map(|k| model.add_var(format!("u{k}"), 1.0, f64::NEG_INFINITY, f64::INFINITY)).collect();
    let v: Vec<VarId> = (0..n).map(|i| model.add_var(format!("v{i}"), 1.0, f64::NEG_INFINITY, f64::INFINITY)).collect();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut ri = Vec::with_capacity(n);
        for k in 0..n {
            let mut entries = vec![(u[k], 1.0), (v[i], 1.0)];
            if let Some(e) = e {
                if w.lambda[k] != 0.0 {
                    entries.push((e[i], -w.lambda[k]));
                }
            }
            ri.push(model.add_row(format!("uv_{i}_{k}"), &entries, Sense::Ge, 0.0)?);
        }
        rows.push(ri);
    }
    Ok(UvBlock { u, v, rows })
}

/// OM value through its linear-programming representation
/// `min sum u + sum v s.t. u_k + v_i >= lambda_k e_i`.
pub fn om_lp_value(w: &OrderedWeights, e: &[f64]) -> Result<f64> {
    if e.len() != w.len() {
        return Err(Error::LengthMismatch { expected: w.len(), got: e.len() });
    }
    let mut m = LpModel::new();
    let n = w.len();
    let u: Vec<VarId> = (0..n).map(|k| m.add_var(format!("u{k}"), 1.0, f64::NEG_INFINITY, f64::INFINITY)).collect();
    let v: Vec<VarId> = (0..n).map(|i| m.add_var(format!("v{i}"), 1.0, f64::NEG_INFINITY, f64::INFINITY)).collect();
    for i in 0..n {
        for k in 0..n {
            m.add_row(format!("uv_{i}_{k}"), &[(u[k], 1.0), (v[i], 1.0)], Sense::Ge, w.lambda[k] * e[i])?;
        }
    }
    let s = m.solve()?;
    if !s.is_optimal() {
        return Err(crate::lp::LpError::NumericalFailure(format!("ordered median LP ended {:?}", s.status)).into());
    }
    Ok(s.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn custom(l: &[f64]) -> OrderedWeights {
        OrderedWeights::new(l.to_vec()).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(om_eval(&custom(&[1.0, 1.0, 1.0]), &[3.0, 1.0, 2.0]).unwrap(), 6.0);
        assert_eq!(om_eval(&custom(&[1.0, 0.0, 0.0]), &[3.0, 1.0, 2.0]).unwrap(), 3.0);
        let v = om_eval(&custom(&[1.0, 0.9, 0.9]), &[2.0, 5.0, 1.0]).unwrap();
        assert!((v - 7.7).abs() < 1e-12);
        assert!(matches!(om_eval(&custom(&[1.0]), &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn lp_value_examples() {
        assert!((om_lp_value(&custom(&[1.0, 0.0]), &[2.0, 5.0]).unwrap() - 5.0).abs() < 1e-9);
        assert!((om_lp_value(&custom(&[1.0, 1.0]), &[2.0, 5.0]).unwrap() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn presets() {
        assert_eq!(OrderedWeights::preset(Preset::KCentrum(2), 4).unwrap().lambda(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(OrderedWeights::preset(Preset::Centdian(0.9), 3).unwrap().lambda(), &[1.0, 0.9, 0.9]);
        assert_eq!(OrderedWeights::preset(Preset::Weber, 2).unwrap().lambda(), &[1.0, 1.0]);
        assert_eq!(OrderedWeights::preset(Preset::Center, 3).unwrap().lambda(), &[1.0, 0.0, 0.0]);
        assert!(OrderedWeights::preset(Preset::KCentrum(5), 4).is_err());
        assert!(OrderedWeights::preset(Preset::Centdian(1.0), 4).is_err());
    }

    #[test]
    fn rejects_increasing_or_negative() {
        assert!(matches!(OrderedWeights::new(vec![0.5, 1.0]), Err(Error::NonMonotoneWeights(1))));
        assert!(OrderedWeights::new(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn breakpoints_rebuild_value() {
        let w = custom(&[3.0, 2.0, 2.0, 0.5]);
        let e = [0.3, 4.0, 1.0, 2.5];
        let via: f64 = w.breakpoints().iter().map(|&(k, c)| c * k_centrum(&e, k)).sum();
        assert!((via - w.eval(&e)).abs() < 1e-12);
    }

    fn weights_and_residuals() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..=8).prop_flat_map(|n| {
            (prop::collection::vec(0.0..2.0f64, n), prop::collection::vec(0.0..10.0f64, n)).prop_map(|(mut l, e)| {
                l.sort_by(|a, b| b.total_cmp(a));
                (l, e)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn lp_representation_matches_sort((l, e) in weights_and_residuals()) {
            let w = custom(&l);
            let a = w.eval(&e);
            let b = om_lp_value(&w, &e).unwrap();
            prop_assert!((a - b).abs() <= 1e-7 * (1.0 + a.abs()));
        }

        #[test]
        fn monotone_sublinear_symmetric(
            (l, e) in weights_and_residuals(), bump in prop::collection::vec(0.0..3.0f64, 8), seed in 0u64..1000
        ) {
            let w = custom(&l);
            let n = e.len();
            let t: Vec<f64> = bump[..n].to_vec();
            let up: Vec<f64> = e.iter().zip(&t).map(|(a, b)| a + b).collect();
            prop_assert!(w.eval(&e) <= w.eval(&up) + 1e-12);
            prop_assert!(w.eval(&up) <= w.eval(&e) + w.eval(&t) + 1e-9);
            let mut perm = e.clone();
            let r = (seed as usize) % n.max(1);
            perm.rotate_left(r);
            perm.reverse();
            prop_assert!((w.eval(&perm) - w.eval(&e)).abs() < 1e-12);
        }
    }
}
