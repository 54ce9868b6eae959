use super::{approximate, sup_distance, MultiPath, PathKind, Scheme};
use crate::error::{Error, Result};

/// Antisymmetric matrix-valued path; only the strict upper triangle is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct AreaPath {
    d1: usize,
    upper: Vec<Vec<f64>>,
    n_points: usize,
}

impl AreaPath {
    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    fn pair_index(d1: usize, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < d1);
        i * d1 - i * (i + 1) / 2 + (j - i - 1)
    }

    /// `A^{ij}` at grid index `m`.
    pub fn get(&self, i: usize, j: usize, m: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => 0.0,
            Less => self.upper[Self::pair_index(self.d1, i, j)][m],
            Greater => -self.upper[Self::pair_index(self.d1, j, i)][m],
        }
    }

    /// Max over `i ≠ j` and grid of `|A^{ij} - B^{ij}|`.
    pub fn sup_distance(&self, other: &AreaPath) -> f64 {
        self.upper
            .iter()
            .zip(&other.upper)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Full `d1 × d1` matrix-valued path, entry `(i, j)` stored at `i * d1 + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPath {
    d1: usize,
    entries: Vec<Vec<f64>>,
}

impl MatrixPath {
    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i * self.d1 + j]
    }

    pub fn get(&self, i: usize, j: usize, m: usize) -> f64 {
        self.entries[i * self.d1 + j][m]
    }

    pub fn sup_abs(&self) -> f64 {
        self.entries.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Lévy area `A^{ij}(t_m) = ½ Σ_{l<m} [P^i(t_l) ΔP^j_l - P^j(t_l) ΔP^i_l]`.
pub fn area_process(p: &MultiPath) -> AreaPath {
    let d1 = p.d1();
    let n_points = p.grid().n_points();
    let mut upper = Vec::with_capacity(d1 * d1.saturating_sub(1) / 2);
    for i in 0..d1 {
        for j in (i + 1)..d1 {
            let (pi, pj) = (p.component(i), p.component(j));
            let mut row = Vec::with_capacity(n_points);
            let mut acc = 0.0;
            row.push(acc);
            for l in 0..n_points - 1 {
                acc += 0.5 * (pi[l] * (pj[l + 1] - pj[l]) - pj[l] * (pi[l + 1] - pi[l]));
                row.push(acc);
            }
            upper.push(row);
        }
    }
    AreaPath { d1, upper, n_points }
}

fn check_pair(w: &MultiPath, wn: &MultiPath) -> Result<()> {
    w.check_compatible(wn)?;
    if !wn.kind().is_finite_variation() {
        return Err(Error::InvalidArgument("the approximant must have finite variation".into()));
    }
    Ok(())
}

/// `B_n^{ij}(t) = ∫_0^t (W^i - W_n^i) dW_n^j` as left-point sums, and the
/// first variations `‖B_n^{ij}‖(T)` (row-major `d1 × d1`).
pub fn bn_process(w: &MultiPath, wn: &MultiPath) -> Result<(MatrixPath, Vec<f64>)> {
    check_pair(w, wn)?;
    let d1 = w.d1();
    let n_points = w.grid().n_points();
    let mut entries = Vec::with_capacity(d1 * d1);
    let mut variation = Vec::with_capacity(d1 * d1);
    for i in 0..d1 {
        let (wi, wni) = (w.component(i), wn.component(i));
        for j in 0..d1 {
            let wnj = wn.component(j);
            let mut row = Vec::with_capacity(n_points);
            let (mut acc, mut var) = (0.0, 0.0);
            row.push(acc);
            for l in 0..n_points - 1 {
                let e = wi[l] - wni[l];
                let dn = wnj[l + 1] - wnj[l];
                acc += e * dn;
                var += (e * dn).abs();
                row.push(acc);
            }
            entries.push(row);
            variation.push(var);
        }
    }
    Ok((MatrixPath { d1, entries }, variation))
}

fn sn_from_bn(bn: &MatrixPath, w: &MultiPath, covariation_rate: f64) -> MatrixPath {
    let d1 = bn.d1;
    let grid = w.grid();
    let entries = (0..d1 * d1)
        .map(|idx| {
            let (i, j) = (idx / d1, idx % d1);
            let row = &bn.entries[idx];
            if i == j {
                row.iter().enumerate().map(|(m, b)| b - 0.5 * covariation_rate * grid.t(m)).collect()
            } else {
                row.clone()
            }
        })
        .collect();
    MatrixPath { d1, entries }
}

/// `S_n^{ij}(t) = B_n^{ij}(t) - ½ δ_{ij} t`.
pub fn sn_process(w: &MultiPath, wn: &MultiPath) -> Result<MatrixPath> {
    let (bn, _) = bn_process(w, wn)?;
    Ok(sn_from_bn(&bn, w, 1.0))
}

/// One realization's driver functionals for a single approximation index.
#[derive(Clone, Debug)]
pub struct NoiseBundle {
    pub w: MultiPath,
    pub wn: MultiPath,
    pub n: usize,
    pub area: AreaPath,
    pub area_n: AreaPath,
    pub sn: MatrixPath,
    pub bn: MatrixPath,
    /// `‖B_n^{ij}‖(T)`, row-major.
    pub bn_variation: Vec<f64>,
    /// Max over grid and components of `|W - W_n|`.
    pub sup_w_err: f64,
    /// Max over `i ≠ j` and grid of `|A^{ij} - A_n^{ij}|`.
    pub sup_a_err: f64,
    /// Max over `i, j` and grid of `|S_n^{ij}|`.
    pub sup_s_err: f64,
}

impl NoiseBundle {
    pub fn build(w: MultiPath, scheme: Scheme, n: usize) -> Result<Self> {
        let wn = approximate(&w, scheme, n)?;
        Self::from_paths(w, wn, n)
    }

    pub fn from_paths(w: MultiPath, wn: MultiPath, n: usize) -> Result<Self> {
        let (bn, bn_variation) = bn_process(&w, &wn)?;
        let sn = sn_from_bn(&bn, &w, 1.0);
        let area = area_process(&w);
        let area_n = area_process(&wn);
        let sup_w_err = sup_distance(&w, &wn)?;
        let sup_a_err = area.sup_distance(&area_n);
        let sup_s_err = sn.sup_abs();
        Ok(Self { w, wn, n, area, area_n, sn, bn, bn_variation, sup_w_err, sup_a_err, sup_s_err })
    }

    pub fn d1(&self) -> usize {
        self.w.d1()
    }

    pub fn bn_variation_max(&self) -> f64 {
        self.bn_variation.iter().copied().fold(0.0, f64::max)
    }
}

/// Sup over the grid of the discrete defect in
/// `S^{ij} + S^{ji} = q^{ij}(0) - q^{ij}(t) + R^{ij}(t) + R^{ji}(t)`,
/// with `q^{ij} = (W^i - W_n^i)(W^j - W_n^j)` and `R^{ij} = ∫ (W^i - W_n^i) dW^j`
/// as a left-point sum. Row-major `d1 × d1`.
///
/// The covariation subtracted in `S` is `δ_{ij} t` for a Wiener `W` and zero
/// for a finite-variation `W`.
pub fn sn_identity_residual(bundle: &NoiseBundle) -> Vec<f64> {
    let w = &bundle.w;
    let wn = &bundle.wn;
    let d1 = w.d1();
    let n_points = w.grid().n_points();
    let rate = if w.kind() == PathKind::Wiener { 1.0 } else { 0.0 };
    let sn = sn_from_bn(&bundle.bn, w, rate);
    let err: Vec<Vec<f64>> =
        (0..d1).map(|k| w.component(k).iter().zip(wn.component(k)).map(|(a, b)| a - b).collect()).collect();
    let ito = |i: usize, j: usize| -> Vec<f64> {
        let wj = w.component(j);
        let mut row = Vec::with_capacity(n_points);
        let mut acc = 0.0;
        row.push(acc);
        for l in 0..n_points - 1 {
            acc += err[i][l] * (wj[l + 1] - wj[l]);
            row.push(acc);
        }
        row
    };
    let mut out = vec![0.0; d1 * d1];
    for i in 0..d1 {
        for j in 0..d1 {
            let (rij, rji) = (ito(i, j), ito(j, i));
            let q0 = err[i][0] * err[j][0];
            let mut sup: f64 = 0.0;
            for m in 0..n_points {
                let lhs = sn.get(i, j, m) + sn.get(j, i, m);
                let rhs = q0 - err[i][m] * err[j][m] + rij[m] + rji[m];
                sup = sup.max((lhs - rhs).abs());
            }
            out[i * d1 + j] = sup;
        }
    }
    out
}
