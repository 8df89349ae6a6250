//! Implicit representation of the full grid tensor.
//!
//! The grid of all quadrature-node outputs has `q_1 * ... * q_d` entries and
//! is never stored. Everything works through CP factors (one `q_k x r`
//! matrix per dimension) and rank-1 tensors (one vector per dimension).
//! Inner products against rank-1 tensors collapse to per-dimension dot
//! products, which is what makes expansion coefficients affordable on grids
//! with 10^20+ entries. [`dense_materialize`] exists for debugging and
//! oracle tests only and is hard-capped on grid size.

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisSet, MultiIndex};
use crate::error::{Error, Result};

/// Cap on `prod(q_k)` for [`dense_materialize`].
pub const DENSE_CAP: u64 = 1_000_000;

/// 1-based grid coordinates of one tensor entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct GridIndex(pub Vec<usize>);

impl GridIndex {
    pub fn new(idx: Vec<usize>) -> Self {
        GridIndex(idx)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn in_bounds(&self, dims: &[usize]) -> bool {
        self.0.len() == dims.len() && self.0.iter().zip(dims).all(|(&i, &q)| i >= 1 && i <= q)
    }
}

/// Rank-`r` CP representation: entry `(i_1..i_d)` is
/// `sum_j prod_k U_k[i_k, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    factors: Vec<DMatrix<f64>>,
}

impl CpFactors {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::ShapeMismatch("need at least one factor".into()));
        }
        let r = factors[0].ncols();
        if r < 1 {
            return Err(Error::ShapeMismatch("rank must be >= 1".into()));
        }
        for (k, f) in factors.iter().enumerate() {
            if f.ncols() != r {
                return Err(Error::ShapeMismatch(format!(
                    "factor {} has {} columns, expected rank {}",
                    k + 1,
                    f.ncols(),
                    r
                )));
            }
            if f.nrows() < 1 {
                return Err(Error::ShapeMismatch(format!("factor {} is empty", k + 1)));
            }
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!(
                    "factor {} contains non-finite entries",
                    k + 1
                )));
            }
        }
        Ok(CpFactors { factors })
    }

    pub fn zeros(dims: &[usize], rank: usize) -> Self {
        CpFactors {
            factors: dims.iter().map(|&q| DMatrix::zeros(q, rank)).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.factors[0].ncols()
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.nrows()).collect()
    }

    pub fn factor(&self, k: usize) -> &DMatrix<f64> {
        &self.factors[k]
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    /// Replace factor `k`, keeping shape.
    pub fn set_factor(&mut self, k: usize, factor: DMatrix<f64>) -> Result<()> {
        if factor.shape() != self.factors[k].shape() {
            return Err(Error::ShapeMismatch(format!(
                "factor {} shape {:?} != {:?}",
                k + 1,
                factor.shape(),
                self.factors[k].shape()
            )));
        }
        self.factors[k] = factor;
        Ok(())
    }

    /// Scale every factor entry by `s` (scales tensor entries by `s^d`).
    pub fn scale_factors(&mut self, s: f64) {
        for f in &mut self.factors {
            *f *= s;
        }
    }

    /// Tensor entry at a 1-based grid index.
    pub fn entry(&self, index: &GridIndex) -> Result<f64> {
        if !index.in_bounds(&self.dims()) {
            return Err(Error::IndexOutOfBounds {
                index: index.0.clone(),
                dims: self.dims(),
            });
        }
        let mut total = 0.0;
        for j in 0..self.rank() {
            let mut prod = 1.0;
            for (k, &i) in index.0.iter().enumerate() {
                prod *= self.factors[k][(i - 1, j)];
            }
            total += prod;
        }
        Ok(total)
    }

    /// Squared Frobenius norm via the factor Gram matrices:
    /// `sum_{j,j'} prod_k (u_k^j . u_k^{j'})`.
    pub fn frobenius_sq(&self) -> f64 {
        let r = self.rank();
        let mut acc = DMatrix::<f64>::from_element(r, r, 1.0);
        for f in &self.factors {
            let gram = f.tr_mul(f);
            acc.component_mul_assign(&gram);
        }
        acc.sum()
    }
}

/// Observation set: distinct grid indices with measured outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    entries: Vec<(GridIndex, f64)>,
}

impl SampleSet {
    pub fn new(entries: Vec<(GridIndex, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidSampleSet("no observations".into()));
        }
        let dim = entries[0].0.dim();
        let mut seen = std::collections::HashSet::with_capacity(entries.len());
        for (idx, value) in &entries {
            if idx.dim() != dim {
                return Err(Error::InvalidSampleSet(
                    "observations have inconsistent dimensions".into(),
                ));
            }
            if !value.is_finite() {
                return Err(Error::InvalidSampleSet(format!(
                    "non-finite observed value at {:?}",
                    idx.0
                )));
            }
            if !seen.insert(idx.clone()) {
                return Err(Error::InvalidSampleSet(format!(
                    "duplicate grid index {:?}",
                    idx.0
                )));
            }
        }
        Ok(SampleSet { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].0.dim()
    }

    pub fn entries(&self) -> &[(GridIndex, f64)] {
        &self.entries
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, v)| *v)
    }

    /// Split into two disjoint sets by entry positions.
    pub fn partition(&self, holdout_positions: &std::collections::HashSet<usize>) -> (Vec<(GridIndex, f64)>, Vec<(GridIndex, f64)>) {
        let mut train = Vec::new();
        let mut holdout = Vec::new();
        for (pos, entry) in self.entries.iter().enumerate() {
            if holdout_positions.contains(&pos) {
                holdout.push(entry.clone());
            } else {
                train.push(entry.clone());
            }
        }
        (train, holdout)
    }
}

/// Outer product of one vector per dimension.
#[derive(Debug, Clone)]
pub struct Rank1Tensor {
    vectors: Vec<DVector<f64>>,
}

impl Rank1Tensor {
    pub fn new(vectors: Vec<DVector<f64>>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::ShapeMismatch("need at least one vector".into()));
        }
        Ok(Rank1Tensor { vectors })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.vectors.iter().map(|v| v.len()).collect()
    }

    pub fn vector(&self, k: usize) -> &DVector<f64> {
        &self.vectors[k]
    }
}

/// Residual `X[i] - y_i` over the observation set, in sample order. The
/// data-fit cost of a recovery is half the squared norm of this vector.
pub fn residual_on_omega(x: &CpFactors, samples: &SampleSet) -> Result<Vec<f64>> {
    samples
        .entries()
        .iter()
        .map(|(idx, y)| Ok(x.entry(idx)? - y))
        .collect()
}

/// Inner product of a CP tensor with a rank-1 tensor, computed factor-wise:
/// `sum_j prod_k (U_k[:, j] . v_k)`. Never expands the grid.
pub fn rank1_inner(x: &CpFactors, t: &Rank1Tensor) -> Result<f64> {
    if x.dims() != t.dims() {
        return Err(Error::ShapeMismatch(format!(
            "cp dims {:?} != rank-1 dims {:?}",
            x.dims(),
            t.dims()
        )));
    }
    let mut total = 0.0;
    for j in 0..x.rank() {
        let mut prod = 1.0;
        for k in 0..x.dim() {
            prod *= x.factor(k).column(j).dot(t.vector(k));
        }
        total += prod;
    }
    Ok(total)
}

/// The rank-1 projection tensor of basis function `alpha`: dimension `k`
/// carries the weighted-table column `w_k[i] * psi_{alpha_k}(node_k[i])`.
pub fn basis_rank1(basis: &BasisSet, alpha: &MultiIndex) -> Result<Rank1Tensor> {
    if !basis.contains(alpha) {
        return Err(Error::InvalidArgument(format!(
            "multi-index {:?} not in basis (d={}, p={})",
            alpha.0,
            basis.dim(),
            basis.order()
        )));
    }
    let vectors = (0..basis.dim())
        .map(|k| {
            let col = basis.weighted_table(k).column(alpha.0[k] as usize);
            DVector::from_column_slice(col.as_slice())
        })
        .collect();
    Rank1Tensor::new(vectors)
}

/// Fully materialized tensor, row-major. Debug/oracle use only.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Entry at a 1-based index.
    pub fn entry(&self, index: &[usize]) -> f64 {
        let mut offset = 0;
        for (k, &i) in index.iter().enumerate() {
            offset = offset * self.dims[k] + (i - 1);
        }
        self.data[offset]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Visit every 1-based grid index of `dims` in row-major order.
pub fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = vec![1; dims.len()];
    loop {
        f(&idx);
        let mut k = dims.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if idx[k] < dims[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = 1;
        }
    }
}

/// Expand CP factors into the full tensor. Errors if the grid exceeds
/// [`DENSE_CAP`] entries.
pub fn dense_materialize(x: &CpFactors) -> Result<DenseTensor> {
    let dims = x.dims();
    let mut size: u64 = 1;
    for &q in &dims {
        size = size.saturating_mul(q as u64);
        if size > DENSE_CAP {
            return Err(Error::GridTooLarge {
                size: dims.iter().map(|q| q.to_string()).collect::<Vec<_>>().join("x"),
                cap: DENSE_CAP,
            });
        }
    }
    let mut data = Vec::with_capacity(size as usize);
    for_each_index(&dims, |idx| {
        let mut total = 0.0;
        for j in 0..x.rank() {
            let mut prod = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                prod *= x.factor(k)[(i - 1, j)];
            }
            total += prod;
        }
        data.push(total);
    });
    Ok(DenseTensor { dims, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, Distribution, Param, ParameterSpace};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn factors_from(cols: Vec<Vec<Vec<f64>>>) -> CpFactors {
        // cols[k][j] is column j of factor k
        let mats = cols
            .into_iter()
            .map(|columns| {
                let rows = columns[0].len();
                DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i])
            })
            .collect();
        CpFactors::new(mats).unwrap()
    }

    fn random_factors(dims: &[usize], rank: usize, seed: u64) -> CpFactors {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mats = dims
            .iter()
            .map(|&q| DMatrix::from_fn(q, rank, |_, _| rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        CpFactors::new(mats).unwrap()
    }

    #[test]
    fn entry_is_the_product_of_factor_entries() {
        let x = factors_from(vec![vec![vec![1.0, 2.0]], vec![vec![3.0, 4.0]]]);
        assert_eq!(x.entry(&GridIndex::new(vec![2, 1])).unwrap(), 6.0);
    }

    #[test]
    fn zero_column_contributes_nothing() {
        let x = factors_from(vec![
            vec![vec![1.0, 2.0], vec![0.0, 0.0]],
            vec![vec![3.0, 4.0], vec![5.0, 6.0]],
        ]);
        assert_eq!(x.entry(&GridIndex::new(vec![2, 1])).unwrap(), 6.0);
    }

    #[test]
    fn entries_add_over_rank_one_terms() {
        let x = factors_from(vec![
            vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            vec![vec![3.0, 4.0], vec![3.0, 4.0]],
        ]);
        assert_eq!(x.entry(&GridIndex::new(vec![2, 1])).unwrap(), 12.0);
    }

    #[test]
    fn entry_rejects_out_of_bounds() {
        let x = factors_from(vec![vec![vec![1.0, 2.0]], vec![vec![3.0, 4.0]]]);
        assert!(x.entry(&GridIndex::new(vec![0, 1])).is_err());
        assert!(x.entry(&GridIndex::new(vec![3, 1])).is_err());
        assert!(x.entry(&GridIndex::new(vec![1])).is_err());
    }

    #[test]
    fn residual_vanishes_on_interpolation() {
        let x = factors_from(vec![vec![vec![1.0, 2.0]], vec![vec![3.0, 4.0]]]);
        let samples = SampleSet::new(vec![
            (GridIndex::new(vec![1, 1]), 3.0),
            (GridIndex::new(vec![2, 2]), 8.0),
        ])
        .unwrap();
        assert_eq!(residual_on_omega(&x, &samples).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn residual_of_zero_factors_is_negated_observations() {
        let x = CpFactors::zeros(&[2, 2], 1);
        let samples = SampleSet::new(vec![
            (GridIndex::new(vec![1, 2]), 5.0),
            (GridIndex::new(vec![2, 1]), -2.0),
        ])
        .unwrap();
        assert_eq!(residual_on_omega(&x, &samples).unwrap(), vec![-5.0, 2.0]);
    }

    #[test]
    fn residual_single_sample() {
        let x = factors_from(vec![vec![vec![1.0, 2.0]], vec![vec![3.0, 4.0]]]);
        let samples = SampleSet::new(vec![(GridIndex::new(vec![2, 1]), 4.0)]).unwrap();
        assert_eq!(residual_on_omega(&x, &samples).unwrap(), vec![2.0]);
    }

    #[test]
    fn rank1_inner_selects_an_entry_under_indicator_vectors() {
        let x = factors_from(vec![vec![vec![1.0, 2.0]], vec![vec![3.0, 4.0]]]);
        let t = Rank1Tensor::new(vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ])
        .unwrap();
        assert_eq!(rank1_inner(&x, &t).unwrap(), 4.0);
    }

    #[test]
    fn rank1_inner_separates_for_rank_one_arguments() {
        let x = factors_from(vec![vec![vec![1.0, 1.0]], vec![vec![1.0, 1.0]]]);
        let t = Rank1Tensor::new(vec![
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![3.0, 4.0]),
        ])
        .unwrap();
        assert_eq!(rank1_inner(&x, &t).unwrap(), 21.0);
    }

    #[test]
    fn rank1_inner_matches_dense_elementwise_sum() {
        let x = random_factors(&[2, 2, 2], 2, 7);
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let t = Rank1Tensor::new(
            (0..3)
                .map(|_| DVector::from_fn(2, |_, _| rng.random::<f64>() * 2.0 - 1.0))
                .collect(),
        )
        .unwrap();
        let dense = dense_materialize(&x).unwrap();
        let mut brute = 0.0;
        for_each_index(&[2, 2, 2], |idx| {
            let mut t_entry = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                t_entry *= t.vector(k)[i - 1];
            }
            brute += dense.entry(idx) * t_entry;
        });
        assert_relative_eq!(rank1_inner(&x, &t).unwrap(), brute, max_relative = 1e-10);
    }

    #[test]
    fn rank1_inner_rejects_shape_mismatch() {
        let x = random_factors(&[2, 3], 1, 1);
        let t = Rank1Tensor::new(vec![
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![1.0, 2.0]),
        ])
        .unwrap();
        assert!(rank1_inner(&x, &t).is_err());
    }

    fn gaussian_space(d: usize, q: usize) -> ParameterSpace {
        ParameterSpace::new(
            (0..d)
                .map(|k| Param {
                    name: format!("x{}", k + 1),
                    dist: Distribution::gaussian(0.0, 1.0),
                    quad_order: q,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn basis_rank1_of_the_constant_index_is_pure_weights() {
        let basis = build_basis(&gaussian_space(2, 3), 2).unwrap();
        let t = basis_rank1(&basis, &MultiIndex(vec![0, 0])).unwrap();
        for k in 0..2 {
            for i in 0..3 {
                assert_relative_eq!(
                    t.vector(k)[i],
                    basis.space().rule(k).weights[i],
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn basis_rank1_linear_hermite_column() {
        // three-point rule: nodes (-sqrt3, 0, sqrt3), weights (1/6, 2/3, 1/6);
        // weighted psi_1 column is w_i * node_i
        let basis = build_basis(&gaussian_space(1, 3), 2).unwrap();
        let t = basis_rank1(&basis, &MultiIndex(vec![1])).unwrap();
        let s3 = 3.0f64.sqrt();
        let expected = [-s3 / 6.0, 0.0, s3 / 6.0];
        for i in 0..3 {
            assert_relative_eq!(t.vector(0)[i], expected[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn sampled_basis_grid_is_discretely_orthonormal() {
        // inner product of the raw psi_alpha grid with the weighted rank-1 of
        // beta reproduces the Kronecker delta
        let basis = build_basis(&gaussian_space(2, 3), 2).unwrap();
        for alpha in basis.indices() {
            let alpha_grid = CpFactors::new(
                (0..2)
                    .map(|k| {
                        let col = basis.node_table(k).column(alpha.0[k] as usize);
                        DMatrix::from_fn(3, 1, |i, _| col[i])
                    })
                    .collect(),
            )
            .unwrap();
            for beta in basis.indices() {
                let w_beta = basis_rank1(&basis, beta).unwrap();
                let dot = rank1_inner(&alpha_grid, &w_beta).unwrap();
                let expected = if alpha == beta { 1.0 } else { 0.0 };
                assert!(
                    (dot - expected).abs() < 1e-10,
                    "<psi_{:?}, W_{:?}> = {dot}",
                    alpha.0,
                    beta.0
                );
            }
        }
    }

    #[test]
    fn basis_rank1_rejects_foreign_indices() {
        let basis = build_basis(&gaussian_space(2, 3), 2).unwrap();
        assert!(basis_rank1(&basis, &MultiIndex(vec![3, 0])).is_err());
        assert!(basis_rank1(&basis, &MultiIndex(vec![1])).is_err());
    }

    #[test]
    fn materialize_small_rank_one() {
        let x = factors_from(vec![vec![vec![1.0, 2.0]], vec![vec![1.0, 1.0]]]);
        let dense = dense_materialize(&x).unwrap();
        assert_eq!(dense.data(), &[1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn materialize_zero_factors() {
        let dense = dense_materialize(&CpFactors::zeros(&[2, 3], 2)).unwrap();
        assert!(dense.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn materialize_matches_entry_everywhere() {
        let x = random_factors(&[3, 2, 4], 3, 42);
        let dense = dense_materialize(&x).unwrap();
        for_each_index(&[3, 2, 4], |idx| {
            let direct = x.entry(&GridIndex::new(idx.to_vec())).unwrap();
            assert_relative_eq!(dense.entry(idx), direct, epsilon = 1e-14);
        });
    }

    #[test]
    fn materialize_rejects_huge_grids() {
        let x = CpFactors::zeros(&[64, 64, 64, 64], 1);
        assert!(matches!(
            dense_materialize(&x),
            Err(Error::GridTooLarge { .. })
        ));
    }

    #[test]
    fn frobenius_identity_factorwise_vs_dense() {
        for seed in 0..5 {
            let x = random_factors(&[3, 4, 2], 2, seed);
            let dense = dense_materialize(&x).unwrap();
            assert_relative_eq!(
                x.frobenius_sq().sqrt(),
                dense.frobenius_norm(),
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn residual_is_linear_in_a_single_factor() {
        // directional derivative by finite differences is constant in the
        // step size when all other factors are fixed
        let x = random_factors(&[3, 3, 3], 2, 11);
        let samples = SampleSet::new(vec![
            (GridIndex::new(vec![1, 2, 3]), 0.4),
            (GridIndex::new(vec![3, 3, 1]), -1.0),
            (GridIndex::new(vec![2, 1, 2]), 2.0),
        ])
        .unwrap();
        let direction = random_factors(&[3, 3, 3], 2, 12);
        let base = residual_on_omega(&x, &samples).unwrap();
        let mut derivs: Vec<Vec<f64>> = Vec::new();
        for &h in &[1e-3, 1e-5] {
            let mut perturbed = x.clone();
            let moved = perturbed.factor(1) + direction.factor(1) * h;
            perturbed.set_factor(1, moved).unwrap();
            let res = residual_on_omega(&perturbed, &samples).unwrap();
            derivs.push(
                res.iter()
                    .zip(&base)
                    .map(|(r, b)| (r - b) / h)
                    .collect::<Vec<f64>>(),
            );
        }
        for (a, b) in derivs[0].iter().zip(&derivs[1]) {
            assert_relative_eq!(a, b, epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn residual_ignores_entries_outside_omega() {
        let x = random_factors(&[2, 2], 1, 3);
        let samples = SampleSet::new(vec![(GridIndex::new(vec![1, 1]), 1.0)]).unwrap();
        // perturbation supported on row 2 of dimension 1 only touches
        // unobserved entries
        let mut perturbed = x.clone();
        let mut f0 = perturbed.factor(0).clone();
        f0[(1, 0)] += 10.0;
        perturbed.set_factor(0, f0).unwrap();
        assert_eq!(
            residual_on_omega(&x, &samples).unwrap(),
            residual_on_omega(&perturbed, &samples).unwrap()
        );
    }

    #[test]
    fn sample_sets_reject_duplicates_and_non_finite() {
        assert!(SampleSet::new(vec![]).is_err());
        assert!(SampleSet::new(vec![
            (GridIndex::new(vec![1, 1]), 1.0),
            (GridIndex::new(vec![1, 1]), 2.0),
        ])
        .is_err());
        assert!(SampleSet::new(vec![(GridIndex::new(vec![1]), f64::NAN)]).is_err());
    }
}
