//! Univariate distributions, Gauss quadrature rules, orthonormal polynomial
//! families and total-degree multi-index sets.
//!
//! A [`ParameterSpace`] is an ordered list of independent random parameters,
//! each with a marginal distribution and a per-parameter quadrature order.
//! [`build_basis`] turns it into a [`BasisSet`]: the graded-lexicographic
//! multi-index set of all basis functions up to a total order, together with
//! per-dimension evaluation tables of the orthonormal polynomials at the
//! quadrature nodes and the weight-scaled counterparts of those tables.
//! Everything is immutable after construction and safe to share across
//! threads.

use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported quadrature order per dimension.
pub const MAX_QUAD_ORDER: usize = 64;
/// Largest supported univariate polynomial degree.
pub const MAX_POLY_DEGREE: usize = 64;
/// Default cap on the number of multi-indices in a basis.
pub const DEFAULT_INDEX_CAP: u128 = 1_000_000;

/// Marginal distribution of one random parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Gaussian { mean: f64, stddev: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Distribution {
    pub fn gaussian(mean: f64, stddev: f64) -> Self {
        Distribution::Gaussian { mean, stddev }
    }

    pub fn uniform(lower: f64, upper: f64) -> Self {
        Distribution::Uniform { lower, upper }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Gaussian { mean, stddev } => {
                if !mean.is_finite() || !stddev.is_finite() {
                    return Err(Error::InvalidDistribution(
                        "gaussian parameters must be finite".into(),
                    ));
                }
                if stddev <= 0.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "gaussian stddev must be > 0, got {stddev}"
                    )));
                }
            }
            Distribution::Uniform { lower, upper } => {
                if !lower.is_finite() || !upper.is_finite() {
                    return Err(Error::InvalidDistribution(
                        "uniform bounds must be finite".into(),
                    ));
                }
                if lower >= upper {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform requires lower < upper, got [{lower}, {upper}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Map a physical value to the standardized variable of the family
    /// (standard normal for gaussian, `[-1, 1]` for uniform).
    pub fn standardize(&self, x: f64) -> f64 {
        match *self {
            Distribution::Gaussian { mean, stddev } => (x - mean) / stddev,
            Distribution::Uniform { lower, upper } => {
                (2.0 * x - lower - upper) / (upper - lower)
            }
        }
    }

    /// Inverse of [`standardize`](Self::standardize).
    pub fn unstandardize(&self, u: f64) -> f64 {
        match *self {
            Distribution::Gaussian { mean, stddev } => mean + stddev * u,
            Distribution::Uniform { lower, upper } => {
                0.5 * (lower + upper) + 0.5 * (upper - lower) * u
            }
        }
    }

    /// Draw one sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Gaussian { mean, stddev } => {
                let u: f64 = rng.sample(StandardNormal);
                mean + stddev * u
            }
            Distribution::Uniform { lower, upper } => {
                lower + (upper - lower) * rng.random::<f64>()
            }
        }
    }

    /// Squared recurrence off-diagonal `b_k` of the standardized family's
    /// orthonormal three-term recurrence. Both supported families have
    /// zero recurrence diagonal.
    fn recurrence_b(&self, k: usize) -> f64 {
        let k = k as f64;
        match self {
            Distribution::Gaussian { .. } => k,
            Distribution::Uniform { .. } => k * k / (4.0 * k * k - 1.0),
        }
    }
}

/// Nodes and weights of a univariate Gauss rule under a probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Build the q-point Gauss rule for the distribution's probability measure.
///
/// Nodes and weights come from the eigen-decomposition of the symmetric
/// tridiagonal Jacobi matrix of the family's three-term recurrence
/// (Golub-Welsch): nodes are the eigenvalues, weights the squared first
/// components of the normalized eigenvectors. Both supported families are
/// symmetric, so the standardized rule is explicitly symmetrized before the
/// affine map to physical units. The rule integrates polynomials up to
/// degree `2q - 1` exactly.
pub fn gauss_quadrature(dist: &Distribution, q: usize) -> Result<QuadratureRule> {
    dist.validate()?;
    if q < 1 || q > MAX_QUAD_ORDER {
        return Err(Error::QuadratureOrderOutOfRange {
            q,
            max: MAX_QUAD_ORDER,
        });
    }

    let (mut nodes, mut weights) = if q == 1 {
        (vec![0.0], vec![1.0])
    } else {
        let mut jacobi = DMatrix::<f64>::zeros(q, q);
        for k in 1..q {
            let off = dist.recurrence_b(k).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..q)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pairs.into_iter().unzip()
    };

    // Enforce exact mirror symmetry of the standardized rule.
    for i in 0..q / 2 {
        let j = q - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }

    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    let nodes = nodes.into_iter().map(|u| dist.unstandardize(u)).collect();
    Ok(QuadratureRule { nodes, weights })
}

/// Evaluate the degree-`degree` orthonormal polynomial of the distribution's
/// family at `x` (probabilists' Hermite for gaussian, shifted-normalized
/// Legendre for uniform), via the normalized three-term recurrence.
pub fn orthonormal_poly(dist: &Distribution, degree: usize, x: f64) -> Result<f64> {
    if degree > MAX_POLY_DEGREE {
        return Err(Error::DegreeExceedsCap {
            degree,
            max: MAX_POLY_DEGREE,
        });
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "polynomial argument must be finite, got {x}"
        )));
    }
    dist.validate()?;
    let mut buf = vec![0.0; degree + 1];
    eval_orthonormal_upto(dist, degree, x, &mut buf);
    Ok(buf[degree])
}

/// Fill `out[0..=max_degree]` with the orthonormal polynomial values at `x`.
pub(crate) fn eval_orthonormal_upto(
    dist: &Distribution,
    max_degree: usize,
    x: f64,
    out: &mut [f64],
) {
    debug_assert!(out.len() > max_degree);
    let u = dist.standardize(x);
    out[0] = 1.0;
    if max_degree == 0 {
        return;
    }
    let mut prev = 0.0;
    let mut cur = 1.0;
    for n in 0..max_degree {
        let b_n = if n == 0 { 0.0 } else { dist.recurrence_b(n).sqrt() };
        let b_next = dist.recurrence_b(n + 1).sqrt();
        let next = (u * cur - b_n * prev) / b_next;
        out[n + 1] = next;
        prev = cur;
        cur = next;
    }
}

/// Exponent vector of one multivariate basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree `|alpha|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// Number of multi-indices with `d` dimensions and total degree `<= p`,
/// i.e. the binomial coefficient C(p + d, d), computed exactly in `u128`.
pub fn multi_index_count(d: usize, p: usize) -> Result<u128> {
    if d < 1 {
        return Err(Error::InvalidArgument("dimension must be >= 1".into()));
    }
    let mut count: u128 = 1;
    for i in 1..=p as u128 {
        // count * (d + i) is divisible by i at every step.
        count = count
            .checked_mul(d as u128 + i)
            .ok_or_else(|| Error::InvalidArgument("multi-index count overflows u128".into()))?
            / i;
    }
    Ok(count)
}

/// All multi-indices with total degree `<= p` in graded lexicographic order,
/// subject to the default size cap.
pub fn enumerate_multi_indices(d: usize, p: usize) -> Result<Vec<MultiIndex>> {
    enumerate_multi_indices_with_cap(d, p, DEFAULT_INDEX_CAP)
}

pub fn enumerate_multi_indices_with_cap(
    d: usize,
    p: usize,
    cap: u128,
) -> Result<Vec<MultiIndex>> {
    let count = multi_index_count(d, p)?;
    if count > cap {
        return Err(Error::BasisTooLarge { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0u32; d];
    for degree in 0..=p {
        push_fixed_degree(&mut out, &mut cur, 0, degree as u32);
    }
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

fn push_fixed_degree(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, k: usize, remaining: u32) {
    if k == cur.len() - 1 {
        cur[k] = remaining;
        out.push(MultiIndex(cur.clone()));
        cur[k] = 0;
        return;
    }
    for a in (0..=remaining).rev() {
        cur[k] = a;
        push_fixed_degree(out, cur, k + 1, remaining - a);
    }
    cur[k] = 0;
}

/// One named random parameter with its quadrature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub dist: Distribution,
    #[serde(rename = "q")]
    pub quad_order: usize,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    params: Vec<Param>,
}

/// Ordered list of mutually independent random parameters. The joint density
/// is the product of the marginals. Quadrature rules are built once at
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct ParameterSpace {
    params: Vec<Param>,
    rules: Vec<QuadratureRule>,
}

impl TryFrom<SpaceRepr> for ParameterSpace {
    type Error = Error;

    fn try_from(repr: SpaceRepr) -> Result<Self> {
        ParameterSpace::new(repr.params)
    }
}

impl From<ParameterSpace> for SpaceRepr {
    fn from(space: ParameterSpace) -> Self {
        SpaceRepr {
            params: space.params,
        }
    }
}

impl ParameterSpace {
    pub fn new(params: Vec<Param>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::InvalidParameterSpace(
                "at least one parameter required".into(),
            ));
        }
        let mut names = HashSet::new();
        for p in &params {
            if !names.insert(p.name.as_str()) {
                return Err(Error::InvalidParameterSpace(format!(
                    "duplicate parameter name '{}'",
                    p.name
                )));
            }
        }
        let rules = params
            .iter()
            .map(|p| gauss_quadrature(&p.dist, p.quad_order))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParameterSpace { params, rules })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn rules(&self) -> &[QuadratureRule] {
        &self.rules
    }

    pub fn rule(&self, k: usize) -> &QuadratureRule {
        &self.rules[k]
    }

    /// Per-dimension quadrature orders (the grid dims).
    pub fn grid_dims(&self) -> Vec<usize> {
        self.params.iter().map(|p| p.quad_order).collect()
    }

    /// Physical parameter values at a multi-dimensional quadrature node.
    /// `index` is 1-based per dimension.
    pub fn grid_point(&self, index: &[usize]) -> Result<Vec<f64>> {
        if index.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "index has {} entries, space has {} dimensions",
                index.len(),
                self.dim()
            )));
        }
        let mut point = Vec::with_capacity(self.dim());
        for (k, &i) in index.iter().enumerate() {
            if i < 1 || i > self.params[k].quad_order {
                return Err(Error::IndexOutOfBounds {
                    index: index.to_vec(),
                    dims: self.grid_dims(),
                });
            }
            point.push(self.rules[k].nodes[i - 1]);
        }
        Ok(point)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("parameter space serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Multi-index set plus per-dimension evaluation tables.
///
/// `node_table(k)` is the `q_k x (p + 1)` matrix `V_k` with
/// `V_k[i, a] = psi_a(node_k[i])`; `weighted_table(k)` scales each row by the
/// node's quadrature weight. The weighted-table columns are the per-dimension
/// vectors of the rank-1 projection tensors used to read off expansion
/// coefficients.
#[derive(Debug, Clone)]
pub struct BasisSet {
    space: ParameterSpace,
    order: usize,
    indices: Vec<MultiIndex>,
    node_tables: Vec<DMatrix<f64>>,
    weighted_tables: Vec<DMatrix<f64>>,
}

/// Construct the total-degree-`p` basis over `space`.
///
/// Requires `q_k >= p + 1` in every dimension so that discrete
/// orthonormality of the tabulated polynomials holds under the grid's
/// quadrature rule.
pub fn build_basis(space: &ParameterSpace, p: usize) -> Result<BasisSet> {
    for (k, param) in space.params().iter().enumerate() {
        if param.quad_order < p + 1 {
            return Err(Error::UnderResolvedQuadrature {
                dim: k + 1,
                q: param.quad_order,
                order: p,
            });
        }
    }
    let indices = enumerate_multi_indices(space.dim(), p)?;

    let mut node_tables = Vec::with_capacity(space.dim());
    let mut weighted_tables = Vec::with_capacity(space.dim());
    let mut row = vec![0.0; p + 1];
    for (param, rule) in space.params().iter().zip(space.rules()) {
        let q = param.quad_order;
        let mut table = DMatrix::<f64>::zeros(q, p + 1);
        let mut weighted = DMatrix::<f64>::zeros(q, p + 1);
        for i in 0..q {
            eval_orthonormal_upto(&param.dist, p, rule.nodes[i], &mut row);
            for a in 0..=p {
                table[(i, a)] = row[a];
                weighted[(i, a)] = rule.weights[i] * row[a];
            }
        }
        node_tables.push(table);
        weighted_tables.push(weighted);
    }

    Ok(BasisSet {
        space: space.clone(),
        order: p,
        indices,
        node_tables,
        weighted_tables,
    })
}

impl BasisSet {
    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn grid_dims(&self) -> Vec<usize> {
        self.space.grid_dims()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn index_count(&self) -> usize {
        self.indices.len()
    }

    pub fn node_table(&self, k: usize) -> &DMatrix<f64> {
        &self.node_tables[k]
    }

    pub fn weighted_table(&self, k: usize) -> &DMatrix<f64> {
        &self.weighted_tables[k]
    }

    /// Whether `alpha` names a basis function of this set.
    pub fn contains(&self, alpha: &MultiIndex) -> bool {
        alpha.dim() == self.dim() && alpha.order() as usize <= self.order
    }
}
