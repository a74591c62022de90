//! Grid structure: candidate branch set, incidence matrices, and the map
//! from per-branch line parameters to the bus admittance matrix.
//!
//! All bus indices are 1-based, matching the file formats. Branches are
//! normalized to `from < to` at construction, which fixes the sign
//! convention of the incidence matrix and makes edge sets comparable.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Candidate-branch description of a grid.
///
/// The branch list is the set of all lines that *could* exist; a state in
/// which a branch is absent simply carries (near-)zero parameters for it.
/// Every state therefore shares the same parameter dimension `2m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n_bus: usize,
    slack_bus: usize,
    branches: Vec<(usize, usize)>,
    incidence: DMatrix<f64>,
}

impl GridSpec {
    pub fn new(n_bus: usize, slack_bus: usize, branches: &[(usize, usize)]) -> Result<Self> {
        if n_bus == 0 {
            return Err(Error::InvalidGrid("grid must have at least one bus".into()));
        }
        if slack_bus == 0 || slack_bus > n_bus {
            return Err(Error::InvalidGrid(format!(
                "slack bus {slack_bus} out of range [1, {n_bus}]"
            )));
        }
        let (incidence, normalized) = build_incidence(branches, n_bus)?;
        Ok(Self {
            n_bus,
            slack_bus,
            branches: normalized,
            incidence,
        })
    }

    pub fn n_bus(&self) -> usize {
        self.n_bus
    }

    /// Number of candidate branches `m`.
    pub fn n_branch(&self) -> usize {
        self.branches.len()
    }

    /// 1-based slack bus index.
    pub fn slack_bus(&self) -> usize {
        self.slack_bus
    }

    /// Normalized branch list (`from < to`, 1-based). Row `i` equals the
    /// `i`-th row of the from/to index matrix.
    pub fn branches(&self) -> &[(usize, usize)] {
        &self.branches
    }

    /// Incidence matrix `S` (m x n): +1 where the branch leaves a bus,
    /// -1 where it enters one.
    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    /// Branches incident to the (1-based) bus, as
    /// `(branch index, other endpoint, sign of s_{branch,bus})`.
    pub fn incident(&self, bus: usize) -> Vec<(usize, usize, f64)> {
        self.branches
            .iter()
            .enumerate()
            .filter_map(|(j, &(a, b))| {
                if a == bus {
                    Some((j, b, 1.0))
                } else if b == bus {
                    Some((j, a, -1.0))
                } else {
                    None
                }
            })
            .collect()
    }
}

/// Per-state line parameters over the candidate branch set: conductance `g`
/// and susceptance `b`, both per-unit, length `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateParams {
    pub g: DVector<f64>,
    pub b: DVector<f64>,
}

impl StateParams {
    pub fn new(g: DVector<f64>, b: DVector<f64>) -> Result<Self> {
        if g.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "g has length {}, b has length {}",
                g.len(),
                b.len()
            )));
        }
        if g.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite line parameter".into()));
        }
        Ok(Self { g, b })
    }

    pub fn from_slices(g: &[f64], b: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(g), DVector::from_row_slice(b))
    }

    /// Ground-truth states must have nonnegative conductance; estimates may
    /// carry small negative values on absent branches, so this check is
    /// separate from construction.
    pub fn validate_physical(&self) -> Result<()> {
        if self.g.iter().any(|&g| g < 0.0) {
            return Err(Error::InvalidInput(
                "conductance must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn n_branch(&self) -> usize {
        self.g.len()
    }

    /// Stacked parameter vector `[g; b]` of length `2m`.
    pub fn stacked(&self) -> DVector<f64> {
        let m = self.g.len();
        let mut out = DVector::zeros(2 * m);
        out.rows_mut(0, m).copy_from(&self.g);
        out.rows_mut(m, m).copy_from(&self.b);
        out
    }

    pub fn from_stacked(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::DimensionMismatch(
                "stacked parameter vector must have even length".into(),
            ));
        }
        let m = v.len() / 2;
        Self::new(v.rows(0, m).into_owned(), v.rows(m, m).into_owned())
    }
}

/// Builds the incidence matrix `S` (m x n) and normalized from/to list for
/// a branch list. Rejects self-loops, out-of-range buses, and duplicates
/// (duplicates are detected after orientation normalization).
pub fn build_incidence(
    branches: &[(usize, usize)],
    n_bus: usize,
) -> Result<(DMatrix<f64>, Vec<(usize, usize)>)> {
    let mut normalized = Vec::with_capacity(branches.len());
    for &(from, to) in branches {
        if from == to {
            return Err(Error::InvalidGrid(format!("self-loop at bus {from}")));
        }
        if from == 0 || to == 0 || from > n_bus || to > n_bus {
            return Err(Error::InvalidGrid(format!(
                "branch ({from}, {to}) out of range [1, {n_bus}]"
            )));
        }
        let pair = if from < to { (from, to) } else { (to, from) };
        if normalized.contains(&pair) {
            return Err(Error::InvalidGrid(format!(
                "duplicate branch ({}, {})",
                pair.0, pair.1
            )));
        }
        normalized.push(pair);
    }
    let m = normalized.len();
    let mut s = DMatrix::zeros(m, n_bus);
    for (i, &(from, to)) in normalized.iter().enumerate() {
        s[(i, from - 1)] = 1.0;
        s[(i, to - 1)] = -1.0;
    }
    Ok((s, normalized))
}

/// Assembles the real and imaginary parts `(G, B)` of the bus admittance
/// matrix from per-branch parameters, with zero shunts: for branch `i`
/// joining buses `j` and `k`, the off-diagonals get `-g_i` and the two
/// diagonals accumulate `+g_i` (same for `b`).
pub fn assemble_admittance(
    spec: &GridSpec,
    params: &StateParams,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if params.n_branch() != spec.n_branch() {
        return Err(Error::DimensionMismatch(format!(
            "params cover {} branches, grid has {}",
            params.n_branch(),
            spec.n_branch()
        )));
    }
    let n = spec.n_bus();
    let mut g_mat = DMatrix::zeros(n, n);
    let mut b_mat = DMatrix::zeros(n, n);
    for (i, &(from, to)) in spec.branches().iter().enumerate() {
        let (a, b) = (from - 1, to - 1);
        let gv = params.g[i];
        let bv = params.b[i];
        g_mat[(a, b)] -= gv;
        g_mat[(b, a)] -= gv;
        g_mat[(a, a)] += gv;
        g_mat[(b, b)] += gv;
        b_mat[(a, b)] -= bv;
        b_mat[(b, a)] -= bv;
        b_mat[(a, a)] += bv;
        b_mat[(b, b)] += bv;
    }
    Ok((g_mat, b_mat))
}
