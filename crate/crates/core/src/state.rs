//! Nodal states on the periodic unit interval and solution windows.

use crate::schemes::{GMatrix, SchemeCoefficients};
use crate::{Error, Result};

/// Per-species nodal values on the uniform periodic grid `x_i = i h`,
/// `h = 1 / N`.
///
/// Values are stored node-major (`data[i * n_species + s]`), which is also
/// the unknown ordering used by the Newton solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    n_species: usize,
    n_nodes: usize,
    data: Vec<f64>,
}

impl GridState {
    pub fn from_interleaved(n_species: usize, n_nodes: usize, data: Vec<f64>) -> Result<Self> {
        if n_species == 0 || n_nodes == 0 {
            return Err(Error::Dimension(
                "grid state needs at least one species and one node".into(),
            ));
        }
        if data.len() != n_species * n_nodes {
            return Err(Error::Dimension(format!(
                "expected {} values for {n_species} species on {n_nodes} nodes, got {}",
                n_species * n_nodes,
                data.len()
            )));
        }
        Ok(Self {
            n_species,
            n_nodes,
            data,
        })
    }

    /// Builds a state from one vector per species.
    pub fn from_species(species: &[Vec<f64>]) -> Result<Self> {
        let n_species = species.len();
        let n_nodes = species.first().map_or(0, Vec::len);
        if species.iter().any(|s| s.len() != n_nodes) {
            return Err(Error::Dimension(
                "species vectors have different lengths".into(),
            ));
        }
        let mut data = Vec::with_capacity(n_species * n_nodes);
        for i in 0..n_nodes {
            data.extend(species.iter().map(|s| s[i]));
        }
        Self::from_interleaved(n_species, n_nodes, data)
    }

    pub fn constant(n_species: usize, n_nodes: usize, value: f64) -> Self {
        Self {
            n_species,
            n_nodes,
            data: vec![value; n_species * n_nodes],
        }
    }

    /// Samples `f(species, x_i)` at the grid nodes.
    pub fn from_fn(n_species: usize, n_nodes: usize, f: impl Fn(usize, f64) -> f64) -> Self {
        let h = 1.0 / n_nodes as f64;
        let data = (0..n_nodes)
            .flat_map(|i| (0..n_species).map(move |s| (s, i as f64 * h)))
            .map(|(s, x)| f(s, x))
            .collect();
        Self {
            n_species,
            n_nodes,
            data,
        }
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_nodes as f64
    }

    pub fn node_x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn value(&self, species: usize, node: usize) -> f64 {
        self.data[node * self.n_species + species]
    }

    pub fn species(&self, species: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(species).step_by(self.n_species).copied()
    }

    pub fn species_vec(&self, species: usize) -> Vec<f64> {
        self.species(species).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Same layout, new values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::from_interleaved(self.n_species, self.n_nodes, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_species: self.n_species,
            n_nodes: self.n_nodes,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_shape(&self, other: &GridState) -> bool {
        self.n_species == other.n_species && self.n_nodes == other.n_nodes
    }

    pub(crate) fn check_shape(&self, other: &GridState) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "grid mismatch: {}x{} vs {}x{} (species x nodes)",
                self.n_species, self.n_nodes, other.n_species, other.n_nodes
            )))
        }
    }

    /// Grid-weighted L2 inner product `h sum_{i,s} a_{s,i} b_{s,i}`.
    pub fn inner(&self, other: &GridState) -> Result<f64> {
        self.check_shape(other)?;
        let sum: f64 = self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum();
        Ok(sum * self.h())
    }

    /// First node/species at which the state is not strictly positive.
    pub fn check_positive(&self) -> Result<()> {
        match self.data.iter().position(|&x| !(x > 0.0)) {
            None => Ok(()),
            Some(k) => Err(Error::Positivity {
                species: k % self.n_species,
                node: k / self.n_species,
                value: self.data[k],
            }),
        }
    }

    /// Cyclic shift by `m` nodes: `out[i] = self[i - m]`.
    pub fn shifted(&self, m: usize) -> Self {
        let n = self.n_nodes;
        let ns = self.n_species;
        let mut data = vec![0.0; self.data.len()];
        for i in 0..n {
            let src = (i + n - m % n) % n;
            data[i * ns..(i + 1) * ns].copy_from_slice(&self.data[src * ns..(src + 1) * ns]);
        }
        Self {
            n_species: ns,
            n_nodes: n,
            data,
        }
    }
}

/// Window `(v_k, ..., v_{k+p-1})` of consecutive states, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    window: Vec<GridState>,
}

impl History {
    pub fn new(window: Vec<GridState>) -> Result<Self> {
        let Some(first) = window.first() else {
            return Err(Error::Dimension("history window is empty".into()));
        };
        for state in &window[1..] {
            first.check_shape(state)?;
        }
        Ok(Self { window })
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn states(&self) -> &[GridState] {
        &self.window
    }

    pub fn newest(&self) -> &GridState {
        self.window.last().expect("non-empty window")
    }

    /// Appends `next` and drops the oldest state.
    pub fn advance(&mut self, next: GridState) -> Result<()> {
        self.window[0].check_shape(&next)?;
        self.window.remove(0);
        self.window.push(next);
        Ok(())
    }

    /// The window shifted by one step: `(v_{k+1}, ..., v_{k+p})`.
    pub fn shifted(&self, next: GridState) -> Result<Self> {
        let mut out = self.clone();
        out.advance(next)?;
        Ok(out)
    }
}

fn combine(coeffs: &[f64], hist: &History, v_new: &GridState) -> Result<GridState> {
    let p = coeffs.len() - 1;
    if hist.len() != p {
        return Err(Error::Dimension(format!(
            "scheme has {p} steps but the history holds {} states",
            hist.len()
        )));
    }
    hist.newest().check_shape(v_new)?;
    let mut data = vec![0.0; v_new.as_slice().len()];
    let states = hist.states().iter().chain(std::iter::once(v_new));
    for (c, state) in coeffs.iter().zip(states) {
        if *c != 0.0 {
            for (d, x) in data.iter_mut().zip(state.as_slice()) {
                *d += c * x;
            }
        }
    }
    v_new.with_data(data)
}

/// `sigma(E) v_k = sum_{j<p} beta_j v_{k+j} + beta_p v_new`.
pub fn apply_sigma(s: &SchemeCoefficients, hist: &History, v_new: &GridState) -> Result<GridState> {
    combine(s.betas(), hist, v_new)
}

/// `rho(E) v_k = sum_{j<p} alpha_j v_{k+j} + alpha_p v_new`.
pub fn apply_rho(s: &SchemeCoefficients, hist: &History, v_new: &GridState) -> Result<GridState> {
    combine(s.alphas(), hist, v_new)
}

/// `|V|_G^2 = sum_{i,j} G_ij <v_i, v_j>` with the grid-weighted inner product.
pub fn g_norm_sq(g: &GMatrix, window: &History) -> Result<f64> {
    let p = g.dim();
    if window.len() != p {
        return Err(Error::Dimension(format!(
            "G-matrix is {p}x{p} but the window holds {} states",
            window.len()
        )));
    }
    let states = window.states();
    let mut total = 0.0;
    for i in 0..p {
        for j in 0..p {
            total += g.get(i, j) * states[i].inner(&states[j])?;
        }
    }
    Ok(total)
}


/// Periodic three-point second difference `f_{i+1} - 2 f_i + f_{i-1}` (not
/// divided by `h^2`).
pub fn second_difference(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| f[(i + 1) % n] - 2.0 * f[i] + f[(i + n - 1) % n])
        .collect()
}
