//! Ensemble graph, GNSS receiver attachments and the interconnection
//! matrices derived from them.
//!
//! Indices are zero-based. Directed edges are ordered canonically: node `i`
//! in ascending order, and within a node its neighbours `j` ascending. Row
//! `e = (i, j)` of the stacked edge matrix `V` is `I_{n|j} − I_{n|i}`, so the
//! edge state `ξ_ij = x_j − x_i` is the deviation of `j` seen from `i`.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::{identity, pinv, Matrix, Vector};

/// `ℒ = 𝒟 − 𝒜` for a symmetric 0/1 adjacency matrix.
pub fn laplacian(adjacency: &Matrix) -> Matrix {
    let n = adjacency.nrows();
    let mut l = -adjacency.clone();
    for i in 0..n {
        l[(i, i)] = adjacency.row(i).sum();
    }
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    g: usize,
    neighbors: Vec<Vec<usize>>,
    /// Directed edges `(i, j)` in canonical order.
    edges: Vec<(usize, usize)>,
    /// `reverse[e]` is the index of `(j, i)` for `edges[e] = (i, j)`.
    reverse: Vec<usize>,
    node_edges: Vec<Range<usize>>,
    /// `attachments[j]` is the ensemble clock GAC `j` is attached to.
    attachments: Vec<usize>,
    adjacency: Matrix,
    laplacian: Matrix,
    v: Matrix,
    v_g: Matrix,
    v_pinv: Matrix,
    q: Vector,
    q_g: Vector,
    q_a: Vector,
    pi: Matrix,
    fiedler: f64,
}

impl Topology {
    /// Builds the topology from undirected MAC edges and `(gac, mac)`
    /// attachment pairs. Every GAC in `0..g` must appear exactly once.
    pub fn build(
        n: usize,
        g: usize,
        edges: &[(usize, usize)],
        attachments: &[(usize, usize)],
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::BadIndex(format!("need at least 2 ensemble clocks, got {n}")));
        }
        if g >= n {
            return Err(Error::TooManyReceivers { g, n });
        }
        if g == 0 {
            return Err(Error::BadIndex("need at least one GNSS receiver".into()));
        }

        let mut adjacency = Matrix::zeros(n, n);
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::BadIndex(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(Error::BadIndex(format!("self loop at node {a}")));
            }
            adjacency[(a, b)] = 1.0;
            adjacency[(b, a)] = 1.0;
        }

        let mut attach = vec![usize::MAX; g];
        for &(gac, mac) in attachments {
            if gac >= g || mac >= n {
                return Err(Error::BadIndex(format!(
                    "attachment (gac {gac}, mac {mac}) out of range"
                )));
            }
            if attach[gac] != usize::MAX {
                return Err(Error::BadIndex(format!("GAC {gac} attached twice")));
            }
            attach[gac] = mac;
        }
        if let Some(j) = attach.iter().position(|&m| m == usize::MAX) {
            return Err(Error::BadIndex(format!("GAC {j} has no attachment")));
        }
        let mut q_a = Vector::zeros(n);
        for &mac in &attach {
            if q_a[mac] != 0.0 {
                return Err(Error::BadIndex(format!("MAC {mac} has more than one GAC")));
            }
            q_a[mac] = 1.0;
        }

        let laplacian = laplacian(&adjacency);
        let mut spectrum: Vec<f64> = laplacian.symmetric_eigenvalues().iter().cloned().collect();
        spectrum.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let fiedler = spectrum[1];
        if fiedler <= 1e-9 * spectrum[n - 1].max(1.0) {
            return Err(Error::Disconnected);
        }

        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[(i, j)] != 0.0).collect())
            .collect();
        let mut dir_edges = Vec::new();
        let mut node_edges = Vec::with_capacity(n);
        for (i, nb) in neighbors.iter().enumerate() {
            let start = dir_edges.len();
            dir_edges.extend(nb.iter().map(|&j| (i, j)));
            node_edges.push(start..dir_edges.len());
        }
        let reverse = dir_edges
            .iter()
            .map(|&(i, j)| {
                let r = &node_edges[j];
                r.start + neighbors[j].binary_search(&i).expect("undirected edge")
            })
            .collect();

        let m = dir_edges.len();
        let mut v = Matrix::zeros(m, n);
        for (e, &(i, j)) in dir_edges.iter().enumerate() {
            v[(e, j)] = 1.0;
            v[(e, i)] = -1.0;
        }
        let mut v_g = Matrix::zeros(g, n + g);
        for (j, &mac) in attach.iter().enumerate() {
            v_g[(j, mac)] = -1.0;
            v_g[(j, n + j)] = 1.0;
        }
        let q = Vector::from_element(n, 1.0 / n as f64);
        let q_g = Vector::from_element(g, 1.0 / g as f64);
        let pi = identity(n) - Vector::from_element(n, 1.0) * q.transpose();
        let v_pinv = pinv(&v);

        Ok(Self {
            n,
            g,
            neighbors,
            edges: dir_edges,
            reverse,
            node_edges,
            attachments: attach,
            adjacency,
            laplacian,
            v,
            v_g,
            v_pinv,
            q,
            q_g,
            q_a,
            pi,
            fiedler,
        })
    }

    /// Number of ensemble clocks.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of GNSS receiver clocks.
    pub fn g(&self) -> usize {
        self.g
    }

    /// Number of directed edges `|E|` (twice the undirected edge count).
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn reverse_edge(&self, e: usize) -> usize {
        self.reverse[e]
    }

    /// Rows of `V` belonging to node `i`.
    pub fn node_edges(&self, i: usize) -> Range<usize> {
        self.node_edges[i].clone()
    }

    pub fn attachments(&self) -> &[usize] {
        &self.attachments
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn degree(&self) -> Matrix {
        Matrix::from_diagonal(&self.laplacian.diagonal())
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.laplacian
    }

    /// Second-smallest Laplacian eigenvalue.
    pub fn fiedler_value(&self) -> f64 {
        self.fiedler
    }

    /// Stacked edge matrix `V` (`|E| × n`).
    pub fn v(&self) -> &Matrix {
        &self.v
    }

    /// Edge matrix `V_i` of node `i`.
    pub fn v_i(&self, i: usize) -> Matrix {
        let r = self.node_edges(i);
        self.v.rows(r.start, r.len()).into_owned()
    }

    /// GNSS edge matrix `V_G` (`g × (n + g)`).
    pub fn v_g(&self) -> &Matrix {
        &self.v_g
    }

    /// Pseudoinverse `V†`, satisfying `V†V = Π`.
    pub fn v_pinv(&self) -> &Matrix {
        &self.v_pinv
    }

    /// Uniform ensemble weights `q = 1/n · 1`.
    pub fn q(&self) -> &Vector {
        &self.q
    }

    pub fn q_g(&self) -> &Vector {
        &self.q_g
    }

    /// Indicator of ensemble clocks with an attached GNSS receiver.
    pub fn q_a(&self) -> &Vector {
        &self.q_a
    }

    /// `Π = I − 1 qᵀ`.
    pub fn pi(&self) -> &Matrix {
        &self.pi
    }

    /// Nonzero Laplacian eigenvalues, ascending.
    pub fn nonzero_laplacian_eigenvalues(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.laplacian.symmetric_eigenvalues().iter().cloned().collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s.into_iter().skip(1).collect()
    }
}
