//! Linear solves with `I - Q` for absorbing Markov chains.
//!
//! Small chains are factorized densely. Larger chains are permuted to block
//! triangular form along the strongly connected components of the transient
//! graph, and only the diagonal blocks are factorized. Multi-order models are
//! acyclic below the top order, so most blocks are single states.

use nalgebra::{DMatrix, DVector, LU};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

/// Chains with fewer transient states than this use one dense factorization.
pub const DENSE_LIMIT: usize = 500;

/// Sparse transient transition rows: `rows[i]` holds `(j, Q_ij)` pairs.
pub type TransientRows = [Vec<(usize, f64)>];

enum Block {
    Single {
        state: usize,
        pivot: f64,
    },
    Dense {
        states: Vec<usize>,
        lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
        lu_t: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    },
}

/// Factorization of `I - Q` reusable for many right-hand sides.
pub struct AbsorbingSolver {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    columns: Vec<Vec<(usize, f64)>>,
    /// Diagonal blocks, successors before predecessors.
    blocks: Vec<Block>,
    block_of: Vec<usize>,
}

impl AbsorbingSolver {
    /// Factorizes `I - Q`. `label` names states in the singularity error.
    pub fn new(rows: &TransientRows, label: impl Fn(usize) -> String) -> Result<Self> {
        Self::with_dense_limit(rows, label, DENSE_LIMIT)
    }

    pub fn with_dense_limit(
        rows: &TransientRows,
        label: impl Fn(usize) -> String,
        dense_limit: usize,
    ) -> Result<Self> {
        let n = rows.len();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
        let ids: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        let mut columns = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, q) in row {
                if q != 0.0 {
                    graph.add_edge(ids[i], ids[j], ());
                    columns[j].push((i, q));
                }
            }
        }
        // Reverse topological order: every component precedes the components
        // that can reach it.
        let components: Vec<Vec<usize>> = tarjan_scc(&graph)
            .into_iter()
            .map(|c| {
                let mut c: Vec<usize> = c.into_iter().map(|x| x.index()).collect();
                c.sort_unstable();
                c
            })
            .collect();

        let mut block_of = vec![0; n];
        for (b, comp) in components.iter().enumerate() {
            for &i in comp {
                block_of[i] = b;
            }
        }
        for comp in &components {
            let closed = comp.iter().all(|&i| {
                let inside: f64 = rows[i]
                    .iter()
                    .filter(|&&(j, _)| block_of[j] == block_of[i])
                    .map(|&(_, q)| q)
                    .sum();
                inside >= 1.0 - 1e-12
            });
            if closed {
                return Err(Error::Singular {
                    states: comp.iter().map(|&i| label(i)).collect(),
                });
            }
        }

        let components = if n < dense_limit && n > 0 {
            let mut all: Vec<usize> = (0..n).collect();
            all.sort_unstable();
            block_of.iter_mut().for_each(|b| *b = 0);
            vec![all]
        } else {
            components
        };

        let mut blocks = Vec::with_capacity(components.len());
        for comp in components {
            if comp.len() == 1 {
                let i = comp[0];
                let self_loop: f64 = rows[i]
                    .iter()
                    .filter(|&&(j, _)| j == i)
                    .map(|&(_, q)| q)
                    .sum();
                let pivot = 1.0 - self_loop;
                if pivot.abs() < 1e-14 {
                    return Err(Error::Singular {
                        states: vec![label(i)],
                    });
                }
                blocks.push(Block::Single { state: i, pivot });
                continue;
            }
            let local: std::collections::HashMap<usize, usize> =
                comp.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            let m = comp.len();
            let mut a = DMatrix::<f64>::identity(m, m);
            for (k, &i) in comp.iter().enumerate() {
                for &(j, q) in &rows[i] {
                    if let Some(&l) = local.get(&j) {
                        a[(k, l)] -= q;
                    }
                }
            }
            let lu_t = a.transpose().lu();
            let lu = a.lu();
            if !lu.is_invertible() {
                return Err(Error::Singular {
                    states: comp.iter().map(|&i| label(i)).collect(),
                });
            }
            blocks.push(Block::Dense {
                states: comp,
                lu,
                lu_t,
            });
        }

        Ok(AbsorbingSolver {
            n,
            rows: rows.to_vec(),
            columns,
            blocks,
            block_of,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Solves `(I - Q) x = b`.
    pub fn solve_right(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        for (bi, block) in self.blocks.iter().enumerate() {
            // Coupling to already-solved successor blocks.
            let rhs = |i: usize, x: &[f64]| -> f64 {
                b[i] + self.rows[i]
                    .iter()
                    .filter(|&&(j, _)| self.block_of[j] != bi)
                    .map(|&(j, q)| q * x[j])
                    .sum::<f64>()
            };
            match block {
                Block::Single { state, pivot } => x[*state] = rhs(*state, &x) / pivot,
                Block::Dense { states, lu, .. } => {
                    let r =
                        DVector::from_iterator(states.len(), states.iter().map(|&i| rhs(i, &x)));
                    let sol = lu.solve(&r).expect("factorization checked invertible");
                    for (k, &i) in states.iter().enumerate() {
                        x[i] = sol[k];
                    }
                }
            }
        }
        x
    }

    /// Solves `x (I - Q) = b` for a row vector `x`.
    pub fn solve_left(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = vec![0.0; self.n];
        for (bi, block) in self.blocks.iter().enumerate().rev() {
            let rhs = |j: usize, x: &[f64]| -> f64 {
                b[j] + self.columns[j]
                    .iter()
                    .filter(|&&(i, _)| self.block_of[i] != bi)
                    .map(|&(i, q)| x[i] * q)
                    .sum::<f64>()
            };
            match block {
                Block::Single { state, pivot } => x[*state] = rhs(*state, &x) / pivot,
                Block::Dense { states, lu_t, .. } => {
                    let r =
                        DVector::from_iterator(states.len(), states.iter().map(|&j| rhs(j, &x)));
                    let sol = lu_t.solve(&r).expect("factorization checked invertible");
                    for (k, &j) in states.iter().enumerate() {
                        x[j] = sol[k];
                    }
                }
            }
        }
        x
    }

    /// The full fundamental matrix `(I - Q)^-1`, column by column.
    pub fn inverse(&self) -> DMatrix<f64> {
        let mut f = DMatrix::zeros(self.n, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            let col = self.solve_right(&e);
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                f[(i, j)] = v;
            }
        }
        f
    }
}
