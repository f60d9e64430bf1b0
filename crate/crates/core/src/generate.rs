//! Seeded instance generators: max-cut relaxations, graph partitioning
//! relaxations and optimal diagonal preconditioning.
//!
//! Every generator is deterministic in its seed, so writing the result with
//! [`crate::sdpa_io::write_sdpa`] is byte-reproducible.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::GenerateError;
use crate::model::{Block, CoeffMatrix, SdpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    MaxCut,
    GraphPartition,
    DiagPrecond,
}

impl FromStr for Family {
    type Err = GenerateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxcut" => Ok(Family::MaxCut),
            "gpp" => Ok(Family::GraphPartition),
            "diagprecond" => Ok(Family::DiagPrecond),
            _ => Err(GenerateError::UnknownFamily(s.into())),
        }
    }
}

/// Edges of an Erdos-Renyi graph `G(n, p)`, each `(i, j)` with `i < j`.
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for j in 1..n {
        for i in 0..j {
            if rng.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// `L / 4` triplets for the graph Laplacian `L = D - A`, scaled by `sign`.
fn laplacian_quarter(n: usize, edges: &[(usize, usize)], sign: f64) -> CoeffMatrix {
    let mut t = Vec::with_capacity(n + edges.len());
    let mut deg = vec![0.0; n];
    for &(i, j) in edges {
        deg[i] += 1.0;
        deg[j] += 1.0;
        t.push((i, j, -0.25 * sign));
    }
    for (i, d) in deg.into_iter().enumerate() {
        t.push((i, i, 0.25 * sign * d));
    }
    CoeffMatrix::from_triplets(n, &t)
}

fn check_size(n: usize, min: usize, what: &str) -> Result<(), GenerateError> {
    if n < min {
        return Err(GenerateError::InvalidSize(format!("{what} needs n >= {min}, got {n}")));
    }
    Ok(())
}

fn check_prob(p: f64) -> Result<(), GenerateError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GenerateError::InvalidSize(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Max-cut relaxation on a `G(n, p)` graph:
/// `min <-L/4, X>  s.t.  X_ii = 1, X psd`.
pub fn maxcut(n: usize, edge_prob: f64, seed: u64) -> Result<SdpProblem, GenerateError> {
    check_size(n, 1, "maxcut")?;
    check_prob(edge_prob)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_graph(n, edge_prob, &mut rng);
    maxcut_from_edges(n, &edges)
}

pub fn maxcut_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<SdpProblem, GenerateError> {
    check_size(n, 1, "maxcut")?;
    let c = laplacian_quarter(n, edges, -1.0);
    let a = (0..n)
        .map(|i| vec![CoeffMatrix::from_triplets(n, &[(i, i, 1.0)])])
        .collect();
    SdpProblem::new(vec![Block::Sdp(n)], vec![c], a, vec![1.0; n])
        .map_err(|e| GenerateError::InvalidSize(e.to_string()))
}

/// Default balance target `a n + (1 - a) n^2` with `a = 1/2`.
pub fn default_beta(n: usize) -> f64 {
    let n = n as f64;
    0.5 * n + 0.5 * n * n
}

/// Graph partitioning relaxation
/// `min <L/4, X>  s.t.  diag(X) = 1, <11^T, X> = beta, k X - 11^T psd, X >= 0`.
///
/// Blocks: `X` (order `n`), `Z = k X - 11^T` (order `n`) and a diagonal block
/// of `n (n - 1) / 2` slacks for the off-diagonal entries of `X`.
pub fn graph_partition(
    n: usize,
    k: f64,
    beta: Option<f64>,
    edge_prob: f64,
    seed: u64,
) -> Result<SdpProblem, GenerateError> {
    check_size(n, 2, "gpp")?;
    check_prob(edge_prob)?;
    if !(k > 0.0) {
        return Err(GenerateError::InvalidSize(format!("gpp needs k > 0, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = random_graph(n, edge_prob, &mut rng);
    let beta = beta.unwrap_or_else(|| default_beta(n));
    let nw = n * (n - 1) / 2;
    let blocks = vec![Block::Sdp(n), Block::Sdp(n), Block::Diag(nw)];
    let c = vec![
        laplacian_quarter(n, &edges, 1.0),
        CoeffMatrix::zero(n),
        CoeffMatrix::zero(nw),
    ];
    let zero_row = || vec![CoeffMatrix::zero(n), CoeffMatrix::zero(n), CoeffMatrix::zero(nw)];
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut row = zero_row();
        row[0] = CoeffMatrix::from_triplets(n, &[(i, i, 1.0)]);
        a.push(row);
        b.push(1.0);
    }
    let mut row = zero_row();
    let ones: Vec<_> = (0..n).flat_map(|j| (0..=j).map(move |i| (i, j, 1.0))).collect();
    row[0] = CoeffMatrix::from_triplets(n, &ones);
    a.push(row);
    b.push(beta);
    // k X_ij - Z_ij = 1; off-diagonal coefficients are halved because
    // <A, X> counts both triangles.
    for j in 0..n {
        for i in 0..=j {
            let h = if i == j { 1.0 } else { 0.5 };
            let mut row = zero_row();
            row[0] = CoeffMatrix::from_triplets(n, &[(i, j, h * k)]);
            row[1] = CoeffMatrix::from_triplets(n, &[(i, j, -h)]);
            a.push(row);
            b.push(1.0);
        }
    }
    // X_ij - w_ij = 0 for i < j.
    let mut w = 0;
    for j in 1..n {
        for i in 0..j {
            let mut row = zero_row();
            row[0] = CoeffMatrix::from_triplets(n, &[(i, j, 0.5)]);
            row[2] = CoeffMatrix::from_triplets(nw, &[(w, w, -1.0)]);
            a.push(row);
            b.push(0.0);
            w += 1;
        }
    }
    SdpProblem::new(blocks, c, a, b).map_err(|e| GenerateError::InvalidSize(e.to_string()))
}

/// Random sparse symmetric positive definite matrix with unit-scale entries.
pub fn random_spd(n: usize, density: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut b: DMatrix<f64> = DMatrix::zeros(n, n);
    for j in 1..n {
        for i in 0..j {
            if rng.gen::<f64>() < density {
                let v = rng.gen_range(-1.0..1.0);
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| b[(i, j)].abs()).sum();
        b[(i, i)] = off + rng.gen_range(0.1..2.0);
    }
    b
}

/// Optimal diagonal preconditioning in dual form with `y = (d, tau)`:
/// `max tau  s.t.  D + S_1 = B,  tau B - D + S_2 = 0`.
pub fn diag_precond(n: usize, density: f64, seed: u64) -> Result<SdpProblem, GenerateError> {
    check_size(n, 1, "diagprecond")?;
    check_prob(density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    diag_precond_from(&random_spd(n, density, &mut rng))
}

pub fn diag_precond_from(b: &DMatrix<f64>) -> Result<SdpProblem, GenerateError> {
    let n = b.nrows();
    check_size(n, 1, "diagprecond")?;
    if b.ncols() != n || b.clone().cholesky().is_none() {
        return Err(GenerateError::InvalidSize("B must be square positive definite".into()));
    }
    let bt: Vec<_> = (0..n)
        .flat_map(|j| (0..=j).map(move |i| (i, j)))
        .map(|(i, j)| (i, j, b[(i, j)]))
        .collect();
    let bc = CoeffMatrix::from_triplets(n, &bt);
    let mut a = Vec::with_capacity(n + 1);
    for i in 0..n {
        a.push(vec![
            CoeffMatrix::from_triplets(n, &[(i, i, 1.0)]),
            CoeffMatrix::from_triplets(n, &[(i, i, -1.0)]),
        ]);
    }
    a.push(vec![CoeffMatrix::zero(n), bc.clone()]);
    let mut rhs = vec![0.0; n];
    rhs.push(1.0);
    SdpProblem::new(
        vec![Block::Sdp(n), Block::Sdp(n)],
        vec![bc, CoeffMatrix::zero(n)],
        a,
        rhs,
    )
    .map_err(|e| GenerateError::InvalidSize(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdpa_io::write_sdpa;

    #[test]
    fn maxcut_shapes() {
        let p = maxcut(10, 0.5, 3).unwrap();
        assert_eq!(p.m(), 10);
        assert_eq!(p.total_order(), 10);
        // -L/4 has zero row sums.
        let c = p.c[0].to_dense();
        for i in 0..10 {
            assert!(c.row(i).sum().abs() < 1e-15);
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let a = write_sdpa(&graph_partition(5, 2.0, None, 0.4, 9).unwrap());
        let b = write_sdpa(&graph_partition(5, 2.0, None, 0.4, 9).unwrap());
        let c = write_sdpa(&graph_partition(5, 2.0, None, 0.4, 10).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gpp_row_count() {
        let n = 6;
        let p = graph_partition(n, 2.0, None, 0.5, 1).unwrap();
        assert_eq!(p.m(), n + 1 + n * (n + 1) / 2 + n * (n - 1) / 2);
        assert_eq!(p.total_order(), 2 * n + n * (n - 1) / 2);
    }

    #[test]
    fn gpp_interior_point_is_feasible() {
        // X = (1 - c) I + c J with c = 1/2 satisfies every equation.
        let n = 5;
        let p = graph_partition(n, 2.0, None, 0.5, 4).unwrap();
        let x = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.5 });
        let z = &x * 2.0 - DMatrix::from_element(n, n, 1.0);
        let w = nalgebra::DVector::from_element(n * (n - 1) / 2, 0.5);
        let xs = crate::model::BlockSym(vec![
            crate::model::BlockMat::Dense(x),
            crate::model::BlockMat::Dense(z),
            crate::model::BlockMat::Diag(w),
        ]);
        let ax = p.primal_map(&xs).unwrap();
        assert!((ax - &p.b).amax() < 1e-12);
    }

    #[test]
    fn invalid_sizes() {
        assert!(maxcut(0, 0.5, 0).is_err());
        assert!(maxcut(3, 1.5, 0).is_err());
        assert!(graph_partition(1, 2.0, None, 0.5, 0).is_err());
        assert!(diag_precond_from(&DMatrix::from_element(2, 2, 1.0)).is_err());
        assert!("nope".parse::<Family>().is_err());
    }
}
