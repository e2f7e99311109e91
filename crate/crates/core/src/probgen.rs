//! Seeded instance generators: random positive SDPs with a planted feasible
//! point, vertex-cover relaxations and max-cut relaxations.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::model::{ProblemMeta, SdpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Random,
    VertexCover,
    MaxCut,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random => "random",
            Scheme::VertexCover => "vertex-cover",
            Scheme::MaxCut => "max-cut",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(Scheme::Random),
            "vertex-cover" => Ok(Scheme::VertexCover),
            "max-cut" => Ok(Scheme::MaxCut),
            other => Err(format!("unknown scheme '{other}'")),
        }
    }
}

/// For graph schemes `n` is the vertex count and `m` the edge count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub scheme: Scheme,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

pub fn generate(spec: &GenSpec) -> Result<SdpProblem> {
    match spec.scheme {
        Scheme::Random => gen_random_positive(spec.n, spec.m, spec.seed),
        Scheme::VertexCover => gen_vertex_cover(spec.n, spec.m, spec.seed),
        Scheme::MaxCut => gen_max_cut(spec.n, spec.m, spec.seed),
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.sample(StandardNormal))
}

pub const RANDOM_DISTRIBUTION: &str =
    "entries standard normal; C = MᵀM + I; Aℓ = (N + Nᵀ)/2; bℓ = tr(Aℓ X₀) with X₀ = PPᵀ/n + I";

/// Random positive instance together with the planted feasible point `X₀`.
pub fn random_positive_instance(n: usize, m: usize, seed: u64) -> Result<(SdpProblem, SymMatrix)> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(format!("need n, m >= 1, got n = {n}, m = {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mm = normal_matrix(&mut rng, n);
    let c = SymMatrix::from_dmatrix(mm.transpose() * &mm + DMatrix::identity(n, n))?;
    let a: Vec<SymMatrix> =
        (0..m).map(|_| SymMatrix::from_dmatrix(normal_matrix(&mut rng, n))).collect::<Result<_>>()?;
    let pm = normal_matrix(&mut rng, n);
    let planted = SymMatrix::from_dmatrix(&pm * pm.transpose() / n as f64 + DMatrix::identity(n, n))?;
    let b = a.iter().map(|al| al.dot(&planted)).collect();
    let meta = ProblemMeta {
        scheme: Some(Scheme::Random.name().into()),
        seed: Some(seed),
        distribution: Some(RANDOM_DISTRIBUTION.into()),
        ..Default::default()
    };
    Ok((SdpProblem::new(c, a, b)?.with_meta(meta), planted))
}

pub fn gen_random_positive(n: usize, m: usize, seed: u64) -> Result<SdpProblem> {
    Ok(random_positive_instance(n, m, seed)?.0)
}

/// `m` distinct edges drawn uniformly from the complete graph on `n` vertices.
pub fn random_graph(n: usize, m: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let total = n * n.saturating_sub(1) / 2;
    if m > total {
        return Err(Error::InvalidGraph(format!("{m} edges requested but K{n} has only {total}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, total, m).into_vec();
    picks.sort_unstable();
    // Enumerate pairs (i < j) row by row.
    let mut edges = Vec::with_capacity(m);
    let mut it = picks.into_iter().peekable();
    let mut idx = 0;
    'outer: for i in 0..n {
        for j in (i + 1)..n {
            match it.peek() {
                None => break 'outer,
                Some(&k) if k == idx => {
                    edges.push((i, j));
                    it.next();
                }
                _ => {}
            }
            idx += 1;
        }
    }
    Ok(edges)
}

fn validate_graph(n: usize, edges: &[(usize, usize)]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range for {n} vertices")));
        }
        if u == v {
            return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
        }
    }
    Ok(())
}

fn sparse(n: usize, entries: &[(usize, usize, f64)]) -> SymMatrix {
    let mut m = DMatrix::zeros(n, n);
    for &(i, j, v) in entries {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    SymMatrix::from_dmatrix(m).expect("square")
}

/// Vertex-cover relaxation on `n` vertices (0-based); index 0 is the homogenizing corner.
///
/// Constraints, in order: one per vertex (`b = 0`), one per edge (`b = 2`), the corner (`b = 1`).
pub fn vertex_cover_problem(n: usize, edges: &[(usize, usize)]) -> Result<SdpProblem> {
    validate_graph(n, edges)?;
    let dim = n + 1;
    let mut a = Vec::with_capacity(n + edges.len() + 1);
    let mut b = Vec::with_capacity(a.capacity());
    for v in 1..=n {
        a.push(sparse(dim, &[(0, v, -1.0), (v, v, 2.0)]));
        b.push(0.0);
    }
    for &(u, v) in edges {
        let (u, v) = (u + 1, v + 1);
        a.push(sparse(dim, &[(u, v, -1.0), (0, u, 1.0), (0, v, 1.0)]));
        b.push(2.0);
    }
    a.push(sparse(dim, &[(0, 0, 1.0)]));
    b.push(1.0);
    SdpProblem::new(SymMatrix::identity(dim), a, b)
}

pub fn gen_vertex_cover(n: usize, m: usize, seed: u64) -> Result<SdpProblem> {
    let edges = random_graph(n, m, seed)?;
    let meta = ProblemMeta { scheme: Some(Scheme::VertexCover.name().into()), seed: Some(seed), ..Default::default() };
    Ok(vertex_cover_problem(n, &edges)?.with_meta(meta))
}

pub fn laplacian(n: usize, edges: &[(usize, usize)]) -> SymMatrix {
    let mut w = DMatrix::zeros(n, n);
    for &(u, v) in edges {
        w[(u, u)] += 1.0;
        w[(v, v)] += 1.0;
        w[(u, v)] -= 1.0;
        w[(v, u)] -= 1.0;
    }
    SymMatrix::symmetrized(w)
}

/// Max-cut relaxation `min tr((ξI − W) X)`, `diag(X) = 1`, with `ξ = 2·max_degree + 1`.
pub fn max_cut_problem(n: usize, edges: &[(usize, usize)]) -> Result<SdpProblem> {
    if n == 0 {
        return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
    }
    validate_graph(n, edges)?;
    let w = laplacian(n, edges);
    let max_deg = w.diag().into_iter().fold(0.0f64, f64::max);
    let xi = 2.0 * max_deg + 1.0;
    let c = SymMatrix::identity(n).scale(xi).sub(&w);
    let a = (0..n).map(|l| SymMatrix::unit(n, l, l)).collect();
    let meta = ProblemMeta { scheme: Some(Scheme::MaxCut.name().into()), xi: Some(xi), ..Default::default() };
    Ok(SdpProblem::new(c, a, vec![1.0; n])?.with_meta(meta))
}

pub fn gen_max_cut(n: usize, m: usize, seed: u64) -> Result<SdpProblem> {
    let edges = random_graph(n, m, seed)?;
    let mut p = max_cut_problem(n, &edges)?;
    p.meta.seed = Some(seed);
    Ok(p)
}

/// `tr(W X) = ξ·n − tr(C X)` for a max-cut instance; `None` if `ξ` is not recorded.
pub fn cut_value(prob: &SdpProblem, objective: f64) -> Option<f64> {
    prob.meta.xi.map(|xi| xi * prob.n() as f64 - objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::min_eigenvalue;
    use crate::model::infeasibility;
    use proptest::prelude::*;

    #[test]
    fn vertex_cover_single_vertex() {
        let p = vertex_cover_problem(1, &[]).unwrap();
        assert_eq!((p.n(), p.m()), (2, 2));
        assert_eq!(p.a()[0], SymMatrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 2.0]]).unwrap());
        assert_eq!(p.b(), &[0.0, 1.0]);
        assert_eq!(p.a()[1], SymMatrix::unit(2, 0, 0));
    }

    #[test]
    fn vertex_cover_edge_matrix() {
        let p = vertex_cover_problem(2, &[(0, 1)]).unwrap();
        let e = &p.a()[2];
        let want = SymMatrix::from_rows(&[vec![0.0, 1.0, 1.0], vec![1.0, 0.0, -1.0], vec![1.0, -1.0, 0.0]]).unwrap();
        assert_eq!(e, &want);
        assert_eq!(p.b()[2], 2.0);
        assert_eq!(gen_vertex_cover(5, 10, 3).unwrap().m(), 16);
    }

    #[test]
    fn bad_graphs() {
        assert!(vertex_cover_problem(3, &[(0, 0)]).is_err());
        assert!(vertex_cover_problem(3, &[(0, 1), (1, 0)]).is_err());
        assert!(max_cut_problem(3, &[(0, 3)]).is_err());
        assert!(random_graph(3, 4, 0).is_err());
    }

    #[test]
    fn k3_max_cut() {
        let p = gen_max_cut(3, 3, 1).unwrap();
        let w = SymMatrix::from_rows(&[vec![2.0, -1.0, -1.0], vec![-1.0, 2.0, -1.0], vec![-1.0, -1.0, 2.0]]).unwrap();
        assert_eq!(p.meta.xi, Some(5.0));
        assert_eq!(p.c(), &SymMatrix::identity(3).scale(5.0).sub(&w));
        assert_eq!(p.max_residual(&SymMatrix::identity(3)), 0.0);
        assert_eq!(cut_value(&p, 6.0), Some(9.0));
    }

    #[test]
    fn empty_graph_max_cut() {
        let p = max_cut_problem(4, &[]).unwrap();
        assert_eq!(p.meta.xi, Some(1.0));
        assert_eq!(p.c(), &SymMatrix::identity(4));
    }

    #[test]
    fn random_graph_edges_distinct() {
        let e = random_graph(10, 45, 7).unwrap();
        assert_eq!(e.len(), 45);
        let e = random_graph(10, 12, 7).unwrap();
        assert!(validate_graph(10, &e).is_ok());
        assert_eq!(e, random_graph(10, 12, 7).unwrap());
    }

    proptest! {
        #[test]
        fn random_instances_are_well_formed(n in 1usize..8, m in 1usize..5, seed in any::<u64>()) {
            let (p, planted) = random_positive_instance(n, m, seed).unwrap();
            prop_assert!(min_eigenvalue(p.c()) >= 1.0 - 1e-9);
            let scale = 1.0 + p.b().iter().fold(0.0f64, |m, b| m.max(b.abs()));
            prop_assert!(infeasibility(&p, &planted).unwrap() <= 1e-10 * scale);
            prop_assert_eq!(p, gen_random_positive(n, m, seed).unwrap());
        }

        #[test]
        fn max_cut_cost_is_pd(n in 1usize..9, density in 0.0f64..1.0, seed in any::<u64>()) {
            let m = ((n * (n - 1) / 2) as f64 * density) as usize;
            let p = gen_max_cut(n, m, seed).unwrap();
            prop_assert!(min_eigenvalue(p.c()) > 0.0);
        }

        #[test]
        fn vertex_cover_counts(n in 1usize..8, density in 0.0f64..1.0, seed in any::<u64>()) {
            let m = ((n * (n - 1) / 2) as f64 * density) as usize;
            let p = gen_vertex_cover(n, m, seed).unwrap();
            prop_assert_eq!(p.m(), n + m + 1);
            prop_assert_eq!(p.c(), &SymMatrix::identity(n + 1));
        }
    }
}
