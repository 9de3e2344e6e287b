//! Primal graph and the graph-based attributes.

use crate::csp::CspInstance;

/// Undirected simple graph with one vertex per variable; two vertices are
/// adjacent iff the variables share a constraint scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimalGraph {
    adj: Vec<Vec<usize>>,
    edges: usize,
}

impl PrimalGraph {
    /// Builds a graph from an edge list. Self-loops and repeated edges are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut matrix = vec![vec![false; n]; n];
        for (a, b) in edges {
            if a != b {
                matrix[a][b] = true;
                matrix[b][a] = true;
            }
        }
        let adj: Vec<Vec<usize>> = matrix
            .iter()
            .map(|row| row.iter().enumerate().filter_map(|(j, &e)| e.then_some(j)).collect())
            .collect();
        let edges = adj.iter().map(Vec::len).sum::<usize>() / 2;
        PrimalGraph { adj, edges }
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges
    }

    /// Sorted neighbour list.
    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }
}

pub fn build_primal_graph(instance: &CspInstance) -> PrimalGraph {
    let edges = instance.constraints().iter().flat_map(|c| {
        c.scope
            .iter()
            .enumerate()
            .flat_map(move |(i, &a)| c.scope[i + 1..].iter().map(move |&b| (a, b)))
    });
    PrimalGraph::from_edges(instance.num_variables(), edges)
}

/// Edges over pairs of distinct vertices; 0 when there are fewer than two vertices.
pub fn edge_density(g: &PrimalGraph) -> f64 {
    let n = g.num_vertices();
    if n < 2 {
        return 0.0;
    }
    g.num_edges() as f64 / (n * (n - 1) / 2) as f64
}

/// Mean local edge density of neighbourhoods; vertices with fewer than two
/// neighbours contribute 0.
pub fn clustering_coefficient(g: &PrimalGraph) -> f64 {
    let n = g.num_vertices();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = (0..n)
        .map(|v| {
            let nb = g.neighbours(v);
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                links += nb[i + 1..].iter().filter(|&&b| g.adjacent(a, b)).count();
            }
            links as f64 / (k * (k - 1) / 2) as f64
        })
        .sum();
    total / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeFeatures {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
}

/// Degree statistics, each divided by |V|. The standard deviation is the
/// population one.
pub fn degree_features(g: &PrimalGraph) -> DegreeFeatures {
    let n = g.num_vertices();
    if n == 0 {
        return DegreeFeatures {
            min: 0.0,
            max: 0.0,
            mean: 0.0,
            median: 0.0,
            stddev: 0.0,
        };
    }
    let nf = n as f64;
    let mut degs: Vec<f64> = (0..n).map(|v| g.degree(v) as f64).collect();
    degs.sort_by(f64::total_cmp);
    let mean = degs.iter().sum::<f64>() / nf;
    let var = degs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / nf;
    DegreeFeatures {
        min: degs[0] / nf,
        max: degs[n - 1] / nf,
        mean: mean / nf,
        median: super::stats::quantile(&degs, 0.5) / nf,
        stddev: var.sqrt() / nf,
    }
}

/// Raw width of an ordering: the largest number of earlier neighbours.
pub fn ordering_width(g: &PrimalGraph, order: &[usize]) -> usize {
    let mut rank = vec![0usize; g.num_vertices()];
    for (i, &v) in order.iter().enumerate() {
        rank[v] = i;
    }
    order
        .iter()
        .map(|&v| g.neighbours(v).iter().filter(|&&u| rank[u] < rank[v]).count())
        .max()
        .unwrap_or(0)
}

/// Width of the declaration (identity) ordering divided by |V|.
pub fn width_of_ordering(g: &PrimalGraph) -> f64 {
    let n = g.num_vertices();
    if n == 0 {
        return 0.0;
    }
    let order: Vec<usize> = (0..n).collect();
    ordering_width(g, &order) as f64 / n as f64
}

/// Minimum width over all orderings, by repeatedly removing a vertex of
/// minimum remaining degree and placing it last.
pub fn graph_width(g: &PrimalGraph) -> usize {
    let n = g.num_vertices();
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut removed = vec![false; n];
    let mut width = 0;
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !removed[v])
            .min_by_key(|&v| degree[v])
            .expect("vertices remain");
        width = width.max(degree[v]);
        removed[v] = true;
        for &u in g.neighbours(v) {
            if !removed[u] {
                degree[u] -= 1;
            }
        }
    }
    width
}

/// [`graph_width`] divided by |V|.
pub fn width_of_graph(g: &PrimalGraph) -> f64 {
    let n = g.num_vertices();
    if n == 0 {
        return 0.0;
    }
    graph_width(g) as f64 / n as f64
}
