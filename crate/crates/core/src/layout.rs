//! Force-directed layout of the story similarity network.
//!
//! One node per story. Edges carry the cosine similarity as weight; pairs
//! below the threshold are dropped except for consecutive story indices,
//! which are always kept and flagged as successive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::SimilarityMatrix;
use crate::Scalar;

pub const DEFAULT_ITERATIONS: usize = 50;
pub const DEFAULT_EDGE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutOptions {
    pub iterations: usize,
    pub edge_threshold: f64,
    pub seed: u64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions { iterations: DEFAULT_ITERATIONS, edge_threshold: DEFAULT_EDGE_THRESHOLD, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutNode<T> {
    pub index: usize,
    pub x: T,
    pub y: T,
    /// `index / (n - 1)`; consecutive stories get nearby values.
    pub color: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutEdge<T> {
    pub i: usize,
    pub j: usize,
    pub weight: T,
    pub successive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutGraph<T> {
    pub nodes: Vec<LayoutNode<T>>,
    pub edges: Vec<LayoutEdge<T>>,
}

impl<T: Scalar> LayoutGraph<T> {
    pub fn position(&self, index: usize) -> (T, T) {
        let n = &self.nodes[index];
        (n.x, n.y)
    }

    pub fn distance(&self, a: usize, b: usize) -> T {
        let (ax, ay) = self.position(a);
        let (bx, by) = self.position(b);
        ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
    }

    pub fn successive_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.successive).count()
    }
}

fn layout_edges<T: Scalar>(matrix: &SimilarityMatrix<T>, threshold: T) -> Vec<LayoutEdge<T>> {
    let n = matrix.size();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = matrix.get(i, j);
            let successive = j == i + 1;
            if successive || w >= threshold {
                edges.push(LayoutEdge { i, j, weight: w, successive });
            }
        }
    }
    edges
}

/// Raw Fruchterman-Reingold iteration on a dense weight matrix, starting
/// from uniform random positions in the unit square. Optimal distance is
/// `sqrt(1 / n)` and the temperature cools linearly from a tenth of the
/// initial extent.
fn fruchterman_reingold<T: Scalar>(weights: &[T], n: usize, iterations: usize, seed: u64) -> Vec<[T; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<[T; 2]> =
        (0..n).map(|_| [T::of(rng.random::<f64>()), T::of(rng.random::<f64>())]).collect();
    let k = (T::one() / T::of_usize(n)).sqrt();
    let extent = |axis: usize, pos: &[[T; 2]]| {
        let (lo, hi) = pos.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
            (lo.min(p[axis]), hi.max(p[axis]))
        });
        hi - lo
    };
    let mut t = extent(0, &pos).max(extent(1, &pos)) * T::of(0.1);
    let dt = t / T::of_usize(iterations + 1);
    let min_dist = T::of(0.01);
    let threshold = T::of(1e-4);
    for _ in 0..iterations {
        let mut moved = T::zero();
        let mut step = vec![[T::zero(); 2]; n];
        for i in 0..n {
            let mut disp = [T::zero(); 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let delta = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
                let dist = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt().max(min_dist);
                let force = k * k / (dist * dist) - weights[i * n + j] * dist / k;
                disp[0] = disp[0] + delta[0] * force;
                disp[1] = disp[1] + delta[1] * force;
            }
            let mut length = (disp[0] * disp[0] + disp[1] * disp[1]).sqrt();
            if length < min_dist {
                length = T::of(0.1);
            }
            step[i] = [disp[0] * t / length, disp[1] * t / length];
            moved = moved + step[i][0] * step[i][0] + step[i][1] * step[i][1];
        }
        for (p, s) in pos.iter_mut().zip(&step) {
            p[0] = p[0] + s[0];
            p[1] = p[1] + s[1];
        }
        t = t - dt;
        if moved.sqrt() / T::of_usize(n) < threshold {
            break;
        }
    }
    pos
}

/// Centers positions on the origin and scales the largest coordinate to 1.
fn rescale<T: Scalar>(pos: &mut [[T; 2]]) {
    if pos.is_empty() {
        return;
    }
    let n = T::of_usize(pos.len());
    for axis in 0..2 {
        let mean = pos.iter().map(|p| p[axis]).sum::<T>() / n;
        for p in pos.iter_mut() {
            p[axis] = p[axis] - mean;
        }
    }
    let lim = pos.iter().flat_map(|p| [p[0].abs(), p[1].abs()]).fold(T::zero(), T::max);
    if lim > T::zero() {
        for p in pos.iter_mut() {
            p[0] = p[0] / lim;
            p[1] = p[1] / lim;
        }
    }
}

/// Deterministic for a fixed `(matrix, options)`; positions land in `[-1, 1]^2`.
pub fn spring_layout<T: Scalar>(matrix: &SimilarityMatrix<T>, options: &LayoutOptions) -> LayoutGraph<T> {
    let n = matrix.size();
    let edges = layout_edges(matrix, T::of(options.edge_threshold));
    let mut pos = if n <= 1 {
        vec![[T::zero(); 2]; n]
    } else {
        let mut weights = vec![T::zero(); n * n];
        for e in &edges {
            weights[e.i * n + e.j] = e.weight;
            weights[e.j * n + e.i] = e.weight;
        }
        fruchterman_reingold(&weights, n, options.iterations.max(1), options.seed)
    };
    rescale(&mut pos);
    let denom = T::of_usize(n.saturating_sub(1).max(1));
    let nodes = pos
        .into_iter()
        .enumerate()
        .map(|(index, [x, y])| LayoutNode { index, x, y, color: T::of_usize(index) / denom })
        .collect();
    LayoutGraph { nodes, edges }
}

pub fn export_layout<T: Scalar + Serialize>(graph: &LayoutGraph<T>) -> String {
    serde_json::to_string_pretty(graph).expect("layout serializes")
}

pub fn parse_layout<T: Scalar + for<'de> Deserialize<'de>>(text: &str) -> Result<LayoutGraph<T>, serde_json::Error> {
    serde_json::from_str(text)
}
