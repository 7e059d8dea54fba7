//! Synthetic data generators.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};
use crate::graph::MixedGraph;
use crate::rng::{derived_rng, Rng};
use crate::stats::logistic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandaloneFamily {
    LinearGaussian,
    PostNonlinear,
    LatentConfounder,
}

impl StandaloneFamily {
    pub fn name(self) -> &'static str {
        match self {
            StandaloneFamily::LinearGaussian => "linear_gaussian",
            StandaloneFamily::PostNonlinear => "post_nonlinear",
            StandaloneFamily::LatentConfounder => "latent_confounder",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandaloneSpec {
    pub family: StandaloneFamily,
    pub signal: f64,
    pub n: usize,
    /// Conditioning dimension |X|.
    pub d: usize,
    pub seed: u64,
}

/// Complete data laid out as columns `[Z, Y, X1..Xd]`.
#[derive(Debug, Clone)]
pub struct StandaloneData {
    pub values: Matrix,
    pub names: Vec<String>,
}

impl StandaloneData {
    pub const Z: usize = 0;
    pub const Y: usize = 1;

    pub fn x_columns(&self) -> Vec<usize> {
        (2..self.values.cols()).collect()
    }
}

/// Uniform on [0.5, 1.5] with a random sign.
pub fn draw_weight(rng: &mut Rng) -> f64 {
    let w = rng.random_range(0.5..1.5);
    if rng.random::<bool>() {
        w
    } else {
        -w
    }
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gen_standalone(spec: &StandaloneSpec) -> Result<StandaloneData> {
    let StandaloneSpec { family, signal, n, d, seed } = *spec;
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    if d == 0 {
        return Err(Error::Config("conditioning dimension must be positive".into()));
    }
    if family == StandaloneFamily::LatentConfounder && d < 3 {
        return Err(Error::Config("latent confounder DGP needs d >= 3".into()));
    }
    let mut coef_rng = derived_rng(seed, &[0]);
    let beta: Vec<f64> = (0..d).map(|_| draw_weight(&mut coef_rng)).collect();
    let gamma: Vec<f64> = (0..d).map(|_| draw_weight(&mut coef_rng)).collect();
    let mut rng = derived_rng(seed, &[1]);
    let x: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| normal(&mut rng)).collect()).collect();
    let dot = |w: &[f64], i: usize| w.iter().zip(&x).map(|(w, c)| w * c[i]).sum::<f64>();
    let mut z = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        match family {
            StandaloneFamily::LinearGaussian => {
                y[i] = dot(&gamma, i) + normal(&mut rng);
                z[i] = dot(&beta, i) + signal * y[i] + normal(&mut rng);
            }
            StandaloneFamily::PostNonlinear => {
                y[i] = dot(&gamma, i) + normal(&mut rng);
                z[i] = logistic(dot(&beta, i) + signal * y[i] + normal(&mut rng));
            }
            StandaloneFamily::LatentConfounder => {
                let l = normal(&mut rng);
                z[i] = x[0][i].sin() + x[1][i] * x[1][i] + 0.5 * l + normal(&mut rng);
                y[i] = signal * l + x[2][i].cos() + normal(&mut rng);
            }
        }
    }
    let mut cols = vec![z, y];
    cols.extend(x);
    let mut names = vec!["Z".to_string(), "Y".to_string()];
    names.extend((1..=d).map(|j| format!("X{j}")));
    Ok(StandaloneData {
        values: Matrix::from_columns(cols),
        names,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Linear,
    Nonlinear,
}

impl EdgeKind {
    pub fn name(self) -> &'static str {
        match self {
            EdgeKind::Linear => "linear",
            EdgeKind::Nonlinear => "nonlinear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeFunction {
    /// `w x^2`
    Quadratic,
    /// `w sin(2x)`
    Sinusoidal,
    /// `w |x|`
    Absolute,
    /// `w tanh(1.5x)`
    Saturating,
}

impl EdgeFunction {
    pub const ALL: [EdgeFunction; 4] = [
        EdgeFunction::Quadratic,
        EdgeFunction::Sinusoidal,
        EdgeFunction::Absolute,
        EdgeFunction::Saturating,
    ];

    pub fn apply(self, x: f64, w: f64) -> f64 {
        match self {
            EdgeFunction::Quadratic => w * x * x,
            EdgeFunction::Sinusoidal => w * (2.0 * x).sin(),
            EdgeFunction::Absolute => w * x.abs(),
            EdgeFunction::Saturating => w * (1.5 * x).tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMechanism {
    pub parent: usize,
    pub child: usize,
    pub weight: f64,
    /// `None` for linear edges.
    pub function: Option<EdgeFunction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDgpSpec {
    pub graph: MixedGraph,
    pub edges: Vec<EdgeMechanism>,
    pub noise_scale: f64,
    pub n: usize,
    pub seed: u64,
}

impl GraphDgpSpec {
    /// Draws a weight (and, for nonlinear edges, a function) for every edge.
    pub fn random(graph: MixedGraph, kind: EdgeKind, noise_scale: f64, n: usize, seed: u64) -> Result<Self> {
        if !graph.is_dag() {
            return Err(Error::Contract("graph DGP needs a DAG".into()));
        }
        let mut rng = derived_rng(seed, &[0]);
        let edges = graph
            .directed_edges()
            .into_iter()
            .map(|(parent, child)| {
                let weight = draw_weight(&mut rng);
                let function = match kind {
                    EdgeKind::Linear => None,
                    EdgeKind::Nonlinear => Some(EdgeFunction::ALL[rng.random_range(0..4)]),
                };
                EdgeMechanism { parent, child, weight, function }
            })
            .collect();
        Ok(GraphDgpSpec {
            graph,
            edges,
            noise_scale,
            n,
            seed,
        })
    }
}

/// Ancestral sampling: each node is the sum of its edge contributions plus
/// N(0, noise_scale^2) noise.
pub fn gen_graph_data(spec: &GraphDgpSpec) -> Result<Matrix> {
    let order = spec
        .graph
        .topological_order()
        .filter(|_| spec.graph.is_fully_directed())
        .ok_or_else(|| Error::Contract("graph DGP needs a DAG".into()))?;
    let p = spec.graph.p();
    for e in &spec.edges {
        if !spec.graph.has_directed(e.parent, e.child) {
            return Err(Error::Contract(format!("mechanism for missing edge {} -> {}", e.parent, e.child)));
        }
    }
    if spec.edges.len() != spec.graph.n_edges() {
        return Err(Error::Contract("every edge needs exactly one mechanism".into()));
    }
    let mut rng = derived_rng(spec.seed, &[1]);
    let mut cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..spec.n).map(|_| spec.noise_scale * normal(&mut rng)).collect())
        .collect();
    for &v in &order {
        for e in spec.edges.iter().filter(|e| e.child == v) {
            let (parent, child) = if e.parent < v {
                let (a, b) = cols.split_at_mut(v);
                (&a[e.parent], &mut b[0])
            } else {
                let (a, b) = cols.split_at_mut(e.parent);
                (&b[0], &mut a[v])
            };
            for (c, &x) in child.iter_mut().zip(parent.iter()) {
                *c += match e.function {
                    None => e.weight * x,
                    Some(f) => f.apply(x, e.weight),
                };
            }
        }
    }
    Ok(Matrix::from_columns(cols))
}

/// Random topological order, then each forward pair with probability
/// `edge_prob`.
pub fn erdos_renyi_dag(p: usize, edge_prob: f64, seed: u64) -> Result<MixedGraph> {
    if p == 0 {
        return Err(Error::Config("p must be positive".into()));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Config(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = derived_rng(seed, &[]);
    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(&mut rng);
    let mut g = MixedGraph::empty(p);
    for a in 0..p {
        for b in a + 1..p {
            if rng.random::<f64>() < edge_prob {
                g.set_directed(order[a], order[b]);
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialKind {
    Hub,
    HubNonlinear,
}

impl AdversarialKind {
    pub fn name(self) -> &'static str {
        match self {
            AdversarialKind::Hub => "hub",
            AdversarialKind::HubNonlinear => "hub_nonlinear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSpec {
    pub kind: AdversarialKind,
    pub n: usize,
    pub children: usize,
    /// Loading of each child on the hub.
    pub child_coef: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl AdversarialSpec {
    pub fn new(kind: AdversarialKind, n: usize, seed: u64) -> Self {
        AdversarialSpec {
            kind,
            n,
            children: 10,
            child_coef: 0.3,
            noise_sd: 0.5,
            seed,
        }
    }
}

/// Hub designs with a null `Z _||_ Y | X`: columns `[Z, Y, X0, C1..Cc]`
/// where `X0` is the hub and the `C` are its children.
pub fn gen_adversarial(spec: &AdversarialSpec) -> Result<StandaloneData> {
    if spec.n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let mut rng = derived_rng(spec.seed, &[]);
    let n = spec.n;
    let hub: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let children: Vec<Vec<f64>> = (0..spec.children)
        .map(|_| hub.iter().map(|h| spec.child_coef * h + normal(&mut rng)).collect())
        .collect();
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for &h in &hub {
        let (fy, fz) = match spec.kind {
            AdversarialKind::Hub => (h, h),
            AdversarialKind::HubNonlinear => (h.sin(), h * h),
        };
        y.push(fy + spec.noise_sd * normal(&mut rng));
        z.push(fz + spec.noise_sd * normal(&mut rng));
    }
    let mut cols = vec![z, y, hub];
    cols.extend(children);
    let mut names = vec!["Z".to_string(), "Y".to_string(), "X0".to_string()];
    names.extend((1..=spec.children).map(|j| format!("C{j}")));
    Ok(StandaloneData {
        values: Matrix::from_columns(cols),
        names,
    })
}
