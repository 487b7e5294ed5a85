//! Forward pass, pooling, loss and exact backpropagation.
//!
//! ```text
//! h0 = X W_x + e_entity
//! z_l = sum_rel A_rel h_l W_rel^l        (A_self = I, A_fact/A_syn symmetric counts)
//! h_{l+1} = relu(z_l)                    for l = 0, 1
//! g = [mean_v h2_v ; max_v h2_v]
//! a = w_out . relu(g W_hid + b_hid) + b_out,   m = sigmoid(a)
//! ```
//!
//! Nodes are put in id order before any arithmetic, so a view's score does
//! not depend on how its node and edge lists happen to be ordered.

use std::collections::{BTreeMap, HashMap};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::model::{MissingnessModel, Params, MESSAGE_LAYERS};
use crate::error::{Error, Result};
use crate::graph::{EdgeType, GraphIndex, NodeId, NodeType};
use crate::sampler::SubgraphView;

pub const BCE_EPSILON: f64 = 1e-7;

/// A view turned into dense features and typed neighbour lists.
#[derive(Debug, Clone)]
pub struct PreparedView {
    pub node_ids: Vec<NodeId>,
    features: Array2<f64>,
    /// Fact and synonym neighbour lists by local index, each sorted.
    neighbors: [Vec<Vec<usize>>; 2],
}

impl PreparedView {
    pub fn new(g: &GraphIndex, view: &SubgraphView, input_dim: usize) -> Result<Self> {
        let mut node_ids = view.nodes.clone();
        node_ids.sort();
        node_ids.dedup();
        let n = node_ids.len();
        let index: HashMap<&NodeId, usize> = node_ids.iter().enumerate().map(|(i, id)| (id, i)).collect();

        let mut features = Array2::zeros((n, input_dim));
        for (i, id) in node_ids.iter().enumerate() {
            let node = g
                .node(id)
                .ok_or_else(|| Error::integrity(format!("view node {id} is not in the graph")))?;
            if node.node_type != NodeType::Entity {
                return Err(Error::Shape(format!("view node {id} is not an entity")));
            }
            let f = node
                .feature
                .as_ref()
                .ok_or_else(|| Error::Shape(format!("node {id} has no feature")))?;
            if f.len() != input_dim {
                return Err(Error::Shape(format!(
                    "node {id} feature has dimension {}, model expects {input_dim}",
                    f.len()
                )));
            }
            features.row_mut(i).assign(&ArrayView2::from_shape((1, input_dim), f).expect("len checked").row(0));
        }

        let mut neighbors = [vec![Vec::new(); n], vec![Vec::new(); n]];
        for e in &view.edges {
            let slot = match e.edge_type {
                EdgeType::Fact => 0,
                EdgeType::Synonym => 1,
                EdgeType::EntityChunk => continue,
            };
            let (Some(&u), Some(&v)) = (index.get(&e.u), index.get(&e.v)) else {
                return Err(Error::integrity(format!("view edge {} leaves the view", e.id)));
            };
            neighbors[slot][v].push(u);
            if u != v {
                neighbors[slot][u].push(v);
            }
        }
        for lists in &mut neighbors {
            lists.iter_mut().for_each(|l| l.sort_unstable());
        }
        Ok(PreparedView {
            node_ids,
            features,
            neighbors,
        })
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }
}

/// `out[v] = sum over u in lists[v] of x[u]`; the adjoint of itself since
/// the neighbour relation is symmetric.
fn aggregate(lists: &[Vec<usize>], x: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(x.raw_dim());
    for (v, list) in lists.iter().enumerate() {
        let mut row = out.row_mut(v);
        for &u in list {
            row += &x.row(u);
        }
    }
    out
}

fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on the score clamped to `[ε, 1 - ε]`.
pub fn bce_loss(m: f64, y: f64) -> f64 {
    let mc = m.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -y * mc.ln() - (1.0 - y) * (1.0 - mc).ln()
}

/// d(bce_loss(sigmoid(a), y)) / da. Zero inside the clamp region.
fn bce_grad_logit(m: f64, y: f64) -> f64 {
    if m <= BCE_EPSILON || m >= 1.0 - BCE_EPSILON {
        0.0
    } else {
        m - y
    }
}

/// Concatenated mean and max over rows. Also returns the argmax row per column.
fn pool_with_argmax(h: &Array2<f64>) -> Result<(Array1<f64>, Vec<usize>)> {
    let (n, width) = h.dim();
    if n == 0 {
        return Err(Error::EmptyView);
    }
    let mut sum = Array1::<f64>::zeros(width);
    let mut max = h.row(0).to_owned();
    let mut argmax = vec![0; width];
    for (v, row) in h.axis_iter(Axis(0)).enumerate() {
        sum += &row;
        for (j, &x) in row.iter().enumerate() {
            if x > max[j] {
                max[j] = x;
                argmax[j] = v;
            }
        }
    }
    let mut g = Array1::zeros(2 * width);
    g.slice_mut(s![..width]).assign(&(sum / n as f64));
    g.slice_mut(s![width..]).assign(&max);
    Ok((g, argmax))
}

/// Graph-level readout: `[mean; max]` over node embeddings (rows).
pub fn pool(embeddings: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    pool_with_argmax(&embeddings.to_owned()).map(|(g, _)| g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub logit: f64,
    /// `sigmoid(logit)`.
    pub missingness: f64,
}

struct Trace {
    /// h0, h1, h2.
    h: Vec<Array2<f64>>,
    /// Pre-activations z0, z1.
    z: Vec<Array2<f64>>,
    /// Aggregated fact/synonym inputs per layer.
    agg: Vec<[Array2<f64>; 2]>,
    pooled: Array1<f64>,
    argmax: Vec<usize>,
    hidden_pre: Array1<f64>,
    hidden: Array1<f64>,
    logit: f64,
}

fn check_input(model: &MissingnessModel, view: &PreparedView) -> Result<()> {
    if view.features.ncols() != model.config.input_dim {
        return Err(Error::Shape(format!(
            "view features have dimension {}, model expects {}",
            view.features.ncols(),
            model.config.input_dim
        )));
    }
    if view.is_empty() {
        return Err(Error::EmptyView);
    }
    Ok(())
}

/// Per-layer node states, pre-activations and per-relation aggregates.
type EncoderTrace = (Vec<Array2<f64>>, Vec<Array2<f64>>, Vec<[Array2<f64>; 2]>);

fn encode_trace(p: &Params, view: &PreparedView) -> EncoderTrace {
    let mut h0 = view.features.dot(&p.input_proj);
    h0 += &p.type_embedding.row(0);
    let mut hs = vec![h0];
    let mut zs = Vec::with_capacity(MESSAGE_LAYERS);
    let mut aggs = Vec::with_capacity(MESSAGE_LAYERS);
    for layer in 0..MESSAGE_LAYERS {
        let h = &hs[layer];
        let [w_fact, w_syn, w_self] = &p.message[layer];
        let agg_fact = aggregate(&view.neighbors[0], h);
        let agg_syn = aggregate(&view.neighbors[1], h);
        let mut z = h.dot(w_self);
        z += &agg_fact.dot(w_fact);
        z += &agg_syn.dot(w_syn);
        hs.push(relu(&z));
        zs.push(z);
        aggs.push([agg_fact, agg_syn]);
    }
    (hs, zs, aggs)
}

fn forward(model: &MissingnessModel, view: &PreparedView) -> Result<Trace> {
    check_input(model, view)?;
    let p = &model.params;
    let (h, z, agg) = encode_trace(p, view);
    let (pooled, argmax) = pool_with_argmax(&h[MESSAGE_LAYERS])?;
    let hidden_pre = pooled.dot(&p.hidden_weight) + p.hidden_bias.row(0);
    let hidden = hidden_pre.mapv(|v| v.max(0.0));
    let logit = hidden.dot(&p.output_weight.column(0)) + p.output_bias[[0, 0]];
    Ok(Trace {
        h,
        z,
        agg,
        pooled,
        argmax,
        hidden_pre,
        hidden,
        logit,
    })
}

/// Final node embeddings (`h2`), one row per node in id order.
pub fn encode_prepared(model: &MissingnessModel, view: &PreparedView) -> Result<Array2<f64>> {
    check_input(model, view)?;
    let (mut h, _, _) = encode_trace(&model.params, view);
    Ok(h.pop().expect("at least one layer"))
}

/// Final node embeddings keyed by node id.
pub fn encode(model: &MissingnessModel, g: &GraphIndex, view: &SubgraphView) -> Result<BTreeMap<NodeId, Array1<f64>>> {
    let prepared = PreparedView::new(g, view, model.config.input_dim)?;
    let h = encode_prepared(model, &prepared)?;
    Ok(prepared
        .node_ids
        .iter()
        .cloned()
        .zip(h.axis_iter(Axis(0)).map(|r| r.to_owned()))
        .collect())
}

pub fn score_prepared(model: &MissingnessModel, view: &PreparedView) -> Result<Score> {
    let logit = forward(model, view)?.logit;
    Ok(Score {
        logit,
        missingness: sigmoid(logit),
    })
}

pub fn score(model: &MissingnessModel, g: &GraphIndex, view: &SubgraphView) -> Result<Score> {
    score_prepared(model, &PreparedView::new(g, view, model.config.input_dim)?)
}

/// Loss and exact gradient of `bce_loss(score(view), y)` for every parameter.
pub fn backward_prepared(model: &MissingnessModel, view: &PreparedView, y: f64) -> Result<(f64, Params)> {
    let t = forward(model, view)?;
    let p = &model.params;
    let m = sigmoid(t.logit);
    let loss = bce_loss(m, y);
    let d_logit = bce_grad_logit(m, y);
    let mut grad = Params::zeros(&model.config);

    // Classifier.
    grad.output_bias[[0, 0]] = d_logit;
    grad.output_weight.column_mut(0).assign(&(&t.hidden * d_logit));
    let d_hidden_pre = (&p.output_weight.column(0) * d_logit)
        * t.hidden_pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    grad.hidden_bias.row_mut(0).assign(&d_hidden_pre);
    let pooled_col = t.pooled.view().insert_axis(Axis(1));
    let d_pre_row = d_hidden_pre.view().insert_axis(Axis(0));
    grad.hidden_weight = pooled_col.dot(&d_pre_row);
    let d_pooled = p.hidden_weight.dot(&d_hidden_pre);

    // Readout.
    let h2 = &t.h[MESSAGE_LAYERS];
    let (n, width) = h2.dim();
    let mut d_h = Array2::<f64>::zeros((n, width));
    let d_mean = d_pooled.slice(s![..width]).mapv(|x| x / n as f64);
    for mut row in d_h.axis_iter_mut(Axis(0)) {
        row += &d_mean;
    }
    for (j, &v) in t.argmax.iter().enumerate() {
        d_h[[v, j]] += d_pooled[width + j];
    }

    // Message passing, last layer first.
    for layer in (0..MESSAGE_LAYERS).rev() {
        let mask = t.z[layer].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let d_z = d_h * mask;
        let [w_fact, w_syn, w_self] = &p.message[layer];
        let [agg_fact, agg_syn] = &t.agg[layer];
        let h_in = &t.h[layer];
        grad.message[layer][0] = agg_fact.t().dot(&d_z);
        grad.message[layer][1] = agg_syn.t().dot(&d_z);
        grad.message[layer][2] = h_in.t().dot(&d_z);
        let mut d_prev = d_z.dot(&w_self.t());
        d_prev += &aggregate(&view.neighbors[0], &d_z.dot(&w_fact.t()));
        d_prev += &aggregate(&view.neighbors[1], &d_z.dot(&w_syn.t()));
        d_h = d_prev;
    }

    // Input projection and type embedding.
    grad.input_proj = view.features.t().dot(&d_h);
    grad.type_embedding.row_mut(0).assign(&d_h.sum_axis(Axis(0)));
    Ok((loss, grad))
}

pub fn backward(model: &MissingnessModel, g: &GraphIndex, view: &SubgraphView, y: f64) -> Result<(f64, Params)> {
    backward_prepared(model, &PreparedView::new(g, view, model.config.input_dim)?, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::model::ModelConfig;
    use crate::graph::{ChunkId, Edge, Node};
    use crate::sampler::{induced_edges, CorruptionRecord, ViewLabel};
    use ndarray::array;

    fn tiny_model(d: usize, h: usize) -> MissingnessModel {
        let config = ModelConfig {
            input_dim: d,
            hidden_dim: h,
            classifier_dim: 2,
            ..ModelConfig::default()
        };
        MissingnessModel {
            params: Params::zeros(&config),
            config,
        }
    }

    fn path_graph(features: &[[f64; 2]]) -> (GraphIndex, SubgraphView) {
        let mut g = GraphIndex::new();
        g.add_chunk("c", "t").unwrap();
        let ids: Vec<String> = (0..features.len()).map(|i| format!("n{i}")).collect();
        for (id, f) in ids.iter().zip(features) {
            g.add_node(Node::entity(id.as_str(), id.as_str()).with_feature(f.to_vec())).unwrap();
        }
        for (k, w) in ids.windows(2).enumerate() {
            g.add_edge(Edge::fact(format!("f{k}"), w[0].as_str(), "next", w[1].as_str(), [ChunkId::from("c")]))
                .unwrap();
        }
        let nodes = ids.iter().map(|s| NodeId::from(s.as_str())).collect();
        let view = SubgraphView {
            root: "n0".into(),
            edges: induced_edges(&g, &nodes),
            nodes: nodes.into_iter().collect(),
            label: ViewLabel::Unlabeled,
            corruption: CorruptionRecord::default(),
        };
        (g, view)
    }

    #[test]
    fn zero_parameters_give_zero_embeddings_and_half_score() {
        let (g, view) = path_graph(&[[0.3, 0.7]]);
        let m = tiny_model(2, 3);
        let h = encode(&m, &g, &view).unwrap();
        assert!(h.values().all(|v| v.iter().all(|x| *x == 0.0)));
        let s = score(&m, &g, &view).unwrap();
        assert_eq!(s.logit, 0.0);
        assert_eq!(s.missingness, 0.5);
    }

    #[test]
    fn identity_configuration_passes_features_through() {
        let (g, view) = path_graph(&[[0.3, 0.7], [1.0, 0.0], [0.2, 0.5]]);
        let mut m = tiny_model(2, 2);
        m.params.input_proj = Array2::eye(2);
        m.params.message[0][2] = Array2::eye(2);
        m.params.message[1][2] = Array2::eye(2);
        let h = encode(&m, &g, &view).unwrap();
        assert_eq!(h[&NodeId::from("n0")], array![0.3, 0.7]);
        assert_eq!(h[&NodeId::from("n2")], array![0.2, 0.5]);
    }

    #[test]
    fn three_node_path_matches_hand_computation() {
        // Path n0 - n1 - n2, d = h = 2.
        //   W_x = [[1, 0], [0, 2]], e = [0.1, -0.1]
        //   layer 0: W_fact = [[0.5, 0], [0, 0.5]], W_self = I
        //   layer 1: W_fact = [[1, -1], [0, 1]],  W_self = [[0, 0], [0, 0]]
        // x: n0 = (1, 0), n1 = (0, 1), n2 = (1, 1)
        // h0 = x W_x + e: n0 = (1.1, -0.1), n1 = (0.1, 1.9), n2 = (1.1, 1.9)
        // z0 = h0 + 0.5 * sum_nbrs h0:
        //   n0: (1.1, -0.1) + 0.5 * (0.1, 1.9)            = (1.15, 0.85)
        //   n1: (0.1, 1.9)  + 0.5 * ((1.1,-0.1)+(1.1,1.9)) = (1.2, 2.8)
        //   n2: (1.1, 1.9)  + 0.5 * (0.1, 1.9)            = (1.15, 2.85)
        // h1 = relu(z0) = z0.
        // z1 = sum_nbrs h1 W_fact, with (a, b) W_fact = (a, b - a):
        //   n0: nbr n1 (1.2, 2.8)          -> (1.2, 1.6)
        //   n1: n0 + n2 = (2.3, 3.7)       -> (2.3, 1.4)
        //   n2: nbr n1                     -> (1.2, 1.6)
        let (g, view) = path_graph(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let mut m = tiny_model(2, 2);
        m.params.input_proj = array![[1.0, 0.0], [0.0, 2.0]];
        m.params.type_embedding = array![[0.1, -0.1]];
        m.params.message[0][0] = array![[0.5, 0.0], [0.0, 0.5]];
        m.params.message[0][2] = Array2::eye(2);
        m.params.message[1][0] = array![[1.0, -1.0], [0.0, 1.0]];
        let h = encode(&m, &g, &view).unwrap();
        let expect = [("n0", [1.2, 1.6]), ("n1", [2.3, 1.4]), ("n2", [1.2, 1.6])];
        for (id, e) in expect {
            let got = &h[&NodeId::from(id)];
            for k in 0..2 {
                assert!((got[k] - e[k]).abs() < 1e-12, "{id}[{k}] = {}", got[k]);
            }
        }
    }

    #[test]
    fn pooling_laws() {
        let one = array![[1.0, -2.0, 3.0]];
        assert_eq!(pool(one.view()).unwrap(), array![1.0, -2.0, 3.0, 1.0, -2.0, 3.0]);
        let two = array![[0.0, 0.0], [1.0, 1.0]];
        assert_eq!(pool(two.view()).unwrap(), array![0.5, 0.5, 1.0, 1.0]);
        let swapped = array![[1.0, 1.0], [0.0, 0.0]];
        assert_eq!(pool(swapped.view()).unwrap(), pool(two.view()).unwrap());
        assert!(matches!(pool(Array2::<f64>::zeros((0, 2)).view()), Err(Error::EmptyView)));
    }

    #[test]
    fn sigmoid_closed_forms() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        let grid: Vec<f64> = (-400..=400).map(|i| sigmoid(i as f64 * 0.05)).collect();
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn bce_closed_forms() {
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.9, 1.0) - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!(bce_loss(1e-12, 0.0) < 1e-6);
        assert!(bce_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let (g, view) = path_graph(&[[0.3, 0.7], [0.1, 0.1]]);
        let m = tiny_model(3, 2);
        assert!(matches!(score(&m, &g, &view), Err(Error::Shape(_))));
    }

    #[test]
    fn saturated_logit_has_zero_gradient() {
        let (g, view) = path_graph(&[[0.3, 0.7], [0.1, 0.1]]);
        let mut m = tiny_model(2, 2);
        m.params.output_bias[[0, 0]] = -40.0;
        let (loss, grad) = backward(&m, &g, &view, 0.0).unwrap();
        assert!(loss < 1e-6);
        assert!(grad.tensors().iter().all(|t| t.iter().all(|x| x.abs() < 1e-12)));
    }

    #[test]
    fn gradients_match_finite_differences() {
        use rand::SeedableRng;
        let (mut g, mut view) = path_graph(&[[0.3, 0.7], [-0.4, 0.2], [0.9, -0.1], [0.05, 0.6]]);
        g.add_edge(Edge::synonym("s0", "n0", "n3", 0.9)).unwrap();
        view.edges = induced_edges(&g, &view.nodes.iter().cloned().collect());
        let config = ModelConfig {
            input_dim: 2,
            hidden_dim: 4,
            classifier_dim: 3,
            ..ModelConfig::default()
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let model = MissingnessModel::init(config, &mut rng).unwrap();
        let prepared = PreparedView::new(&g, &view, 2).unwrap();
        for y in [0.0, 1.0] {
            let (_, grad) = backward_prepared(&model, &prepared, y).unwrap();
            let loss_at = |m: &MissingnessModel| bce_loss(score_prepared(m, &prepared).unwrap().missingness, y);
            let step = 1e-5;
            for (t, analytic) in grad.tensors().iter().enumerate() {
                for (k, &a) in analytic.iter().enumerate() {
                    let mut plus = model.clone();
                    *plus.params.tensors_mut()[t].iter_mut().nth(k).unwrap() += step;
                    let mut minus = model.clone();
                    *minus.params.tensors_mut()[t].iter_mut().nth(k).unwrap() -= step;
                    let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * step);
                    let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
                    assert!(
                        err < 1e-4 || (a - numeric).abs() < 1e-9,
                        "tensor {t} entry {k}: analytic {a}, numeric {numeric}"
                    );
                }
            }
        }
    }
}
