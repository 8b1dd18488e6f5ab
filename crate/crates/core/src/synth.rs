//! Seeded synthetic graphs: the deterministic families used to probe
//! spectral behavior (paths, cycles, cliques) and a stochastic block model
//! for community-structured test beds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::DatasetBundle;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::seed;

/// Stochastic block model: nodes are split into consecutive blocks, an edge
/// appears independently with probability `p_in` inside a block and `p_out`
/// across blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Path(usize),
    Cycle(usize),
    Complete(usize),
    Sbm(SbmSpec),
}

impl GraphSpec {
    /// Parses the compact form used on the command line:
    /// `path:N`, `cycle:N`, `complete:N`, or
    /// `sbm:SIZE,SIZE[,SIZE...],P_IN,P_OUT,SEED` (two or more blocks).
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(msg);
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("graph spec {s:?} missing ':'")))?;
        let parse_n = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| bad(format!("invalid node count {rest:?} in graph spec {s:?}")))
        };
        match kind {
            "path" => Ok(GraphSpec::Path(parse_n(rest)?)),
            "cycle" => Ok(GraphSpec::Cycle(parse_n(rest)?)),
            "complete" => Ok(GraphSpec::Complete(parse_n(rest)?)),
            "sbm" => {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() < 5 {
                    return Err(bad(format!(
                        "sbm spec {s:?} needs at least two sizes, p_in, p_out, seed"
                    )));
                }
                let (size_parts, tail) = parts.split_at(parts.len() - 3);
                let sizes = size_parts
                    .iter()
                    .map(|p| {
                        p.parse::<usize>()
                            .map_err(|_| bad(format!("invalid block size {p:?} in {s:?}")))
                    })
                    .collect::<Result<Vec<usize>>>()?;
                let p_in = tail[0]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("invalid p_in {:?} in {s:?}", tail[0])))?;
                let p_out = tail[1]
                    .parse::<f64>()
                    .map_err(|_| bad(format!("invalid p_out {:?} in {s:?}", tail[1])))?;
                let seed = tail[2]
                    .parse::<u64>()
                    .map_err(|_| bad(format!("invalid seed {:?} in {s:?}", tail[2])))?;
                Ok(GraphSpec::Sbm(SbmSpec {
                    sizes,
                    p_in,
                    p_out,
                    seed,
                }))
            }
            other => Err(bad(format!(
                "unknown graph family {other:?}, expected path, cycle, complete or sbm"
            ))),
        }
    }
}

pub fn synth_graph(spec: &GraphSpec) -> Result<Graph> {
    match spec {
        GraphSpec::Path(n) => {
            let edges: Vec<(usize, usize)> = (1..*n).map(|i| (i - 1, i)).collect();
            Graph::from_edges(&edges, *n)
        }
        GraphSpec::Cycle(n) => {
            let edges: Vec<(usize, usize)> = (0..*n).map(|i| (i, (i + 1) % n)).collect();
            Graph::from_edges(&edges, *n)
        }
        GraphSpec::Complete(n) => {
            let mut edges = Vec::new();
            for i in 0..*n {
                for j in (i + 1)..*n {
                    edges.push((i, j));
                }
            }
            Graph::from_edges(&edges, *n)
        }
        GraphSpec::Sbm(sbm) => synth_sbm(sbm),
    }
}

fn synth_sbm(spec: &SbmSpec) -> Result<Graph> {
    let n: usize = spec.sizes.iter().sum();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    for &p in &[spec.p_in, spec.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "edge probability {p} outside [0, 1]"
            )));
        }
    }
    let blocks = block_labels(&spec.sizes);
    // One independent stream per row keeps the draw order stable under any
    // future chunking of the loop.
    let mut edges = Vec::new();
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64 + 1);
        for j in (i + 1)..n {
            let p = if blocks[i] == blocks[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(&edges, n)
}

/// Block label per node for consecutive block sizes.
pub fn block_labels(sizes: &[usize]) -> Vec<usize> {
    let mut labels = Vec::with_capacity(sizes.iter().sum());
    for (b, &size) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat(b).take(size));
    }
    labels
}

/// A labeled node-classification task on an SBM graph: block membership is
/// the label, and features are a noisy copy of a per-block mean vector. The
/// signal-to-noise ratio is set by `noise`; with `noise` around 1.5 the raw
/// features are only weakly separable and neighborhood aggregation helps.
pub fn synth_task(sbm: &SbmSpec, feature_dim: usize, noise: f64, seed: u64) -> Result<DatasetBundle> {
    let graph = synth_sbm(sbm)?;
    let labels = block_labels(&sbm.sizes);
    let class_count = sbm.sizes.len();
    let features = class_mean_features(&labels, class_count, feature_dim, noise, seed)?;
    DatasetBundle::new("sbm-synthetic".into(), graph, features, labels, class_count, None)
}

/// Features for an arbitrary labeled node set: each row is a noisy copy of
/// a unit-norm per-class mean vector. Rows with the same label share the
/// mean, so the class signal per feature shrinks as `noise` grows.
pub fn class_mean_features(
    labels: &[usize],
    class_count: usize,
    feature_dim: usize,
    noise: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if feature_dim == 0 {
        return Err(Error::InvalidArgument("feature_dim must be positive".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} is out of range for {class_count} classes"
        )));
    }

    let mut mean_rng = ChaCha8Rng::seed_from_u64(seed::mix(seed, 0x6d65616e));
    let mut means = Vec::with_capacity(class_count);
    for _ in 0..class_count {
        let mut v: Vec<f64> = (0..feature_dim)
            .map(|_| mean_rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        v.iter_mut().for_each(|x| *x /= norm);
        means.push(v);
    }

    let mut features = DenseMatrix::zeros(labels.len(), feature_dim);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed::mix(seed, 0x6e6f6973));
    for (i, &label) in labels.iter().enumerate() {
        let mean = &means[label];
        let row = features.row_mut(i);
        for (f, &m) in row.iter_mut().zip(mean) {
            *f = m + noise * (noise_rng.random::<f64>() * 2.0 - 1.0);
        }
    }
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_and_cycle_shapes() {
        let p = synth_graph(&GraphSpec::Path(4)).unwrap();
        assert_eq!(p.m(), 3);
        assert_eq!(p.degrees(), &[2, 3, 3, 2]);
        let c = synth_graph(&GraphSpec::Cycle(4)).unwrap();
        assert_eq!(c.m(), 4);
        assert_eq!(c.degrees(), &[3, 3, 3, 3]);
    }

    #[test]
    fn tiny_cycles_degenerate_gracefully() {
        let c1 = synth_graph(&GraphSpec::Cycle(1)).unwrap();
        assert_eq!(c1.m(), 0);
        let c2 = synth_graph(&GraphSpec::Cycle(2)).unwrap();
        assert_eq!(c2.m(), 1);
    }

    #[test]
    fn complete_graph_edge_count() {
        let k5 = synth_graph(&GraphSpec::Complete(5)).unwrap();
        assert_eq!(k5.m(), 10);
        assert!(k5.is_connected());
    }

    #[test]
    fn zero_nodes_rejected() {
        assert!(matches!(
            synth_graph(&GraphSpec::Path(0)),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn sbm_is_seed_deterministic() {
        let spec = SbmSpec {
            sizes: vec![20, 20],
            p_in: 0.3,
            p_out: 0.02,
            seed: 7,
        };
        let a = synth_graph(&GraphSpec::Sbm(spec.clone())).unwrap();
        let b = synth_graph(&GraphSpec::Sbm(spec)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sbm_extreme_probabilities() {
        let dense = SbmSpec {
            sizes: vec![4, 4],
            p_in: 1.0,
            p_out: 1.0,
            seed: 1,
        };
        let g = synth_graph(&GraphSpec::Sbm(dense)).unwrap();
        assert_eq!(g.m(), 8 * 7 / 2);
        let empty = SbmSpec {
            sizes: vec![4, 4],
            p_in: 0.0,
            p_out: 0.0,
            seed: 1,
        };
        let g = synth_graph(&GraphSpec::Sbm(empty)).unwrap();
        assert_eq!(g.m(), 0);
    }

    #[test]
    fn sbm_probability_validation() {
        let bad = SbmSpec {
            sizes: vec![4],
            p_in: 1.5,
            p_out: 0.0,
            seed: 1,
        };
        assert!(matches!(
            synth_graph(&GraphSpec::Sbm(bad)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn spec_parsing_round_trips() {
        assert_eq!(GraphSpec::parse("path:3").unwrap(), GraphSpec::Path(3));
        assert_eq!(GraphSpec::parse("cycle:10").unwrap(), GraphSpec::Cycle(10));
        assert_eq!(
            GraphSpec::parse("complete:6").unwrap(),
            GraphSpec::Complete(6)
        );
        assert_eq!(
            GraphSpec::parse("sbm:20,20,0.3,0.02,7").unwrap(),
            GraphSpec::Sbm(SbmSpec {
                sizes: vec![20, 20],
                p_in: 0.3,
                p_out: 0.02,
                seed: 7,
            })
        );
        assert_eq!(
            GraphSpec::parse("sbm:10,10,10,0.5,0.01,3").unwrap(),
            GraphSpec::Sbm(SbmSpec {
                sizes: vec![10, 10, 10],
                p_in: 0.5,
                p_out: 0.01,
                seed: 3,
            })
        );
        assert!(GraphSpec::parse("star:5").is_err());
        assert!(GraphSpec::parse("path:x").is_err());
        assert!(GraphSpec::parse("sbm:20,0.3,0.02").is_err());
    }

    #[test]
    fn synth_task_shapes_and_determinism() {
        let spec = SbmSpec {
            sizes: vec![10, 10, 10],
            p_in: 0.4,
            p_out: 0.05,
            seed: 3,
        };
        let a = synth_task(&spec, 8, 1.0, 11).unwrap();
        assert_eq!(a.features.shape(), (30, 8));
        assert_eq!(a.class_count, 3);
        assert_eq!(a.labels[0], 0);
        assert_eq!(a.labels[29], 2);
        let b = synth_task(&spec, 8, 1.0, 11).unwrap();
        assert_eq!(a.features, b.features);
    }
}
