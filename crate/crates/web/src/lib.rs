//! wasm-bindgen entry points for `www/index.html`. Every function takes the
//! generator parameters of an instance and returns a JSON string.

use arbor::entropy::{estimate, loglog_slope, ColumnOperator, EstimatorConfig};
use arbor::instance::{generate, InstanceSpec, Profile, Shape};
use arbor::metrics::{DistanceContext, Metric};
use arbor::nets::{covering_number, order_net_number, Mode};
use arbor::verify::epsilon_grid;
use arbor::{LevelPartition, WeightedTree};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest instance the page will build; keeps the tab responsive.
const MAX_NODES: usize = 4096;
/// Exact covering numbers are only attempted up to this size.
const EXACT_LIMIT: usize = 40;

#[derive(Debug, PartialEq)]
pub struct DemoError(String);

impl From<arbor::Error> for DemoError {
    fn from(e: arbor::Error) -> Self {
        Self(e.to_string())
    }
}

impl From<DemoError> for JsValue {
    fn from(e: DemoError) -> Self {
        JsValue::from_str(&e.0)
    }
}

type Result<T> = std::result::Result<T, DemoError>;

fn instance(shape: &str, size: usize, profile: &str, q: f64, seed: u64) -> Result<WeightedTree> {
    let shape = match shape {
        "binary" => Shape::Binary { depth: size },
        "chain" => Shape::Chain { len: size },
        "random" => Shape::Random { len: size },
        other => return Err(DemoError(format!("unknown shape `{other}`"))),
    };
    let profile = match profile {
        "corollary" => Profile::Corollary,
        "constant" => Profile::Constant,
        "random" => Profile::Random,
        other => return Err(DemoError(format!("unknown profile `{other}`"))),
    };
    if let Shape::Binary { depth } = shape {
        if depth > 11 {
            return Err(DemoError(format!("binary depth {depth} exceeds the demo limit of 11")));
        }
    }
    let wt = generate(&InstanceSpec { shape, profile, q, seed })?;
    if wt.len() > MAX_NODES {
        return Err(DemoError(format!("{} nodes exceed the demo limit of {MAX_NODES}", wt.len())));
    }
    Ok(wt)
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| DemoError(e.to_string()))
}

#[derive(Serialize)]
struct Summary {
    nodes: usize,
    depth: usize,
    kappa: f64,
    root_radius: f64,
    /// `(k, #I_k)` for the dyadic level sets.
    levels: Vec<(i32, usize)>,
    /// `(parent index or -1, depth)` per node in preorder, for drawing.
    layout: Vec<(i64, usize)>,
}

pub fn summary_json(shape: &str, size: usize, profile: &str, q: f64, seed: u64) -> Result<String> {
    let wt = instance(shape, size, profile, q, seed)?;
    let tree = wt.tree();
    let lp = LevelPartition::new(&wt);
    let index: Vec<usize> = {
        let mut idx = vec![0; tree.len()];
        for (i, &v) in tree.preorder().iter().enumerate() {
            idx[v] = i;
        }
        idx
    };
    json(&Summary {
        nodes: wt.len(),
        depth: tree.max_depth(),
        kappa: wt.kappa(),
        root_radius: DistanceContext::raw(&wt).root_radius(),
        levels: lp.level_sets().into_iter().map(|(k, s)| (k, s.len())).collect(),
        layout: tree
            .preorder()
            .iter()
            .map(|&v| (tree.parent(v).map_or(-1, |p| index[p] as i64), tree.depth(v)))
            .collect(),
    })
}

#[derive(Serialize)]
struct NetRow {
    epsilon: f64,
    covering: Option<usize>,
    covering_exact: bool,
    order_net: usize,
    order_net_localized: usize,
}

pub fn nets_json(shape: &str, size: usize, profile: &str, q: f64, seed: u64, points: usize) -> Result<String> {
    let wt = instance(shape, size, profile, q, seed)?;
    let ctx = DistanceContext::raw(&wt);
    let rows = epsilon_grid(ctx.root_radius(), points.clamp(1, 24))
        .into_iter()
        .map(|eps| {
            let exact = ctx.len() <= EXACT_LIMIT;
            let mode = if exact { Mode::Exact } else { Mode::Greedy };
            Ok(NetRow {
                epsilon: eps,
                covering: Some(covering_number(&ctx, eps, mode, EXACT_LIMIT)?.value),
                covering_exact: exact,
                order_net: order_net_number(&ctx, eps, Metric::D, Mode::Exact)?.value,
                order_net_localized: order_net_number(&ctx, eps, Metric::Localized, Mode::Exact)?.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    json(&rows)
}

#[derive(Serialize)]
struct EntropyOut {
    rows: Vec<EntropyRow>,
    slope: Option<f64>,
}

#[derive(Serialize)]
struct EntropyRow {
    n: usize,
    lower: f64,
    upper: f64,
    method_lower: String,
    method_upper: String,
}

pub fn entropy_json(shape: &str, size: usize, profile: &str, q: f64, seed: u64, max_n: usize) -> Result<String> {
    let wt = instance(shape, size, profile, q, seed)?;
    let op = ColumnOperator::from_w(&LevelPartition::new(&wt));
    let grid: Vec<usize> = (0..).map(|i| 1usize << i).take_while(|&n| n <= max_n.clamp(1, 64)).collect();
    let cfg = EstimatorConfig { budget: 512, seed, ..EstimatorConfig::default() };
    let est = estimate(&op, &grid, &cfg)?;
    let slope = loglog_slope(&est.iter().map(|e| (e.n as f64, e.upper)).collect::<Vec<_>>());
    json(&EntropyOut {
        rows: est
            .into_iter()
            .map(|e| EntropyRow {
                n: e.n,
                lower: e.lower,
                upper: e.upper,
                method_lower: e.method_lower.to_string(),
                method_upper: e.method_upper.to_string(),
            })
            .collect(),
        slope,
    })
}

/// Instance statistics and a drawable layout.
#[wasm_bindgen]
pub fn summary(shape: &str, size: usize, profile: &str, q: f64, seed: u64) -> std::result::Result<String, JsValue> {
    Ok(summary_json(shape, size, profile, q, seed)?)
}

/// Covering and order-net numbers over a geometric grid of radii.
#[wasm_bindgen]
pub fn nets(
    shape: &str,
    size: usize,
    profile: &str,
    q: f64,
    seed: u64,
    points: usize,
) -> std::result::Result<String, JsValue> {
    Ok(nets_json(shape, size, profile, q, seed, points)?)
}

/// Entropy bounds of `W` at `n = 1, 2, 4, …, max_n`.
#[wasm_bindgen]
pub fn entropy(
    shape: &str,
    size: usize,
    profile: &str,
    q: f64,
    seed: u64,
    max_n: usize,
) -> std::result::Result<String, JsValue> {
    Ok(entropy_json(shape, size, profile, q, seed, max_n)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_a_small_tree() {
        let v: serde_json::Value =
            serde_json::from_str(&summary_json("binary", 3, "corollary", 2.0, 0).unwrap()).unwrap();
        assert_eq!(v["nodes"], 15);
        assert_eq!(v["layout"].as_array().unwrap().len(), 15);
        assert_eq!(v["layout"][0][0], -1);
    }

    #[test]
    fn nets_are_monotone_in_epsilon() {
        let v: serde_json::Value =
            serde_json::from_str(&nets_json("random", 20, "random", 1.5, 3, 6).unwrap()).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 6);
        for w in rows.windows(2) {
            assert!(w[0]["covering"].as_u64() <= w[1]["covering"].as_u64());
            assert!(w[0]["order_net"].as_u64() <= w[1]["order_net"].as_u64());
        }
    }

    #[test]
    fn entropy_bounds_are_ordered() {
        let v: serde_json::Value =
            serde_json::from_str(&entropy_json("binary", 4, "corollary", 2.0, 0, 8).unwrap()).unwrap();
        for r in v["rows"].as_array().unwrap() {
            assert!(r["lower"].as_f64().unwrap() <= r["upper"].as_f64().unwrap());
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(summary_json("star", 3, "corollary", 2.0, 0).is_err());
        assert!(summary_json("binary", 3, "flat", 2.0, 0).is_err());
        assert!(summary_json("binary", 20, "corollary", 2.0, 0).is_err());
        assert!(summary_json("binary", 3, "corollary", 3.0, 0).is_err());
    }
}
