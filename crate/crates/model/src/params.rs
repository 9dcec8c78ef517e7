use std::collections::BTreeMap;

use mmkit_autodiff::{GradMap, Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{ModelError, Result};

/// How a parameter is filled at construction time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    /// Uniform on +-sqrt(1 / fan_in).
    FanIn(usize),
    /// All zeros (biases, norm shifts).
    Zero,
    /// All ones (norm scales).
    One,
    /// Gaussian with standard deviation 0.02 (positional table).
    Normal,
}

fn attention_specs(prefix: &str, d: usize, out: &mut Vec<(String, Vec<usize>, Init)>) {
    for part in ["wq", "wk", "wv", "wo"] {
        out.push((format!("{prefix}.{part}"), vec![d, d], Init::FanIn(d)));
    }
    for part in ["bq", "bk", "bv", "bo"] {
        out.push((format!("{prefix}.{part}"), vec![d], Init::Zero));
    }
}

/// Every learnable parameter of the model: name, shape, and init rule.
/// The order is fixed so a seed pins down every value; forward passes and
/// checkpoints address parameters by these names.
pub fn param_specs(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let mut specs = Vec::new();
    let v = &cfg.vivit;
    let d_f = cfg.fusion.d_f;

    let token_len = 3 * v.tubelet * v.patch * v.patch;
    let tokens = (v.frames / v.tubelet) * (v.side / v.patch) * (v.side / v.patch);
    specs.push(("vivit.embed.w".into(), vec![token_len, v.d], Init::FanIn(token_len)));
    specs.push(("vivit.embed.b".into(), vec![v.d], Init::Zero));
    specs.push(("vivit.pos".into(), vec![tokens, v.d], Init::Normal));
    for i in 0..v.blocks {
        specs.push((format!("vivit.b{i}.ln1.g"), vec![v.d], Init::One));
        specs.push((format!("vivit.b{i}.ln1.b"), vec![v.d], Init::Zero));
        attention_specs(&format!("vivit.b{i}.attn"), v.d, &mut specs);
        specs.push((format!("vivit.b{i}.ln2.g"), vec![v.d], Init::One));
        specs.push((format!("vivit.b{i}.ln2.b"), vec![v.d], Init::Zero));
        let widened = v.mlp_ratio * v.d;
        specs.push((format!("vivit.b{i}.ff.w1"), vec![v.d, widened], Init::FanIn(v.d)));
        specs.push((format!("vivit.b{i}.ff.b1"), vec![widened], Init::Zero));
        specs.push((format!("vivit.b{i}.ff.w2"), vec![widened, v.d], Init::FanIn(widened)));
        specs.push((format!("vivit.b{i}.ff.b2"), vec![v.d], Init::Zero));
    }
    specs.push(("vivit.out.w".into(), vec![v.d, d_f], Init::FanIn(v.d)));
    specs.push(("vivit.out.b".into(), vec![d_f], Init::Zero));

    let c = &cfg.cnn;
    specs.push(("cnn.stem.conv.w".into(), vec![c.stem, 3, 3, 3, 3], Init::FanIn(3 * 27)));
    specs.push(("cnn.stem.bn.g".into(), vec![c.stem], Init::One));
    specs.push(("cnn.stem.bn.b".into(), vec![c.stem], Init::Zero));
    let mut in_ch = c.stem;
    for (i, &out_ch) in c.stages.iter().enumerate() {
        for b in 0..c.blocks_per_stage {
            let block_in = if b == 0 { in_ch } else { out_ch };
            let prefix = format!("cnn.s{i}.b{b}");
            specs.push((format!("{prefix}.conv1.w"), vec![out_ch, block_in, 3, 3, 3], Init::FanIn(block_in * 27)));
            specs.push((format!("{prefix}.bn1.g"), vec![out_ch], Init::One));
            specs.push((format!("{prefix}.bn1.b"), vec![out_ch], Init::Zero));
            specs.push((format!("{prefix}.conv2.w"), vec![out_ch, out_ch, 3, 3, 3], Init::FanIn(out_ch * 27)));
            specs.push((format!("{prefix}.bn2.g"), vec![out_ch], Init::One));
            specs.push((format!("{prefix}.bn2.b"), vec![out_ch], Init::Zero));
            if b == 0 {
                specs.push((format!("{prefix}.proj.w"), vec![out_ch, block_in, 1, 1, 1], Init::FanIn(block_in)));
            }
        }
        in_ch = out_ch;
    }
    specs.push(("cnn.out.w".into(), vec![c.stages[3], d_f], Init::FanIn(c.stages[3])));
    specs.push(("cnn.out.b".into(), vec![d_f], Init::Zero));

    let l = &cfg.lstm;
    for k in 0..l.layers {
        let d_in = if k == 0 { l.input_dim } else { l.hidden };
        for gate in ["i", "f", "o", "g"] {
            specs.push((format!("lstm.l{k}.w_{gate}x"), vec![d_in, l.hidden], Init::FanIn(d_in)));
            specs.push((format!("lstm.l{k}.w_{gate}h"), vec![l.hidden, l.hidden], Init::FanIn(l.hidden)));
            specs.push((format!("lstm.l{k}.b_{gate}"), vec![l.hidden], Init::Zero));
        }
    }
    specs.push(("lstm.out.w".into(), vec![l.hidden, d_f], Init::FanIn(l.hidden)));
    specs.push(("lstm.out.b".into(), vec![d_f], Init::Zero));

    specs.push(("fuse.qv.w".into(), vec![d_f, d_f], Init::FanIn(d_f)));
    specs.push(("fuse.qv.b".into(), vec![d_f], Init::Zero));
    specs.push(("fuse.k1.w".into(), vec![d_f, d_f], Init::FanIn(d_f)));
    specs.push(("fuse.k1.b".into(), vec![d_f], Init::Zero));
    specs.push(("fuse.k2.w".into(), vec![d_f, d_f], Init::FanIn(d_f)));
    specs.push(("fuse.k2.b".into(), vec![d_f], Init::Zero));
    attention_specs("fuse.attn", d_f, &mut specs);

    let fused = 2 * d_f;
    specs.push(("head.action.w".into(), vec![fused, mmkit_data::ACTION_CLASSES], Init::FanIn(fused)));
    specs.push(("head.action.b".into(), vec![mmkit_data::ACTION_CLASSES], Init::Zero));
    specs.push(("head.asd.w".into(), vec![fused, 2], Init::FanIn(fused)));
    specs.push(("head.asd.b".into(), vec![2], Init::Zero));

    specs
}

/// One draw from N(0, 1) via the Box-Muller transform.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Fresh parameter set for the configuration. A single seeded stream fills
/// the tensors in spec order, so the same seed always yields the same model.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> BTreeMap<String, Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = BTreeMap::new();
    for (name, shape, init) in param_specs(cfg) {
        let len: usize = shape.iter().product();
        let data = match init {
            Init::FanIn(fan_in) => {
                let bound = (1.0 / fan_in as f64).sqrt();
                (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
            }
            Init::Zero => vec![0.0; len],
            Init::One => vec![1.0; len],
            Init::Normal => (0..len).map(|_| 0.02 * standard_normal(&mut rng)).collect(),
        };
        let tensor = Tensor::new(shape, data).expect("spec shapes are consistent");
        params.insert(name, tensor);
    }
    params
}

/// Lazily mounts named parameters onto a graph as gradient-tracked leaves,
/// binding each at most once so every use shares one node, and harvests the
/// per-name gradients after a backward pass.
pub struct ParamBinder {
    vars: BTreeMap<String, Var>,
}

impl ParamBinder {
    pub fn new() -> Self {
        ParamBinder { vars: BTreeMap::new() }
    }

    pub fn bind(&mut self, g: &mut Graph, params: &BTreeMap<String, Tensor>, name: &str) -> Result<Var> {
        if let Some(&v) = self.vars.get(name) {
            return Ok(v);
        }
        let tensor = params
            .get(name)
            .ok_or_else(|| ModelError::State(format!("parameter {name} is missing from the model")))?;
        let mut leaf_tensor = tensor.clone();
        leaf_tensor.requires_grad = true;
        let var = g.leaf(leaf_tensor);
        self.vars.insert(name.to_string(), var);
        Ok(var)
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }

    /// Gradients for every bound parameter. Parameters whose gradient the
    /// backward pass never reached come back as zeros of the right length.
    pub fn grads(&self, g: &Graph) -> GradMap {
        let mut map = GradMap::new();
        for (name, &var) in &self.vars {
            let grad = match g.grad(var) {
                Some(slice) => slice.to_vec(),
                None => vec![0.0; g.data(var).len()],
            };
            map.insert(name.clone(), grad);
        }
        map
    }
}

impl Default for ParamBinder {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = ModelConfig::micro();
        let a = init_params(&cfg, 7);
        let b = init_params(&cfg, 7);
        let c = init_params(&cfg, 8);
        assert_eq!(a.len(), b.len());
        for (name, t) in &a {
            assert_eq!(t.data(), b[name].data(), "{name} differs across identical seeds");
        }
        assert!(a.iter().any(|(name, t)| t.data() != c[name].data()), "different seeds should differ somewhere");
    }

    #[test]
    fn shapes_and_ranges_follow_the_init_rules() {
        let cfg = ModelConfig::micro();
        let params = init_params(&cfg, 3);
        let embed = &params["vivit.embed.w"];
        let token_len = 3 * 2 * 10 * 10;
        assert_eq!(embed.shape(), [token_len, 24]);
        let bound = (1.0 / token_len as f64).sqrt();
        assert!(embed.data().iter().all(|&x| x.abs() < bound));

        assert!(params["vivit.embed.b"].data().iter().all(|&x| x == 0.0));
        assert!(params["vivit.b0.ln1.g"].data().iter().all(|&x| x == 1.0));

        let pos = &params["vivit.pos"];
        assert_eq!(pos.shape(), [(4 / 2) * (20 / 10) * (20 / 10), 24]);
        let spread = pos.data().iter().map(|x| x * x).sum::<f64>() / pos.data().len() as f64;
        assert!(spread > 1e-6 && spread < 0.02, "positional variance {spread} should be near 4e-4");

        assert_eq!(params["cnn.s0.b0.proj.w"].shape(), [4, 4, 1, 1, 1]);
        assert_eq!(params["lstm.l1.w_ih"].shape(), [16, 16]);
        assert_eq!(params["head.action.w"].shape(), [32, 11]);
        assert_eq!(params["head.asd.w"].shape(), [32, 2]);
    }

    #[test]
    fn binder_reuses_nodes_and_reports_zero_grads_for_unused() {
        let cfg = ModelConfig::micro();
        let params = init_params(&cfg, 1);
        let mut g = Graph::new();
        let mut binder = ParamBinder::new();
        let a = binder.bind(&mut g, &params, "fuse.qv.w").unwrap();
        let b = binder.bind(&mut g, &params, "fuse.qv.w").unwrap();
        assert_eq!(a, b);
        binder.bind(&mut g, &params, "fuse.qv.b").unwrap();
        let grads = binder.grads(&g);
        assert_eq!(grads["fuse.qv.b"], vec![0.0; 16]);
        assert!(binder.bind(&mut g, &params, "no.such.param").is_err());
    }
}
