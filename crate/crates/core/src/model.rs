//! Network architectures, parameter layout, initialization and checkpoints.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diff::Engine;
use crate::error::{Error, Result};
use crate::features::{dkf_list, CoeffInit, FourierLayout, FreqInit, RbfMap, RffMap, NORM_EPS};
use crate::jet::{Comp, CompMask};
use crate::pde::{PdeProblem, Point};
use crate::scalar::Scalar;

/// Independent random streams derived from one run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Params = 1,
    Collocation = 2,
    FrozenMaps = 3,
    Probes = 4,
}

pub fn seeded_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    SafeNet,
    Mlp4x50,
    Fls4x50,
    Mlp6x50,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sine,
    Relu,
    Gelu,
    Swish,
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "tanh" => Activation::Tanh,
            "sin" | "sine" => Activation::Sine,
            "relu" => Activation::Relu,
            "gelu" => Activation::Gelu,
            "swish" | "silu" => Activation::Swish,
            _ => return Err(Error::Config(format!("unknown activation '{s}'"))),
        })
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Swish => "swish",
        };
        f.write_str(s)
    }
}

impl Activation {
    /// `[s(z), s'(z), s''(z), s'''(z)]`.
    #[inline]
    pub fn derivs<S: Scalar>(self, z: S) -> [S; 4] {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let s1 = S::cst(1.0) - t * t;
                let s2 = (t * s1).scale(-2.0);
                let s3 = (s1 * s1).scale(-2.0) + (t * t * s1).scale(4.0);
                [t, s1, s2, s3]
            }
            Activation::Sine => {
                let (s, c) = (z.sin(), z.cos());
                [s, c, -s, -c]
            }
            Activation::Relu => {
                if z.re() > 0.0 {
                    [z, S::cst(1.0), S::cst(0.0), S::cst(0.0)]
                } else {
                    [S::cst(0.0); 4]
                }
            }
            Activation::Gelu => {
                let cdf = (S::cst(1.0) + z.scale(std::f64::consts::FRAC_1_SQRT_2).erf()).scale(0.5);
                let pdf = (z * z).scale(-0.5).exp().scale(1.0 / (2.0 * std::f64::consts::PI).sqrt());
                let z2 = z * z;
                [
                    z * cdf,
                    cdf + z * pdf,
                    pdf * (S::cst(2.0) - z2),
                    pdf * (z2 * z - z.scale(4.0)),
                ]
            }
            Activation::Swish => {
                let s = S::cst(1.0) / (S::cst(1.0) + (-z).exp());
                let s1 = s * (S::cst(1.0) - s);
                let one_m2s = S::cst(1.0) - s.scale(2.0);
                let s2 = s1 * one_m2s;
                let s3 = s2 * one_m2s - (s1 * s1).scale(2.0);
                [z * s, s + z * s1, s1.scale(2.0) + z * s2, s2.scale(3.0) + z * s3]
            }
        }
    }

    pub fn value(self, z: f64) -> f64 {
        self.derivs(z)[0]
    }
}

/// Input map in front of the dense layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureConfig {
    Raw,
    Rff {
        m: usize,
        sigma_spatial: f64,
        sigma_temporal: f64,
    },
    Rbf {
        m: usize,
        poly_order: usize,
    },
    /// `[1, cos(j w x), sin(j w x), t]` with the period of the spatial domain.
    Periodic {
        m: usize,
    },
    /// Trainable Fourier cross-features; `n_features` counts the Fourier
    /// block only (4 per set in 1-D, 8 in 2-D).
    Fourier {
        n_features: usize,
        dkf: bool,
        normalize: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub arch: Arch,
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub features: FeatureConfig,
}

impl NetworkSpec {
    pub fn safenet(n_features: usize) -> Self {
        NetworkSpec {
            arch: Arch::SafeNet,
            width: 50,
            depth: 1,
            activation: Activation::Tanh,
            features: FeatureConfig::Fourier {
                n_features,
                dkf: true,
                normalize: true,
            },
        }
    }

    pub fn mlp(arch: Arch, features: FeatureConfig) -> Self {
        let depth = match arch {
            Arch::Mlp6x50 => 6,
            Arch::SafeNet => 1,
            Arch::Mlp4x50 | Arch::Fls4x50 => 4,
        };
        NetworkSpec {
            arch,
            width: 50,
            depth,
            activation: Activation::Tanh,
            features,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.depth == 0 {
            return Err(Error::Config("network width and depth must be positive".into()));
        }
        match self.features {
            FeatureConfig::Fourier { n_features: 0, .. } => {
                Err(Error::Config("feature count must be positive".into()))
            }
            FeatureConfig::Rff { m: 0, .. } | FeatureConfig::Rbf { m: 0, .. } => {
                Err(Error::Config("map size must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Frozen input map with its sampled state.
#[derive(Clone, Debug, PartialEq)]
pub enum InputMap {
    Raw,
    Rff(RffMap),
    Rbf(RbfMap),
    Periodic { period: f64, m: usize },
    Fourier(FourierLayout),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Layer {
    pub w_off: usize,
    pub b_off: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    /// `None` for the linear output layer.
    pub act: Option<Activation>,
}

/// A network bound to a problem's input layout, with any frozen map state.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: NetworkSpec,
    pub spatial_dims: usize,
    pub time_dependent: bool,
    pub input: InputMap,
    pub layers: Vec<Layer>,
    pub segments: Vec<Segment>,
    pub n_params: usize,
    /// Harmonic frequency divisor per input axis.
    pub harmonic_k: Vec<f64>,
    problem_key: String,
}

impl Model {
    pub fn new(spec: &NetworkSpec, problem: &PdeProblem, frozen_seed: u64) -> Result<Self> {
        spec.validate()?;
        let spatial_dims = problem.spatial_dims();
        let d = spatial_dims + 1;
        let mut rng = seeded_rng(frozen_seed, Stream::FrozenMaps);
        let input = match &spec.features {
            FeatureConfig::Raw => InputMap::Raw,
            FeatureConfig::Rff {
                m,
                sigma_spatial,
                sigma_temporal,
            } => {
                let mut map = RffMap::new(*m, spatial_dims, &mut rng);
                map.sigma_spatial = *sigma_spatial;
                map.sigma_temporal = *sigma_temporal;
                InputMap::Rff(map)
            }
            FeatureConfig::Rbf { m, poly_order } => {
                InputMap::Rbf(RbfMap::new(*m, spatial_dims, *poly_order, &mut rng))
            }
            FeatureConfig::Periodic { m } => {
                if problem.is_periodic() && spatial_dims == 1 {
                    InputMap::Periodic {
                        period: problem.domain.x.len(),
                        m: *m,
                    }
                } else {
                    InputMap::Raw
                }
            }
            FeatureConfig::Fourier {
                n_features,
                dkf,
                normalize,
            } => {
                let products = 1 << d;
                if n_features % products != 0 {
                    return Err(Error::Config(format!(
                        "feature count {n_features} is not a multiple of {products}"
                    )));
                }
                InputMap::Fourier(FourierLayout {
                    n_sets: n_features / products,
                    spatial_dims,
                    dkf: if *dkf {
                        dkf_list(problem.id).to_vec()
                    } else {
                        Vec::new()
                    },
                    normalize: *normalize,
                    eps: NORM_EPS,
                })
            }
        };
        let k = if problem.homogeneous_dirichlet_x() {
            problem.domain.x.len()
        } else {
            1.0
        };
        let mut model = Model {
            spec: spec.clone(),
            spatial_dims,
            time_dependent: problem.domain.t.is_some(),
            input,
            layers: Vec::new(),
            segments: Vec::new(),
            n_params: 0,
            harmonic_k: vec![k; d],
            problem_key: problem.id.key().to_string(),
        };
        model.build_layout();
        Ok(model)
    }

    fn build_layout(&mut self) {
        let mut segs = Vec::new();
        let mut off = 0;
        let mut push = |name: String, len: usize, segs: &mut Vec<Segment>| {
            segs.push(Segment {
                name,
                start: off,
                len,
            });
            off += len;
            off - len
        };
        if let InputMap::Fourier(l) = &self.input {
            push("feature-frequencies".into(), l.n_freq(), &mut segs);
            push("feature-coeffs".into(), l.n_coeff(), &mut segs);
        }
        let mut layers = Vec::new();
        let mut fan_in = self.input_dim();
        let n_dense = self.spec.depth + 1;
        for i in 0..n_dense {
            let last = i + 1 == n_dense;
            let fan_out = if last { 1 } else { self.spec.width };
            let (wn, bn) = if last {
                (format!("w{}", i + 1), format!("b{}", i + 1))
            } else {
                (format!("W{}", i + 1), format!("b{}", i + 1))
            };
            let w_off = push(wn, fan_in * fan_out, &mut segs);
            let b_off = push(bn, fan_out, &mut segs);
            let act = if last {
                None
            } else if i == 0 && self.spec.arch == Arch::Fls4x50 {
                Some(Activation::Sine)
            } else {
                Some(self.spec.activation)
            };
            layers.push(Layer {
                w_off,
                b_off,
                fan_in,
                fan_out,
                act,
            });
            fan_in = fan_out;
        }
        self.layers = layers;
        self.segments = segs;
        self.n_params = off;
    }

    /// Width of the vector fed to the first dense layer.
    pub fn input_dim(&self) -> usize {
        let d = self.spatial_dims + 1;
        match &self.input {
            InputMap::Raw => d,
            InputMap::Rff(m) => m.out_dim(),
            InputMap::Rbf(m) => m.m + m.n_poly(),
            InputMap::Periodic { m, .. } => 2 * m + 2,
            InputMap::Fourier(l) => l.n_features(),
        }
    }

    pub fn fourier(&self) -> Option<&FourierLayout> {
        match &self.input {
            InputMap::Fourier(l) => Some(l),
            _ => None,
        }
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Components the network can differentiate for.
    pub fn supported_mask(&self) -> CompMask {
        let mut comps = vec![Comp::Ux, Comp::Uxx];
        if self.time_dependent {
            comps.extend([Comp::Ut, Comp::Utt]);
        }
        if self.spatial_dims == 2 {
            comps.extend([Comp::Uy, Comp::Uyy]);
        }
        CompMask::from_comps(&comps)
    }

    /// Hash of everything that determines the parameter layout and frozen
    /// state.
    pub fn spec_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.spec).expect("spec serializes"));
        h.update(self.problem_key.as_bytes());
        h.update([self.spatial_dims as u8]);
        match &self.input {
            InputMap::Rff(m) => m.b.iter().for_each(|v| h.update(v.to_le_bytes())),
            InputMap::Rbf(m) => m.centers.iter().for_each(|v| h.update(v.to_le_bytes())),
            _ => {}
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_params {
            return Err(Error::SegmentMismatch {
                expected: self.n_params,
                got: len,
            });
        }
        Ok(())
    }

    /// Scalar prediction `u(x, t)`.
    pub fn forward(&self, params: &[f64], p: Point) -> Result<f64> {
        self.check_len(params.len())?;
        let engine = Engine::new(self);
        let block = engine.prepare(&[p], CompMask::VALUE)?;
        let (out, _) = engine.forward(params, &block);
        Ok(out[0].c[0])
    }

    pub fn forward_many(&self, params: &[f64], points: &[Point]) -> Result<Vec<f64>> {
        self.check_len(params.len())?;
        let engine = Engine::new(self);
        let block = engine.prepare(points, CompMask::VALUE)?;
        let (out, _) = engine.forward_values::<f64>(params, &block);
        Ok(out)
    }
}

/// Flat parameter array with its named segment map.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl ParamVector {
    pub fn zeros(model: &Model) -> Self {
        ParamVector {
            values: vec![0.0; model.n_params],
            segments: model.segments.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.segments
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.values[s.start..s.start + s.len])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let s = self.segments.iter().find(|s| s.name == name)?.clone();
        Some(&mut self.values[s.start..s.start + s.len])
    }

    pub fn unpack(&self) -> BTreeMap<String, Vec<f64>> {
        self.segments
            .iter()
            .map(|s| (s.name.clone(), self.values[s.start..s.start + s.len].to_vec()))
            .collect()
    }

    pub fn pack(segments: &[Segment], parts: &BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let total = segments.iter().map(|s| s.len).sum();
        let mut values = vec![0.0; total];
        for s in segments {
            let part = parts
                .get(&s.name)
                .ok_or_else(|| Error::Config(format!("missing segment {}", s.name)))?;
            if part.len() != s.len {
                return Err(Error::SegmentMismatch {
                    expected: s.len,
                    got: part.len(),
                });
            }
            values[s.start..s.start + s.len].copy_from_slice(part);
        }
        if parts.len() != segments.len() {
            return Err(Error::Config("unknown segment in parameter map".into()));
        }
        Ok(ParamVector {
            values,
            segments: segments.to_vec(),
        })
    }
}

pub fn init_params(model: &Model, seed: u64, freq_init: FreqInit, coeff_init: CoeffInit) -> ParamVector {
    let mut rng = seeded_rng(seed, Stream::Params);
    let mut p = ParamVector::zeros(model);
    if let Some(layout) = model.fourier() {
        let f = layout.init_frequencies(freq_init, &model.harmonic_k, &mut rng);
        p.get_mut("feature-frequencies").expect("segment").copy_from_slice(&f);
        let c = layout.init_coeffs(coeff_init, &mut rng);
        p.get_mut("feature-coeffs").expect("segment").copy_from_slice(&c);
    }
    for (i, layer) in model.layers.iter().enumerate() {
        let bound = if i == 0 && model.spec.arch == Arch::Fls4x50 {
            1.0 / layer.fan_in as f64
        } else {
            (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt()
        };
        for v in &mut p.values[layer.w_off..layer.w_off + layer.fan_in * layer.fan_out] {
            *v = rng.random_range(-bound..bound);
        }
    }
    p
}

// ---------------------------------------------------------------------------
// Checkpoints

const MAGIC: &[u8; 8] = b"SFNCKPT1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub arch: Arch,
    pub spec_hash: String,
    pub seed: u64,
    pub n_params: usize,
}

/// `MAGIC | u32 header length | JSON header | n_params little-endian f64`.
pub fn write_checkpoint(path: &Path, model: &Model, seed: u64, params: &[f64]) -> Result<()> {
    model.check_len(params.len())?;
    let header = CheckpointHeader {
        arch: model.spec.arch,
        spec_hash: model.spec_hash(),
        seed,
        n_params: params.len(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut buf = Vec::with_capacity(12 + json.len() + 8 * params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for v in params {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<f64>)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    };
    if buf.len() < 12 || &buf[..8] != MAGIC {
        return Err(bad("not a checkpoint"));
    }
    let hlen = u32::from_le_bytes(buf[8..12].try_into().expect("4 bytes")) as usize;
    let body = buf.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(body).map_err(|e| bad(&format!("header: {e}")))?;
    let data = &buf[12 + hlen..];
    if data.len() != 8 * header.n_params {
        return Err(bad("parameter payload length mismatch"));
    }
    let params = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((header, params))
}

/// Load a checkpoint and verify it belongs to `model`.
pub fn load_for(model: &Model, path: &Path) -> Result<(CheckpointHeader, Vec<f64>)> {
    let (h, p) = read_checkpoint(path)?;
    if h.spec_hash != model.spec_hash() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: "checkpoint was written for a different network".into(),
        });
    }
    model.check_len(p.len())?;
    Ok((h, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::ProblemId;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn activation_derivatives_match_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for act in [
            Activation::Tanh,
            Activation::Sine,
            Activation::Relu,
            Activation::Gelu,
            Activation::Swish,
        ] {
            for _ in 0..100 {
                let mut z: f64 = rng.random_range(-3.0..3.0);
                if act == Activation::Relu && z.abs() < 1e-3 {
                    z += 0.1;
                }
                let h = 1e-5;
                let d = act.derivs(z);
                for k in 0..3 {
                    let fd = (act.derivs(z + h)[k] - act.derivs(z - h)[k]) / (2.0 * h);
                    let tol = 1e-8 * (1.0 + d[k + 1].abs()) + 1e-9;
                    assert!((fd - d[k + 1]).abs() < tol * 10.0, "{act} order {k} at {z}: {fd} vs {}", d[k + 1]);
                }
            }
        }
    }

    #[test]
    fn mlp_parameter_count() {
        let p = PdeProblem::new(ProblemId::Wave);
        let m = Model::new(&NetworkSpec::mlp(Arch::Mlp4x50, FeatureConfig::Raw), &p, 0).unwrap();
        assert_eq!(m.n_params, 2 * 50 + 50 + 3 * (50 * 50 + 50) + 50 + 1);
        assert_eq!(m.n_params, 7851);
    }

    #[test]
    fn safenet_is_smaller_than_rff_mlp() {
        let p = PdeProblem::new(ProblemId::Wave);
        let sf = Model::new(&NetworkSpec::safenet(128), &p, 0).unwrap();
        // 2*32 frequencies, 128 amplitudes, 50 x (128 + 2) + 50 + 50 + 1
        assert_eq!(sf.n_params, 64 + 128 + 50 * 130 + 101);
        let rff = FeatureConfig::Rff {
            m: 64,
            sigma_spatial: 200.0,
            sigma_temporal: 10.0,
        };
        let mlp = Model::new(&NetworkSpec::mlp(Arch::Mlp4x50, rff), &p, 0).unwrap();
        assert!(sf.n_params < mlp.n_params);
    }

    #[test]
    fn init_examples() {
        let p = PdeProblem::new(ProblemId::Convection);
        let m = Model::new(&NetworkSpec::safenet(16), &p, 0).unwrap();
        let a = init_params(&m, 7, FreqInit::Harmonic, CoeffInit::Unit);
        assert!(a.get("feature-coeffs").unwrap().iter().all(|c| *c == 1.0));
        let pi = std::f64::consts::PI;
        assert_eq!(&a.get("feature-frequencies").unwrap()[..4], &[pi, 2.0 * pi, 3.0 * pi, 4.0 * pi]);
        let b = init_params(&m, 7, FreqInit::Harmonic, CoeffInit::Unit);
        assert_eq!(a.values, b.values);
        assert!(a.get("b1").unwrap().iter().all(|v| *v == 0.0));
        let names: Vec<_> = m.segments.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["feature-frequencies", "feature-coeffs", "W1", "b1", "w2", "b2"]);
    }

    #[test]
    fn harmonic_divisor_uses_dirichlet_length() {
        let p = PdeProblem::new(ProblemId::Diffusion);
        let m = Model::new(&NetworkSpec::safenet(8), &p, 0).unwrap();
        let a = init_params(&m, 0, FreqInit::Harmonic, CoeffInit::Unit);
        let pi = std::f64::consts::PI;
        assert_eq!(a.get("feature-frequencies").unwrap()[..2], [pi / 2.0, pi]);
    }

    #[test]
    fn fls_first_layer_bound() {
        let p = PdeProblem::new(ProblemId::Wave);
        let m = Model::new(&NetworkSpec::mlp(Arch::Fls4x50, FeatureConfig::Raw), &p, 0).unwrap();
        let a = init_params(&m, 3, FreqInit::Harmonic, CoeffInit::Unit);
        assert!(a.get("W1").unwrap().iter().all(|w| w.abs() <= 0.5));
        assert_eq!(m.layers[0].act, Some(Activation::Sine));
        assert_eq!(m.layers[1].act, Some(Activation::Tanh));
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = PdeProblem::new(ProblemId::Wave);
        let m = Model::new(&NetworkSpec::safenet(16), &p, 0).unwrap();
        let a = init_params(&m, 1, FreqInit::Gaussian, CoeffInit::Gaussian);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        write_checkpoint(&path, &m, 1, &a.values).unwrap();
        let (h, v) = load_for(&m, &path).unwrap();
        assert_eq!(h.seed, 1);
        assert_eq!(v, a.values);
        let other = Model::new(&NetworkSpec::safenet(32), &p, 0).unwrap();
        assert!(load_for(&other, &path).is_err());
    }
}
