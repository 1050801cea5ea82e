//! Single-file binary checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic  b"QGCK"
//! u32    format version (1)
//! str    config echo (u64 length + UTF-8 bytes)
//! u64    iteration counter
//! [u8;32] rng seed, u128 rng word position
//! generator:  latent_dim, bn_epsilon, bn_momentum, block specs,
//!             then per block: tap (s, theta) pairs, batch-norm state
//! discriminator: config, then per conv: weights, biases
//! adam (generator), adam (discriminator): lr, beta1, beta2, eps, t, m, v
//! [u8;32] sha-256 over everything above
//! ```
//!
//! Parameter blocks are raw f64 bit patterns, so save -> load -> save is
//! byte-identical and forward passes after a round-trip match bitwise.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gan::adam::Adam;
use crate::gan::discriminator::{Discriminator, DiscriminatorConfig, RConvSpec};
use crate::gan::generator::{Generator, GeneratorBlock, GeneratorConfig};
use crate::gan::train::Gan;
use crate::qalgebra::{PureQuaternion, RotationParams};
use crate::qlayers::ActKind;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"QGCK";

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u128(&mut self, v: u128) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64_slice(&mut self, vs: &[f64]) {
        self.u64(vs.len() as u64);
        for &v in vs {
            self.f64(v);
        }
    }

    fn raw(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    fn string(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("unexpected end of checkpoint data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u64()? as usize)
    }

    fn f64_slice(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.usize()?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Checkpoint("config echo is not valid UTF-8".into()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn write_act(w: &mut ByteWriter, act: ActKind) {
    match act {
        ActKind::LeakyRelu(alpha) => {
            w.u8(0);
            w.f64(alpha);
        }
        ActKind::Tanh => {
            w.u8(1);
            w.f64(0.0);
        }
    }
}

fn read_act(r: &mut ByteReader) -> Result<ActKind> {
    let tag = r.u8()?;
    let alpha = r.f64()?;
    match tag {
        0 => Ok(ActKind::LeakyRelu(alpha)),
        1 => Ok(ActKind::Tanh),
        _ => Err(Error::Checkpoint(format!("unknown activation tag {tag}"))),
    }
}

fn pure_vec_to_flat(ps: &[PureQuaternion]) -> Vec<f64> {
    ps.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn flat_to_pure_vec(flat: &[f64]) -> Result<Vec<PureQuaternion>> {
    if flat.len() % 3 != 0 {
        return Err(Error::Checkpoint("pure-quaternion block length not divisible by 3".into()));
    }
    Ok(flat
        .chunks_exact(3)
        .map(|c| PureQuaternion::new(c[0], c[1], c[2]))
        .collect())
}

fn write_adam(w: &mut ByteWriter, opt: &Adam) {
    w.f64(opt.lr);
    w.f64(opt.beta1);
    w.f64(opt.beta2);
    w.f64(opt.eps);
    w.u64(opt.step_count());
    let (m, v) = opt.moments();
    w.f64_slice(m);
    w.f64_slice(v);
}

fn read_adam(r: &mut ByteReader) -> Result<Adam> {
    let lr = r.f64()?;
    let beta1 = r.f64()?;
    let beta2 = r.f64()?;
    let eps = r.f64()?;
    let t = r.u64()?;
    let m = r.f64_slice()?;
    let v = r.f64_slice()?;
    Adam::from_state(lr, beta1, beta2, eps, t, m, v)
        .map_err(|_| Error::Checkpoint("adam moment buffers disagree in length".into()))
}

/// Serialize a full training state to bytes.
pub fn checkpoint_bytes(gan: &Gan, config_echo: &str) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.raw(MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.string(config_echo);
    w.u64(gan.iteration);
    w.raw(&gan.rng.get_seed());
    w.u128(gan.rng.get_word_pos());

    // Generator.
    let gcfg = gan.generator.config();
    w.u64(gcfg.latent_dim as u64);
    w.f64(gcfg.bn_epsilon);
    w.f64(gcfg.bn_momentum);
    w.u64(gcfg.blocks.len() as u64);
    for b in &gcfg.blocks {
        w.u64(b.out_channels as u64);
        w.u64(b.kernel as u64);
        w.u64(b.stride as u64);
        w.u64(b.padding as u64);
        w.u8(b.batch_norm as u8);
        write_act(&mut w, b.activation);
    }
    for deconv in gan.generator.deconv_layers() {
        let flat: Vec<f64> = deconv
            .kernel
            .taps()
            .iter()
            .flat_map(|t| [t.s, t.theta])
            .collect();
        w.f64_slice(&flat);
    }
    for norm in gan.generator.norm_layers() {
        w.f64_slice(norm.gamma());
        w.f64_slice(&pure_vec_to_flat(norm.beta()));
        w.f64_slice(&pure_vec_to_flat(norm.running_mean()));
        w.f64_slice(norm.running_var());
        w.u8(norm.is_trained() as u8);
        w.u64(norm.sample_count() as u64);
    }

    // Discriminator.
    let dcfg = gan.discriminator.config();
    w.u64(dcfg.in_channels as u64);
    w.u64(dcfg.image_side as u64);
    w.f64(dcfg.leaky_alpha);
    w.u64(dcfg.blocks.len() as u64);
    for b in &dcfg.blocks {
        w.u64(b.out_channels as u64);
        w.u64(b.kernel as u64);
        w.u64(b.stride as u64);
        w.u64(b.padding as u64);
    }
    for (weights, biases) in gan.discriminator.layer_weights() {
        w.f64_slice(weights);
        w.f64_slice(biases);
    }

    // Optimizers.
    write_adam(&mut w, &gan.opt_g);
    write_adam(&mut w, &gan.opt_d);

    let digest = Sha256::digest(&w.buf);
    w.raw(&digest);
    w.buf
}

/// Rebuild a training state from checkpoint bytes.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(Gan, String)> {
    if bytes.len() < 40 {
        return Err(Error::Checkpoint("file too short to be a checkpoint".into()));
    }
    let (payload, trailer) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(payload);
    if digest.as_slice() != trailer {
        return Err(Error::CheckpointChecksum);
    }

    let mut r = ByteReader::new(payload);
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let config_echo = r.string()?;
    let iteration = r.u64()?;
    let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
    let word_pos = r.u128()?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_word_pos(word_pos);

    // Generator.
    let latent_dim = r.usize()?;
    let bn_epsilon = r.f64()?;
    let bn_momentum = r.f64()?;
    let n_blocks = r.usize()?;
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        blocks.push(GeneratorBlock {
            out_channels: r.usize()?,
            kernel: r.usize()?,
            stride: r.usize()?,
            padding: r.usize()?,
            batch_norm: r.u8()? != 0,
            activation: read_act(&mut r)?,
        });
    }
    let gcfg = GeneratorConfig {
        latent_dim,
        blocks,
        bn_epsilon,
        bn_momentum,
    };
    let mut generator =
        Generator::new(gcfg).map_err(|e| Error::Checkpoint(format!("generator config: {e}")))?;
    for deconv in generator.deconv_layers_mut() {
        let flat = r.f64_slice()?;
        if flat.len() != 2 * deconv.kernel.tap_count() {
            return Err(Error::Checkpoint("tap block length mismatch".into()));
        }
        for (tap, pair) in deconv.kernel.taps_mut().iter_mut().zip(flat.chunks_exact(2)) {
            *tap = RotationParams {
                s: pair[0],
                theta: pair[1],
            };
        }
    }
    for norm in generator.norm_layers_mut() {
        let gamma = r.f64_slice()?;
        let beta = flat_to_pure_vec(&r.f64_slice()?)?;
        let mean = flat_to_pure_vec(&r.f64_slice()?)?;
        let var = r.f64_slice()?;
        let trained = r.u8()? != 0;
        let sample_count = r.usize()?;
        norm.restore(gamma, beta, mean, var, trained, sample_count)
            .map_err(|e| Error::Checkpoint(format!("batch norm state: {e}")))?;
    }

    // Discriminator.
    let in_channels = r.usize()?;
    let image_side = r.usize()?;
    let leaky_alpha = r.f64()?;
    let n_dblocks = r.usize()?;
    let mut dblocks = Vec::with_capacity(n_dblocks);
    for _ in 0..n_dblocks {
        dblocks.push(RConvSpec {
            out_channels: r.usize()?,
            kernel: r.usize()?,
            stride: r.usize()?,
            padding: r.usize()?,
        });
    }
    let dcfg = DiscriminatorConfig {
        in_channels,
        image_side,
        blocks: dblocks,
        leaky_alpha,
    };
    let mut discriminator = Discriminator::new(dcfg)
        .map_err(|e| Error::Checkpoint(format!("discriminator config: {e}")))?;
    let n_layers = discriminator.layer_weights().len();
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let weights = r.f64_slice()?;
        let biases = r.f64_slice()?;
        layers.push((weights, biases));
    }
    discriminator.set_layer_weights(layers)?;

    let opt_g = read_adam(&mut r)?;
    let opt_d = read_adam(&mut r)?;
    if !r.done() {
        return Err(Error::Checkpoint("trailing bytes after checkpoint payload".into()));
    }

    Ok((
        Gan {
            generator,
            discriminator,
            opt_g,
            opt_d,
            iteration,
            rng,
        },
        config_echo,
    ))
}

/// Write a checkpoint atomically (temp file + rename).
pub fn save_checkpoint(path: &Path, gan: &Gan, config_echo: &str) -> Result<()> {
    let bytes = checkpoint_bytes(gan, config_echo);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Load a checkpoint file, returning the training state and the stored
/// config echo.
pub fn load_checkpoint(path: &Path) -> Result<(Gan, String)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
