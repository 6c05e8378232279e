//! Pattern generators: anything mapping a noise-filled patch and its mask to
//! a patch of the same shape.

use std::io::{Read, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::noise::ValueNoise;
use crate::error::{Error, Result};
use crate::volume::{Mask3, NormVolume};

/// Contract for pattern generators. Output must have the input's dims; values
/// are clipped to the patch range.
pub trait PatchGenerator: Sync {
    fn generate(&self, patch: &NormVolume, mask: &Mask3) -> Result<NormVolume>;
}

impl<F> PatchGenerator for F
where
    F: Fn(&NormVolume, &Mask3) -> Result<NormVolume> + Sync,
{
    fn generate(&self, patch: &NormVolume, mask: &Mask3) -> Result<NormVolume> {
        self(patch, mask)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityGenerator;

impl PatchGenerator for IdentityGenerator {
    fn generate(&self, patch: &NormVolume, _mask: &Mask3) -> Result<NormVolume> {
        Ok(patch.clone())
    }
}

/// Target texture of the procedural generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternStyle {
    /// Ground-glass opacity: mean -550 HU, s.d. 80 HU, 30% of the input kept.
    Ggo,
    /// Consolidation: mean -50 HU, s.d. 60 HU.
    Consolidation,
}

impl PatternStyle {
    /// (mean HU, s.d. HU, fraction of the input signal kept)
    fn band(self) -> (f64, f64, f64) {
        match self {
            PatternStyle::Ggo => (-550.0, 80.0, 0.3),
            PatternStyle::Consolidation => (-50.0, 60.0, 0.0),
        }
    }
}

/// Noise feature size of the procedural texture (mm).
const TEXTURE_FEATURE_MM: f64 = 4.0;
const TEXTURE_OCTAVES: u32 = 3;

/// Deterministic stand-in for a trained generator: inside the mask, emits
/// value noise shaped to the style's HU band. The noise is a function of
/// physical position, so overlapping windows see the same texture.
#[derive(Debug, Clone, Copy)]
pub struct ProceduralGenerator {
    style: PatternStyle,
    noise: ValueNoise,
}

impl ProceduralGenerator {
    pub fn new(style: PatternStyle, seed: u64) -> Self {
        Self {
            style,
            noise: ValueNoise::new(seed, TEXTURE_FEATURE_MM, TEXTURE_OCTAVES),
        }
    }
}

impl PatchGenerator for ProceduralGenerator {
    fn generate(&self, patch: &NormVolume, mask: &Mask3) -> Result<NormVolume> {
        let g = *patch.geometry();
        g.ensure_matches(mask.geometry(), "procedural_generate")?;
        let window = patch.window();
        let range = patch.range();
        let (mean, sd, keep) = self.style.band();
        let mut out = patch.data().to_vec();
        for (i, &m) in mask.data().iter().enumerate() {
            if m == 0 {
                continue;
            }
            let c = g.coords(i).map(|v| v as f64);
            let hu = mean + sd * self.noise.sample(g.to_physical(c));
            let shaped = window.normalize(hu, range);
            out[i] = ((1.0 - keep) * shaped + keep * out[i] as f64) as f32;
        }
        patch.with_data(out)
    }
}

/// One-shot form of [`ProceduralGenerator`].
pub fn procedural_generate(patch: &NormVolume, mask: &Mask3, style: PatternStyle, seed: u64) -> Result<NormVolume> {
    ProceduralGenerator::new(style, seed).generate(patch, mask)
}

/// Magic prefix of the external generator protocol.
pub const PROTOCOL_MAGIC: [u8; 4] = *b"LSG1";
/// Header: magic, then `nx ny nz` as little-endian u32.
pub const HEADER_LEN: usize = 16;

fn header(dims: [usize; 3]) -> Result<[u8; HEADER_LEN]> {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(&PROTOCOL_MAGIC);
    for a in 0..3 {
        let d = u32::try_from(dims[a]).map_err(|_| Error::Generator(format!("dim {} too large", dims[a])))?;
        h[4 + 4 * a..8 + 4 * a].copy_from_slice(&d.to_le_bytes());
    }
    Ok(h)
}

fn parse_header(bytes: &[u8]) -> Result<[usize; 3]> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Generator(format!("short header: {} bytes", bytes.len())));
    }
    if bytes[..4] != PROTOCOL_MAGIC {
        return Err(Error::Generator("bad magic".into()));
    }
    Ok(std::array::from_fn(|a| {
        u32::from_le_bytes(bytes[4 + 4 * a..8 + 4 * a].try_into().expect("4 bytes")) as usize
    }))
}

/// Request: header, `n` little-endian f32 samples, `n` mask bytes (x-fastest).
pub fn encode_request(patch: &NormVolume, mask: &Mask3) -> Result<Vec<u8>> {
    patch.geometry().ensure_matches(mask.geometry(), "generator request")?;
    let n = patch.data().len();
    let mut out = Vec::with_capacity(HEADER_LEN + 5 * n);
    out.extend_from_slice(&header(patch.dims())?);
    for v in patch.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(mask.data());
    Ok(out)
}

/// Decoded request: dims, samples, mask bytes.
pub fn decode_request(bytes: &[u8]) -> Result<([usize; 3], Vec<f32>, Vec<u8>)> {
    let dims = parse_header(bytes)?;
    let n: usize = dims.iter().product();
    let body = &bytes[HEADER_LEN..];
    if body.len() != 5 * n {
        return Err(Error::Generator(format!("request body is {} bytes, expected {}", body.len(), 5 * n)));
    }
    let samples = body[..4 * n]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok((dims, samples, body[4 * n..].to_vec()))
}

/// Response: header, `n` little-endian f32 samples.
pub fn encode_response(dims: [usize; 3], samples: &[f32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * samples.len());
    out.extend_from_slice(&header(dims)?);
    for v in samples {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_response(bytes: &[u8], expected: [usize; 3]) -> Result<Vec<f32>> {
    let dims = parse_header(bytes)?;
    if dims != expected {
        return Err(Error::Generator(format!("response dims {dims:?}, expected {expected:?}")));
    }
    let n: usize = dims.iter().product();
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * n {
        return Err(Error::Generator(format!("response body is {} bytes, expected {}", body.len(), 4 * n)));
    }
    let samples: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::Generator("response contains NaN".into()));
    }
    Ok(samples)
}

/// Runs an external program once per window, exchanging the binary protocol
/// over stdin/stdout.
#[derive(Debug, Clone)]
pub struct SubprocessGenerator {
    program: String,
    args: Vec<String>,
}

impl SubprocessGenerator {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }
}

impl PatchGenerator for SubprocessGenerator {
    fn generate(&self, patch: &NormVolume, mask: &Mask3) -> Result<NormVolume> {
        let request = encode_request(patch, mask)?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Generator(format!("cannot start {}: {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(&request));
        let mut response = Vec::new();
        child
            .stdout
            .take()
            .expect("piped stdout")
            .read_to_end(&mut response)
            .map_err(|e| Error::Generator(format!("reading generator output: {e}")))?;
        let status = child
            .wait()
            .map_err(|e| Error::Generator(format!("waiting for generator: {e}")))?;
        writer
            .join()
            .map_err(|_| Error::Generator("stdin writer panicked".into()))?
            .map_err(|e| Error::Generator(format!("writing generator input: {e}")))?;
        if !status.success() {
            return Err(Error::Generator(format!("{} exited with {status}", self.program)));
        }
        patch.with_data(decode_response(&response, patch.dims())?)
    }
}
