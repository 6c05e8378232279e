//! MetaImage (`.mhd` + `.raw`) reading and writing.
//!
//! Only uncompressed, single-channel, 3D images with a detached data file are
//! supported. Headers are written with a fixed key order:
//!
//! ```text
//! ObjectType = Image
//! NDims = 3
//! BinaryData = True
//! BinaryDataByteOrderMSB = False
//! DimSize = nx ny nz
//! ElementSpacing = sx sy sz
//! Offset = ox oy oz
//! ElementType = MET_SHORT | MET_UCHAR | MET_FLOAT
//! ElementDataFile = <name>.raw
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{Geometry, Grid, HuVolume, Mask3, Voxel, HU_MAX, HU_MIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    Short,
    UChar,
    Float,
}

impl ElementType {
    pub fn tag(self) -> &'static str {
        match self {
            ElementType::Short => "MET_SHORT",
            ElementType::UChar => "MET_UCHAR",
            ElementType::Float => "MET_FLOAT",
        }
    }

    fn size(self) -> usize {
        match self {
            ElementType::Short => 2,
            ElementType::UChar => 1,
            ElementType::Float => 4,
        }
    }

    fn parse(tag: &str) -> Option<Self> {
        match tag {
            "MET_SHORT" => Some(ElementType::Short),
            "MET_UCHAR" => Some(ElementType::UChar),
            "MET_FLOAT" => Some(ElementType::Float),
            _ => None,
        }
    }
}

/// Sample types that can be written to a MetaImage payload.
pub trait MhdElement: Voxel {
    const ELEMENT: ElementType;
    fn write_le(self, out: &mut Vec<u8>);
}

impl MhdElement for i16 {
    const ELEMENT: ElementType = ElementType::Short;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl MhdElement for u8 {
    const ELEMENT: ElementType = ElementType::UChar;
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }
}

impl MhdElement for f32 {
    const ELEMENT: ElementType = ElementType::Float;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

// Soft masks and priors are stored as 32-bit floats on disk.
impl MhdElement for f64 {
    const ELEMENT: ElementType = ElementType::Float;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self as f32).to_le_bytes());
    }
}

/// A loaded MetaImage, typed by its element type.
#[derive(Debug, Clone, PartialEq)]
pub enum MetaImage {
    Hu(HuVolume),
    Mask(Mask3),
    Float(Grid<f32>),
}

impl MetaImage {
    pub fn geometry(&self) -> &Geometry {
        match self {
            MetaImage::Hu(v) => v.geometry(),
            MetaImage::Mask(m) => m.geometry(),
            MetaImage::Float(f) => f.geometry(),
        }
    }
}

/// Writes `<path>` (header) and a sibling `.raw` payload.
pub fn save_mhd<T: MhdElement>(grid: &Grid<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw_path = path.with_extension("raw");
    let raw_name = raw_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Parameter(format!("unusable output path {}", path.display())))?
        .to_string();

    let g = grid.geometry();
    let header = format!(
        "ObjectType = Image\n\
         NDims = 3\n\
         BinaryData = True\n\
         BinaryDataByteOrderMSB = False\n\
         DimSize = {} {} {}\n\
         ElementSpacing = {} {} {}\n\
         Offset = {} {} {}\n\
         ElementType = {}\n\
         ElementDataFile = {}\n",
        g.dims[0],
        g.dims[1],
        g.dims[2],
        g.spacing[0],
        g.spacing[1],
        g.spacing[2],
        g.origin[0],
        g.origin[1],
        g.origin[2],
        T::ELEMENT.tag(),
        raw_name
    );

    let mut payload = Vec::with_capacity(grid.data().len() * T::ELEMENT.size());
    for &v in grid.data() {
        v.write_le(&mut payload);
    }

    let mut raw = fs::File::create(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    raw.write_all(&payload).map_err(|e| Error::io(&raw_path, e))?;
    fs::write(path, header).map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct Header {
    geometry: Geometry,
    element: ElementType,
    big_endian: bool,
    data_file: PathBuf,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn parse_header(path: &Path) -> Result<Header> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut keys: HashMap<String, String> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format_err(path, format!("line {} has no '='", lineno + 1)))?;
        keys.insert(k.trim().to_string(), v.trim().to_string());
    }

    let get = |key: &str| {
        keys.get(key)
            .map(String::as_str)
            .ok_or_else(|| format_err(path, format!("missing key {key}")))
    };
    let triple_f64 = |key: &str, value: &str| -> Result<[f64; 3]> {
        let parts: Vec<f64> = value
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format_err(path, format!("{key} is not numeric: {value}")))?;
        <[f64; 3]>::try_from(parts)
            .map_err(|_| format_err(path, format!("{key} needs 3 values: {value}")))
    };

    let ndims: usize = get("NDims")?
        .parse()
        .map_err(|_| format_err(path, "NDims is not an integer"))?;
    if ndims != 3 {
        return Err(Error::Unsupported(format!("NDims = {ndims} in {}", path.display())));
    }

    let dims_str = get("DimSize")?;
    let dims: Vec<usize> = dims_str
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| format_err(path, format!("DimSize is not integral: {dims_str}")))?;
    let dims = <[usize; 3]>::try_from(dims)
        .map_err(|_| format_err(path, format!("DimSize needs 3 values: {dims_str}")))?;

    let spacing = match keys.get("ElementSpacing") {
        Some(v) => triple_f64("ElementSpacing", v)?,
        None => [1.0; 3],
    };
    let origin = match ["Offset", "Position", "Origin"]
        .iter()
        .find_map(|k| keys.get(*k).map(|v| (*k, v)))
    {
        Some((k, v)) => triple_f64(k, v)?,
        None => [0.0; 3],
    };
    let geometry = Geometry::new(dims, spacing, origin)
        .map_err(|e| format_err(path, e.to_string()))?;

    if let Some(v) = keys.get("BinaryData") {
        if !v.eq_ignore_ascii_case("true") {
            return Err(Error::Unsupported("ASCII MetaImage payloads".into()));
        }
    }
    if let Some(v) = keys.get("CompressedData") {
        if v.eq_ignore_ascii_case("true") {
            return Err(Error::Unsupported("compressed MetaImage payloads".into()));
        }
    }
    if let Some(v) = keys.get("ElementNumberOfChannels") {
        if v != "1" {
            return Err(Error::Unsupported(format!("{v} channels per element")));
        }
    }
    let big_endian = match keys
        .get("BinaryDataByteOrderMSB")
        .or_else(|| keys.get("ElementByteOrderMSB"))
    {
        Some(v) if v.eq_ignore_ascii_case("true") => true,
        Some(v) if v.eq_ignore_ascii_case("false") => false,
        Some(v) => return Err(format_err(path, format!("bad byte order flag {v}"))),
        None => false,
    };

    let tag = get("ElementType")?;
    let element = ElementType::parse(tag)
        .ok_or_else(|| Error::Unsupported(format!("ElementType {tag}")))?;

    let file = get("ElementDataFile")?;
    if file.eq_ignore_ascii_case("LOCAL") || file.contains(' ') {
        return Err(Error::Unsupported(format!("ElementDataFile = {file}")));
    }
    let data_file = path.parent().unwrap_or(Path::new(".")).join(file);

    Ok(Header {
        geometry,
        element,
        big_endian,
        data_file,
    })
}

/// Reads a MetaImage. HU samples are clamped to `[HU_MIN, HU_MAX]`; mask
/// samples are binarized (any non-zero value becomes 1).
pub fn load_mhd(path: impl AsRef<Path>) -> Result<MetaImage> {
    let path = path.as_ref();
    let header = parse_header(path)?;
    let bytes = fs::read(&header.data_file).map_err(|e| Error::io(&header.data_file, e))?;
    let n = header.geometry.len();
    let expected = n * header.element.size();
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: header.data_file,
            expected,
            actual: bytes.len(),
        });
    }
    let bytes = &bytes[..expected];
    let g = header.geometry;

    Ok(match header.element {
        ElementType::Short => {
            let data = bytes
                .chunks_exact(2)
                .map(|c| {
                    let raw = [c[0], c[1]];
                    let v = if header.big_endian {
                        i16::from_be_bytes(raw)
                    } else {
                        i16::from_le_bytes(raw)
                    };
                    v.clamp(HU_MIN, HU_MAX)
                })
                .collect();
            MetaImage::Hu(Grid::from_vec(g, data)?)
        }
        ElementType::UChar => {
            let data = bytes.iter().map(|&b| u8::from(b != 0)).collect();
            MetaImage::Mask(Grid::from_vec(g, data)?)
        }
        ElementType::Float => {
            let data = bytes
                .chunks_exact(4)
                .map(|c| {
                    let raw = [c[0], c[1], c[2], c[3]];
                    if header.big_endian {
                        f32::from_be_bytes(raw)
                    } else {
                        f32::from_le_bytes(raw)
                    }
                })
                .collect();
            MetaImage::Float(Grid::from_vec(g, data)?)
        }
    })
}

pub fn load_hu(path: impl AsRef<Path>) -> Result<HuVolume> {
    let path = path.as_ref();
    match load_mhd(path)? {
        MetaImage::Hu(v) => Ok(v),
        _ => Err(format_err(path, "expected ElementType = MET_SHORT")),
    }
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask3> {
    let path = path.as_ref();
    match load_mhd(path)? {
        MetaImage::Mask(m) => Ok(m),
        _ => Err(format_err(path, "expected ElementType = MET_UCHAR")),
    }
}

pub fn load_float(path: impl AsRef<Path>) -> Result<Grid<f32>> {
    let path = path.as_ref();
    match load_mhd(path)? {
        MetaImage::Float(f) => Ok(f),
        _ => Err(format_err(path, "expected ElementType = MET_FLOAT")),
    }
}
