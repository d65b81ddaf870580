//! Binary containers for tensors and trained models.
//!
//! Tensor container layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "TNSR"
//! version u32      currently 1
//! dtype   u32      0 = f32, 1 = u32
//! ndims   u32
//! dims    ndims x u64
//! payload numel x 4 bytes, little-endian
//! ```
//!
//! Model container: magic "LPMD", version u32, a length-prefixed JSON
//! architecture description, then the weight tensors back to back in the
//! container format above. Weights round-trip bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::nn::{LayerSpec, Network};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"TNSR";
pub const TENSOR_VERSION: u32 = 1;
pub const MODEL_MAGIC: &[u8; 4] = b"LPMD";
pub const MODEL_VERSION: u32 = 1;

const DTYPE_F32: u32 = 0;
const DTYPE_U32: u32 = 1;

/// Upper bound on elements in one tensor, a guard against corrupt headers
/// requesting absurd allocations.
const MAX_ELEMS: u64 = 1 << 31;

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated while reading {what}"))
        } else {
            Error::Io(e)
        }
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn write_header<W: Write>(w: &mut W, dtype: u32, dims: &[usize]) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    write_u32(w, TENSOR_VERSION)?;
    write_u32(w, dtype)?;
    write_u32(w, dims.len() as u32)?;
    for &d in dims {
        write_u64(w, d as u64)?;
    }
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<(u32, Vec<usize>)> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "tensor magic")?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::Format(format!(
            "bad tensor magic {magic:02x?}, expected {TENSOR_MAGIC:02x?}"
        )));
    }
    let version = read_u32(r, "tensor version")?;
    if version != TENSOR_VERSION {
        return Err(Error::Format(format!(
            "unsupported tensor version {version}"
        )));
    }
    let dtype = read_u32(r, "tensor dtype")?;
    let ndims = read_u32(r, "tensor rank")?;
    if ndims > 8 {
        return Err(Error::Format(format!("implausible tensor rank {ndims}")));
    }
    let mut dims = Vec::with_capacity(ndims as usize);
    let mut numel = 1u64;
    for i in 0..ndims {
        let d = read_u64(r, "tensor dims")?;
        numel = numel
            .checked_mul(d)
            .filter(|&n| n <= MAX_ELEMS)
            .ok_or_else(|| Error::Format(format!("tensor dim {i} overflows size limit")))?;
        dims.push(d as usize);
    }
    Ok((dtype, dims))
}

/// Writes an f32 tensor to a stream.
pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    write_header(w, DTYPE_F32, t.shape())?;
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads an f32 tensor from a stream.
pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let (dtype, dims) = read_header(r)?;
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("expected f32 tensor, dtype {dtype}")));
    }
    let numel: usize = dims.iter().product();
    let mut bytes = vec![0u8; numel * 4];
    read_exact(r, &mut bytes, "tensor payload")?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(dims, data)
}

/// Writes a u32 vector as a rank-1 tensor, used for label arrays.
pub fn write_u32_vec<W: Write>(w: &mut W, v: &[u32]) -> Result<()> {
    write_header(w, DTYPE_U32, &[v.len()])?;
    for &x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_u32_vec<R: Read>(r: &mut R) -> Result<Vec<u32>> {
    let (dtype, dims) = read_header(r)?;
    if dtype != DTYPE_U32 {
        return Err(Error::Format(format!("expected u32 tensor, dtype {dtype}")));
    }
    if dims.len() != 1 {
        return Err(Error::Format(format!(
            "expected rank-1 u32 tensor, got rank {}",
            dims.len()
        )));
    }
    let mut bytes = vec![0u8; dims[0] * 4];
    read_exact(r, &mut bytes, "tensor payload")?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn save_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: &Path) -> Result<Tensor> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensor(&mut r)
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    layers: Vec<LayerSpec>,
}

/// Saves architecture and weights.
pub fn save_model(path: &Path, net: &Network) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    write_u32(&mut w, MODEL_VERSION)?;
    let header = ModelHeader {
        layers: net.specs().to_vec(),
    };
    let json = serde_json::to_vec(&header)
        .map_err(|e| Error::Format(format!("model header: {e}")))?;
    write_u32(&mut w, json.len() as u32)?;
    w.write_all(&json)?;
    let weights = net.weights();
    write_u32(&mut w, weights.len() as u32)?;
    for t in weights {
        write_tensor(&mut w, t)?;
    }
    w.flush()?;
    Ok(())
}

/// Restores a model saved by [`save_model`]. The network is rebuilt from the
/// stored architecture and its weights are replaced byte for byte.
pub fn load_model(path: &Path) -> Result<Network> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "model magic")?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format(format!(
            "bad model magic {magic:02x?}, expected {MODEL_MAGIC:02x?}"
        )));
    }
    let version = read_u32(&mut r, "model version")?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let json_len = read_u32(&mut r, "model header length")? as usize;
    if json_len > (1 << 24) {
        return Err(Error::Format(format!(
            "implausible model header length {json_len}"
        )));
    }
    let mut json = vec![0u8; json_len];
    read_exact(&mut r, &mut json, "model header")?;
    let header: ModelHeader = serde_json::from_slice(&json)
        .map_err(|e| Error::Format(format!("model header: {e}")))?;
    let count = read_u32(&mut r, "model tensor count")? as usize;
    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        weights.push(read_tensor(&mut r)?);
    }
    let mut net = Network::new(&header.layers, 0)?;
    net.set_weights(weights)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::uniform_cnn;
    use std::io::Cursor;

    fn awkward_tensor() -> Tensor {
        // Values chosen to catch any non-bit-exact path: signed zero,
        // denormals, extremes, and an ordinary mix.
        let data = vec![
            0.0,
            -0.0,
            1.0,
            -1.5,
            f32::MIN_POSITIVE / 2.0,
            f32::MAX,
            f32::MIN,
            3.141_592_7,
        ];
        Tensor::new(vec![2, 2, 2], data).unwrap()
    }

    #[test]
    fn tensor_round_trip_is_bit_exact() {
        let t = awkward_tensor();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let back = read_tensor(&mut Cursor::new(&buf)).unwrap();
        assert_eq!(back.shape(), t.shape());
        let bits_a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
        let bits_b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits_a, bits_b);
    }

    #[test]
    fn header_is_laid_out_as_documented() {
        let t = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[0..4], b"TNSR");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 0);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 24 + 12);
        assert_eq!(f32::from_le_bytes(buf[24..28].try_into().unwrap()), 1.0);
    }

    #[test]
    fn corrupt_streams_are_rejected() {
        let t = Tensor::new(vec![4], vec![0.5; 4]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_tensor(&mut Cursor::new(&bad_magic)),
            Err(Error::Format(_))
        ));

        let mut bad_version = buf.clone();
        bad_version[4] = 9;
        assert!(matches!(
            read_tensor(&mut Cursor::new(&bad_version)),
            Err(Error::Format(_))
        ));

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(
            read_tensor(&mut Cursor::new(truncated)),
            Err(Error::Format(_))
        ));

        let mut wrong_dtype = buf.clone();
        wrong_dtype[8] = 1;
        assert!(read_tensor(&mut Cursor::new(&wrong_dtype)).is_err());
    }

    #[test]
    fn huge_dims_are_refused_without_allocating() {
        let mut buf = Vec::new();
        buf.extend_from_slice(b"TNSR");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&0u32.to_le_bytes());
        buf.extend_from_slice(&2u32.to_le_bytes());
        buf.extend_from_slice(&u64::MAX.to_le_bytes());
        buf.extend_from_slice(&2u64.to_le_bytes());
        assert!(matches!(
            read_tensor(&mut Cursor::new(&buf)),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn u32_vec_round_trips() {
        let v = vec![0u32, 1, 2, u32::MAX];
        let mut buf = Vec::new();
        write_u32_vec(&mut buf, &v).unwrap();
        assert_eq!(read_u32_vec(&mut Cursor::new(&buf)).unwrap(), v);
        // An f32 reader must refuse the u32 payload.
        assert!(read_tensor(&mut Cursor::new(&buf)).is_err());
    }

    #[test]
    fn tensor_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tnsr");
        let t = awkward_tensor();
        save_tensor(&path, &t).unwrap();
        let back = load_tensor(&path).unwrap();
        assert_eq!(back.shape(), t.shape());
        assert_eq!(back.data(), t.data());
    }

    #[test]
    fn model_round_trip_preserves_forward_pass() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lpmd");
        let specs = uniform_cnn(1, 4, 1, 3);
        let mut net = Network::new(&specs, 77).unwrap();
        save_model(&path, &net).unwrap();
        let mut back = load_model(&path).unwrap();
        assert_eq!(back.specs(), net.specs());
        for (a, b) in net.weights().iter().zip(back.weights()) {
            let bits_a: Vec<u32> = a.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u32> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
        let x = Tensor::new(vec![2, 1, 8, 8], (0..128).map(|i| i as f32 / 128.0).collect()).unwrap();
        assert_eq!(net.forward(&x).unwrap().data(), back.forward(&x).unwrap().data());
    }

    #[test]
    fn model_with_bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.lpmd");
        std::fs::write(&path, b"NOPE....").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));
    }
}
