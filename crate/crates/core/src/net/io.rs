//! Weight files, little-endian:
//!
//! ```text
//! magic       "LUNGNET1"
//! n           u32, number of layer sizes
//! sizes       n x u32
//! bottleneck  u32, index into sizes
//! params      per layer: weights (outputs x inputs, row-major), then bias; f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{DenseLayer, Network};
use crate::error::{LungError, Result};

pub const NET_MAGIC: &[u8; 8] = b"LUNGNET1";

pub fn write_network(net: &Network, mut w: impl Write) -> Result<()> {
    w.write_all(NET_MAGIC)?;
    let sizes = net.layer_sizes();
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for &s in sizes {
        w.write_all(
            &u32::try_from(s)
                .map_err(|_| LungError::Format("layer too wide".into()))?
                .to_le_bytes(),
        )?;
    }
    w.write_all(&(net.bottleneck_index() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(net.param_count() * 8);
    for l in net.layers() {
        for v in l.weights.iter().chain(l.bias.iter()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; n * 8];
    r.read_exact(&mut raw)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_network(mut r: impl Read) -> Result<Network> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != NET_MAGIC {
        return Err(LungError::Format("not a network weight file".into()));
    }
    let n = read_u32(&mut r)? as usize;
    if !(3..=64).contains(&n) {
        return Err(LungError::Format(format!("implausible layer count {n}")));
    }
    let sizes = (0..n)
        .map(|_| read_u32(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let bottleneck = read_u32(&mut r)? as usize;
    let mut layers = Vec::with_capacity(n - 1);
    for w in sizes.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let weights =
            Array2::from_shape_vec((outputs, inputs), read_f64s(&mut r, inputs * outputs)?)
                .map_err(|e| LungError::Format(e.to_string()))?;
        let bias = Array1::from_vec(read_f64s(&mut r, outputs)?);
        layers.push(DenseLayer { weights, bias });
    }
    Network::from_parts(sizes, bottleneck, layers).map_err(|e| LungError::Format(e.to_string()))
}

impl Network {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_network(self, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_network(BufReader::new(File::open(path)?))
    }
}
