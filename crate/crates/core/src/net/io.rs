//! Binary member file: magic, version, seed, layer count, then per layer the
//! shape followed by weights and biases as little-endian IEEE-754 doubles.

use std::io::{Read, Write};

use super::{Dense, NetworkParams};
use crate::error::{Error, Result};

pub const MEMBER_MAGIC: &[u8; 8] = b"EFFQNET\0";
pub const MEMBER_VERSION: u32 = 1;

fn io_err(e: std::io::Error) -> Error {
    Error::io("<member>", e)
}

pub fn write_member<W: Write>(mut out: W, params: &NetworkParams) -> Result<()> {
    out.write_all(MEMBER_MAGIC).map_err(io_err)?;
    out.write_all(&MEMBER_VERSION.to_le_bytes())
        .map_err(io_err)?;
    out.write_all(&params.seed.to_le_bytes()).map_err(io_err)?;
    out.write_all(&(params.layers.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    for layer in &params.layers {
        out.write_all(&(layer.inputs as u32).to_le_bytes())
            .map_err(io_err)?;
        out.write_all(&(layer.outputs as u32).to_le_bytes())
            .map_err(io_err)?;
        for v in layer.weights.iter().chain(&layer.bias) {
            out.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::ModelFormat("truncated member file".into()))?;
    Ok(buf)
}

pub fn read_member<R: Read>(mut input: R) -> Result<NetworkParams> {
    if &read_array::<8, _>(&mut input)? != MEMBER_MAGIC {
        return Err(Error::ModelFormat("not a member parameter file".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != MEMBER_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported member version {version}"
        )));
    }
    let seed = u64::from_le_bytes(read_array(&mut input)?);
    let n_layers = u32::from_le_bytes(read_array(&mut input)?) as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(Error::ModelFormat(format!(
            "implausible layer count {n_layers}"
        )));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let inputs = u32::from_le_bytes(read_array(&mut input)?) as usize;
        let outputs = u32::from_le_bytes(read_array(&mut input)?) as usize;
        let mut read_n = |n: usize| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| Ok(f64::from_le_bytes(read_array(&mut input)?)))
                .collect()
        };
        let weights = read_n(inputs * outputs)?;
        let bias = read_n(outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest).map_err(io_err)?;
    if !rest.is_empty() {
        return Err(Error::ModelFormat(format!(
            "{} trailing bytes in member file",
            rest.len()
        )));
    }
    let params = NetworkParams { layers, seed };
    params.validate()?;
    Ok(params)
}
