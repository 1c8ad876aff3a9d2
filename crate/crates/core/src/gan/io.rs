//! Model file: magic `TGAN`, version, a u32 architecture descriptor, then
//! every weight as f32 little-endian (mapping, synthesis, discriminator).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{GanArchitecture, ToyGanParams};

pub const MODEL_MAGIC: &[u8; 4] = b"TGAN";
pub const MODEL_VERSION: u32 = 1;

fn descriptor(p: &ToyGanParams) -> Vec<u32> {
    let a = &p.architecture;
    [
        a.latent_dim,
        a.image_size,
        a.base_channels,
        a.mid_channels,
        a.top_channels,
        a.disc_channels[0],
        a.disc_channels[1],
        p.mapping.param_count(),
        p.synthesis.param_count(),
        p.discriminator.param_count(),
    ]
    .iter()
    .map(|&v| v as u32)
    .collect()
}

pub fn write_model_to<W: Write>(p: &ToyGanParams, mut out: W) -> Result<()> {
    out.write_all(MODEL_MAGIC)?;
    out.write_all(&MODEL_VERSION.to_le_bytes())?;
    let desc = descriptor(p);
    out.write_all(&(desc.len() as u32).to_le_bytes())?;
    for v in desc {
        out.write_all(&v.to_le_bytes())?;
    }
    for net in [&p.mapping, &p.synthesis, &p.discriminator] {
        for &w in &net.params {
            out.write_all(&(w as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_model(path: impl AsRef<Path>, p: &ToyGanParams) -> Result<()> {
    write_model_to(p, BufWriter::new(File::create(path)?))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::format("model", format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_model_from<R: Read>(mut input: R) -> Result<ToyGanParams> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::format("model", "file too short"))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::format("model", "bad magic"));
    }
    let version = read_u32(&mut input)?;
    if version != MODEL_VERSION {
        return Err(Error::format("model", format!("unsupported version {version}")));
    }
    let count = read_u32(&mut input)? as usize;
    if count != 10 {
        return Err(Error::format("model", format!("descriptor has {count} entries, expected 10")));
    }
    let d: Vec<usize> = (0..count)
        .map(|_| read_u32(&mut input).map(|v| v as usize))
        .collect::<Result<_>>()?;
    let arch = GanArchitecture {
        latent_dim: d[0],
        image_size: d[1],
        base_channels: d[2],
        mid_channels: d[3],
        top_channels: d[4],
        disc_channels: [d[5], d[6]],
    };
    let mut p = ToyGanParams::zeroed(arch)?;
    let expected = descriptor(&p);
    if expected[7..] != [d[7] as u32, d[8] as u32, d[9] as u32] {
        return Err(Error::format("model", "parameter counts disagree with architecture"));
    }
    for net in [&mut p.mapping, &mut p.synthesis, &mut p.discriminator] {
        let mut buf = vec![0u8; net.params.len() * 4];
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::format("model", "truncated weights"))?;
        for (w, c) in net.params.iter_mut().zip(buf.chunks_exact(4)) {
            *w = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
        }
    }
    if input.read(&mut [0u8; 1])? != 0 {
        return Err(Error::format("model", "trailing bytes"));
    }
    if !p.is_finite() {
        return Err(Error::format("model", "non-finite weight"));
    }
    Ok(p)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ToyGanParams> {
    read_model_from(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ToyGanParams {
        let arch = GanArchitecture {
            latent_dim: 6,
            image_size: 8,
            base_channels: 3,
            mid_channels: 2,
            top_channels: 2,
            disc_channels: [2, 3],
        };
        let mut p = ToyGanParams::new(arch, 3).unwrap();
        for (i, v) in p.synthesis.params.iter_mut().enumerate() {
            *v += 0.001 * i as f64;
        }
        p
    }

    #[test]
    fn round_trip_is_exact_after_single_precision() {
        let p = small();
        let mut bytes = Vec::new();
        write_model_to(&p, &mut bytes).unwrap();
        let q = read_model_from(bytes.as_slice()).unwrap();
        assert_eq!(q.architecture, p.architecture);
        for (a, b) in [(&p.mapping, &q.mapping), (&p.synthesis, &q.synthesis), (&p.discriminator, &q.discriminator)] {
            for (x, y) in a.params.iter().zip(&b.params) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        let mut again = Vec::new();
        write_model_to(&q, &mut again).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn header_layout() {
        let mut bytes = Vec::new();
        write_model_to(&small(), &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"TGAN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 10);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 6);
    }

    #[test]
    fn rejects_corrupt_files() {
        let mut bytes = Vec::new();
        write_model_to(&small(), &mut bytes).unwrap();
        assert!(matches!(read_model_from(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(read_model_from(extra.as_slice()), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_model_from(bad.as_slice()), Err(Error::Format { .. })));
    }
}
