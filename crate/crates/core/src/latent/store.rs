//! Little-endian binary latent store (`LTNT`).

use std::io::{Read, Write};

use super::{check_grade, KneeRecord, LatentDictionary, LatentVector, Side};
use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 4] = b"LTNT";
pub const STORE_VERSION: u32 = 1;

pub fn write_store<W: Write>(dict: &LatentDictionary, mut out: W) -> Result<()> {
    let dim = u32::try_from(dict.dimension())
        .map_err(|_| Error::format("latent store", "dimension exceeds u32"))?;
    out.write_all(STORE_MAGIC)?;
    out.write_all(&STORE_VERSION.to_le_bytes())?;
    out.write_all(&dim.to_le_bytes())?;
    out.write_all(&(dict.len() as u64).to_le_bytes())?;
    for r in dict.records() {
        let id = r.subject_id.as_bytes();
        let id_len = u16::try_from(id.len())
            .map_err(|_| Error::format("latent store", "subject id longer than 65535 bytes"))?;
        let month = u16::try_from(r.visit_month).map_err(|_| {
            Error::format("latent store", format!("visit month {} exceeds u16", r.visit_month))
        })?;
        out.write_all(&id_len.to_le_bytes())?;
        out.write_all(id)?;
        out.write_all(&[match r.side {
            Side::Left => 0,
            Side::Right => 1,
        }])?;
        out.write_all(&month.to_le_bytes())?;
        out.write_all(&r.kls.map_or(-1i8, |k| k as i8).to_le_bytes())?;
        for &v in r.latent.as_slice() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format("latent store", "truncated file")
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf)
}

pub fn read_store<R: Read>(mut input: R) -> Result<LatentDictionary> {
    let magic: [u8; 4] = read_array(&mut input)?;
    if &magic != STORE_MAGIC {
        return Err(Error::format("latent store", "bad magic"));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != STORE_VERSION {
        return Err(Error::format("latent store", format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let count = u64::from_le_bytes(read_array(&mut input)?);
    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let id_len = u16::from_le_bytes(read_array(&mut input)?) as usize;
        let mut id = vec![0u8; id_len];
        input
            .read_exact(&mut id)
            .map_err(|_| Error::format("latent store", "truncated subject id"))?;
        let subject_id = String::from_utf8(id)
            .map_err(|_| Error::format("latent store", "subject id is not UTF-8"))?;
        let side = match read_array::<1, _>(&mut input)?[0] {
            0 => Side::Left,
            1 => Side::Right,
            s => return Err(Error::format("latent store", format!("bad side byte {s}"))),
        };
        let visit_month = u16::from_le_bytes(read_array(&mut input)?) as u32;
        let kls = match i8::from_le_bytes(read_array(&mut input)?) {
            -1 => None,
            k => Some(check_grade(k as i64)?),
        };
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(f32::from_le_bytes(read_array(&mut input)?) as f64);
        }
        records.push(KneeRecord {
            subject_id,
            side,
            visit_month,
            kls,
            latent: LatentVector::new(values)?,
        });
    }
    let dict = LatentDictionary::from_records(records)?;
    if dict.dimension() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: dict.dimension(),
        });
    }
    Ok(dict)
}
