//! Binary stores for posterior draws and retained rotations.
//!
//! Both files are little-endian. The posterior checkpoint is
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"PVARDRAW"
//! 8       4     version (u32, currently 1)
//! 12      4     N  variables (u32)
//! 16      4     L  lags (u32)
//! 20      4     M  deterministic terms (u32)
//! 24      4     C  countries (u32)
//! 28      4     pooling (u32; 0 partial, 1 full)
//! 32      8     D  draw count (u64)
//! 40      ...   D records of R f64 values
//! ```
//!
//! with `R = 3 + N²L + C·(N²L + M·N + N²)`. A record holds `chain`, `index`
//! and `λ1` (NaN in the fully pooled model), the common mean `b`, then for
//! each country `B_c`, `Γ_c` and `Σ_c`, every matrix in column-major order.
//!
//! The rotation store has magic `b"PVARROTN"`, version, `K` (u32) and a
//! record count (u64), followed by records of `2 + K²` f64 values: country,
//! posterior draw position, and `Q` in column-major order.

use std::io::{Read, Seek, SeekFrom, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{CountryParams, Pooling, PosteriorDraw};

const DRAW_MAGIC: &[u8; 8] = b"PVARDRAW";
const ROTATION_MAGIC: &[u8; 8] = b"PVARROTN";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub n_vars: usize,
    pub lags: usize,
    pub n_det: usize,
    pub n_countries: usize,
    pub pooling: Pooling,
    pub n_draws: usize,
}

impl CheckpointHeader {
    pub fn record_len(&self) -> usize {
        let (n, l, m, c) = (self.n_vars, self.lags, self.n_det, self.n_countries);
        3 + n * n * l + c * (n * n * l + m * n + n * n)
    }
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_u64(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b) as usize)
}

fn put_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn check_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

/// Streams posterior draws to `w`. The header fixes the draw count up front;
/// [`DrawWriter::finish`] checks it was met.
pub struct DrawWriter<W: Write> {
    w: W,
    header: CheckpointHeader,
    written: usize,
}

impl<W: Write> DrawWriter<W> {
    pub fn new(mut w: W, header: CheckpointHeader) -> Result<Self> {
        w.write_all(DRAW_MAGIC)?;
        put_u32(&mut w, VERSION as usize)?;
        for v in [header.n_vars, header.lags, header.n_det, header.n_countries] {
            put_u32(&mut w, v)?;
        }
        put_u32(&mut w, matches!(header.pooling, Pooling::Full) as usize)?;
        w.write_all(&(header.n_draws as u64).to_le_bytes())?;
        Ok(DrawWriter { w, header, written: 0 })
    }

    pub fn push(&mut self, d: &PosteriorDraw) -> Result<()> {
        let h = &self.header;
        let (n, l, m) = (h.n_vars, h.lags, h.n_det);
        if self.written == h.n_draws {
            return Err(Error::Format(format!("header announces {} draws, got more", h.n_draws)));
        }
        if d.countries.len() != h.n_countries || d.common_mean.len() != n * n * l {
            return Err(Error::Format("draw does not match header dimensions".into()));
        }
        let w = &mut self.w;
        put_f64s(w, &[d.chain as f64, d.index as f64, d.lambda1.unwrap_or(f64::NAN)])?;
        put_f64s(w, d.common_mean.as_slice())?;
        for p in &d.countries {
            if p.b.shape() != (n * l, n) || p.gamma.shape() != (m, n) || p.sigma.shape() != (n, n) {
                return Err(Error::Format("country block does not match header dimensions".into()));
            }
            put_f64s(w, p.b.as_slice())?;
            put_f64s(w, p.gamma.as_slice())?;
            put_f64s(w, p.sigma.as_slice())?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.n_draws {
            return Err(Error::Format(format!(
                "header announces {} draws, got {}",
                self.header.n_draws, self.written
            )));
        }
        self.w.flush()?;
        Ok(self.w)
    }
}

pub fn write_draws(w: &mut impl Write, header: &CheckpointHeader, draws: &[PosteriorDraw]) -> Result<()> {
    let mut writer = DrawWriter::new(w, *header)?;
    for d in draws {
        writer.push(d)?;
    }
    writer.finish()?;
    Ok(())
}

/// Iterates over the draws of a checkpoint without loading them all.
pub struct DrawReader<R: Read> {
    r: R,
    header: CheckpointHeader,
    read: usize,
}

impl<R: Read> DrawReader<R> {
    pub fn new(mut r: R) -> Result<Self> {
        check_magic(&mut r, DRAW_MAGIC)?;
        let n = get_u32(&mut r)?;
        let l = get_u32(&mut r)?;
        let m = get_u32(&mut r)?;
        let c = get_u32(&mut r)?;
        let pooling = match get_u32(&mut r)? {
            0 => Pooling::Partial,
            1 => Pooling::Full,
            other => return Err(Error::Format(format!("bad pooling flag {other}"))),
        };
        let count = get_u64(&mut r)?;
        let header = CheckpointHeader {
            n_vars: n,
            lags: l,
            n_det: m,
            n_countries: c,
            pooling,
            n_draws: count,
        };
        Ok(DrawReader { r, header, read: 0 })
    }

    pub fn header(&self) -> &CheckpointHeader {
        &self.header
    }

    fn next_draw(&mut self) -> Result<PosteriorDraw> {
        let h = self.header;
        let (n, l, m) = (h.n_vars, h.lags, h.n_det);
        let q = n * n * l;
        let rec = get_f64s(&mut self.r, h.record_len())?;
        let mut at = 3;
        let mut take = |len: usize| {
            let s = &rec[at..at + len];
            at += len;
            s.to_vec()
        };
        let common_mean = DVector::from_vec(take(q));
        let countries = (0..h.n_countries)
            .map(|_| CountryParams {
                b: DMatrix::from_vec(n * l, n, take(q)),
                gamma: DMatrix::from_vec(m, n, take(m * n)),
                sigma: DMatrix::from_vec(n, n, take(n * n)),
            })
            .collect();
        Ok(PosteriorDraw {
            chain: rec[0] as usize,
            index: rec[1] as usize,
            countries,
            common_mean,
            lambda1: (!rec[2].is_nan()).then_some(rec[2]),
        })
    }

    /// Fails if anything follows the announced records.
    pub fn finish(mut self) -> Result<()> {
        if self.read != self.header.n_draws {
            return Err(Error::Format(format!(
                "stopped after {} of {} draws",
                self.read, self.header.n_draws
            )));
        }
        let mut rest = [0u8; 1];
        if self.r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after last record".into()));
        }
        Ok(())
    }
}

impl<R: Read> Iterator for DrawReader<R> {
    type Item = Result<PosteriorDraw>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.read == self.header.n_draws {
            return None;
        }
        self.read += 1;
        Some(self.next_draw())
    }
}

pub fn read_draws(r: &mut impl Read) -> Result<(CheckpointHeader, Vec<PosteriorDraw>)> {
    let mut reader = DrawReader::new(r)?;
    let header = *reader.header();
    let draws = reader.by_ref().collect::<Result<Vec<_>>>()?;
    reader.finish()?;
    Ok((header, draws))
}

/// One retained rotation: country, posterior draw position and `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationRecord {
    pub country: usize,
    pub draw: usize,
    pub q: DMatrix<f64>,
}

const ROTATION_COUNT_OFFSET: u64 = 16;

/// Streams rotation records; the record count is patched in on
/// [`RotationWriter::finish`].
pub struct RotationWriter<W: Write + Seek> {
    w: W,
    k: usize,
    written: usize,
}

impl<W: Write + Seek> RotationWriter<W> {
    pub fn new(mut w: W, k: usize) -> Result<Self> {
        w.write_all(ROTATION_MAGIC)?;
        put_u32(&mut w, VERSION as usize)?;
        put_u32(&mut w, k)?;
        w.write_all(&0u64.to_le_bytes())?;
        Ok(RotationWriter { w, k, written: 0 })
    }

    pub fn push(&mut self, rec: &RotationRecord) -> Result<()> {
        if rec.q.shape() != (self.k, self.k) {
            return Err(Error::Format("rotation has wrong dimension".into()));
        }
        put_f64s(&mut self.w, &[rec.country as f64, rec.draw as f64])?;
        put_f64s(&mut self.w, rec.q.as_slice())?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.w.seek(SeekFrom::Start(ROTATION_COUNT_OFFSET))?;
        self.w.write_all(&(self.written as u64).to_le_bytes())?;
        self.w.seek(SeekFrom::End(0))?;
        self.w.flush()?;
        Ok(self.w)
    }
}

pub fn write_rotations(w: &mut impl Write, k: usize, records: &[RotationRecord]) -> Result<()> {
    w.write_all(ROTATION_MAGIC)?;
    put_u32(w, VERSION as usize)?;
    put_u32(w, k)?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for rec in records {
        if rec.q.shape() != (k, k) {
            return Err(Error::Format("rotation has wrong dimension".into()));
        }
        put_f64s(w, &[rec.country as f64, rec.draw as f64])?;
        put_f64s(w, rec.q.as_slice())?;
    }
    Ok(())
}

/// Iterates over a rotation store.
pub struct RotationReader<R: Read> {
    r: R,
    k: usize,
    count: usize,
    read: usize,
}

impl<R: Read> RotationReader<R> {
    pub fn new(mut r: R) -> Result<Self> {
        check_magic(&mut r, ROTATION_MAGIC)?;
        let k = get_u32(&mut r)?;
        let count = get_u64(&mut r)?;
        Ok(RotationReader { r, k, count, read: 0 })
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

impl<R: Read> Iterator for RotationReader<R> {
    type Item = Result<RotationRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.read == self.count {
            return None;
        }
        self.read += 1;
        let k = self.k;
        Some(get_f64s(&mut self.r, 2 + k * k).map(|rec| RotationRecord {
            country: rec[0] as usize,
            draw: rec[1] as usize,
            q: DMatrix::from_column_slice(k, k, &rec[2..]),
        }))
    }
}

pub fn read_rotations(r: &mut impl Read) -> Result<(usize, Vec<RotationRecord>)> {
    let reader = RotationReader::new(r)?;
    let k = reader.dim();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok((k, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn draw(n: usize, l: usize, m: usize, c: usize, seed: f64, pooled: bool) -> PosteriorDraw {
        let f = |r: usize, k: usize, off: f64| DMatrix::from_fn(r, k, |i, j| seed * (i as f64 + 1.3) - off * j as f64);
        PosteriorDraw {
            chain: 1,
            index: 7,
            countries: (0..c)
                .map(|ci| CountryParams {
                    b: f(n * l, n, ci as f64),
                    gamma: f(m, n, 0.5),
                    sigma: f(n, n, 0.25),
                })
                .collect(),
            common_mean: DVector::from_fn(n * n * l, |i, _| i as f64 * seed),
            lambda1: (!pooled).then_some(seed.abs() + 0.1),
        }
    }

    proptest! {
        #[test]
        fn draws_round_trip(n in 1usize..4, l in 1usize..3, m in 0usize..3, c in 1usize..3, seed in -5.0f64..5.0, pooled: bool) {
            let draws = vec![draw(n, l, m, c, seed, pooled), draw(n, l, m, c, seed * 0.5, pooled)];
            let header = CheckpointHeader {
                n_vars: n, lags: l, n_det: m, n_countries: c,
                pooling: if pooled { Pooling::Full } else { Pooling::Partial },
                n_draws: 2,
            };
            let mut buf = Vec::new();
            write_draws(&mut buf, &header, &draws).unwrap();
            prop_assert_eq!(buf.len(), 40 + 2 * 8 * header.record_len());
            let (h2, back) = read_draws(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(h2, header);
            prop_assert_eq!(back, draws);
        }
    }

    #[test]
    fn truncated_or_foreign_files_are_rejected() {
        let header = CheckpointHeader {
            n_vars: 2,
            lags: 1,
            n_det: 1,
            n_countries: 1,
            pooling: Pooling::Partial,
            n_draws: 1,
        };
        let mut buf = Vec::new();
        write_draws(&mut buf, &header, &[draw(2, 1, 1, 1, 1.0, false)]).unwrap();
        assert!(read_draws(&mut &buf[..buf.len() - 3]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_draws(&mut extra.as_slice()).is_err());
        buf[0] = b'X';
        assert!(matches!(read_draws(&mut buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn rotations_round_trip() {
        let recs = vec![RotationRecord {
            country: 1,
            draw: 42,
            q: DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64),
        }];
        let mut buf = Vec::new();
        write_rotations(&mut buf, 3, &recs).unwrap();
        let (k, back) = read_rotations(&mut buf.as_slice()).unwrap();
        assert_eq!(k, 3);
        assert_eq!(back, recs);

        let mut streamed = RotationWriter::new(std::io::Cursor::new(Vec::new()), 3).unwrap();
        streamed.push(&recs[0]).unwrap();
        assert_eq!(streamed.finish().unwrap().into_inner(), buf);
    }
}
