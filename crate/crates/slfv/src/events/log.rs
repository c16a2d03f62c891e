//! Binary event log.
//!
//! Header: magic `SLFVLOG\0`, version `u32`, `d: u32`, 32-byte config hash.
//! Each record: `t: f64`, `x: d × f64`, `r: f64`, `kind: u8`, `count: u32`,
//! then `count` uniforms as `f64`. All little-endian.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

use super::apply::ReproductionEvent;
use super::law::{EventKind, MAX_UNIFORMS};

pub const LOG_MAGIC: &[u8; 8] = b"SLFVLOG\0";
pub const LOG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogHeader {
    pub d: usize,
    pub config_hash: [u8; 32],
}

pub struct EventLogWriter<W: Write> {
    out: W,
    d: usize,
    records: u64,
}

fn werr(e: std::io::Error) -> Error {
    Error::io("<event log>", e)
}

impl<W: Write> EventLogWriter<W> {
    pub fn new(mut out: W, header: LogHeader) -> Result<Self> {
        out.write_all(LOG_MAGIC).map_err(werr)?;
        out.write_all(&LOG_VERSION.to_le_bytes()).map_err(werr)?;
        out.write_all(&(header.d as u32).to_le_bytes()).map_err(werr)?;
        out.write_all(&header.config_hash).map_err(werr)?;
        Ok(EventLogWriter { out, d: header.d, records: 0 })
    }

    pub fn write(&mut self, ev: &ReproductionEvent) -> Result<()> {
        let mut buf = [0u8; 8 * (5 + MAX_UNIFORMS) + 5];
        let mut n = 0;
        let mut put = |b: &[u8]| {
            buf[n..n + b.len()].copy_from_slice(b);
            n += b.len();
        };
        put(&ev.t.to_le_bytes());
        for x in &ev.x[..self.d] {
            put(&x.to_le_bytes());
        }
        put(&ev.r.to_le_bytes());
        put(&[ev.kind.code()]);
        put(&(ev.n_uniforms as u32).to_le_bytes());
        for u in ev.uniforms() {
            put(&u.to_le_bytes());
        }
        self.out.write_all(&buf[..n]).map_err(werr)?;
        self.records += 1;
        Ok(())
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(werr)?;
        Ok(self.out)
    }
}

/// Streaming reader; yields records until clean end of input.
pub struct EventLogReader<R: Read> {
    inp: R,
    header: LogHeader,
    read: u64,
    failed: bool,
}

impl<R: BufRead> EventLogReader<R> {
    pub fn new(mut inp: R) -> Result<Self> {
        let mut head = [0u8; 8 + 4 + 4 + 32];
        inp.read_exact(&mut head).map_err(|_| Error::TruncatedLog { last_valid: None })?;
        if &head[0..8] != LOG_MAGIC {
            return Err(Error::Format { path: "<event log>".into(), reason: "missing SLFVLOG magic".into() });
        }
        let version = u32::from_le_bytes(head[8..12].try_into().unwrap());
        if version != LOG_VERSION {
            return Err(Error::Format {
                path: "<event log>".into(),
                reason: format!("unsupported log version {version}"),
            });
        }
        let d = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        let mut config_hash = [0u8; 32];
        config_hash.copy_from_slice(&head[16..48]);
        Ok(EventLogReader { inp, header: LogHeader { d, config_hash }, read: 0, failed: false })
    }

    pub fn header(&self) -> LogHeader {
        self.header
    }

    fn truncated(&mut self) -> Error {
        self.failed = true;
        Error::TruncatedLog { last_valid: self.read.checked_sub(1) }
    }

    fn next_record(&mut self) -> Option<Result<ReproductionEvent>> {
        if self.failed {
            return None;
        }
        match self.inp.fill_buf() {
            Ok(b) if b.is_empty() => return None,
            Ok(_) => {}
            Err(e) => return Some(Err(werr(e))),
        }
        let d = self.header.d;
        let mut fixed = vec![0u8; 8 * (d + 2) + 5];
        if self.inp.read_exact(&mut fixed).is_err() {
            return Some(Err(self.truncated()));
        }
        let f = |i: usize| f64::from_le_bytes(fixed[8 * i..8 * i + 8].try_into().unwrap());
        let t = f(0);
        let mut x = [0.0; 3];
        for (k, xk) in x.iter_mut().enumerate().take(d) {
            *xk = f(1 + k);
        }
        let r = f(1 + d);
        let code = fixed[8 * (d + 2)];
        let count = u32::from_le_bytes(fixed[8 * (d + 2) + 1..].try_into().unwrap()) as usize;
        let Some(kind) = EventKind::from_code(code) else {
            return Some(Err(self.truncated()));
        };
        if count > MAX_UNIFORMS {
            return Some(Err(self.truncated()));
        }
        let mut ubytes = vec![0u8; 8 * count];
        if self.inp.read_exact(&mut ubytes).is_err() {
            return Some(Err(self.truncated()));
        }
        let mut uniforms = [0.0; MAX_UNIFORMS];
        for (k, u) in uniforms.iter_mut().enumerate().take(count) {
            *u = f64::from_le_bytes(ubytes[8 * k..8 * k + 8].try_into().unwrap());
        }
        self.read += 1;
        Some(Ok(ReproductionEvent { t, x, r, kind, uniforms, n_uniforms: count as u8 }))
    }
}

impl<R: BufRead> Iterator for EventLogReader<R> {
    type Item = Result<ReproductionEvent>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_record()
    }
}
