//! Little-endian binary encoding helpers and the sectioned container used for
//! model files.
//!
//! Container layout:
//!
//! ```text
//! magic[4] u32 version  str tag  u32 section_count
//! { str name  u32 byte_len  bytes[byte_len] } * section_count
//! ```
//!
//! Strings are `u32` byte length followed by UTF-8 bytes.

use crate::{Float, NeuralError, Param, Result, Tensor2};

#[derive(Default, Debug, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_usize(&mut self, v: usize) {
        self.put_u64(v as u64);
    }

    pub fn put_str(&mut self, s: &str) {
        self.put_u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub fn put_strs(&mut self, items: &[String]) {
        self.put_u32(items.len() as u32);
        for s in items {
            self.put_str(s);
        }
    }

    /// Stores `rows`, `cols` and the values narrowed to `f32`.
    pub fn put_tensor<F: Float>(&mut self, t: &Tensor2<F>) {
        self.put_u32(t.rows() as u32);
        self.put_u32(t.cols() as u32);
        for v in t.data() {
            self.put_f32(v.as_f64() as f32);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn truncated(what: &str) -> NeuralError {
    NeuralError::Corrupt(format!("unexpected end of data while reading {what}"))
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| truncated(what))?;
        if end > self.buf.len() {
            return Err(truncated(what));
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().unwrap())
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array(what)?))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array(what)?))
    }

    pub fn i64(&mut self, what: &str) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array(what)?))
    }

    pub fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array(what)?))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array(what)?))
    }

    pub fn usize(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| NeuralError::Corrupt(format!("{what} overflows")))
    }

    pub fn str(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let bytes = self.take(n, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| NeuralError::Corrupt(format!("{what} is not valid UTF-8")))
    }

    pub fn strs(&mut self, what: &str) -> Result<Vec<String>> {
        let n = self.u32(what)? as usize;
        (0..n).map(|_| self.str(what)).collect()
    }

    pub fn tensor<F: Float>(&mut self, what: &str) -> Result<Tensor2<F>> {
        let rows = self.u32(what)? as usize;
        let cols = self.u32(what)? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| NeuralError::Corrupt(format!("{what} shape overflows")))?;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| truncated(what))?, what)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| F::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        Ok(Tensor2::from_vec(rows, cols, data))
    }

    pub fn finish(&self, what: &str) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(NeuralError::Corrupt(format!(
                "{} trailing bytes after {what}",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Tagged collection of named binary sections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub tag: String,
    pub sections: Vec<(String, Vec<u8>)>,
}

impl Container {
    pub fn new(tag: impl Into<String>) -> Self {
        Self {
            tag: tag.into(),
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, payload: Vec<u8>) {
        self.sections.push((name.into(), payload));
    }

    pub fn section(&self, name: &str) -> Result<&[u8]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
            .ok_or_else(|| NeuralError::Corrupt(format!("missing section `{name}`")))
    }

    pub fn encode(&self, magic: &[u8; 4], version: u32) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.put_bytes(magic);
        enc.put_u32(version);
        enc.put_str(&self.tag);
        enc.put_u32(self.sections.len() as u32);
        for (name, payload) in &self.sections {
            enc.put_str(name);
            enc.put_u32(payload.len() as u32);
            enc.put_bytes(payload);
        }
        enc.into_bytes()
    }

    pub fn decode(bytes: &[u8], magic: &[u8; 4], version: u32) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        if dec.take(4, "magic")? != magic {
            return Err(NeuralError::Corrupt("bad magic".into()));
        }
        let found = dec.u32("version")?;
        if found != version {
            return Err(NeuralError::VersionMismatch {
                expected: version,
                found,
            });
        }
        let tag = dec.str("tag")?;
        let n = dec.u32("section count")?;
        let mut sections = Vec::with_capacity(n.min(64) as usize);
        for _ in 0..n {
            let name = dec.str("section name")?;
            let len = dec.u32("section length")? as usize;
            let payload = dec.take(len, &name)?.to_vec();
            sections.push((name, payload));
        }
        dec.finish("container")?;
        Ok(Self { tag, sections })
    }
}

/// Encodes a list of named parameters (values only).
pub fn encode_params<F: Float>(params: &[(String, &Param<F>)]) -> Vec<u8> {
    let mut enc = Encoder::new();
    enc.put_u32(params.len() as u32);
    for (name, p) in params {
        enc.put_str(name);
        enc.put_tensor(&p.value);
    }
    enc.into_bytes()
}

/// Loads parameter values into `params`, which must match by name and shape.
pub fn decode_params_into<F: Float>(bytes: &[u8], params: &mut [(String, &mut Param<F>)]) -> Result<()> {
    let mut dec = Decoder::new(bytes);
    let n = dec.u32("parameter count")? as usize;
    if n != params.len() {
        return Err(NeuralError::Corrupt(format!(
            "expected {} parameter blocks, found {n}",
            params.len()
        )));
    }
    for (name, p) in params.iter_mut() {
        let stored = dec.str("parameter name")?;
        if &stored != name {
            return Err(NeuralError::Corrupt(format!(
                "parameter `{stored}` found where `{name}` was expected"
            )));
        }
        let t: Tensor2<F> = dec.tensor(name)?;
        if (t.rows(), t.cols()) != (p.value.rows(), p.value.cols()) {
            return Err(NeuralError::Corrupt(format!("parameter `{name}` has the wrong shape")));
        }
        **p = Param::new(t);
    }
    dec.finish("parameters")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn container_round_trip() {
        let mut c = Container::new("demo");
        c.push("a", vec![1, 2, 3]);
        c.push("b", vec![]);
        let bytes = c.encode(b"TEST", 3);
        assert_eq!(Container::decode(&bytes, b"TEST", 3).unwrap(), c);
    }

    #[test]
    fn truncation_is_corrupt() {
        let mut c = Container::new("demo");
        c.push("a", vec![9; 20]);
        let bytes = c.encode(b"TEST", 1);
        for cut in [0, 3, 7, 12, bytes.len() - 1] {
            assert!(matches!(
                Container::decode(&bytes[..cut], b"TEST", 1),
                Err(NeuralError::Corrupt(_))
            ));
        }
    }

    #[test]
    fn other_version_is_reported() {
        let bytes = Container::new("x").encode(b"TEST", 99);
        assert!(matches!(
            Container::decode(&bytes, b"TEST", 1),
            Err(NeuralError::VersionMismatch { expected: 1, found: 99 })
        ));
    }
}
