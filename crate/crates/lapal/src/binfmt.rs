//! Little-endian binary encoding shared by every file this crate writes.
//!
//! A network is stored as a segment:
//!
//! ```text
//! magic "LPSG" | version u32 | spec (text, length-prefixed) | sha256(spec) [32]
//! | n u64 | n x f64 values | n x f64 adam m | n x f64 adam v | adam step u64
//! ```
//!
//! Values follow the in-memory layout: per layer, the `in x out` weight
//! block in row-major order, then the biases.

use lapal_core::nn::{Activation, AdamState, Mlp, MlpSpec, ParamTree};
use sha2::{Digest, Sha256};

pub const VERSION: u32 = 1;
const SEGMENT_MAGIC: &[u8; 4] = b"LPSG";

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, x: u32) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }

    pub fn f64s(&mut self, xs: &[f64]) {
        for &x in xs {
            self.f64(x);
        }
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.bytes(s.as_bytes());
    }

    pub fn blob(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.bytes(b);
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

pub type ReadResult<T> = std::result::Result<T, String>;

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn is_done(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn bytes(&mut self, n: usize) -> ReadResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            format!("truncated: wanted {n} bytes at offset {}, file has {}", self.pos, self.buf.len())
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn expect(&mut self, magic: &[u8]) -> ReadResult<()> {
        let got = self.bytes(magic.len())?;
        if got != magic {
            return Err(format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(got), String::from_utf8_lossy(magic)));
        }
        Ok(())
    }

    pub fn u32(&mut self) -> ReadResult<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> ReadResult<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> ReadResult<usize> {
        usize::try_from(self.u64()?).map_err(|_| "length does not fit in memory".to_string())
    }

    pub fn f64(&mut self) -> ReadResult<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> ReadResult<Vec<f64>> {
        let raw = self.bytes(n.checked_mul(8).ok_or("length overflow")?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn str(&mut self) -> ReadResult<String> {
        let n = self.usize()?;
        String::from_utf8(self.bytes(n)?.to_vec()).map_err(|_| "string is not UTF-8".to_string())
    }

    pub fn blob(&mut self) -> ReadResult<&'a [u8]> {
        let n = self.usize()?;
        self.bytes(n)
    }

    pub fn version(&mut self) -> ReadResult<()> {
        let v = self.u32()?;
        if v != VERSION {
            return Err(format!("format version {v} is not supported (expected {VERSION})"));
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Canonical text form of a network spec; its hash identifies the layout.
pub fn spec_text(spec: &MlpSpec) -> String {
    let hidden: Vec<String> = spec.hidden.iter().map(|h| h.to_string()).collect();
    format!(
        "in={};hidden={};out={};act={};out_act={}",
        spec.input_dim,
        hidden.join(","),
        spec.output_dim,
        spec.activation.name(),
        spec.output_activation.name()
    )
}

pub fn parse_spec(text: &str) -> ReadResult<MlpSpec> {
    let mut fields = std::collections::BTreeMap::new();
    for part in text.split(';') {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("malformed spec field {part:?}"))?;
        fields.insert(k, v);
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("spec lacks {k}"));
    let num = |k: &str| -> ReadResult<usize> { get(k)?.parse().map_err(|_| format!("spec field {k} is not a number")) };
    let hidden = get("hidden")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| "bad hidden width".to_string()))
        .collect::<ReadResult<Vec<usize>>>()?;
    let act = |k: &str| -> ReadResult<Activation> {
        let name = get(k)?;
        Activation::from_name(name).ok_or_else(|| format!("unknown activation {name}"))
    };
    MlpSpec::new(num("in")?, &hidden, num("out")?, act("act")?, act("out_act")?).map_err(|e| e.to_string())
}

pub fn write_mlp(w: &mut Writer, net: &Mlp) {
    let text = spec_text(net.spec());
    w.bytes(SEGMENT_MAGIC);
    w.u32(VERSION);
    w.str(&text);
    w.bytes(&Sha256::digest(text.as_bytes()));
    let p = net.params();
    w.u64(p.len() as u64);
    w.f64s(p.values());
    w.f64s(&p.adam().m);
    w.f64s(&p.adam().v);
    w.u64(p.adam().step);
}

pub fn read_mlp(r: &mut Reader) -> ReadResult<Mlp> {
    r.expect(SEGMENT_MAGIC)?;
    r.version()?;
    let text = r.str()?;
    let digest = r.bytes(32)?;
    if digest != Sha256::digest(text.as_bytes()).as_slice() {
        return Err("network spec digest does not match its description".into());
    }
    let spec = parse_spec(&text)?;
    let n = r.usize()?;
    if n != spec.param_count() {
        return Err(format!("segment holds {n} parameters, spec needs {}", spec.param_count()));
    }
    let values = r.f64s(n)?;
    let m = r.f64s(n)?;
    let v = r.f64s(n)?;
    let step = r.u64()?;
    let mut params = ParamTree::zeros(&spec.layer_shapes());
    params.set_values(&values).map_err(|e| e.to_string())?;
    params.set_adam(AdamState { m, v, step }).map_err(|e| e.to_string())?;
    Mlp::from_parts(spec, params).map_err(|e| e.to_string())
}

/// Reads a segment and checks it has the layout the caller expects.
pub fn read_mlp_expecting(r: &mut Reader, expected: &MlpSpec, what: &str) -> ReadResult<Mlp> {
    let net = read_mlp(r)?;
    if net.spec() != expected {
        return Err(format!(
            "{what} network has layout {}, expected {}",
            spec_text(net.spec()),
            spec_text(expected)
        ));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lapal_core::rng::{self, StreamId};

    fn net() -> Mlp {
        let spec = MlpSpec::new(3, &[4, 5], 2, Activation::LeakyRelu, Activation::Tanh).unwrap();
        let mut r = rng::stream(0, StreamId::Test);
        Mlp::new(spec, &mut r).unwrap()
    }

    #[test]
    fn segment_round_trip() {
        let mut n = net();
        n.params_mut().grads_mut().iter_mut().for_each(|g| *g = 0.5);
        n.params_mut().adam_step(&Default::default()).unwrap();
        let mut w = Writer::new();
        write_mlp(&mut w, &n);
        let bytes = w.into_bytes();
        let mut r = Reader::new(&bytes);
        let back = read_mlp(&mut r).unwrap();
        assert!(r.is_done());
        assert_eq!(back.params().values(), n.params().values());
        assert_eq!(back.params().adam(), n.params().adam());
        assert_eq!(back.spec(), n.spec());
    }

    #[test]
    fn layout_is_little_endian_row_major() {
        let n = net();
        let mut w = Writer::new();
        write_mlp(&mut w, &n);
        let bytes = w.into_bytes();
        let text = spec_text(n.spec());
        let start = 4 + 4 + 8 + text.len() + 32 + 8;
        let first = f64::from_le_bytes(bytes[start..start + 8].try_into().unwrap());
        assert_eq!(first, n.params().weights(0)[0]);
        let second = f64::from_le_bytes(bytes[start + 8..start + 16].try_into().unwrap());
        assert_eq!(second, n.params().weights(0)[1]);
    }

    #[test]
    fn corruption_is_detected() {
        let mut w = Writer::new();
        write_mlp(&mut w, &net());
        let bytes = w.into_bytes();
        assert!(read_mlp(&mut Reader::new(&bytes[..bytes.len() - 1])).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_mlp(&mut Reader::new(&bad)).is_err());
        let mut bad = bytes.clone();
        bad[20] ^= 1; // inside the spec text
        assert!(read_mlp(&mut Reader::new(&bad)).is_err());
        let other = MlpSpec::new(3, &[4], 2, Activation::Relu, Activation::Identity).unwrap();
        assert!(read_mlp_expecting(&mut Reader::new(&bytes), &other, "test").is_err());
    }
}
