use std::path::Path;

use super::{Adam, Mlp, NnError};

const MAGIC: &[u8; 8] = b"EMPWCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A network together with its optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedModel {
    pub name: String,
    pub net: Mlp,
    pub optimizer: Adam,
}

/// Versioned little-endian container of named models.
///
/// Layout: magic, version, tag, model count, then per model its name, layer
/// sizes, parameters and Adam state. Floats are stored as raw bits so a
/// round trip is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Free-form label, e.g. algorithm and config hash.
    pub tag: String,
    pub models: Vec<NamedModel>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn floats(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn bad(msg: &str) -> NnError {
    NnError::Checkpoint(msg.to_string())
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| bad("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize, NnError> {
        let n = self.u64()? as usize;
        if n > self.buf.len() {
            return Err(bad("length exceeds file size"));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn str(&mut self) -> Result<String, NnError> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("invalid utf-8"))
    }
    fn floats(&mut self) -> Result<Vec<f64>, NnError> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn new(tag: impl Into<String>) -> Self {
        Checkpoint {
            tag: tag.into(),
            models: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, net: &Mlp, optimizer: &Adam) -> Self {
        self.models.push(NamedModel {
            name: name.to_string(),
            net: net.clone(),
            optimizer: optimizer.clone(),
        });
        self
    }

    pub fn model(&self, name: &str) -> Option<&NamedModel> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(MAGIC.to_vec());
        w.u32(CHECKPOINT_VERSION);
        w.str(&self.tag);
        w.u64(self.models.len() as u64);
        for m in &self.models {
            w.str(&m.name);
            w.u64(m.net.sizes().len() as u64);
            m.net.sizes().iter().for_each(|s| w.u64(*s as u64));
            w.floats(m.net.params());
            w.f64(m.optimizer.beta1);
            w.f64(m.optimizer.beta2);
            w.f64(m.optimizer.eps);
            w.u64(m.optimizer.steps());
            w.floats(m.optimizer.first_moment());
            w.floats(m.optimizer.second_moment());
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, NnError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let tag = r.str()?;
        let n = r.len()?;
        let mut models = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.str()?;
            let n_sizes = r.len()?;
            let sizes = (0..n_sizes)
                .map(|_| r.u64().map(|s| s as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let net = Mlp::from_params(&sizes, r.floats()?)?;
            let (beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?);
            let t = r.u64()?;
            let (m, v) = (r.floats()?, r.floats()?);
            if m.len() != net.n_params() || v.len() != net.n_params() {
                return Err(bad("optimizer state does not match parameters"));
            }
            models.push(NamedModel {
                name,
                net,
                optimizer: Adam::from_parts(beta1, beta2, eps, m, v, t),
            });
        }
        if r.pos != buf.len() {
            return Err(bad("trailing bytes"));
        }
        Ok(Checkpoint { tag, models })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let buf = std::fs::read(path).map_err(|e| NnError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn round_trip_and_corruption() {
        let mut rng = stream(5, &[]);
        let net = Mlp::init(&[4, 8, 3], &mut rng).unwrap();
        let mut adam = Adam::new(net.n_params());
        let mut p = net.params().to_vec();
        let g = vec![0.1; p.len()];
        adam.step(&mut p, &g, 1e-3).unwrap();
        let ck = Checkpoint::new("ppo/abc").with("actor", &net, &adam);
        let bytes = ck.to_bytes();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut wrong = bytes.clone();
        wrong[8] = 9;
        assert!(Checkpoint::from_bytes(&wrong).is_err());
        assert!(Checkpoint::from_bytes(b"hello").is_err());
    }
}
