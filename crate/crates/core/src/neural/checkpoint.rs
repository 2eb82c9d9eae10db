//! Versioned binary model container. All integers and doubles are
//! little-endian; strings are a `u32` byte length followed by UTF-8.

use std::io::{Read, Write};

use super::model::{Model, ModelConfig};
use super::tensor::Tensor;
use crate::text::{TokenizerConfig, Vocabulary};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"HMCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub vocab: Vocabulary,
    pub tokenizer: TokenizerConfig,
    /// ids the model saw in training, kept for leakage checks
    pub train_ids: Vec<String>,
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

fn take_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(take(r)?))
}

fn take_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(take(r)?))
}

fn take_str<R: Read>(r: &mut R) -> Result<String> {
    let len = take_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated checkpoint: {e}")))?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let config = serde_json::to_string(self.model.config()).map_err(|e| Error::Format(e.to_string()))?;
        put_str(&mut w, &config)?;
        w.write_all(&self.vocab.hash())?;
        let words = self.vocab.words();
        w.write_all(&(words.len() as u64).to_le_bytes())?;
        for t in words {
            put_str(&mut w, t)?;
        }
        w.write_all(&[u8::from(self.tokenizer.lowercase)])?;
        w.write_all(&(self.train_ids.len() as u64).to_le_bytes())?;
        for id in &self.train_ids {
            put_str(&mut w, id)?;
        }
        let params = self.model.params();
        w.write_all(&(params.len() as u32).to_le_bytes())?;
        for (name, t) in params {
            put_str(&mut w, &name)?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for d in t.shape() {
                w.write_all(&(*d as u64).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        if &take::<4, _>(&mut r)? != MAGIC {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        let version = take_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let config: ModelConfig =
            serde_json::from_str(&take_str(&mut r)?).map_err(|e| Error::Format(e.to_string()))?;
        let hash: [u8; 32] = take(&mut r)?;
        let n_words = take_u64(&mut r)? as usize;
        let mut words = Vec::with_capacity(n_words.min(1 << 20));
        for _ in 0..n_words {
            words.push(take_str(&mut r)?);
        }
        let vocab = Vocabulary::from_tokens(words);
        if vocab.hash() != hash {
            return Err(Error::Format("vocabulary hash mismatch".into()));
        }
        let tokenizer = TokenizerConfig {
            lowercase: take::<1, _>(&mut r)?[0] != 0,
        };
        let n_ids = take_u64(&mut r)? as usize;
        let mut train_ids = Vec::with_capacity(n_ids.min(1 << 20));
        for _ in 0..n_ids {
            train_ids.push(take_str(&mut r)?);
        }
        let n_params = take_u32(&mut r)? as usize;
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let name = take_str(&mut r)?;
            let ndim = take_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(take_u64(&mut r)? as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                data.push(f64::from_le_bytes(take(&mut r)?));
            }
            params.push((name, Tensor::from_vec(&shape, data)?));
        }
        if config.vocab_size != vocab.len() {
            return Err(Error::Format(format!(
                "model expects {} vocabulary entries, checkpoint holds {}",
                config.vocab_size,
                vocab.len()
            )));
        }
        let model = Model::from_params(config, params)?;
        Ok(Checkpoint {
            model,
            vocab,
            tokenizer,
            train_ids,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::model::Architecture;
    use crate::text::EmbeddingTable;

    #[test]
    fn round_trip_and_corruption() {
        let vocab = Vocabulary::from_tokens(["you", "are", "wrong"]);
        let table = EmbeddingTable::random(vocab.len(), 4, 1);
        let mut cfg = ModelConfig::new(Architecture::Cnn, vec!["x".into(), "y".into()]);
        cfg.feature_maps = 3;
        let model = Model::new(cfg, &table, 5).unwrap();
        let ck = Checkpoint {
            model,
            vocab,
            tokenizer: TokenizerConfig { lowercase: true },
            train_ids: vec!["a".into(), "b".into()],
        };
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        assert_eq!(Checkpoint::read_from(&buf[..]).unwrap(), ck);
        assert!(Checkpoint::read_from(&buf[..buf.len() - 3]).is_err());
        // flip a byte inside the first vocabulary word
        let pos = buf.windows(3).position(|w| w == b"you").unwrap();
        buf[pos] = b'Y';
        assert!(matches!(Checkpoint::read_from(&buf[..]), Err(Error::Format(_))));
    }
}
