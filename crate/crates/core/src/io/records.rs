//! Dataset files and their sidecar manifests.
//!
//! Text datasets hold one JSON object per line, one line per sequence:
//!
//! ```text
//! {"index":0,"tokens":[{"t":"sym","id":3,"z":7},{"t":"noise","v":[0.1,...],"z":7},{"t":"end","id":40,"z":80}]}
//! ```
//!
//! Token tags: `sym` (grammatical symbol), `gap` (non-grammatical symbol),
//! `noise` (dense noise vector), `end` (terminal). `z` is the target latent.
//!
//! The binary format stores the same records little-endian after a `SBDS`
//! magic. Grammar id, seed and vocabulary size live in the manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tasks::{DataSplit, Dataset, Payload, TaskConfig, Token, TokenStream};

pub const DATASET_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SBDS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Text,
    Binary,
}

impl DataFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DataFormat::Text => "jsonl",
            DataFormat::Binary => "bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t")]
enum TokenRecord {
    #[serde(rename = "sym")]
    Symbol { id: usize, z: usize },
    #[serde(rename = "gap")]
    Gap { id: usize, z: usize },
    #[serde(rename = "noise")]
    Noise { v: Vec<f32>, z: usize },
    #[serde(rename = "end")]
    End { id: usize, z: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SequenceRecord {
    index: u64,
    tokens: Vec<TokenRecord>,
}

impl From<&Token> for TokenRecord {
    fn from(t: &Token) -> Self {
        let z = t.target;
        match &t.payload {
            Payload::Symbol(id) => TokenRecord::Symbol { id: *id, z },
            Payload::NonGrammaticalGap(id) => TokenRecord::Gap { id: *id, z },
            Payload::NoiseGap(v) => TokenRecord::Noise { v: v.clone(), z },
            Payload::Terminal(id) => TokenRecord::End { id: *id, z },
        }
    }
}

impl TokenRecord {
    fn into_token(self, vocab_size: usize) -> Result<Token> {
        let id_ok = |id: usize| {
            if id < vocab_size {
                Ok(id)
            } else {
                Err(Error::IdOutOfRange { id, vocab: vocab_size })
            }
        };
        let (payload, target) = match self {
            TokenRecord::Symbol { id, z } => (Payload::Symbol(id_ok(id)?), z),
            TokenRecord::Gap { id, z } => (Payload::NonGrammaticalGap(id_ok(id)?), z),
            TokenRecord::End { id, z } => (Payload::Terminal(id_ok(id)?), z),
            TokenRecord::Noise { v, z } => {
                if v.len() != vocab_size {
                    return Err(Error::LengthMismatch {
                        expected: vocab_size,
                        got: v.len(),
                    });
                }
                (Payload::NoiseGap(v), z)
            }
        };
        Ok(Token { payload, target })
    }
}

/// Serialized dataset bytes.
pub fn encode_dataset(dataset: &Dataset, format: DataFormat, vocab_size: usize) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match format {
        DataFormat::Text => {
            for s in &dataset.streams {
                let rec = SequenceRecord {
                    index: s.index,
                    tokens: s.tokens.iter().map(TokenRecord::from).collect(),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.push(b'\n');
            }
        }
        DataFormat::Binary => {
            out.extend_from_slice(MAGIC);
            out.write_u32::<LittleEndian>(DATASET_FORMAT_VERSION)?;
            out.write_u32::<LittleEndian>(vocab_size as u32)?;
            out.write_u64::<LittleEndian>(dataset.streams.len() as u64)?;
            for s in &dataset.streams {
                out.write_u64::<LittleEndian>(s.index)?;
                out.write_u32::<LittleEndian>(s.tokens.len() as u32)?;
                for t in &s.tokens {
                    let (tag, id) = match &t.payload {
                        Payload::Symbol(id) => (0u8, *id),
                        Payload::NonGrammaticalGap(id) => (1, *id),
                        Payload::NoiseGap(v) => (2, v.len()),
                        Payload::Terminal(id) => (3, *id),
                    };
                    out.write_u8(tag)?;
                    out.write_u32::<LittleEndian>(t.target as u32)?;
                    out.write_u32::<LittleEndian>(id as u32)?;
                    if let Payload::NoiseGap(v) = &t.payload {
                        for &x in v {
                            out.write_f32::<LittleEndian>(x)?;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn decode_text(bytes: &[u8], vocab_size: usize) -> Result<Vec<(u64, Vec<Token>)>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(bytes).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |e: Error| Error::Format(format!("line {}: {e}", n + 1));
        let rec: SequenceRecord = serde_json::from_str(&line).map_err(|e| at(e.into()))?;
        let tokens = rec
            .tokens
            .into_iter()
            .map(|t| t.into_token(vocab_size))
            .collect::<Result<Vec<_>>>()
            .map_err(at)?;
        out.push((rec.index, tokens));
    }
    Ok(out)
}

fn decode_binary(mut r: &[u8], vocab_size: usize) -> Result<Vec<(u64, Vec<Token>)>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a binary dataset (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported binary format version {version}")));
    }
    let vocab = r.read_u32::<LittleEndian>()? as usize;
    if vocab != vocab_size {
        return Err(Error::LengthMismatch {
            expected: vocab_size,
            got: vocab,
        });
    }
    let count = r.read_u64::<LittleEndian>()?;
    let mut out = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let index = r.read_u64::<LittleEndian>()?;
        let len = r.read_u32::<LittleEndian>()?;
        let mut tokens = Vec::with_capacity(len as usize);
        for _ in 0..len {
            let tag = r.read_u8()?;
            let z = r.read_u32::<LittleEndian>()? as usize;
            let id = r.read_u32::<LittleEndian>()? as usize;
            let rec = match tag {
                0 => TokenRecord::Symbol { id, z },
                1 => TokenRecord::Gap { id, z },
                2 => {
                    let v = (0..id).map(|_| r.read_f32::<LittleEndian>()).collect::<std::io::Result<Vec<f32>>>()?;
                    TokenRecord::Noise { v, z }
                }
                3 => TokenRecord::End { id, z },
                other => return Err(Error::Format(format!("unknown token tag {other}"))),
            };
            tokens.push(rec.into_token(vocab_size)?);
        }
        out.push((index, tokens));
    }
    if !r.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", r.len())));
    }
    Ok(out)
}

/// Counts recorded alongside a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub format: DataFormat,
    /// Data file name, relative to the manifest.
    pub file: String,
    pub grammar_id: String,
    /// sha256 of the grammar's canonical JSON.
    pub grammar_hash: String,
    /// sha256 of the data file bytes.
    pub content_hash: String,
    pub vocab_size: usize,
    pub split: DataSplit,
    pub task: u8,
    pub seed: u64,
    pub gap_length: Option<usize>,
    pub num_sequences: usize,
    pub num_tokens: usize,
    pub num_symbols: usize,
    pub num_gaps: usize,
    pub config: TaskConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `<dir>/<name>.manifest.json` for a data file `<dir>/<name>.<ext>`, or the
/// path itself if it already names a manifest.
pub fn manifest_path(path: &Path) -> PathBuf {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if name.ends_with(".manifest.json") {
        return path.to_path_buf();
    }
    let stem = name.rsplit_once('.').map_or(name, |(s, _)| s);
    path.with_file_name(format!("{stem}.manifest.json"))
}

/// Dataset file stem: the split name, or `test-gap<NNN>` inside a gap family.
pub fn dataset_name(dataset: &Dataset) -> String {
    match dataset.gap_length {
        Some(g) if dataset.config.task == 4 && dataset.config.split == DataSplit::Test => {
            format!("{}-gap{g:03}", dataset.config.split.name())
        }
        _ => dataset.config.split.name().to_string(),
    }
}

/// Writes `<dir>/<name>.<ext>` and its manifest; returns the manifest.
pub fn write_dataset(
    dir: &Path,
    dataset: &Dataset,
    format: DataFormat,
    grammar_hash: &str,
    grammar_id: &str,
    vocab_size: usize,
) -> Result<Manifest> {
    let name = dataset_name(dataset);
    let file = format!("{name}.{}", format.extension());
    let bytes = encode_dataset(dataset, format, vocab_size)?;
    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION,
        format,
        file: file.clone(),
        grammar_id: grammar_id.to_string(),
        grammar_hash: grammar_hash.to_string(),
        content_hash: sha256_hex(&bytes),
        vocab_size,
        split: dataset.config.split,
        task: dataset.config.task,
        seed: dataset.config.seed,
        gap_length: dataset.gap_length,
        num_sequences: dataset.streams.len(),
        num_tokens: dataset.streams.iter().map(|s| s.len()).sum(),
        num_symbols: dataset.streams.iter().map(|s| s.symbol_count()).sum(),
        num_gaps: dataset.streams.iter().map(|s| s.gap_count()).sum(),
        config: dataset.config.clone(),
    };
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(&file))?);
    w.write_all(&bytes)?;
    w.flush()?;
    write_json(&dir.join(format!("{name}.manifest.json")), &manifest)?;
    Ok(manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(manifest_path(path))?)?;
    if m.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset format version {}", m.format_version)));
    }
    Ok(m)
}

/// A dataset loaded from disk together with its manifest.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub manifest: Manifest,
    pub dataset: Dataset,
    /// Whether the data bytes still hash to the manifest's content hash.
    pub content_hash_ok: bool,
}

/// Reads a dataset given either its data file or its manifest.
pub fn read_dataset(path: &Path) -> Result<LoadedDataset> {
    let manifest = read_manifest(path)?;
    let data_path = manifest_path(path).with_file_name(&manifest.file);
    let mut bytes = Vec::new();
    File::open(&data_path)?.read_to_end(&mut bytes)?;
    let content_hash_ok = sha256_hex(&bytes) == manifest.content_hash;
    let records = match manifest.format {
        DataFormat::Text => decode_text(&bytes, manifest.vocab_size)?,
        DataFormat::Binary => decode_binary(&bytes, manifest.vocab_size)?,
    };
    let streams = records
        .into_iter()
        .map(|(index, tokens)| TokenStream {
            tokens,
            grammar_id: manifest.grammar_id.clone(),
            seed: manifest.seed,
            index,
        })
        .collect();
    Ok(LoadedDataset {
        dataset: Dataset {
            config: manifest.config.clone(),
            gap_length: manifest.gap_length,
            streams,
        },
        manifest,
        content_hash_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{build_grammar, GrammarConfig};
    use crate::tasks::{generate, GapTest};

    fn sample() -> (crate::grammar::Grammar, Dataset) {
        let g = build_grammar(&GrammarConfig {
            num_observables: 5,
            ambiguity: 3,
            p_transition: 0.2,
            seed: 1,
            ..GrammarConfig::default()
        })
        .unwrap();
        let cfg = TaskConfig {
            task: 2,
            t_max: 15,
            n_max: 3,
            num_sequences: 12,
            split: DataSplit::Test,
            gap_test: GapTest::Fixed(2),
            ..TaskConfig::default()
        };
        let d = generate(&g, &cfg).unwrap().remove(0);
        (g, d)
    }

    #[test]
    fn text_and_binary_round_trip() {
        let (g, d) = sample();
        let dir = tempfile::tempdir().unwrap();
        for format in [DataFormat::Text, DataFormat::Binary] {
            let sub = dir.path().join(format.extension());
            let m = write_dataset(&sub, &d, format, &g.content_hash(), &g.grammar_id(), g.vocab_size()).unwrap();
            assert_eq!(m.num_sequences, 12);
            let loaded = read_dataset(&sub.join(&m.file)).unwrap();
            assert!(loaded.content_hash_ok);
            assert_eq!(loaded.dataset, d);
            let again = read_dataset(&sub.join("test.manifest.json")).unwrap();
            assert_eq!(again.dataset, d);
        }
    }

    #[test]
    fn noise_reals_round_trip_exactly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f32> = (0..20_000).map(|_| rng.gen_range(0.0f32..0.2)).collect();
        let rec = TokenRecord::Noise { v: v.clone(), z: 0 };
        let back: TokenRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn tampering_changes_hash() {
        let (g, d) = sample();
        let dir = tempfile::tempdir().unwrap();
        let m = write_dataset(dir.path(), &d, DataFormat::Text, &g.content_hash(), &g.grammar_id(), g.vocab_size()).unwrap();
        let path = dir.path().join(&m.file);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replacen("\"z\":", "\"z\":1", 1)).unwrap();
        assert!(!read_dataset(&path).unwrap().content_hash_ok);
    }

    #[test]
    fn malformed_records() {
        assert!(matches!(
            decode_text(b"{\"index\":0,\"tokens\":[{\"t\":\"sym\",\"id\":9,\"z\":0}]}\n", 4),
            Err(Error::Format(msg)) if msg.contains("line 1")
        ));
        assert!(decode_text(b"{\"index\":0,\"tokens\":[{\"t\":\"noise\",\"v\":[0.1],\"z\":0}]}\n", 4).is_err());
        assert!(decode_text(b"not json\n", 4).is_err());
        assert!(decode_binary(b"XXXX", 4).is_err());
    }

    #[test]
    fn manifest_paths() {
        assert_eq!(manifest_path(Path::new("a/train.jsonl")), Path::new("a/train.manifest.json"));
        assert_eq!(manifest_path(Path::new("a/test-gap010.bin")), Path::new("a/test-gap010.manifest.json"));
        assert_eq!(manifest_path(Path::new("a/x.manifest.json")), Path::new("a/x.manifest.json"));
    }
}
