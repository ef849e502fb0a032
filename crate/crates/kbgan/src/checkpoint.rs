//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!   magic "KGE1"
//!   u32 header length, then the header:
//!     u8 model kind (0 transe, 1 transd, 2 distmult, 3 complex)
//!     u8 distance norm (0 none, 1 L1, 2 L2); nonzero exactly for
//!        translation kinds
//!     u32 k
//!     u64 entity count, u64 relation count
//!     u32 tool-version length + UTF-8 bytes
//!   vocabulary: entity names then relation names, each u32 length + UTF-8
//!   u32 table count, then per table:
//!     u8 table id, u64 rows, u32 row width, rows*width f32 values
//!
//! Tables are stored in f32 regardless of training precision. Nothing in
//! the file depends on wall-clock time, so identical runs produce identical
//! bytes. The decoder never trusts claimed counts for allocation: it reads
//! incrementally and reports truncation when the bytes run out.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::kgdata::Vocabulary;
use crate::models::{ModelKind, ModelParams, Norm, Table, TableId};
use crate::real::Real;

const MAGIC: &[u8; 4] = b"KGE1";
/// Caps on claimed sizes; generous for real models, tight enough that a
/// hostile header cannot request absurd allocations.
const MAX_NAME_LEN: u32 = 1 << 20;
const MAX_K: u32 = 1 << 16;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint is inconsistent: {0}")]
    CountMismatch(String),
    #[error("checkpoint header is invalid: {0}")]
    BadHeader(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn eof_is_truncation(e: io::Error) -> CheckpointError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        CheckpointError::Truncated
    } else {
        CheckpointError::Io(e)
    }
}

/// A model with its vocabulary, as stored on disk.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub k: usize,
    pub vocab: Vocabulary,
    pub tables: Vec<(TableId, Table<f32>)>,
    pub tool_version: String,
}

impl Checkpoint {
    pub fn from_params<T: Real>(params: &ModelParams<T>, vocab: &Vocabulary) -> Self {
        assert_eq!(params.num_entities(), vocab.num_entities());
        assert_eq!(params.num_relations(), vocab.num_relations());
        let tables = params
            .kind()
            .table_ids()
            .iter()
            .map(|&id| {
                let t = params.table(id);
                let data = t.data().iter().map(|&x| x.into_f64() as f32).collect();
                (id, Table::from_vec(t.rows(), t.dim(), data))
            })
            .collect();
        Checkpoint {
            kind: params.kind(),
            k: params.k(),
            vocab: vocab.clone(),
            tables,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }

    pub fn to_params<T: Real>(&self) -> ModelParams<T> {
        let tables = self
            .tables
            .iter()
            .map(|(id, t)| {
                let data = t.data().iter().map(|&x| T::from_f64(x as f64)).collect();
                (*id, Table::from_vec(t.rows(), t.dim(), data))
            })
            .collect();
        ModelParams::from_tables(self.kind, self.k, tables)
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), CheckpointError> {
        w.write_all(MAGIC)?;
        let mut header = Vec::new();
        let (kind_code, norm_code) = encode_kind(self.kind);
        header.write_u8(kind_code)?;
        header.write_u8(norm_code)?;
        header.write_u32::<LittleEndian>(self.k as u32)?;
        header.write_u64::<LittleEndian>(self.vocab.num_entities() as u64)?;
        header.write_u64::<LittleEndian>(self.vocab.num_relations() as u64)?;
        header.write_u32::<LittleEndian>(self.tool_version.len() as u32)?;
        header.extend_from_slice(self.tool_version.as_bytes());
        w.write_u32::<LittleEndian>(header.len() as u32)?;
        w.write_all(&header)?;

        for name in self.vocab.entity_names().iter().chain(self.vocab.relation_names()) {
            w.write_u32::<LittleEndian>(name.len() as u32)?;
            w.write_all(name.as_bytes())?;
        }

        w.write_u32::<LittleEndian>(self.tables.len() as u32)?;
        for (id, table) in &self.tables {
            w.write_u8(id.code())?;
            w.write_u64::<LittleEndian>(table.rows() as u64)?;
            w.write_u32::<LittleEndian>(table.dim() as u32)?;
            for &x in table.data() {
                w.write_f32::<LittleEndian>(x)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(eof_is_truncation)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let header_len = r.read_u32::<LittleEndian>().map_err(eof_is_truncation)?;
        if header_len < 26 {
            return Err(CheckpointError::BadHeader(format!(
                "header length {header_len} is too small"
            )));
        }
        let header = read_blob(r, header_len, "header")?;
        let h = &mut header.as_slice();
        let kind_code = h.read_u8().map_err(eof_is_truncation)?;
        let norm_code = h.read_u8().map_err(eof_is_truncation)?;
        let kind = decode_kind(kind_code, norm_code)?;
        let k = h.read_u32::<LittleEndian>().map_err(eof_is_truncation)?;
        if k == 0 || k > MAX_K {
            return Err(CheckpointError::BadHeader(format!("bad dimension k={k}")));
        }
        let n_e = h.read_u64::<LittleEndian>().map_err(eof_is_truncation)?;
        let n_r = h.read_u64::<LittleEndian>().map_err(eof_is_truncation)?;
        if n_e == 0 || n_e > u32::MAX as u64 || n_r == 0 || n_r > u32::MAX as u64 {
            return Err(CheckpointError::BadHeader(format!(
                "bad vocabulary counts {n_e}/{n_r}"
            )));
        }
        let tool_version = read_string(h)?;

        let mut entities = Vec::new();
        for _ in 0..n_e {
            entities.push(read_string(r)?);
        }
        let mut relations = Vec::new();
        for _ in 0..n_r {
            relations.push(read_string(r)?);
        }
        let vocab = Vocabulary::from_names(entities, relations)
            .map_err(CheckpointError::CountMismatch)?;

        let expected_ids = kind.table_ids();
        let table_count = r.read_u32::<LittleEndian>().map_err(eof_is_truncation)?;
        if table_count as usize != expected_ids.len() {
            return Err(CheckpointError::CountMismatch(format!(
                "{} declares {} tables, found {table_count}",
                kind.name(),
                expected_ids.len()
            )));
        }
        let mut tables = Vec::with_capacity(expected_ids.len());
        for &expect in expected_ids {
            let code = r.read_u8().map_err(eof_is_truncation)?;
            let id = TableId::from_code(code).ok_or_else(|| {
                CheckpointError::BadHeader(format!("unknown table id {code}"))
            })?;
            if id != expect {
                return Err(CheckpointError::CountMismatch(format!(
                    "expected table {expect:?}, found {id:?}"
                )));
            }
            let rows = r.read_u64::<LittleEndian>().map_err(eof_is_truncation)?;
            let dim = r.read_u32::<LittleEndian>().map_err(eof_is_truncation)?;
            let expect_rows = match id {
                TableId::Entity | TableId::EntityProj => n_e,
                TableId::Relation | TableId::RelationProj => n_r,
            };
            let expect_dim = kind.row_dim(k as usize) as u32;
            if rows != expect_rows || dim != expect_dim {
                return Err(CheckpointError::CountMismatch(format!(
                    "table {id:?} is {rows}x{dim}, header implies {expect_rows}x{expect_dim}"
                )));
            }
            // read row by row: allocation tracks bytes actually present, so
            // a huge claimed count cannot balloon memory before EOF
            let mut data: Vec<f32> = Vec::new();
            let mut row = vec![0u8; dim as usize * 4];
            for _ in 0..rows {
                r.read_exact(&mut row).map_err(eof_is_truncation)?;
                data.extend(
                    row.chunks_exact(4)
                        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
                );
            }
            tables.push((id, Table::from_vec(rows as usize, dim as usize, data)));
        }
        let mut trailing = [0u8; 1];
        match r.read(&mut trailing) {
            Ok(0) => {}
            Ok(_) => {
                return Err(CheckpointError::CountMismatch(
                    "trailing bytes after the last table".into(),
                ))
            }
            Err(e) => return Err(e.into()),
        }
        Ok(Checkpoint {
            kind,
            k: k as usize,
            vocab,
            tables,
            tool_version,
        })
    }
}

fn encode_kind(kind: ModelKind) -> (u8, u8) {
    let norm_code = |n: Norm| match n {
        Norm::L1 => 1,
        Norm::L2 => 2,
    };
    match kind {
        ModelKind::TransE(n) => (0, norm_code(n)),
        ModelKind::TransD(n) => (1, norm_code(n)),
        ModelKind::DistMult => (2, 0),
        ModelKind::ComplEx => (3, 0),
    }
}

fn decode_kind(kind_code: u8, norm_code: u8) -> Result<ModelKind, CheckpointError> {
    let norm = match norm_code {
        0 => None,
        1 => Some(Norm::L1),
        2 => Some(Norm::L2),
        other => {
            return Err(CheckpointError::BadHeader(format!(
                "unknown norm code {other}"
            )))
        }
    };
    match (kind_code, norm) {
        (0, Some(n)) => Ok(ModelKind::TransE(n)),
        (1, Some(n)) => Ok(ModelKind::TransD(n)),
        (2, None) => Ok(ModelKind::DistMult),
        (3, None) => Ok(ModelKind::ComplEx),
        (0..=1, None) => Err(CheckpointError::BadHeader(
            "translation model without a distance norm".into(),
        )),
        (2..=3, Some(_)) => Err(CheckpointError::BadHeader(
            "product model with a distance norm".into(),
        )),
        (other, _) => Err(CheckpointError::BadHeader(format!(
            "unknown model kind {other}"
        ))),
    }
}

/// Reads exactly `len` bytes without trusting `len` for the allocation.
fn read_blob<R: Read>(r: &mut R, len: u32, what: &str) -> Result<Vec<u8>, CheckpointError> {
    if len > MAX_NAME_LEN {
        return Err(CheckpointError::BadHeader(format!(
            "{what} length {len} exceeds limit"
        )));
    }
    let mut buf = Vec::new();
    let got = r.take(len as u64).read_to_end(&mut buf)?;
    if got < len as usize {
        return Err(CheckpointError::Truncated);
    }
    Ok(buf)
}

fn read_string<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = r.read_u32::<LittleEndian>().map_err(eof_is_truncation)?;
    let buf = read_blob(r, len, "string")?;
    String::from_utf8(buf)
        .map_err(|_| CheckpointError::BadHeader("string is not valid UTF-8".into()))
}
