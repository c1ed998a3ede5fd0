//! GloVe text and word2vec binary readers/writers.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use flate2::read::MultiGzDecoder;

use super::EmbeddingTable;
use crate::{Error, Result};

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Opens `path` for buffered reading, decompressing transparently when the
/// file starts with the gzip magic bytes.
pub(crate) fn open_maybe_gzip(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 20, file);
    let head = reader.fill_buf().map_err(|e| Error::io(path, e))?;
    if head.starts_with(&GZIP_MAGIC) {
        Ok(Box::new(BufReader::with_capacity(
            1 << 20,
            MultiGzDecoder::new(reader),
        )))
    } else {
        Ok(Box::new(reader))
    }
}

pub fn load_glove_text(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    read_glove_text(open_maybe_gzip(path)?)
}

/// Parses `word v1 ... vdim` lines. The dimension comes from the first
/// line. Words may themselves contain spaces, so the last `dim` fields are
/// taken as the vector and the rest as the word.
pub fn read_glove_text<R: BufRead>(mut reader: R) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    let mut buf = Vec::new();
    let mut values = Vec::new();
    let mut line_no = 0u64;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io("<glove input>", e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line = String::from_utf8_lossy(&buf);
        let line = line.trim_end_matches(['\n', '\r', ' ']);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        let dim = match &table {
            Some(t) => t.dim(),
            None => {
                if fields.len() < 2 {
                    return Err(Error::Embedding {
                        line: line_no,
                        message: "line has no vector components".into(),
                    });
                }
                fields.len() - 1
            }
        };
        if fields.len() < dim + 1 {
            return Err(Error::Embedding {
                line: line_no,
                message: format!("found {} components, expected {dim}", fields.len() - 1),
            });
        }
        let split = fields.len() - dim;
        let word = fields[..split].join(" ");
        if word.is_empty() {
            return Err(Error::Embedding {
                line: line_no,
                message: "empty word".into(),
            });
        }
        values.clear();
        for field in &fields[split..] {
            let v: f32 = field.parse().map_err(|_| Error::Embedding {
                line: line_no,
                message: format!("non-numeric component {field:?}"),
            })?;
            values.push(v);
        }
        table
            .get_or_insert_with(|| EmbeddingTable::new(dim))
            .insert_or_skip(&word, &values)?;
    }
    table.ok_or_else(|| Error::Embedding {
        line: 0,
        message: "file contains no vectors".into(),
    })
}

pub fn write_glove_text<W: Write>(table: &EmbeddingTable, mut writer: W) -> Result<()> {
    let io = |e| Error::io("<glove output>", e);
    for (word, vector) in table.iter() {
        write!(writer, "{word}").map_err(io)?;
        for v in vector {
            write!(writer, " {v}").map_err(io)?;
        }
        writeln!(writer).map_err(io)?;
    }
    writer.flush().map_err(io)
}

pub fn load_word2vec_binary(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    read_word2vec_binary(open_maybe_gzip(path)?)
}

/// Reads only the `vocab_size dim` header line.
pub fn read_word2vec_header(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let mut reader = open_maybe_gzip(path.as_ref())?;
    parse_header(&mut reader)
}

fn parse_header<R: BufRead>(reader: &mut R) -> Result<(usize, usize)> {
    let mut header = Vec::new();
    reader
        .read_until(b'\n', &mut header)
        .map_err(|e| Error::io("<word2vec input>", e))?;
    let text = String::from_utf8_lossy(&header);
    let mut parts = text.split_whitespace();
    let parse = |p: Option<&str>| p.and_then(|s| s.parse::<usize>().ok());
    match (parse(parts.next()), parse(parts.next()), parts.next()) {
        (Some(n), Some(d), None) if d > 0 => Ok((n, d)),
        _ => Err(Error::Word2Vec(format!(
            "unparsable header {:?}",
            text.trim_end()
        ))),
    }
}

/// Binary layout: ASCII header `vocab_size dim\n`, then for each word the
/// word bytes, a space and `dim` little-endian `f32` values. A newline may
/// follow each vector.
pub fn read_word2vec_binary<R: BufRead>(mut reader: R) -> Result<EmbeddingTable> {
    let (vocab_size, dim) = parse_header(&mut reader)?;
    let mut table = EmbeddingTable::with_capacity(dim, vocab_size);
    let mut word = Vec::new();
    let mut vector = vec![0f32; dim];
    for read in 0..vocab_size {
        word.clear();
        reader
            .read_until(b' ', &mut word)
            .map_err(|e| Error::io("<word2vec input>", e))?;
        if word.last() != Some(&b' ') {
            return Err(Error::Word2Vec(format!(
                "truncated after {read} of {vocab_size} words"
            )));
        }
        word.pop();
        let start = word
            .iter()
            .position(|&b| b != b'\n' && b != b'\r')
            .unwrap_or(word.len());
        let text = String::from_utf8_lossy(&word[start..]).into_owned();
        if reader.read_f32_into::<LittleEndian>(&mut vector).is_err() {
            return Err(Error::Word2Vec(format!(
                "truncated inside the vector of word {} ({text:?}); {read} complete words read",
                read + 1
            )));
        }
        table.insert_or_skip(&text, &vector)?;
    }
    Ok(table)
}

pub fn write_word2vec_binary<W: Write>(table: &EmbeddingTable, mut writer: W) -> Result<()> {
    let io = |e| Error::io("<word2vec output>", e);
    writeln!(writer, "{} {}", table.len(), table.dim()).map_err(io)?;
    for (word, vector) in table.iter() {
        writer.write_all(word.as_bytes()).map_err(io)?;
        writer.write_all(b" ").map_err(io)?;
        for &v in vector {
            writer.write_f32::<LittleEndian>(v).map_err(io)?;
        }
        writer.write_all(b"\n").map_err(io)?;
    }
    writer.flush().map_err(io)
}
