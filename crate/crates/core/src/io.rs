// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Text formats for instances, streams and certificates.
//!
//! Instance: a header `n m k`, then one `id e1 e2 ...` line per set.
//! Stream: `+ id e1 e2 ...` inserts, `- id` deletes, one token per line.
//! Certificate: `opt <value>` then `ids <id> ...`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use crate::dynamic::StreamSource;
use crate::error::{Error, Result};
use crate::generate::Certificate;
use crate::model::{id_space, DynamicStream, Instance, Op, SetId, SetRecord, StreamToken};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn validation_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Validation {
        line,
        msg: msg.into(),
    }
}

fn numbers<T: std::str::FromStr>(line: usize, fields: &[&str]) -> Result<Vec<T>> {
    fields
        .iter()
        .map(|f| f.parse().map_err(|_| parse_err(line, format!("bad number '{f}'"))))
        .collect()
}

fn set_line(line: usize, id: &str, elems: &[&str]) -> Result<SetRecord> {
    let id: u64 = id
        .parse()
        .map_err(|_| parse_err(line, format!("bad set id '{id}'")))?;
    let elems = numbers::<u32>(line, elems)?;
    SetRecord::new(SetId(id), elems).map_err(|e| validation_err(line, e.to_string()))
}

fn push_set(out: &mut String, set: &SetRecord) {
    write!(out, "{}", set.id).expect("write to string");
    for e in set.elements() {
        write!(out, " {e}").expect("write to string");
    }
    out.push('\n');
}

pub fn write_instance(inst: &Instance) -> String {
    let mut out = format!("{} {} {}\n", inst.n(), inst.m(), inst.k());
    for s in inst.sets() {
        push_set(&mut out, s);
    }
    out
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header 'n m k'"))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(parse_err(1, "header must be 'n m k'"));
    }
    let n: u32 = numbers(1, &head[..1])?[0];
    let dims: Vec<usize> = numbers(1, &head[1..])?;
    let (m, k) = (dims[0], dims[1]);
    let mut sets = Vec::with_capacity(m);
    let mut seen = HashMap::with_capacity(m);
    for (line, text) in lines {
        let fields: Vec<&str> = text.split_whitespace().collect();
        let Some((&id, elems)) = fields.split_first() else {
            return Err(parse_err(line, "empty line"));
        };
        let set = set_line(line, id, elems)?;
        if let Some(e) = set.max_element().filter(|&e| e > n) {
            return Err(validation_err(line, format!("element {e} outside 1..={n}")));
        }
        if let Some(prev) = seen.insert(set.id, line) {
            return Err(validation_err(line, format!("set id {} repeats line {prev}", set.id)));
        }
        sets.push(set);
    }
    if sets.len() != m {
        return Err(validation_err(
            text.lines().count().max(1),
            format!("header declares {m} sets, found {}", sets.len()),
        ));
    }
    let space = id_space(m, n).max(sets.iter().map(|s| s.id.0 + 1).max().unwrap_or(0));
    Instance::with_id_space(n, k, sets, space).map_err(|e| validation_err(1, e.to_string()))
}

pub fn write_stream(stream: &DynamicStream) -> String {
    let mut out = String::new();
    for t in stream.tokens() {
        match t.op {
            Op::Insert => {
                out.push_str("+ ");
                push_set(&mut out, &t.set);
            }
            Op::Delete => {
                writeln!(out, "- {}", t.set.id).expect("write to string");
            }
        }
    }
    out
}

/// Parses one stream line into a token; deletes carry no elements.
fn stream_line(line: usize, text: &str) -> Result<StreamToken> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    match fields.as_slice() {
        ["+", id, elems @ ..] => Ok(StreamToken::insert(set_line(line, id, elems)?)),
        ["-", id] => {
            let id: u64 = id
                .parse()
                .map_err(|_| parse_err(line, format!("bad set id '{id}'")))?;
            Ok(StreamToken::delete_id(SetId(id)))
        }
        ["-", _, _, ..] => Err(parse_err(line, "delete takes only an id")),
        [] => Err(parse_err(line, "empty line")),
        _ => Err(parse_err(line, "expected '+ id e...' or '- id'")),
    }
}

/// Parses and validates a stream over `{1..n}`; with `n = None` the universe
/// is the largest element seen.
pub fn parse_stream(text: &str, n: Option<u32>) -> Result<DynamicStream> {
    let tokens = text
        .lines()
        .enumerate()
        .map(|(i, l)| stream_line(i + 1, l))
        .collect::<Result<Vec<_>>>()?;
    let n = n.unwrap_or_else(|| tokens.iter().filter_map(|t| t.set.max_element()).max().unwrap_or(1));
    DynamicStream::new(n, tokens).map_err(|e| match e {
        Error::InvalidStream { index, reason } => validation_err(index + 1, reason),
        e => e,
    })
}

pub fn parse_stream_file(path: &Path, n: Option<u32>) -> Result<DynamicStream> {
    parse_stream(&std::fs::read_to_string(path)?, n)
}

pub fn write_certificate(c: &Certificate) -> String {
    let ids: Vec<String> = c.ids.iter().map(ToString::to_string).collect();
    format!("opt {}\nids {}\n", c.value, ids.join(" "))
}

pub fn parse_certificate(text: &str) -> Result<Certificate> {
    let mut lines = text.lines();
    let value = match lines.next().map(|l| l.split_whitespace().collect::<Vec<_>>()) {
        Some(f) if f.len() == 2 && f[0] == "opt" => numbers::<usize>(1, &f[1..])?[0],
        _ => return Err(parse_err(1, "expected 'opt <value>'")),
    };
    let ids = match lines.next().map(|l| l.split_whitespace().collect::<Vec<_>>()) {
        Some(f) if f.first() == Some(&"ids") => numbers::<u64>(2, &f[1..])?,
        _ => return Err(parse_err(2, "expected 'ids <id> ...'")),
    };
    if lines.next().is_some() {
        return Err(parse_err(3, "trailing content"));
    }
    Ok(Certificate {
        value,
        ids: ids.into_iter().map(SetId).collect(),
    })
}

/// A stream file re-read on every pass. Only the byte offset of each id's
/// first insert line is kept in memory, to fill in the elements of deletes.
#[derive(Debug)]
pub struct FileStream {
    path: PathBuf,
    n: u32,
    id_space: u64,
    offsets: HashMap<SetId, u64>,
}

impl FileStream {
    /// Validates the whole file once, then keeps only the insert offsets.
    pub fn open(path: impl Into<PathBuf>, n: Option<u32>) -> Result<Self> {
        let path = path.into();
        let stream = parse_stream_file(&path, n)?;
        let mut reader = BufReader::new(File::open(&path)?);
        let mut offsets = HashMap::new();
        let mut offset = 0u64;
        let mut buf = String::new();
        loop {
            buf.clear();
            let read = reader.read_line(&mut buf)?;
            if read == 0 {
                break;
            }
            if let Some(rest) = buf.strip_prefix("+ ") {
                let id = rest.split_whitespace().next().and_then(|f| f.parse().ok());
                offsets.entry(SetId(id.expect("validated"))).or_insert(offset);
            }
            offset += read as u64;
        }
        Ok(Self {
            path,
            n: stream.n(),
            id_space: stream.id_space(),
            offsets,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn insert_at(&self, file: &mut BufReader<File>, offset: u64) -> Result<SetRecord> {
        file.seek(SeekFrom::Start(offset))?;
        let mut buf = String::new();
        file.read_line(&mut buf)?;
        Ok(stream_line(0, buf.trim_end())?.set)
    }
}

impl StreamSource for FileStream {
    fn universe(&self) -> u32 {
        self.n
    }

    fn id_space(&self) -> u64 {
        self.id_space
    }

    fn set_count(&self) -> usize {
        self.offsets.len()
    }

    fn replay(&self, visit: &mut dyn FnMut(&StreamToken)) -> Result<()> {
        let mut text = String::new();
        let mut reader = BufReader::new(File::open(&self.path)?);
        let mut lookup = BufReader::new(File::open(&self.path)?);
        let mut line = 0;
        loop {
            text.clear();
            if reader.read_line(&mut text)? == 0 {
                return Ok(());
            }
            line += 1;
            let mut tok = stream_line(line, text.trim_end_matches(['\n', '\r']))?;
            if tok.op == Op::Delete {
                let offset = *self
                    .offsets
                    .get(&tok.set.id)
                    .ok_or_else(|| validation_err(line, "stream file changed since validation"))?;
                tok = StreamToken::delete(self.insert_at(&mut lookup, offset)?);
            }
            visit(&tok);
        }
    }
}

/// Reads a whole file into memory, mapping I/O failures.
pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate, GeneratorProfile, ProfileKind};

    #[test]
    fn empty_stream() {
        let s = parse_stream("", None).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn insert_then_delete_leaves_nothing() {
        let s = parse_stream("+ 7 1 2 9\n- 7\n", Some(10)).unwrap();
        assert!(s.live_sets().is_empty());
        assert_eq!(s.tokens()[1].set.elements(), &[1, 2, 9]);
    }

    #[test]
    fn line_numbered_errors() {
        assert!(matches!(parse_stream("+ 1 1 2\n- 3\n", None), Err(Error::Validation { line: 2, .. })));
        assert!(matches!(parse_stream("+ 1 1 2\n* 3\n", None), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_stream("+ 1 2 1\n", None), Err(Error::Validation { line: 1, .. })));
        assert!(matches!(parse_stream("+ 1 1 x\n", None), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_stream("+ 1 1 20\n", Some(10)), Err(Error::Validation { line: 1, .. })));
        assert!(matches!(parse_stream("+ 1 1\n+ 1 1\n", None), Err(Error::Validation { line: 2, .. })));
        assert!(matches!(parse_stream("+ 1 1\n- 1\n- 1\n", None), Err(Error::Validation { line: 3, .. })));
        assert!(parse_stream("+ 1 1\n+ 1 1\n- 1\n", None).is_ok());
        assert!(matches!(parse_stream("+ 1 1\n- 1 1\n", None), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_stream("+ 1 1\n+ 2 3\n- 1\n+ 1 2\n", None), Err(Error::Validation { line: 4, .. })));
        assert!(matches!(parse_stream("+ 1 1\n\n", None), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn instance_errors() {
        assert!(matches!(parse_instance(""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_instance("5 2 1\n0 1 2\n"), Err(Error::Validation { .. })));
        assert!(matches!(parse_instance("5 2 1\n0 1 2\n0 3\n"), Err(Error::Validation { line: 3, .. })));
        assert!(matches!(parse_instance("5 1 1\n0 1 9\n"), Err(Error::Validation { line: 2, .. })));
        assert!(matches!(parse_instance("5 1 3\n0 1\n"), Err(Error::Validation { line: 1, .. })));
    }

    #[test]
    fn round_trips_are_byte_identical() {
        for kind in [
            ProfileKind::Disjoint,
            ProfileKind::Overlapping { density: 0.3 },
            ProfileKind::PlantedOpt { cover: 40 },
            ProfileKind::AdversarialLadder,
        ] {
            let g = generate(&GeneratorProfile::new(kind, 60, 20, 4, 11).with_churn(0.3)).unwrap();
            let inst = write_instance(&g.instance);
            assert_eq!(write_instance(&parse_instance(&inst).unwrap()), inst);
            let stream = write_stream(&g.stream);
            let parsed = parse_stream(&stream, Some(60)).unwrap();
            assert_eq!(parsed, g.stream);
            assert_eq!(write_stream(&parsed), stream);
            if let Some(c) = g.certificate {
                let text = write_certificate(&c);
                assert_eq!(parse_certificate(&text).unwrap(), c);
            }
        }
    }

    #[test]
    fn file_stream_replays_like_memory() {
        let g = generate(&GeneratorProfile::new(ProfileKind::Overlapping { density: 0.2 }, 50, 30, 3, 4).with_churn(0.4))
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        std::fs::write(&path, write_stream(&g.stream)).unwrap();
        let fs = FileStream::open(&path, Some(50)).unwrap();
        assert_eq!(fs.set_count(), 30);
        assert_eq!(fs.id_space(), g.stream.id_space());
        let mut replayed = Vec::new();
        fs.replay(&mut |t| replayed.push(t.clone())).unwrap();
        assert_eq!(replayed, g.stream.tokens());
        assert_eq!(parse_stream_file(&path, Some(50)).unwrap(), g.stream);
    }
}
