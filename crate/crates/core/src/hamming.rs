//! Packed Hamming distance and exact k-nearest-neighbor search by linear scan.

use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::model::HashCode;

/// Number of differing bits, by XOR and popcount per 64-bit word.
pub fn hamming(a: &HashCode, b: &HashCode) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(distance_unchecked(a, b))
}

#[inline]
fn distance_unchecked(a: &HashCode, b: &HashCode) -> u32 {
    a.words()
        .iter()
        .zip(b.words())
        .map(|(x, y)| (x ^ y).count_ones())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    code_len: usize,
    codes: Vec<HashCode>,
}

impl CodeMatrix {
    pub fn new(code_len: usize, codes: Vec<HashCode>) -> Result<Self> {
        if codes.is_empty() {
            return Err(Error::data("code matrix needs at least one row"));
        }
        if let Some(bad) = codes.iter().find(|c| c.len() != code_len) {
            return Err(Error::DimensionMismatch {
                expected: code_len,
                got: bad.len(),
            });
        }
        Ok(CodeMatrix { code_len, codes })
    }

    pub fn code_len(&self) -> usize {
        self.code_len
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[HashCode] {
        &self.codes
    }

    pub fn get(&self, row: usize) -> Option<&HashCode> {
        self.codes.get(row)
    }

    /// The `k` rows closest to `query`, ascending by distance then row index.
    /// Returns every row when `k` exceeds the row count.
    pub fn knn(&self, query: &HashCode, k: usize) -> Result<Vec<(usize, u32)>> {
        if k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if query.len() != self.code_len {
            return Err(Error::DimensionMismatch {
                expected: self.code_len,
                got: query.len(),
            });
        }
        // max-heap on (distance, row): the top is the worst kept candidate
        let mut heap: BinaryHeap<(u32, usize)> = BinaryHeap::with_capacity(k + 1);
        for (row, code) in self.codes.iter().enumerate() {
            let d = distance_unchecked(query, code);
            if heap.len() < k {
                heap.push((d, row));
            } else if let Some(&worst) = heap.peek() {
                if (d, row) < worst {
                    heap.pop();
                    heap.push((d, row));
                }
            }
        }
        Ok(heap
            .into_sorted_vec()
            .into_iter()
            .map(|(d, row)| (row, d))
            .collect())
    }
}

/// Hex digits of a code, most significant bit first, `ceil(d / 4)` digits.
pub fn code_to_hex(code: &HashCode) -> String {
    let mut s = String::with_capacity(code.words().len() * 16);
    for w in code.words() {
        write!(s, "{w:016x}").unwrap();
    }
    s.truncate(code.len().div_ceil(4));
    s
}

pub fn code_from_hex(hex: &str, code_len: usize) -> Result<HashCode> {
    if hex.len() != code_len.div_ceil(4) {
        return Err(Error::DimensionMismatch {
            expected: code_len.div_ceil(4),
            got: hex.len(),
        });
    }
    let words_needed = code_len.div_ceil(64);
    let mut padded = hex.to_string();
    padded.extend(std::iter::repeat_n('0', words_needed * 16 - hex.len()));
    let words = (0..words_needed)
        .map(|i| {
            u64::from_str_radix(&padded[i * 16..(i + 1) * 16], 16)
                .map_err(|_| Error::data(format!("invalid hex code `{hex}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    HashCode::from_words(words, code_len)
}

/// Writes `node_id<TAB>hex` lines preceded by a `# d=<code length>` header.
pub fn write_codes<W: Write>(ids: &[u64], matrix: &CodeMatrix, mut out: W) -> Result<()> {
    if ids.len() != matrix.len() {
        return Err(Error::DimensionMismatch {
            expected: matrix.len(),
            got: ids.len(),
        });
    }
    writeln!(out, "# d={}", matrix.code_len())?;
    for (id, code) in ids.iter().zip(matrix.codes()) {
        writeln!(out, "{id}\t{}", code_to_hex(code))?;
    }
    Ok(())
}

/// Reads a code file. Without a `# d=` header the code length is four bits
/// per hex digit.
pub fn read_codes<R: BufRead>(reader: R) -> Result<(Vec<u64>, CodeMatrix)> {
    let mut code_len: Option<usize> = None;
    let mut ids = Vec::new();
    let mut codes = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("d=") {
                let d = v.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid code length `{v}`"),
                })?;
                code_len = Some(d);
            }
            continue;
        }
        let (id, hex) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected `node_id<TAB>hex`".into(),
        })?;
        let id = id.trim().parse::<u64>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid node id `{id}`"),
        })?;
        let hex = hex.trim();
        let d = *code_len.get_or_insert(hex.len() * 4);
        let code = code_from_hex(hex, d).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        ids.push(id);
        codes.push(code);
    }
    let d = code_len.ok_or_else(|| Error::data("code file has no codes"))?;
    Ok((ids, CodeMatrix::new(d, codes)?))
}
