//! Text serialization: a `shape: d1 d2 ...` header line followed by one
//! row-major value per line. Values use the shortest representation that
//! parses back to the identical `f64`.

use std::io::{BufRead, Write};

use super::Tensor;
use crate::error::{Error, Result};

pub fn write_tensor<W: Write>(out: &mut W, tensor: &Tensor) -> std::io::Result<()> {
    let dims: Vec<String> = tensor.shape().iter().map(|d| d.to_string()).collect();
    writeln!(out, "shape: {}", dims.join(" "))?;
    for v in tensor.data() {
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

/// Reads one tensor from `lines`; `field` names the tensor in error messages.
pub fn read_tensor<B: BufRead>(lines: &mut std::io::Lines<B>, field: &str) -> Result<Tensor> {
    let mut next = |what: &str| -> Result<String> {
        match lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(Error::format(field, e.to_string())),
            None => Err(Error::format(field, format!("truncated: missing {what}"))),
        }
    };
    let header = next("shape header")?;
    let dims = header
        .trim()
        .strip_prefix("shape:")
        .ok_or_else(|| Error::format(field, format!("expected 'shape:' header, got {header:?}")))?;
    let shape = dims
        .split_whitespace()
        .map(|d| d.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::format(field, format!("bad shape {dims:?}: {e}")))?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::format(field, format!("invalid shape {shape:?}")));
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let line = next(&format!("value {i} of {n}"))?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| Error::format(field, format!("value {i}: cannot parse {line:?}")))?;
        if !v.is_finite() {
            return Err(Error::format(field, format!("value {i} is not finite")));
        }
        data.push(v);
    }
    Tensor::new(shape, data).map_err(|e| Error::format(field, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = Tensor::new(vec![2, 3], vec![0.1, -1e-300, 3.0, 1.0 / 3.0, 7e12, -0.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("shape: 2 3\n"));
        let back = read_tensor(&mut Cursor::new(buf).lines(), "t").unwrap();
        for (a, b) in t.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_tensor_is_format_error() {
        let text = "shape: 2 2\n1.0\n2.0\n";
        let err = read_tensor(&mut Cursor::new(text).lines(), "conv0.kernel").unwrap_err();
        match err {
            Error::Format { field, reason } => {
                assert_eq!(field, "conv0.kernel");
                assert!(reason.contains("truncated"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
