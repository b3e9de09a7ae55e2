//! Checkpoint files: a key=value (TOML) header holding the [`ModelConfig`],
//! a `%% tensors` marker line, then one `tensor <name>` section per
//! parameter in the tensor text format.

use std::fs;
use std::io::{BufRead, BufWriter, Cursor, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::network::{ConvParams, CountModel};
use crate::error::{Error, Result};
use crate::tensor::{read_tensor, write_tensor};

const MAGIC: &str = "# gsp-count checkpoint v1";
const TENSOR_MARKER: &str = "%% tensors";

pub fn write_model<W: Write>(out: &mut W, model: &CountModel) -> std::io::Result<()> {
    writeln!(out, "{MAGIC}")?;
    let header = toml::to_string(model.config()).map_err(std::io::Error::other)?;
    out.write_all(header.as_bytes())?;
    writeln!(out, "{TENSOR_MARKER}")?;
    for (name, t) in model.named_parameters() {
        writeln!(out, "tensor {name}")?;
        write_tensor(out, t)?;
    }
    Ok(())
}

pub fn save_model(model: &CountModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(&mut w, model)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_model(text: &str) -> Result<CountModel> {
    let body = text
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::format("header", "missing checkpoint magic line"))?;
    let marker = format!("\n{TENSOR_MARKER}\n");
    let split = body
        .find(&marker)
        .ok_or_else(|| Error::format("header", format!("missing '{TENSOR_MARKER}' line")))?;
    let config: ModelConfig =
        toml::from_str(&body[..split]).map_err(|e| Error::format("config", e.message().to_string()))?;
    config
        .validate()
        .map_err(|e| Error::format("config", e.to_string()))?;

    let template = CountModel::new(config.clone())?;
    let mut lines = Cursor::new(&body[split + marker.len()..]).lines();
    let mut tensors = Vec::new();
    for (name, expected) in template.named_parameters() {
        let line = match lines.next() {
            Some(Ok(l)) => l,
            _ => return Err(Error::format(&name, "truncated: section missing")),
        };
        if line.trim() != format!("tensor {name}") {
            return Err(Error::format(&name, format!("expected section 'tensor {name}', found {line:?}")));
        }
        let t = read_tensor(&mut lines, &name)?;
        if t.shape() != expected.shape() {
            return Err(Error::format(
                &name,
                format!("shape {:?} does not match config shape {:?}", t.shape(), expected.shape()),
            ));
        }
        tensors.push(t);
    }
    if let Some(Ok(extra)) = lines.find(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty())) {
        return Err(Error::format("trailer", format!("unexpected content {extra:?}")));
    }

    let bias = tensors.pop().expect("bias").item();
    let weight = tensors.pop().expect("weight");
    let mut it = tensors.into_iter();
    let mut convs = Vec::new();
    while let (Some(kernel), Some(bias)) = (it.next(), it.next()) {
        convs.push(ConvParams { kernel, bias });
    }
    CountModel::from_parts(config, convs, weight, bias)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CountModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CountingNet, Head};
    use crate::tensor::Tensor;

    fn bytes(model: &CountModel) -> String {
        let mut buf = Vec::new();
        write_model(&mut buf, model).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn round_trip_default_model() {
        let m = CountModel::new(ModelConfig {
            seed: 11,
            ..ModelConfig::default()
        })
        .unwrap();
        let back = read_model(&bytes(&m)).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.parameters().iter().zip(back.parameters()) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn gap_checkpoint_predicts_identically() {
        let mut m = CountModel::new(ModelConfig {
            head: Head::Gap,
            seed: 5,
            ..ModelConfig::default()
        })
        .unwrap();
        m.set_linear(m.weight().data().iter().map(|w| w * 3.7).collect(), 0.123).unwrap();
        let img = Tensor::new(
            vec![1, 40, 24],
            (0..960).map(|i| ((i * 37) % 101) as f64 / 101.0).collect(),
        )
        .unwrap();
        let before = m.predict(&img).unwrap();
        let after = read_model(&bytes(&m)).unwrap().predict(&img).unwrap();
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn truncated_tensor_is_format_error() {
        let m = CountModel::new(ModelConfig::default()).unwrap();
        let text = bytes(&m);
        let cut = &text[..text.len() * 2 / 3];
        match read_model(cut) {
            Err(Error::Format { field, .. }) => assert!(field.starts_with("conv")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn shape_mismatch_names_field() {
        let m = CountModel::new(ModelConfig::default()).unwrap();
        let text = bytes(&m).replacen("out_channels = 16", "out_channels = 8", 1);
        match read_model(&text) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "conv0.kernel"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn missing_magic_rejected() {
        assert!(matches!(read_model("hello"), Err(Error::Format { .. })));
    }
}
