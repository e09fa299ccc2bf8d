//! Line-oriented model file. Floats are written with 17 significant digits,
//! so a read/write cycle reproduces the file byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{Normalizer, NormalizerMode};

use super::network::MlnnModel;
use super::MlafParams;

pub const MODEL_MAGIC: &str = "RIQMLNN 1";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(out: &mut String, values: &[f64]) {
    let line: Vec<String> = values.iter().map(|&v| num(v)).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

pub fn model_to_string(m: &MlnnModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC}");
    let _ = writeln!(out, "layers {} {} 1", m.input_dim, m.hidden_dim);
    let _ = writeln!(out, "mlaf beta={} c={} n={}", num(m.mlaf.beta), num(m.mlaf.c), m.mlaf.n);
    let _ = writeln!(out, "categories {}", m.categories.join(" "));
    let _ = writeln!(out, "normalizer {}", m.normalizer.mode.name());
    row(&mut out, &m.normalizer.mean);
    row(&mut out, &m.normalizer.std_dev);
    out.push_str("Wh\n");
    for r in m.w_hidden.chunks(m.input_dim.max(1)) {
        row(&mut out, r);
    }
    out.push_str("bh\n");
    row(&mut out, &m.b_hidden);
    out.push_str("Wo\n");
    row(&mut out, &m.w_out);
    out.push_str("bo\n");
    row(&mut out, &[m.b_out]);
    out
}

pub fn write_model(m: &MlnnModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_string(m))?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<MlnnModel> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        std::io::ErrorKind::InvalidData => Error::format("model file is not UTF-8"),
        _ => Error::Io(e),
    })?;
    parse_model(&text)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::format(format!("unexpected end of file, expected {what}")))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let (n, l) = self.next(kw)?;
        if l != kw {
            return Err(Error::format(format!("line {n}: expected {kw:?}, got {l:?}")));
        }
        Ok(())
    }

    fn floats(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let (n, l) = self.next(what)?;
        let values = if l.is_empty() {
            Vec::new()
        } else {
            l.split(' ')
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::format(format!("line {n}: {e}")))?
        };
        if values.len() != count {
            return Err(Error::format(format!(
                "line {n}: expected {count} values for {what}, got {}",
                values.len()
            )));
        }
        Ok(values)
    }
}

fn field<'a>(token: Option<&'a str>, key: &str, n: usize) -> Result<&'a str> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| Error::format(format!("line {n}: missing {key}=")))
}

pub fn parse_model(text: &str) -> Result<MlnnModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, magic) = lines.next("magic")?;
    if magic != MODEL_MAGIC {
        return Err(Error::format(format!("bad magic {magic:?}, expected {MODEL_MAGIC:?}")));
    }

    let (n, l) = lines.next("layers")?;
    let sizes: Vec<usize> = l
        .strip_prefix("layers ")
        .map(|s| s.split(' ').map(str::parse).collect::<std::result::Result<_, _>>())
        .and_then(|r| r.ok())
        .ok_or_else(|| Error::format(format!("line {n}: malformed layers line")))?;
    let [input_dim, hidden_dim, 1] = sizes[..] else {
        return Err(Error::format(format!("line {n}: expected `layers <in> <hidden> 1`")));
    };

    let (n, l) = lines.next("mlaf")?;
    let mut parts = l.strip_prefix("mlaf ").unwrap_or("").split(' ');
    let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::format(format!("line {n}: {e}")));
    let beta = parse_f(field(parts.next(), "beta", n)?)?;
    let c = parse_f(field(parts.next(), "c", n)?)?;
    let levels = field(parts.next(), "n", n)?
        .parse::<usize>()
        .map_err(|e| Error::format(format!("line {n}: {e}")))?;
    let mlaf = MlafParams { beta, c, n: levels };
    mlaf.validate().map_err(|e| Error::format(format!("line {n}: {e}")))?;

    let (n, l) = lines.next("categories")?;
    let categories: Vec<String> = l
        .strip_prefix("categories ")
        .ok_or_else(|| Error::format(format!("line {n}: malformed categories line")))?
        .split(' ')
        .map(str::to_string)
        .collect();
    if categories.len() != levels || categories.iter().any(String::is_empty) {
        return Err(Error::format(format!("line {n}: expected {levels} category names")));
    }

    let (n, l) = lines.next("normalizer")?;
    let mode = l
        .strip_prefix("normalizer ")
        .and_then(NormalizerMode::parse)
        .ok_or_else(|| Error::format(format!("line {n}: malformed normalizer line")))?;
    let mean = lines.floats(input_dim, "normalizer mean")?;
    let std_dev = lines.floats(input_dim, "normalizer std")?;

    lines.keyword("Wh")?;
    let mut w_hidden = Vec::with_capacity(input_dim * hidden_dim);
    for _ in 0..hidden_dim {
        w_hidden.extend(lines.floats(input_dim, "Wh row")?);
    }
    lines.keyword("bh")?;
    let b_hidden = lines.floats(hidden_dim, "bh")?;
    lines.keyword("Wo")?;
    let w_out = lines.floats(hidden_dim, "Wo")?;
    lines.keyword("bo")?;
    let b_out = lines.floats(1, "bo")?[0];
    if let Some((n, _)) = lines.inner.next() {
        return Err(Error::format(format!("line {}: trailing content", n + 1)));
    }

    Ok(MlnnModel {
        input_dim,
        hidden_dim,
        w_hidden,
        b_hidden,
        w_out,
        b_out,
        mlaf,
        normalizer: Normalizer { mode, mean, std_dev },
        categories,
    })
}
