//! Versioned plain-text checkpoints.
//!
//! A header of whitespace-separated records (format version, loss,
//! temperature, encoder shape, label names) is followed by named numeric
//! blocks. Every number is stored as the 16-digit hex of its IEEE-754 bits,
//! so a save/load cycle is bit-exact on every platform.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use spcl_core::curriculum::ClassCenters;
use spcl_core::encoder::{Encoder, ToyEncoder};
use spcl_core::numerics::Matrix;
use spcl_core::trainer::{LinearProbe, TrainedModel};

pub const MAGIC: &str = "spcl-checkpoint";
pub const VERSION: u32 = 1;
const VALUES_PER_LINE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: TrainedModel,
    /// Label names in id order; empty for numeric labels.
    pub labels: Vec<String>,
}

fn hex(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn unhex(s: &str) -> Result<f64> {
    ensure!(s.len() == 16, "bad numeric token {s:?}");
    let bits = u64::from_str_radix(s, 16).map_err(|e| anyhow!("bad numeric token {s:?}: {e}"))?;
    Ok(f64::from_bits(bits))
}

fn write_block(out: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(out, "block {name} {}", values.len());
    for chunk in values.chunks(VALUES_PER_LINE) {
        let line: Vec<String> = chunk.iter().map(|&x| hex(x)).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} v{VERSION}");
        let _ = writeln!(out, "loss {}", m.loss);
        let _ = writeln!(out, "temperature {}", hex(m.temperature));
        let _ = writeln!(
            out,
            "encoder {} {} {}",
            m.encoder.input_dim(),
            m.encoder.hidden_dim(),
            m.encoder.output_dim()
        );
        let _ = writeln!(out, "labels {} {}", self.labels.len(), self.labels.join(" "));
        for (name, block) in m.encoder.param_blocks() {
            write_block(&mut out, name, block);
        }
        let _ = writeln!(out, "centers {}", m.centers.len());
        for (label, center) in m.centers.iter() {
            write_block(&mut out, &format!("center:{label}:{}", m.centers.count(label)), center);
        }
        match &m.probe {
            Some(p) => {
                let _ = writeln!(out, "probe {} {}", p.classes(), p.dim());
                write_block(&mut out, "head_w", p.w.as_slice());
                write_block(&mut out, "head_b", &p.b);
            }
            None => out.push_str("probe none\n"),
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut p = Parser {
            tokens: text.split_whitespace(),
        };
        let magic = p.word()?;
        let version = p.word()?;
        ensure!(magic == MAGIC, "not a checkpoint (header {magic:?})");
        ensure!(
            version == format!("v{VERSION}"),
            "unsupported checkpoint version {version:?} (this build reads v{VERSION})"
        );
        p.expect("loss")?;
        let loss = p.word()?.parse()?;
        p.expect("temperature")?;
        let temperature = unhex(p.word()?)?;
        p.expect("encoder")?;
        let (input, hidden, output) = (p.num()?, p.num()?, p.num()?);
        p.expect("labels")?;
        let n_labels = p.num()?;
        let labels = (0..n_labels).map(|_| p.word().map(String::from)).collect::<Result<Vec<_>>>()?;

        let blocks = ["w1", "b1", "w2", "b2"]
            .iter()
            .map(|name| p.block(name))
            .collect::<Result<Vec<_>>>()?;
        let encoder = ToyEncoder::from_blocks(input, hidden, output, blocks)?;

        p.expect("centers")?;
        let n_centers = p.num()?;
        let mut centers = BTreeMap::new();
        let mut counts = BTreeMap::new();
        for _ in 0..n_centers {
            p.expect("block")?;
            let tag = p.word()?;
            let mut parts = tag.split(':');
            ensure!(parts.next() == Some("center"), "expected a center block, got {tag:?}");
            let label: usize = parts.next().unwrap_or("").parse().with_context(|| format!("center tag {tag:?}"))?;
            let count: usize = parts.next().unwrap_or("").parse().with_context(|| format!("center tag {tag:?}"))?;
            let values = p.values()?;
            ensure!(values.len() == output, "center {label} has {} values, expected {output}", values.len());
            centers.insert(label, values);
            counts.insert(label, count);
        }

        p.expect("probe")?;
        let probe = match p.word()? {
            "none" => None,
            classes => {
                let classes: usize = classes.parse().context("probe class count")?;
                let dim = p.num()?;
                let w = Matrix::from_vec(classes, dim, p.block("head_w")?)?;
                let b = p.block("head_b")?;
                ensure!(b.len() == classes, "probe bias has {} values, expected {classes}", b.len());
                Some(LinearProbe { w, b })
            }
        };
        p.expect("end")?;
        if let Some(extra) = p.tokens.next() {
            bail!("trailing data after end: {extra:?}");
        }
        Ok(Checkpoint {
            model: TrainedModel {
                encoder,
                centers: ClassCenters::from_parts(centers, counts),
                probe,
                loss,
                temperature,
            },
            labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).with_context(|| format!("writing checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
        Self::from_text(&text).with_context(|| format!("checkpoint {}", path.display()))
    }
}

struct Parser<'a> {
    tokens: std::str::SplitWhitespace<'a>,
}

impl<'a> Parser<'a> {
    fn word(&mut self) -> Result<&'a str> {
        self.tokens.next().ok_or_else(|| anyhow!("truncated checkpoint"))
    }

    fn num(&mut self) -> Result<usize> {
        let w = self.word()?;
        w.parse().map_err(|_| anyhow!("expected a count, got {w:?}"))
    }

    fn expect(&mut self, keyword: &str) -> Result<()> {
        let w = self.word()?;
        ensure!(w == keyword, "expected {keyword:?}, got {w:?}");
        Ok(())
    }

    /// Length-prefixed values after an already consumed `block <name>`.
    fn values(&mut self) -> Result<Vec<f64>> {
        let n = self.num()?;
        (0..n).map(|_| unhex(self.word()?)).collect()
    }

    fn block(&mut self, name: &str) -> Result<Vec<f64>> {
        self.expect("block")?;
        self.expect(name)?;
        self.values()
    }
}
