//! Plain-text model checkpoints.
//!
//! ```text
//! GSDE1
//! dims <input> <hidden> <bottleneck> <classes> <disc_hidden> <extractor_depth>
//! bottlenecks <k>
//! init_seed <seed>
//! layer <name> <out> <in>
//! <out lines of `in` weights>
//! <one line of `out` biases>
//! ...
//! ```
//!
//! Layers appear in the order of `GsdeModel::named_layers`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use gsde_core::diffcore::{LinearLayer, Matrix};
use gsde_core::model::{Dims, GsdeModel};

use crate::dataset_io::fmt_f64;
use crate::error::{GsdeError, Result};

const MAGIC: &str = "GSDE1";

pub fn write_checkpoint<W: Write>(model: &GsdeModel, mut out: W) -> Result<()> {
    let io = |e| GsdeError::io("<checkpoint>", e);
    let d = model.dims();
    writeln!(out, "{MAGIC}").map_err(io)?;
    writeln!(out, "dims {} {} {} {} {} {}", d.input, d.hidden, d.bottleneck, d.classes, d.disc_hidden, d.extractor_depth)
        .map_err(io)?;
    writeln!(out, "bottlenecks {}", model.num_bottlenecks()).map_err(io)?;
    writeln!(out, "init_seed {}", model.init_seed()).map_err(io)?;
    for (name, layer) in model.named_layers() {
        writeln!(out, "layer {name} {} {}", layer.out_dim(), layer.in_dim()).map_err(io)?;
        for row in layer.weight.row_iter() {
            let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            writeln!(out, "{}", line.join(" ")).map_err(io)?;
        }
        let bias: Vec<String> = layer.bias.as_slice().iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", bias.join(" ")).map_err(io)?;
    }
    Ok(())
}

pub fn save_checkpoint(model: &GsdeModel, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| GsdeError::io(path, e))?;
    write_checkpoint(model, std::io::BufWriter::new(f))
}

struct Lines<'a, R> {
    inner: std::iter::Enumerate<std::io::Lines<BufReader<R>>>,
    origin: &'a Path,
    line: usize,
}

impl<R: Read> Lines<'_, R> {
    fn next_line(&mut self) -> Result<String> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                l.map_err(|e| GsdeError::io(self.origin, e))
            }
            None => Err(GsdeError::parse(self.origin, self.line + 1, "unexpected end of checkpoint")),
        }
    }

    fn err(&self, msg: impl Into<String>) -> GsdeError {
        GsdeError::parse(self.origin, self.line, msg)
    }

    /// A line `<keyword> <fields…>`, returning the fields.
    fn keyed(&mut self, keyword: &str) -> Result<Vec<String>> {
        let l = self.next_line()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`")));
        }
        Ok(parts.map(str::to_string).collect())
    }

    fn numbers<T: std::str::FromStr>(&mut self, count: usize) -> Result<Vec<T>> {
        let l = self.next_line()?;
        let v: Vec<T> = l.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| self.err("bad number"))?;
        if v.len() != count {
            return Err(self.err(format!("expected {count} values, found {}", v.len())));
        }
        Ok(v)
    }
}

pub fn read_checkpoint<R: Read>(input: R, origin: &Path) -> Result<GsdeModel> {
    let mut lines = Lines { inner: BufReader::new(input).lines().enumerate(), origin, line: 0 };
    if lines.next_line()? != MAGIC {
        return Err(lines.err("not a GSDE1 checkpoint"));
    }
    let parse_all = |lines: &Lines<'_, R>, v: Vec<String>, n: usize| -> Result<Vec<u64>> {
        let parsed: Vec<u64> = v.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(|_| lines.err("bad integer"))?;
        if parsed.len() != n {
            return Err(lines.err(format!("expected {n} values")));
        }
        Ok(parsed)
    };
    let f = lines.keyed("dims")?;
    let d = parse_all(&lines, f, 6)?;
    let dims = Dims {
        input: d[0] as usize,
        hidden: d[1] as usize,
        bottleneck: d[2] as usize,
        classes: d[3] as usize,
        disc_hidden: d[4] as usize,
        extractor_depth: d[5] as usize,
    };
    let f = lines.keyed("bottlenecks")?;
    let k = parse_all(&lines, f, 1)?[0] as usize;
    let f = lines.keyed("init_seed")?;
    let init_seed = parse_all(&lines, f, 1)?[0];

    let layer_count = dims.extractor_depth + k + 1 + 2;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let f = lines.keyed("layer")?;
        if f.len() != 3 {
            return Err(lines.err("layer line needs name, out, in"));
        }
        let (out, inp): (usize, usize) =
            (f[1].parse().map_err(|_| lines.err("bad out dim"))?, f[2].parse().map_err(|_| lines.err("bad in dim"))?);
        let mut w = Vec::with_capacity(out * inp);
        for _ in 0..out {
            w.extend(lines.numbers::<f64>(inp)?);
        }
        let b = lines.numbers::<f64>(out)?;
        let layer = LinearLayer::from_parts(Matrix::from_vec(out, inp, w)?, Matrix::from_vec(out, 1, b)?);
        layers.push(layer);
    }
    let mut it = layers.into_iter();
    let extractor: Vec<LinearLayer> = it.by_ref().take(dims.extractor_depth).collect();
    let bottlenecks: Vec<LinearLayer> = it.by_ref().take(k).collect();
    let classifier = it.next().expect("counted");
    let discriminator: Vec<LinearLayer> = it.collect();
    Ok(GsdeModel::from_parts(dims, extractor, bottlenecks, classifier, discriminator, init_seed)?)
}

pub fn load_checkpoint(path: &Path) -> Result<GsdeModel> {
    let f = std::fs::File::open(path).map_err(|e| GsdeError::io(path, e))?;
    read_checkpoint(f, path)
}
