//! Plain-text mesh format.
//!
//! ```text
//! nodes <N>
//! <x> <y>                 (N lines)
//! triangles <T>
//! <i> <j> <k>             (T lines)
//! boundary_edges <B>
//! <i> <j>                 (B lines)
//! scalar <name>
//! <v>                     (N lines)
//! tensor <name>
//! <a11> <a12> <a22>       (N lines)
//! ```
//!
//! Any number of `scalar`/`tensor` sections may follow the boundary edges.
//! Reals are written with 17 significant digits so a round trip is exact.
//! Lines starting with `#` are ignored.

use std::io::{BufRead, Write};

use nalgebra::Matrix2;

use super::fields::{ScalarField, TensorField};
use super::mesh::{Mesh, Point2};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum NamedField {
    Scalar(String, ScalarField),
    Tensor(String, TensorField),
}

pub fn write_mesh<W: Write>(w: &mut W, mesh: &Mesh, fields: &[NamedField]) -> Result<()> {
    writeln!(w, "nodes {}", mesh.n_nodes())?;
    for p in mesh.nodes() {
        writeln!(w, "{:.17e} {:.17e}", p.x, p.y)?;
    }
    writeln!(w, "triangles {}", mesh.n_triangles())?;
    for t in mesh.triangles() {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "boundary_edges {}", mesh.boundary_edges().len())?;
    for e in mesh.boundary_edges() {
        writeln!(w, "{} {}", e[0], e[1])?;
    }
    for f in fields {
        match f {
            NamedField::Scalar(name, s) => {
                writeln!(w, "scalar {name}")?;
                for v in s.values() {
                    writeln!(w, "{v:.17e}")?;
                }
            }
            NamedField::Tensor(name, t) => {
                writeln!(w, "tensor {name}")?;
                for m in t.values() {
                    writeln!(w, "{:.17e} {:.17e} {:.17e}", m[(0, 0)], m[(0, 1)], m[(1, 1)])?;
                }
            }
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<Option<String>> {
        for line in self.inner.by_ref() {
            self.number += 1;
            let line = line?;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok(Some(t.to_string()));
            }
        }
        Ok(None)
    }

    fn expect(&mut self) -> Result<String> {
        self.next()?
            .ok_or_else(|| Error::Parse(format!("unexpected end of input after line {}", self.number)))
    }

    fn numbers<T: std::str::FromStr>(&mut self, count: usize) -> Result<Vec<T>> {
        let line = self.expect()?;
        let vals: Vec<T> = line
            .split_whitespace()
            .map(|s| s.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("line {}: cannot parse '{line}'", self.number)))?;
        if vals.len() != count {
            return Err(Error::Parse(format!(
                "line {}: expected {count} values, found {}",
                self.number,
                vals.len()
            )));
        }
        Ok(vals)
    }

    fn header(&mut self, key: &str) -> Result<usize> {
        let line = self.expect()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::Parse(format!("line {}: expected '{key} <count>'", self.number)));
        }
        it.next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("line {}: bad count", self.number)))
    }
}

/// Reads a mesh (invariants are re-checked) and any trailing fields.
/// `h_target` is not stored in the format; the longest edge is used.
pub fn read_mesh<R: BufRead>(r: R) -> Result<(Mesh, Vec<NamedField>)> {
    let mut lines = Lines {
        inner: r.lines(),
        number: 0,
    };
    let n = lines.header("nodes")?;
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let v: Vec<f64> = lines.numbers(2)?;
        nodes.push(Point2::new(v[0], v[1]));
    }
    let nt = lines.header("triangles")?;
    let mut tris = Vec::with_capacity(nt);
    for _ in 0..nt {
        let v: Vec<usize> = lines.numbers(3)?;
        tris.push([v[0], v[1], v[2]]);
    }
    let nb = lines.header("boundary_edges")?;
    let mut edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let v: Vec<usize> = lines.numbers(2)?;
        edges.push([v[0], v[1]]);
    }
    let mut mesh = Mesh::from_parts(nodes, tris, edges, 1.0)?;
    mesh = Mesh::from_parts(
        mesh.nodes().to_vec(),
        mesh.triangles().to_vec(),
        mesh.boundary_edges().to_vec(),
        mesh.max_edge_length(),
    )?;

    let mut fields = Vec::new();
    while let Some(line) = lines.next()? {
        let mut it = line.splitn(2, char::is_whitespace);
        let kind = it.next().unwrap_or("");
        let name = it.next().unwrap_or("").trim().to_string();
        match kind {
            "scalar" => {
                let mut vals = Vec::with_capacity(n);
                for _ in 0..n {
                    vals.push(lines.numbers::<f64>(1)?[0]);
                }
                fields.push(NamedField::Scalar(name, ScalarField::from_values(vals)));
            }
            "tensor" => {
                let mut vals = Vec::with_capacity(n);
                for _ in 0..n {
                    let v: Vec<f64> = lines.numbers(3)?;
                    vals.push(Matrix2::new(v[0], v[1], v[1], v[2]));
                }
                fields.push(NamedField::Tensor(name, TensorField::from_values(vals)));
            }
            other => {
                return Err(Error::Parse(format!(
                    "line {}: unknown section '{other}'",
                    lines.number
                )))
            }
        }
    }
    Ok((mesh, fields))
}
