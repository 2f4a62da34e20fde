//! Text formats: network files, state and energy CSVs, solve histories, legacy VTK.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use beamnet::dynamics::EnergyEntry;
use beamnet::krylov::SolveReport;
use beamnet::network::{Edge, Mat3, Network, Node, Vec3, NODE_DOFS};
use beamnet::fem::State;
use beamnet::{Error, Result};

pub const NETWORK_HEADER: &str = "BEAMNET 1";

/// 17 significant digits; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn push_sym(out: &mut String, m: &Mat3) {
    for i in 0..3 {
        for j in i..3 {
            out.push(' ');
            out.push_str(&fmt_f64(m[(i, j)]));
        }
    }
}

pub fn network_to_string(net: &Network) -> String {
    let mut s = String::new();
    writeln!(s, "{NETWORK_HEADER}").unwrap();
    writeln!(s, "C {}", fmt_f64(net.c())).unwrap();
    writeln!(s, "NODES {}", net.node_count()).unwrap();
    for n in net.nodes() {
        let mask: String = n.constrained.iter().map(|&c| if c { '1' } else { '0' }).collect();
        write!(s, "{} {} {} {} {}", n.id, fmt_f64(n.position.x), fmt_f64(n.position.y), fmt_f64(n.position.z), mask).unwrap();
        for k in 0..NODE_DOFS {
            if n.constrained[k] {
                write!(s, " {}", fmt_f64(n.prescribed[k])).unwrap();
            }
        }
        s.push('\n');
    }
    writeln!(s, "EDGES {}", net.edge_count()).unwrap();
    for e in net.edges() {
        write!(s, "{} {}", e.endpoints[0], e.endpoints[1]).unwrap();
        push_sym(&mut s, &e.b);
        push_sym(&mut s, &e.c);
        push_sym(&mut s, &e.d);
        s.push('\n');
    }
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok((i + 1, line.split_whitespace().collect()));
        }
        Err(Error::Parse {
            line: 0,
            message: "unexpected end of file".into(),
        })
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| perr(line, format!("cannot parse '{tok}'")))
}

fn section(lines: &mut Lines, key: &str) -> Result<(usize, usize)> {
    let (ln, toks) = lines.next()?;
    match toks.as_slice() {
        [k, n] if *k == key => Ok((ln, num(ln, n)?)),
        _ => Err(perr(ln, format!("expected '{key} <count>'"))),
    }
}

fn read_sym(ln: usize, toks: &[&str]) -> Result<Mat3> {
    let v: Vec<f64> = toks.iter().map(|t| num(ln, t)).collect::<Result<_>>()?;
    Ok(Mat3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5]))
}

/// Parses the network format. Node and edge validation is done by [`Network::new`].
pub fn network_from_str(text: &str) -> Result<Network> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, head) = lines.next()?;
    if head.join(" ") != NETWORK_HEADER {
        return Err(perr(ln, format!("expected header '{NETWORK_HEADER}'")));
    }
    let (ln, toks) = lines.next()?;
    let c = match toks.as_slice() {
        ["C", v] => num::<f64>(ln, v)?,
        _ => return Err(perr(ln, "expected 'C <value>'")),
    };
    let (_, n_nodes) = section(&mut lines, "NODES")?;
    let mut nodes = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, toks) = lines.next()?;
        if toks.len() < 5 {
            return Err(perr(ln, "node line needs 'id x y z mask6'"));
        }
        let mask = toks[4];
        if mask.len() != NODE_DOFS || !mask.chars().all(|ch| ch == '0' || ch == '1') {
            return Err(perr(ln, format!("bad constraint mask '{mask}'")));
        }
        let mut node = Node::new(
            num(ln, toks[0])?,
            Vec3::new(num(ln, toks[1])?, num(ln, toks[2])?, num(ln, toks[3])?),
        );
        let mut vals = toks[5..].iter();
        for (k, ch) in mask.chars().enumerate() {
            if ch == '1' {
                node.constrained[k] = true;
                let v = vals.next().ok_or_else(|| perr(ln, "missing prescribed value"))?;
                node.prescribed[k] = num(ln, v)?;
            }
        }
        if vals.next().is_some() {
            return Err(perr(ln, "more prescribed values than constrained components"));
        }
        nodes.push(node);
    }
    let (_, n_edges) = section(&mut lines, "EDGES")?;
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let (ln, toks) = lines.next()?;
        if toks.len() != 20 {
            return Err(perr(ln, format!("edge line needs 20 fields, found {}", toks.len())));
        }
        edges.push(Edge::new(
            num(ln, toks[0])?,
            num(ln, toks[1])?,
            read_sym(ln, &toks[2..8])?,
            read_sym(ln, &toks[8..14])?,
            read_sym(ln, &toks[14..20])?,
        ));
    }
    Network::new(nodes, edges, c)
}

pub fn write_network(path: &Path, net: &Network) -> Result<()> {
    Ok(fs::write(path, network_to_string(net))?)
}

pub fn read_network(path: &Path) -> Result<Network> {
    network_from_str(&fs::read_to_string(path)?)
}

pub const STATE_HEADER: &str = "node,x,y,z,ux,uy,uz,rx,ry,rz";

pub fn state_to_csv(net: &Network, s: &State) -> String {
    let mut out = String::from(STATE_HEADER);
    out.push('\n');
    for (i, n) in net.nodes().iter().enumerate() {
        let p = n.position;
        let vals = [p.x, p.y, p.z, s.u[i].x, s.u[i].y, s.u[i].z, s.r[i].x, s.r[i].y, s.r[i].z];
        out.push_str(&i.to_string());
        for v in vals {
            out.push(',');
            out.push_str(&fmt_f64(v));
        }
        out.push('\n');
    }
    out
}

/// Reads a state CSV back; positions are ignored.
pub fn state_from_csv(text: &str) -> Result<State> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == STATE_HEADER => {}
        _ => return Err(perr(1, format!("expected header '{STATE_HEADER}'"))),
    }
    let mut s = State::zeros(0);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line.split(',').skip(1).map(|t| num(i + 1, t.trim())).collect::<Result<_>>()?;
        if v.len() != 9 {
            return Err(perr(i + 1, "state row needs 10 fields"));
        }
        s.u.push(Vec3::new(v[3], v[4], v[5]));
        s.r.push(Vec3::new(v[6], v[7], v[8]));
    }
    Ok(s)
}

pub fn energy_to_csv(entries: &[EnergyEntry]) -> String {
    let mut out = String::from("n,kinetic,potential,correction,total\n");
    for e in entries {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.n,
            fmt_f64(e.kinetic),
            fmt_f64(e.potential),
            fmt_f64(e.correction),
            fmt_f64(e.total)
        )
        .unwrap();
    }
    out
}

/// Rows `iter,relres,energy_err`; `energy_err` is empty without a reference solution.
pub fn solve_report_to_csv(rep: &SolveReport) -> String {
    let mut out = String::from("iter,relres,energy_err\n");
    for (k, r) in rep.residual_history.iter().enumerate() {
        let e = rep
            .energy_error_history
            .as_ref()
            .and_then(|h| h.get(k))
            .map(|&v| fmt_f64(v))
            .unwrap_or_default();
        writeln!(out, "{k},{},{e}", fmt_f64(*r)).unwrap();
    }
    out
}

/// Legacy VTK polydata with one line cell per edge and displacement/rotation point data.
pub fn state_to_vtk(net: &Network, s: &State) -> String {
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 3.0\nbeam network\nASCII\nDATASET POLYDATA").unwrap();
    writeln!(out, "POINTS {} double", net.node_count()).unwrap();
    for n in net.nodes() {
        writeln!(out, "{} {} {}", n.position.x, n.position.y, n.position.z).unwrap();
    }
    writeln!(out, "LINES {} {}", net.edge_count(), 3 * net.edge_count()).unwrap();
    for e in net.edges() {
        writeln!(out, "2 {} {}", e.endpoints[0], e.endpoints[1]).unwrap();
    }
    writeln!(out, "POINT_DATA {}", net.node_count()).unwrap();
    for (name, field) in [("displacement", &s.u), ("rotation", &s.r)] {
        writeln!(out, "VECTORS {name} double").unwrap();
        for v in field.iter() {
            writeln!(out, "{} {} {}", v.x, v.y, v.z).unwrap();
        }
    }
    out
}

/// Plain CSV table writer used by the experiment drivers.
pub fn table_to_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
