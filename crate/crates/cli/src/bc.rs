//! Boundary-condition expressions.
//!
//! One clause per line or `;`-separated:
//!
//! ```text
//! slab axis=x at=max fix=all
//! slab axis=x min=-0.1 max=0.1 fix=uz value=85.74 release
//! ```
//!
//! `at=min|max` selects the nodes on that bounding-box face; `min=`/`max=` give an explicit
//! coordinate range (either may be omitted). `fix` takes a comma list of `ux,uy,uz,rx,ry,rz`
//! or the groups `u`, `r`, `all`; `value` is one number for every fixed component or one per
//! component. `release` marks a clause that only holds for the static solve preceding a wave
//! run.

use std::str::FromStr;

use beamnet::network::{Network, COMPONENTS, NODE_DOFS};
use beamnet::schwarz::Face;
use beamnet::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Range {
    Face(bool),
    Interval(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slab {
    pub axis: usize,
    range: Range,
    pub fix: [bool; NODE_DOFS],
    pub value: [f64; NODE_DOFS],
    pub release: bool,
}

impl Slab {
    fn tol(net: &Network) -> f64 {
        let l = net.bounding_box();
        1e-9 * (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]).sqrt().max(1.0)
    }

    /// Closed coordinate interval selected on `net`.
    pub fn interval(&self, net: &Network) -> (f64, f64) {
        let tol = Self::tol(net);
        match self.range {
            Range::Face(false) => (-tol, tol),
            Range::Face(true) => {
                let l = net.bounding_box()[self.axis];
                (l - tol, l + tol)
            }
            Range::Interval(a, b) => (a - tol, b + tol),
        }
    }

    pub fn selects(&self, net: &Network, node: usize) -> bool {
        let (a, b) = self.interval(net);
        let x = net.node(node).position[self.axis];
        a <= x && x <= b
    }

    /// Box faces covered by this clause when it clamps every component.
    fn faces(&self, net: &Network) -> Vec<Face> {
        if !self.fix.iter().all(|&f| f) || !(0..net.node_count()).any(|i| self.selects(net, i)) {
            return Vec::new();
        }
        let (a, b) = self.interval(net);
        let l = net.bounding_box()[self.axis];
        Face::ALL
            .into_iter()
            .filter(|f| f.axis() == self.axis)
            .filter(|f| {
                let x = if f.is_max() { l } else { 0.0 };
                a <= x && x <= b
            })
            .collect()
    }
}

fn components(list: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for name in list.split(',') {
        match name {
            "all" => out.extend(0..6),
            "u" => out.extend(0..3),
            "r" => out.extend(3..6),
            c => out.push(
                COMPONENTS
                    .iter()
                    .position(|&k| k == c)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown component '{c}'")))?,
            ),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn number(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .ok()
        .filter(|x: &f64| x.is_finite())
        .ok_or_else(|| Error::InvalidArgument(format!("{key}: cannot parse '{v}'")))
}

impl FromStr for Slab {
    type Err = Error;

    fn from_str(clause: &str) -> Result<Self> {
        let mut toks = clause.split_whitespace();
        if toks.next() != Some("slab") {
            return Err(Error::InvalidArgument(format!("clause must start with 'slab': '{clause}'")));
        }
        let (mut axis, mut at, mut min, mut max) = (None, None, None, None);
        let mut fix = None;
        let mut values: Option<Vec<f64>> = None;
        let mut release = false;
        for tok in toks {
            if tok == "release" {
                release = true;
                continue;
            }
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value, found '{tok}'")))?;
            match k {
                "axis" => {
                    axis = Some(match v {
                        "x" => 0,
                        "y" => 1,
                        "z" => 2,
                        _ => return Err(Error::InvalidArgument(format!("axis must be x, y or z, found '{v}'"))),
                    })
                }
                "at" => {
                    at = Some(match v {
                        "min" => false,
                        "max" => true,
                        _ => return Err(Error::InvalidArgument(format!("at must be min or max, found '{v}'"))),
                    })
                }
                "min" => min = Some(number(k, v)?),
                "max" => max = Some(number(k, v)?),
                "fix" => fix = Some(components(v)?),
                "value" => values = Some(v.split(',').map(|x| number(k, x)).collect::<Result<_>>()?),
                _ => return Err(Error::InvalidArgument(format!("unknown key '{k}'"))),
            }
        }
        let axis = axis.ok_or_else(|| Error::InvalidArgument("slab needs axis=".into()))?;
        let range = match (at, min, max) {
            (Some(f), None, None) => Range::Face(f),
            (None, a, b) if a.is_some() || b.is_some() => {
                let (a, b) = (a.unwrap_or(f64::NEG_INFINITY), b.unwrap_or(f64::INFINITY));
                if a > b {
                    return Err(Error::InvalidArgument(format!("empty slab range [{a}, {b}]")));
                }
                Range::Interval(a, b)
            }
            _ => return Err(Error::InvalidArgument("slab needs either at= or min=/max=".into())),
        };
        let comps = fix.ok_or_else(|| Error::InvalidArgument("slab needs fix=".into()))?;
        let values = values.unwrap_or_else(|| vec![0.0]);
        if values.len() != 1 && values.len() != comps.len() {
            return Err(Error::InvalidArgument(format!(
                "value has {} entries for {} fixed components",
                values.len(),
                comps.len()
            )));
        }
        let mut slab = Slab {
            axis,
            range,
            fix: [false; NODE_DOFS],
            value: [0.0; NODE_DOFS],
            release,
        };
        for (j, &c) in comps.iter().enumerate() {
            slab.fix[c] = true;
            slab.value[c] = if values.len() == 1 { values[0] } else { values[j] };
        }
        Ok(slab)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BcSpec {
    pub slabs: Vec<Slab>,
}

impl FromStr for BcSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let slabs = s
            .split(['\n', ';'])
            .map(|c| c.split('#').next().unwrap_or("").trim())
            .filter(|c| !c.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Slab>>>()?;
        Ok(Self { slabs })
    }
}

impl BcSpec {
    fn active(&self, with_released: bool) -> impl Iterator<Item = &Slab> {
        self.slabs.iter().filter(move |s| with_released || !s.release)
    }

    /// Overlays the clauses on the constraints already stored in `net`; later clauses win.
    pub fn apply(&self, net: &Network, with_released: bool) -> Network {
        let slabs: Vec<&Slab> = self.active(with_released).collect();
        let sel: Vec<Vec<bool>> = slabs
            .iter()
            .map(|s| (0..net.node_count()).map(|i| s.selects(net, i)).collect())
            .collect();
        let mut i = 0;
        net.map_constraints(|n| {
            let (mut mask, mut vals) = (n.constrained, n.prescribed);
            for (s, sel) in slabs.iter().zip(&sel) {
                if sel[i] {
                    for k in 0..NODE_DOFS {
                        if s.fix[k] {
                            mask[k] = true;
                            vals[k] = s.value[k];
                        }
                    }
                }
            }
            i += 1;
            (mask, vals)
        })
    }

    /// Bounding-box faces clamped in every component, for the coarse space.
    pub fn dirichlet_faces(&self, net: &Network, with_released: bool) -> Vec<Face> {
        let mut faces: Vec<Face> = self.active(with_released).flat_map(|s| s.faces(net)).collect();
        faces.sort_by_key(|f| Face::ALL.iter().position(|g| g == f));
        faces.dedup();
        faces
    }

    pub fn has_release(&self) -> bool {
        self.slabs.iter().any(|s| s.release)
    }
}
