use super::DofMap;
use crate::error::{Error, Result};
use crate::network::{Network, Vec3};

/// Consistent load vector on free dofs for per-edge constant force `f` (N/mm) and moment `g`
/// (N) densities: each endpoint receives `h_e/2` times the density.
pub fn assemble_load(net: &Network, map: &DofMap, f: &[Vec3], g: &[Vec3]) -> Result<Vec<f64>> {
    for v in [f, g] {
        if v.len() != net.edge_count() {
            return Err(Error::DimensionMismatch {
                expected: net.edge_count(),
                got: v.len(),
            });
        }
    }
    if !f.iter().chain(g).all(|v| v.iter().all(|x| x.is_finite())) {
        return Err(Error::InvalidArgument("loads must be finite".into()));
    }
    let mut out = vec![0.0; map.n_free()];
    for e in 0..net.edge_count() {
        let half = 0.5 * net.edge_length(e);
        for &n in &net.edge(e).endpoints {
            for k in 0..3 {
                for (comp, val) in [(k, f[e][k]), (k + 3, g[e][k])] {
                    let d = map.dof(n, comp);
                    if map.is_free(d) {
                        out[d] += half * val;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `θ F^{n+1} + (1−2θ) F^n + θ F^{n−1}`
pub fn theta_load(prev: &[f64], cur: &[f64], next: &[f64], theta: f64) -> Result<Vec<f64>> {
    for v in [prev, next] {
        if v.len() != cur.len() {
            return Err(Error::DimensionMismatch {
                expected: cur.len(),
                got: v.len(),
            });
        }
    }
    Ok((0..cur.len())
        .map(|i| theta * next[i] + (1.0 - 2.0 * theta) * cur[i] + theta * prev[i])
        .collect())
}
