//! Additive two-level Schwarz preconditioner with cached exact local and coarse solves.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use super::CoarseSpace;
use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::sparsela::{cholesky_factorize, cholesky_factorize_semidefinite, triple_product, CholeskyFactor, CsrMatrix};

#[derive(Debug, Default)]
pub struct SchwarzCounters {
    pub factorizations: AtomicUsize,
    pub local_solves: AtomicUsize,
    pub coarse_solves: AtomicUsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CounterSnapshot {
    pub factorizations: usize,
    pub local_solves: usize,
    pub coarse_solves: usize,
}

impl SchwarzCounters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            factorizations: self.factorizations.load(Ordering::Relaxed),
            local_solves: self.local_solves.load(Ordering::Relaxed),
            coarse_solves: self.coarse_solves.load(Ordering::Relaxed),
        }
    }
}

struct Local {
    dofs: Vec<usize>,
    factor: CholeskyFactor,
}

pub struct SchwarzPreconditioner {
    n: usize,
    r0t: CsrMatrix,
    r0: CsrMatrix,
    coarse: Option<CholeskyFactor>,
    locals: Vec<Local>,
    fingerprint: u64,
    counters: Arc<SchwarzCounters>,
    parallel: bool,
}

/// Relative pivot below which a coarse basis function counts as dependent on the others.
pub const COARSE_DROP_TOL: f64 = 1e-10;

impl SchwarzPreconditioner {
    /// Factorizes `R₀ A* R₀ᵀ` and every principal submatrix `A*[I_i, I_i]`.
    pub fn setup(a_star: &CsrMatrix, space: &CoarseSpace, counters: Arc<SchwarzCounters>) -> Result<Self> {
        let n = a_star.n_rows();
        if space.n_free() != n {
            return Err(Error::DimensionMismatch { expected: n, got: space.n_free() });
        }
        let r0 = space.prolongation.transpose();
        let coarse = if space.n_coarse() > 0 {
            let a0 = triple_product(&r0, a_star)?;
            counters.factorizations.fetch_add(1, Ordering::Relaxed);
            let f = cholesky_factorize_semidefinite(&a0, COARSE_DROP_TOL).map_err(|e| relabel(e, "coarse problem".into()))?;
            let dropped = f.dropped().len();
            if dropped > 0 {
                log::debug!("coarse problem: {dropped} dependent coarse functions eliminated");
            }
            Some(f)
        } else {
            None
        };
        for s in space.subdomains.iter().filter(|s| s.dofs.is_empty()) {
            log::warn!("subdomain of coarse node {} has no free dofs; skipped", s.coarse_node);
        }
        let locals: Vec<Local> = space
            .subdomains
            .par_iter()
            .filter(|s| !s.dofs.is_empty())
            .map(|s| {
                let sub = a_star.submatrix(&s.dofs)?;
                counters.factorizations.fetch_add(1, Ordering::Relaxed);
                let factor = cholesky_factorize(&sub)
                    .map_err(|e| relabel(e, format!("subdomain of coarse node {}", s.coarse_node)))?;
                Ok(Local {
                    dofs: s.dofs.clone(),
                    factor,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            n,
            r0t: space.prolongation.clone(),
            r0,
            coarse,
            locals,
            fingerprint: cache_key(a_star, space),
            counters,
            parallel: true,
        })
    }

    /// Local solves run on the rayon pool when enabled; results are summed in subdomain order
    /// either way.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn n_subdomains(&self) -> usize {
        self.locals.len()
    }

    pub fn counters(&self) -> &Arc<SchwarzCounters> {
        &self.counters
    }

    fn local_solve(&self, loc: &Local, r: &[f64]) -> Vec<f64> {
        let rl: Vec<f64> = loc.dofs.iter().map(|&d| r[d]).collect();
        let mut zl = vec![0.0; rl.len()];
        loc.factor.solve_into(&rl, &mut zl);
        self.counters.local_solves.fetch_add(1, Ordering::Relaxed);
        zl
    }
}

fn relabel(e: Error, context: String) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot, value, .. } => Error::NotPositiveDefinite { pivot, value, context },
        other => other,
    }
}

fn cache_key(a: &CsrMatrix, space: &CoarseSpace) -> u64 {
    let mut h = DefaultHasher::new();
    a.fingerprint().hash(&mut h);
    space.fingerprint().hash(&mut h);
    h.finish()
}

impl LinearOperator for SchwarzPreconditioner {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.iter_mut().for_each(|v| *v = 0.0);
        if let Some(f) = &self.coarse {
            let rc = self.r0.spmv(r).expect("dimensions checked at setup");
            let mut zc = vec![0.0; rc.len()];
            f.solve_into(&rc, &mut zc);
            self.counters.coarse_solves.fetch_add(1, Ordering::Relaxed);
            self.r0t.spmv_into(&zc, z);
        }
        let parts: Vec<Vec<f64>> = if self.parallel {
            self.locals.par_iter().map(|l| self.local_solve(l, r)).collect()
        } else {
            self.locals.iter().map(|l| self.local_solve(l, r)).collect()
        };
        for (loc, zl) in self.locals.iter().zip(parts) {
            for (&d, v) in loc.dofs.iter().zip(zl) {
                z[d] += v;
            }
        }
    }
}

/// Preconditioners keyed by (matrix, decomposition) fingerprint; a repeated setup with the
/// same inputs returns the cached factors.
#[derive(Default)]
pub struct SchwarzCache {
    entries: HashMap<u64, Arc<SchwarzPreconditioner>>,
    counters: Arc<SchwarzCounters>,
}

impl SchwarzCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn counters(&self) -> &Arc<SchwarzCounters> {
        &self.counters
    }

    pub fn get_or_setup(&mut self, a_star: &CsrMatrix, space: &CoarseSpace) -> Result<Arc<SchwarzPreconditioner>> {
        let key = cache_key(a_star, space);
        if let Some(p) = self.entries.get(&key) {
            return Ok(Arc::clone(p));
        }
        let p = Arc::new(SchwarzPreconditioner::setup(a_star, space, Arc::clone(&self.counters))?);
        self.entries.insert(key, Arc::clone(&p));
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, DofMap};
    use crate::krylov::{pcg, PcgOptions};
    use crate::network::{generate_expanded_metal, refine, ExpandedMetal, Network};
    use crate::schwarz::{build_coarse, Face, Subdomain};
    use crate::sparsela::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clamped_sheet(n_splits: u32) -> Network {
        let net = generate_expanded_metal(&ExpandedMetal::steel_sheet()).unwrap();
        let net = if n_splits > 0 { refine(&net, n_splits).unwrap() } else { net };
        net.map_constraints(|n| ([n.position.x == 320.0; 6], [0.0; 6]))
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identity_operator_is_definitional() {
        let net = clamped_sheet(0);
        let map = DofMap::new(&net);
        let space = build_coarse(&net, &map, [2, 2, 1], &[Face::XMax]).unwrap();
        let n = map.n_free();
        let p = SchwarzPreconditioner::setup(&CsrMatrix::identity(n), &space, Arc::default()).unwrap();
        let r = random(n, 1);
        let mut z = vec![0.0; n];
        p.apply(&r, &mut z);
        // Σ R_iᵀR_i r: each dof scaled by its multiplicity
        let mut want = vec![0.0; n];
        for s in &space.subdomains {
            for &d in &s.dofs {
                want[d] += r[d];
            }
        }
        let r0 = space.prolongation.transpose();
        let g = triple_product(&r0, &CsrMatrix::identity(n)).unwrap();
        let yc = cholesky_factorize(&g).unwrap().solve(&r0.spmv(&r).unwrap()).unwrap();
        let coarse = space.prolongation.spmv(&yc).unwrap();
        for i in 0..n {
            assert!((z[i] - want[i] - coarse[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn apply_is_symmetric_and_positive() {
        let net = clamped_sheet(1);
        let sys = assemble(&net);
        let space = build_coarse(&net, &sys.dof_map, [4, 4, 1], &[Face::XMax]).unwrap();
        let p = SchwarzPreconditioner::setup(&sys.a, &space, Arc::default()).unwrap();
        let n = sys.n_free();
        let (mut zu, mut zv) = (vec![0.0; n], vec![0.0; n]);
        for seed in 0..10 {
            let (u, v) = (random(n, 2 * seed), random(n, 2 * seed + 1));
            p.apply(&u, &mut zu);
            p.apply(&v, &mut zv);
            let (a, b) = (dot(&v, &zu), dot(&u, &zv));
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
            assert!(dot(&u, &zu) > 0.0);
        }
        p.apply(&vec![0.0; n], &mut zu);
        assert!(zu.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn serial_and_parallel_are_bitwise_equal() {
        let net = clamped_sheet(1);
        let sys = assemble(&net);
        let space = build_coarse(&net, &sys.dof_map, [4, 4, 1], &[Face::XMax]).unwrap();
        let p = SchwarzPreconditioner::setup(&sys.a, &space, Arc::default()).unwrap();
        let r = random(sys.n_free(), 9);
        let mut z1 = vec![0.0; r.len()];
        p.apply(&r, &mut z1);
        let p = p.with_parallel(false);
        let mut z2 = vec![0.0; r.len()];
        p.apply(&r, &mut z2);
        assert!(z1.iter().zip(&z2).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn cache_reuses_factors() {
        let net = clamped_sheet(0);
        let sys = assemble(&net);
        let space = build_coarse(&net, &sys.dof_map, [2, 2, 1], &[Face::XMax]).unwrap();
        let mut cache = SchwarzCache::new();
        let p1 = cache.get_or_setup(&sys.a, &space).unwrap();
        let after_first = cache.counters().snapshot().factorizations;
        assert_eq!(after_first, p1.n_subdomains() + 1);
        let p2 = cache.get_or_setup(&sys.a, &space).unwrap();
        assert_eq!(cache.counters().snapshot().factorizations, after_first);
        assert!(Arc::ptr_eq(&p1, &p2));
        let scaled = sys.a.scaled(2.0);
        cache.get_or_setup(&scaled, &space).unwrap();
        assert_eq!(cache.counters().snapshot().factorizations, 2 * after_first);
    }

    #[test]
    fn whole_domain_subdomain_converges_in_two_iterations() {
        let net = clamped_sheet(1);
        let sys = assemble(&net);
        let n = sys.n_free();
        let coarse = build_coarse(&net, &sys.dof_map, [2, 2, 1], &[Face::XMax]).unwrap();
        let space = CoarseSpace::from_parts(
            coarse.prolongation.clone(),
            vec![Subdomain {
                coarse_node: 0,
                dofs: (0..n).collect(),
            }],
        );
        let p = SchwarzPreconditioner::setup(&sys.a, &space, Arc::default()).unwrap();
        let b = random(n, 4);
        let (_, rep) = pcg(&sys.a, &b, &p, None, &PcgOptions::new(1e-10, 20)).unwrap();
        assert!(rep.converged && rep.iterations <= 2, "{} iterations", rep.iterations);
    }

    #[test]
    fn not_spd_names_the_subdomain() {
        let net = clamped_sheet(0);
        let map = DofMap::new(&net);
        let space = build_coarse(&net, &map, [2, 2, 1], &[Face::XMax]).unwrap();
        let neg = CsrMatrix::identity(map.n_free()).scaled(-1.0);
        match SchwarzPreconditioner::setup(&neg, &space, Arc::default()) {
            Err(Error::NotPositiveDefinite { context, .. }) => assert!(context.contains("coarse")),
            Err(e) => panic!("unexpected {e:?}"),
            Ok(_) => panic!("expected failure"),
        }
    }
}
