use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMat, SparseColMatRef, SymbolicSparseColMat, Triplet};
use faer::{Conj, MatMut, Par, Side};

use super::system::{check_pins, FaceStencils, LsqcSystem};
use super::DiskMap;
use crate::geom::C64;
use crate::mesh::TriMesh;
use crate::{Error, Result};

const NONE: usize = usize::MAX;
const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    /// Above this many stored factor entries the solver switches to
    /// preconditioned conjugate gradients.
    pub max_factor_entries: usize,
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_factor_entries: 40_000_000,
            cg_tolerance: 1e-12,
            cg_max_iters: 20_000,
        }
    }
}

/// Sparsity of the normal matrix `ℳ_fᴴℳ_f` for one pin pair.
#[derive(Debug)]
struct Pattern {
    pins: [usize; 2],
    faces: Arc<Vec<[usize; 3]>>,
    col: Vec<usize>,
    free: Vec<usize>,
    symbolic: SymbolicSparseColMat<usize>,
    /// Per face, the stored lower-triangle slot receiving `w̄_j w_k`.
    slots: Vec<[[usize; 3]; 3]>,
    cholesky: Option<SymbolicCholesky<usize>>,
}

impl Pattern {
    fn new(faces: Arc<Vec<[usize; 3]>>, nv: usize, pins: [usize; 2], cfg: &SolverConfig) -> Result<Self> {
        let mut col = vec![NONE; nv];
        let mut free = Vec::with_capacity(nv.saturating_sub(2));
        for v in 0..nv {
            if v != pins[0] && v != pins[1] {
                col[v] = free.len();
                free.push(v);
            }
        }
        let n = free.len();
        if n == 0 {
            return Err(Error::RankDeficient("no free vertices".into()));
        }
        let mut trips = Vec::with_capacity(faces.len() * 6);
        for f in faces.iter() {
            for j in 0..3 {
                for k in 0..3 {
                    let (r, c) = (col[f[j]], col[f[k]]);
                    if r != NONE && c != NONE && r >= c {
                        trips.push(Triplet::new(r, c, 0.0f64));
                    }
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::RankDeficient(format!("normal matrix pattern: {e:?}")))?;
        let (symbolic, _) = mat.into_parts();
        // every free vertex needs a diagonal entry, otherwise it touches no face
        for c in 0..n {
            let rows = &symbolic.row_idx()[symbolic.col_ptr()[c]..symbolic.col_ptr()[c + 1]];
            if rows.binary_search(&c).is_err() {
                return Err(Error::RankDeficient(format!("vertex {} lies on no face", free[c])));
            }
        }
        let slot = |r: usize, c: usize| -> usize {
            let start = symbolic.col_ptr()[c];
            let rows = &symbolic.row_idx()[start..symbolic.col_ptr()[c + 1]];
            start + rows.binary_search(&r).expect("pattern entry")
        };
        let slots = faces
            .iter()
            .map(|f| {
                let mut s = [[NONE; 3]; 3];
                for j in 0..3 {
                    for k in 0..3 {
                        let (r, c) = (col[f[j]], col[f[k]]);
                        if r != NONE && c != NONE && r >= c {
                            s[j][k] = slot(r, c);
                        }
                    }
                }
                s
            })
            .collect();
        let sym = factorize_symbolic_cholesky(
            symbolic.as_ref(),
            Side::Lower,
            SymmetricOrdering::Amd,
            Default::default(),
        )
        .map_err(|e| Error::RankDeficient(format!("symbolic factorization: {e:?}")))?;
        let cholesky = (sym.len_val() <= cfg.max_factor_entries).then_some(sym);
        Ok(Self {
            pins,
            faces,
            col,
            free,
            symbolic,
            slots,
            cholesky,
        })
    }

    /// `y = ℳ_fᴴ ℳ_f x` through the face rows.
    fn apply(&self, rows: &[[C64; 3]], x: &[C64], y: &mut [C64]) {
        y.fill(ZERO);
        for (f, w) in self.faces.iter().zip(rows) {
            let mut s = ZERO;
            for j in 0..3 {
                let c = self.col[f[j]];
                if c != NONE {
                    s += w[j] * x[c];
                }
            }
            for j in 0..3 {
                let c = self.col[f[j]];
                if c != NONE {
                    y[c] += w[j].conj() * s;
                }
            }
        }
    }
}

#[derive(Debug)]
enum Kind {
    Direct(Vec<C64>),
    Iterative { rows: Vec<[C64; 3]>, diag: Vec<f64> },
}

/// Factorized (or iteratively solvable) normal matrix of one solve, reusable
/// for further right-hand sides such as adjoint solves.
#[derive(Debug)]
pub struct Factorization {
    pattern: Arc<Pattern>,
    kind: Kind,
    config: SolverConfig,
}

impl Factorization {
    /// Free vertices in column order.
    pub fn free_vertices(&self) -> &[usize] {
        &self.pattern.free
    }

    /// Column of vertex `v`, `None` for pinned vertices.
    pub fn free_index(&self, v: usize) -> Option<usize> {
        let c = self.pattern.col[v];
        (c != NONE).then_some(c)
    }

    pub fn pinned(&self) -> [usize; 2] {
        self.pattern.pins
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.kind, Kind::Direct(_))
    }

    /// Solves `ℳ_fᴴℳ_f x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [C64]) -> Result<()> {
        let n = self.pattern.free.len();
        if rhs.len() != n {
            return Err(Error::SizeMismatch {
                what: "normal-equation right-hand side",
                expected: n,
                got: rhs.len(),
            });
        }
        match &self.kind {
            Kind::Direct(values) => {
                let sym = self.pattern.cholesky.as_ref().expect("direct factorization");
                let llt = LltRef::<'_, usize, C64>::new(sym, values);
                let mut buf = MemBuffer::new(sym.solve_in_place_scratch::<C64>(1, Par::Seq));
                let rhs_mat = MatMut::from_column_major_slice_mut(rhs, n, 1);
                llt.solve_in_place_with_conj(Conj::No, rhs_mat, Par::Seq, MemStack::new(&mut buf));
            }
            Kind::Iterative { rows, diag } => {
                let b = rhs.to_vec();
                conjugate_gradient(&self.pattern, rows, diag, &b, rhs, &self.config)?;
            }
        }
        if rhs.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::RankDeficient("non-finite solution".into()));
        }
        Ok(())
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn conjugate_gradient(
    pattern: &Pattern,
    rows: &[[C64; 3]],
    diag: &[f64],
    b: &[C64],
    x: &mut [C64],
    cfg: &SolverConfig,
) -> Result<()> {
    let n = b.len();
    x.fill(ZERO);
    let bnorm = dot(b, b).re.sqrt();
    if bnorm == 0.0 {
        return Ok(());
    }
    let mut r = b.to_vec();
    let mut z: Vec<C64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![ZERO; n];
    let mut rz = dot(&r, &z).re;
    for _ in 0..cfg.cg_max_iters {
        pattern.apply(rows, &p, &mut ap);
        let pap = dot(&p, &ap).re;
        if !(pap > 0.0) {
            return Err(Error::RankDeficient("normal matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        if dot(&r, &r).re.sqrt() <= cfg.cg_tolerance * bnorm {
            return Ok(());
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
    }
    Err(Error::RankDeficient(format!(
        "conjugate gradient did not reach relative tolerance {:e}",
        cfg.cg_tolerance
    )))
}

fn solve_rows(
    pattern: &Arc<Pattern>,
    num_vertices: usize,
    rows: &[[C64; 3]],
    pins: [(usize, C64); 2],
    cfg: &SolverConfig,
) -> Result<(DiskMap, Factorization)> {
    let n = pattern.free.len();
    let mut rhs = vec![ZERO; n];
    let target = |v: usize| if v == pins[0].0 { pins[0].1 } else { pins[1].1 };
    for (f, w) in pattern.faces.iter().zip(rows) {
        let mut s = ZERO;
        for j in 0..3 {
            if pattern.col[f[j]] == NONE {
                s += w[j] * target(f[j]);
            }
        }
        if s == ZERO {
            continue;
        }
        for j in 0..3 {
            let c = pattern.col[f[j]];
            if c != NONE {
                rhs[c] -= w[j].conj() * s;
            }
        }
    }

    let kind = match &pattern.cholesky {
        Some(sym) => {
            let mut vals = vec![ZERO; pattern.symbolic.row_idx().len()];
            for (slots, w) in pattern.slots.iter().zip(rows) {
                for j in 0..3 {
                    for k in 0..3 {
                        let s = slots[j][k];
                        if s != NONE {
                            vals[s] += w[j].conj() * w[k];
                        }
                    }
                }
            }
            let a = SparseColMatRef::<'_, usize, C64>::new(pattern.symbolic.as_ref(), &vals);
            let mut l_values = vec![ZERO; sym.len_val()];
            let mut buf = MemBuffer::new(
                sym.factorize_numeric_llt_scratch::<C64>(Par::Seq, Default::default()),
            );
            sym.factorize_numeric_llt(
                &mut l_values,
                a,
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| {
                Error::RankDeficient(format!(
                    "Cholesky factorization failed ({e:?}); the mesh must be connected without dangling triangles and |μ| bounded away from 1"
                ))
            })?;
            Kind::Direct(l_values)
        }
        None => {
            let mut diag = vec![0.0; n];
            for (f, w) in pattern.faces.iter().zip(rows) {
                for j in 0..3 {
                    let c = pattern.col[f[j]];
                    if c != NONE {
                        diag[c] += w[j].norm_sqr();
                    }
                }
            }
            Kind::Iterative {
                rows: rows.to_vec(),
                diag,
            }
        }
    };
    let fact = Factorization {
        pattern: Arc::clone(pattern),
        kind,
        config: *cfg,
    };
    fact.solve_in_place(&mut rhs)?;
    let mut positions = vec![ZERO; num_vertices];
    for (c, &v) in pattern.free.iter().enumerate() {
        positions[v] = rhs[c];
    }
    positions[pins[0].0] = pins[0].1;
    positions[pins[1].0] = pins[1].1;
    Ok((DiskMap { positions }, fact))
}

/// Two-pin least-squares solver bound to one disk mesh. The symbolic
/// factorization is kept across calls while the pinned vertices stay the same.
#[derive(Debug)]
pub struct LsqcSolver {
    stencils: FaceStencils,
    faces: Arc<Vec<[usize; 3]>>,
    config: SolverConfig,
    pattern: Option<Arc<Pattern>>,
}

impl LsqcSolver {
    pub fn new(mesh: &TriMesh, config: SolverConfig) -> Result<Self> {
        let stencils = FaceStencils::new(mesh)?;
        Ok(Self {
            faces: Arc::new(stencils.faces.clone()),
            stencils,
            config,
            pattern: None,
        })
    }

    pub fn stencils(&self) -> &FaceStencils {
        &self.stencils
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn pattern(&mut self, pins: [usize; 2]) -> Result<Arc<Pattern>> {
        if let Some(p) = &self.pattern {
            if p.pins == pins {
                return Ok(Arc::clone(p));
            }
        }
        let p = Arc::new(Pattern::new(
            Arc::clone(&self.faces),
            self.stencils.num_vertices,
            pins,
            &self.config,
        )?);
        self.pattern = Some(Arc::clone(&p));
        Ok(p)
    }

    /// Minimizes the energy for per-face coefficients `mu_face` with the two
    /// pinned vertices held at their targets.
    pub fn solve(&mut self, mu_face: &[C64], pins: [(usize, C64); 2]) -> Result<(DiskMap, Factorization)> {
        self.stencils.check_admissible(mu_face)?;
        check_pins(self.stencils.num_vertices, &pins)?;
        let rows: Vec<[C64; 3]> = mu_face
            .iter()
            .enumerate()
            .map(|(t, &m)| self.stencils.row(t, m))
            .collect();
        let pattern = self.pattern([pins[0].0, pins[1].0])?;
        solve_rows(&pattern, self.stencils.num_vertices, &rows, pins, &self.config)
    }
}

/// Least-squares minimizer of an assembled system; pinned vertices are
/// placed exactly at their targets.
pub fn solve(system: &LsqcSystem) -> Result<DiskMap> {
    solve_with(system, &SolverConfig::default())
}

pub(crate) fn solve_with(system: &LsqcSystem, config: &SolverConfig) -> Result<DiskMap> {
    check_pins(system.num_vertices, &system.pins)?;
    let pattern = Arc::new(Pattern::new(
        Arc::new(system.faces.clone()),
        system.num_vertices,
        [system.pins[0].0, system.pins[1].0],
        config,
    )?);
    solve_rows(&pattern, system.num_vertices, &system.rows, system.pins, config).map(|(m, _)| m)
}
