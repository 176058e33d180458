//! Divergence-free reference fluid modes from a staggered Stokes
//! eigenproblem on the cylinder.
//!
//! The `(r, z)` half-plane carries a MAC grid; the angular dependence is an
//! exact Fourier factor. For frequency `k` the cos family is
//! `u = (A cos kθ, C sin kθ, E cos kθ)` and the sin family is its rotation
//! `(A sin kθ, -C cos kθ, E sin kθ)`. Unknowns sit at
//!
//! * `A` on radial faces `(r_i, z_{k+1/2})`, zero on the axis and the wall,
//! * `C` at cell centres,
//! * `E` on axial faces `(r_{i+1/2}, z_k)`, free on both end disks.
//!
//! For `k ≥ 1` the discrete divergence is solved for `C`; for `k = 0` the
//! meridional part uses a stream function and the swirl is unconstrained.
//! The energy is the Fourier-reduced vector Dirichlet integral, with
//! homogeneous Dirichlet data for the tangential components on the disks.

use super::quadrature::{DiskGrid, SurfaceGrid, VolumeGrid};
use super::trig::Parity;
use super::{Grad3, VectorTable};
use crate::error::{Error, Result};
use crate::numerics::BandedSym;
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Staggered `(r, z)` grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StokesGrid {
    pub radius: f64,
    pub length: f64,
    pub nr: usize,
    pub nz: usize,
}

impl StokesGrid {
    pub fn dr(&self) -> f64 {
        self.radius / self.nr as f64
    }
    pub fn dz(&self) -> f64 {
        self.length / self.nz as f64
    }
    pub fn r_face(&self, i: usize) -> f64 {
        i as f64 * self.dr()
    }
    pub fn r_centre(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr()
    }
}

/// One orthonormalized mode with its cell-centre tables.
#[derive(Clone, Debug)]
pub struct FluidMode {
    pub k: usize,
    pub family: Parity,
    pub eigenvalue: f64,
    /// Radial faces, `(nr + 1) × nz`, index `kz * (nr + 1) + i`.
    pub a: Vec<f64>,
    /// Cells, `nr × nz`, index `kz * nr + i`.
    pub c: Vec<f64>,
    /// Axial faces, `nr × (nz + 1)`, index `kz * nr + i`.
    pub e: Vec<f64>,
    /// Profiles of `(u_r, u_θ, u_z)` at cell centres.
    pub centre_values: Vec<[f64; 3]>,
    /// Profiles of the frame gradient at cell centres.
    pub centre_grads: Vec<Grad3>,
    /// Profiles on the wall `r = R` at the z-centres.
    pub wall_values: Vec<[f64; 3]>,
}

/// Fourier factor for a component with nominal trig kind `kind`.
#[inline]
fn angular(family: Parity, kind: Parity, k: f64, theta: f64) -> f64 {
    let (s, c) = (k * theta).sin_cos();
    match (family, kind) {
        (Parity::Cos, Parity::Cos) => c,
        (Parity::Cos, Parity::Sin) => s,
        (Parity::Sin, Parity::Cos) => s,
        (Parity::Sin, Parity::Sin) => -c,
    }
}

#[inline]
fn value_kind(i: usize) -> Parity {
    if i == 1 {
        Parity::Sin
    } else {
        Parity::Cos
    }
}

#[inline]
fn grad_kind(i: usize, j: usize) -> Parity {
    if (i == 1) != (j == 1) {
        Parity::Sin
    } else {
        Parity::Cos
    }
}

impl FluidMode {
    /// Angular factors for values and gradients at angle `theta`.
    pub fn angular_factors(&self, theta: f64) -> ([f64; 3], [[f64; 3]; 3]) {
        let k = self.k as f64;
        let v = [0, 1, 2].map(|i| angular(self.family, value_kind(i), k, theta));
        let g = [0, 1, 2].map(|i| [0, 1, 2].map(|j| angular(self.family, grad_kind(i, j), k, theta)));
        (v, g)
    }
}

/// The reference fluid basis `{Z_k}`.
#[derive(Clone, Debug)]
pub struct FluidReferenceBasis {
    pub grid: StokesGrid,
    pub modes: Vec<FluidMode>,
}

type Sparse = Vec<(usize, f64)>;

fn lin(terms: &[(f64, &Sparse)]) -> Sparse {
    let mut out: Sparse = Vec::new();
    for (c, s) in terms {
        for (i, v) in s.iter() {
            if let Some(e) = out.iter_mut().find(|e| e.0 == *i) {
                e.1 += c * v;
            } else {
                out.push((*i, c * v));
            }
        }
    }
    out
}

/// Unknown layout of one Fourier block.
struct Block {
    dim: usize,
    a: Box<dyn Fn(usize, usize) -> Sparse>,
    c: Box<dyn Fn(usize, usize) -> Sparse>,
    e: Box<dyn Fn(usize, usize) -> Sparse>,
}

fn block_for(grid: StokesGrid, k: usize, family: Parity) -> Block {
    let (nr, nz) = (grid.nr, grid.nz);
    let dr = grid.dr();
    let dz = grid.dz();
    if k == 0 && family == Parity::Sin {
        // swirl: C free
        return Block {
            dim: nr * nz,
            a: Box::new(|_, _| Vec::new()),
            c: Box::new(move |i, kz| vec![(kz * nr + i, 1.0)]),
            e: Box::new(|_, _| Vec::new()),
        };
    }
    if k == 0 {
        // meridional stream function on corners (i, kz), i = 1..nr-1,
        // kz = 0..=nz, radial-major, followed by the wall value Q
        let n_psi = (nr - 1) * (nz + 1);
        let psi = move |i: usize, kz: usize| -> Sparse {
            if i == 0 {
                Vec::new()
            } else if i == nr {
                vec![(n_psi, 1.0)]
            } else {
                vec![((i - 1) * (nz + 1) + kz, 1.0)]
            }
        };
        let a = move |i: usize, kz: usize| -> Sparse {
            if i == 0 || i == nr {
                return Vec::new();
            }
            let rf = i as f64 * dr;
            lin(&[(-1.0 / (rf * dz), &psi(i, kz + 1)), (1.0 / (rf * dz), &psi(i, kz))])
        };
        let e = move |i: usize, kz: usize| -> Sparse {
            let rc = (i as f64 + 0.5) * dr;
            lin(&[(1.0 / (rc * dr), &psi(i + 1, kz)), (-1.0 / (rc * dr), &psi(i, kz))])
        };
        return Block {
            dim: n_psi + 1,
            a: Box::new(a),
            c: Box::new(|_, _| Vec::new()),
            e: Box::new(e),
        };
    }
    // axial-major interleaving of A and E keeps the operators banded
    let stride = 2 * nr - 1;
    let a = move |i: usize, kz: usize| -> Sparse {
        if i == 0 || i == nr {
            Vec::new()
        } else {
            vec![(kz * stride + (i - 1), 1.0)]
        }
    };
    let e = move |i: usize, kz: usize| -> Sparse {
        if kz < nz {
            vec![(kz * stride + (nr - 1) + i, 1.0)]
        } else {
            vec![(nz * stride + i, 1.0)]
        }
    };
    let kf = k as f64;
    let c = move |i: usize, kz: usize| -> Sparse {
        let rp = (i + 1) as f64 * dr;
        let rm = i as f64 * dr;
        let rc = (i as f64 + 0.5) * dr;
        lin(&[
            (-rp / (kf * dr), &a(i + 1, kz)),
            (rm / (kf * dr), &a(i, kz)),
            (-rc / (kf * dz), &e(i, kz + 1)),
            (rc / (kf * dz), &e(i, kz)),
        ])
    };
    Block {
        dim: nz * stride + nr,
        a: Box::new(a),
        c: Box::new(c),
        e: Box::new(e),
    }
}

/// Weighted squared functionals `w (f·x)²` making up a quadratic form.
type Terms = Vec<(Sparse, f64)>;

fn to_banded(n: usize, terms: &Terms) -> BandedSym {
    let mut bw = 0;
    for (f, _) in terms {
        if let (Some(lo), Some(hi)) = (f.iter().map(|e| e.0).min(), f.iter().map(|e| e.0).max()) {
            bw = bw.max(hi - lo);
        }
    }
    let mut m = BandedSym::zeros(n, bw);
    for (f, w) in terms {
        for (i, a) in f {
            for (j, b) in f {
                m.add(*i, *j, w * a * b);
            }
        }
    }
    m
}

/// Stiffness and mass of one Fourier block (angular factor omitted).
fn assemble(grid: StokesGrid, k: usize, b: &Block) -> (BandedSym, BandedSym) {
    let (nr, nz) = (grid.nr, grid.nz);
    let dr = grid.dr();
    let dz = grid.dz();
    let kf = k as f64;
    let mut stiff: Terms = Vec::new();
    let mut mass: Terms = Vec::new();
    for kz in 0..nz {
        for i in 0..nr {
            let rc = grid.r_centre(i);
            let wc = rc * dr * dz;
            let a0 = (b.a)(i, kz);
            let a1 = (b.a)(i + 1, kz);
            let c = (b.c)(i, kz);
            let abar = lin(&[(0.5, &a0), (0.5, &a1)]);
            stiff.push((lin(&[(1.0 / dr, &a1), (-1.0 / dr, &a0)]), wc));
            stiff.push((lin(&[(kf / rc, &abar), (1.0 / rc, &c)]), wc));
            stiff.push((lin(&[(1.0 / rc, &abar), (kf / rc, &c)]), wc));
            let e0 = (b.e)(i, kz);
            let e1 = (b.e)(i, kz + 1);
            stiff.push((lin(&[(1.0 / dz, &e1), (-1.0 / dz, &e0)]), wc));
            mass.push((c.clone(), wc));
            // ∂z C on z-faces, Dirichlet at both disks
            if kz == 0 {
                stiff.push((lin(&[(2.0 / dz, &c)]), 0.5 * wc));
            } else {
                let cm = (b.c)(i, kz - 1);
                stiff.push((lin(&[(1.0 / dz, &c), (-1.0 / dz, &cm)]), wc));
            }
            if kz == nz - 1 {
                stiff.push((lin(&[(2.0 / dz, &c)]), 0.5 * wc));
            }
            // ∂r C on interior radial faces
            if i >= 1 {
                let rf = grid.r_face(i);
                let cm = (b.c)(i - 1, kz);
                stiff.push((lin(&[(1.0 / dr, &c), (-1.0 / dr, &cm)]), rf * dr * dz));
            }
        }
        for i in 1..nr {
            let rf = grid.r_face(i);
            let wf = rf * dr * dz;
            let a = (b.a)(i, kz);
            mass.push((a.clone(), wf));
            if kz == 0 {
                stiff.push((lin(&[(2.0 / dz, &a)]), 0.5 * wf));
            } else {
                let am = (b.a)(i, kz - 1);
                stiff.push((lin(&[(1.0 / dz, &a), (-1.0 / dz, &am)]), wf));
            }
            if kz == nz - 1 {
                stiff.push((lin(&[(2.0 / dz, &a)]), 0.5 * wf));
            }
        }
    }
    for kz in 0..=nz {
        let end = if kz == 0 || kz == nz { 0.5 } else { 1.0 };
        for i in 0..nr {
            let rc = grid.r_centre(i);
            let w = end * rc * dr * dz;
            let e = (b.e)(i, kz);
            mass.push((e.clone(), w));
            if k > 0 {
                stiff.push((lin(&[(kf / rc, &e)]), w));
            }
            if i >= 1 {
                let rf = grid.r_face(i);
                let em = (b.e)(i - 1, kz);
                stiff.push((lin(&[(1.0 / dr, &e), (-1.0 / dr, &em)]), end * rf * dr * dz));
            }
        }
    }
    (to_banded(b.dim, &stiff), to_banded(b.dim, &mass))
}

/// Lowest `p` eigenpairs of `K x = λ M x` by shift-inverted subspace
/// iteration with Rayleigh–Ritz projection, ascending.
fn lowest_eigenpairs(
    stiff: &BandedSym,
    mass: &BandedSym,
    p: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    use rand::{Rng, SeedableRng};
    let n = stiff.n;
    let p = p.min(n);
    let q = (p + (p / 2).max(8)).min(n);
    let shift = 1.0;
    let op = stiff
        .add_scaled(mass, shift)
        .cholesky()
        .ok_or_else(|| Error::EigensolverFailure("shifted operator is not positive definite".into()))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DMatrix::from_fn(n, q, |_, _| rng.gen::<f64>() - 0.5);
    let mut col = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let max_iter = 3000;
    for _ in 0..max_iter {
        let mut y = DMatrix::zeros(n, q);
        for j in 0..q {
            col.copy_from_slice(x.column(j).as_slice());
            mass.matvec(&col, &mut tmp);
            op.solve_mut(&mut tmp);
            y.column_mut(j).copy_from_slice(&tmp);
        }
        let basis = y.qr().q();
        let mut kq = DMatrix::zeros(n, q);
        let mut mq = DMatrix::zeros(n, q);
        for j in 0..q {
            col.copy_from_slice(basis.column(j).as_slice());
            stiff.matvec(&col, &mut tmp);
            kq.column_mut(j).copy_from_slice(&tmp);
            mass.matvec(&col, &mut tmp);
            mq.column_mut(j).copy_from_slice(&tmp);
        }
        let kr = basis.transpose() * &kq;
        let mr = basis.transpose() * &mq;
        let kr = (&kr + kr.transpose()) * 0.5;
        let mr = (&mr + mr.transpose()) * 0.5;
        let chol = mr
            .cholesky()
            .ok_or_else(|| Error::EigensolverFailure("projected mass is not positive definite".into()))?;
        let l = chol.l();
        let mut h = kr.clone();
        l.solve_lower_triangular_mut(&mut h);
        let mut h = h.transpose();
        l.solve_lower_triangular_mut(&mut h);
        let h = (&h + h.transpose()) * 0.5;
        let eig = h.symmetric_eigen();
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::EigensolverFailure("non-finite Ritz value".into()));
        }
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].partial_cmp(&eig.eigenvalues[*b]).unwrap());
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut v = DMatrix::from_fn(q, q, |r, c| eig.eigenvectors[(r, order[c])]);
        l.transpose().solve_upper_triangular_mut(&mut v);
        x = &basis * &v;
        let kx = &kq * &v;
        let mx = &mq * &v;
        let mut converged = true;
        for j in 0..p {
            let res = (kx.column(j) - mx.column(j) * vals[j]).norm();
            let scale = mx.column(j).norm() * (vals[j].abs() + shift);
            if !(res <= 1e-10 * scale) {
                converged = false;
                break;
            }
        }
        if converged {
            let vecs = (0..p).map(|j| x.column(j).iter().copied().collect()).collect();
            return Ok((vals[..p].to_vec(), vecs));
        }
    }
    Err(Error::EigensolverFailure(format!(
        "subspace iteration did not converge in {max_iter} sweeps"
    )))
}

/// Evaluates staggered arrays of one block from a reduced vector.
fn expand(grid: StokesGrid, b: &Block, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (nr, nz) = (grid.nr, grid.nz);
    let ev = |s: Sparse| s.iter().map(|(i, c)| c * x[*i]).sum::<f64>();
    let mut a = vec![0.0; (nr + 1) * nz];
    let mut c = vec![0.0; nr * nz];
    let mut e = vec![0.0; nr * (nz + 1)];
    for kz in 0..nz {
        for i in 0..=nr {
            a[kz * (nr + 1) + i] = ev((b.a)(i, kz));
        }
        for i in 0..nr {
            c[kz * nr + i] = ev((b.c)(i, kz));
        }
    }
    for kz in 0..=nz {
        for i in 0..nr {
            e[kz * nr + i] = ev((b.e)(i, kz));
        }
    }
    (a, c, e)
}

/// Cell-centre value and gradient profiles plus wall trace profiles.
fn tables(
    grid: StokesGrid,
    k: usize,
    a: &[f64],
    c: &[f64],
    e: &[f64],
) -> (Vec<[f64; 3]>, Vec<Grad3>, Vec<[f64; 3]>) {
    let (nr, nz) = (grid.nr, grid.nz);
    let dr = grid.dr();
    let dz = grid.dz();
    let kf = k as f64;
    let af = |i: usize, kz: usize| a[kz * (nr + 1) + i];
    let abar = |i: usize, kz: usize| 0.5 * (af(i, kz) + af(i + 1, kz));
    let cc = |i: usize, kz: usize| c[kz * nr + i];
    let ef = |i: usize, kz: usize| e[kz * nr + i];
    let ebar = |i: usize, kz: usize| 0.5 * (ef(i, kz) + ef(i, kz + 1));
    let axis_sign = if k == 0 { 1.0 } else { -1.0 };
    // centred z-derivative with odd reflection at both ends
    let dz_odd = |f: &dyn Fn(usize) -> f64, kz: usize| -> f64 {
        let lo = if kz == 0 { -f(0) } else { f(kz - 1) };
        let hi = if kz == nz - 1 { -f(nz - 1) } else { f(kz + 1) };
        (hi - lo) / (2.0 * dz)
    };
    // centred r-derivative; reflection with `sign` at the axis, one-sided at the wall
    let dr_c = |f: &dyn Fn(usize) -> f64, i: usize, sign: f64| -> f64 {
        if i == nr - 1 {
            if nr == 1 {
                0.0
            } else {
                (f(i) - f(i - 1)) / dr
            }
        } else {
            let lo = if i == 0 { sign * f(0) } else { f(i - 1) };
            (f(i + 1) - lo) / (2.0 * dr)
        }
    };
    let mut vals = vec![[0.0; 3]; nr * nz];
    let mut grads = vec![[[0.0; 3]; 3]; nr * nz];
    for kz in 0..nz {
        for i in 0..nr {
            let rc = grid.r_centre(i);
            let ab = abar(i, kz);
            let cv = cc(i, kz);
            let eb = ebar(i, kz);
            let idx = kz * nr + i;
            vals[idx] = [ab, cv, eb];
            let g = &mut grads[idx];
            g[0][0] = (af(i + 1, kz) - af(i, kz)) / dr;
            g[0][1] = -(kf * ab + cv) / rc;
            g[0][2] = dz_odd(&|q| abar(i, q), kz);
            g[1][0] = dr_c(&|p| cc(p, kz), i, -1.0);
            g[1][1] = (ab + kf * cv) / rc;
            g[1][2] = dz_odd(&|q| cc(i, q), kz);
            g[2][0] = dr_c(&|p| ebar(p, kz), i, axis_sign);
            g[2][1] = -kf * eb / rc;
            g[2][2] = (ef(i, kz + 1) - ef(i, kz)) / dz;
        }
    }
    let mut wall = vec![[0.0; 3]; nz];
    for (kz, w) in wall.iter_mut().enumerate() {
        let ex = |f: &dyn Fn(usize) -> f64| -> f64 {
            if nr == 1 {
                f(0)
            } else {
                1.5 * f(nr - 1) - 0.5 * f(nr - 2)
            }
        };
        *w = [0.0, ex(&|p| cc(p, kz)), ex(&|p| ebar(p, kz))];
    }
    (vals, grads, wall)
}

struct Candidate {
    lambda: f64,
    k: usize,
    family: Parity,
    vector: Vec<f64>,
}

static CACHE: OnceLock<Mutex<HashMap<(u64, u64, usize, usize, usize), Arc<FluidReferenceBasis>>>> =
    OnceLock::new();

impl FluidReferenceBasis {
    /// Process-wide cached build.
    pub fn shared(grid: StokesGrid, m: usize) -> Result<Arc<FluidReferenceBasis>> {
        let key = (grid.radius.to_bits(), grid.length.to_bits(), grid.nr, grid.nz, m);
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().unwrap().get(&key) {
            return Ok(b.clone());
        }
        let built = Arc::new(Self::build(grid, m)?);
        cache.lock().unwrap().insert(key, built.clone());
        Ok(built)
    }

    /// Lowest `m` modes, orthonormal in the cell-centre `L²(Ω)` quadrature.
    pub fn build(grid: StokesGrid, m: usize) -> Result<FluidReferenceBasis> {
        if m == 0 || grid.nr < 2 || grid.nz < 2 {
            return Err(Error::InvalidArgument("fluid basis needs m ≥ 1 and a 2×2 grid".into()));
        }
        let mut cands: Vec<Candidate> = Vec::new();
        let mut above = 0;
        let max_k = 16;
        for k in 0..=max_k {
            let mut lowest = f64::INFINITY;
            // k ≥ 1: both families share one eigenproblem and each
            // eigenvalue yields two modes
            let solves: Vec<(Parity, usize)> = if k == 0 {
                vec![(Parity::Cos, m), (Parity::Sin, m)]
            } else {
                vec![(Parity::Cos, m.div_ceil(2))]
            };
            for (fam, count) in solves {
                let b = block_for(grid, k, fam);
                let (stiff, mass) = assemble(grid, k, &b);
                let (vals, vecs) = lowest_eigenpairs(&stiff, &mass, count)?;
                for (lam, vec) in vals.into_iter().zip(vecs) {
                    lowest = lowest.min(lam);
                    let fams: &[Parity] = if k == 0 { &[fam] } else { &[Parity::Cos, Parity::Sin] };
                    for &f in fams {
                        cands.push(Candidate {
                            lambda: lam,
                            k,
                            family: f,
                            vector: vec.clone(),
                        });
                    }
                }
            }
            cands.sort_by(|a, b| {
                a.lambda
                    .partial_cmp(&b.lambda)
                    .unwrap()
                    .then(a.k.cmp(&b.k))
                    .then(a.family.cmp(&b.family))
            });
            if cands.len() >= m && k >= 1 && lowest > cands[m - 1].lambda {
                above += 1;
                if above >= 2 {
                    break;
                }
            } else {
                above = 0;
            }
        }
        cands.truncate(m);
        let mut modes = Vec::with_capacity(m);
        for cand in &cands {
            let b = block_for(grid, cand.k, cand.family);
            let (a, c, e) = expand(grid, &b, &cand.vector);
            let (cv, cg, wall) = tables(grid, cand.k, &a, &c, &e);
            modes.push(FluidMode {
                k: cand.k,
                family: cand.family,
                eigenvalue: cand.lambda,
                a,
                c,
                e,
                centre_values: cv,
                centre_grads: cg,
                wall_values: wall,
            });
        }
        let mut basis = FluidReferenceBasis { grid, modes };
        basis.orthonormalize()?;
        Ok(basis)
    }

    fn angular_mass(k: usize) -> f64 {
        if k == 0 {
            2.0 * PI
        } else {
            PI
        }
    }

    /// Cell-centre quadrature inner product of two modes.
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.modes[i], &self.modes[j]);
        if a.k != b.k || a.family != b.family {
            return 0.0;
        }
        let g = self.grid;
        let (nr, dr, dz) = (g.nr, g.dr(), g.dz());
        let s = crate::numerics::pairwise_sum_by(0, nr * g.nz, &|idx| {
            let rc = g.r_centre(idx % nr);
            rc * dr * dz * crate::numerics::dot3(&a.centre_values[idx], &b.centre_values[idx])
        });
        s * Self::angular_mass(a.k)
    }

    fn orthonormalize(&mut self) -> Result<()> {
        let mut groups: Vec<(usize, Parity)> = Vec::new();
        for m in &self.modes {
            if !groups.contains(&(m.k, m.family)) {
                groups.push((m.k, m.family));
            }
        }
        for (k, fam) in groups {
            let idx: Vec<usize> = (0..self.modes.len())
                .filter(|&i| self.modes[i].k == k && self.modes[i].family == fam)
                .collect();
            // two passes of modified Gram–Schmidt
            for _ in 0..2 {
                for (p, &i) in idx.iter().enumerate() {
                    for &j in &idx[..p] {
                        let c = self.inner(i, j);
                        let src = self.modes[j].clone();
                        combine(&mut self.modes[i], &src, -c);
                    }
                    let n = self.inner(i, i).sqrt();
                    if !(n > 0.0) || !n.is_finite() {
                        return Err(Error::EigensolverFailure("degenerate mode during orthonormalization".into()));
                    }
                    scale(&mut self.modes[i], 1.0 / n);
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// True when the volume grid's `(r, z)` nodes are this basis' cell
    /// centres.
    pub fn matches(&self, grid: &VolumeGrid) -> bool {
        let g = self.grid;
        grid.r.len() == g.nr
            && grid.z.len() == g.nz
            && grid.r.nodes.iter().enumerate().all(|(i, r)| (r - g.r_centre(i)).abs() < 1e-12 * g.radius)
            && grid
                .z
                .nodes
                .iter()
                .enumerate()
                .all(|(i, z)| (z - (i as f64 + 0.5) * g.dz()).abs() < 1e-12 * g.length)
    }

    /// Values and frame gradients of mode `i` at the nodes of `grid`.
    pub fn eval_volume(&self, i: usize, grid: &VolumeGrid) -> VectorTable {
        assert!(self.matches(grid), "volume grid must be the Stokes cell-centre grid");
        let mode = &self.modes[i];
        let nr = grid.r.len();
        let nz = grid.z.len();
        let mut out = VectorTable::zeros(grid.len(), true);
        for (it, theta) in grid.theta.nodes.iter().enumerate() {
            let (fv, fg) = mode.angular_factors(*theta);
            for iz in 0..nz {
                for ir in 0..nr {
                    let cell = iz * nr + ir;
                    let node = grid.index(ir, it, iz);
                    let v = &mode.centre_values[cell];
                    let g = &mode.centre_grads[cell];
                    out.values[node] = [v[0] * fv[0], v[1] * fv[1], v[2] * fv[2]];
                    for a in 0..3 {
                        for b in 0..3 {
                            out.grads[node][a][b] = g[a][b] * fg[a][b];
                        }
                    }
                }
            }
        }
        out
    }

    /// Trace on the wall `r = R` at the surface nodes (z-nodes must be the
    /// cell-centre z-nodes).
    pub fn eval_wall(&self, i: usize, grid: &SurfaceGrid) -> Vec<[f64; 3]> {
        let mode = &self.modes[i];
        let nz = grid.z.len();
        assert_eq!(nz, self.grid.nz);
        let mut out = vec![[0.0; 3]; grid.len()];
        for (it, theta) in grid.theta.nodes.iter().enumerate() {
            let (fv, _) = mode.angular_factors(*theta);
            for iz in 0..nz {
                let w = &mode.wall_values[iz];
                out[it * nz + iz] = [w[0] * fv[0], w[1] * fv[1], w[2] * fv[2]];
            }
        }
        out
    }

    /// Trace on an end disk (`outlet = false` for `z = 0`).
    pub fn eval_disk(&self, i: usize, grid: &DiskGrid, outlet: bool) -> Vec<[f64; 3]> {
        let mode = &self.modes[i];
        let nr = self.grid.nr;
        assert_eq!(grid.r.len(), nr);
        let kz = if outlet { self.grid.nz } else { 0 };
        let mut out = vec![[0.0; 3]; grid.len()];
        for (it, theta) in grid.theta.nodes.iter().enumerate() {
            let (fv, _) = mode.angular_factors(*theta);
            for ir in 0..nr {
                out[it * nr + ir] = [0.0, 0.0, mode.e[kz * nr + ir] * fv[2]];
            }
        }
        out
    }

    /// Disk grid matching the basis' radial cell centres.
    pub fn disk_grid(&self, n_theta: usize) -> DiskGrid {
        DiskGrid {
            r: super::quadrature::Rule1D::midpoint(0.0, self.grid.radius, self.grid.nr),
            theta: super::quadrature::Rule1D::periodic(n_theta),
        }
    }

    /// Highest Fourier frequency present.
    pub fn max_frequency(&self) -> usize {
        self.modes.iter().map(|m| m.k).max().unwrap_or(0)
    }
}

fn combine(dst: &mut FluidMode, src: &FluidMode, f: f64) {
    for (a, b) in dst.a.iter_mut().zip(&src.a) {
        *a += f * b;
    }
    for (a, b) in dst.c.iter_mut().zip(&src.c) {
        *a += f * b;
    }
    for (a, b) in dst.e.iter_mut().zip(&src.e) {
        *a += f * b;
    }
    for (a, b) in dst.centre_values.iter_mut().zip(&src.centre_values) {
        for i in 0..3 {
            a[i] += f * b[i];
        }
    }
    for (a, b) in dst.centre_grads.iter_mut().zip(&src.centre_grads) {
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += f * b[i][j];
            }
        }
    }
    for (a, b) in dst.wall_values.iter_mut().zip(&src.wall_values) {
        for i in 0..3 {
            a[i] += f * b[i];
        }
    }
}

fn scale(dst: &mut FluidMode, f: f64) {
    let zero = dst.clone();
    combine(dst, &zero, f - 1.0);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FluidReferenceBasis {
        FluidReferenceBasis::build(
            StokesGrid {
                radius: 1.0,
                length: 2.0,
                nr: 8,
                nz: 8,
            },
            8,
        )
        .unwrap()
    }

    #[test]
    fn modes_are_discretely_divergence_free() {
        let b = small();
        for m in &b.modes {
            for g in &m.centre_grads {
                let d = g[0][0] + g[1][1] + g[2][2];
                assert!(d.abs() < 1e-10, "k={} div={d}", m.k);
            }
        }
    }

    #[test]
    fn modes_are_orthonormal() {
        let b = small();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((b.inner(i, j) - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalues_ascend_and_lowest_is_plug_flow() {
        let b = small();
        for w in b.modes.windows(2) {
            assert!(w[0].eigenvalue <= w[1].eigenvalue + 1e-12);
        }
        assert_eq!(b.modes[0].k, 0);
        assert!(b.modes[0].eigenvalue.abs() < 1e-9);
    }

    #[test]
    fn volume_table_matches_quadrature_normalization() {
        let b = small();
        let grid = VolumeGrid::midpoint(1.0, 2.0, 8, 12, 8);
        for i in 0..b.len() {
            let t = b.eval_volume(i, &grid);
            let n: f64 = (0..grid.len())
                .map(|n| grid.reference_weight(n) * crate::numerics::dot3(&t.values[n], &t.values[n]))
                .sum();
            assert!((n - 1.0).abs() < 1e-10);
        }
    }
}
