//! Discrete bases, quadrature and norms.

pub mod fluid;
pub mod quadrature;
pub mod shell;
pub mod trig;

pub use fluid::{FluidMode, FluidReferenceBasis, StokesGrid};
pub use quadrature::{DiskGrid, Rule1D, SurfaceGrid, VolumeGrid};
pub use shell::{ShellBasis, ShellDisplacement, ShellMode};
pub use trig::{Parity, ShellField, ShellJet};

use crate::numerics::pairwise_sum_by;

/// Frame-component gradient, `grad[i][j] = ∂_j v_i` with `j` over the
/// physical directions `(e_r, e_θ, e_z)`.
pub type Grad3 = [[f64; 3]; 3];

/// Nodal values (and optionally gradients) of a vector field in
/// cylindrical frame components.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VectorTable {
    pub values: Vec<[f64; 3]>,
    pub grads: Vec<Grad3>,
}

impl VectorTable {
    pub fn zeros(n: usize, with_grads: bool) -> Self {
        VectorTable {
            values: vec![[0.0; 3]; n],
            grads: if with_grads {
                vec![[[0.0; 3]; 3]; n]
            } else {
                Vec::new()
            },
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_grads(&self) -> bool {
        !self.grads.is_empty()
    }

    pub fn scale(&self, f: f64) -> Self {
        VectorTable {
            values: self.values.iter().map(|v| v.map(|x| x * f)).collect(),
            grads: self.grads.iter().map(|g| g.map(|row| row.map(|x| x * f))).collect(),
        }
    }

    /// `self + f * other`.
    pub fn add_scaled(&mut self, other: &VectorTable, f: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            for i in 0..3 {
                a[i] += f * b[i];
            }
        }
        if self.has_grads() && other.has_grads() {
            for (a, b) in self.grads.iter_mut().zip(&other.grads) {
                for i in 0..3 {
                    for j in 0..3 {
                        a[i][j] += f * b[i][j];
                    }
                }
            }
        }
    }

    /// Divergence (trace of the frame gradient) per node.
    pub fn divergence(&self) -> Vec<f64> {
        self.grads.iter().map(|g| g[0][0] + g[1][1] + g[2][2]).collect()
    }
}

/// `L^p` norm of pointwise magnitudes with the given weights; `p = ∞`
/// returns the maximum magnitude.
pub fn lp_norm(magnitudes: &[f64], weights: &[f64], p: f64) -> f64 {
    assert!(p >= 1.0);
    if p.is_infinite() {
        return magnitudes.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let s = pairwise_sum_by(0, magnitudes.len(), &|i| weights[i] * magnitudes[i].abs().powf(p));
    s.powf(1.0 / p)
}

/// `L^p` (`k = 0`) or `W^{1,p}` (`k = 1`) norm of a vector field given as a
/// table at nodes with the supplied weights.
pub fn vector_norm(field: &VectorTable, weights: &[f64], p: f64, k: u8) -> f64 {
    let vals: Vec<f64> = field.values.iter().map(|v| crate::numerics::norm3(v)).collect();
    let base = lp_norm(&vals, weights, p);
    if k == 0 {
        return base;
    }
    assert!(field.has_grads(), "W^{{1,p}} norm needs gradients");
    let grads: Vec<f64> = field
        .grads
        .iter()
        .map(|g| g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let gn = lp_norm(&grads, weights, p);
    if p.is_infinite() {
        base.max(gn)
    } else {
        (base.powf(p) + gn.powf(p)).powf(1.0 / p)
    }
}

/// `L^p` or `W^{1,p}` norm of a scalar shell field given by its jets on a
/// surface grid (flat measure `dθ dz`, gradient `(∂θ, ∂z)`).
pub fn shell_norm(jets: &[ShellJet], grid: &SurfaceGrid, p: f64, k: u8) -> f64 {
    let w = grid.weights();
    let vals: Vec<f64> = jets.iter().map(|j| j.value).collect();
    let base = lp_norm(&vals, &w, p);
    if k == 0 {
        return base;
    }
    let grads: Vec<f64> = jets.iter().map(|j| j.d_theta.hypot(j.d_z)).collect();
    let gn = lp_norm(&grads, &w, p);
    if p.is_infinite() {
        base.max(gn)
    } else {
        (base.powf(p) + gn.powf(p)).powf(1.0 / p)
    }
}
