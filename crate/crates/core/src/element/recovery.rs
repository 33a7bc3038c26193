//! Nodal recovery of the volume ratio `J` so that `Grad J` can be formed with
//! the trilinear shape functions.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::tensor::{Mat3, Vec3};

use super::HexGeometry;

/// `∫ J dV` and `∫ dV` of one element, with the derivative of the former
/// with respect to the element displacements (`3a + k`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JIntegral {
    pub weighted_j: f64,
    pub volume: f64,
    pub d_weighted_j: [f64; 24],
}

/// Deformation gradient at each quadrature point.
pub fn qp_deformation(geom: &HexGeometry, u: &[Vec3; 8]) -> Vec<Mat3> {
    geom.qp
        .iter()
        .map(|q| {
            let mut f = Mat3::identity();
            for a in 0..8 {
                f += u[a] * q.grad[a].transpose();
            }
            f
        })
        .collect()
}

pub fn element_j_integral(geom: &HexGeometry, u: &[Vec3; 8]) -> Result<JIntegral> {
    let mut out = JIntegral {
        weighted_j: 0.0,
        volume: 0.0,
        d_weighted_j: [0.0; 24],
    };
    for (q, f) in geom.qp.iter().zip(qp_deformation(geom, u)) {
        let j = f.determinant();
        if !(j > 0.0) {
            return Err(Error::InvertedPoint(j));
        }
        let finv_t = f.try_inverse().ok_or(Error::InvertedPoint(j))?.transpose();
        out.weighted_j += q.w * j;
        out.volume += q.w;
        for a in 0..8 {
            let d = finv_t * q.grad[a] * (j * q.w);
            for k in 0..3 {
                out.d_weighted_j[3 * a + k] += d[k];
            }
        }
    }
    Ok(out)
}

/// Volume-weighted nodal average of quadrature-point values of `J`:
/// `Jn_a = Σ_{e∋a} Σ_q w_q J_q / Σ_{e∋a} Σ_q w_q`.
pub fn project_gradj(mesh: &Mesh, geoms: &[HexGeometry], qp_j: &[Vec<f64>]) -> Vec<f64> {
    let mut num = vec![0.0; mesh.num_nodes()];
    let mut den = vec![0.0; mesh.num_nodes()];
    for (e, conn) in mesh.elements.iter().enumerate() {
        let (s, v) = geoms[e]
            .qp
            .iter()
            .zip(&qp_j[e])
            .fold((0.0, 0.0), |(s, v), (q, j)| (s + q.w * j, v + q.w));
        for &n in conn {
            num[n] += s;
            den[n] += v;
        }
    }
    num.iter().zip(&den).map(|(s, v)| s / v).collect()
}
