//! Trilinear and bilinear Lagrange shape functions.

use crate::mesh::CORNERS;

/// Values and isoparametric derivatives of the 8 trilinear shape functions.
pub fn shape_hex8(xi: f64, eta: f64, zeta: f64) -> ([f64; 8], [[f64; 3]; 8]) {
    let mut n = [0.0; 8];
    let mut dn = [[0.0; 3]; 8];
    for (a, c) in CORNERS.iter().enumerate() {
        let (p, q, r) = (1.0 + c[0] * xi, 1.0 + c[1] * eta, 1.0 + c[2] * zeta);
        n[a] = 0.125 * p * q * r;
        dn[a] = [0.125 * c[0] * q * r, 0.125 * p * c[1] * r, 0.125 * p * q * c[2]];
    }
    (n, dn)
}

const QUAD_CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Values and isoparametric derivatives of the 4 bilinear shape functions.
pub fn shape_quad4(xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    let mut n = [0.0; 4];
    let mut dn = [[0.0; 2]; 4];
    for (a, c) in QUAD_CORNERS.iter().enumerate() {
        let (p, q) = (1.0 + c[0] * xi, 1.0 + c[1] * eta);
        n[a] = 0.25 * p * q;
        dn[a] = [0.25 * c[0] * q, 0.25 * p * c[1]];
    }
    (n, dn)
}
