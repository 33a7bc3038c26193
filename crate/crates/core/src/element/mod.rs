//! Element-level residuals and tangents.
//!
//! Local dof layout of a hexahedron: PDGF `0..8`, TGF-β `8..16`, ECM `16..24`,
//! SMC `24..32`, displacement `32..56` (node-major, `32 + 3a + k`).

pub mod flux;
pub mod hex;
pub mod quadrature;
pub mod recovery;
pub mod shape;

use nalgebra::{DMatrix, DVector};

use crate::constitutive::{MaterialFrame, StructuralParams};
use crate::error::{Error, Result};
use crate::kinetics::SpeciesParams;
use crate::mesh::Mesh;
use crate::tensor::Vec3;

pub use flux::{flux_surface_residual_tangent, FacetContribution, FluxPatchParams, PiecewiseLinear};
pub use hex::{hex_residual_tangent, qp_growth};
pub use quadrature::QuadRule;
pub use recovery::{element_j_integral, project_gradj, JIntegral};
pub use shape::{shape_hex8, shape_quad4};

pub const NUM_SPECIES: usize = 4;
pub const ELEMENT_DOFS: usize = 56;
pub const U_OFFSET: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Pdgf,
    Tgf,
    Ecm,
    Smc,
    Displacement,
}

impl Field {
    pub const SPECIES: [Field; 4] = [Field::Pdgf, Field::Tgf, Field::Ecm, Field::Smc];
    pub const ALL: [Field; 5] = [Field::Pdgf, Field::Tgf, Field::Ecm, Field::Smc, Field::Displacement];

    /// Species index `0..4`; `None` for displacement.
    pub fn species_index(self) -> Option<usize> {
        match self {
            Field::Pdgf => Some(0),
            Field::Tgf => Some(1),
            Field::Ecm => Some(2),
            Field::Smc => Some(3),
            Field::Displacement => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Pdgf => "pdgf",
            Field::Tgf => "tgf",
            Field::Ecm => "ecm",
            Field::Smc => "smc",
            Field::Displacement => "u",
        }
    }

    /// Local element dof indices of this field.
    pub fn local_range(self) -> std::ops::Range<usize> {
        match self.species_index() {
            Some(s) => 8 * s..8 * s + 8,
            None => U_OFFSET..ELEMENT_DOFS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// All fields implicit; the full coupled tangent.
    FullyImplicit,
    /// Only the named field implicit; only its diagonal block.
    SemiImplicit(Field),
}

/// Reference-configuration data at one quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpGeometry {
    pub n: [f64; 8],
    pub grad: [Vec3; 8],
    /// Quadrature weight times the reference Jacobian determinant.
    pub w: f64,
}

/// Precomputed shape data of one hexahedron.
#[derive(Debug, Clone, PartialEq)]
pub struct HexGeometry {
    pub qp: Vec<QpGeometry>,
}

impl HexGeometry {
    pub fn new(coords: &[Vec3; 8]) -> Result<Self> {
        let mut qp = Vec::with_capacity(8);
        for (xi, w) in QuadRule::hex_gauss2().iter() {
            let (n, dn) = shape_hex8(xi[0], xi[1], xi[2]);
            let mut jac = nalgebra::Matrix3::<f64>::zeros();
            for a in 0..8 {
                for i in 0..3 {
                    for j in 0..3 {
                        jac[(i, j)] += coords[a][i] * dn[a][j];
                    }
                }
            }
            let det = jac.determinant();
            if !(det > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "non-positive reference Jacobian {det:e} at a quadrature point"
                )));
            }
            let jinv_t = jac.try_inverse().expect("checked determinant").transpose();
            let grad = dn.map(|d| jinv_t * Vec3::new(d[0], d[1], d[2]));
            qp.push(QpGeometry { n, grad, w: w * det });
        }
        Ok(HexGeometry { qp })
    }

    pub fn for_mesh(mesh: &Mesh) -> Result<Vec<Self>> {
        (0..mesh.num_elements())
            .map(|e| HexGeometry::new(&mesh.element_coords(e)))
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.qp.iter().map(|q| q.w).sum()
    }
}

/// Material data of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMaterial {
    pub species: SpeciesParams,
    pub structural: StructuralParams,
    pub frame: MaterialFrame,
}

/// Nodal unknowns of one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementInput {
    /// Species values entering the evaluation, indexed `[species][node]`.
    pub species: [[f64; 8]; 4],
    /// Species values at the start of the step.
    pub species_old: [[f64; 8]; 4],
    pub u: [Vec3; 8],
    /// Recovered nodal J used for `Grad J`.
    pub jn: [f64; 8],
    pub dt: f64,
}

impl ElementInput {
    pub fn get(&self, dof: usize) -> f64 {
        if dof < U_OFFSET {
            self.species[dof / 8][dof % 8]
        } else {
            let k = dof - U_OFFSET;
            self.u[k / 3][k % 3]
        }
    }

    pub fn set(&mut self, dof: usize, v: f64) {
        if dof < U_OFFSET {
            self.species[dof / 8][dof % 8] = v;
        } else {
            let k = dof - U_OFFSET;
            self.u[k / 3][k % 3] = v;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementContribution {
    pub residual: DVector<f64>,
    pub tangent: DMatrix<f64>,
    /// `∂R_species/∂Jn`, rows `0..32`, columns the element's 8 nodes.
    pub d_jn: DMatrix<f64>,
}

impl ElementContribution {
    pub fn zeros() -> Self {
        ElementContribution {
            residual: DVector::zeros(ELEMENT_DOFS),
            tangent: DMatrix::zeros(ELEMENT_DOFS, ELEMENT_DOFS),
            d_jn: DMatrix::zeros(U_OFFSET, 8),
        }
    }

    /// Dense block `K_xy` of the element tangent.
    pub fn block(&self, row: Field, col: Field) -> DMatrix<f64> {
        let r = row.local_range();
        let c = col.local_range();
        self.tangent
            .view((r.start, c.start), (r.len(), c.len()))
            .into_owned()
    }
}
