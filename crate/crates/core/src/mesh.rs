//! Structured trilinear hexahedral meshes for the unrestrained block and the
//! arterial-wall quadrant, with named node sets and projected boundary facets.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use crate::element::quadrature::QuadRule;
use crate::element::shape::shape_hex8;
use crate::error::{Error, Result};
use crate::tensor::{Mat3, Vec3};

/// Local node indices of the six faces of a hexahedron.
pub const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [2, 3, 7, 6],
    [0, 4, 7, 3],
    [1, 2, 6, 5],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    Homogeneous,
    Media,
    Adventitia,
}

impl Layer {
    pub fn name(self) -> &'static str {
        match self {
            Layer::Homogeneous => "homogeneous",
            Layer::Media => "media",
            Layer::Adventitia => "adventitia",
        }
    }
}

/// A boundary quadrilateral projected from the bulk mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Facet {
    pub nodes: [usize; 4],
    pub element: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Block {
        side: f64,
        divisions: usize,
    },
    Quadrant {
        length: f64,
        r_inner: f64,
        r_media_outer: f64,
        r_outer: f64,
        divisions: QuadrantDivisions,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadrantDivisions {
    pub media_radial: usize,
    pub adventitia_radial: usize,
    pub circumferential: usize,
    pub longitudinal: usize,
}

impl QuadrantDivisions {
    pub fn radial(&self) -> usize {
        self.media_radial + self.adventitia_radial
    }
}

/// Pair of collagen fiber directions of an element in the reference configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberFrame {
    pub a1: Vec3,
    pub a2: Vec3,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Vec3>,
    pub elements: Vec<[usize; 8]>,
    pub layers: Vec<Layer>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    pub surface_patches: BTreeMap<String, Vec<Facet>>,
    /// Name of the patch carrying the growth-factor flux interface.
    pub flux_patch: Option<String>,
    pub geometry: Geometry,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSet(name.to_string()))
    }

    pub fn patch(&self, name: &str) -> Result<&[Facet]> {
        self.surface_patches
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSet(name.to_string()))
    }

    pub fn flux_facets(&self) -> &[Facet] {
        self.flux_patch
            .as_ref()
            .and_then(|p| self.surface_patches.get(p))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn element_coords(&self, e: usize) -> [Vec3; 8] {
        self.elements[e].map(|n| self.nodes[n])
    }

    /// Reference Jacobian `∂X/∂ξ` of element `e` at an isoparametric point.
    pub fn jacobian(&self, e: usize, xi: [f64; 3]) -> Mat3 {
        let (_, dn) = shape_hex8(xi[0], xi[1], xi[2]);
        let x = self.element_coords(e);
        let mut jac = Mat3::zeros();
        for a in 0..8 {
            for i in 0..3 {
                for j in 0..3 {
                    jac[(i, j)] += x[a][i] * dn[a][j];
                }
            }
        }
        jac
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        QuadRule::hex_gauss2()
            .iter()
            .map(|(xi, w)| w * self.jacobian(e, xi).determinant())
            .sum()
    }

    pub fn volume(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_volume(e)).sum()
    }

    pub fn centroid(&self, e: usize) -> Vec3 {
        self.element_coords(e).iter().sum::<Vec3>() / 8.0
    }

    pub fn nearest_node(&self, p: &Vec3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, x) in self.nodes.iter().enumerate() {
            let d = (x - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Elements incident to each node, in ascending element order.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_nodes()];
        for (e, conn) in self.elements.iter().enumerate() {
            for &n in conn {
                out[n].push(e);
            }
        }
        out
    }

    /// Unit normal of a facet at its center, from the ordered corner nodes.
    pub fn facet_normal(&self, f: &Facet) -> Vec3 {
        let x = f.nodes.map(|n| self.nodes[n]);
        let d_xi = (x[1] + x[2] - x[0] - x[3]) * 0.25;
        let d_eta = (x[2] + x[3] - x[0] - x[1]) * 0.25;
        d_xi.cross(&d_eta).normalize()
    }

    /// Collagen fiber pair at ±alpha from the mesh's reference axis.
    ///
    /// Block: axis X, fibers in the X–Y plane. Quadrant: axis Z, fibers in the
    /// circumferential–longitudinal tangent plane at the element centroid.
    pub fn fiber_frame(&self, e: usize, alpha_deg: f64) -> FiberFrame {
        let a = alpha_deg.to_radians();
        let (axis, transverse) = match self.geometry {
            Geometry::Block { .. } => (Vec3::x(), Vec3::y()),
            Geometry::Quadrant { .. } => {
                let c = self.centroid(e);
                let phi = c.y.atan2(c.x);
                (Vec3::z(), Vec3::new(-phi.sin(), phi.cos(), 0.0))
            }
        };
        FiberFrame {
            a1: axis * a.cos() + transverse * a.sin(),
            a2: axis * a.cos() - transverse * a.sin(),
        }
    }

    /// Checks the structural invariants: connectivity, positive corner
    /// Jacobians, facets lying on their parent elements, one layer tag per element.
    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != self.elements.len() {
            return Err(Error::InvalidMesh("layer tags do not cover all elements".into()));
        }
        for (e, conn) in self.elements.iter().enumerate() {
            for (i, &a) in conn.iter().enumerate() {
                if a >= self.nodes.len() {
                    return Err(Error::InvalidMesh(format!("element {e} references node {a}")));
                }
                if conn[..i].contains(&a) {
                    return Err(Error::InvalidMesh(format!("element {e} repeats node {a}")));
                }
            }
            for c in 0..8 {
                let xi = CORNERS[c];
                let det = self.jacobian(e, xi).determinant();
                if det <= 0.0 {
                    return Err(Error::InvalidMesh(format!(
                        "element {e} has non-positive Jacobian {det:e} at corner {c}"
                    )));
                }
            }
        }
        for (name, facets) in &self.surface_patches {
            for f in facets {
                let conn = self.elements.get(f.element).ok_or_else(|| {
                    Error::InvalidMesh(format!("patch {name} references element {}", f.element))
                })?;
                let mut nodes = f.nodes;
                nodes.sort_unstable();
                let is_face = HEX_FACES.iter().any(|face| {
                    let mut fnodes = face.map(|i| conn[i]);
                    fnodes.sort_unstable();
                    fnodes == nodes
                });
                if !is_face {
                    return Err(Error::InvalidMesh(format!(
                        "patch {name}: facet {:?} is not a face of element {}",
                        f.nodes, f.element
                    )));
                }
            }
        }
        Ok(())
    }
}

pub const CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Connectivity of a structured `n0 × n1 × n2` element grid whose nodes are
/// numbered with the first index fastest.
fn structured_connectivity(n0: usize, n1: usize, n2: usize) -> Vec<[usize; 8]> {
    let id = |i: usize, j: usize, k: usize| i + (n0 + 1) * (j + (n1 + 1) * k);
    let mut elements = Vec::with_capacity(n0 * n1 * n2);
    for k in 0..n2 {
        for j in 0..n1 {
            for i in 0..n0 {
                elements.push([
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ]);
            }
        }
    }
    elements
}

/// Uniform cube `[0, side]³` with `divisions` elements per axis.
///
/// Node sets `x0, x1, y0, y1, z0, z1` hold the six faces; the top face (`z1`)
/// is registered as the flux interface patch `top`.
pub fn build_block(side_length: f64, divisions: usize) -> Result<Mesh> {
    if !(side_length > 0.0) || !side_length.is_finite() {
        return Err(Error::InvalidMesh(format!("side length must be positive, got {side_length}")));
    }
    if divisions == 0 {
        return Err(Error::InvalidMesh("divisions must be at least 1".into()));
    }
    let n = divisions;
    let h = side_length / n as f64;
    let id = |i: usize, j: usize, k: usize| i + (n + 1) * (j + (n + 1) * k);
    let mut nodes = Vec::with_capacity((n + 1).pow(3));
    for k in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                nodes.push(Vec3::new(i as f64 * h, j as f64 * h, k as f64 * h));
            }
        }
    }
    let elements = structured_connectivity(n, n, n);

    let mut node_sets = BTreeMap::new();
    let face = |pred: &dyn Fn(usize, usize, usize) -> bool| {
        let mut set = Vec::new();
        for k in 0..=n {
            for j in 0..=n {
                for i in 0..=n {
                    if pred(i, j, k) {
                        set.push(id(i, j, k));
                    }
                }
            }
        }
        set
    };
    node_sets.insert("x0".to_string(), face(&|i, _, _| i == 0));
    node_sets.insert("x1".to_string(), face(&|i, _, _| i == n));
    node_sets.insert("y0".to_string(), face(&|_, j, _| j == 0));
    node_sets.insert("y1".to_string(), face(&|_, j, _| j == n));
    node_sets.insert("z0".to_string(), face(&|_, _, k| k == 0));
    node_sets.insert("z1".to_string(), face(&|_, _, k| k == n));

    let mut top = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let e = i + n * (j + n * (n - 1));
            let c = elements[e];
            top.push(Facet {
                nodes: [c[4], c[5], c[6], c[7]],
                element: e,
            });
        }
    }
    let mut surface_patches = BTreeMap::new();
    surface_patches.insert("top".to_string(), top);

    Ok(Mesh {
        nodes,
        layers: vec![Layer::Homogeneous; elements.len()],
        elements,
        node_sets,
        surface_patches,
        flux_patch: Some("top".to_string()),
        geometry: Geometry::Block {
            side: side_length,
            divisions,
        },
    })
}

/// Quarter of a two-layer arterial wall, `0 ≤ φ ≤ π/2`, `0 ≤ Z ≤ length`.
///
/// The structured grid is numbered radial-fastest, then circumferential, then
/// longitudinal, and mapped exactly onto the cylindrical surfaces. Node sets:
/// `sym_x` (X = 0 plane), `sym_y` (Y = 0 plane), `z0`, `zl`, `lumen`, `outer`.
/// Patches: `lumen` (whole inner surface) and `damage` (lumen facets inside the
/// damage window), the latter registered as flux interface.
pub fn build_artery_quadrant(
    length: f64,
    r_inner: f64,
    r_media_outer: f64,
    r_outer: f64,
    divisions: QuadrantDivisions,
    damage_window: (f64, f64),
) -> Result<Mesh> {
    if !(length > 0.0) {
        return Err(Error::InvalidMesh(format!("length must be positive, got {length}")));
    }
    if !(0.0 < r_inner && r_inner < r_media_outer && r_media_outer < r_outer) {
        return Err(Error::InvalidMesh(format!(
            "radii must satisfy 0 < r_inner < r_media_outer < r_outer, got {r_inner}, {r_media_outer}, {r_outer}"
        )));
    }
    let d = divisions;
    if d.media_radial == 0 || d.adventitia_radial == 0 || d.circumferential == 0 || d.longitudinal == 0 {
        return Err(Error::InvalidMesh("all division counts must be at least 1".into()));
    }
    let (start, window) = damage_window;
    if !(window > 0.0) {
        return Err(Error::InvalidMesh(format!("damage window length must be positive, got {window}")));
    }
    let tol = 1e-9 * length;
    if start < -tol || start + window > length + tol {
        return Err(Error::InvalidMesh(format!(
            "damage window [{start}, {}] lies outside [0, {length}]",
            start + window
        )));
    }

    let nr = d.radial();
    let nc = d.circumferential;
    let nz = d.longitudinal;
    let radii: Vec<f64> = (0..=nr)
        .map(|i| {
            if i <= d.media_radial {
                r_inner + (r_media_outer - r_inner) * i as f64 / d.media_radial as f64
            } else {
                let k = i - d.media_radial;
                r_media_outer + (r_outer - r_media_outer) * k as f64 / d.adventitia_radial as f64
            }
        })
        .collect();
    let id = |i: usize, j: usize, k: usize| i + (nr + 1) * (j + (nc + 1) * k);
    let mut nodes = Vec::with_capacity((nr + 1) * (nc + 1) * (nz + 1));
    for k in 0..=nz {
        let z = length * k as f64 / nz as f64;
        for j in 0..=nc {
            let phi = FRAC_PI_2 * j as f64 / nc as f64;
            let (s, c) = if j == nc { (1.0, 0.0) } else { phi.sin_cos() };
            for r in radii.iter() {
                nodes.push(Vec3::new(r * c, r * s, z));
            }
        }
    }
    let elements = structured_connectivity(nr, nc, nz);
    let layers = (0..elements.len())
        .map(|e| {
            if e % nr < d.media_radial {
                Layer::Media
            } else {
                Layer::Adventitia
            }
        })
        .collect();

    let collect = |pred: &dyn Fn(usize, usize, usize) -> bool| {
        let mut set = Vec::new();
        for k in 0..=nz {
            for j in 0..=nc {
                for i in 0..=nr {
                    if pred(i, j, k) {
                        set.push(id(i, j, k));
                    }
                }
            }
        }
        set
    };
    let mut node_sets = BTreeMap::new();
    node_sets.insert("sym_y".to_string(), collect(&|_, j, _| j == 0));
    node_sets.insert("sym_x".to_string(), collect(&|_, j, _| j == nc));
    node_sets.insert("z0".to_string(), collect(&|_, _, k| k == 0));
    node_sets.insert("zl".to_string(), collect(&|_, _, k| k == nz));
    node_sets.insert("lumen".to_string(), collect(&|i, _, _| i == 0));
    node_sets.insert("outer".to_string(), collect(&|i, _, _| i == nr));

    let mut lumen = Vec::with_capacity(nc * nz);
    for k in 0..nz {
        for j in 0..nc {
            let e = nr * (j + nc * k);
            let c = elements[e];
            // ordered so that the facet normal points into the lumen (-e_r)
            lumen.push(Facet {
                nodes: [c[0], c[4], c[7], c[3]],
                element: e,
            });
        }
    }
    let damage: Vec<Facet> = lumen
        .iter()
        .filter(|f| {
            let zc = f.nodes.iter().map(|&n| nodes[n].z).sum::<f64>() / 4.0;
            zc > start - tol && zc < start + window + tol
        })
        .copied()
        .collect();
    if damage.is_empty() {
        return Err(Error::InvalidMesh("damage window selects no lumen facets".into()));
    }
    let mut surface_patches = BTreeMap::new();
    surface_patches.insert("lumen".to_string(), lumen);
    surface_patches.insert("damage".to_string(), damage);

    Ok(Mesh {
        nodes,
        elements,
        layers,
        node_sets,
        surface_patches,
        flux_patch: Some("damage".to_string()),
        geometry: Geometry::Quadrant {
            length,
            r_inner,
            r_media_outer,
            r_outer,
            divisions,
        },
    })
}
