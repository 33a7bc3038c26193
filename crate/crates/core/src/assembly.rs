//! Global model description, dof layouts and deterministic sparse assembly.
//!
//! Nodal dofs are interleaved as `(c⁰_P, c⁰_T, c⁰_E, ρ⁰_S, u_x, u_y, u_z)`.
//! The staggered subsystems use one dof per node (species) or three (displacement).

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::constitutive::MaterialFrame;
use crate::element::{
    element_j_integral, flux_surface_residual_tangent, hex_residual_tangent, ElementContribution,
    ElementInput, ElementMaterial, Field, FluxPatchParams, HexGeometry, JIntegral, Scheme, U_OFFSET,
};
use crate::error::{Error, Result};
use crate::mesh::{Facet, Mesh};
use crate::linalg::{CscMatrix, SparsePattern};
use crate::tensor::Vec3;

pub const DOFS_PER_NODE: usize = 7;
/// Nodal component index of the auxiliary nodal-J unknown of [`Layout::Augmented`].
pub const JN_COMPONENT: usize = 7;
const AUGMENTED_DOFS: usize = 8;

/// Elements evaluated in parallel per batch before the serial scatter.
const BATCH: usize = 256;

/// Which unknowns a global system contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    Monolithic,
    /// Monolithic unknowns plus the recovered nodal J as an eighth nodal dof.
    ///
    /// Its rows `δJn − (∂Jn/∂u) δu = 0` keep the exact Newton step while the
    /// stencil stays one element ring wide.
    Augmented,
    Species(usize),
    Displacement,
}

impl Layout {
    pub fn of_field(field: Field) -> Layout {
        match field.species_index() {
            Some(s) => Layout::Species(s),
            None => Layout::Displacement,
        }
    }

    pub fn size(self, num_nodes: usize) -> usize {
        match self {
            Layout::Monolithic => DOFS_PER_NODE * num_nodes,
            Layout::Augmented => AUGMENTED_DOFS * num_nodes,
            Layout::Species(_) => num_nodes,
            Layout::Displacement => 3 * num_nodes,
        }
    }

    /// Global dof of nodal component `comp` (0–3 species, 4–6 displacement).
    #[inline]
    pub fn dof(self, node: usize, comp: usize) -> Option<usize> {
        match self {
            Layout::Monolithic => Some(DOFS_PER_NODE * node + comp),
            Layout::Augmented => Some(AUGMENTED_DOFS * node + comp),
            Layout::Species(s) => (comp == s).then_some(node),
            Layout::Displacement => (comp >= 4).then(|| 3 * node + comp - 4),
        }
    }

    /// Nodal component of a global dof.
    pub fn component(self, dof: usize) -> usize {
        match self {
            Layout::Monolithic => dof % DOFS_PER_NODE,
            Layout::Augmented => dof % AUGMENTED_DOFS,
            Layout::Species(s) => s,
            Layout::Displacement => 4 + dof % 3,
        }
    }

    /// Node of a global dof.
    pub fn node(self, dof: usize) -> usize {
        match self {
            Layout::Monolithic => dof / DOFS_PER_NODE,
            Layout::Augmented => dof / AUGMENTED_DOFS,
            Layout::Species(_) => dof,
            Layout::Displacement => dof / 3,
        }
    }

    pub fn scheme(self) -> Scheme {
        match self {
            Layout::Monolithic | Layout::Augmented => Scheme::FullyImplicit,
            Layout::Species(s) => Scheme::SemiImplicit(Field::SPECIES[s]),
            Layout::Displacement => Scheme::SemiImplicit(Field::Displacement),
        }
    }
}

/// Nodal component of a local element dof, and its element node.
#[inline]
fn local_component(l: usize) -> (usize, usize) {
    if l < U_OFFSET {
        (l % 8, l / 8)
    } else {
        let k = l - U_OFFSET;
        (k / 3, 4 + k % 3)
    }
}

/// Nodal unknowns at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    /// `[c⁰_P, c⁰_T, c⁰_E, ρ⁰_S]`, one value per node.
    pub species: [Vec<f64>; 4],
    /// Displacements, `3 · node + k`.
    pub u: Vec<f64>,
}

impl State {
    /// Healthy homeostatic wall: no growth factors, equilibrium ECM and SMC, no displacement.
    pub fn initial(num_nodes: usize, c_e: f64, rho_s: f64) -> Self {
        State {
            t: 0.0,
            species: [
                vec![0.0; num_nodes],
                vec![0.0; num_nodes],
                vec![c_e; num_nodes],
                vec![rho_s; num_nodes],
            ],
            u: vec![0.0; 3 * num_nodes],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.species[0].len()
    }

    pub fn node_u(&self, n: usize) -> Vec3 {
        Vec3::new(self.u[3 * n], self.u[3 * n + 1], self.u[3 * n + 2])
    }

    #[inline]
    pub fn get(&self, node: usize, comp: usize) -> f64 {
        if comp < 4 {
            self.species[comp][node]
        } else {
            self.u[3 * node + comp - 4]
        }
    }

    #[inline]
    pub fn set(&mut self, node: usize, comp: usize, v: f64) {
        if comp < 4 {
            self.species[comp][node] = v;
        } else {
            self.u[3 * node + comp - 4] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.species.iter().flatten().chain(&self.u).all(|v| v.is_finite())
    }
}

/// A prescribed nodal displacement component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixed {
    pub node: usize,
    /// 0, 1 or 2 for x, y, z.
    pub component: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub matrix: CscMatrix,
    pub residual: Vec<f64>,
}

/// Mesh, materials and boundary data, with cached geometry and sparsity patterns.
#[derive(Debug)]
pub struct Model {
    pub mesh: Mesh,
    pub geoms: Vec<HexGeometry>,
    pub materials: Vec<ElementMaterial>,
    pub flux: Option<FluxPatchParams>,
    pub flux_facets: Vec<Facet>,
    pub fixed: Vec<Fixed>,
    /// Internal unknown scales `[c_P, c_T, c_E, ρ_S, u]`.
    pub scales: [f64; 5],
    node_volume: Vec<f64>,
    node_elements: Vec<Vec<usize>>,
    patterns: [OnceLock<Arc<SparsePattern>>; 4],
}

impl Model {
    /// `materials` holds one entry per element.
    pub fn new(
        mesh: Mesh,
        materials: Vec<ElementMaterial>,
        flux: Option<FluxPatchParams>,
        fixed: Vec<Fixed>,
    ) -> Result<Self> {
        mesh.validate()?;
        if materials.len() != mesh.num_elements() {
            return Err(Error::InvalidParameter(format!(
                "{} materials for {} elements",
                materials.len(),
                mesh.num_elements()
            )));
        }
        for m in &materials {
            m.species.validate()?;
            m.structural.validate()?;
        }
        if let Some(f) = &flux {
            f.validate()?;
        }
        for f in &fixed {
            if f.node >= mesh.num_nodes() || f.component > 2 {
                return Err(Error::InvalidParameter(format!(
                    "fixed dof (node {}, component {}) is out of range",
                    f.node, f.component
                )));
            }
        }
        let geoms = HexGeometry::for_mesh(&mesh)?;
        let node_elements = mesh.node_elements();
        let node_volume = node_elements
            .iter()
            .map(|es| es.iter().map(|&e| geoms[e].volume()).sum())
            .collect();
        let flux_facets = mesh.flux_facets().to_vec();
        let s = &materials[0].species;
        let scales = [s.c_p_th, s.c_t_th, s.c_e_th, s.rho_s_eq, 1.0];
        Ok(Model {
            mesh,
            geoms,
            materials,
            flux,
            flux_facets,
            fixed,
            scales,
            node_volume,
            node_elements,
            patterns: Default::default(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    /// Elements containing node `n`.
    pub fn node_elements(&self, n: usize) -> &[usize] {
        &self.node_elements[n]
    }

    /// Table-3 initial state of this model.
    pub fn initial_state(&self) -> State {
        let s = &self.materials[0].species;
        State::initial(self.num_nodes(), s.c_e_eq, s.rho_s_eq)
    }

    /// Scale of each dof of a layout.
    pub fn dof_scales(&self, layout: Layout) -> Vec<f64> {
        (0..layout.size(self.num_nodes()))
            .map(|d| {
                let c = layout.component(d);
                self.scales[c.min(4)]
            })
            .collect()
    }

    /// Prescribed dofs of a layout with their values.
    pub fn dirichlet(&self, layout: Layout) -> Vec<(usize, f64)> {
        self.fixed
            .iter()
            .filter_map(|f| layout.dof(f.node, 4 + f.component).map(|d| (d, f.value)))
            .collect()
    }

    pub fn element_frame(&self, e: usize) -> &MaterialFrame {
        &self.materials[e].frame
    }

    /// Nodes sharing an element with each node.
    fn node_neighbors(&self) -> Vec<Vec<usize>> {
        self.node_elements
            .iter()
            .map(|es| {
                let set: BTreeSet<usize> = es.iter().flat_map(|&e| self.mesh.elements[e]).collect();
                set.into_iter().collect()
            })
            .collect()
    }

    pub fn pattern(&self, layout: Layout) -> Arc<SparsePattern> {
        let slot = match layout {
            Layout::Monolithic => 0,
            Layout::Species(_) => 1,
            Layout::Displacement => 2,
            Layout::Augmented => 3,
        };
        self.patterns[slot].get_or_init(|| Arc::new(self.build_pattern(layout))).clone()
    }

    fn build_pattern(&self, layout: Layout) -> SparsePattern {
        let n1 = self.node_neighbors();
        let n = self.num_nodes();
        let columns = match layout {
            Layout::Species(_) => n1,
            Layout::Displacement => (0..3 * n)
                .map(|d| n1[d / 3].iter().flat_map(|&b| (0..3).map(move |k| 3 * b + k)).collect())
                .collect(),
            Layout::Augmented => (0..AUGMENTED_DOFS * n)
                .map(|d| {
                    n1[d / AUGMENTED_DOFS]
                        .iter()
                        .flat_map(|&b| (0..AUGMENTED_DOFS).map(move |c| AUGMENTED_DOFS * b + c))
                        .collect()
                })
                .collect(),
            Layout::Monolithic => {
                // Grad J recovery couples species rows to the displacements of the second node ring.
                let n2: Vec<Vec<usize>> = n1
                    .iter()
                    .map(|nb| {
                        let set: BTreeSet<usize> = nb.iter().flat_map(|&b| n1[b].iter().copied()).collect();
                        set.into_iter().collect()
                    })
                    .collect();
                (0..DOFS_PER_NODE * n)
                    .map(|d| {
                        let (node, comp) = (d / DOFS_PER_NODE, d % DOFS_PER_NODE);
                        let mut rows: Vec<usize> =
                            n1[node].iter().flat_map(|&b| (0..DOFS_PER_NODE).map(move |c| DOFS_PER_NODE * b + c)).collect();
                        let other: std::ops::Range<usize> = if comp < 4 { 4..7 } else { 0..4 };
                        rows.extend(n2[node].iter().flat_map(|&b| other.clone().map(move |c| DOFS_PER_NODE * b + c)));
                        rows
                    })
                    .collect()
            }
        };
        SparsePattern::from_columns(columns)
    }

    fn element_u(&self, e: usize, state: &State) -> [Vec3; 8] {
        self.mesh.elements[e].map(|n| state.node_u(n))
    }

    /// Per-element `∫ J dV` and the recovered nodal `J`.
    pub fn nodal_j(&self, state: &State) -> Result<(Vec<f64>, Vec<JIntegral>)> {
        let integrals: Vec<JIntegral> = (0..self.mesh.num_elements())
            .into_par_iter()
            .map(|e| {
                element_j_integral(&self.geoms[e], &self.element_u(e, state)).map_err(|err| element_error(e, err))
            })
            .collect::<Result<_>>()?;
        let mut jn = vec![0.0; self.num_nodes()];
        for (e, conn) in self.mesh.elements.iter().enumerate() {
            for &n in conn {
                jn[n] += integrals[e].weighted_j;
            }
        }
        for (j, v) in jn.iter_mut().zip(&self.node_volume) {
            *j /= v;
        }
        Ok((jn, integrals))
    }

    pub fn element_input(&self, e: usize, current: &State, old: &State, jn: &[f64], dt: f64) -> ElementInput {
        let conn = &self.mesh.elements[e];
        ElementInput {
            species: std::array::from_fn(|s| conn.map(|n| current.species[s][n])),
            species_old: std::array::from_fn(|s| conn.map(|n| old.species[s][n])),
            u: conn.map(|n| current.node_u(n)),
            jn: conn.map(|n| jn[n]),
            dt,
        }
    }

    /// Residual and tangent of a global system at `current`.
    ///
    /// `old` supplies the species values of the time derivative and `t_new` the
    /// ambient concentrations of the flux interface. Fields outside the layout
    /// are taken from `current` as they are.
    pub fn assemble(&self, layout: Layout, current: &State, old: &State, t_new: f64, dt: f64) -> Result<Assembled> {
        let pattern = self.pattern(layout);
        let size = pattern.dim();
        let mut matrix = CscMatrix::zeros(pattern);
        let mut residual = vec![0.0; size];
        let scheme = layout.scheme();
        let (jn, integrals) = self.nodal_j(current)?;
        let jn_grad = if layout == Layout::Monolithic {
            Some(self.jn_derivatives(&integrals))
        } else {
            None
        };
        let local: Vec<usize> = match scheme {
            Scheme::FullyImplicit => (0..56).collect(),
            Scheme::SemiImplicit(f) => f.local_range().collect(),
        };

        let ne = self.mesh.num_elements();
        for start in (0..ne).step_by(BATCH) {
            let end = (start + BATCH).min(ne);
            let batch: Vec<ElementContribution> = (start..end)
                .into_par_iter()
                .map(|e| {
                    let input = self.element_input(e, current, old, &jn, dt);
                    hex_residual_tangent(&self.geoms[e], &input, &self.materials[e], scheme)
                        .map_err(|err| element_error(e, err))
                })
                .collect::<Result<_>>()?;
            for (e, c) in (start..end).zip(batch) {
                let conn = &self.mesh.elements[e];
                let globals: Vec<(usize, usize)> = local
                    .iter()
                    .filter_map(|&l| {
                        let (a, comp) = local_component(l);
                        layout.dof(conn[a], comp).map(|g| (l, g))
                    })
                    .collect();
                for &(lr, gr) in &globals {
                    residual[gr] += c.residual[lr];
                    for &(lc, gc) in &globals {
                        matrix.add(gr, gc, c.tangent[(lr, lc)]);
                    }
                }
                if layout == Layout::Augmented {
                    for lr in 0..U_OFFSET {
                        let (a, comp) = local_component(lr);
                        let gr = AUGMENTED_DOFS * conn[a] + comp;
                        for (b, &nb) in conn.iter().enumerate() {
                            matrix.add(gr, AUGMENTED_DOFS * nb + JN_COMPONENT, c.d_jn[(lr, b)]);
                        }
                    }
                }
                if let Some(jg) = &jn_grad {
                    for lr in 0..U_OFFSET {
                        let (a, comp) = local_component(lr);
                        let gr = DOFS_PER_NODE * conn[a] + comp;
                        for (b, &nb) in conn.iter().enumerate() {
                            let coef = c.d_jn[(lr, b)];
                            if coef != 0.0 {
                                for &(gc, v) in &jg[nb] {
                                    matrix.add(gr, gc, coef * v);
                                }
                            }
                        }
                    }
                }
            }
        }
        if layout == Layout::Augmented {
            for (b, row) in self.jn_derivatives(&integrals).iter().enumerate() {
                let gr = AUGMENTED_DOFS * b + JN_COMPONENT;
                matrix.add(gr, gr, 1.0);
                for &(d, v) in row {
                    let (node, comp) = (d / DOFS_PER_NODE, d % DOFS_PER_NODE);
                    matrix.add(gr, AUGMENTED_DOFS * node + comp, -v);
                }
            }
        }
        self.assemble_flux(layout, current, t_new, &mut matrix, &mut residual)?;
        Ok(Assembled { matrix, residual })
    }

    /// `∂Jn_b/∂u` for every node as sparse rows of monolithic displacement dofs.
    fn jn_derivatives(&self, integrals: &[JIntegral]) -> Vec<Vec<(usize, f64)>> {
        (0..self.num_nodes())
            .map(|b| {
                let mut entries: Vec<(usize, f64)> = Vec::new();
                for &e in &self.node_elements[b] {
                    for (a, &n) in self.mesh.elements[e].iter().enumerate() {
                        for k in 0..3 {
                            entries.push((DOFS_PER_NODE * n + 4 + k, integrals[e].d_weighted_j[3 * a + k]));
                        }
                    }
                }
                entries.sort_by_key(|&(d, _)| d);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
                for (d, v) in entries {
                    match merged.last_mut() {
                        Some(last) if last.0 == d => last.1 += v,
                        _ => merged.push((d, v)),
                    }
                }
                for m in merged.iter_mut() {
                    m.1 /= self.node_volume[b];
                }
                merged
            })
            .collect()
    }

    fn assemble_flux(
        &self,
        layout: Layout,
        current: &State,
        t_new: f64,
        matrix: &mut CscMatrix,
        residual: &mut [f64],
    ) -> Result<()> {
        let Some(flux) = &self.flux else {
            return Ok(());
        };
        let species: Vec<usize> = match layout {
            Layout::Monolithic | Layout::Augmented => vec![0, 1],
            Layout::Species(s) if s < 2 => vec![s],
            _ => return Ok(()),
        };
        let with_u = matches!(layout, Layout::Monolithic | Layout::Augmented);
        for (fi, facet) in self.flux_facets.iter().enumerate() {
            let x = facet.nodes.map(|n| self.mesh.nodes[n]);
            let u = facet.nodes.map(|n| current.node_u(n));
            for &s in &species {
                let ambient = if s == 0 { &flux.ambient_p } else { &flux.ambient_t };
                let c0 = facet.nodes.map(|n| current.species[s][n]);
                let c = flux_surface_residual_tangent(&x, &u, &c0, flux.p_en, ambient.eval(t_new)).map_err(|e| match e {
                    Error::DegenerateFacet(_) => Error::DegenerateFacet(fi),
                    other => other,
                })?;
                for i in 0..4 {
                    let gr = layout.dof(facet.nodes[i], s).expect("species in layout");
                    residual[gr] += c.residual[i];
                    for j in 0..4 {
                        let gc = layout.dof(facet.nodes[j], s).expect("species in layout");
                        matrix.add(gr, gc, c.k_cc[i][j]);
                        if with_u {
                            for k in 0..3 {
                                let gu = layout.dof(facet.nodes[j], 4 + k).expect("monolithic");
                                matrix.add(gr, gu, c.k_cu[i][3 * j + k]);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Copies the unknowns of a layout from a global vector into a state.
    pub fn scatter(&self, layout: Layout, values: &[f64], state: &mut State) {
        for n in 0..self.num_nodes() {
            for comp in 0..DOFS_PER_NODE {
                if let Some(d) = layout.dof(n, comp) {
                    state.set(n, comp, values[d]);
                }
            }
        }
    }

    /// Gathers the unknowns of a layout from a state.
    pub fn gather(&self, layout: Layout, state: &State) -> Vec<f64> {
        let mut out = vec![0.0; layout.size(self.num_nodes())];
        for n in 0..self.num_nodes() {
            for comp in 0..DOFS_PER_NODE {
                if let Some(d) = layout.dof(n, comp) {
                    out[d] = state.get(n, comp);
                }
            }
        }
        out
    }

    pub fn gather_dof(&self, layout: Layout, state: &State, dof: usize) -> f64 {
        state.get(layout.node(dof), layout.component(dof))
    }

    /// `∫ c⁰ dV` of each species.
    pub fn species_content(&self, state: &State) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (e, conn) in self.mesh.elements.iter().enumerate() {
            for q in &self.geoms[e].qp {
                for (s, total) in out.iter_mut().enumerate() {
                    let v: f64 = (0..8).map(|a| q.n[a] * state.species[s][conn[a]]).sum();
                    *total += q.w * v;
                }
            }
        }
        out
    }
}

fn element_error(e: usize, err: Error) -> Error {
    match err {
        Error::InvertedPoint(det_f) => Error::InvertedElement { element: e, det_f },
        other => other,
    }
}
