//! Five-field trilinear hexahedron: species transport residuals and quasi-static
//! momentum balance, with the consistent tangent.

use crate::constitutive::{growth_from_density, stress_and_tangent, GrowthState};
use crate::error::{Error, Result};
use crate::kinetics::{
    ecm_reaction_linearized, pdgf_flux_terms, pdgf_reaction_linearized, smc_flux_terms,
    smc_reaction_linearized, tgf_flux_terms, tgf_reaction_linearized, FluxTerm, Linearized,
    SpeciesPointState, J,
};
use crate::tensor::{flat, Mat3, Vec3};

use super::{ElementContribution, ElementInput, ElementMaterial, Field, HexGeometry, Scheme, U_OFFSET};

fn reaction(species: usize, s: &SpeciesPointState, m: &ElementMaterial) -> Linearized {
    match species {
        0 => pdgf_reaction_linearized(s, &m.species),
        1 => tgf_reaction_linearized(s, &m.species),
        2 => ecm_reaction_linearized(s, &m.species),
        _ => smc_reaction_linearized(s, &m.species),
    }
}

fn flux_terms(species: usize, s: &SpeciesPointState, m: &ElementMaterial) -> Vec<FluxTerm> {
    match species {
        0 => pdgf_flux_terms(&m.species).to_vec(),
        1 => tgf_flux_terms(&m.species).to_vec(),
        2 => Vec::new(),
        _ => smc_flux_terms(s, &m.species).to_vec(),
    }
}

/// Residual and tangent of one hexahedron.
///
/// With [`Scheme::FullyImplicit`] every block and `∂R/∂Jn` is filled; with
/// [`Scheme::SemiImplicit`] only the residual rows and diagonal block of that field.
pub fn hex_residual_tangent(
    geom: &HexGeometry,
    input: &ElementInput,
    mat: &ElementMaterial,
    scheme: Scheme,
) -> Result<ElementContribution> {
    if !(input.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {}", input.dt)));
    }
    let mut out = ElementContribution::zeros();
    let full = scheme == Scheme::FullyImplicit;
    let species_rows: Vec<usize> = match scheme {
        Scheme::FullyImplicit => (0..4).collect(),
        Scheme::SemiImplicit(f) => f.species_index().into_iter().collect(),
    };
    let mechanics = full || scheme == Scheme::SemiImplicit(Field::Displacement);

    for q in &geom.qp {
        let mut vals = [0.0; 4];
        let mut vals_old = [0.0; 4];
        let mut grads = [Vec3::zeros(); 4];
        for s in 0..4 {
            for a in 0..8 {
                vals[s] += q.n[a] * input.species[s][a];
                vals_old[s] += q.n[a] * input.species_old[s][a];
                grads[s] += q.grad[a] * input.species[s][a];
            }
        }
        let mut f = Mat3::identity();
        let mut grad_j = Vec3::zeros();
        for a in 0..8 {
            f += input.u[a] * q.grad[a].transpose();
            grad_j += q.grad[a] * input.jn[a];
        }
        let j = f.determinant();
        if !(j > 0.0) {
            return Err(Error::InvertedPoint(j));
        }
        let finv = f.try_inverse().ok_or(Error::InvertedPoint(j))?;
        let finv_t = finv.transpose();
        let cinv = finv * finv_t;
        let sp = SpeciesPointState {
            c_p: vals[0],
            c_t: vals[1],
            c_e: vals[2],
            rho: vals[3],
            grad_c_p: grads[0],
            grad_c_t: grads[1],
            grad_c_e: grads[2],
            j,
            grad_j,
            cinv,
        };
        // dJ/du_{b,k} and the columns of F⁻¹ used by dC⁻¹/du
        let dj: Vec<Vec3> = q.grad.iter().map(|g| finv_t * g * j).collect();
        let fk: [Vec3; 3] = [finv.column(0).into(), finv.column(1).into(), finv.column(2).into()];

        for &x in &species_rows {
            let r = reaction(x, &sp, mat);
            let terms = flux_terms(x, &sp, mat);
            let flux: Vec3 = terms.iter().map(|t| t.flux(&sp)).sum();
            let rate = (vals[x] - vals_old[x]) / input.dt - r.value;
            for a in 0..8 {
                out.residual[8 * x + a] += q.w * (q.n[a] * rate + q.grad[a].dot(&flux));
            }

            let cols: Vec<usize> = if full { (0..4).collect() } else { vec![x] };
            for &y in &cols {
                let dq_value: Vec3 = terms.iter().map(|t| t.d_value(&sp, y)).sum();
                let dq_grad = terms
                    .iter()
                    .filter(|t| t.species == y)
                    .map(|t| t.d_gradient(&sp))
                    .fold(Mat3::zeros(), |acc, m| acc + m);
                let mass = if x == y { 1.0 / input.dt } else { 0.0 } - r.d[y];
                for b in 0..8 {
                    let dq = dq_value * q.n[b] + dq_grad * q.grad[b];
                    for a in 0..8 {
                        out.tangent[(8 * x + a, 8 * y + b)] +=
                            q.w * (q.n[a] * mass * q.n[b] + q.grad[a].dot(&dq));
                    }
                }
            }

            if full {
                let dq_dj: Vec3 = terms.iter().map(|t| t.d_value(&sp, J)).sum();
                let dq_dgradj = terms
                    .iter()
                    .map(|t| t.d_grad_j(&sp))
                    .fold(Mat3::zeros(), |acc, m| acc + m);
                for b in 0..8 {
                    let cinv_gb = cinv * q.grad[b];
                    for k in 0..3 {
                        // δC⁻¹ w = −f_k (grad_b · C⁻¹ w) − C⁻¹ grad_b (f_k · w)
                        let mut dq = dq_dj * dj[b][k];
                        for t in &terms {
                            let w = t.driving_gradient(&sp);
                            dq -= (fk[k] * cinv_gb.dot(&w) + cinv_gb * fk[k].dot(&w)) * t.k.value;
                        }
                        let col = U_OFFSET + 3 * b + k;
                        for a in 0..8 {
                            out.tangent[(8 * x + a, col)] +=
                                q.w * (-q.n[a] * r.d[J] * dj[b][k] + q.grad[a].dot(&dq));
                        }
                    }
                    let dq = dq_dgradj * q.grad[b];
                    for a in 0..8 {
                        out.d_jn[(8 * x + a, b)] += q.w * q.grad[a].dot(&dq);
                    }
                }
            }
        }

        if mechanics {
            let st = stress_and_tangent(&f, vals[3], vals[2], &mat.frame, &mat.structural)?;
            // t_a[i][kL] = Σ_J grad_a,J A[iJ, kL]
            let mut t = [[[0.0; 9]; 3]; 8];
            for a in 0..8 {
                let pg = st.p * q.grad[a];
                for i in 0..3 {
                    out.residual[U_OFFSET + 3 * a + i] += q.w * pg[i];
                    for kl in 0..9 {
                        let mut s = 0.0;
                        for jj in 0..3 {
                            s += q.grad[a][jj] * st.a[(flat(i, jj), kl)];
                        }
                        t[a][i][kl] = s;
                    }
                }
            }
            for a in 0..8 {
                for b in 0..8 {
                    for i in 0..3 {
                        for k in 0..3 {
                            let mut s = 0.0;
                            for l in 0..3 {
                                s += t[a][i][flat(k, l)] * q.grad[b][l];
                            }
                            out.tangent[(U_OFFSET + 3 * a + i, U_OFFSET + 3 * b + k)] += q.w * s;
                        }
                    }
                }
            }
            if full {
                for a in 0..8 {
                    let drho = st.dp_drho * q.grad[a];
                    let dce = st.dp_dce * q.grad[a];
                    for i in 0..3 {
                        for b in 0..8 {
                            out.tangent[(U_OFFSET + 3 * a + i, 24 + b)] += q.w * drho[i] * q.n[b];
                            out.tangent[(U_OFFSET + 3 * a + i, 16 + b)] += q.w * dce[i] * q.n[b];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Growth state at each quadrature point from the nodal SMC density.
pub fn qp_growth(geom: &HexGeometry, rho: &[f64; 8], mat: &ElementMaterial) -> Vec<GrowthState> {
    geom.qp
        .iter()
        .map(|q| {
            let r: f64 = (0..8).map(|a| q.n[a] * rho[a]).sum();
            growth_from_density(r, &mat.structural, mat.frame.gamma)
        })
        .collect()
}
