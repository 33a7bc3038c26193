//! Gauss–Legendre rules on the reference hexahedron and quadrilateral.

const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
}

impl<const D: usize> QuadRule<D> {
    pub fn iter(&self) -> impl Iterator<Item = ([f64; D], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl QuadRule<3> {
    /// 2×2×2 rule, ordered like the hexahedron corners.
    pub fn hex_gauss2() -> Self {
        let points = crate::mesh::CORNERS
            .iter()
            .map(|c| [c[0] * G, c[1] * G, c[2] * G])
            .collect();
        QuadRule {
            points,
            weights: vec![1.0; 8],
        }
    }
}

impl QuadRule<2> {
    /// 2×2 rule, counter-clockwise from (−,−).
    pub fn quad_gauss2() -> Self {
        QuadRule {
            points: vec![[-G, -G], [G, -G], [G, G], [-G, G]],
            weights: vec![1.0; 4],
        }
    }
}
