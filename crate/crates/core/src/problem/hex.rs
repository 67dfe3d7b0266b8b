//! Trilinear 8-node hexahedron for isotropic linear elasticity.

use crate::error::{Error, Result};

/// Reference corner signs, counter-clockwise bottom face then top face.
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

/// 6x6 constitutive matrix with engineering shear strains
/// (xx, yy, zz, xy, yz, zx).
pub fn isotropic_d(young: f64, poisson: f64) -> [[f64; 6]; 6] {
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    let mut d = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = lambda;
        }
        d[i][i] = lambda + 2.0 * mu;
        d[i + 3][i + 3] = mu;
    }
    d
}

fn shape_derivatives(xi: [f64; 3]) -> [[f64; 3]; 8] {
    let mut dn = [[0.0; 3]; 8];
    for (a, c) in CORNERS.iter().enumerate() {
        let f = [1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1], 1.0 + c[2] * xi[2]];
        dn[a][0] = 0.125 * c[0] * f[1] * f[2];
        dn[a][1] = 0.125 * c[1] * f[0] * f[2];
        dn[a][2] = 0.125 * c[2] * f[0] * f[1];
    }
    dn
}

fn invert3(j: &[[f64; 3]; 3]) -> (f64, [[f64; 3]; 3]) {
    let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
        - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
        + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
    let inv = [
        [
            (j[1][1] * j[2][2] - j[1][2] * j[2][1]) / det,
            (j[0][2] * j[2][1] - j[0][1] * j[2][2]) / det,
            (j[0][1] * j[1][2] - j[0][2] * j[1][1]) / det,
        ],
        [
            (j[1][2] * j[2][0] - j[1][0] * j[2][2]) / det,
            (j[0][0] * j[2][2] - j[0][2] * j[2][0]) / det,
            (j[0][2] * j[1][0] - j[0][0] * j[1][2]) / det,
        ],
        [
            (j[1][0] * j[2][1] - j[1][1] * j[2][0]) / det,
            (j[0][1] * j[2][0] - j[0][0] * j[2][1]) / det,
            (j[0][0] * j[1][1] - j[0][1] * j[1][0]) / det,
        ],
    ];
    (det, inv)
}

/// 24x24 element stiffness with 2x2x2 Gauss quadrature. DOF ordering is
/// node-major: `3*a + component`. The result is exactly symmetric.
pub fn element_stiffness(
    coords: &[[f64; 3]; 8],
    d: &[[f64; 6]; 6],
) -> Result<[[f64; 24]; 24]> {
    let g = 1.0 / 3f64.sqrt();
    let mut k = [[0.0; 24]; 24];
    for &gx in &[-g, g] {
        for &gy in &[-g, g] {
            for &gz in &[-g, g] {
                let dn = shape_derivatives([gx, gy, gz]);
                // J[r][c] = d x_c / d xi_r
                let mut jac = [[0.0; 3]; 3];
                for a in 0..8 {
                    for r in 0..3 {
                        for c in 0..3 {
                            jac[r][c] += dn[a][r] * coords[a][c];
                        }
                    }
                }
                let (det, inv) = invert3(&jac);
                if !(det > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "non-positive element Jacobian {det:e}"
                    )));
                }
                // physical gradients
                let mut grad = [[0.0; 3]; 8];
                for a in 0..8 {
                    for c in 0..3 {
                        grad[a][c] = (0..3).map(|r| inv[c][r] * dn[a][r]).sum();
                    }
                }
                let mut b = [[0.0; 24]; 6];
                for a in 0..8 {
                    let [nx, ny, nz] = grad[a];
                    b[0][3 * a] = nx;
                    b[1][3 * a + 1] = ny;
                    b[2][3 * a + 2] = nz;
                    b[3][3 * a] = ny;
                    b[3][3 * a + 1] = nx;
                    b[4][3 * a + 1] = nz;
                    b[4][3 * a + 2] = ny;
                    b[5][3 * a] = nz;
                    b[5][3 * a + 2] = nx;
                }
                let mut db = [[0.0; 24]; 6];
                for r in 0..6 {
                    for c in 0..24 {
                        db[r][c] = (0..6).map(|s| d[r][s] * b[s][c]).sum();
                    }
                }
                for i in 0..24 {
                    for j in i..24 {
                        let mut s = 0.0;
                        for r in 0..6 {
                            s += b[r][i] * db[r][j];
                        }
                        k[i][j] += s * det;
                    }
                }
            }
        }
    }
    for i in 0..24 {
        for j in 0..i {
            k[i][j] = k[j][i];
        }
    }
    Ok(k)
}
