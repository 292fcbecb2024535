use super::grid::{BcSpec, Side, SideKind, Slot, StaggeredGrid};
use super::poisson::PoissonSolver;
use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;

/// Momentum source on a column of u-faces, modelling an actuator disk as a
/// line force: each covered face receives `-force * dy` in x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorDisk {
    pub x: f64,
    pub y_center: f64,
    pub length: f64,
    pub force: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ForcingSpec {
    #[default]
    None,
    Actuator(ActuatorDisk),
}

/// One face of a control volume for the convective flux: the volume receives
/// `sign * (sum flux) * (sum conv)`, where the flux is built from the convecting
/// state and the face value from the convected state.
#[derive(Debug, Clone, Copy, Default)]
struct FaceTerm {
    sign: f64,
    flux: [(usize, f64); 2],
    conv: [(usize, f64); 2],
}

fn combine(e: &[f64], which: &[(usize, f64); 2]) -> f64 {
    e[which[0].0] * which[0].1 + e[which[1].0] * which[1].1
}

/// Extended state layout: every face value (including boundary faces) plus one
/// layer of ghost values, so that all stencils read from a single vector.
#[derive(Debug, Clone)]
pub struct Extension {
    nx: usize,
    ny: usize,
    /// `ext = pv * V + py * y_bc`
    pub pv: SparseMatrix,
    pub py: SparseMatrix,
}

impl Extension {
    pub fn len(&self) -> usize {
        self.pv.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// u value at face `i` (0..=nx), row `j` (-1..=ny).
    pub fn u(&self, i: usize, j: isize) -> usize {
        (j + 1) as usize * (self.nx + 1) + i
    }

    /// v value at column `i` (-1..=nx), face row `j` (0..=ny).
    pub fn v(&self, i: isize, j: usize) -> usize {
        (self.nx + 1) * (self.ny + 2) + j * (self.nx + 2) + (i + 1) as usize
    }

    pub fn apply(&self, vel: &[f64], ybc: &[f64]) -> Vec<f64> {
        let mut e = self.pv.mul_vec(vel);
        self.py.mul_vec_acc(ybc, 1.0, &mut e);
        e
    }
}

/// All full-order operators of the semi-discrete system
/// `M V = F_M y_bc`, `Omega dV/dt = F(V, y_bc) - G p`, with `G = -Mᵀ`.
#[derive(Debug)]
pub struct Operators {
    pub grid: StaggeredGrid,
    /// Diagonal of the velocity mass matrix (finite-volume areas).
    pub omega: Vec<f64>,
    /// Divergence, `N_p x N_V`.
    pub m: SparseMatrix,
    /// Boundary part of the divergence, `N_p x N_bc`.
    pub fm: SparseMatrix,
    /// `M Omega^-1 G`, `N_p x N_p`.
    pub l: SparseMatrix,
    /// Forcing vector.
    pub f: Vec<f64>,
    /// Diffusion acting on the unknowns.
    pub d: SparseMatrix,
    /// Diffusion contribution of the boundary data.
    pub dbc: SparseMatrix,
    /// Constant boundary contribution (outflow traction).
    pub d0: Vec<f64>,
    pub ext: Extension,
    faces: Vec<[FaceTerm; 4]>,
    pub poisson: PoissonSolver,
}

impl Operators {
    pub fn assemble(grid: StaggeredGrid, forcing: ForcingSpec) -> Result<Self> {
        let ext = build_extension(&grid);
        let omega = build_omega(&grid);
        let (m, fm) = build_divergence(&grid);
        let inv_omega: Vec<f64> = omega.iter().map(|w| 1.0 / w).collect();
        let g = m.transpose().scaled(-1.0);
        let l = m.matmul(&g.scale_rows(&inv_omega));
        let (diff_ext, d0) = build_diffusion(&grid, &ext);
        let d = diff_ext.matmul(&ext.pv);
        let dbc = diff_ext.matmul(&ext.py);
        let f = build_forcing(&grid, forcing);
        let faces = build_convection(&grid, &ext);
        let poisson = PoissonSolver::new(&l)?;
        Ok(Self {
            grid,
            omega,
            m,
            fm,
            l,
            f,
            d,
            dbc,
            d0,
            ext,
            faces,
            poisson,
        })
    }

    pub fn n_vel(&self) -> usize {
        self.grid.n_vel()
    }

    pub fn n_p(&self) -> usize {
        self.grid.n_p()
    }

    pub fn n_bc(&self) -> usize {
        self.grid.n_bc()
    }

    /// The gradient operator, always derived as `-Mᵀ`.
    pub fn g(&self) -> SparseMatrix {
        self.m.transpose().scaled(-1.0)
    }

    /// `G p` computed as `-Mᵀ p`.
    pub fn apply_g(&self, p: &[f64]) -> Vec<f64> {
        let mut out = self.m.mul_vec_t(p);
        out.iter_mut().for_each(|x| *x = -*x);
        out
    }

    /// `F_M y_bc`
    pub fn y_m(&self, ybc: &[f64]) -> Vec<f64> {
        self.fm.mul_vec(ybc)
    }

    pub fn extend(&self, vel: &[f64], ybc: &[f64]) -> Vec<f64> {
        self.ext.apply(vel, ybc)
    }

    /// Signed convecting fluxes per unknown and face, evaluated on an extended state.
    pub fn face_fluxes(&self, e: &[f64]) -> Vec<[f64; 4]> {
        self.faces
            .iter()
            .map(|fs| std::array::from_fn(|k| fs[k].sign * combine(e, &fs[k].flux)))
            .collect()
    }

    /// Convected face values per unknown and face.
    pub fn face_values(&self, e: &[f64]) -> Vec<[f64; 4]> {
        self.faces
            .iter()
            .map(|fs| std::array::from_fn(|k| combine(e, &fs[k].conv)))
            .collect()
    }

    /// Convective bilinear form `C(e1, e2)`: `e1` convects, `e2` is convected.
    pub fn convection(&self, e1: &[f64], e2: &[f64]) -> Vec<f64> {
        assert_eq!(e1.len(), self.ext.len());
        assert_eq!(e2.len(), self.ext.len());
        self.faces
            .iter()
            .map(|fs| {
                fs.iter()
                    .map(|t| t.sign * combine(e1, &t.flux) * combine(e2, &t.conv))
                    .sum()
            })
            .collect()
    }

    /// `F(V, y) = f + D V + d_bc y + d_0 + C(ext, ext)`
    pub fn eval_fcd(&self, vel: &[f64], ybc: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(vel, ybc)?;
        let e = self.extend(vel, ybc);
        let mut out = self.convection(&e, &e);
        for (o, (a, b)) in out.iter_mut().zip(self.f.iter().zip(&self.d0)) {
            *o += a + b;
        }
        self.d.mul_vec_acc(vel, 1.0, &mut out);
        self.dbc.mul_vec_acc(ybc, 1.0, &mut out);
        Ok(out)
    }

    /// Affine part of `F` only: `f + D V + d_bc y + d_0`.
    pub fn eval_linear(&self, vel: &[f64], ybc: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.f.iter().zip(&self.d0).map(|(a, b)| a + b).collect();
        self.d.mul_vec_acc(vel, 1.0, &mut out);
        self.dbc.mul_vec_acc(ybc, 1.0, &mut out);
        out
    }

    fn check_dims(&self, vel: &[f64], ybc: &[f64]) -> Result<()> {
        if vel.len() != self.n_vel() {
            return Err(Error::Dimension {
                context: "velocity vector",
                expected: self.n_vel(),
                got: vel.len(),
            });
        }
        if ybc.len() != self.n_bc() {
            return Err(Error::Dimension {
                context: "boundary vector",
                expected: self.n_bc(),
                got: ybc.len(),
            });
        }
        Ok(())
    }

    /// Lifting `Omega^-1 G Lbar^-1 r` of a pressure-space right-hand side.
    pub fn lift_rhs(&self, r: &[f64]) -> Result<Vec<f64>> {
        let p = self.poisson.solve(r)?;
        let mut v = self.apply_g(&p);
        v.iter_mut().zip(&self.omega).for_each(|(x, w)| *x /= w);
        Ok(v)
    }
}

fn build_omega(g: &StaggeredGrid) -> Vec<f64> {
    let full = g.dx * g.dy;
    g.unknown_faces()
        .into_iter()
        .map(|(c, i, j)| {
            let half = if c == 0 {
                (i == 0 || i == g.nx) && !g.bc.periodic_x()
            } else {
                (j == 0 || j == g.ny) && !g.bc.periodic_y()
            };
            if half {
                0.5 * full
            } else {
                full
            }
        })
        .collect()
}

fn build_divergence(g: &StaggeredGrid) -> (SparseMatrix, SparseMatrix) {
    let mut tm = Vec::new();
    let mut tf = Vec::new();
    let mut add = |row: usize, slot: Slot, coef: f64| match slot {
        Slot::Vel(k) => tm.push((row, k, coef)),
        Slot::Bc(k) => tf.push((row, k, -coef)),
    };
    for j in 0..g.ny {
        for i in 0..g.nx {
            let r = g.cell(i, j);
            add(r, g.u_slot(i + 1, j), g.dy);
            add(r, g.u_slot(i, j), -g.dy);
            add(r, g.v_slot(i, j + 1), g.dx);
            add(r, g.v_slot(i, j), -g.dx);
        }
    }
    (
        SparseMatrix::from_triplets(g.n_p(), g.n_vel(), &tm),
        SparseMatrix::from_triplets(g.n_p(), g.n_bc(), &tf),
    )
}

fn build_extension(g: &StaggeredGrid) -> Extension {
    let (nx, ny) = (g.nx, g.ny);
    let mut ext = Extension {
        nx,
        ny,
        pv: SparseMatrix::zeros(0, 0),
        py: SparseMatrix::zeros(0, 0),
    };
    let n_ext = (nx + 1) * (ny + 2) + (nx + 2) * (ny + 1);
    let mut tv = Vec::new();
    let mut ty = Vec::new();
    let mut put = |row: usize, slot: Slot, coef: f64| match slot {
        Slot::Vel(k) => tv.push((row, k, coef)),
        Slot::Bc(k) => ty.push((row, k, coef)),
    };
    // u values and ghost rows
    for i in 0..=nx {
        for j in 0..ny {
            put(ext.u(i, j as isize), g.u_slot(i, j), 1.0);
        }
        for (side, jg, jin, jwrap) in [
            (Side::Bottom, -1isize, 0usize, ny - 1),
            (Side::Top, ny as isize, ny - 1, 0),
        ] {
            let row = ext.u(i, jg);
            match g.bc.kind(side) {
                SideKind::Dirichlet => {
                    let w = g.tangential_bc(side, i).expect("tangential wall data");
                    put(row, Slot::Bc(w), 2.0);
                    put(row, g.u_slot(i, jin), -1.0);
                }
                SideKind::Outflow => put(row, g.u_slot(i, jin), 1.0),
                SideKind::Periodic => put(row, g.u_slot(i, jwrap), 1.0),
            }
        }
    }
    // v values and ghost columns
    for j in 0..=ny {
        for i in 0..nx {
            put(ext.v(i as isize, j), g.v_slot(i, j), 1.0);
        }
        for (side, ig, iin, iwrap) in [
            (Side::Left, -1isize, 0usize, nx - 1),
            (Side::Right, nx as isize, nx - 1, 0),
        ] {
            let row = ext.v(ig, j);
            match g.bc.kind(side) {
                SideKind::Dirichlet => {
                    let w = g.tangential_bc(side, j).expect("tangential wall data");
                    put(row, Slot::Bc(w), 2.0);
                    put(row, g.v_slot(iin, j), -1.0);
                }
                SideKind::Outflow => put(row, g.v_slot(iin, j), 1.0),
                SideKind::Periodic => put(row, g.v_slot(iwrap, j), 1.0),
            }
        }
    }
    ext.pv = SparseMatrix::from_triplets(n_ext, g.n_vel(), &tv);
    ext.py = SparseMatrix::from_triplets(n_ext, g.n_bc(), &ty);
    ext
}

/// Cell columns (for u) or rows (for v) overlapped by the control volume of a face
/// at position `i` along a direction with `n` cells.
fn overlapped(i: usize, n: usize, periodic: bool) -> Vec<usize> {
    if periodic && i == 0 {
        vec![n - 1, 0]
    } else if i == 0 {
        vec![0]
    } else if i == n {
        vec![n - 1]
    } else {
        vec![i - 1, i]
    }
}

fn sum_terms(terms: &[(usize, f64)]) -> [(usize, f64); 2] {
    match terms {
        [a] => [*a, (a.0, 0.0)],
        [a, b] => [*a, *b],
        _ => unreachable!("face stencils have one or two terms"),
    }
}

fn build_convection(g: &StaggeredGrid, ext: &Extension) -> Vec<[FaceTerm; 4]> {
    let (nx, ny, dx, dy) = (g.nx, g.ny, g.dx, g.dy);
    let (px, py) = (g.bc.periodic_x(), g.bc.periodic_y());
    let face = |sign: f64, flux: &[(usize, f64)], conv: &[(usize, f64)]| FaceTerm {
        sign,
        flux: sum_terms(flux),
        conv: sum_terms(conv),
    };
    g.unknown_faces()
        .into_iter()
        .map(|(c, i, j)| {
            if c == 0 {
                let jj = j as isize;
                let here = ext.u(i, jj);
                let east = if i == nx {
                    face(-1.0, &[(here, dy)], &[(here, 1.0)])
                } else {
                    let e = ext.u(i + 1, jj);
                    face(
                        -1.0,
                        &[(here, 0.5 * dy), (e, 0.5 * dy)],
                        &[(here, 0.5), (e, 0.5)],
                    )
                };
                let west = if i == 0 && !px {
                    face(1.0, &[(here, dy)], &[(here, 1.0)])
                } else {
                    let w = ext.u(if i == 0 { nx - 1 } else { i - 1 }, jj);
                    face(
                        1.0,
                        &[(w, 0.5 * dy), (here, 0.5 * dy)],
                        &[(w, 0.5), (here, 0.5)],
                    )
                };
                let cells = overlapped(i, nx, px);
                let fn_: Vec<_> = cells
                    .iter()
                    .map(|&ci| (ext.v(ci as isize, j + 1), 0.5 * dx))
                    .collect();
                let fs_: Vec<_> = cells
                    .iter()
                    .map(|&ci| (ext.v(ci as isize, j), 0.5 * dx))
                    .collect();
                let north = face(-1.0, &fn_, &[(here, 0.5), (ext.u(i, jj + 1), 0.5)]);
                let south = face(1.0, &fs_, &[(here, 0.5), (ext.u(i, jj - 1), 0.5)]);
                [east, west, north, south]
            } else {
                let ii = i as isize;
                let here = ext.v(ii, j);
                let north = if j == ny {
                    face(-1.0, &[(here, dx)], &[(here, 1.0)])
                } else {
                    let n = ext.v(ii, j + 1);
                    face(
                        -1.0,
                        &[(here, 0.5 * dx), (n, 0.5 * dx)],
                        &[(here, 0.5), (n, 0.5)],
                    )
                };
                let south = if j == 0 && !py {
                    face(1.0, &[(here, dx)], &[(here, 1.0)])
                } else {
                    let s = ext.v(ii, if j == 0 { ny - 1 } else { j - 1 });
                    face(
                        1.0,
                        &[(s, 0.5 * dx), (here, 0.5 * dx)],
                        &[(s, 0.5), (here, 0.5)],
                    )
                };
                let cells = overlapped(j, ny, py);
                let fe: Vec<_> = cells
                    .iter()
                    .map(|&cj| (ext.u(i + 1, cj as isize), 0.5 * dy))
                    .collect();
                let fw: Vec<_> = cells
                    .iter()
                    .map(|&cj| (ext.u(i, cj as isize), 0.5 * dy))
                    .collect();
                let east = face(-1.0, &fe, &[(here, 0.5), (ext.v(ii + 1, j), 0.5)]);
                let west = face(1.0, &fw, &[(here, 0.5), (ext.v(ii - 1, j), 0.5)]);
                [east, west, north, south]
            }
        })
        .collect()
}

/// Diffusion as a map from the extended state, plus the constant traction vector.
fn build_diffusion(g: &StaggeredGrid, ext: &Extension) -> (SparseMatrix, Vec<f64>) {
    let BcSpec { nu, p_inf, .. } = g.bc;
    let (nx, ny, dx, dy) = (g.nx, g.ny, g.dx, g.dy);
    let (px, py) = (g.bc.periodic_x(), g.bc.periodic_y());
    let mut t = Vec::new();
    let mut d0 = vec![0.0; g.n_vel()];
    for (k, (c, i, j)) in g.unknown_faces().into_iter().enumerate() {
        let mut link = |here: usize, nb: usize, coef: f64| {
            t.push((k, nb, nu * coef));
            t.push((k, here, -nu * coef));
        };
        if c == 0 {
            let jj = j as isize;
            let here = ext.u(i, jj);
            let half = (i == 0 || i == nx) && !px;
            if i < nx {
                link(here, ext.u(i + 1, jj), dy / dx);
            } else {
                d0[k] -= p_inf * dy;
            }
            if i > 0 || px {
                link(
                    here,
                    ext.u(if i == 0 { nx - 1 } else { i - 1 }, jj),
                    dy / dx,
                );
            } else {
                d0[k] += p_inf * dy;
            }
            let len = if half { 0.5 * dx } else { dx };
            link(here, ext.u(i, jj + 1), len / dy);
            link(here, ext.u(i, jj - 1), len / dy);
        } else {
            let ii = i as isize;
            let here = ext.v(ii, j);
            let half = (j == 0 || j == ny) && !py;
            if j < ny {
                link(here, ext.v(ii, j + 1), dx / dy);
            } else {
                d0[k] -= p_inf * dx;
            }
            if j > 0 || py {
                link(
                    here,
                    ext.v(ii, if j == 0 { ny - 1 } else { j - 1 }),
                    dx / dy,
                );
            } else {
                d0[k] += p_inf * dx;
            }
            let len = if half { 0.5 * dy } else { dy };
            link(here, ext.v(ii + 1, j), len / dx);
            link(here, ext.v(ii - 1, j), len / dx);
        }
    }
    (SparseMatrix::from_triplets(g.n_vel(), ext.len(), &t), d0)
}

fn build_forcing(g: &StaggeredGrid, forcing: ForcingSpec) -> Vec<f64> {
    let mut f = vec![0.0; g.n_vel()];
    if let ForcingSpec::Actuator(disk) = forcing {
        let col = ((disk.x - g.x_range.0) / g.dx).round();
        if col < 0.0 || col > g.nx as f64 {
            return f;
        }
        let i = col as usize;
        for j in 0..g.ny {
            let (_, y) = g.u_pos(i, j);
            if (y - disk.y_center).abs() <= 0.5 * disk.length + 1e-12 * g.dy {
                if let Slot::Vel(k) = g.u_slot(i, j) {
                    f[k] = -disk.force * g.dy;
                }
            }
        }
    }
    f
}
