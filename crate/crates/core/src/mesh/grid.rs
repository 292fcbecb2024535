use crate::error::{Error, Result};

/// Boundary treatment of one side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SideKind {
    /// Velocity prescribed by the boundary vector `y_bc`.
    Dirichlet,
    /// Traction outflow `(-pI + nu grad u) n = -p_inf n`.
    Outflow,
    /// Wraps to the opposite side, which must also be periodic.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Boundary conditions plus the physical constants attached to them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcSpec {
    pub left: SideKind,
    pub right: SideKind,
    pub bottom: SideKind,
    pub top: SideKind,
    pub nu: f64,
    pub p_inf: f64,
}

impl BcSpec {
    /// Dirichlet inflow on the left, outflow elsewhere.
    pub fn inflow_outflow(nu: f64, p_inf: f64) -> Self {
        Self {
            left: SideKind::Dirichlet,
            right: SideKind::Outflow,
            bottom: SideKind::Outflow,
            top: SideKind::Outflow,
            nu,
            p_inf,
        }
    }

    pub fn closed_box(nu: f64) -> Self {
        Self {
            left: SideKind::Dirichlet,
            right: SideKind::Dirichlet,
            bottom: SideKind::Dirichlet,
            top: SideKind::Dirichlet,
            nu,
            p_inf: 0.0,
        }
    }

    pub fn periodic(nu: f64) -> Self {
        Self {
            left: SideKind::Periodic,
            right: SideKind::Periodic,
            bottom: SideKind::Periodic,
            top: SideKind::Periodic,
            nu,
            p_inf: 0.0,
        }
    }

    pub fn kind(&self, side: Side) -> SideKind {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }

    pub fn periodic_x(&self) -> bool {
        self.left == SideKind::Periodic
    }

    pub fn periodic_y(&self) -> bool {
        self.bottom == SideKind::Periodic
    }
}

/// Where a face value lives: an unknown of the velocity vector or an entry of `y_bc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Vel(usize),
    Bc(usize),
}

/// What a boundary-vector entry describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcEntry {
    pub side: Side,
    /// 0 for the u component, 1 for v.
    pub component: usize,
    /// Face index along the side.
    pub index: usize,
    /// Physical position of the sample.
    pub x: f64,
    pub y: f64,
}

/// Uniform staggered grid: pressure in cell centers, `u` on vertical faces,
/// `v` on horizontal faces.
///
/// Unknown ordering is all `u` unknowns (row by row, `i` fastest) followed by all
/// `v` unknowns. Boundary-vector ordering is all `u` entries followed by all `v`
/// entries, each grouped by side in the order left, right, bottom, top.
#[derive(Debug, Clone)]
pub struct StaggeredGrid {
    pub nx: usize,
    pub ny: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub dx: f64,
    pub dy: f64,
    pub bc: BcSpec,
    u_slots: Vec<Slot>,
    v_slots: Vec<Slot>,
    n_u: usize,
    n_v: usize,
    bc_entries: Vec<BcEntry>,
    /// Dirichlet wall values for tangential ghosts: `[left, right]` for v,
    /// `[bottom, top]` for u; indexed by face position along the side.
    tangential: [Option<usize>; 4],
}

impl StaggeredGrid {
    pub fn new(
        nx: usize,
        ny: usize,
        x_range: (f64, f64),
        y_range: (f64, f64),
        bc: BcSpec,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidRange(format!(
                "grid needs at least 2x2 cells, got {nx}x{ny}"
            )));
        }
        let lx = x_range.1 - x_range.0;
        let ly = y_range.1 - y_range.0;
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidRange(format!(
                "degenerate domain {x_range:?} x {y_range:?}"
            )));
        }
        let px = [bc.left, bc.right].map(|k| k == SideKind::Periodic);
        let py = [bc.bottom, bc.top].map(|k| k == SideKind::Periodic);
        if px[0] != px[1] || py[0] != py[1] {
            return Err(Error::InvalidRange(
                "periodic sides must come in opposite pairs".into(),
            ));
        }
        if !(bc.nu >= 0.0) {
            return Err(Error::InvalidRange(format!("viscosity {} < 0", bc.nu)));
        }
        let dx = lx / nx as f64;
        let dy = ly / ny as f64;
        let (x0, y0) = (x_range.0, y_range.0);

        let mut bc_entries = Vec::new();
        let mut push = |side, component, index, x, y| {
            bc_entries.push(BcEntry {
                side,
                component,
                index,
                x,
                y,
            });
            bc_entries.len() - 1
        };

        // u entries: left/right normal, bottom/top tangential
        let mut u_left = None;
        let mut u_right = None;
        if bc.left == SideKind::Dirichlet {
            u_left = Some(
                (0..ny)
                    .map(|j| push(Side::Left, 0, j, x0, y0 + (j as f64 + 0.5) * dy))
                    .collect::<Vec<_>>(),
            );
        }
        if bc.right == SideKind::Dirichlet {
            u_right = Some(
                (0..ny)
                    .map(|j| push(Side::Right, 0, j, x_range.1, y0 + (j as f64 + 0.5) * dy))
                    .collect::<Vec<_>>(),
            );
        }
        let mut tangential = [None; 4];
        if bc.bottom == SideKind::Dirichlet {
            tangential[2] = Some(push(Side::Bottom, 0, 0, x0, y0));
            for i in 1..=nx {
                push(Side::Bottom, 0, i, x0 + i as f64 * dx, y0);
            }
        }
        if bc.top == SideKind::Dirichlet {
            tangential[3] = Some(push(Side::Top, 0, 0, x0, y_range.1));
            for i in 1..=nx {
                push(Side::Top, 0, i, x0 + i as f64 * dx, y_range.1);
            }
        }
        // v entries: left/right tangential, bottom/top normal
        if bc.left == SideKind::Dirichlet {
            tangential[0] = Some(push(Side::Left, 1, 0, x0, y0));
            for j in 1..=ny {
                push(Side::Left, 1, j, x0, y0 + j as f64 * dy);
            }
        }
        if bc.right == SideKind::Dirichlet {
            tangential[1] = Some(push(Side::Right, 1, 0, x_range.1, y0));
            for j in 1..=ny {
                push(Side::Right, 1, j, x_range.1, y0 + j as f64 * dy);
            }
        }
        let mut v_bottom = None;
        let mut v_top = None;
        if bc.bottom == SideKind::Dirichlet {
            v_bottom = Some(
                (0..nx)
                    .map(|i| push(Side::Bottom, 1, i, x0 + (i as f64 + 0.5) * dx, y0))
                    .collect::<Vec<_>>(),
            );
        }
        if bc.top == SideKind::Dirichlet {
            v_top = Some(
                (0..nx)
                    .map(|i| push(Side::Top, 1, i, x0 + (i as f64 + 0.5) * dx, y_range.1))
                    .collect::<Vec<_>>(),
            );
        }

        // u slots
        let mut u_slots = vec![Slot::Vel(usize::MAX); (nx + 1) * ny];
        let mut n_u = 0;
        for j in 0..ny {
            for i in 0..=nx {
                let s = if i == 0 && u_left.is_some() {
                    Slot::Bc(u_left.as_ref().unwrap()[j])
                } else if i == nx && u_right.is_some() {
                    Slot::Bc(u_right.as_ref().unwrap()[j])
                } else if i == nx && px[0] {
                    u_slots[j * (nx + 1)]
                } else {
                    n_u += 1;
                    Slot::Vel(n_u - 1)
                };
                u_slots[j * (nx + 1) + i] = s;
            }
        }
        let mut v_slots = vec![Slot::Vel(usize::MAX); nx * (ny + 1)];
        let mut n_v = 0;
        for j in 0..=ny {
            for i in 0..nx {
                let s = if j == 0 && v_bottom.is_some() {
                    Slot::Bc(v_bottom.as_ref().unwrap()[i])
                } else if j == ny && v_top.is_some() {
                    Slot::Bc(v_top.as_ref().unwrap()[i])
                } else if j == ny && py[0] {
                    v_slots[i]
                } else {
                    n_v += 1;
                    Slot::Vel(n_u + n_v - 1)
                };
                v_slots[j * nx + i] = s;
            }
        }

        Ok(Self {
            nx,
            ny,
            x_range,
            y_range,
            dx,
            dy,
            bc,
            u_slots,
            v_slots,
            n_u,
            n_v,
            bc_entries,
            tangential,
        })
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    /// Total velocity unknowns `N_V`.
    pub fn n_vel(&self) -> usize {
        self.n_u + self.n_v
    }

    /// Pressure unknowns `N_p` (one per cell).
    pub fn n_p(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_bc(&self) -> usize {
        self.bc_entries.len()
    }

    pub fn bc_entries(&self) -> &[BcEntry] {
        &self.bc_entries
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Slot of the u-face at `x_i`, row `j` (`i` in `0..=nx`, `j` in `0..ny`).
    pub fn u_slot(&self, i: usize, j: usize) -> Slot {
        self.u_slots[j * (self.nx + 1) + i]
    }

    /// Slot of the v-face at column `i`, `y_j` (`i` in `0..nx`, `j` in `0..=ny`).
    pub fn v_slot(&self, i: usize, j: usize) -> Slot {
        self.v_slots[j * self.nx + i]
    }

    /// Boundary-vector index of the wall value used for a tangential ghost.
    pub(crate) fn tangential_bc(&self, side: Side, k: usize) -> Option<usize> {
        let base = match side {
            Side::Left => self.tangential[0],
            Side::Right => self.tangential[1],
            Side::Bottom => self.tangential[2],
            Side::Top => self.tangential[3],
        };
        base.map(|b| b + k)
    }

    pub fn u_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_range.0 + i as f64 * self.dx,
            self.y_range.0 + (j as f64 + 0.5) * self.dy,
        )
    }

    pub fn v_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_range.0 + (i as f64 + 0.5) * self.dx,
            self.y_range.0 + j as f64 * self.dy,
        )
    }

    /// Inverse of the slot maps: for every velocity unknown, its component and face.
    pub fn unknown_faces(&self) -> Vec<(usize, usize, usize)> {
        let mut out = vec![(0, 0, 0); self.n_vel()];
        for j in 0..self.ny {
            for i in 0..=self.nx {
                if let Slot::Vel(k) = self.u_slot(i, j) {
                    if !(i == self.nx && self.bc.periodic_x()) {
                        out[k] = (0, i, j);
                    }
                }
            }
        }
        for j in 0..=self.ny {
            for i in 0..self.nx {
                if let Slot::Vel(k) = self.v_slot(i, j) {
                    if !(j == self.ny && self.bc.periodic_y()) {
                        out[k] = (1, i, j);
                    }
                }
            }
        }
        out
    }

    /// Stable fingerprint of the discretization (dimensions, bounds, boundary kinds).
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(&(self.nx as u64).to_le_bytes());
        feed(&(self.ny as u64).to_le_bytes());
        for v in [
            self.x_range.0,
            self.x_range.1,
            self.y_range.0,
            self.y_range.1,
            self.bc.nu,
            self.bc.p_inf,
        ] {
            feed(&v.to_le_bytes());
        }
        for k in [self.bc.left, self.bc.right, self.bc.bottom, self.bc.top] {
            feed(&[k as u8]);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacings() {
        let g = StaggeredGrid::new(
            200,
            80,
            (0.0, 10.0),
            (-2.0, 2.0),
            BcSpec::inflow_outflow(1e-2, 0.0),
        )
        .unwrap();
        assert!((g.dx - 0.05).abs() < 1e-15 && (g.dy - 0.05).abs() < 1e-15);
        let g = StaggeredGrid::new(2, 2, (0.0, 2.0), (0.0, 2.0), BcSpec::closed_box(0.0)).unwrap();
        assert_eq!((g.dx, g.dy), (1.0, 1.0));
    }

    #[test]
    fn inflow_boundary_count() {
        let g = StaggeredGrid::new(
            200,
            80,
            (0.0, 10.0),
            (-2.0, 2.0),
            BcSpec::inflow_outflow(1e-2, 0.0),
        )
        .unwrap();
        let normal = g.bc_entries().iter().filter(|e| e.component == 0).count();
        let tangential = g.bc_entries().iter().filter(|e| e.component == 1).count();
        assert_eq!((normal, tangential), (80, 81));
        // left u faces are boundary data, right outflow faces are unknowns
        assert_eq!(g.n_u(), 200 * 80);
        assert_eq!(g.n_v(), 200 * 81);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(StaggeredGrid::new(4, 4, (1.0, 1.0), (0.0, 1.0), BcSpec::closed_box(0.0)).is_err());
        assert!(StaggeredGrid::new(1, 4, (0.0, 1.0), (0.0, 1.0), BcSpec::closed_box(0.0)).is_err());
    }

    #[test]
    fn slot_maps_are_bijections() {
        for bc in [
            BcSpec::inflow_outflow(0.1, 0.0),
            BcSpec::closed_box(0.1),
            BcSpec::periodic(0.1),
        ] {
            let g = StaggeredGrid::new(5, 4, (0.0, 1.0), (0.0, 1.0), bc).unwrap();
            let mut seen = vec![0usize; g.n_vel()];
            for (c, i, j) in g.unknown_faces() {
                let s = if c == 0 {
                    g.u_slot(i, j)
                } else {
                    g.v_slot(i, j)
                };
                match s {
                    Slot::Vel(k) => seen[k] += 1,
                    Slot::Bc(_) => panic!("unknown maps to boundary"),
                }
            }
            assert!(seen.iter().all(|&n| n == 1));
        }
    }
}
