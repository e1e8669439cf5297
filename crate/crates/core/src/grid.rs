//! Masked Cartesian grids for multiply-connected domains and the discrete
//! calculus on them.
//!
//! Nodes are indexed row-major (`j * nx + i`). Every non-exterior node owns a
//! *slot* in field storage; interior nodes additionally get a dense interior
//! index used by the linear solvers.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Floor on the crossing fraction, guarding against nodes that sit on a circle.
const MIN_FRAC: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CellKind {
    Exterior,
    Interior,
    Boundary(u16),
}

impl CellKind {
    pub fn code(self) -> u8 {
        match self {
            CellKind::Exterior => 0,
            CellKind::Interior => 1,
            CellKind::Boundary(k) => 2 + k as u8,
        }
    }

    pub fn from_code(c: u8) -> CellKind {
        match c {
            0 => CellKind::Exterior,
            1 => CellKind::Interior,
            k => CellKind::Boundary((k - 2) as u16),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    /// Annulus centred at the origin.
    Annulus { r_in: f64, r_out: f64 },
    Mask,
}

/// One of the four stencil arms of an interior node.
#[derive(Clone, Copy, Debug)]
pub struct Link {
    pub slot: u32,
    /// Interior index of the neighbour, or `u32::MAX` for a boundary node.
    pub interior: u32,
    /// Boundary component of the neighbour (meaningless for interior ones).
    pub comp: u16,
    /// Distance to the boundary data point as a fraction of `h`.
    pub frac: f64,
    /// Stiffness weight, the inverse crossing fraction.
    pub weight: f64,
}

impl Link {
    pub fn is_interior(&self) -> bool {
        self.interior != NONE
    }
}

/// Direction offsets of the four arms: east, west, north, south.
pub const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

#[derive(Debug)]
pub struct GridDomain {
    nx: usize,
    ny: usize,
    h: f64,
    origin: (f64, f64),
    kinds: Vec<CellKind>,
    n_components: usize,
    slot_of: Vec<u32>,
    node_of_slot: Vec<u32>,
    interior_slots: Vec<u32>,
    interior_of_slot: Vec<u32>,
    links: Vec<[Link; 4]>,
    comp_slots: Vec<Vec<u32>>,
    geometry: Geometry,
}

impl GridDomain {
    /// Annulus `r_in < |x| < r_out` with `res` nodes per unit length.
    ///
    /// Interior nodes lie strictly inside the annulus; boundary nodes are the
    /// remaining 4-neighbours of interior nodes. Links that cut a circle are
    /// weighted by the inverse crossing fraction.
    pub fn annulus(r_in: f64, r_out: f64, res: usize) -> Result<Arc<GridDomain>> {
        if !(r_in > 0.0 && r_in < r_out && r_out.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "annulus needs 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}"
            )));
        }
        if res == 0 {
            return Err(Error::InvalidInput("resolution must be positive".into()));
        }
        let h = 1.0 / res as f64;
        if (r_out - r_in) * (res as f64) < 8.0 {
            return Err(Error::Resolution(format!(
                "gap of {:.2} cells, need at least 8",
                (r_out - r_in) * res as f64
            )));
        }
        let m = (r_out / h).ceil() as usize + 5;
        let n = 2 * m + 1;
        let x0 = -(m as f64) * h;
        let mut inside = vec![false; n * n];
        for j in 0..n {
            for i in 0..n {
                let x = x0 + i as f64 * h;
                let y = x0 + j as f64 * h;
                let r = x.hypot(y);
                inside[j * n + i] = r > r_in && r < r_out;
            }
        }
        let mut kinds = vec![CellKind::Exterior; n * n];
        for j in 0..n {
            for i in 0..n {
                let p = j * n + i;
                if inside[p] {
                    kinds[p] = CellKind::Interior;
                }
            }
        }
        for j in 1..n - 1 {
            for i in 1..n - 1 {
                let p = j * n + i;
                if !inside[p] {
                    continue;
                }
                for (di, dj) in DIRS {
                    let q = ((j as i64 + dj) as usize) * n + (i as i64 + di) as usize;
                    if !inside[q] {
                        let x = x0 + (q % n) as f64 * h;
                        let y = x0 + (q / n) as f64 * h;
                        let label = if x.hypot(y) <= r_in { 1 } else { 0 };
                        kinds[q] = CellKind::Boundary(label);
                    }
                }
            }
        }
        let frac = |p: usize, q: usize| -> f64 {
            let (px, py) = (x0 + (p % n) as f64 * h, x0 + (p / n) as f64 * h);
            let (qx, qy) = (x0 + (q % n) as f64 * h, x0 + (q / n) as f64 * h);
            let radius = if qx.hypot(qy) <= r_in { r_in } else { r_out };
            segment_circle_fraction((px, py), (qx, qy), radius)
        };
        let dom = GridDomain::assemble(
            n,
            n,
            h,
            (x0, x0),
            kinds,
            Geometry::Annulus { r_in, r_out },
            frac,
        )?;
        Ok(Arc::new(dom))
    }

    /// Labels a boolean fluid mask (`true` = fluid). Fluid nodes off the grid
    /// frame become interior; label 0 goes to the boundary component that
    /// touches the frame, holes are numbered in row-major order of first node.
    pub fn label_components(
        nx: usize,
        ny: usize,
        h: f64,
        origin: (f64, f64),
        mask: &[bool],
    ) -> Result<Arc<GridDomain>> {
        if mask.len() != nx * ny || nx < 3 || ny < 3 {
            return Err(Error::InvalidInput(format!(
                "mask of length {} does not fit a {nx}x{ny} grid (minimum 3x3)",
                mask.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {h}")));
        }
        let mut interior = vec![false; nx * ny];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                interior[j * nx + i] = mask[j * nx + i];
            }
        }
        // Complement regions under 8-connectivity.
        let mut region = vec![NONE; nx * ny];
        let mut regions: Vec<Vec<usize>> = Vec::new();
        for start in 0..nx * ny {
            if interior[start] || region[start] != NONE {
                continue;
            }
            let id = regions.len() as u32;
            let mut members = vec![];
            let mut queue = VecDeque::from([start]);
            region[start] = id;
            while let Some(p) = queue.pop_front() {
                members.push(p);
                let (i, j) = ((p % nx) as i64, (p / nx) as i64);
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let (a, b) = (i + di, j + dj);
                        if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                            continue;
                        }
                        let q = b as usize * nx + a as usize;
                        if !interior[q] && region[q] == NONE {
                            region[q] = id;
                            queue.push_back(q);
                        }
                    }
                }
            }
            regions.push(members);
        }
        // Region 0 always contains node 0, which sits on the frame.
        let comps = interior_components(nx, ny, &interior);
        if comps.is_empty() {
            return Err(Error::InvalidInput("mask has no interior nodes".into()));
        }
        if comps.len() > 1 {
            let touches_outer = |c: &Vec<usize>| {
                c.iter().any(|&p| neighbours4(nx, ny, p).any(|q| region[q] == 0))
            };
            if comps.iter().any(|c| !touches_outer(c)) {
                return Err(Error::NestedHoles);
            }
            return Err(Error::Disconnected { components: comps.len() });
        }
        let mut kinds = vec![CellKind::Exterior; nx * ny];
        let mut used_labels = vec![NONE; regions.len()];
        let mut next = 1u32;
        for p in 0..nx * ny {
            if interior[p] {
                kinds[p] = CellKind::Interior;
                continue;
            }
            let adjacent = neighbours4(nx, ny, p).any(|q| interior[q]);
            if adjacent {
                let r = region[p] as usize;
                if used_labels[r] == NONE {
                    used_labels[r] = if r == 0 {
                        0
                    } else {
                        next += 1;
                        next - 1
                    };
                }
                kinds[p] = CellKind::Boundary(used_labels[r] as u16);
            }
        }
        if used_labels[0] == NONE {
            return Err(Error::InvalidInput("outer boundary not found".into()));
        }
        let dom = GridDomain::assemble(nx, ny, h, origin, kinds, Geometry::Mask, |_, _| 1.0)?;
        for k in 0..dom.n_components {
            if !boundary_is_8_connected(&dom, k) {
                return Err(Error::InvalidInput(format!(
                    "boundary component {k} is not 8-connected"
                )));
            }
        }
        Ok(Arc::new(dom))
    }

    /// Builds a domain from explicit node kinds (unit link weights).
    pub fn from_kinds(
        nx: usize,
        ny: usize,
        h: f64,
        origin: (f64, f64),
        kinds: Vec<CellKind>,
    ) -> Result<Arc<GridDomain>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {h}")));
        }
        Ok(Arc::new(GridDomain::assemble(nx, ny, h, origin, kinds, Geometry::Mask, |_, _| 1.0)?))
    }

    fn assemble(
        nx: usize,
        ny: usize,
        h: f64,
        origin: (f64, f64),
        kinds: Vec<CellKind>,
        geometry: Geometry,
        frac: impl Fn(usize, usize) -> f64,
    ) -> Result<GridDomain> {
        if kinds.len() != nx * ny {
            return Err(Error::InvalidInput(format!(
                "{} node kinds for a {nx}x{ny} grid",
                kinds.len()
            )));
        }
        let mut max_label: i64 = -1;
        let mut slot_of = vec![NONE; nx * ny];
        let mut node_of_slot = vec![];
        let mut interior_slots = vec![];
        let mut interior_of_slot = vec![];
        for (p, kind) in kinds.iter().enumerate() {
            match kind {
                CellKind::Exterior => continue,
                CellKind::Interior => {
                    let (i, j) = (p % nx, p / nx);
                    if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                        return Err(Error::InvalidInput(format!(
                            "interior node ({i},{j}) lies on the grid frame"
                        )));
                    }
                    interior_of_slot.push(interior_slots.len() as u32);
                    interior_slots.push(node_of_slot.len() as u32);
                }
                CellKind::Boundary(k) => {
                    max_label = max_label.max(*k as i64);
                    interior_of_slot.push(NONE);
                }
            }
            slot_of[p] = node_of_slot.len() as u32;
            node_of_slot.push(p as u32);
        }
        if interior_slots.is_empty() {
            return Err(Error::InvalidInput("domain has no interior nodes".into()));
        }
        let n_components = (max_label + 1).max(0) as usize;
        let mut comp_slots = vec![vec![]; n_components];
        for (s, &p) in node_of_slot.iter().enumerate() {
            if let CellKind::Boundary(k) = kinds[p as usize] {
                comp_slots[k as usize].push(s as u32);
            }
        }
        if let Some(k) = comp_slots.iter().position(|c| c.is_empty()) {
            return Err(Error::InvalidInput(format!("boundary label {k} is unused")));
        }
        let mut links = Vec::with_capacity(interior_slots.len());
        for &s in &interior_slots {
            let p = node_of_slot[s as usize] as usize;
            let (i, j) = ((p % nx) as i64, (p / nx) as i64);
            let mut arms = [Link { slot: 0, interior: NONE, comp: 0, frac: 1.0, weight: 1.0 }; 4];
            for (d, (di, dj)) in DIRS.iter().enumerate() {
                let q = ((j + dj) as usize) * nx + (i + di) as usize;
                let qs = slot_of[q];
                arms[d] = match kinds[q] {
                    CellKind::Exterior => {
                        return Err(Error::InvalidInput(format!(
                            "interior node ({i},{j}) touches an exterior node"
                        )))
                    }
                    CellKind::Interior => Link {
                        slot: qs,
                        interior: interior_of_slot[qs as usize],
                        comp: 0,
                        frac: 1.0,
                        weight: 1.0,
                    },
                    CellKind::Boundary(k) => {
                        let f = frac(p, q).clamp(1e-9, 1.0);
                        Link { slot: qs, interior: NONE, comp: k, frac: f, weight: 1.0 / f.max(MIN_FRAC) }
                    }
                };
            }
            links.push(arms);
        }
        let interior_mask: Vec<bool> = kinds.iter().map(|k| *k == CellKind::Interior).collect();
        let comps = interior_components(nx, ny, &interior_mask);
        if comps.len() != 1 {
            return Err(Error::Disconnected { components: comps.len() });
        }
        Ok(GridDomain {
            nx,
            ny,
            h,
            origin,
            kinds,
            n_components,
            slot_of,
            node_of_slot,
            interior_slots,
            interior_of_slot,
            links,
            comp_slots,
            geometry,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// Number of boundary components, N + 1.
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Number of inner boundary components N.
    pub fn n_holes(&self) -> usize {
        self.n_components.saturating_sub(1)
    }

    pub fn kinds(&self) -> &[CellKind] {
        &self.kinds
    }

    pub fn kind(&self, node: usize) -> CellKind {
        self.kinds[node]
    }

    pub fn n_slots(&self) -> usize {
        self.node_of_slot.len()
    }

    pub fn n_interior(&self) -> usize {
        self.interior_slots.len()
    }

    pub fn slot_of(&self, node: usize) -> Option<usize> {
        let s = self.slot_of[node];
        (s != NONE).then_some(s as usize)
    }

    pub fn node_of_slot(&self, slot: usize) -> usize {
        self.node_of_slot[slot] as usize
    }

    pub fn interior_slot(&self, r: usize) -> usize {
        self.interior_slots[r] as usize
    }

    pub fn interior_slots(&self) -> &[u32] {
        &self.interior_slots
    }

    pub fn interior_index(&self, slot: usize) -> Option<usize> {
        let r = self.interior_of_slot[slot];
        (r != NONE).then_some(r as usize)
    }

    pub fn slot_kind(&self, slot: usize) -> CellKind {
        self.kinds[self.node_of_slot[slot] as usize]
    }

    pub fn links(&self, r: usize) -> &[Link; 4] {
        &self.links[r]
    }

    pub fn component_slots(&self, k: usize) -> &[u32] {
        &self.comp_slots[k]
    }

    pub fn node_xy(&self, node: usize) -> (f64, f64) {
        let (i, j) = (node % self.nx, node / self.nx);
        (self.origin.0 + i as f64 * self.h, self.origin.1 + j as f64 * self.h)
    }

    pub fn slot_xy(&self, slot: usize) -> (f64, f64) {
        self.node_xy(self.node_of_slot[slot] as usize)
    }

    /// Measure of the discrete domain, `n_interior * h^2`.
    pub fn area(&self) -> f64 {
        self.n_interior() as f64 * self.h * self.h
    }

    pub fn check_component(&self, k: usize) -> Result<()> {
        if k >= self.n_components {
            return Err(Error::Component { k, n: self.n_components });
        }
        Ok(())
    }

    /// Field with the given interior values and the constant `theta[k-1]` on
    /// each inner component (zero on the outer one).
    pub fn field_from_parts(self: &Arc<Self>, interior: &[f64], theta: &[f64]) -> ScalarField {
        assert_eq!(interior.len(), self.n_interior());
        assert_eq!(theta.len(), self.n_holes());
        let mut values = vec![0.0; self.n_slots()];
        for (r, &s) in self.interior_slots.iter().enumerate() {
            values[s as usize] = interior[r];
        }
        for (k, t) in theta.iter().enumerate() {
            for &s in &self.comp_slots[k + 1] {
                values[s as usize] = *t;
            }
        }
        ScalarField { domain: Arc::clone(self), values }
    }

    /// Sum of link weights from interior nodes into component `k`.
    pub fn component_weight(&self, k: usize) -> f64 {
        self.links
            .iter()
            .flat_map(|arms| arms.iter())
            .filter(|l| !l.is_interior() && l.comp as usize == k)
            .map(|l| l.weight)
            .sum()
    }
}

/// Fraction t in (0, 1] of the segment p -> q at which it meets the circle of
/// the given radius centred at the origin.
fn segment_circle_fraction(p: (f64, f64), q: (f64, f64), radius: f64) -> f64 {
    let d = (q.0 - p.0, q.1 - p.1);
    let a = d.0 * d.0 + d.1 * d.1;
    let b = 2.0 * (p.0 * d.0 + p.1 * d.1);
    let c = p.0 * p.0 + p.1 * p.1 - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let sq = disc.sqrt();
    let roots = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)];
    roots
        .into_iter()
        .filter(|t| *t >= -1e-12 && *t <= 1.0 + 1e-12)
        .fold(1.0_f64, f64::min)
        .clamp(0.0, 1.0)
}

fn neighbours4(nx: usize, ny: usize, p: usize) -> impl Iterator<Item = usize> {
    let (i, j) = ((p % nx) as i64, (p / nx) as i64);
    DIRS.into_iter().filter_map(move |(di, dj)| {
        let (a, b) = (i + di, j + dj);
        (a >= 0 && b >= 0 && a < nx as i64 && b < ny as i64).then(|| b as usize * nx + a as usize)
    })
}

fn interior_components(nx: usize, ny: usize, interior: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; nx * ny];
    let mut comps = vec![];
    for start in 0..nx * ny {
        if !interior[start] || seen[start] {
            continue;
        }
        let mut members = vec![];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            members.push(p);
            for q in neighbours4(nx, ny, p) {
                if interior[q] && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        comps.push(members);
    }
    comps
}

fn boundary_is_8_connected(dom: &GridDomain, k: usize) -> bool {
    let slots = dom.component_slots(k);
    let (nx, ny) = (dom.nx, dom.ny);
    let member = |p: usize| dom.kinds[p] == CellKind::Boundary(k as u16);
    let mut seen = vec![false; nx * ny];
    let start = dom.node_of_slot(slots[0] as usize);
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 0;
    while let Some(p) = queue.pop_front() {
        count += 1;
        let (i, j) = ((p % nx) as i64, (p / nx) as i64);
        for dj in -1..=1 {
            for di in -1..=1 {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    continue;
                }
                let q = b as usize * nx + a as usize;
                if !seen[q] && member(q) {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    count == slots.len()
}

/// Real values on every non-exterior node of a domain.
#[derive(Clone, Debug)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(domain: &Arc<GridDomain>) -> ScalarField {
        ScalarField { domain: Arc::clone(domain), values: vec![0.0; domain.n_slots()] }
    }

    pub fn constant(domain: &Arc<GridDomain>, c: f64) -> ScalarField {
        ScalarField { domain: Arc::clone(domain), values: vec![c; domain.n_slots()] }
    }

    pub fn from_values(domain: &Arc<GridDomain>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != domain.n_slots() {
            return Err(Error::InvalidInput(format!(
                "field has {} values, domain has {} nodes",
                values.len(),
                domain.n_slots()
            )));
        }
        if let Some(s) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field value at slot {s}")));
        }
        Ok(ScalarField { domain: Arc::clone(domain), values })
    }

    /// Evaluates `f(x, y)` at every non-exterior node.
    pub fn from_fn(domain: &Arc<GridDomain>, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let values = (0..domain.n_slots())
            .map(|s| {
                let (x, y) = domain.slot_xy(s);
                f(x, y)
            })
            .collect();
        ScalarField { domain: Arc::clone(domain), values }
    }

    /// Field equal to `f` on interior nodes and zero on boundary nodes.
    pub fn from_interior(domain: &Arc<GridDomain>, interior: &[f64]) -> ScalarField {
        domain.field_from_parts(interior, &vec![0.0; domain.n_holes()])
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.values[slot]
    }

    pub fn set(&mut self, slot: usize, v: f64) {
        self.values[slot] = v;
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.domain.interior_slots.iter().map(|&s| self.values[s as usize]).collect()
    }

    pub fn set_interior(&mut self, interior: &[f64]) {
        for (r, &s) in self.domain.interior_slots.iter().enumerate() {
            self.values[s as usize] = interior[r];
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { domain: Arc::clone(&self.domain), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.values.len(), other.values.len(), "fields live on different domains");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        ScalarField { domain: Arc::clone(&self.domain), values }
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Value range over interior nodes.
    pub fn interior_range(&self) -> (f64, f64) {
        self.domain.interior_slots.iter().map(|&s| self.values[s as usize]).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), v| (lo.min(v), hi.max(v)),
        )
    }

    /// Largest deviation from the mean value over boundary component `k`.
    pub fn boundary_spread(&self, k: usize) -> f64 {
        let slots = self.domain.component_slots(k);
        let (lo, hi) = slots.iter().map(|&s| self.values[s as usize]).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), v| (lo.min(v), hi.max(v)),
        );
        hi - lo
    }

    /// Value on component `k` (first node; meaningful when constant there).
    pub fn boundary_value(&self, k: usize) -> f64 {
        self.values[self.domain.component_slots(k)[0] as usize]
    }
}

/// Circulations `a_1..a_N` around the inner boundary components.
#[derive(Clone, Debug, PartialEq)]
pub struct CirculationVector(pub Vec<f64>);

impl CirculationVector {
    pub fn new(a: Vec<f64>) -> CirculationVector {
        CirculationVector(a)
    }

    pub fn zeros(n: usize) -> CirculationVector {
        CirculationVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn check(&self, domain: &GridDomain) -> Result<()> {
        if self.0.len() != domain.n_holes() {
            return Err(Error::InvalidInput(format!(
                "circulation vector has {} entries, domain has {} holes",
                self.0.len(),
                domain.n_holes()
            )));
        }
        if self.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("circulation".into()));
        }
        Ok(())
    }
}

/// `sum_interior f h^2`.
pub fn integrate(f: &ScalarField) -> f64 {
    let d = f.domain();
    let h2 = d.h * d.h;
    d.interior_slots.iter().map(|&s| f.values[s as usize]).sum::<f64>() * h2
}

/// L2 inner product over interior nodes.
pub fn inner(f: &ScalarField, g: &ScalarField) -> f64 {
    let d = f.domain();
    let h2 = d.h * d.h;
    d.interior_slots
        .iter()
        .map(|&s| f.values[s as usize] * g.values[s as usize])
        .sum::<f64>()
        * h2
}

/// Discrete L^p norm over interior nodes.
pub fn norm_lp(f: &ScalarField, p: f64) -> f64 {
    let d = f.domain();
    let h2 = d.h * d.h;
    if p.is_infinite() {
        return d.interior_slots.iter().map(|&s| f.values[s as usize].abs()).fold(0.0, f64::max);
    }
    let sum: f64 = d.interior_slots.iter().map(|&s| f.values[s as usize].abs().powf(p)).sum();
    (sum * h2).powf(1.0 / p)
}

pub fn norm2(f: &ScalarField) -> f64 {
    inner(f, f).sqrt()
}

pub fn max_abs_interior(f: &ScalarField) -> f64 {
    norm_lp(f, f64::INFINITY)
}

/// Discrete Dirichlet form `sum_edges w (u_p - u_q)(v_p - v_q)`, the grid
/// version of `int grad u . grad v`.
pub fn stiffness(u: &ScalarField, v: &ScalarField) -> f64 {
    let d = u.domain();
    let (uv, vv) = (&u.values, &v.values);
    let mut sum = 0.0;
    for (r, arms) in d.links.iter().enumerate() {
        let s = d.interior_slots[r] as usize;
        for l in arms {
            if l.is_interior() && (l.interior as usize) < r {
                continue;
            }
            let q = l.slot as usize;
            sum += l.weight * (uv[s] - uv[q]) * (vv[s] - vv[q]);
        }
    }
    sum
}

/// `-Delta_h u` on interior nodes (zero on boundary nodes).
pub fn neg_laplacian(u: &ScalarField) -> ScalarField {
    let d = u.domain();
    let inv_h2 = 1.0 / (d.h * d.h);
    let mut out = vec![0.0; d.n_slots()];
    for (r, arms) in d.links.iter().enumerate() {
        let s = d.interior_slots[r] as usize;
        let mut acc = 0.0;
        for l in arms {
            acc += l.weight * (u.values[s] - u.values[l.slot as usize]);
        }
        out[s] = acc * inv_h2;
    }
    ScalarField { domain: Arc::clone(d), values: out }
}

/// Discrete outward flux of `u` through component `k`:
/// `sum w (u_q - u_p)` over links from interior `p` to boundary `q` in `k`.
pub fn boundary_flux(u: &ScalarField, k: usize) -> Result<f64> {
    let d = u.domain();
    d.check_component(k)?;
    Ok(all_fluxes(u)[k])
}

/// Fluxes through every component `0..=N`.
pub fn all_fluxes(u: &ScalarField) -> Vec<f64> {
    let d = u.domain();
    let mut flux = vec![0.0; d.n_components];
    for (r, arms) in d.links.iter().enumerate() {
        let s = d.interior_slots[r] as usize;
        for l in arms {
            if !l.is_interior() {
                flux[l.comp as usize] += l.weight * (u.values[l.slot as usize] - u.values[s]);
            }
        }
    }
    flux
}

/// `sum_k v|_k * flux_k(u)` evaluated link by link, the boundary term of the
/// summation-by-parts identity.
pub fn boundary_term(u: &ScalarField, v: &ScalarField) -> f64 {
    let d = u.domain();
    let mut sum = 0.0;
    for (r, arms) in d.links.iter().enumerate() {
        let s = d.interior_slots[r] as usize;
        for l in arms {
            if !l.is_interior() {
                let q = l.slot as usize;
                sum += v.values[q] * l.weight * (u.values[q] - u.values[s]);
            }
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn annulus_node_count_matches_area() {
        let d = GridDomain::annulus(1.0, 2.0, 32).unwrap();
        let expected = 3.0 * PI * 32.0 * 32.0;
        let rel = (d.n_interior() as f64 - expected).abs() / expected;
        assert!(rel < 0.05, "rel {rel}");
        assert_eq!(d.n_components(), 2);
    }

    #[test]
    fn annulus_rejects_bad_input() {
        assert!(matches!(GridDomain::annulus(1.0, 2.0, 4), Err(Error::Resolution(_))));
        assert!(matches!(GridDomain::annulus(2.0, 1.0, 32), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn integrate_one_is_area() {
        let d = GridDomain::annulus(1.0, 2.0, 32).unwrap();
        let one = ScalarField::constant(&d, 1.0);
        let area = integrate(&one);
        assert!((area - 3.0 * PI).abs() / (3.0 * PI) < 0.02, "area {area}");
        assert_eq!(integrate(&ScalarField::zeros(&d)), 0.0);
    }

    #[test]
    fn integrate_half_indicator() {
        let d = GridDomain::annulus(1.0, 2.0, 16).unwrap();
        let n = d.n_interior();
        let ind: Vec<f64> = (0..n).map(|r| if r % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let f = ScalarField::from_interior(&d, &ind);
        let half = (n / 2 + n % 2) as f64 * d.h() * d.h();
        assert_eq!(integrate(&f), half);
    }

    #[test]
    fn crossing_fraction() {
        let t = segment_circle_fraction((1.5, 0.0), (0.5, 0.0), 1.0);
        assert!((t - 0.5).abs() < 1e-14);
        let t = segment_circle_fraction((1.9, 0.0), (2.1, 0.0), 2.0);
        assert!((t - 0.5).abs() < 1e-12);
    }

    fn rect_mask(nx: usize, ny: usize, holes: &[(usize, usize, usize, usize)]) -> Vec<bool> {
        let mut m = vec![false; nx * ny];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                m[j * nx + i] = true;
            }
        }
        for &(i0, i1, j0, j1) in holes {
            for j in j0..j1 {
                for i in i0..i1 {
                    m[j * nx + i] = false;
                }
            }
        }
        m
    }

    #[test]
    fn mask_labeling() {
        let m = rect_mask(20, 20, &[(8, 12, 8, 12)]);
        let d = GridDomain::label_components(20, 20, 0.1, (0.0, 0.0), &m).unwrap();
        assert_eq!(d.n_components(), 2);
        let m = rect_mask(30, 20, &[(5, 9, 8, 12), (18, 24, 6, 10)]);
        let d = GridDomain::label_components(30, 20, 0.1, (0.0, 0.0), &m).unwrap();
        assert_eq!(d.n_components(), 3);
        let again = GridDomain::label_components(30, 20, 0.1, (0.0, 0.0), &m).unwrap();
        assert_eq!(d.kinds(), again.kinds());
    }

    #[test]
    fn mask_rejects_disconnected_and_nested() {
        let mut m = vec![false; 20 * 10];
        for j in 2..8 {
            for i in 2..7 {
                m[j * 20 + i] = true;
            }
            for i in 12..18 {
                m[j * 20 + i] = true;
            }
        }
        let e = GridDomain::label_components(20, 10, 0.1, (0.0, 0.0), &m).unwrap_err();
        assert!(matches!(e, Error::Disconnected { components: 2 }));
        let mut m = rect_mask(21, 21, &[(5, 16, 5, 16)]);
        for j in 9..12 {
            for i in 9..12 {
                m[j * 21 + i] = true;
            }
        }
        let e = GridDomain::label_components(21, 21, 0.1, (0.0, 0.0), &m).unwrap_err();
        assert!(matches!(e, Error::NestedHoles));
    }

    #[test]
    fn flux_of_constant_vanishes() {
        let d = GridDomain::annulus(1.0, 2.0, 16).unwrap();
        let c = ScalarField::constant(&d, 3.7);
        for k in 0..2 {
            assert_eq!(boundary_flux(&c, k).unwrap(), 0.0);
        }
        assert!(boundary_flux(&c, 2).is_err());
    }
}
