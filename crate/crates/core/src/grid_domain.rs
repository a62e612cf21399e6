//! Masked uniform grids for "balls joined by thin corridors" domains.
//!
//! Nodes sit at `(xmin + i*h, ymin + j*h)` and are stored row-major with `y`
//! ascending, so node `(i, j)` has flat index `j*nx + i`. A node is interior
//! iff it lies strictly inside one of the balls or one of the corridor
//! rectangles. The outermost ring of the grid is always exterior, so the four
//! stencil neighbours of an interior node always exist.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: (f64, f64),
    pub radius: f64,
    pub species_index: usize,
}

/// Straight rectangle of the given width along the segment joining two ball
/// centers. `from_ball` and `to_ball` index into the ball list.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorSpec {
    pub from_ball: usize,
    pub to_ball: usize,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

/// Classification of a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Exterior,
    /// Inside the ball hosting the given species.
    Ball(usize),
    Corridor,
}

/// A subset of grid nodes, stored as a mask over all nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSet {
    mask: Vec<bool>,
    count: usize,
}

impl NodeSet {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        let count = mask.iter().filter(|&&m| m).count();
        Self { mask, count }
    }

    #[inline]
    pub fn contains(&self, p: usize) -> bool {
        self.mask[p]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Flat indices of member nodes, ascending.
    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(p, _)| p)
    }

    pub fn is_subset_of(&self, other: &NodeSet) -> bool {
        self.mask.len() == other.mask.len() && self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    nx: usize,
    ny: usize,
    h: f64,
    xmin: f64,
    ymin: f64,
    interior: NodeSet,
    ball_label: Vec<Option<usize>>,
    corridor_flag: Vec<bool>,
    balls: Vec<BallSpec>,
    corridors: Vec<CorridorSpec>,
}

impl GridDomain {
    /// Rasterizes the union of open balls and corridor rectangles.
    pub fn build(balls: &[BallSpec], corridors: &[CorridorSpec], bbox: BoundingBox, h: f64) -> Result<Self> {
        validate(balls, corridors, &bbox, h)?;

        let nx = ((bbox.xmax - bbox.xmin) / h + 1e-9).floor() as usize + 1;
        let ny = ((bbox.ymax - bbox.ymin) / h + 1e-9).floor() as usize + 1;
        if nx < 3 || ny < 3 {
            return Err(Error::Domain("grid has fewer than 3 nodes per direction".into()));
        }
        let xmax = bbox.xmin + (nx - 1) as f64 * h;
        let ymax = bbox.ymin + (ny - 1) as f64 * h;
        for b in balls {
            let (cx, cy) = b.center;
            if !(cx - b.radius > bbox.xmin
                && cx + b.radius < xmax
                && cy - b.radius > bbox.ymin
                && cy + b.radius < ymax)
            {
                return Err(Error::Domain(format!(
                    "bounding box does not strictly contain ball of species {}",
                    b.species_index
                )));
            }
        }

        let n = nx * ny;
        let mut ball_label = vec![None; n];
        let mut corridor_flag = vec![false; n];
        let mut mask = vec![false; n];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let p = j * nx + i;
                let x = bbox.xmin + i as f64 * h;
                let y = bbox.ymin + j as f64 * h;
                if let Some(b) = balls.iter().find(|b| inside_ball(b, x, y)) {
                    ball_label[p] = Some(b.species_index);
                    mask[p] = true;
                } else if corridors.iter().any(|c| inside_corridor(balls, c, x, y)) {
                    corridor_flag[p] = true;
                    mask[p] = true;
                }
            }
        }

        // Balls must not touch on the grid once corridors are taken away.
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let p = j * nx + i;
                let Some(a) = ball_label[p] else { continue };
                for q in [p + 1, p + nx] {
                    if let Some(b) = ball_label[q] {
                        if a != b {
                            return Err(Error::Domain(format!(
                                "balls {a} and {b} are grid-adjacent at spacing {h}"
                            )));
                        }
                    }
                }
            }
        }

        Ok(Self {
            nx,
            ny,
            h,
            xmin: bbox.xmin,
            ymin: bbox.ymin,
            interior: NodeSet::from_mask(mask),
            ball_label,
            corridor_flag,
            balls: balls.to_vec(),
            corridors: corridors.to_vec(),
        })
    }

    /// Plain rectangle `[xmin, xmax] x [ymin, ymax]` with every non-boundary
    /// node interior. Used for manufactured-solution studies.
    pub fn rectangle(bbox: BoundingBox, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Domain("grid spacing must be positive".into()));
        }
        let nx = ((bbox.xmax - bbox.xmin) / h + 1e-9).floor() as usize + 1;
        let ny = ((bbox.ymax - bbox.ymin) / h + 1e-9).floor() as usize + 1;
        if nx < 3 || ny < 3 {
            return Err(Error::Domain("grid has fewer than 3 nodes per direction".into()));
        }
        let mut mask = vec![false; nx * ny];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                mask[j * nx + i] = true;
            }
        }
        Ok(Self {
            nx,
            ny,
            h,
            xmin: bbox.xmin,
            ymin: bbox.ymin,
            interior: NodeSet::from_mask(mask),
            ball_label: vec![None; nx * ny],
            corridor_flag: vec![false; nx * ny],
            balls: Vec::new(),
            corridors: Vec::new(),
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

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn balls(&self) -> &[BallSpec] {
        &self.balls
    }

    pub fn corridors(&self) -> &[CorridorSpec] {
        &self.corridors
    }

    /// Number of species, i.e. one per ball.
    pub fn species_count(&self) -> usize {
        self.balls.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, p: usize) -> (f64, f64) {
        let (i, j) = (p % self.nx, p / self.nx);
        (self.xmin + i as f64 * self.h, self.ymin + j as f64 * self.h)
    }

    #[inline]
    pub fn is_interior(&self, p: usize) -> bool {
        self.interior.contains(p)
    }

    pub fn interior(&self) -> &NodeSet {
        &self.interior
    }

    pub fn ball_label(&self, p: usize) -> Option<usize> {
        self.ball_label[p]
    }

    pub fn corridor_flag(&self, p: usize) -> bool {
        self.corridor_flag[p]
    }

    /// Flat indices of the four stencil neighbours (E, W, N, S). Only valid
    /// for nodes off the outer ring.
    #[inline]
    pub fn neighbours(&self, p: usize) -> [usize; 4] {
        [p + 1, p - 1, p + self.nx, p - self.nx]
    }

    pub fn region_membership(&self, i: usize, j: usize) -> Result<Region> {
        if i >= self.nx || j >= self.ny {
            return Err(Error::Index { i, j, nx: self.nx, ny: self.ny });
        }
        let p = self.index(i, j);
        Ok(match (self.ball_label[p], self.corridor_flag[p]) {
            (Some(s), _) => Region::Ball(s),
            (None, true) => Region::Corridor,
            (None, false) => Region::Exterior,
        })
    }

    /// Interior nodes of the ball hosting `species`.
    pub fn ball_nodes(&self, species: usize) -> NodeSet {
        NodeSet::from_mask(self.ball_label.iter().map(|&l| l == Some(species)).collect())
    }

    pub fn corridor_nodes(&self) -> NodeSet {
        NodeSet::from_mask(self.corridor_flag.clone())
    }

    /// Nearest grid node to a point, clamped to the grid.
    pub fn nearest_node(&self, x: f64, y: f64) -> (usize, usize) {
        let i = ((x - self.xmin) / self.h).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((y - self.ymin) / self.h).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    /// 4-connected components of a node set, each returned as its own set.
    /// Components are ordered by their smallest node index.
    pub fn connected_components(&self, set: &NodeSet) -> Vec<NodeSet> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in set.nodes() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![false; n];
            seen[start] = true;
            stack.push(start);
            while let Some(p) = stack.pop() {
                comp[p] = true;
                let (i, j) = (p % self.nx, p / self.nx);
                let mut visit = |q: usize| {
                    if set.contains(q) && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                };
                if i + 1 < self.nx {
                    visit(p + 1);
                }
                if i > 0 {
                    visit(p - 1);
                }
                if j + 1 < self.ny {
                    visit(p + self.nx);
                }
                if j > 0 {
                    visit(p - self.nx);
                }
            }
            out.push(NodeSet::from_mask(comp));
        }
        out
    }
}

fn inside_ball(b: &BallSpec, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - b.center.0, y - b.center.1);
    dx * dx + dy * dy < b.radius * b.radius
}

fn inside_corridor(balls: &[BallSpec], c: &CorridorSpec, x: f64, y: f64) -> bool {
    let (ax, ay) = balls[c.from_ball].center;
    let (bx, by) = balls[c.to_ball].center;
    let (ex, ey) = (bx - ax, by - ay);
    let len = (ex * ex + ey * ey).sqrt();
    let (tx, ty) = (ex / len, ey / len);
    let (rx, ry) = (x - ax, y - ay);
    let along = rx * tx + ry * ty;
    let across = -rx * ty + ry * tx;
    along > 0.0 && along < len && across.abs() < 0.5 * c.width
}

fn validate(balls: &[BallSpec], corridors: &[CorridorSpec], bbox: &BoundingBox, h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain("grid spacing must be positive".into()));
    }
    if !(bbox.xmax > bbox.xmin && bbox.ymax > bbox.ymin) {
        return Err(Error::Domain("empty bounding box".into()));
    }
    if balls.is_empty() {
        return Err(Error::Domain("at least one ball is required".into()));
    }
    let k = balls.len();
    let mut seen = vec![false; k];
    for b in balls {
        if !(b.radius > 0.0) {
            return Err(Error::Domain("ball radius must be positive".into()));
        }
        if b.species_index >= k || seen[b.species_index] {
            return Err(Error::Domain(format!(
                "species indices must be a permutation of 0..{k}, got {}",
                b.species_index
            )));
        }
        seen[b.species_index] = true;
    }
    for (a, ba) in balls.iter().enumerate() {
        for bb in &balls[a + 1..] {
            let d = ((ba.center.0 - bb.center.0).powi(2) + (ba.center.1 - bb.center.1).powi(2)).sqrt();
            if d <= ba.radius + bb.radius {
                return Err(Error::Domain("balls not disjoint".into()));
            }
        }
    }
    for c in corridors {
        if c.from_ball >= k || c.to_ball >= k {
            return Err(Error::Domain(format!(
                "corridor endpoint out of range ({} -> {})",
                c.from_ball, c.to_ball
            )));
        }
        if c.from_ball == c.to_ball {
            return Err(Error::Domain("corridor must join two distinct balls".into()));
        }
        if !(c.width > 0.0) {
            return Err(Error::Domain("corridor width must be positive".into()));
        }
        let rmin = balls[c.from_ball].radius.min(balls[c.to_ball].radius);
        if c.width >= rmin {
            return Err(Error::Domain(format!(
                "corridor width {} not below the smaller endpoint radius {rmin}",
                c.width
            )));
        }
        if c.width < 3.0 * h {
            return Err(Error::Domain("corridor unresolved".into()));
        }
    }
    Ok(())
}
