//! Structured P1 triangulations of the unit square.
//!
//! Nodes are numbered row-major (`j * (nx + 1) + i`), every grid cell is split
//! along its lower-left/upper-right diagonal into two counter-clockwise
//! triangles. Subdomain labels are assigned from triangle centroids.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subdomain label of the conductive block in the heat benchmark.
pub const HEAT_BLOCK: usize = 0;
/// Subdomain label of the surrounding material in the heat benchmark.
pub const HEAT_OUTER: usize = 1;
/// Label of the low-permeability, source-carrying center block of the 3x3 layout.
pub const CENTER_BLOCK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layout {
    /// Centered square block `Ω0` of the given side inside `Ω1`.
    Heat2d { block_side: f64 },
    /// 3x3 block layout, labels 1..=9 numbered left to right, bottom to top.
    AdvDiff9d,
}

impl Layout {
    pub fn heat2d() -> Self {
        Layout::Heat2d { block_side: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Top,
    Base,
    Side,
    Inlet,
    Outlet,
    Wall,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Top => "top",
            BoundaryTag::Base => "base",
            BoundaryTag::Side => "side",
            BoundaryTag::Inlet => "inlet",
            BoundaryTag::Outlet => "outlet",
            BoundaryTag::Wall => "wall",
        }
    }
}

impl FromStr for BoundaryTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "top" => BoundaryTag::Top,
            "base" => BoundaryTag::Base,
            "side" => BoundaryTag::Side,
            "inlet" => BoundaryTag::Inlet,
            "outlet" => BoundaryTag::Outlet,
            "wall" => BoundaryTag::Wall,
            other => return Err(Error::Parse(format!("unknown boundary tag `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub subdomain: Vec<usize>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Longest edge of each triangle.
    pub h_elem: Vec<f64>,
    pub layout: Layout,
}

impl Mesh {
    /// Builds a conforming `nx` by `ny` structured triangulation.
    pub fn unit_square(nx: usize, ny: usize, layout: Layout) -> Result<Mesh> {
        if nx < 2 || ny < 2 {
            return Err(Error::Config(format!(
                "mesh needs at least 2 cells per direction, got {nx}x{ny}"
            )));
        }
        match layout {
            Layout::Heat2d { block_side } => {
                if !(block_side > 0.0 && block_side < 1.0) {
                    return Err(Error::Config(format!(
                        "heat2d block side must lie in (0, 1), got {block_side}"
                    )));
                }
                let lo = 0.5 - 0.5 * block_side;
                for (n, axis) in [(nx, "nx"), (ny, "ny")] {
                    let edge = lo * n as f64;
                    if (edge - edge.round()).abs() > 1e-9 || edge.round() < 1.0 {
                        return Err(Error::Config(format!(
                            "heat2d: {axis}={n} does not place the block edges \
                             ({lo} and {}) on mesh lines; {axis} * {lo} must be an integer \
                             (a multiple of 4 for the default block side 1/2)",
                            1.0 - lo
                        )));
                    }
                }
            }
            Layout::AdvDiff9d => {
                if nx % 3 != 0 || ny % 3 != 0 {
                    return Err(Error::Config(format!(
                        "advdiff9d: nx and ny must be divisible by 3 so the 3x3 blocks \
                         align with mesh lines, got {nx}x{ny}"
                    )));
                }
            }
        }

        let stride = nx + 1;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 / nx as f64, j as f64 / ny as f64]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let a = j * stride + i;
                let b = a + 1;
                let c = b + stride;
                let d = a + stride;
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }

        let subdomain = triangles
            .iter()
            .map(|t| {
                let cx = (nodes[t[0]][0] + nodes[t[1]][0] + nodes[t[2]][0]) / 3.0;
                let cy = (nodes[t[0]][1] + nodes[t[1]][1] + nodes[t[2]][1]) / 3.0;
                match layout {
                    Layout::Heat2d { block_side } => {
                        let lo = 0.5 - 0.5 * block_side;
                        let hi = 0.5 + 0.5 * block_side;
                        if cx > lo && cx < hi && cy > lo && cy < hi {
                            HEAT_BLOCK
                        } else {
                            HEAT_OUTER
                        }
                    }
                    Layout::AdvDiff9d => {
                        let bi = ((cx * 3.0) as usize).min(2);
                        let bj = ((cy * 3.0) as usize).min(2);
                        1 + bi + 3 * bj
                    }
                }
            })
            .collect();

        let (bottom, top, left, right) = match layout {
            Layout::Heat2d { .. } => (
                BoundaryTag::Base,
                BoundaryTag::Top,
                BoundaryTag::Side,
                BoundaryTag::Side,
            ),
            Layout::AdvDiff9d => (
                BoundaryTag::Wall,
                BoundaryTag::Wall,
                BoundaryTag::Inlet,
                BoundaryTag::Outlet,
            ),
        };
        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary_edges.push(BoundaryEdge {
                nodes: [i, i + 1],
                tag: bottom,
            });
            let t = ny * stride + i;
            boundary_edges.push(BoundaryEdge {
                nodes: [t, t + 1],
                tag: top,
            });
        }
        for j in 0..ny {
            let l = j * stride;
            boundary_edges.push(BoundaryEdge {
                nodes: [l, l + stride],
                tag: left,
            });
            let r = j * stride + nx;
            boundary_edges.push(BoundaryEdge {
                nodes: [r, r + stride],
                tag: right,
            });
        }

        Mesh::from_parts(nodes, triangles, subdomain, boundary_edges, layout)
    }

    /// Assembles a mesh from raw tables and checks its invariants.
    pub fn from_parts(
        nodes: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        subdomain: Vec<usize>,
        boundary_edges: Vec<BoundaryEdge>,
        layout: Layout,
    ) -> Result<Mesh> {
        if subdomain.len() != triangles.len() {
            return Err(Error::Config(format!(
                "{} subdomain labels for {} triangles",
                subdomain.len(),
                triangles.len()
            )));
        }
        let n = nodes.len();
        let mut h_elem = Vec::with_capacity(triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::Config(format!("triangle {k} references a missing node")));
            }
            if signed_area(&nodes, t) <= 0.0 {
                return Err(Error::Config(format!("triangle {k} has non-positive area")));
            }
            let h = (0..3)
                .map(|e| {
                    let p = nodes[t[e]];
                    let q = nodes[t[(e + 1) % 3]];
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                })
                .fold(0.0, f64::max);
            h_elem.push(h);
        }
        if boundary_edges.iter().any(|e| e.nodes.iter().any(|&v| v >= n)) {
            return Err(Error::Config("boundary edge references a missing node".into()));
        }
        Ok(Mesh {
            nodes,
            triangles,
            subdomain,
            boundary_edges,
            h_elem,
            layout,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.nodes, &self.triangles[t])
    }

    /// Distinct subdomain labels in ascending order.
    pub fn subdomain_labels(&self) -> Vec<usize> {
        let mut labels = self.subdomain.clone();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary_edges.iter().any(|e| e.tag == tag)
    }

    /// Per-node flag: true if the node lies on an edge carrying `tag`.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for e in self.boundary_edges.iter().filter(|e| e.tag == tag) {
            mask[e.nodes[0]] = true;
            mask[e.nodes[1]] = true;
        }
        mask
    }

    /// Writes the node, triangle and boundary tables as plain text.
    ///
    /// ```text
    /// layout heat2d 0.5
    /// nodes <n>
    /// <x> <y>
    /// triangles <m>
    /// <a> <b> <c> <label>
    /// edges <k>
    /// <a> <b> <tag>
    /// ```
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let mut s = String::new();
        match self.layout {
            Layout::Heat2d { block_side } => writeln!(s, "layout heat2d {block_side:e}").unwrap(),
            Layout::AdvDiff9d => writeln!(s, "layout advdiff9d").unwrap(),
        }
        writeln!(s, "nodes {}", self.nodes.len()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{:e} {:e}", p[0], p[1]).unwrap();
        }
        writeln!(s, "triangles {}", self.triangles.len()).unwrap();
        for (t, l) in self.triangles.iter().zip(&self.subdomain) {
            writeln!(s, "{} {} {} {}", t[0], t[1], t[2], l).unwrap();
        }
        writeln!(s, "edges {}", self.boundary_edges.len()).unwrap();
        for e in &self.boundary_edges {
            writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.as_str()).unwrap();
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Mesh> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of mesh file".into()))?
                .map_err(Error::from)
        };
        let header = next()?;
        let mut words = header.split_whitespace();
        if words.next() != Some("layout") {
            return Err(Error::Parse("mesh file must start with `layout`".into()));
        }
        let layout = match words.next() {
            Some("heat2d") => Layout::Heat2d {
                block_side: parse_word(words.next())?,
            },
            Some("advdiff9d") => Layout::AdvDiff9d,
            other => return Err(Error::Parse(format!("unknown layout {other:?}"))),
        };

        let count = |line: String, key: &str| -> Result<usize> {
            let mut w = line.split_whitespace();
            if w.next() != Some(key) {
                return Err(Error::Parse(format!("expected section `{key}`")));
            }
            parse_word(w.next())
        };

        let n = count(next()?, "nodes")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let line = next()?;
            let mut w = line.split_whitespace();
            nodes.push([parse_word(w.next())?, parse_word(w.next())?]);
        }
        let m = count(next()?, "triangles")?;
        let mut triangles = Vec::with_capacity(m);
        let mut subdomain = Vec::with_capacity(m);
        for _ in 0..m {
            let line = next()?;
            let mut w = line.split_whitespace();
            triangles.push([
                parse_word(w.next())?,
                parse_word(w.next())?,
                parse_word(w.next())?,
            ]);
            subdomain.push(parse_word(w.next())?);
        }
        let k = count(next()?, "edges")?;
        let mut boundary_edges = Vec::with_capacity(k);
        for _ in 0..k {
            let line = next()?;
            let mut w = line.split_whitespace();
            let a = parse_word(w.next())?;
            let b = parse_word(w.next())?;
            let tag = w
                .next()
                .ok_or_else(|| Error::Parse("missing boundary tag".into()))?
                .parse()?;
            boundary_edges.push(BoundaryEdge { nodes: [a, b], tag });
        }
        Mesh::from_parts(nodes, triangles, subdomain, boundary_edges, layout)
    }
}

fn parse_word<T: FromStr>(w: Option<&str>) -> Result<T> {
    let w = w.ok_or_else(|| Error::Parse("missing field".into()))?;
    w.parse()
        .map_err(|_| Error::Parse(format!("cannot parse `{w}`")))
}

fn signed_area(nodes: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_4x4_counts_and_block() {
        let m = Mesh::unit_square(4, 4, Layout::heat2d()).unwrap();
        assert_eq!(m.num_nodes(), 25);
        assert_eq!(m.num_triangles(), 32);
        let in_block = m.subdomain.iter().filter(|&&l| l == HEAT_BLOCK).count();
        // [1/4, 3/4]^2 covers the central 2x2 cells.
        assert_eq!(in_block, 8);
        let total: f64 = (0..m.num_triangles()).map(|t| m.area(t)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert_eq!(m.subdomain_labels(), vec![HEAT_BLOCK, HEAT_OUTER]);
    }

    #[test]
    fn nine_blocks_on_3x3() {
        let m = Mesh::unit_square(3, 3, Layout::AdvDiff9d).unwrap();
        for label in 1..=9 {
            assert_eq!(m.subdomain.iter().filter(|&&l| l == label).count(), 2);
        }
        // center cell is block 5
        let center: Vec<_> = (0..m.num_triangles())
            .filter(|&t| m.subdomain[t] == CENTER_BLOCK)
            .collect();
        assert_eq!(center, vec![8, 9]);
    }

    #[test]
    fn divisibility_is_enforced() {
        let err = Mesh::unit_square(6, 8, Layout::heat2d()).unwrap_err();
        assert!(err.to_string().contains("nx"));
        let err = Mesh::unit_square(4, 4, Layout::AdvDiff9d).unwrap_err();
        assert!(err.to_string().contains("divisible by 3"));
        assert!(Mesh::unit_square(1, 4, Layout::heat2d()).is_err());
        // a quarter-width block needs multiples of 8
        let small = Layout::Heat2d { block_side: 0.25 };
        assert!(Mesh::unit_square(4, 4, small).is_err());
        assert!(Mesh::unit_square(8, 8, small).is_ok());
    }

    #[test]
    fn boundary_tags() {
        let m = Mesh::unit_square(4, 4, Layout::heat2d()).unwrap();
        let top = m.tagged_nodes(BoundaryTag::Top);
        assert_eq!(top.iter().filter(|&&b| b).count(), 5);
        assert!(m.has_tag(BoundaryTag::Base) && m.has_tag(BoundaryTag::Side));
        let m = Mesh::unit_square(6, 6, Layout::AdvDiff9d).unwrap();
        let inlet = m.tagged_nodes(BoundaryTag::Inlet);
        for (k, p) in m.nodes.iter().enumerate() {
            assert_eq!(inlet[k], p[0] == 0.0);
        }
    }

    #[test]
    fn text_round_trip() {
        let m = Mesh::unit_square(6, 3, Layout::AdvDiff9d).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let back = Mesh::read_text(buf.as_slice()).unwrap();
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.subdomain, m.subdomain);
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.boundary_edges, m.boundary_edges);
        assert_eq!(back.layout, m.layout);
    }
}
