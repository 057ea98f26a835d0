//! Conforming triangle meshes: construction, face connectivity, boundary tags.
//!
//! Meshes are flat indexed lists of vertices and counter-clockwise
//! triangles. A [`FaceTable`] deduplicates the element edges into faces
//! with a fixed unit normal each, so jump terms and flux degrees of
//! freedom get deterministic signs: for an interior face the element
//! with the lower index is "left" and the normal points left to right;
//! for a boundary face the normal points outward. Boundary faces carry
//! tags marking where Dirichlet and Neumann data are imposed.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Axis-aligned rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Rect> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(Error::InvalidBbox("coordinates must be finite".into()));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidBbox(format!(
                "need x1 > x0 and y1 > y0, got ({x0}, {x1}) x ({y0}, {y1})"
            )));
        }
        Ok(Rect { x0, y0, x1, y1 })
    }

    pub fn unit() -> Rect {
        Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

/// Triangulation of a polygon; triangles are counter-clockwise.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub domain_bbox: Rect,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Coordinates of the three corners of triangle `e`.
    pub fn triangle_coords(&self, e: usize) -> [[f64; 2]; 3] {
        let t = self.triangles[e];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Signed area (positive for counter-clockwise corners).
    pub fn signed_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(e);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn area(&self, e: usize) -> f64 {
        self.signed_area(e)
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.triangle_coords(e);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Longest edge of triangle `e`.
    pub fn diameter(&self, e: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(e);
        let d = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    /// Largest element diameter (the mesh size h).
    pub fn max_diameter(&self) -> f64 {
        (0..self.n_triangles()).map(|e| self.diameter(e)).fold(0.0, f64::max)
    }

    pub fn min_diameter(&self) -> f64 {
        (0..self.n_triangles())
            .map(|e| self.diameter(e))
            .fold(f64::INFINITY, f64::min)
    }

    /// Ratio of largest to smallest element diameter.
    pub fn quasi_uniformity(&self) -> f64 {
        self.max_diameter() / self.min_diameter()
    }

    /// Check vertex indices, orientation, and edge multiplicities.
    pub fn validate(&self) -> Result<()> {
        let nv = self.n_vertices();
        if self.n_triangles() == 0 {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        for (e, t) in self.triangles.iter().enumerate() {
            if t[0] >= nv || t[1] >= nv || t[2] >= nv {
                return Err(Error::InvalidMesh(format!(
                    "triangle {e} references a vertex beyond {nv}"
                )));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::InvalidMesh(format!("triangle {e} repeats a vertex")));
            }
            let area = self.signed_area(e);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {e} has non-positive signed area {area}"
                )));
            }
        }
        // Each undirected edge may appear at most twice, once per direction.
        let mut seen: HashMap<(usize, usize), Vec<bool>> = HashMap::new();
        for t in &self.triangles {
            for (va, vb) in [(t[1], t[2]), (t[2], t[0]), (t[0], t[1])] {
                let key = (va.min(vb), va.max(vb));
                seen.entry(key).or_default().push(va < vb);
            }
        }
        for ((a, b), dirs) in &seen {
            if dirs.len() > 2 {
                return Err(Error::Nonconforming(format!(
                    "edge ({a}, {b}) is shared by {} triangles",
                    dirs.len()
                )));
            }
            if dirs.len() == 2 && dirs[0] == dirs[1] {
                return Err(Error::Nonconforming(format!(
                    "edge ({a}, {b}) is traversed twice in the same direction"
                )));
            }
        }
        Ok(())
    }
}

/// Structured mesh of a rectangle: each of the nx x ny grid cells is cut
/// into 4 triangles about its center, producing the criss-cross diagonal
/// pattern. 4 nx ny triangles, (nx+1)(ny+1) + nx ny vertices.
pub fn generate_union_jack(nx: usize, ny: usize, bbox: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config(format!(
            "union-jack mesh needs nx, ny >= 1 (got {nx} x {ny})"
        )));
    }
    let dx = bbox.width() / nx as f64;
    let dy = bbox.height() / ny as f64;
    if !(dx > 0.0 && dy > 0.0) {
        return Err(Error::InvalidBbox("degenerate cell size".into()));
    }
    let n_grid = (nx + 1) * (ny + 1);
    let mut vertices = Vec::with_capacity(n_grid + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([bbox.x0 + i as f64 * dx, bbox.y0 + j as f64 * dy]);
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([
                bbox.x0 + (i as f64 + 0.5) * dx,
                bbox.y0 + (j as f64 + 0.5) * dy,
            ]);
        }
    }
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = grid(i, j);
            let b = grid(i + 1, j);
            let c = grid(i + 1, j + 1);
            let d = grid(i, j + 1);
            let e = n_grid + j * nx + i;
            triangles.push([a, b, e]);
            triangles.push([b, c, e]);
            triangles.push([c, d, e]);
            triangles.push([d, a, e]);
        }
    }
    let mesh = Mesh { vertices, triangles, domain_bbox: bbox };
    mesh.validate()?;
    Ok(mesh)
}

/// One mesh face (element edge after deduplication).
///
/// The stored vertex order `a -> b` is the direction in which the left
/// element traverses the edge, so `normal` (rotated minus 90 degrees
/// from the direction of travel) points away from the left element.
#[derive(Debug, Clone)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    pub left: usize,
    pub right: Option<usize>,
    /// Unit normal, from left element to right (outward on the boundary).
    pub normal: [f64; 2],
    /// Face length h_F.
    pub length: f64,
    pub midpoint: [f64; 2],
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Deduplicated faces plus element-to-face connectivity.
#[derive(Debug, Clone)]
pub struct FaceTable {
    pub faces: Vec<Face>,
    /// For each triangle, the face opposite local vertex i.
    pub elem_faces: Vec<[usize; 3]>,
    /// +1 when the element is left of the face, -1 when right.
    pub elem_face_sign: Vec<[f64; 3]>,
    /// Ids of boundary faces, ascending.
    pub boundary: Vec<usize>,
}

impl FaceTable {
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.len()
    }
}

/// Build the face table; errors on nonconforming input.
pub fn build_face_table(mesh: &Mesh) -> Result<FaceTable> {
    mesh.validate()?;
    let nt = mesh.n_triangles();
    // (element, local face index, traverses as stored key order?)
    let mut adj: HashMap<(usize, usize), Vec<(usize, usize, bool)>> = HashMap::new();
    for (e, t) in mesh.triangles.iter().enumerate() {
        for (loc, (va, vb)) in [(t[1], t[2]), (t[2], t[0]), (t[0], t[1])]
            .into_iter()
            .enumerate()
        {
            let key = (va.min(vb), va.max(vb));
            adj.entry(key).or_default().push((e, loc, va < vb));
        }
    }
    let mut keys: Vec<(usize, usize)> = adj.keys().copied().collect();
    keys.sort_unstable();
    let mut faces = Vec::with_capacity(keys.len());
    let mut elem_faces = vec![[usize::MAX; 3]; nt];
    let mut elem_face_sign = vec![[0.0f64; 3]; nt];
    let mut boundary = Vec::new();
    for key in keys {
        let owners = &adj[&key];
        let fid = faces.len();
        let (left, right) = match owners.as_slice() {
            [one] => (*one, None),
            [x, y] => {
                if x.2 == y.2 {
                    return Err(Error::Nonconforming(format!(
                        "edge ({}, {}) traversed twice in the same direction",
                        key.0, key.1
                    )));
                }
                if x.0 <= y.0 {
                    (*x, Some(*y))
                } else {
                    (*y, Some(*x))
                }
            }
            more => {
                return Err(Error::Nonconforming(format!(
                    "edge ({}, {}) shared by {} triangles",
                    key.0,
                    key.1,
                    more.len()
                )))
            }
        };
        // Direct the face as the left element walks it.
        let (a, b) = if left.2 { (key.0, key.1) } else { (key.1, key.0) };
        let pa = mesh.vertices[a];
        let pb = mesh.vertices[b];
        let tx = pb[0] - pa[0];
        let ty = pb[1] - pa[1];
        let length = tx.hypot(ty);
        faces.push(Face {
            a,
            b,
            left: left.0,
            right: right.map(|r| r.0),
            normal: [ty / length, -tx / length],
            length,
            midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
        });
        elem_faces[left.0][left.1] = fid;
        elem_face_sign[left.0][left.1] = 1.0;
        if let Some(r) = right {
            elem_faces[r.0][r.1] = fid;
            elem_face_sign[r.0][r.1] = -1.0;
        } else {
            boundary.push(fid);
        }
    }
    debug_assert!(elem_faces.iter().all(|f| f.iter().all(|&x| x != usize::MAX)));
    // Euler-type consistency: every element edge was placed exactly once.
    let placed: usize = faces.iter().map(|f| if f.is_boundary() { 1 } else { 2 }).sum();
    if placed != 3 * nt {
        return Err(Error::Nonconforming(format!(
            "face bookkeeping mismatch: {placed} element edges placed, expected {}",
            3 * nt
        )));
    }
    Ok(FaceTable { faces, elem_faces, elem_face_sign, boundary })
}

/// Classification of a face with respect to the boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceTag {
    /// Not a boundary face.
    Interior,
    /// Both the trace and the conormal flux are prescribed here.
    Sigma,
    /// Only the trace is prescribed.
    DirichletOnly,
    /// No data; part of the inaccessible boundary.
    Untagged,
}

/// Per-face boundary classification (indexed by face id).
#[derive(Debug, Clone)]
pub struct BoundaryTags {
    pub tags: Vec<FaceTag>,
}

impl BoundaryTags {
    /// Is the Neumann datum known on face `f`?
    pub fn sigma_neumann(&self, f: usize) -> bool {
        self.tags[f] == FaceTag::Sigma
    }

    /// Is a Dirichlet value imposed on face `f`?
    pub fn sigma_dirichlet(&self, f: usize) -> bool {
        matches!(self.tags[f], FaceTag::Sigma | FaceTag::DirichletOnly)
    }

    /// Boundary face with no data at all.
    pub fn is_inaccessible(&self, f: usize) -> bool {
        self.tags[f] == FaceTag::Untagged
    }

    pub fn n_sigma(&self) -> usize {
        self.tags.iter().filter(|t| **t == FaceTag::Sigma).count()
    }
}

/// Tag boundary faces by evaluating the two predicates at face midpoints.
///
/// Every face where the Neumann rule holds must satisfy the Dirichlet
/// rule as well (both data are known on the accessible part); otherwise
/// the call fails.
pub fn tag_boundary<S, D>(
    _mesh: &Mesh,
    faces: &FaceTable,
    sigma_rule: S,
    dirichlet_rule: D,
) -> Result<BoundaryTags>
where
    S: Fn(f64, f64) -> bool,
    D: Fn(f64, f64) -> bool,
{
    let mut tags = vec![FaceTag::Interior; faces.n_faces()];
    for &f in &faces.boundary {
        let [mx, my] = faces.faces[f].midpoint;
        let s = sigma_rule(mx, my);
        let d = dirichlet_rule(mx, my);
        tags[f] = match (s, d) {
            (true, true) => FaceTag::Sigma,
            (true, false) => return Err(Error::TagConflict { face: f }),
            (false, true) => FaceTag::DirichletOnly,
            (false, false) => FaceTag::Untagged,
        };
    }
    Ok(BoundaryTags { tags })
}

// ---------------------------------------------------------------------------
// ASCII mesh format
//
//   mfem-mesh 1
//   nv nt nbf
//   nv lines: x y
//   nt lines: v0 v1 v2
//   nbf lines: v0 v1 tag     (tag: S both data, D Dirichlet only, N none)
// ---------------------------------------------------------------------------

/// Serialize mesh plus boundary tags to the ASCII format.
pub fn to_ascii_string(mesh: &Mesh, faces: &FaceTable, tags: &BoundaryTags) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mfem-mesh 1");
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        faces.n_boundary()
    );
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {}", v[0], v[1]);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for &f in &faces.boundary {
        let face = &faces.faces[f];
        let tag = match tags.tags[f] {
            FaceTag::Sigma => "S",
            FaceTag::DirichletOnly => "D",
            FaceTag::Untagged => "N",
            FaceTag::Interior => unreachable!("boundary list holds boundary faces"),
        };
        let _ = writeln!(out, "{} {} {}", face.a, face.b, tag);
    }
    out
}

/// Parse the ASCII format; rebuilds connectivity and validates.
pub fn from_ascii_str(text: &str) -> Result<(Mesh, FaceTable, BoundaryTags)> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
    if header != "mfem-mesh 1" {
        return Err(Error::Parse(format!("unexpected header {header:?}")));
    }
    let counts = lines
        .next()
        .ok_or_else(|| Error::Parse("missing count line".into()))?;
    let mut it = counts.split_whitespace();
    let mut next_count = || -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse("count line needs nv nt nbf".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad count: {e}")))
    };
    let nv = next_count()?;
    let nt = next_count()?;
    let nbf = next_count()?;
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing vertex line {i}")))?;
        let mut toks = line.split_whitespace();
        let mut coord = |name: &str| -> Result<f64> {
            toks.next()
                .ok_or_else(|| Error::Parse(format!("vertex {i}: missing {name}")))?
                .parse()
                .map_err(|e| Error::Parse(format!("vertex {i}: {e}")))
        };
        vertices.push([coord("x")?, coord("y")?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for i in 0..nt {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing triangle line {i}")))?;
        let mut toks = line.split_whitespace();
        let mut idx = || -> Result<usize> {
            toks.next()
                .ok_or_else(|| Error::Parse(format!("triangle {i}: missing index")))?
                .parse()
                .map_err(|e| Error::Parse(format!("triangle {i}: {e}")))
        };
        triangles.push([idx()?, idx()?, idx()?]);
    }
    let (mut xmin, mut ymin, mut xmax, mut ymax) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in &vertices {
        xmin = xmin.min(v[0]);
        ymin = ymin.min(v[1]);
        xmax = xmax.max(v[0]);
        ymax = ymax.max(v[1]);
    }
    let mesh = Mesh {
        vertices,
        triangles,
        domain_bbox: Rect::new(xmin, ymin, xmax, ymax)?,
    };
    let faces = build_face_table(&mesh)?;
    let mut by_pair: HashMap<(usize, usize), usize> = HashMap::new();
    for &f in &faces.boundary {
        let face = &faces.faces[f];
        by_pair.insert((face.a.min(face.b), face.a.max(face.b)), f);
    }
    if nbf != faces.n_boundary() {
        return Err(Error::Parse(format!(
            "file declares {nbf} boundary faces, mesh has {}",
            faces.n_boundary()
        )));
    }
    let mut tags = vec![FaceTag::Interior; faces.n_faces()];
    let mut seen = vec![false; faces.n_faces()];
    for i in 0..nbf {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing boundary line {i}")))?;
        let mut toks = line.split_whitespace();
        let mut idx = || -> Result<usize> {
            toks.next()
                .ok_or_else(|| Error::Parse(format!("boundary {i}: missing index")))?
                .parse()
                .map_err(|e| Error::Parse(format!("boundary {i}: {e}")))
        };
        let a = idx()?;
        let b = idx()?;
        let tag = toks
            .next()
            .ok_or_else(|| Error::Parse(format!("boundary {i}: missing tag")))?;
        let f = *by_pair
            .get(&(a.min(b), a.max(b)))
            .ok_or_else(|| Error::Parse(format!("({a}, {b}) is not a boundary face")))?;
        if seen[f] {
            return Err(Error::Parse(format!("boundary face ({a}, {b}) tagged twice")));
        }
        seen[f] = true;
        tags[f] = match tag {
            "S" => FaceTag::Sigma,
            "D" => FaceTag::DirichletOnly,
            "N" => FaceTag::Untagged,
            other => return Err(Error::Parse(format!("unknown tag {other:?}"))),
        };
    }
    Ok((mesh, faces, BoundaryTags { tags }))
}

pub fn write_ascii(
    mesh: &Mesh,
    faces: &FaceTable,
    tags: &BoundaryTags,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, to_ascii_string(mesh, faces, tags))?;
    Ok(())
}

pub fn read_ascii(path: &Path) -> Result<(Mesh, FaceTable, BoundaryTags)> {
    let text = std::fs::read_to_string(path)?;
    from_ascii_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi_rect() -> Rect {
        Rect::new(0.0, 0.0, std::f64::consts::PI, 1.0).unwrap()
    }

    #[test]
    fn single_cell_counts() {
        let mesh = generate_union_jack(1, 1, Rect::unit()).unwrap();
        assert_eq!(mesh.n_triangles(), 4);
        assert_eq!(mesh.n_vertices(), 5);
        let faces = build_face_table(&mesh).unwrap();
        assert_eq!(faces.n_faces(), 8);
        assert_eq!(faces.n_boundary(), 4);
    }

    #[test]
    fn two_by_one_counts() {
        let mesh = generate_union_jack(2, 1, Rect::unit()).unwrap();
        assert_eq!(mesh.n_triangles(), 8);
        assert_eq!(mesh.n_vertices(), 8);
        let faces = build_face_table(&mesh).unwrap();
        // Exhaustive pair scan over triangles as an independent count.
        let mut shared = 0;
        for e in 0..8 {
            for f in (e + 1)..8 {
                let te = mesh.triangles[e];
                let tf = mesh.triangles[f];
                let common = te.iter().filter(|v| tf.contains(v)).count();
                assert!(common <= 2, "triangles {e}, {f} overlap too much");
                if common == 2 {
                    shared += 1;
                }
            }
        }
        let total = 3 * 8 - shared;
        assert_eq!(faces.n_faces(), total);
        assert_eq!(faces.n_faces(), 15);
        assert_eq!(faces.n_boundary(), 6);
        // Euler-style count: (3 nt + boundary) / 2.
        assert_eq!(faces.n_faces(), (3 * 8 + faces.n_boundary()) / 2);
    }

    #[test]
    fn reference_resolution_element_count() {
        let mesh = generate_union_jack(240, 80, pi_rect()).unwrap();
        assert_eq!(mesh.n_triangles(), 76800);
        assert_eq!(mesh.n_vertices(), 241 * 81 + 240 * 80);
    }

    #[test]
    fn boundary_face_count_formula() {
        for (nx, ny) in [(1, 1), (3, 2), (5, 7), (12, 4)] {
            let mesh = generate_union_jack(nx, ny, pi_rect()).unwrap();
            let faces = build_face_table(&mesh).unwrap();
            assert_eq!(faces.n_boundary(), 2 * (nx + ny));
            assert_eq!(
                faces.n_faces(),
                (3 * mesh.n_triangles() + faces.n_boundary()) / 2
            );
        }
    }

    #[test]
    fn normals_point_away_from_left_element() {
        let mesh = generate_union_jack(3, 2, Rect::unit()).unwrap();
        let faces = build_face_table(&mesh).unwrap();
        for face in &faces.faces {
            assert!((face.normal[0].hypot(face.normal[1]) - 1.0).abs() < 1e-14);
            let c = mesh.centroid(face.left);
            let dot = (face.midpoint[0] - c[0]) * face.normal[0]
                + (face.midpoint[1] - c[1]) * face.normal[1];
            assert!(dot > 0.0, "normal does not leave the left element");
            if let Some(r) = face.right {
                assert!(face.left < r, "left must be the lower element index");
                let cr = mesh.centroid(r);
                let dot_r = (face.midpoint[0] - cr[0]) * face.normal[0]
                    + (face.midpoint[1] - cr[1]) * face.normal[1];
                assert!(dot_r < 0.0, "normal must enter the right element");
            }
        }
    }

    #[test]
    fn element_face_connectivity_is_involutive() {
        let mesh = generate_union_jack(4, 3, Rect::unit()).unwrap();
        let faces = build_face_table(&mesh).unwrap();
        for e in 0..mesh.n_triangles() {
            for loc in 0..3 {
                let f = faces.elem_faces[e][loc];
                let face = &faces.faces[f];
                let sign = faces.elem_face_sign[e][loc];
                if sign > 0.0 {
                    assert_eq!(face.left, e);
                } else {
                    assert_eq!(face.right, Some(e));
                }
                // The face opposite local vertex i touches the other two.
                let t = mesh.triangles[e];
                let (va, vb) = (face.a, face.b);
                assert!(!([va, vb].contains(&t[loc])));
                assert!(t.contains(&va) && t.contains(&vb));
            }
        }
    }

    #[test]
    fn tags_for_partial_cauchy_data() {
        let mesh = generate_union_jack(2, 1, pi_rect()).unwrap();
        let faces = build_face_table(&mesh).unwrap();
        let tol = 1e-12 * mesh.domain_bbox.diameter();
        let pi = std::f64::consts::PI;
        let tags = tag_boundary(
            &mesh,
            &faces,
            |_, y| y.abs() <= tol,
            |x, y| y.abs() <= tol || x.abs() <= tol || (x - pi).abs() <= tol,
        )
        .unwrap();
        let mut n_sigma = 0;
        let mut n_dir = 0;
        let mut n_untagged = 0;
        for &f in &faces.boundary {
            let m = faces.faces[f].midpoint;
            match tags.tags[f] {
                FaceTag::Sigma => {
                    n_sigma += 1;
                    assert!(m[1].abs() <= tol);
                }
                FaceTag::DirichletOnly => {
                    n_dir += 1;
                    assert!(m[0].abs() <= tol || (m[0] - pi).abs() <= tol);
                }
                FaceTag::Untagged => {
                    n_untagged += 1;
                    assert!((m[1] - 1.0).abs() <= tol);
                }
                FaceTag::Interior => panic!("boundary face tagged interior"),
            }
        }
        assert_eq!((n_sigma, n_dir, n_untagged), (2, 2, 2));
    }

    #[test]
    fn sigma_without_dirichlet_is_rejected() {
        let mesh = generate_union_jack(1, 1, Rect::unit()).unwrap();
        let faces = build_face_table(&mesh).unwrap();
        let err = tag_boundary(&mesh, &faces, |_, _| true, |_, y| y < 0.5).unwrap_err();
        assert!(matches!(err, Error::TagConflict { .. }));
    }

    #[test]
    fn ascii_round_trip() {
        let mesh = generate_union_jack(3, 2, pi_rect()).unwrap();
        let faces = build_face_table(&mesh).unwrap();
        let tol = 1e-12 * mesh.domain_bbox.diameter();
        let tags = tag_boundary(&mesh, &faces, |_, y| y.abs() <= tol, |_, y| y.abs() <= tol)
            .unwrap();
        let text = to_ascii_string(&mesh, &faces, &tags);
        let (mesh2, faces2, tags2) = from_ascii_str(&text).unwrap();
        assert_eq!(mesh.vertices, mesh2.vertices);
        assert_eq!(mesh.triangles, mesh2.triangles);
        assert_eq!(faces.n_faces(), faces2.n_faces());
        assert_eq!(tags.tags.len(), tags2.tags.len());
        for f in 0..faces.n_faces() {
            assert_eq!(tags.tags[f], tags2.tags[f]);
        }
    }

    #[test]
    fn flipped_triangle_is_rejected() {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            triangles: vec![[0, 2, 1]],
            domain_bbox: Rect::unit(),
        };
        assert!(matches!(mesh.validate(), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn overshared_edge_is_rejected() {
        let mesh = Mesh {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.5]],
            triangles: vec![[0, 1, 2], [1, 3, 2], [0, 2, 4], [0, 1, 2]],
            domain_bbox: Rect::unit(),
        };
        assert!(matches!(mesh.validate(), Err(Error::Nonconforming(_))));
    }

    #[test]
    fn quasi_uniformity_of_structured_mesh() {
        // Square cells: all four triangles of a cell are congruent.
        let mesh = generate_union_jack(8, 4, Rect::new(0.0, 0.0, 2.0, 1.0).unwrap()).unwrap();
        assert!((mesh.quasi_uniformity() - 1.0).abs() < 1e-12);
        // Anisotropic cells (dx = pi/8 > dy = 1/4): longest edge dx,
        // shortest triangle diameter dy, ratio pi/2.
        let mesh = generate_union_jack(8, 4, pi_rect()).unwrap();
        let ratio = mesh.quasi_uniformity();
        assert!((ratio - std::f64::consts::PI / 2.0).abs() < 1e-12, "ratio = {ratio}");
    }
}
