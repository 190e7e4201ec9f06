use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;

use super::{
    regular_bounding_simplex, squared_distance, Barycentric, Domain, GeometryError, MembershipMode,
    TriangulationConfig, CONTAINMENT_TOL, INSPHERE_TOL, MAX_DIM,
};

pub type SimplexId = usize;

/// Smallest barycentric weight of a new vertex with respect to the facet it
/// is joined to. Anything flatter is absorbed into the insertion cavity.
const VISIBILITY_TOL: f64 = 1e-9;

/// Relative volume below which a simplex counts as flat.
const FLAT_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct Simplex {
    vertices: Vec<usize>,
    /// `neighbors[i]` shares the facet opposite `vertices[i]`.
    neighbors: Vec<Option<SimplexId>>,
    /// Row-major inverse of the edge matrix whose columns are `v_i - o`,
    /// where the origin `o` is the vertex with the highest id. That is a rule
    /// site whenever the simplex has one, which keeps the far bounding
    /// vertices out of the subtraction.
    inverse: Vec<f64>,
    origin_slot: usize,
    center: Vec<f64>,
    radius_sq: f64,
}

impl Simplex {
    fn new(vertices: Vec<usize>, coords: &[Vec<f64>]) -> Result<Self, GeometryError> {
        let d = vertices.len() - 1;
        let origin_slot = (0..=d).max_by_key(|&i| vertices[i]).unwrap_or(0);
        let origin = &coords[vertices[origin_slot]];
        let edges = DMatrix::from_fn(d, d, |row, col| {
            coords[vertices[other_slot(origin_slot, col)]][row] - origin[row]
        });

        let scale: f64 = (0..d).map(|c| edges.column(c).norm()).product();
        let lu = edges.clone().lu();
        let det = lu.determinant();
        if !(det.abs() > FLAT_TOL * scale) {
            return Err(GeometryError::Degenerate(format!(
                "flat simplex {vertices:?} (relative volume {:e})",
                det.abs() / scale
            )));
        }
        let inv = lu
            .try_inverse()
            .ok_or_else(|| GeometryError::Degenerate(format!("singular simplex {vertices:?}")))?;

        // Circumcentre c = o + x with 2 (v_i - o) . x = |v_i - o|^2.
        let rhs: Vec<f64> = (0..d).map(|c| edges.column(c).norm_squared()).collect();
        let offset: Vec<f64> = (0..d)
            .map(|row| 0.5 * (0..d).map(|k| inv[(k, row)] * rhs[k]).sum::<f64>())
            .collect();
        let radius_sq = offset.iter().map(|x| x * x).sum();
        let center = offset.iter().zip(origin).map(|(x, o)| x + o).collect();

        let mut inverse = Vec::with_capacity(d * d);
        for row in 0..d {
            for col in 0..d {
                inverse.push(inv[(row, col)]);
            }
        }
        Ok(Simplex {
            neighbors: vec![None; d + 1],
            vertices,
            inverse,
            origin_slot,
            center,
            radius_sq,
        })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn neighbors(&self) -> &[Option<SimplexId>] {
        &self.neighbors
    }

    pub fn circumcenter(&self) -> &[f64] {
        &self.center
    }

    pub fn circumradius_sq(&self) -> f64 {
        self.radius_sq
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    fn weights_into(&self, coords: &[Vec<f64>], q: &[f64], out: &mut [f64]) {
        let d = self.vertices.len() - 1;
        let origin = &coords[self.vertices[self.origin_slot]];
        let mut diff = [0.0; MAX_DIM];
        for j in 0..d {
            diff[j] = q[j] - origin[j];
        }
        let mut rest = 0.0;
        for i in 0..d {
            let row = &self.inverse[i * d..(i + 1) * d];
            let w: f64 = row.iter().zip(&diff[..d]).map(|(a, b)| a * b).sum();
            out[other_slot(self.origin_slot, i)] = w;
            rest += w;
        }
        out[self.origin_slot] = 1.0 - rest;
    }

    fn strictly_in_sphere(&self, p: &[f64]) -> bool {
        squared_distance(p, &self.center) < self.radius_sq * (1.0 - INSPHERE_TOL)
    }
}

/// Delaunay triangulation of rule sites plus the vertices of a bounding
/// simplex. Vertex ids `0..=d` are the bounding vertices; site `k` is vertex
/// `d + 1 + k`.
#[derive(Debug, Clone)]
pub struct Triangulation {
    dim: usize,
    domain: Domain,
    config: TriangulationConfig,
    vertices: Vec<Vec<f64>>,
    simplices: Vec<Simplex>,
    /// One incident simplex per vertex.
    vertex_simplex: Vec<SimplexId>,
}

impl Triangulation {
    pub fn build(
        sites: &[Vec<f64>],
        domain: &Domain,
        config: TriangulationConfig,
    ) -> Result<Self, GeometryError> {
        domain.validate()?;
        let d = domain.dim();
        if sites.is_empty() {
            return Err(GeometryError::NoSites);
        }
        if !(config.bounding_scale >= 1.0) || !config.bounding_scale.is_finite() {
            return Err(GeometryError::InvalidDomain(format!(
                "bounding scale {} must be a finite value >= 1",
                config.bounding_scale
            )));
        }
        for (index, site) in sites.iter().enumerate() {
            if site.len() != d {
                return Err(GeometryError::DimensionMismatch {
                    expected: d,
                    got: site.len(),
                });
            }
            if site.iter().any(|x| !x.is_finite()) {
                return Err(GeometryError::NonFinite { index });
            }
            if !domain.contains(site) {
                return Err(GeometryError::OutsideDomain { index });
            }
        }
        for i in 0..sites.len() {
            for j in 0..i {
                if domain.too_close(&sites[i], &sites[j]) {
                    return Err(GeometryError::DuplicateSite {
                        first: j,
                        second: i,
                    });
                }
            }
        }

        let mut vertices = regular_bounding_simplex(domain, config.bounding_scale);
        vertices.extend(sites.iter().cloned());

        let mut builder = Builder {
            dim: d,
            coords: &vertices,
            simplices: vec![Simplex::new((0..=d).collect(), &vertices)?],
            alive: vec![true],
            last: 0,
        };
        for v in d + 1..vertices.len() {
            builder.insert(v)?;
        }
        let simplices = builder.finish()?;

        let mut vertex_simplex = vec![usize::MAX; vertices.len()];
        for (id, s) in simplices.iter().enumerate() {
            for &v in &s.vertices {
                if vertex_simplex[v] == usize::MAX {
                    vertex_simplex[v] = id;
                }
            }
        }
        if let Some(lost) = vertex_simplex.iter().position(|&s| s == usize::MAX) {
            return Err(GeometryError::Degenerate(format!(
                "vertex {lost} vanished from the triangulation"
            )));
        }

        Ok(Triangulation {
            dim: d,
            domain: domain.clone(),
            config,
            vertices,
            simplices,
            vertex_simplex,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn config(&self) -> &TriangulationConfig {
        &self.config
    }

    /// All vertex coordinates, bounding vertices first.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn simplex(&self, id: SimplexId) -> Result<&Simplex, GeometryError> {
        self.simplices
            .get(id)
            .ok_or(GeometryError::InvalidSimplex(id))
    }

    pub fn bounding_vertex_count(&self) -> usize {
        self.dim + 1
    }

    pub fn site_count(&self) -> usize {
        self.vertices.len() - self.dim - 1
    }

    pub fn site(&self, k: usize) -> &[f64] {
        &self.vertices[self.dim + 1 + k]
    }

    pub fn site_vertex(&self, k: usize) -> usize {
        self.dim + 1 + k
    }

    /// Site index of a vertex, `None` for bounding vertices.
    pub fn vertex_site(&self, v: usize) -> Option<usize> {
        v.checked_sub(self.dim + 1)
    }

    pub fn barycentric(&self, id: SimplexId, q: &[f64]) -> Result<Barycentric, GeometryError> {
        let s = self.simplex(id)?;
        self.check_query(q)?;
        let mut weights = vec![0.0; self.dim + 1];
        s.weights_into(&self.vertices, q, &mut weights);
        Ok(Barycentric {
            simplex: id,
            weights,
        })
    }

    pub fn locate(&self, q: &[f64]) -> Result<SimplexId, GeometryError> {
        self.locate_from(q, 0)
    }

    /// Point location by a visibility walk starting at `hint`. The answer
    /// does not depend on the hint: ties on shared faces resolve to the
    /// lowest simplex id.
    pub fn locate_from(&self, q: &[f64], hint: SimplexId) -> Result<SimplexId, GeometryError> {
        self.check_query(q)?;
        let mut w = [0.0; MAX_DIM + 1];
        let d = self.dim;
        let mut current = if hint < self.simplices.len() { hint } else { 0 };
        let mut steps = 0;
        let found = loop {
            let s = &self.simplices[current];
            s.weights_into(&self.vertices, q, &mut w);
            let (arg, min) = argmin(&w[..=d]);
            if min >= -CONTAINMENT_TOL {
                break Some((current, min));
            }
            steps += 1;
            if steps > self.simplices.len() + 8 {
                break None;
            }
            match s.neighbors[arg] {
                Some(next) => current = next,
                None => return Err(GeometryError::OutsideBoundingSimplex),
            }
        };
        let (start, min) = match found {
            Some(hit) => hit,
            None => self.scan(q).ok_or(GeometryError::OutsideBoundingSimplex)?,
        };
        if min > CONTAINMENT_TOL {
            return Ok(start);
        }
        Ok(self.lowest_containing(q, start))
    }

    /// Exhaustive containment scan; lowest id wins.
    fn scan(&self, q: &[f64]) -> Option<(SimplexId, f64)> {
        let mut w = [0.0; MAX_DIM + 1];
        self.simplices.iter().enumerate().find_map(|(id, s)| {
            s.weights_into(&self.vertices, q, &mut w);
            let (_, min) = argmin(&w[..=self.dim]);
            (min >= -CONTAINMENT_TOL).then_some((id, min))
        })
    }

    /// Among simplices containing `q` within tolerance and connected to
    /// `start` through facets that contain `q`, the one with lowest id.
    fn lowest_containing(&self, q: &[f64], start: SimplexId) -> SimplexId {
        let mut w = [0.0; MAX_DIM + 1];
        let mut best = start;
        let mut seen = vec![start];
        let mut stack = vec![start];
        while let Some(id) = stack.pop() {
            let s = &self.simplices[id];
            s.weights_into(&self.vertices, q, &mut w);
            for (i, n) in s.neighbors.iter().enumerate() {
                let Some(n) = *n else { continue };
                if w[i] > CONTAINMENT_TOL || seen.contains(&n) {
                    continue;
                }
                seen.push(n);
                let mut wn = [0.0; MAX_DIM + 1];
                self.simplices[n].weights_into(&self.vertices, q, &mut wn);
                if argmin(&wn[..=self.dim]).1 >= -CONTAINMENT_TOL {
                    best = best.min(n);
                    stack.push(n);
                }
            }
        }
        best
    }

    /// Membership of `q` in the fuzzy set of site `k`.
    pub fn membership(&self, k: usize, q: &[f64]) -> Result<f64, GeometryError> {
        if k >= self.site_count() {
            return Err(GeometryError::InvalidSite(k));
        }
        let mut out = vec![0.0; self.site_count()];
        self.membership_into(q, 0, &mut out)?;
        Ok(out[k])
    }

    /// Memberships of `q` in every site's fuzzy set.
    pub fn membership_vector(&self, q: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let mut out = vec![0.0; self.site_count()];
        self.membership_into(q, 0, &mut out)?;
        Ok(out)
    }

    /// Writes memberships into `out` (one entry per site) with a single point
    /// location and returns the containing simplex, usable as the next hint.
    pub fn membership_into(
        &self,
        q: &[f64],
        hint: SimplexId,
        out: &mut [f64],
    ) -> Result<SimplexId, GeometryError> {
        if out.len() != self.site_count() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.site_count(),
                got: out.len(),
            });
        }
        let id = self.locate_from(q, hint)?;
        let s = &self.simplices[id];
        let mut w = [0.0; MAX_DIM + 1];
        s.weights_into(&self.vertices, q, &mut w);
        out.fill(0.0);
        match self.config.membership {
            MembershipMode::ApplicationArea => {
                // a query within tolerance of a facet can carry weights a hair
                // below zero; clamp them and rescale so the weights still sum to 1
                let w = &mut w[..=self.dim];
                if w.iter().any(|&x| x < 0.0) {
                    w.iter_mut().for_each(|x| *x = x.max(0.0));
                    let total: f64 = w.iter().sum();
                    w.iter_mut().for_each(|x| *x /= total);
                }
                for (i, &v) in s.vertices.iter().enumerate() {
                    if let Some(k) = self.vertex_site(v) {
                        out[k] = w[i].clamp(0.0, 1.0);
                    }
                }
            }
            MembershipMode::VoronoiCell => {
                let nearest = self.nearest_site(q);
                let v = self.site_vertex(nearest);
                if let Some(i) = s.vertices.iter().position(|&x| x == v) {
                    out[nearest] = w[i].clamp(0.0, 1.0);
                }
            }
        }
        Ok(id)
    }

    /// Index of the site closest to `q`; ties go to the lowest index.
    pub fn nearest_site(&self, q: &[f64]) -> usize {
        (0..self.site_count())
            .map(|k| (k, squared_distance(self.site(k), q)))
            .fold(
                (0, f64::INFINITY),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            )
            .0
    }

    pub fn incident_simplices(&self, v: usize) -> Vec<SimplexId> {
        if v >= self.vertices.len() {
            return Vec::new();
        }
        let mut found = vec![self.vertex_simplex[v]];
        let mut stack = found.clone();
        while let Some(id) = stack.pop() {
            let s = &self.simplices[id];
            for (i, n) in s.neighbors.iter().enumerate() {
                // crossing the facet opposite v would leave the star of v
                if s.vertices[i] == v {
                    continue;
                }
                if let Some(n) = *n {
                    if !found.contains(&n) {
                        found.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        found.sort_unstable();
        found
    }

    /// Sites that share a simplex with site `k`, i.e. whose fuzzy sets
    /// overlap with the application area of `k`.
    pub fn site_neighbors(&self, k: usize) -> Result<Vec<usize>, GeometryError> {
        if k >= self.site_count() {
            return Err(GeometryError::InvalidSite(k));
        }
        let v = self.site_vertex(k);
        let mut out: Vec<usize> = self
            .incident_simplices(v)
            .into_iter()
            .flat_map(|id| self.simplices[id].vertices.clone())
            .filter(|&u| u != v)
            .filter_map(|u| self.vertex_site(u))
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Debug dump of the vertex table.
    pub fn write_vertices_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string(), "kind".to_string()];
        header.extend((0..self.dim).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for (id, v) in self.vertices.iter().enumerate() {
            let kind = if id <= self.dim { "bounding" } else { "site" };
            let mut rec = vec![id.to_string(), kind.to_string()];
            rec.extend(v.iter().map(|x| format!("{x:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Debug dump of the simplex table; missing neighbours are empty fields.
    pub fn write_simplices_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend((0..=self.dim).map(|j| format!("v{j}")));
        header.extend((0..=self.dim).map(|j| format!("n{j}")));
        w.write_record(&header)?;
        for (id, s) in self.simplices.iter().enumerate() {
            let mut rec = vec![id.to_string()];
            rec.extend(s.vertices.iter().map(|v| v.to_string()));
            rec.extend(
                s.neighbors
                    .iter()
                    .map(|n| n.map(|n| n.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    fn check_query(&self, q: &[f64]) -> Result<(), GeometryError> {
        if q.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: q.len(),
            });
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::NonFiniteQuery);
        }
        Ok(())
    }
}

/// Slot of the `i`-th non-origin vertex.
#[inline]
fn other_slot(origin_slot: usize, i: usize) -> usize {
    if i < origin_slot {
        i
    } else {
        i + 1
    }
}

fn argmin(w: &[f64]) -> (usize, f64) {
    let mut arg = 0;
    let mut min = w[0];
    for (i, &x) in w.iter().enumerate().skip(1) {
        if x < min {
            arg = i;
            min = x;
        }
    }
    (arg, min)
}

/// Incremental Bowyer-Watson state.
struct Builder<'a> {
    dim: usize,
    coords: &'a [Vec<f64>],
    simplices: Vec<Simplex>,
    alive: Vec<bool>,
    last: SimplexId,
}

impl Builder<'_> {
    fn locate(&self, p: &[f64]) -> Result<SimplexId, GeometryError> {
        let mut w = [0.0; MAX_DIM + 1];
        let d = self.dim;
        let mut current = self.last;
        for _ in 0..self.simplices.len() + 8 {
            let s = &self.simplices[current];
            s.weights_into(self.coords, p, &mut w);
            let (arg, min) = argmin(&w[..=d]);
            if min >= -CONTAINMENT_TOL {
                return Ok(current);
            }
            current = s.neighbors[arg].ok_or(GeometryError::OutsideBoundingSimplex)?;
        }
        // the walk cycled; fall back to the containing simplex with the
        // largest minimum weight
        let mut best = None;
        let mut best_min = f64::NEG_INFINITY;
        for (id, s) in self.simplices.iter().enumerate() {
            if !self.alive[id] {
                continue;
            }
            s.weights_into(self.coords, p, &mut w);
            let (_, min) = argmin(&w[..=d]);
            if min > best_min {
                best_min = min;
                best = Some(id);
            }
        }
        match best {
            Some(id) if best_min >= -CONTAINMENT_TOL => Ok(id),
            _ => Err(GeometryError::OutsideBoundingSimplex),
        }
    }

    fn insert(&mut self, v: usize) -> Result<(), GeometryError> {
        let d = self.dim;
        let p = &self.coords[v];
        let start = self.locate(p)?;

        let mut in_cavity = vec![false; self.simplices.len()];
        let mut cavity = vec![start];
        in_cavity[start] = true;
        let mut stack = vec![start];
        while let Some(id) = stack.pop() {
            for n in self.simplices[id].neighbors.iter().flatten() {
                if !in_cavity[*n] && self.simplices[*n].strictly_in_sphere(p) {
                    in_cavity[*n] = true;
                    cavity.push(*n);
                    stack.push(*n);
                }
            }
        }

        // Every boundary facet must see p with positive volume; otherwise
        // grow the cavity across that facet.
        let mut w = [0.0; MAX_DIM + 1];
        let boundary = loop {
            let mut grown = false;
            let mut boundary = Vec::new();
            'scan: for &id in &cavity {
                let s = &self.simplices[id];
                s.weights_into(self.coords, p, &mut w);
                for (i, n) in s.neighbors.iter().enumerate() {
                    if n.is_some_and(|n| in_cavity[n]) {
                        continue;
                    }
                    if w[i] > VISIBILITY_TOL {
                        boundary.push((id, i));
                        continue;
                    }
                    match *n {
                        Some(n) => {
                            in_cavity[n] = true;
                            cavity.push(n);
                            grown = true;
                            break 'scan;
                        }
                        None => {
                            return Err(GeometryError::Degenerate(format!(
                                "vertex {v} lies on the bounding simplex"
                            )))
                        }
                    }
                }
            }
            if !grown {
                break boundary;
            }
        };

        let first_new = self.simplices.len();
        let mut ridges: HashMap<Vec<usize>, (SimplexId, usize)> = HashMap::new();
        for &(old, i) in &boundary {
            let mut verts = self.simplices[old].vertices.clone();
            verts[i] = v;
            let mut simplex = Simplex::new(verts, self.coords)?;
            let outer = self.simplices[old].neighbors[i];
            simplex.neighbors[i] = outer;
            let id = self.simplices.len();
            if let Some(o) = outer {
                let slot = self.simplices[o]
                    .neighbors
                    .iter()
                    .position(|&n| n == Some(old))
                    .ok_or_else(|| GeometryError::Degenerate("broken adjacency".into()))?;
                self.simplices[o].neighbors[slot] = Some(id);
            }
            for j in 0..=d {
                if j == i {
                    continue;
                }
                let mut key: Vec<usize> = simplex
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i && k != j)
                    .map(|(_, &x)| x)
                    .collect();
                key.sort_unstable();
                if let Some((other, slot)) = ridges.remove(&key) {
                    simplex.neighbors[j] = Some(other);
                    self.simplices[other].neighbors[slot] = Some(id);
                } else {
                    ridges.insert(key, (id, j));
                }
            }
            self.simplices.push(simplex);
            self.alive.push(true);
        }
        if !ridges.is_empty() {
            return Err(GeometryError::Degenerate(format!(
                "insertion cavity of vertex {v} is not a closed ball"
            )));
        }
        for &id in &cavity {
            self.alive[id] = false;
        }
        self.last = first_new;
        Ok(())
    }

    /// Drops dead simplices and puts every simplex's vertices in ascending
    /// order, so that barycentric weights only depend on the vertex set.
    fn finish(self) -> Result<Vec<Simplex>, GeometryError> {
        let mut remap = vec![usize::MAX; self.simplices.len()];
        let mut next = 0;
        for (id, alive) in self.alive.iter().enumerate() {
            if *alive {
                remap[id] = next;
                next += 1;
            }
        }
        let mut out = Vec::with_capacity(next);
        for (id, s) in self.simplices.into_iter().enumerate() {
            if !self.alive[id] {
                continue;
            }
            let mut order: Vec<usize> = (0..s.vertices.len()).collect();
            order.sort_by_key(|&i| s.vertices[i]);
            let vertices: Vec<usize> = order.iter().map(|&i| s.vertices[i]).collect();
            let mut canonical = Simplex::new(vertices, self.coords)?;
            canonical.neighbors = order
                .iter()
                .map(|&i| s.neighbors[i].map(|n| remap[n]))
                .collect();
            out.push(canonical);
        }
        Ok(out)
    }
}
