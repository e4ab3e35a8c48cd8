//! The join executor: MBR filter, space partitioning, approximation-based
//! intermediate filter and exact refinement, plus selection queries.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use crate::april::{
    build_april, intersect_filter, linestring_filter, linestring_filter_source, mixed_order_filter,
    within_filter, AprilApprox, Backend, CompressedApril, JoinOrder, Verdict,
};
use crate::codec::CompressedCells;
use crate::error::{Error, Result};
use crate::geom::{
    polygon_linestring_intersect, polygon_within, polygons_intersect, Linestring, Mbr,
    MbrPredicate, SimplePolygon,
};
use crate::grid::{grid_for_extent, CellId, GridConfig};
use crate::par::{self, Execution};
use crate::raster::rasterize_linestring;
use crate::ri::{build_ri, ri_join, RiApprox, Side};

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Polygon(SimplePolygon),
    Linestring(Linestring),
}

impl Geometry {
    pub fn mbr(&self) -> &Mbr {
        match self {
            Geometry::Polygon(p) => p.mbr(),
            Geometry::Linestring(l) => l.mbr(),
        }
    }

    pub fn as_polygon(&self) -> Option<&SimplePolygon> {
        match self {
            Geometry::Polygon(p) => Some(p),
            Geometry::Linestring(_) => None,
        }
    }

    pub fn as_linestring(&self) -> Option<&Linestring> {
        match self {
            Geometry::Linestring(l) => Some(l),
            Geometry::Polygon(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Object {
    pub id: u32,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    objects: Vec<Object>,
    mbr: Option<Mbr>,
}

impl Dataset {
    /// Rejects duplicate ids.
    pub fn new(objects: Vec<Object>) -> Result<Self> {
        let mut ids: Vec<u32> = objects.iter().map(|o| o.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate object id {}", w[0])));
        }
        let mbr = objects.iter().map(|o| *o.geometry.mbr()).reduce(|a, b| a.union(&b));
        Ok(Dataset { objects, mbr })
    }

    /// Polygons numbered from 0.
    pub fn from_polygons(polys: impl IntoIterator<Item = SimplePolygon>) -> Self {
        let objects = polys
            .into_iter()
            .enumerate()
            .map(|(i, p)| Object { id: i as u32, geometry: Geometry::Polygon(p) })
            .collect();
        Dataset::new(objects).expect("sequential ids are unique")
    }

    pub fn from_linestrings(lines: impl IntoIterator<Item = Linestring>) -> Self {
        let objects = lines
            .into_iter()
            .enumerate()
            .map(|(i, l)| Object { id: i as u32, geometry: Geometry::Linestring(l) })
            .collect();
        Dataset::new(objects).expect("sequential ids are unique")
    }

    pub fn objects(&self) -> &[Object] {
        &self.objects
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Union of the object MBRs; `None` when empty.
    pub fn mbr(&self) -> Option<&Mbr> {
        self.mbr.as_ref()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Predicate {
    #[default]
    Intersects,
    /// Left object lies within right object.
    Within,
    /// Left polygons against right linestrings.
    PolyLine,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum FilterKind {
    None,
    Ri,
    #[default]
    April,
    AprilCompressed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JoinConfig {
    pub order: u8,
    /// Order of the right-hand approximations when it differs from `order`.
    pub right_order: Option<u8>,
    pub backend: Backend,
    pub filter: FilterKind,
    /// Partitions per dimension.
    pub partitions: u32,
    pub join_order: JoinOrder,
    pub execution: Execution,
    /// Map extent to partition; defaults to the union of both datasets.
    pub extent: Option<Mbr>,
}

impl Default for JoinConfig {
    fn default() -> Self {
        JoinConfig {
            order: 16,
            right_order: None,
            backend: Backend::OneStep,
            filter: FilterKind::April,
            partitions: 1,
            join_order: JoinOrder::default(),
            execution: Execution::Parallel,
            extent: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JoinStats {
    pub candidates: u64,
    pub true_hits: u64,
    pub true_negatives: u64,
    pub indecisive: u64,
    pub refined_accepted: u64,
    pub results: u64,
    pub mbr_seconds: f64,
    pub build_seconds: f64,
    pub filter_seconds: f64,
    pub refine_seconds: f64,
}

impl JoinStats {
    fn pct(&self, n: u64) -> f64 {
        if self.candidates == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.candidates as f64
        }
    }

    pub fn true_hit_pct(&self) -> f64 {
        self.pct(self.true_hits)
    }

    pub fn true_negative_pct(&self) -> f64 {
        self.pct(self.true_negatives)
    }

    pub fn indecisive_pct(&self) -> f64 {
        self.pct(self.indecisive)
    }

    pub fn indecisive_fraction(&self) -> f64 {
        self.pct(self.indecisive) / 100.0
    }

    fn count(&mut self, v: Verdict) {
        match v {
            Verdict::TrueHit => self.true_hits += 1,
            Verdict::TrueNegative => self.true_negatives += 1,
            Verdict::Indecisive => self.indecisive += 1,
        }
    }
}

/// All pairs `(i, j)` with `r[i]` related to `s[j]`, sorted. Sort on `xmin`
/// and sweep; the y-extent is checked per x-overlapping pair.
pub fn mbr_join(r: &[Mbr], s: &[Mbr], predicate: MbrPredicate) -> Vec<(usize, usize)> {
    let mut ri: Vec<usize> = (0..r.len()).collect();
    let mut si: Vec<usize> = (0..s.len()).collect();
    ri.sort_by(|&a, &b| r[a].xmin.total_cmp(&r[b].xmin));
    si.sort_by(|&a, &b| s[a].xmin.total_cmp(&s[b].xmin));
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < ri.len() && j < si.len() {
        if r[ri[i]].xmin <= s[si[j]].xmin {
            let a = &r[ri[i]];
            for &k in si[j..].iter().take_while(|&&k| s[k].xmin <= a.xmax) {
                if a.ymin <= s[k].ymax && s[k].ymin <= a.ymax {
                    out.push((ri[i], k));
                }
            }
            i += 1;
        } else {
            let b = &s[si[j]];
            for &k in ri[i..].iter().take_while(|&&k| r[k].xmin <= b.xmax) {
                if b.ymin <= r[k].ymax && r[k].ymin <= b.ymax {
                    out.push((k, si[j]));
                }
            }
            j += 1;
        }
    }
    if predicate == MbrPredicate::Within {
        out.retain(|&(a, b)| r[a].within(&s[b]));
    }
    out.sort_unstable();
    out
}

/// Uniform `p x p` tiling of a map rectangle. Points on a shared tile edge
/// belong to the tile on their right/top; the last row and column are closed.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionScheme {
    map: Mbr,
    p: u32,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PartitionScheme {
    pub fn new(map: Mbr, p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("partitions per dimension must be at least 1".into()));
        }
        let bounds = |lo: f64, hi: f64| -> Vec<f64> {
            (0..=p)
                .map(|i| if i == p { hi } else { lo + (hi - lo) * i as f64 / p as f64 })
                .collect()
        };
        Ok(PartitionScheme { map, p, xs: bounds(map.xmin, map.xmax), ys: bounds(map.ymin, map.ymax) })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn map(&self) -> &Mbr {
        &self.map
    }

    pub fn tile_count(&self) -> usize {
        (self.p * self.p) as usize
    }

    pub fn tile_rect(&self, tile: usize) -> Mbr {
        let (c, r) = (tile % self.p as usize, tile / self.p as usize);
        Mbr { xmin: self.xs[c], ymin: self.ys[r], xmax: self.xs[c + 1], ymax: self.ys[r + 1] }
    }

    fn slot(bounds: &[f64], v: f64) -> usize {
        // Index of the half-open slot [b_i, b_{i+1}) holding v, clamped.
        let k = bounds.partition_point(|&b| b <= v);
        k.saturating_sub(1).min(bounds.len() - 2)
    }

    /// Tile owning a point.
    pub fn tile_of(&self, x: f64, y: f64) -> usize {
        Self::slot(&self.ys, y) * self.p as usize + Self::slot(&self.xs, x)
    }

    /// Every tile whose closed rectangle meets `mbr`.
    pub fn tiles_of(&self, mbr: &Mbr) -> Vec<usize> {
        fn range(bounds: &[f64], lo: f64, hi: f64) -> Vec<usize> {
            let a = PartitionScheme::slot(bounds, lo).saturating_sub(1);
            let b = PartitionScheme::slot(bounds, hi).saturating_add(1).min(bounds.len() - 2);
            (a..=b).filter(|&i| bounds[i] <= hi && lo <= bounds[i + 1]).collect()
        }
        let mut out = Vec::new();
        for r in range(&self.ys, mbr.ymin, mbr.ymax) {
            for c in range(&self.xs, mbr.xmin, mbr.xmax) {
                out.push(r * self.p as usize + c);
            }
        }
        out
    }
}

/// Per-tile membership of a group of datasets sharing one tiling.
#[derive(Debug, Clone, PartialEq)]
pub struct Partitioning {
    pub scheme: PartitionScheme,
    /// `members[d][tile]`: indices of dataset `d`'s objects assigned to `tile`.
    pub members: Vec<Vec<Vec<usize>>>,
    /// Raster extent of each tile: the MBR of every object assigned to it,
    /// over all datasets. `None` for empty tiles.
    pub extents: Vec<Option<Mbr>>,
}

fn default_map<'a>(mbrs: impl Iterator<Item = &'a Mbr>) -> Mbr {
    mbrs.copied()
        .reduce(|a, b| a.union(&b))
        .unwrap_or(Mbr { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 })
}

/// Tiles the map (by default the union of all datasets) into `p x p` tiles.
pub fn partition(datasets: &[&Dataset], p: u32, extent: Option<Mbr>) -> Result<Partitioning> {
    let map = extent.unwrap_or_else(|| default_map(datasets.iter().filter_map(|d| d.mbr())));
    let scheme = PartitionScheme::new(map, p)?;
    let mut extents: Vec<Option<Mbr>> = vec![None; scheme.tile_count()];
    let members = datasets
        .iter()
        .map(|d| {
            let mut tiles = vec![Vec::new(); scheme.tile_count()];
            for (i, o) in d.objects.iter().enumerate() {
                let m = o.geometry.mbr();
                for t in scheme.tiles_of(m) {
                    tiles[t].push(i);
                    extents[t] = Some(extents[t].map_or(*m, |e| e.union(m)));
                }
            }
            tiles
        })
        .collect();
    Ok(Partitioning { scheme, members, extents })
}

/// A cached approximation of one object.
#[derive(Debug, Clone, PartialEq)]
pub enum Approx {
    April(AprilApprox),
    AprilCompressed(CompressedApril),
    Ri(RiApprox),
    Cells(Vec<CellId>),
    CellsCompressed(CompressedCells),
}

fn check_config(cfg: &JoinConfig, predicate: Predicate) -> Result<()> {
    if predicate == Predicate::PolyLine && cfg.filter == FilterKind::Ri {
        return Err(Error::Config("the RI filter does not support polygon-linestring joins".into()));
    }
    if let Some(l) = cfg.right_order {
        if l != cfg.order {
            if predicate != Predicate::Intersects || cfg.filter != FilterKind::April {
                return Err(Error::Config(
                    "mixed orders need the uncompressed APRIL filter and the intersects predicate".into(),
                ));
            }
            GridConfig::new(Mbr { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 }, l)?;
        }
    }
    GridConfig::new(Mbr { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 }, cfg.order)?;
    Ok(())
}

fn check_kinds(r: &Dataset, s: &Dataset, predicate: Predicate) -> Result<()> {
    let all_polys = |d: &Dataset| d.objects.iter().all(|o| o.geometry.as_polygon().is_some());
    let all_lines = |d: &Dataset| d.objects.iter().all(|o| o.geometry.as_linestring().is_some());
    let ok = match predicate {
        Predicate::Intersects | Predicate::Within => all_polys(r) && all_polys(s),
        Predicate::PolyLine => all_polys(r) && all_lines(s),
    };
    if !ok {
        return Err(Error::Config(format!("geometry kinds do not fit the {predicate:?} predicate")));
    }
    Ok(())
}

fn build_approx(
    g: &Geometry,
    grid: &GridConfig,
    filter: FilterKind,
    backend: Backend,
    side: Side,
) -> Result<Approx> {
    Ok(match (g, filter) {
        (Geometry::Polygon(p), FilterKind::April) => Approx::April(build_april(p, grid, backend)?),
        (Geometry::Polygon(p), FilterKind::AprilCompressed) => {
            Approx::AprilCompressed(build_april(p, grid, backend)?.compress())
        }
        (Geometry::Polygon(p), FilterKind::Ri) => Approx::Ri(build_ri(p, grid, side)?),
        (Geometry::Linestring(l), FilterKind::April) => Approx::Cells(rasterize_linestring(l, grid)?),
        (Geometry::Linestring(l), FilterKind::AprilCompressed) => {
            Approx::CellsCompressed(CompressedCells::new(&rasterize_linestring(l, grid)?))
        }
        _ => return Err(Error::Config("no approximation for this geometry and filter".into())),
    })
}

/// Approximations of one dataset built ahead of a join, on the tiling of a
/// group of datasets, keyed by object id within each tile.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxStore {
    pub order: u8,
    pub filter: FilterKind,
    pub map: Mbr,
    pub partitions: u32,
    pub tiles: Vec<StoreTile>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StoreTile {
    pub extent: Option<Mbr>,
    pub approx: BTreeMap<u32, Approx>,
}

impl ApproxStore {
    pub fn get(&self, tile: usize, id: u32) -> Option<&Approx> {
        self.tiles.get(tile)?.approx.get(&id)
    }

    /// Number of stored approximations over all tiles.
    pub fn len(&self) -> usize {
        self.tiles.iter().map(|t| t.approx.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, cfg: &JoinConfig, order: u8) -> Result<()> {
        if self.partitions != cfg.partitions {
            return Err(Error::Config(format!(
                "approximations built with {} partitions, join uses {}",
                self.partitions, cfg.partitions
            )));
        }
        if self.order != order {
            return Err(Error::Config(format!(
                "approximations built at order {}, join expects {order}",
                self.order
            )));
        }
        if self.filter != cfg.filter {
            return Err(Error::Config(format!(
                "approximations are {:?}, join filter is {:?}",
                self.filter, cfg.filter
            )));
        }
        if self.tiles.len() != (self.partitions * self.partitions) as usize {
            return Err(Error::Config("tile table does not match the partition count".into()));
        }
        Ok(())
    }
}

/// Builds approximations for every dataset on one shared tiling, so the
/// results can later be joined pairwise without rebuilding.
pub fn build_stores(datasets: &[&Dataset], cfg: &JoinConfig, side: Side) -> Result<Vec<ApproxStore>> {
    if cfg.filter == FilterKind::None {
        return Err(Error::Config("no approximation to build for filter None".into()));
    }
    GridConfig::new(Mbr { xmin: 0.0, ymin: 0.0, xmax: 1.0, ymax: 1.0 }, cfg.order)?;
    let parts = partition(datasets, cfg.partitions, cfg.extent)?;
    let mut grids: Vec<Option<GridConfig>> = Vec::with_capacity(parts.extents.len());
    for e in &parts.extents {
        grids.push(e.as_ref().map(|e| grid_for_extent(e, cfg.order)).transpose()?);
    }
    let jobs: Vec<(usize, usize, usize)> = parts
        .members
        .iter()
        .enumerate()
        .flat_map(|(d, tiles)| {
            tiles.iter().enumerate().flat_map(move |(t, m)| m.iter().map(move |&i| (d, t, i)))
        })
        .collect();
    let built = par::map(cfg.execution, &jobs, |&(d, t, i)| {
        let grid = grids[t].as_ref().expect("tile has members");
        build_approx(&datasets[d].objects[i].geometry, grid, cfg.filter, cfg.backend, side)
    });
    let mut stores: Vec<ApproxStore> = datasets
        .iter()
        .map(|_| ApproxStore {
            order: cfg.order,
            filter: cfg.filter,
            map: *parts.scheme.map(),
            partitions: cfg.partitions,
            tiles: parts
                .extents
                .iter()
                .map(|&extent| StoreTile { extent, approx: BTreeMap::new() })
                .collect(),
        })
        .collect();
    for ((d, t, i), a) in jobs.into_iter().zip(built) {
        stores[d].tiles[t].approx.insert(datasets[d].objects[i].id, a?);
    }
    Ok(stores)
}

fn apply_filter(a: &Approx, b: &Approx, predicate: Predicate, order: JoinOrder) -> Result<Verdict> {
    use Approx::*;
    match (predicate, a, b) {
        (Predicate::Intersects, April(x), April(y)) if x.order != y.order => mixed_order_filter(x, y),
        (Predicate::Intersects, April(x), April(y)) => intersect_filter(x, y, order),
        (Predicate::Intersects, AprilCompressed(x), AprilCompressed(y)) => intersect_filter(x, y, order),
        (Predicate::Within, April(x), April(y)) => within_filter(x, y),
        (Predicate::Within, AprilCompressed(x), AprilCompressed(y)) => within_filter(x, y),
        (Predicate::Intersects, Ri(x), Ri(y)) => ri_join(x, y),
        // Only the disjointness verdict carries over to containment.
        (Predicate::Within, Ri(x), Ri(y)) => Ok(match ri_join(x, y)? {
            Verdict::TrueNegative => Verdict::TrueNegative,
            _ => Verdict::Indecisive,
        }),
        (Predicate::PolyLine, April(x), Cells(c)) => Ok(linestring_filter(x, c)),
        (Predicate::PolyLine, AprilCompressed(x), CellsCompressed(c)) => {
            Ok(linestring_filter_source(x, c))
        }
        _ => Err(Error::Config("incompatible approximations".into())),
    }
}

fn refine(a: &Geometry, b: &Geometry, predicate: Predicate) -> bool {
    match (predicate, a, b) {
        (Predicate::Intersects, Geometry::Polygon(x), Geometry::Polygon(y)) => polygons_intersect(x, y),
        (Predicate::Within, Geometry::Polygon(x), Geometry::Polygon(y)) => polygon_within(x, y),
        (Predicate::PolyLine, Geometry::Polygon(x), Geometry::Linestring(y)) => {
            polygon_linestring_intersect(x, y)
        }
        _ => false,
    }
}

/// Spatial join of `r` and `s`. Returns the matching `(r id, s id)` pairs,
/// sorted, and the filter statistics.
pub fn run_join(
    r: &Dataset,
    s: &Dataset,
    predicate: Predicate,
    cfg: &JoinConfig,
) -> Result<(Vec<(u32, u32)>, JoinStats)> {
    run_join_with(r, s, predicate, cfg, None, None)
}

/// Like [`run_join`], taking approximations from prebuilt stores where
/// present. The stores fix the tiling: their map and tile extents are used
/// instead of the ones derived from `r` and `s`.
pub fn run_join_with(
    r: &Dataset,
    s: &Dataset,
    predicate: Predicate,
    cfg: &JoinConfig,
    left: Option<&ApproxStore>,
    right: Option<&ApproxStore>,
) -> Result<(Vec<(u32, u32)>, JoinStats)> {
    check_config(cfg, predicate)?;
    check_kinds(r, s, predicate)?;
    if let Some(st) = left {
        st.check(cfg, cfg.order)?;
    }
    if let Some(st) = right {
        st.check(cfg, cfg.right_order.unwrap_or(cfg.order))?;
    }
    if let (Some(a), Some(b)) = (left, right) {
        if a.map != b.map {
            return Err(Error::Config("approximations were built on different tilings".into()));
        }
    }
    let mut stats = JoinStats::default();
    let exec = cfg.execution;

    let t = Instant::now();
    let extent = cfg.extent.or(left.or(right).map(|st| st.map));
    let parts = partition(&[r, s], cfg.partitions, extent)?;
    let mut tile_ext = parts.extents.clone();
    for (tile, ext) in tile_ext.iter_mut().enumerate() {
        let stored: Vec<Mbr> = [left, right].iter().flatten().filter_map(|st| st.tiles[tile].extent).collect();
        if stored.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Config("approximations were built on different tilings".into()));
        }
        if let Some(&e) = stored.first() {
            *ext = Some(e);
        }
    }
    let mbr_pred = match predicate {
        Predicate::Within => MbrPredicate::Within,
        _ => MbrPredicate::Intersects,
    };
    let tiles: Vec<usize> = (0..parts.scheme.tile_count()).collect();
    // (tile, left index, right index) for the pairs each tile owns.
    let candidates: Vec<(usize, usize, usize)> = par::flat_map(exec, &tiles, |&tile| {
        let (lm, rm) = (&parts.members[0][tile], &parts.members[1][tile]);
        if lm.is_empty() || rm.is_empty() {
            return Vec::new();
        }
        let lb: Vec<Mbr> = lm.iter().map(|&i| *r.objects[i].geometry.mbr()).collect();
        let rb: Vec<Mbr> = rm.iter().map(|&i| *s.objects[i].geometry.mbr()).collect();
        mbr_join(&lb, &rb, mbr_pred)
            .into_iter()
            .filter_map(|(a, b)| {
                let c = lb[a].intersection(&rb[b])?;
                (parts.scheme.tile_of(c.xmin, c.ymin) == tile).then_some((tile, lm[a], rm[b]))
            })
            .collect()
    });
    stats.mbr_seconds = t.elapsed().as_secs_f64();
    stats.candidates = candidates.len() as u64;

    let stored = |right_side: bool, tile: usize, i: usize| -> Option<&Approx> {
        if right_side {
            right?.get(tile, s.objects[i].id)
        } else {
            left?.get(tile, r.objects[i].id)
        }
    };
    let verdicts: Vec<Verdict> = if cfg.filter == FilterKind::None {
        vec![Verdict::Indecisive; candidates.len()]
    } else {
        let t = Instant::now();
        let mut jobs: Vec<(bool, usize, usize)> = candidates
            .iter()
            .flat_map(|&(t, a, b)| [(false, t, a), (true, t, b)])
            .filter(|&(side, t, i)| stored(side, t, i).is_none())
            .collect();
        jobs.sort_unstable();
        jobs.dedup();
        let mut grids: HashMap<usize, (GridConfig, GridConfig)> = HashMap::new();
        for &(_, tile, _) in &jobs {
            if let std::collections::hash_map::Entry::Vacant(e) = grids.entry(tile) {
                let ext = tile_ext[tile].expect("tile has members");
                let left = grid_for_extent(&ext, cfg.order)?;
                let right = grid_for_extent(&ext, cfg.right_order.unwrap_or(cfg.order))?;
                e.insert((left, right));
            }
        }
        let built = par::map(exec, &jobs, |&(right, tile, i)| {
            let (lg, rg) = &grids[&tile];
            if right {
                build_approx(&s.objects[i].geometry, rg, cfg.filter, cfg.backend, Side::S)
            } else {
                build_approx(&r.objects[i].geometry, lg, cfg.filter, cfg.backend, Side::R)
            }
        });
        let mut cache: HashMap<(bool, usize, usize), Approx> = HashMap::with_capacity(jobs.len());
        for (key, approx) in jobs.into_iter().zip(built) {
            cache.insert(key, approx?);
        }
        stats.build_seconds = t.elapsed().as_secs_f64();

        let get = |side: bool, tile: usize, i: usize| -> &Approx {
            stored(side, tile, i).unwrap_or_else(|| &cache[&(side, tile, i)])
        };
        let t = Instant::now();
        let verdicts = par::map(exec, &candidates, |&(tile, a, b)| {
            apply_filter(get(false, tile, a), get(true, tile, b), predicate, cfg.join_order)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        stats.filter_seconds = t.elapsed().as_secs_f64();
        verdicts
    };
    for &v in &verdicts {
        stats.count(v);
    }

    let t = Instant::now();
    let pairs: Vec<((usize, usize, usize), Verdict)> =
        candidates.into_iter().zip(verdicts).filter(|(_, v)| *v != Verdict::TrueNegative).collect();
    let accepted = par::map(exec, &pairs, |&((_, a, b), v)| match v {
        Verdict::TrueHit => (true, false),
        _ => {
            let ok = refine(&r.objects[a].geometry, &s.objects[b].geometry, predicate);
            (ok, ok)
        }
    });
    stats.refine_seconds = t.elapsed().as_secs_f64();

    let mut results = Vec::new();
    for (((_, a, b), _), (keep, refined)) in pairs.iter().zip(accepted) {
        if keep {
            results.push((r.objects[*a].id, s.objects[*b].id));
        }
        if refined {
            stats.refined_accepted += 1;
        }
    }
    results.sort_unstable();
    stats.results = results.len() as u64;
    Ok((results, stats))
}

/// Objects of `d` intersecting the query polygon, on `d`'s raster.
pub fn run_selection(
    query: &SimplePolygon,
    d: &Dataset,
    cfg: &JoinConfig,
) -> Result<(Vec<u32>, JoinStats)> {
    run_selection_with(query, d, cfg, None)
}

/// Like [`run_selection`] with prebuilt approximations of `d`. The store
/// must use a single tile; its extent is the raster extent.
pub fn run_selection_with(
    query: &SimplePolygon,
    d: &Dataset,
    cfg: &JoinConfig,
    store: Option<&ApproxStore>,
) -> Result<(Vec<u32>, JoinStats)> {
    if let Some(st) = store {
        if st.partitions != 1 {
            return Err(Error::Config("selection needs approximations built with one partition".into()));
        }
        st.check(&JoinConfig { partitions: 1, ..*cfg }, cfg.order)?;
    }
    if cfg.filter == FilterKind::Ri && d.objects.iter().any(|o| o.geometry.as_linestring().is_some()) {
        return Err(Error::Config("the RI filter does not support linestrings".into()));
    }
    let mut stats = JoinStats::default();
    let Some(dmbr) = d.mbr() else {
        return Ok((Vec::new(), stats));
    };
    // A fixed extent (prebuilt or configured) must hold the query; otherwise
    // the raster spans both.
    let fixed = store.and_then(|st| st.tiles[0].extent).or(cfg.extent);
    let extent = fixed.unwrap_or_else(|| dmbr.union(query.mbr()));
    if !query.mbr().intersects(&extent) {
        return Ok((Vec::new(), stats));
    }
    let grid = grid_for_extent(&extent, cfg.order)?;
    if !query.mbr().within(grid.extent()) {
        let m = query.mbr();
        let (x, y) = if m.xmin < grid.extent().xmin || m.ymin < grid.extent().ymin {
            (m.xmin, m.ymin)
        } else {
            (m.xmax, m.ymax)
        };
        return Err(Error::OutsideExtent { x, y });
    }
    let exec = cfg.execution;

    let t = Instant::now();
    let cands: Vec<usize> =
        (0..d.len()).filter(|&i| d.objects[i].geometry.mbr().intersects(query.mbr())).collect();
    stats.mbr_seconds = t.elapsed().as_secs_f64();
    stats.candidates = cands.len() as u64;

    let qgeom = Geometry::Polygon(query.clone());
    let verdicts: Vec<Verdict> = if cfg.filter == FilterKind::None {
        vec![Verdict::Indecisive; cands.len()]
    } else {
        let t = Instant::now();
        let q = build_approx(&qgeom, &grid, cfg.filter, cfg.backend, Side::R)?;
        let missing: Vec<usize> = cands
            .iter()
            .copied()
            .filter(|&i| store.and_then(|st| st.get(0, d.objects[i].id)).is_none())
            .collect();
        let built = par::map(exec, &missing, |&i| {
            build_approx(&d.objects[i].geometry, &grid, cfg.filter, cfg.backend, Side::S)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let cache: HashMap<usize, Approx> = missing.into_iter().zip(built).collect();
        stats.build_seconds = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let v = par::map(exec, &cands, |&i| {
            let b = store.and_then(|st| st.get(0, d.objects[i].id)).unwrap_or_else(|| &cache[&i]);
            let pred = match b {
                Approx::Cells(_) | Approx::CellsCompressed(_) => Predicate::PolyLine,
                _ => Predicate::Intersects,
            };
            apply_filter(&q, b, pred, cfg.join_order)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        stats.filter_seconds = t.elapsed().as_secs_f64();
        v
    };
    for &v in &verdicts {
        stats.count(v);
    }

    let t = Instant::now();
    let todo: Vec<(usize, Verdict)> =
        cands.into_iter().zip(verdicts).filter(|(_, v)| *v != Verdict::TrueNegative).collect();
    let accepted = par::map(exec, &todo, |&(i, v)| match v {
        Verdict::TrueHit => (true, false),
        _ => {
            let ok = match &d.objects[i].geometry {
                Geometry::Polygon(p) => polygons_intersect(query, p),
                Geometry::Linestring(l) => polygon_linestring_intersect(query, l),
            };
            (ok, ok)
        }
    });
    stats.refine_seconds = t.elapsed().as_secs_f64();
    let mut ids = Vec::new();
    for (&(i, _), (keep, refined)) in todo.iter().zip(accepted) {
        if keep {
            ids.push(d.objects[i].id);
        }
        stats.refined_accepted += refined as u64;
    }
    ids.sort_unstable();
    stats.results = ids.len() as u64;
    Ok((ids, stats))
}
