#![allow(dead_code)]

use april_core::geom::{Mbr, Point, SimplePolygon};
use april_core::pipeline::Dataset;
use april_oracle::{polygon_in, star_polygon};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn unit() -> Mbr {
    Mbr::new(0.0, 0.0, 1.0, 1.0).unwrap()
}

/// Two polygons near each other on the unit square, sized in cells of an
/// order-`order` grid, so that all verdicts occur.
pub fn close_pair(rng: &mut ChaCha8Rng, order: u8) -> (SimplePolygon, SimplePolygon) {
    let cell = 1.0 / (1u64 << order) as f64;
    let r = rng.random_range(0.5..25.0) * cell;
    let a = polygon_in(rng, &unit(), 0.3 * r, r, 12);
    let c = a.mbr().center();
    let off = rng.random_range(0.0..2.5) * r;
    let ang = rng.random_range(0.0..std::f64::consts::TAU);
    let r2 = rng.random_range(0.3..2.0) * r;
    let cx = (c.x + off * ang.cos()).clamp(r2 + cell, 1.0 - r2 - cell);
    let cy = (c.y + off * ang.sin()).clamp(r2 + cell, 1.0 - r2 - cell);
    let b = star_polygon(rng, Point::new(cx, cy), 0.3 * r2, r2, 12);
    (a, b)
}

pub fn map() -> Mbr {
    Mbr::new(0.0, 0.0, 1000.0, 1000.0).unwrap()
}

/// Two polygon datasets on a 1000 x 1000 map. Every other left polygon sits
/// at the center of a right polygon and inside its inner radius, so within
/// joins have results too.
pub fn join_workload(rng: &mut ChaCha8Rng, n_left: usize, n_right: usize) -> (Dataset, Dataset) {
    let m = map();
    let mut centers = Vec::with_capacity(n_right);
    let right: Vec<SimplePolygon> = (0..n_right)
        .map(|_| {
            let rad = rng.random_range(15.0..45.0);
            let c = Point::new(rng.random_range(50.0..950.0), rng.random_range(50.0..950.0));
            centers.push((c, 0.5 * rad));
            star_polygon(rng, c, 0.5 * rad, rad, 12)
        })
        .collect();
    let left: Vec<SimplePolygon> = (0..n_left)
        .map(|i| {
            if i % 2 == 0 && i / 2 < n_right {
                let (c, inner) = centers[i / 2];
                let rad = rng.random_range(0.3..0.95) * inner;
                star_polygon(rng, c, 0.4 * rad, rad, 12)
            } else {
                let rmax = rng.random_range(6.0..35.0);
                polygon_in(rng, &m, 5.0, rmax, 12)
            }
        })
        .collect();
    (Dataset::from_polygons(left), Dataset::from_polygons(right))
}

pub fn assert_sorted_unique(pairs: &[(u32, u32)]) {
    assert!(pairs.windows(2).all(|w| w[0] < w[1]), "duplicate or unsorted result pairs");
}
