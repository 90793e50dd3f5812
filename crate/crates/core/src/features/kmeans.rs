//! k-means over origin–destination vectors `(o_lat, o_lon, d_lat, d_lon)`.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ved::TripSeries;

pub type OdPoint = [f64; 4];

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<OdPoint>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ClusterFit {
    pub model: ClusterModel,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub assignments: Vec<usize>,
    pub converged: bool,
}

pub fn od_vector(trip: &TripSeries) -> Option<OdPoint> {
    let (olat, olon) = trip.origin()?;
    let (dlat, dlon) = trip.destination()?;
    Some([olat, olon, dlat, dlon])
}

fn sq_dist(a: &OdPoint, b: &OdPoint) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Nearest centroid; ties go to the lowest id.
    pub fn assign(&self, point: &OdPoint) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = sq_dist(point, c);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn inertia(&self, points: &[OdPoint]) -> f64 {
        points
            .iter()
            .map(|p| sq_dist(p, &self.centroids[self.assign(p)]))
            .sum()
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        writeln!(out, "# k={} seed={}", self.k(), self.seed)
            .map_err(|e| Error::io("<clusters>", e))?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "cluster",
            "origin_lat",
            "origin_lon",
            "dest_lat",
            "dest_lon",
        ])?;
        for (i, c) in self.centroids.iter().enumerate() {
            w.write_record([
                i.to_string(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
                c[3].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<clusters>", e))?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut text = String::new();
        let mut input = input;
        input
            .read_to_string(&mut text)
            .map_err(|e| Error::io("<clusters>", e))?;
        let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
        let mut k = None;
        let mut seed = None;
        for tok in first.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix("k=") {
                k = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("seed=") {
                seed = v.parse::<u64>().ok();
            }
        }
        let (Some(k), Some(seed)) = (k, seed) else {
            return Err(Error::parse("cluster file header", first));
        };
        let mut reader = csv::Reader::from_reader(rest.as_bytes());
        let mut centroids = Vec::with_capacity(k);
        for rec in reader.records() {
            let rec = rec?;
            let mut c = [0.0; 4];
            for (slot, cell) in c.iter_mut().zip(rec.iter().skip(1)) {
                *slot = cell.parse().map_err(|_| Error::parse("centroid", cell))?;
            }
            centroids.push(c);
        }
        if centroids.len() != k || k == 0 {
            return Err(Error::InvalidInput(format!(
                "cluster file declares k={k} but has {} rows",
                centroids.len()
            )));
        }
        Ok(ClusterModel { centroids, seed })
    }
}

fn plus_plus_init(points: &[OdPoint], k: usize, rng: &mut ChaCha8Rng) -> Vec<OdPoint> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // guard against landing on a zero-weight point through rounding
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|d| *d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from k-means++ seeding until the assignment is a fixpoint
/// or `max_iter` is reached. Empty clusters keep their previous centroid.
pub fn fit_kmeans(points: &[OdPoint], k: usize, seed: u64, max_iter: usize) -> Result<ClusterFit> {
    if k == 0 {
        return Err(Error::InvalidInput(
            "cluster count must be at least 1".into(),
        ));
    }
    let distinct: BTreeSet<[u64; 4]> = points.iter().map(|p| p.map(f64::to_bits)).collect();
    if distinct.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} distinct origin-destination points for k={k}; use a smaller cluster count",
            distinct.len()
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "non-finite coordinate in clustering input".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ClusterModel {
        centroids: plus_plus_init(points, k, &mut rng),
        seed,
    };
    let mut assignments: Vec<usize> = points.iter().map(|p| model.assign(p)).collect();
    let mut inertia_history = vec![model.inertia(points)];
    let mut converged = false;

    for _ in 0..max_iter {
        let mut sums = vec![[0.0; 4]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for ((c, s), &n) in model.centroids.iter_mut().zip(&sums).zip(&counts) {
            if n > 0 {
                *c = s.map(|v| v / n as f64);
            }
        }
        let next: Vec<usize> = points.iter().map(|p| model.assign(p)).collect();
        let inertia = model.inertia(points);
        debug_assert!(
            inertia <= inertia_history.last().unwrap() * (1.0 + 1e-12) + 1e-300,
            "k-means inertia increased"
        );
        inertia_history.push(inertia);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    Ok(ClusterFit {
        model,
        inertia_history,
        assignments,
        converged,
    })
}

/// Clusters trips by origin and destination. Trips without coordinates are
/// ignored.
pub fn fit_od_clusters(
    trips: &[TripSeries],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterFit> {
    let points: Vec<OdPoint> = trips.iter().filter_map(od_vector).collect();
    fit_kmeans(&points, k, seed, max_iter)
}

pub fn assign_cluster(model: &ClusterModel, trip: &TripSeries) -> Option<usize> {
    od_vector(trip).map(|p| model.assign(&p))
}
