//! Gradient directions spread by electrostatic repulsion between antipodal
//! pairs: each unit vector `x` carries charges at `x` and `-x`.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sphere::{axis_angle, random_unit};

const REL_TOL: f64 = 1e-9;
const MAX_STEPS: usize = 200_000;

/// `sum_{i<j} 1/||x_i - x_j|| + 1/||x_i + x_j||`
pub fn repulsion_energy(points: &[Vector3<f64>]) -> f64 {
    let mut e = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            e += 1.0 / (points[i] - points[j]).norm() + 1.0 / (points[i] + points[j]).norm();
        }
    }
    e
}

fn energy_gradient(points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let mut g = vec![Vector3::zeros(); points.len()];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i] - points[j];
            let s = points[i] + points[j];
            let gd = d / d.norm().powi(3);
            let gs = s / s.norm().powi(3);
            g[i] -= gd + gs;
            g[j] += gd - gs;
        }
    }
    g
}

/// Minimizes [`repulsion_energy`] from a seeded random start by projected
/// gradient descent with an adaptive step, until an accepted step changes
/// the energy by less than `1e-9` relative.
pub fn make_directions(n: usize, seed: u64) -> Result<Vec<Vector3<f64>>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 directions, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<Vector3<f64>> = (0..n).map(|_| random_unit(&mut rng)).collect();
    let mut energy = repulsion_energy(&x);
    let mut step = f64::NAN;

    for _ in 0..MAX_STEPS {
        let g: Vec<Vector3<f64>> = energy_gradient(&x)
            .iter()
            .zip(&x)
            .map(|(g, p)| g - p * g.dot(p))
            .collect();
        let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if gmax == 0.0 {
            break;
        }
        if step.is_nan() {
            step = 0.1 / gmax;
        }
        let mut moved = false;
        while step * gmax > 1e-15 {
            let cand: Vec<Vector3<f64>> = x.iter().zip(&g).map(|(p, g)| (p - g * step).normalize()).collect();
            let e = repulsion_energy(&cand);
            if e < energy {
                let change = (energy - e) / energy;
                x = cand;
                energy = e;
                step *= 1.2;
                moved = true;
                if change < REL_TOL {
                    return Ok(x);
                }
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok(x)
}

/// Largest angular distance (antipodally identified) from any probe to its
/// nearest point of `set`.
pub fn covering_radius(set: &[Vector3<f64>], probes: &[Vector3<f64>]) -> f64 {
    probes
        .iter()
        .map(|p| set.iter().map(|s| axis_angle(p, s)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Splits directions into two interleaved halves that each cover the
/// sphere. The partitions take turns (train first) claiming the unassigned
/// direction farthest from their own members; ties go to the lowest index.
/// With an odd count the extra direction goes to train.
pub fn partition(directions: &[Vector3<f64>]) -> (Vec<usize>, Vec<usize>) {
    let n = directions.len();
    let mut assigned = vec![false; n];
    // nearest[p][j]: distance from j to partition p, or to everything
    // assigned so far while p is still empty
    let mut nearest = [vec![f64::INFINITY; n], vec![f64::INFINITY; n]];
    let mut nearest_any = vec![f64::INFINITY; n];
    let mut parts: [Vec<usize>; 2] = [Vec::with_capacity(n / 2 + 1), Vec::with_capacity(n / 2)];

    for turn in 0..n {
        let p = turn % 2;
        let score = if parts[p].is_empty() { &nearest_any } else { &nearest[p] };
        let mut pick = None;
        for j in 0..n {
            if assigned[j] {
                continue;
            }
            if pick.is_none_or(|k: usize| score[j] > score[k]) {
                pick = Some(j);
            }
        }
        let j = pick.expect("an unassigned direction remains");
        assigned[j] = true;
        parts[p].push(j);
        for k in 0..n {
            let d = axis_angle(&directions[j], &directions[k]);
            nearest[p][k] = nearest[p][k].min(d);
            nearest_any[k] = nearest_any[k].min(d);
        }
    }
    let [mut train, mut test] = parts;
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_end_orthogonal() {
        let x = make_directions(2, 5).unwrap();
        assert!(x[0].dot(&x[1]).abs() < 1e-4);
        assert!(make_directions(1, 0).is_err());
    }

    #[test]
    fn descent_lowers_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let start: Vec<_> = (0..20).map(|_| random_unit(&mut rng)).collect();
        let x = make_directions(20, 9).unwrap();
        assert!(repulsion_energy(&x) <= repulsion_energy(&start));
        assert!(x.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn partition_is_disjoint_and_exhaustive() {
        let x = make_directions(31, 1).unwrap();
        let (a, b) = partition(&x);
        assert_eq!(a.len(), 16);
        assert_eq!(b.len(), 15);
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..31).collect::<Vec<_>>());
    }

    #[test]
    fn orthogonal_pair_is_split() {
        let (a, b) = partition(&[Vector3::x(), Vector3::y()]);
        assert_eq!((a, b), (vec![0], vec![1]));
    }
}
