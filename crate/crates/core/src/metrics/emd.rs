//! Earth mover's distance between spike fODFs on the projective sphere,
//! solved exactly as a transportation problem by successive shortest
//! augmenting paths.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::axis_angle;

/// Flows and masses below this are treated as exhausted.
const MASS_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spike {
    pub direction: [f64; 3],
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscreteFodf {
    pub spikes: Vec<Spike>,
}

impl DiscreteFodf {
    pub fn new(spikes: impl IntoIterator<Item = (Vector3<f64>, f64)>) -> Self {
        Self {
            spikes: spikes
                .into_iter()
                .map(|(d, mass)| Spike {
                    direction: [d.x, d.y, d.z],
                    mass,
                })
                .collect(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.spikes.iter().map(|s| s.mass).sum()
    }

    fn normalized(&self, label: &'static str) -> Result<Vec<(Vector3<f64>, f64)>> {
        if self.spikes.is_empty() {
            return Err(Error::InvalidArgument(format!("{label} fODF has no spikes")));
        }
        if self
            .spikes
            .iter()
            .any(|s| !s.mass.is_finite() || s.mass < 0.0 || s.direction.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite(label));
        }
        let total = self.total_mass();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument(format!("{label} fODF has zero total mass")));
        }
        self.spikes
            .iter()
            .map(|s| {
                let d = Vector3::from(s.direction);
                let n = d.norm();
                if n == 0.0 {
                    return Err(Error::InvalidArgument(format!("{label} fODF has a zero direction")));
                }
                Ok((d / n, s.mass / total))
            })
            .collect()
    }
}

/// Minimum-cost transport between two mass-normalized fODFs with ground
/// distance `arccos |<u, v>|` (radians).
pub fn emd(a: &DiscreteFodf, b: &DiscreteFodf) -> Result<f64> {
    let a = a.normalized("first")?;
    let b = b.normalized("second")?;
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|(u, _)| b.iter().map(|(v, _)| axis_angle(u, v)).collect())
        .collect();
    let supply: Vec<f64> = a.iter().map(|s| s.1).collect();
    let demand: Vec<f64> = b.iter().map(|s| s.1).collect();
    Ok(transport(&cost, &supply, &demand).0)
}

/// Exact balanced transportation solve. Returns the optimal cost and flow.
///
/// Each augmentation saturates a source or a sink, so at most `m + k`
/// shortest-path (Bellman-Ford) rounds are needed.
pub fn transport(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let m = supply.len();
    let k = demand.len();
    let mut flow = vec![vec![0.0; k]; m];
    let mut rem_a = supply.to_vec();
    let mut rem_b = demand.to_vec();

    // nodes 0..m are sources, m..m+k sinks
    let total = m + k;
    for _ in 0..=total {
        let mut dist = vec![f64::INFINITY; total];
        let mut pred = vec![usize::MAX; total];
        for i in 0..m {
            if rem_a[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        for _ in 0..total {
            let mut changed = false;
            for i in 0..m {
                if dist[i].is_finite() {
                    for j in 0..k {
                        let d = dist[i] + cost[i][j];
                        if d < dist[m + j] - 1e-15 {
                            dist[m + j] = d;
                            pred[m + j] = i;
                            changed = true;
                        }
                    }
                }
            }
            for j in 0..k {
                if dist[m + j].is_finite() {
                    for i in 0..m {
                        if flow[i][j] > MASS_EPS {
                            let d = dist[m + j] - cost[i][j];
                            if d < dist[i] - 1e-15 {
                                dist[i] = d;
                                pred[i] = m + j;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let sink = (0..k)
            .filter(|&j| rem_b[j] > MASS_EPS && dist[m + j].is_finite())
            .min_by(|&x, &y| dist[m + x].total_cmp(&dist[m + y]));
        let Some(j_end) = sink else {
            break;
        };

        // walk back to a source to find the bottleneck
        let mut amount = rem_b[j_end];
        let mut node = m + j_end;
        loop {
            let p = pred[node];
            if node >= m {
                if p == usize::MAX {
                    break;
                }
                node = p;
            } else {
                if p == usize::MAX {
                    amount = amount.min(rem_a[node]);
                    break;
                }
                amount = amount.min(flow[node][p - m]);
                node = p;
            }
        }
        let mut node = m + j_end;
        rem_b[j_end] -= amount;
        loop {
            let p = pred[node];
            if node >= m {
                flow[p][node - m] += amount;
                node = p;
            } else {
                if p == usize::MAX {
                    rem_a[node] -= amount;
                    break;
                }
                flow[node][p - m] -= amount;
                node = p;
            }
        }
    }
    let cost_total = (0..m)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| flow[i][j] * cost[i][j])
        .sum();
    (cost_total, flow)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spike(v: Vector3<f64>) -> DiscreteFodf {
        DiscreteFodf::new([(v, 1.0)])
    }

    #[test]
    fn identical_and_antipodal_are_zero() {
        let v = Vector3::new(0.3, -0.4, 0.8).normalize();
        assert_eq!(emd(&spike(v), &spike(v)).unwrap(), 0.0);
        assert!(emd(&spike(v), &spike(-v)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn single_route_costs_the_angle() {
        let u = Vector3::z();
        let v = Vector3::new(0.3f64.sin(), 0.0, 0.3f64.cos());
        assert!((emd(&spike(u), &spike(v)).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn masses_are_normalized() {
        let a = DiscreteFodf::new([(Vector3::x(), 2.0), (Vector3::y(), 2.0)]);
        let b = DiscreteFodf::new([(Vector3::x(), 0.5), (Vector3::y(), 0.5)]);
        assert!(emd(&a, &b).unwrap().abs() < 1e-12);
        let c = DiscreteFodf::new([(Vector3::x(), 1.0)]);
        // half the mass moves a right angle
        assert!((emd(&a, &c).unwrap() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_and_massless() {
        assert!(emd(&DiscreteFodf::default(), &spike(Vector3::x())).is_err());
        let z = DiscreteFodf::new([(Vector3::x(), 0.0)]);
        assert!(emd(&z, &spike(Vector3::x())).is_err());
    }

    #[test]
    fn rerouting_through_reverse_edges() {
        // greedy cheapest-first would ship a0->b0 and then pay for a1->b1
        let cost = vec![vec![1.0, 2.0], vec![1.0, 10.0]];
        let (c, flow) = transport(&cost, &[0.5, 0.5], &[0.5, 0.5]);
        assert!((c - 1.5).abs() < 1e-12, "{c} {flow:?}");
    }
}
