//! Exact joint posterior over all `2^N` populations.
//!
//! Nodes are the lattice points `ρ = a/m` with non-negative integers `a`
//! summing to `m`, so every node lies on the simplex exactly. Quadrature
//! uses lumped piecewise-linear weights: in cumulative coordinates
//! `y_j = a_0 + … + a_{j−1}` the simplex is `0 ≤ y_1 ≤ … ≤ y_d ≤ m`, a union
//! of Kuhn simplices, and each node gets `(#incident cells)/(d+1)!·h^d`. For a
//! single qubit this is the trapezoidal rule.

use crate::detector::QubitResponseModel;
use crate::error::{Error, Result};
use crate::likelihood::LikelihoodTable;
use crate::numeric::log_sum_exp;
use crate::posterior::PopulationEstimate;
use crate::shots::Shots;

use super::basis_table;

pub const MAX_JOINT_QUBITS: usize = 2;
/// Lattice subdivisions per unit population for two-qubit registers.
pub const DEFAULT_TWO_QUBIT_RESOLUTION: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPosterior {
    n_qubits: usize,
    resolution: usize,
    /// `a` coordinates, `2^N` per node.
    nodes: Vec<u32>,
    volumes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl SimplexPosterior {
    /// Flat prior on a lattice with `resolution` subdivisions (step `1/resolution`).
    pub fn uniform(n_qubits: usize, resolution: usize) -> Result<Self> {
        if n_qubits > MAX_JOINT_QUBITS {
            return Err(Error::TooManyQubits(n_qubits));
        }
        if n_qubits == 0 {
            return Err(Error::InvalidInput("need at least one qubit".into()));
        }
        if resolution < 2 {
            return Err(Error::InvalidResolution(resolution + 1));
        }
        let k = 1usize << n_qubits;
        let mut nodes = Vec::new();
        let mut current = vec![0u32; k];
        compositions(resolution as u32, 0, &mut current, &mut nodes);
        let volumes = lattice_volumes(&nodes, k, resolution);
        let n_nodes = volumes.len();
        let mut post = Self {
            n_qubits,
            resolution,
            nodes,
            volumes,
            log_weights: vec![0.0; n_nodes],
        };
        post.normalize();
        Ok(post)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_states(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn n_nodes(&self) -> usize {
        self.volumes.len()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Populations at node `i`.
    pub fn node(&self, i: usize) -> Vec<f64> {
        let k = self.n_states();
        self.nodes[i * k..(i + 1) * k]
            .iter()
            .map(|&a| a as f64 / self.resolution as f64)
            .collect()
    }

    /// `Σ exp(log_weight)·volume`.
    pub fn total_mass(&self) -> f64 {
        self.volumes
            .iter()
            .zip(&self.log_weights)
            .map(|(v, l)| v * l.exp())
            .sum()
    }

    fn normalize(&mut self) {
        let logs: Vec<f64> = self
            .volumes
            .iter()
            .zip(&self.log_weights)
            .map(|(v, l)| v.ln() + l)
            .collect();
        let z = log_sum_exp(&logs);
        for l in &mut self.log_weights {
            *l -= z;
        }
    }

    pub fn update(&self, models: &[QubitResponseModel], shots: &Shots) -> Result<Self> {
        joint_update(self, models, shots)
    }

    pub(crate) fn update_with_table(&self, table: &LikelihoodTable) -> Self {
        let k = self.n_states();
        let inv = 1.0 / self.resolution as f64;
        let mut rho = vec![0.0; k];
        let mut next = self.clone();
        for (i, lw) in next.log_weights.iter_mut().enumerate() {
            for (r, &a) in rho.iter_mut().zip(&self.nodes[i * k..(i + 1) * k]) {
                *r = a as f64 * inv;
            }
            *lw += table.log_mixture(&rho);
        }
        next.normalize();
        next
    }

    /// Posterior means and standard deviations of every population.
    pub fn estimate(&self) -> PopulationEstimate {
        let k = self.n_states();
        let inv = 1.0 / self.resolution as f64;
        let mut m0 = 0.0;
        let mut m1 = vec![0.0; k];
        let mut m2 = vec![0.0; k];
        for (i, (v, l)) in self.volumes.iter().zip(&self.log_weights).enumerate() {
            let p = v * l.exp();
            m0 += p;
            for (s, &a) in self.nodes[i * k..(i + 1) * k].iter().enumerate() {
                let r = a as f64 * inv;
                m1[s] += p * r;
                m2[s] += p * r * r;
            }
        }
        let mut pops: Vec<f64> = m1.iter().map(|m| (m / m0).clamp(0.0, 1.0)).collect();
        let total: f64 = pops.iter().sum();
        for p in &mut pops {
            *p /= total;
        }
        let sds = pops
            .iter()
            .zip(&m2)
            .map(|(mean, m)| (m / m0 - mean * mean).max(0.0).sqrt())
            .collect();
        PopulationEstimate {
            populations: pops,
            std_devs: sds,
        }
    }
}

/// Adds the log-likelihood of every shot to every node and renormalizes.
pub fn joint_update(
    post: &SimplexPosterior,
    models: &[QubitResponseModel],
    shots: &Shots,
) -> Result<SimplexPosterior> {
    if models.len() > MAX_JOINT_QUBITS {
        return Err(Error::TooManyQubits(models.len()));
    }
    if models.len() != post.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: post.n_qubits,
            got: models.len(),
        });
    }
    if shots.is_empty() {
        if shots.n_qubits() != post.n_qubits && shots.n_qubits() != 0 {
            return Err(Error::DimensionMismatch {
                expected: post.n_qubits,
                got: shots.n_qubits(),
            });
        }
        return Ok(post.clone());
    }
    let table = basis_table(models, shots)?;
    Ok(post.update_with_table(&table))
}

fn compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<u32>) {
    let k = current.len();
    if pos == k - 1 {
        current[pos] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for a in 0..=remaining {
        current[pos] = a;
        compositions(remaining - a, pos + 1, current, out);
    }
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; d], &mut out);
    out
}

/// Lumped P1 quadrature weights of the lattice nodes.
fn lattice_volumes(nodes: &[u32], k: usize, resolution: usize) -> Vec<f64> {
    let d = k - 1;
    let perms = permutations(d);
    let factorial: f64 = (1..=d + 1).map(|v| v as f64).product();
    let cell = (1.0 / resolution as f64).powi(d as i32) / factorial;
    let m = resolution as i64;
    let scale = (d + 1) as i64;
    let mut y = vec![0i64; d];
    let mut centroid = vec![0i64; d];
    nodes
        .chunks_exact(k)
        .map(|a| {
            let mut acc = 0i64;
            for j in 0..d {
                acc += a[j] as i64;
                y[j] = acc;
            }
            let mut incident = 0usize;
            for perm in &perms {
                for r in 0..=d {
                    // Kuhn cell with base y − Σ_{l<r} e_{perm[l]}; node is its r-th vertex.
                    // (d+1)·centroid along perm[l] = (d+1)·base + (d − l).
                    for (l, &axis) in perm.iter().enumerate() {
                        let base = y[axis] - i64::from(l < r);
                        centroid[axis] = scale * base + (d - l) as i64;
                    }
                    let inside = centroid[0] > 0
                        && centroid.windows(2).all(|w| w[0] < w[1])
                        && centroid[d - 1] < scale * m;
                    incident += usize::from(inside);
                }
            }
            incident as f64 * cell
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiqubit::tests::{model, pure_model};
    use crate::posterior::{uniform_prior, update_posterior};
    use crate::simulator::{sample_shots, TrueState};

    #[test]
    fn volumes_sum_to_simplex_volume() {
        for (nq, m) in [(1, 10), (2, 7), (2, 20)] {
            let p = SimplexPosterior::uniform(nq, m).unwrap();
            let d = (1 << nq) - 1;
            let expected = 1.0 / (1..=d).map(|v| v as f64).product::<f64>();
            let total: f64 = p.volumes().iter().sum();
            assert!((total - expected).abs() < 1e-12, "{total} vs {expected}");
            assert!(p.volumes().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn uniform_mean_is_centroid() {
        let p = SimplexPosterior::uniform(2, 12).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
        let e = p.estimate();
        for v in e.populations {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn node_count() {
        // C(m+3, 3) nodes for four states
        let p = SimplexPosterior::uniform(2, 10).unwrap();
        assert_eq!(p.n_nodes(), 286);
        for i in 0..p.n_nodes() {
            assert!((p.node(i).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_qubit_matches_segment_posterior() {
        let m = model("a", 0.0, 2.0);
        let xs = [0.3, -0.2, 1.7, 2.4, 0.9, 5.0];
        let seg = update_posterior(&uniform_prior(201).unwrap(), &m, &xs).unwrap();
        let joint = joint_update(
            &SimplexPosterior::uniform(1, 200).unwrap(),
            std::slice::from_ref(&m),
            &Shots::from_column(&xs),
        )
        .unwrap();
        for k in 0..201 {
            assert!((joint.node(k)[0] - seg.rho(k)).abs() < 1e-15);
            assert!((joint.log_weights()[k] - seg.log_weights()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_batch_unchanged() {
        let p = SimplexPosterior::uniform(2, 8).unwrap();
        let models = [model("a", 0.0, 3.0), model("b", 0.0, 3.0)];
        assert_eq!(joint_update(&p, &models, &Shots::new(2)).unwrap(), p);
    }

    #[test]
    fn too_many_qubits() {
        assert!(matches!(SimplexPosterior::uniform(3, 10), Err(Error::TooManyQubits(3))));
        let p = SimplexPosterior::uniform(2, 8).unwrap();
        let models = [model("a", 0.0, 3.0), model("b", 0.0, 3.0), model("c", 0.0, 3.0)];
        assert!(matches!(
            joint_update(&p, &models, &Shots::new(3)),
            Err(Error::TooManyQubits(3))
        ));
    }

    #[test]
    fn concentrates_on_prepared_state() {
        let models = [pure_model("a", 0.0, 8.0), pure_model("b", 0.0, 8.0)];
        let truth = TrueState::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let shots = sample_shots(&truth, &models, 1000, 4).unwrap();
        let post = joint_update(
            &SimplexPosterior::uniform(2, DEFAULT_TWO_QUBIT_RESOLUTION).unwrap(),
            &models,
            &shots,
        )
        .unwrap();
        assert!((post.total_mass() - 1.0).abs() < 1e-9);
        let e = post.estimate();
        assert!(e.populations[0] > 0.99, "{e:?}");
    }
}
