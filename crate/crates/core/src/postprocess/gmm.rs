//! Full-covariance Gaussian mixtures over RGB colours, fitted by hard assignment.

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

const COV_REGULARIZATION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
struct Component {
    weight: f64,
    mean: Vec3,
    inverse: Mat3,
    /// `-0.5 * ln det(cov)`, cached.
    log_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gmm {
    components: Vec<Component>,
}

fn det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse(m: &Mat3, d: f64) -> Mat3 {
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            // cofactor of (c, r)
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            *v = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / d;
        }
    }
    inv
}

fn sq_dist(a: &Vec3, b: &Vec3) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

impl Gmm {
    /// Fits `k` components to `samples`: k-means (farthest-point seeding, 10 rounds) for the
    /// initial partition, then one maximum-likelihood estimate per cluster.
    pub fn fit(samples: &[Vec3], k: usize) -> Gmm {
        assert!(!samples.is_empty(), "cannot fit a mixture to no samples");
        let labels = kmeans(samples, k.min(samples.len()).max(1), 10);
        Self::from_assignment(samples, &labels, k)
    }

    /// Maximum-likelihood parameters for a fixed hard assignment; empty clusters get
    /// zero weight.
    pub fn from_assignment(samples: &[Vec3], labels: &[usize], k: usize) -> Gmm {
        let mut count = vec![0usize; k];
        let mut sum = vec![[0.0; 3]; k];
        let mut prod = vec![[[0.0; 3]; 3]; k];
        for (z, &l) in samples.iter().zip(labels) {
            count[l] += 1;
            for i in 0..3 {
                sum[l][i] += z[i];
                for j in 0..3 {
                    prod[l][i][j] += z[i] * z[j];
                }
            }
        }
        let total = samples.len() as f64;
        let components = (0..k)
            .map(|c| {
                if count[c] == 0 {
                    return Component {
                        weight: 0.0,
                        mean: [0.0; 3],
                        inverse: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                        log_norm: 0.0,
                    };
                }
                let n = count[c] as f64;
                let mean = sum[c].map(|s| s / n);
                let mut cov = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        cov[i][j] = prod[c][i][j] / n - mean[i] * mean[j];
                    }
                    cov[i][i] += COV_REGULARIZATION;
                }
                let mut d = det(&cov);
                if d <= f64::EPSILON {
                    for (i, row) in cov.iter_mut().enumerate() {
                        row[i] += 1.0;
                    }
                    d = det(&cov);
                }
                Component {
                    weight: n / total,
                    mean,
                    inverse: inverse(&cov, d),
                    log_norm: -0.5 * d.ln(),
                }
            })
            .collect();
        Gmm { components }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `ln(weight_c * N(z | c))` up to the shared `-1.5 ln(2 pi)` constant.
    fn component_log(&self, c: usize, z: &Vec3) -> f64 {
        let comp = &self.components[c];
        if comp.weight == 0.0 {
            return f64::NEG_INFINITY;
        }
        let d = [z[0] - comp.mean[0], z[1] - comp.mean[1], z[2] - comp.mean[2]];
        let mut q = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                q += d[i] * comp.inverse[i][j] * d[j];
            }
        }
        comp.weight.ln() + comp.log_norm - 0.5 * q
    }

    /// Log-density of `z` up to an additive constant shared by all mixtures.
    pub fn log_likelihood(&self, z: &Vec3) -> f64 {
        let logs: Vec<f64> = (0..self.len()).map(|c| self.component_log(c, z)).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    }

    /// The component with the largest weighted density at `z`.
    pub fn most_likely_component(&self, z: &Vec3) -> usize {
        (0..self.len())
            .max_by(|&a, &b| {
                self.component_log(a, z)
                    .total_cmp(&self.component_log(b, z))
                    .then(b.cmp(&a))
            })
            .unwrap_or(0)
    }
}

fn kmeans(samples: &[Vec3], k: usize, rounds: usize) -> Vec<usize> {
    // deterministic farthest-point seeding starting from the sample nearest the mean
    let n = samples.len() as f64;
    let mean = (0..3).fold([0.0; 3], |mut m, i| {
        m[i] = samples.iter().map(|s| s[i]).sum::<f64>() / n;
        m
    });
    let first = (0..samples.len())
        .min_by(|&a, &b| sq_dist(&samples[a], &mean).total_cmp(&sq_dist(&samples[b], &mean)))
        .unwrap();
    let mut centers = vec![samples[first]];
    let mut nearest: Vec<f64> = samples.iter().map(|s| sq_dist(s, &centers[0])).collect();
    while centers.len() < k {
        let (far, &d) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        if d == 0.0 {
            break;
        }
        centers.push(samples[far]);
        for (nd, s) in nearest.iter_mut().zip(samples) {
            *nd = nd.min(sq_dist(s, &samples[far]));
        }
    }
    let mut labels = vec![0usize; samples.len()];
    for _ in 0..rounds {
        let mut changed = false;
        for (l, s) in labels.iter_mut().zip(samples) {
            let best = (0..centers.len())
                .min_by(|&a, &b| sq_dist(s, &centers[a]).total_cmp(&sq_dist(s, &centers[b])))
                .unwrap();
            changed |= *l != best;
            *l = best;
        }
        let mut sum = vec![[0.0; 3]; centers.len()];
        let mut cnt = vec![0usize; centers.len()];
        for (s, &l) in samples.iter().zip(&labels) {
            cnt[l] += 1;
            for i in 0..3 {
                sum[l][i] += s[i];
            }
        }
        for c in 0..centers.len() {
            if cnt[c] > 0 {
                centers[c] = sum[c].map(|v| v / cnt[c] as f64);
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = inverse(&m, det(&m));
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| m[i][k] * inv[k][j]).sum();
                assert!((v - (i == j) as u8 as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn separates_two_colour_clusters() {
        let mut s = Vec::new();
        for i in 0..50 {
            let e = (i % 5) as f64;
            s.push([200.0 + e, 10.0, 10.0 - e]);
            s.push([10.0, 10.0 + e, 200.0 - e]);
        }
        let g = Gmm::fit(&s, 2);
        assert_ne!(
            g.most_likely_component(&[200.0, 10.0, 10.0]),
            g.most_likely_component(&[10.0, 10.0, 200.0])
        );
        assert!(g.log_likelihood(&[200.0, 10.0, 10.0]) > g.log_likelihood(&[100.0, 100.0, 100.0]));
    }

    #[test]
    fn single_sample_and_constant_data_are_finite() {
        let g = Gmm::fit(&[[1.0, 2.0, 3.0]], 5);
        assert!(g.log_likelihood(&[1.0, 2.0, 3.0]).is_finite());
        let g = Gmm::fit(&vec![[7.0; 3]; 20], 5);
        assert!(g.log_likelihood(&[7.0; 3]).is_finite());
    }
}
