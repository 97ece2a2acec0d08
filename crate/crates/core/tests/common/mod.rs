//! Brute-force oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use goen::feature_store::FeatureSet;
use goen::head::{bce_soft, CalibrationHead, CueVector, PARAM_COUNT};
use goen::rng::Xoshiro256;
use goen::synthetic::gaussian;
use ndarray::Array2;

/// Pairwise count: OOD above ID scores 1, equal scores 1/2.
pub fn auroc_oracle(id: &[f64], ood: &[f64]) -> f64 {
    let mut twice = 0u64;
    for &o in ood {
        for &i in id {
            if o > i {
                twice += 2;
            } else if o == i {
                twice += 1;
            }
        }
    }
    twice as f64 / 2.0 / (id.len() as f64 * ood.len() as f64)
}

fn distinct(id: &[f64], ood: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = id.iter().chain(ood).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

fn count_at_least(xs: &[f64], tau: f64) -> usize {
    xs.iter().filter(|&&x| x >= tau).count()
}

/// Scans every candidate threshold from the top; the first whose TPR
/// reaches the target is the largest such threshold.
pub fn fpr_oracle(id: &[f64], ood: &[f64], target: f64) -> f64 {
    for &tau in distinct(id, ood).iter().rev() {
        if count_at_least(ood, tau) as f64 / ood.len() as f64 >= target {
            return count_at_least(id, tau) as f64 / id.len() as f64;
        }
    }
    unreachable!("the lowest threshold has TPR 1")
}

/// Maximises TPR − FPR (as the integer tp·n_id − fp·n_ood) over every
/// candidate threshold; scanning upward with a strict compare keeps the
/// smallest maximiser.
pub fn youden_oracle(id: &[f64], ood: &[f64]) -> f64 {
    let (n_id, n_ood) = (id.len() as i64, ood.len() as i64);
    let mut best: Option<(i64, i64, i64)> = None;
    for tau in distinct(id, ood) {
        let tp = count_at_least(ood, tau) as i64;
        let fp = count_at_least(id, tau) as i64;
        let j = tp * n_id - fp * n_ood;
        if best.is_none_or(|(b, _, _)| j > b) {
            best = Some((j, tp, fp));
        }
    }
    let (_, tp, fp) = best.unwrap();
    (tp + n_id - fp) as f64 / (n_id + n_ood) as f64
}

/// Random score lists of length 1..=200, with ties on coarse grids in about
/// half the instances.
pub fn random_instance(rng: &mut Xoshiro256) -> (Vec<f64>, Vec<f64>) {
    let n_id = 1 + rng.below(200) as usize;
    let n_ood = 1 + rng.below(200) as usize;
    let shift = rng.uniform(-1.0, 2.0);
    let grid = if rng.below(2) == 0 { Some(2 + rng.below(30)) } else { None };
    let mut draw = |offset: f64| {
        let v = rng.unit_f64() + offset;
        match grid {
            Some(g) => (v * g as f64).floor(),
            None => v,
        }
    };
    let id: Vec<f64> = (0..n_id).map(|_| draw(0.0)).collect();
    let ood: Vec<f64> = (0..n_ood).map(|_| draw(shift)).collect();
    (id, ood)
}

pub fn random_cue(rng: &mut Xoshiro256) -> CueVector {
    CueVector::new(rng.uniform(0.0, 4.0), rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.3)).unwrap()
}

pub fn random_labelled(rng: &mut Xoshiro256, n: usize, d: usize, c: usize) -> FeatureSet {
    let centres: Vec<Vec<f64>> = (0..c).map(|_| (0..d).map(|_| 2.0 * gaussian(rng)).collect()).collect();
    let labels: Vec<i32> = (0..n).map(|i| (i % c) as i32).collect();
    let feats = Array2::from_shape_fn((n, d), |(i, j)| (centres[i % c][j] + gaussian(rng)) as f32);
    FeatureSet::new("r", feats, Some(labels), None, c).unwrap()
}

/// Normalised rows, computed directly in f64.
pub fn unit_rows(set: &FeatureSet) -> Vec<Vec<f64>> {
    (0..set.len())
        .map(|i| {
            let row: Vec<f64> = set.row(i).iter().map(|&v| v as f64).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            row.iter().map(|v| v / norm).collect()
        })
        .collect()
}

/// Tied covariance with plain loops: per-class means, then the summed outer
/// products divided by N, plus εI.
pub fn naive_covariance(set: &FeatureSet, eps: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = unit_rows(set);
    let labels = set.class_labels().unwrap();
    let (n, d, c) = (set.len(), set.dim(), set.num_classes());
    let mut means = vec![vec![0.0; d]; c];
    let mut counts = vec![0usize; c];
    for (r, &y) in rows.iter().zip(&labels) {
        counts[y] += 1;
        for j in 0..d {
            means[y][j] += r[j];
        }
    }
    for k in 0..c {
        for j in 0..d {
            means[k][j] /= counts[k] as f64;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let mut s = 0.0;
            for i in 0..n {
                let y = labels[i];
                s += (rows[i][a] - means[y][a]) * (rows[i][b] - means[y][b]);
            }
            cov[a][b] = s / n as f64;
        }
        cov[a][a] += eps;
    }
    (means, cov)
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..d).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..d {
        let piv = (col..d).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..d {
            if r != col {
                let f = a[r][col];
                for k in 0..2 * d {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
    }
    a.into_iter().map(|r| r[d..].to_vec()).collect()
}

pub fn quad(prec: &[Vec<f64>], x: &[f64], mu: &[f64]) -> f64 {
    let d = x.len();
    let diff: Vec<f64> = (0..d).map(|j| x[j] - mu[j]).collect();
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            s += diff[a] * prec[a][b] * diff[b];
        }
    }
    s
}

/// Forward pass written from the file layout: W1 (64×3), b1, W2 (32×64), b2,
/// W3 (1×32), b3. Returns the output and every hidden pre-activation.
pub fn oracle_forward(p: &[f64], m: &[f64; 3]) -> (f64, Vec<f64>) {
    let (w1, b1) = (0, 192);
    let (w2, b2) = (256, 256 + 2048);
    let (w3, b3) = (2336, 2368);
    let mut pre = Vec::with_capacity(96);
    let mut h1 = vec![0.0; 64];
    for j in 0..64 {
        let z = (0..3).map(|i| p[w1 + 3 * j + i] * m[i]).sum::<f64>() + p[b1 + j];
        pre.push(z);
        h1[j] = z.max(0.0);
    }
    let mut h2 = vec![0.0; 32];
    for k in 0..32 {
        let z = (0..64).map(|j| p[w2 + 64 * k + j] * h1[j]).sum::<f64>() + p[b2 + k];
        pre.push(z);
        h2[k] = z.max(0.0);
    }
    let a = (0..32).map(|k| p[w3 + k] * h2[k]).sum::<f64>() + p[b3];
    (1.0 / (1.0 + (-a).exp()), pre)
}

pub struct GradCheck {
    pub max_rel: f64,
    pub triples: usize,
}

/// Relative error per parameter is `|g − fd| / max(|g|, |fd|, 1e-7)`: the
/// floor keeps components that are zero up to rounding from dividing noise
/// by noise.
pub fn gradient_check(seed: u64, triples: usize) -> GradCheck {
    let mut rng = Xoshiro256::seed_from_u64(seed);
    let h = 1e-4;
    let mut max_rel = 0.0f64;
    let mut accepted = 0;
    while accepted < triples {
        let mut head = CalibrationHead::init(rng.next());
        for v in head.params_mut().iter_mut() {
            *v += 0.05 * rng.uniform(-1.0, 1.0);
        }
        let m = random_cue(&mut rng);
        let t = rng.uniform(0.05, 0.95);
        let (u, pre) = oracle_forward(head.params(), &m.as_array());
        // A step of h moves a pre-activation by at most h·|input| < 1e-3 here,
        // so rejected triples are exactly those that could straddle a kink.
        if pre.iter().any(|z| z.abs() < 1e-3) {
            continue;
        }
        assert!((head.forward(&m).unwrap() - u).abs() < 1e-12);
        let grad = head.backward(&m, t).unwrap();
        for k in 0..PARAM_COUNT {
            let orig = head.params()[k];
            head.params_mut()[k] = orig + h;
            let up = bce_soft(oracle_forward(head.params(), &m.as_array()).0, t);
            head.params_mut()[k] = orig - h;
            let down = bce_soft(oracle_forward(head.params(), &m.as_array()).0, t);
            head.params_mut()[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-7);
            max_rel = max_rel.max(rel);
        }
        accepted += 1;
    }
    GradCheck { max_rel, triples: accepted }
}
