//! Synthetic datasets and the non-i.i.d. device split.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Flat labeled dataset (row-major features).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub features: Vec<T>,
    pub labels: Vec<usize>,
    pub feature_dim: usize,
    pub classes: usize,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_row(&self, i: usize) -> &[T] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }
}

/// One device's local training data.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceShard<T> {
    pub device_id: usize,
    pub feature_dim: usize,
    pub features: Vec<T>,
    pub labels: Vec<usize>,
}

/// Gaussian-blob classification task: class centers drawn from
/// `N(0, center_scale^2 I)`, samples from `N(center, noise_std^2 I)`,
/// shuffled, balanced across classes.
pub fn make_blobs<T: Real>(
    classes: usize,
    feature_dim: usize,
    per_class: usize,
    center_scale: f64,
    noise_std: f64,
    master_seed: u64,
) -> Dataset<T> {
    let mut rng = seed::rng_for(master_seed, "blobs", 0);
    let centers: Vec<f64> = (0..classes * feature_dim)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            g * center_scale
        })
        .collect();
    let n = classes * per_class;
    let mut features = vec![T::zero(); n * feature_dim];
    let mut labels = vec![0usize; n];
    for i in 0..n {
        let class = i % classes;
        labels[i] = class;
        for j in 0..feature_dim {
            let g: f64 = StandardNormal.sample(&mut rng);
            features[i * feature_dim + j] =
                T::from_f64_lossy(centers[class * feature_dim + j] + g * noise_std);
        }
    }
    // Shuffle rows so class order carries no information.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut ds = Dataset {
        features: vec![T::zero(); n * feature_dim],
        labels: vec![0; n],
        feature_dim,
        classes,
    };
    for (dst, &src) in order.iter().enumerate() {
        ds.labels[dst] = labels[src];
        ds.features[dst * feature_dim..(dst + 1) * feature_dim]
            .copy_from_slice(&features[src * feature_dim..(src + 1) * feature_dim]);
    }
    ds
}

/// Two-step non-i.i.d. split: a `random_frac` share of the dataset is dealt
/// to devices uniformly at random; the remainder is sorted by label and cut
/// into `k` equal shards, one per device. `random_frac = 1` degenerates to
/// an i.i.d. split, `random_frac = 0` to a pure label sort.
pub fn make_noniid_split<T: Real>(
    dataset: &Dataset<T>,
    k: usize,
    random_frac: f64,
    master_seed: u64,
) -> Result<Vec<DeviceShard<T>>> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: "must be at least 1".into(),
        });
    }
    if !(0.0..=1.0).contains(&random_frac) {
        return Err(Error::InvalidParameter {
            name: "random_frac",
            reason: format!("{random_frac} not in [0, 1]"),
        });
    }
    let n = dataset.len();
    if n == 0 || !n.is_multiple_of(k) {
        return Err(Error::DatasetTooSmall {
            reason: format!("{n} samples cannot be split evenly across {k} devices"),
        });
    }
    // Random share rounded down to a multiple of k so both parts split evenly.
    let n_random = ((random_frac * n as f64).floor() as usize / k) * k;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng_for(master_seed, "split", 0);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let (random_part, rest) = order.split_at(n_random);
    let mut sorted_rest: Vec<usize> = rest.to_vec();
    sorted_rest.sort_by_key(|&i| (dataset.labels[i], i));

    let per_random = n_random / k;
    let per_sorted = sorted_rest.len() / k;
    let f = dataset.feature_dim;
    let mut shards = Vec::with_capacity(k);
    for device in 0..k {
        let mut rows: Vec<usize> = Vec::with_capacity(per_random + per_sorted);
        rows.extend_from_slice(&random_part[device * per_random..(device + 1) * per_random]);
        rows.extend_from_slice(&sorted_rest[device * per_sorted..(device + 1) * per_sorted]);
        let mut features = Vec::with_capacity(rows.len() * f);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in &rows {
            features.extend_from_slice(dataset.feature_row(r));
            labels.push(dataset.labels[r]);
        }
        shards.push(DeviceShard {
            device_id: device,
            feature_dim: f,
            features,
            labels,
        });
    }
    Ok(shards)
}

/// Mean earth-mover distance (unit ground metric) between each device's
/// label distribution and the global one. Zero for a perfectly i.i.d. split.
pub fn label_emd<T: Real>(shards: &[DeviceShard<T>], classes: usize) -> f64 {
    let mut global = vec![0.0f64; classes];
    let mut total = 0usize;
    for shard in shards {
        for &y in &shard.labels {
            global[y] += 1.0;
        }
        total += shard.labels.len();
    }
    for g in global.iter_mut() {
        *g /= total as f64;
    }
    let mut acc = 0.0;
    for shard in shards {
        let mut local = vec![0.0f64; classes];
        for &y in &shard.labels {
            local[y] += 1.0;
        }
        let n = shard.labels.len() as f64;
        let dist: f64 = local
            .iter()
            .zip(&global)
            .map(|(l, g)| (l / n - g).abs())
            .sum();
        acc += dist;
    }
    acc / shards.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_dataset() -> Dataset<f64> {
        // 8 samples, 2 classes, 1 feature; labels alternate.
        Dataset {
            features: (0..8).map(|i| i as f64).collect(),
            labels: vec![0, 1, 0, 1, 0, 1, 0, 1],
            feature_dim: 1,
            classes: 2,
        }
    }

    #[test]
    fn iid_split_is_even() {
        let ds = toy_dataset();
        let shards = make_noniid_split(&ds, 4, 1.0, 3).unwrap();
        assert_eq!(shards.len(), 4);
        for s in &shards {
            assert_eq!(s.labels.len(), 2);
        }
    }

    #[test]
    fn pure_sort_gives_single_class_devices() {
        let ds = toy_dataset();
        let shards = make_noniid_split(&ds, 2, 0.0, 3).unwrap();
        for s in &shards {
            let first = s.labels[0];
            assert!(s.labels.iter().all(|&y| y == first), "{:?}", s.labels);
        }
    }

    #[test]
    fn uneven_split_is_rejected() {
        let ds = toy_dataset();
        assert!(matches!(
            make_noniid_split(&ds, 3, 0.5, 0),
            Err(Error::DatasetTooSmall { .. })
        ));
    }

    #[test]
    fn noniid_split_has_larger_label_emd_than_iid() {
        let ds = make_blobs::<f64>(3, 4, 120, 2.0, 1.0, 9);
        let iid = make_noniid_split(&ds, 12, 1.0, 5).unwrap();
        let skewed = make_noniid_split(&ds, 12, 0.2, 5).unwrap();
        let e_iid = label_emd(&iid, 3);
        let e_skew = label_emd(&skewed, 3);
        assert!(
            e_skew > e_iid,
            "non-iid EMD {e_skew} should exceed iid EMD {e_iid}"
        );
    }

    #[test]
    fn blobs_are_balanced_and_deterministic() {
        let a = make_blobs::<f64>(3, 5, 40, 2.0, 0.5, 7);
        let b = make_blobs::<f64>(3, 5, 40, 2.0, 0.5, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 120);
        for c in 0..3 {
            assert_eq!(a.labels.iter().filter(|&&y| y == c).count(), 40);
        }
    }
}
