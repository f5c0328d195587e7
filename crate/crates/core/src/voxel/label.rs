use std::collections::VecDeque;

use super::{BinaryMask, Dims};

/// Face-connected (6-neighbourhood) component labels of a mask.
///
/// Label 0 is background. Components are numbered `1..=count` in order of
/// their smallest linear voxel index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentLabeling {
    dims: Dims,
    labels: Vec<u32>,
    sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    /// `sizes()[k]` is the voxel count of component `k + 1`.
    pub fn component_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Linear indices of every voxel in each component, grouped by label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self.sizes.iter().map(|&n| Vec::with_capacity(n)).collect();
        for (i, &l) in self.labels.iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push(i);
            }
        }
        out
    }
}

pub fn label_components(mask: &BinaryMask) -> ComponentLabeling {
    let dims = mask.dims();
    let mut labels = vec![0u32; dims.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..dims.len() {
        if !mask.is_on(start) || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            dims.for_each_face_neighbor(i, |n| {
                if mask.is_on(n) && labels[n] == 0 {
                    labels[n] = id;
                    queue.push_back(n);
                }
            });
        }
        sizes.push(size);
    }

    ComponentLabeling {
        dims,
        labels,
        sizes,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn mask(dims: Dims, on: &[[usize; 3]]) -> BinaryMask {
        BinaryMask::from_indices(dims, on.iter().map(|&[z, y, x]| dims.index(z, y, x)))
    }

    #[test]
    fn empty_mask_has_no_components() {
        let l = label_components(&mask(Dims::new(3, 3, 3), &[]));
        assert_eq!(l.component_count(), 0);
        assert!(l.labels().iter().all(|&v| v == 0));
    }

    #[test]
    fn face_neighbors_join() {
        let l = label_components(&mask(Dims::new(3, 3, 3), &[[1, 1, 1], [1, 1, 2]]));
        assert_eq!(l.component_count(), 1);
        assert_eq!(l.component_sizes(), &[2]);
    }

    #[test]
    fn corner_contact_does_not_join() {
        let l = label_components(&mask(Dims::new(3, 3, 3), &[[0, 0, 0], [1, 1, 1]]));
        assert_eq!(l.component_count(), 2);
        // edge contact is not face contact either
        let l = label_components(&mask(Dims::new(3, 3, 3), &[[0, 0, 0], [0, 1, 1]]));
        assert_eq!(l.component_count(), 2);
    }

    #[test]
    fn labels_ordered_by_first_voxel() {
        let d = Dims::new(1, 1, 5);
        let l = label_components(&mask(d, &[[0, 0, 4], [0, 0, 0], [0, 0, 2]]));
        assert_eq!(l.labels(), &[1, 0, 2, 0, 3]);
    }

    /// Independent oracle: union-find over every face-adjacent pair.
    fn union_find_partition(dims: Dims, bits: &[bool]) -> Vec<usize> {
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut parent: Vec<usize> = (0..bits.len()).collect();
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    let i = (z * dims.ny + y) * dims.nx + x;
                    if !bits[i] {
                        continue;
                    }
                    let mut pairs = Vec::new();
                    if x + 1 < dims.nx {
                        pairs.push(i + 1);
                    }
                    if y + 1 < dims.ny {
                        pairs.push(i + dims.nx);
                    }
                    if z + 1 < dims.nz {
                        pairs.push(i + dims.nx * dims.ny);
                    }
                    for j in pairs {
                        if bits[j] {
                            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                            parent[a.max(b)] = a.min(b);
                        }
                    }
                }
            }
        }
        (0..bits.len()).map(|i| find(&mut parent, i)).collect()
    }

    proptest! {
        #[test]
        fn agrees_with_union_find(
            (nz, ny, nx) in (1usize..=8, 1usize..=8, 1usize..=8),
            density in 0.1f64..0.7,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let dims = Dims::new(nz, ny, nx);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let bits: Vec<bool> = (0..dims.len()).map(|_| rng.random_bool(density)).collect();
            let roots = union_find_partition(dims, &bits);
            let l = label_components(&BinaryMask::new(dims, bits.clone()).unwrap());

            let mut distinct: Vec<usize> = (0..bits.len()).filter(|&i| bits[i]).map(|i| roots[i]).collect();
            distinct.sort_unstable();
            distinct.dedup();
            prop_assert_eq!(l.component_count(), distinct.len());
            prop_assert_eq!(l.component_sizes().iter().sum::<usize>(), bits.iter().filter(|&&b| b).count());
            for i in 0..bits.len() {
                prop_assert_eq!(l.label(i) == 0, !bits[i]);
                for j in (i + 1)..bits.len() {
                    if bits[i] && bits[j] {
                        prop_assert_eq!(l.label(i) == l.label(j), roots[i] == roots[j]);
                    }
                }
            }
        }
    }
}
