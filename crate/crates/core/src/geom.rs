//! Planar geometry helpers shared by variography and kriging.

#[inline]
pub fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn max_pair_distance(coords: &[[f64; 2]]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            m = m.max(dist(coords[i], coords[j]));
        }
    }
    m
}

/// Sites sharing exact coordinates merged into one location carrying the mean value.
#[derive(Debug, Clone, PartialEq)]
pub struct Collapsed {
    pub coords: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    /// Group index of every input site.
    pub group_of: Vec<usize>,
    pub group_sizes: Vec<usize>,
}

impl Collapsed {
    pub fn has_duplicates(&self) -> bool {
        self.coords.len() < self.group_of.len()
    }
}

pub fn collapse_duplicates(coords: &[[f64; 2]], values: &[f64]) -> Collapsed {
    let mut index: std::collections::HashMap<(u64, u64), usize> = Default::default();
    let mut out = Collapsed {
        coords: Vec::new(),
        values: Vec::new(),
        group_of: Vec::new(),
        group_sizes: Vec::new(),
    };
    for (c, &v) in coords.iter().zip(values) {
        // +0.0 normalizes -0.0 so both hash alike.
        let key = ((c[0] + 0.0).to_bits(), (c[1] + 0.0).to_bits());
        let g = *index.entry(key).or_insert_with(|| {
            out.coords.push(*c);
            out.values.push(0.0);
            out.group_sizes.push(0);
            out.coords.len() - 1
        });
        out.values[g] += v;
        out.group_sizes[g] += 1;
        out.group_of.push(g);
    }
    for (v, &n) in out.values.iter_mut().zip(&out.group_sizes) {
        *v /= n as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapse_averages_duplicates() {
        let c = collapse_duplicates(&[[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]], &[1.0, 5.0, 3.0]);
        assert_eq!(c.coords, vec![[0.0, 0.0], [1.0, 0.0]]);
        assert_eq!(c.values, vec![2.0, 5.0]);
        assert_eq!(c.group_of, vec![0, 1, 0]);
        assert!(c.has_duplicates());
    }
}
