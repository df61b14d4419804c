//! Tiny CART classifier (Gini, exhaustive midpoint thresholds) used as a
//! separability oracle on image-mean feature vectors.

pub enum Tree {
    Leaf(usize),
    Split { feature: usize, threshold: f64, left: Box<Tree>, right: Box<Tree> },
}

fn counts(y: &[usize], idx: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &i in idx {
        c[y[i]] += 1;
    }
    c
}

fn gini(c: &[usize]) -> f64 {
    let n: usize = c.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - c.iter().map(|&v| (v as f64 / n).powi(2)).sum::<f64>()
}

fn majority(c: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in c.iter().enumerate() {
        if v > c[best] {
            best = i;
        }
    }
    best
}

impl Tree {
    pub fn fit(x: &[Vec<f64>], y: &[usize], classes: usize, depth: usize) -> Tree {
        let idx: Vec<usize> = (0..x.len()).collect();
        Self::grow(x, y, &idx, classes, depth)
    }

    fn grow(x: &[Vec<f64>], y: &[usize], idx: &[usize], k: usize, depth: usize) -> Tree {
        let c = counts(y, idx, k);
        let parent = gini(&c);
        if depth == 0 || parent == 0.0 {
            return Tree::Leaf(majority(&c));
        }
        let n = idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..x[idx[0]].len() {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
            let mut left = vec![0; k];
            let mut right = c.clone();
            for w in 0..order.len() - 1 {
                let l = y[order[w]];
                left[l] += 1;
                right[l] -= 1;
                let (a, b) = (x[order[w]][f], x[order[w + 1]][f]);
                if a == b {
                    continue;
                }
                let nl = (w + 1) as f64;
                let score = (nl * gini(&left) + (n - nl) * gini(&right)) / n;
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, 0.5 * (a + b)));
                }
            }
        }
        match best {
            Some((score, feature, threshold)) if score < parent => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
                Tree::Split {
                    feature,
                    threshold,
                    left: Box::new(Self::grow(x, y, &l, k, depth - 1)),
                    right: Box::new(Self::grow(x, y, &r, k, depth - 1)),
                }
            }
            _ => Tree::Leaf(majority(&c)),
        }
    }

    pub fn predict(&self, v: &[f64]) -> usize {
        match self {
            Tree::Leaf(c) => *c,
            Tree::Split { feature, threshold, left, right } => {
                if v[*feature] <= *threshold {
                    left.predict(v)
                } else {
                    right.predict(v)
                }
            }
        }
    }
}
