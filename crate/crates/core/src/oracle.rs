//! Dense reference implementation of the update rule on `n` agents.
//!
//! Deliberately naive: neighborhoods are found by scanning a full adjacency
//! matrix. It shares no code with [`crate::dynamics`], only the summation
//! order (ascending agent index, one division at the end), so the two can be
//! compared bit for bit.

#[derive(Debug, Clone, PartialEq)]
pub struct DenseInstance {
    /// Symmetric, zero diagonal.
    pub adjacency: Vec<Vec<bool>>,
    /// `n` rows of `d` coordinates.
    pub opinions: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub eps: f64,
    /// Pair mode when present: disjoint index pairs.
    pub matching: Option<Vec<(usize, usize)>>,
}

impl DenseInstance {
    pub fn n(&self) -> usize {
        self.opinions.len()
    }

    pub fn is_valid(&self) -> bool {
        let n = self.n();
        self.adjacency.len() == n
            && self.alpha.len() == n
            && (0..n).all(|i| {
                self.adjacency[i].len() == n
                    && !self.adjacency[i][i]
                    && (0..n).all(|j| self.adjacency[i][j] == self.adjacency[j][i])
            })
    }
}

fn close(a: &[f64], b: &[f64], eps: f64) -> bool {
    let mut s = 0.0;
    for c in 0..a.len() {
        let d = a[c] - b[c];
        s += d * d;
    }
    s.sqrt() <= eps
}

/// One application of the update rule.
pub fn naive_step(inst: &DenseInstance) -> Vec<Vec<f64>> {
    let n = inst.n();
    let x = &inst.opinions;
    let mut out = x.clone();
    for i in 0..n {
        let mut members = vec![false; n];
        members[i] = true;
        match &inst.matching {
            None => {
                for j in 0..n {
                    if inst.adjacency[i][j] && close(&x[i], &x[j], inst.eps) {
                        members[j] = true;
                    }
                }
            }
            Some(pairs) => {
                for &(p, q) in pairs {
                    let other = if p == i {
                        q
                    } else if q == i {
                        p
                    } else {
                        continue;
                    };
                    if inst.adjacency[i][other] && close(&x[i], &x[other], inst.eps) {
                        members[other] = true;
                    }
                }
            }
        }
        let count = members.iter().filter(|&&m| m).count();
        if count == 1 && inst.matching.is_some() {
            continue;
        }
        let d = x[i].len();
        for c in 0..d {
            let mut sum = 0.0;
            for j in 0..n {
                if members[j] {
                    sum += x[j][c];
                }
            }
            let mean = sum / count as f64;
            out[i][c] = x[i][c] + (1.0 - inst.alpha[i]) * (mean - x[i][c]);
        }
    }
    out
}
