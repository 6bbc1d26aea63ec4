//! Projecting conflicting gradients.
//!
//! Each task gradient is visited against every other task in a seeded random
//! order; whenever its running projected copy has a negative dot product with
//! the other task's original gradient, the component along that gradient is
//! removed. The update direction is the sum of the projected gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One flat gradient per task, all of the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskGradients {
    grads: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl TaskGradients {
    pub fn new(grads: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if grads.is_empty() {
            return Err(Error::contract("at least one task gradient is required"));
        }
        if labels.len() != grads.len() {
            return Err(Error::contract("one label per task gradient"));
        }
        let p = grads[0].len();
        if let Some(bad) = grads.iter().position(|g| g.len() != p) {
            return Err(Error::contract(format!(
                "task gradient {bad} has length {}, expected {p}",
                grads[bad].len()
            )));
        }
        Ok(Self { grads, labels })
    }

    /// Labels `task0`, `task1`, …
    pub fn unlabeled(grads: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..grads.len()).map(|i| format!("task{i}")).collect();
        Self::new(grads, labels)
    }

    pub fn num_tasks(&self) -> usize {
        self.grads.len()
    }

    pub fn dim(&self) -> usize {
        self.grads[0].len()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.grads[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Plain sum `Σᵢ Δᵢ`, accumulated in task order.
    pub fn sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for g in &self.grads {
            for (o, v) in out.iter_mut().zip(g) {
                *o += v;
            }
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`; `None` when either vector has
/// zero norm. Entries are rescaled by their largest magnitude first so huge
/// gradients do not overflow.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let sa = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sb = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sa == 0.0 || sb == 0.0 {
        return None;
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x / sa, y / sb);
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    Some((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// Update direction and what the surgery did to get there.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub update: Vec<f64>,
    /// Projected gradient of every task.
    pub projected: Vec<Vec<f64>>,
    /// Number of projection steps applied.
    pub projections: usize,
    /// Visiting order of the other tasks, per task.
    pub orders: Vec<Vec<usize>>,
}

/// Removes from `g` its component along `onto` if the two conflict
/// (negative dot product). Returns whether a projection happened.
pub fn project_if_conflicting(g: &mut [f64], onto: &[f64]) -> bool {
    let d = dot(g, onto);
    if d >= 0.0 {
        return false;
    }
    let nn = dot(onto, onto);
    if nn == 0.0 {
        return false;
    }
    let c = d / nn;
    for (x, y) in g.iter_mut().zip(onto) {
        *x -= c * y;
    }
    true
}

pub fn project_conflicting(grads: &TaskGradients, seed: u64) -> Projection {
    let k = grads.num_tasks();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut projected = Vec::with_capacity(k);
    let mut orders = Vec::with_capacity(k);
    let mut projections = 0;
    for i in 0..k {
        let mut gi = grads.grads[i].clone();
        let mut order: Vec<usize> = (0..k).filter(|&j| j != i).collect();
        order.shuffle(&mut rng);
        for &j in &order {
            if project_if_conflicting(&mut gi, &grads.grads[j]) {
                projections += 1;
            }
        }
        projected.push(gi);
        orders.push(order);
    }
    let mut update = vec![0.0; grads.dim()];
    for g in &projected {
        for (o, v) in update.iter_mut().zip(g) {
            *o += v;
        }
    }
    Projection {
        update,
        projected,
        projections,
        orders,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tg(v: Vec<Vec<f64>>) -> TaskGradients {
        TaskGradients::unlabeled(v).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), Some(0.0));
        assert!((cosine_similarity(&[1.0, 1.0], &[-1.0, -1.0]).unwrap() + 1.0).abs() < 1e-15);
        let c = cosine_similarity(&[1.0, 0.0], &[-1.0, 1.0]).unwrap();
        assert!((c + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]), None);
        let big = 1e300;
        assert!(cosine_similarity(&[big, big], &[big, big]).unwrap() <= 1.0);
    }

    #[test]
    fn orthogonal_is_untouched() {
        let p = project_conflicting(&tg(vec![vec![1.0, 0.0], vec![0.0, 1.0]]), 0);
        assert_eq!(p.update, vec![1.0, 1.0]);
        assert_eq!(p.projections, 0);
        assert_eq!(p.projected, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn worked_example() {
        let p = project_conflicting(&tg(vec![vec![1.0, 0.0], vec![-1.0, 1.0]]), 0);
        assert_eq!(p.projected[0], vec![0.5, 0.5]);
        assert_eq!(p.projected[1], vec![0.0, 1.0]);
        assert_eq!(p.update, vec![0.5, 1.5]);
        assert_eq!(p.projections, 2);
    }

    #[test]
    fn antiparallel_cancels() {
        let p = project_conflicting(&tg(vec![vec![2.0, -3.0, 1.0], vec![-2.0, 3.0, -1.0]]), 5);
        assert!(p.update.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_gradient_never_conflicts() {
        let p = project_conflicting(&tg(vec![vec![0.0, 0.0], vec![-1.0, 1.0]]), 1);
        assert_eq!(p.update, vec![-1.0, 1.0]);
        assert_eq!(p.projections, 0);
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(TaskGradients::unlabeled(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(TaskGradients::unlabeled(vec![]).is_err());
    }

    #[test]
    fn orders_cover_other_tasks_once() {
        let g = tg((0..5).map(|i| vec![i as f64 - 2.0, 1.0]).collect());
        let p = project_conflicting(&g, 99);
        for (i, o) in p.orders.iter().enumerate() {
            let mut sorted = o.clone();
            sorted.sort();
            let expected: Vec<usize> = (0..5).filter(|&j| j != i).collect();
            assert_eq!(sorted, expected);
        }
        assert_eq!(p, project_conflicting(&g, 99));
    }
}
