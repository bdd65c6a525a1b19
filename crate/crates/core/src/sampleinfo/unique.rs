//! Exact check, on an enumerable stochastic algorithm, that leave-one-out
//! sample information upper-bounds unique sample information on average
//! over the left-out example.

/// `Q(w | S) ∝ exp(−β (w/(W−1) − mean(S)/(Z−1))²)` on `w ∈ 0..W`,
/// examples `z ∈ 0..Z` drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyAlgorithm {
    pub weights: usize,
    pub examples: usize,
    pub beta: f64,
}

impl ToyAlgorithm {
    pub fn posterior(&self, s: &[usize]) -> Vec<f64> {
        let center = if s.is_empty() {
            0.5
        } else {
            s.iter().sum::<usize>() as f64 / s.len() as f64 / (self.examples - 1).max(1) as f64
        };
        let mut q: Vec<f64> = (0..self.weights)
            .map(|w| {
                let x = w as f64 / (self.weights - 1).max(1) as f64;
                (-self.beta * (x - center).powi(2)).exp()
            })
            .collect();
        let z: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= z);
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniqueInfoCheck {
    /// `E_{Zᵢ} KL(Q_{W|S} ‖ Q_{W|S₋ᵢ})`.
    pub sample_info: f64,
    /// `E_{Zᵢ} KL(Q_{W|S} ‖ P_{W|S₋ᵢ})` with `P_{W|S₋ᵢ} = E_{Z′} Q_{W|S₋ᵢ ∪ Z′}`.
    pub unique_info: f64,
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Both expectations for removing position `i` from `s_minus_i ∪ {Zᵢ}`.
pub fn unique_info_check(alg: &ToyAlgorithm, s_minus_i: &[usize], i: usize) -> UniqueInfoCheck {
    let with = |z: usize| {
        let mut s = s_minus_i.to_vec();
        s.insert(i.min(s.len()), z);
        alg.posterior(&s)
    };
    let q_minus = alg.posterior(s_minus_i);
    let zs = alg.examples;
    let posts: Vec<Vec<f64>> = (0..zs).map(with).collect();
    let mut marginal = vec![0.0; alg.weights];
    for p in &posts {
        for (m, v) in marginal.iter_mut().zip(p) {
            *m += v / zs as f64;
        }
    }
    let sample_info = posts.iter().map(|p| kl(p, &q_minus)).sum::<f64>() / zs as f64;
    let unique_info = posts.iter().map(|p| kl(p, &marginal)).sum::<f64>() / zs as f64;
    UniqueInfoCheck { sample_info, unique_info }
}
