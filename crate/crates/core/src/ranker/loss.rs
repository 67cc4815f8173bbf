//! Pairwise logistic loss over (positive, negative) document pairs:
//! `L(a) = Σ −ln σ(a_p − a_n)`.

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `−ln σ(d) = ln(1 + e^{−d})`, written so that neither branch overflows.
pub fn neg_log_sigmoid(d: f64) -> f64 {
    (-d).max(0.0) + (-d.abs()).exp().ln_1p()
}

pub fn pair_logit_loss(scores: &[f64], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(p, n)| neg_log_sigmoid(scores[p] - scores[n])).sum()
}

/// First and second derivatives of the pair loss with respect to each document score.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

pub fn pair_logit_gradients(scores: &[f64], pairs: &[(usize, usize)]) -> PairGradients {
    let mut grad = vec![0.0; scores.len()];
    let mut hess = vec![0.0; scores.len()];
    for &(p, n) in pairs {
        let d = scores[p] - scores[n];
        // 1 − σ(d) = σ(−d), computed directly to keep precision for large d
        let miss = sigmoid(-d);
        let h = sigmoid(d) * miss;
        grad[p] -= miss;
        grad[n] += miss;
        hess[p] += h;
        hess[n] += h;
    }
    PairGradients { grad, hess }
}
