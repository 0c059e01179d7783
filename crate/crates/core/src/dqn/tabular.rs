//! Tabular Q-learning, kept as a reference for the deep variant's update.

#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, q: f64) {
        self.values[s * self.n_actions + a] = q;
    }

    pub fn max(&self, s: usize) -> f64 {
        let row = &self.values[s * self.n_actions..(s + 1) * self.n_actions];
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `Q(s,a) += α(r + γ·max Q(s',·) − Q(s,a))`. A terminal `s_next` of `None`
/// bootstraps on zero.
pub fn q_learning_update(
    q: &mut QTable,
    s: usize,
    a: usize,
    r: f64,
    s_next: Option<usize>,
    alpha: f64,
    gamma: f64,
) {
    let bootstrap = s_next.map_or(0.0, |sn| q.max(sn));
    let old = q.get(s, a);
    q.set(s, a, old + alpha * (r + gamma * bootstrap - old));
}
