//! Lagrange interpolation in the parameter variable.

use crate::error::{Error, Result};

/// Number of uniform samples used for Lebesgue constant estimates.
pub const LEBESGUE_SAMPLES: usize = 10_001;

/// Distinct parameter nodes together with an enclosing interval.
///
/// Node order is kept as given; it fixes the correspondence with snapshots,
/// field slices and training targets.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamNodeSet {
    nodes: Vec<f64>,
    interval: (f64, f64),
}

impl ParamNodeSet {
    /// Node set whose interval is the hull of the nodes.
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        let lo = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::with_interval(nodes, (lo, hi))
    }

    pub fn with_interval(nodes: Vec<f64>, interval: (f64, f64)) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidSettings("empty parameter node set".into()));
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter nodes {nodes:?}")));
        }
        for (i, a) in nodes.iter().enumerate() {
            if nodes[..i].contains(a) {
                return Err(Error::DuplicateNode(*a));
            }
        }
        let (lo, hi) = interval;
        if !(lo <= hi) || nodes.iter().any(|&v| v < lo || v > hi) {
            return Err(Error::InvalidSettings(format!(
                "interval [{lo}, {hi}] does not contain nodes {nodes:?}"
            )));
        }
        Ok(Self { nodes, interval })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn interval_length(&self) -> f64 {
        self.interval.1 - self.interval.0
    }

    /// Same nodes with the interval enlarged to also contain `points`.
    pub fn widened(&self, points: &[f64]) -> Self {
        let (mut lo, mut hi) = self.interval;
        for &p in points {
            lo = lo.min(p);
            hi = hi.max(p);
        }
        Self { nodes: self.nodes.clone(), interval: (lo, hi) }
    }

    /// Indices of the nodes in increasing order.
    pub fn sorted_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.nodes[a].total_cmp(&self.nodes[b]));
        idx
    }

    /// Barycentric weights `1 / prod_{k != j} (x_j - x_k)`.
    fn barycentric(&self) -> Vec<f64> {
        let x = &self.nodes;
        (0..x.len())
            .map(|j| {
                1.0 / (0..x.len()).filter(|&k| k != j).map(|k| x[j] - x[k]).product::<f64>()
            })
            .collect()
    }
}

/// Lagrange basis values at `mu`, in node order, via the barycentric formula.
pub fn lagrange_weights(nodes: &ParamNodeSet, mu: f64) -> Vec<f64> {
    let x = nodes.nodes();
    if let Some(j) = x.iter().position(|&v| v == mu) {
        let mut e = vec![0.0; x.len()];
        e[j] = 1.0;
        return e;
    }
    let w = nodes.barycentric();
    let terms: Vec<f64> = w.iter().zip(x).map(|(wj, xj)| wj / (mu - xj)).collect();
    let denom: f64 = terms.iter().sum();
    terms.iter().map(|t| t / denom).collect()
}

/// Maximum of the Lebesgue function over the node set's interval: dense
/// uniform sampling plus the interval end points and nodes, refined by a
/// golden-section search between consecutive break points (the function is
/// smooth there with a single interior maximum).
pub fn lebesgue_constant(nodes: &ParamNodeSet) -> f64 {
    if nodes.len() == 1 {
        return 1.0;
    }
    let (lo, hi) = nodes.interval();
    let lebesgue = |mu: f64| lagrange_weights(nodes, mu).iter().map(|l| l.abs()).sum::<f64>();
    let n = LEBESGUE_SAMPLES;
    let sampled = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .chain([lo, hi])
        .chain(nodes.nodes().iter().copied())
        .map(lebesgue)
        .fold(1.0, f64::max);
    let mut breaks: Vec<f64> = nodes.nodes().iter().copied().chain([lo, hi]).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let refined = breaks
        .windows(2)
        .map(|w| golden_max(&lebesgue, w[0], w[1]))
        .fold(1.0, f64::max);
    sampled.max(refined)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}
