//! Analytic parameter-dependent functions with known jump trajectories.

use std::fmt;
use std::str::FromStr;

/// Left and right end of the one-dimensional fixtures' interval.
pub const LEFT: f64 = -1.5;
pub const RIGHT: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    /// `1` left of `mu`, `-1` right of it.
    Step,
    /// Two jumps at `-(1 - mu)` and `1 - mu` that merge at `mu = 1`.
    Collision,
    /// Two linear ramps separated by a zero plateau, with jumps at `+-(1 - mu)`.
    Ramps,
    /// As [`Fixture::Ramps`] with jumps at `+-p(mu)`, `p` quadratic.
    Parabola,
    /// Indicator of a rotated ellipse with semi-axes `2 mu` and `mu`.
    Ellipse,
}

pub const FIXTURES: [Fixture; 5] =
    [Fixture::Step, Fixture::Collision, Fixture::Ramps, Fixture::Parabola, Fixture::Ellipse];

impl Fixture {
    pub fn name(self) -> &'static str {
        match self {
            Fixture::Step => "step_7_1",
            Fixture::Collision => "collision_3",
            Fixture::Ramps => "ramps_7_2",
            Fixture::Parabola => "parabola_7_3",
            Fixture::Ellipse => "ellipse_7_4",
        }
    }

    pub fn dim(self) -> usize {
        if self == Fixture::Ellipse {
            2
        } else {
            1
        }
    }

    /// The spatial domain the formulas are written for.
    pub fn domain_bounds(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Fixture::Ellipse => (vec![-1.0, -1.0], vec![1.0, 1.0]),
            _ => (vec![LEFT], vec![RIGHT]),
        }
    }

    pub fn eval(self, mu: f64, x: &[f64]) -> f64 {
        match self {
            Fixture::Step => {
                if x[0] <= mu {
                    1.0
                } else {
                    -1.0
                }
            }
            Fixture::Collision => collision(mu, x[0]),
            Fixture::Ramps => ramps(1.0 - mu, x[0]),
            Fixture::Parabola => ramps(parabola(mu), x[0]),
            Fixture::Ellipse => {
                let [r, s] = rotate(mu, [x[0], x[1]]);
                if (r / (2.0 * mu)).powi(2) + (s / mu).powi(2) <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// A transform with `u(X(eta; mu, x), eta) = u(x, mu)` wherever the
    /// formulas allow it.
    pub fn ideal_transform(self, eta: f64, mu: f64, x: &[f64]) -> Vec<f64> {
        match self {
            Fixture::Step => vec![x[0] - (mu - eta)],
            Fixture::Collision => vec![collision_transform(eta, mu, x[0])],
            Fixture::Ramps => vec![ramps_transform(1.0 - eta, 1.0 - mu, x[0])],
            Fixture::Parabola => vec![ramps_transform(parabola(eta), parabola(mu), x[0])],
            Fixture::Ellipse => {
                let [r, s] = rotate(mu, [x[0], x[1]]);
                let q = eta / mu;
                let [a, b] = rotate_back(eta, [q * r, q * s]);
                vec![a, b]
            }
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fixture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        FIXTURES.iter().copied().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<&str> = FIXTURES.iter().map(|f| f.name()).collect();
            format!("unknown fixture {s:?}, known: {}", names.join(", "))
        })
    }
}

/// `fixture.eval` in free-function form.
pub fn fixture_eval(fixture: Fixture, mu: f64, x: &[f64]) -> f64 {
    fixture.eval(mu, x)
}

/// Quadratic jump position with `p(0.6) = 0.4`, `p(0.8) = 0.3`, `p(1) = 0`.
pub fn parabola(mu: f64) -> f64 {
    let t = mu - 0.8;
    0.3 - t - 2.5 * t * t
}

fn collision(mu: f64, x: f64) -> f64 {
    if mu >= 1.0 {
        return if x <= 0.0 { 1.0 } else { -1.0 };
    }
    if x <= -(1.0 - mu) {
        1.0
    } else if x >= 1.0 - mu {
        -1.0
    } else {
        0.0
    }
}

fn collision_transform(eta: f64, mu: f64, x: f64) -> f64 {
    if x <= -(1.0 - mu) {
        x - (mu - eta)
    } else if x >= 1.0 - mu {
        x + (mu - eta)
    } else {
        x - x * (mu - eta) / (mu - 1.0)
    }
}

fn ramps(jump: f64, x: f64) -> f64 {
    if x <= -jump {
        (x - LEFT) / (-jump - LEFT)
    } else if x >= jump {
        (x - RIGHT) / (jump - RIGHT)
    } else {
        0.0
    }
}

/// Maps the three pieces of the ramps profile with jumps at `+-from` onto
/// those with jumps at `+-to`, affinely on each piece.
fn ramps_transform(to: f64, from: f64, x: f64) -> f64 {
    if x <= -from {
        LEFT + (x - LEFT) * (-to - LEFT) / (-from - LEFT)
    } else if x >= from {
        RIGHT + (x - RIGHT) * (to - RIGHT) / (from - RIGHT)
    } else {
        x * to / from
    }
}

fn rotate(mu: f64, [x, y]: [f64; 2]) -> [f64; 2] {
    let (s, c) = (1.5 * mu).sin_cos();
    [c * x - s * y, s * x + c * y]
}

fn rotate_back(mu: f64, [r, q]: [f64; 2]) -> [f64; 2] {
    let (s, c) = (1.5 * mu).sin_cos();
    [c * r + s * q, -s * r + c * q]
}

/// `n` points on the boundary of the ellipse at `mu`, equally spaced in angle.
pub fn ellipse_boundary(mu: f64, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            rotate_back(mu, [2.0 * mu * t.cos(), mu * t.sin()])
        })
        .collect()
}
