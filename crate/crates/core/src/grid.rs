use crate::{Error, Result};

/// Uniform sampling of `[t0, t1]` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::domain("grid endpoints must be finite"));
        }
        if t1 <= t0 {
            return Err(Error::domain(format!("grid needs t1 > t0, got [{t0}, {t1}]")));
        }
        if n < 2 {
            return Err(Error::domain(format!("grid needs n >= 2, got {n}")));
        }
        Ok(TimeGrid { t0, t1, n })
    }

    /// Grid over `[0, duration]`.
    pub fn span(duration: f64, n: usize) -> Result<Self> {
        Self::new(0.0, duration, n)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn dt(&self) -> f64 {
        self.duration() / (self.n - 1) as f64
    }

    /// Time of sample `i`. The last sample is exactly `t1`.
    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.t1
        } else {
            self.t0 + i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.time(i))
    }

    /// Same window with `(n-1)·factor + 1` points, so every old node is kept.
    pub fn refined(&self, factor: usize) -> Self {
        TimeGrid {
            n: (self.n - 1) * factor.max(1) + 1,
            ..*self
        }
    }

    /// True when the grid covers `[a, b]` up to a relative tolerance.
    pub fn spans(&self, a: f64, b: f64) -> bool {
        let tol = 1e-12 * (b - a).abs().max(1.0);
        (self.t0 - a).abs() <= tol && (self.t1 - b).abs() <= tol
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n == other.n && self.spans(other.t0, other.t1)
    }

    /// Locate `t` as (cell index, fraction within cell). `None` outside the grid.
    pub fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let tol = 1e-12 * self.duration();
        if t < self.t0 - tol || t > self.t1 + tol {
            return None;
        }
        let mut x = ((t - self.t0) / self.dt()).max(0.0);
        if (x - x.round()).abs() < 1e-9 {
            x = x.round();
        }
        let cells = self.n - 1;
        let i = (x.floor() as usize).min(cells - 1);
        let frac = (x - i as f64).clamp(0.0, 1.0);
        Some((i, frac))
    }
}
