use crate::{Drive, Error, Result, TimeGrid, C64};

/// Knobs for the fixed-step integrator and its refinement loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    /// Refinement stops once doubling the step count moves the monitored
    /// efficiency by less than this.
    pub tolerance: f64,
    /// Upper bound on `h · rate` for the initial substep choice.
    pub stiffness: f64,
    /// Refinement gives up beyond this many RK4 steps per run.
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            tolerance: 1e-6,
            stiffness: 0.1,
            max_steps: 1 << 27,
        }
    }
}

pub(crate) type Rhs<'a, const N: usize> = dyn Fn(f64, &[C64; N]) -> [C64; N] + 'a;

#[inline]
fn axpy<const N: usize>(y: &[C64; N], h: f64, k: &[C64; N]) -> [C64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += k[i] * h;
    }
    out
}

#[inline]
pub(crate) fn rk4_step<const N: usize>(rhs: &Rhs<'_, N>, t: f64, y: &[C64; N], h: f64) -> [C64; N] {
    let k1 = rhs(t, y);
    let k2 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = rhs(t + h, &axpy(y, h, &k3));
    let mut out = *y;
    for i in 0..N {
        out[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
    }
    out
}

/// Integrate across `grid` with `substeps` equal RK4 steps per cell, calling
/// `observe(i, y)` at every node.
pub(crate) fn integrate<const N: usize>(
    rhs: &Rhs<'_, N>,
    grid: &TimeGrid,
    substeps: usize,
    y0: [C64; N],
    mut observe: impl FnMut(usize, &[C64; N]),
) -> Result<[C64; N]> {
    let mut y = y0;
    observe(0, &y);
    let h = grid.dt() / substeps as f64;
    for i in 0..grid.len() - 1 {
        let t_cell = grid.time(i);
        for j in 0..substeps {
            y = rk4_step(rhs, t_cell + j as f64 * h, &y, h);
        }
        if y.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Integration(format!(
                "non-finite state at t = {} (substeps = {substeps})",
                grid.time(i + 1)
            )));
        }
        observe(i + 1, &y);
    }
    Ok(y)
}

/// Largest |drive| over nodes and cell midpoints.
pub(crate) fn drive_peak(drive: &dyn Drive, grid: &TimeGrid) -> f64 {
    let half = 0.5 * grid.dt();
    let mut peak: f64 = 0.0;
    for t in grid.times() {
        peak = peak.max(drive.at(t).norm());
        peak = peak.max(drive.at(t + half).norm());
    }
    peak
}

/// Substeps per cell so that `h · rate <= stiffness`.
pub(crate) fn initial_substeps(grid: &TimeGrid, rate: f64, opts: &IntegratorOptions) -> usize {
    let m = (grid.dt() * rate / opts.stiffness).ceil();
    if m.is_finite() && m >= 1.0 {
        m as usize
    } else {
        1
    }
}

/// Outcome of the refinement loop.
pub(crate) struct Converged<T> {
    pub value: T,
    pub substeps: usize,
    pub change: f64,
}

/// Run at `m`, `2m`, `4m`, … substeps until the monitored scalar changes by
/// less than `opts.tolerance` between successive runs.
pub(crate) fn converge<T>(
    what: &str,
    grid: &TimeGrid,
    initial: usize,
    opts: &IntegratorOptions,
    mut run: impl FnMut(usize) -> Result<(T, f64)>,
) -> Result<Converged<T>> {
    let cells = grid.len() - 1;
    let mut m = initial.max(1);
    if cells.saturating_mul(m) > opts.max_steps {
        return Err(Error::Convergence {
            what: what.to_string(),
            detail: format!(
                "initial resolution of {} steps already exceeds the limit of {}",
                cells * m,
                opts.max_steps
            ),
        });
    }
    let (_, mut prev) = run(m)?;
    loop {
        let next = m * 2;
        if cells.saturating_mul(next) > opts.max_steps {
            return Err(Error::Convergence {
                what: what.to_string(),
                detail: format!("step limit {} reached at {} substeps per cell", opts.max_steps, m),
            });
        }
        let (value, q) = run(next)?;
        let change = (q - prev).abs();
        if change < opts.tolerance {
            return Ok(Converged { value, substeps: next, change });
        }
        prev = q;
        m = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourth_order_on_oscillator() {
        // y' = i y, y(0) = 1 over [0, 2]
        let rhs = |_t: f64, y: &[C64; 1]| [C64::i() * y[0]];
        let exact = C64::from_polar(1.0, 2.0);
        let err = |n: usize| {
            let g = TimeGrid::span(2.0, n).unwrap();
            let y = integrate(&rhs, &g, 1, [C64::new(1.0, 0.0)], |_, _| {}).unwrap();
            (y[0] - exact).norm()
        };
        let ratio = err(21) / err(41);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn converge_reports_step_limit() {
        let g = TimeGrid::span(1.0, 11).unwrap();
        let opts = IntegratorOptions { max_steps: 100, ..Default::default() };
        let mut calls = 0;
        let r = converge("test", &g, 1, &opts, |m| {
            calls += 1;
            Ok(((), m as f64))
        });
        assert!(matches!(r, Err(Error::Convergence { .. })));
        assert!(calls >= 1);
    }

    #[test]
    fn non_finite_state_is_an_integration_error() {
        let rhs = |_t: f64, y: &[C64; 1]| [y[0] * y[0] * 1e300];
        let g = TimeGrid::span(1.0, 11).unwrap();
        let r = integrate(&rhs, &g, 1, [C64::new(1e10, 0.0)], |_, _| {});
        assert!(matches!(r, Err(Error::Integration(_))));
    }
}
