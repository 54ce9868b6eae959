use super::{MultiPath, PathKind, Scheme, TimeGrid};
use crate::error::{Error, Result};

/// Polygonal approximant with a one-interval lag.
///
/// With knots `t_k = kT/n`, `W_n = 0` on `[0, t_1)` and on `[t_k, t_{k+1})`
/// it interpolates linearly from `W(t_{k-1})` to `W(t_k)`, so it only uses
/// `W` up to `t_k` there.
pub fn polygonal_approx(w: &MultiPath, n: usize) -> Result<MultiPath> {
    let grid = *w.grid();
    if n == 0 || n > grid.n_fine() || !grid.n_fine().is_multiple_of(n) {
        return Err(Error::InvalidArgument(format!("polygonal n = {n} must divide n_fine = {}", grid.n_fine())));
    }
    let stride = grid.n_fine() / n;
    let samples = w
        .samples()
        .iter()
        .map(|row| {
            (0..grid.n_points())
                .map(|j| {
                    let k = j / stride;
                    if k == 0 {
                        return 0.0;
                    }
                    let prev = row[(k - 1) * stride];
                    let cur = row[k * stride];
                    let r = (j - k * stride) as f64 / stride as f64;
                    prev + r * (cur - prev)
                })
                .collect()
        })
        .collect();
    MultiPath::from_samples(grid, PathKind::Polygonal(n), samples)
}

/// Trailing moving average `W_n(t) = n ∫_{t-1/n}^t W(s) ds`, with `W = 0` before time zero.
///
/// The integral is the exact integral of the piecewise-linear interpolant of
/// the fine samples (trapezoidal rule, with a partial last cell when the
/// window is not a whole number of fine steps).
pub fn smoothed_approx(w: &MultiPath, n: usize) -> Result<MultiPath> {
    let grid = *w.grid();
    if n == 0 || 1.0 / (n as f64) < grid.dt() {
        return Err(Error::InvalidArgument(format!("smoothing window 1/{n} is shorter than dt = {}", grid.dt())));
    }
    let window = 1.0 / n as f64;
    let nf = n as f64;
    let samples = w
        .samples()
        .iter()
        .map(|row| {
            let cum = cumulative_trapezoid(row, grid.dt());
            (0..grid.n_points())
                .map(|j| {
                    let t = grid.t(j);
                    nf * (cum[j] - integral_to(row, &cum, &grid, t - window))
                })
                .collect()
        })
        .collect();
    MultiPath::from_samples(grid, PathKind::Smoothed(n), samples)
}

pub fn approximate(w: &MultiPath, scheme: Scheme, n: usize) -> Result<MultiPath> {
    match scheme {
        Scheme::Polygonal => polygonal_approx(w, n),
        Scheme::Smoothed => smoothed_approx(w, n),
    }
}

fn cumulative_trapezoid(row: &[f64], dt: f64) -> Vec<f64> {
    let mut cum = Vec::with_capacity(row.len());
    let mut acc = 0.0;
    cum.push(acc);
    for w in row.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        cum.push(acc);
    }
    cum
}

/// `∫_0^a` of the interpolant; zero for `a ≤ 0`.
fn integral_to(row: &[f64], cum: &[f64], grid: &TimeGrid, a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let dt = grid.dt();
    let s = a / dt;
    let i = s.floor() as usize;
    if i >= grid.n_fine() {
        return cum[grid.n_fine()];
    }
    let r = s - i as f64;
    cum[i] + dt * (r * row[i] + 0.5 * r * r * (row[i + 1] - row[i]))
}

/// Time derivative of a finite-variation approximant.
///
/// Derivatives are evaluated on the piece that contains a reference time so
/// that Runge-Kutta stages at the right end of a step see the slope of the
/// step they belong to.
#[derive(Debug)]
pub enum Velocity<'a> {
    /// Exact slope `n (W(t_k) - W(t_{k-1})) / T` per knot interval.
    Polygonal { n: usize, horizon: f64, slopes: Vec<Vec<f64>> },
    /// Exact derivative `n (W(t) - W(t - 1/n))` of the moving average.
    Smoothed { n: usize, source: &'a MultiPath },
    /// Piecewise-constant slope between fine samples.
    Piecewise { path: &'a MultiPath },
}

impl<'a> Velocity<'a> {
    /// `source` is the Wiener path behind a smoothed approximant and is ignored otherwise.
    pub fn new(approx: &'a MultiPath, source: Option<&'a MultiPath>) -> Result<Self> {
        match approx.kind() {
            PathKind::Wiener => Err(Error::InvalidArgument("a Wiener path has no time derivative".into())),
            PathKind::Polygonal(n) => {
                let grid = approx.grid();
                let stride = grid.n_fine() / n;
                let scale = 1.0 / (stride as f64 * grid.dt());
                let slopes = approx
                    .samples()
                    .iter()
                    .map(|row| (0..n).map(|c| (row[(c + 1) * stride] - row[c * stride]) * scale).collect())
                    .collect();
                Ok(Velocity::Polygonal { n, horizon: grid.horizon(), slopes })
            }
            PathKind::Smoothed(n) => {
                let source =
                    source.ok_or_else(|| Error::InvalidArgument("smoothed velocity needs the source path".into()))?;
                approx.check_compatible(source)?;
                Ok(Velocity::Smoothed { n, source })
            }
            PathKind::Deterministic => Ok(Velocity::Piecewise { path: approx }),
        }
    }

    /// `dW_n^k/dt` at `t`, on the piece containing `reference`.
    pub fn rate(&self, k: usize, t: f64, reference: f64) -> f64 {
        match self {
            Velocity::Polygonal { n, horizon, slopes } => {
                let c = ((reference / horizon) * *n as f64).floor() as usize;
                slopes[k][c.min(n - 1)]
            }
            Velocity::Smoothed { n, source } => {
                *n as f64 * (source.value_at(k, t) - source.value_at(k, t - 1.0 / *n as f64))
            }
            Velocity::Piecewise { path } => {
                let grid = path.grid();
                let i = ((reference / grid.dt()).floor() as usize).min(grid.n_fine() - 1);
                let row = path.component(k);
                (row[i + 1] - row[i]) / grid.dt()
            }
        }
    }

    /// Upper bound of `|dW_n^k/dt|` over `[0, T]`, used for step-size checks.
    pub fn max_abs(&self, k: usize) -> f64 {
        match self {
            Velocity::Polygonal { slopes, .. } => slopes[k].iter().fold(0.0, |m, v| m.max(v.abs())),
            Velocity::Smoothed { n, source } => {
                // Breakpoints of the piecewise-linear rate are grid points and their shifts by 1/n.
                let grid = source.grid();
                let h = 1.0 / *n as f64;
                (0..grid.n_points())
                    .flat_map(|j| [grid.t(j), (grid.t(j) + h).min(grid.horizon())])
                    .map(|t| self.rate(k, t, t).abs())
                    .fold(0.0, f64::max)
            }
            Velocity::Piecewise { path } => {
                let dt = path.grid().dt();
                path.component(k).windows(2).map(|w| ((w[1] - w[0]) / dt).abs()).fold(0.0, f64::max)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_wiener, sup_distance};

    fn linear(n_fine: usize) -> MultiPath {
        MultiPath::from_fn(TimeGrid::new(1.0, n_fine).unwrap(), 1, |_, t| t).unwrap()
    }

    #[test]
    fn polygonal_of_zero_is_zero() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let w = MultiPath::zeros(g, 2, PathKind::Wiener).unwrap();
        let wn = polygonal_approx(&w, 8).unwrap();
        assert!(wn.samples().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn polygonal_of_linear_path() {
        let w = linear(1024);
        for n in [4, 16, 64] {
            let wn = polygonal_approx(&w, n).unwrap();
            let h = 1.0 / n as f64;
            for (j, v) in wn.component(0).iter().enumerate() {
                let t = w.grid().t(j);
                let expected = if t < h { 0.0 } else { t - h };
                assert!((v - expected).abs() < 1e-15);
            }
            assert_eq!(sup_distance(&w, &wn).unwrap(), h);
        }
    }

    #[test]
    fn polygonal_knot_property() {
        let g = TimeGrid::new(1.0, 512).unwrap();
        let w = sample_wiener(3, 2, g).unwrap();
        let n = 16;
        let wn = polygonal_approx(&w, n).unwrap();
        let s = 512 / n;
        for k in 0..2 {
            for c in 0..n {
                assert_eq!(wn.component(k)[(c + 1) * s], w.component(k)[c * s]);
            }
        }
    }

    #[test]
    fn polygonal_rejects_bad_n() {
        let w = linear(64);
        assert!(polygonal_approx(&w, 3).is_err());
        assert!(polygonal_approx(&w, 128).is_err());
        assert!(polygonal_approx(&w, 0).is_err());
    }

    #[test]
    fn smoothed_of_constant_and_linear() {
        let g = TimeGrid::new(1.0, 1024).unwrap();
        let c = MultiPath::from_fn(g, 1, |_, _| 2.5).unwrap();
        let n = 16;
        let cn = smoothed_approx(&c, n).unwrap();
        let w = linear(1024);
        let wn = smoothed_approx(&w, n).unwrap();
        assert_eq!(wn.component(0)[0], 0.0);
        for j in 0..g.n_points() {
            let t = g.t(j);
            if t >= 1.0 / n as f64 {
                assert!((cn.component(0)[j] - 2.5).abs() < 1e-12);
                assert!((wn.component(0)[j] - (t - 0.5 / n as f64)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothed_with_fractional_window() {
        // 1/n = 0.3 fine steps of 1/10 each is exact; 1/7 is not on the grid.
        let w = linear(100);
        let wn = smoothed_approx(&w, 7).unwrap();
        for j in 20..=100 {
            let t = j as f64 / 100.0;
            assert!((wn.component(0)[j] - (t - 0.5 / 7.0)).abs() < 1e-12);
        }
        assert!(smoothed_approx(&w, 101).is_err());
    }

    #[test]
    fn velocities() {
        let g = TimeGrid::new(1.0, 256).unwrap();
        let w = sample_wiener(5, 1, g).unwrap();
        let wp = polygonal_approx(&w, 8).unwrap();
        let v = Velocity::new(&wp, None).unwrap();
        // Slope on the piece that contains the reference time.
        let t_knot = 2.0 / 8.0;
        let left = v.rate(0, t_knot, t_knot - 1e-3);
        let expected_left = 8.0 * (w.component(0)[32] - w.component(0)[0]);
        assert!((left - expected_left).abs() < 1e-12);

        let ws = smoothed_approx(&w, 8).unwrap();
        assert!(Velocity::new(&ws, None).is_err());
        let vs = Velocity::new(&ws, Some(&w)).unwrap();
        // The rate integrates to the increments of the smoothed path.
        for j in [0, 10, 31, 32, 100, 255] {
            let (a, b) = (g.t(j), g.t(j + 1));
            let m = 400;
            let h = (b - a) / m as f64;
            let integral: f64 = (0..m)
                .map(|i| {
                    let t = a + (i as f64 + 0.5) * h;
                    vs.rate(0, t, t) * h
                })
                .sum();
            let inc = ws.component(0)[j + 1] - ws.component(0)[j];
            assert!((integral - inc).abs() < 1e-9, "j={j}: {integral} vs {inc}");
        }
        assert!(Velocity::new(&w, None).is_err());
    }
}
