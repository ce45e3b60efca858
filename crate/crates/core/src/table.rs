//! Uniform-grid tables with four-point Lagrange interpolation.

#[derive(Debug, Clone)]
pub(crate) struct UniformTable {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl UniformTable {
    /// Tabulate `f` at `n` equally spaced nodes on `[start, end]`.
    pub fn build<F>(start: f64, end: f64, n: usize, f: F) -> crate::Result<Self>
    where
        F: Fn(f64) -> crate::Result<f64>,
    {
        assert!(n >= 4 && end > start);
        let step = (end - start) / (n - 1) as f64;
        let values = (0..n).map(|k| f(start + k as f64 * step)).collect::<crate::Result<Vec<_>>>()?;
        Ok(UniformTable { start, step, values })
    }

    pub fn from_values(start: f64, step: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 4);
        UniformTable { start, step, values }
    }

    pub fn end(&self) -> f64 {
        self.start + (self.values.len() - 1) as f64 * self.step
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end()
    }

    /// Interpolated value; callers check [`Self::contains`] first.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let pos = (x - self.start) / self.step;
        let i = (pos.floor().max(0.0) as usize).clamp(1, n - 3);
        let t = pos - i as f64;
        let [y0, y1, y2, y3] = [self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]];
        -t * (t - 1.0) * (t - 2.0) / 6.0 * y0 + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * y1
            - (t + 1.0) * t * (t - 2.0) / 2.0 * y2
            + (t + 1.0) * t * (t - 1.0) / 6.0 * y3
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_exact() {
        let t = UniformTable::build(-1.0, 2.0, 7, |x| Ok(x * x * x - 2.0 * x + 1.0)).unwrap();
        for x in [-1.0, -0.93, 0.0, 0.31, 1.5, 1.99, 2.0] {
            assert!((t.eval(x) - (x * x * x - 2.0 * x + 1.0)).abs() < 1e-12);
        }
        assert!(t.contains(2.0) && !t.contains(2.01));
    }

    #[test]
    fn smooth_function_accuracy() {
        let t = UniformTable::build(0.0, 10.0, 4096, |x| Ok((-x).exp() * x.sin())).unwrap();
        for k in 0..1000 {
            let x = 0.00997 * k as f64;
            assert!((t.eval(x) - (-x).exp() * x.sin()).abs() < 1e-10);
        }
    }
}
