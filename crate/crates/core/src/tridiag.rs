use crate::real::Real;

/// Tridiagonal system `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`.
///
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub(crate) struct Tridiagonal<R> {
    pub lower: Vec<R>,
    pub diag: Vec<R>,
    pub upper: Vec<R>,
    pub rhs: Vec<R>,
    scratch: Vec<R>,
}

impl<R: Real> Tridiagonal<R> {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![R::zero(); n],
            diag: vec![R::zero(); n],
            upper: vec![R::zero(); n],
            rhs: vec![R::zero(); n],
            scratch: vec![R::zero(); n],
        }
    }

    pub fn clear(&mut self) {
        for v in [&mut self.lower, &mut self.diag, &mut self.upper, &mut self.rhs] {
            v.iter_mut().for_each(|x| *x = R::zero());
        }
    }

    /// Thomas algorithm. The systems assembled by the solvers are diagonally
    /// dominant, so no pivoting is done.
    pub fn solve_into(&mut self, x: &mut [R]) {
        let n = self.diag.len();
        let c = &mut self.scratch;
        let mut denom = self.diag[0];
        c[0] = self.upper[0] / denom;
        x[0] = self.rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = if i + 1 < n { self.upper[i] / denom } else { R::zero() };
            x[i] = (self.rhs[i] - self.lower[i] * x[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            x[i] = x[i] - c[i] * x[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1 0 1] -> x = [1 1 1]
        let mut t = Tridiagonal::zeros(3);
        t.lower = vec![0.0, -1.0, -1.0];
        t.diag = vec![2.0, 2.0, 2.0];
        t.upper = vec![-1.0, -1.0, 0.0];
        t.rhs = vec![1.0, 0.0, 1.0];
        let mut x = vec![0.0f64; 3];
        t.solve_into(&mut x);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
