//! Spatial derivative stencils along one grid line.
//!
//! Both stencils extrapolate linearly past the grid edge, so at the first
//! node `D-` equals `D+` and at the last node `D+` equals `D-`.

/// Values along one axis line through a node, with linear extrapolation
/// beyond the ends.
struct Line<'a> {
    values: &'a [f64],
    node: usize,
    stride: usize,
    k: usize,
    n: usize,
}

impl Line<'_> {
    #[inline]
    fn at(&self, j: isize) -> f64 {
        let k = self.k as isize;
        let n = self.n as isize;
        let idx = |m: isize| (self.node as isize + (m - k) * self.stride as isize) as usize;
        if j < 0 {
            let (a, b) = (self.values[idx(0)], self.values[idx(1)]);
            a + j as f64 * (b - a)
        } else if j >= n {
            let (a, b) = (self.values[idx(n - 2)], self.values[idx(n - 1)]);
            b + (j - n + 1) as f64 * (b - a)
        } else {
            self.values[idx(j)]
        }
    }
}

/// First-order one-sided differences `(D-, D+)`.
#[inline]
pub(crate) fn first_order(
    values: &[f64],
    node: usize,
    stride: usize,
    k: usize,
    n: usize,
    dx: f64,
) -> (f64, f64) {
    let here = values[node];
    let dm = if k > 0 {
        (here - values[node - stride]) / dx
    } else {
        (values[node + stride] - here) / dx
    };
    let dp = if k + 1 < n {
        (values[node + stride] - here) / dx
    } else {
        (here - values[node - stride]) / dx
    };
    (dm, dp)
}

/// Second-order ENO differences `(D-, D+)`: the first divided difference
/// is corrected with the smaller in magnitude of the two candidate second
/// differences.
#[inline]
pub(crate) fn eno2(
    values: &[f64],
    node: usize,
    stride: usize,
    k: usize,
    n: usize,
    dx: f64,
) -> (f64, f64) {
    let line = Line {
        values,
        node,
        stride,
        k,
        n,
    };
    let k = k as isize;
    let v = |j: isize| line.at(k + j);
    let (vm2, vm1, v0, vp1, vp2) = (v(-2), v(-1), v(0), v(1), v(2));
    let q = |a: f64, b: f64, c: f64| (a - 2.0 * b + c) / (dx * dx);
    let (q_m1, q_0, q_p1) = (q(vm2, vm1, v0), q(vm1, v0, vp1), q(v0, vp1, vp2));
    let pick = |a: f64, b: f64| if a.abs() <= b.abs() { a } else { b };
    let dm = (v0 - vm1) / dx + 0.5 * dx * pick(q_m1, q_0);
    let dp = (vp1 - v0) / dx - 0.5 * dx * pick(q_0, q_p1);
    (dm, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: impl Fn(f64) -> f64, n: usize, dx: f64) -> Vec<f64> {
        (0..n).map(|k| f(k as f64 * dx)).collect()
    }

    #[test]
    fn eno_is_exact_on_quadratics_in_the_interior() {
        let dx = 0.1;
        let v = sample(|x| 3.0 * x * x - x, 11, dx);
        for k in 2..9 {
            let (dm, dp) = eno2(&v, k, 1, k, 11, dx);
            let exact = 6.0 * k as f64 * dx - 1.0;
            assert!((dm - exact).abs() < 1e-10 && (dp - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn stencils_agree_on_linear_data_everywhere() {
        let dx = 0.25;
        let v = sample(|x| 2.0 * x + 1.0, 6, dx);
        for k in 0..6 {
            for (dm, dp) in [eno2(&v, k, 1, k, 6, dx), first_order(&v, k, 1, k, 6, dx)] {
                assert!((dm - 2.0).abs() < 1e-12 && (dp - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eno_follows_the_smooth_side_of_a_kink() {
        let dx = 0.1;
        let v = sample(|x: f64| (x - 0.5).abs(), 11, dx);
        let (dm, dp) = eno2(&v, 5, 1, 5, 11, dx);
        assert!((dm + 1.0).abs() < 1e-12);
        assert!((dp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn strided_line_access() {
        // 3 x 4 grid, axis 0 has stride 4.
        let v: Vec<f64> = (0..12).map(|i| (i / 4) as f64 * 5.0).collect();
        let (dm, dp) = first_order(&v, 4 + 2, 4, 1, 3, 1.0);
        assert_eq!((dm, dp), (5.0, 5.0));
        let (dm, dp) = eno2(&v, 8 + 1, 4, 2, 3, 1.0);
        assert_eq!((dm, dp), (5.0, 5.0));
    }
}
