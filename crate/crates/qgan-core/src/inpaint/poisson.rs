//! Poisson fusion of the generated content into the observed image:
//! per imaginary channel, solve the discrete Poisson equation on the hole
//! with the Laplacian of the generated image as guidance and Dirichlet
//! boundary values from the observed pixels.
//!
//! Hole pixels on the image border lose the out-of-bounds stencil arms on
//! both sides of the equation, so border-touching holes (the diagonal band
//! mask reaches the corners) stay well-posed.

use crate::error::{Error, Result};
use crate::inpaint::mask::Mask;
use crate::tensor::QTensor;

const N4: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Conjugate gradient on an SPD operator given as a closure.
/// Returns the solution, the final residual 2-norm, and iterations used.
fn cg_solve(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let mut x = x0;
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let mut iters = 0usize;
    while rs.sqrt() > tol {
        if iters >= max_iter {
            return Err(Error::SolverStalled {
                residual: rs.sqrt(),
                iters,
            });
        }
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(pi, ai)| pi * ai).sum();
        if pap <= 0.0 {
            return Err(Error::SolverStalled {
                residual: rs.sqrt(),
                iters,
            });
        }
        let alpha = rs / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
        iters += 1;
    }
    Ok((x, rs.sqrt(), iters))
}

/// Gradient-domain blend: observed pixels pass through from `y`; each hole
/// channel solves `lap(f) = lap(g)` with `f = y` on the observed boundary.
pub fn poisson_fuse(y: &QTensor, mask: &Mask, gz: &QTensor) -> Result<QTensor> {
    if y.shape() != gz.shape() {
        return Err(Error::config("poisson fusion image shapes differ"));
    }
    if y.channels() != 1 || y.height() != mask.height() || y.width() != mask.width() {
        return Err(Error::config("mask does not match the image"));
    }
    let (height, width) = (y.height(), y.width());

    // Index the hole pixels.
    let mut hole_index = vec![usize::MAX; height * width];
    let mut holes: Vec<(usize, usize)> = Vec::new();
    for i in 0..height {
        for j in 0..width {
            if !mask.observed(i, j) {
                hole_index[i * width + j] = holes.len();
                holes.push((i, j));
            }
        }
    }
    let n = holes.len();
    let mut out = y.clone();
    if n == 0 {
        return Ok(out);
    }

    let in_bounds = |p: isize, q: isize| p >= 0 && q >= 0 && p < height as isize && q < width as isize;

    // A * f: (deg p) f_p - sum over hole neighbors of f_q.
    let apply = |f: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (idx, &(i, j)) in holes.iter().enumerate() {
            let mut acc = 0.0;
            let mut deg = 0.0;
            for (di, dj) in N4 {
                let (p, q) = (i as isize + di, j as isize + dj);
                if !in_bounds(p, q) {
                    continue;
                }
                deg += 1.0;
                let hi = hole_index[p as usize * width + q as usize];
                if hi != usize::MAX {
                    acc -= f[hi];
                }
            }
            out[idx] = deg * f[idx] + acc;
        }
        out
    };

    let max_iter = 10 * n;
    for comp in 0..3usize {
        let value = |t: &QTensor, i: usize, j: usize| -> f64 {
            let p = t.pixel(0, i, j);
            match comp {
                0 => p.x,
                1 => p.y,
                _ => p.z,
            }
        };
        // Right-hand side: guidance Laplacian of gz plus Dirichlet terms.
        let mut b = vec![0.0; n];
        let mut x0 = vec![0.0; n];
        for (idx, &(i, j)) in holes.iter().enumerate() {
            let gp = value(gz, i, j);
            x0[idx] = gp;
            let mut rhs = 0.0;
            for (di, dj) in N4 {
                let (p, q) = (i as isize + di, j as isize + dj);
                if !in_bounds(p, q) {
                    continue;
                }
                let (pu, qu) = (p as usize, q as usize);
                rhs += gp - value(gz, pu, qu);
                if mask.observed(pu, qu) {
                    rhs += value(y, pu, qu);
                }
            }
            b[idx] = rhs;
        }
        let bnorm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tol = 1e-12 * bnorm.max(1.0);
        let (f, _, _) = cg_solve(apply, &b, x0, tol, max_iter)?;
        for (idx, &(i, j)) in holes.iter().enumerate() {
            let mut p = out.pixel(0, i, j);
            match comp {
                0 => p.x = f[idx],
                1 => p.y = f[idx],
                _ => p.z = f[idx],
            }
            out.set_pixel(0, i, j, p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inpaint::mask::make_center_mask;
    use crate::qalgebra::PureQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_image(h: usize, w: usize, p: PureQuaternion) -> QTensor {
        let mut t = QTensor::zeros(1, h, w);
        for i in 0..h {
            for j in 0..w {
                t.set_pixel(0, i, j, p);
            }
        }
        t
    }

    #[test]
    fn constant_inputs_stay_constant() {
        let c = PureQuaternion::new(0.3, -0.1, 0.7);
        let y = constant_image(10, 10, c);
        let gz = constant_image(10, 10, c);
        let mask = make_center_mask(10, 10, 0.16).unwrap();
        let out = poisson_fuse(&y, &mask, &gz).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert!((out.pixel(0, i, j) - c).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn constant_offset_in_the_hole_is_removed() {
        // gz = y + c everywhere: the gradient field matches, so the solution
        // is exactly y's own extension.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let data: Vec<f64> = (0..12 * 12 * 3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let y = QTensor::from_data(1, 12, 12, data).unwrap();
        let offset = PureQuaternion::new(0.2, -0.3, 0.1);
        let mut gz = y.clone();
        for i in 0..12 {
            for j in 0..12 {
                gz.set_pixel(0, i, j, y.pixel(0, i, j) + offset);
            }
        }
        let mask = make_center_mask(12, 12, 0.16).unwrap();
        let out = poisson_fuse(&y, &mask, &gz).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert!(
                    (out.pixel(0, i, j) - y.pixel(0, i, j)).norm() < 1e-6,
                    "pixel ({i},{j}) off by {}",
                    (out.pixel(0, i, j) - y.pixel(0, i, j)).norm()
                );
            }
        }
    }

    #[test]
    fn all_observed_mask_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let data: Vec<f64> = (0..8 * 8 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = QTensor::from_data(1, 8, 8, data).unwrap();
        let gz = QTensor::zeros(1, 8, 8);
        let mask = Mask::all_observed(8, 8);
        let out = poisson_fuse(&y, &mask, &gz).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn matches_dense_direct_solve_on_small_holes() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let side = 12;
        let gen = |rng: &mut ChaCha8Rng| {
            let data: Vec<f64> = (0..side * side * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            QTensor::from_data(1, side, side, data).unwrap()
        };
        let y = gen(&mut rng);
        let gz = gen(&mut rng);
        // 8x8 hole in a 12x12 image is a 0.44 fraction; build it directly.
        let mut mdata = vec![1u8; side * side];
        for i in 2..10 {
            for j in 2..10 {
                mdata[i * side + j] = 0;
            }
        }
        let mask = Mask::from_data(side, side, mdata).unwrap();
        let out = poisson_fuse(&y, &mask, &gz).unwrap();

        // Dense direct solve of the same equations, per component.
        let holes: Vec<(usize, usize)> = (0..side)
            .flat_map(|i| (0..side).map(move |j| (i, j)))
            .filter(|&(i, j)| !mask.observed(i, j))
            .collect();
        let n = holes.len();
        assert_eq!(n, 64);
        let index = |i: usize, j: usize| holes.iter().position(|&p| p == (i, j));
        for comp in 0..3usize {
            let value = |t: &QTensor, i: usize, j: usize| -> f64 {
                let p = t.pixel(0, i, j);
                [p.x, p.y, p.z][comp]
            };
            let mut a: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
            let mut b = vec![0.0; n];
            for (row, &(i, j)) in holes.iter().enumerate() {
                let mut deg = 0.0;
                for (di, dj) in N4 {
                    let (p, q) = (i as isize + di, j as isize + dj);
                    if p < 0 || q < 0 || p >= side as isize || q >= side as isize {
                        continue;
                    }
                    let (pu, qu) = (p as usize, q as usize);
                    deg += 1.0;
                    b[row] += value(&gz, i, j) - value(&gz, pu, qu);
                    if mask.observed(pu, qu) {
                        b[row] += value(&y, pu, qu);
                    } else {
                        a[row][index(pu, qu).unwrap()] = -1.0;
                    }
                }
                a[row][row] = deg;
            }
            // Gaussian elimination with partial pivoting.
            for col in 0..n {
                let piv = (col..n)
                    .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
                    .unwrap();
                a.swap(col, piv);
                b.swap(col, piv);
                let d = a[col][col];
                for r in col + 1..n {
                    let f = a[r][col] / d;
                    if f == 0.0 {
                        continue;
                    }
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
            let mut f = vec![0.0; n];
            for row in (0..n).rev() {
                let mut acc = b[row];
                for c in row + 1..n {
                    acc -= a[row][c] * f[c];
                }
                f[row] = acc / a[row][row];
            }
            for (idx, &(i, j)) in holes.iter().enumerate() {
                let got = value(&out, i, j);
                assert!(
                    (got - f[idx]).abs() < 1e-8,
                    "component {comp} pixel ({i},{j}): cg {got} vs direct {}",
                    f[idx]
                );
            }
        }
    }
}
