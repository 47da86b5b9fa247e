//! Finite-difference operators on interior fields with zero ghost values.
//!
//! None of the operators divide by mesh widths; the schemes carry all scaling.

use ndarray::{s, Array2, ArrayView2};

use crate::model::Field;

/// `acc[i, j] += c * v[i + di, j + dj]`, reading zero outside the array.
pub(crate) fn add_shifted(acc: &mut Array2<f64>, v: ArrayView2<f64>, di: isize, dj: isize, c: f64) {
    let (nx, ny) = v.dim();
    let (nx, ny) = (nx as isize, ny as isize);
    let (t0, t1) = (0.max(-di), nx.min(nx - di));
    let (u0, u1) = (0.max(-dj), ny.min(ny - dj));
    if t0 >= t1 || u0 >= u1 {
        return;
    }
    acc.slice_mut(s![t0..t1, u0..u1])
        .scaled_add(c, &v.slice(s![t0 + di..t1 + di, u0 + dj..u1 + dj]));
}

/// Stencil given as `(di, dj, weight)` triples.
pub(crate) fn apply_stencil(v: ArrayView2<f64>, taps: &[(isize, isize, f64)]) -> Array2<f64> {
    let mut out = Array2::zeros(v.dim());
    for &(di, dj, w) in taps {
        add_shifted(&mut out, v, di, dj, w);
    }
    out
}

pub(crate) const DX: [(isize, isize, f64); 2] = [(1, 0, 1.0), (-1, 0, -1.0)];
pub(crate) const DY: [(isize, isize, f64); 2] = [(0, 1, 1.0), (0, -1, -1.0)];
pub(crate) const DXX: [(isize, isize, f64); 3] = [(1, 0, 1.0), (0, 0, -2.0), (-1, 0, 1.0)];
pub(crate) const DYY: [(isize, isize, f64); 3] = [(0, 1, 1.0), (0, 0, -2.0), (0, -1, 1.0)];
pub(crate) const DXY: [(isize, isize, f64); 4] =
    [(1, 1, 1.0), (-1, 1, -1.0), (1, -1, -1.0), (-1, -1, 1.0)];
pub(crate) const DX2: [(isize, isize, f64); 3] = [(2, 0, 1.0), (0, 0, -2.0), (-2, 0, 1.0)];
pub(crate) const DY2: [(isize, isize, f64); 3] = [(0, 2, 1.0), (0, 0, -2.0), (0, -2, 1.0)];

fn wrap(f: &Field, taps: &[(isize, isize, f64)]) -> Field {
    Field {
        values: apply_stencil(f.values.view(), taps),
        grid: f.grid,
    }
}

/// `V[i+1, j] - V[i-1, j]`
pub fn apply_dx(f: &Field) -> Field {
    wrap(f, &DX)
}

/// `V[i, j+1] - V[i, j-1]`
pub fn apply_dy(f: &Field) -> Field {
    wrap(f, &DY)
}

/// `V[i+1, j] - 2 V[i, j] + V[i-1, j]`
pub fn apply_dxx(f: &Field) -> Field {
    wrap(f, &DXX)
}

/// `V[i, j+1] - 2 V[i, j] + V[i, j-1]`
pub fn apply_dyy(f: &Field) -> Field {
    wrap(f, &DYY)
}

/// Four-point cross stencil
/// `V[i+1, j+1] - V[i-1, j+1] - V[i+1, j-1] + V[i-1, j-1]`.
pub fn apply_dxy(f: &Field) -> Field {
    wrap(f, &DXY)
}

/// Wide composition `D_x D_x`: `V[i+2, j] - 2 V[i, j] + V[i-2, j]`.
pub fn apply_dx2(f: &Field) -> Field {
    wrap(f, &DX2)
}

/// Wide composition `D_y D_y`: `V[i, j+2] - 2 V[i, j] + V[i, j-2]`.
pub fn apply_dy2(f: &Field) -> Field {
    wrap(f, &DY2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Grid2D;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::square(0.0, (n + 1) as f64, 1.0).unwrap()
    }

    fn spike(n: usize, a: usize, b: usize) -> Field {
        let mut f = Field::zeros(grid(n));
        f.values[[a, b]] = 1.0;
        f
    }

    #[test]
    fn constant_field_has_zero_first_differences_inside() {
        let f = Field::from_fn(grid(6), |_, _| 3.5);
        let dx = apply_dx(&f);
        let dy = apply_dy(&f);
        for a in 1..5 {
            for b in 1..5 {
                assert_eq!(dx.values[[a, b]], 0.0);
                assert_eq!(dy.values[[a, b]], 0.0);
            }
        }
        // next to the boundary the zero ghost shows up
        assert_eq!(dx.values[[0, 2]], 3.5);
        assert_eq!(dx.values[[5, 2]], -3.5);
    }

    #[test]
    fn dxx_of_spike() {
        let out = apply_dxx(&spike(7, 3, 3));
        assert_eq!(out.values[[2, 3]], 1.0);
        assert_eq!(out.values[[3, 3]], -2.0);
        assert_eq!(out.values[[4, 3]], 1.0);
        assert_eq!(out.values.iter().filter(|v| **v != 0.0).count(), 3);
    }

    #[test]
    fn dxy_on_bilinear_field() {
        // nodes x = a + 1, so f = x * y equals i * j in node numbering
        let f = Field::from_fn(grid(5), |x, y| x * y);
        let out = apply_dxy(&f);
        assert_eq!(out.values[[2, 2]], 4.0);
    }

    #[test]
    fn wide_second_difference_of_spike() {
        let out = apply_dx2(&spike(9, 4, 4));
        assert_eq!(out.values[[2, 4]], 1.0);
        assert_eq!(out.values[[4, 4]], -2.0);
        assert_eq!(out.values[[6, 4]], 1.0);
        let out = apply_dy2(&spike(9, 4, 4));
        assert_eq!(out.values[[4, 2]], 1.0);
        assert_eq!(out.values[[4, 6]], 1.0);
    }

    fn field_strategy(n: usize) -> impl Strategy<Value = Field> {
        proptest::collection::vec(-10.0..10.0f64, n * n).prop_map(move |v| {
            Field::from_values(grid(n), Array2::from_shape_vec((n, n), v).unwrap()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn stencils_are_linear(f in field_strategy(6), g in field_strategy(6), a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let ops: [fn(&Field) -> Field; 7] =
                [apply_dx, apply_dy, apply_dxx, apply_dyy, apply_dxy, apply_dx2, apply_dy2];
            let comb = f.combine(a, &g, b).unwrap();
            for op in ops {
                let lhs = op(&comb);
                let rhs = op(&f).combine(a, &op(&g), b).unwrap();
                for (x, y) in lhs.values.iter().zip(rhs.values.iter()) {
                    prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }

        #[test]
        fn wide_difference_is_composition_away_from_boundary(f in field_strategy(8)) {
            let direct = apply_dx2(&f);
            let composed = apply_dx(&apply_dx(&f));
            for a in 2..6 {
                for b in 0..8 {
                    prop_assert!((direct.values[[a, b]] - composed.values[[a, b]]).abs() < 1e-12);
                }
            }
            let direct = apply_dy2(&f);
            let composed = apply_dy(&apply_dy(&f));
            for a in 0..8 {
                for b in 2..6 {
                    prop_assert!((direct.values[[a, b]] - composed.values[[a, b]]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn first_difference_is_skew_adjoint(f in field_strategy(8), g in field_strategy(8)) {
            // supports kept off the boundary layer
            let mask = |mut h: Field| {
                for ((a, b), v) in h.values.indexed_iter_mut() {
                    if a == 0 || b == 0 || a == 7 || b == 7 { *v = 0.0; }
                }
                h
            };
            let (f, g) = (mask(f), mask(g));
            let lhs: f64 = g.values.iter().zip(apply_dx(&f).values.iter()).map(|(a, b)| a * b).sum();
            let rhs: f64 = apply_dx(&g).values.iter().zip(f.values.iter()).map(|(a, b)| a * b).sum();
            prop_assert!((lhs + rhs).abs() < 1e-9);
        }
    }
}
