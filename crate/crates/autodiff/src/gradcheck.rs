use crate::error::AutodiffError;
use crate::tape::{Tape, Var};

/// Maximum relative error between reverse-mode and central-difference
/// gradients of a scalar function, over every coordinate of `point`.
///
/// `f` receives a fresh tape and a `1×n` parameter holding the point and
/// must return a scalar node. The relative error for each coordinate is
/// `|g_ad − g_fd| / max(1, |g_fd|)`.
pub fn grad_check<F>(f: F, point: &[f64], h: f64) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape, Var) -> Var,
{
    let coords: Vec<usize> = (0..point.len()).collect();
    grad_check_coords(f, point, h, &coords)
}

/// [`grad_check`] restricted to a subset of coordinates, for functions with
/// too many inputs to difference exhaustively.
pub fn grad_check_coords<F>(
    f: F,
    point: &[f64],
    h: f64,
    coords: &[usize],
) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape, Var) -> Var,
{
    let n = point.len();
    let mut tape = Tape::new();
    let x = tape.param(point.to_vec(), 1, n);
    let y = f(&mut tape, x);
    let value = tape.scalar(y);
    if !value.is_finite() {
        return Err(AutodiffError::NonFinite {
            coordinate: usize::MAX,
            value,
        });
    }
    let grad = tape.backward(y)?.wrt(x);
    drop(tape);

    let eval = |p: Vec<f64>, coordinate: usize| -> Result<f64, AutodiffError> {
        let mut t = Tape::new();
        let x = t.param(p, 1, n);
        let y = f(&mut t, x);
        let value = t.scalar(y);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(AutodiffError::NonFinite { coordinate, value })
        }
    };

    let mut worst: f64 = 0.0;
    for &i in coords {
        let mut plus = point.to_vec();
        plus[i] += h;
        let mut minus = point.to_vec();
        minus[i] -= h;
        let fd = (eval(plus, i)? - eval(minus, i)?) / (2.0 * h);
        let err = (grad[i] - fd).abs() / fd.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
