use flexfit_autodiff::Tape;

use crate::encoding::SdfNetwork;
use crate::geometry::Vec3;

use super::optim::ParamOptimizer;
use super::TrainError;

/// Loss components of one regression step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub sdf: f64,
    pub eik: f64,
}

/// Weights and stencil for [`sdf_step`].
#[derive(Clone, Copy, Debug)]
pub struct SdfLossWeights {
    pub w_sdf: f64,
    pub w_eik: f64,
    /// Penalty on `mean ‖δ‖²` (in units of the offset bound).
    pub w_offset: f64,
    /// Central-difference step for the gradient-norm term.
    pub eik_h: f64,
    /// The gradient-norm term uses every `eik_stride`-th sample.
    pub eik_stride: usize,
}

/// Six-point stencil around every `stride`-th point, blocked as
/// `[+x, −x, +y, −y, +z, −z]`.
fn stencil(points: &[Vec3], stride: usize, h: f64) -> Vec<Vec3> {
    let centers: Vec<&Vec3> = points.iter().step_by(stride.max(1)).collect();
    let mut out = Vec::with_capacity(centers.len() * 6);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut d = Vec3::zeros();
            d[axis] = sign * h;
            out.extend(centers.iter().map(|p| *p + d));
        }
    }
    out
}

/// Loss `w_sdf·mean|s − target| + w_eik·mean(‖∇s‖ − 1)² + w_offset·mean‖δ‖²`
/// on one batch, followed by an optimizer update. Returns the loss before
/// the update.
pub fn sdf_step(
    net: &mut SdfNetwork,
    opt: &mut ParamOptimizer,
    points: &[Vec3],
    targets: &[f64],
    weights: &SdfLossWeights,
) -> Result<LossParts, TrainError> {
    let n = points.len();
    let use_eik = weights.w_eik > 0.0;
    let mut all = points.to_vec();
    if use_eik {
        all.extend(stencil(points, weights.eik_stride, weights.eik_h));
    }
    let lookup = net.lookup(&all)?;
    let mut tape = Tape::new();
    let vars = net.bind(&mut tape);
    let raw = net.vertex_raw_tape(&mut tape, &vars, &lookup);

    let main = tape.rows(raw, 0, n);
    let s = tape.columns(main, 0, 1);
    let t = tape.constant(targets.to_vec(), n, 1);
    let diff = tape.sub(s, t);
    let diff = tape.abs(diff);
    let l_sdf = tape.mean(diff);
    let mut total = tape.scale(l_sdf, weights.w_sdf);

    let mut eik = 0.0;
    if use_eik {
        let m = (all.len() - n) / 6;
        let s_all = tape.columns(raw, 0, 1);
        let mut g2 = None;
        for axis in 0..3 {
            let lo = n + 2 * axis * m;
            let plus = tape.rows(s_all, lo, lo + m);
            let minus = tape.rows(s_all, lo + m, lo + 2 * m);
            let d = tape.sub(plus, minus);
            let d = tape.scale(d, 1.0 / (2.0 * weights.eik_h));
            let sq = tape.square(d);
            g2 = Some(match g2 {
                None => sq,
                Some(acc) => tape.add(acc, sq),
            });
        }
        let norm = tape.sqrt(g2.expect("three axes"));
        let one = tape.constant(vec![1.0], 1, 1);
        let dev = tape.sub(norm, one);
        let dev = tape.square(dev);
        let l_eik = tape.mean(dev);
        eik = tape.scalar(l_eik);
        let term = tape.scale(l_eik, weights.w_eik);
        total = tape.add(total, term);
    }
    if weights.w_offset > 0.0 {
        let d = tape.columns(main, 1, 4);
        let d = tape.tanh(d);
        let d = tape.square(d);
        let l_off = tape.mean(d);
        let term = tape.scale(l_off, weights.w_offset);
        total = tape.add(total, term);
    }

    let parts = LossParts {
        total: tape.scalar(total),
        sdf: tape.scalar(l_sdf),
        eik,
    };
    if !parts.total.is_finite() {
        return Ok(parts);
    }
    let grads = tape.backward(total)?;
    opt.step(net.buffers_mut(), &grads, &vars.all())?;
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_layout() {
        let pts = [Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()];
        let s = stencil(&pts, 2, 0.1);
        assert_eq!(s.len(), 12);
        assert_eq!(s[0], Vec3::new(0.1, 0.0, 0.0));
        assert_eq!(s[1], Vec3::new(0.1, 1.0, 0.0));
        assert_eq!(s[2], Vec3::new(-0.1, 0.0, 0.0));
        assert_eq!(s[11], Vec3::new(0.0, 1.0, -0.1));
    }
}
