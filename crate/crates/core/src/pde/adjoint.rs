//! Reverse-mode derivative of [`forward`](super::forward).
//!
//! The sweep walks the stored states from `H[K]` back to `H[-1]`, applying
//! the transpose of each iteration. It is the exact derivative of the
//! discrete recurrence, including the boundary handling and the softplus
//! reparameterisation of the diffusion coefficients.

use super::params::{sigmoid, PdeLayerParams, VelocityMode};
use super::solver::{read, ChannelConsts, LayerTrace, Neighbors};
use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, Real};

#[inline]
fn scatter(plane: &mut [Real], width: usize, x: Option<usize>, y: Option<usize>, v: Real) {
    if let (Some(x), Some(y)) = (x, y) {
        plane[y * width + x] += v;
    }
}

/// Gradients of a scalar loss with respect to the layer input and parameters,
/// given the gradient at the layer output.
pub fn backward(
    trace: &LayerTrace,
    grad_output: &FeatureMap,
    params: &PdeLayerParams,
) -> Result<(FeatureMap, PdeLayerParams)> {
    if !trace.is_complete() {
        return Err(Error::Trace(format!(
            "trace holds {} states, K = {} needs {}",
            trace.states.len(),
            trace.disc.k,
            trace.disc.k + 2
        )));
    }
    let s = trace.output().shape();
    if grad_output.shape() != s {
        return Err(Error::ShapeMismatch {
            expected: s,
            actual: grad_output.shape(),
        });
    }
    params.check_matches(s.channels, s.height, s.width)?;

    let k_iters = trace.disc.k;
    let (h, w) = (s.height, s.width);
    let uniform = params.velocity_mode == VelocityMode::Uniform;
    let nb = Neighbors::new(h, w, trace.boundary);

    // grads[i] is dLoss/dH[i-1].
    let mut grads: Vec<FeatureMap> = (0..k_iters + 1).map(|_| FeatureMap::zeros(s)).collect();
    grads.push(grad_output.clone());

    let mut grad = params.zeros_like();
    let mut d_source = FeatureMap::zeros(s);
    let mut d_bx = vec![0.0 as Real; s.channels];
    let mut d_by = vec![0.0 as Real; s.channels];
    let mut d_u_uniform = vec![0.0 as Real; s.channels];
    let mut d_v_uniform = vec![0.0 as Real; s.channels];
    let consts: Vec<ChannelConsts> = (0..s.channels)
        .map(|c| ChannelConsts::new(params, &trace.disc, c))
        .collect();

    for k in (0..k_iters).rev() {
        // Iteration k maps (states[k], states[k+1]) = (H[k-1], H[k]) to states[k+2].
        let (lower, upper) = grads.split_at_mut(k + 2);
        let g_next = &upper[0];
        let (g_prev_part, g_cur_part) = lower.split_at_mut(k + 1);
        let g_prev = &mut g_prev_part[k];
        let g_cur = &mut g_cur_part[0];
        let h_prev = &trace.states[k];
        let h_cur = &trace.states[k + 1];
        let h_next = &trace.states[k + 2];

        for c in 0..s.channels {
            let cc = &consts[c];
            let (two_bx, two_by) = (2.0 * cc.b_x, 2.0 * cc.b_y);
            let uf = params.u[c].data();
            let vf = params.v[c].data();
            let (ua, va) = if uniform {
                (uf[0] * cc.dt_2dx, vf[0] * cc.dt_2dy)
            } else {
                (0.0, 0.0)
            };
            let mut acc_two_bx = 0.0;
            let mut acc_two_by = 0.0;
            let mut acc_l = 0.0;
            let mut acc_au = 0.0;
            let mut acc_av = 0.0;
            for b in 0..s.batch {
                let gn = g_next.plane(b, c);
                let hk = h_cur.plane(b, c);
                let hm = h_prev.plane(b, c);
                let hx = h_next.plane(b, c);
                let gp = g_prev.plane_mut(b, c);
                // H[k+1] = H[k-1] + N/L and N holds -2·H[k-1] in both second differences.
                let prev_weight = 1.0 - cc.inv_l * (2.0 * two_bx + 2.0 * two_by);
                for (gp, &g) in gp.iter_mut().zip(gn) {
                    *gp += g * prev_weight;
                }
                let gk = g_cur.plane_mut(b, c);
                let ds = d_source.plane_mut(b, c);
                for y in 0..h {
                    let (ys, yn) = (nb.south[y], nb.north[y]);
                    for x in 0..w {
                        let p = y * w + x;
                        let r = gn[p] * cc.inv_l;
                        if r == 0.0 {
                            continue;
                        }
                        let (xe, xw) = (nb.east[x], nb.west[x]);
                        let he = read(hk, w, xe, Some(y));
                        let hw = read(hk, w, xw, Some(y));
                        let hs = read(hk, w, Some(x), ys);
                        let hn = read(hk, w, Some(x), yn);
                        let twice_prev = hm[p] + hm[p];

                        let (ax, ay) = if uniform {
                            (ua, va)
                        } else {
                            (uf[p] * cc.dt_2dx, vf[p] * cc.dt_2dy)
                        };
                        scatter(gk, w, xe, Some(y), r * (two_bx - ax));
                        scatter(gk, w, xw, Some(y), r * (two_bx + ax));
                        scatter(gk, w, Some(x), ys, r * (two_by - ay));
                        scatter(gk, w, Some(x), yn, r * (two_by + ay));
                        ds[p] += r * cc.two_dt;

                        acc_two_bx += r * (he + hw - twice_prev);
                        acc_two_by += r * (hs + hn - twice_prev);
                        acc_l -= r * (hx[p] - hm[p]);

                        let d_ax = r * (hw - he);
                        let d_ay = r * (hn - hs);
                        if uniform {
                            acc_au += d_ax;
                            acc_av += d_ay;
                        } else {
                            let gu = grad.u[c].data_mut();
                            gu[p] += d_ax * cc.dt_2dx;
                            let gv = grad.v[c].data_mut();
                            gv[p] += d_ay * cc.dt_2dy;

                            let u_x = (read(uf, w, xe, Some(y)) - read(uf, w, xw, Some(y))) * cc.inv_2dx;
                            let v_y = (read(vf, w, Some(x), ys) - read(vf, w, Some(x), yn)) * cc.inv_2dy;
                            let c0 = (u_x + v_y) * cc.two_dt;
                            gk[p] -= r * c0;
                            // d(c0) = -r * H[k]; c0 = 2δt (u_x + v_y)
                            let d_div = -r * hk[p] * cc.two_dt;
                            let du = d_div * cc.inv_2dx;
                            let dv = d_div * cc.inv_2dy;
                            let gu = grad.u[c].data_mut();
                            scatter(gu, w, xe, Some(y), du);
                            scatter(gu, w, xw, Some(y), -du);
                            let gv = grad.v[c].data_mut();
                            scatter(gv, w, Some(x), ys, dv);
                            scatter(gv, w, Some(x), yn, -dv);
                        }
                    }
                }
            }
            // L = 1 + 2B_x + 2B_y
            d_bx[c] += 2.0 * acc_two_bx + 2.0 * acc_l;
            d_by[c] += 2.0 * acc_two_by + 2.0 * acc_l;
            d_u_uniform[c] += acc_au * cc.dt_2dx;
            d_v_uniform[c] += acc_av * cc.dt_2dy;
        }
    }

    let input = &trace.states[0];
    let mut grad_input = grads.remove(0);
    grad_input.accumulate(&grads[0])?;
    for c in 0..s.channels {
        let scale = params.source_scale[c];
        let mut d_scale = 0.0;
        let mut d_bias = 0.0;
        for b in 0..s.batch {
            let ds = d_source.plane(b, c);
            let xin = input.plane(b, c);
            let gi = grad_input.plane_mut(b, c);
            for p in 0..ds.len() {
                gi[p] += scale * ds[p];
                d_scale += ds[p] * xin[p];
                d_bias += ds[p];
            }
        }
        grad.source_scale[c] = d_scale;
        grad.source_bias[c] = d_bias;

        let disc = &trace.disc;
        grad.dx_raw[c] = d_bx[c] * disc.delta_t / (disc.delta_x * disc.delta_x) * sigmoid(params.dx_raw[c]);
        grad.dy_raw[c] = d_by[c] * disc.delta_t / (disc.delta_y * disc.delta_y) * sigmoid(params.dy_raw[c]);
        if uniform {
            grad.u[c].data_mut()[0] = d_u_uniform[c];
            grad.v[c].data_mut()[0] = d_v_uniform[c];
        }
    }
    Ok((grad_input, grad))
}
