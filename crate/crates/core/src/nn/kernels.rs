//! Dense, convolution and resampling kernels over flat channel-major buffers.

use super::Shape;

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = gain * W x (+ b)` with `W` stored `[output][input]`.
pub fn dense_forward(w: &[f64], b: Option<&[f64]>, gain: f64, x: &[f64], y: &mut [f64]) {
    let input = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &w[o * input..(o + 1) * input];
        *yo = gain * dot(row, x) + b.map_or(0.0, |b| b[o]);
    }
}

pub fn dense_backward(
    w: &[f64],
    gain: f64,
    x: &[f64],
    gy: &[f64],
    gx: &mut [f64],
    grads: Option<(&mut [f64], Option<&mut [f64]>)>,
) {
    let input = x.len();
    for (o, &g) in gy.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        axpy(gain * g, &w[o * input..(o + 1) * input], gx);
    }
    if let Some((gw, gb)) = grads {
        for (o, &g) in gy.iter().enumerate() {
            if g != 0.0 {
                axpy(gain * g, x, &mut gw[o * input..(o + 1) * input]);
            }
        }
        if let Some(gb) = gb {
            axpy(1.0, gy, gb);
        }
    }
}

/// Valid output columns `[lo, hi)` for kernel column `k` with padding `pad`.
#[inline]
fn span(k: usize, pad: usize, len: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (len + pad).saturating_sub(k).min(len);
    (lo, hi.max(lo))
}

/// Same-padded stride-1 convolution, `W` stored `[cout][cin][k][k]`.
pub fn conv_forward(
    w: &[f64],
    b: Option<&[f64]>,
    gain: f64,
    input: Shape,
    cout: usize,
    k: usize,
    x: &[f64],
    y: &mut [f64],
) {
    let (cin, h, wd) = (input.channels, input.height, input.width);
    let plane = h * wd;
    let pad = k / 2;
    for co in 0..cout {
        let yplane = &mut y[co * plane..(co + 1) * plane];
        yplane.fill(b.map_or(0.0, |b| b[co]));
        for ci in 0..cin {
            let xplane = &x[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let (rlo, rhi) = span(ky, pad, h);
                for kx in 0..k {
                    let wv = gain * w[((co * cin + ci) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let (clo, chi) = span(kx, pad, wd);
                    for r in rlo..rhi {
                        let sr = r + ky - pad;
                        let yrow = &mut yplane[r * wd + clo..r * wd + chi];
                        let xrow = &xplane[sr * wd + clo + kx - pad..sr * wd + chi + kx - pad];
                        axpy(wv, xrow, yrow);
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    w: &[f64],
    gain: f64,
    input: Shape,
    cout: usize,
    k: usize,
    x: &[f64],
    gy: &[f64],
    gx: &mut [f64],
    mut grads: Option<(&mut [f64], Option<&mut [f64]>)>,
) {
    let (cin, h, wd) = (input.channels, input.height, input.width);
    let plane = h * wd;
    let pad = k / 2;
    for co in 0..cout {
        let gplane = &gy[co * plane..(co + 1) * plane];
        if let Some((_, Some(gb))) = grads.as_mut() {
            gb[co] += gplane.iter().sum::<f64>();
        }
        for ci in 0..cin {
            let xplane = &x[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let (rlo, rhi) = span(ky, pad, h);
                for kx in 0..k {
                    let idx = ((co * cin + ci) * k + ky) * k + kx;
                    let wv = gain * w[idx];
                    let (clo, chi) = span(kx, pad, wd);
                    let mut acc = 0.0;
                    for r in rlo..rhi {
                        let sr = r + ky - pad;
                        let grow = &gplane[r * wd + clo..r * wd + chi];
                        let src = sr * wd + clo + kx - pad..sr * wd + chi + kx - pad;
                        if wv != 0.0 {
                            axpy(wv, grow, &mut gx[ci * plane..(ci + 1) * plane][src.clone()]);
                        }
                        if grads.is_some() {
                            acc += dot(grow, &xplane[src]);
                        }
                    }
                    if let Some((gw, _)) = grads.as_mut() {
                        gw[idx] += gain * acc;
                    }
                }
            }
        }
    }
}

/// Nearest-neighbour 2x upsampling.
pub fn upsample_forward(input: Shape, x: &[f64], y: &mut [f64]) {
    let (h, w) = (input.height, input.width);
    for c in 0..input.channels {
        for r in 0..2 * h {
            for col in 0..2 * w {
                y[(c * 2 * h + r) * 2 * w + col] = x[(c * h + r / 2) * w + col / 2];
            }
        }
    }
}

pub fn upsample_backward(input: Shape, gy: &[f64], gx: &mut [f64]) {
    let (h, w) = (input.height, input.width);
    for c in 0..input.channels {
        for r in 0..2 * h {
            for col in 0..2 * w {
                gx[(c * h + r / 2) * w + col / 2] += gy[(c * 2 * h + r) * 2 * w + col];
            }
        }
    }
}

/// 2x2 average pooling (input sides must be even).
pub fn pool_forward(input: Shape, x: &[f64], y: &mut [f64]) {
    let (h, w) = (input.height / 2, input.width / 2);
    let iw = input.width;
    for c in 0..input.channels {
        let base = c * input.height * iw;
        for r in 0..h {
            for col in 0..w {
                let i = base + 2 * r * iw + 2 * col;
                y[(c * h + r) * w + col] = 0.25 * (x[i] + x[i + 1] + x[i + iw] + x[i + iw + 1]);
            }
        }
    }
}

pub fn pool_backward(input: Shape, gy: &[f64], gx: &mut [f64]) {
    let (h, w) = (input.height / 2, input.width / 2);
    let iw = input.width;
    for c in 0..input.channels {
        let base = c * input.height * iw;
        for r in 0..h {
            for col in 0..w {
                let g = 0.25 * gy[(c * h + r) * w + col];
                let i = base + 2 * r * iw + 2 * col;
                gx[i] += g;
                gx[i + 1] += g;
                gx[i + iw] += g;
                gx[i + iw + 1] += g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition of a same-padded convolution.
    fn conv_reference(w: &[f64], input: Shape, cout: usize, k: usize, x: &[f64]) -> Vec<f64> {
        let (h, wd) = (input.height as i64, input.width as i64);
        let pad = (k / 2) as i64;
        let mut y = vec![0.0; cout * (h * wd) as usize];
        for co in 0..cout {
            for r in 0..h {
                for c in 0..wd {
                    let mut s = 0.0;
                    for ci in 0..input.channels {
                        for ky in 0..k as i64 {
                            for kx in 0..k as i64 {
                                let (sr, sc) = (r + ky - pad, c + kx - pad);
                                if sr < 0 || sc < 0 || sr >= h || sc >= wd {
                                    continue;
                                }
                                let wi = ((co * input.channels + ci) * k + ky as usize) * k + kx as usize;
                                s += w[wi] * x[ci * (h * wd) as usize + (sr * wd + sc) as usize];
                            }
                        }
                    }
                    y[co * (h * wd) as usize + (r * wd + c) as usize] = s;
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_direct_definition() {
        let input = Shape::new(2, 5, 4);
        let (cout, k) = (3, 3);
        let w: Vec<f64> = (0..cout * 2 * 9).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let x: Vec<f64> = (0..input.len()).map(|i| ((i * 13 % 7) as f64 - 3.0) / 3.0).collect();
        let mut y = vec![0.0; cout * 20];
        conv_forward(&w, None, 1.0, input, cout, k, &x, &mut y);
        let r = conv_reference(&w, input, cout, k, &x);
        for (a, b) in y.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn resampling_adjoints_hold() {
        // <Ax, y> == <x, A^T y>
        let s = Shape::new(2, 2, 3);
        let x: Vec<f64> = (0..s.len()).map(|i| i as f64 * 0.3 - 1.0).collect();
        let y: Vec<f64> = (0..4 * s.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut ux = vec![0.0; 4 * s.len()];
        upsample_forward(s, &x, &mut ux);
        let mut aty = vec![0.0; s.len()];
        upsample_backward(s, &y, &mut aty);
        assert!((dot(&ux, &y) - dot(&x, &aty)).abs() < 1e-12);

        let big = Shape::new(2, 4, 6);
        let mut px = vec![0.0; s.len()];
        pool_forward(big, &y, &mut px);
        let mut pty = vec![0.0; big.len()];
        pool_backward(big, &x, &mut pty);
        assert!((dot(&px, &x) - dot(&y, &pty)).abs() < 1e-12);
    }
}
