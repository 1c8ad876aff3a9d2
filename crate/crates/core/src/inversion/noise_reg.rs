//! Auto-correlation penalty on noise maps over an average-pooling pyramid.

use crate::nn::NoiseMap;

/// Pyramid levels stop once a side reaches this size.
const MIN_SIDE: usize = 8;

struct Level {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

fn pool(l: &Level) -> Level {
    let (h, w) = (l.h / 2, l.w / 2);
    let mut data = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = 2 * r * l.w + 2 * c;
            data[r * w + c] = 0.25 * (l.data[i] + l.data[i + 1] + l.data[i + l.w] + l.data[i + l.w + 1]);
        }
    }
    Level { h, w, data }
}

/// Mean products with the circular one-pixel right and down shifts.
fn correlations(l: &Level) -> (f64, f64) {
    let (mut ch, mut cv) = (0.0, 0.0);
    for r in 0..l.h {
        for c in 0..l.w {
            let v = l.data[r * l.w + c];
            ch += v * l.data[r * l.w + (c + 1) % l.w];
            cv += v * l.data[((r + 1) % l.h) * l.w + c];
        }
    }
    let n = (l.h * l.w) as f64;
    (ch / n, cv / n)
}

fn pyramid(map: &NoiseMap) -> Vec<Level> {
    let mut levels = vec![Level {
        h: map.height,
        w: map.width,
        data: map.data.clone(),
    }];
    loop {
        let l = levels.last().unwrap();
        if l.h <= MIN_SIDE || l.w <= MIN_SIDE || l.h % 2 == 1 || l.w % 2 == 1 {
            break;
        }
        let next = pool(l);
        levels.push(next);
    }
    levels
}

/// Sum over maps and levels of `mean(n * shift_x n)^2 + mean(n * shift_y n)^2`.
pub fn noise_regularization(maps: &[NoiseMap]) -> f64 {
    maps.iter()
        .flat_map(|m| pyramid(m))
        .map(|l| {
            let (a, b) = correlations(&l);
            a * a + b * b
        })
        .sum()
}

/// The penalty and its gradient with respect to every map.
pub fn noise_regularization_grad(maps: &[NoiseMap]) -> (f64, Vec<NoiseMap>) {
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(maps.len());
    for m in maps {
        let levels = pyramid(m);
        // gradient flows from coarse to fine through the pooling steps
        let mut carry: Option<Vec<f64>> = None;
        for l in levels.iter().rev() {
            let (ch, cv) = correlations(l);
            total += ch * ch + cv * cv;
            let n = (l.h * l.w) as f64;
            let mut g = vec![0.0; l.h * l.w];
            for r in 0..l.h {
                for c in 0..l.w {
                    let at = |rr: usize, cc: usize| l.data[rr * l.w + cc];
                    let horiz = at(r, (c + 1) % l.w) + at(r, (c + l.w - 1) % l.w);
                    let vert = at((r + 1) % l.h, c) + at((r + l.h - 1) % l.h, c);
                    g[r * l.w + c] = 2.0 * (ch * horiz + cv * vert) / n;
                }
            }
            if let Some(coarse) = carry {
                let cw = l.w / 2;
                for r in 0..l.h {
                    for c in 0..l.w {
                        g[r * l.w + c] += 0.25 * coarse[(r / 2) * cw + c / 2];
                    }
                }
            }
            carry = Some(g);
        }
        grads.push(NoiseMap {
            height: m.height,
            width: m.width,
            data: carry.unwrap_or_default(),
        });
    }
    (total, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testing::{numeric_grad, relative_error};
    use crate::rng;

    #[test]
    fn constant_map_costs_two_per_level() {
        let m = NoiseMap {
            height: 32,
            width: 32,
            data: vec![1.0; 1024],
        };
        // levels 32, 16, 8
        assert!((noise_regularization(&[m]) - 6.0).abs() < 1e-12);
        let small = NoiseMap {
            height: 8,
            width: 8,
            data: vec![1.0; 64],
        };
        assert!((noise_regularization(&[small]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_is_cheap_and_empty_is_free() {
        let m = NoiseMap::standard_normal(128, 128, &mut rng::seeded(1));
        assert!(noise_regularization(&[m]) < 0.01);
        assert_eq!(noise_regularization(&[]), 0.0);
    }

    #[test]
    fn correlated_maps_are_expensive() {
        let mut g = rng::seeded(2);
        let base = NoiseMap::standard_normal(8, 8, &mut g);
        let mut data = vec![0.0; 256];
        for r in 0..16 {
            for c in 0..16 {
                data[r * 16 + c] = base.data[(r / 2) * 8 + c / 2];
            }
        }
        let smooth = NoiseMap { height: 16, width: 16, data };
        let white = NoiseMap::standard_normal(16, 16, &mut g);
        assert!(noise_regularization(&[smooth]) > 10.0 * noise_regularization(&[white]));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut g = rng::seeded(3);
        let maps = vec![NoiseMap::standard_normal(16, 16, &mut g), NoiseMap::standard_normal(8, 8, &mut g)];
        let (_, grads) = noise_regularization_grad(&maps);
        let mut flat: Vec<f64> = maps.iter().flat_map(|m| m.data.clone()).collect();
        let n = numeric_grad(&mut flat, 1e-6, |v| {
            let a = NoiseMap { height: 16, width: 16, data: v[..256].to_vec() };
            let b = NoiseMap { height: 8, width: 8, data: v[256..].to_vec() };
            noise_regularization(&[a, b])
        });
        let analytic: Vec<f64> = grads.iter().flat_map(|m| m.data.clone()).collect();
        assert!(relative_error(&analytic, &n) < 1e-5);
    }
}
