#![allow(dead_code)]

use std::path::PathBuf;

use c3d_core::{RngState, Tensor};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn regen_requested() -> bool {
    std::env::var_os("C3D_REGEN_FIXTURES").is_some()
}

/// Compares `bytes` against the committed fixture, or rewrites it when
/// `C3D_REGEN_FIXTURES` is set.
pub fn check_golden(name: &str, bytes: &[u8]) -> Result<(), String> {
    let path = fixture_dir().join(name);
    if regen_requested() {
        std::fs::create_dir_all(fixture_dir()).unwrap();
        std::fs::write(&path, bytes).unwrap();
        return Ok(());
    }
    let want = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if want != bytes {
        let at = want.iter().zip(bytes).position(|(a, b)| a != b).unwrap_or(want.len().min(bytes.len()));
        return Err(format!(
            "{name}: differs from fixture at byte {at} ({} vs {} bytes)",
            bytes.len(),
            want.len()
        ));
    }
    Ok(())
}

pub fn read_fixture(name: &str) -> Vec<u8> {
    let path = fixture_dir().join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn random_image(r: &mut RngState, h: usize, w: usize) -> Tensor<f32> {
    Tensor::from_fn(&[3, h, w], |_| r.next_f64() as f32)
}

/// Text dump: a `name d0xd1x...` line, then the f32 bit patterns as hex.
pub fn dump_tensors(items: &[(&str, &Tensor<f32>)]) -> String {
    let mut out = String::new();
    for (name, t) in items {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        out.push_str(&format!("{name} {}\n", dims.join("x")));
        for chunk in t.data().chunks(8) {
            let words: Vec<String> = chunk.iter().map(|v| format!("{:08x}", v.to_bits())).collect();
            out.push_str(&words.join(" "));
            out.push('\n');
        }
    }
    out
}

// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

type Plane = Vec<Vec<f64>>;

fn plane(t: &Tensor<f64>, ch: usize) -> Plane {
    let (_, h, w) = t.chw().unwrap();
    (0..h).map(|y| (0..w).map(|x| t.at3(ch, y, x)).collect()).collect()
}

fn halve(p: &Plane) -> Plane {
    let (h, w) = (p.len() / 2, p[0].len() / 2);
    (0..h)
        .map(|y| {
            (0..w)
                .map(|x| {
                    (p[2 * y][2 * x] + p[2 * y][2 * x + 1] + p[2 * y + 1][2 * x] + p[2 * y + 1][2 * x + 1]) / 4.0
                })
                .collect()
        })
        .collect()
}

/// Independent MS-SSIM: 11x11 Gaussian (sigma 1.5) built directly in 2-D,
/// valid windows, every moment a compensated sum over the window, 2x2 mean
/// downsampling, clamped per-scale means, renormalized exponents.
pub fn msssim_oracle(a: &Tensor<f64>, b: &Tensor<f64>, scales: usize) -> f64 {
    const EXP: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let n = 11usize;
    let sigma = 1.5f64;
    let raw: Vec<f64> = (0..n * n)
        .map(|i| {
            let (dy, dx) = ((i / n) as f64 - 5.0, (i % n) as f64 - 5.0);
            (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let z = compensated_sum(raw.iter().copied());
    let win: Vec<f64> = raw.iter().map(|v| v / z).collect();
    let exps: Vec<f64> = {
        let s = compensated_sum(EXP[..scales].iter().copied());
        EXP[..scales].iter().map(|e| e / s).collect()
    };
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (ch_count, _, _) = a.chw().unwrap();
    let mut per_channel = Vec::new();
    for ch in 0..ch_count {
        let (mut x, mut y) = (plane(a, ch), plane(b, ch));
        let mut score = 1.0;
        for (s, &e) in exps.iter().enumerate() {
            let (h, w) = (x.len(), x[0].len());
            let mut terms = Vec::new();
            for oy in 0..=h - n {
                for ox in 0..=w - n {
                    let moment = |f: &dyn Fn(f64, f64) -> f64| {
                        compensated_sum((0..n * n).map(|i| {
                            let (u, v) = (oy + i / n, ox + i % n);
                            win[i] * f(x[u][v], y[u][v])
                        }))
                    };
                    let mx = moment(&|p, _| p);
                    let my = moment(&|_, q| q);
                    let vx = moment(&|p, _| p * p) - mx * mx;
                    let vy = moment(&|_, q| q * q) - my * my;
                    let cov = moment(&|p, q| p * q) - mx * my;
                    let cs = (2.0 * cov + c2) / (vx + vy + c2);
                    let lum = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
                    terms.push(if s + 1 == exps.len() { lum * cs } else { cs });
                }
            }
            let mean = compensated_sum(terms.iter().copied()) / terms.len() as f64;
            score *= mean.max(0.0).powf(e);
            if s + 1 < exps.len() {
                x = halve(&x);
                y = halve(&y);
            }
        }
        per_channel.push(score);
    }
    compensated_sum(per_channel.iter().copied()) / ch_count as f64
}
