#![allow(dead_code, clippy::needless_range_loop)]

use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Stdio};

use gpts::bandit::History;

pub const BIN: &str = env!("CARGO_BIN_EXE_gpts");

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Spawns the mock trainer on a free localhost port and returns it with the
/// address it reported.
pub fn spawn_tcp_mock() -> (Child, String) {
    let mut child = Command::new(BIN)
        .args(["mock-trainer", "--transport", "tcp:0"])
        .stdout(Stdio::piped())
        .spawn()
        .expect("spawn mock trainer");
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening ").expect("listening line").to_string();
    (child, addr)
}

pub fn stdio_mock() -> Vec<String> {
    vec![BIN.into(), "mock-trainer".into(), "--transport".into(), "stdio".into()]
}

/// Equal arm choices and bitwise-equal losses and rewards.
pub fn histories_identical(a: &History, b: &History) -> bool {
    a.initial_loss().to_bits() == b.initial_loss().to_bits()
        && a.len() == b.len()
        && a.records().iter().zip(b.records()).all(|(x, y)| {
            x.interaction == y.interaction
                && x.arm_index == y.arm_index
                && x.loss_after.to_bits() == y.loss_after.to_bits()
                && x.reward.to_bits() == y.reward.to_bits()
        })
}

/// Dense reference for GP regression: explicit kernel, Gauss-Jordan inverse.
pub mod oracle {
    pub fn kernel(matern: bool, ls: &[f64], scale: f64, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(y).zip(ls).map(|((a, b), l)| ((a - b) / l).powi(2)).sum();
        if matern {
            let r = (5.0 * r2).sqrt();
            scale * (1.0 + r + r * r / 3.0) * (-r).exp()
        } else {
            scale * (-0.5 * r2).exp()
        }
    }

    pub fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, p);
            let d = m[c][c];
            m[c].iter_mut().for_each(|v| *v /= d);
            for r in 0..n {
                if r != c {
                    let f = m[r][c];
                    if f != 0.0 {
                        for k in 0..2 * n {
                            m[r][k] -= f * m[c][k];
                        }
                    }
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    pub fn log_det(a: &[Vec<f64>]) -> f64 {
        let n = a.len();
        let mut m = a.to_vec();
        let mut acc = 0.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, p);
            acc += m[c][c].abs().ln();
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        acc
    }

    pub struct Model<'a> {
        pub matern: bool,
        pub ls: &'a [f64],
        pub scale: f64,
        pub noise: f64,
        pub mean: f64,
    }

    impl Model<'_> {
        fn k(&self, x: &[f64], y: &[f64]) -> f64 {
            kernel(self.matern, self.ls, self.scale, x, y)
        }

        fn noisy_inverse(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
            let n = xs.len();
            let a: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| self.k(&xs[i], &xs[j]) + if i == j { self.noise } else { 0.0 }).collect())
                .collect();
            inverse(&a)
        }

        /// Posterior mean vector and covariance matrix at `qs`.
        pub fn predict(&self, xs: &[Vec<f64>], ys: &[f64], qs: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
            let inv = self.noisy_inverse(xs);
            let n = xs.len();
            let resid: Vec<f64> = ys.iter().map(|y| y - self.mean).collect();
            let kq: Vec<Vec<f64>> = qs.iter().map(|q| xs.iter().map(|x| self.k(x, q)).collect()).collect();
            let solve = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| inv[i][j] * v[j]).sum()).collect() };
            let w = solve(&resid);
            let mean = kq.iter().map(|k| self.mean + k.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()).collect();
            let cov = (0..qs.len())
                .map(|a| {
                    let sa = solve(&kq[a]);
                    (0..qs.len())
                        .map(|b| self.k(&qs[a], &qs[b]) - kq[b].iter().zip(&sa).map(|(p, q)| p * q).sum::<f64>())
                        .collect()
                })
                .collect();
            (mean, cov)
        }

        pub fn log_marginal_likelihood(&self, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
            let n = xs.len();
            let a: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| self.k(&xs[i], &xs[j]) + if i == j { self.noise } else { 0.0 }).collect())
                .collect();
            let inv = inverse(&a);
            let r: Vec<f64> = ys.iter().map(|y| y - self.mean).collect();
            let quad: f64 = (0..n).map(|i| (0..n).map(|j| r[i] * inv[i][j] * r[j]).sum::<f64>()).sum();
            -0.5 * quad - 0.5 * log_det(&a) - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
        }
    }
}
