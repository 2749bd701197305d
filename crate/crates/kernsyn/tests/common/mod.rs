//! Independent reference routines for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kernsyn"))
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

pub fn write_file(dir: &std::path::Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Kernel value written straight from the closed forms.
pub fn kernel_value(kind: &str, l: f64, sigma2: f64, alpha: f64, t1: f64, t2: f64) -> f64 {
    let d = (t1 - t2).abs();
    match kind {
        "exponential" => sigma2 * (-d / l).exp(),
        "gaussian" => sigma2 * (-d * d / (2.0 * l * l)).exp(),
        "cauchy" => sigma2 * (1.0 + d * d / (2.0 * alpha * l * l)).powf(-alpha),
        other => panic!("unknown kernel {other}"),
    }
}

/// Connected components of the ε-graph by breadth-first search over all
/// pairs; components smaller than `min_points` are dropped. Each component
/// is returned as sorted indices, components sorted by size then first index.
pub fn components_brute(points: &[[f64; 3]], eps: f64, min_points: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut head = 0;
        while head < comp.len() {
            let i = comp[head];
            head += 1;
            for j in 0..n {
                if !seen[j] {
                    let d2: f64 = (0..3).map(|k| (points[i][k] - points[j][k]).powi(2)).sum();
                    if d2 <= eps * eps {
                        seen[j] = true;
                        comp.push(j);
                    }
                }
            }
        }
        if comp.len() >= min_points {
            comp.sort_unstable();
            out.push(comp);
        }
    }
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

/// Least-squares plane z = a·x + b·y + c through the points, returned as a
/// unit normal and offset (n·p + d = 0).
pub fn plane_least_squares(points: &[[f64; 3]]) -> ([f64; 3], f64) {
    let mut ata = vec![vec![0.0; 3]; 3];
    let mut atb = vec![0.0; 3];
    for p in points {
        let row = [p[0], p[1], 1.0];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * p[2];
        }
    }
    let x = solve_dense(ata, atb);
    let norm = (x[0] * x[0] + x[1] * x[1] + 1.0).sqrt();
    ([-x[0] / norm, -x[1] / norm, 1.0 / norm], -x[2] / norm)
}

pub fn mean3(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mut m = [0.0; 3];
    for p in points {
        for k in 0..3 {
            m[k] += p[k] / n;
        }
    }
    m
}

pub fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

/// Cyclic Jacobi eigen-decomposition, eigenvalues descending, vectors as
/// columns.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m[k][p], m[k][q]);
                    m[k][p] = c * kp - s * kq;
                    m[k][q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[p][k], m[q][k]);
                    m[p][k] = c * pk - s * qk;
                    m[q][k] = s * pk + c * qk;
                }
                for k in 0..n {
                    let (kp, kq) = (v[k][p], v[k][q]);
                    v[k][p] = c * kp - s * kq;
                    v[k][q] = s * kp + c * kq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y][y].partial_cmp(&m[x][x]).unwrap());
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&i| v[r][i]).collect()).collect();
    (values, vectors)
}

/// Largest principal angle, in degrees, between the column spans of two
/// orthonormal J×k bases given as column lists.
pub fn max_principal_angle_deg(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    // singular values of AᵀB are the cosines; get them from (AᵀB)ᵀ(AᵀB)
    let k = a.len();
    let m: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..b.len()).map(|j| a[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let mtm: Vec<Vec<f64>> = (0..b.len())
        .map(|i| (0..b.len()).map(|j| (0..k).map(|r| m[r][i] * m[r][j]).sum()).collect())
        .collect();
    let (vals, _) = jacobi_eigen(&mtm);
    let smallest = vals.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt().min(1.0);
    smallest.acos().to_degrees()
}
