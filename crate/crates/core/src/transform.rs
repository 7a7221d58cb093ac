//! Fast cosine/sine transforms on midpoint (type-II) nodes.
//!
//! Conventions for a length-`n` axis with nodes `x_i = (i + 1/2) L / n`:
//!
//! * cosine coefficients `c_j`, `j = 0..n`: `f_i = sum_j c_j cos(j pi (i+1/2)/n)`
//! * sine coefficients `s_m`, `m = 1..=n`, stored at index `m - 1`:
//!   `f_i = sum_m s_m sin(m pi (i+1/2)/n)`
//!
//! Both pairs are exact inverses. Plans are cached per length and shared
//! between threads.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustdct::{DctPlanner, TransformType2And3};

use crate::grid::Basis;

type Plan = Arc<dyn TransformType2And3<f64>>;

fn plan(len: usize) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("transform plan cache poisoned");
    guard
        .entry(len)
        .or_insert_with(|| DctPlanner::new().plan_dct2(len))
        .clone()
}

fn forward_1d(plan: &Plan, basis: Basis, buf: &mut [f64], scratch: &mut [f64]) {
    let n = buf.len();
    let two_over_n = 2.0 / n as f64;
    match basis {
        Basis::Cosine => {
            plan.process_dct2_with_scratch(buf, scratch);
            buf[0] /= n as f64;
            for v in &mut buf[1..] {
                *v *= two_over_n;
            }
        }
        Basis::Sine => {
            plan.process_dst2_with_scratch(buf, scratch);
            for v in &mut buf[..n - 1] {
                *v *= two_over_n;
            }
            buf[n - 1] /= n as f64;
        }
    }
}

fn inverse_1d(plan: &Plan, basis: Basis, buf: &mut [f64], scratch: &mut [f64]) {
    let n = buf.len();
    match basis {
        Basis::Cosine => {
            buf[0] *= 2.0;
            plan.process_dct3_with_scratch(buf, scratch);
        }
        Basis::Sine => {
            buf[n - 1] *= 2.0;
            plan.process_dst3_with_scratch(buf, scratch);
        }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn along_rows(data: &mut [f64], row_len: usize, basis: Basis, dir: Direction) {
    let p = plan(row_len);
    let scratch_len = p.get_scratch_len();
    data.par_chunks_mut(row_len).for_each_init(
        || vec![0.0; scratch_len],
        |scratch, row| match dir {
            Direction::Forward => forward_1d(&p, basis, row, scratch),
            Direction::Inverse => inverse_1d(&p, basis, row, scratch),
        },
    );
}

fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(rows).enumerate().for_each(|(c, dst)| {
        for (r, d) in dst.iter_mut().enumerate() {
            *d = src[r * cols + c];
        }
    });
    out
}

fn apply_2d(values: &[f64], nx: usize, ny: usize, basis: [Basis; 2], dir: Direction) -> Vec<f64> {
    debug_assert_eq!(values.len(), nx * ny);
    let mut data = values.to_vec();
    along_rows(&mut data, ny, basis[1], dir);
    let mut t = transpose(&data, nx, ny);
    along_rows(&mut t, nx, basis[0], dir);
    transpose(&t, ny, nx)
}

/// Nodal values (x-major, `nx * ny`) to coefficients in the given basis.
pub(crate) fn forward_2d(values: &[f64], nx: usize, ny: usize, basis: [Basis; 2]) -> Vec<f64> {
    apply_2d(values, nx, ny, basis, Direction::Forward)
}

/// Coefficients to nodal values.
pub(crate) fn inverse_2d(coeffs: &[f64], nx: usize, ny: usize, basis: [Basis; 2]) -> Vec<f64> {
    apply_2d(coeffs, nx, ny, basis, Direction::Inverse)
}
