//! Dense matrix exponential for the small per-mode systems.
//!
//! Scaling-and-squaring with the order-13 Pade approximant (Higham 2005).
//! Sizes here are 3x3 .. 8x8, so a simple heap matrix is plenty.

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>, // row-major
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            m.a[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn add_scaled(&mut self, s: f64, other: &Mat) {
        for (a, b) in self.a.iter_mut().zip(other.a.iter()) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.a.iter_mut() {
            *a *= s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.a[i * n + j] * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// One-norm (max column sum).
    pub fn norm_1(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self.a[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Solve `self * X = B` in place via LU with partial pivoting.
    pub fn solve(&self, b: &Mat) -> Mat {
        let n = self.n;
        let mut lu = self.a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut p = col;
            let mut best = lu[piv[col] * n + col].abs();
            for r in (col + 1)..n {
                let v = lu[piv[r] * n + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv.swap(col, p);
            let diag = lu[piv[col] * n + col];
            for r in (col + 1)..n {
                let f = lu[piv[r] * n + col] / diag;
                lu[piv[r] * n + col] = f;
                for c in (col + 1)..n {
                    lu[piv[r] * n + c] -= f * lu[piv[col] * n + c];
                }
            }
        }
        let mut x = Mat::zeros(n);
        for rhs_col in 0..n {
            // forward substitution
            let mut y = vec![0.0; n];
            for r in 0..n {
                let mut acc = b.a[piv[r] * n + rhs_col];
                for c in 0..r {
                    acc -= lu[piv[r] * n + c] * y[c];
                }
                y[r] = acc;
            }
            // back substitution
            for r in (0..n).rev() {
                let mut acc = y[r];
                for c in (r + 1)..n {
                    acc -= lu[piv[r] * n + c] * x.a[c * n + rhs_col];
                }
                x.a[r * n + rhs_col] = acc / lu[piv[r] * n + r];
            }
        }
        x
    }
}

/// `exp(A)` by scaling-and-squaring with the [13/13] Pade approximant.
pub fn expm(a: &Mat) -> Mat {
    const THETA_13: f64 = 5.371_920_351_148_152;
    let norm = a.norm_1();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let mut b = a.clone();
    if s > 0 {
        b.scale(0.5f64.powi(s));
    }
    let mut e = pade13(&b);
    for _ in 0..s {
        e = e.matmul(&e);
    }
    e
}

fn pade13(a: &Mat) -> Mat {
    const C: [f64; 14] = [
        64_764_752_532_480_000.0,
        32_382_376_266_240_000.0,
        7_771_770_303_897_600.0,
        1_187_353_796_428_800.0,
        129_060_195_264_000.0,
        10_559_470_521_600.0,
        670_442_572_800.0,
        33_522_128_640.0,
        1_323_241_920.0,
        40_840_800.0,
        960_960.0,
        16_380.0,
        182.0,
        1.0,
    ];
    let n = a.n;
    let id = Mat::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    // U = A (A6 (c13 A6 + c11 A4 + c9 A2) + c7 A6 + c5 A4 + c3 A2 + c1 I)
    let mut inner = Mat::zeros(n);
    inner.add_scaled(C[13], &a6);
    inner.add_scaled(C[11], &a4);
    inner.add_scaled(C[9], &a2);
    let mut u = a6.matmul(&inner);
    u.add_scaled(C[7], &a6);
    u.add_scaled(C[5], &a4);
    u.add_scaled(C[3], &a2);
    u.add_scaled(C[1], &id);
    let u = a.matmul(&u);

    // V = A6 (c12 A6 + c10 A4 + c8 A2) + c6 A6 + c4 A4 + c2 A2 + c0 I
    let mut inner = Mat::zeros(n);
    inner.add_scaled(C[12], &a6);
    inner.add_scaled(C[10], &a4);
    inner.add_scaled(C[8], &a2);
    let mut v = a6.matmul(&inner);
    v.add_scaled(C[6], &a6);
    v.add_scaled(C[4], &a4);
    v.add_scaled(C[2], &a2);
    v.add_scaled(C[0], &id);

    // (V - U) X = (V + U)
    let mut vmu = v.clone();
    vmu.add_scaled(-1.0, &u);
    let mut vpu = v;
    vpu.add_scaled(1.0, &u);
    vmu.solve(&vpu)
}

/// `phi1(A) = A^{-1} (exp(A) - I)`, computed robustly via the augmented
/// block matrix `exp([[A, I], [0, 0]]) = [[exp(A), phi1(A)], [0, I]]`.
pub fn phi1(a: &Mat) -> Mat {
    let n = a.n;
    let mut aug = Mat::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            aug.a[i * 2 * n + j] = a.a[i * n + j];
        }
        aug.a[i * 2 * n + n + i] = 1.0;
    }
    let e = expm(&aug);
    let mut out = Mat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.a[i * n + j] = e.a[i * 2 * n + n + j];
        }
    }
    out
}
