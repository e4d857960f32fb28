//! Strided matrix products on top of `matrixmultiply`.

/// A row-major matrix stored at `data`, possibly viewed transposed.
#[derive(Clone, Copy)]
pub(crate) struct View {
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl View {
    /// Stored `[rows, cols]`; `transposed` views it as `[cols, rows]`.
    pub fn stored(rows: usize, cols: usize, transposed: bool) -> Self {
        if transposed {
            Self { rows: cols, cols: rows, rs: 1, cs: cols as isize }
        } else {
            Self { rows, cols, rs: cols as isize, cs: 1 }
        }
    }

    pub fn t(self) -> Self {
        Self { rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }
}

/// `c = a * b + beta * c` where all three are strided views.
pub(crate) fn gemm(a: &[f64], av: View, b: &[f64], bv: View, c: &mut [f64], cv: View, beta: f64) {
    assert_eq!(av.cols, bv.rows);
    assert_eq!((av.rows, bv.cols), (cv.rows, cv.cols));
    let (m, k, n) = (av.rows, av.cols, bv.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!(span(av) <= a.len() && span(bv) <= b.len() && span(cv) <= c.len());
    // SAFETY: the views were built from the slice shapes and the spans checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            av.rs,
            av.cs,
            b.as_ptr(),
            bv.rs,
            bv.cs,
            beta,
            c.as_mut_ptr(),
            cv.rs,
            cv.cs,
        );
    }
}

fn span(v: View) -> usize {
    if v.rows == 0 || v.cols == 0 {
        return 0;
    }
    ((v.rows - 1) as isize * v.rs + (v.cols - 1) as isize * v.cs) as usize + 1
}
