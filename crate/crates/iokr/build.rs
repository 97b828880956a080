fn main() {
    // BLAS + CBLAS + LAPACK symbols come from the system OpenBLAS library
    // (Debian/Ubuntu: libopenblas-dev). ndarray's `blas` feature and the
    // LAPACK shims in src/scalar.rs both resolve against it.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
