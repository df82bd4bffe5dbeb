use std::env;

/// Links the system LAPACK/BLAS provider. OpenBLAS ships LAPACK symbols on
/// every mainstream distribution; set `NETSCATTER_LAPACK_LIB` to link a
/// different provider (e.g. `lapack`).
fn main() {
    println!("cargo:rerun-if-env-changed=NETSCATTER_LAPACK_LIB");
    let lib = env::var("NETSCATTER_LAPACK_LIB").unwrap_or_else(|_| "openblas".to_string());
    println!("cargo:rustc-link-lib=dylib={lib}");
}
