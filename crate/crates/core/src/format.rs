//! Deterministic number formatting shared by every emitted artifact.

/// Scientific notation with nine significant digits, e.g. `1.00000000e-1`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0.00000000e0"
        return "0.00000000e0".to_string();
    }
    format!("{:.8e}", x)
}

/// `x` rounded to nine significant digits, for embedding in JSON.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    sig9(x).parse().expect("sig9 output always parses")
}
