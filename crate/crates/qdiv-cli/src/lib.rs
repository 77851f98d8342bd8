//! Command-line harness for the `qdiv` library: instance files, run
//! configuration, verification suites and sweeps.

pub mod commands;
pub mod config;
pub mod instance;
pub mod suites;

/// Serializes f64 values with non-finite values as strings ("inf", "-inf", "nan"),
/// which plain JSON numbers cannot carry.
pub mod ext_real {
    use serde::Serializer;
    use serde_json::Value;

    pub fn to_value(x: f64) -> Value {
        if x.is_finite() {
            Value::from(x)
        } else if x.is_nan() {
            Value::from("nan")
        } else if x > 0.0 {
            Value::from("inf")
        } else {
            Value::from("-inf")
        }
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        match to_value(*x) {
            Value::String(t) => s.serialize_str(&t),
            _ => s.serialize_f64(*x),
        }
    }
}
