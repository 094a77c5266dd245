//! Serde adapter for `f64` fields that may be non-finite: finite values are
//! numbers, `NaN` and the infinities are the strings `"NaN"`, `"inf"`, `"-inf"`.

use serde::{Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(&x.to_string())
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(x) => Ok(x),
        Repr::Str(s) => match s.as_str() {
            "NaN" | "inf" | "-inf" => Ok(s.parse().expect("literal")),
            _ => Err(serde::de::Error::custom(format!("expected a number, got {s:?}"))),
        },
    }
}

#[cfg(test)]
mod tests {
    #[derive(serde::Serialize, serde::Deserialize, Debug)]
    struct W(#[serde(with = "super")] f64);

    #[test]
    fn non_finite_round_trip() {
        for x in [1.5, -0.0, f64::INFINITY, f64::NEG_INFINITY, 1e-310] {
            let s = serde_json::to_string(&W(x)).unwrap();
            assert_eq!(serde_json::from_str::<W>(&s).unwrap().0.to_bits(), x.to_bits());
        }
        let s = serde_json::to_string(&W(f64::NAN)).unwrap();
        assert_eq!(s, "\"NaN\"");
        assert!(serde_json::from_str::<W>(&s).unwrap().0.is_nan());
        assert!(serde_json::from_str::<W>("\"big\"").is_err());
    }
}
