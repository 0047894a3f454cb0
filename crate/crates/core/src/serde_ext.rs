//! `f64` fields that may be infinite. JSON has no infinity literal, so the
//! value is written as the string `"inf"` (or `"-inf"`) and read back from
//! either that string or a plain number.

use serde::{de, Deserialize, Deserializer, Serializer};

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(t) => match t.as_str() {
            "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => Err(de::Error::custom(format!("expected a number or \"inf\", got {other:?}"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct W {
        #[serde(with = "super")]
        v: f64,
    }

    #[test]
    fn round_trip() {
        for v in [f64::INFINITY, f64::NEG_INFINITY, 1.25, 0.0] {
            let s = serde_json::to_string(&W { v }).unwrap();
            assert_eq!(serde_json::from_str::<W>(&s).unwrap(), W { v });
        }
        assert!(serde_json::from_str::<W>("{\"v\":\"big\"}").is_err());
    }
}
