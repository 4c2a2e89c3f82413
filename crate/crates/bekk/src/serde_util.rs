//! Serde helpers for truncation levels: JSON has no infinity literal, so
//! fields at the truncation scale accept a number or the string `"inf"`
//! and serialize infinity back as `"inf"`.


use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Deserialize)]
#[serde(untagged)]
enum TauRepr {
    Num(f64),
    Text(String),
}

fn repr_to_f64<E: serde::de::Error>(repr: TauRepr) -> Result<f64, E> {
    match repr {
        TauRepr::Num(v) => Ok(v),
        TauRepr::Text(t) => match t.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" => Ok(f64::INFINITY),
            other => Err(E::custom(format!("expected a number or \"inf\", got {other:?}"))),
        },
    }
}

fn f64_tau<S: Serializer>(v: f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(v)
    }
}

pub fn deserialize_tau<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    repr_to_f64(TauRepr::deserialize(d)?)
}

pub fn serialize_tau<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    f64_tau(*v, s)
}

pub fn deserialize_tau_vec<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    let reprs = Vec::<TauRepr>::deserialize(d)?;
    reprs.into_iter().map(repr_to_f64).collect()
}

pub fn serialize_tau_vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    #[serde(untagged)]
    enum Out {
        Num(f64),
        Text(&'static str),
    }
    let out: Vec<Out> =
        v.iter().map(|&x| if x.is_infinite() { Out::Text("inf") } else { Out::Num(x) }).collect();
    out.serialize(s)
}

pub fn deserialize_tau_opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    let repr = Option::<TauRepr>::deserialize(d)?;
    repr.map(repr_to_f64).transpose()
}

pub fn serialize_tau_opt<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => f64_tau(*x, s),
        None => s.serialize_none(),
    }
}
