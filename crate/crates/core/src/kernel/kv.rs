//! Flat `key=value` serialization of kernel specs.
//!
//! ```text
//! family=tspl
//! alpha=1.2
//! delta=0.01
//! cutoff=inf
//! ```
//!
//! `Z` is never written; it is recomputed from `(alpha, delta, cutoff)`.

use std::collections::BTreeMap;

use super::{KernelFamily, KernelKind, KernelSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub(crate) fn parse_real<T: Scalar>(key: &str, raw: &str) -> Result<T> {
    let v = raw.trim();
    let x: f64 = match v.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => f64::INFINITY,
        "-inf" | "-infinity" => f64::NEG_INFINITY,
        _ => v.parse().map_err(|_| Error::Parse(format!("`{key}`: cannot parse `{v}` as a number")))?,
    };
    Ok(T::lit(x))
}

pub(crate) fn format_real<T: Scalar>(x: T) -> String {
    if x.is_infinite() {
        if x > T::zero() {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{}", x.to_f64_lossy())
    }
}

impl<T: Scalar> KernelSpec<T> {
    /// Key-value pairs in a stable order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out = vec![("family".to_string(), self.kind().as_str().to_string())];
        match self.family {
            KernelFamily::Exponential { lambda } => out.push(("lambda".into(), format_real(lambda))),
            KernelFamily::Tspl { alpha, delta, .. } => {
                out.push(("alpha".into(), format_real(alpha)));
                out.push(("delta".into(), format_real(delta)));
            }
            KernelFamily::ConvexComboExp { theta, lambda_a, lambda_b } => {
                out.push(("theta".into(), format_real(theta)));
                out.push(("lambda_a".into(), format_real(lambda_a)));
                out.push(("lambda_b".into(), format_real(lambda_b)));
            }
            KernelFamily::ShiftedPower { a } => out.push(("a".into(), format_real(a))),
        }
        out.push(("cutoff".into(), format_real(self.cutoff)));
        out
    }

    pub fn to_kv_string(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Builds a spec from key-value pairs. `cutoff` defaults to `inf`.
    pub fn from_pairs<K, V, I>(pairs: I) -> Result<Self>
    where
        K: AsRef<str>,
        V: AsRef<str>,
        I: IntoIterator<Item = (K, V)>,
    {
        let map: BTreeMap<String, String> = pairs
            .into_iter()
            .map(|(k, v)| (k.as_ref().trim().to_ascii_lowercase(), v.as_ref().trim().to_string()))
            .collect();
        let get = |key: &str| -> Result<T> {
            let raw = map.get(key).ok_or_else(|| Error::Parse(format!("kernel spec is missing `{key}`")))?;
            parse_real(key, raw)
        };
        let family = map.get("family").ok_or_else(|| Error::Parse("kernel spec is missing `family`".into()))?;
        let cutoff = match map.get("cutoff") {
            Some(raw) => parse_real("cutoff", raw)?,
            None => T::infinity(),
        };
        match KernelKind::parse(family)? {
            KernelKind::Exponential => KernelSpec::exponential(get("lambda")?)?.with_cutoff(cutoff),
            KernelKind::Tspl => KernelSpec::tspl(get("alpha")?, get("delta")?, cutoff),
            KernelKind::ConvexComboExp => {
                KernelSpec::convex_combo(get("theta")?, get("lambda_a")?, get("lambda_b")?)?.with_cutoff(cutoff)
            }
            KernelKind::ShiftedPower => KernelSpec::shifted_power(get("a")?, cutoff),
        }
    }

    /// Parses a `key=value` block; blank lines and `#` comments are ignored.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            pairs.push((k.to_string(), v.to_string()));
        }
        Self::from_pairs(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tspl_block_round_trips_and_recomputes_z() {
        let text = "family=tspl\nalpha=1.2\ndelta=0.01\ncutoff=inf\n";
        let k = KernelSpec::<f64>::from_kv_str(text).unwrap();
        assert_eq!(k.to_kv_string(), text);
        match *k.family() {
            KernelFamily::Tspl { z, .. } => assert!((z - 0.2 * 0.01f64.powf(0.2)).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert!(!text.contains("z="));
    }

    #[test]
    fn rejects_missing_and_unknown() {
        assert!(KernelSpec::<f64>::from_kv_str("family=exponential\n").is_err());
        assert!(KernelSpec::<f64>::from_kv_str("family=gaussian\nlambda=1\n").is_err());
        assert!(KernelSpec::<f64>::from_kv_str("lambda=1\n").is_err());
        assert!(KernelSpec::<f64>::from_kv_str("family=exponential\nlambda=abc\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_any_family(kind in 0usize..4, p1 in 0.05f64..5.0, p2 in 0.01f64..2.0, p3 in 0.1f64..80.0, cut in prop::option::of(0.5f64..30.0)) {
            let cutoff = cut.unwrap_or(f64::INFINITY);
            let spec = match kind {
                0 => KernelSpec::exponential(p3).unwrap().with_cutoff(cutoff).unwrap(),
                1 => KernelSpec::tspl(1.0 + p1, p2, cutoff).unwrap(),
                2 => KernelSpec::convex_combo(p2 / 2.0, p1, p3).unwrap().with_cutoff(cutoff).unwrap(),
                _ => KernelSpec::shifted_power(p1, cut.unwrap_or(5.0)).unwrap(),
            };
            let back = KernelSpec::<f64>::from_kv_str(&spec.to_kv_string()).unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
