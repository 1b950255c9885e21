//! Oracles shared by the integration tests. They deliberately avoid the
//! library's own routines.

#![allow(dead_code)]

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest componentwise `|a - b| / max(|a|, |b|, floor)`.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Minimum within-cluster SSE over every split of `points` into two
/// non-empty groups, each scored against its own mean.
pub fn brute_force_sse(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    assert!((2..=20).contains(&n));
    let sse = |group: &[&Vec<f64>]| -> f64 {
        let d = group[0].len();
        let mut mean = vec![0.0; d];
        for p in group {
            for (m, x) in mean.iter_mut().zip(p.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= group.len() as f64);
        group
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>())
            .sum()
    };
    let mut best = f64::INFINITY;
    // Fixing the last point in group B visits each bipartition once.
    for mask in 1u32..(1 << (n - 1)) {
        let (a, b): (Vec<_>, Vec<_>) = (0..n).partition(|&i| i < n - 1 && mask & (1 << i) != 0);
        let a: Vec<&Vec<f64>> = a.iter().map(|&i| &points[i]).collect();
        let b: Vec<&Vec<f64>> = b.iter().map(|&i| &points[i]).collect();
        best = best.min(sse(&a) + sse(&b));
    }
    best
}

/// Distance between two doubles in units in the last place.
pub fn ulps(a: f64, b: f64) -> u64 {
    if a == b {
        return 0;
    }
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    key(a).abs_diff(key(b))
}

/// Check `instance` against one of the schema files shipped in `schemas/`.
pub fn assert_schema(schema_file: &str, instance: &serde_json::Value) {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(schema_file);
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}
