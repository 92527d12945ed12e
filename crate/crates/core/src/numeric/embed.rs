use std::f64::consts::PI;

use crate::{Error, Result};

/// Sinusoidal features of `t ∈ [0, 1]`.
///
/// Entry `2j` is `sin((j + 1)·π·t)` and entry `2j + 1` is `cos((j + 1)·π·t)`;
/// an odd width drops the final cosine. The first pair alone is injective on
/// `[0, 1]`, so distinct times give distinct embeddings for any width ≥ 2.
pub fn time_embed(t: f64, width: usize) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeOutOfRange(t));
    }
    let mut out = Vec::with_capacity(width);
    time_embed_into(t, width, &mut out);
    Ok(out)
}

/// Appends the embedding to `out`; the caller guarantees `t ∈ [0, 1]`.
pub(crate) fn time_embed_into(t: f64, width: usize, out: &mut Vec<f64>) {
    for i in 0..width {
        let freq = (i / 2 + 1) as f64 * PI;
        out.push(if i % 2 == 0 { (freq * t).sin() } else { (freq * t).cos() });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_alternates() {
        let e = time_embed(0.0, 6).unwrap();
        assert_eq!(e, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn quarter_time_width_eight() {
        let e = time_embed(0.25, 8).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // freqs pi, 2pi, 3pi, 4pi at t = 1/4
        let expected = [s, s, 1.0, 0.0, s, -s, 0.0, -1.0];
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{e:?}");
        }
    }

    #[test]
    fn deterministic_and_distinct() {
        assert_eq!(time_embed(0.3, 4).unwrap(), time_embed(0.3, 4).unwrap());
        assert_ne!(time_embed(0.3, 2).unwrap(), time_embed(0.7, 2).unwrap());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(time_embed(1.5, 4), Err(Error::TimeOutOfRange(_))));
        assert!(time_embed(-0.1, 4).is_err());
    }
}
