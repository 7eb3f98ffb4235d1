use super::autocorr::daily_volume;
use crate::error::{Error, Result};
use crate::flow::TradeTape;

/// Caps every child volume at `fraction` of its day's total volume. Days are
/// consecutive blocks of `day_block` trades.
pub fn clip_volumes(tape: &TradeTape, fraction: f64, day_block: usize) -> Result<TradeTape> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(
            "clip_fraction",
            format!("must lie in (0, 1], got {fraction}"),
        ));
    }
    if day_block == 0 {
        return Err(Error::config("day_block", "must be >= 1"));
    }
    let days = daily_volume(tape, day_block);
    let mut out = tape.clone();
    for (q, d) in out.volume.iter_mut().zip(days) {
        *q = q.min(fraction * d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_when_below_cap() {
        let t = TradeTape::from_signs_volumes(vec![1, -1, 1], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(clip_volumes(&t, 1.0, 10).unwrap(), t);
    }

    #[test]
    fn whole_day_trade_is_capped() {
        let t = TradeTape::from_signs_volumes(vec![1], vec![250.0]).unwrap();
        let c = clip_volumes(&t, 0.01, 10_000).unwrap();
        assert!((c.volume[0] - 2.5).abs() < 1e-12);
    }
}
