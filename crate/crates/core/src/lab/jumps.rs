use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    /// Time the new level became dominant.
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

/// Changes of the dominant level `argmax_j rho_jj` that persist for at least `hold_time`.
///
/// A level counts as dominant only while its population is at least `threshold`; samples
/// with no such level keep the previous dominant level. The first dominant level found is
/// the starting level and is not an event.
pub fn detect_jumps(times: &[f64], populations: &[Vec<f64>], threshold: f64, hold_time: f64) -> Result<Vec<JumpEvent>> {
    if times.len() != populations.len() {
        return Err(Error::Dimension(format!(
            "{} times for {} population samples",
            times.len(),
            populations.len()
        )));
    }
    if hold_time < 0.0 || !hold_time.is_finite() {
        return Err(Error::InvalidArgument("hold_time must be finite and nonnegative".into()));
    }
    let dominant: Vec<Option<usize>> = populations
        .iter()
        .map(|p| {
            p.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .filter(|(_, &v)| v >= threshold)
                .map(|(j, _)| j)
        })
        .collect();
    let mut events = Vec::new();
    let Some(first) = dominant.iter().position(Option::is_some) else {
        return Ok(events);
    };
    let mut current = dominant[first].expect("found");
    let mut i = first + 1;
    while i < times.len() {
        match dominant[i] {
            Some(l) if l != current => {
                let start = times[i];
                let mut k = i;
                while k + 1 < times.len() && dominant[k + 1] != Some(current) && dominant[k + 1].is_none_or(|m| m == l) {
                    k += 1;
                }
                // the new level must hold until start + hold_time, still inside the trace
                let held = times[k] - start >= hold_time - 1e-12 * hold_time.max(1.0);
                if held {
                    events.push(JumpEvent { time: start, from: current, to: l });
                    current = l;
                }
                i = k + 1;
            }
            _ => i += 1,
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(n: usize, dt: f64, f: impl Fn(f64) -> Vec<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let p = t.iter().map(|&x| f(x)).collect();
        (t, p)
    }

    #[test]
    fn constant_trace_has_no_events() {
        let (t, p) = trace(100, 0.1, |_| vec![0.1, 0.8, 0.1]);
        assert!(detect_jumps(&t, &p, 0.5, 0.5).unwrap().is_empty());
    }

    #[test]
    fn step_function_gives_one_event() {
        let (t, p) = trace(400, 0.05, |x| if x < 10.0 { vec![0.0, 1.0, 0.0] } else { vec![1.0, 0.0, 0.0] });
        let ev = detect_jumps(&t, &p, 0.5, 0.5).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0].time - 10.0).abs() <= 0.5);
        assert_eq!((ev[0].from, ev[0].to), (1, 0));
    }

    #[test]
    fn short_excursions_are_ignored() {
        let (t, p) = trace(200, 0.1, |x| if (5.0..5.3).contains(&x) { vec![0.9, 0.1] } else { vec![0.1, 0.9] });
        assert!(detect_jumps(&t, &p, 0.5, 1.0).unwrap().is_empty());
        let (t, p) = trace(200, 0.1, |x| if (5.0..5.3).contains(&x) { vec![0.9, 0.1] } else { vec![0.1, 0.9] });
        assert_eq!(detect_jumps(&t, &p, 0.5, 0.2).unwrap().len(), 2);
    }

    #[test]
    fn jump_at_the_end_without_hold_is_not_counted() {
        let (t, p) = trace(100, 0.1, |x| if x < 9.5 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
        assert!(detect_jumps(&t, &p, 0.5, 1.0).unwrap().is_empty());
    }
}
