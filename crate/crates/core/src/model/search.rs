use std::cmp::Ordering;

use super::ModelError;

/// Anything that yields a next-token distribution given a state and the
/// previously emitted token.
pub trait StepModel {
    type State: Clone;
    /// Per-step record kept alongside each hypothesis.
    type Trace: Clone;

    /// Initial state and the token fed at the first step.
    fn start(&mut self) -> (Self::State, usize);

    fn step(&mut self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State, Self::Trace), ModelError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<T> {
    /// Emitted ids, ending with the stop id unless cut off at the length limit.
    pub tokens: Vec<usize>,
    /// Sum of natural-log probabilities of `tokens`.
    pub score: f64,
    pub trace: Vec<T>,
}

fn log_prob(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Emits the most probable token each step until `stop` or `max_len` tokens.
pub fn greedy_search<M: StepModel>(model: &mut M, stop: usize, max_len: usize) -> Result<Hypothesis<M::Trace>, ModelError> {
    let (mut state, mut prev) = model.start();
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
        trace: Vec::new(),
    };
    while hyp.tokens.len() < max_len {
        let (probs, next, trace) = model.step(&state, prev)?;
        let tok = argmax(&probs);
        hyp.score += log_prob(probs[tok]);
        hyp.tokens.push(tok);
        hyp.trace.push(trace);
        if tok == stop {
            break;
        }
        state = next;
        prev = tok;
    }
    Ok(hyp)
}

struct Live<S, T> {
    hyp: Hypothesis<T>,
    state: S,
    last: usize,
}

/// Keeps the `width` best partial hypotheses per step, ranked by accumulated
/// log-probability (ties: earlier hypothesis, then lower token id). Finished
/// hypotheses are those ending in `stop` or reaching `max_len`. The greedy
/// hypothesis also competes, so the result never scores below greedy decoding.
pub fn beam_search<M: StepModel>(
    model: &mut M,
    stop: usize,
    max_len: usize,
    width: usize,
) -> Result<Hypothesis<M::Trace>, ModelError> {
    if width == 0 {
        return Err(ModelError::ZeroBeamWidth);
    }
    let (state, first) = model.start();
    let mut live = vec![Live {
        hyp: Hypothesis {
            tokens: Vec::new(),
            score: 0.0,
            trace: Vec::new(),
        },
        state,
        last: first,
    }];
    let mut finished: Vec<Hypothesis<M::Trace>> = Vec::new();

    for depth in 0..max_len {
        let mut expansions = Vec::with_capacity(live.len());
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (i, l) in live.iter().enumerate() {
            let (probs, next, trace) = model.step(&l.state, l.last)?;
            for (tok, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    candidates.push((l.hyp.score + p.ln(), i, tok));
                }
            }
            expansions.push((probs, next, trace));
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let last_step = depth + 1 == max_len;
        let mut next_live = Vec::new();
        for &(score, i, tok) in candidates.iter().take(width) {
            let (_, next_state, trace) = &expansions[i];
            let mut hyp = live[i].hyp.clone();
            hyp.tokens.push(tok);
            hyp.trace.push(trace.clone());
            hyp.score = score;
            if tok == stop || last_step {
                finished.push(hyp);
            } else {
                next_live.push(Live {
                    hyp,
                    state: next_state.clone(),
                    last: tok,
                });
            }
        }
        live = next_live;
        if live.is_empty() || finished.len() >= width {
            break;
        }
    }

    let mut best: Option<Hypothesis<M::Trace>> = None;
    for hyp in finished {
        if best.as_ref().map_or(true, |b| hyp.score > b.score) {
            best = Some(hyp);
        }
    }
    let greedy = greedy_search(model, stop, max_len)?;
    Ok(match best {
        Some(b) if b.score >= greedy.score => b,
        _ => greedy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Distribution depends only on the prefix; defined by a lookup closure.
    struct Table<F: Fn(&[usize]) -> Vec<f64>> {
        dist: F,
    }

    impl<F: Fn(&[usize]) -> Vec<f64>> StepModel for Table<F> {
        type State = Vec<usize>;
        type Trace = ();

        fn start(&mut self) -> (Vec<usize>, usize) {
            (Vec::new(), usize::MAX)
        }

        fn step(&mut self, state: &Vec<usize>, prev: usize) -> Result<(Vec<f64>, Vec<usize>, ()), ModelError> {
            let mut prefix = state.clone();
            if prev != usize::MAX {
                prefix.push(prev);
            }
            Ok(((self.dist)(&prefix), prefix, ()))
        }
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.25; 4]), 0);
    }

    #[test]
    fn greedy_respects_max_len() {
        let mut m = Table { dist: |_: &[usize]| vec![0.1, 0.9] };
        let hyp = greedy_search(&mut m, 0, 1).unwrap();
        assert_eq!(hyp.tokens, vec![1]);
    }

    #[test]
    fn beam_finds_path_greedy_misses() {
        // stop = 0. Greedy takes 1 (0.6) then a flat tail; 2 (0.4) leads to a
        // near-certain stop.
        let dist = |prefix: &[usize]| -> Vec<f64> {
            match prefix {
                [] => vec![0.0, 0.6, 0.4],
                [1] => vec![0.34, 0.33, 0.33],
                [2] => vec![0.99, 0.005, 0.005],
                _ => vec![1.0, 0.0, 0.0],
            }
        };
        let greedy = greedy_search(&mut Table { dist }, 0, 3).unwrap();
        let beam = beam_search(&mut Table { dist }, 0, 3, 2).unwrap();
        assert_eq!(beam.tokens, vec![2, 0]);
        assert!(beam.score > greedy.score);
        let one = beam_search(&mut Table { dist }, 0, 3, 1).unwrap();
        assert_eq!(one, greedy);
        assert!(beam_search(&mut Table { dist }, 0, 3, 0).is_err());
    }
}
