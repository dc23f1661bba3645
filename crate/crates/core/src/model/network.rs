use super::search::StepModel;
use super::{DecoderStepOutput, Example, ModelConfig, ModelError, ModelParams, ParamKey, ParamVars, SourceText};
use crate::autodiff::{Tape, Tensor, Var};
use crate::corpus::{START_ID, UNK_ID};

/// How the generation gate is computed at a decoder step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateHook {
    Learned,
    /// Replaces the learned pre-activation; `f64::INFINITY` forces pure
    /// generation and `f64::NEG_INFINITY` pure copying.
    PreActivation(f64),
}

/// Recurrent decoder state plus the previous step's context vector, which is
/// fed back as input.
#[derive(Debug, Clone, Copy)]
pub struct DecoderState {
    pub h: Var,
    pub c: Var,
    pub context: Var,
}

/// Encoder outputs for one input, recorded on a session's tape.
#[derive(Debug, Clone)]
pub struct EncoderStates {
    /// `[n, 2 * hidden]`, forward and backward states concatenated per position.
    pub outputs: Var,
    /// `outputs` projected by the attention encoder weights, `[n, hidden]`.
    features: Var,
    /// One-hot map from input positions to extended ids, `[n, ext_size]`.
    copy_map: Var,
    /// Column of ones used to broadcast row vectors over positions.
    ones: Var,
    len: usize,
    vocab_size: usize,
    ext_size: usize,
    pub initial: DecoderState,
}

impl EncoderStates {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Per-position hidden vectors (width `2 * hidden_size`).
    pub fn position_vectors(&self, tape: &Tape) -> Vec<Vec<f64>> {
        let t = tape.value(self.outputs);
        t.data().chunks(t.cols()).map(<[f64]>::to_vec).collect()
    }
}

/// Tape handles for the four distributions of one step.
#[derive(Debug, Clone, Copy)]
pub struct StepVars {
    pub p_vocab: Var,
    pub attention: Var,
    pub p_gen: Var,
    pub p_final: Var,
}

/// A tape with the model parameters registered on it.
pub struct Session {
    tape: Tape,
    params: ParamVars,
    config: ModelConfig,
}

impl Session {
    pub fn new(params: &ModelParams, trainable: bool) -> Self {
        let mut tape = Tape::new();
        let vars = params.register(&mut tape, trainable);
        Self {
            tape,
            params: vars,
            config: params.config().clone(),
        }
    }

    /// Uses parameter leaves that the caller already put on `tape`.
    pub fn from_parts(tape: Tape, params: ParamVars, config: ModelConfig) -> Self {
        Self { tape, params, config }
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn into_tape(self) -> Tape {
        self.tape
    }

    pub fn param_vars(&self) -> &ParamVars {
        &self.params
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn p(&self, key: ParamKey) -> Var {
        self.params.get(key)
    }

    /// `x @ w + b` for a single row.
    fn affine(&mut self, x: Var, w: ParamKey, b: ParamKey) -> Result<Var, ModelError> {
        let xw = self.tape.matmul(x, self.p(w))?;
        Ok(self.tape.add(xw, self.p(b))?)
    }

    /// One LSTM step with gates packed as `[input, forget, candidate, output]`.
    fn lstm(&mut self, x: Var, h: Var, c: Var, w: ParamKey, b: ParamKey) -> Result<(Var, Var), ModelError> {
        let hs = self.config.hidden_size;
        let xh = self.tape.concat(&[x, h], 1)?;
        let z = self.affine(xh, w, b)?;
        let t = &mut self.tape;
        let i = t.slice(z, 1, 0, hs)?;
        let i = t.sigmoid(i)?;
        let f = t.slice(z, 1, hs, hs)?;
        let f = t.sigmoid(f)?;
        let g = t.slice(z, 1, 2 * hs, hs)?;
        let g = t.tanh(g)?;
        let o = t.slice(z, 1, 3 * hs, hs)?;
        let o = t.sigmoid(o)?;
        let fc = t.mul(f, c)?;
        let ig = t.mul(i, g)?;
        let c_new = t.add(fc, ig)?;
        let tc = t.tanh(c_new)?;
        let h_new = t.mul(o, tc)?;
        Ok((h_new, c_new))
    }

    pub fn encode(&mut self, source: &SourceText) -> Result<EncoderStates, ModelError> {
        let n = source.len();
        if n == 0 {
            return Err(ModelError::EmptyInput);
        }
        if n > self.config.max_input_len {
            return Err(ModelError::InputTooLong {
                len: n,
                max: self.config.max_input_len,
            });
        }
        if let Some(&bad) = source.ids().iter().find(|&&id| id >= self.config.vocab_size) {
            return Err(ModelError::TokenOutOfRange {
                id: bad,
                vocab: self.config.vocab_size,
            });
        }
        let hs = self.config.hidden_size;
        let emb = self.tape.embedding(self.p(ParamKey::Embedding), source.ids())?;
        let rows: Vec<Var> = (0..n)
            .map(|t| self.tape.slice(emb, 0, t, 1))
            .collect::<Result<_, _>>()?;

        let zero = self.tape.constant(Tensor::zeros(1, hs));
        let (mut h, mut c) = (zero, zero);
        let mut forward = Vec::with_capacity(n);
        for &x in &rows {
            (h, c) = self.lstm(x, h, c, ParamKey::EncoderForwardW, ParamKey::EncoderForwardB)?;
            forward.push(h);
        }
        let (fw_h, fw_c) = (h, c);

        let (mut h, mut c) = (zero, zero);
        let mut backward = vec![zero; n];
        for t in (0..n).rev() {
            (h, c) = self.lstm(rows[t], h, c, ParamKey::EncoderBackwardW, ParamKey::EncoderBackwardB)?;
            backward[t] = h;
        }
        let (bw_h, bw_c) = (h, c);

        let per_pos: Vec<Var> = forward
            .iter()
            .zip(&backward)
            .map(|(&f, &b)| self.tape.concat(&[f, b], 1))
            .collect::<Result<_, _>>()?;
        let outputs = self.tape.concat(&per_pos, 0)?;
        let features = self.tape.matmul(outputs, self.p(ParamKey::AttnEncoderW))?;

        let hh = self.tape.concat(&[fw_h, bw_h], 1)?;
        let h0 = self.affine(hh, ParamKey::ReduceHiddenW, ParamKey::ReduceHiddenB)?;
        let h0 = self.tape.tanh(h0)?;
        let cc = self.tape.concat(&[fw_c, bw_c], 1)?;
        let c0 = self.affine(cc, ParamKey::ReduceCellW, ParamKey::ReduceCellB)?;
        let c0 = self.tape.tanh(c0)?;
        let context = self.tape.constant(Tensor::zeros(1, 2 * hs));

        let ext_size = source.ext_size();
        let mut copy = Tensor::zeros(n, ext_size);
        for (i, &id) in source.ext_ids().iter().enumerate() {
            copy.data_mut()[i * ext_size + id] = 1.0;
        }
        let copy_map = self.tape.constant(copy);
        let ones = self.tape.constant(Tensor::filled(n, 1, 1.0));

        Ok(EncoderStates {
            outputs,
            features,
            copy_map,
            ones,
            len: n,
            vocab_size: self.config.vocab_size,
            ext_size,
            initial: DecoderState { h: h0, c: c0, context },
        })
    }

    /// One decoder step: feeds `prev` (an extended id; OOV ids embed as UNK),
    /// attends over the input, and mixes generation with copying.
    pub fn decode_step(
        &mut self,
        prev: usize,
        state: &DecoderState,
        enc: &EncoderStates,
        source: &SourceText,
        gate: GateHook,
    ) -> Result<(StepVars, DecoderState), ModelError> {
        if source.len() != enc.len {
            return Err(ModelError::Misaligned {
                tokens: source.len(),
                states: enc.len,
            });
        }
        let embed_id = if prev < enc.vocab_size { prev } else { UNK_ID };
        let emb = self.tape.embedding(self.p(ParamKey::Embedding), &[embed_id])?;
        let x = self.tape.concat(&[emb, state.context], 1)?;
        let (h, c) = self.lstm(x, state.h, state.c, ParamKey::DecoderW, ParamKey::DecoderB)?;

        // additive attention: v . tanh(W_enc h_i + W_dec s_t + b)
        let dec_feat = self.affine(h, ParamKey::AttnDecoderW, ParamKey::AttnB)?;
        let t = &mut self.tape;
        let spread = t.matmul(enc.ones, dec_feat)?;
        let pre = t.add(enc.features, spread)?;
        let act = t.tanh(pre)?;
        let scores = t.matmul(act, self.params.get(ParamKey::AttnV))?;
        let scores = t.transpose(scores)?;
        let attention = t.softmax(scores)?;
        let context = t.matmul(attention, enc.outputs)?;

        let out_in = t.concat(&[h, context], 1)?;
        let logits = self.affine(out_in, ParamKey::OutputW, ParamKey::OutputB)?;
        let p_vocab = self.tape.softmax(logits)?;

        let gate_pre = match gate {
            GateHook::Learned => {
                let gate_in = self.tape.concat(&[context, h, x], 1)?;
                self.affine(gate_in, ParamKey::GateW, ParamKey::GateB)?
            }
            GateHook::PreActivation(v) => self.tape.constant(Tensor::scalar(v)),
        };
        let p_gen = self.tape.sigmoid(gate_pre)?;
        let p_final = self.mixture(p_vocab, attention, p_gen, enc)?;

        Ok((
            StepVars {
                p_vocab,
                attention,
                p_gen,
                p_final,
            },
            DecoderState { h, c, context },
        ))
    }

    /// `p_gen * p_vocab (zero-padded to the extended vocabulary)
    ///  + (1 - p_gen) * attention mass summed per extended id`.
    fn mixture(&mut self, p_vocab: Var, attention: Var, p_gen: Var, enc: &EncoderStates) -> Result<Var, ModelError> {
        let t = &mut self.tape;
        let padded = if enc.ext_size > enc.vocab_size {
            let pad = t.constant(Tensor::zeros(1, enc.ext_size - enc.vocab_size));
            t.concat(&[p_vocab, pad], 1)?
        } else {
            p_vocab
        };
        let one = t.constant(Tensor::scalar(1.0));
        let neg = t.scale(p_gen, -1.0)?;
        let p_copy = t.add(one, neg)?;
        let generated = t.matmul(p_gen, padded)?;
        let copy_dist = t.matmul(attention, enc.copy_map)?;
        let copied = t.matmul(p_copy, copy_dist)?;
        Ok(t.add(generated, copied)?)
    }

    pub fn step_output(&self, step: &StepVars) -> DecoderStepOutput {
        DecoderStepOutput {
            p_vocab: self.tape.value(step.p_vocab).data().to_vec(),
            attention: self.tape.value(step.attention).data().to_vec(),
            p_gen: self.tape.value(step.p_gen).item(),
            p_final: self.tape.value(step.p_final).data().to_vec(),
        }
    }

    /// `-(1/T) sum_t ln p_final(y_t)` under teacher forcing.
    pub fn sequence_loss(&mut self, example: &Example) -> Result<Var, ModelError> {
        if example.target.is_empty() {
            return Err(ModelError::EmptyReference);
        }
        let enc = self.encode(&example.source)?;
        let mut state = enc.initial;
        let mut prev = START_ID;
        let mut logs = Vec::with_capacity(example.target.len());
        for &y in &example.target {
            if y >= enc.ext_size {
                return Err(ModelError::TokenOutOfRange {
                    id: y,
                    vocab: enc.ext_size,
                });
            }
            let (step, next) = self.decode_step(prev, &state, &enc, &example.source, GateHook::Learned)?;
            let p = self.tape.slice(step.p_final, 1, y, 1)?;
            logs.push(self.tape.ln(p)?);
            state = next;
            prev = y;
        }
        let all = self.tape.concat(&logs, 1)?;
        let total = self.tape.sum(all)?;
        Ok(self.tape.scale(total, -1.0 / logs.len() as f64)?)
    }
}

/// The copy/generate mixture on plain values:
/// `p_final(w) = p_gen * p_vocab(w) + (1 - p_gen) * sum_{i: ext_ids[i] = w} attention[i]`.
pub fn mix_distributions(p_vocab: &[f64], attention: &[f64], p_gen: f64, ext_ids: &[usize], ext_size: usize) -> Vec<f64> {
    assert_eq!(attention.len(), ext_ids.len(), "attention aligned with input");
    let mut out = vec![0.0; ext_size];
    for (o, &p) in out.iter_mut().zip(p_vocab) {
        *o = p_gen * p;
    }
    for (&a, &id) in attention.iter().zip(ext_ids) {
        out[id] += (1.0 - p_gen) * a;
    }
    out
}

/// Decoding adapter: one session per input.
pub(crate) struct PointerGenerator {
    session: Session,
    enc: EncoderStates,
    source: SourceText,
}

impl PointerGenerator {
    pub(crate) fn new(params: &ModelParams, source: &SourceText) -> Result<Self, ModelError> {
        let mut session = Session::new(params, false);
        let enc = session.encode(source)?;
        Ok(Self {
            session,
            enc,
            source: source.clone(),
        })
    }
}

impl StepModel for PointerGenerator {
    type State = DecoderState;
    type Trace = DecoderStepOutput;

    fn start(&mut self) -> (DecoderState, usize) {
        (self.enc.initial, START_ID)
    }

    fn step(&mut self, state: &DecoderState, prev: usize) -> Result<(Vec<f64>, DecoderState, DecoderStepOutput), ModelError> {
        let (vars, next) = self
            .session
            .decode_step(prev, state, &self.enc, &self.source, GateHook::Learned)?;
        let out = self.session.step_output(&vars);
        Ok((out.p_final.clone(), next, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Domain, Vocabulary};

    fn setup() -> (Vocabulary, ModelParams) {
        let doc = Document::new("v", Domain::News, "", "a b c d e f g h", "");
        let vocab = Vocabulary::build(&[doc], 12).unwrap();
        let params = ModelParams::init(&ModelConfig::tiny(vocab.len()), 11).unwrap();
        (vocab, params)
    }

    #[test]
    fn hand_mixture() {
        // vocabulary {a, b}; input [b, c] with c out of vocabulary
        let p = mix_distributions(&[0.7, 0.3], &[0.4, 0.6], 0.5, &[1, 2], 3);
        let expected = [0.35, 0.35, 0.30];
        for (got, want) in p.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{p:?}");
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn encoder_shapes() {
        let (vocab, params) = setup();
        let src = SourceText::new(&["a", "b", "c", "d", "e"], &vocab).unwrap();
        let mut s = Session::new(&params, false);
        let enc = s.encode(&src).unwrap();
        let vecs = enc.position_vectors(s.tape());
        assert_eq!(vecs.len(), 5);
        assert!(vecs.iter().all(|v| v.len() == 2 * params.config().hidden_size));
    }

    #[test]
    fn single_token_input_initializes_decoder() {
        let (vocab, params) = setup();
        let src = SourceText::new(&["a"], &vocab).unwrap();
        let mut s = Session::new(&params, false);
        let enc = s.encode(&src).unwrap();
        let (step, _) = s.decode_step(START_ID, &enc.initial, &enc, &src, GateHook::Learned).unwrap();
        let out = s.step_output(&step);
        assert_eq!(out.attention, vec![1.0]);
    }

    #[test]
    fn reversing_input_changes_forward_states() {
        let (vocab, params) = setup();
        let fwd = SourceText::new(&["a", "b", "c", "d"], &vocab).unwrap();
        let rev = SourceText::new(&["d", "c", "b", "a"], &vocab).unwrap();
        let mut s1 = Session::new(&params, false);
        let e1 = s1.encode(&fwd).unwrap();
        let mut s2 = Session::new(&params, false);
        let e2 = s2.encode(&rev).unwrap();
        let h = params.config().hidden_size;
        let last1 = &e1.position_vectors(s1.tape())[3][..h];
        let last2 = &e2.position_vectors(s2.tape())[3][..h];
        assert!(last1.iter().zip(last2).any(|(a, b)| (a - b).abs() > 1e-9));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (vocab, params) = setup();
        let mut s = Session::new(&params, false);
        let long: Vec<&str> = vec!["a"; params.config().max_input_len + 1];
        let src = SourceText::new(&long, &vocab).unwrap();
        assert!(matches!(s.encode(&src), Err(ModelError::InputTooLong { .. })));
        assert!(matches!(SourceText::new::<&str>(&[], &vocab), Err(ModelError::EmptyInput)));

        let short = SourceText::new(&["a", "b"], &vocab).unwrap();
        let other = SourceText::new(&["a", "b", "c"], &vocab).unwrap();
        let enc = s.encode(&short).unwrap();
        assert!(matches!(
            s.decode_step(START_ID, &enc.initial, &enc, &other, GateHook::Learned),
            Err(ModelError::Misaligned { tokens: 3, states: 2 })
        ));
    }

    #[test]
    fn forced_gate_collapses_mixture() {
        let (vocab, params) = setup();
        let src = SourceText::new(&["a", "zz", "b", "zz"], &vocab).unwrap();
        let mut s = Session::new(&params, false);
        let enc = s.encode(&src).unwrap();

        let (gen, _) = s
            .decode_step(START_ID, &enc.initial, &enc, &src, GateHook::PreActivation(f64::INFINITY))
            .unwrap();
        let out = s.step_output(&gen);
        assert_eq!(out.p_gen, 1.0);
        assert_eq!(&out.p_final[..vocab.len()], out.p_vocab.as_slice());
        assert_eq!(out.p_final[vocab.len()], 0.0);

        let (copy, _) = s
            .decode_step(START_ID, &enc.initial, &enc, &src, GateHook::PreActivation(f64::NEG_INFINITY))
            .unwrap();
        let out = s.step_output(&copy);
        assert_eq!(out.p_gen, 0.0);
        let mut expected = vec![0.0; src.ext_size()];
        for (a, &id) in out.attention.iter().zip(src.ext_ids()) {
            expected[id] += a;
        }
        assert_eq!(out.p_final, expected);
    }
}
