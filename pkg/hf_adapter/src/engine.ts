/**
 * Engine abstraction: something that turns (context, question) into a
 * span prediction with per-token start/end probabilities.
 *
 * Two implementations ship: the transformers engine serving real
 * pretrained checkpoints (network/cache required), and a deterministic
 * lexical engine used by the protocol tests and for offline smoke runs.
 */
import { PredictRequest } from "./protocol.js";

export interface SpanPrediction {
  answer: string;
  /** Context tokens, as the engine's tokenizer sees them. */
  tokens: string[];
  startProbs: number[];
  endProbs: number[];
  truncated: boolean;
}

export interface QaEngine {
  readonly id: string;
  predict(req: PredictRequest): Promise<SpanPrediction>;
}

interface WordToken {
  text: string;
  start: number;
  end: number;
}

const WORD_RE = /[\p{L}\p{N}']+/gu;

export function wordTokens(text: string): WordToken[] {
  const tokens: WordToken[] = [];
  for (const m of text.matchAll(WORD_RE)) {
    tokens.push({ text: m[0], start: m.index!, end: m.index! + m[0].length });
  }
  return tokens;
}

function softmax(scores: number[]): number[] {
  const peak = Math.max(...scores);
  const exps = scores.map((s) => Math.exp(s - peak));
  const total = exps.reduce((a, b) => a + b, 0);
  return exps.map((e) => e / total);
}

const STOPWORDS = new Set([
  "a", "an", "the", "is", "are", "was", "were", "of", "in", "on", "to",
  "what", "who", "which", "when", "where", "why", "how", "did", "does",
  "do", "for", "with", "by", "at",
]);

/**
 * Deterministic offline engine: scores each context token by lexical
 * overlap with the question in a small window, softmaxes the scores into
 * start/end distributions, and answers with the best short span.
 */
export class LexicalEngine implements QaEngine {
  readonly id: string;
  private readonly maxSeqLen: number;
  private readonly maxAnswerTokens = 4;

  constructor(maxSeqLen = 384) {
    this.maxSeqLen = maxSeqLen;
    this.id = `lexical-overlap (max_seq_len=${maxSeqLen})`;
  }

  async predict(req: PredictRequest): Promise<SpanPrediction> {
    let tokens = wordTokens(req.context);
    let truncated = false;
    if (tokens.length > this.maxSeqLen) {
      tokens = tokens.slice(0, this.maxSeqLen);
      truncated = true;
    }
    if (tokens.length === 0) {
      // Context with no word characters: one pseudo-token spanning it all.
      return {
        answer: req.context.trim() || req.context,
        tokens: [req.context],
        startProbs: [1],
        endProbs: [1],
        truncated,
      };
    }
    const terms = new Set(
      wordTokens(req.question)
        .map((t) => t.text.toLowerCase())
        .filter((w) => !STOPWORDS.has(w)),
    );
    const match = tokens.map((t) => {
      const w = t.text.toLowerCase();
      if (terms.has(w)) return 2;
      for (const q of terms) {
        if (w.length >= 4 && q.length >= 4 && w.slice(0, 4) === q.slice(0, 4)) {
          return 1;
        }
      }
      return 0;
    });
    // A token is a likely answer start when question terms sit just before
    // it; a likely end when they sit just after.
    const startScores = tokens.map(
      (_, i) =>
        2 * (match[i - 1] ?? 0) + (match[i - 2] ?? 0) - 0.5 * match[i] - i / tokens.length,
    );
    const endScores = tokens.map(
      (_, i) =>
        2 * (match[i + 1] ?? 0) + (match[i + 2] ?? 0) - 0.5 * match[i] - i / tokens.length,
    );
    const startProbs = softmax(startScores);
    const endProbs = softmax(endScores);
    let start = 0;
    startProbs.forEach((p, i) => {
      if (p > startProbs[start]) start = i;
    });
    let end = start;
    for (
      let i = start;
      i < Math.min(start + this.maxAnswerTokens, tokens.length);
      i++
    ) {
      if (endProbs[i] >= endProbs[end]) end = i;
    }
    return {
      answer: req.context.slice(tokens[start].start, tokens[end].end),
      tokens: tokens.map((t) => t.text),
      startProbs,
      endProbs,
      truncated,
    };
  }
}
