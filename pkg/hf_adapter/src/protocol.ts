/**
 * Wire protocol types shared with the evaluation harness.
 *
 * POST /predict takes {context, question} and returns the answer plus
 * either the top start/end probabilities (default) or, with full
 * distributions enabled, per-token probability lists.
 */

export interface PredictRequest {
  context: string;
  question: string;
}

export interface TopOnlyResponse {
  answer: string;
  num_tokens: number;
  start_top_prob: number;
  end_top_prob: number;
  warning?: string;
}

export interface FullResponse {
  answer: string;
  tokens: string[];
  start_probs: number[];
  end_probs: number[];
  warning?: string;
}

export type PredictResponse = TopOnlyResponse | FullResponse;

export const PROB_SUM_TOLERANCE = 1e-6;

export function parseRequest(body: unknown): PredictRequest {
  if (typeof body !== "object" || body === null) {
    throw new Error("request body must be a JSON object");
  }
  const doc = body as Record<string, unknown>;
  if (typeof doc.context !== "string" || doc.context.length === 0) {
    throw new Error('"context" must be a nonempty string');
  }
  if (typeof doc.question !== "string" || doc.question.length === 0) {
    throw new Error('"question" must be a nonempty string');
  }
  return { context: doc.context, question: doc.question };
}

/** Enforce the span-distribution invariants before anything leaves the
 * process; a response that fails here is a bug, not a client error. */
export function validateResponse(resp: PredictResponse): void {
  if ("tokens" in resp) {
    const n = resp.tokens.length;
    if (n < 1) throw new Error("empty token list");
    for (const [name, probs] of [
      ["start_probs", resp.start_probs],
      ["end_probs", resp.end_probs],
    ] as const) {
      if (probs.length !== n) {
        throw new Error(`${name} length ${probs.length} != ${n} tokens`);
      }
      let total = 0;
      for (const p of probs) {
        if (p < 0 || !Number.isFinite(p)) {
          throw new Error(`${name} holds a negative or non-finite value`);
        }
        total += p;
      }
      if (Math.abs(total - 1) > PROB_SUM_TOLERANCE) {
        throw new Error(`${name} sums to ${total}, expected 1`);
      }
    }
    return;
  }
  if (!Number.isInteger(resp.num_tokens) || resp.num_tokens < 1) {
    throw new Error("num_tokens must be a positive integer");
  }
  for (const [name, p] of [
    ["start_top_prob", resp.start_top_prob],
    ["end_top_prob", resp.end_top_prob],
  ] as const) {
    if (!(p > 0 && p <= 1)) {
      throw new Error(`${name} ${p} outside (0, 1]`);
    }
  }
}
