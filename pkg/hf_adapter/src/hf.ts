/**
 * Engine backed by pretrained extractive-QA checkpoints via
 * transformers.js. Model weights are fetched from the hub (or a local
 * cache) on startup; a failure to load is a startup error, never a
 * per-request 500.
 */
import { QaEngine, SpanPrediction } from "./engine.js";
import { PredictRequest } from "./protocol.js";

export const DEFAULT_MODEL = "Xenova/bert-large-cased-whole-word-masking-finetuned-squad";

interface TensorLike {
  data: Float32Array | number[];
  dims: number[];
}

function softmax(logits: number[]): number[] {
  const peak = Math.max(...logits);
  const exps = logits.map((v) => Math.exp(v - peak));
  const total = exps.reduce((a, b) => a + b, 0);
  return exps.map((e) => e / total);
}

export class TransformersEngine implements QaEngine {
  readonly id: string;
  private readonly maxSeqLen: number;
  private tokenizer: any;
  private model: any;

  private constructor(modelId: string, maxSeqLen: number) {
    this.id = modelId;
    this.maxSeqLen = maxSeqLen;
  }

  /** Loads tokenizer and model; throws on any load failure so the server
   * can refuse to start instead of serving errors. */
  static async load(modelId = DEFAULT_MODEL, maxSeqLen = 384):
      Promise<TransformersEngine> {
    const engine = new TransformersEngine(modelId, maxSeqLen);
    let lib: any;
    try {
      lib = await import("@huggingface/transformers");
    } catch (err) {
      throw new Error(
        `transformers.js is not installed; use --engine lexical or install ` +
        `the optional dependency (${err})`);
    }
    const { AutoTokenizer, AutoModelForQuestionAnswering } = lib;
    engine.tokenizer = await AutoTokenizer.from_pretrained(modelId);
    engine.model = await AutoModelForQuestionAnswering.from_pretrained(modelId);
    return engine;
  }

  async predict(req: PredictRequest): Promise<SpanPrediction> {
    const inputs = await this.tokenizer(req.question, {
      text_pair: req.context,
      truncation: true,
      max_length: this.maxSeqLen,
    });
    const output = await this.model(inputs);
    const startLogits = this.tensorRow(output.start_logits as TensorLike);
    const endLogits = this.tensorRow(output.end_logits as TensorLike);
    const ids: number[] = Array.from(inputs.input_ids.data as Iterable<number>,
                                     Number);
    const contextMask = this.contextMask(inputs, ids.length);
    const indices = contextMask
      .map((inContext, i) => (inContext ? i : -1))
      .filter((i) => i >= 0);
    const pick = indices.length > 0 ? indices : ids.map((_, i) => i);

    const startProbs = softmax(pick.map((i) => startLogits[i]));
    const endProbs = softmax(pick.map((i) => endLogits[i]));

    // Best span with start <= end inside the context segment.
    let best = { score: -Infinity, start: 0, end: 0 };
    const maxAnswer = 30;
    for (let s = 0; s < pick.length; s++) {
      for (let e = s; e < Math.min(s + maxAnswer, pick.length); e++) {
        const score = startProbs[s] * endProbs[e];
        if (score > best.score) best = { score, start: s, end: e };
      }
    }
    const answerIds = pick.slice(best.start, best.end + 1).map((i) => ids[i]);
    const answer: string = this.tokenizer.decode(answerIds, {
      skip_special_tokens: true,
      clean_up_tokenization_spaces: true,
    }).trim();

    const tokens = pick.map((i) =>
      this.tokenizer.decode([ids[i]], { skip_special_tokens: false }));
    const fullLength = (inputs.input_ids.dims?.[1] ?? ids.length) as number;
    return {
      answer,
      tokens,
      startProbs,
      endProbs,
      truncated: fullLength >= this.maxSeqLen,
    };
  }

  private tensorRow(tensor: TensorLike): number[] {
    return Array.from(tensor.data as Iterable<number>, Number);
  }

  /** Token positions belonging to the context segment: token_type_id 1
   * when the tokenizer provides segment ids, everything otherwise. */
  private contextMask(inputs: any, length: number): boolean[] {
    const typeIds = inputs.token_type_ids?.data;
    if (!typeIds) return new Array(length).fill(true);
    return Array.from(typeIds as Iterable<number>, (t) => Number(t) === 1);
  }
}
