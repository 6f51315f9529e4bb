/**
 * HTTP surface: POST /predict and GET /healthz, matching the evaluation
 * harness's wire protocol exactly.
 */
import express, { Express } from "express";

import { QaEngine } from "./engine.js";
import {
  FullResponse, PredictResponse, TopOnlyResponse, parseRequest,
  validateResponse,
} from "./protocol.js";

export interface AppOptions {
  /** Return full per-token distributions instead of top probabilities. */
  fullDist?: boolean;
}

export function createApp(engine: QaEngine, options: AppOptions = {}): Express {
  const app = express();
  app.use(express.json({ limit: "4mb" }));

  // Body-parser failures (bad JSON, wrong content type) are client errors.
  app.use((err: any, _req: any, res: any, next: any) => {
    if (err?.type === "entity.parse.failed" || err instanceof SyntaxError) {
      res.status(400).json({ error: `bad request: ${err.message}` });
      return;
    }
    next(err);
  });

  app.get("/healthz", (_req, res) => {
    res.status(200).json({ model: engine.id });
  });

  app.post("/predict", async (req, res) => {
    let parsed;
    try {
      parsed = parseRequest(req.body);
    } catch (err: any) {
      res.status(400).json({ error: `bad request: ${err.message}` });
      return;
    }
    try {
      const prediction = await engine.predict(parsed);
      const payload: PredictResponse = options.fullDist
        ? ({
            answer: prediction.answer,
            tokens: prediction.tokens,
            start_probs: prediction.startProbs,
            end_probs: prediction.endProbs,
          } satisfies FullResponse)
        : ({
            answer: prediction.answer,
            num_tokens: prediction.tokens.length,
            start_top_prob: Math.max(...prediction.startProbs),
            end_top_prob: Math.max(...prediction.endProbs),
          } satisfies TopOnlyResponse);
      if (prediction.truncated) {
        payload.warning = "context truncated to the model's maximum length";
      }
      validateResponse(payload);
      res.status(200).json(payload);
    } catch (err: any) {
      res.status(500).json({ error: `inference failed: ${err.message}` });
    }
  });

  return app;
}
