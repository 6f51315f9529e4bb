/**
 * Entry point. Loads the requested engine (refusing to start when the
 * model cannot load) and serves the prediction protocol.
 *
 * Flags: --model <id> --port <n> --max-seq-len <n> --full-dist
 *        --engine transformers|lexical
 */
import { parseArgs } from "node:util";

import { createApp } from "./app.js";
import { LexicalEngine, QaEngine } from "./engine.js";
import { DEFAULT_MODEL, TransformersEngine } from "./hf.js";

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      model: { type: "string", default: DEFAULT_MODEL },
      port: { type: "string", default: "8500" },
      "max-seq-len": { type: "string", default: "384" },
      "full-dist": { type: "boolean", default: false },
      engine: { type: "string", default: "transformers" },
    },
  });
  const port = Number(values.port);
  const maxSeqLen = Number(values["max-seq-len"]);

  let engine: QaEngine;
  if (values.engine === "lexical") {
    engine = new LexicalEngine(maxSeqLen);
  } else if (values.engine === "transformers") {
    engine = await TransformersEngine.load(values.model, maxSeqLen);
  } else {
    throw new Error(`unknown engine ${values.engine}`);
  }

  const app = createApp(engine, { fullDist: values["full-dist"] });
  app.listen(port, () => {
    console.log(`serving ${engine.id} on port ${port}`);
  });
}

main().catch((err) => {
  console.error(`startup error: ${err.message}`);
  process.exit(1);
});
