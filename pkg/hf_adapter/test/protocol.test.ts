/**
 * Protocol conformance: 50 varied requests must yield responses that
 * satisfy the span-distribution invariants; malformed requests are 400;
 * /healthz is 200. Runs against the deterministic lexical engine so no
 * model download is needed.
 */
import { AddressInfo } from "node:net";
import { Server } from "node:http";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { createApp } from "../src/app.js";
import { LexicalEngine } from "../src/engine.js";

const PROB_SUM_TOLERANCE = 1e-6;

function listen(app: ReturnType<typeof createApp>): Promise<Server> {
  return new Promise((resolve) => {
    const server = app.listen(0, () => resolve(server));
  });
}

function endpoint(server: Server): string {
  const { port } = server.address() as AddressInfo;
  return `http://127.0.0.1:${port}`;
}

function variedRequests(count: number) {
  const words = [
    "harbor", "citadel", "meadow", "storm", "lantern", "granite", "orchard",
    "falcon", "ember", "willow", "ridge", "sable", "quarry", "bastion",
  ];
  const requests = [];
  for (let i = 0; i < count; i++) {
    const length = 3 + ((i * 7) % 40);
    const parts = [];
    for (let j = 0; j < length; j++) {
      parts.push(words[(i * 13 + j * 5) % words.length]);
    }
    // Sprinkle in punctuation, digits, and non-ASCII text.
    if (i % 4 === 1) parts.splice(2, 0, "Skłodowska-Curie's");
    if (i % 5 === 2) parts.push("1304.");
    if (i % 7 === 3) parts.splice(1, 0, "—");
    const context = parts.join(" ") + ".";
    const keyword = words[(i * 3) % words.length];
    requests.push({ context, question: `Where is the ${keyword} found?` });
  }
  // Edge shapes: tiny context, punctuation-only context, very long context.
  requests.push({ context: "x", question: "what?" });
  requests.push({ context: "... --- ...", question: "what?" });
  requests.push({
    context: Array(600).fill("granite harbor").join(" ") + ".",
    question: "Where is the granite?",
  });
  return requests;
}

describe("prediction protocol", () => {
  let topServer: Server;
  let fullServer: Server;
  let topUrl: string;
  let fullUrl: string;

  beforeAll(async () => {
    topServer = await listen(createApp(new LexicalEngine(384)));
    fullServer = await listen(
      createApp(new LexicalEngine(384), { fullDist: true }),
    );
    topUrl = endpoint(topServer);
    fullUrl = endpoint(fullServer);
  });

  afterAll(() => {
    topServer.close();
    fullServer.close();
  });

  async function post(url: string, body: unknown): Promise<Response> {
    return fetch(`${url}/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: typeof body === "string" ? body : JSON.stringify(body),
    });
  }

  it("satisfies top-only invariants for 50+ varied requests", async () => {
    for (const request of variedRequests(50)) {
      const resp = await post(topUrl, request);
      expect(resp.status).toBe(200);
      const doc = await resp.json();
      expect(typeof doc.answer).toBe("string");
      expect(Number.isInteger(doc.num_tokens)).toBe(true);
      expect(doc.num_tokens).toBeGreaterThanOrEqual(1);
      for (const p of [doc.start_top_prob, doc.end_top_prob]) {
        expect(p).toBeGreaterThan(0);
        expect(p).toBeLessThanOrEqual(1);
      }
    }
  });

  it("satisfies full-distribution invariants for 50+ varied requests", async () => {
    for (const request of variedRequests(50)) {
      const resp = await post(fullUrl, request);
      expect(resp.status).toBe(200);
      const doc = await resp.json();
      expect(doc.tokens.length).toBeGreaterThanOrEqual(1);
      expect(doc.start_probs.length).toBe(doc.tokens.length);
      expect(doc.end_probs.length).toBe(doc.tokens.length);
      for (const probs of [doc.start_probs, doc.end_probs]) {
        let total = 0;
        for (const p of probs) {
          expect(p).toBeGreaterThanOrEqual(0);
          total += p;
        }
        expect(Math.abs(total - 1)).toBeLessThanOrEqual(PROB_SUM_TOLERANCE);
      }
    }
  });

  it("flags truncation of overlong contexts", async () => {
    const resp = await post(topUrl, {
      context: Array(600).fill("granite harbor").join(" ") + ".",
      question: "Where is the granite?",
    });
    const doc = await resp.json();
    expect(doc.num_tokens).toBe(384);
    expect(doc.warning).toMatch(/truncated/);
  });

  it("answers deterministically for identical requests", async () => {
    const request = variedRequests(1)[0];
    const a = await (await post(topUrl, request)).json();
    const b = await (await post(topUrl, request)).json();
    expect(a).toEqual(b);
  });

  it("rejects malformed bodies with 400", async () => {
    const cases: unknown[] = [
      "{not json",
      {},
      { context: "", question: "q" },
      { context: "c" },
      { context: 5, question: "q" },
    ];
    for (const body of cases) {
      const resp = await post(topUrl, body);
      expect(resp.status).toBe(400);
      const doc = await resp.json();
      expect(doc.error).toMatch(/bad request/);
    }
  });

  it("serves /healthz with the model id", async () => {
    const resp = await fetch(`${topUrl}/healthz`);
    expect(resp.status).toBe(200);
    const doc = await resp.json();
    expect(doc.model).toContain("lexical");
  });

  it("finds spans near question terms", async () => {
    const resp = await post(topUrl, {
      context: "The harbor lies north. The citadel guards Stormvale bay.",
      question: "What does the citadel guard?",
    });
    const doc = await resp.json();
    expect(doc.answer.length).toBeGreaterThan(0);
  });
});
