import http from "node:http";
import { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { sine } from "../src/dsp.js";
import { NATIVE_RATE } from "../src/models.js";
import { ALL_OPERATIONS } from "../src/schemas.js";
import { AdapterOptions, createApp } from "../src/server.js";
import { decodeWav, encodeWav } from "../src/wav.js";

function start(options: AdapterOptions = {}): Promise<{ url: string; server: http.Server }> {
  return new Promise((resolve) => {
    const server = createApp(options).listen(0, "127.0.0.1", () => {
      const { port } = server.address() as AddressInfo;
      resolve({ url: `http://127.0.0.1:${port}`, server });
    });
  });
}

async function post(base: string, op: string, body: unknown,
                    headers: Record<string, string> = {}) {
  const res = await fetch(`${base}/v1/${op}`, {
    method: "POST",
    headers: { "content-type": "application/json", ...headers },
    body: JSON.stringify(body),
  });
  return { status: res.status, body: await res.json() };
}

function toneB64(freq: number, n: number, rate: number): string {
  return encodeWav({ samples: sine(freq, n, rate, 0.2), sampleRate: rate })
    .toString("base64");
}

describe("default adapter", () => {
  let base = "";
  let server: http.Server;

  beforeAll(async () => {
    ({ url: base, server } = await start());
  });
  afterAll(() => new Promise<void>((resolve) => server.close(() => resolve())));

  it("answers the health probe", async () => {
    const res = await fetch(`${base}/health`);
    expect(res.status).toBe(200);
    expect(await res.json()).toEqual({ status: "ok" });
  });

  it("declares protocol version 1 and every bound endpoint", async () => {
    const res = await fetch(`${base}/v1/capabilities`);
    expect(res.status).toBe(200);
    const body = await res.json();
    expect(body.protocol_version).toBe(1);
    expect(body.backend_id).toBe("ts-adapter");
    expect(body.endpoints).toEqual(ALL_OPERATIONS);
    expect(body.profiles.map((p: { model_id: string }) => p.model_id))
      .toEqual(["tonal-duet", "plain-sine"]);
  });

  it("synthesizes deterministically with a truthful sample rate", async () => {
    const payload = { model_id: "tonal-duet", text: "the quick brown fox",
                      language: "en", description: "plain narration" };
    const first = await post(base, "synthesize", payload);
    expect(first.status).toBe(200);
    const clip = decodeWav(Buffer.from(first.body.audio_b64, "base64"));
    expect(clip.sampleRate).toBe(first.body.sample_rate);
    expect(first.body.sample_rate).toBe(NATIVE_RATE);
    const second = await post(base, "synthesize", payload);
    expect(second.body.audio_b64).toBe(first.body.audio_b64);
  });

  it("generates exactly round(duration * rate) samples", async () => {
    for (const kind of ["sfx", "ambiance", "bgm"]) {
      const { status, body } = await post(base, "generate_audio",
        { prompt: `${kind} probe`, duration: 0.5, kind });
      expect(status).toBe(200);
      const clip = decodeWav(Buffer.from(body.audio_b64, "base64"));
      expect(clip.samples.length).toBe(Math.round(0.5 * body.sample_rate));
    }
  });

  it("embeds text reproducibly with a consistent dimension", async () => {
    const first = await post(base, "embed", { text: "a storm rolls in" });
    expect(first.status).toBe(200);
    expect(first.body.dimension).toBe(first.body.embedding.length);
    const second = await post(base, "embed", { text: "a storm rolls in" });
    expect(second.body).toEqual(first.body);
  });

  it("aligns words into contiguous monotone spans", async () => {
    const { status, body } = await post(base, "align", {
      words: ["night", "wind"],
      audio_b64: toneB64(330, 12000, 24000),
    });
    expect(status).toBe(200);
    expect(body.spans.length).toBe(2);
    let cursor = 0;
    for (const span of body.spans) {
      expect(span.start).toBeGreaterThanOrEqual(cursor - 1e-9);
      expect(span.end).toBeGreaterThan(span.start);
      cursor = span.end;
    }
    expect(cursor).toBeLessThanOrEqual(body.clip_duration + 1e-6);
    expect(body.clip_duration).toBeCloseTo(0.5, 9);
  });

  it("keeps MOS inside the opinion scale", async () => {
    const { status, body } = await post(base, "mos",
      { audio_b64: toneB64(440, 24000, 24000) });
    expect(status).toBe(200);
    expect(body.mos).toBeGreaterThanOrEqual(1);
    expect(body.mos).toBeLessThanOrEqual(5);
  });

  it("answers judge prompts with a fenced score block", async () => {
    const { status, body } = await post(base, "judge", {
      prompt: "Respond with your assessment.",
      session_id: "vitest-judge",
      attachments: [],
    });
    expect(status).toBe(200);
    expect(body.response).toContain("```json");
  });

  it("returns speaker embeddings with their source model", async () => {
    const { status, body } = await post(base, "speaker_embed",
      { audio_b64: toneB64(220, 24000, 24000) });
    expect(status).toBe(200);
    expect(body.dimension).toBe(body.embedding.length);
    expect(body.source_model).toBe("chunk-energy-v1");
  });

  it("rejects schema violations with a bad_request envelope", async () => {
    const { status, body } = await post(base, "embed", { wrong_field: 1 });
    expect(status).toBe(400);
    expect(body.error.type).toBe("bad_request");
    expect(typeof body.error.message).toBe("string");
  });

  it("rejects bodies that are not JSON", async () => {
    const res = await fetch(`${base}/v1/embed`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: "{nope",
    });
    expect(res.status).toBe(400);
    const body = await res.json();
    expect(body.error.type).toBe("bad_request");
  });

  it("maps model errors onto protocol statuses", async () => {
    const unknown = await post(base, "synthesize", {
      model_id: "nope", text: "hi", language: "en", description: "x" });
    expect(unknown.status).toBe(503);
    expect(unknown.body.error.type).toBe("backend_unavailable");

    const badLanguage = await post(base, "synthesize", {
      model_id: "plain-sine", text: "hi", language: "zh", description: "x" });
    expect(badLanguage.status).toBe(422);
    expect(badLanguage.body.error.type).toBe("mode_unsupported");

    const twoModes = await post(base, "synthesize", {
      model_id: "plain-sine", text: "hi", language: "en",
      description: "x", reference_audio: "AAAA" });
    expect(twoModes.status).toBe(400);
  });

  it("404s unknown operations and routes", async () => {
    const op = await post(base, "frobnicate", {});
    expect(op.status).toBe(404);
    expect(op.body.error.type).toBe("not_found");
    const route = await fetch(`${base}/nope`);
    expect(route.status).toBe(404);
  });

  it("404s GET and 405s other verbs on operation routes", async () => {
    const get = await fetch(`${base}/v1/embed`);
    expect(get.status).toBe(404);
    expect((await get.json()).error.type).toBe("not_found");
    const put = await fetch(`${base}/v1/embed`, { method: "PUT" });
    expect(put.status).toBe(405);
    expect((await put.json()).error.type).toBe("method_not_allowed");
  });
});

describe("restricted adapter", () => {
  let base = "";
  let server: http.Server;

  beforeAll(async () => {
    ({ url: base, server } = await start({ endpoints: ["embed", "mos"] }));
  });
  afterAll(() => new Promise<void>((resolve) => server.close(() => resolve())));

  it("only advertises what it serves, with no profiles", async () => {
    const body = await (await fetch(`${base}/v1/capabilities`)).json();
    expect(body.endpoints).toEqual(["embed", "mos"]);
    expect(body.profiles).toEqual([]);
  });

  it("still serves the bound operations", async () => {
    const { status } = await post(base, "embed", { text: "bound" });
    expect(status).toBe(200);
  });

  it("answers unbound operations with 404 not_bound", async () => {
    const { status, body } = await post(base, "synthesize", {
      model_id: "tonal-duet", text: "hi", language: "en", description: "x" });
    expect(status).toBe(404);
    expect(body.error.type).toBe("not_bound");
  });
});

describe("token-protected adapter", () => {
  let base = "";
  let server: http.Server;

  beforeAll(async () => {
    ({ url: base, server } = await start({ token: "sekrit" }));
  });
  afterAll(() => new Promise<void>((resolve) => server.close(() => resolve())));

  it("rejects missing and wrong tokens with 401", async () => {
    const missing = await post(base, "embed", { text: "x" });
    expect(missing.status).toBe(401);
    expect(missing.body.error.type).toBe("unauthorized");
    const wrong = await post(base, "embed", { text: "x" },
                             { authorization: "Bearer nope" });
    expect(wrong.status).toBe(401);
  });

  it("accepts the configured bearer token everywhere", async () => {
    const ok = await post(base, "embed", { text: "x" },
                          { authorization: "Bearer sekrit" });
    expect(ok.status).toBe(200);
    const health = await fetch(`${base}/health`,
                               { headers: { authorization: "Bearer sekrit" } });
    expect(health.status).toBe(200);
  });
});
