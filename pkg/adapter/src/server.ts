/**
 * Express app exposing the wire protocol. Any subset of the seven
 * operations can be bound; /v1/capabilities reports exactly what is bound,
 * and unbound operations answer 404 not_bound.
 */
import express, { NextFunction, Request, Response } from "express";

import { AdapterError } from "./errors.js";
import * as models from "./models.js";
import { ALL_OPERATIONS, Operation, REQUEST_SCHEMAS } from "./schemas.js";
import { clipDuration, decodeWav, encodeWav, WavError, Clip } from "./wav.js";

export const PROTOCOL_VERSION = 1;
export const BACKEND_ID = "ts-adapter";

export interface AdapterOptions {
  /** Operations to serve; defaults to all seven. */
  endpoints?: Operation[];
  /** When set, every request must carry `Authorization: Bearer <token>`. */
  token?: string;
}

function errorBody(type: string, message: string) {
  return { error: { type, message } };
}

function clipFromB64(audioB64: string): Clip {
  let raw: Buffer;
  try {
    raw = Buffer.from(audioB64, "base64");
  } catch {
    throw new AdapterError(400, "bad_request", "audio_b64 is not valid base64");
  }
  try {
    return decodeWav(raw);
  } catch (exc) {
    if (exc instanceof WavError) {
      throw new AdapterError(400, "bad_request", exc.message);
    }
    throw exc;
  }
}

function clipPayload(clip: Clip) {
  return {
    audio_b64: encodeWav(clip).toString("base64"),
    sample_rate: clip.sampleRate,
  };
}

const HANDLERS: Record<Operation, (payload: any) => unknown> = {
  synthesize: (payload) => clipPayload(models.synthesize(payload)),
  generate_audio: (payload) =>
    clipPayload(models.generateAudio(payload.prompt, payload.duration,
                                     payload.kind)),
  embed: (payload) => {
    const embedding = models.embed(payload.text);
    return { embedding, dimension: embedding.length };
  },
  align: (payload) =>
    models.align(payload.words, clipFromB64(payload.audio_b64)),
  mos: (payload) =>
    ({ mos: models.predictMos(clipFromB64(payload.audio_b64)) }),
  judge: (payload) =>
    ({ response: models.judge(payload.prompt, payload.attachments ?? [],
                              payload.session_id) }),
  speaker_embed: (payload) => {
    const embedding = models.speakerEmbed(clipFromB64(payload.audio_b64));
    return {
      embedding: embedding.values,
      source_model: embedding.source_model,
      dimension: embedding.values.length,
    };
  },
};

export function createApp(options: AdapterOptions = {}): express.Express {
  const bound = new Set<Operation>(options.endpoints ?? ALL_OPERATIONS);
  const app = express();
  app.disable("x-powered-by");
  app.use(express.json({ limit: "64mb" }));

  if (options.token !== undefined) {
    const expected = `Bearer ${options.token}`;
    app.use((req: Request, res: Response, next: NextFunction) => {
      if (req.headers.authorization !== expected) {
        res.status(401).json(errorBody("unauthorized", "bad or missing bearer token"));
        return;
      }
      next();
    });
  }

  app.get("/health", (_req, res) => {
    res.json({ status: "ok" });
  });

  app.get("/v1/capabilities", (_req, res) => {
    res.json({
      protocol_version: PROTOCOL_VERSION,
      backend_id: BACKEND_ID,
      endpoints: ALL_OPERATIONS.filter((op) => bound.has(op)),
      profiles: bound.has("synthesize") ? models.PROFILES : [],
    });
  });

  app.all("/v1/:op", (req: Request, res: Response) => {
    if (req.method === "GET") {
      res.status(404).json(errorBody("not_found", `no route for GET ${req.path}`));
      return;
    }
    if (req.method !== "POST") {
      res.status(405).json(errorBody("method_not_allowed",
                                     `${req.method} not supported`));
      return;
    }
    const op = req.params.op as Operation;
    const schema = REQUEST_SCHEMAS[op];
    if (schema === undefined) {
      res.status(404).json(errorBody("not_found", `unknown operation '${op}'`));
      return;
    }
    if (!bound.has(op)) {
      res.status(404).json(errorBody("not_bound",
                                     `'${op}' is not served by this backend`));
      return;
    }
    const parsed = schema.safeParse(req.body);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      const where = issue && issue.path.length ? ` at ${issue.path.join(".")}` : "";
      res.status(400).json(errorBody("bad_request",
                                     `${issue?.message ?? "invalid request"}${where}`));
      return;
    }
    try {
      res.json(HANDLERS[op](parsed.data));
    } catch (exc) {
      if (exc instanceof AdapterError) {
        res.status(exc.status).json(errorBody(exc.type, exc.message));
        return;
      }
      res.status(500).json(errorBody("internal", String(exc)));
    }
  });

  app.use((_req: Request, res: Response) => {
    res.status(404).json(errorBody("not_found", "no such route"));
  });

  // malformed JSON bodies and other middleware faults
  app.use((err: unknown, _req: Request, res: Response, _next: NextFunction) => {
    if (err instanceof SyntaxError) {
      res.status(400).json(errorBody("bad_request", "request body is not valid JSON"));
      return;
    }
    res.status(500).json(errorBody("internal", String(err)));
  });

  return app;
}
