/**
 * Deterministic model bindings behind the protocol endpoints.
 *
 * These are small DSP stand-ins with the same interface contract as real
 * models: tonal-syllable speech synthesis, seeded texture generation,
 * char-trigram text embeddings, a length-proportional forced aligner, a
 * loudness-heuristic MOS predictor, chunk-energy speaker embeddings, and a
 * templated judge. Identical requests always produce identical responses.
 */
import {
  applyEdgeRamp,
  clippedFraction,
  fnv1a,
  makeRng,
  meanOffset,
  rms,
  sine,
} from "./dsp.js";
import { badRequest, modeUnsupported, unavailable } from "./errors.js";
import { Clip, clipDuration } from "./wav.js";

export const NATIVE_RATE = 48000;
export const EMBED_DIMENSION = 48;
export const SPEAKER_DIMENSION = 24;
export const SPEAKER_SOURCE_MODEL = "chunk-energy-v1";

export interface ModelProfile {
  model_id: string;
  languages: string[];
  cloning_rank: number;
  controllability_rank: number;
  supports_paralinguistics: boolean;
  supports_speaker_embedding: boolean;
  emotion_clone_languages: string[];
}

export const PROFILES: ModelProfile[] = [
  {
    model_id: "tonal-duet",
    languages: ["en", "zh"],
    cloning_rank: 1,
    controllability_rank: 2,
    supports_paralinguistics: true,
    supports_speaker_embedding: true,
    emotion_clone_languages: ["en"],
  },
  {
    model_id: "plain-sine",
    languages: ["en"],
    cloning_rank: 2,
    controllability_rank: 1,
    supports_paralinguistics: false,
    supports_speaker_embedding: false,
    emotion_clone_languages: [],
  },
];

export interface SynthesisRequest {
  model_id: string;
  text: string;
  language: string;
  reference_audio?: string;
  speaker_embedding?: { values: number[]; source_model: string };
  description?: string;
  paralinguistic_tokens?: string[];
}

const SYLLABLE_SECONDS = 0.09;
const WORD_GAP_SECONDS = 0.03;

function syllableCount(word: string): number {
  const groups = word.toLowerCase().match(/[aeiouy一-鿿]+/g);
  return Math.max(1, groups ? groups.length : 1);
}

function conditioningShift(request: SynthesisRequest): number {
  if (request.speaker_embedding) {
    const values = request.speaker_embedding.values;
    const mean = values.reduce((a, b) => a + b, 0) / values.length;
    return 40 * Math.tanh(mean);
  }
  if (request.reference_audio !== undefined) {
    return (fnv1a(request.reference_audio) % 80) - 40;
  }
  return (fnv1a(request.description ?? "") % 80) - 40;
}

export function synthesize(request: SynthesisRequest): Clip {
  const profile = PROFILES.find((p) => p.model_id === request.model_id);
  if (!profile) {
    throw unavailable(`model ${JSON.stringify(request.model_id)} is not bound`);
  }
  const modes = [
    request.reference_audio !== undefined,
    request.speaker_embedding !== undefined,
    request.description !== undefined,
  ].filter(Boolean).length;
  if (modes !== 1) {
    throw badRequest(
      "exactly one of reference_audio, speaker_embedding, description required");
  }
  if (!profile.languages.includes(request.language)) {
    throw modeUnsupported(
      `${profile.model_id} does not speak ${JSON.stringify(request.language)}`);
  }
  if (request.speaker_embedding && !profile.supports_speaker_embedding) {
    throw modeUnsupported(`${profile.model_id} cannot condition on speaker embeddings`);
  }
  const tokens = request.paralinguistic_tokens ?? [];
  if (tokens.length > 0 && !profile.supports_paralinguistics) {
    throw modeUnsupported(`${profile.model_id} cannot render paralinguistic tokens`);
  }

  const shift = conditioningShift(request);
  const pieces: Float64Array[] = [];
  const gap = new Float64Array(Math.round(WORD_GAP_SECONDS * NATIVE_RATE));
  const words = request.text.split(/\s+/).filter((w) => w.length > 0);
  for (const word of words) {
    const base = 160 + (fnv1a(`${request.model_id}:${word}`) % 200) + shift;
    for (let s = 0; s < syllableCount(word); s++) {
      const n = Math.round(SYLLABLE_SECONDS * NATIVE_RATE);
      const tone = sine(base * (1 + 0.06 * s), n, NATIVE_RATE, 0.3);
      pieces.push(applyEdgeRamp(tone, Math.round(n / 6)));
    }
    pieces.push(gap);
  }
  for (const token of tokens) {
    const rng = makeRng(fnv1a(`para:${token}`));
    const burst = new Float64Array(Math.round(0.05 * NATIVE_RATE));
    for (let i = 0; i < burst.length; i++) burst[i] = 0.1 * (rng() * 2 - 1);
    pieces.push(applyEdgeRamp(burst, Math.round(burst.length / 4)));
  }
  if (pieces.length === 0) pieces.push(new Float64Array(gap.length));
  const total = pieces.reduce((acc, piece) => acc + piece.length, 0);
  const samples = new Float64Array(total);
  let cursor = 0;
  for (const piece of pieces) {
    samples.set(piece, cursor);
    cursor += piece.length;
  }
  return { samples, sampleRate: NATIVE_RATE };
}

export type AudioKind = "sfx" | "ambiance" | "bgm";

export function generateAudio(prompt: string, duration: number,
                              kind: AudioKind): Clip {
  if (!(duration > 0) || !Number.isFinite(duration)) {
    throw badRequest(`duration ${duration} must be a positive number`);
  }
  const n = Math.round(duration * NATIVE_RATE);
  const samples = new Float64Array(n);
  const rng = makeRng(fnv1a(`${kind}:${prompt}`));
  if (kind === "sfx") {
    // decaying noise burst
    for (let i = 0; i < n; i++) {
      samples[i] = 0.5 * Math.exp(-5 * (i / n)) * (rng() * 2 - 1);
    }
  } else if (kind === "ambiance") {
    // smoothed noise bed
    let state = 0;
    for (let i = 0; i < n; i++) {
      state = 0.98 * state + 0.02 * (rng() * 2 - 1);
      samples[i] = 0.4 * state;
    }
  } else {
    // three-note chord from the prompt hash
    const root = 110 + (fnv1a(prompt) % 110);
    for (const ratio of [1, 1.25, 1.5]) {
      const tone = sine(root * ratio, n, NATIVE_RATE, 0.12);
      for (let i = 0; i < n; i++) samples[i]! += tone[i]!;
    }
  }
  return { samples: applyEdgeRamp(samples, Math.round(NATIVE_RATE / 100)),
           sampleRate: NATIVE_RATE };
}

export function embed(text: string): number[] {
  const vector = new Float64Array(EMBED_DIMENSION);
  const padded = `${text}`;
  for (let i = 0; i + 3 <= padded.length; i++) {
    const hash = fnv1a(padded.slice(i, i + 3));
    const sign = (hash >>> 8) & 1 ? 1 : -1;
    vector[hash % EMBED_DIMENSION]! += sign;
  }
  let norm = Math.sqrt(vector.reduce((acc, v) => acc + v * v, 0));
  if (norm === 0) {
    vector[0] = 1;
    norm = 1;
  }
  return Array.from(vector, (v) => v / norm);
}

export interface Span {
  word: string;
  start: number;
  end: number;
}

/** Partition the clip proportionally to word lengths (in characters). */
export function align(words: string[], clip: Clip): { spans: Span[]; clip_duration: number } {
  const duration = clipDuration(clip);
  if (words.length === 0) return { spans: [], clip_duration: duration };
  const weights = words.map((word) => Math.max(1, word.length));
  const total = weights.reduce((a, b) => a + b, 0);
  const spans: Span[] = [];
  let consumed = 0;
  for (let i = 0; i < words.length; i++) {
    const start = duration * (consumed / total);
    consumed += weights[i]!;
    const end = i === words.length - 1 ? duration : duration * (consumed / total);
    spans.push({ word: words[i]!, start, end });
  }
  return { spans, clip_duration: duration };
}

/** Loudness/cleanliness heuristic mapped onto the 1..5 opinion scale. */
export function predictMos(clip: Clip): number {
  const loudness = rms(clip.samples);
  const score = 1
    + 14 * Math.min(loudness, 0.35)
    - 6 * clippedFraction(clip.samples)
    - 2 * Math.abs(meanOffset(clip.samples));
  return Math.min(5, Math.max(1, score));
}

export function speakerEmbed(clip: Clip): { values: number[]; source_model: string } {
  const vector = new Float64Array(SPEAKER_DIMENSION);
  const n = clip.samples.length;
  if (n > 0) {
    for (let band = 0; band < SPEAKER_DIMENSION; band++) {
      const lo = Math.floor((band * n) / SPEAKER_DIMENSION);
      const hi = Math.floor(((band + 1) * n) / SPEAKER_DIMENSION);
      vector[band] = rms(clip.samples.subarray(lo, hi));
    }
  }
  let norm = Math.sqrt(vector.reduce((acc, v) => acc + v * v, 0));
  if (norm === 0) {
    vector[0] = 1;
    norm = 1;
  }
  return {
    values: Array.from(vector, (v) => v / norm),
    source_model: SPEAKER_SOURCE_MODEL,
  };
}

/** Templated judge: a short rationale plus a fenced score block. */
export function judge(prompt: string, attachments: string[],
                      sessionId: string): string {
  const key = fnv1a(`${sessionId}:${attachments.length}`);
  const pick = (bit: number) => 3 + ((key >>> bit) % 3);
  const scores = {
    quality: pick(0),
    naturalness: pick(3),
    expressiveness: pick(6),
    immersion: pick(9),
    overall: pick(12),
  };
  return [
    `Considered the request (${prompt.length} chars, `
      + `${attachments.length} attachment(s)).`,
    "The piece is coherent and the pacing serviceable.",
    "```json",
    JSON.stringify(scores),
    "```",
  ].join("\n");
}
