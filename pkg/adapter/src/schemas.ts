/**
 * Request validation mirroring the wire protocol's JSON Schemas, version 1.
 * Strict objects: unknown fields are protocol drift and are rejected.
 */
import { z } from "zod";

const audioB64 = z.string().min(1);

export const speakerEmbeddingSchema = z.object({
  values: z.array(z.number()).min(1),
  source_model: z.string(),
}).strict();

export const synthesizeSchema = z.object({
  model_id: z.string().min(1),
  text: z.string(),
  language: z.string().min(1),
  reference_audio: z.string().optional(),
  speaker_embedding: speakerEmbeddingSchema.optional(),
  description: z.string().optional(),
  paralinguistic_tokens: z.array(z.string()).optional(),
}).strict();

export const generateAudioSchema = z.object({
  prompt: z.string().min(1),
  duration: z.number().positive(),
  kind: z.enum(["sfx", "ambiance", "bgm"]),
}).strict();

export const embedSchema = z.object({
  text: z.string(),
}).strict();

export const alignSchema = z.object({
  words: z.array(z.string().min(1)),
  audio_b64: audioB64,
}).strict();

export const mosSchema = z.object({
  audio_b64: audioB64,
}).strict();

export const judgeSchema = z.object({
  prompt: z.string().min(1),
  session_id: z.string().min(1),
  attachments: z.array(z.string()).optional(),
}).strict();

export const speakerEmbedSchema = z.object({
  audio_b64: audioB64,
}).strict();

export const REQUEST_SCHEMAS = {
  synthesize: synthesizeSchema,
  generate_audio: generateAudioSchema,
  embed: embedSchema,
  align: alignSchema,
  mos: mosSchema,
  judge: judgeSchema,
  speaker_embed: speakerEmbedSchema,
} as const;

export type Operation = keyof typeof REQUEST_SCHEMAS;

export const ALL_OPERATIONS = Object.keys(REQUEST_SCHEMAS) as Operation[];
