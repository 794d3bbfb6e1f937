/**
 * RIFF/WAVE codec interoperable with the engine's: encodes PCM 16-bit
 * little-endian mono, decodes PCM16 or IEEE float32, mono or stereo
 * (stereo is downmixed by channel averaging).
 */

export interface Clip {
  samples: Float64Array;
  sampleRate: number;
}

const PCM16_SCALE = 32768;

export class WavError extends Error {}

export function encodeWav(clip: Clip): Buffer {
  const n = clip.samples.length;
  const data = Buffer.alloc(n * 2);
  for (let i = 0; i < n; i++) {
    let v = Math.round(clip.samples[i]! * PCM16_SCALE);
    if (v > 32767) v = 32767;
    if (v < -32768) v = -32768;
    data.writeInt16LE(v, i * 2);
  }
  const header = Buffer.alloc(44);
  header.write("RIFF", 0, "ascii");
  header.writeUInt32LE(36 + data.length, 4);
  header.write("WAVE", 8, "ascii");
  header.write("fmt ", 12, "ascii");
  header.writeUInt32LE(16, 16);               // fmt chunk size
  header.writeUInt16LE(1, 20);                // PCM
  header.writeUInt16LE(1, 22);                // mono
  header.writeUInt32LE(clip.sampleRate, 24);
  header.writeUInt32LE(clip.sampleRate * 2, 28);
  header.writeUInt16LE(2, 32);                // block align
  header.writeUInt16LE(16, 34);               // bits per sample
  header.write("data", 36, "ascii");
  header.writeUInt32LE(data.length, 40);
  return Buffer.concat([header, data]);
}

export function decodeWav(data: Buffer): Clip {
  if (data.length < 12 || data.toString("ascii", 0, 4) !== "RIFF" ||
      data.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavError("not a RIFF/WAVE stream");
  }
  let fmt: { format: number; channels: number; rate: number; bits: number } | null = null;
  let payload: Buffer | null = null;
  let offset = 12;
  while (offset + 8 <= data.length) {
    const chunkId = data.toString("ascii", offset, offset + 4);
    const chunkSize = data.readUInt32LE(offset + 4);
    const body = data.subarray(offset + 8, offset + 8 + chunkSize);
    if (body.length < chunkSize) throw new WavError(`truncated ${chunkId} chunk`);
    if (chunkId === "fmt ") {
      if (chunkSize < 16) throw new WavError("fmt chunk too short");
      fmt = {
        format: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        rate: body.readUInt32LE(4),
        bits: body.readUInt16LE(14),
      };
    } else if (chunkId === "data") {
      payload = body;
    }
    offset += 8 + chunkSize + (chunkSize & 1);
  }
  if (fmt === null || payload === null) throw new WavError("missing fmt or data chunk");
  if (fmt.channels !== 1 && fmt.channels !== 2) {
    throw new WavError(`${fmt.channels} channels unsupported (mono/stereo only)`);
  }
  let frames: Float64Array;
  if (fmt.format === 1 && fmt.bits === 16) {
    const stride = 2 * fmt.channels;
    const count = Math.floor(payload.length / stride) * fmt.channels;
    frames = new Float64Array(count);
    for (let i = 0; i < count; i++) {
      frames[i] = payload.readInt16LE(i * 2) / PCM16_SCALE;
    }
  } else if (fmt.format === 3 && fmt.bits === 32) {
    const stride = 4 * fmt.channels;
    const count = Math.floor(payload.length / stride) * fmt.channels;
    frames = new Float64Array(count);
    for (let i = 0; i < count; i++) {
      frames[i] = payload.readFloatLE(i * 4);
    }
  } else {
    throw new WavError(
      `format ${fmt.format} at ${fmt.bits}-bit unsupported (PCM16 or float32 only)`);
  }
  if (fmt.channels === 2) {
    const mono = new Float64Array(frames.length / 2);
    for (let i = 0; i < mono.length; i++) {
      mono[i] = (frames[2 * i]! + frames[2 * i + 1]!) / 2;
    }
    frames = mono;
  }
  return { samples: frames, sampleRate: fmt.rate };
}

export function clipDuration(clip: Clip): number {
  return clip.samples.length / clip.sampleRate;
}
