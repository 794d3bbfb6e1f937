/** Deterministic signal helpers. Nothing here touches Math.random. */

export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** splitmix32: a tiny seeded generator for reproducible noise. */
export function makeRng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x9e3779b9) >>> 0;
    let z = state;
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad) >>> 0;
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97) >>> 0;
    z = (z ^ (z >>> 15)) >>> 0;
    return z / 4294967296;
  };
}

export function sine(freq: number, n: number, rate: number,
                     amplitude: number): Float64Array {
  const out = new Float64Array(n);
  const step = (2 * Math.PI * freq) / rate;
  for (let i = 0; i < n; i++) out[i] = amplitude * Math.sin(step * i);
  return out;
}

export function rms(samples: Float64Array): number {
  if (samples.length === 0) return 0;
  let sum = 0;
  for (let i = 0; i < samples.length; i++) sum += samples[i]! * samples[i]!;
  return Math.sqrt(sum / samples.length);
}

export function peak(samples: Float64Array): number {
  let max = 0;
  for (let i = 0; i < samples.length; i++) {
    const v = Math.abs(samples[i]!);
    if (v > max) max = v;
  }
  return max;
}

/** Fraction of samples at or beyond the clipping point. */
export function clippedFraction(samples: Float64Array): number {
  if (samples.length === 0) return 0;
  let clipped = 0;
  for (let i = 0; i < samples.length; i++) {
    if (Math.abs(samples[i]!) >= 0.999) clipped++;
  }
  return clipped / samples.length;
}

export function meanOffset(samples: Float64Array): number {
  if (samples.length === 0) return 0;
  let sum = 0;
  for (let i = 0; i < samples.length; i++) sum += samples[i]!;
  return sum / samples.length;
}

/** In-place linear attack/release envelope, spans in samples. */
export function applyEdgeRamp(samples: Float64Array, ramp: number): Float64Array {
  const n = samples.length;
  const span = Math.min(ramp, Math.floor(n / 2));
  for (let i = 0; i < span; i++) {
    const gain = (i + 1) / span;
    samples[i]! *= gain;
    samples[n - 1 - i]! *= gain;
  }
  return samples;
}
