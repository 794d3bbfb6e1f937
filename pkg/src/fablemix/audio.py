"""Sample-accurate mono audio engine.

Clips hold float64 samples; the mixer accumulates into a float64 timeline
and quantizes to 16-bit PCM only at encode, so rendering is deterministic
down to the output bytes. The WAV codec is self-contained (RIFF PCM16 and
float32, mono or stereo input, PCM16 LE mono output) to avoid any platform
variance in third-party decoders.

Placement is exact: a clip placed at time t starts at sample round(t * rate).
Ambiance and BGM assets loop with a 50 ms equal-gain crossfade to fill their
cue window; SFX assets are truncated. Rate conversion is linear interpolation
and happens when assets are loaded, never inside the mixer.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AudioError,
    CorruptHeaderError,
    MissingAssetError,
    RateMismatchError,
    UnsupportedFormatError,
)
from .jsonutil import sha256_hex

DEFAULT_SAMPLE_RATE = 24000

# Master ceiling applied after summation.
PEAK_CEILING = 0.999

# Loop joins and ambiance/bgm edges both use 50 ms ramps.
CROSSFADE_SECONDS = 0.05

ASSET_MANIFEST_VERSION = 1


@dataclass(frozen=True, eq=False)
class Clip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise AudioError(f"clip samples must be 1-D mono, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise AudioError("clip contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate < 1:
            raise AudioError(f"sample_rate {self.sample_rate} must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.samples))) if len(self.samples) else 0.0

    @property
    def rms(self) -> float:
        if not len(self.samples):
            return 0.0
        return float(np.sqrt(np.mean(np.square(self.samples))))


def silence(duration: float, sample_rate: int = DEFAULT_SAMPLE_RATE) -> Clip:
    return Clip(np.zeros(round(duration * sample_rate)), sample_rate)


class Timeline:
    """Mutable float64 accumulation buffer for one render."""

    def __init__(self, length: int, sample_rate: int):
        if length < 0:
            raise AudioError("timeline length must be non-negative")
        self.sample_rate = int(sample_rate)
        self.samples = np.zeros(length, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.samples)

    def to_clip(self) -> Clip:
        return Clip(self.samples.copy(), self.sample_rate)


def _fade_envelope(length: int, fade_in: int, fade_out: int) -> np.ndarray | None:
    if fade_in <= 0 and fade_out <= 0:
        return None
    envelope = np.ones(length, dtype=np.float64)
    if fade_in > 0:
        ramp = (np.arange(fade_in, dtype=np.float64) + 1.0) / fade_in
        envelope[:fade_in] *= ramp
    if fade_out > 0:
        ramp = (np.arange(fade_out, dtype=np.float64)[::-1] + 1.0) / fade_out
        envelope[length - fade_out:] *= ramp
    return envelope


def place(timeline: Timeline, clip: Clip, start: float, gain: float = 1.0,
          fade_in: float = 0.0, fade_out: float = 0.0) -> Timeline:
    """Sum a clip into the timeline at sample index round(start * rate).

    Linear fade ramps are applied over the requested spans (which must fit
    inside the clip); samples falling past the timeline end are dropped.
    """
    if clip.sample_rate != timeline.sample_rate:
        raise RateMismatchError(
            f"clip rate {clip.sample_rate} != timeline rate {timeline.sample_rate}")
    if not 0.0 < gain <= 1.0:
        raise AudioError(f"gain {gain} outside (0, 1]")
    n = len(clip.samples)
    if n == 0:
        return timeline
    fade_in_n = round(fade_in * clip.sample_rate)
    fade_out_n = round(fade_out * clip.sample_rate)
    if fade_in_n + fade_out_n > n:
        raise AudioError("fades longer than the clip")
    samples = clip.samples * gain
    envelope = _fade_envelope(n, fade_in_n, fade_out_n)
    if envelope is not None:
        samples = samples * envelope
    index = round(start * timeline.sample_rate)
    if index >= len(timeline.samples) or index + n <= 0:
        return timeline
    src_lo = max(0, -index)
    src_hi = min(n, len(timeline.samples) - index)
    timeline.samples[index + src_lo:index + src_hi] += samples[src_lo:src_hi]
    return timeline


def loop_to_length(clip: Clip, length: int,
                   crossfade: float = CROSSFADE_SECONDS) -> Clip:
    """Repeat a clip to exactly `length` samples, joining repeats with an
    equal-gain linear crossfade (constant input stays constant)."""
    if length < 0:
        raise AudioError("target length must be non-negative")
    source = clip.samples
    if len(source) == 0:
        raise AudioError("cannot loop an empty clip")
    if len(source) >= length:
        return Clip(source[:length].copy(), clip.sample_rate)
    fade = min(round(crossfade * clip.sample_rate), len(source) - 1)
    if fade > 0:
        j = np.arange(fade, dtype=np.float64)
        up = (j + 1.0) / (fade + 1.0)
        down = (fade - j) / (fade + 1.0)
    out = source.copy()
    while len(out) < length:
        if fade > 0:
            joined = np.concatenate([
                out[:-fade],
                out[-fade:] * down + source[:fade] * up,
                source[fade:],
            ])
        else:
            joined = np.concatenate([out, source])
        out = joined
    return Clip(out[:length], clip.sample_rate)


def peak_normalize(clip: Clip, ceiling: float = PEAK_CEILING) -> Clip:
    if not 0.0 < ceiling <= 1.0:
        raise AudioError(f"ceiling {ceiling} outside (0, 1]")
    peak = clip.peak
    if peak <= ceiling:
        return clip
    return Clip(clip.samples * (ceiling / peak), clip.sample_rate)


def render(sheet, assets, speech: Clip, *, ceiling: float = PEAK_CEILING,
           edge_fade: float = CROSSFADE_SECONDS) -> Clip:
    """Mix the speech track and all cue assets into one master clip.

    `sheet` is a CueSheet, `assets` maps cue_id to Clip. Speech sits at t=0
    with unit gain. Ambiance and BGM assets are looped (or truncated) to the
    cue window and faded in/out over `edge_fade` seconds; SFX assets are
    placed as-is, truncated at the cue window. The sum is peak-normalized
    only when it exceeds `ceiling`.
    """
    rate = sheet.sample_rate
    if speech.sample_rate != rate:
        raise RateMismatchError(f"speech rate {speech.sample_rate} != sheet rate {rate}")
    length = int(np.ceil(sheet.total_duration * rate - 1e-9))
    if abs(len(speech) - sheet.total_duration * rate) > 1.0:
        raise AudioError(
            f"speech length {len(speech)} inconsistent with total_duration "
            f"{sheet.total_duration} at {rate} Hz")
    length = max(length, len(speech))
    timeline = Timeline(length, rate)
    place(timeline, speech, start=0.0, gain=1.0)
    for cue in sheet.all_cues():
        asset = assets.get(cue.cue_id)
        if asset is None:
            raise MissingAssetError(f"no asset for cue {cue.cue_id!r}", cue_id=cue.cue_id)
        if asset.sample_rate != rate:
            raise RateMismatchError(
                f"asset for {cue.cue_id!r}: rate {asset.sample_rate} != {rate}")
        window = round(cue.duration * rate)
        if window <= 0:
            continue
        if cue.kind == "sfx":
            shaped = Clip(asset.samples[:window].copy(), rate)
            fade = 0.0
        else:
            shaped = loop_to_length(asset, window)
            fade = min(edge_fade, (len(shaped) // 2) / rate)
        place(timeline, shaped, start=cue.start_time, gain=cue.volume,
              fade_in=fade, fade_out=fade)
    return peak_normalize(timeline.to_clip(), ceiling)


def resample_linear(clip: Clip, target_rate: int) -> Clip:
    """Linear-interpolation rate conversion (asset ingestion only)."""
    if target_rate < 1:
        raise AudioError(f"target rate {target_rate} must be positive")
    if clip.sample_rate == target_rate:
        return clip
    n = len(clip.samples)
    if n == 0:
        return Clip(np.zeros(0), target_rate)
    target_n = max(1, round(n * target_rate / clip.sample_rate))
    src_t = np.arange(n, dtype=np.float64) / clip.sample_rate
    dst_t = np.arange(target_n, dtype=np.float64) / target_rate
    return Clip(np.interp(dst_t, src_t, clip.samples), target_rate)


# --- WAV codec ------------------------------------------------------------

_PCM16_SCALE = 32768.0


def encode_wav(clip: Clip) -> bytes:
    """Encode as RIFF WAV, PCM 16-bit little-endian mono."""
    scaled = np.round(clip.samples * _PCM16_SCALE)
    pcm = np.clip(scaled, -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    byte_rate = clip.sample_rate * 2
    header = b"".join([
        b"RIFF", struct.pack("<I", 36 + len(data)), b"WAVE",
        b"fmt ", struct.pack("<IHHIIHH", 16, 1, 1, clip.sample_rate, byte_rate, 2, 16),
        b"data", struct.pack("<I", len(data)),
    ])
    return header + data


def decode_wav(data: bytes) -> Clip:
    """Decode RIFF WAV: PCM 16-bit or IEEE float 32-bit, mono or stereo
    (stereo is downmixed by channel averaging)."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeaderError("not a RIFF/WAVE stream")
    fmt = None
    payload = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset:offset + 4]
        (chunk_size,) = struct.unpack_from("<I", data, offset + 4)
        body = data[offset + 8:offset + 8 + chunk_size]
        if len(body) < chunk_size:
            raise CorruptHeaderError(f"truncated {chunk_id!r} chunk")
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise CorruptHeaderError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        offset += 8 + chunk_size + (chunk_size & 1)
    if fmt is None or payload is None:
        raise CorruptHeaderError("missing fmt or data chunk")
    audio_format, channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{channels} channels unsupported (mono/stereo only)")
    if audio_format == 1 and bits == 16:
        frames = np.frombuffer(payload[:len(payload) - len(payload) % (2 * channels)],
                               dtype="<i2").astype(np.float64) / _PCM16_SCALE
    elif audio_format == 3 and bits == 32:
        frames = np.frombuffer(payload[:len(payload) - len(payload) % (4 * channels)],
                               dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedFormatError(
            f"format {audio_format} at {bits}-bit unsupported (PCM16 or float32 only)")
    if channels == 2:
        frames = (frames[0::2] + frames[1::2]) / 2.0
    return Clip(frames, sample_rate)


def save_wav(clip: Clip, path) -> None:
    Path(path).write_bytes(encode_wav(clip))


def load_wav(path) -> Clip:
    return decode_wav(Path(path).read_bytes())


# --- Cue asset store -------------------------------------------------------


def save_assets(directory, clips: dict, sample_rate: int) -> dict:
    """Write cue assets as WAV files plus a digest manifest; returns the
    manifest structure."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = {}
    for cue_id in sorted(clips):
        clip = clips[cue_id]
        if clip.sample_rate != sample_rate:
            raise RateMismatchError(
                f"asset {cue_id!r}: rate {clip.sample_rate} != store rate {sample_rate}")
        filename = f"{cue_id}.wav"
        payload = encode_wav(clip)
        (directory / filename).write_bytes(payload)
        entries[cue_id] = {"path": filename, "sha256": sha256_hex(payload)}
    manifest = {
        "schema_version": ASSET_MANIFEST_VERSION,
        "sample_rate": sample_rate,
        "assets": entries,
    }
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def load_assets(directory) -> dict:
    """Load the cue_id -> Clip mapping written by save_assets, verifying
    file digests."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise MissingAssetError(f"no asset manifest in {directory}", cue_id="")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != ASSET_MANIFEST_VERSION:
        raise UnsupportedFormatError(
            f"unsupported asset manifest version {manifest.get('schema_version')!r}")
    sample_rate = int(manifest["sample_rate"])
    clips = {}
    for cue_id, entry in manifest.get("assets", {}).items():
        path = directory / entry["path"]
        if not path.is_file():
            raise MissingAssetError(f"asset file missing for {cue_id!r}", cue_id=cue_id)
        payload = path.read_bytes()
        if sha256_hex(payload) != entry["sha256"]:
            raise MissingAssetError(f"asset digest mismatch for {cue_id!r}", cue_id=cue_id)
        clip = decode_wav(payload)
        if clip.sample_rate != sample_rate:
            raise RateMismatchError(
                f"asset {cue_id!r}: rate {clip.sample_rate} != store rate {sample_rate}")
        clips[cue_id] = clip
    return clips
