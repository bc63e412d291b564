// Wire types for the stereonmf live service. The binary layout and the JSON
// message shapes are documented in ../../docs/protocol.md; this module is a
// faithful encoder/decoder pair for them and nothing more. All multi-byte
// fields are little-endian.

export const MAGIC = 0x464d4e53; // the bytes "SNMF"
export const PROTOCOL_VERSION = 1;
export const KIND_TELEMETRY = 1;
export const KIND_AUDIO = 2;
export const FLAG_LOOPED = 0x0001;

const HEADER_BYTES = 16;
const TELEMETRY_FIXED_BYTES = 24;
const AUDIO_FIXED_BYTES = 8;

export class ProtocolError extends Error {}

export interface TelemetryFrame {
  type: "telemetry";
  frameIndex: number;
  tauIndex: number;
  latencyMs: number;
  frameTimeUs: number;
  looped: boolean;
  /** GCC angular spectrum over the TDOA grid, length K. */
  angular: Float32Array;
  /** Per-atom mask, length D. */
  mask: Float32Array;
  /** Channel-averaged per-bin filter gains, length F. */
  gains: Float32Array;
}

export interface AudioFrame {
  type: "audio";
  frameIndex: number;
  looped: boolean;
  channels: number;
  samplesPerChannel: number;
  /** Interleaved s16 PCM (L R L R ...). */
  pcm: Int16Array;
}

export type BinaryFrame = TelemetryFrame | AudioFrame;

function readHeader(view: DataView): { frameIndex: number; kind: number; flags: number } {
  if (view.byteLength < HEADER_BYTES) {
    throw new ProtocolError(`frame too short for header: ${view.byteLength} bytes`);
  }
  const magic = view.getUint32(0, true);
  if (magic !== MAGIC) {
    throw new ProtocolError(`bad magic 0x${magic.toString(16)}`);
  }
  const version = view.getUint32(4, true);
  if (version !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${version}`);
  }
  return {
    frameIndex: view.getUint32(8, true),
    kind: view.getUint16(12, true),
    flags: view.getUint16(14, true),
  };
}

/** Decode one binary frame from the server. Rejects anything off-layout. */
export function decodeBinary(buf: ArrayBuffer): BinaryFrame {
  const view = new DataView(buf);
  const head = readHeader(view);
  if (head.kind === KIND_TELEMETRY) {
    return decodeTelemetryBody(buf, view, head);
  }
  if (head.kind === KIND_AUDIO) {
    return decodeAudioBody(buf, view, head);
  }
  throw new ProtocolError(`unknown frame kind ${head.kind}`);
}

export function decodeTelemetry(buf: ArrayBuffer): TelemetryFrame {
  const frame = decodeBinary(buf);
  if (frame.type !== "telemetry") {
    throw new ProtocolError(`expected telemetry, got kind ${frame.type}`);
  }
  return frame;
}

function decodeTelemetryBody(
  buf: ArrayBuffer,
  view: DataView,
  head: { frameIndex: number; flags: number },
): TelemetryFrame {
  if (view.byteLength < HEADER_BYTES + TELEMETRY_FIXED_BYTES) {
    throw new ProtocolError(`telemetry frame too short: ${view.byteLength} bytes`);
  }
  const tauIndex = view.getUint32(16, true);
  const latencyMs = view.getFloat32(20, true);
  const frameTimeUs = view.getFloat32(24, true);
  const k = view.getUint32(28, true);
  const d = view.getUint32(32, true);
  const f = view.getUint32(36, true);
  const need = HEADER_BYTES + TELEMETRY_FIXED_BYTES + 4 * (k + d + f);
  if (view.byteLength !== need) {
    throw new ProtocolError(
      `telemetry length mismatch: got ${view.byteLength}, layout needs ${need}`,
    );
  }
  // Float32Array views require 4-byte alignment; the offsets here always are.
  let off = HEADER_BYTES + TELEMETRY_FIXED_BYTES;
  const angular = new Float32Array(buf.slice(off, off + 4 * k));
  off += 4 * k;
  const mask = new Float32Array(buf.slice(off, off + 4 * d));
  off += 4 * d;
  const gains = new Float32Array(buf.slice(off, off + 4 * f));
  return {
    type: "telemetry",
    frameIndex: head.frameIndex,
    tauIndex,
    latencyMs,
    frameTimeUs,
    looped: (head.flags & FLAG_LOOPED) !== 0,
    angular,
    mask,
    gains,
  };
}

function decodeAudioBody(
  buf: ArrayBuffer,
  view: DataView,
  head: { frameIndex: number; flags: number },
): AudioFrame {
  if (view.byteLength < HEADER_BYTES + AUDIO_FIXED_BYTES) {
    throw new ProtocolError(`audio frame too short: ${view.byteLength} bytes`);
  }
  const channels = view.getUint16(16, true);
  const samplesPerChannel = view.getUint32(20, true);
  const need = HEADER_BYTES + AUDIO_FIXED_BYTES + 2 * channels * samplesPerChannel;
  if (view.byteLength !== need) {
    throw new ProtocolError(
      `audio length mismatch: got ${view.byteLength}, layout needs ${need}`,
    );
  }
  const pcm = new Int16Array(buf.slice(HEADER_BYTES + AUDIO_FIXED_BYTES));
  return {
    type: "audio",
    frameIndex: head.frameIndex,
    looped: (head.flags & FLAG_LOOPED) !== 0,
    channels,
    samplesPerChannel,
    pcm,
  };
}

/**
 * Encode a telemetry frame. The browser never sends telemetry; this exists
 * so tests and mock servers can produce frames that are byte-identical to
 * the real service's output.
 */
export function encodeTelemetry(frame: Omit<TelemetryFrame, "type">): ArrayBuffer {
  const k = frame.angular.length;
  const d = frame.mask.length;
  const f = frame.gains.length;
  const buf = new ArrayBuffer(HEADER_BYTES + TELEMETRY_FIXED_BYTES + 4 * (k + d + f));
  const view = new DataView(buf);
  view.setUint32(0, MAGIC, true);
  view.setUint32(4, PROTOCOL_VERSION, true);
  view.setUint32(8, frame.frameIndex, true);
  view.setUint16(12, KIND_TELEMETRY, true);
  view.setUint16(14, frame.looped ? FLAG_LOOPED : 0, true);
  view.setUint32(16, frame.tauIndex, true);
  view.setFloat32(20, frame.latencyMs, true);
  view.setFloat32(24, frame.frameTimeUs, true);
  view.setUint32(28, k, true);
  view.setUint32(32, d, true);
  view.setUint32(36, f, true);
  let off = HEADER_BYTES + TELEMETRY_FIXED_BYTES;
  new Float32Array(buf, off, k).set(frame.angular);
  off += 4 * k;
  new Float32Array(buf, off, d).set(frame.mask);
  off += 4 * d;
  new Float32Array(buf, off, f).set(frame.gains);
  return buf;
}

// --- JSON control plane -----------------------------------------------------

export type ControlKind =
  | "set_mask_params"
  | "set_tdoa_override"
  | "clear_tdoa_override"
  | "set_localizer"
  | "set_dictionary";

export const CONTROL_KINDS: ReadonlySet<string> = new Set([
  "set_mask_params",
  "set_tdoa_override",
  "clear_tdoa_override",
  "set_localizer",
  "set_dictionary",
]);

/** Mask parameters as they appear on the wire. beta uses "inf" for infinity. */
export interface MaskParams {
  epsilon: number;
  alpha: number;
  beta: number | "inf";
  eta: number;
  mode: "binary" | "soft";
  coefficient_mode: "all_ones" | "inferred";
}

export interface Hello {
  kind: "hello";
  protocol_version: number;
  fs: number;
  frame_size: number;
  hop: number;
  latency_ms: number;
  n_tdoa: number;
  n_atoms: number;
  n_bins: number;
  tdoa_values: number[];
  mask: MaskParams;
  localizer_mode: string;
  tdoa_override: number | null;
  looped_source: boolean;
}

export interface Ack {
  kind: "ack";
  msg_id: number | null;
  status: "applied" | "rejected";
  reason?: string;
}

export type ServerText = Hello | Ack;

export function encodeControl(
  msgId: number,
  kind: ControlKind,
  payload?: Record<string, unknown>,
): string {
  const msg: Record<string, unknown> = { msg_id: msgId, kind };
  if (payload !== undefined) {
    msg.payload = payload;
  }
  return JSON.stringify(msg);
}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

/** Parse a text frame from the server into a hello or an ack. */
export function parseServerText(text: string): ServerText {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("server text frame is not valid JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ProtocolError("server text frame is not an object");
  }
  const obj = raw as Record<string, unknown>;
  if (obj.kind === "ack") {
    return parseAck(obj);
  }
  if (obj.kind === "hello") {
    return parseHello(obj);
  }
  throw new ProtocolError(`unexpected server message kind ${JSON.stringify(obj.kind)}`);
}

function parseAck(obj: Record<string, unknown>): Ack {
  const msgId = obj.msg_id;
  if (msgId !== null && !isFiniteNumber(msgId)) {
    throw new ProtocolError("ack msg_id must be a number or null");
  }
  if (obj.status !== "applied" && obj.status !== "rejected") {
    throw new ProtocolError(`ack status must be applied or rejected, got ${JSON.stringify(obj.status)}`);
  }
  const ack: Ack = { kind: "ack", msg_id: msgId as number | null, status: obj.status };
  if (obj.reason !== undefined) {
    if (typeof obj.reason !== "string") {
      throw new ProtocolError("ack reason must be a string");
    }
    ack.reason = obj.reason;
  }
  return ack;
}

function parseMaskParams(raw: unknown): MaskParams {
  if (typeof raw !== "object" || raw === null) {
    throw new ProtocolError("hello mask must be an object");
  }
  const m = raw as Record<string, unknown>;
  for (const key of ["epsilon", "alpha", "eta"]) {
    if (!isFiniteNumber(m[key])) {
      throw new ProtocolError(`mask ${key} must be a finite number`);
    }
  }
  if (m.beta !== "inf" && !isFiniteNumber(m.beta)) {
    throw new ProtocolError('mask beta must be a number or "inf"');
  }
  if (m.mode !== "binary" && m.mode !== "soft") {
    throw new ProtocolError(`mask mode must be binary or soft, got ${JSON.stringify(m.mode)}`);
  }
  if (m.coefficient_mode !== "all_ones" && m.coefficient_mode !== "inferred") {
    throw new ProtocolError("mask coefficient_mode must be all_ones or inferred");
  }
  return {
    epsilon: m.epsilon as number,
    alpha: m.alpha as number,
    beta: m.beta as number | "inf",
    eta: m.eta as number,
    mode: m.mode,
    coefficient_mode: m.coefficient_mode,
  };
}

function parseHello(obj: Record<string, unknown>): Hello {
  for (const key of [
    "protocol_version",
    "fs",
    "frame_size",
    "hop",
    "latency_ms",
    "n_tdoa",
    "n_atoms",
    "n_bins",
  ]) {
    if (!isFiniteNumber(obj[key])) {
      throw new ProtocolError(`hello ${key} must be a finite number`);
    }
  }
  if (obj.protocol_version !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${obj.protocol_version}`);
  }
  if (!Array.isArray(obj.tdoa_values) || !obj.tdoa_values.every(isFiniteNumber)) {
    throw new ProtocolError("hello tdoa_values must be an array of numbers");
  }
  if (obj.tdoa_values.length !== obj.n_tdoa) {
    throw new ProtocolError("hello tdoa_values length disagrees with n_tdoa");
  }
  if (typeof obj.localizer_mode !== "string") {
    throw new ProtocolError("hello localizer_mode must be a string");
  }
  if (obj.tdoa_override !== null && !isFiniteNumber(obj.tdoa_override)) {
    throw new ProtocolError("hello tdoa_override must be a number or null");
  }
  if (typeof obj.looped_source !== "boolean") {
    throw new ProtocolError("hello looped_source must be a boolean");
  }
  return {
    kind: "hello",
    protocol_version: obj.protocol_version as number,
    fs: obj.fs as number,
    frame_size: obj.frame_size as number,
    hop: obj.hop as number,
    latency_ms: obj.latency_ms as number,
    n_tdoa: obj.n_tdoa as number,
    n_atoms: obj.n_atoms as number,
    n_bins: obj.n_bins as number,
    tdoa_values: obj.tdoa_values as number[],
    mask: parseMaskParams(obj.mask),
    localizer_mode: obj.localizer_mode,
    tdoa_override: obj.tdoa_override as number | null,
    looped_source: obj.looped_source,
  };
}
