// Client-side session state. Everything the UI renders lives here, and it is
// mutated only by network callbacks (hello, ack, telemetry, close) plus
// stageControl when the user edits something. Rendering takes snapshots.
//
// The core rule: a displayed parameter value is either what the server last
// confirmed (via hello or an applied ack) or a visibly pending local edit.
// Nothing else is ever shown.

import { ColumnRing, ScalarRing } from "./ring.js";
import type { ControlKind, Hello, Ack, MaskParams, TelemetryFrame } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface PendingEdit {
  kind: ControlKind;
  payload: Record<string, unknown>;
}

export interface ParamView {
  value: unknown;
  pending: boolean;
}

export interface Rejection {
  msgId: number | null;
  reason: string;
}

/** Parameters the server confirmed, in wire naming. */
export interface SessionParams {
  mask: MaskParams;
  localizer_mode: string;
  window_frames: number | null;
  tdoa_override: number | null;
}

export type ParamKey =
  | "epsilon"
  | "alpha"
  | "beta"
  | "eta"
  | "mode"
  | "coefficient_mode"
  | "localizer_mode"
  | "window_frames"
  | "tdoa_override";

const MASK_KEYS: ReadonlySet<string> = new Set([
  "epsilon",
  "alpha",
  "beta",
  "eta",
  "mode",
  "coefficient_mode",
]);

export class UiSessionState {
  status: ConnectionStatus = "connecting";
  hello: Hello | null = null;
  params: SessionParams | null = null;
  lastAckedMsgId: number | null = null;
  lastRejection: Rejection | null = null;
  looped = false;
  lastFrame: TelemetryFrame | null = null;
  framesSeen = 0;

  // Telemetry history. Allocated on hello, reallocated if dimensions change
  // mid-session (a dictionary swap changes D).
  angular: ColumnRing | null = null;
  gains: ColumnRing | null = null;
  tau: ScalarRing;
  frameIndices: ScalarRing;

  private readonly historyColumns: number;
  private nextMsgId = 1;
  private pending = new Map<number, PendingEdit>();

  constructor(historyColumns = 512) {
    this.historyColumns = historyColumns;
    this.tau = new ScalarRing(historyColumns);
    this.frameIndices = new ScalarRing(historyColumns);
  }

  // --- network callbacks ----------------------------------------------------

  onOpen(): void {
    this.status = "connecting"; // usable only once the hello lands
  }

  onHello(hello: Hello): void {
    this.hello = hello;
    this.params = {
      mask: { ...hello.mask },
      localizer_mode: hello.localizer_mode,
      window_frames: null,
      tdoa_override: hello.tdoa_override,
    };
    this.angular = new ColumnRing(hello.n_tdoa, this.historyColumns);
    this.gains = new ColumnRing(hello.n_bins, this.historyColumns);
    this.tau.clear();
    this.frameIndices.clear();
    this.lastFrame = null;
    this.framesSeen = 0;
    this.looped = hello.looped_source;
    this.pending.clear();
    this.nextMsgId = 1;
    this.lastAckedMsgId = null;
    this.lastRejection = null;
    this.status = "connected";
  }

  onAck(ack: Ack): void {
    const edit = ack.msg_id === null ? undefined : this.pending.get(ack.msg_id);
    if (ack.msg_id !== null) {
      this.pending.delete(ack.msg_id);
    }
    if (ack.status === "applied") {
      this.lastAckedMsgId = ack.msg_id;
      if (edit && this.params) {
        applyEdit(this.params, edit);
      }
      return;
    }
    // Rejected: the pending overlay is gone, so the rendered value falls
    // back to the last confirmed one. Keep the reason for display.
    this.lastRejection = { msgId: ack.msg_id, reason: ack.reason ?? "rejected" };
  }

  onTelemetry(frame: TelemetryFrame): void {
    this.ensureBuffers(frame.angular.length, frame.gains.length);
    this.angular!.push(frame.angular);
    this.gains!.push(frame.gains);
    this.tau.push(frame.tauIndex);
    this.frameIndices.push(frame.frameIndex);
    this.lastFrame = frame;
    this.framesSeen++;
    if (frame.looped) {
      this.looped = true;
    }
  }

  onClose(): void {
    this.status = "disconnected";
    // Buffers are kept on purpose: the heatmap freezes instead of blanking.
  }

  // --- local edits ------------------------------------------------------------

  /** Record a control message as pending and hand back its msg_id. */
  stageControl(kind: ControlKind, payload: Record<string, unknown> = {}): number {
    const msgId = this.nextMsgId++;
    this.pending.set(msgId, { kind, payload });
    this.lastRejection = null;
    return msgId;
  }

  get pendingCount(): number {
    return this.pending.size;
  }

  /**
   * The value to render for one parameter, with pending edits overlaid on the
   * confirmed state. Later edits win when several are in flight.
   */
  paramView(key: ParamKey): ParamView {
    let value = this.confirmedValue(key);
    let isPending = false;
    for (const edit of this.pending.values()) {
      const next = editValue(edit, key);
      if (next !== undefined) {
        value = next.value;
        isPending = true;
      }
    }
    return { value, pending: isPending };
  }

  private confirmedValue(key: ParamKey): unknown {
    if (!this.params) {
      return undefined;
    }
    if (MASK_KEYS.has(key)) {
      return this.params.mask[key as keyof MaskParams];
    }
    return this.params[key as keyof SessionParams];
  }

  private ensureBuffers(k: number, f: number): void {
    if (!this.angular || this.angular.rows !== k) {
      this.angular = new ColumnRing(k, this.historyColumns);
      this.tau.clear();
      this.frameIndices.clear();
    }
    if (!this.gains || this.gains.rows !== f) {
      this.gains = new ColumnRing(f, this.historyColumns);
    }
  }
}

function applyEdit(params: SessionParams, edit: PendingEdit): void {
  switch (edit.kind) {
    case "set_mask_params":
      for (const [key, value] of Object.entries(edit.payload)) {
        if (MASK_KEYS.has(key)) {
          (params.mask as unknown as Record<string, unknown>)[key] = value;
        }
      }
      break;
    case "set_tdoa_override":
      params.tdoa_override = edit.payload.tdoa_index as number;
      break;
    case "clear_tdoa_override":
      params.tdoa_override = null;
      break;
    case "set_localizer":
      params.localizer_mode = edit.payload.mode as string;
      if (edit.payload.window_frames !== undefined) {
        params.window_frames = edit.payload.window_frames as number;
      }
      break;
    case "set_dictionary":
      // Changes nothing the panel displays; telemetry dimensions may move.
      break;
  }
}

/** What a pending edit would set `key` to, or undefined if it does not touch it. */
function editValue(edit: PendingEdit, key: ParamKey): { value: unknown } | undefined {
  switch (edit.kind) {
    case "set_mask_params":
      if (MASK_KEYS.has(key) && key in edit.payload) {
        return { value: edit.payload[key] };
      }
      return undefined;
    case "set_tdoa_override":
      return key === "tdoa_override" ? { value: edit.payload.tdoa_index } : undefined;
    case "clear_tdoa_override":
      return key === "tdoa_override" ? { value: null } : undefined;
    case "set_localizer":
      if (key === "localizer_mode") {
        return { value: edit.payload.mode };
      }
      if (key === "window_frames" && edit.payload.window_frames !== undefined) {
        return { value: edit.payload.window_frames };
      }
      return undefined;
    case "set_dictionary":
      return undefined;
  }
}
