import { describe, expect, it } from "vitest";

import { UiSessionState } from "../src/state.js";
import type { Hello, TelemetryFrame } from "../src/protocol.js";

export function testHello(overrides: Partial<Hello> = {}): Hello {
  return {
    kind: "hello",
    protocol_version: 1,
    fs: 16000,
    frame_size: 1024,
    hop: 256,
    latency_ms: 80.0,
    n_tdoa: 8,
    n_atoms: 16,
    n_bins: 33,
    tdoa_values: Array.from({ length: 8 }, (_, i) => (i - 3.5) / 8000),
    mask: {
      epsilon: 0.046875,
      alpha: 0.1875,
      beta: "inf",
      eta: 0.0,
      mode: "binary",
      coefficient_mode: "all_ones",
    },
    localizer_mode: "accumulated",
    tdoa_override: null,
    looped_source: false,
    ...overrides,
  };
}

export function testFrame(
  frameIndex: number,
  overrides: Partial<Omit<TelemetryFrame, "type">> = {},
): TelemetryFrame {
  return {
    type: "telemetry",
    frameIndex,
    tauIndex: 3,
    latencyMs: 80.0,
    frameTimeUs: 500.0,
    looped: false,
    angular: new Float32Array(8).fill(0.1),
    mask: new Float32Array(16).fill(1),
    gains: new Float32Array(33).fill(0.5),
    ...overrides,
  };
}

function connected(): UiSessionState {
  const state = new UiSessionState(32);
  state.onOpen();
  state.onHello(testHello());
  return state;
}

describe("connection lifecycle", () => {
  it("is connecting until the hello arrives", () => {
    const state = new UiSessionState(32);
    expect(state.status).toBe("connecting");
    state.onOpen();
    expect(state.status).toBe("connecting");
    state.onHello(testHello());
    expect(state.status).toBe("connected");
  });

  it("keeps telemetry buffers after a disconnect so the view can freeze", () => {
    const state = connected();
    state.onTelemetry(testFrame(0));
    state.onClose();
    expect(state.status).toBe("disconnected");
    expect(state.angular!.length).toBe(1);
    expect(state.lastFrame).not.toBeNull();
  });

  it("a fresh hello resets parameters, buffers and msg ids", () => {
    const state = connected();
    state.onTelemetry(testFrame(0));
    const first = state.stageControl("set_mask_params", { epsilon: 0.5 });
    state.onClose();
    state.onHello(testHello({ localizer_mode: "sliding" }));
    expect(state.paramView("localizer_mode").value).toBe("sliding");
    expect(state.paramView("epsilon")).toEqual({ value: 0.046875, pending: false });
    expect(state.angular!.length).toBe(0);
    expect(state.stageControl("set_mask_params", { epsilon: 0.5 })).toBe(first);
  });
});

describe("acked versus pending parameters", () => {
  it("shows nothing before the hello", () => {
    const state = new UiSessionState(32);
    expect(state.paramView("epsilon")).toEqual({ value: undefined, pending: false });
  });

  it("seeds every confirmed value from the hello", () => {
    const state = connected();
    expect(state.paramView("alpha")).toEqual({ value: 0.1875, pending: false });
    expect(state.paramView("beta")).toEqual({ value: "inf", pending: false });
    expect(state.paramView("mode")).toEqual({ value: "binary", pending: false });
    expect(state.paramView("tdoa_override")).toEqual({ value: null, pending: false });
    expect(state.paramView("window_frames")).toEqual({ value: null, pending: false });
  });

  it("marks a staged edit pending until its ack", () => {
    const state = connected();
    const id = state.stageControl("set_mask_params", { epsilon: 0.25 });
    expect(state.paramView("epsilon")).toEqual({ value: 0.25, pending: true });
    expect(state.pendingCount).toBe(1);

    state.onAck({ kind: "ack", msg_id: id, status: "applied" });
    expect(state.paramView("epsilon")).toEqual({ value: 0.25, pending: false });
    expect(state.lastAckedMsgId).toBe(id);
    expect(state.pendingCount).toBe(0);
  });

  it("reverts a rejected edit and keeps the reason", () => {
    const state = connected();
    const id = state.stageControl("set_mask_params", { eta: 2.0 });
    expect(state.paramView("eta")).toEqual({ value: 2.0, pending: true });

    state.onAck({
      kind: "ack",
      msg_id: id,
      status: "rejected",
      reason: "eta must lie in [0, 1], got 2.0",
    });
    expect(state.paramView("eta")).toEqual({ value: 0.0, pending: false });
    expect(state.lastRejection).toEqual({
      msgId: id,
      reason: "eta must lie in [0, 1], got 2.0",
    });
  });

  it("clears the rejection banner on the next staged edit", () => {
    const state = connected();
    const id = state.stageControl("set_mask_params", { eta: 2.0 });
    state.onAck({ kind: "ack", msg_id: id, status: "rejected", reason: "no" });
    expect(state.lastRejection).not.toBeNull();
    state.stageControl("set_mask_params", { eta: 0.5 });
    expect(state.lastRejection).toBeNull();
  });

  it("lets later in-flight edits win, and unwinds them on rejection", () => {
    const state = connected();
    const first = state.stageControl("set_mask_params", { epsilon: 0.25 });
    const second = state.stageControl("set_mask_params", { epsilon: 0.5 });
    expect(state.paramView("epsilon")).toEqual({ value: 0.5, pending: true });

    state.onAck({ kind: "ack", msg_id: first, status: "applied" });
    expect(state.paramView("epsilon")).toEqual({ value: 0.5, pending: true });

    state.onAck({ kind: "ack", msg_id: second, status: "rejected", reason: "nope" });
    expect(state.paramView("epsilon")).toEqual({ value: 0.25, pending: false });
  });

  it("tracks override set and clear", () => {
    const state = connected();
    const id = state.stageControl("set_tdoa_override", { tdoa_index: 12 });
    expect(state.paramView("tdoa_override")).toEqual({ value: 12, pending: true });
    state.onAck({ kind: "ack", msg_id: id, status: "applied" });
    expect(state.paramView("tdoa_override")).toEqual({ value: 12, pending: false });

    const clear = state.stageControl("clear_tdoa_override", {});
    expect(state.paramView("tdoa_override")).toEqual({ value: null, pending: true });
    state.onAck({ kind: "ack", msg_id: clear, status: "applied" });
    expect(state.paramView("tdoa_override")).toEqual({ value: null, pending: false });
  });

  it("tracks localizer mode and window length together", () => {
    const state = connected();
    const id = state.stageControl("set_localizer", { mode: "sliding", window_frames: 32 });
    expect(state.paramView("localizer_mode")).toEqual({ value: "sliding", pending: true });
    expect(state.paramView("window_frames")).toEqual({ value: 32, pending: true });
    state.onAck({ kind: "ack", msg_id: id, status: "applied" });
    expect(state.paramView("localizer_mode")).toEqual({ value: "sliding", pending: false });
    expect(state.paramView("window_frames")).toEqual({ value: 32, pending: false });
  });

  it("records a rejection that carries no msg_id without touching pending edits", () => {
    const state = connected();
    state.stageControl("set_mask_params", { epsilon: 0.25 });
    state.onAck({ kind: "ack", msg_id: null, status: "rejected", reason: "not valid JSON" });
    expect(state.paramView("epsilon").pending).toBe(true);
    expect(state.lastRejection!.reason).toBe("not valid JSON");
  });
});

describe("telemetry intake", () => {
  it("fills the rings and remembers the last frame", () => {
    const state = connected();
    for (let i = 0; i < 5; i++) {
      state.onTelemetry(testFrame(i * 10, { tauIndex: i }));
    }
    expect(state.framesSeen).toBe(5);
    expect(state.angular!.length).toBe(5);
    expect(state.gains!.length).toBe(5);
    expect(state.tau.latest()).toBe(4);
    expect(state.frameIndices.latest()).toBe(40);
    expect(state.lastFrame!.frameIndex).toBe(40);
  });

  it("stays bounded under a long stream", () => {
    const state = connected();
    for (let i = 0; i < 200; i++) {
      state.onTelemetry(testFrame(i));
    }
    expect(state.angular!.length).toBe(32);
    expect(state.tau.length).toBe(32);
  });

  it("keeps the looped marker once set", () => {
    const state = connected();
    state.onTelemetry(testFrame(0));
    expect(state.looped).toBe(false);
    state.onTelemetry(testFrame(1, { looped: true }));
    state.onTelemetry(testFrame(2));
    expect(state.looped).toBe(true);
  });

  it("reallocates the angular ring if the grid size changes", () => {
    const state = connected();
    state.onTelemetry(testFrame(0));
    state.onTelemetry(testFrame(1, { angular: new Float32Array(16).fill(0.2) }));
    expect(state.angular!.rows).toBe(16);
    expect(state.angular!.length).toBe(1);
    expect(state.tau.length).toBe(1);
  });
});
