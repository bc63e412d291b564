// Parameter panel: sliders and toggles for the mask, localizer selection,
// and the TDOA override readout. Edits are debounced and sent as control
// messages; until the ack arrives the edited value renders with a pending
// marker, and a rejection drops the pending overlay (reverting the control)
// and surfaces the server's reason.

import type { ControlKind } from "./protocol.js";
import type { SessionClient } from "./client.js";
import type { ParamKey, UiSessionState } from "./state.js";

export const DEFAULT_ALPHA = 3 / 16;
export const DEFAULT_EPSILON = 3 / 64;
export const DEBOUNCE_MS = 150;

export interface SliderSpec {
  key: "epsilon" | "alpha" | "eta";
  label: string;
  min: number;
  max: number;
  step: number;
  def: number;
}

export const SLIDERS: readonly SliderSpec[] = [
  { key: "epsilon", label: "mask width ε (fraction of τ range)", min: 1 / 64, max: 1, step: 1 / 64, def: DEFAULT_EPSILON },
  { key: "alpha", label: "soft width α", min: 1 / 64, max: 1, step: 1 / 64, def: DEFAULT_ALPHA },
  { key: "eta", label: "gain floor η", min: 0, max: 1, step: 0.01, def: 0 },
];

export function clamp(x: number, lo: number, hi: number): number {
  return Math.min(Math.max(x, lo), hi);
}

export interface Debounced<A extends unknown[]> {
  call: (...args: A) => void;
  cancel: () => void;
}

/** Trailing-edge debounce: only the last call within waitMs is delivered. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return {
    call(...args: A) {
      if (timer !== null) {
        clearTimeout(timer);
      }
      timer = setTimeout(() => {
        timer = null;
        fn(...args);
      }, waitMs);
    },
    cancel() {
      if (timer !== null) {
        clearTimeout(timer);
        timer = null;
      }
    },
  };
}

/**
 * The control message one panel edit turns into. window_frames rides on a
 * set_localizer message, so that key needs the currently selected mode.
 */
export function controlForEdit(
  key: ParamKey,
  value: unknown,
  currentMode?: string,
): [ControlKind, Record<string, unknown>] {
  switch (key) {
    case "epsilon":
    case "alpha":
    case "beta":
    case "eta":
    case "mode":
    case "coefficient_mode":
      return ["set_mask_params", { [key]: value }];
    case "localizer_mode":
      return ["set_localizer", { mode: value }];
    case "window_frames":
      return ["set_localizer", { mode: currentMode ?? "sliding", window_frames: value }];
    case "tdoa_override":
      if (value === null) {
        return ["clear_tdoa_override", {}];
      }
      return ["set_tdoa_override", { tdoa_index: value }];
  }
}

export function formatParam(key: ParamKey, value: unknown): string {
  if (value === undefined) {
    return "-";
  }
  if (value === null) {
    return key === "tdoa_override" ? "auto" : "-";
  }
  if (typeof value === "number") {
    return Number.isInteger(value) ? String(value) : value.toFixed(4);
  }
  return String(value);
}

// --- DOM construction (browser only) -------------------------------------------

interface Row {
  key: ParamKey;
  input: HTMLInputElement | HTMLSelectElement;
  valueSpan: HTMLSpanElement;
}

export interface PanelHandle {
  refresh(state: UiSessionState): void;
}

function labelled(doc: Document, parent: HTMLElement, text: string): HTMLDivElement {
  const row = doc.createElement("div");
  row.className = "row";
  const label = doc.createElement("label");
  label.textContent = text;
  row.appendChild(label);
  parent.appendChild(row);
  return row;
}

export function buildPanel(doc: Document, root: HTMLElement, client: SessionClient): PanelHandle {
  const rows: Row[] = [];
  const emitters = new Map<ParamKey, Debounced<[unknown]>>();

  const send = (key: ParamKey, value: unknown) => {
    const mode = client.state.paramView("localizer_mode").value as string | undefined;
    const [kind, payload] = controlForEdit(key, value, mode);
    client.sendControl(kind, payload);
  };
  const emitterFor = (key: ParamKey): Debounced<[unknown]> => {
    let e = emitters.get(key);
    if (!e) {
      e = debounce((value: unknown) => send(key, value), DEBOUNCE_MS);
      emitters.set(key, e);
    }
    return e;
  };

  for (const spec of SLIDERS) {
    const row = labelled(doc, root, spec.label);
    const input = doc.createElement("input");
    input.type = "range";
    input.min = String(spec.min);
    input.max = String(spec.max);
    input.step = String(spec.step);
    input.value = String(spec.def);
    const valueSpan = doc.createElement("span");
    valueSpan.className = "value";
    input.addEventListener("input", () => {
      const v = clamp(Number(input.value), spec.min, spec.max);
      valueSpan.textContent = formatParam(spec.key, v) + " ...";
      emitterFor(spec.key).call(v);
    });
    row.appendChild(input);
    row.appendChild(valueSpan);
    rows.push({ key: spec.key, input, valueSpan });
  }

  // beta: a positive number, or infinity for a hard cutoff
  {
    const row = labelled(doc, root, "shape β");
    const input = doc.createElement("input");
    input.type = "number";
    input.min = "0.1";
    input.step = "0.1";
    input.value = "2";
    const inf = doc.createElement("input");
    inf.type = "checkbox";
    inf.checked = true;
    const infLabel = doc.createElement("span");
    infLabel.textContent = "∞";
    const valueSpan = doc.createElement("span");
    valueSpan.className = "value";
    const emitBeta = () => {
      const value = inf.checked ? "inf" : Number(input.value);
      input.disabled = inf.checked;
      emitterFor("beta").call(value);
    };
    input.addEventListener("input", emitBeta);
    inf.addEventListener("change", emitBeta);
    row.appendChild(input);
    row.appendChild(inf);
    row.appendChild(infLabel);
    row.appendChild(valueSpan);
    rows.push({ key: "beta", input, valueSpan });
  }

  const addSelect = (key: ParamKey, label: string, options: string[]) => {
    const row = labelled(doc, root, label);
    const select = doc.createElement("select");
    for (const opt of options) {
      const el = doc.createElement("option");
      el.value = opt;
      el.textContent = opt;
      select.appendChild(el);
    }
    const valueSpan = doc.createElement("span");
    valueSpan.className = "value";
    select.addEventListener("change", () => emitterFor(key).call(select.value));
    row.appendChild(select);
    row.appendChild(valueSpan);
    rows.push({ key, input: select, valueSpan });
  };

  addSelect("mode", "mask mode", ["binary", "soft"]);
  addSelect("coefficient_mode", "coefficients", ["all_ones", "inferred"]);
  addSelect("localizer_mode", "localizer", ["accumulated", "sliding", "offline"]);

  {
    const row = labelled(doc, root, "sliding window (frames)");
    const input = doc.createElement("input");
    input.type = "number";
    input.min = "1";
    input.step = "1";
    input.value = "16";
    const valueSpan = doc.createElement("span");
    valueSpan.className = "value";
    input.addEventListener("input", () => {
      const v = Math.max(1, Math.round(Number(input.value)));
      emitterFor("window_frames").call(v);
    });
    row.appendChild(input);
    row.appendChild(valueSpan);
    rows.push({ key: "window_frames", input, valueSpan });
  }

  // override readout; set by clicking the heatmap, cleared here
  const overrideRow = labelled(doc, root, "τ override");
  const overrideSpan = doc.createElement("span");
  overrideSpan.className = "value";
  const clearButton = doc.createElement("button");
  clearButton.textContent = "clear";
  clearButton.addEventListener("click", () => {
    client.sendControl("clear_tdoa_override", {});
  });
  overrideRow.appendChild(overrideSpan);
  overrideRow.appendChild(clearButton);

  const rejectionLine = doc.createElement("div");
  rejectionLine.className = "rejection";
  root.appendChild(rejectionLine);

  const refresh = (state: UiSessionState) => {
    for (const row of rows) {
      const view = state.paramView(row.key);
      const text = formatParam(row.key, view.value);
      row.valueSpan.textContent = view.pending ? text + " (pending)" : text;
      row.valueSpan.classList.toggle("pending", view.pending);
      // Don't yank the control out from under an active edit.
      if (doc.activeElement !== row.input && view.value !== undefined && view.value !== null) {
        if (row.key === "beta" && view.value === "inf") {
          // the checkbox covers this case; leave the number field alone
        } else {
          row.input.value = String(view.value);
        }
      }
    }
    const override = state.paramView("tdoa_override");
    overrideSpan.textContent =
      formatParam("tdoa_override", override.value) + (override.pending ? " (pending)" : "");
    rejectionLine.textContent = state.lastRejection
      ? `rejected (msg ${state.lastRejection.msgId}): ${state.lastRejection.reason}`
      : "";
  };

  return { refresh };
}
