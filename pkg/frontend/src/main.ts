// Page wiring. One session state object, one socket, one animation loop that
// renders snapshots of the state at display rate. Network callbacks never
// touch the DOM directly.

import { SessionClient } from "./client.js";
import { UiSessionState } from "./state.js";
import { HeatmapView, angularRaster, gainsRaster, bannerText } from "./heatmap.js";
import { buildPanel } from "./panel.js";

const HISTORY_COLS = 512;
const GAIN_ROWS_SHOWN = 128;

function wsUrl(): string {
  // ?ws=ws://host:port/ws overrides the default same-origin endpoint, for
  // the common case of serving these static files separately from the engine.
  const override = new URLSearchParams(location.search).get("ws");
  if (override) {
    return override;
  }
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

function init(): void {
  const state = new UiSessionState(HISTORY_COLS);
  const client = new SessionClient(state);

  const angularCanvas = document.getElementById("angular") as HTMLCanvasElement;
  const gainsCanvas = document.getElementById("gains") as HTMLCanvasElement;
  const panelRoot = document.getElementById("panel") as HTMLElement;
  const statusLine = document.getElementById("status") as HTMLElement;

  const angularView = new HeatmapView(angularCanvas);
  const gainsView = new HeatmapView(gainsCanvas);
  angularView.setClickHandler((tdoaIndex) => {
    client.sendControl("set_tdoa_override", { tdoa_index: tdoaIndex });
  });

  const panel = buildPanel(document, panelRoot, client);

  const renderStatus = () => {
    const parts: string[] = [state.status];
    if (state.hello) {
      parts.push(`${state.hello.fs} Hz`, `${state.hello.latency_ms} ms latency`);
    }
    if (state.lastFrame) {
      parts.push(`frame ${state.lastFrame.frameIndex}`,
        `${state.lastFrame.frameTimeUs.toFixed(0)} us/frame`);
    }
    if (state.looped) {
      parts.push("input looped");
    }
    statusLine.textContent = parts.join(" | ");
  };

  const tick = () => {
    const banner = bannerText(state.status);
    angularView.draw(
      state.angular ? angularRaster(state.angular, state.tau, HISTORY_COLS) : null,
      HISTORY_COLS,
      banner,
      "waiting for telemetry",
    );
    gainsView.draw(
      state.gains ? gainsRaster(state.gains, HISTORY_COLS, GAIN_ROWS_SHOWN) : null,
      HISTORY_COLS,
      null,
      "waiting for telemetry",
    );
    panel.refresh(state);
    renderStatus();
    requestAnimationFrame(tick);
  };

  client.connect(wsUrl());
  requestAnimationFrame(tick);
}

document.addEventListener("DOMContentLoaded", init);
