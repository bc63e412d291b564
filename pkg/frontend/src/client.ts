// Thin WebSocket wrapper. All incoming traffic is routed into UiSessionState;
// outgoing control messages are staged there first so the panel can show them
// as pending until the ack arrives. The socket type is injectable so tests
// can run without a browser or a server.

import { decodeBinary, encodeControl, parseServerText, ProtocolError } from "./protocol.js";
import type { ControlKind } from "./protocol.js";
import type { UiSessionState } from "./state.js";

export interface SocketLike {
  binaryType: string;
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

const defaultFactory: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike;

export class SessionClient {
  readonly state: UiSessionState;
  private factory: SocketFactory;
  private socket: SocketLike | null = null;

  constructor(state: UiSessionState, factory: SocketFactory = defaultFactory) {
    this.state = state;
    this.factory = factory;
  }

  connect(url: string): void {
    if (this.socket) {
      throw new Error("already connected");
    }
    const sock = this.factory(url);
    sock.binaryType = "arraybuffer";
    sock.onopen = () => this.state.onOpen();
    sock.onclose = () => {
      this.socket = null;
      this.state.onClose();
    };
    sock.onerror = () => {
      // onclose follows and carries the state change; nothing to do here.
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    this.socket = sock;
  }

  disconnect(): void {
    this.socket?.close();
  }

  get connected(): boolean {
    return this.socket !== null && this.state.status === "connected";
  }

  /**
   * Stage and transmit one control message. Returns the msg_id, or null when
   * there is no usable connection (the edit is not staged in that case, so
   * nothing dangles as pending forever).
   */
  sendControl(kind: ControlKind, payload?: Record<string, unknown>): number | null {
    if (!this.connected || !this.socket) {
      return null;
    }
    const msgId = this.state.stageControl(kind, payload ?? {});
    this.socket.send(encodeControl(msgId, kind, payload));
    return msgId;
  }

  private handleMessage(data: unknown): void {
    try {
      if (typeof data === "string") {
        const msg = parseServerText(data);
        if (msg.kind === "hello") {
          this.state.onHello(msg);
        } else {
          this.state.onAck(msg);
        }
      } else if (data instanceof ArrayBuffer) {
        const frame = decodeBinary(data);
        if (frame.type === "telemetry") {
          this.state.onTelemetry(frame);
        }
        // Audio frames are possible on ?audio=1 sockets; this UI never opens
        // one, and ignores them if they show up anyway.
      }
    } catch (err) {
      if (err instanceof ProtocolError) {
        console.warn("dropping undecodable server frame:", err.message);
        return;
      }
      throw err;
    }
  }
}
