/**
 * Live preview stream: one WebSocket per session, latest-wins on the server
 * side, automatic reconnect with a status callback for the banner.
 */

import { parsePreviewMessage, type PreviewFrame } from "./api";

export type ConnectionStatus = "connecting" | "open" | "closed" | "retrying";

export interface StreamSocket {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((event: { data: ArrayBuffer }) => void) | null;
  binaryType: string;
}

export type SocketFactory = (url: string) => StreamSocket;

export interface PreviewStreamOptions {
  socketFactory: SocketFactory;
  onPreview: (frame: PreviewFrame) => void;
  onStatus?: (status: ConnectionStatus) => void;
  retryDelayMs?: number;
  maxRetries?: number;
}

export class PreviewStream {
  private socket: StreamSocket | null = null;
  private retries = 0;
  private stopped = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  latest: PreviewFrame | null = null;

  constructor(
    private readonly url: string,
    private readonly opts: PreviewStreamOptions,
  ) {}

  connect(): void {
    if (this.stopped) return;
    this.opts.onStatus?.(this.retries > 0 ? "retrying" : "connecting");
    const socket = this.opts.socketFactory(this.url);
    socket.binaryType = "arraybuffer";
    socket.onopen = () => {
      this.retries = 0;
      this.opts.onStatus?.("open");
    };
    socket.onmessage = (event) => {
      const frame = parsePreviewMessage(event.data);
      this.latest = frame;
      this.opts.onPreview(frame);
    };
    const onDown = () => {
      if (this.stopped) return;
      this.opts.onStatus?.("closed");
      const max = this.opts.maxRetries ?? 5;
      if (this.retries < max) {
        this.retries += 1;
        this.retryTimer = setTimeout(() => this.connect(), this.opts.retryDelayMs ?? 1000);
      }
    };
    socket.onclose = onDown;
    socket.onerror = onDown;
    this.socket = socket;
  }

  /** Tell the server where the playhead is; triggers a fresh preview push. */
  setPlayhead(frame: number): void {
    this.socket?.send(JSON.stringify({ frame }));
  }

  close(): void {
    this.stopped = true;
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    this.socket?.close();
    this.opts.onStatus?.("closed");
  }
}
