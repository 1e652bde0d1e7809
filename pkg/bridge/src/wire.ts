/**
 * Length-prefixed JSON framing: 4-byte little-endian payload length, then
 * UTF-8 JSON. Matches the client's wire module byte for byte.
 */

export const MAX_FRAME_BYTES = 64 * 1024 * 1024;

export function encodeFrame(obj: unknown): Buffer {
  const payload = Buffer.from(JSON.stringify(obj), "utf8");
  if (payload.length > MAX_FRAME_BYTES) {
    throw new Error(`frame of ${payload.length} bytes exceeds the ${MAX_FRAME_BYTES} cap`);
  }
  const header = Buffer.alloc(4);
  header.writeUInt32LE(payload.length, 0);
  return Buffer.concat([header, payload]);
}

export interface DecodedFrame {
  /** Parsed JSON object, or undefined when the payload was not a JSON object. */
  obj?: Record<string, unknown>;
  /** Set when the payload failed to decode; the frame boundary is still intact. */
  error?: string;
}

/** Thrown when the length prefix itself is unusable; the stream cannot resync. */
export class FramingError extends Error {}

/**
 * Incremental decoder: feed byte chunks, get back complete frames. Payloads
 * that are not valid JSON objects come out as { error } so the server can
 * answer them without losing stream alignment.
 */
export class FrameDecoder {
  private buf: Buffer = Buffer.alloc(0);
  private want = -1;

  push(chunk: Buffer): DecodedFrame[] {
    this.buf = this.buf.length === 0 ? chunk : Buffer.concat([this.buf, chunk]);
    const frames: DecodedFrame[] = [];
    for (;;) {
      if (this.want < 0) {
        if (this.buf.length < 4) break;
        this.want = this.buf.readUInt32LE(0);
        this.buf = this.buf.subarray(4);
        if (this.want > MAX_FRAME_BYTES) {
          throw new FramingError(`declared frame length ${this.want} exceeds the cap`);
        }
      }
      if (this.buf.length < this.want) break;
      const payload = this.buf.subarray(0, this.want);
      this.buf = this.buf.subarray(this.want);
      this.want = -1;
      frames.push(decodePayload(payload));
    }
    return frames;
  }
}

function decodePayload(payload: Buffer): DecodedFrame {
  let parsed: unknown;
  try {
    parsed = JSON.parse(payload.toString("utf8"));
  } catch (err) {
    return { error: `payload is not valid JSON: ${(err as Error).message}` };
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    return { error: "payload must be a JSON object" };
  }
  return { obj: parsed as Record<string, unknown> };
}
