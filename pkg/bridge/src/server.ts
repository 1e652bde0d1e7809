/**
 * Completion server over stdio or TCP. One connection, one in-flight request;
 * every complete frame gets exactly one reply frame. Malformed payloads are
 * answered with { error } and the stream stays aligned; a broken length
 * prefix cannot be resynced, so it ends that connection (stdio: the process).
 */

import * as net from "net";

import { Model, Points } from "./models";
import { encodeFrame, FrameDecoder, FramingError } from "./wire";

function log(msg: string): void {
  process.stderr.write(`[bridge] ${msg}\n`);
}

function validPoint(p: unknown): p is number[] {
  return (
    Array.isArray(p) &&
    p.length === 3 &&
    p.every((x) => typeof x === "number" && Number.isFinite(x))
  );
}

/** One reply object per request object; never throws on bad input. */
export function handleRequest(model: Model, obj: Record<string, unknown>): Record<string, unknown> {
  if (obj.op !== "predict") {
    return { error: `unsupported op ${JSON.stringify(obj.op ?? null)}` };
  }
  const raw = obj.points;
  if (!Array.isArray(raw)) {
    return { error: "'points' must be a list" };
  }
  if (raw.length === 0) {
    return { error: "empty cloud" };
  }
  if (!raw.every(validPoint)) {
    return { error: "'points' must be n x 3 finite numbers" };
  }
  let completed: Points;
  try {
    completed = model(raw as Points);
  } catch (err) {
    return { error: `model failed: ${(err as Error).message}` };
  }
  return { points: completed };
}

interface FrameStream {
  write(data: Buffer): void;
  end(): void;
}

function makePump(model: Model, out: FrameStream): (chunk: Buffer) => void {
  const decoder = new FrameDecoder();
  return (chunk) => {
    let frames;
    try {
      frames = decoder.push(chunk);
    } catch (err) {
      if (err instanceof FramingError) {
        log(err.message);
        out.write(encodeFrame({ error: err.message }));
        out.end();
        return;
      }
      throw err;
    }
    for (const frame of frames) {
      const reply = frame.obj ? handleRequest(model, frame.obj) : { error: frame.error };
      out.write(encodeFrame(reply));
    }
  };
}

export function serveStdio(model: Model): void {
  const pump = makePump(model, {
    write: (data) => process.stdout.write(data),
    end: () => process.exit(1),
  });
  process.stdin.on("data", pump);
  process.stdin.on("end", () => process.exit(0));
}

export function serveTcp(model: Model, host: string, port: number): net.Server {
  const server = net.createServer((socket) => {
    const pump = makePump(model, {
      write: (data) => socket.write(data),
      end: () => socket.destroy(),
    });
    socket.on("data", pump);
    socket.on("error", (err) => {
      log(`connection error: ${err.message}`);
      socket.destroy();
    });
  });
  server.listen(port, host, () => {
    const addr = server.address() as net.AddressInfo;
    log(`listening on ${addr.address}:${addr.port}`);
  });
  return server;
}
