/**
 * CLI entry: pick a transport and a model, then serve until terminated.
 *
 *   node dist/main.js --stdio --model echo
 *   node dist/main.js --tcp 127.0.0.1 9100 --model mirror
 *   node dist/main.js --stdio --model plugin:./my_model.js
 */

import { makeModel } from "./models";
import { serveStdio, serveTcp } from "./server";

function usage(msg: string): never {
  process.stderr.write(`${msg}\nusage: main.js (--stdio | --tcp HOST PORT) [--model echo|mirror|plugin:PATH]\n`);
  process.exit(2);
}

export function main(argv: string[]): void {
  let transport: "stdio" | "tcp" | null = null;
  let host = "";
  let port = -1;
  let modelSpec = "echo";
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--stdio") {
      transport = "stdio";
    } else if (arg === "--tcp") {
      transport = "tcp";
      host = argv[++i];
      const rawPort = argv[++i];
      if (host === undefined || rawPort === undefined) usage("--tcp needs HOST PORT");
      port = Number(rawPort);
      // port 0 asks the OS for a free one (the chosen port is logged)
      if (!Number.isInteger(port) || port < 0 || port > 65535) usage(`bad port ${rawPort}`);
    } else if (arg === "--model") {
      const spec = argv[++i];
      if (spec === undefined) usage("--model needs a value");
      modelSpec = spec;
    } else {
      usage(`unknown argument ${arg}`);
    }
  }
  if (transport === null) usage("pick a transport: --stdio or --tcp HOST PORT");

  let model;
  try {
    model = makeModel(modelSpec);
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    process.exit(2);
  }

  if (transport === "stdio") {
    serveStdio(model);
  } else {
    serveTcp(model, host, port);
  }
}

if (require.main === module) {
  main(process.argv.slice(2));
}
