#!/usr/bin/env node
/** mitm-frac-adapter --host H --port N
 *
 * Connects to a running broker, registers the fracsys system, and serves
 * until the connection drops. Exits nonzero on connection failure.
 */

import { Adapter } from "./adapter.js";

function parseArgs(argv: string[]): { host: string; port: number } {
  let host = "127.0.0.1";
  let port = Number(process.env.MITM_PORT ?? NaN);
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--host") host = argv[++i];
    else if (arg === "--port") port = Number(argv[++i]);
    else if (arg === "--help" || arg === "-h") {
      console.log("usage: mitm-frac-adapter --host HOST --port PORT");
      process.exit(0);
    } else {
      console.error(`unknown argument: ${arg}`);
      process.exit(2);
    }
  }
  if (!Number.isInteger(port) || port <= 0) {
    console.error("a broker --port is required (or MITM_PORT)");
    process.exit(2);
  }
  return { host, port };
}

const { host, port } = parseArgs(process.argv.slice(2));
const adapter = new Adapter({ host, port, log: (line) => console.error(line) });
adapter.run().catch((exc) => {
  console.error(`adapter failed: ${exc instanceof Error ? exc.message : exc}`);
  process.exit(1);
});
