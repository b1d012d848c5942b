/** The fracsys provider: registers over one TCP connection and answers the
 * broker's forwarded call/fetch/release requests for exact rationals.
 *
 * Wire shape: one JSON object per line. Requests carry "kind"; responses
 * carry "ok" or "err" and echo the request id.
 */

import * as net from "node:net";
import * as readline from "node:readline";
import {
  Rational, ZeroDenominator, add, decodeRational, encodeRational,
  rational, rationalFromExpr,
} from "./rational.js";

export const SYSTEM_ID = "fracsys";
export const INTERFACE_THEORY = "fraclike";
export const RATIONAL_SORT = "mitm:field?rational";
export const RATIONAL_CODEC = "rational-as-tuple-of-int";

type WireMessage = Record<string, any>;

export interface AdapterOptions {
  host: string;
  port: number;
  system?: string;
  theory?: string;
  log?: (line: string) => void;
}

export class Adapter {
  private socket: net.Socket | null = null;
  private objects = new Map<string, Rational>();
  private counter = 0;
  private helloId = 0;
  readonly system: string;
  readonly theory: string;
  private log: (line: string) => void;

  constructor(private options: AdapterOptions) {
    this.system = options.system ?? SYSTEM_ID;
    this.theory = options.theory ?? INTERFACE_THEORY;
    this.log = options.log ?? (() => {});
  }

  /** Connect, register, and serve until the connection closes. */
  async run(): Promise<void> {
    const socket = await this.connect();
    this.send({ id: 0, kind: "hello", system: this.system, theory: this.theory });
    const lines = readline.createInterface({ input: socket });
    for await (const line of lines) {
      if (!line.trim()) continue;
      let msg: WireMessage;
      try {
        msg = JSON.parse(line);
      } catch {
        continue; // not addressed to us; the broker validates its own input
      }
      if (msg.kind === undefined) {
        // response to our hello; nothing else is ever requested by us
        if (msg.err) throw new Error(`registration failed: ${JSON.stringify(msg.err)}`);
        this.log(`registered as ${this.system} (${this.theory})`);
        continue;
      }
      this.send(this.handle(msg));
    }
  }

  private connect(): Promise<net.Socket> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection(
        { host: this.options.host, port: this.options.port },
        () => resolve(socket),
      );
      socket.on("error", reject);
      this.socket = socket;
    });
  }

  private send(msg: WireMessage): void {
    this.socket?.write(JSON.stringify(msg) + "\n");
  }

  close(): void {
    this.socket?.end();
  }

  /** One forwarded request in, one response out. Exported for direct tests. */
  handle(msg: WireMessage): WireMessage {
    const id = msg.id ?? null;
    try {
      switch (msg.kind) {
        case "call":
          return { id, ok: this.call(msg.symbol, msg.args ?? []) };
        case "fetch":
          return { id, ok: { data: this.fetch(msg.handle, msg.codec) } };
        case "release":
          this.release(msg.handle);
          return { id, ok: {} };
        default:
          return { id, err: { code: "unknown-kind", msg: `unhandled kind ${JSON.stringify(msg.kind)}` } };
      }
    } catch (exc) {
      if (exc instanceof WireFault) return { id, err: { code: exc.code, msg: exc.message } };
      const msgText = exc instanceof Error ? exc.message : String(exc);
      return { id, err: { code: "system-fault", msg: msgText } };
    }
  }

  private call(symbol: string, args: WireMessage[]): WireMessage {
    if (symbol === "mkfrac") {
      const [num, den] = args.map((a) => this.argRational(a));
      if (den.num === 0n) throw new WireFault("system-fault", "zero denominator");
      // mkfrac(a, b) of integer-valued rationals is a/b
      return this.wrap(rational(num.num * den.den, den.num * num.den));
    }
    if (symbol === "plus") {
      const [a, b] = args.map((x) => this.argRational(x));
      return this.wrap(add(a, b));
    }
    throw new WireFault("unknown-symbol", `no operation ${JSON.stringify(symbol)}`);
  }

  private argRational(arg: WireMessage): Rational {
    if (arg && typeof arg.handle === "string") {
      const r = this.objects.get(arg.handle);
      if (!r) throw new WireFault("stale-handle", `unknown object ${arg.handle}`);
      return r;
    }
    if (arg && arg.expr !== undefined) {
      try {
        return rationalFromExpr(arg.expr);
      } catch (exc) {
        throw new WireFault("system-fault", (exc as Error).message);
      }
    }
    throw new WireFault("system-fault", `argument needs expr or handle: ${JSON.stringify(arg)}`);
  }

  private wrap(r: Rational): WireMessage {
    const token = `frac-${++this.counter}`;
    this.objects.set(token, r);
    return { handle: { token, system: this.system, type: RATIONAL_SORT } };
  }

  private fetch(token: string, codec: string): [number, number] {
    const r = this.objects.get(token);
    if (!r) throw new WireFault("stale-handle", `unknown object ${token}`);
    if (codec !== RATIONAL_CODEC)
      throw new WireFault("codec-mismatch", `rationals only encode as ${RATIONAL_CODEC}`);
    return encodeRational(r);
  }

  private release(token: string): void {
    if (!this.objects.delete(token))
      throw new WireFault("stale-handle", `unknown object ${token}`);
  }

  get liveCount(): number {
    return this.objects.size;
  }
}

export class WireFault extends Error {
  constructor(readonly code: string, message: string) {
    super(message);
  }
}

export { Rational, ZeroDenominator, add, decodeRational, encodeRational, rational };
