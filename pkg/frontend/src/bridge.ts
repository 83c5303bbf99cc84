/**
 * JSON-lines subprocess bridge to the solver core.
 *
 * Spawns the core's bridge module and serializes one request at a time;
 * doubles cross the boundary as JSON numbers, which round-trip exactly.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface, type Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

export interface BridgeOptions {
  /** Python interpreter to launch (default: python3). */
  python?: string;
  /** Extra environment entries for the child process. */
  env?: Record<string, string>;
}

export class BridgeError extends Error {
  readonly expects?: string[];

  constructor(message: string, expects?: string[]) {
    super(message);
    this.name = "BridgeError";
    this.expects = expects;
  }
}

export class Bridge {
  private proc: ChildProcessByStdio<Writable, Readable, null>;
  private lines: Interface;
  private queue: Promise<unknown> = Promise.resolve();
  private closed = false;

  constructor(options: BridgeOptions = {}) {
    const python = options.python ?? process.env.TRKRYLOV_PYTHON ?? "python3";
    this.proc = spawn(python, ["-m", "trkrylov.rcbridge"], {
      stdio: ["pipe", "pipe", "inherit"],
      env: { ...process.env, ...options.env },
    });
    this.lines = createInterface({ input: this.proc.stdout });
  }

  /** Send one request object; resolves with the parsed response. */
  request<T = Record<string, unknown>>(req: object): Promise<T> {
    if (this.closed) {
      return Promise.reject(new BridgeError("bridge is closed"));
    }
    const exchange = this.queue.then(
      () =>
        new Promise<T>((resolve, reject) => {
          const onLine = (line: string) => {
            cleanup();
            let parsed: Record<string, unknown>;
            try {
              parsed = JSON.parse(line);
            } catch (err) {
              reject(new BridgeError(`unparseable response: ${line}`));
              return;
            }
            if (typeof parsed.error === "string") {
              reject(
                new BridgeError(parsed.error, parsed.expects as string[] | undefined),
              );
              return;
            }
            resolve(parsed as T);
          };
          const onClose = () => {
            cleanup();
            reject(new BridgeError("bridge process ended unexpectedly"));
          };
          const cleanup = () => {
            this.lines.off("line", onLine);
            this.lines.off("close", onClose);
          };
          this.lines.once("line", onLine);
          this.lines.once("close", onClose);
          this.proc.stdin.write(JSON.stringify(req) + "\n");
        }),
    );
    // Keep the queue alive across rejected exchanges.
    this.queue = exchange.catch(() => undefined);
    return exchange;
  }

  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    try {
      this.proc.stdin.write(JSON.stringify({ op: "exit" }) + "\n");
    } catch {
      // already gone
    }
    this.proc.stdin.end();
    await new Promise<void>((resolve) => {
      this.proc.once("exit", () => resolve());
      setTimeout(() => {
        this.proc.kill();
        resolve();
      }, 2000).unref();
    });
  }
}
