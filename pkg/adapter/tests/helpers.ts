import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { writeArchive, type Archive, type Tensor } from "../src/container.js";
import { tensorStream } from "../src/rng.js";

/** Temporary directory the caller is responsible for removing. */
export function freshDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "snf-adapter-"));
}

export function removeDir(dir: string): void {
  fs.rmSync(dir, { recursive: true, force: true });
}

/** Run the planner CLI, failing loudly with its stderr on a bad exit. */
export function planner(args: string[], cwd: string): string {
  try {
    return execFileSync("snfprune", args, { cwd, encoding: "utf-8" });
  } catch (err) {
    const e = err as { status?: number; stderr?: string };
    throw new Error(
      `snfprune ${args.join(" ")} exited ${e.status}: ${e.stderr ?? ""}`,
    );
  }
}

/** Deterministic random tensor with values in (-1, 1). */
export function randomTensor(shape: number[], seed: number, name = "tensor"): Tensor {
  const next = tensorStream(seed, name);
  const data = new Float32Array(shape.reduce((a, v) => a * v, 1));
  for (let i = 0; i < data.length; i++) data[i] = next() * 2 - 1;
  return { shape: shape.slice(), data };
}

/** Write an archive holding a single tensor named "input" for `eval`. */
export function writeInputArchive(file: string, shape: number[], seed: number): Tensor {
  const tensor = randomTensor(shape, seed, "input");
  const archive: Archive = new Map([["input", tensor]]);
  fs.writeFileSync(file, writeArchive(archive));
  return tensor;
}

export function maxAbsDiff(a: ArrayLike<number>, b: ArrayLike<number>): number {
  if (a.length !== b.length) {
    throw new Error(`length mismatch: ${a.length} vs ${b.length}`);
  }
  let worst = 0;
  for (let i = 0; i < a.length; i++) {
    worst = Math.max(worst, Math.abs(a[i] - b[i]));
  }
  return worst;
}

export function tensorBytes(tensor: Tensor): Buffer {
  return Buffer.from(tensor.data.buffer, tensor.data.byteOffset, tensor.data.length * 4);
}
