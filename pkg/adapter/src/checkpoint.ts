/**
 * Framework checkpoint container, safetensors-style.
 *
 * Layout, from byte 0:
 *
 *   [8 bytes: uint64 LE length of the header JSON]
 *   [N bytes: header JSON (UTF-8)]
 *   [remaining: raw tensor data]
 *
 * The header maps tensor name to {"dtype": "F32", "shape": [...],
 * "data_offsets": [begin, end]} with byte offsets relative to the data
 * region, plus an optional "__metadata__" object of string values. Reading
 * accepts any dtype the size table knows; only F32 tensors are decoded.
 * Writing is canonical (sorted names, contiguous offsets), so identical
 * tensors always serialize to identical bytes.
 */

import { asciiJsonString, elementCount, type Tensor } from "./container.js";

export const DTYPE_SIZES: Record<string, number> = {
  F64: 8, F32: 4, F16: 2, BF16: 2,
  I64: 8, I32: 4, I16: 2, I8: 1, U8: 1, BOOL: 1,
};

export class CheckpointError extends Error {}

/** One header entry as stored on disk; data is decoded only for F32. */
export interface CheckpointEntry {
  dtype: string;
  shape: number[];
  data: Float32Array | null;
}

export interface Checkpoint {
  entries: Map<string, CheckpointEntry>;
  metadata: Record<string, string> | null;
}

/** Checkpoint with every tensor decoded (all-F32), as a plain tensor map. */
export function checkpointTensors(ckpt: Checkpoint): Map<string, Tensor> {
  const tensors = new Map<string, Tensor>();
  for (const [name, entry] of ckpt.entries) {
    if (entry.data === null) {
      throw new CheckpointError(
        `tensor ${JSON.stringify(name)} has non-float dtype ${JSON.stringify(entry.dtype)}`,
      );
    }
    tensors.set(name, { shape: entry.shape.slice(), data: entry.data });
  }
  return tensors;
}

/** Serialize an all-F32 tensor map to canonical checkpoint bytes. */
export function writeCheckpoint(
  tensors: Map<string, Tensor>,
  metadata: Record<string, string> | null = null,
): Buffer {
  const names = Array.from(tensors.keys()).sort();
  const records: string[] = [];
  const chunks: Buffer[] = [];
  let offset = 0;
  if (metadata !== null) {
    const pairs = Object.keys(metadata)
      .sort()
      .map((k) => `${asciiJsonString(k)}:${asciiJsonString(metadata[k])}`);
    records.push(`"__metadata__":{${pairs.join(",")}}`);
  }
  for (const name of names) {
    if (name === "__metadata__") {
      throw new CheckpointError('"__metadata__" is reserved for the metadata block');
    }
    const tensor = tensors.get(name)!;
    if (tensor.data.length !== elementCount(tensor.shape)) {
      throw new CheckpointError(
        `tensor ${JSON.stringify(name)} holds ${tensor.data.length} values for shape [${tensor.shape.join(", ")}]`,
      );
    }
    const nbytes = tensor.data.length * 4;
    records.push(
      `${asciiJsonString(name)}:{"data_offsets":[${offset},${offset + nbytes}],` +
        `"dtype":"F32","shape":[${tensor.shape.join(",")}]}`,
    );
    chunks.push(Buffer.from(tensor.data.buffer, tensor.data.byteOffset, nbytes));
    offset += nbytes;
  }
  const blob = Buffer.from(`{${records.join(",")}}`, "utf-8");
  const head = Buffer.alloc(8);
  head.writeBigUInt64LE(BigInt(blob.length), 0);
  return Buffer.concat([head, blob, ...chunks]);
}

/** Parse checkpoint bytes, validating that tensors exactly tile the data region. */
export function readCheckpoint(data: Buffer): Checkpoint {
  if (data.length < 8) {
    throw new CheckpointError(
      `checkpoint truncated: ${data.length} bytes is below the minimum header`,
    );
  }
  const headerLen = Number(data.readBigUInt64LE(0));
  if (8 + headerLen > data.length) {
    throw new CheckpointError(`checkpoint truncated: header claims ${headerLen} bytes`);
  }
  let header: unknown;
  try {
    header = JSON.parse(data.toString("utf-8", 8, 8 + headerLen));
  } catch (err) {
    throw new CheckpointError(`header is not valid JSON: ${err}`);
  }
  if (header === null || typeof header !== "object" || Array.isArray(header)) {
    throw new CheckpointError("header must be a JSON object");
  }

  const region = data.subarray(8 + headerLen);
  let metadata: Record<string, string> | null = null;
  const spans: Array<{ name: string; begin: number; end: number }> = [];
  const entries = new Map<string, CheckpointEntry>();

  for (const [name, rec] of Object.entries(header as Record<string, unknown>)) {
    if (name === "__metadata__") {
      if (rec === null || typeof rec !== "object" || Array.isArray(rec)) {
        throw new CheckpointError("__metadata__ must be an object of strings");
      }
      metadata = {};
      for (const [k, v] of Object.entries(rec as Record<string, unknown>)) {
        if (typeof v !== "string") {
          throw new CheckpointError("__metadata__ must be an object of strings");
        }
        metadata[k] = v;
      }
      continue;
    }
    if (rec === null || typeof rec !== "object" || Array.isArray(rec)) {
      throw new CheckpointError(`header entry for ${JSON.stringify(name)} must be an object`);
    }
    const { dtype, shape, data_offsets } = rec as {
      dtype?: unknown;
      shape?: unknown;
      data_offsets?: unknown;
    };
    if (typeof dtype !== "string" || !(dtype in DTYPE_SIZES)) {
      throw new CheckpointError(
        `unsupported dtype ${JSON.stringify(dtype)} for ${JSON.stringify(name)}`,
      );
    }
    if (!Array.isArray(shape) || shape.some((s) => !Number.isInteger(s) || s < 0)) {
      throw new CheckpointError(`bad shape ${JSON.stringify(shape)} for ${JSON.stringify(name)}`);
    }
    if (
      !Array.isArray(data_offsets) ||
      data_offsets.length !== 2 ||
      data_offsets.some((v) => !Number.isInteger(v) || v < 0)
    ) {
      throw new CheckpointError(
        `bad data_offsets ${JSON.stringify(data_offsets)} for ${JSON.stringify(name)}`,
      );
    }
    const [begin, end] = data_offsets as [number, number];
    const nbytes = elementCount(shape as number[]) * DTYPE_SIZES[dtype];
    if (end < begin || end - begin !== nbytes || end > region.length) {
      throw new CheckpointError(
        `data_offsets [${begin}, ${end}] for ${JSON.stringify(name)} do not match ` +
          `shape ${JSON.stringify(shape)} (${nbytes} bytes)`,
      );
    }
    let decoded: Float32Array | null = null;
    if (dtype === "F32") {
      const payload = new Uint8Array(nbytes);
      payload.set(region.subarray(begin, end));
      decoded = new Float32Array(payload.buffer);
    }
    entries.set(name, { dtype, shape: (shape as number[]).slice(), data: decoded });
    spans.push({ name, begin, end });
  }

  spans.sort((a, b) => a.begin - b.begin);
  let cursor = 0;
  for (const span of spans) {
    if (span.begin !== cursor) {
      throw new CheckpointError(
        `tensor data does not tile the data region: ${JSON.stringify(span.name)} ` +
          `starts at ${span.begin}, expected ${cursor}`,
      );
    }
    cursor = span.end;
  }
  if (cursor !== region.length) {
    throw new CheckpointError(
      `trailing bytes after data region: ${region.length - cursor} unused`,
    );
  }
  return { entries, metadata };
}
