/**
 * Flat binary container for named float32 tensors ("SNF1").
 *
 * Layout, from byte 0:
 *
 *   [4 bytes: magic "SNF1"]
 *   [8 bytes: uint64 LE length of the index blob]
 *   [N bytes: UTF-8 JSON index, sorted keys, no insignificant whitespace]
 *   [remaining: raw tensor data in sorted-name order, contiguous, no padding]
 *
 * The index maps tensor name to {"dtype": "f32", "shape": [...],
 * "offset": n, "nbytes": n} with offsets relative to the data region.
 * Writing is canonical: the same tensors always produce the same bytes,
 * byte-compatible with the planner's own writer.
 */

export interface Tensor {
  shape: number[];
  data: Float32Array;
}

export type Archive = Map<string, Tensor>;

export const SNF_MAGIC = "SNF1";

export class ContainerError extends Error {}

function requireLittleEndian(): void {
  if (new Uint8Array(new Uint32Array([1]).buffer)[0] !== 1) {
    throw new ContainerError("tensor containers require a little-endian platform");
  }
}

/** Serialize a string as JSON with every non-ASCII character \u-escaped. */
export function asciiJsonString(value: string): string {
  return JSON.stringify(value).replace(
    /[-￿]/g,
    (ch) => "\\u" + ch.charCodeAt(0).toString(16).padStart(4, "0"),
  );
}

export function elementCount(shape: number[]): number {
  let count = 1;
  for (const s of shape) count *= s;
  return count;
}

function checkTensor(name: string, tensor: Tensor): void {
  if (!name) {
    throw new ContainerError("tensor name must be a non-empty string");
  }
  if (
    tensor.shape.length === 0 ||
    tensor.shape.some((s) => !Number.isInteger(s) || s < 1)
  ) {
    throw new ContainerError(
      `tensor ${JSON.stringify(name)} must have a non-empty shape with every dimension >= 1`,
    );
  }
  if (tensor.data.length !== elementCount(tensor.shape)) {
    throw new ContainerError(
      `tensor ${JSON.stringify(name)} holds ${tensor.data.length} values for shape [${tensor.shape.join(", ")}]`,
    );
  }
}

/** Serialize an archive to canonical container bytes. */
export function writeArchive(archive: Archive): Buffer {
  requireLittleEndian();
  const names = Array.from(archive.keys()).sort();
  const records: string[] = [];
  const chunks: Buffer[] = [];
  let offset = 0;
  for (const name of names) {
    const tensor = archive.get(name)!;
    checkTensor(name, tensor);
    const nbytes = tensor.data.length * 4;
    records.push(
      `${asciiJsonString(name)}:{"dtype":"f32","nbytes":${nbytes},` +
        `"offset":${offset},"shape":[${tensor.shape.join(",")}]}`,
    );
    chunks.push(Buffer.from(tensor.data.buffer, tensor.data.byteOffset, nbytes));
    offset += nbytes;
  }
  const blob = Buffer.from(`{${records.join(",")}}`, "utf-8");
  const head = Buffer.alloc(12);
  head.write(SNF_MAGIC, 0, "ascii");
  head.writeBigUInt64LE(BigInt(blob.length), 4);
  return Buffer.concat([head, blob, ...chunks]);
}

interface IndexRecord {
  dtype: unknown;
  shape: unknown;
  offset: unknown;
  nbytes: unknown;
}

/** Parse container bytes into an archive, validating the full layout. */
export function readArchive(data: Buffer): Archive {
  requireLittleEndian();
  if (data.length < 12) {
    throw new ContainerError(
      `container truncated: ${data.length} bytes is below the minimum header`,
    );
  }
  if (data.toString("ascii", 0, 4) !== SNF_MAGIC) {
    throw new ContainerError(`bad magic ${JSON.stringify(data.toString("latin1", 0, 4))}`);
  }
  const indexLen = Number(data.readBigUInt64LE(4));
  if (12 + indexLen > data.length) {
    throw new ContainerError(`container truncated: index claims ${indexLen} bytes`);
  }
  let index: unknown;
  try {
    index = JSON.parse(data.toString("utf-8", 12, 12 + indexLen));
  } catch (err) {
    throw new ContainerError(`index is not valid JSON: ${err}`);
  }
  if (index === null || typeof index !== "object" || Array.isArray(index)) {
    throw new ContainerError("index must be a JSON object");
  }

  const region = data.subarray(12 + indexLen);
  const archive: Archive = new Map();
  let expectedOffset = 0;
  for (const name of Object.keys(index).sort()) {
    if (!name) {
      throw new ContainerError("tensor name must be a non-empty string");
    }
    const rec = (index as Record<string, unknown>)[name];
    if (rec === null || typeof rec !== "object" || Array.isArray(rec)) {
      throw new ContainerError(`index record for ${JSON.stringify(name)} must be an object`);
    }
    const { dtype, shape, offset, nbytes } = rec as IndexRecord;
    for (const [field, value] of [["dtype", dtype], ["shape", shape], ["offset", offset], ["nbytes", nbytes]] as const) {
      if (value === undefined) {
        throw new ContainerError(`index record for ${JSON.stringify(name)} missing ${JSON.stringify(field)}`);
      }
    }
    if (dtype !== "f32") {
      throw new ContainerError(
        `unsupported dtype ${JSON.stringify(dtype)} for ${JSON.stringify(name)}`,
      );
    }
    if (
      !Array.isArray(shape) ||
      shape.length === 0 ||
      shape.some((s) => !Number.isInteger(s) || s < 1)
    ) {
      throw new ContainerError(
        `bad shape ${JSON.stringify(shape)} for ${JSON.stringify(name)}`,
      );
    }
    const count = elementCount(shape as number[]);
    if (nbytes !== count * 4) {
      throw new ContainerError(
        `nbytes ${JSON.stringify(nbytes)} for ${JSON.stringify(name)} does not match shape ${JSON.stringify(shape)}`,
      );
    }
    if (offset !== expectedOffset) {
      throw new ContainerError(
        `offset ${JSON.stringify(offset)} for ${JSON.stringify(name)} is not contiguous (expected ${expectedOffset})`,
      );
    }
    const end = expectedOffset + (nbytes as number);
    if (end > region.length) {
      throw new ContainerError(
        `data region truncated: ${JSON.stringify(name)} needs bytes up to ${end}`,
      );
    }
    const payload = new Uint8Array(nbytes as number);
    payload.set(region.subarray(expectedOffset, end));
    archive.set(name, {
      shape: (shape as number[]).slice(),
      data: new Float32Array(payload.buffer),
    });
    expectedOffset = end;
  }
  if (expectedOffset !== region.length) {
    throw new ContainerError(
      `trailing bytes after data region: ${region.length - expectedOffset} unused`,
    );
  }
  return archive;
}
