import * as fs from "node:fs";
import * as path from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { readArchive, writeArchive, type Archive } from "../src/container.js";
import { freshDir, planner, randomTensor, removeDir, tensorBytes } from "./helpers.js";

const dirs: string[] = [];
afterAll(() => dirs.forEach(removeDir));

function sampleArchive(): Archive {
  return new Map([
    ["conv.weight", randomTensor([4, 2, 3, 3], 11, "conv.weight")],
    ["bias", randomTensor([4], 12, "bias")],
    ["a.very/long name", randomTensor([1, 2, 2, 1], 13, "long")],
  ]);
}

describe("container round trip", () => {
  it("preserves names, shapes, and exact bytes", () => {
    const archive = sampleArchive();
    const back = readArchive(writeArchive(archive));
    expect(Array.from(back.keys()).sort()).toEqual(Array.from(archive.keys()).sort());
    for (const [name, tensor] of archive) {
      const got = back.get(name)!;
      expect(got.shape).toEqual(tensor.shape);
      expect(tensorBytes(got).equals(tensorBytes(tensor))).toBe(true);
    }
  });

  it("serializes deterministically", () => {
    const a = writeArchive(sampleArchive());
    const b = writeArchive(sampleArchive());
    expect(a.equals(b)).toBe(true);
  });

  it("escapes non-ASCII tensor names and round-trips them", () => {
    const archive: Archive = new Map([["wéight", randomTensor([2], 1, "w")]]);
    const bytes = writeArchive(archive);
    expect(bytes.toString("utf-8")).toContain("w\\u00e9ight");
    expect(Array.from(readArchive(bytes).keys())).toEqual(["wéight"]);
  });

  it("re-serializes a planner-written archive byte-identically", () => {
    const dir = freshDir();
    dirs.push(dir);
    planner(
      ["scaffold", "--template", "toy-residual", "--seed", "5",
       "--out-net", "net.json", "--out-weights", "w.snf"],
      dir,
    );
    const original = fs.readFileSync(path.join(dir, "w.snf"));
    const rewritten = writeArchive(readArchive(original));
    expect(rewritten.equals(original)).toBe(true);
  });
});

describe("container validation", () => {
  function craft(index: string, data: Buffer): Buffer {
    const blob = Buffer.from(index, "utf-8");
    const head = Buffer.alloc(12);
    head.write("SNF1", 0, "ascii");
    head.writeBigUInt64LE(BigInt(blob.length), 4);
    return Buffer.concat([head, blob, data]);
  }

  const oneTensor = '{"t":{"dtype":"f32","nbytes":8,"offset":0,"shape":[2]}}';

  it("accepts a minimal crafted container", () => {
    const archive = readArchive(craft(oneTensor, Buffer.alloc(8)));
    expect(archive.get("t")!.shape).toEqual([2]);
  });

  it("rejects every malformed layout", () => {
    const data8 = Buffer.alloc(8);
    expect(() => readArchive(Buffer.from("SNF1"))).toThrow(/truncated/);
    expect(() => readArchive(craft(oneTensor, data8).fill(0x58, 0, 4))).toThrow(/bad magic/);
    expect(() => readArchive(craft(oneTensor, Buffer.alloc(0)))).toThrow(/truncated/);
    expect(() => readArchive(craft(oneTensor, Buffer.alloc(12)))).toThrow(/trailing bytes/);
    expect(() => readArchive(craft('["t"]', data8))).toThrow(/must be a JSON object/);
    expect(() => readArchive(craft('{"t":{"dtype":"f64","nbytes":8,"offset":0,"shape":[2]}}', data8)))
      .toThrow(/unsupported dtype/);
    expect(() => readArchive(craft('{"t":{"dtype":"f32","nbytes":4,"offset":0,"shape":[2]}}', data8)))
      .toThrow(/does not match shape/);
    expect(() => readArchive(craft('{"t":{"dtype":"f32","nbytes":8,"offset":4,"shape":[2]}}', data8)))
      .toThrow(/not contiguous/);
    expect(() => readArchive(craft('{"t":{"dtype":"f32","offset":0,"shape":[2]}}', data8)))
      .toThrow(/missing "nbytes"/);
    expect(() => readArchive(craft('{"t":{"dtype":"f32","nbytes":8,"offset":0,"shape":[0]}}', data8)))
      .toThrow(/bad shape/);
    expect(() => readArchive(craft('{"":{"dtype":"f32","nbytes":8,"offset":0,"shape":[2]}}', data8)))
      .toThrow(/non-empty string/);
    expect(() => readArchive(craft("{not json", data8))).toThrow(/not valid JSON/);
  });

  it("rejects tensors whose data does not fill the shape", () => {
    const archive: Archive = new Map([["t", { shape: [3], data: new Float32Array(2) }]]);
    expect(() => writeArchive(archive)).toThrow(/holds 2 values/);
  });
});
