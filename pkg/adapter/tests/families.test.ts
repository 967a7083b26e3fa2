import { describe, expect, it } from "vitest";

import { writeCheckpoint } from "../src/checkpoint.js";
import { buildFamily, initCheckpoint, MODEL_FAMILIES } from "../src/families.js";
import { flopsTotal, layerShapes, networkFromJson, networkToJson } from "../src/netspec.js";

// name -> [conv layers, prunable convs, parameter tensors]
const EXPECTED_COUNTS: Record<string, [number, number, number]> = {
  resnet56: [57, 27, 287],
  resnet110: [111, 54, 557],
  resnet50: [53, 32, 267],
};

describe("family tables", () => {
  it.each(MODEL_FAMILIES)("%s has the expected layer and parameter counts", (family) => {
    const model = buildFamily(family);
    const convs = model.net.layers.filter((l) => l.kind === "conv2d");
    const prunable = convs.filter((l) => l.prunable);
    const [wantConvs, wantPrunable, wantParams] = EXPECTED_COUNTS[family];
    expect(convs.length).toBe(wantConvs);
    expect(prunable.length).toBe(wantPrunable);
    expect(model.params.size).toBe(wantParams);
    expect(model.net.output).toBe("fc");
    expect(model.net.input_shape).toEqual(model.inputShape);
    // Only convs that stay inside a block are prunable.
    for (const layer of prunable) {
      expect(layer.name).toMatch(/^layer\d+\.\d+\.conv[12]$/);
    }
  });

  it("maps framework names to archive names bijectively", () => {
    for (const family of MODEL_FAMILIES) {
      const model = buildFamily(family);
      const archiveNames = new Set<string>();
      for (const info of model.params.values()) archiveNames.add(info.archiveName);
      expect(archiveNames.size).toBe(model.params.size);
      // Batchnorm parameters are the renamed ones; everything else is 1:1.
      expect(model.params.get("bn1.weight")!.archiveName).toBe("bn1.scale");
      expect(model.params.get("bn1.running_mean")!.archiveName).toBe("bn1.mean");
      expect(model.params.get("bn1.running_var")!.archiveName).toBe("bn1.var");
      expect(model.params.get("conv1.weight")!.archiveName).toBe("conv1.weight");
      for (const spec of model.net.layers) {
        for (const bound of Object.values(spec.bindings)) {
          expect(archiveNames.has(bound)).toBe(true);
        }
      }
    }
  });

  it("gives the 32x32 families their classic widths and head", () => {
    const model = buildFamily("resnet56");
    expect(model.params.get("conv1.weight")!.shape).toEqual([16, 3, 3, 3]);
    expect(model.params.get("layer2.0.conv1.weight")!.shape).toEqual([32, 16, 3, 3]);
    expect(model.params.get("layer2.0.downsample.0.weight")!.shape).toEqual([32, 16, 1, 1]);
    expect(model.params.get("layer3.8.conv2.weight")!.shape).toEqual([64, 64, 3, 3]);
    expect(model.params.get("fc.weight")!.shape).toEqual([10, 64]);
    const shapes = layerShapes(model.net);
    expect(shapes.get("layer1.8.relu2")).toEqual({ channels: 16, height: 32, width: 32 });
    expect(shapes.get("layer3.8.relu2")).toEqual({ channels: 64, height: 8, width: 8 });
  });

  it("gives the bottleneck family its classic widths and strides", () => {
    const model = buildFamily("resnet50");
    expect(model.params.get("conv1.weight")!.shape).toEqual([64, 3, 7, 7]);
    expect(model.params.get("layer1.0.conv1.weight")!.shape).toEqual([64, 64, 1, 1]);
    expect(model.params.get("layer1.0.conv3.weight")!.shape).toEqual([256, 64, 1, 1]);
    expect(model.params.get("layer4.2.conv2.weight")!.shape).toEqual([512, 512, 3, 3]);
    expect(model.params.get("fc.weight")!.shape).toEqual([1000, 2048]);
    const shapes = layerShapes(model.net);
    // The stride-2 spatial conv at each stage entry halves the map; the
    // first one stands in for the usual post-stem max-pool.
    expect(shapes.get("relu1")).toEqual({ channels: 64, height: 112, width: 112 });
    expect(shapes.get("layer1.2.relu3")).toEqual({ channels: 256, height: 56, width: 56 });
    expect(shapes.get("layer4.2.relu3")).toEqual({ channels: 2048, height: 7, width: 7 });
  });

  it("computes the frozen multiply-accumulate total for resnet56", () => {
    // Stem 3*16*9*32*32 + stages (incl. projection shortcuts) + head 64*10,
    // cross-checked against the planner's own count for this graph.
    expect(flopsTotal(buildFamily("resnet56").net)).toBe(125_747_840);
  });

  it("emits network documents the parser accepts unchanged", () => {
    for (const family of MODEL_FAMILIES) {
      const net = buildFamily(family).net;
      expect(networkFromJson(networkToJson(net))).toEqual(net);
    }
  });

  it("rejects unknown families", () => {
    expect(() => buildFamily("resnet18")).toThrow(/unknown model family/);
  });
});

describe("checkpoint initialization", () => {
  it("is deterministic per (family, seed) and varies across seeds", () => {
    const a = writeCheckpoint(initCheckpoint("resnet56", 3));
    const b = writeCheckpoint(initCheckpoint("resnet56", 3));
    const c = writeCheckpoint(initCheckpoint("resnet56", 4));
    expect(a.equals(b)).toBe(true);
    expect(a.equals(c)).toBe(false);
  });

  it("keeps values in their designed ranges", () => {
    const model = buildFamily("resnet56");
    const tensors = initCheckpoint("resnet56", 0);
    expect(tensors.size).toBe(model.params.size);
    let outOfRange = 0;
    for (const [name, info] of model.params) {
      const { shape, data } = tensors.get(name)!;
      expect(shape).toEqual(info.shape);
      if (info.role === "bn_var" || info.role === "bn_scale") {
        for (const v of data) if (v < 0.5) outOfRange++;
      } else if (info.role === "conv_weight") {
        const bound = 1 / Math.sqrt(info.shape[1] * info.shape[2] * info.shape[3]);
        for (const v of data) if (Math.abs(v) > bound) outOfRange++;
      }
    }
    expect(outOfRange).toBe(0);
  });
});
