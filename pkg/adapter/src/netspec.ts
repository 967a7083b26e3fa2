/**
 * Network description documents, as consumed and produced by the planner.
 *
 * A network is a topologically ordered list of layers over one input tensor
 * named "input"; see the planner's README for the full field reference. The
 * adapter needs to read these documents (including pruned ones), write the
 * ones it generates, and reproduce the planner's multiply-accumulate
 * arithmetic so externally built plans carry consistent FLOPs fields.
 */

export const INPUT_NAME = "input";
export const LAYER_KINDS = ["conv2d", "batchnorm", "linear", "relu", "add"] as const;
export type LayerKind = (typeof LAYER_KINDS)[number];

export interface LayerSpec {
  name: string;
  kind: LayerKind;
  in_channels: number;
  out_channels: number;
  kernel_hw: [number, number] | null;
  stride_hw: [number, number] | null;
  padding_hw: [number, number] | null;
  prunable: boolean;
  coupling_group: string | null;
  bindings: Record<string, string>;
  inputs: string[];
}

export interface NetworkSpec {
  input_shape: [number, number, number];
  layers: LayerSpec[];
  output: string;
}

export class NetworkError extends Error {}

export function convOutSize(size: number, kernel: number, stride: number, padding: number): number {
  return Math.floor((size + 2 * padding - kernel) / stride) + 1;
}

function intPair(value: unknown, field: string, layer: string): [number, number] | null {
  if (value === null || value === undefined) return null;
  if (!Array.isArray(value) || value.length !== 2 || value.some((v) => !Number.isInteger(v))) {
    throw new NetworkError(`layer ${JSON.stringify(layer)}: ${field} must be a two-integer list`);
  }
  return [value[0], value[1]];
}

export function networkFromJson(text: string): NetworkSpec {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    throw new NetworkError(`network document is not valid JSON: ${err}`);
  }
  if (obj === null || typeof obj !== "object" || Array.isArray(obj)) {
    throw new NetworkError("network document must be an object");
  }
  const doc = obj as Record<string, unknown>;
  for (const req of ["input_shape", "layers", "output"]) {
    if (!(req in doc)) throw new NetworkError(`network document missing ${JSON.stringify(req)}`);
  }
  const shape = doc.input_shape;
  if (!Array.isArray(shape) || shape.length !== 3 || shape.some((v) => !Number.isInteger(v) || v < 1)) {
    throw new NetworkError("input_shape must be a three-element list of positive integers");
  }
  if (!Array.isArray(doc.layers)) throw new NetworkError("layers must be a list");
  const layers = (doc.layers as unknown[]).map((entry) => {
    if (entry === null || typeof entry !== "object" || Array.isArray(entry)) {
      throw new NetworkError("each layer must be an object");
    }
    const rec = entry as Record<string, unknown>;
    for (const req of ["name", "kind", "in_channels", "out_channels", "inputs"]) {
      if (!(req in rec)) throw new NetworkError(`layer missing required field ${JSON.stringify(req)}`);
    }
    const name = rec.name;
    if (typeof name !== "string" || !name) throw new NetworkError("layer names must be non-empty strings");
    const kind = rec.kind;
    if (typeof kind !== "string" || !(LAYER_KINDS as readonly string[]).includes(kind)) {
      throw new NetworkError(`layer ${JSON.stringify(name)}: unknown kind ${JSON.stringify(kind)}`);
    }
    const inputs = rec.inputs;
    if (!Array.isArray(inputs) || inputs.length === 0 || inputs.some((v) => typeof v !== "string")) {
      throw new NetworkError(`layer ${JSON.stringify(name)}: inputs must be a list of layer names`);
    }
    const bindings = rec.bindings ?? {};
    if (bindings === null || typeof bindings !== "object" || Array.isArray(bindings)) {
      throw new NetworkError(`layer ${JSON.stringify(name)}: bindings must be an object`);
    }
    for (const [each, value] of [["in_channels", rec.in_channels], ["out_channels", rec.out_channels]] as const) {
      if (!Number.isInteger(value) || (value as number) < 1) {
        throw new NetworkError(`layer ${JSON.stringify(name)}: ${each} must be a positive integer`);
      }
    }
    return {
      name,
      kind: kind as LayerKind,
      in_channels: rec.in_channels as number,
      out_channels: rec.out_channels as number,
      kernel_hw: intPair(rec.kernel_hw, "kernel_hw", name),
      stride_hw: intPair(rec.stride_hw, "stride_hw", name),
      padding_hw: intPair(rec.padding_hw, "padding_hw", name),
      prunable: Boolean(rec.prunable ?? false),
      coupling_group: (rec.coupling_group as string | null | undefined) ?? null,
      bindings: { ...(bindings as Record<string, string>) },
      inputs: (inputs as string[]).slice(),
    } satisfies LayerSpec;
  });
  return {
    input_shape: [shape[0], shape[1], shape[2]],
    layers,
    output: String(doc.output),
  };
}

/** Recursively sort object keys so serialization is deterministic. */
function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeysDeep);
  if (value !== null && typeof value === "object") {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value as Record<string, unknown>).sort()) {
      out[key] = sortKeysDeep((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

export function stableJson(value: unknown): string {
  return JSON.stringify(sortKeysDeep(value), null, 2) + "\n";
}

export function networkToJson(net: NetworkSpec): string {
  return stableJson({
    input_shape: net.input_shape,
    layers: net.layers.map((spec) => ({
      name: spec.name,
      kind: spec.kind,
      in_channels: spec.in_channels,
      out_channels: spec.out_channels,
      kernel_hw: spec.kernel_hw,
      stride_hw: spec.stride_hw,
      padding_hw: spec.padding_hw,
      prunable: spec.prunable,
      coupling_group: spec.coupling_group,
      bindings: spec.bindings,
      inputs: spec.inputs,
    })),
    output: net.output,
  });
}

export interface LayerShape {
  channels: number;
  height: number | null;
  width: number | null;
}

/** Output shape of every layer, walking from the network input. */
export function layerShapes(net: NetworkSpec): Map<string, LayerShape> {
  const [c0, h0, w0] = net.input_shape;
  const shapes = new Map<string, LayerShape>([[INPUT_NAME, { channels: c0, height: h0, width: w0 }]]);
  for (const spec of net.layers) {
    for (const ref of spec.inputs) {
      if (!shapes.has(ref)) {
        throw new NetworkError(
          `layer ${JSON.stringify(spec.name)}: input ${JSON.stringify(ref)} is not the network input or an earlier layer`,
        );
      }
    }
    const src = shapes.get(spec.inputs[0])!;
    let out: LayerShape;
    if (spec.kind === "conv2d") {
      if (src.height === null || src.width === null) {
        throw new NetworkError(`layer ${JSON.stringify(spec.name)}: conv2d needs a spatial input`);
      }
      const [kh, kw] = spec.kernel_hw ?? [1, 1];
      const [sy, sx] = spec.stride_hw ?? [1, 1];
      const [py, px] = spec.padding_hw ?? [0, 0];
      out = {
        channels: spec.out_channels,
        height: convOutSize(src.height, kh, sy, py),
        width: convOutSize(src.width, kw, sx, px),
      };
    } else if (spec.kind === "linear") {
      out = { channels: spec.out_channels, height: null, width: null };
    } else {
      out = { channels: src.channels, height: src.height, width: src.width };
    }
    shapes.set(spec.name, out);
  }
  return shapes;
}

/**
 * Total multiply-accumulate count, mirroring the planner's arithmetic:
 * conv2d counts out_h * out_w * eff_out * eff_in * kh * kw, linear counts
 * eff_in * out, everything else is free; effective channel counts propagate
 * from overridden producers downstream.
 */
export function flopsTotal(net: NetworkSpec, channelOverride?: Map<string, number>): number {
  const shapes = layerShapes(net);
  const effOut = new Map<string, number>([[INPUT_NAME, net.input_shape[0]]]);
  let total = 0;
  for (const spec of net.layers) {
    const effIn = effOut.get(spec.inputs[0])!;
    let eff: number;
    if (spec.kind === "conv2d") {
      eff = channelOverride?.get(spec.name) ?? spec.out_channels;
      if (!Number.isInteger(eff) || eff < 1 || eff > spec.out_channels) {
        throw new NetworkError(
          `channel override for ${JSON.stringify(spec.name)} must be in [1, ${spec.out_channels}]`,
        );
      }
      const out = shapes.get(spec.name)!;
      const [kh, kw] = spec.kernel_hw ?? [1, 1];
      total += out.height! * out.width! * eff * effIn * kh * kw;
    } else if (spec.kind === "linear") {
      eff = spec.out_channels;
      total += effIn * eff;
    } else if (spec.kind === "add") {
      const widths = new Set(spec.inputs.map((ref) => effOut.get(ref)!));
      if (widths.size !== 1) {
        throw new NetworkError(
          `layer ${JSON.stringify(spec.name)}: add inputs carry unequal effective channels`,
        );
      }
      eff = widths.values().next().value as number;
    } else {
      eff = effIn;
    }
    effOut.set(spec.name, eff);
  }
  return total;
}
