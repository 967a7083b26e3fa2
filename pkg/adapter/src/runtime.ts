/**
 * Forward evaluation of a network document over an archive, in float64.
 *
 * Matches the planner's reference semantics: conv2d is plain
 * cross-correlation with zero padding and optional bias; batchnorm applies
 * the inference form (x - mean) / sqrt(var + eps) * scale + shift with
 * eps = 1e-5; linear layers average spatial inputs per channel first.
 */

import type { Archive } from "./container.js";
import {
  convOutSize,
  INPUT_NAME,
  NetworkError,
  type LayerSpec,
  type NetworkSpec,
} from "./netspec.js";

export const BN_EPS = 1e-5;

interface Value {
  channels: number;
  height: number | null;
  width: number | null;
  data: Float64Array;
}

function bound(spec: LayerSpec, archive: Archive, role: string): Float32Array {
  const name = spec.bindings[role];
  if (name === undefined) {
    throw new NetworkError(
      `layer ${JSON.stringify(spec.name)} has no ${JSON.stringify(role)} binding`,
    );
  }
  const tensor = archive.get(name);
  if (tensor === undefined) {
    throw new NetworkError(`tensor ${JSON.stringify(name)} missing from archive`);
  }
  return tensor.data;
}

function conv2d(spec: LayerSpec, src: Value, weight: Float32Array, bias: Float32Array | null): Value {
  const [kh, kw] = spec.kernel_hw!;
  const [sy, sx] = spec.stride_hw!;
  const [py, px] = spec.padding_hw!;
  const inC = spec.in_channels;
  const outC = spec.out_channels;
  const ih = src.height!;
  const iw = src.width!;
  const oh = convOutSize(ih, kh, sy, py);
  const ow = convOutSize(iw, kw, sx, px);
  const out = new Float64Array(outC * oh * ow);
  const inPlane = ih * iw;
  const kPlane = kh * kw;
  for (let o = 0; o < outC; o++) {
    const wBase = o * inC * kPlane;
    const oBase = o * oh * ow;
    for (let y = 0; y < oh; y++) {
      const y0 = y * sy - py;
      for (let x = 0; x < ow; x++) {
        const x0 = x * sx - px;
        let acc = 0;
        for (let i = 0; i < inC; i++) {
          const sBase = i * inPlane;
          const wRow = wBase + i * kPlane;
          for (let ky = 0; ky < kh; ky++) {
            const yy = y0 + ky;
            if (yy < 0 || yy >= ih) continue;
            const sRow = sBase + yy * iw;
            const wCol = wRow + ky * kw;
            for (let kx = 0; kx < kw; kx++) {
              const xx = x0 + kx;
              if (xx < 0 || xx >= iw) continue;
              acc += weight[wCol + kx] * src.data[sRow + xx];
            }
          }
        }
        out[oBase + y * ow + x] = bias === null ? acc : acc + bias[o];
      }
    }
  }
  return { channels: outC, height: oh, width: ow, data: out };
}

function batchnorm(spec: LayerSpec, src: Value, archive: Archive): Value {
  const scale = bound(spec, archive, "scale");
  const shift = bound(spec, archive, "shift");
  const mean = bound(spec, archive, "mean");
  const variance = bound(spec, archive, "var");
  const out = new Float64Array(src.data.length);
  const plane = src.height === null ? 1 : src.height * src.width!;
  for (let c = 0; c < src.channels; c++) {
    const gain = scale[c] * (1 / Math.sqrt(variance[c] + BN_EPS));
    const base = c * plane;
    for (let i = 0; i < plane; i++) {
      out[base + i] = (src.data[base + i] - mean[c]) * gain + shift[c];
    }
  }
  return { ...src, data: out };
}

/** Collapse a spatial tensor to per-channel means; vectors pass through. */
function globalAveragePool(src: Value): Value {
  if (src.height === null) return src;
  const plane = src.height * src.width!;
  const out = new Float64Array(src.channels);
  for (let c = 0; c < src.channels; c++) {
    let acc = 0;
    const base = c * plane;
    for (let i = 0; i < plane; i++) acc += src.data[base + i];
    out[c] = acc / plane;
  }
  return { channels: src.channels, height: null, width: null, data: out };
}

export function forwardEval(
  net: NetworkSpec,
  archive: Archive,
  input: Float32Array | Float64Array,
): Float64Array {
  const [c0, h0, w0] = net.input_shape;
  if (input.length !== c0 * h0 * w0) {
    throw new NetworkError(
      `input holds ${input.length} values, expected ${c0}*${h0}*${w0}`,
    );
  }
  const values = new Map<string, Value>([
    [INPUT_NAME, { channels: c0, height: h0, width: w0, data: Float64Array.from(input) }],
  ]);
  for (const spec of net.layers) {
    const src = values.get(spec.inputs[0]);
    if (src === undefined) {
      throw new NetworkError(
        `layer ${JSON.stringify(spec.name)}: input ${JSON.stringify(spec.inputs[0])} is not the network input or an earlier layer`,
      );
    }
    let out: Value;
    if (spec.kind === "conv2d") {
      const weight = bound(spec, archive, "weight");
      const bias = spec.bindings.bias !== undefined ? bound(spec, archive, "bias") : null;
      out = conv2d(spec, src, weight, bias);
    } else if (spec.kind === "batchnorm") {
      out = batchnorm(spec, src, archive);
    } else if (spec.kind === "relu") {
      const data = new Float64Array(src.data.length);
      for (let i = 0; i < data.length; i++) data[i] = Math.max(src.data[i], 0);
      out = { ...src, data };
    } else if (spec.kind === "add") {
      const data = Float64Array.from(src.data);
      for (const ref of spec.inputs.slice(1)) {
        const part = values.get(ref)!;
        if (part.data.length !== data.length) {
          throw new NetworkError(
            `layer ${JSON.stringify(spec.name)}: add operands disagree on shape`,
          );
        }
        for (let i = 0; i < data.length; i++) data[i] += part.data[i];
      }
      out = { ...src, data };
    } else {
      const pooled = globalAveragePool(src);
      const weight = bound(spec, archive, "weight");
      const data = new Float64Array(spec.out_channels);
      for (let o = 0; o < spec.out_channels; o++) {
        let acc = 0;
        const base = o * spec.in_channels;
        for (let i = 0; i < spec.in_channels; i++) acc += weight[base + i] * pooled.data[i];
        data[o] = acc;
      }
      if (spec.bindings.bias !== undefined) {
        const bias = bound(spec, archive, "bias");
        for (let o = 0; o < spec.out_channels; o++) data[o] += bias[o];
      }
      out = { channels: spec.out_channels, height: null, width: null, data };
    }
    values.set(spec.name, out);
  }
  const result = values.get(net.output);
  if (result === undefined) {
    throw new NetworkError(`output ${JSON.stringify(net.output)} is not a layer of the network`);
  }
  return result.data;
}
