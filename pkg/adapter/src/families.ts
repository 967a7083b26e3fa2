/**
 * Model family tables: the residual-network architectures the adapter can
 * export, described as (framework parameter list, network document) pairs.
 *
 * resnet56 / resnet110 are the 32x32-input residual networks with basic
 * blocks (9 / 18 per stage, widths 16/32/64) and projection shortcuts at
 * stage entries. resnet50 is the 224x224-input bottleneck network
 * ([3, 4, 6, 3] blocks, widths 64..512 with 4x expansion); the usual
 * post-stem max-pool is emulated by giving the first block's spatial conv
 * and projection a stride of 2, which leaves every parameter shape
 * unchanged. Prunable layers are the convs whose outputs stay inside a
 * block (basic conv1; bottleneck conv1/conv2); convs feeding a residual
 * join are exported non-prunable so channel counts stay consistent.
 */

import { INPUT_NAME, type LayerSpec, type NetworkSpec } from "./netspec.js";
import { tensorStream } from "./rng.js";
import type { Tensor } from "./container.js";

export const MODEL_FAMILIES = ["resnet56", "resnet110", "resnet50"] as const;
export type ModelFamily = (typeof MODEL_FAMILIES)[number];

export type ParamRole =
  | "conv_weight"
  | "bn_scale"
  | "bn_shift"
  | "bn_mean"
  | "bn_var"
  | "linear_weight"
  | "linear_bias";

export interface ParamInfo {
  shape: number[];
  role: ParamRole;
  /** Archive tensor name this parameter exports to. */
  archiveName: string;
}

export interface FamilyModel {
  family: ModelFamily;
  inputShape: [number, number, number];
  net: NetworkSpec;
  /** Framework parameter name -> shape, role, and archive name. */
  params: Map<string, ParamInfo>;
}

export class FamilyError extends Error {}

class GraphBuilder {
  layers: LayerSpec[] = [];
  params = new Map<string, ParamInfo>();

  private addParam(name: string, info: ParamInfo): void {
    if (this.params.has(name)) {
      throw new FamilyError(`duplicate parameter ${JSON.stringify(name)}`);
    }
    this.params.set(name, info);
  }

  conv(
    name: string,
    input: string,
    inC: number,
    outC: number,
    kernel: number,
    stride: number,
    padding: number,
    prunable: boolean,
  ): string {
    const weight = `${name}.weight`;
    this.addParam(weight, {
      shape: [outC, inC, kernel, kernel],
      role: "conv_weight",
      archiveName: weight,
    });
    this.layers.push({
      name,
      kind: "conv2d",
      in_channels: inC,
      out_channels: outC,
      kernel_hw: [kernel, kernel],
      stride_hw: [stride, stride],
      padding_hw: [padding, padding],
      prunable,
      coupling_group: null,
      bindings: { weight },
      inputs: [input],
    });
    return name;
  }

  bn(name: string, input: string, channels: number): string {
    const roles: Array<[string, ParamRole, string]> = [
      [`${name}.weight`, "bn_scale", `${name}.scale`],
      [`${name}.bias`, "bn_shift", `${name}.shift`],
      [`${name}.running_mean`, "bn_mean", `${name}.mean`],
      [`${name}.running_var`, "bn_var", `${name}.var`],
    ];
    for (const [param, role, archiveName] of roles) {
      this.addParam(param, { shape: [channels], role, archiveName });
    }
    this.layers.push({
      name,
      kind: "batchnorm",
      in_channels: channels,
      out_channels: channels,
      kernel_hw: null,
      stride_hw: null,
      padding_hw: null,
      prunable: false,
      coupling_group: null,
      bindings: {
        scale: `${name}.scale`,
        shift: `${name}.shift`,
        mean: `${name}.mean`,
        var: `${name}.var`,
      },
      inputs: [input],
    });
    return name;
  }

  relu(name: string, input: string, channels: number): string {
    this.layers.push({
      name,
      kind: "relu",
      in_channels: channels,
      out_channels: channels,
      kernel_hw: null,
      stride_hw: null,
      padding_hw: null,
      prunable: false,
      coupling_group: null,
      bindings: {},
      inputs: [input],
    });
    return name;
  }

  add(name: string, inputs: string[], channels: number): string {
    this.layers.push({
      name,
      kind: "add",
      in_channels: channels,
      out_channels: channels,
      kernel_hw: null,
      stride_hw: null,
      padding_hw: null,
      prunable: false,
      coupling_group: null,
      bindings: {},
      inputs,
    });
    return name;
  }

  linear(name: string, input: string, inC: number, outC: number): string {
    const weight = `${name}.weight`;
    const bias = `${name}.bias`;
    this.addParam(weight, { shape: [outC, inC], role: "linear_weight", archiveName: weight });
    this.addParam(bias, { shape: [outC], role: "linear_bias", archiveName: bias });
    this.layers.push({
      name,
      kind: "linear",
      in_channels: inC,
      out_channels: outC,
      kernel_hw: null,
      stride_hw: null,
      padding_hw: null,
      prunable: false,
      coupling_group: null,
      bindings: { weight, bias },
      inputs: [input],
    });
    return name;
  }
}

function buildBasicResnet(family: ModelFamily, blocksPerStage: number): FamilyModel {
  const b = new GraphBuilder();
  let cur = b.conv("conv1", INPUT_NAME, 3, 16, 3, 1, 1, false);
  cur = b.bn("bn1", cur, 16);
  cur = b.relu("relu1", cur, 16);
  let inC = 16;
  for (let stage = 1; stage <= 3; stage++) {
    const width = 16 << (stage - 1);
    for (let block = 0; block < blocksPerStage; block++) {
      const prefix = `layer${stage}.${block}`;
      const stride = stage > 1 && block === 0 ? 2 : 1;
      const blockIn = cur;
      let x = b.conv(`${prefix}.conv1`, blockIn, inC, width, 3, stride, 1, true);
      x = b.bn(`${prefix}.bn1`, x, width);
      x = b.relu(`${prefix}.relu1`, x, width);
      x = b.conv(`${prefix}.conv2`, x, width, width, 3, 1, 1, false);
      x = b.bn(`${prefix}.bn2`, x, width);
      let shortcut = blockIn;
      if (stride !== 1 || inC !== width) {
        shortcut = b.conv(`${prefix}.downsample.0`, blockIn, inC, width, 1, stride, 0, false);
        shortcut = b.bn(`${prefix}.downsample.1`, shortcut, width);
      }
      x = b.add(`${prefix}.add`, [x, shortcut], width);
      cur = b.relu(`${prefix}.relu2`, x, width);
      inC = width;
    }
  }
  const output = b.linear("fc", cur, 64, 10);
  return {
    family,
    inputShape: [3, 32, 32],
    net: { input_shape: [3, 32, 32], layers: b.layers, output },
    params: b.params,
  };
}

function buildBottleneckResnet(): FamilyModel {
  const b = new GraphBuilder();
  let cur = b.conv("conv1", INPUT_NAME, 3, 64, 7, 2, 3, false);
  cur = b.bn("bn1", cur, 64);
  cur = b.relu("relu1", cur, 64);
  const blocksPerStage = [3, 4, 6, 3];
  const planesPerStage = [64, 128, 256, 512];
  let inC = 64;
  for (let stage = 1; stage <= 4; stage++) {
    const planes = planesPerStage[stage - 1];
    const outC = planes * 4;
    for (let block = 0; block < blocksPerStage[stage - 1]; block++) {
      const prefix = `layer${stage}.${block}`;
      // Stage entries downsample; at layer1 this stands in for the max-pool.
      const stride = block === 0 ? 2 : 1;
      const blockIn = cur;
      let x = b.conv(`${prefix}.conv1`, blockIn, inC, planes, 1, 1, 0, true);
      x = b.bn(`${prefix}.bn1`, x, planes);
      x = b.relu(`${prefix}.relu1`, x, planes);
      x = b.conv(`${prefix}.conv2`, x, planes, planes, 3, stride, 1, true);
      x = b.bn(`${prefix}.bn2`, x, planes);
      x = b.relu(`${prefix}.relu2`, x, planes);
      x = b.conv(`${prefix}.conv3`, x, planes, outC, 1, 1, 0, false);
      x = b.bn(`${prefix}.bn3`, x, outC);
      let shortcut = blockIn;
      if (stride !== 1 || inC !== outC) {
        shortcut = b.conv(`${prefix}.downsample.0`, blockIn, inC, outC, 1, stride, 0, false);
        shortcut = b.bn(`${prefix}.downsample.1`, shortcut, outC);
      }
      x = b.add(`${prefix}.add`, [x, shortcut], outC);
      cur = b.relu(`${prefix}.relu3`, x, outC);
      inC = outC;
    }
  }
  const output = b.linear("fc", cur, 2048, 1000);
  return {
    family: "resnet50",
    inputShape: [3, 224, 224],
    net: { input_shape: [3, 224, 224], layers: b.layers, output },
    params: b.params,
  };
}

export function buildFamily(family: string): FamilyModel {
  switch (family) {
    case "resnet56":
      return buildBasicResnet("resnet56", 9);
    case "resnet110":
      return buildBasicResnet("resnet110", 18);
    case "resnet50":
      return buildBottleneckResnet();
    default:
      throw new FamilyError(
        `unknown model family ${JSON.stringify(family)} (expected one of ${MODEL_FAMILIES.join(", ")})`,
      );
  }
}

/**
 * Deterministic random checkpoint for a family: weights are fan-in-scaled
 * uniforms, batchnorm statistics stay in ranges that keep the inference
 * transform well conditioned (variance >= 0.5).
 */
export function initCheckpoint(family: string, seed: number): Map<string, Tensor> {
  const model = buildFamily(family);
  const tensors = new Map<string, Tensor>();
  for (const [name, info] of model.params) {
    const next = tensorStream(seed >>> 0, name);
    const data = new Float32Array(info.shape.reduce((a, v) => a * v, 1));
    let fanIn = 1;
    if (info.role === "conv_weight") {
      fanIn = info.shape[1] * info.shape[2] * info.shape[3];
    } else if (info.role === "linear_weight") {
      fanIn = info.shape[1];
    }
    const bound = 1 / Math.sqrt(fanIn);
    for (let i = 0; i < data.length; i++) {
      const u = next();
      switch (info.role) {
        case "conv_weight":
        case "linear_weight":
          data[i] = (u * 2 - 1) * bound;
          break;
        case "linear_bias":
        case "bn_shift":
        case "bn_mean":
          data[i] = (u * 2 - 1) * 0.1;
          break;
        case "bn_scale":
        case "bn_var":
          data[i] = 0.5 + u;
          break;
      }
    }
    tensors.set(name, { shape: info.shape.slice(), data });
  }
  return tensors;
}
