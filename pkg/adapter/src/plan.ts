/**
 * Pruning plan documents for the planner's `prune` verb.
 *
 * The adapter builds "external" plans: the kept/removed partition is decided
 * by the caller rather than searched, and the FLOPs fields are computed with
 * the same arithmetic the planner uses so the document validates strictly on
 * its side (achieved must equal 1 - flops_after/flops_before exactly).
 */

import { flopsTotal, NetworkError, stableJson, type NetworkSpec } from "./netspec.js";

export interface PlanLayer {
  kept: number[];
  removed: number[];
  achieved_layer_threshold: number;
}

export interface PruningPlan {
  theta_target: number | null;
  beta: number | null;
  strategy: string;
  flops_before: number;
  flops_after: number;
  achieved: number;
  layers: Record<string, PlanLayer>;
}

/**
 * A plan that keeps every filter of every prunable layer; applying it is a
 * no-op, which makes it the probe for lossless export/import round trips.
 */
export function identityPlan(net: NetworkSpec): PruningPlan {
  const kept = new Map<string, number[]>();
  for (const spec of net.layers) {
    if (spec.prunable) {
      kept.set(spec.name, Array.from({ length: spec.out_channels }, (_, i) => i));
    }
  }
  return externalPlan(net, kept);
}

/**
 * A plan keeping exactly the given filter indices per prunable layer.
 * Layers absent from the map keep everything. The per-layer energy coverage
 * is unknown to the adapter (it has no spectra), so it is recorded as 1.0
 * for untouched layers and 0.0 (no claim) for pruned ones.
 */
export function externalPlan(net: NetworkSpec, keptByLayer: Map<string, number[]>): PruningPlan {
  const layers: Record<string, PlanLayer> = {};
  const override = new Map<string, number>();
  const prunable = new Map(net.layers.filter((s) => s.prunable).map((s) => [s.name, s]));
  for (const [name, kept] of keptByLayer) {
    const spec = prunable.get(name);
    if (spec === undefined) {
      throw new NetworkError(`plan references non-prunable or unknown layer ${JSON.stringify(name)}`);
    }
    const n = spec.out_channels;
    const sorted = kept.slice().sort((a, b) => a - b);
    if (
      sorted.length === 0 ||
      sorted.some((v, i) => !Number.isInteger(v) || v < 0 || v >= n || (i > 0 && v === sorted[i - 1]))
    ) {
      throw new NetworkError(
        `kept filters for ${JSON.stringify(name)} must be distinct indices in [0, ${n - 1}]`,
      );
    }
    const keptSet = new Set(sorted);
    const removed = Array.from({ length: n }, (_, i) => i).filter((i) => !keptSet.has(i));
    layers[name] = {
      kept: sorted,
      removed,
      achieved_layer_threshold: removed.length === 0 ? 1.0 : 0.0,
    };
    override.set(name, sorted.length);
  }
  const before = flopsTotal(net);
  const after = flopsTotal(net, override);
  return {
    theta_target: null,
    beta: null,
    strategy: "external",
    flops_before: before,
    flops_after: after,
    achieved: 1 - after / before,
    layers,
  };
}

export function planToJson(plan: PruningPlan): string {
  return stableJson(plan);
}
