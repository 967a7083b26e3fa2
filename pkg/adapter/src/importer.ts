/**
 * Pruned-model import: rename a (possibly pruned) archive back into
 * framework parameter names using the manifest recorded at export time.
 *
 * The result carries the pruned channel counts implicitly in the tensor
 * shapes; `modelForward` evaluates it with the reference semantics so
 * callers can check parity before handing the checkpoint to a framework
 * for fine-tuning.
 */

import type { Archive, Tensor } from "./container.js";
import type { ExportManifest } from "./exporter.js";
import type { NetworkSpec } from "./netspec.js";
import { forwardEval } from "./runtime.js";

export class ImportError extends Error {}

export interface ImportedModel {
  family: string;
  inputShape: [number, number, number];
  net: NetworkSpec;
  archive: Archive;
  /** Framework parameter name -> tensor, with pruned shapes. */
  params: Map<string, Tensor>;
}

export function importPruned(
  archive: Archive,
  net: NetworkSpec,
  manifest: ExportManifest,
): ImportedModel {
  const inverse = new Map<string, string>();
  for (const [param, archiveName] of Object.entries(manifest.tensor_name_map)) {
    if (inverse.has(archiveName)) {
      throw new ImportError(
        `manifest tensor_name_map is not a bijection: ${JSON.stringify(archiveName)} is mapped twice`,
      );
    }
    inverse.set(archiveName, param);
  }
  for (const archiveName of inverse.keys()) {
    if (!archive.has(archiveName)) {
      throw new ImportError(
        `manifest names ${JSON.stringify(archiveName)}, which is missing from the archive`,
      );
    }
  }
  for (const name of archive.keys()) {
    if (!inverse.has(name)) {
      throw new ImportError(
        `archive tensor ${JSON.stringify(name)} is not named by the manifest`,
      );
    }
  }
  for (const spec of net.layers) {
    for (const [role, name] of Object.entries(spec.bindings)) {
      if (!archive.has(name)) {
        throw new ImportError(
          `network binds ${JSON.stringify(spec.name)}.${role} to ${JSON.stringify(name)}, which is missing from the archive`,
        );
      }
    }
  }
  const [c, h, w] = manifest.input_shape;
  const [nc, nh, nw] = net.input_shape;
  if (c !== nc || h !== nh || w !== nw) {
    throw new ImportError(
      `manifest input_shape [${manifest.input_shape.join(", ")}] does not match ` +
        `network input_shape [${net.input_shape.join(", ")}]`,
    );
  }

  const params = new Map<string, Tensor>();
  for (const [archiveName, param] of inverse) {
    const tensor = archive.get(archiveName)!;
    params.set(param, { shape: tensor.shape.slice(), data: tensor.data });
  }
  return {
    family: manifest.model_family,
    inputShape: [c, h, w],
    net,
    archive,
    params,
  };
}

/** Evaluate the imported model on one input with the reference semantics. */
export function modelForward(
  model: ImportedModel,
  input: Float32Array | Float64Array,
): Float64Array {
  return forwardEval(model.net, model.archive, input);
}
