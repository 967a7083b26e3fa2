/**
 * Checkpoint export: turn a framework checkpoint into the planner's inputs.
 *
 * The export is pure renaming — archive tensors are bit-exact copies of the
 * checkpoint's float32 parameters — plus the generated network document and
 * a manifest recording the (bijective) framework-to-archive name map so a
 * pruned archive can be renamed back later.
 */

import type { Checkpoint } from "./checkpoint.js";
import type { Archive } from "./container.js";
import { buildFamily, type FamilyModel } from "./families.js";
import type { NetworkSpec } from "./netspec.js";
import { stableJson } from "./netspec.js";

export class ExportError extends Error {}

export interface ExportManifest {
  model_family: string;
  input_shape: [number, number, number];
  /** Framework parameter name -> archive tensor name (a bijection). */
  tensor_name_map: Record<string, string>;
}

export interface ExportResult {
  net: NetworkSpec;
  archive: Archive;
  manifest: ExportManifest;
}

function shapesEqual(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

export function exportModel(checkpoint: Checkpoint, family: string): ExportResult {
  let model: FamilyModel;
  try {
    model = buildFamily(family);
  } catch (err) {
    throw new ExportError((err as Error).message);
  }

  const archive: Archive = new Map();
  const nameMap: Record<string, string> = {};
  for (const [param, info] of model.params) {
    const entry = checkpoint.entries.get(param);
    if (entry === undefined) {
      throw new ExportError(`checkpoint missing parameter ${JSON.stringify(param)}`);
    }
    if (!shapesEqual(entry.shape, info.shape)) {
      throw new ExportError(
        `parameter ${JSON.stringify(param)} has shape [${entry.shape.join(", ")}], ` +
          `expected [${info.shape.join(", ")}] for family ${family}`,
      );
    }
    if (entry.data === null) {
      throw new ExportError(
        `parameter ${JSON.stringify(param)} has non-float dtype ${JSON.stringify(entry.dtype)}`,
      );
    }
    archive.set(info.archiveName, { shape: info.shape.slice(), data: entry.data });
    nameMap[param] = info.archiveName;
  }
  for (const name of checkpoint.entries.keys()) {
    if (!model.params.has(name)) {
      throw new ExportError(
        `unexpected parameter ${JSON.stringify(name)} is not part of family ${family}`,
      );
    }
  }
  return {
    net: model.net,
    archive,
    manifest: {
      model_family: family,
      input_shape: model.inputShape,
      tensor_name_map: nameMap,
    },
  };
}

export function manifestToJson(manifest: ExportManifest): string {
  return stableJson(manifest);
}

export function manifestFromJson(text: string): ExportManifest {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    throw new ExportError(`manifest is not valid JSON: ${err}`);
  }
  if (obj === null || typeof obj !== "object" || Array.isArray(obj)) {
    throw new ExportError("manifest must be an object");
  }
  const doc = obj as Record<string, unknown>;
  for (const req of ["model_family", "input_shape", "tensor_name_map"]) {
    if (!(req in doc)) throw new ExportError(`manifest missing ${JSON.stringify(req)}`);
  }
  if (typeof doc.model_family !== "string" || !doc.model_family) {
    throw new ExportError("manifest model_family must be a non-empty string");
  }
  const shape = doc.input_shape;
  if (!Array.isArray(shape) || shape.length !== 3 || shape.some((v) => !Number.isInteger(v) || v < 1)) {
    throw new ExportError("manifest input_shape must be a three-element list of positive integers");
  }
  const map = doc.tensor_name_map;
  if (map === null || typeof map !== "object" || Array.isArray(map)) {
    throw new ExportError("manifest tensor_name_map must be an object");
  }
  const nameMap: Record<string, string> = {};
  for (const [k, v] of Object.entries(map as Record<string, unknown>)) {
    if (typeof v !== "string" || !v || !k) {
      throw new ExportError("manifest tensor_name_map must map names to names");
    }
    nameMap[k] = v;
  }
  return {
    model_family: doc.model_family,
    input_shape: [shape[0], shape[1], shape[2]],
    tensor_name_map: nameMap,
  };
}
