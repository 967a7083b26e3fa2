export {
  ContainerError,
  readArchive,
  writeArchive,
  elementCount,
  asciiJsonString,
  SNF_MAGIC,
  type Archive,
  type Tensor,
} from "./container.js";
export {
  CheckpointError,
  readCheckpoint,
  writeCheckpoint,
  checkpointTensors,
  DTYPE_SIZES,
  type Checkpoint,
  type CheckpointEntry,
} from "./checkpoint.js";
export {
  NetworkError,
  networkFromJson,
  networkToJson,
  stableJson,
  layerShapes,
  flopsTotal,
  convOutSize,
  INPUT_NAME,
  LAYER_KINDS,
  type LayerKind,
  type LayerSpec,
  type NetworkSpec,
  type LayerShape,
} from "./netspec.js";
export { identityPlan, externalPlan, planToJson, type PlanLayer, type PruningPlan } from "./plan.js";
export {
  FamilyError,
  buildFamily,
  initCheckpoint,
  MODEL_FAMILIES,
  type FamilyModel,
  type ModelFamily,
  type ParamInfo,
  type ParamRole,
} from "./families.js";
export {
  ExportError,
  exportModel,
  manifestToJson,
  manifestFromJson,
  type ExportManifest,
  type ExportResult,
} from "./exporter.js";
export { ImportError, importPruned, modelForward, type ImportedModel } from "./importer.js";
export { forwardEval, BN_EPS } from "./runtime.js";
export { fnv1a, mulberry32, tensorStream } from "./rng.js";
