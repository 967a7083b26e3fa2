#!/usr/bin/env node
/**
 * Command-line entry point.
 *
 * Usage:
 *   snf-adapter init      --family <name> --seed <n> --out <ckpt>
 *   snf-adapter export    --checkpoint <ckpt> --family <name>
 *                         --out-net <json> --out-weights <snf> --out-manifest <json>
 *   snf-adapter import    --weights <snf> --net <json> --manifest <json>
 *                         --out-checkpoint <ckpt>
 *   snf-adapter noop-plan --net <json> --out <json>
 *
 * Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
 * checkpoint, archive, network, or manifest).
 */

import * as fs from "node:fs";
import { pathToFileURL } from "node:url";

import { readCheckpoint, writeCheckpoint } from "./checkpoint.js";
import { readArchive, writeArchive } from "./container.js";
import { initCheckpoint, MODEL_FAMILIES } from "./families.js";
import { exportModel, manifestFromJson, manifestToJson } from "./exporter.js";
import { importPruned } from "./importer.js";
import { networkFromJson, networkToJson } from "./netspec.js";
import { identityPlan, planToJson } from "./plan.js";

const USAGE = `usage: snf-adapter <verb> [flags]

verbs:
  init       write a deterministic random checkpoint for a model family
             --family {${MODEL_FAMILIES.join(",")}} --seed N --out FILE
  export     convert a checkpoint to planner inputs
             --checkpoint FILE --family NAME --out-net FILE
             --out-weights FILE --out-manifest FILE
  import     rename a (pruned) archive back to framework parameters
             --weights FILE --net FILE --manifest FILE --out-checkpoint FILE
  noop-plan  write a keep-everything plan for a network document
             --net FILE --out FILE
`;

class UsageError extends Error {}

function parseFlags(argv: string[], spec: Record<string, boolean>): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!(arg in spec)) {
      throw new UsageError(`unknown flag ${arg}`);
    }
    const value = argv[++i];
    if (value === undefined) {
      throw new UsageError(`flag ${arg} needs a value`);
    }
    flags.set(arg, value);
  }
  for (const [flag, required] of Object.entries(spec)) {
    if (required && !flags.has(flag)) {
      throw new UsageError(`missing required flag ${flag}`);
    }
  }
  return flags;
}

function parseSeed(text: string): number {
  const seed = Number(text);
  if (!Number.isInteger(seed) || seed < 0) {
    throw new UsageError(`--seed must be a non-negative integer, got ${JSON.stringify(text)}`);
  }
  return seed;
}

function runInit(argv: string[]): void {
  const flags = parseFlags(argv, { "--family": true, "--seed": true, "--out": true });
  const seed = parseSeed(flags.get("--seed")!);
  const tensors = initCheckpoint(flags.get("--family")!, seed);
  fs.writeFileSync(flags.get("--out")!, writeCheckpoint(tensors));
}

function runExport(argv: string[]): void {
  const flags = parseFlags(argv, {
    "--checkpoint": true,
    "--family": true,
    "--out-net": true,
    "--out-weights": true,
    "--out-manifest": true,
  });
  const checkpoint = readCheckpoint(fs.readFileSync(flags.get("--checkpoint")!));
  const result = exportModel(checkpoint, flags.get("--family")!);
  fs.writeFileSync(flags.get("--out-net")!, networkToJson(result.net));
  fs.writeFileSync(flags.get("--out-weights")!, writeArchive(result.archive));
  fs.writeFileSync(flags.get("--out-manifest")!, manifestToJson(result.manifest));
}

function runImport(argv: string[]): void {
  const flags = parseFlags(argv, {
    "--weights": true,
    "--net": true,
    "--manifest": true,
    "--out-checkpoint": true,
  });
  const archive = readArchive(fs.readFileSync(flags.get("--weights")!));
  const net = networkFromJson(fs.readFileSync(flags.get("--net")!, "utf-8"));
  const manifest = manifestFromJson(fs.readFileSync(flags.get("--manifest")!, "utf-8"));
  const model = importPruned(archive, net, manifest);
  fs.writeFileSync(flags.get("--out-checkpoint")!, writeCheckpoint(model.params));
}

function runNoopPlan(argv: string[]): void {
  const flags = parseFlags(argv, { "--net": true, "--out": true });
  const net = networkFromJson(fs.readFileSync(flags.get("--net")!, "utf-8"));
  fs.writeFileSync(flags.get("--out")!, planToJson(identityPlan(net)));
}

export function main(argv: string[]): number {
  const [verb, ...rest] = argv;
  try {
    switch (verb) {
      case "init":
        runInit(rest);
        break;
      case "export":
        runExport(rest);
        break;
      case "import":
        runImport(rest);
        break;
      case "noop-plan":
        runNoopPlan(rest);
        break;
      case "--help":
      case "-h":
        process.stdout.write(USAGE);
        break;
      case undefined:
        throw new UsageError("no verb given");
      default:
        throw new UsageError(`unknown verb ${JSON.stringify(verb)}`);
    }
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`error: ${err.message}\n${USAGE}`);
      return 1;
    }
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 2;
  }
  return 0;
}

if (process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
