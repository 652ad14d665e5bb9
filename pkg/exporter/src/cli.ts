#!/usr/bin/env node
/**
 * fbnk-export: convert a folder of class-labeled images into an FBNK
 * feature bank plus a JSON manifest.
 *
 *   fbnk-export --images data/train --out train.fbnk --split train \
 *       --model projection:7 --shots 4
 *
 * Exit codes: 0 ok, 1 usage, 2 missing model/backend, 3 export failure.
 */

import { parseArgs } from "node:util";

import { ModelUnavailableError, resolveBackend } from "./encoder.js";
import { Split } from "./fbnk.js";
import { exportBank } from "./export.js";

function usageError(message: string): never {
  console.error(`error: ${message}`);
  console.error(
    "usage: fbnk-export --images DIR --out BANK.fbnk [--split train|id_test|ood]\n" +
      "       [--model ID] [--shots N] [--d-embed N] [--grid N] [--crop N]\n" +
      "       [--manifest PATH]"
  );
  process.exit(1);
}

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        images: { type: "string" },
        out: { type: "string" },
        split: { type: "string", default: "train" },
        model: { type: "string", default: "projection" },
        shots: { type: "string", default: "0" },
        "d-embed": { type: "string", default: "64" },
        grid: { type: "string", default: "3" },
        crop: { type: "string", default: "96" },
        manifest: { type: "string" },
      },
    }));
  } catch (err) {
    usageError((err as Error).message);
  }
  if (!values.images || !values.out) usageError("--images and --out are required");
  const split = values.split as Split;
  if (!["train", "id_test", "ood"].includes(split)) {
    usageError(`bad --split ${values.split}`);
  }
  const shots = Number(values.shots);
  if (!Number.isInteger(shots) || shots < 0) usageError("--shots must be a non-negative integer");

  let backend;
  try {
    backend = resolveBackend(values.model!, {
      dEmbed: Number(values["d-embed"]),
      grid: Number(values.grid),
      cropSize: Number(values.crop),
    });
  } catch (err) {
    if (err instanceof ModelUnavailableError) {
      console.error(`error: ${err.message}`);
      return 2;
    }
    throw err;
  }

  try {
    const manifest = exportBank({
      imagesDir: values.images,
      outPath: values.out,
      manifestPath: values.manifest,
      split,
      shots,
      backend,
    });
    console.log(
      `wrote ${manifest.n_samples} samples (${manifest.classes.length} classes, ` +
        `${manifest.n_regions} regions, d=${manifest.d_embed}) to ${values.out}`
    );
    if (manifest.skipped.length > 0) {
      console.error(`skipped ${manifest.skipped.length} undecodable file(s); see manifest`);
    }
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 3;
  }
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split("/").pop() ?? ""
);
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
