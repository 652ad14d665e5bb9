/**
 * Folder-to-bank export: one subdirectory per class, classes ordered
 * lexicographically (Unicode code-unit order), labels assigned by that
 * ordering. Undecodable images are skipped with a warning and recorded in
 * the manifest; a class with no usable image aborts the job.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Bank, Split, encodeBank } from "./fbnk.js";
import { EncoderBackend } from "./encoder.js";
import { DecodeError, decodeImage } from "./image.js";

export interface ExportJob {
  imagesDir: string;
  outPath: string;
  manifestPath?: string;
  split: Split;
  /** Per-class cap on images (train few-shot); 0 = no cap. */
  shots: number;
  backend: EncoderBackend;
}

export interface Manifest {
  model: string;
  d_embed: number;
  n_regions: number;
  crop_size: number;
  preprocessing: string;
  split: Split;
  shots: number;
  classes: string[];
  n_samples: number;
  skipped: string[];
}

const IMAGE_EXT = new Set([".png", ".ppm"]);

export function listClasses(imagesDir: string): string[] {
  const entries = fs
    .readdirSync(imagesDir, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (entries.length === 0) {
    throw new Error(`${imagesDir}: no class subdirectories`);
  }
  return entries;
}

export function exportBank(job: ExportJob, log: (msg: string) => void = console.error): Manifest {
  const classes = listClasses(job.imagesDir);
  const backend = job.backend;
  const skipped: string[] = [];
  const labels: number[] = [];
  const globals: number[] = [];
  const regions: number[] = [];

  for (let label = 0; label < classes.length; label++) {
    const dir = path.join(job.imagesDir, classes[label]);
    const files = fs
      .readdirSync(dir)
      .filter((f) => IMAGE_EXT.has(path.extname(f).toLowerCase()))
      .sort();
    let taken = 0;
    for (const file of files) {
      if (job.shots > 0 && taken >= job.shots) break;
      const rel = path.join(classes[label], file);
      let encoded;
      try {
        const img = decodeImage(fs.readFileSync(path.join(dir, file)), rel);
        encoded = backend.encode(img);
      } catch (err) {
        if (err instanceof DecodeError) {
          log(`warning: skipping ${rel}: ${err.message}`);
          skipped.push(rel);
          continue;
        }
        throw err;
      }
      taken++;
      labels.push(job.split === "ood" ? -1 : label);
      for (const v of encoded.global) globals.push(v);
      for (const region of encoded.regions) for (const v of region) regions.push(v);
    }
    if (taken === 0) {
      throw new Error(`class "${classes[label]}" has no decodable images`);
    }
  }

  const bank: Bank = {
    labels: Int32Array.from(labels),
    globals: Float32Array.from(globals),
    regions: Float32Array.from(regions),
    nRegions: backend.grid * backend.grid,
    dEmbed: backend.dEmbed,
    nClasses: classes.length,
    split: job.split,
  };
  fs.mkdirSync(path.dirname(path.resolve(job.outPath)), { recursive: true });
  fs.writeFileSync(job.outPath, encodeBank(bank));

  const manifest: Manifest = {
    model: backend.id,
    d_embed: backend.dEmbed,
    n_regions: backend.grid * backend.grid,
    crop_size: backend.cropSize,
    preprocessing: backend.preprocessing,
    split: job.split,
    shots: job.shots,
    classes,
    n_samples: labels.length,
    skipped,
  };
  const manifestPath = job.manifestPath ?? job.outPath.replace(/\.fbnk$/, "") + ".manifest.json";
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return manifest;
}
