/**
 * Encoder backends turn a preprocessed image into one global feature plus
 * a grid of regional features, every row L2-normalized.
 *
 * The built-in "projection" backend is deterministic and self-contained:
 * each region (a grid cell of the crop) is downsampled to a fixed patch,
 * centered, given a bias component, and projected by a seeded random
 * matrix. It stands in where no pretrained weights are available; a real
 * vision-language encoder plugs in by implementing EncoderBackend (global
 * = pooled/class token, regions = spatial tokens projected to the joint
 * space).
 */

import { RgbImage, preprocess, resize } from "./image.js";
import { SeededRng, deriveSeed } from "./rng.js";

export interface EncoderBackend {
  readonly id: string;
  readonly dEmbed: number;
  readonly grid: number;
  readonly cropSize: number;
  /** Preprocessing description recorded in the manifest. */
  readonly preprocessing: string;
  encode(img: RgbImage): { global: Float64Array; regions: Float64Array[] };
}

export class ModelUnavailableError extends Error {}

const PATCH = 8; // each cell is pooled to PATCH x PATCH RGB before projection
const INPUT_DIM = PATCH * PATCH * 3 + 1; // trailing bias component

export interface ProjectionOptions {
  seed?: bigint;
  dEmbed?: number;
  grid?: number;
  cropSize?: number;
}

export class ProjectionEncoder implements EncoderBackend {
  readonly id: string;
  readonly dEmbed: number;
  readonly grid: number;
  readonly cropSize: number;
  readonly preprocessing: string;
  private readonly w: Float64Array; // dEmbed x INPUT_DIM row-major

  constructor(opts: ProjectionOptions = {}) {
    this.dEmbed = opts.dEmbed ?? 64;
    this.grid = opts.grid ?? 3;
    this.cropSize = opts.cropSize ?? 96;
    const seed = opts.seed ?? 0n;
    this.id = `projection:seed=${seed}:d=${this.dEmbed}:grid=${this.grid}`;
    this.preprocessing =
      `bilinear resize shorter side to ${this.cropSize}, center crop ` +
      `${this.cropSize}x${this.cropSize}, per-cell ${PATCH}x${PATCH} pooling`;
    const rng = new SeededRng(deriveSeed(seed, 0n));
    const bound = 1 / Math.sqrt(INPUT_DIM);
    this.w = new Float64Array(this.dEmbed * INPUT_DIM);
    for (let i = 0; i < this.w.length; i++) {
      this.w[i] = rng.uniformIn(-bound, bound);
    }
  }

  private project(patch: RgbImage): Float64Array {
    const v = new Float64Array(INPUT_DIM);
    const pooled = resize(patch, PATCH, PATCH);
    for (let i = 0; i < pooled.data.length; i++) v[i] = pooled.data[i] - 0.5;
    v[INPUT_DIM - 1] = 1.0;
    const out = new Float64Array(this.dEmbed);
    for (let row = 0; row < this.dEmbed; row++) {
      let acc = 0;
      const base = row * INPUT_DIM;
      for (let col = 0; col < INPUT_DIM; col++) acc += this.w[base + col] * v[col];
      out[row] = acc;
    }
    let norm = 0;
    for (const x of out) norm += x * x;
    norm = Math.sqrt(norm);
    if (norm < 1e-12) throw new Error("degenerate feature (zero projection)");
    for (let i = 0; i < out.length; i++) out[i] /= norm;
    return out;
  }

  encode(img: RgbImage): { global: Float64Array; regions: Float64Array[] } {
    const crop = preprocess(img, this.cropSize);
    const cell = Math.floor(this.cropSize / this.grid);
    const regions: Float64Array[] = [];
    for (let gy = 0; gy < this.grid; gy++) {
      for (let gx = 0; gx < this.grid; gx++) {
        const patch = new Float64Array(cell * cell * 3);
        for (let y = 0; y < cell; y++) {
          for (let x = 0; x < cell; x++) {
            const sy = gy * cell + y;
            const sx = gx * cell + x;
            for (let c = 0; c < 3; c++) {
              patch[3 * (y * cell + x) + c] = crop.data[3 * (sy * crop.width + sx) + c];
            }
          }
        }
        regions.push(this.project({ width: cell, height: cell, data: patch }));
      }
    }
    return { global: this.project(crop), regions };
  }
}

/**
 * Resolve a model id to a backend. "projection" (optionally
 * "projection:<seed>") is built in; anything else aborts, which is where a
 * checkpoint-backed encoder would be wired up.
 */
export function resolveBackend(modelId: string, opts: ProjectionOptions = {}): EncoderBackend {
  if (modelId === "projection" || modelId.startsWith("projection:")) {
    const parts = modelId.split(":");
    const seed = parts.length > 1 && parts[1] !== "" ? BigInt(parts[1]) : opts.seed ?? 0n;
    return new ProjectionEncoder({ ...opts, seed });
  }
  throw new ModelUnavailableError(
    `model "${modelId}" is not available: no pretrained weights or backend ` +
      `in this environment (built-in: "projection[:seed]")`
  );
}
