import * as fs from "node:fs";
import * as path from "node:path";

import { PNG } from "pngjs";

import { SeededRng } from "../src/rng.js";

/** Deterministic test image: base color per class plus seeded pixel noise. */
export function makePng(
  width: number,
  height: number,
  base: [number, number, number],
  seed: bigint
): Buffer {
  const png = new PNG({ width, height });
  const rng = new SeededRng(seed);
  for (let i = 0; i < width * height; i++) {
    for (let c = 0; c < 3; c++) {
      const noise = Math.floor(rng.uniform() * 60) - 30;
      png.data[4 * i + c] = Math.min(255, Math.max(0, base[c] + noise));
    }
    png.data[4 * i + 3] = 255;
  }
  return PNG.sync.write(png);
}

export interface DatasetSpec {
  classes: Record<string, number>; // class name -> image count
  size?: number;
  seed?: bigint;
}

const PALETTE: [number, number, number][] = [
  [200, 40, 40],
  [40, 200, 40],
  [40, 40, 200],
  [200, 200, 40],
  [40, 200, 200],
];

export function writeDataset(dir: string, spec: DatasetSpec): void {
  const names = Object.keys(spec.classes).sort();
  const size = spec.size ?? 48;
  let seed = spec.seed ?? 1n;
  names.forEach((name, idx) => {
    const classDir = path.join(dir, name);
    fs.mkdirSync(classDir, { recursive: true });
    for (let i = 0; i < spec.classes[name]; i++) {
      seed += 1n;
      const buf = makePng(size, size, PALETTE[idx % PALETTE.length], seed);
      fs.writeFileSync(path.join(classDir, `img_${String(i).padStart(2, "0")}.png`), buf);
    }
  });
}
