import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ProjectionEncoder, resolveBackend, ModelUnavailableError } from "../src/encoder.js";
import { decodeBank } from "../src/fbnk.js";
import { decodeImage, preprocess } from "../src/image.js";
import { exportBank } from "../src/export.js";
import { makePng, writeDataset } from "./helpers.js";

let tmp: string;

beforeEach(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "fbnk-export-"));
});

afterEach(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

function quietLog(): void {}

describe("image pipeline", () => {
  it("decodes PNG and preprocesses to the crop size", () => {
    const buf = makePng(60, 40, [120, 60, 200], 3n);
    const img = decodeImage(buf, "x.png");
    expect(img.width).toBe(60);
    expect(img.height).toBe(40);
    const crop = preprocess(img, 32);
    expect(crop.width).toBe(32);
    expect(crop.height).toBe(32);
    expect(Math.max(...crop.data)).toBeLessThanOrEqual(1);
  });

  it("decodes binary PPM", () => {
    const header = Buffer.from("P6\n# comment\n2 2 255\n", "ascii");
    const pixels = Buffer.from([255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255]);
    const img = decodeImage(Buffer.concat([header, pixels]), "x.ppm");
    expect(img.width).toBe(2);
    expect(img.data[0]).toBe(1);
    expect(img.data[4]).toBe(1);
  });

  it("rejects non-image bytes", () => {
    expect(() => decodeImage(Buffer.from("hello world"), "x.txt")).toThrow(/not a PNG/);
  });
});

describe("projection encoder", () => {
  it("emits unit-norm global and regional features", () => {
    const enc = new ProjectionEncoder({ seed: 9n, dEmbed: 32, grid: 3 });
    const img = decodeImage(makePng(50, 50, [10, 200, 30], 4n), "x.png");
    const { global, regions } = enc.encode(img);
    expect(regions).toHaveLength(9);
    for (const row of [global, ...regions]) {
      const norm = Math.sqrt(row.reduce((a, b) => a + b * b, 0));
      expect(Math.abs(norm - 1)).toBeLessThan(1e-12);
    }
  });

  it("is deterministic for a given seed", () => {
    const img = decodeImage(makePng(40, 40, [90, 90, 90], 5n), "x.png");
    const a = new ProjectionEncoder({ seed: 2n }).encode(img);
    const b = new ProjectionEncoder({ seed: 2n }).encode(img);
    expect(Array.from(a.global)).toEqual(Array.from(b.global));
    const c = new ProjectionEncoder({ seed: 3n }).encode(img);
    expect(Array.from(c.global)).not.toEqual(Array.from(a.global));
  });

  it("unknown model ids abort", () => {
    expect(() => resolveBackend("vit-b-16")).toThrow(ModelUnavailableError);
    expect(resolveBackend("projection:5").id).toContain("seed=5");
  });
});

describe("exportBank", () => {
  it("assigns labels by sorted class order and caps shots", () => {
    writeDataset(tmp, { classes: { zebra: 5, apple: 6, mango: 4 } });
    const out = path.join(tmp, "train.fbnk");
    const manifest = exportBank(
      {
        imagesDir: tmp,
        outPath: out,
        split: "train",
        shots: 4,
        backend: new ProjectionEncoder({ seed: 1n, dEmbed: 16, grid: 2, cropSize: 32 }),
      },
      quietLog
    );
    expect(manifest.classes).toEqual(["apple", "mango", "zebra"]);
    expect(manifest.n_samples).toBe(12); // 4 per class
    const bank = decodeBank(fs.readFileSync(out));
    expect(bank.nClasses).toBe(3);
    expect(Array.from(bank.labels)).toEqual([0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    expect(bank.nRegions).toBe(4);
    expect(bank.dEmbed).toBe(16);
  });

  it("stored rows are unit-norm within 1e-4 after f32 rounding", () => {
    writeDataset(tmp, { classes: { a: 3, b: 3 } });
    const out = path.join(tmp, "bank.fbnk");
    exportBank(
      {
        imagesDir: tmp,
        outPath: out,
        split: "id_test",
        shots: 0,
        backend: new ProjectionEncoder({ seed: 4n, dEmbed: 24, grid: 2, cropSize: 32 }),
      },
      quietLog
    );
    const bank = decodeBank(fs.readFileSync(out));
    const rows = bank.labels.length * (1 + bank.nRegions);
    for (let row = 0; row < rows; row++) {
      const src = row < bank.labels.length ? bank.globals : bank.regions;
      const offset =
        row < bank.labels.length
          ? row * bank.dEmbed
          : (row - bank.labels.length) * bank.dEmbed;
      let norm = 0;
      for (let i = 0; i < bank.dEmbed; i++) norm += src[offset + i] ** 2;
      expect(Math.abs(Math.sqrt(norm) - 1)).toBeLessThan(1e-4);
    }
  });

  it("repeat export is byte-identical", () => {
    writeDataset(tmp, { classes: { a: 2, b: 2 } });
    const backend = () => new ProjectionEncoder({ seed: 6n, dEmbed: 16, grid: 2, cropSize: 32 });
    const p1 = path.join(tmp, "one.fbnk");
    const p2 = path.join(tmp, "two.fbnk");
    exportBank({ imagesDir: tmp, outPath: p1, split: "train", shots: 0, backend: backend() }, quietLog);
    exportBank({ imagesDir: tmp, outPath: p2, split: "train", shots: 0, backend: backend() }, quietLog);
    expect(fs.readFileSync(p1).equals(fs.readFileSync(p2))).toBe(true);
  });

  it("ood split labels everything -1", () => {
    writeDataset(tmp, { classes: { weird: 3 } });
    const out = path.join(tmp, "ood.fbnk");
    exportBank(
      {
        imagesDir: tmp,
        outPath: out,
        split: "ood",
        shots: 0,
        backend: new ProjectionEncoder({ seed: 7n, dEmbed: 16, grid: 2, cropSize: 32 }),
      },
      quietLog
    );
    const bank = decodeBank(fs.readFileSync(out));
    expect(Array.from(bank.labels)).toEqual([-1, -1, -1]);
    expect(bank.split).toBe("ood");
  });

  it("skips undecodable files with a warning and a manifest entry", () => {
    writeDataset(tmp, { classes: { a: 2, b: 2 } });
    fs.writeFileSync(path.join(tmp, "a", "broken.png"), Buffer.from("not a png at all"));
    const warnings: string[] = [];
    const manifest = exportBank(
      {
        imagesDir: tmp,
        outPath: path.join(tmp, "bank.fbnk"),
        split: "train",
        shots: 0,
        backend: new ProjectionEncoder({ seed: 8n, dEmbed: 16, grid: 2, cropSize: 32 }),
      },
      (msg) => warnings.push(msg)
    );
    expect(manifest.skipped).toEqual([path.join("a", "broken.png")]);
    expect(manifest.n_samples).toBe(4);
    expect(warnings.some((w) => w.includes("broken.png"))).toBe(true);
  });

  it("aborts when a class has no decodable image", () => {
    writeDataset(tmp, { classes: { a: 2 } });
    fs.mkdirSync(path.join(tmp, "empty"));
    fs.writeFileSync(path.join(tmp, "empty", "junk.png"), Buffer.from("junk"));
    expect(() =>
      exportBank(
        {
          imagesDir: tmp,
          outPath: path.join(tmp, "bank.fbnk"),
          split: "train",
          shots: 0,
          backend: new ProjectionEncoder({ seed: 9n, dEmbed: 16, grid: 2, cropSize: 32 }),
        },
        quietLog
      )
    ).toThrow(/no decodable images/);
  });

  it("writes a manifest documenting model and preprocessing", () => {
    writeDataset(tmp, { classes: { a: 2, b: 2 } });
    const out = path.join(tmp, "bank.fbnk");
    exportBank(
      {
        imagesDir: tmp,
        outPath: out,
        split: "train",
        shots: 0,
        backend: new ProjectionEncoder({ seed: 1n, dEmbed: 16, grid: 2, cropSize: 32 }),
      },
      quietLog
    );
    const manifest = JSON.parse(
      fs.readFileSync(out.replace(".fbnk", ".manifest.json"), "utf-8")
    );
    expect(manifest.model).toContain("projection");
    expect(manifest.preprocessing).toContain("center crop");
    expect(manifest.classes).toEqual(["a", "b"]);
  });
});
