/**
 * Exported banks must load through the harness's own reader with zero
 * invariant warnings, and a full train + eval cycle on them must succeed.
 * Exercises the real boundary: FBNK files on disk and the `gacoop` CLI.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ProjectionEncoder } from "../src/encoder.js";
import { exportBank } from "../src/export.js";
import { writeDataset } from "./helpers.js";

const PYTHON = process.env.GACOOP_PYTHON ?? "python3";

const CONFIG = `
seed = 11
d_embed = 64
d_token = 4
ctx_len = 4
epochs = 4
batch_size = 4
tau = 0.05
k_rank = 1
`;

function runPython(args: string[], cwd: string): { stdout: string; stderr: string } {
  try {
    const stdout = execFileSync(PYTHON, args, { cwd, encoding: "utf-8", stdio: "pipe" });
    return { stdout, stderr: "" };
  } catch (err: any) {
    throw new Error(
      `${PYTHON} ${args.join(" ")} failed (code ${err.status}):\n${err.stderr ?? err.message}`
    );
  }
}

let tmp: string;

beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "fbnk-integration-"));
  writeDataset(path.join(tmp, "images", "id"), {
    classes: { canyon: 6, forest: 6 },
    seed: 21n,
  });
  writeDataset(path.join(tmp, "images", "ood"), {
    classes: { static: 5 },
    seed: 77n,
  });
  const backend = () => new ProjectionEncoder({ seed: 11n, dEmbed: 64, grid: 3 });
  const data = path.join(tmp, "data");
  fs.mkdirSync(data, { recursive: true });
  const quiet = () => {};
  exportBank(
    {
      imagesDir: path.join(tmp, "images", "id"),
      outPath: path.join(data, "train.fbnk"),
      split: "train",
      shots: 4,
      backend: backend(),
    },
    quiet
  );
  exportBank(
    {
      imagesDir: path.join(tmp, "images", "id"),
      outPath: path.join(data, "id_test.fbnk"),
      split: "id_test",
      shots: 0,
      backend: backend(),
    },
    quiet
  );
  exportBank(
    {
      imagesDir: path.join(tmp, "images", "ood"),
      outPath: path.join(data, "ood_export.fbnk"),
      split: "ood",
      shots: 0,
      backend: backend(),
    },
    quiet
  );
  fs.writeFileSync(path.join(tmp, "run.cfg"), CONFIG);
}, 60_000);

afterAll(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

describe("harness interoperability", () => {
  it("banks load through the harness reader with zero invariant warnings", () => {
    const script = [
      "-W",
      "error::UserWarning", // any loader warning becomes a hard failure
      "-c",
      [
        "from gacoop.data_io import read_bank",
        `train = read_bank(r'${path.join(tmp, "data", "train.fbnk")}')`,
        `id_test = read_bank(r'${path.join(tmp, "data", "id_test.fbnk")}')`,
        `ood = read_bank(r'${path.join(tmp, "data", "ood_export.fbnk")}')`,
        "assert train.n_samples == 8 and train.n_classes == 2",
        "assert train.n_regions == 9 and train.d_embed == 64",
        "assert id_test.n_samples == 12",
        "assert all(l == -1 for l in ood.labels.tolist())",
        "print('LOADED_OK')",
      ].join("\n"),
    ];
    const { stdout } = runPython(script, tmp);
    expect(stdout).toContain("LOADED_OK");
  }, 30_000);

  it("full train + eval cycle on exported banks completes", () => {
    const data = path.join(tmp, "data");
    const ckpt = path.join(tmp, "out", "ckpt.fbnk");
    runPython(
      [
        "-m", "gacoop.cli", "train",
        "--config", path.join(tmp, "run.cfg"),
        "--data-dir", data,
        "--strategy", "gacoop",
        "--out", ckpt,
        "--no-figures",
      ],
      tmp
    );
    expect(fs.existsSync(ckpt)).toBe(true);
    const report = path.join(tmp, "out", "report.csv");
    runPython(
      [
        "-m", "gacoop.cli", "eval",
        "--checkpoint", ckpt,
        "--data-dir", data,
        "--out", report,
        "--no-figures",
      ],
      tmp
    );
    const rows = fs.readFileSync(report, "utf-8").trim().split("\n");
    expect(rows[0]).toBe("strategy,dataset,fpr95,auroc,id_acc,conflict_ratio,seed");
    expect(rows.some((r) => r.startsWith("gacoop,ood_export,"))).toBe(true);
    expect(rows.some((r) => r.startsWith("gacoop,average,"))).toBe(true);
    for (const row of rows.slice(1)) {
      const [, , fpr95, auroc, idAcc] = row.split(",");
      for (const v of [fpr95, auroc, idAcc]) {
        const x = Number(v);
        expect(Number.isFinite(x)).toBe(true);
        expect(x).toBeGreaterThanOrEqual(0);
        expect(x).toBeLessThanOrEqual(1);
      }
    }
  }, 120_000);
});
