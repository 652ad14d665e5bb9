/**
 * FBNK feature-bank container, byte-compatible with the harness loader.
 *
 * Little-endian throughout: magic "FBNK", u32 version = 1, u8 section
 * (0 = bank), then u32 n_samples, u32 n_regions, u32 d_embed,
 * u32 n_classes, u8 split (0 train / 1 id_test / 2 ood),
 * i32[n] labels (-1 = OOD), f32[n*d] globals, f32[n*R*d] regions.
 */

export const MAGIC = "FBNK";
export const VERSION = 1;

export type Split = "train" | "id_test" | "ood";
const SPLITS: Split[] = ["train", "id_test", "ood"];

export interface Bank {
  labels: Int32Array;
  globals: Float32Array; // n * dEmbed row-major
  regions: Float32Array; // n * nRegions * dEmbed
  nRegions: number;
  dEmbed: number;
  nClasses: number;
  split: Split;
}

export function encodeBank(bank: Bank): Buffer {
  const n = bank.labels.length;
  if (bank.globals.length !== n * bank.dEmbed) {
    throw new Error(`globals length ${bank.globals.length} != ${n} * ${bank.dEmbed}`);
  }
  if (bank.regions.length !== n * bank.nRegions * bank.dEmbed) {
    throw new Error("regions length does not match declared shape");
  }
  const out = Buffer.alloc(26 + 4 * (n + bank.globals.length + bank.regions.length));
  out.write(MAGIC, 0, "ascii");
  out.writeUInt32LE(VERSION, 4);
  out.writeUInt8(0, 8);
  out.writeUInt32LE(n, 9);
  out.writeUInt32LE(bank.nRegions, 13);
  out.writeUInt32LE(bank.dEmbed, 17);
  out.writeUInt32LE(bank.nClasses, 21);
  out.writeUInt8(SPLITS.indexOf(bank.split), 25);
  let off = 26;
  for (let i = 0; i < n; i++, off += 4) out.writeInt32LE(bank.labels[i], off);
  for (let i = 0; i < bank.globals.length; i++, off += 4) {
    out.writeFloatLE(bank.globals[i], off);
  }
  for (let i = 0; i < bank.regions.length; i++, off += 4) {
    out.writeFloatLE(bank.regions[i], off);
  }
  return out;
}

export function decodeBank(data: Buffer): Bank {
  if (data.length < 26) throw new Error("truncated header");
  if (data.toString("ascii", 0, 4) !== MAGIC) throw new Error("bad magic");
  if (data.readUInt32LE(4) !== VERSION) throw new Error("unsupported version");
  if (data.readUInt8(8) !== 0) throw new Error("not a bank section");
  const n = data.readUInt32LE(9);
  const r = data.readUInt32LE(13);
  const d = data.readUInt32LE(17);
  const nClasses = data.readUInt32LE(21);
  const splitTag = data.readUInt8(25);
  if (splitTag >= SPLITS.length) throw new Error(`unknown split tag ${splitTag}`);
  const expect = 26 + 4 * n + 4 * n * d + 4 * n * r * d;
  if (data.length !== expect) {
    throw new Error(`payload is ${data.length} bytes, expected ${expect}`);
  }
  let off = 26;
  const labels = new Int32Array(n);
  for (let i = 0; i < n; i++, off += 4) labels[i] = data.readInt32LE(off);
  const globals = new Float32Array(n * d);
  for (let i = 0; i < globals.length; i++, off += 4) globals[i] = data.readFloatLE(off);
  const regions = new Float32Array(n * r * d);
  for (let i = 0; i < regions.length; i++, off += 4) regions[i] = data.readFloatLE(off);
  return { labels, globals, regions, nRegions: r, dEmbed: d, nClasses, split: SPLITS[splitTag] };
}
