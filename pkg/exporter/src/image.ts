/**
 * Image decoding (PNG, binary PPM) and the deterministic preprocessing
 * pipeline: bilinear resize of the shorter side to the target, then a
 * center crop. Pixels are RGB doubles in [0, 1].
 */

import { PNG } from "pngjs";

export interface RgbImage {
  width: number;
  height: number;
  /** RGB row-major, 3 doubles per pixel, values in [0, 1]. */
  data: Float64Array;
}

export class DecodeError extends Error {}

export function decodeImage(buffer: Buffer, name: string): RgbImage {
  if (buffer.length >= 8 && buffer.readUInt32BE(0) === 0x89504e47) {
    return decodePng(buffer, name);
  }
  if (buffer.length >= 2 && buffer.toString("ascii", 0, 2) === "P6") {
    return decodePpm(buffer, name);
  }
  throw new DecodeError(`${name}: not a PNG or binary PPM file`);
}

function decodePng(buffer: Buffer, name: string): RgbImage {
  let png: PNG;
  try {
    png = PNG.sync.read(buffer);
  } catch (err) {
    throw new DecodeError(`${name}: ${(err as Error).message}`);
  }
  const out = new Float64Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    out[3 * i] = png.data[4 * i] / 255;
    out[3 * i + 1] = png.data[4 * i + 1] / 255;
    out[3 * i + 2] = png.data[4 * i + 2] / 255;
  }
  return { width: png.width, height: png.height, data: out };
}

function decodePpm(buffer: Buffer, name: string): RgbImage {
  // P6 <width> <height> <maxval> followed by binary RGB triples
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < buffer.length && /\s/.test(String.fromCharCode(buffer[pos]))) pos++;
    if (pos < buffer.length && String.fromCharCode(buffer[pos]) === "#") {
      while (pos < buffer.length && buffer[pos] !== 0x0a) pos++;
      continue;
    }
    let token = "";
    while (pos < buffer.length && !/\s/.test(String.fromCharCode(buffer[pos]))) {
      token += String.fromCharCode(buffer[pos++]);
    }
    const value = Number(token);
    if (!Number.isInteger(value) || value <= 0) {
      throw new DecodeError(`${name}: bad PPM header token "${token}"`);
    }
    fields.push(value);
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = fields;
  if (maxval > 255) throw new DecodeError(`${name}: 16-bit PPM not supported`);
  const need = width * height * 3;
  if (buffer.length - pos < need) {
    throw new DecodeError(`${name}: truncated PPM payload`);
  }
  const out = new Float64Array(need);
  for (let i = 0; i < need; i++) out[i] = buffer[pos + i] / maxval;
  return { width, height, data: out };
}

function sampleBilinear(img: RgbImage, x: number, y: number, c: number): number {
  const x0 = Math.max(0, Math.min(img.width - 1, Math.floor(x)));
  const y0 = Math.max(0, Math.min(img.height - 1, Math.floor(y)));
  const x1 = Math.min(img.width - 1, x0 + 1);
  const y1 = Math.min(img.height - 1, y0 + 1);
  const fx = Math.min(Math.max(x - x0, 0), 1);
  const fy = Math.min(Math.max(y - y0, 0), 1);
  const at = (xx: number, yy: number) => img.data[3 * (yy * img.width + xx) + c];
  const top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
  const bottom = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
  return top * (1 - fy) + bottom * fy;
}

export function resize(img: RgbImage, width: number, height: number): RgbImage {
  const out = new Float64Array(width * height * 3);
  for (let y = 0; y < height; y++) {
    const sy = ((y + 0.5) * img.height) / height - 0.5;
    for (let x = 0; x < width; x++) {
      const sx = ((x + 0.5) * img.width) / width - 0.5;
      for (let c = 0; c < 3; c++) {
        out[3 * (y * width + x) + c] = sampleBilinear(img, sx, sy, c);
      }
    }
  }
  return { width, height, data: out };
}

export function centerCrop(img: RgbImage, size: number): RgbImage {
  const x0 = Math.floor((img.width - size) / 2);
  const y0 = Math.floor((img.height - size) / 2);
  const out = new Float64Array(size * size * 3);
  for (let y = 0; y < size; y++) {
    for (let x = 0; x < size; x++) {
      for (let c = 0; c < 3; c++) {
        out[3 * (y * size + x) + c] = img.data[3 * ((y0 + y) * img.width + (x0 + x)) + c];
      }
    }
  }
  return { width: size, height: size, data: out };
}

/** Resize shorter side to `size`, then center crop to size x size. */
export function preprocess(img: RgbImage, size: number): RgbImage {
  const scale = size / Math.min(img.width, img.height);
  const w = Math.max(size, Math.round(img.width * scale));
  const h = Math.max(size, Math.round(img.height * scale));
  return centerCrop(resize(img, w, h), size);
}
