import { describe, expect, it } from "vitest";

import { Bank, decodeBank, encodeBank } from "../src/fbnk.js";

function sampleBank(): Bank {
  return {
    labels: Int32Array.from([0, 1, -1]),
    globals: Float32Array.from(Array.from({ length: 3 * 4 }, (_, i) => i / 10)),
    regions: Float32Array.from(Array.from({ length: 3 * 2 * 4 }, (_, i) => -i / 100)),
    nRegions: 2,
    dEmbed: 4,
    nClasses: 2,
    split: "ood",
  };
}

describe("FBNK container", () => {
  it("writes the documented header layout", () => {
    const buf = encodeBank(sampleBank());
    expect(buf.toString("ascii", 0, 4)).toBe("FBNK");
    expect(buf.readUInt32LE(4)).toBe(1); // version
    expect(buf.readUInt8(8)).toBe(0); // bank section
    expect(buf.readUInt32LE(9)).toBe(3); // n_samples
    expect(buf.readUInt32LE(13)).toBe(2); // n_regions
    expect(buf.readUInt32LE(17)).toBe(4); // d_embed
    expect(buf.readUInt32LE(21)).toBe(2); // n_classes
    expect(buf.readUInt8(25)).toBe(2); // ood split tag
    expect(buf.readInt32LE(26 + 8)).toBe(-1);
    expect(buf.length).toBe(26 + 4 * 3 + 4 * 12 + 4 * 24);
  });

  it("round-trips bit-exactly", () => {
    const bank = sampleBank();
    const decoded = decodeBank(encodeBank(bank));
    expect(Array.from(decoded.labels)).toEqual(Array.from(bank.labels));
    expect(Array.from(decoded.globals)).toEqual(Array.from(bank.globals));
    expect(Array.from(decoded.regions)).toEqual(Array.from(bank.regions));
    expect(decoded.split).toBe("ood");
    expect(encodeBank(decoded).equals(encodeBank(bank))).toBe(true);
  });

  it("rejects bad magic, version, truncation", () => {
    const buf = encodeBank(sampleBank());
    const badMagic = Buffer.from(buf);
    badMagic.write("NOPE", 0, "ascii");
    expect(() => decodeBank(badMagic)).toThrow(/magic/);
    const badVersion = Buffer.from(buf);
    badVersion.writeUInt32LE(9, 4);
    expect(() => decodeBank(badVersion)).toThrow(/version/);
    expect(() => decodeBank(buf.subarray(0, buf.length - 3))).toThrow(/expected/);
  });

  it("rejects mis-shaped inputs at encode time", () => {
    const bank = sampleBank();
    bank.globals = bank.globals.subarray(0, 5);
    expect(() => encodeBank(bank)).toThrow(/globals/);
  });
});
