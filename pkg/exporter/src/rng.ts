/**
 * Counter-based splitmix64, matching the harness PRNG bit for bit.
 *
 * Raw output k (k = 1, 2, ...) of a generator seeded with `seed` is
 * mix64((seed + k * 0x9E3779B97F4A7C15) mod 2^64) where mix64 is the
 * splitmix64 finalizer. Doubles in [0, 1) are (raw >> 11) * 2^-53; normals
 * are Box-Muller pairs drawn from (u1 in (0,1], u2 in [0,1)).
 * derive(master, stream) = raw output (stream + 1) of `master`.
 */

const MASK = (1n << 64n) - 1n;
export const GOLDEN = 0x9e3779b97f4a7c15n;
const MIX_A = 0xbf58476d1ce4e5b9n;
const MIX_B = 0x94d049bb133111ebn;
const INV_2_53 = 2 ** -53;

export function mix64(z: bigint): bigint {
  z &= MASK;
  z = ((z ^ (z >> 30n)) * MIX_A) & MASK;
  z = ((z ^ (z >> 27n)) * MIX_B) & MASK;
  return z ^ (z >> 31n);
}

export function deriveSeed(master: bigint, stream: bigint): bigint {
  return mix64((master + (stream + 1n) * GOLDEN) & MASK);
}

export class SeededRng {
  private counter = 0n;

  constructor(readonly seed: bigint) {
    this.seed = seed & MASK;
  }

  nextU64(): bigint {
    this.counter += 1n;
    return mix64((this.seed + this.counter * GOLDEN) & MASK);
  }

  /** Uniform double in [0, 1). */
  uniform(): number {
    return Number(this.nextU64() >> 11n) * INV_2_53;
  }

  uniformIn(low: number, high: number): number {
    return low + (high - low) * this.uniform();
  }

  /** n standard normals; a trailing sin-value is discarded when n is odd. */
  normals(n: number): Float64Array {
    const out = new Float64Array(n);
    const pairs = Math.ceil(n / 2);
    let k = 0;
    for (let i = 0; i < pairs; i++) {
      const u1 = (Number(this.nextU64() >> 11n) + 1) * INV_2_53;
      const u2 = Number(this.nextU64() >> 11n) * INV_2_53;
      const r = Math.sqrt(-2 * Math.log(u1));
      const theta = 2 * Math.PI * u2;
      if (k < n) out[k++] = r * Math.cos(theta);
      if (k < n) out[k++] = r * Math.sin(theta);
    }
    return out;
  }
}
