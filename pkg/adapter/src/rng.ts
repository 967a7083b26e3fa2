/**
 * Deterministic random number generation for checkpoint initialization.
 *
 * mulberry32 is a tiny 32-bit PRNG with good statistical behaviour for
 * non-cryptographic use; combined with an FNV-1a hash of the tensor name it
 * gives every tensor its own reproducible stream, independent of the order
 * tensors are generated in.
 */

/** 32-bit FNV-1a hash of a string. */
export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

/** mulberry32: returns a generator of floats in [0, 1). */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let z = state;
    z = Math.imul(z ^ (z >>> 15), z | 1);
    z ^= z + Math.imul(z ^ (z >>> 7), z | 61);
    return ((z ^ (z >>> 14)) >>> 0) / 4294967296;
  };
}

/** Stream seeded by a global seed plus a per-tensor name hash. */
export function tensorStream(seed: number, name: string): () => number {
  return mulberry32((seed ^ fnv1a(name)) >>> 0);
}
