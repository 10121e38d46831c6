/**
 * OIDT binary tensor format.
 *
 * Layout, all little-endian:
 *   magic "OIDT" | version u8 (1) | dtype u8 (0 float32, 1 uint8) |
 *   ndim u8 | dims u32 each | payload, row-major.
 * Records may be concatenated in one file. Errors carry the byte offset
 * at which the problem was detected.
 */

export const MAGIC = Buffer.from('OIDT', 'ascii');
export const VERSION = 1;
export const DTYPE_FLOAT32 = 0;
export const DTYPE_UINT8 = 1;

const MAX_PAYLOAD = 1 << 30; // refuse absurd dims before allocating

export interface Tensor {
  dtype: number;
  dims: number[];
  data: Float32Array | Uint8Array;
}

export class TensorFormatError extends Error {
  readonly offset: number;

  constructor(message: string, offset: number) {
    super(`${message} (at byte ${offset})`);
    this.name = 'TensorFormatError';
    this.offset = offset;
  }
}

function elementCount(dims: number[]): number {
  return dims.reduce((a, b) => a * b, 1);
}

export function tensorToBytes(t: Tensor): Buffer {
  if (t.dtype !== DTYPE_FLOAT32 && t.dtype !== DTYPE_UINT8) {
    throw new TensorFormatError(`unknown dtype code ${t.dtype}`, 5);
  }
  if (t.dims.some((d) => d < 1 || !Number.isInteger(d))) {
    throw new TensorFormatError(`dims must be positive integers: ${t.dims}`, 7);
  }
  const count = elementCount(t.dims);
  if (count !== t.data.length) {
    throw new TensorFormatError(
      `dims ${t.dims} imply ${count} elements, data has ${t.data.length}`,
      7,
    );
  }
  const itemSize = t.dtype === DTYPE_FLOAT32 ? 4 : 1;
  const buf = Buffer.alloc(7 + 4 * t.dims.length + itemSize * count);
  MAGIC.copy(buf, 0);
  buf.writeUInt8(VERSION, 4);
  buf.writeUInt8(t.dtype, 5);
  buf.writeUInt8(t.dims.length, 6);
  let off = 7;
  for (const d of t.dims) {
    buf.writeUInt32LE(d, off);
    off += 4;
  }
  if (t.dtype === DTYPE_FLOAT32) {
    for (let i = 0; i < count; i++) {
      buf.writeFloatLE((t.data as Float32Array)[i], off + 4 * i);
    }
  } else {
    buf.set(t.data as Uint8Array, off);
  }
  return buf;
}

/** Parse one record; returns the tensor and the offset just past it. */
export function tensorFromBytes(buf: Buffer, offset = 0): [Tensor, number] {
  if (buf.length < offset + 7) {
    throw new TensorFormatError('truncated header', buf.length);
  }
  if (!buf.subarray(offset, offset + 4).equals(MAGIC)) {
    throw new TensorFormatError('bad magic', offset);
  }
  const version = buf.readUInt8(offset + 4);
  if (version !== VERSION) {
    throw new TensorFormatError(`unsupported version ${version}`, offset + 4);
  }
  const dtype = buf.readUInt8(offset + 5);
  if (dtype !== DTYPE_FLOAT32 && dtype !== DTYPE_UINT8) {
    throw new TensorFormatError(`unknown dtype code ${dtype}`, offset + 5);
  }
  const ndim = buf.readUInt8(offset + 6);
  let off = offset + 7;
  const dims: number[] = [];
  for (let i = 0; i < ndim; i++) {
    if (buf.length < off + 4) {
      throw new TensorFormatError('truncated dims', buf.length);
    }
    const d = buf.readUInt32LE(off);
    if (d === 0) {
      throw new TensorFormatError('zero-sized dimension', off);
    }
    dims.push(d);
    off += 4;
  }
  const count = elementCount(dims);
  const itemSize = dtype === DTYPE_FLOAT32 ? 4 : 1;
  if (count * itemSize > MAX_PAYLOAD) {
    throw new TensorFormatError(
      `payload of ${count * itemSize} bytes exceeds the 1 GiB guard`,
      offset + 7,
    );
  }
  if (buf.length < off + count * itemSize) {
    throw new TensorFormatError('truncated payload', buf.length);
  }
  let data: Float32Array | Uint8Array;
  if (dtype === DTYPE_FLOAT32) {
    data = new Float32Array(count);
    for (let i = 0; i < count; i++) {
      data[i] = buf.readFloatLE(off + 4 * i);
    }
  } else {
    data = Uint8Array.from(buf.subarray(off, off + count));
  }
  return [{ dtype, dims, data }, off + count * itemSize];
}
