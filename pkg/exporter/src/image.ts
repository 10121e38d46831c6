/**
 * Binary netpbm readers: P6 (RGB) and P5 (gray, replicated to RGB).
 *
 * Header tokens may be separated by any whitespace and '#' comments; the
 * raster begins after exactly one whitespace byte following maxval. Only
 * 8-bit (maxval 255) rasters are accepted; values map to [0, 1] as u/255.
 */

export class ImageFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ImageFormatError';
  }
}

export interface RgbImage {
  height: number;
  width: number;
  /** h*w*3 floats, row-major, channel-minor. */
  data: Float32Array;
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

function nextToken(buf: Buffer, pos: number): [string, number] {
  while (pos < buf.length) {
    const b = buf[pos];
    if (WHITESPACE.has(b)) {
      pos += 1;
    } else if (b === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos += 1;
    } else {
      break;
    }
  }
  const start = pos;
  while (pos < buf.length && !WHITESPACE.has(buf[pos]) && buf[pos] !== 0x23) {
    pos += 1;
  }
  if (start === pos) {
    throw new ImageFormatError('unexpected end of header');
  }
  return [buf.subarray(start, pos).toString('ascii'), pos];
}

export function readNetpbm(buf: Buffer): RgbImage {
  let [magic, pos] = nextToken(buf, 0);
  if (magic !== 'P6' && magic !== 'P5') {
    throw new ImageFormatError(`expected P6 or P5, got ${JSON.stringify(magic)}`);
  }
  const channels = magic === 'P6' ? 3 : 1;
  let w: string, h: string, maxval: string;
  [w, pos] = nextToken(buf, pos);
  [h, pos] = nextToken(buf, pos);
  [maxval, pos] = nextToken(buf, pos);
  const width = Number(w);
  const height = Number(h);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new ImageFormatError(`bad dimensions ${w} x ${h}`);
  }
  if (maxval !== '255') {
    throw new ImageFormatError(`only maxval 255 is supported, got ${maxval}`);
  }
  pos += 1; // the single whitespace byte before the raster
  const count = width * height * channels;
  if (buf.length < pos + count) {
    throw new ImageFormatError(
      `raster needs ${count} bytes, only ${buf.length - pos} present`,
    );
  }
  const data = new Float32Array(width * height * 3);
  if (channels === 3) {
    for (let i = 0; i < count; i++) {
      data[i] = buf[pos + i] / 255;
    }
  } else {
    for (let i = 0; i < width * height; i++) {
      const v = buf[pos + i] / 255;
      data[3 * i] = v;
      data[3 * i + 1] = v;
      data[3 * i + 2] = v;
    }
  }
  return { height, width, data };
}

export function writePpm(img: RgbImage): Buffer {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, 'ascii');
  const raster = Buffer.alloc(img.height * img.width * 3);
  for (let i = 0; i < raster.length; i++) {
    raster[i] = Math.round(img.data[i] * 255);
  }
  return Buffer.concat([header, raster]);
}
