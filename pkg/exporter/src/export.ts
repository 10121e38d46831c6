/**
 * The export operation: run every manifest item through the model and
 * write one OIDT tensor per input, channels reordered to background-last.
 *
 * Softmax is applied to the model's native channel layout (only when the
 * manifest declares logits); the permutation afterwards moves values
 * without recomputing them, so two exports of the same model differing
 * only in declared layout differ only by that permutation.
 */

import * as tf from '@tensorflow/tfjs';
import { promises as fs } from 'fs';
import * as path from 'path';

import { readNetpbm } from './image.js';
import {
  channelPermutation,
  parseManifest,
  type ExportManifest,
} from './manifest.js';
import { loadModel } from './model.js';
import { DTYPE_FLOAT32, tensorToBytes } from './oidt.js';

export class ChannelMismatch extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ChannelMismatch';
  }
}

export class SimplexViolation extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'SimplexViolation';
  }
}

const SIMPLEX_TOL = 1e-5;

export interface ExportResult {
  written: string[];
  manifestCopy: string;
}

function checkSimplex(values: Float32Array, channels: number, context: string): void {
  for (let p = 0; p < values.length; p += channels) {
    let sum = 0;
    for (let c = 0; c < channels; c++) {
      const v = values[p + c];
      if (!(v >= 0)) {
        throw new SimplexViolation(
          `${context}: channel value ${v} at pixel ${p / channels} is negative; ` +
            'is the manifest declaring logits as probabilities?',
        );
      }
      sum += v;
    }
    if (Math.abs(sum - 1) > SIMPLEX_TOL) {
      throw new SimplexViolation(
        `${context}: channel sum ${sum} at pixel ${p / channels} is off the simplex; ` +
          'is the manifest declaring logits as probabilities?',
      );
    }
  }
}

function permuteChannels(
  values: Float32Array,
  channels: number,
  order: number[],
): Float32Array {
  const out = new Float32Array(values.length);
  const pixels = values.length / channels;
  for (let p = 0; p < pixels; p++) {
    for (let j = 0; j < channels; j++) {
      out[p * channels + j] = values[p * channels + order[j]];
    }
  }
  return out;
}

async function runOne(
  model: tf.LayersModel,
  manifest: ExportManifest,
  imagePath: string,
): Promise<{ dims: number[]; values: Float32Array }> {
  const img = readNetpbm(await fs.readFile(imagePath));
  const channels = manifest.classes.length;
  const scores = tf.tidy(() => {
    const input = tf.tensor4d(img.data, [1, img.height, img.width, 3]);
    let out = model.predict(input) as tf.Tensor;
    out = out.squeeze([0]);
    if (out.rank !== 3) {
      throw new ChannelMismatch(`model emitted rank-${out.rank + 1} output, expected NHWC`);
    }
    if (out.shape[2] !== channels) {
      throw new ChannelMismatch(
        `model emits ${out.shape[2]} channels, manifest lists ${channels} classes`,
      );
    }
    return manifest.outputs === 'logits' ? tf.softmax(out, -1) : out;
  });
  const values = (await scores.data()) as Float32Array;
  const dims = scores.shape as number[];
  scores.dispose();
  checkSimplex(values, channels, path.basename(imagePath));
  return { dims, values: permuteChannels(values, channels, channelPermutation(manifest)) };
}

export async function exportManifest(
  manifestPath: string,
  outDir: string,
): Promise<ExportResult> {
  const text = await fs.readFile(manifestPath, 'utf8');
  const manifest = parseManifest(JSON.parse(text));
  const baseDir = path.dirname(manifestPath);
  const model = await loadModel(path.resolve(baseDir, manifest.model));
  await fs.mkdir(outDir, { recursive: true });
  const written: string[] = [];
  for (const item of manifest.items) {
    const { dims, values } = await runOne(
      model,
      manifest,
      path.resolve(baseDir, item.image),
    );
    const target = path.resolve(outDir, item.tensor);
    await fs.mkdir(path.dirname(target), { recursive: true });
    await fs.writeFile(target, tensorToBytes({ dtype: DTYPE_FLOAT32, dims, data: values }));
    written.push(target);
  }
  const manifestCopy = path.join(outDir, 'manifest.json');
  await fs.writeFile(manifestCopy, text);
  return { written, manifestCopy };
}
