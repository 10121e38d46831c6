/**
 * Load and save tfjs layers models on the local filesystem.
 *
 * tfjs ships file:// IO handlers only in its node binding; this package
 * stays on the pure-JS runtime, so the handlers here read and write the
 * standard model.json + weights.bin layout directly.
 */

import * as tf from '@tensorflow/tfjs';
import { promises as fs } from 'fs';
import * as path from 'path';

export class ModelLoadError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ModelLoadError';
  }
}

interface ModelJson {
  modelTopology: object;
  weightsManifest: { paths: string[]; weights: tf.io.WeightsManifestEntry[] }[];
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  let artifacts: tf.io.ModelArtifacts;
  try {
    const raw = JSON.parse(
      await fs.readFile(path.join(dir, 'model.json'), 'utf8'),
    ) as ModelJson;
    const specs: tf.io.WeightsManifestEntry[] = [];
    const buffers: Buffer[] = [];
    for (const group of raw.weightsManifest) {
      specs.push(...group.weights);
      for (const p of group.paths) {
        buffers.push(await fs.readFile(path.join(dir, p)));
      }
    }
    const blob = Buffer.concat(buffers);
    artifacts = {
      modelTopology: raw.modelTopology,
      weightSpecs: specs,
      weightData: blob.buffer.slice(
        blob.byteOffset,
        blob.byteOffset + blob.byteLength,
      ),
    };
  } catch (e) {
    throw new ModelLoadError(`cannot read model from ${dir}: ${(e as Error).message}`);
  }
  try {
    return await tf.loadLayersModel(tf.io.fromMemory(artifacts));
  } catch (e) {
    throw new ModelLoadError(`cannot build model from ${dir}: ${(e as Error).message}`);
  }
}

export async function saveModel(dir: string, model: tf.LayersModel): Promise<void> {
  await fs.mkdir(dir, { recursive: true });
  await model.save(
    tf.io.withSaveHandler(async (artifacts) => {
      const weightData = artifacts.weightData as ArrayBuffer;
      await fs.writeFile(path.join(dir, 'weights.bin'), Buffer.from(weightData));
      const json: ModelJson = {
        modelTopology: artifacts.modelTopology as object,
        weightsManifest: [
          { paths: ['weights.bin'], weights: artifacts.weightSpecs ?? [] },
        ],
      };
      await fs.writeFile(path.join(dir, 'model.json'), JSON.stringify(json));
      return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } };
    }),
  );
}
