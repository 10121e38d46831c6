/**
 * Export manifest: which model to run, what its channels mean, and the
 * image -> tensor pairs to produce.
 *
 * `classes[i]` labels the model's output channel i; `backgroundIndex`
 * says which of those channels is background. Exported tensors always
 * carry the non-background channels in class-list order with background
 * moved to the last channel, so downstream readers never need
 * model-specific layout knowledge.
 */

export interface ExportItem {
  image: string;
  tensor: string;
}

export interface ExportManifest {
  model: string;
  outputs: 'logits' | 'probabilities';
  classes: string[];
  backgroundIndex: number;
  items: ExportItem[];
}

export class ManifestError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ManifestError';
  }
}

function fail(message: string): never {
  throw new ManifestError(message);
}

export function parseManifest(raw: unknown): ExportManifest {
  if (typeof raw !== 'object' || raw === null) fail('manifest must be an object');
  const m = raw as Record<string, unknown>;
  if (typeof m.model !== 'string' || m.model.length === 0) {
    fail('model must be a nonempty string');
  }
  if (m.outputs !== 'logits' && m.outputs !== 'probabilities') {
    fail(`outputs must be "logits" or "probabilities", got ${JSON.stringify(m.outputs)}`);
  }
  if (!Array.isArray(m.classes) || m.classes.length < 2) {
    fail('classes must list at least two channel labels');
  }
  if (!m.classes.every((c) => typeof c === 'string')) {
    fail('classes must be strings');
  }
  if (new Set(m.classes).size !== m.classes.length) {
    fail('class labels must be distinct');
  }
  const bg = m.backgroundIndex;
  if (typeof bg !== 'number' || !Number.isInteger(bg) || bg < 0 || bg >= m.classes.length) {
    fail(`backgroundIndex must index into classes, got ${JSON.stringify(bg)}`);
  }
  if (!Array.isArray(m.items)) fail('items must be an array');
  const items = m.items.map((it, i) => {
    if (typeof it !== 'object' || it === null) fail(`item ${i} must be an object`);
    const e = it as Record<string, unknown>;
    if (typeof e.image !== 'string' || typeof e.tensor !== 'string') {
      fail(`item ${i} needs string "image" and "tensor" paths`);
    }
    return { image: e.image, tensor: e.tensor };
  });
  return {
    model: m.model,
    outputs: m.outputs,
    classes: m.classes as string[],
    backgroundIndex: bg,
    items,
  };
}

/**
 * Output-channel order: model channels excluding background, in class-list
 * order, then the background channel. Index j of the result is the model
 * channel that lands in output channel j.
 */
export function channelPermutation(manifest: ExportManifest): number[] {
  const order: number[] = [];
  for (let i = 0; i < manifest.classes.length; i++) {
    if (i !== manifest.backgroundIndex) order.push(i);
  }
  order.push(manifest.backgroundIndex);
  return order;
}
