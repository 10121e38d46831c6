export {
  DTYPE_FLOAT32,
  DTYPE_UINT8,
  TensorFormatError,
  tensorFromBytes,
  tensorToBytes,
  type Tensor,
} from './oidt.js';
export { ImageFormatError, readNetpbm, writePpm, type RgbImage } from './image.js';
export {
  ManifestError,
  channelPermutation,
  parseManifest,
  type ExportItem,
  type ExportManifest,
} from './manifest.js';
export { ModelLoadError, loadModel, saveModel } from './model.js';
export {
  ChannelMismatch,
  SimplexViolation,
  exportManifest,
  type ExportResult,
} from './export.js';
