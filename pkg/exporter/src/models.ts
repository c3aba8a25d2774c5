/**
 * Deterministic reference encoders.
 *
 * Real pretrained checkpoints cannot be fetched in offline environments,
 * so the model registry ships seeded random-projection encoders with the
 * contract dimensions (audio 128, video 1024). They are pure functions of
 * their input: re-exporting or duplicating a clip yields byte-identical
 * embeddings, which is what the downstream interop contract requires.
 */

import { EXAMPLE_FRAMES } from "./dsp";
import { FrameStackTensor, LogMelTensor } from "./tensors";

export interface EncoderModel {
  id: string;
  modality: "audio" | "video";
  outputDim: number;
}

export const MODEL_REGISTRY: Record<string, EncoderModel> = {
  "vggish-ref": { id: "vggish-ref", modality: "audio", outputDim: 128 },
  "i3d-ref": { id: "i3d-ref", modality: "video", outputDim: 1024 },
};

/** mulberry32: tiny deterministic PRNG, stable across platforms. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussianMatrix(rows: number, cols: number, seed: number): Float64Array {
  const rand = mulberry32(seed);
  const out = new Float64Array(rows * cols);
  const scale = 1.0 / Math.sqrt(cols);
  for (let i = 0; i < out.length; i += 2) {
    // Box-Muller
    const u1 = Math.max(rand(), 1e-12);
    const u2 = rand();
    const r = Math.sqrt(-2.0 * Math.log(u1));
    out[i] = r * Math.cos(2 * Math.PI * u2) * scale;
    if (i + 1 < out.length) out[i + 1] = r * Math.sin(2 * Math.PI * u2) * scale;
  }
  return out;
}

function project(matrix: Float64Array, rows: number, input: Float64Array): Float64Array {
  const cols = input.length;
  const out = new Float64Array(rows);
  for (let r = 0; r < rows; r++) {
    let acc = 0;
    const base = r * cols;
    for (let c = 0; c < cols; c++) acc += matrix[base + c] * input[c];
    out[r] = acc;
  }
  return out;
}

const AUDIO_SEED = 0x41554431; // "AUD1"
const VIDEO_SEED = 0x56494431; // "VID1"
const POOL_GRID = 16;

let audioMatrix: Float64Array | null = null;
let videoMatrix: Float64Array | null = null;

/** Clip-level audio embedding: mean over per-example projections. */
export function embedAudio(tensor: LogMelTensor): Float32Array {
  const dim = MODEL_REGISTRY["vggish-ref"].outputDim;
  const inDim = EXAMPLE_FRAMES * tensor.nMels;
  if (audioMatrix === null) audioMatrix = gaussianMatrix(dim, inDim, AUDIO_SEED);
  const nExamples = Math.floor(tensor.nFrames / EXAMPLE_FRAMES);
  if (nExamples === 0) {
    throw new Error(`clip ${tensor.clipId}: fewer than ${EXAMPLE_FRAMES} frames`);
  }
  const mean = new Float64Array(dim);
  for (let e = 0; e < nExamples; e++) {
    const patch = new Float64Array(inDim);
    const start = e * EXAMPLE_FRAMES * tensor.nMels;
    for (let i = 0; i < inDim; i++) patch[i] = tensor.cells[start + i];
    const projected = project(audioMatrix, dim, patch);
    for (let i = 0; i < dim; i++) mean[i] += projected[i];
  }
  const out = new Float32Array(dim);
  for (let i = 0; i < dim; i++) out[i] = Math.fround(mean[i] / nExamples);
  return out;
}

/** Clip-level video embedding: time mean, 16x16 block pool, projection. */
export function embedVideo(tensor: FrameStackTensor): Float32Array {
  const dim = MODEL_REGISTRY["i3d-ref"].outputDim;
  const [t, h, w, c] = tensor.shape;
  if (h !== w || h % POOL_GRID !== 0 || c !== 3) {
    throw new Error(`clip ${tensor.clipId}: unsupported stack shape ${tensor.shape}`);
  }
  const block = h / POOL_GRID;
  const pooled = new Float64Array(POOL_GRID * POOL_GRID * 3);
  for (let f = 0; f < t; f++) {
    for (let y = 0; y < h; y++) {
      const gy = Math.floor(y / block);
      for (let x = 0; x < w; x++) {
        const gx = Math.floor(x / block);
        const src = ((f * h + y) * w + x) * 3;
        const dst = (gy * POOL_GRID + gx) * 3;
        pooled[dst] += tensor.cells[src];
        pooled[dst + 1] += tensor.cells[src + 1];
        pooled[dst + 2] += tensor.cells[src + 2];
      }
    }
  }
  const cellCount = t * block * block;
  for (let i = 0; i < pooled.length; i++) pooled[i] /= cellCount;
  if (videoMatrix === null) videoMatrix = gaussianMatrix(dim, pooled.length, VIDEO_SEED);
  const projected = project(videoMatrix, dim, pooled);
  const out = new Float32Array(dim);
  for (let i = 0; i < dim; i++) out[i] = Math.fround(projected[i]);
  return out;
}
