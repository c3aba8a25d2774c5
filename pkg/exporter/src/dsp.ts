/**
 * Reference log-mel frontend used for the cross-implementation parity
 * check: 16 kHz mono in, 25 ms periodic Hann window, 10 ms hop, 512-point
 * magnitude DFT, 64 HTK-mel triangular filters over 125-7500 Hz, then
 * ln(x + 0.01). Must agree with the Python frontend within 1e-3 per cell.
 */

export interface FrontendParams {
  sampleRate: number;
  windowLen: number;
  hopLen: number;
  fftSize: number;
  nMels: number;
  fminHz: number;
  fmaxHz: number;
  logOffset: number;
}

export const DEFAULT_FRONTEND: FrontendParams = {
  sampleRate: 16000,
  windowLen: 400,
  hopLen: 160,
  fftSize: 512,
  nMels: 64,
  fminHz: 125.0,
  fmaxHz: 7500.0,
  logOffset: 0.01,
};

export const EXAMPLE_FRAMES = 96;

function hzToMel(f: number): number {
  return 2595.0 * Math.log10(1.0 + f / 700.0);
}

export function melFilterMatrix(p: FrontendParams = DEFAULT_FRONTEND): Float64Array[] {
  const nBins = p.fftSize / 2 + 1;
  const lo = hzToMel(p.fminHz);
  const hi = hzToMel(p.fmaxHz);
  const edges: number[] = [];
  for (let i = 0; i < p.nMels + 2; i++) edges.push(lo + ((hi - lo) * i) / (p.nMels + 1));
  const rows: Float64Array[] = [];
  for (let m = 0; m < p.nMels; m++) {
    const row = new Float64Array(nBins);
    for (let b = 0; b < nBins; b++) {
      const melB = hzToMel((b * p.sampleRate) / p.fftSize);
      const rising = (melB - edges[m]) / (edges[m + 1] - edges[m]);
      const falling = (edges[m + 2] - melB) / (edges[m + 2] - edges[m + 1]);
      row[b] = Math.max(0, Math.min(rising, falling));
    }
    rows.push(row);
  }
  return rows;
}

/** Magnitude spectrogram via a direct DFT with a precomputed basis. */
export function stftMagnitude(samples: Float64Array, p: FrontendParams = DEFAULT_FRONTEND): Float64Array[] {
  if (samples.length < p.windowLen) {
    throw new Error(`input too short: ${samples.length} < ${p.windowLen}`);
  }
  const nBins = p.fftSize / 2 + 1;
  const window = new Float64Array(p.windowLen);
  for (let i = 0; i < p.windowLen; i++) window[i] = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / p.windowLen);
  const cos = new Float64Array(nBins * p.windowLen);
  const sin = new Float64Array(nBins * p.windowLen);
  for (let k = 0; k < nBins; k++) {
    for (let n = 0; n < p.windowLen; n++) {
      const angle = (-2 * Math.PI * k * n) / p.fftSize;
      cos[k * p.windowLen + n] = Math.cos(angle);
      sin[k * p.windowLen + n] = Math.sin(angle);
    }
  }
  const nFrames = Math.floor((samples.length - p.windowLen) / p.hopLen) + 1;
  const frames: Float64Array[] = [];
  for (let f = 0; f < nFrames; f++) {
    const start = f * p.hopLen;
    const out = new Float64Array(nBins);
    for (let k = 0; k < nBins; k++) {
      let re = 0;
      let im = 0;
      const base = k * p.windowLen;
      for (let n = 0; n < p.windowLen; n++) {
        const x = samples[start + n] * window[n];
        re += x * cos[base + n];
        im += x * sin[base + n];
      }
      out[k] = Math.hypot(re, im);
    }
    frames.push(out);
  }
  return frames;
}

export function logMel(samples: Float64Array, p: FrontendParams = DEFAULT_FRONTEND): Float64Array[] {
  const mags = stftMagnitude(samples, p);
  const filters = melFilterMatrix(p);
  return mags.map((frame) => {
    const out = new Float64Array(p.nMels);
    for (let m = 0; m < p.nMels; m++) {
      let acc = 0;
      const filt = filters[m];
      for (let b = 0; b < frame.length; b++) acc += filt[b] * frame[b];
      out[m] = Math.log(acc + p.logOffset);
    }
    return out;
  });
}

/** Cut an (F x 64) matrix into floor(F/96) non-overlapping example patches. */
export function frameExamples(logmel: Float64Array[], nMels: number): Float64Array[] {
  if (logmel.length < EXAMPLE_FRAMES) {
    throw new Error(`need at least ${EXAMPLE_FRAMES} frames, got ${logmel.length}`);
  }
  const count = Math.floor(logmel.length / EXAMPLE_FRAMES);
  const out: Float64Array[] = [];
  for (let i = 0; i < count; i++) {
    const patch = new Float64Array(EXAMPLE_FRAMES * nMels);
    for (let f = 0; f < EXAMPLE_FRAMES; f++) {
      patch.set(logmel[i * EXAMPLE_FRAMES + f], f * nMels);
    }
    out.push(patch);
  }
  return out;
}

export function maxAbsDiff(a: Float64Array[], b: Float64Array[]): number {
  if (a.length !== b.length) return Infinity;
  let worst = 0;
  for (let i = 0; i < a.length; i++) {
    if (a[i].length !== b[i].length) return Infinity;
    for (let j = 0; j < a[i].length; j++) {
      worst = Math.max(worst, Math.abs(a[i][j] - b[i][j]));
    }
  }
  return worst;
}
