/** Minimal RIFF/WAVE codec: 16-bit PCM and 32-bit IEEE float, mono or stereo. */

import { readFileSync, writeFileSync } from "node:fs";

export interface WavData {
  sampleRate: number;
  /** mono samples in [-1, 1]; stereo inputs are averaged to mono */
  samples: Float64Array;
  channels: number;
}

export function readWav(path: string): WavData {
  const buf = readFileSync(path);
  if (buf.length < 12 || buf.toString("ascii", 0, 4) !== "RIFF" || buf.toString("ascii", 8, 12) !== "WAVE") {
    throw new Error(`${path}: not a RIFF/WAVE file`);
  }
  let offset = 12;
  let format = 0;
  let channels = 0;
  let sampleRate = 0;
  let bitsPerSample = 0;
  let data: Buffer | null = null;
  while (offset + 8 <= buf.length) {
    const chunkId = buf.toString("ascii", offset, offset + 4);
    const chunkSize = buf.readUInt32LE(offset + 4);
    const body = offset + 8;
    if (chunkId === "fmt ") {
      format = buf.readUInt16LE(body);
      channels = buf.readUInt16LE(body + 2);
      sampleRate = buf.readUInt32LE(body + 4);
      bitsPerSample = buf.readUInt16LE(body + 14);
    } else if (chunkId === "data") {
      data = buf.subarray(body, body + chunkSize);
    }
    offset = body + chunkSize + (chunkSize % 2);
  }
  if (data === null || channels < 1) {
    throw new Error(`${path}: missing fmt or data chunk`);
  }
  let interleaved: Float64Array;
  if (format === 1 && bitsPerSample === 16) {
    const n = Math.floor(data.length / 2);
    interleaved = new Float64Array(n);
    for (let i = 0; i < n; i++) interleaved[i] = data.readInt16LE(2 * i) / 32768;
  } else if (format === 3 && bitsPerSample === 32) {
    const n = Math.floor(data.length / 4);
    interleaved = new Float64Array(n);
    for (let i = 0; i < n; i++) interleaved[i] = data.readFloatLE(4 * i);
  } else {
    throw new Error(`${path}: unsupported WAV encoding (format=${format}, bits=${bitsPerSample})`);
  }
  const frames = Math.floor(interleaved.length / channels);
  const samples = new Float64Array(frames);
  for (let i = 0; i < frames; i++) {
    let acc = 0;
    for (let c = 0; c < channels; c++) acc += interleaved[i * channels + c];
    samples[i] = Math.min(1, Math.max(-1, acc / channels));
  }
  return { sampleRate, samples, channels };
}

export function writeWavFloat32(path: string, samples: Float64Array | number[], sampleRate: number): void {
  const n = samples.length;
  const dataSize = 4 * n;
  const buf = Buffer.alloc(44 + dataSize);
  buf.write("RIFF", 0, "ascii");
  buf.writeUInt32LE(36 + dataSize, 4);
  buf.write("WAVE", 8, "ascii");
  buf.write("fmt ", 12, "ascii");
  buf.writeUInt32LE(16, 16);
  buf.writeUInt16LE(3, 20); // IEEE float
  buf.writeUInt16LE(1, 22);
  buf.writeUInt32LE(sampleRate, 24);
  buf.writeUInt32LE(sampleRate * 4, 28);
  buf.writeUInt16LE(4, 32);
  buf.writeUInt16LE(32, 34);
  buf.write("data", 36, "ascii");
  buf.writeUInt32LE(dataSize, 40);
  for (let i = 0; i < n; i++) buf.writeFloatLE(Math.fround(samples[i] as number), 44 + 4 * i);
  writeFileSync(path, buf);
}
