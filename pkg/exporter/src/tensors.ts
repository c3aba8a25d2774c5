/**
 * Binary tensor formats shared with the Python toolkit, all little-endian.
 *
 * log-mel:     "AVLM" | u32 version=1 | u16 idLen | id | u32 F | u32 M | f32 cells
 * frame stack: "AVFS" | u32 version=1 | u16 idLen | id | u32 T,H,W,C | f32 cells
 * embeddings:  "AVFE" | u32 version=1 | u8 modality | u32 dim | u64 count |
 *              count * [u16 idLen | id | dim * f32]
 */

import { readFileSync, writeFileSync } from "node:fs";

export enum Modality {
  Audio = 0,
  Video = 1,
}

export interface LogMelTensor {
  clipId: string;
  nFrames: number;
  nMels: number;
  /** row-major (nFrames x nMels) */
  cells: Float32Array;
}

export interface FrameStackTensor {
  clipId: string;
  shape: [number, number, number, number];
  cells: Float32Array;
}

export interface Embedding {
  clipId: string;
  values: Float32Array;
}

function checkMagic(buf: Buffer, magic: string, path: string): void {
  if (buf.length < 8 || buf.toString("ascii", 0, 4) !== magic) {
    throw new Error(`${path}: bad magic, expected ${magic}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== 1) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
}

function readId(buf: Buffer, offset: number, path: string): [string, number] {
  if (offset + 2 > buf.length) throw new Error(`${path}: truncated id`);
  const idLen = buf.readUInt16LE(offset);
  offset += 2;
  if (offset + idLen > buf.length) throw new Error(`${path}: truncated id`);
  return [buf.toString("utf-8", offset, offset + idLen), offset + idLen];
}

function readF32(buf: Buffer, offset: number, count: number, path: string): Float32Array {
  if (offset + 4 * count > buf.length) throw new Error(`${path}: payload ends early`);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = buf.readFloatLE(offset + 4 * i);
  return out;
}

export function writeLogMel(path: string, tensor: LogMelTensor): void {
  const idBuf = Buffer.from(tensor.clipId, "utf-8");
  const buf = Buffer.alloc(8 + 2 + idBuf.length + 8 + 4 * tensor.cells.length);
  buf.write("AVLM", 0, "ascii");
  buf.writeUInt32LE(1, 4);
  buf.writeUInt16LE(idBuf.length, 8);
  idBuf.copy(buf, 10);
  let offset = 10 + idBuf.length;
  buf.writeUInt32LE(tensor.nFrames, offset);
  buf.writeUInt32LE(tensor.nMels, offset + 4);
  offset += 8;
  for (let i = 0; i < tensor.cells.length; i++) buf.writeFloatLE(tensor.cells[i], offset + 4 * i);
  writeFileSync(path, buf);
}

export function writeFrameStack(path: string, tensor: FrameStackTensor): void {
  const idBuf = Buffer.from(tensor.clipId, "utf-8");
  const buf = Buffer.alloc(8 + 2 + idBuf.length + 16 + 4 * tensor.cells.length);
  buf.write("AVFS", 0, "ascii");
  buf.writeUInt32LE(1, 4);
  buf.writeUInt16LE(idBuf.length, 8);
  idBuf.copy(buf, 10);
  let offset = 10 + idBuf.length;
  tensor.shape.forEach((dim, i) => buf.writeUInt32LE(dim, offset + 4 * i));
  offset += 16;
  for (let i = 0; i < tensor.cells.length; i++) buf.writeFloatLE(tensor.cells[i], offset + 4 * i);
  writeFileSync(path, buf);
}

export function readLogMel(path: string): LogMelTensor {
  const buf = readFileSync(path);
  checkMagic(buf, "AVLM", path);
  let offset = 8;
  let clipId: string;
  [clipId, offset] = readId(buf, offset, path);
  if (offset + 8 > buf.length) throw new Error(`${path}: truncated shape`);
  const nFrames = buf.readUInt32LE(offset);
  const nMels = buf.readUInt32LE(offset + 4);
  const cells = readF32(buf, offset + 8, nFrames * nMels, path);
  return { clipId, nFrames, nMels, cells };
}

export function readFrameStack(path: string): FrameStackTensor {
  const buf = readFileSync(path);
  checkMagic(buf, "AVFS", path);
  let offset = 8;
  let clipId: string;
  [clipId, offset] = readId(buf, offset, path);
  if (offset + 16 > buf.length) throw new Error(`${path}: truncated shape`);
  const shape: [number, number, number, number] = [
    buf.readUInt32LE(offset),
    buf.readUInt32LE(offset + 4),
    buf.readUInt32LE(offset + 8),
    buf.readUInt32LE(offset + 12),
  ];
  const cells = readF32(buf, offset + 16, shape[0] * shape[1] * shape[2] * shape[3], path);
  return { clipId, shape, cells };
}

export function writeEmbeddings(path: string, modality: Modality, records: Embedding[]): void {
  if (records.length === 0) throw new Error("cannot write an empty record list");
  const dim = records[0].values.length;
  let bodySize = 0;
  const idBufs = records.map((r) => {
    if (r.values.length !== dim) {
      throw new Error(`clip ${r.clipId}: dim ${r.values.length} != ${dim}`);
    }
    const idBuf = Buffer.from(r.clipId, "utf-8");
    bodySize += 2 + idBuf.length + 4 * dim;
    return idBuf;
  });
  const buf = Buffer.alloc(21 + bodySize);
  buf.write("AVFE", 0, "ascii");
  buf.writeUInt32LE(1, 4);
  buf.writeUInt8(modality, 8);
  buf.writeUInt32LE(dim, 9);
  buf.writeBigUInt64LE(BigInt(records.length), 13);
  let offset = 21;
  records.forEach((r, i) => {
    buf.writeUInt16LE(idBufs[i].length, offset);
    offset += 2;
    idBufs[i].copy(buf, offset);
    offset += idBufs[i].length;
    for (let j = 0; j < dim; j++) {
      buf.writeFloatLE(r.values[j], offset);
      offset += 4;
    }
  });
  writeFileSync(path, buf);
}

export function readEmbeddings(path: string): { modality: Modality; dim: number; records: Embedding[] } {
  const buf = readFileSync(path);
  checkMagic(buf, "AVFE", path);
  const modality = buf.readUInt8(8) as Modality;
  const dim = buf.readUInt32LE(9);
  const count = Number(buf.readBigUInt64LE(13));
  const records: Embedding[] = [];
  let offset = 21;
  for (let i = 0; i < count; i++) {
    let clipId: string;
    [clipId, offset] = readId(buf, offset, path);
    const values = readF32(buf, offset, dim, path);
    offset += 4 * dim;
    records.push({ clipId, values });
  }
  return { modality, dim, records };
}
