import { mkdtempSync } from "node:fs";
import { readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  Embedding,
  Modality,
  readEmbeddings,
  readLogMel,
  writeEmbeddings,
  writeLogMel,
} from "../src/tensors";
import { readWav, writeWavFloat32 } from "../src/wav";

function tempDir(): string {
  return mkdtempSync(join(tmpdir(), "avfe-"));
}

describe("AVFE embedding format", () => {
  it("writes the documented byte layout exactly", () => {
    const dir = tempDir();
    const path = join(dir, "e.avfe");
    const values = new Float32Array([1.5, -2.25, 0.0]);
    writeEmbeddings(path, Modality.Audio, [{ clipId: "ab", values }]);

    // hand-built expectation: magic, u32 version, u8 modality, u32 dim,
    // u64 count, then u16 id length, id bytes, dim * f32
    const expected = Buffer.alloc(4 + 4 + 1 + 4 + 8 + 2 + 2 + 12);
    expected.write("AVFE", 0, "ascii");
    expected.writeUInt32LE(1, 4);
    expected.writeUInt8(0, 8);
    expected.writeUInt32LE(3, 9);
    expected.writeBigUInt64LE(1n, 13);
    expected.writeUInt16LE(2, 21);
    expected.write("ab", 23, "ascii");
    expected.writeFloatLE(1.5, 25);
    expected.writeFloatLE(-2.25, 29);
    expected.writeFloatLE(0.0, 33);
    expect(readFileSync(path).equals(expected)).toBe(true);
  });

  it("round-trips records losslessly", () => {
    const dir = tempDir();
    const path = join(dir, "e.avfe");
    const records: Embedding[] = [];
    for (let i = 0; i < 10; i++) {
      const values = new Float32Array(16);
      for (let j = 0; j < 16; j++) values[j] = Math.fround(Math.sin(i * 16 + j));
      records.push({ clipId: `clip-${i}`, values });
    }
    writeEmbeddings(path, Modality.Video, records);
    const back = readEmbeddings(path);
    expect(back.modality).toBe(Modality.Video);
    expect(back.dim).toBe(16);
    expect(back.records.length).toBe(10);
    back.records.forEach((r, i) => {
      expect(r.clipId).toBe(records[i].clipId);
      expect(Array.from(r.values)).toEqual(Array.from(records[i].values));
    });
  });

  it("rejects mixed dims", () => {
    const dir = tempDir();
    expect(() =>
      writeEmbeddings(join(dir, "bad.avfe"), Modality.Audio, [
        { clipId: "a", values: new Float32Array(4) },
        { clipId: "b", values: new Float32Array(5) },
      ]),
    ).toThrow(/dim/);
  });
});

describe("log-mel tensor files", () => {
  it("round-trips", () => {
    const dir = tempDir();
    const path = join(dir, "t.avlm");
    const cells = new Float32Array(96 * 64);
    for (let i = 0; i < cells.length; i++) cells[i] = Math.fround(i * 0.001 - 3);
    writeLogMel(path, { clipId: "clip-x", nFrames: 96, nMels: 64, cells });
    const back = readLogMel(path);
    expect(back.clipId).toBe("clip-x");
    expect(back.nFrames).toBe(96);
    expect(back.nMels).toBe(64);
    expect(Array.from(back.cells)).toEqual(Array.from(cells));
  });
});

describe("WAV codec", () => {
  it("float32 round-trip and stereo downmix", () => {
    const dir = tempDir();
    const path = join(dir, "t.wav");
    const samples = new Float64Array(1600);
    for (let i = 0; i < samples.length; i++) samples[i] = 0.3 * Math.sin((2 * Math.PI * 440 * i) / 16000);
    writeWavFloat32(path, samples, 16000);
    const back = readWav(path);
    expect(back.sampleRate).toBe(16000);
    expect(back.samples.length).toBe(1600);
    let worst = 0;
    for (let i = 0; i < samples.length; i++) {
      worst = Math.max(worst, Math.abs(back.samples[i] - Math.fround(samples[i])));
    }
    expect(worst).toBe(0);
  });
});
