/**
 * Embedding exporter CLI.
 *
 * export: run a registry model over preprocessed tensor files (the prep
 * stage's .avlm / .avfs outputs) and write an AVFE embedding file that the
 * Python toolkit loads without conversion.
 *
 * parity: compare this package's reference log-mel frontend against a
 * prep-audio tensor for the same WAV; passes when the max abs cell
 * difference is below 1e-3.
 */

import { existsSync } from "node:fs";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { DEFAULT_FRONTEND, logMel, maxAbsDiff } from "./dsp";
import { loadManifest } from "./manifest";
import { MODEL_REGISTRY, embedAudio, embedVideo } from "./models";
import { Embedding, Modality, readFrameStack, readLogMel, writeEmbeddings } from "./tensors";
import { readWav } from "./wav";

export interface ExportJob {
  manifestPath: string;
  modality: "audio" | "video";
  tensorsDir: string;
  outPath: string;
  modelId: string;
  batchSize: number;
}

export function runExport(job: ExportJob): number {
  const model = MODEL_REGISTRY[job.modelId];
  if (!model) {
    throw new Error(`unknown model ${job.modelId}; registry: ${Object.keys(MODEL_REGISTRY).join(", ")}`);
  }
  if (model.modality !== job.modality) {
    throw new Error(`model ${job.modelId} is a ${model.modality} encoder, not ${job.modality}`);
  }
  const entries = loadManifest(job.manifestPath);
  const records: Embedding[] = [];
  // batches only bound how much is held before appending; output order is
  // manifest order regardless
  for (let start = 0; start < entries.length; start += job.batchSize) {
    for (const entry of entries.slice(start, start + job.batchSize)) {
      if (job.modality === "audio") {
        const path = join(job.tensorsDir, `${entry.id}.avlm`);
        if (!existsSync(path)) throw new Error(`missing log-mel tensor ${path}`);
        records.push({ clipId: entry.id, values: embedAudio(readLogMel(path)) });
      } else {
        const path = join(job.tensorsDir, `${entry.id}.avfs`);
        if (!existsSync(path)) throw new Error(`missing frame stack ${path}`);
        records.push({ clipId: entry.id, values: embedVideo(readFrameStack(path)) });
      }
    }
  }
  writeEmbeddings(job.outPath, job.modality === "audio" ? Modality.Audio : Modality.Video, records);
  console.log(`wrote ${records.length} ${job.modality} embeddings (dim ${model.outputDim}) to ${job.outPath}`);
  return records.length;
}

export interface ParityResult {
  maxDiff: number;
  frames: number;
  pass: boolean;
}

export function runParity(wavPath: string, tensorPath: string, hopOverride?: number): ParityResult {
  const wav = readWav(wavPath);
  if (wav.sampleRate !== DEFAULT_FRONTEND.sampleRate) {
    throw new Error(`parity fixture must be ${DEFAULT_FRONTEND.sampleRate} Hz, got ${wav.sampleRate}`);
  }
  const params = { ...DEFAULT_FRONTEND, hopLen: hopOverride ?? DEFAULT_FRONTEND.hopLen };
  const reference = logMel(wav.samples, params);
  const tensor = readLogMel(tensorPath);
  const theirs: Float64Array[] = [];
  for (let f = 0; f < tensor.nFrames; f++) {
    theirs.push(Float64Array.from(tensor.cells.subarray(f * tensor.nMels, (f + 1) * tensor.nMels)));
  }
  const maxDiff = maxAbsDiff(reference, theirs);
  return { maxDiff, frames: tensor.nFrames, pass: maxDiff < 1e-3 };
}

function main(argv: string[]): number {
  const command = argv[0];
  if (command === "export") {
    const { values } = parseArgs({
      args: argv.slice(1),
      options: {
        manifest: { type: "string" },
        modality: { type: "string" },
        tensors: { type: "string" },
        out: { type: "string" },
        model: { type: "string" },
        batch: { type: "string", default: "32" },
      },
    });
    if (!values.manifest || !values.modality || !values.tensors || !values.out) {
      console.error("usage: export --manifest M --modality audio|video --tensors DIR --out F [--model ID] [--batch N]");
      return 2;
    }
    if (values.modality !== "audio" && values.modality !== "video") {
      console.error(`bad modality ${values.modality}`);
      return 2;
    }
    runExport({
      manifestPath: values.manifest,
      modality: values.modality,
      tensorsDir: values.tensors,
      outPath: values.out,
      modelId: values.model ?? (values.modality === "audio" ? "vggish-ref" : "i3d-ref"),
      batchSize: Math.max(1, Number(values.batch)),
    });
    return 0;
  }
  if (command === "parity") {
    const { values } = parseArgs({
      args: argv.slice(1),
      options: {
        wav: { type: "string" },
        tensor: { type: "string" },
        hop: { type: "string" },
      },
    });
    if (!values.wav || !values.tensor) {
      console.error("usage: parity --wav FILE --tensor FILE [--hop N]");
      return 2;
    }
    const result = runParity(values.wav, values.tensor, values.hop ? Number(values.hop) : undefined);
    console.log(
      `parity: max abs diff ${result.maxDiff.toExponential(3)} over ${result.frames} frames -> ` +
        (result.pass ? "PASS" : "FAIL"),
    );
    return result.pass ? 0 : 1;
  }
  console.error("usage: exporter <export|parity> ...");
  return 2;
}

if (process.argv[1] && (process.argv[1].endsWith("export.ts") || process.argv[1].endsWith("export.js"))) {
  try {
    process.exit(main(process.argv.slice(2)));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(3);
  }
}
