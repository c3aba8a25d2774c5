/** Reader for the toolkit's tab-separated manifest files. */

import { readFileSync } from "node:fs";

export interface ManifestEntry {
  id: string;
  mediaPath: string;
  label: "violent" | "nonviolent";
  split: "train" | "val" | "unassigned";
  durationS: number;
  provenance: string;
}

export function loadManifest(path: string): ManifestEntry[] {
  const text = readFileSync(path, "utf-8");
  const entries: ManifestEntry[] = [];
  const seen = new Set<string>();
  text.split("\n").forEach((line, index) => {
    if (line.trim() === "") return;
    const fields = line.split("\t");
    if (fields.length !== 6) {
      throw new Error(`${path}:${index + 1}: expected 6 tab-separated fields, got ${fields.length}`);
    }
    const [id, mediaPath, label, split, durationS, provenance] = fields;
    if (label !== "violent" && label !== "nonviolent") {
      throw new Error(`${path}:${index + 1}: unknown label ${label}`);
    }
    if (split !== "train" && split !== "val" && split !== "unassigned") {
      throw new Error(`${path}:${index + 1}: unknown split ${split}`);
    }
    if (seen.has(id)) {
      throw new Error(`${path}:${index + 1}: duplicate clip id ${id}`);
    }
    seen.add(id);
    entries.push({ id, mediaPath, label, split, durationS: Number(durationS), provenance });
  });
  return entries;
}
