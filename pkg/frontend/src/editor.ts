/**
 * Ground-truth editing and status transitions under the revision
 * protocol, plus the reprocess-preview cache.
 *
 * Every save carries the revision the editor loaded; a 409 means
 * someone else won the race, so the flow refetches the server copy and
 * surfaces a conflict for the user to merge by hand. Nothing is ever
 * overwritten silently, and no local state flips without a server ack.
 */

import {
  ApiError,
  ReviewApi,
  type ReprocessParams,
  type ReprocessResponse,
  type SampleStatus,
  type SampleView,
  type Violation,
} from "./api.js";

export type SaveResult =
  | { outcome: "saved"; sample: SampleView }
  | { outcome: "conflict"; server: SampleView }
  | { outcome: "invalid"; violations: Violation[] };

function violationsFrom(detail: unknown): Violation[] {
  if (detail && typeof detail === "object" && "violations" in detail) {
    return (detail as { violations: Violation[] }).violations;
  }
  return [];
}

export async function saveGroundTruth(
  api: ReviewApi,
  sample: SampleView,
  newText: string,
  force = false,
): Promise<SaveResult> {
  try {
    const saved = await api.patchSample(sample.id, {
      ground_truth: newText,
      expected_revision: sample.revision,
      force,
    });
    return { outcome: "saved", sample: saved };
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      const server = await api.getSample(sample.id);
      return { outcome: "conflict", server };
    }
    if (error instanceof ApiError && error.status === 422) {
      return { outcome: "invalid", violations: violationsFrom(error.detail) };
    }
    throw error;
  }
}

export async function saveStatus(
  api: ReviewApi,
  sample: SampleView,
  status: SampleStatus,
): Promise<SaveResult> {
  try {
    const saved = await api.patchSample(sample.id, {
      status,
      expected_revision: sample.revision,
    });
    return { outcome: "saved", sample: saved };
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      const server = await api.getSample(sample.id);
      return { outcome: "conflict", server };
    }
    throw error;
  }
}

export interface TextSegment {
  text: string;
  invalid: boolean;
}

/** Split text into segments so violating codepoints render with inline
 * markers at their exact positions. */
export function markViolations(text: string, violations: Violation[]): TextSegment[] {
  const bad = new Set(violations.map((v) => v.position));
  const segments: TextSegment[] = [];
  for (const [i, ch] of [...text].entries()) {
    const invalid = bad.has(i);
    const last = segments[segments.length - 1];
    if (last && last.invalid === invalid) {
      last.text += ch;
    } else {
      segments.push({ text: ch, invalid });
    }
  }
  return segments;
}

/**
 * Reprocess previews keyed by (sample, params, revision): repeating a
 * preview with unchanged inputs reuses the cached result instead of
 * re-POSTing, since the pipeline is deterministic for a given raw image.
 */
export class ReprocessPreview {
  private cache = new Map<string, ReprocessResponse>();

  constructor(private readonly api: ReviewApi) {}

  key(sampleId: string, params: ReprocessParams, revision: number): string {
    return `${sampleId}|${params.blur_k ?? 4}|${params.threshold ?? 127}|${
      params.invert ?? true
    }|${revision}`;
  }

  async preview(
    sample: SampleView,
    params: ReprocessParams,
  ): Promise<{ result: ReprocessResponse; cached: boolean }> {
    const key = this.key(sample.id, params, sample.revision);
    const hit = this.cache.get(key);
    if (hit) {
      return { result: hit, cached: true };
    }
    const result = await this.api.reprocess(sample.id, params);
    // reprocess bumps the revision, so future keys use the new one
    this.cache.set(this.key(sample.id, params, result.revision), result);
    this.cache.set(key, result);
    return { result, cached: false };
  }
}
