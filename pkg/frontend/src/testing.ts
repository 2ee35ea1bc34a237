/**
 * In-memory stand-in for the review service, speaking the same wire
 * contract (status codes, detail shapes, revision protocol). Tests plug
 * its fetch into ReviewApi, so the client code under test is exactly
 * what the browser runs.
 */

import type { FetchLike, SampleView, Violation } from "./api.js";

const SYRIAC = /^[ܐ-ܯ .:܀-܂]$/;

export interface FakeServiceOptions {
  samples: SampleView[];
  recognitions?: Record<string, unknown>;
}

export class FakeService {
  samples = new Map<string, SampleView>();
  reprocessCalls = 0;
  patchAttempts = 0;
  private recognitions: Record<string, unknown>;

  constructor(options: FakeServiceOptions) {
    for (const sample of options.samples) {
      this.samples.set(sample.id, { ...sample });
    }
    this.recognitions = options.recognitions ?? {};
  }

  get fetch(): FetchLike {
    return (input, init) => Promise.resolve(this.route(input, init));
  }

  private json(body: unknown, status = 200): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  private route(url: string, init?: RequestInit): Response {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    const path = url.replace(/^https?:\/\/[^/]+/, "").split("?")[0];

    if (method === "GET" && path === "/samples") {
      const items = [...this.samples.values()].sort((a, b) => a.id.localeCompare(b.id));
      return this.json({ items, total: items.length, page: 1, pages: 1 });
    }
    const sampleMatch = path.match(/^\/samples\/([^/]+)$/);
    if (sampleMatch) {
      const sample = this.samples.get(sampleMatch[1]);
      if (!sample) return this.json({ detail: "no such sample" }, 404);
      if (method === "GET") return this.json(sample);
      if (method === "PATCH") return this.patch(sample, body);
    }
    const actionMatch = path.match(/^\/samples\/([^/]+)\/(reprocess|recognize)$/);
    if (actionMatch) {
      const sample = this.samples.get(actionMatch[1]);
      if (!sample) return this.json({ detail: "no such sample" }, 404);
      if (actionMatch[2] === "reprocess") {
        this.reprocessCalls += 1;
        sample.revision += 1;
        if (!sample.stages.includes("processed")) sample.stages.push("processed");
        return this.json({
          id: sample.id,
          revision: sample.revision,
          stage: "processed",
          width: 1200,
          height: 110,
          low_contrast: (body?.threshold ?? 127) === 0,
        });
      }
      const payload = this.recognitions[sample.id];
      if (!payload) return this.json({ detail: "no engine" }, 404);
      return this.json(payload);
    }
    return this.json({ detail: "not found" }, 404);
  }

  private patch(
    sample: SampleView,
    body: { ground_truth?: string; status?: string; expected_revision: number; force?: boolean },
  ): Response {
    this.patchAttempts += 1;
    if (body.expected_revision !== sample.revision) {
      return this.json(
        { detail: { error: "revision conflict", current_revision: sample.revision } },
        409,
      );
    }
    if (body.ground_truth !== undefined && !body.force) {
      const violations: Violation[] = [];
      for (const [i, ch] of [...body.ground_truth].entries()) {
        if (!SYRIAC.test(ch)) {
          violations.push({
            position: i,
            codepoint: `U+${ch.codePointAt(0)!.toString(16).toUpperCase().padStart(4, "0")}`,
          });
        }
      }
      if (violations.length > 0) {
        return this.json({ detail: { error: "charset violations", violations } }, 422);
      }
    }
    if (body.ground_truth !== undefined) sample.ground_truth = body.ground_truth;
    if (body.status !== undefined) sample.status = body.status as SampleView["status"];
    sample.revision += 1;
    return this.json(sample);
  }
}

export function makeSample(id: string, overrides: Partial<SampleView> = {}): SampleView {
  return {
    id,
    batch: "a",
    author: 1,
    seq: 1,
    ground_truth: "ܐܒ ܓ",
    status: "clean",
    revision: 1,
    split: "unassigned",
    stages: ["raw"],
    ...overrides,
  };
}
